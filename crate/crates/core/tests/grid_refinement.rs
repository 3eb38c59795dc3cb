use tricat_core::model::{GridSpec, ModelConfig, PRESET_TIMES};
use tricat_core::reduced_density::decoherence_series;

fn strengths(quad: usize) -> Vec<f64> {
    let cfg = ModelConfig {
        x1_grid: GridSpec::Auto { count: 401 },
        quad_grid: GridSpec::Auto { count: quad },
        ..Default::default()
    };
    decoherence_series(&cfg)
        .unwrap()
        .iter()
        .map(|e| e.interference_strength().expect("sample evaluated"))
        .collect()
}

#[test]
fn doubling_quadrature_leaves_strength_unchanged() {
    let coarse = strengths(129);
    let fine = strengths(257);
    assert_eq!(coarse.len(), PRESET_TIMES.len());
    for ((t, a), b) in PRESET_TIMES.iter().zip(&coarse).zip(&fine) {
        assert!((a - b).abs() < 1e-4, "t={t}: {a} vs {b}");
    }
}
