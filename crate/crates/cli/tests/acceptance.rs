//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use tricat_core::cat_state::{delta_expanded, kernel, phi_coefficients, phi_direct};
use tricat_core::classical::{energy, orbit, ClassicalState};
use tricat_core::model::{packet_labels, ModelConfig, PRESET_TIMES};
use tricat_core::normal_modes::{coupling_matrix, delta_omega_sq, diagonalize};
use tricat_core::oracle::{
    advance, initial_state, jacobi_eigensolve, oracle_domain, oracle_marginal, InitialState,
    OracleOptions,
};
use tricat_core::propagator::coefficients;
use tricat_core::quadrature::simpson;
use tricat_core::reduced_density::{marginal_at, packet_set};
use tricat_core::Error;

// Tolerances of each criterion.
const EIGEN_REL: f64 = 1e-10;
const DIAGONAL_REL: f64 = 1e-12;
const ENERGY_DRIFT: f64 = 1e-10;
const CENTROID_DEVIATION: f64 = 1e-4;
const ORACLE_L1: f64 = 1e-3;
const MASS_TOLERANCE: f64 = 1e-6;
const NEGATIVITY: f64 = 1e-10;
const ROUTE_REL: f64 = 1e-10;
const DAMPING_FRACTION: f64 = 0.5;
const LATE_TIME: f64 = 205.605;
const EARLY_LIMIT: f64 = 5.605;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn random_couplings(rng: &mut StdRng) -> [f64; 3] {
    loop {
        let w: [f64; 3] = std::array::from_fn(|_| rng.gen_range(0.05..1.0));
        let hi = w.iter().cloned().fold(0.0, f64::max);
        let lo = w.iter().cloned().fold(f64::INFINITY, f64::min);
        if hi - lo > 0.02 {
            return w;
        }
    }
}

fn eigenstructure() -> Outcome {
    let mut rng = StdRng::seed_from_u64(0x5eed_0001);
    let (mut worst_eig, mut worst_diag) = (0.0f64, 0.0f64);
    for _ in 0..100 {
        let w = random_couplings(&mut rng);
        let cfg = ModelConfig { omega12: w[0], omega13: w[1], omega23: w[2], ..Default::default() };
        let basis = match diagonalize(&cfg) {
            Ok(b) => b,
            Err(e) => return outcome(false, format!("{w:?}: {e}")),
        };
        let wm = coupling_matrix(&cfg);
        let (vals, _) = jacobi_eigensolve(&wm).expect("symmetric");
        let scale = vals[2].abs();
        worst_eig = worst_eig
            .max(vals[0].abs() / scale)
            .max((vals[1] - basis.lambda[0]).abs() / scale)
            .max((vals[2] - basis.lambda[1]).abs() / scale);
        let d = basis.p * wm * basis.p_inv;
        for i in 0..3 {
            for j in 0..3 {
                if i != j {
                    worst_diag = worst_diag.max(d[(i, j)].abs() / scale);
                }
            }
        }
    }
    outcome(
        worst_eig < EIGEN_REL && worst_diag < DIAGONAL_REL,
        format!("max eigenvalue error {worst_eig:.2e}, max off-diagonal {worst_diag:.2e} (100 configs)"),
    )
}

fn symmetric_rejected() -> Outcome {
    let mut notes = Vec::new();
    let mut pass = true;
    for c in [0.1, 0.305, 0.7, 1.3] {
        let cfg = ModelConfig { omega12: c, omega13: c, omega23: c, ..Default::default() };
        let dw = delta_omega_sq(&cfg);
        let rejected = matches!(diagonalize(&cfg), Err(Error::DegenerateCoupling { .. }));
        pass &= dw == 0.0 && rejected;
        notes.push(format!("c={c}: Δω²={dw}, rejected={rejected}"));
    }
    outcome(pass, notes.join("; "))
}

fn energy_conservation() -> Outcome {
    let cfg = ModelConfig::default();
    let basis = diagonalize(&cfg).unwrap();
    let mut states: Vec<ClassicalState> =
        packet_labels(&cfg).iter().map(|l| ClassicalState::at_rest(l.disp)).collect();
    states.push(ClassicalState { x: [1.0, -2.0, 0.5], v: [0.3, -0.1, 0.7] });
    states.push(ClassicalState { x: [0.0, 0.0, 0.0], v: [1.0, 0.0, -1.0] });
    let mut worst = 0.0f64;
    for s0 in states.iter().filter(|s| energy(s, &cfg) > 0.0) {
        let e0 = energy(s0, &cfg);
        for i in 0..10_000 {
            let t = 100.0 * i as f64 / 9_999.0;
            let e = energy(&orbit(s0, &basis, 0.0, t), &cfg);
            worst = worst.max((e - e0).abs() / e0);
        }
    }
    outcome(worst < ENERGY_DRIFT, format!("max relative drift {worst:.2e} over t in [0, 100], 10^4 samples"))
}

fn centroid_follows_orbit() -> Outcome {
    let cfg = ModelConfig::default();
    let basis = diagonalize(&cfg).unwrap();
    let center = [1.5, -1.0, 0.5];
    let init = InitialState::Gaussian { center };
    let opts = OracleOptions::default();
    let t_final = 0.2;
    let domain = match oracle_domain(&cfg, init, t_final, &opts) {
        Ok(d) => d,
        Err(e) => return outcome(false, e.to_string()),
    };
    let mut state = initial_state(&cfg, init, domain, opts.n);
    let mut worst = 0.0f64;
    for step in 1..=4 {
        let t = 0.05 * step as f64;
        state = match advance(&cfg, state, t, &opts) {
            Ok(s) => s,
            Err(e) => return outcome(false, e.to_string()),
        };
        let classical = orbit(&ClassicalState::at_rest(center), &basis, 0.0, t).x[0];
        worst = worst.max((state.mean_position()[0] - classical).abs());
    }
    outcome(worst < CENTROID_DEVIATION, format!("max |<x1> - x1(t)| = {worst:.2e} on 64^3, t <= 0.2"))
}

fn pipeline_matches_oracle() -> Outcome {
    let cfg = ModelConfig { d: [4.0; 3], times: vec![0.1], ..Default::default() };
    let t = 0.1;
    let om = match oracle_marginal(&cfg, t, &OracleOptions::default()) {
        Ok(m) => m,
        Err(e) => return outcome(false, e.to_string()),
    };
    let basis = diagonalize(&cfg).unwrap();
    let set = packet_set(&cfg, &basis, t).unwrap();
    let analytic = marginal_at(&set, &cfg, &om.x1).unwrap();
    let h = om.x1[1] - om.x1[0];
    let l1: f64 = om
        .rho
        .iter()
        .zip(&analytic)
        .map(|(o, a)| (o - (a[0] + a[1] + a[2])).abs())
        .sum::<f64>()
        * h;
    outcome(l1 < ORACLE_L1, format!("L1 = {l1:.2e} at t = 0.1 with d = 4 sigma, grid norm {:.12}", om.norm))
}

fn two_route_algebra() -> Outcome {
    let cfg = ModelConfig::default();
    let basis = diagonalize(&cfg).unwrap();
    let mut rng = StdRng::seed_from_u64(0x5eed_0007);
    let (mut worst_delta, mut worst_phi) = (0.0f64, 0.0f64);
    let mut used = 0;
    while used < 20 {
        let t = rng.gen_range(0.01..50.0);
        let Ok(c) = coefficients(&basis, 0.0, t) else { continue };
        if basis.frequencies.iter().any(|w| (w * t).sin().abs() < 1e-3) {
            continue;
        }
        used += 1;
        let k = kernel(&c, &cfg).unwrap();
        worst_delta = worst_delta.max((delta_expanded(&c, &cfg) - k.delta).norm() / k.delta.norm());
        let x: [f64; 3] = std::array::from_fn(|_| rng.gen_range(-10.0..10.0));
        for label in packet_labels(&cfg) {
            let a = phi_coefficients(&k, &c, &label, &cfg).eval(x);
            let b = phi_direct(&k, &c, &label, &cfg, x);
            worst_phi = worst_phi.max((a - b).norm() / b.norm().max(1e-300));
        }
    }
    outcome(
        worst_delta < ROUTE_REL && worst_phi < ROUTE_REL,
        format!("max relative gap: Delta {worst_delta:.2e}, Phi {worst_phi:.2e} (20 times)"),
    )
}

fn tricat(args: &[&str]) -> Result<String, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_tricat"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(String::from_utf8_lossy(&out.stdout).into_owned())
    } else {
        Err(String::from_utf8_lossy(&out.stderr).trim().to_owned())
    }
}

fn read_csv(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path)
        .unwrap_or_default()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(str::to_owned).collect())
        .collect()
}

fn csv_files(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir)
        .map(|rd| {
            rd.filter_map(|e| e.ok())
                .map(|e| e.file_name().to_string_lossy().into_owned())
                .filter(|n| n.ends_with(".csv"))
                .map(|n| {
                    let bytes = fs::read(dir.join(&n)).unwrap_or_default();
                    (n, bytes)
                })
                .collect()
        })
        .unwrap_or_default()
}

fn ladder_normalization(dir: &Path) -> Outcome {
    let mut worst_mass = 0.0f64;
    let mut worst_neg = 0.0f64;
    let mut seen = 0;
    for &t in PRESET_TIMES.iter() {
        let rows = read_csv(&dir.join(format!("rho_t{t}.csv")));
        if rows.is_empty() {
            return outcome(false, format!("missing density for t = {t}"));
        }
        let x: Vec<f64> = rows.iter().map(|r| r[0].parse().unwrap()).collect();
        let rho: Vec<f64> = rows.iter().map(|r| r[4].parse().unwrap()).collect();
        let h = (x[x.len() - 1] - x[0]) / (x.len() - 1) as f64;
        let mass = simpson(&rho, h).unwrap_or(f64::NAN);
        let peak = rho.iter().cloned().fold(0.0, f64::max);
        let min = rho.iter().cloned().fold(f64::INFINITY, f64::min);
        worst_mass = worst_mass.max((mass - 1.0).abs());
        worst_neg = worst_neg.max(-min / peak);
        seen += 1;
    }
    outcome(
        seen == PRESET_TIMES.len() && worst_mass < MASS_TOLERANCE && worst_neg < NEGATIVITY,
        format!("{seen} times, max |mass - 1| = {worst_mass:.2e}, max negativity/peak = {worst_neg:.2e}"),
    )
}

fn strength_series(rows: &[Vec<String>]) -> Vec<(f64, f64)> {
    rows.iter()
        .filter(|r| r[2] == "0")
        .map(|r| (r[0].parse().unwrap(), r[1].parse().unwrap()))
        .collect()
}

fn late_damping(ladder_dir: &Path, scan_dir: &Path) -> Outcome {
    let ladder = strength_series(&read_csv(&ladder_dir.join("decoherence.csv")));
    let scan = strength_series(&read_csv(&scan_dir.join("scan.csv")));
    let early_max = ladder
        .iter()
        .chain(&scan)
        .filter(|(t, _)| *t <= EARLY_LIMIT + 1e-9)
        .map(|p| p.1)
        .fold(f64::NEG_INFINITY, f64::max);
    let Some(&(_, late)) = ladder.iter().find(|(t, _)| (*t - LATE_TIME).abs() < 1e-9) else {
        return outcome(false, format!("no sample at t = {LATE_TIME}"));
    };
    outcome(
        late < DAMPING_FRACTION * early_max,
        format!(
            "I({LATE_TIME}) = {late:.4}, max I over t <= {EARLY_LIMIT} = {early_max:.4}, ratio {:.3} (need < {DAMPING_FRACTION})",
            late / early_max
        ),
    )
}

fn window_overlap(report: &str) -> Outcome {
    let kv: BTreeMap<&str, &str> = report
        .lines()
        .filter_map(|l| l.split_once(" = "))
        .collect();
    let get = |k: &str| kv.get(k).copied().unwrap_or("none");
    let pass = get("overlap") == "yes"
        && get("crossing_window_start") != "none"
        && get("damping_window_end") != "none";
    outcome(
        pass,
        format!(
            "crossings [{}, {}], damping [{}, {}], overlap [{}, {}]",
            get("crossing_window_start"),
            get("crossing_window_end"),
            get("damping_window_start"),
            get("damping_window_end"),
            get("overlap_start"),
            get("overlap_end"),
        ),
    )
}

fn identical_outputs(a: &Path, b: &Path) -> Outcome {
    let (fa, fb) = (csv_files(a), csv_files(b));
    let differing: Vec<&String> = fa.keys().filter(|k| fa.get(*k) != fb.get(*k)).collect();
    let pass = !fa.is_empty() && fa.len() == fb.len() && differing.is_empty();
    outcome(pass, format!("{} CSV files compared, {} differ (threads 1 vs 2)", fa.len(), differing.len()))
}

fn main() {
    let tmp = tempfile::tempdir().expect("temp dir");
    let ladder1 = tmp.path().join("ladder-1");
    let ladder2 = tmp.path().join("ladder-2");
    let scan = tmp.path().join("scan");
    let s = |p: &Path| p.to_string_lossy().into_owned();

    let mut results: Vec<(u32, &str, Outcome, f64)> = Vec::new();
    let mut check = |id: u32, name: &'static str, f: &mut dyn FnMut() -> Outcome| {
        let start = Instant::now();
        let o = f();
        let secs = start.elapsed().as_secs_f64();
        println!(
            "criterion {id:>2} [{}] {name}: {} ({secs:.1} s)",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
        results.push((id, name, o, secs));
    };

    check(1, "eigenstructure", &mut eigenstructure);
    check(2, "symmetric coupling rejected", &mut symmetric_rejected);
    check(3, "classical energy conservation", &mut energy_conservation);
    check(4, "grid centroid follows classical orbit", &mut centroid_follows_orbit);
    check(5, "analytic density matches grid oracle", &mut pipeline_matches_oracle);

    let run1 = tricat(&["reproduce-paper", "--threads", "1", "--out", &s(&ladder1)]);
    check(6, "normalization and positivity on the ladder", &mut || match &run1 {
        Ok(_) => ladder_normalization(&ladder1),
        Err(e) => outcome(false, e.clone()),
    });
    check(7, "two-route algebra", &mut two_route_algebra);

    let report = tricat(&["correlate", "--out", &s(&scan)]);
    check(8, "late-time interference damping", &mut || match (&run1, &report) {
        (Ok(_), Ok(_)) => late_damping(&ladder1, &scan),
        (Err(e), _) | (_, Err(e)) => outcome(false, e.clone()),
    });
    check(9, "crossing and damping windows overlap", &mut || match &report {
        Ok(r) => window_overlap(r),
        Err(e) => outcome(false, e.clone()),
    });
    check(10, "thread-count determinism", &mut || {
        match tricat(&["reproduce-paper", "--threads", "2", "--out", &s(&ladder2)]) {
            Ok(_) => identical_outputs(&ladder1, &ladder2),
            Err(e) => outcome(false, e),
        }
    });

    let failed: Vec<u32> = results.iter().filter(|r| !r.2.pass).map(|r| r.0).collect();
    println!(
        "acceptance: {} of {} criteria pass{}",
        results.len() - failed.len(),
        results.len(),
        if failed.is_empty() { String::new() } else { format!("; failing: {failed:?}") }
    );
    if !failed.is_empty() {
        std::process::exit(1);
    }
}
