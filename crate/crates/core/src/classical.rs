//! Closed-form classical orbits and orbit-crossing detection for particle 1.

use std::f64::consts::PI;

use crate::model::{packet_labels, same_group, ModelConfig};
use crate::normal_modes::NormalModeBasis;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassicalState {
    pub x: [f64; 3],
    pub v: [f64; 3],
}

impl ClassicalState {
    pub fn at_rest(x: [f64; 3]) -> Self {
        Self { x, v: [0.0; 3] }
    }
}

/// Amplitudes of `z₁ = A₁ sin Ω₁τ + B₁ cos Ω₁τ`, `z₂` likewise, and
/// `z₃ = C₁τ + C₂`, with `τ = t − t0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegralConstants {
    pub a1: f64,
    pub b1: f64,
    pub a2: f64,
    pub b2: f64,
    pub c1: f64,
    pub c2: f64,
}

/// Phases are measured from `t0`, so the constants do not depend on it.
pub fn integral_constants(state0: &ClassicalState, basis: &NormalModeBasis) -> IntegralConstants {
    let z = basis.to_normal(state0.x);
    let zd = basis.to_normal(state0.v);
    let [w1, w2] = basis.mode_frequencies;
    IntegralConstants { a1: zd[0] / w1, b1: z[0], a2: zd[1] / w2, b2: z[1], c1: zd[2], c2: z[2] }
}

/// Normal coordinates and their velocities at `t`.
pub fn normal_orbit(
    state0: &ClassicalState,
    basis: &NormalModeBasis,
    t0: f64,
    t: f64,
) -> ([f64; 3], [f64; 3]) {
    let k = integral_constants(state0, basis);
    let tau = t - t0;
    let [w1, w2] = basis.mode_frequencies;
    let (s1, c1) = (w1 * tau).sin_cos();
    let (s2, c2) = (w2 * tau).sin_cos();
    let z = [k.a1 * s1 + k.b1 * c1, k.a2 * s2 + k.b2 * c2, k.c1 * tau + k.c2];
    let zd = [w1 * (k.a1 * c1 - k.b1 * s1), w2 * (k.a2 * c2 - k.b2 * s2), k.c1];
    (z, zd)
}

/// State at `t` on the orbit through `state0` at `t0`.
pub fn orbit(state0: &ClassicalState, basis: &NormalModeBasis, t0: f64, t: f64) -> ClassicalState {
    let (z, zd) = normal_orbit(state0, basis, t0, t);
    ClassicalState { x: basis.from_normal(z), v: basis.from_normal(zd) }
}

/// Kinetic plus spring energy.
pub fn energy(state: &ClassicalState, config: &ModelConfig) -> f64 {
    let m = config.mass;
    let [w12, w13, w23] = config.omegas().map(|w| w * w);
    let [x1, x2, x3] = state.x;
    let kinetic = 0.5 * m * state.v.iter().map(|v| v * v).sum::<f64>();
    let potential =
        0.5 * m * (w12 * (x1 - x2).powi(2) + w13 * (x1 - x3).powi(2) + w23 * (x2 - x3).powi(2));
    kinetic + potential
}

/// Particle-1 traces of the eight packet-centre orbits, all starting at rest.
#[derive(Debug, Clone, PartialEq)]
pub struct OrbitEnsemble {
    pub initial_states: Vec<ClassicalState>,
    pub times: Vec<f64>,
    /// `x1[orbit][sample]`.
    pub x1: Vec<Vec<f64>>,
}

pub fn ensemble(config: &ModelConfig, basis: &NormalModeBasis, times: &[f64]) -> OrbitEnsemble {
    let initial_states: Vec<_> = packet_labels(config)
        .iter()
        .map(|l| ClassicalState::at_rest(l.disp))
        .collect();
    let x1 = initial_states
        .iter()
        .map(|s| times.iter().map(|&t| orbit(s, basis, config.t0, t).x[0]).collect())
        .collect();
    OrbitEnsemble { initial_states, times: times.to_vec(), x1 }
}

/// Bounds on every particle coordinate any ensemble orbit can reach.
///
/// Uses the bound `|zᵢ(t)| ≤ √(Aᵢ² + Bᵢ²)`, so it is valid for every `t`.
pub fn orbit_extent(config: &ModelConfig, basis: &NormalModeBasis) -> [(f64, f64); 3] {
    let mut ext = [(f64::INFINITY, f64::NEG_INFINITY); 3];
    for label in packet_labels(config) {
        let k = integral_constants(&ClassicalState::at_rest(label.disp), basis);
        let r1 = k.a1.hypot(k.b1);
        let r2 = k.a2.hypot(k.b2);
        let cols = [basis.xi, basis.eta, basis.zeta];
        for (i, e) in ext.iter_mut().enumerate() {
            let swing = r1 * cols[i][0].abs() + r2 * cols[i][1].abs();
            e.0 = e.0.min(k.c2 - swing);
            e.1 = e.1.max(k.c2 + swing);
        }
    }
    ext
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrossingEvent {
    pub t: f64,
    /// Lower orbit index of the pair.
    pub orbit_i: usize,
    pub orbit_j: usize,
    /// Both orbits start with particle 1 at the same place.
    pub same_group: bool,
}

/// Sign changes of `x1⁽ⁱ⁾ − x1⁽ʲ⁾` between samples, for every orbit pair.
///
/// Exact zeros are skipped when deciding the sign, so a touch that returns to
/// the same side is not a crossing and identical orbits never cross.
pub fn detect_crossings(ensemble: &OrbitEnsemble) -> Vec<CrossingEvent> {
    let n = ensemble.x1.len();
    let times = &ensemble.times;
    let mut events = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let diff: Vec<f64> = ensemble.x1[i]
                .iter()
                .zip(&ensemble.x1[j])
                .map(|(a, b)| a - b)
                .collect();
            let mut last: Option<(usize, f64)> = None;
            for (s, &dv) in diff.iter().enumerate() {
                if dv == 0.0 {
                    continue;
                }
                if let Some((ls, lv)) = last {
                    if lv.signum() != dv.signum() {
                        let t = if ls + 1 == s {
                            let frac = lv / (lv - dv);
                            times[ls] + frac * (times[s] - times[ls])
                        } else {
                            times[ls + 1]
                        };
                        events.push(CrossingEvent {
                            t,
                            orbit_i: i,
                            orbit_j: j,
                            same_group: same_group(i, j),
                        });
                    }
                }
                last = Some((s, dv));
            }
        }
    }
    events.sort_by(|a, b| {
        a.t.total_cmp(&b.t)
            .then(a.orbit_i.cmp(&b.orbit_i))
            .then(a.orbit_j.cmp(&b.orbit_j))
    });
    events
}

/// Default gap that ends a crossing cluster: one eighth of the shorter period.
pub fn default_cluster_gap(basis: &NormalModeBasis) -> f64 {
    let fastest = basis.mode_frequencies[0].max(basis.mode_frequencies[1]);
    2.0 * PI / fastest / 8.0
}

/// Span of the first cluster of cross-group crossings: starts at the earliest
/// one and extends while consecutive crossings are at most `max_gap` apart.
pub fn crossing_window(events: &[CrossingEvent], max_gap: f64) -> Option<(f64, f64)> {
    let mut times = events.iter().filter(|e| !e.same_group).map(|e| e.t);
    let start = times.next()?;
    let mut end = start;
    for t in times {
        if t - end > max_gap {
            break;
        }
        end = t;
    }
    Some((start, end))
}
