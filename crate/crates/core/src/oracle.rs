//! Brute-force references: a cyclic Jacobi eigensolver for the coupling
//! matrix and a split-operator Schrödinger integrator on a periodic 3-D grid.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::Matrix3;
use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use crate::classical::{orbit, ClassicalState};
use crate::error::{Error, Result};
use crate::model::{packet_labels, ModelConfig};
use crate::normal_modes::diagonalize;

/// Off-diagonal Frobenius norm at which the Jacobi sweeps stop.
pub const JACOBI_TOLERANCE: f64 = 1e-14;
/// Largest time step the integrator accepts.
pub const MAX_STEP: f64 = 1e-3;
/// Smallest padding, in units of `σ`, between the classical extent and the walls.
pub const MIN_PADDING_SIGMAS: f64 = 4.0;

/// Eigenvalues (descending) and orthonormal eigenvectors (as columns) of a
/// symmetric 3×3 matrix.
pub fn jacobi_eigensolve(w: &Matrix3<f64>) -> Result<([f64; 3], Matrix3<f64>)> {
    let asym = (w - w.transpose()).abs().max();
    if asym > 1e-12 * w.abs().max().max(1.0) {
        return Err(Error::NonSymmetricInput(asym));
    }
    let mut a = 0.5 * (w + w.transpose());
    let mut v = Matrix3::<f64>::identity();
    let off = |a: &Matrix3<f64>| (2.0 * (a[(0, 1)].powi(2) + a[(0, 2)].powi(2) + a[(1, 2)].powi(2))).sqrt();
    let scale = a.norm().max(f64::MIN_POSITIVE);
    for _sweep in 0..64 {
        if off(&a) <= JACOBI_TOLERANCE * scale {
            break;
        }
        for (p, q) in [(0, 1), (0, 2), (1, 2)] {
            let apq = a[(p, q)];
            if apq == 0.0 {
                continue;
            }
            let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
            let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
            let t = if theta == 0.0 { 1.0 } else { t };
            let c = 1.0 / (t * t + 1.0).sqrt();
            let s = t * c;
            let mut rot = Matrix3::<f64>::identity();
            rot[(p, p)] = c;
            rot[(q, q)] = c;
            rot[(p, q)] = s;
            rot[(q, p)] = -s;
            a = rot.transpose() * a * rot;
            a[(p, q)] = 0.0;
            a[(q, p)] = 0.0;
            v *= rot;
        }
    }
    let mut order = [0usize, 1, 2];
    order.sort_by(|&i, &j| a[(j, j)].total_cmp(&a[(i, i)]));
    let vals = order.map(|i| a[(i, i)]);
    let vecs = Matrix3::from_fn(|r, c| v[(r, order[c])]);
    Ok((vals, vecs))
}

/// Initial wavefunction placed on the grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitialState {
    /// The full eight-packet cat product.
    Cat,
    /// The half of the cat with particle 1 at the origin (`false`) or at
    /// `d₁` (`true`), normalized so the two halves sum to [`InitialState::Cat`].
    CatGroup { particle1_displaced: bool },
    /// A single product Gaussian with widths `σ`.
    Gaussian { center: [f64; 3] },
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleOptions {
    /// Points per axis.
    pub n: usize,
    /// Requested time step; the run uses the largest step `≤` this that
    /// divides the interval evenly.
    pub dt: f64,
    /// Padding beyond the classical extent, in units of `σ`.
    pub padding_sigmas: f64,
    /// Explicit periodic box `[min, max)` per axis, overriding the padding rule.
    pub domain: Option<[(f64, f64); 3]>,
}

impl Default for OracleOptions {
    fn default() -> Self {
        Self { n: 64, dt: MAX_STEP, padding_sigmas: 7.0, domain: None }
    }
}

/// Wavefunction on a periodic `n³` grid. Index `(i·n + j)·n + k` holds
/// `ψ(x₁ᵢ, x₂ⱼ, x₃ₖ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridState {
    pub n: usize,
    pub lo: [f64; 3],
    pub dx: [f64; 3],
    pub psi: Vec<Complex64>,
    pub dt: f64,
    pub t: f64,
}

impl GridState {
    pub fn axis(&self, i: usize) -> Vec<f64> {
        (0..self.n).map(|j| self.lo[i] + j as f64 * self.dx[i]).collect()
    }

    pub fn cell_volume(&self) -> f64 {
        self.dx.iter().product()
    }

    pub fn norm(&self) -> f64 {
        self.psi.iter().map(|c| c.norm_sqr()).sum::<f64>() * self.cell_volume()
    }

    /// `⟨xᵢ⟩` for each particle.
    pub fn mean_position(&self) -> [f64; 3] {
        let n = self.n;
        let axes = [self.axis(0), self.axis(1), self.axis(2)];
        let mut acc = [0.0; 3];
        let mut total = 0.0;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let p = self.psi[(i * n + j) * n + k].norm_sqr();
                    total += p;
                    acc[0] += p * axes[0][i];
                    acc[1] += p * axes[1][j];
                    acc[2] += p * axes[2][k];
                }
            }
        }
        acc.map(|a| a / total)
    }

    /// Particle-1 marginal `∫|ψ|² dx₂dx₃` at each grid `x₁`.
    pub fn marginal_x1(&self) -> Vec<f64> {
        let n2 = self.n * self.n;
        let a = self.dx[1] * self.dx[2];
        self.psi.chunks(n2).map(|c| c.iter().map(|v| v.norm_sqr()).sum::<f64>() * a).collect()
    }

    /// Particle-1 marginal of `2 Re(ψ φ̄)`.
    pub fn cross_marginal_x1(&self, other: &GridState) -> Vec<f64> {
        let n2 = self.n * self.n;
        let a = self.dx[1] * self.dx[2];
        self.psi
            .chunks(n2)
            .zip(other.psi.chunks(n2))
            .map(|(p, q)| {
                p.iter().zip(q).map(|(x, y)| 2.0 * (x * y.conj()).re).sum::<f64>() * a
            })
            .collect()
    }
}

fn centres(config: &ModelConfig, init: InitialState) -> Vec<[f64; 3]> {
    match init {
        InitialState::Gaussian { center } => vec![center],
        _ => packet_labels(config).iter().map(|l| l.disp).collect(),
    }
}

/// Periodic box for a run from `t0` to `t_final`.
pub fn oracle_domain(
    config: &ModelConfig,
    init: InitialState,
    t_final: f64,
    opts: &OracleOptions,
) -> Result<[(f64, f64); 3]> {
    let basis = diagonalize(config)?;
    let mut ext = [(f64::INFINITY, f64::NEG_INFINITY); 3];
    let samples = 200;
    for c in centres(config, init) {
        let s0 = ClassicalState::at_rest(c);
        for j in 0..=samples {
            let t = config.t0 + (t_final - config.t0) * j as f64 / samples as f64;
            let x = orbit(&s0, &basis, config.t0, t).x;
            for i in 0..3 {
                ext[i].0 = ext[i].0.min(x[i]);
                ext[i].1 = ext[i].1.max(x[i]);
            }
        }
    }
    match opts.domain {
        Some(dom) => {
            for i in 0..3 {
                let pad = MIN_PADDING_SIGMAS * config.sigma[i];
                if dom[i].0 > ext[i].0 - pad || dom[i].1 < ext[i].1 + pad {
                    return Err(Error::BoxTooSmall {
                        axis: i,
                        detail: format!(
                            "[{}, {}) does not contain the orbits' range [{}, {}] padded by {pad}",
                            dom[i].0, dom[i].1, ext[i].0, ext[i].1
                        ),
                    });
                }
            }
            Ok(dom)
        }
        None => {
            if !(opts.padding_sigmas >= MIN_PADDING_SIGMAS) {
                return Err(Error::BoxTooSmall {
                    axis: 0,
                    detail: format!(
                        "padding {}σ is below the minimum {MIN_PADDING_SIGMAS}σ",
                        opts.padding_sigmas
                    ),
                });
            }
            Ok(std::array::from_fn(|i| {
                let pad = opts.padding_sigmas * config.sigma[i];
                (ext[i].0 - pad, ext[i].1 + pad)
            }))
        }
    }
}

fn gaussian(x: f64, c: f64, s: f64) -> f64 {
    (-(x - c).powi(2) / (4.0 * s * s)).exp()
}

/// Initial wavefunction on the box, normalized on the grid.
pub fn initial_state(
    config: &ModelConfig,
    init: InitialState,
    domain: [(f64, f64); 3],
    n: usize,
) -> GridState {
    let dx: [f64; 3] = std::array::from_fn(|i| (domain[i].1 - domain[i].0) / n as f64);
    let lo = domain.map(|d| d.0);
    let axis = |i: usize| -> Vec<f64> { (0..n).map(|j| lo[i] + j as f64 * dx[i]).collect() };
    // separable factors; each normalized to the full cat's axis norm
    let factors: [Vec<f64>; 3] = std::array::from_fn(|i| {
        let s = config.sigma[i];
        let full: Vec<f64> = match init {
            InitialState::Gaussian { center } => {
                axis(i).iter().map(|&x| gaussian(x, center[i], s)).collect()
            }
            _ => axis(i)
                .iter()
                .map(|&x| gaussian(x, 0.0, s) + gaussian(x, config.d[i], s))
                .collect(),
        };
        let norm = (full.iter().map(|v| v * v).sum::<f64>() * dx[i]).sqrt();
        let part: Vec<f64> = match init {
            InitialState::CatGroup { particle1_displaced } if i == 0 => {
                let c = if particle1_displaced { config.d[0] } else { 0.0 };
                axis(i).iter().map(|&x| gaussian(x, c, s)).collect()
            }
            _ => full,
        };
        part.into_iter().map(|v| v / norm).collect()
    });
    let mut psi = vec![Complex64::default(); n * n * n];
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                psi[(i * n + j) * n + k] =
                    Complex64::new(factors[0][i] * factors[1][j] * factors[2][k], 0.0);
            }
        }
    }
    GridState { n, lo, dx, psi, dt: 0.0, t: config.t0 }
}

struct Integrator {
    n: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    half_kick: Vec<Complex64>,
    drift: Vec<Complex64>,
}

impl Integrator {
    fn new(config: &ModelConfig, state: &GridState, dt: f64) -> Self {
        let n = state.n;
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(n);
        let inv = planner.plan_fft_inverse(n);
        let (m, h) = (config.mass, config.hbar);
        let [w12, w13, w23] = config.omegas().map(|w| w * w);
        let axes = [state.axis(0), state.axis(1), state.axis(2)];
        let wave: [Vec<f64>; 3] = std::array::from_fn(|a| {
            let l = state.dx[a] * n as f64;
            (0..n)
                .map(|j| {
                    let s = if j <= n / 2 { j as f64 } else { j as f64 - n as f64 };
                    2.0 * PI * s / l
                })
                .collect()
        });
        let mut half_kick = vec![Complex64::default(); n * n * n];
        let mut drift = vec![Complex64::default(); n * n * n];
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let (x1, x2, x3) = (axes[0][i], axes[1][j], axes[2][k]);
                    let v = 0.5
                        * m
                        * (w12 * (x1 - x2).powi(2) + w13 * (x1 - x3).powi(2) + w23 * (x2 - x3).powi(2));
                    let idx = (i * n + j) * n + k;
                    half_kick[idx] = Complex64::from_polar(1.0, -0.5 * v * dt / h);
                    let k2 = wave[0][i].powi(2) + wave[1][j].powi(2) + wave[2][k].powi(2);
                    let scale = 1.0 / (n * n * n) as f64;
                    drift[idx] = Complex64::from_polar(scale, -h * k2 * dt / (2.0 * m));
                }
            }
        }
        Self { n, fwd, inv, half_kick, drift }
    }

    fn fft3(&self, psi: &mut [Complex64], plan: &Arc<dyn Fft<f64>>) {
        let n = self.n;
        // last axis: contiguous rows
        psi.par_chunks_mut(n).for_each(|row| plan.process(row));
        // middle axis
        psi.par_chunks_mut(n * n).for_each(|plane| {
            let mut buf = vec![Complex64::default(); n];
            for k in 0..n {
                for j in 0..n {
                    buf[j] = plane[j * n + k];
                }
                plan.process(&mut buf);
                for j in 0..n {
                    plane[j * n + k] = buf[j];
                }
            }
        });
        // first axis
        let n2 = n * n;
        let cols: Vec<Vec<Complex64>> = (0..n2)
            .into_par_iter()
            .map(|jk| {
                let mut buf: Vec<Complex64> = (0..n).map(|i| psi[i * n2 + jk]).collect();
                plan.process(&mut buf);
                buf
            })
            .collect();
        for (jk, col) in cols.into_iter().enumerate() {
            for (i, v) in col.into_iter().enumerate() {
                psi[i * n2 + jk] = v;
            }
        }
    }

    fn step(&self, psi: &mut [Complex64]) {
        mul(psi, &self.half_kick);
        self.fft3(psi, &self.fwd);
        mul(psi, &self.drift);
        self.fft3(psi, &self.inv);
        mul(psi, &self.half_kick);
    }
}

fn mul(psi: &mut [Complex64], f: &[Complex64]) {
    psi.par_iter_mut().zip(f.par_iter()).for_each(|(p, f)| *p *= f);
}

fn step_plan(t_start: f64, t_final: f64, opts: &OracleOptions) -> Result<(usize, f64)> {
    if !(opts.dt > 0.0) || opts.dt > MAX_STEP {
        return Err(Error::StepTooLarge(format!("dt = {} exceeds {MAX_STEP}", opts.dt)));
    }
    let span = t_final - t_start;
    if span < 0.0 {
        return Err(Error::TimeNotAfterT0 { time: t_final, t0: t_start });
    }
    if span == 0.0 {
        return Ok((0, 0.0));
    }
    let steps = (span / opts.dt).ceil() as usize;
    Ok((steps, span / steps as f64))
}

/// Evolve `init` from `t0` to `t_final` on the grid.
pub fn evolve_grid(
    config: &ModelConfig,
    t_final: f64,
    init: InitialState,
    opts: &OracleOptions,
) -> Result<GridState> {
    let domain = oracle_domain(config, init, t_final, opts)?;
    let state = initial_state(config, init, domain, opts.n);
    advance(config, state, t_final, opts)
}

/// Continue evolving `state` from its current time to `t_final`.
pub fn advance(
    config: &ModelConfig,
    mut state: GridState,
    t_final: f64,
    opts: &OracleOptions,
) -> Result<GridState> {
    let (steps, dt) = step_plan(state.t, t_final, opts)?;
    if steps == 0 {
        return Ok(state);
    }
    // phase advanced per step by the largest kinetic and potential terms
    let kmax: f64 = state.dx.iter().map(|d| (PI / d).powi(2)).sum();
    let tmax = config.hbar * kmax / (2.0 * config.mass);
    let vmax = {
        let ext: [f64; 3] = std::array::from_fn(|i| state.dx[i] * state.n as f64);
        let [w12, w13, w23] = config.omegas().map(|w| w * w);
        0.5 * config.mass
            * (w12 * (ext[0] + ext[1]).powi(2)
                + w13 * (ext[0] + ext[2]).powi(2)
                + w23 * (ext[1] + ext[2]).powi(2))
            / config.hbar
    };
    if dt * (tmax + vmax) > PI {
        return Err(Error::StepTooLarge(format!(
            "dt = {dt} advances the phase by {} > π per step",
            dt * (tmax + vmax)
        )));
    }
    let integ = Integrator::new(config, &state, dt);
    for _ in 0..steps {
        integ.step(&mut state.psi);
    }
    state.dt = dt;
    state.t = t_final;
    Ok(state)
}

/// Particle-1 density blocks from the grid, on the grid's `x₁` axis.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleMarginal {
    pub t: f64,
    pub x1: Vec<f64>,
    pub rho0: Vec<f64>,
    pub rhod: Vec<f64>,
    pub rhoint: Vec<f64>,
    pub rho: Vec<f64>,
    /// Total norm of the evolved state.
    pub norm: f64,
}

/// Evolve the two particle-1 halves of the cat separately and form the
/// density blocks from them.
pub fn oracle_marginal(config: &ModelConfig, t_final: f64, opts: &OracleOptions) -> Result<OracleMarginal> {
    let domain = oracle_domain(config, InitialState::Cat, t_final, opts)?;
    let halves = [false, true].map(|particle1_displaced| {
        let init = InitialState::CatGroup { particle1_displaced };
        advance(config, initial_state(config, init, domain, opts.n), t_final, opts)
    });
    let [s0, sd] = halves;
    let (s0, sd) = (s0?, sd?);
    let rho0 = s0.marginal_x1();
    let rhod = sd.marginal_x1();
    let rhoint = s0.cross_marginal_x1(&sd);
    let rho: Vec<f64> = (0..rho0.len()).map(|i| rho0[i] + rhod[i] + rhoint[i]).collect();
    let norm = rho.iter().sum::<f64>() * s0.dx[0];
    Ok(OracleMarginal { t: t_final, x1: s0.axis(0), rho0, rhod, rhoint, rho, norm })
}
