//! Particle-1 reduced density: marginalization over `(x₂, x₃)`, the split
//! into the two packet groups and their interference, and the interference
//! strength `I(t)`.
//!
//! The `(x₂, x₃)` integral is a tensor-product composite Simpson rule. With
//! an `auto` quadrature grid the box is rebuilt for every `x₁` around the
//! packets' conditional centres, so it follows the centre-of-mass spreading at
//! late times. Since every density term is Gaussian, the same marginal also
//! has a closed form ([`analytic_marginal`]), kept as an independent check and
//! used to size the grids.

use nalgebra::{Matrix2, Vector2};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::cat_state::PacketSet;
use crate::error::{Error, Result};
use crate::model::{GridSpec, ModelConfig, UniformGrid, GROUP_DISPLACED, GROUP_ORIGIN};
use crate::normal_modes::{diagonalize, NormalModeBasis};
use crate::propagator::coefficients;
use crate::quadrature::{linspace, simpson, simpson_weights};

/// Auto grids extend this many standard deviations past the outermost packet.
pub const AUTO_SPAN_SIGMAS: f64 = 9.0;
/// Boundary density allowed relative to the peak before the span is rejected.
pub const BOUNDARY_TOLERANCE: f64 = 1e-8;
/// Required `σ·(π/h − κ)` for Simpson aliasing to stay below roundoff.
const ALIASING_MARGIN: f64 = 7.5;
/// Upper bound on an automatically refined grid.
const MAX_AUTO_COUNT: usize = 1 << 14;

/// Normalized particle-1 density at one time, split by packet group.
#[derive(Debug, Clone, PartialEq)]
pub struct DensitySlices {
    pub t: f64,
    pub x1: Vec<f64>,
    /// `|Σ_{k ∈ {0,2,3,6}} ψ⁽ᵏ⁾|²` marginalized.
    pub rho0: Vec<f64>,
    /// `|Σ_{k ∈ {1,4,5,7}} ψ⁽ᵏ⁾|²` marginalized.
    pub rhod: Vec<f64>,
    /// Cross-group interference, signed.
    pub rhoint: Vec<f64>,
    pub rho: Vec<f64>,
    pub interference_strength: f64,
    /// Simpson integral of `rho` over the `x₁` grid.
    pub mass: f64,
}

impl DensitySlices {
    pub fn step(&self) -> f64 {
        (self.x1[self.x1.len() - 1] - self.x1[0]) / (self.x1.len() - 1) as f64
    }

    pub fn peak(&self) -> f64 {
        self.rho.iter().copied().fold(0.0, f64::max)
    }
}

/// `∫|rhoint| dx₁ / ∫(rho0 + rhod) dx₁`.
pub fn interference_strength(slices: &DensitySlices) -> f64 {
    let h = slices.step();
    let num: Vec<f64> = slices.rhoint.iter().map(|v| v.abs()).collect();
    let den: Vec<f64> = slices.rho0.iter().zip(&slices.rhod).map(|(a, b)| a + b).collect();
    let (num, den) = match (simpson(&num, h), simpson(&den, h)) {
        (Ok(n), Ok(d)) => (n, d),
        _ => return 0.0,
    };
    if den > 0.0 {
        num / den
    } else {
        0.0
    }
}

/// Gaussian structure of the packet products `uₖ ūₗ` after splitting
/// `X = (x₁, y)`, precomputed once per time.
#[derive(Debug, Clone)]
pub struct Marginalizer<'a> {
    pub set: &'a PacketSet,
    /// Blocks of `M = −2R`, the precision-like matrix of every product `uₖ ūₗ`.
    m1b: Vector2<f64>,
    mb_inv: Matrix2<f64>,
    det_mb: f64,
    /// Marginal `x₁` exponent `a x₁²`, shared by all pairs.
    a: f64,
    /// Linear and constant `x₁` coefficients of each pair.
    b: [[Complex64; 8]; 8],
    c: [[Complex64; 8]; 8],
    /// Conditional standard deviations of `(x₂, x₃)`.
    cond_std: [f64; 2],
    /// Largest fringe wavenumber along `x₂`, `x₃` and `x₁`.
    kappa_y: [f64; 2],
    kappa_x1: f64,
}

impl<'a> Marginalizer<'a> {
    pub fn new(set: &'a PacketSet) -> Result<Self> {
        let m = -2.0 * set.r;
        let mb = Matrix2::new(m[(1, 1)], m[(1, 2)], m[(2, 1)], m[(2, 2)]);
        let m1b = Vector2::new(m[(0, 1)], m[(0, 2)]);
        let singular = || Error::SingularKernel { t: set.t, magnitude: set.kernel.delta.norm() };
        let mb_inv = mb.try_inverse().ok_or_else(singular)?;
        let det_mb = mb.determinant();
        let a = -m[(0, 0)] + m1b.dot(&(mb_inv * m1b));
        if !(det_mb > 0.0 && a < 0.0) {
            return Err(singular());
        }

        let mut b = [[Complex64::default(); 8]; 8];
        let mut c = [[Complex64::default(); 8]; 8];
        let mut kappa_y = [0.0f64; 2];
        let mut kappa_x1 = 0.0f64;
        let w = mb_inv * m1b;
        for k in 0..8 {
            for l in 0..8 {
                let j: [Complex64; 3] = std::array::from_fn(|i| set.g[k][i] + set.g[l][i].conj());
                let jb = [j[1], j[2]];
                let quad = (0..2)
                    .flat_map(|p| (0..2).map(move |q| (p, q)))
                    .map(|(p, q)| jb[p] * mb_inv[(p, q)] * jb[q])
                    .sum::<Complex64>();
                b[k][l] = j[0] - (w[0] * jb[0] + w[1] * jb[1]);
                c[k][l] = set.h[k] + set.h[l].conj() + 0.25 * quad;
                kappa_x1 = kappa_x1.max(b[k][l].im.abs());
                kappa_y[0] = kappa_y[0].max(j[1].im.abs());
                kappa_y[1] = kappa_y[1].max(j[2].im.abs());
            }
        }
        let cond_cov = 0.5 * mb_inv;
        let cond_std = [cond_cov[(0, 0)].sqrt(), cond_cov[(1, 1)].sqrt()];
        Ok(Self {
            set,
            m1b,
            mb_inv,
            det_mb,
            a,
            b,
            c,
            cond_std,
            kappa_y,
            kappa_x1,
        })
    }

    /// Standard deviation of each packet's own `x₁` marginal.
    pub fn x1_std(&self) -> f64 {
        (-0.5 / self.a).sqrt()
    }

    /// Centre of packet `k`'s `x₁` marginal.
    pub fn x1_centre(&self, k: usize) -> f64 {
        -self.b[k][k].re / (2.0 * self.a)
    }

    /// Closed-form `(rho0, rhod, rhoint)` at `x₁`, unnormalized.
    pub fn analytic(&self, x1: f64) -> [f64; 3] {
        let pref = std::f64::consts::PI / self.det_mb.sqrt();
        let term = |k: usize, l: usize| -> f64 {
            (self.a * x1 * x1 + self.b[k][l] * x1 + self.c[k][l]).exp().re
        };
        let block = |g: &[usize; 4], h: &[usize; 4]| -> f64 {
            g.iter().flat_map(|&k| h.iter().map(move |&l| (k, l))).map(|(k, l)| term(k, l)).sum()
        };
        [
            pref * block(&GROUP_ORIGIN, &GROUP_ORIGIN),
            pref * block(&GROUP_DISPLACED, &GROUP_DISPLACED),
            pref * 2.0 * block(&GROUP_ORIGIN, &GROUP_DISPLACED),
        ]
    }

    /// Exact integral of the total density over `x₁` (and `y`).
    pub fn analytic_mass(&self) -> f64 {
        let pref = std::f64::consts::PI / self.det_mb.sqrt();
        let g = (std::f64::consts::PI / -self.a).sqrt();
        let mut total = 0.0;
        for k in 0..8 {
            for l in 0..8 {
                let b = self.b[k][l];
                total += (self.c[k][l] - b * b / (4.0 * self.a)).exp().re;
            }
        }
        pref * g * total
    }

    /// Conditional centre of packet `k` in `(x₂, x₃)` at fixed `x₁`.
    fn y_centre(&self, k: usize, x1: f64) -> Vector2<f64> {
        let g = Vector2::new(self.set.g[k][1].re, self.set.g[k][2].re);
        self.mb_inv * (g - x1 * self.m1b)
    }

    /// Points needed so a Gaussian of width `std` modulated at wavenumber
    /// `kappa` is resolved over `span`.
    fn needed_count(span: f64, std: f64, kappa: f64) -> usize {
        let h = std::f64::consts::PI / (kappa + ALIASING_MARGIN / std);
        let n = (span / h).ceil() as usize + 1;
        n | 1
    }

    /// Output `x₁` grid for this time.
    pub fn x1_grid(&self, spec: &GridSpec) -> Result<UniformGrid> {
        match *spec {
            GridSpec::Fixed(g) => Ok(g),
            GridSpec::Auto { count } => {
                let s = self.x1_std();
                let centres: Vec<f64> = (0..8).map(|k| self.x1_centre(k)).collect();
                let lo = centres.iter().copied().fold(f64::INFINITY, f64::min) - AUTO_SPAN_SIGMAS * s;
                let hi = centres.iter().copied().fold(f64::NEG_INFINITY, f64::max) + AUTO_SPAN_SIGMAS * s;
                let need = Self::needed_count(hi - lo, s, self.kappa_x1);
                auto_count("x1_grid", need, count).map(|n| UniformGrid::new(lo, hi, n))
            }
        }
    }

    /// `(x₂, x₃)` quadrature axes at `x₁`.
    pub fn quad_axes(&self, spec: &GridSpec, x1: f64) -> Result<[UniformGrid; 2]> {
        match *spec {
            GridSpec::Fixed(g) => Ok([g, g]),
            GridSpec::Auto { count } => {
                let centres: Vec<Vector2<f64>> = (0..8).map(|k| self.y_centre(k, x1)).collect();
                let mut axes = [UniformGrid::new(0.0, 1.0, 3); 2];
                for (i, axis) in axes.iter_mut().enumerate() {
                    let s = self.cond_std[i];
                    let lo = centres.iter().map(|c| c[i]).fold(f64::INFINITY, f64::min)
                        - AUTO_SPAN_SIGMAS * s;
                    let hi = centres.iter().map(|c| c[i]).fold(f64::NEG_INFINITY, f64::max)
                        + AUTO_SPAN_SIGMAS * s;
                    let need = Self::needed_count(hi - lo, s, self.kappa_y[i]);
                    *axis = UniformGrid::new(lo, hi, auto_count("quad_grid", need, count)?);
                }
                Ok(axes)
            }
        }
    }

    /// Simpson `(rho0, rhod, rhoint)` at `x₁`, unnormalized, plus the largest
    /// integrand value found on the box boundary.
    pub fn quadrature(&self, spec: &GridSpec, x1: f64) -> Result<([f64; 3], f64)> {
        let set = self.set;
        let [gu, gv] = self.quad_axes(spec, x1)?;
        let (nu, nv) = (gu.count, gv.count);
        let wu = simpson_weights(nu, gu.step())?;
        let wv = simpson_weights(nv, gv.step())?;
        let yc = [0.5 * (gu.min + gu.max), 0.5 * (gv.min + gv.max)];
        let du: Vec<f64> = (0..nu).map(|i| gu.point(i) - yc[0]).collect();
        let dv: Vec<f64> = (0..nv).map(|i| gv.point(i) - yc[1]).collect();

        let r = &set.r;
        let rb = Matrix2::new(r[(1, 1)], r[(1, 2)], r[(2, 1)], r[(2, 2)]);
        let r1b = Vector2::new(r[(0, 1)], r[(0, 2)]);
        let ycv = Vector2::new(yc[0], yc[1]);
        // common real exponent in the offsets w = y − yc
        let lin = 2.0 * (rb * ycv + x1 * r1b);
        let e_at_centre = ycv.dot(&(rb * ycv)) + 2.0 * x1 * r1b.dot(&ycv);
        let quad_common = |u: f64, v: f64| {
            rb[(0, 0)] * u * u + 2.0 * rb[(0, 1)] * u * v + rb[(1, 1)] * v * v + lin[0] * u + lin[1] * v
        };
        let mut e0 = f64::NEG_INFINITY;
        for &v in &dv {
            for &u in &du {
                e0 = e0.max(quad_common(u, v));
            }
        }

        // per-packet factors along each axis, peak-shifted
        let mut fu = vec![[Complex64::default(); 8]; nu];
        let mut fv = vec![[Complex64::default(); 8]; nv];
        for k in 0..8 {
            let g = set.g[k];
            let au = du.iter().map(|&u| g[1].re * u).fold(f64::NEG_INFINITY, f64::max);
            let av = dv.iter().map(|&v| g[2].re * v).fold(f64::NEG_INFINITY, f64::max);
            let konst = r[(0, 0)] * x1 * x1
                + g[0] * x1
                + set.h[k]
                + e_at_centre
                + g[1] * yc[0]
                + g[2] * yc[1]
                + e0
                + au
                + av;
            let ck = konst.exp();
            for (i, &u) in du.iter().enumerate() {
                fu[i][k] = ck * (g[1] * u - au).exp();
            }
            for (i, &v) in dv.iter().enumerate() {
                fv[i][k] = (g[2] * v - av).exp();
            }
        }

        let mut acc = [0.0f64; 3];
        let mut boundary = 0.0f64;
        for (iv, &v) in dv.iter().enumerate() {
            let cv = fv[iv];
            let edge_v = iv == 0 || iv + 1 == nv;
            for (iu, &u) in du.iter().enumerate() {
                let env = (2.0 * (quad_common(u, v) - e0)).exp();
                let f = &fu[iu];
                let s0 = f[0] * cv[0] + f[2] * cv[2] + f[3] * cv[3] + f[6] * cv[6];
                let sd = f[1] * cv[1] + f[4] * cv[4] + f[5] * cv[5] + f[7] * cv[7];
                let p0 = env * s0.norm_sqr();
                let pd = env * sd.norm_sqr();
                let pi = env * 2.0 * (s0 * sd.conj()).re;
                let w = wu[iu] * wv[iv];
                acc[0] += w * p0;
                acc[1] += w * pd;
                acc[2] += w * pi;
                if edge_v || iu == 0 || iu + 1 == nu {
                    boundary = boundary.max(p0 + pd + pi);
                }
            }
        }
        if acc.iter().any(|v| !v.is_finite()) {
            return Err(Error::QuadratureSpanTooSmall {
                field: "quad_grid",
                detail: format!("non-finite integrand at t={}, x1={x1}", set.t),
            });
        }
        Ok((acc, boundary))
    }
}

fn auto_count(field: &'static str, need: usize, min: usize) -> Result<usize> {
    if need > MAX_AUTO_COUNT {
        return Err(Error::InvalidGrid {
            field,
            reason: format!("resolving the interference fringes needs {need} points"),
        });
    }
    Ok(need.max(min) | 1)
}

/// Marginalize one time sample onto the configured `x₁` grid.
pub fn marginalize(set: &PacketSet, config: &ModelConfig) -> Result<DensitySlices> {
    let marg = Marginalizer::new(set)?;
    let grid = marg.x1_grid(&config.x1_grid)?;
    let x1 = linspace(grid.min, grid.max, grid.count);

    let rows: Vec<([f64; 3], f64)> = x1
        .par_iter()
        .map(|&x| marg.quadrature(&config.quad_grid, x))
        .collect::<Result<_>>()?;

    let norm = marg.analytic_mass();
    // each packet density peaks at 1 after the log-peak shift
    let (max_boundary, at) = rows
        .iter()
        .zip(&x1)
        .map(|((_, b), &x)| (*b, x))
        .fold((0.0, x1[0]), |acc, v| if v.0 > acc.0 { v } else { acc });
    if max_boundary > BOUNDARY_TOLERANCE {
        return Err(Error::QuadratureSpanTooSmall {
            field: "quad_grid",
            detail: format!(
                "boundary density {max_boundary:e} of peak at t={}, x1={at}",
                set.t
            ),
        });
    }

    let rho0: Vec<f64> = rows.iter().map(|(v, _)| v[0] / norm).collect();
    let rhod: Vec<f64> = rows.iter().map(|(v, _)| v[1] / norm).collect();
    let rhoint: Vec<f64> = rows.iter().map(|(v, _)| v[2] / norm).collect();
    let rho: Vec<f64> = (0..x1.len()).map(|i| rho0[i] + rhod[i] + rhoint[i]).collect();

    let peak = rho.iter().copied().fold(0.0, f64::max);
    let edge = rho[0].abs().max(rho[rho.len() - 1].abs());
    if edge > BOUNDARY_TOLERANCE * peak {
        return Err(Error::QuadratureSpanTooSmall {
            field: "x1_grid",
            detail: format!("edge density {:e} of peak at t={}", edge / peak, set.t),
        });
    }

    let mass = simpson(&rho, grid.step())?;
    let mut slices = DensitySlices {
        t: set.t,
        x1,
        rho0,
        rhod,
        rhoint,
        rho,
        interference_strength: 0.0,
        mass,
    };
    slices.interference_strength = interference_strength(&slices);
    Ok(slices)
}

/// Packet set for one time, from an already diagonalized basis.
pub fn packet_set(config: &ModelConfig, basis: &NormalModeBasis, t: f64) -> Result<PacketSet> {
    let coeffs = coefficients(basis, config.t0, t)?;
    PacketSet::new(&coeffs, config)
}

/// Full pipeline for one time sample.
pub fn evolve_sample(config: &ModelConfig, basis: &NormalModeBasis, t: f64) -> Result<DensitySlices> {
    marginalize(&packet_set(config, basis, t)?, config)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleStatus {
    Ok,
    CausticSkipped,
    Error,
}

impl SampleStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            SampleStatus::Ok => "ok",
            SampleStatus::CausticSkipped => "caustic-skipped",
            SampleStatus::Error => "error",
        }
    }
}

/// Outcome of one time sample in a series.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesEntry {
    pub t: f64,
    pub result: std::result::Result<DensitySlices, Error>,
}

impl SeriesEntry {
    pub fn status(&self) -> SampleStatus {
        match &self.result {
            Ok(_) => SampleStatus::Ok,
            Err(Error::CausticSingularity { .. }) => SampleStatus::CausticSkipped,
            Err(_) => SampleStatus::Error,
        }
    }

    pub fn interference_strength(&self) -> Option<f64> {
        self.result.as_ref().ok().map(|s| s.interference_strength)
    }
}

/// Run every configured time sample. Per-sample failures are recorded in the
/// entries; only an invalid config or coupling aborts the series.
pub fn decoherence_series(config: &ModelConfig) -> Result<Vec<SeriesEntry>> {
    let config = config.clone().validate()?;
    let basis = diagonalize(&config)?;
    Ok(config
        .times
        .par_iter()
        .map(|&t| SeriesEntry { t, result: evolve_sample(&config, &basis, t) })
        .collect())
}

/// Closed-form normalized blocks at arbitrary `x₁` points.
pub fn analytic_marginal(set: &PacketSet, x1: &[f64]) -> Result<Vec<[f64; 3]>> {
    let marg = Marginalizer::new(set)?;
    let norm = marg.analytic_mass();
    Ok(x1.iter().map(|&x| marg.analytic(x).map(|v| v / norm)).collect())
}

/// Quadrature-route normalized blocks at arbitrary `x₁` points.
pub fn marginal_at(set: &PacketSet, config: &ModelConfig, x1: &[f64]) -> Result<Vec<[f64; 3]>> {
    let marg = Marginalizer::new(set)?;
    let norm = marg.analytic_mass();
    x1.par_iter()
        .map(|&x| marg.quadrature(&config.quad_grid, x).map(|(v, _)| v.map(|v| v / norm)))
        .collect()
}

/// Interval from the time of largest `I` to the first later time where `I`
/// drops below `fraction` of that maximum. The end is `None` if it never does.
pub fn damping_window(series: &[(f64, f64)], fraction: f64) -> Option<(f64, Option<f64>)> {
    let (imax, &(t_peak, peak)) = series
        .iter()
        .enumerate()
        .max_by(|a, b| a.1 .1.total_cmp(&b.1 .1))?;
    let end = series[imax..].iter().find(|(_, i)| *i < fraction * peak).map(|(t, _)| *t);
    Some((t_peak, end))
}
