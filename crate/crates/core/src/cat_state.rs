//! Complex Gaussian algebra for the eight evolved cat-state packets.
//!
//! Propagating the packet centred at `d⁽ᵏ⁾` through the quadratic propagator
//! is a three-dimensional complex Gaussian integral over the initial
//! positions. Its exponent is `Φ⁽ᵏ⁾(X)/(16Δ) + D̆⁽ᵏ⁾(X)`, a quadratic
//! polynomial in `X`, stored here as coefficient sets ([`QuadForm`]) so the
//! marginalization can evaluate it cheaply on large grids.
//!
//! Only the quadratic blocks are shared by all packets; `k` enters through the
//! linear and constant parts.

use nalgebra::{Matrix3, Vector3};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::{packet_labels, ModelConfig, PacketLabel};
use crate::propagator::{linear_form_c_by_mode, PropagatorCoeffs};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Ordered index pairs `(i, j)` paired with the excluded index `k`.
pub const PAIRS: [(usize, usize, usize); 3] = [(0, 1, 2), (1, 2, 0), (2, 0, 1)];

/// Relative size of `|Δ(t)|` below which the Gaussian integral is degenerate.
pub const SINGULAR_KERNEL_THRESHOLD: f64 = 1e-14;

/// Complex coefficients of the initial-position Gaussian integral at one time.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianKernel {
    pub t: f64,
    /// `Ăᵢ = 1/4σᵢ² − (i/ħ)Aᵢ`.
    pub a: [Complex64; 3],
    /// `B̆ᵢⱼ = (i/ħ)Bᵢⱼ`, zero diagonal.
    pub b: [[Complex64; 3]; 3],
    /// Determinant-like factor `Δ(t)`.
    pub delta: Complex64,
    /// Full-quadrant argument of `Δ(t)`.
    pub phi: f64,
    /// `λᵢ = 4ĂⱼĂₖ − B̆ⱼₖ²`, indexed by `i`.
    pub lambda: [Complex64; 3],
    /// `μᵢⱼ = 2B̆ᵢₖB̆ⱼₖ + 4ĂₖB̆ᵢⱼ`, indexed by the excluded `k`.
    pub mu: [Complex64; 3],
}

pub fn kernel(coeffs: &PropagatorCoeffs, config: &ModelConfig) -> Result<GaussianKernel> {
    let hbar = config.hbar;
    let a: [Complex64; 3] = std::array::from_fn(|i| {
        Complex64::new(0.25 / config.sigma[i].powi(2), -coeffs.a[i] / hbar)
    });
    let b: [[Complex64; 3]; 3] =
        std::array::from_fn(|i| std::array::from_fn(|j| I * (coeffs.b[i][j] / hbar)));

    let delta = a[0] * a[1] * a[2]
        - 0.25 * (a[1] * b[0][2].powi(2) + a[2] * b[0][1].powi(2) + a[0] * b[1][2].powi(2))
        - 0.25 * b[0][1] * b[0][2] * b[1][2];
    let scale: f64 = a.iter().map(|v| v.re).product();
    if !(delta.norm() >= SINGULAR_KERNEL_THRESHOLD * scale) {
        return Err(Error::SingularKernel { t: coeffs.t, magnitude: delta.norm() });
    }

    let mut lambda = [Complex64::default(); 3];
    let mut mu = [Complex64::default(); 3];
    for (i, j, k) in PAIRS {
        lambda[k] = 4.0 * a[i] * a[j] - b[i][j].powi(2);
        mu[k] = 2.0 * b[i][k] * b[j][k] + 4.0 * a[k] * b[i][j];
    }

    Ok(GaussianKernel { t: coeffs.t, a, b, delta, phi: delta.im.atan2(delta.re), lambda, mu })
}

/// `Δ(t)` assembled from its expanded real and imaginary parts, written in
/// terms of the real propagator coefficients.
pub fn delta_expanded(coeffs: &PropagatorCoeffs, config: &ModelConfig) -> Complex64 {
    let h = config.hbar;
    let [s1, s2, s3] = config.sigma.map(|s| s * s);
    let [a1, a2, a3] = coeffs.a;
    let (b12, b13, b23) = (coeffs.b[0][1], coeffs.b[0][2], coeffs.b[1][2]);
    let re = 1.0 / (64.0 * s1 * s2 * s3)
        - (a2 * a3 / s1 + a3 * a1 / s2 + a1 * a2 / s3) / (4.0 * h * h)
        + (b23 * b23 / s1 + b13 * b13 / s2 + b12 * b12 / s3) / (16.0 * h * h);
    let im = a1 * a2 * a3 / h.powi(3)
        - (a3 / (s1 * s2) + a1 / (s2 * s3) + a2 / (s3 * s1)) / (16.0 * h)
        - (a1 * b23 * b23 + a2 * b13 * b13 + a3 * b12 * b12) / (4.0 * h.powi(3))
        + b12 * b13 * b23 / (4.0 * h.powi(3));
    Complex64::new(re, im)
}

/// Real quadratic polynomial `Σᵢⱼ quad[i][j] xᵢxⱼ + lin·x + constant`, with
/// `quad` symmetric.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct QuadForm {
    pub quad: [[f64; 3]; 3],
    pub lin: [f64; 3],
    pub constant: f64,
}

impl QuadForm {
    pub fn eval(&self, x: [f64; 3]) -> f64 {
        let mut v = self.constant;
        for i in 0..3 {
            let row = self.quad[i][0] * x[0] + self.quad[i][1] * x[1] + self.quad[i][2] * x[2];
            v += x[i] * (row + self.lin[i]);
        }
        v
    }

    pub fn quad_matrix(&self) -> Matrix3<f64> {
        Matrix3::from_fn(|i, j| self.quad[i][j])
    }
}

/// Complex counterpart of [`QuadForm`], used while assembling `Φ⁽ᵏ⁾`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ComplexQuadForm {
    pub quad: [[Complex64; 3]; 3],
    pub lin: [Complex64; 3],
    pub constant: Complex64,
}

impl ComplexQuadForm {
    pub fn eval(&self, x: [f64; 3]) -> Complex64 {
        let mut v = self.constant;
        for i in 0..3 {
            let row = self.quad[i][0] * x[0] + self.quad[i][1] * x[1] + self.quad[i][2] * x[2];
            v += x[i] * (row + self.lin[i]);
        }
        v
    }

    pub fn re(&self) -> QuadForm {
        QuadForm {
            quad: self.quad.map(|r| r.map(|c| c.re)),
            lin: self.lin.map(|c| c.re),
            constant: self.constant.re,
        }
    }

    pub fn im(&self) -> QuadForm {
        QuadForm {
            quad: self.quad.map(|r| r.map(|c| c.im)),
            lin: self.lin.map(|c| c.im),
            constant: self.constant.im,
        }
    }
}

/// Exponent `Θ⁽ᵏ⁾ = ReΘ + i ImΘ` of one evolved packet, up to the common
/// prefactor `√(π³/Δ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PacketTheta {
    pub k: usize,
    pub re: QuadForm,
    pub im: QuadForm,
}

impl PacketTheta {
    pub fn eval(&self, x: [f64; 3]) -> Complex64 {
        Complex64::new(self.re.eval(x), self.im.eval(x))
    }
}

/// `Φ⁽ᵏ⁾` as polynomial coefficients, through the `La`/`Mu` contractions of
/// `λ`, `μ` with the real weights `α`.
pub fn phi_coefficients(
    kernel: &GaussianKernel,
    coeffs: &PropagatorCoeffs,
    label: &PacketLabel,
    config: &ModelConfig,
) -> ComplexQuadForm {
    let h = config.hbar;
    let al = &coeffs.alpha;
    let lam = &kernel.lambda;
    let mu = &kernel.mu;
    // d_i / σ_i²
    let q: [f64; 3] = std::array::from_fn(|i| label.disp[i] / config.sigma[i].powi(2));

    let la_df = |d: usize, f: usize| -> Complex64 {
        let s: Complex64 = (0..3).map(|i| lam[i] * al[i][d] * al[i][f]).sum();
        if d == f { s } else { 2.0 * s }
    };
    let mu_df = |d: usize, f: usize| -> Complex64 {
        PAIRS
            .iter()
            .map(|&(i, j, k)| {
                if d == f {
                    mu[k] * al[i][d] * al[j][d]
                } else {
                    mu[k] * (al[i][d] * al[j][f] + al[j][d] * al[i][f])
                }
            })
            .sum()
    };
    let la_d = |d: usize| -> Complex64 { (0..3).map(|i| lam[i] * q[i] * al[i][d]).sum() };
    let mu_d = |d: usize| -> Complex64 {
        0.5 * PAIRS
            .iter()
            .map(|&(i, j, k)| mu[k] * (q[i] * al[j][d] + q[j] * al[i][d]))
            .sum::<Complex64>()
    };
    let la_0: Complex64 = 0.25 * (0..3).map(|i| lam[i] * q[i] * q[i]).sum::<Complex64>();
    let mu_0: Complex64 =
        0.25 * PAIRS.iter().map(|&(i, j, k)| mu[k] * q[i] * q[j]).sum::<Complex64>();

    let mut out = ComplexQuadForm::default();
    for d in 0..3 {
        out.quad[d][d] = -(la_df(d, d) + mu_df(d, d)) / (h * h);
        for f in d + 1..3 {
            // the cross coefficient is split across the two symmetric slots
            let c = -0.5 * (la_df(d, f) + mu_df(d, f)) / (h * h);
            out.quad[d][f] = c;
            out.quad[f][d] = c;
        }
        out.lin[d] = -I * (la_d(d) + mu_d(d)) / h;
    }
    out.constant = la_0 + mu_0;
    out
}

/// `Φ⁽ᵏ⁾(X)` evaluated pointwise from `C̆ᵢ(X)` and `λ`, `μ`.
pub fn phi_direct(
    kernel: &GaussianKernel,
    coeffs: &PropagatorCoeffs,
    label: &PacketLabel,
    config: &ModelConfig,
    x: [f64; 3],
) -> Complex64 {
    let c = linear_form_c_by_mode(coeffs, x);
    let cb: [Complex64; 3] = std::array::from_fn(|i| {
        Complex64::new(label.disp[i] / (2.0 * config.sigma[i].powi(2)), c[i] / config.hbar)
    });
    let mut phi: Complex64 = (0..3).map(|i| kernel.lambda[i] * cb[i] * cb[i]).sum();
    for (i, j, k) in PAIRS {
        phi += kernel.mu[k] * cb[i] * cb[j];
    }
    phi
}

/// Assemble `Θ⁽ᵏ⁾` from `Φ⁽ᵏ⁾`, `Δ` and `D̆⁽ᵏ⁾`.
pub fn theta(
    kernel: &GaussianKernel,
    coeffs: &PropagatorCoeffs,
    label: &PacketLabel,
    config: &ModelConfig,
) -> PacketTheta {
    let phi = phi_coefficients(kernel, coeffs, label, config);
    let (re_phi, im_phi) = (phi.re(), phi.im());
    let (dr, di) = (kernel.delta.re, kernel.delta.im);
    let norm = 16.0 * kernel.delta.norm_sqr();
    let mix = |x: f64, y: f64, sx: f64, sy: f64| (sx * x + sy * y) / norm;

    let mut re = QuadForm::default();
    let mut im = QuadForm::default();
    for i in 0..3 {
        for j in 0..3 {
            re.quad[i][j] = mix(re_phi.quad[i][j], im_phi.quad[i][j], dr, di);
            im.quad[i][j] = mix(im_phi.quad[i][j], re_phi.quad[i][j], dr, -di);
        }
        re.lin[i] = mix(re_phi.lin[i], im_phi.lin[i], dr, di);
        im.lin[i] = mix(im_phi.lin[i], re_phi.lin[i], dr, -di);
    }
    re.constant = mix(re_phi.constant, im_phi.constant, dr, di)
        - (0..3)
            .map(|i| label.disp[i].powi(2) / (4.0 * config.sigma[i].powi(2)))
            .sum::<f64>();
    im.constant = mix(im_phi.constant, re_phi.constant, dr, -di);

    // Im D̆ = D(X)/ħ
    for i in 0..3 {
        for j in 0..3 {
            im.quad[i][j] += (0..3)
                .map(|m| 0.5 * coeffs.cot_stiffness[m] * coeffs.rows[m][i] * coeffs.rows[m][j])
                .sum::<f64>()
                / config.hbar;
        }
    }
    PacketTheta { k: label.k, re, im }
}

/// Unnormalized total density `|Σₖ exp Θ⁽ᵏ⁾|²` written as packet and pair
/// terms, with every exponent shifted by `-2 shift`.
pub fn rho_total(thetas: &[PacketTheta; 8], x: [f64; 3], shift: f64) -> f64 {
    let vals: [Complex64; 8] = std::array::from_fn(|k| thetas[k].eval(x));
    let mut rho = 0.0;
    for k in 0..8 {
        rho += (2.0 * (vals[k].re - shift)).exp();
        for l in k + 1..8 {
            rho += 2.0
                * (vals[k].re + vals[l].re - 2.0 * shift).exp()
                * (vals[k].im - vals[l].im).cos();
        }
    }
    rho
}

/// `Σₖ exp(Θ⁽ᵏ⁾ − shift + iφ/2)`, the total wavefunction up to a real
/// positive factor.
pub fn wavefunction(thetas: &[PacketTheta; 8], phi: f64, x: [f64; 3], shift: f64) -> Complex64 {
    thetas
        .iter()
        .map(|th| {
            let v = th.eval(x);
            Complex64::from_polar((v.re - shift).exp(), v.im + 0.5 * phi)
        })
        .sum()
}

/// Everything needed to evaluate the evolved state at one time.
///
/// The reduced amplitudes drop the imaginary quadratic block, which is common
/// to all packets and so cancels from every density:
/// `log uₖ(X) = XᵀRX + gₖ·X + hₖ − log_peak`.
#[derive(Debug, Clone, PartialEq)]
pub struct PacketSet {
    pub t: f64,
    pub kernel: GaussianKernel,
    pub thetas: [PacketTheta; 8],
    /// Real quadratic block shared by all `ReΘ⁽ᵏ⁾`; negative definite.
    pub r: Matrix3<f64>,
    pub g: [[Complex64; 3]; 8],
    pub h: [Complex64; 8],
    /// Largest value of any `ReΘ⁽ᵏ⁾`, subtracted from every exponent.
    pub log_peak: f64,
}

impl PacketSet {
    pub fn new(coeffs: &PropagatorCoeffs, config: &ModelConfig) -> Result<Self> {
        let kernel = kernel(coeffs, config)?;
        let labels = packet_labels(config);
        let thetas: [PacketTheta; 8] =
            std::array::from_fn(|k| theta(&kernel, coeffs, &labels[k], config));
        let r = thetas[0].re.quad_matrix();
        let not_integrable = || Error::SingularKernel { t: coeffs.t, magnitude: kernel.delta.norm() };
        let r_inv = (-r).cholesky().ok_or_else(not_integrable)?.inverse();

        let g: [[Complex64; 3]; 8] = std::array::from_fn(|k| {
            std::array::from_fn(|i| Complex64::new(thetas[k].re.lin[i], thetas[k].im.lin[i]))
        });
        let h0: [Complex64; 8] = std::array::from_fn(|k| {
            Complex64::new(thetas[k].re.constant, thetas[k].im.constant)
        });
        // max of XᵀRX + g·X + h is h + ¼ gᵀ(−R)⁻¹g
        let log_peak = (0..8)
            .map(|k| {
                let gr = Vector3::from_fn(|i, _| g[k][i].re);
                h0[k].re + 0.25 * gr.dot(&(r_inv * gr))
            })
            .fold(f64::NEG_INFINITY, f64::max);
        let h = h0.map(|v| v - log_peak);
        Ok(Self { t: coeffs.t, kernel, thetas, r, g, h, log_peak })
    }

    /// Reduced log-amplitude of packet `k`.
    pub fn log_amplitude(&self, k: usize, x: [f64; 3]) -> Complex64 {
        let xv = Vector3::from(x);
        let quad = xv.dot(&(self.r * xv));
        let lin: Complex64 = (0..3).map(|i| self.g[k][i] * x[i]).sum();
        quad + lin + self.h[k]
    }

    /// `|Σₖ uₖ(X)|²`, the total density scaled by `exp(−2 log_peak)`.
    pub fn density(&self, x: [f64; 3]) -> f64 {
        (0..8).map(|k| self.log_amplitude(k, x).exp()).sum::<Complex64>().norm_sqr()
    }

    /// Mean and covariance of each packet's own density `|uₖ|²`.
    pub fn packet_moments(&self) -> ([[f64; 3]; 8], Matrix3<f64>) {
        let prec = -4.0 * self.r;
        let cov = prec.try_inverse().unwrap_or_else(Matrix3::zeros);
        let means = std::array::from_fn(|k| {
            let gr = Vector3::from_fn(|i, _| 2.0 * self.g[k][i].re);
            let m = cov * gr;
            [m[0], m[1], m[2]]
        });
        (means, cov)
    }

    /// Exact integral of [`PacketSet::density`] over all of space.
    pub fn total_mass(&self) -> f64 {
        let m = -2.0 * self.r;
        let m_inv = m.try_inverse().unwrap_or_else(Matrix3::zeros);
        let pref = (std::f64::consts::PI.powi(3) / m.determinant()).sqrt();
        let mut total = 0.0;
        for k in 0..8 {
            for l in 0..8 {
                let j: [Complex64; 3] = std::array::from_fn(|i| self.g[k][i] + self.g[l][i].conj());
                let mut quad = Complex64::default();
                for a in 0..3 {
                    for b in 0..3 {
                        quad += j[a] * m_inv[(a, b)] * j[b];
                    }
                }
                let expo = 0.25 * quad + self.h[k] + self.h[l].conj();
                total += expo.exp().re;
            }
        }
        pref * total
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::normal_modes::diagonalize;
    use crate::propagator::coefficients;

    fn setup(t: f64, cfg: &ModelConfig) -> (PropagatorCoeffs, GaussianKernel) {
        let basis = diagonalize(cfg).unwrap();
        let c = coefficients(&basis, cfg.t0, t).unwrap();
        let k = kernel(&c, cfg).unwrap();
        (c, k)
    }

    #[test]
    fn decoupled_limit_is_real_product() {
        let cfg = ModelConfig { sigma: [1.0, 2.0, 0.5], ..Default::default() };
        let (mut c, _) = setup(1.0, &cfg);
        c.a = [0.0; 3];
        c.b = [[0.0; 3]; 3];
        let k = kernel(&c, &cfg).unwrap();
        let expect = 0.25 * (0.25 / 4.0) * (0.25 / 0.25);
        assert!((k.delta.re - expect).abs() < 1e-15);
        assert_eq!(k.delta.im, 0.0);
    }

    #[test]
    fn coupling_coefficients_are_imaginary() {
        let cfg = ModelConfig { hbar: 0.7, ..Default::default() };
        let (c, k) = setup(0.705, &cfg);
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(k.b[i][j].re, 0.0);
                assert!((k.b[i][j].im - c.b[i][j] / 0.7).abs() < 1e-15);
            }
            assert_eq!(k.a[i].re, 0.25);
        }
    }

    #[test]
    fn delta_routes_agree_at_preset_time() {
        let cfg = ModelConfig::default();
        let (c, k) = setup(0.705, &cfg);
        let e = delta_expanded(&c, &cfg);
        assert!((e - k.delta).norm() <= 1e-12 * k.delta.norm());
    }

    #[test]
    fn quadratic_blocks_are_packet_independent() {
        let cfg = ModelConfig { d: [3.0, -2.0, 5.0], ..Default::default() };
        let basis = diagonalize(&cfg).unwrap();
        let c = coefficients(&basis, 0.0, 2.2).unwrap();
        let set = PacketSet::new(&c, &cfg).unwrap();
        for th in &set.thetas {
            assert_eq!(th.re.quad, set.thetas[0].re.quad);
            assert_eq!(th.im.quad, set.thetas[0].im.quad);
        }
    }

    #[test]
    fn degenerate_cat_gives_identical_thetas() {
        let cfg = ModelConfig { d: [0.0; 3], ..Default::default() };
        let basis = diagonalize(&cfg).unwrap();
        let c = coefficients(&basis, 0.0, 1.0).unwrap();
        let set = PacketSet::new(&c, &cfg).unwrap();
        for th in &set.thetas {
            assert_eq!(th.re, set.thetas[0].re);
            assert_eq!(th.im, set.thetas[0].im);
        }
    }

    #[test]
    fn real_part_is_negative_definite() {
        let cfg = ModelConfig::default();
        let basis = diagonalize(&cfg).unwrap();
        for t in [0.005, 0.705, 5.605, 205.605, 5000.005] {
            let c = coefficients(&basis, 0.0, t).unwrap();
            let set = PacketSet::new(&c, &cfg).unwrap();
            let eig = set.r.symmetric_eigenvalues();
            assert!(eig.iter().all(|&e| e < 0.0), "t={t}: {eig:?}");
        }
    }

    #[test]
    fn single_packet_density_is_positive() {
        let cfg = ModelConfig::default();
        let (c, k) = setup(1.0, &cfg);
        let labels = packet_labels(&cfg);
        let th = theta(&k, &c, &labels[0], &cfg);
        let x = [0.2, -0.1, 0.4];
        let v = th.eval(x);
        assert!((2.0 * v.re).exp() > 0.0);
    }

    #[test]
    fn wavefunction_modulus_matches_pair_sum() {
        let cfg = ModelConfig { d: [2.0, 3.0, 1.0], ..Default::default() };
        let basis = diagonalize(&cfg).unwrap();
        let c = coefficients(&basis, 0.0, 3.1).unwrap();
        let set = PacketSet::new(&c, &cfg).unwrap();
        for x in [[0.0, 0.0, 0.0], [1.0, 2.0, 0.5], [2.5, 1.5, 1.0]] {
            let psi = wavefunction(&set.thetas, set.kernel.phi, x, set.log_peak);
            let rho = rho_total(&set.thetas, x, set.log_peak);
            assert!((psi.norm_sqr() - rho).abs() <= 1e-12 * rho.max(1e-300));
            assert!((set.density(x) - rho).abs() <= 1e-10 * rho.max(1e-300));
        }
    }
}
