//! Closed-form diagonalization of the three-body coupling matrix.
//!
//! The equations of motion are `Ẍ = W X`. `W` has eigenvalues `λ₁, λ₂ < 0`
//! and `0` (the centre-of-mass mode). The eigenvectors are kept unnormalized,
//! exactly as the closed forms produce them, so the transformation rows
//! `a`, `b`, `c` of `P` carry the `1/3Δ` factor.

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};
use crate::model::ModelConfig;

/// Relative size of the eigenvector determinant below which the basis is rejected.
pub const DEGENERACY_THRESHOLD: f64 = 1e-14;

/// Coupling matrix `W`; each row sums to zero.
pub fn coupling_matrix(config: &ModelConfig) -> Matrix3<f64> {
    let [w12, w13, w23] = config.omegas().map(|w| w * w);
    Matrix3::new(
        -(w12 + w13), w12, w13,
        w12, -(w12 + w23), w23,
        w13, w23, -(w13 + w23),
    )
}

/// Half the splitting of the two nonzero eigenvalues, from the sum of squared
/// pairwise differences (no cancellation for nearly equal couplings).
pub fn delta_omega_sq(config: &ModelConfig) -> f64 {
    let [w12, w13, w23] = config.omegas().map(|w| w * w);
    (0.5 * ((w12 - w13).powi(2) + (w13 - w23).powi(2) + (w23 - w12).powi(2))).sqrt()
}

/// Effective normal-coordinate masses and the two oscillator frequencies.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EffectiveParams {
    pub masses: [f64; 3],
    pub frequencies: [f64; 2],
}

/// Eigenstructure of `W` and the derived normal-coordinate quantities.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalModeBasis {
    pub delta_omega_sq: f64,
    /// `λ₁ ≥ λ₂`, both negative.
    pub lambda: [f64; 2],
    /// `Ωᵢ = √(−λᵢ)`.
    pub mode_frequencies: [f64; 2],
    pub xi: [f64; 2],
    pub eta: [f64; 2],
    pub zeta: [f64; 2],
    /// `η₂ξ₁ − η₁ξ₂`.
    pub det: f64,
    /// Columns are the eigenvectors `p₁, p₂, p₃`.
    pub p_inv: Matrix3<f64>,
    /// `Z = P X`.
    pub p: Matrix3<f64>,
    pub a: [f64; 3],
    pub b: [f64; 3],
    pub c: [f64; 3],
    /// `m₁, m₂, m₃`.
    pub masses: [f64; 3],
    /// `ω₁, ω₂` from the decoupled Lagrangian.
    pub frequencies: [f64; 2],
}

impl NormalModeBasis {
    /// Rows of `P`: mode 1, mode 2, centre of mass.
    pub fn rows(&self) -> [[f64; 3]; 3] {
        [self.a, self.b, self.c]
    }

    /// `Z = P X`.
    pub fn to_normal(&self, x: [f64; 3]) -> [f64; 3] {
        let z = self.p * Vector3::from(x);
        [z[0], z[1], z[2]]
    }

    /// `X = P⁻¹ Z`.
    pub fn from_normal(&self, z: [f64; 3]) -> [f64; 3] {
        let x = self.p_inv * Vector3::from(z);
        [x[0], x[1], x[2]]
    }
}

/// Diagonalize `W` in closed form.
pub fn diagonalize(config: &ModelConfig) -> Result<NormalModeBasis> {
    let [w12, w13, w23] = config.omegas().map(|w| w * w);
    let sum = w12 + w13 + w23;
    let dw = delta_omega_sq(config);
    let lambda = [-sum + dw, -sum - dw];

    let xi = [w12 * w23 - w13 * (w13 - dw), w12 * w23 - w13 * (w13 + dw)];
    let eta = [w12 * w13 - w23 * (w23 - dw), w12 * w13 - w23 * (w23 + dw)];
    let zeta = [-xi[0] - eta[0], -xi[1] - eta[1]];
    let det = eta[1] * xi[0] - eta[0] * xi[1];

    let degenerate = || Error::DegenerateCoupling {
        omega12: config.omega12,
        omega13: config.omega13,
        omega23: config.omega23,
    };
    if !(det.abs() > DEGENERACY_THRESHOLD * sum.powi(4)) || !(lambda[0] < 0.0) {
        return Err(degenerate());
    }

    let p_inv = Matrix3::new(
        xi[0], xi[1], 1.0,
        eta[0], eta[1], 1.0,
        zeta[0], zeta[1], 1.0,
    );
    let s = 1.0 / (3.0 * det);
    let a = [
        s * (2.0 * eta[1] + xi[1]),
        s * (-eta[1] - 2.0 * xi[1]),
        s * (-eta[1] + xi[1]),
    ];
    let b = [
        s * (-2.0 * eta[0] - xi[0]),
        s * (eta[0] + 2.0 * xi[0]),
        s * (eta[0] - xi[0]),
    ];
    let c = [1.0 / 3.0; 3];
    let p = Matrix3::new(
        a[0], a[1], a[2],
        b[0], b[1], b[2],
        c[0], c[1], c[2],
    );

    let mut basis = NormalModeBasis {
        delta_omega_sq: dw,
        lambda,
        mode_frequencies: [(-lambda[0]).sqrt(), (-lambda[1]).sqrt()],
        xi,
        eta,
        zeta,
        det,
        p_inv,
        p,
        a,
        b,
        c,
        masses: [0.0; 3],
        frequencies: [0.0; 2],
    };
    let eff = effective_params(&basis, config);
    if !(eff.frequencies[0] > 0.0 && eff.frequencies[1] > 0.0) {
        return Err(degenerate());
    }
    basis.masses = eff.masses;
    basis.frequencies = eff.frequencies;
    Ok(basis)
}

/// Masses and frequencies of the decoupled normal-coordinate Lagrangian.
///
/// Computed from the eigenvector entries and the per-particle spring sums
/// `w₁² = ω₁₂² + ω₁₃²`, `w₂² = ω₁₂² + ω₂₃²`, `w₃² = ω₁₃² + ω₂₃²`, which is an
/// independent route to the `Ωᵢ` obtained from the eigenvalues.
pub fn effective_params(basis: &NormalModeBasis, config: &ModelConfig) -> EffectiveParams {
    let m = config.mass;
    let [o12, o13, o23] = config.omegas().map(|w| w * w);
    let (ws1, ws2, ws3) = (o12 + o13, o12 + o23, o13 + o23);
    let mode = |x: f64, y: f64| {
        let mass = 2.0 * m * (x * x + x * y + y * y);
        let bracket = ws1 * (2.0 * x * x - x * y - y * y)
            + ws2 * (-x * x - x * y + 2.0 * y * y)
            + ws3 * (2.0 * x * x + 5.0 * x * y + 2.0 * y * y);
        (mass, (m / mass * bracket).sqrt())
    };
    let (m1, f1) = mode(basis.xi[0], basis.eta[0]);
    let (m2, f2) = mode(basis.xi[1], basis.eta[1]);
    EffectiveParams { masses: [m1, m2, 3.0 * m], frequencies: [f1, f2] }
}
