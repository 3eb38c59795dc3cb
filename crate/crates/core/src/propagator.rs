//! Real coefficients of the exact quadratic-action propagator in particle
//! coordinates.
//!
//! Each normal mode contributes a stiffness `κ cot(ωΔt)` to the quadratic
//! part and `κ / sin(ωΔt)` to the initial/final cross term, with
//! `κ = m_mode ω_mode`; the centre-of-mass mode contributes `m₃/Δt` to both.
//! The time-dependent normalization prefactor is not carried.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::normal_modes::NormalModeBasis;

/// Below this `|sin(ωΔt)|` (or `Δt`) the propagator is treated as singular.
pub const CAUSTIC_THRESHOLD: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct PropagatorCoeffs {
    pub t: f64,
    pub dt: f64,
    /// Rows of `P` (mode 1, mode 2, centre of mass).
    pub rows: [[f64; 3]; 3],
    /// `[m₁ω₁ cot ω₁Δt, m₂ω₂ cot ω₂Δt, m₃/Δt]`.
    pub cot_stiffness: [f64; 3],
    /// `[m₁ω₁ / sin ω₁Δt, m₂ω₂ / sin ω₂Δt, m₃/Δt]`.
    pub csc_stiffness: [f64; 3],
    /// Coefficients of `x₍₀₎ᵢ²`.
    pub a: [f64; 3],
    /// Coefficients of `x₍₀₎ᵢ x₍₀₎ⱼ`, `i ≠ j`; symmetric with zero diagonal.
    pub b: [[f64; 3]; 3],
    /// `alpha[i][d]` is the weight of `x_d` in `−Cᵢ(X)`; symmetric.
    pub alpha: [[f64; 3]; 3],
}

fn caustic_check(t: f64, t0: f64, omega: f64, mode: &'static str) -> Result<(f64, f64)> {
    let dt = t - t0;
    let (s, c) = (omega * dt).sin_cos();
    if s.abs() < CAUSTIC_THRESHOLD {
        let n = (omega * dt / PI).round();
        return Err(Error::CausticSingularity { t, mode, nearest: t0 + n * PI / omega });
    }
    Ok((s, c))
}

/// Coefficient set for the propagator from `t0` to `t`.
pub fn coefficients(basis: &NormalModeBasis, t0: f64, t: f64) -> Result<PropagatorCoeffs> {
    let dt = t - t0;
    if !(dt >= CAUSTIC_THRESHOLD) {
        return Err(Error::CausticSingularity { t, mode: "centre-of-mass", nearest: t0 });
    }
    let [w1, w2] = basis.frequencies;
    let [m1, m2, m3] = basis.masses;
    let (s1, c1) = caustic_check(t, t0, w1, "mode 1")?;
    let (s2, c2) = caustic_check(t, t0, w2, "mode 2")?;

    let cot_stiffness = [m1 * w1 * c1 / s1, m2 * w2 * c2 / s2, m3 / dt];
    let csc_stiffness = [m1 * w1 / s1, m2 * w2 / s2, m3 / dt];
    let rows = basis.rows();

    // symmetric in (i, j) bit for bit
    let contract = |k: &[f64; 3], i: usize, j: usize| -> f64 {
        let (i, j) = (i.min(j), i.max(j));
        (0..3).map(|m| k[m] * rows[m][i] * rows[m][j]).sum()
    };
    let a = std::array::from_fn(|i| 0.5 * contract(&cot_stiffness, i, i));
    let b = std::array::from_fn(|i| {
        std::array::from_fn(|j| if i == j { 0.0 } else { contract(&cot_stiffness, i, j) })
    });
    let alpha = std::array::from_fn(|i| std::array::from_fn(|d| contract(&csc_stiffness, i, d)));

    Ok(PropagatorCoeffs { t, dt, rows, cot_stiffness, csc_stiffness, a, b, alpha })
}

fn dot(u: &[f64; 3], x: &[f64; 3]) -> f64 {
    u[0] * x[0] + u[1] * x[1] + u[2] * x[2]
}

/// `D(X) = ½ Σ_modes κ cot(ωΔt) (uₘ·X)²`.
pub fn quadratic_form_d(coeffs: &PropagatorCoeffs, x: [f64; 3]) -> f64 {
    (0..3)
        .map(|m| 0.5 * coeffs.cot_stiffness[m] * dot(&coeffs.rows[m], &x).powi(2))
        .sum()
}

/// `Cᵢ(X) = −Σ_d α_d⁽ⁱ⁾ x_d`.
pub fn linear_form_c(coeffs: &PropagatorCoeffs, x: [f64; 3]) -> [f64; 3] {
    std::array::from_fn(|i| -dot(&coeffs.alpha[i], &x))
}

/// `Cᵢ(X)` summed mode by mode, `−Σₘ κₘ/sin (uₘ·X) uₘᵢ`.
pub fn linear_form_c_by_mode(coeffs: &PropagatorCoeffs, x: [f64; 3]) -> [f64; 3] {
    std::array::from_fn(|i| {
        -(0..3)
            .map(|m| coeffs.csc_stiffness[m] * dot(&coeffs.rows[m], &x) * coeffs.rows[m][i])
            .sum::<f64>()
    })
}

/// Phase of the unnormalized propagator, `S(X, t; X₀, t0)`, in units of action.
pub fn action(coeffs: &PropagatorCoeffs, x: [f64; 3], x0: [f64; 3]) -> f64 {
    let c = linear_form_c(coeffs, x);
    let mut s = quadratic_form_d(coeffs, x);
    for i in 0..3 {
        s += coeffs.a[i] * x0[i] * x0[i] + c[i] * x0[i];
        for j in i + 1..3 {
            s += coeffs.b[i][j] * x0[i] * x0[j];
        }
    }
    s
}
