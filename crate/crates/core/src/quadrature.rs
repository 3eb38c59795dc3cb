//! Composite Simpson weights on uniform grids.

use crate::error::{Error, Result};

/// Composite Simpson weights for `count` equally spaced nodes with spacing
/// `step`. `count` must be odd and at least 3.
pub fn simpson_weights(count: usize, step: f64) -> Result<Vec<f64>> {
    if count < 3 || count % 2 == 0 {
        return Err(Error::InvalidGrid {
            field: "simpson",
            reason: format!("node count {count} must be odd and at least 3"),
        });
    }
    let h3 = step / 3.0;
    Ok((0..count)
        .map(|i| {
            if i == 0 || i == count - 1 {
                h3
            } else if i % 2 == 1 {
                4.0 * h3
            } else {
                2.0 * h3
            }
        })
        .collect())
}

/// `count` equally spaced nodes from `min` to `max` inclusive.
pub fn linspace(min: f64, max: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![min];
    }
    let step = (max - min) / (count - 1) as f64;
    (0..count)
        .map(|i| if i + 1 == count { max } else { min + step * i as f64 })
        .collect()
}

/// Simpson integral of samples on a uniform grid.
pub fn simpson(values: &[f64], step: f64) -> Result<f64> {
    let w = simpson_weights(values.len(), step)?;
    Ok(values.iter().zip(&w).map(|(v, w)| v * w).sum())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_sum_to_length() {
        let w = simpson_weights(11, 0.1).unwrap();
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn exact_for_cubics() {
        let x = linspace(-1.0, 2.0, 7);
        let v: Vec<f64> = x.iter().map(|x| x * x * x - 2.0 * x + 1.0).collect();
        let exact = (16.0 / 4.0 - 4.0 + 2.0) - (0.25 - 1.0 - 1.0);
        assert!((simpson(&v, 0.5).unwrap() - exact).abs() < 1e-13);
    }

    #[test]
    fn rejects_even_counts() {
        assert!(simpson_weights(4, 1.0).is_err());
        assert!(simpson_weights(1, 1.0).is_err());
    }

    #[test]
    fn gaussian_converges() {
        let x = linspace(-10.0, 10.0, 201);
        let v: Vec<f64> = x.iter().map(|x| (-x * x).exp()).collect();
        let got = simpson(&v, 0.1).unwrap();
        assert!((got - std::f64::consts::PI.sqrt()).abs() < 1e-12);
    }
}
