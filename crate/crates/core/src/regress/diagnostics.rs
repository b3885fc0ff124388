use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::result::{nullable, Family, FitResult};
use super::special::{tail_probability, Distribution};
use super::{DesignMatrix, RegressError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    #[serde(with = "nullable")]
    pub durbin_watson: f64,
    #[serde(with = "nullable")]
    pub jarque_bera: f64,
    #[serde(with = "nullable")]
    pub jb_pvalue: f64,
    #[serde(with = "nullable")]
    pub skew: f64,
    #[serde(with = "nullable")]
    pub kurtosis: f64,
    #[serde(with = "nullable")]
    pub condition_number: f64,
}

impl Diagnostics {
    /// Residual statistics in row order. Skew and kurtosis use population moments.
    pub fn from_residuals(e: &[f64], condition_number: f64) -> Result<Self, RegressError> {
        let n = e.len();
        let ss: f64 = e.iter().map(|v| v * v).sum();
        if n == 0 || ss == 0.0 {
            return Err(RegressError::DegenerateResiduals);
        }
        let dw = e.windows(2).map(|w| (w[1] - w[0]).powi(2)).sum::<f64>() / ss;

        let nf = n as f64;
        let mean = e.iter().sum::<f64>() / nf;
        let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
        for v in e {
            let d = v - mean;
            let d2 = d * d;
            m2 += d2;
            m3 += d2 * d;
            m4 += d2 * d2;
        }
        m2 /= nf;
        m3 /= nf;
        m4 /= nf;
        if m2 == 0.0 {
            return Err(RegressError::DegenerateResiduals);
        }
        let skew = m3 / m2.powf(1.5);
        let kurtosis = m4 / (m2 * m2);
        let jb = nf / 6.0 * (skew * skew + (kurtosis - 3.0).powi(2) / 4.0);
        let jb_pvalue = tail_probability(Distribution::ChiSquare { df: 2.0 }, jb)?;
        Ok(Diagnostics { durbin_watson: dw, jarque_bera: jb, jb_pvalue, skew, kurtosis, condition_number })
    }
}

pub(crate) fn singular_values(x: &DMatrix<f64>) -> Vec<f64> {
    x.clone().svd(false, false).singular_values.iter().copied().collect()
}

pub(crate) fn condition_number(x: &DMatrix<f64>) -> f64 {
    let sv = singular_values(x);
    let max = sv.iter().copied().fold(0.0, f64::max);
    let min = sv.iter().copied().fold(f64::INFINITY, f64::min);
    max / min
}

/// True when residuals are zero up to rounding relative to the response scale.
pub(crate) fn residuals_vanish(e: &DVector<f64>, y: &DVector<f64>) -> bool {
    let scale = y.amax().max(1.0);
    e.amax() <= 1e-12 * scale
}

/// Durbin–Watson, Jarque–Bera with its χ²(2) p-value, skew, kurtosis and the design's
/// condition number, from an OLS fit's residuals.
pub fn residual_diagnostics(d: &DesignMatrix, fit: &FitResult) -> Result<Diagnostics, RegressError> {
    if fit.family != Family::Ols {
        return Err(RegressError::WrongFamily { expected: Family::Ols });
    }
    if fit.coefficients.len() != d.ncols() {
        return Err(RegressError::DimensionMismatch { expected: d.ncols(), got: fit.coefficients.len() });
    }
    let beta = DVector::from_column_slice(&fit.coefficients);
    let e = &d.y - &d.x * beta;
    if residuals_vanish(&e, &d.y) {
        return Err(RegressError::DegenerateResiduals);
    }
    Diagnostics::from_residuals(e.as_slice(), condition_number(&d.x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution as _, StandardNormal};

    #[test]
    fn alternating_residuals_durbin_watson() {
        for n in [2usize, 5, 10, 101] {
            let e: Vec<f64> = (0..n).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
            let d = Diagnostics::from_residuals(&e, 1.0).unwrap();
            let expected = 4.0 * (n as f64 - 1.0) / n as f64;
            assert!((d.durbin_watson - expected).abs() < 1e-12, "n={n}");
        }
    }

    #[test]
    fn normal_residual_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(20_181_106);
        let e: Vec<f64> = (0..100_000).map(|_| StandardNormal.sample(&mut rng)).collect();
        let d = Diagnostics::from_residuals(&e, 1.0).unwrap();
        assert!(d.skew.abs() < 0.03, "skew {}", d.skew);
        assert!((d.kurtosis - 3.0).abs() < 0.06, "kurtosis {}", d.kurtosis);
        assert!(d.jb_pvalue > 1e-3);
    }

    #[test]
    fn jarque_bera_by_hand() {
        // residuals 1, 2, 3, 10: mean 4, deviations -3 -2 -1 6
        let d = Diagnostics::from_residuals(&[1.0, 2.0, 3.0, 10.0], 1.0).unwrap();
        let m2 = (9.0 + 4.0 + 1.0 + 36.0) / 4.0;
        let m3 = (-27.0 - 8.0 - 1.0 + 216.0) / 4.0;
        let m4 = (81.0 + 16.0 + 1.0 + 1296.0) / 4.0;
        let s = m3 / f64::powf(m2, 1.5);
        let k = m4 / (m2 * m2);
        assert!((d.skew - s).abs() < 1e-12);
        assert!((d.kurtosis - k).abs() < 1e-12);
        let jb = 4.0 / 6.0 * (s * s + (k - 3.0).powi(2) / 4.0);
        assert!((d.jarque_bera - jb).abs() < 1e-12);
        assert!((d.jb_pvalue - (-jb / 2.0).exp()).abs() < 1e-12);
        assert!((d.durbin_watson - (1.0 + 1.0 + 49.0) / 114.0).abs() < 1e-12);
    }

    #[test]
    fn zero_residuals_rejected() {
        assert_eq!(Diagnostics::from_residuals(&[0.0; 4], 1.0), Err(RegressError::DegenerateResiduals));
    }

    #[test]
    fn condition_number_of_diagonal() {
        let x = DMatrix::from_row_slice(3, 2, &[4.0, 0.0, 0.0, 0.5, 0.0, 0.0]);
        assert!((condition_number(&x) - 8.0).abs() < 1e-12);
    }
}
