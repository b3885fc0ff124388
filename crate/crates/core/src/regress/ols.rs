use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use super::diagnostics::{residuals_vanish, Diagnostics};
use super::result::{Family, FitResult, FitStats, OlsStats};
use super::special::{student_t_critical, tail_probability, Distribution};
use super::{DesignMatrix, RegressError, INTERCEPT};

/// Relative singular-value threshold below which the design is treated as rank deficient.
pub(crate) const RANK_TOL: f64 = 1e-10;

/// Labels of columns participating in a (near) null-space direction of `x`, or `None` when
/// `x` has full column rank. Also returns the condition number.
pub(crate) fn rank_check(x: &DMatrix<f64>, labels: &[String]) -> (Option<Vec<String>>, f64) {
    let svd = x.clone().svd(false, true);
    let s = &svd.singular_values;
    let smax = s.iter().copied().fold(0.0, f64::max);
    let smin = s.iter().copied().fold(f64::INFINITY, f64::min);
    let cond = smax / smin;
    let v_t = svd.v_t.expect("requested V");
    let mut implicated = vec![false; labels.len()];
    let mut deficient = smax == 0.0;
    for (k, &sk) in s.iter().enumerate() {
        if sk <= RANK_TOL * smax {
            deficient = true;
            for (j, flag) in implicated.iter_mut().enumerate() {
                if v_t[(k, j)].abs() > 1e-6 {
                    *flag = true;
                }
            }
        }
    }
    if !deficient {
        return (None, cond);
    }
    let cols = labels.iter().zip(&implicated).filter(|(_, &f)| f).map(|(l, _)| l.clone()).collect();
    (Some(cols), cond)
}

/// Gaussian log-likelihood at the MLE variance RSS/n, with AIC and BIC for `k` parameters.
pub(crate) fn gaussian_information(rss: f64, n: usize, k: usize) -> (f64, f64, f64) {
    let nf = n as f64;
    let ll = -nf / 2.0 * ((2.0 * PI).ln() + (rss / nf).ln() + 1.0);
    information_criteria(ll, n, k)
}

pub(crate) fn information_criteria(ll: f64, n: usize, k: usize) -> (f64, f64, f64) {
    let k = k as f64;
    (ll, 2.0 * k - 2.0 * ll, k * (n as f64).ln() - 2.0 * ll)
}

fn two_sided_p(dist: Distribution, stat: f64) -> Result<f64, RegressError> {
    if stat.is_infinite() {
        return Ok(0.0);
    }
    tail_probability(dist, stat)
}

/// Ordinary least squares through a QR decomposition of the design.
pub fn ols_fit(d: &DesignMatrix) -> Result<FitResult, RegressError> {
    let (n, p) = (d.nrows(), d.ncols());
    if p == 0 || n <= p {
        return Err(RegressError::InsufficientObservations { n, p });
    }
    let (deficient, cond) = rank_check(&d.x, &d.column_labels);
    if let Some(columns) = deficient {
        return Err(RegressError::RankDeficient { columns });
    }

    let qr = d.x.clone().qr();
    let r = qr.r();
    let qty = qr.q().transpose() * &d.y;
    let beta = r.solve_upper_triangular(&qty).ok_or_else(|| RegressError::RankDeficient { columns: d.column_labels.clone() })?;
    let r_inv = r
        .solve_upper_triangular(&DMatrix::identity(p, p))
        .ok_or_else(|| RegressError::RankDeficient { columns: d.column_labels.clone() })?;
    let xtx_inv = &r_inv * r_inv.transpose();

    let resid: DVector<f64> = &d.y - &d.x * &beta;
    let rss = resid.norm_squared();
    let df_resid = n - p;
    let sigma2 = rss / df_resid as f64;
    let mut cov = xtx_inv * sigma2;
    // symmetrize away rounding
    for i in 0..p {
        for j in 0..i {
            let m = 0.5 * (cov[(i, j)] + cov[(j, i)]);
            cov[(i, j)] = m;
            cov[(j, i)] = m;
        }
    }

    let t_dist = Distribution::StudentT { df: df_resid as f64 };
    let t_crit = student_t_critical(df_resid as f64, 0.05)?;
    let mut se = Vec::with_capacity(p);
    let mut stat = Vec::with_capacity(p);
    let mut pval = Vec::with_capacity(p);
    let mut ci = Vec::with_capacity(p);
    for j in 0..p {
        let s = cov[(j, j)].max(0.0).sqrt();
        let t = beta[j] / s;
        se.push(s);
        stat.push(t);
        pval.push(two_sided_p(t_dist, t)?);
        ci.push([beta[j] - t_crit * s, beta[j] + t_crit * s]);
    }

    let k_const = usize::from(d.column_labels.first().is_some_and(|l| l == INTERCEPT));
    let tss = if k_const == 1 {
        let mean = d.y.mean();
        d.y.iter().map(|v| (v - mean).powi(2)).sum::<f64>()
    } else {
        d.y.norm_squared()
    };
    let r2 = if tss > 0.0 { 1.0 - rss / tss } else { f64::NAN };
    let df_model = p - k_const;
    let adj_r2 = 1.0 - (n - k_const) as f64 / df_resid as f64 * (1.0 - r2);
    let (f_stat, f_pvalue) = if df_model == 0 {
        (f64::NAN, f64::NAN)
    } else {
        let f = ((tss - rss) / df_model as f64) / sigma2;
        let fp = tail_probability(Distribution::F { df1: df_model as f64, df2: df_resid as f64 }, f)?;
        (f, fp)
    };
    let (log_likelihood, aic, bic) = gaussian_information(rss, n, p);

    let diagnostics = if residuals_vanish(&resid, &d.y) {
        None
    } else {
        Some(Diagnostics::from_residuals(resid.as_slice(), cond)?)
    };

    Ok(FitResult {
        family: Family::Ols,
        response: d.response_label.clone(),
        labels: d.column_labels.clone(),
        coefficients: beta.iter().copied().collect(),
        covariance: (0..p).map(|i| (0..p).map(|j| cov[(i, j)]).collect()).collect(),
        std_errors: se,
        test_stats: stat,
        p_values: pval,
        conf_intervals_95: ci,
        fit_stats: FitStats::Ols(OlsStats { r2, adj_r2, f_stat, f_pvalue, log_likelihood, aic, bic, rss, df_model, df_resid }),
        diagnostics,
        converged: true,
        iterations: 0,
        n_obs: n,
        excluded: d.excluded,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::regress::residual_diagnostics;
    use num_bigint::BigInt;
    use num_rational::BigRational;
    use num_traits::{ToPrimitive, Zero};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn design(labels: &[&str], x: Vec<Vec<f64>>, y: Vec<f64>) -> DesignMatrix {
        DesignMatrix::from_rows(labels, &x, &y).unwrap()
    }

    fn synthetic(n: usize, seed: u64) -> DesignMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut x = Vec::new();
        let mut y = Vec::new();
        for _ in 0..n {
            let a: f64 = rng.gen();
            let b = f64::from(rng.gen_range(0..2u8));
            let noise: f64 = rng.gen_range(-0.1..0.1);
            x.push(vec![1.0, a, b, a * b]);
            y.push(0.3 + 0.2 * a - 0.1 * b + 0.15 * a * b + noise);
        }
        design(&["Intercept", "a", "b", "a:b"], x, y)
    }

    /// Exact normal-equations solve in rational arithmetic.
    fn rational_oracle(d: &DesignMatrix) -> Vec<f64> {
        let q = |v: f64| BigRational::from_float(v).unwrap();
        let p = d.ncols();
        let mut a: Vec<Vec<BigRational>> = vec![vec![BigRational::zero(); p + 1]; p];
        for i in 0..d.nrows() {
            let row: Vec<BigRational> = (0..p).map(|j| q(d.x[(i, j)])).collect();
            let yi = q(d.y[i]);
            for r in 0..p {
                for c in 0..p {
                    a[r][c] += &row[r] * &row[c];
                }
                a[r][p] += &row[r] * &yi;
            }
        }
        for col in 0..p {
            let piv = (col..p).find(|&r| !a[r][col].is_zero()).unwrap();
            a.swap(col, piv);
            for r in 0..p {
                if r != col && !a[r][col].is_zero() {
                    let f = &a[r][col] / &a[col][col];
                    for c in col..=p {
                        let v = &f * &a[col][c];
                        a[r][c] -= v;
                    }
                }
            }
        }
        (0..p)
            .map(|r| {
                let v = &a[r][p] / &a[r][r];
                // reduce to a manageable fraction before converting
                let scale = BigInt::from(1u64 << 62);
                let scaled = (v * BigRational::from_integer(scale.clone())).round().to_integer();
                scaled.to_f64().unwrap() / scale.to_f64().unwrap()
            })
            .collect()
    }

    #[test]
    fn exact_line() {
        let xs = [0.0, 1.0, 2.0, 3.0, 4.0];
        let d = design(&["Intercept", "x"], xs.iter().map(|&x| vec![1.0, x]).collect(), xs.iter().map(|x| 1.0 + 2.0 * x).collect());
        let fit = ols_fit(&d).unwrap();
        assert!((fit.coefficients[0] - 1.0).abs() < 1e-12);
        assert!((fit.coefficients[1] - 2.0).abs() < 1e-12);
        let s = fit.ols_stats().unwrap();
        assert!((s.r2 - 1.0).abs() < 1e-12);
        assert!(s.rss < 1e-24);
        assert!(fit.diagnostics.is_none());
        assert_eq!(residual_diagnostics(&d, &fit), Err(RegressError::DegenerateResiduals));
    }

    #[test]
    fn matches_rational_normal_equations() {
        let d = synthetic(200, 7);
        let fit = ols_fit(&d).unwrap();
        let oracle = rational_oracle(&d);
        for (b, o) in fit.coefficients.iter().zip(&oracle) {
            assert!((b - o).abs() < 1e-8, "{b} vs {o}");
        }
    }

    #[test]
    fn residuals_orthogonal_to_columns() {
        let d = synthetic(300, 11);
        let fit = ols_fit(&d).unwrap();
        let beta = DVector::from_column_slice(&fit.coefficients);
        let e = &d.y - &d.x * beta;
        let xte = d.x.transpose() * e;
        assert!(xte.amax() < 1e-8, "{}", xte.amax());
    }

    #[test]
    fn response_shift_moves_only_intercept() {
        let d = synthetic(120, 3);
        let mut shifted = d.clone();
        shifted.y.add_scalar_mut(5.0);
        let a = ols_fit(&d).unwrap();
        let b = ols_fit(&shifted).unwrap();
        assert!((b.coefficients[0] - a.coefficients[0] - 5.0).abs() < 1e-9);
        for j in 1..4 {
            assert!((b.coefficients[j] - a.coefficients[j]).abs() < 1e-9);
        }
        let (sa, sb) = (a.ols_stats().unwrap(), b.ols_stats().unwrap());
        assert!((sa.r2 - sb.r2).abs() < 1e-9);
        assert!((sa.f_stat - sb.f_stat).abs() < 1e-9 * sa.f_stat.max(1.0));
    }

    #[test]
    fn statistics_agree_with_definitions() {
        let d = synthetic(150, 5);
        let fit = ols_fit(&d).unwrap();
        let s = fit.ols_stats().unwrap();
        assert_eq!((s.df_model, s.df_resid), (3, 146));
        let f_from_r2 = (s.r2 / 3.0) / ((1.0 - s.r2) / 146.0);
        assert!((s.f_stat - f_from_r2).abs() < 1e-8 * f_from_r2);
        assert!((s.adj_r2 - (1.0 - (1.0 - s.r2) * 149.0 / 146.0)).abs() < 1e-12);
        for j in 0..4 {
            let half = fit.conf_intervals_95[j][1] - fit.coefficients[j];
            let tc = student_t_critical(146.0, 0.05).unwrap();
            assert!((half - tc * fit.std_errors[j]).abs() < 1e-12);
            assert!((fit.test_stats[j] - fit.coefficients[j] / fit.std_errors[j]).abs() < 1e-9);
        }
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(fit.covariance[i][j], fit.covariance[j][i]);
            }
        }
        let diag = fit.diagnostics.as_ref().unwrap();
        assert_eq!(diag, &residual_diagnostics(&d, &fit).unwrap());
        let json = fit.to_json();
        assert_eq!(FitResult::from_json(&json).unwrap(), fit);
    }

    #[test]
    fn information_criteria_reproduce_printed_values() {
        // log-likelihood 1491.6 over 1590 rows and 8 parameters prints AIC -2967., BIC -2924.
        let (_, aic, bic) = information_criteria(1491.6, 1590, 8);
        assert_eq!(aic.round(), -2967.0);
        assert_eq!(bic.round(), -2924.0);
    }

    #[test]
    fn collinear_columns_reported() {
        let x: Vec<Vec<f64>> = (0..10).map(|i| {
            let a = i as f64;
            vec![1.0, a, 2.0 * a, (a * 0.37).sin()]
        }).collect();
        let y: Vec<f64> = (0..10).map(|i| i as f64 * 0.5).collect();
        let d = design(&["Intercept", "a", "twice_a", "s"], x, y);
        match ols_fit(&d) {
            Err(RegressError::RankDeficient { columns }) => assert_eq!(columns, vec!["a", "twice_a"]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn too_few_rows() {
        let d = design(&["Intercept", "x"], vec![vec![1.0, 0.0], vec![1.0, 1.0]], vec![0.0, 1.0]);
        assert_eq!(ols_fit(&d), Err(RegressError::InsufficientObservations { n: 2, p: 2 }));
    }

    #[test]
    fn deterministic() {
        let d = synthetic(80, 9);
        assert_eq!(ols_fit(&d).unwrap().to_json(), ols_fit(&d).unwrap().to_json());
    }
}
