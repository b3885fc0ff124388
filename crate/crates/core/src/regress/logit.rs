use nalgebra::{DMatrix, DVector};

use super::ols::{information_criteria, rank_check};
use super::result::{Family, FitResult, FitStats, LogitStats};
use super::special::{tail_probability, Distribution};
use super::{build_design, DesignMatrix, FieldSource, RegressError, INTERCEPT, Z_975};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogitOptions {
    pub max_iter: usize,
    pub grad_tol: f64,
    pub ll_tol: f64,
    pub max_halvings: usize,
    /// Any |β| beyond this is treated as separation.
    pub coef_bound: f64,
    /// Separation when the Hessian's smallest eigenvalue falls below this fraction of its
    /// value at β = 0.
    pub curvature_collapse: f64,
}

impl Default for LogitOptions {
    fn default() -> Self {
        LogitOptions { max_iter: 100, grad_tol: 1e-8, ll_tol: 1e-10, max_halvings: 10, coef_bound: 30.0, curvature_collapse: 1e-6 }
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// ln(1 + e^z) without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// Bernoulli log-likelihood Σ yᵢzᵢ − ln(1 + e^{zᵢ}) with z = Xβ.
pub fn logit_log_likelihood(x: &DMatrix<f64>, y: &DVector<f64>, beta: &DVector<f64>) -> f64 {
    let z = x * beta;
    z.iter().zip(y.iter()).map(|(&z, &y)| y * z - softplus(z)).sum()
}

/// Score vector Xᵀ(y − μ).
pub fn logit_gradient(x: &DMatrix<f64>, y: &DVector<f64>, beta: &DVector<f64>) -> DVector<f64> {
    let mu = (x * beta).map(sigmoid);
    x.transpose() * (y - mu)
}

/// Observed information XᵀWX with W = diag(μ(1 − μ)).
fn information(x: &DMatrix<f64>, beta: &DVector<f64>) -> DMatrix<f64> {
    let w = (x * beta).map(|z| {
        let m = sigmoid(z);
        m * (1.0 - m)
    });
    let mut xw = x.clone();
    for (i, wi) in w.iter().enumerate() {
        xw.row_mut(i).scale_mut(*wi);
    }
    x.transpose() * xw
}

fn min_eigenvalue(h: &DMatrix<f64>) -> f64 {
    h.clone().symmetric_eigen().eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
}

struct Newton {
    beta: DVector<f64>,
    ll: f64,
    iterations: usize,
}

fn newton(x: &DMatrix<f64>, y: &DVector<f64>, labels: &[String], opts: &LogitOptions) -> Result<Newton, RegressError> {
    let p = x.ncols();
    let mut beta = DVector::zeros(p);
    let mut ll = logit_log_likelihood(x, y, &beta);
    let base_curvature = min_eigenvalue(&information(x, &beta));

    for it in 1..=opts.max_iter {
        let g = logit_gradient(x, y, &beta);
        if g.amax() < opts.grad_tol {
            return Ok(Newton { beta, ll, iterations: it - 1 });
        }
        let h = information(x, &beta);
        let Some(chol) = h.clone().cholesky() else {
            return Err(RegressError::Separation { iteration: it, detail: "Hessian is singular".into() });
        };
        let step = chol.solve(&g);

        let mut t = 1.0;
        let mut cand = &beta + &step;
        let mut cand_ll = logit_log_likelihood(x, y, &cand);
        // LL differences below rounding noise must not block the final polishing steps
        let slack = 1e-13 * ll.abs().max(1.0);
        let mut halvings = 0;
        while !(cand_ll >= ll - slack) && halvings < opts.max_halvings {
            t *= 0.5;
            cand = &beta + &step * t;
            cand_ll = logit_log_likelihood(x, y, &cand);
            halvings += 1;
        }
        let delta = cand_ll - ll;
        if !(delta >= -slack) {
            // no step along the Newton direction improves: numerically at the optimum
            return Ok(Newton { beta, ll, iterations: it });
        }
        beta = cand;
        ll = cand_ll;

        if let Some(j) = (0..p).find(|&j| beta[j].abs() > opts.coef_bound) {
            return Err(RegressError::Separation {
                iteration: it,
                detail: format!("|{}| = {:.1} exceeds {}", labels[j], beta[j].abs(), opts.coef_bound),
            });
        }
        if delta > 0.0 && min_eigenvalue(&information(x, &beta)) < opts.curvature_collapse * base_curvature {
            return Err(RegressError::Separation {
                iteration: it,
                detail: "Hessian became numerically singular while the likelihood was still rising".into(),
            });
        }
        if delta.abs() < opts.ll_tol {
            return Ok(Newton { beta, ll, iterations: it });
        }
    }
    Err(RegressError::NotConverged { iterations: opts.max_iter })
}

/// Binomial logit by Newton–Raphson from β = 0 with step-halving.
pub fn logit_fit(d: &DesignMatrix) -> Result<FitResult, RegressError> {
    logit_fit_with(d, &LogitOptions::default())
}

pub fn logit_fit_with(d: &DesignMatrix, opts: &LogitOptions) -> Result<FitResult, RegressError> {
    let (n, p) = (d.nrows(), d.ncols());
    if p == 0 || n <= p {
        return Err(RegressError::InsufficientObservations { n, p });
    }
    if d.y.iter().any(|&v| v != 0.0 && v != 1.0) {
        return Err(RegressError::NonBinaryResponse);
    }
    if let (Some(columns), _) = rank_check(&d.x, &d.column_labels) {
        return Err(RegressError::RankDeficient { columns });
    }

    let fit = newton(&d.x, &d.y, &d.column_labels, opts)?;
    let has_intercept = d.column_labels.first().is_some_and(|l| l == INTERCEPT);
    let ll_null = if has_intercept && p == 1 {
        fit.ll
    } else {
        let ones = DMatrix::from_element(n, 1, 1.0);
        newton(&ones, &d.y, &[INTERCEPT.to_string()], opts)?.ll
    };

    let h = information(&d.x, &fit.beta);
    let cov = h
        .clone()
        .cholesky()
        .map(|c| c.inverse())
        .ok_or_else(|| RegressError::Separation { iteration: fit.iterations, detail: "Hessian is singular at the optimum".into() })?;

    let mut se = Vec::with_capacity(p);
    let mut stat = Vec::with_capacity(p);
    let mut pval = Vec::with_capacity(p);
    let mut ci = Vec::with_capacity(p);
    for j in 0..p {
        let s = cov[(j, j)].max(0.0).sqrt();
        let b = fit.beta[j];
        let z = b / s;
        se.push(s);
        stat.push(z);
        pval.push(tail_probability(Distribution::Normal, z)?);
        ci.push([b - Z_975 * s, b + Z_975 * s]);
    }

    let k_const = usize::from(has_intercept);
    let df_model = p - k_const;
    let llr = 2.0 * (fit.ll - ll_null);
    let llr_pvalue = if df_model == 0 {
        f64::NAN
    } else {
        tail_probability(Distribution::ChiSquare { df: df_model as f64 }, llr.max(0.0))?
    };
    let pseudo_r2_mcfadden = 1.0 - fit.ll / ll_null;
    let (log_likelihood, aic, bic) = information_criteria(fit.ll, n, p);

    Ok(FitResult {
        family: Family::Logit,
        response: d.response_label.clone(),
        labels: d.column_labels.clone(),
        coefficients: fit.beta.iter().copied().collect(),
        covariance: (0..p).map(|i| (0..p).map(|j| 0.5 * (cov[(i, j)] + cov[(j, i)])).collect()).collect(),
        std_errors: se,
        test_stats: stat,
        p_values: pval,
        conf_intervals_95: ci,
        fit_stats: FitStats::Logit(LogitStats {
            log_likelihood,
            ll_null,
            pseudo_r2_mcfadden,
            llr,
            llr_pvalue,
            aic,
            bic,
            df_model,
            df_resid: n - p,
        }),
        diagnostics: None,
        converged: true,
        iterations: fit.iterations,
        n_obs: n,
        excluded: d.excluded,
    })
}

/// P = 1 / (1 + e^{−β·x}); `x` includes the intercept slot.
pub fn predict_prob(coefficients: &[f64], x: &[f64]) -> Result<f64, RegressError> {
    if coefficients.len() != x.len() {
        return Err(RegressError::DimensionMismatch { expected: coefficients.len(), got: x.len() });
    }
    Ok(sigmoid(coefficients.iter().zip(x).map(|(b, v)| b * v).sum()))
}

impl FitResult {
    pub fn predict_prob(&self, x: &[f64]) -> Result<f64, RegressError> {
        if self.family != Family::Logit {
            return Err(RegressError::WrongFamily { expected: Family::Logit });
        }
        predict_prob(&self.coefficients, x)
    }
}

/// Share of rows whose thresholded predicted probability equals the observed outcome.
/// Rows with absent covariates are skipped.
pub fn classify_accuracy<R: FieldSource>(fit: &FitResult, rows: &[R], threshold: f64) -> Result<f64, RegressError> {
    if fit.family != Family::Logit {
        return Err(RegressError::WrongFamily { expected: Family::Logit });
    }
    let d = build_design(rows, &fit.spec()?, &fit.response)?;
    let mut hits = 0usize;
    for i in 0..d.nrows() {
        let x: Vec<f64> = d.x.row(i).iter().copied().collect();
        let predicted = predict_prob(&fit.coefficients, &x)? > threshold;
        if predicted == (d.y[i] == 1.0) {
            hits += 1;
        }
    }
    Ok(hits as f64 / d.nrows() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::FieldValue;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn design(labels: &[&str], x: Vec<Vec<f64>>, y: Vec<f64>) -> DesignMatrix {
        DesignMatrix::from_rows(labels, &x, &y).unwrap()
    }

    fn simple(xs: &[f64], ys: &[f64]) -> DesignMatrix {
        design(&["Intercept", "x"], xs.iter().map(|&x| vec![1.0, x]).collect(), ys.to_vec())
    }

    #[test]
    fn matches_grid_search_oracle() {
        let xs = [0.1, 0.4, 0.5, 0.9, 1.3, 1.6, 2.0, 2.4];
        let ys = [0.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 1.0];
        let d = simple(&xs, &ys);
        let fit = logit_fit(&d).unwrap();

        let ll = |b0: f64, b1: f64| -> f64 {
            xs.iter().zip(&ys).map(|(x, y)| {
                let p = 1.0 / (1.0 + (-(b0 + b1 * x)).exp());
                y * p.ln() + (1.0 - y) * (1.0 - p).ln()
            }).sum()
        };
        let (mut c0, mut c1, mut half) = (0.0, 0.0, 10.0);
        for _ in 0..12 {
            let mut best = (f64::NEG_INFINITY, c0, c1);
            for i in -20..=20 {
                for j in -20..=20 {
                    let (b0, b1) = (c0 + half * i as f64 / 20.0, c1 + half * j as f64 / 20.0);
                    let v = ll(b0, b1);
                    if v > best.0 {
                        best = (v, b0, b1);
                    }
                }
            }
            (c0, c1) = (best.1, best.2);
            half /= 4.0;
        }
        assert!((fit.coefficients[0] - c0).abs() < 1e-3, "{} vs {c0}", fit.coefficients[0]);
        assert!((fit.coefficients[1] - c1).abs() < 1e-3, "{} vs {c1}", fit.coefficients[1]);
        assert!((fit.log_likelihood() - ll(c0, c1)).abs() < 1e-6);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..20 {
            let n = rng.gen_range(6..20);
            let p = rng.gen_range(1..5);
            let x = DMatrix::from_fn(n, p, |_, j| if j == 0 { 1.0 } else { rng.gen_range(-1.0..1.0) });
            let y = DVector::from_fn(n, |_, _| f64::from(rng.gen_range(0..2u8)));
            let beta = DVector::from_fn(p, |_, _| rng.gen_range(-2.0..2.0));
            let g = logit_gradient(&x, &y, &beta);
            let mut fd = DVector::zeros(p);
            for j in 0..p {
                let h = 1e-6 * beta[j].abs().max(1.0);
                let (mut up, mut dn) = (beta.clone(), beta.clone());
                up[j] += h;
                dn[j] -= h;
                fd[j] = (logit_log_likelihood(&x, &y, &up) - logit_log_likelihood(&x, &y, &dn)) / (2.0 * h);
            }
            let rel = (&g - &fd).norm() / g.norm().max(1.0);
            assert!(rel < 1e-6, "relative error {rel}");
        }
    }

    #[test]
    fn intercept_only_recovers_log_odds() {
        let y: Vec<f64> = (0..20).map(|i| f64::from(u8::from(i % 10 < 3))).collect();
        let d = design(&["Intercept"], vec![vec![1.0]; 20], y);
        let fit = logit_fit(&d).unwrap();
        assert!((fit.coefficients[0] - (0.3f64 / 0.7).ln()).abs() < 1e-8);
        assert_eq!(fit.logit_stats().unwrap().pseudo_r2_mcfadden, 0.0);
    }

    #[test]
    fn no_signal_gives_flat_slope() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let n = 400;
        let xs: Vec<f64> = (0..n).map(|_| rng.gen()).collect();
        let ys: Vec<f64> = (0..n).map(|i| f64::from(u8::from(i % 2 == 0))).collect();
        let fit = logit_fit(&simple(&xs, &ys)).unwrap();
        assert!(fit.coefficients[1].abs() < 3.0 * fit.std_errors[1]);
        let s = fit.logit_stats().unwrap();
        assert!(s.pseudo_r2_mcfadden >= 0.0 && s.pseudo_r2_mcfadden < 0.01);
        let half = fit.conf_intervals_95[1][1] - fit.coefficients[1];
        assert!((half - 1.959964 * fit.std_errors[1]).abs() < 1e-12);
    }

    #[test]
    fn complete_separation_detected() {
        let xs = [0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0];
        let ys = [0.0, 0.0, 0.0, 0.0, 1.0, 1.0, 1.0, 1.0];
        assert!(matches!(logit_fit(&simple(&xs, &ys)), Err(RegressError::Separation { .. })));
    }

    #[test]
    fn quasi_separation_detected() {
        // x = 1 always wins; x = 0 mixed
        let xs = [0.0, 0.0, 0.0, 0.0, 1.0, 1.0, 1.0];
        let ys = [0.0, 1.0, 0.0, 1.0, 1.0, 1.0, 1.0];
        assert!(matches!(logit_fit(&simple(&xs, &ys)), Err(RegressError::Separation { .. })));
    }

    #[test]
    fn non_binary_response_rejected() {
        assert_eq!(logit_fit(&simple(&[0.0, 1.0, 2.0], &[0.0, 0.5, 1.0])), Err(RegressError::NonBinaryResponse));
    }

    #[test]
    fn predicted_probabilities() {
        let p = predict_prob(&[-1.1237, 2.3281], &[1.0, 0.5]).unwrap();
        assert!((p - 0.5101).abs() < 5e-5, "{p}");
        let p = predict_prob(&[-3.7740, 7.2896], &[1.0, 0.0]).unwrap();
        assert!((p - 0.0225).abs() < 1e-4, "{p}");
        assert_eq!(predict_prob(&[0.0, 0.0, 0.0], &[1.0, 3.0, -2.0]).unwrap(), 0.5);
        assert_eq!(predict_prob(&[1.0, 2.0], &[1.0]), Err(RegressError::DimensionMismatch { expected: 2, got: 1 }));
        let mut last = 0.0;
        for i in 0..50 {
            let p = predict_prob(&[-2.0, 0.7], &[1.0, i as f64 * 0.3]).unwrap();
            assert!(p > last);
            last = p;
        }
    }

    struct Obs {
        x: f64,
        win: f64,
    }

    impl FieldSource for Obs {
        fn field_value(&self, name: &str) -> FieldValue {
            match name {
                "view_ratio" => FieldValue::Value(self.x),
                "win_lose" => FieldValue::Value(self.win),
                _ => FieldValue::Unknown,
            }
        }
    }

    fn fit_with(coefs: Vec<f64>) -> FitResult {
        let d = simple(&[0.0, 0.2, 0.4, 0.6, 0.8, 1.0, 0.5], &[0.0, 0.0, 1.0, 0.0, 1.0, 1.0, 1.0]);
        let mut fit = logit_fit(&d).unwrap();
        fit.labels = vec![INTERCEPT.into(), "view_ratio".into()];
        fit.response = "win_lose".into();
        fit.coefficients = coefs;
        fit
    }

    #[test]
    fn accuracy_perfect_labels() {
        // P = 0.9 for x = 1, 0.1 for x = 0
        let l = (0.9f64 / 0.1).ln();
        let fit = fit_with(vec![-l, 2.0 * l]);
        let rows: Vec<Obs> = (0..10).map(|i| Obs { x: f64::from(i % 2), win: f64::from(i % 2) }).collect();
        assert_eq!(classify_accuracy(&fit, &rows, 0.5).unwrap(), 1.0);
    }

    #[test]
    fn accuracy_matches_manual_confusion_matrix() {
        let mut rng = ChaCha8Rng::seed_from_u64(100);
        let rows: Vec<Obs> = (0..100).map(|_| Obs { x: rng.gen(), win: f64::from(rng.gen_range(0..2u8)) }).collect();
        let fit = fit_with(vec![-1.0, 2.5]);
        let (mut tp, mut tn, mut fp, mut fneg) = (0, 0, 0, 0);
        for r in &rows {
            let predicted_win = -1.0 + 2.5 * r.x > 0.0;
            match (predicted_win, r.win == 1.0) {
                (true, true) => tp += 1,
                (false, false) => tn += 1,
                (true, false) => fp += 1,
                (false, true) => fneg += 1,
            }
        }
        assert_eq!(tp + tn + fp + fneg, 100);
        let expected = f64::from(tp + tn) / 100.0;
        assert_eq!(classify_accuracy(&fit, &rows, 0.5).unwrap(), expected);
    }

    #[test]
    fn deterministic() {
        let xs = [0.1, 0.4, 0.5, 0.9, 1.3, 1.6, 2.0, 2.4];
        let ys = [0.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 1.0];
        assert_eq!(logit_fit(&simple(&xs, &ys)).unwrap(), logit_fit(&simple(&xs, &ys)).unwrap());
    }
}
