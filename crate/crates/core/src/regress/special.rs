//! Log-gamma, regularized incomplete gamma and beta functions, and the tail
//! probabilities built on them.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::RegressError;

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;
const EPS: f64 = 1e-16;
const TINY: f64 = 1e-300;
const MAX_ITER: usize = 20_000;

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// Natural log of the gamma function for x > 0.
pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        // reflection
        return (PI / (PI * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    if x >= 10.0 {
        return (x - 0.5) * x.ln() - x + LN_SQRT_2PI + stirling_correction(x);
    }
    let x = x - 1.0;
    let mut sum = LANCZOS[0];
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        sum += c / (x + i as f64);
    }
    let t = x + LANCZOS_G + 0.5;
    LN_SQRT_2PI + (x + 0.5) * t.ln() - t + sum.ln()
}

/// ln Γ(x) − [(x − ½) ln x − x + ½ ln 2π], valid for x ≥ 10.
fn stirling_correction(x: f64) -> f64 {
    let x2 = 1.0 / (x * x);
    (1.0 / 12.0 - x2 * (1.0 / 360.0 - x2 * (1.0 / 1260.0 - x2 * (1.0 / 1680.0 - x2 / 1188.0)))) / x
}

/// ln B(a, b), keeping precision when either argument is large.
pub fn ln_beta(a: f64, b: f64) -> f64 {
    let (p, q) = if a < b { (a, b) } else { (b, a) };
    if p >= 10.0 {
        let corr = stirling_correction(p) + stirling_correction(q) - stirling_correction(p + q);
        -0.5 * q.ln() + LN_SQRT_2PI + corr + (p - 0.5) * (p / (p + q)).ln() + q * (-p / (p + q)).ln_1p()
    } else if q >= 10.0 {
        let corr = stirling_correction(q) - stirling_correction(p + q);
        ln_gamma(p) + corr + p - p * (p + q).ln() + (q - 0.5) * (-p / (p + q)).ln_1p()
    } else {
        ln_gamma(p) + ln_gamma(q) - ln_gamma(p + q)
    }
}

/// Regularized lower incomplete gamma P(a, x) and its complement Q(a, x).
fn incomplete_gamma(a: f64, x: f64) -> (f64, f64) {
    if x <= 0.0 {
        return (0.0, 1.0);
    }
    if x.is_infinite() {
        return (1.0, 0.0);
    }
    let log_prefix = a * x.ln() - x - ln_gamma(a);
    if x < a + 1.0 {
        let mut ap = a;
        let mut term = 1.0 / a;
        let mut sum = term;
        for _ in 0..MAX_ITER {
            ap += 1.0;
            term *= x / ap;
            sum += term;
            if term.abs() < sum.abs() * EPS {
                break;
            }
        }
        let p = (sum.ln() + log_prefix).exp();
        (p, 1.0 - p)
    } else {
        // modified Lentz continued fraction for Q
        let mut b = x + 1.0 - a;
        let mut c = 1.0 / TINY;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..MAX_ITER {
            let an = -(i as f64) * (i as f64 - a);
            b += 2.0;
            d = an * d + b;
            if d.abs() < TINY {
                d = TINY;
            }
            c = b + an / c;
            if c.abs() < TINY {
                c = TINY;
            }
            d = 1.0 / d;
            let delta = d * c;
            h *= delta;
            if (delta - 1.0).abs() < EPS {
                break;
            }
        }
        let q = (h.ln() + log_prefix).exp();
        (1.0 - q, q)
    }
}

pub fn gamma_p(a: f64, x: f64) -> f64 {
    incomplete_gamma(a, x).0
}

pub fn gamma_q(a: f64, x: f64) -> f64 {
    incomplete_gamma(a, x).1
}

fn beta_continued_fraction(a: f64, b: f64, x: f64) -> f64 {
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// Regularized incomplete beta I_x(a, b).
pub fn beta_inc(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let log_front = a * x.ln() + b * (-x).ln_1p() - ln_beta(a, b);
    if x < (a + 1.0) / (a + b + 2.0) {
        (log_front.exp() * beta_continued_fraction(a, b, x)) / a
    } else {
        1.0 - (log_front.exp() * beta_continued_fraction(b, a, 1.0 - x)) / b
    }
}

/// Upper-tail complement 1 − I_x(a, b) = I_{1−x}(b, a), computed without cancellation.
fn beta_inc_upper(a: f64, b: f64, x: f64) -> f64 {
    beta_inc(b, a, 1.0 - x)
}

/// Reference distributions for test statistics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Distribution {
    Normal,
    StudentT { df: f64 },
    ChiSquare { df: f64 },
    F { df1: f64, df2: f64 },
}

/// p-value of `stat`: two-sided for Normal and StudentT, upper tail for ChiSquare and F.
pub fn tail_probability(dist: Distribution, stat: f64) -> Result<f64, RegressError> {
    let check = |df: f64| {
        if df > 0.0 && !df.is_nan() {
            Ok(())
        } else {
            Err(RegressError::InvalidDf(df))
        }
    };
    if stat.is_nan() {
        return Ok(f64::NAN);
    }
    Ok(match dist {
        // P(|Z| > z) = P(χ²₁ > z²)
        Distribution::Normal => gamma_q(0.5, 0.5 * stat * stat),
        Distribution::StudentT { df } => {
            check(df)?;
            if stat.is_infinite() {
                0.0
            } else {
                let t2 = stat * stat;
                // pick the argument that avoids 1 − x cancellation
                if t2 < df {
                    beta_inc(0.5 * df, 0.5, df / (df + t2))
                } else {
                    beta_inc_upper(0.5, 0.5 * df, t2 / (df + t2))
                }
            }
        }
        Distribution::ChiSquare { df } => {
            check(df)?;
            gamma_q(0.5 * df, 0.5 * stat)
        }
        Distribution::F { df1, df2 } => {
            check(df1)?;
            check(df2)?;
            if stat <= 0.0 {
                1.0
            } else if stat.is_infinite() {
                0.0
            } else {
                let x = df2 / (df2 + df1 * stat);
                beta_inc(0.5 * df2, 0.5 * df1, x)
            }
        }
    })
}

/// Two-sided critical value: the t with P(|T| > t) = alpha.
pub fn student_t_critical(df: f64, alpha: f64) -> Result<f64, RegressError> {
    if !(df > 0.0) {
        return Err(RegressError::InvalidDf(df));
    }
    let p = |t: f64| tail_probability(Distribution::StudentT { df }, t).unwrap_or(f64::NAN);
    let (mut lo, mut hi) = (0.0, 1.0);
    while p(hi) > alpha {
        hi *= 2.0;
        if hi > 1e12 {
            return Ok(f64::INFINITY);
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if p(mid) > alpha {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-14 * hi {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}
