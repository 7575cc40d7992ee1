//! Descriptive statistics and the hypothesis tests used for labeling.

use serde::{Deserialize, Serialize};
use statrs::function::beta::beta_reg;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("need at least {min} observations, got {got}")]
    TooFew { got: usize, min: usize },
    #[error("sample has zero variance")]
    ZeroVariance,
    #[error("inputs differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
}

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Variance with divisor `n`.
pub fn population_variance(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / x.len() as f64
}

pub fn population_std(x: &[f64]) -> f64 {
    population_variance(x).sqrt()
}

/// Standard deviation with divisor `n - 1`.
pub fn sample_std(x: &[f64]) -> f64 {
    let m = mean(x);
    (x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (x.len() as f64 - 1.0)).sqrt()
}

pub fn median(x: &[f64]) -> f64 {
    let mut v = x.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Least-squares slope of `y` against `t`.
pub fn linear_slope(t: &[f64], y: &[f64]) -> f64 {
    let tm = mean(t);
    let ym = mean(y);
    let sxx: f64 = t.iter().map(|v| (v - tm) * (v - tm)).sum();
    let sxy: f64 = t.iter().zip(y).map(|(a, b)| (a - tm) * (b - ym)).sum();
    if sxx > 0.0 {
        sxy / sxx
    } else {
        f64::NAN
    }
}

/// Student-t CDF via the regularized incomplete beta function.
pub fn student_t_cdf(t: f64, df: f64) -> f64 {
    if t.is_infinite() {
        return if t > 0.0 { 1.0 } else { 0.0 };
    }
    let x = df / (df + t * t);
    let tail = 0.5 * beta_reg(df / 2.0, 0.5, x);
    if t > 0.0 {
        1.0 - tail
    } else {
        tail
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tail {
    Greater,
    Less,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTest {
    pub n: usize,
    pub mean: f64,
    pub t_stat: f64,
    pub p_value: f64,
}

/// One-sample t-test of the mean against zero, one-tailed.
pub fn one_tailed_t_test(x: &[f64], tail: Tail) -> Result<TTest, StatsError> {
    if x.len() < 2 {
        return Err(StatsError::TooFew { got: x.len(), min: 2 });
    }
    let sd = sample_std(x);
    if !(sd > 0.0) {
        return Err(StatsError::ZeroVariance);
    }
    let n = x.len();
    let m = mean(x);
    let t = m / (sd / (n as f64).sqrt());
    let df = n as f64 - 1.0;
    let p = match tail {
        Tail::Greater => 1.0 - student_t_cdf(t, df),
        Tail::Less => student_t_cdf(t, df),
    };
    Ok(TTest {
        n,
        mean: m,
        t_stat: t,
        p_value: p.clamp(0.0, 1.0),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Correlation {
    pub n: usize,
    pub r: f64,
    pub p_value: f64,
}

/// Pearson correlation with a two-tailed t-based significance.
pub fn pearson_corr_test(x: &[f64], y: &[f64]) -> Result<Correlation, StatsError> {
    if x.len() != y.len() {
        return Err(StatsError::LengthMismatch(x.len(), y.len()));
    }
    let n = x.len();
    if n < 3 {
        return Err(StatsError::TooFew { got: n, min: 3 });
    }
    let (mx, my) = (mean(x), mean(y));
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    let syy: f64 = y.iter().map(|v| (v - my) * (v - my)).sum();
    if !(sxx > 0.0 && syy > 0.0) {
        return Err(StatsError::ZeroVariance);
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let r = (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0);
    let df = n as f64 - 2.0;
    let p = if r.abs() >= 1.0 {
        0.0
    } else {
        let t = r * (df / (1.0 - r * r)).sqrt();
        2.0 * student_t_cdf(-t.abs(), df)
    };
    Ok(Correlation {
        n,
        r,
        p_value: p.clamp(0.0, 1.0),
    })
}
