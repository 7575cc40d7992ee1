//! Tree-structured Parzen estimator search.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erf;

use super::cv::cross_validate;
use super::{Algorithm, Dataset, Hyperparams, MlError, ParamKind, ParamSpec, SplitPlan};
use crate::rng::{stream, StreamRng};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TpeConfig {
    pub budget: usize,
    pub n_startup: usize,
    /// Fraction of trials forming the "good" set.
    pub gamma: f64,
    pub n_candidates: usize,
}

impl Default for TpeConfig {
    fn default() -> Self {
        Self {
            budget: 40,
            n_startup: 10,
            gamma: 0.25,
            n_candidates: 24,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub params: Hyperparams,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TpeResult {
    pub best: Hyperparams,
    pub best_score: f64,
    pub trials: Vec<Trial>,
}

/// Minimum kernel bandwidth as a fraction of the parameter range.
const BANDWIDTH_FLOOR: f64 = 0.01;

/// Continuous coordinates the densities live on.
fn bounds(kind: &ParamKind) -> (f64, f64) {
    match kind {
        ParamKind::Uniform { lo, hi } => (*lo, *hi),
        ParamKind::LogUniform { lo, hi } => (lo.ln(), hi.ln()),
        ParamKind::Int { lo, hi } | ParamKind::OddInt { lo, hi } => (*lo as f64 - 0.5, *hi as f64 + 0.5),
        ParamKind::Categorical { choices } => (0.0, choices.len() as f64),
    }
}

fn encode(kind: &ParamKind, v: f64) -> f64 {
    match kind {
        ParamKind::LogUniform { .. } => v.ln(),
        ParamKind::Categorical { choices } => choices.iter().position(|c| *c == v).unwrap_or(0) as f64,
        _ => v,
    }
}

fn decode(kind: &ParamKind, u: f64) -> f64 {
    match kind {
        ParamKind::Uniform { lo, hi } => u.clamp(*lo, *hi),
        ParamKind::LogUniform { lo, hi } => u.exp().clamp(*lo, *hi),
        ParamKind::Int { lo, hi } => (u.round() as i64).clamp(*lo, *hi) as f64,
        ParamKind::OddInt { lo, hi } => {
            let lo_odd = if lo % 2 == 0 { lo + 1 } else { *lo };
            let hi_odd = if hi % 2 == 0 { hi - 1 } else { *hi };
            let o = 2 * ((u - 1.0) / 2.0).round() as i64 + 1;
            o.clamp(lo_odd, hi_odd) as f64
        }
        ParamKind::Categorical { choices } => choices[(u as usize).min(choices.len() - 1)],
    }
}

fn sample_prior(spec: &ParamSpec, rng: &mut StreamRng) -> f64 {
    if let ParamKind::Categorical { choices } = &spec.kind {
        return choices[rng.random_range(0..choices.len())];
    }
    let (lo, hi) = bounds(&spec.kind);
    decode(&spec.kind, rng.random_range(lo..hi))
}

/// Truncated Gaussian mixture over observed points plus a broad prior.
struct Parzen {
    mus: Vec<f64>,
    sigmas: Vec<f64>,
    lo: f64,
    hi: f64,
}

impl Parzen {
    fn new(points: &[f64], lo: f64, hi: f64) -> Self {
        let range = hi - lo;
        let mut sorted = points.to_vec();
        sorted.sort_by(f64::total_cmp);
        let mut mus = Vec::with_capacity(sorted.len() + 1);
        let mut sigmas = Vec::with_capacity(sorted.len() + 1);
        for (i, &m) in sorted.iter().enumerate() {
            let left = if i > 0 { m - sorted[i - 1] } else { f64::INFINITY };
            let right = if i + 1 < sorted.len() { sorted[i + 1] - m } else { f64::INFINITY };
            let nn = left.min(right);
            let bw = if nn.is_finite() { nn } else { range };
            mus.push(m);
            sigmas.push(bw.max(BANDWIDTH_FLOOR * range));
        }
        mus.push((lo + hi) / 2.0);
        sigmas.push(range);
        Self { mus, sigmas, lo, hi }
    }

    fn pdf(&self, u: f64) -> f64 {
        let w = 1.0 / self.mus.len() as f64;
        let cdf = |z: f64| 0.5 * (1.0 + erf(z / std::f64::consts::SQRT_2));
        self.mus
            .iter()
            .zip(&self.sigmas)
            .map(|(m, s)| {
                let mass = cdf((self.hi - m) / s) - cdf((self.lo - m) / s);
                let z = (u - m) / s;
                w * (-0.5 * z * z).exp() / (s * (2.0 * std::f64::consts::PI).sqrt()) / mass.max(1e-300)
            })
            .sum()
    }

    fn sample(&self, rng: &mut StreamRng) -> f64 {
        let c = rng.random_range(0..self.mus.len());
        let n = Normal::new(self.mus[c], self.sigmas[c]).expect("positive bandwidth");
        for _ in 0..100 {
            let u = n.sample(rng);
            if u >= self.lo && u <= self.hi {
                return u;
            }
        }
        self.mus[c].clamp(self.lo, self.hi)
    }
}

/// Smoothed category frequencies.
fn categorical_probs(points: &[f64], n_choices: usize) -> Vec<f64> {
    let mut p = vec![1.0; n_choices];
    for &u in points {
        p[(u as usize).min(n_choices - 1)] += 1.0;
    }
    let s: f64 = p.iter().sum();
    p.iter().map(|v| v / s).collect()
}

fn propose(space: &[ParamSpec], trials: &[Trial], cfg: &TpeConfig, rng: &mut StreamRng) -> Hyperparams {
    let mut order: Vec<usize> = (0..trials.len()).collect();
    let key = |t: &Trial| if t.score.is_nan() { f64::NEG_INFINITY } else { t.score };
    order.sort_by(|&a, &b| key(&trials[b]).total_cmp(&key(&trials[a])).then(a.cmp(&b)));
    let n_good = ((cfg.gamma * trials.len() as f64).ceil() as usize).clamp(1, trials.len().saturating_sub(1).max(1));
    let (good, bad) = order.split_at(n_good);

    let mut candidates: Vec<Vec<f64>> = vec![Vec::with_capacity(space.len()); cfg.n_candidates];
    let mut log_ratio = vec![0.0; cfg.n_candidates];
    for spec in space {
        let coords = |set: &[usize]| -> Vec<f64> { set.iter().map(|&i| encode(&spec.kind, trials[i].params[&spec.name])).collect() };
        let (gu, bu) = (coords(good), coords(bad));
        match &spec.kind {
            ParamKind::Categorical { choices } => {
                let l = categorical_probs(&gu, choices.len());
                let g = categorical_probs(&bu, choices.len());
                for (c, cand) in candidates.iter_mut().enumerate() {
                    let r: f64 = rng.random();
                    let mut acc = 0.0;
                    let mut pick = choices.len() - 1;
                    for (i, p) in l.iter().enumerate() {
                        acc += p;
                        if r < acc {
                            pick = i;
                            break;
                        }
                    }
                    cand.push(pick as f64);
                    log_ratio[c] += l[pick].ln() - g[pick].ln();
                }
            }
            kind => {
                let (lo, hi) = bounds(kind);
                let l = Parzen::new(&gu, lo, hi);
                let g = Parzen::new(&bu, lo, hi);
                for (c, cand) in candidates.iter_mut().enumerate() {
                    let u = l.sample(rng);
                    cand.push(u);
                    log_ratio[c] += l.pdf(u).max(1e-300).ln() - g.pdf(u).max(1e-300).ln();
                }
            }
        }
    }
    let best = super::argmax(&log_ratio);
    space
        .iter()
        .zip(&candidates[best])
        .map(|(spec, &u)| (spec.name.clone(), decode(&spec.kind, u)))
        .collect()
}

/// Maximize `objective` with `n_startup` random trials followed by TPE
/// proposals. NaN scores rank last.
pub fn tpe_maximize<F>(space: &[ParamSpec], objective: F, cfg: &TpeConfig, seed: u64) -> Result<TpeResult, MlError>
where
    F: Fn(&Hyperparams) -> f64 + Sync,
{
    if space.is_empty() {
        return Err(MlError::EmptySearchSpace);
    }
    if cfg.budget < cfg.n_startup || cfg.n_startup == 0 {
        return Err(MlError::BudgetTooSmall {
            budget: cfg.budget,
            n_startup: cfg.n_startup,
        });
    }
    let startup: Vec<Hyperparams> = (0..cfg.n_startup)
        .map(|t| {
            let mut rng = stream(seed, "tpe-startup", t as u64);
            space.iter().map(|s| (s.name.clone(), sample_prior(s, &mut rng))).collect()
        })
        .collect();
    let mut trials: Vec<Trial> = startup
        .into_par_iter()
        .map(|params| Trial {
            score: objective(&params),
            params,
        })
        .collect();
    for t in cfg.n_startup..cfg.budget {
        let params = propose(space, &trials, cfg, &mut stream(seed, "tpe-propose", t as u64));
        let score = objective(&params);
        trials.push(Trial { params, score });
    }
    let mut best = 0;
    for (i, t) in trials.iter().enumerate() {
        if t.score > trials[best].score || trials[best].score.is_nan() && !t.score.is_nan() {
            best = i;
        }
    }
    Ok(TpeResult {
        best: trials[best].params.clone(),
        best_score: trials[best].score,
        trials,
    })
}

/// Tune `algorithm` for mean CV score. The result includes the family
/// defaults for parameters outside the search space.
pub fn tpe_optimize(
    algorithm: Algorithm,
    data: &Dataset,
    plan: &SplitPlan,
    cfg: &TpeConfig,
    seed: u64,
) -> Result<TpeResult, MlError> {
    let defaults = algorithm.default_hyperparameters();
    let full = |p: &Hyperparams| {
        let mut hp = defaults.clone();
        hp.extend(p.iter().map(|(k, v)| (k.clone(), *v)));
        hp
    };
    let mut r = tpe_maximize(
        &algorithm.search_space(),
        |p| cross_validate(algorithm, &full(p), data, plan, seed).map_or(f64::NAN, |s| s.mean),
        cfg,
        seed,
    )?;
    r.best = full(&r.best);
    for t in r.trials.iter_mut() {
        t.params = full(&t.params);
    }
    Ok(r)
}
