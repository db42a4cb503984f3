//! Competing diagnostics: residual thinning with Ripley's K, and an
//! exponential-kernel maximum likelihood fit by gradient ascent.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::HawkesModel;
use crate::rng::{self, Domain};
use crate::sequence::EventSequence;

/// Keeps event `t_i` with probability `μ / λ(t_i | H_{t_i})`, using stream
/// `(seed, Thinning, 0)`. For a correct model the result is close to a
/// homogeneous Poisson process of rate `μ`.
pub fn residual_process(seq: &EventSequence, model: &HawkesModel, seed: u64) -> EventSequence {
    let mut rng = rng::stream(seed, Domain::Thinning, 0);
    let times = seq.times();
    let kept: Vec<f64> = times
        .iter()
        .enumerate()
        .filter_map(|(i, &t)| {
            let keep = model.mu / model.intensity(&times[..i], t);
            (rng.random::<f64>() < keep).then_some(t)
        })
        .collect();
    EventSequence::new(seq.id(), seq.horizon(), kept).expect("a subsequence of a valid sequence is valid")
}

/// `K̂(t) = Σ_i Σ_{j≠i} 1{|t_j − t_i| ≤ t} / (μ̂ N)`, without edge correction.
pub fn ripley_k(seq: &EventSequence, t: f64, mu_hat: f64) -> Result<f64> {
    if seq.is_empty() {
        return Err(Error::EmptySequence);
    }
    if !(t > 0.0) || !(mu_hat > 0.0) {
        return Err(Error::DomainError(format!("need t > 0 and mu_hat > 0, got {t} and {mu_hat}")));
    }
    let x = seq.times();
    let mut pairs = 0usize;
    let mut hi = 0;
    for i in 0..x.len() {
        while hi < x.len() && x[hi] - x[i] <= t {
            hi += 1;
        }
        // each unordered pair is found once from its earlier member
        pairs += hi - i - 1;
    }
    Ok(2.0 * pairs as f64 / (mu_hat * x.len() as f64))
}

/// Exponential-kernel fit `λ(t) = μ + Σ α e^{−β(t − t_j)}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpFit {
    pub mu: f64,
    pub alpha: f64,
    pub beta: f64,
    /// Mean per-sequence log-likelihood before the first step and after each
    /// accepted step.
    pub loglik_trace: Vec<f64>,
    pub steps: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpGdOptions {
    pub lr: f64,
    pub steps: usize,
    /// Holds `(μ, α, β)` at their initial values when set.
    pub freeze: [bool; 3],
}

const MAX_HALVINGS: usize = 20;
const FLOOR: f64 = 1e-8;

/// Log-likelihood of one sequence and its gradient in `(μ, α, β)` by the
/// usual O(N) recursion `R_i = e^{−β(t_i − t_{i−1})} (1 + R_{i−1})`.
pub fn exp_loglik(seq: &EventSequence, mu: f64, alpha: f64, beta: f64) -> (f64, [f64; 3]) {
    let horizon = seq.horizon();
    let (mut ll, mut g) = (-mu * horizon, [-horizon, 0.0, 0.0]);
    // r = Σ_{j<i} e^{−β(t_i−t_j)}, dr = ∂r/∂β
    let (mut r, mut dr) = (0.0, 0.0);
    let mut prev: Option<f64> = None;
    for &t in seq.times() {
        if let Some(p) = prev {
            let lag = t - p;
            let e = (-beta * lag).exp();
            dr = e * (dr - lag * (1.0 + r));
            r = e * (1.0 + r);
        }
        prev = Some(t);
        let lambda = mu + alpha * r;
        ll += lambda.ln();
        g[0] += 1.0 / lambda;
        g[1] += r / lambda;
        g[2] += alpha * dr / lambda;
        let s = horizon - t;
        let e = (-beta * s).exp();
        ll -= alpha / beta * (1.0 - e);
        g[1] -= (1.0 - e) / beta;
        g[2] -= alpha * (s * e / beta - (1.0 - e) / (beta * beta));
    }
    (ll, g)
}

fn mean_loglik(seqs: &[EventSequence], p: [f64; 3]) -> (f64, [f64; 3]) {
    let parts: Vec<_> = seqs.par_iter().map(|s| exp_loglik(s, p[0], p[1], p[2])).collect();
    let n = seqs.len() as f64;
    let mut ll = 0.0;
    let mut g = [0.0; 3];
    for (l, d) in parts {
        ll += l;
        for k in 0..3 {
            g[k] += d[k];
        }
    }
    (ll / n, g.map(|x| x / n))
}

fn project(p: [f64; 3]) -> [f64; 3] {
    let mu = p[0].max(FLOOR);
    let beta = p[2].max(FLOOR);
    let alpha = p[1].clamp(0.0, beta * (1.0 - 1e-6));
    [mu, alpha, beta]
}

/// Projected gradient ascent with a constant learning rate.
pub fn exp_mle_gd(seqs: &[EventSequence], init: (f64, f64, f64), lr: f64, steps: usize) -> Result<ExpFit> {
    exp_mle_gd_with(seqs, init, &ExpGdOptions { lr, steps, freeze: [false; 3] })
}

/// Projected gradient ascent on the mean per-sequence log-likelihood. A step
/// that lowers the objective is retried with half the learning rate, which
/// then stays halved; after 20 failed halvings the fit stops with
/// [`Error::DivergedStep`].
pub fn exp_mle_gd_with(seqs: &[EventSequence], init: (f64, f64, f64), opts: &ExpGdOptions) -> Result<ExpFit> {
    let (mu, alpha, beta) = init;
    if !(mu > 0.0) || !(alpha >= 0.0) || !(alpha < beta) {
        return Err(Error::InvalidParameter(format!("need mu > 0 and 0 <= alpha < beta, got ({mu}, {alpha}, {beta})")));
    }
    if seqs.is_empty() {
        return Err(Error::InsufficientSequences { needed: 1, have: 0 });
    }
    if !(opts.lr > 0.0) {
        return Err(Error::InvalidParameter(format!("learning rate must be positive, got {}", opts.lr)));
    }
    let mut p = [mu, alpha, beta];
    let (mut ll, mut grad) = mean_loglik(seqs, p);
    if !ll.is_finite() {
        return Err(Error::DivergedStep(format!("initial log-likelihood is {ll}")));
    }
    let mut lr = opts.lr;
    let mut trace = vec![ll];
    for step in 0..opts.steps {
        let mut halvings = 0;
        loop {
            let mut q = p;
            for k in 0..3 {
                if !opts.freeze[k] {
                    q[k] += lr * grad[k];
                }
            }
            let q = project(q);
            let (new_ll, new_grad) = mean_loglik(seqs, q);
            if new_ll.is_nan() {
                return Err(Error::DivergedStep(format!("log-likelihood is NaN at step {step}")));
            }
            if new_ll >= ll {
                (p, ll, grad) = (q, new_ll, new_grad);
                break;
            }
            halvings += 1;
            if halvings > MAX_HALVINGS {
                return Err(Error::DivergedStep(format!("no ascent after {MAX_HALVINGS} halvings at step {step}")));
            }
            lr *= 0.5;
        }
        trace.push(ll);
    }
    Ok(ExpFit { mu: p[0], alpha: p[1], beta: p[2], loglik_trace: trace, steps: opts.steps })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::TriggeringKernel;
    use crate::simulate::simulate_batch;

    fn seq(times: Vec<f64>) -> EventSequence {
        EventSequence::new("s", 2.0, times).unwrap()
    }

    #[test]
    fn ripley_direct_formula() {
        assert_eq!(ripley_k(&seq(vec![0.5, 0.6]), 0.2, 2.0).unwrap(), 0.5);
        let s = seq(vec![0.1, 0.5, 0.6, 1.9]);
        assert_eq!(ripley_k(&s, 5.0, 4.0).unwrap(), 3.0 / 4.0);
        assert_eq!(ripley_k(&s, 0.45, 1.0).unwrap(), 4.0 / 4.0);
        assert_eq!(ripley_k(&seq(vec![]), 0.2, 2.0), Err(Error::EmptySequence));
    }

    #[test]
    fn thinning_without_excitation_keeps_everything() {
        let m = HawkesModel::new(3.0, TriggeringKernel::exponential(0.0, 1.0).unwrap()).unwrap();
        let s = seq(vec![0.1, 0.5, 0.6, 1.9]);
        assert_eq!(residual_process(&s, &m, 4), s);
        let m = HawkesModel::new(3.0, TriggeringKernel::exponential(5.0, 1.0).unwrap()).unwrap();
        let r = residual_process(&s, &m, 4);
        assert!(r.times().iter().all(|t| s.times().contains(t)));
        assert_eq!(r, residual_process(&s, &m, 4));
    }

    #[test]
    fn loglik_gradient_matches_finite_differences() {
        let m = HawkesModel::new(5.0, TriggeringKernel::exponential(3.0, 6.0).unwrap()).unwrap();
        let seqs = simulate_batch(&m, 4.0, 3, 11, "e").unwrap();
        for s in &seqs {
            let p = [4.0, 2.0, 5.0];
            let (_, g) = exp_loglik(s, p[0], p[1], p[2]);
            for k in 0..3 {
                let h = 1e-6;
                let (mut a, mut b) = (p, p);
                a[k] += h;
                b[k] -= h;
                let fd = (exp_loglik(s, a[0], a[1], a[2]).0 - exp_loglik(s, b[0], b[1], b[2]).0) / (2.0 * h);
                assert!((fd - g[k]).abs() < 1e-5 * (1.0 + fd.abs()), "{k}: {fd} vs {}", g[k]);
            }
        }
    }

    #[test]
    fn loglik_matches_direct_sum() {
        let s = seq(vec![0.1, 0.5, 0.6, 1.9]);
        let (mu, a, b) = (1.5, 0.8, 2.0);
        let mut direct = -mu * 2.0;
        for (i, &t) in s.times().iter().enumerate() {
            let lam = mu + s.times()[..i].iter().map(|u| a * (-b * (t - u)).exp()).sum::<f64>();
            direct += lam.ln() - a / b * (1.0 - (-b * (2.0 - t)).exp());
        }
        assert!((exp_loglik(&s, mu, a, b).0 - direct).abs() < 1e-12);
    }

    #[test]
    fn rejects_infeasible_start() {
        let s = vec![seq(vec![0.5])];
        assert!(exp_mle_gd(&s, (1.0, 2.0, 1.0), 0.1, 1).is_err());
        assert!(exp_mle_gd(&s, (0.0, 0.0, 1.0), 0.1, 1).is_err());
    }
}
