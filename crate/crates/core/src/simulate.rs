//! Ogata thinning for univariate Hawkes processes.

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kernel::{HawkesModel, TriggeringKernel};
use crate::rng::{self, Domain};
use crate::sequence::EventSequence;

/// Simulates one sequence on `(0, horizon]` from stream 0 of `seed`.
pub fn simulate_hawkes(model: &HawkesModel, horizon: f64, seed: u64) -> Result<EventSequence> {
    let mut rng = rng::stream(seed, Domain::Simulation, 0);
    simulate_with(model, horizon, "seq-0", &mut rng)
}

/// Simulates `count` independent sequences; sequence `i` draws from stream
/// `i` of `seed` and is named `{prefix}{i}`.
pub fn simulate_batch(
    model: &HawkesModel,
    horizon: f64,
    count: usize,
    seed: u64,
    prefix: &str,
) -> Result<Vec<EventSequence>> {
    check(model, horizon)?;
    (0..count)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng::stream(seed, Domain::Simulation, i as u64);
            simulate_with(model, horizon, &format!("{prefix}{i}"), &mut rng)
        })
        .collect()
}

fn check(model: &HawkesModel, horizon: f64) -> Result<()> {
    if !(horizon > 0.0) || !horizon.is_finite() {
        return Err(Error::NonPositiveHorizon(horizon));
    }
    let n = model.kernel.branching_ratio();
    if n >= 1.0 {
        return Err(Error::UnstableKernel(n));
    }
    Ok(())
}

/// Thinning with a bound that is refreshed after every event and every
/// rejected candidate.
///
/// Exponential and power kernels decrease in the lag, so the intensity just
/// after the current time bounds it until the next event. For piecewise
/// kernels each event inside the support window contributes at most
/// `α max_k g_k`.
pub fn simulate_with<R: Rng + ?Sized>(
    model: &HawkesModel,
    horizon: f64,
    id: &str,
    rng: &mut R,
) -> Result<EventSequence> {
    check(model, horizon)?;
    let mu = model.mu;
    let mut times: Vec<f64> = Vec::new();
    let mut t = 0.0;

    match &model.kernel {
        TriggeringKernel::Exponential { alpha, beta } => {
            // excitation carried just after time t
            let mut excitation = 0.0;
            loop {
                let bound = mu + excitation;
                let w = exp_draw(rng, bound);
                let candidate = t + w;
                if candidate > horizon {
                    break;
                }
                excitation *= (-beta * w).exp();
                t = candidate;
                if rng.random::<f64>() * bound <= mu + excitation {
                    times.push(t);
                    excitation += alpha;
                }
            }
        }
        kernel => {
            let sup = kernel.sup();
            let window = kernel.support();
            loop {
                let bound = match window {
                    Some(t0) => {
                        let live = times.len() - times.partition_point(|&s| t - s >= t0);
                        mu + sup * live as f64
                    }
                    None => model.intensity(&times, t) + if times.last() == Some(&t) { kernel.sup() } else { 0.0 },
                };
                let candidate = t + exp_draw(rng, bound);
                if candidate > horizon {
                    break;
                }
                t = candidate;
                let lambda = model.intensity(&times, t);
                debug_assert!(lambda <= bound * (1.0 + 1e-12));
                if rng.random::<f64>() * bound <= lambda {
                    times.push(t);
                }
            }
        }
    }
    EventSequence::new(id, horizon, times)
}

fn exp_draw<R: Rng + ?Sized>(rng: &mut R, rate: f64) -> f64 {
    // 1 - U lies in (0, 1]
    -(1.0 - rng.random::<f64>()).ln() / rate
}
