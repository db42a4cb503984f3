//! Exact quasi-log-likelihood of a mixed sequence under the piecewise-constant
//! model, and the per-event lag statistics shared with EM and the score test.

use crate::error::{Error, Result};
use crate::kernel::BinGrid;
use crate::sequence::{Label, LabeledSequence};
use crate::theta::{ThetaFull, ThetaNull};

/// Per-sequence lag statistics for a fixed grid.
///
/// For event `i`, `count(i, z, k)` is the number of earlier events of process
/// `z` whose lag to `i` falls in bin `k` (zero lags excluded). `compensator(z, k)`
/// is `Σ_{i in z} |B_k ∩ [0, T - t_i]|`, the coefficient of `φ⁽ᶻ⁾_k` in the
/// compensator.
#[derive(Debug, Clone)]
pub struct LagTable {
    n0: usize,
    horizon: f64,
    labels: Vec<Label>,
    counts: Vec<u32>,
    compensator: [Vec<f64>; 2],
}

impl LagTable {
    pub fn new(seq: &LabeledSequence, grid: &BinGrid) -> Self {
        let n0 = grid.n_bins();
        let t0 = grid.support();
        let times = seq.times();
        let labels = seq.labels();
        let n = times.len();
        let mut counts = vec![0u32; n * 2 * n0];
        for i in 0..n {
            let row = &mut counts[i * 2 * n0..(i + 1) * 2 * n0];
            for j in (0..i).rev() {
                let lag = times[i] - times[j];
                if lag > t0 {
                    break;
                }
                if let Some(k) = grid.bin_of(lag) {
                    row[labels[j].index() * n0 + k] += 1;
                }
            }
        }
        let mut compensator = [vec![0.0; n0], vec![0.0; n0]];
        for (&t, &l) in times.iter().zip(labels) {
            let rest = seq.horizon() - t;
            for (k, c) in compensator[l.index()].iter_mut().enumerate() {
                *c += grid.overlap(k, rest);
            }
        }
        Self { n0, horizon: seq.horizon(), labels: labels.to_vec(), counts, compensator }
    }

    pub fn n_bins(&self) -> usize {
        self.n0
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    /// Counts of event `i`, laid out `[process 1 bins.., process 2 bins..]`.
    #[inline]
    pub fn row(&self, i: usize) -> &[u32] {
        &self.counts[i * 2 * self.n0..(i + 1) * 2 * self.n0]
    }

    #[inline]
    pub fn count(&self, i: usize, parent: Label, k: usize) -> u32 {
        self.row(i)[parent.index() * self.n0 + k]
    }

    pub fn compensator(&self, z: usize) -> &[f64] {
        &self.compensator[z]
    }

    /// `Δ_i = μ + Σ_z Σ_k φ⁽ᶻ⁾_k count(i, z, k)`.
    #[inline]
    pub fn delta(&self, theta: &ThetaFull, i: usize) -> f64 {
        let row = self.row(i);
        let (c1, c2) = row.split_at(self.n0);
        let mut s = theta.mu;
        for k in 0..self.n0 {
            s += theta.phi[0][k] * c1[k] as f64 + theta.phi[1][k] * c2[k] as f64;
        }
        s
    }
}

/// Intensity building blocks at one event of a mixed sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct TriggerTerms {
    pub label: Label,
    /// `Δ = μ + G(i,z;z) + G(i,z;z')`, the intensity at the event.
    pub delta: f64,
    /// Excitation received from earlier events of the same process.
    pub from_same: f64,
    /// Excitation received from the other process.
    pub from_other: f64,
    /// Bin counts of lags to earlier events of the same process.
    pub counts_same: Vec<u32>,
    /// Bin counts of lags to earlier events of the other process.
    pub counts_other: Vec<u32>,
}

/// Per-event `Δ`, `G` and `G'` quantities.
pub fn trigger_sums(theta: &ThetaFull, seq: &LabeledSequence) -> Vec<TriggerTerms> {
    let table = LagTable::new(seq, &theta.grid);
    let n0 = table.n_bins();
    (0..table.len())
        .map(|i| {
            let label = table.labels()[i];
            let same = label.index();
            let other = label.other().index();
            let row = table.row(i);
            let counts_same = row[same * n0..(same + 1) * n0].to_vec();
            let counts_other = row[other * n0..(other + 1) * n0].to_vec();
            let excite = |z: usize, c: &[u32]| -> f64 {
                theta.phi[z].iter().zip(c).map(|(p, &c)| p * c as f64).sum()
            };
            let from_same = excite(same, &counts_same);
            let from_other = excite(other, &counts_other);
            TriggerTerms {
                label,
                delta: table.delta(theta, i),
                from_same,
                from_other,
                counts_same,
                counts_other,
            }
        })
        .collect()
}

/// Full-model log-likelihood on a precomputed lag table.
pub fn loglik_table(theta: &ThetaFull, table: &LagTable) -> Result<f64> {
    let mut ll = -theta.mu * table.horizon();
    for i in 0..table.len() {
        let d = table.delta(theta, i);
        if !(d > 0.0) || !d.is_finite() {
            return Err(Error::NonFiniteLogArgument(i));
        }
        ll += d.ln();
    }
    for z in 0..2 {
        ll -= theta.phi[z].iter().zip(table.compensator(z)).map(|(p, c)| p * c).sum::<f64>();
    }
    Ok(ll)
}

/// Full-model log-likelihood `ℓ₁(μ, φ⁽¹⁾, φ⁽²⁾)` with exact compensator.
pub fn loglik_full(theta: &ThetaFull, seq: &LabeledSequence) -> Result<f64> {
    loglik_table(theta, &LagTable::new(seq, &theta.grid))
}

/// Shared-kernel log-likelihood `ℓ₀(μ, α g)`. Labels are ignored.
///
/// Evaluated directly from the kernel rather than through
/// [`ThetaNull::embed`], so it serves as an independent check of
/// [`loglik_full`].
pub fn loglik_null(theta: &ThetaNull, seq: &LabeledSequence) -> Result<f64> {
    let kernel = theta.kernel();
    let times = seq.times();
    let t0 = theta.grid.support();
    let mut ll = -theta.mu * seq.horizon();
    for (i, &t) in times.iter().enumerate() {
        let lo = times[..i].partition_point(|&s| t - s > t0);
        let lambda = theta.mu + times[lo..i].iter().map(|&s| kernel.eval(t - s)).sum::<f64>();
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(Error::NonFiniteLogArgument(i));
        }
        ll += lambda.ln() - kernel.integral(seq.horizon() - t);
    }
    Ok(ll)
}

/// Full-model intensity `λ(t)` of a mixed sequence given its strict history.
pub fn intensity_full(theta: &ThetaFull, seq: &LabeledSequence, t: f64) -> f64 {
    let mut lambda = theta.mu;
    for (s, label) in seq.events() {
        if s >= t {
            break;
        }
        if let Some(k) = theta.grid.bin_of(t - s) {
            lambda += theta.phi[label.index()][k];
        }
    }
    lambda
}
