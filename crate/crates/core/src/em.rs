//! Probability-weighted histogram EM for the shared-kernel and the
//! two-kernel piecewise-constant models.
//!
//! Within one event's row of the branching matrix, every ancestor whose lag
//! falls in bin `k` and whose process is `z` receives the same probability
//! `φ⁽ᶻ⁾_k / λ_i`. The iteration therefore runs on per-event bin counts and
//! per-event intensities only. [`BranchingMatrix`] gives the explicit
//! lower-triangular form for inspection and for [`complete_data_lower_bound`].

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::BinGrid;
use crate::likelihood::LagTable;
use crate::sequence::{Label, LabeledSequence};
use crate::theta::{ThetaFull, ThetaNull};

pub const DEFAULT_TOL: f64 = 1e-3;
pub const DEFAULT_MAX_ITER: usize = 500;

/// Non-fatal conditions met during a fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum EmWarning {
    /// `max_iter` E-steps ran without meeting the tolerance.
    NoConvergence,
    /// No triggered mass was attributed to this kernel; its density was set
    /// uniform on the support. `None` means the shared kernel.
    UniformDensity(Option<Label>),
    /// The process has no events, so its kernel cannot be estimated.
    DegenerateProcess(Label),
}

/// Two-kernel fit `(μ, α₁, g₁, α₂, g₂)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FullFit {
    pub grid: BinGrid,
    pub mu: f64,
    pub alpha: [f64; 2],
    pub g: [Vec<f64>; 2],
}

impl FullFit {
    /// Per-bin form `φ⁽ᶻ⁾ = α_z g_z`. Stationarity is not enforced.
    pub fn theta(&self) -> ThetaFull {
        let phi = |z: usize| self.g[z].iter().map(|g| self.alpha[z] * g).collect();
        ThetaFull { grid: self.grid.clone(), mu: self.mu, phi: [phi(0), phi(1)] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmReport<P> {
    pub theta: P,
    /// E-steps performed after the initial M-step.
    pub iterations: usize,
    /// Largest change of any branching probability in the last E-step.
    pub max_delta: f64,
    pub converged: bool,
    /// `ℓ̃` after each M-step, starting from the uniform branching matrix.
    pub lower_bound: Vec<f64>,
    pub warnings: Vec<EmWarning>,
}

/// Compensator used in the M-step and in `ℓ̃`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Compensator {
    /// `μT + Σ_z α_z N_z`: every event is charged its full kernel mass, as if
    /// the horizon never cut a kernel short. Gives the closed-form updates
    /// `μ = Σp_ii/T`, `α = 1 − Σp_ii/N`, `g_k ∝ triggered mass in bin k`.
    #[default]
    Untruncated,
    /// `μT + Σ_i Σ_k φ_k |B_k ∩ [0, T − t_i]|`. The M-step becomes
    /// `φ_k = (triggered mass in bin k) / Σ_i |B_k ∩ [0, T − t_i]|` and the
    /// fixed points are stationary points of the exact likelihood.
    Exact,
}

impl std::str::FromStr for Compensator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "untruncated" => Ok(Self::Untruncated),
            "exact" => Ok(Self::Exact),
            other => Err(Error::Config(format!("unknown compensator '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub compensator: Compensator,
}

impl Default for EmOptions {
    fn default() -> Self {
        Self { tol: DEFAULT_TOL, max_iter: DEFAULT_MAX_ITER, compensator: Compensator::Untruncated }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Mode {
    Null,
    Full,
}

/// Per-sequence bin counts by parent class and the current `λ_i` that
/// generates each branching row.
struct Prepared {
    classes: usize,
    counts: Vec<u32>,
    lambda: Vec<f64>,
}

/// Sufficient statistics of one pass over a sequence.
struct Partial {
    inv: f64,
    r: Vec<f64>,
    log: f64,
    delta: f64,
}

impl Prepared {
    fn new(table: &LagTable, mode: Mode) -> Self {
        let n0 = table.n_bins();
        let n = table.len();
        let counts = match mode {
            Mode::Full => (0..n).flat_map(|i| table.row(i).iter().copied()).collect(),
            Mode::Null => (0..n)
                .flat_map(|i| {
                    let row = table.row(i);
                    (0..n0).map(move |k| row[k] + row[n0 + k])
                })
                .collect(),
        };
        let classes = if mode == Mode::Full { 2 * n0 } else { n0 };
        Self { classes, counts, lambda: vec![0.0; n] }
    }

    /// Recomputes `λ_i = μ + Σ_c φ_c n_ic`, compares the implied branching
    /// rows with the previous ones and accumulates `Σ 1/λ_i`, `Σ n_ic/λ_i`
    /// and `Σ log λ_i`.
    fn pass(&mut self, mu: f64, phi: &[f64], prev: Option<(f64, &[f64])>) -> Partial {
        let c = self.classes;
        let mut out = Partial { inv: 0.0, r: vec![0.0; c], log: 0.0, delta: 0.0 };
        for (i, row) in self.counts.chunks_exact(c).enumerate() {
            let mut lam = mu;
            for (p, &n) in phi.iter().zip(row) {
                lam += p * n as f64;
            }
            if let Some((mu0, phi0)) = prev {
                let old = self.lambda[i];
                let mut d = (mu / lam - mu0 / old).abs();
                for k in 0..c {
                    if row[k] > 0 {
                        d = d.max((phi[k] / lam - phi0[k] / old).abs());
                    }
                }
                out.delta = out.delta.max(d);
            }
            let inv = 1.0 / lam;
            out.inv += inv;
            for (r, &n) in out.r.iter_mut().zip(row) {
                *r += n as f64 * inv;
            }
            out.log += lam.ln();
            self.lambda[i] = lam;
        }
        out
    }
}

/// Expected background count and per-class triggered counts under the
/// branching matrix generated by `(μ_p, φ_p)`, plus `Σ log λ_i`.
struct Stats {
    background: f64,
    triggered: Vec<f64>,
    log_lambda: f64,
    delta: f64,
}

fn run_pass(data: &mut [Prepared], mu: f64, phi: &[f64], prev: Option<(f64, &[f64])>) -> Stats {
    let parts: Vec<Partial> = data.par_iter_mut().map(|d| d.pass(mu, phi, prev)).collect();
    let mut inv = 0.0;
    let mut r = vec![0.0; phi.len()];
    let mut log = 0.0;
    let mut delta: f64 = 0.0;
    for p in &parts {
        inv += p.inv;
        for (a, b) in r.iter_mut().zip(&p.r) {
            *a += b;
        }
        log += p.log;
        delta = delta.max(p.delta);
    }
    Stats {
        background: mu * inv,
        triggered: phi.iter().zip(&r).map(|(p, r)| p * r).collect(),
        log_lambda: log,
        delta,
    }
}

struct Problem {
    mode: Mode,
    compensator: Compensator,
    grid: BinGrid,
    horizon: f64,
    n: [usize; 2],
    /// `Σ_i |B_k ∩ [0, T − t_i]|` per parent class.
    overlap: Vec<f64>,
    data: Vec<Prepared>,
}

impl Problem {
    fn new(seqs: &[LabeledSequence], grid: &BinGrid, opts: &EmOptions, mode: Mode) -> Result<Self> {
        if !(opts.tol > 0.0) {
            return Err(Error::InvalidParameter(format!("tolerance must be positive, got {}", opts.tol)));
        }
        let mut n = [0usize; 2];
        for s in seqs {
            let (a, b) = s.counts();
            n[0] += a;
            n[1] += b;
        }
        if n[0] + n[1] == 0 {
            return Err(Error::AllEmpty);
        }
        let horizon = seqs.iter().map(|s| s.horizon()).sum();
        let n0 = grid.n_bins();
        let mut overlap = vec![0.0; if mode == Mode::Full { 2 * n0 } else { n0 }];
        let mut data = Vec::with_capacity(seqs.len());
        for s in seqs {
            let table = LagTable::new(s, grid);
            for z in 0..2 {
                let offset = if mode == Mode::Full { z * n0 } else { 0 };
                for (o, c) in overlap[offset..offset + n0].iter_mut().zip(table.compensator(z)) {
                    *o += c;
                }
            }
            data.push(Prepared::new(&table, mode));
        }
        Ok(Self { mode, compensator: opts.compensator, grid: grid.clone(), horizon, n, overlap, data })
    }

    /// Maximizes `ℓ̃(·, P)` for the branching matrix `P` summarized by `stats`.
    /// Returns `(μ, φ per class, α per kernel)`.
    fn m_step(&self, stats: &Stats, warnings: &mut Vec<EmWarning>) -> (f64, Vec<f64>, Vec<f64>) {
        let mu = stats.background / self.horizon;
        let n0 = self.grid.n_bins();
        let widths = self.grid.widths();
        let uniform = 1.0 / self.grid.support();
        let density = |trig: &[f64]| -> Option<Vec<f64>> {
            let total: f64 = trig.iter().sum();
            (total > 0.0).then(|| trig.iter().zip(&widths).map(|(t, w)| t / (w * total)).collect())
        };
        let mut phi = Vec::with_capacity(stats.triggered.len());
        let mut alphas = Vec::new();
        if self.compensator == Compensator::Exact {
            let labels: &[Option<Label>] = match self.mode {
                Mode::Null => &[None],
                Mode::Full => &[Some(Label::One), Some(Label::Two)],
            };
            for (z, &label) in labels.iter().enumerate() {
                let range = z * n0..(z + 1) * n0;
                if label.is_some_and(|l| self.n[l.index()] == 0) {
                    push_once(warnings, EmWarning::DegenerateProcess(label.unwrap()));
                }
                let part: Vec<f64> = stats.triggered[range.clone()]
                    .iter()
                    .zip(&self.overlap[range])
                    .map(|(t, o)| if *t > 0.0 { t / o } else { 0.0 })
                    .collect();
                let alpha: f64 = part.iter().zip(&widths).map(|(p, w)| p * w).sum();
                if alpha == 0.0 && label.is_none_or(|l| self.n[l.index()] > 0) {
                    push_once(warnings, EmWarning::UniformDensity(label));
                }
                phi.extend(part);
                alphas.push(alpha);
            }
            return (mu, phi, alphas);
        }
        match self.mode {
            Mode::Null => {
                let total = (self.n[0] + self.n[1]) as f64;
                let alpha = (1.0 - stats.background / total).clamp(0.0, 1.0);
                let g = density(&stats.triggered).unwrap_or_else(|| {
                    push_once(warnings, EmWarning::UniformDensity(None));
                    vec![uniform; n0]
                });
                phi.extend(g.iter().map(|g| alpha * g));
                alphas.push(alpha);
            }
            Mode::Full => {
                for (z, label) in [Label::One, Label::Two].into_iter().enumerate() {
                    let trig = &stats.triggered[z * n0..(z + 1) * n0];
                    let (alpha, g) = if self.n[z] == 0 {
                        push_once(warnings, EmWarning::DegenerateProcess(label));
                        (0.0, vec![uniform; n0])
                    } else {
                        let alpha = trig.iter().sum::<f64>() / self.n[z] as f64;
                        let g = density(trig).unwrap_or_else(|| {
                            push_once(warnings, EmWarning::UniformDensity(Some(label)));
                            vec![uniform; n0]
                        });
                        (alpha, g)
                    };
                    phi.extend(g.iter().map(|g| alpha * g));
                    alphas.push(alpha);
                }
            }
        }
        (mu, phi, alphas)
    }

    /// `ℓ̃(θ, P)` with `θ = (μ, φ)` and `P` generated by `(μ_p, φ_p)`:
    /// `−μT − Σ_z α_z N_z + Σ_i [p_ii log(μ/p_ii) + Σ_j p_ij log(φ(lag)/p_ij)]`.
    fn lower_bound(&self, mu: f64, phi: &[f64], alphas: &[f64], mu_p: f64, phi_p: &[f64], stats: &Stats) -> f64 {
        let compensator = match (self.compensator, self.mode) {
            (Compensator::Exact, _) => phi.iter().zip(&self.overlap).map(|(p, o)| p * o).sum(),
            (_, Mode::Null) => alphas[0] * (self.n[0] + self.n[1]) as f64,
            (_, Mode::Full) => alphas[0] * self.n[0] as f64 + alphas[1] * self.n[1] as f64,
        };
        let mut lb = -mu * self.horizon - compensator + stats.log_lambda;
        lb += stats.background * (mu.ln() - mu_p.ln());
        for c in 0..phi.len() {
            if stats.triggered[c] > 0.0 {
                lb += stats.triggered[c] * (phi[c].ln() - phi_p[c].ln());
            }
        }
        lb
    }

    fn run(&mut self, opts: &EmOptions) -> (f64, Vec<f64>, Vec<f64>, EmReport<()>) {
        let classes = self.data.first().map_or(0, |d| d.classes);
        let mut warnings = Vec::new();
        // uniform rows over self and admissible ancestors are generated by μ = φ = 1
        let mut gen = (1.0, vec![1.0; classes]);
        let mut stats = run_pass(&mut self.data, gen.0, &gen.1, None);
        let (mut mu, mut phi, mut alphas) = self.m_step(&stats, &mut warnings);
        let mut trace = vec![self.lower_bound(mu, &phi, &alphas, gen.0, &gen.1, &stats)];
        let mut iterations = 0;
        let mut delta = f64::INFINITY;
        let mut converged = false;
        while iterations < opts.max_iter {
            iterations += 1;
            stats = run_pass(&mut self.data, mu, &phi, Some((gen.0, &gen.1)));
            delta = stats.delta;
            gen = (mu, phi.clone());
            (mu, phi, alphas) = self.m_step(&stats, &mut warnings);
            trace.push(self.lower_bound(mu, &phi, &alphas, gen.0, &gen.1, &stats));
            if delta < opts.tol {
                converged = true;
                break;
            }
        }
        if !converged {
            warnings.push(EmWarning::NoConvergence);
        }
        let report = EmReport { theta: (), iterations, max_delta: delta, converged, lower_bound: trace, warnings };
        (mu, phi, alphas, report)
    }
}

fn push_once(warnings: &mut Vec<EmWarning>, w: EmWarning) {
    if !warnings.contains(&w) {
        warnings.push(w);
    }
}

fn with_theta<P>(r: EmReport<()>, theta: P) -> EmReport<P> {
    EmReport {
        theta,
        iterations: r.iterations,
        max_delta: r.max_delta,
        converged: r.converged,
        lower_bound: r.lower_bound,
        warnings: r.warnings,
    }
}

/// Shared-kernel EM over all sequences jointly with the untruncated
/// compensator; labels are ignored.
///
/// `max_iter` counts E-steps after the initial M-step on the uniform
/// branching matrix, so `max_iter = 0` returns that first M-step.
pub fn em_fit_null(seqs: &[LabeledSequence], grid: &BinGrid, tol: f64, max_iter: usize) -> Result<EmReport<ThetaNull>> {
    em_fit_null_with(seqs, grid, &EmOptions { tol, max_iter, ..Default::default() })
}

pub fn em_fit_null_with(seqs: &[LabeledSequence], grid: &BinGrid, opts: &EmOptions) -> Result<EmReport<ThetaNull>> {
    let mut problem = Problem::new(seqs, grid, opts, Mode::Null)?;
    let (mu, phi, alphas, report) = problem.run(opts);
    let alpha = alphas[0];
    if alpha >= 1.0 {
        return Err(Error::UnstableKernel(alpha));
    }
    let g = if alpha > 0.0 {
        phi.iter().map(|p| p / alpha).collect()
    } else {
        vec![1.0 / grid.support(); grid.n_bins()]
    };
    let g = renormalize(grid, g);
    Ok(with_theta(report, ThetaNull::new(grid.clone(), mu, alpha, g)?))
}

/// Two-kernel EM with a single combined background rate and the untruncated
/// compensator.
pub fn em_fit_full(seqs: &[LabeledSequence], grid: &BinGrid, tol: f64, max_iter: usize) -> Result<EmReport<FullFit>> {
    em_fit_full_with(seqs, grid, &EmOptions { tol, max_iter, ..Default::default() })
}

pub fn em_fit_full_with(seqs: &[LabeledSequence], grid: &BinGrid, opts: &EmOptions) -> Result<EmReport<FullFit>> {
    let mut problem = Problem::new(seqs, grid, opts, Mode::Full)?;
    let (mu, phi, alphas, report) = problem.run(opts);
    let n0 = grid.n_bins();
    let g = |z: usize| {
        let a: f64 = alphas[z];
        let g = if a > 0.0 {
            phi[z * n0..(z + 1) * n0].iter().map(|p| p / a).collect()
        } else {
            vec![1.0 / grid.support(); n0]
        };
        renormalize(grid, g)
    };
    let fit = FullFit { grid: grid.clone(), mu, alpha: [alphas[0], alphas[1]], g: [g(0), g(1)] };
    Ok(with_theta(report, fit))
}

/// Removes the round-off left by dividing `φ` back by `α`.
fn renormalize(grid: &BinGrid, g: Vec<f64>) -> Vec<f64> {
    let mass: f64 = g.iter().zip(grid.widths()).map(|(g, w)| g * w).sum();
    g.into_iter().map(|x| x / mass).collect()
}

/// Explicit lower-triangular branching matrix of one sequence.
/// Row `i` holds `p_ij` for `j < i` followed by `p_ii`.
#[derive(Debug, Clone, PartialEq)]
pub struct BranchingMatrix {
    rows: Vec<Vec<f64>>,
}

impl BranchingMatrix {
    /// Uniform rows over each event itself and its admissible ancestors.
    pub fn uniform(seq: &LabeledSequence, grid: &BinGrid) -> Self {
        let times = seq.times();
        let rows = (0..times.len())
            .map(|i| {
                let admissible: Vec<bool> = (0..i).map(|j| grid.bin_of(times[i] - times[j]).is_some()).collect();
                let p = 1.0 / (1 + admissible.iter().filter(|&&a| a).count()) as f64;
                admissible.into_iter().map(|a| if a { p } else { 0.0 }).chain([p]).collect()
            })
            .collect();
        Self { rows }
    }

    /// Posterior rows `p_ii = μ/λ_i`, `p_ij = φ^{(z_j)}(t_i − t_j)/λ_i`.
    pub fn posterior(theta: &ThetaFull, seq: &LabeledSequence) -> Self {
        let times = seq.times();
        let labels = seq.labels();
        let rows = (0..times.len())
            .map(|i| {
                let mut row: Vec<f64> = (0..i)
                    .map(|j| match theta.grid.bin_of(times[i] - times[j]) {
                        Some(k) => theta.phi[labels[j].index()][k],
                        None => 0.0,
                    })
                    .collect();
                row.push(theta.mu);
                let lam: f64 = row.iter().sum();
                row.iter_mut().for_each(|p| *p /= lam);
                row
            })
            .collect();
        Self { rows }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// `p_ij` for `j ≤ i`, zero above the diagonal.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        if j > i {
            0.0
        } else {
            self.rows[i][j]
        }
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.rows[i]
    }

    /// Largest deviation of a row sum from one.
    pub fn max_row_defect(&self) -> f64 {
        self.rows.iter().map(|r| (r.iter().sum::<f64>() - 1.0).abs()).fold(0.0, f64::max)
    }

    /// Block `P_(z)(z′)`: rows are events of process `z`, columns events of
    /// process `z′`, both in time order. Diagonal background terms are not
    /// included.
    pub fn block(&self, seq: &LabeledSequence, z: Label, z_parent: Label) -> DMatrix<f64> {
        let idx = |l: Label| -> Vec<usize> { (0..seq.len()).filter(|&i| seq.labels()[i] == l).collect() };
        let (rows, cols) = (idx(z), idx(z_parent));
        DMatrix::from_fn(rows.len(), cols.len(), |a, b| {
            let (i, j) = (rows[a], cols[b]);
            if j < i {
                self.rows[i][j]
            } else {
                0.0
            }
        })
    }
}

/// Jensen lower bound `ℓ̃(θ, P)` of the log-likelihood with the untruncated
/// compensator `μT + Σ_z α_z N_z`.
/// A shared-kernel parameter is passed through [`ThetaNull::embed`].
/// Terms with `p_ij = 0` contribute nothing.
pub fn complete_data_lower_bound(theta: &ThetaFull, branching: &[BranchingMatrix], seqs: &[LabeledSequence]) -> f64 {
    complete_data_lower_bound_with(theta, branching, seqs, Compensator::Untruncated)
}

pub fn complete_data_lower_bound_with(
    theta: &ThetaFull,
    branching: &[BranchingMatrix],
    seqs: &[LabeledSequence],
    compensator: Compensator,
) -> f64 {
    let mut lb = 0.0;
    for (p, seq) in branching.iter().zip(seqs) {
        let (n1, n2) = seq.counts();
        lb -= theta.mu * seq.horizon();
        match compensator {
            Compensator::Untruncated => {
                lb -= theta.magnitude(0) * n1 as f64 + theta.magnitude(1) * n2 as f64;
            }
            Compensator::Exact => {
                for (t, l) in seq.events() {
                    let rest = seq.horizon() - t;
                    let phi = &theta.phi[l.index()];
                    lb -= (0..phi.len()).map(|k| phi[k] * theta.grid.overlap(k, rest)).sum::<f64>();
                }
            }
        }
        let times = seq.times();
        let labels = seq.labels();
        for i in 0..times.len() {
            let row = p.row(i);
            for (j, &pij) in row.iter().enumerate() {
                if pij <= 0.0 {
                    continue;
                }
                let rate = if j == i {
                    theta.mu
                } else {
                    match theta.grid.bin_of(times[i] - times[j]) {
                        Some(k) => theta.phi[labels[j].index()][k],
                        None => 0.0,
                    }
                };
                lb += pij * (rate.ln() - pij.ln());
            }
        }
    }
    lb
}

/// `Σ_i log λ(t_i) − μT − Σ_z α_z N_z`: the log-likelihood with the
/// compensator approximated as if every event's kernel fit before the horizon.
pub fn approximate_loglik(theta: &ThetaFull, seqs: &[LabeledSequence]) -> Result<f64> {
    let mut ll = 0.0;
    for seq in seqs {
        let table = LagTable::new(seq, &theta.grid);
        let (n1, n2) = seq.counts();
        ll -= theta.mu * seq.horizon() + theta.magnitude(0) * n1 as f64 + theta.magnitude(1) * n2 as f64;
        for i in 0..table.len() {
            let d = table.delta(theta, i);
            if !(d > 0.0) {
                return Err(Error::NonFiniteLogArgument(i));
            }
            ll += d.ln();
        }
    }
    Ok(ll)
}
