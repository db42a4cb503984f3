//! Lag discretization and triggering kernels.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Bin endpoints `0 = e_0 < e_1 < ... < e_n = T0`; bin `k` is `(e_k, e_{k+1}]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinGrid {
    endpoints: Vec<f64>,
}

impl BinGrid {
    pub fn new(endpoints: Vec<f64>) -> Result<Self> {
        if endpoints.len() < 2 {
            return Err(Error::InvalidGrid("need at least two endpoints".into()));
        }
        if endpoints[0] != 0.0 {
            return Err(Error::InvalidGrid(format!("first endpoint must be 0, got {}", endpoints[0])));
        }
        if endpoints.iter().any(|e| !e.is_finite()) {
            return Err(Error::InvalidGrid("non-finite endpoint".into()));
        }
        if let Some(w) = endpoints.windows(2).find(|w| w[1] <= w[0]) {
            return Err(Error::InvalidGrid(format!("endpoints not increasing at {} -> {}", w[0], w[1])));
        }
        Ok(Self { endpoints })
    }

    /// Named grids used in the reference experiments.
    pub fn preset(name: &str) -> Option<Self> {
        let e: &[f64] = match name {
            "paper2" => &[0.0, 0.6, 2.0],
            "paper3" => &[0.0, 0.2, 0.6, 2.0],
            "paper4" => &[0.0, 0.1, 0.2, 0.6, 2.0],
            "paper7" => &[0.0, 0.08, 0.16, 0.2, 0.32, 0.45, 0.65, 2.0],
            "paper12" => &[0.0, 0.04, 0.08, 0.12, 0.16, 0.2, 0.24, 0.28, 0.32, 0.36, 0.4, 0.7, 2.0],
            "paper14" => &[
                0.0, 0.04, 0.08, 0.12, 0.16, 0.2, 0.26, 0.32, 0.38, 0.45, 0.55, 0.65, 0.75, 1.0, 2.0,
            ],
            "paper28" => &[
                0.0, 0.02, 0.04, 0.06, 0.08, 0.1, 0.12, 0.14, 0.16, 0.18, 0.2, 0.23, 0.26, 0.29, 0.32,
                0.35, 0.38, 0.41, 0.45, 0.5, 0.55, 0.6, 0.65, 0.7, 0.75, 0.8, 1.0, 1.5, 2.0,
            ],
            _ => return None,
        };
        Some(Self { endpoints: e.to_vec() })
    }

    pub const PRESETS: [&'static str; 7] =
        ["paper2", "paper3", "paper4", "paper7", "paper12", "paper14", "paper28"];

    pub fn endpoints(&self) -> &[f64] {
        &self.endpoints
    }

    pub fn n_bins(&self) -> usize {
        self.endpoints.len() - 1
    }

    /// Kernel support `T0`.
    pub fn support(&self) -> f64 {
        *self.endpoints.last().unwrap()
    }

    pub fn width(&self, k: usize) -> f64 {
        self.endpoints[k + 1] - self.endpoints[k]
    }

    pub fn widths(&self) -> Vec<f64> {
        self.endpoints.windows(2).map(|w| w[1] - w[0]).collect()
    }

    /// Bin containing `lag`, or `None` when `lag <= 0` or `lag > T0`.
    #[inline]
    pub fn bin_of(&self, lag: f64) -> Option<usize> {
        if !(lag > 0.0) || lag > self.support() {
            return None;
        }
        let idx = self.endpoints.partition_point(|&e| e < lag);
        Some(idx - 1)
    }

    /// `|B_k ∩ [0, s]|`.
    #[inline]
    pub fn overlap(&self, k: usize, s: f64) -> f64 {
        (s - self.endpoints[k]).clamp(0.0, self.width(k))
    }
}

/// Triggering function `φ(t)`; zero for `t <= 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TriggeringKernel {
    /// `φ(t) = α g_k` on bin `k`, zero beyond `T0`; `Σ g_k Δt_k = 1`.
    Piecewise { grid: BinGrid, g: Vec<f64>, alpha: f64 },
    /// `φ(t) = α e^{-βt}`.
    Exponential { alpha: f64, beta: f64 },
    /// `φ(t) = α (p-1) c^{p-1} (t+c)^{-p}`.
    Power { alpha: f64, c: f64, p: f64 },
}

impl TriggeringKernel {
    /// Piecewise kernel with magnitude `alpha` and shape proportional to
    /// `weights`. The shape is rescaled so that it integrates to one.
    pub fn piecewise(grid: BinGrid, weights: Vec<f64>, alpha: f64) -> Result<Self> {
        if weights.len() != grid.n_bins() {
            return Err(Error::DimensionMismatch { expected: grid.n_bins(), got: weights.len() });
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidKernel("bin weights must be finite and non-negative".into()));
        }
        if !(0.0..1.0).contains(&alpha) {
            return Err(Error::InvalidKernel(format!("magnitude must lie in [0, 1), got {alpha}")));
        }
        let mass: f64 = weights.iter().zip(grid.widths()).map(|(w, d)| w * d).sum();
        if !(mass > 0.0) {
            return Err(Error::InvalidKernel("bin weights have zero mass".into()));
        }
        let g = weights.iter().map(|w| w / mass).collect();
        Ok(Self::Piecewise { grid, g, alpha })
    }

    /// Piecewise kernel from per-bin values `φ_k = α g_k`. A zero vector
    /// gives `α = 0` with a uniform shape.
    pub fn piecewise_from_phi(grid: BinGrid, phi: &[f64]) -> Result<Self> {
        let alpha: f64 = phi.iter().zip(grid.widths()).map(|(p, d)| p * d).sum();
        if alpha == 0.0 {
            let n = grid.n_bins();
            return Self::piecewise(grid, vec![1.0; n], 0.0);
        }
        Self::piecewise(grid, phi.to_vec(), alpha)
    }

    pub fn exponential(alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha >= 0.0) || !alpha.is_finite() || !(beta > 0.0) || !beta.is_finite() {
            return Err(Error::InvalidKernel(format!("exponential kernel needs alpha >= 0, beta > 0 (got {alpha}, {beta})")));
        }
        Ok(Self::Exponential { alpha, beta })
    }

    pub fn power(alpha: f64, c: f64, p: f64) -> Result<Self> {
        if !(alpha >= 0.0) || !(c > 0.0) || !(p > 1.0) || !(alpha + c + p).is_finite() {
            return Err(Error::InvalidKernel(format!("power kernel needs alpha >= 0, c > 0, p > 1 (got {alpha}, {c}, {p})")));
        }
        Ok(Self::Power { alpha, c, p })
    }

    /// Expected number of direct offspring per event.
    pub fn branching_ratio(&self) -> f64 {
        match self {
            Self::Piecewise { alpha, .. } => *alpha,
            Self::Exponential { alpha, beta } => alpha / beta,
            Self::Power { alpha, .. } => *alpha,
        }
    }

    #[inline]
    pub fn eval(&self, lag: f64) -> f64 {
        if !(lag > 0.0) {
            return 0.0;
        }
        match self {
            Self::Piecewise { grid, g, alpha } => grid.bin_of(lag).map_or(0.0, |k| alpha * g[k]),
            Self::Exponential { alpha, beta } => alpha * (-beta * lag).exp(),
            Self::Power { alpha, c, p } => alpha * (p - 1.0) * c.powf(p - 1.0) * (lag + c).powf(-p),
        }
    }

    /// `∫_0^s φ(u) du`.
    pub fn integral(&self, s: f64) -> f64 {
        if !(s > 0.0) {
            return 0.0;
        }
        match self {
            Self::Piecewise { grid, g, alpha } => {
                alpha * (0..grid.n_bins()).map(|k| g[k] * grid.overlap(k, s)).sum::<f64>()
            }
            Self::Exponential { alpha, beta } => alpha / beta * (1.0 - (-beta * s).exp()),
            Self::Power { alpha, c, p } => alpha * (1.0 - (c / (s + c)).powf(p - 1.0)),
        }
    }

    /// Upper bound on `φ` over all positive lags.
    pub(crate) fn sup(&self) -> f64 {
        match self {
            Self::Piecewise { g, alpha, .. } => alpha * g.iter().cloned().fold(0.0, f64::max),
            Self::Exponential { alpha, .. } => *alpha,
            Self::Power { alpha, c, p } => alpha * (p - 1.0) / c,
        }
    }

    /// Lag beyond which `φ` is identically zero, if any.
    pub(crate) fn support(&self) -> Option<f64> {
        match self {
            Self::Piecewise { grid, .. } => Some(grid.support()),
            _ => None,
        }
    }
}

/// Background rate plus triggering kernel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HawkesModel {
    pub mu: f64,
    pub kernel: TriggeringKernel,
}

impl HawkesModel {
    pub fn new(mu: f64, kernel: TriggeringKernel) -> Result<Self> {
        if !(mu > 0.0) || !mu.is_finite() {
            return Err(Error::InvalidParameter(format!("background rate must be positive, got {mu}")));
        }
        Ok(Self { mu, kernel })
    }

    /// `λ(t | history)` with strict history `t_j < t`.
    pub fn intensity(&self, history: &[f64], t: f64) -> f64 {
        let end = history.partition_point(|&s| s < t);
        let start = match self.kernel.support() {
            Some(t0) => history[..end].partition_point(|&s| t - s > t0),
            None => 0,
        };
        self.mu + history[start..end].iter().map(|&s| self.kernel.eval(t - s)).sum::<f64>()
    }

    /// Long-run event rate `μ / (1 - n)`.
    pub fn stationary_rate(&self) -> f64 {
        self.mu / (1.0 - self.kernel.branching_ratio())
    }
}
