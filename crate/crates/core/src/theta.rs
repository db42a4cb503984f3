//! Parameters of the mixed piecewise-constant model.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{BinGrid, TriggeringKernel};

/// Full-model parameter `(μ, φ⁽¹⁾, φ⁽²⁾)` with per-bin triggering values.
/// As a flat vector it is laid out `[μ, φ⁽¹⁾_1..n0, φ⁽²⁾_1..n0]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThetaFull {
    pub grid: BinGrid,
    pub mu: f64,
    pub phi: [Vec<f64>; 2],
}

impl ThetaFull {
    /// Requires `μ > 0`, `φ ≥ 0` and `Σ_k φ_k Δt_k < 1` for both processes.
    pub fn new(grid: BinGrid, mu: f64, phi1: Vec<f64>, phi2: Vec<f64>) -> Result<Self> {
        let theta = Self::unchecked_stationarity(grid, mu, phi1, phi2)?;
        for z in 0..2 {
            let m = theta.magnitude(z);
            if m >= 1.0 {
                return Err(Error::UnstableKernel(m));
            }
        }
        Ok(theta)
    }

    /// Like [`ThetaFull::new`] but without the stationarity bound; full-model
    /// EM fits can put more than unit mass on a sparse process.
    pub fn unchecked_stationarity(grid: BinGrid, mu: f64, phi1: Vec<f64>, phi2: Vec<f64>) -> Result<Self> {
        let n0 = grid.n_bins();
        for phi in [&phi1, &phi2] {
            if phi.len() != n0 {
                return Err(Error::DimensionMismatch { expected: n0, got: phi.len() });
            }
            if phi.iter().any(|p| !p.is_finite() || *p < 0.0) {
                return Err(Error::InvalidParameter("triggering values must be finite and non-negative".into()));
            }
        }
        if !(mu > 0.0) || !mu.is_finite() {
            return Err(Error::InvalidParameter(format!("background rate must be positive, got {mu}")));
        }
        Ok(Self { grid, mu, phi: [phi1, phi2] })
    }

    pub fn n_bins(&self) -> usize {
        self.grid.n_bins()
    }

    /// `d = 1 + 2 n0`.
    pub fn dim(&self) -> usize {
        1 + 2 * self.n_bins()
    }

    /// `Σ_k φ⁽ᶻ⁾_k Δt_k` for `z` in `{0, 1}`.
    pub fn magnitude(&self, z: usize) -> f64 {
        self.phi[z].iter().zip(self.grid.widths()).map(|(p, d)| p * d).sum()
    }

    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.dim());
        v.push(self.mu);
        v.extend_from_slice(&self.phi[0]);
        v.extend_from_slice(&self.phi[1]);
        v
    }

    /// Inverse of [`ThetaFull::to_vec`]; validates like `unchecked_stationarity`.
    pub fn from_vec(grid: BinGrid, v: &[f64]) -> Result<Self> {
        let n0 = grid.n_bins();
        if v.len() != 1 + 2 * n0 {
            return Err(Error::DimensionMismatch { expected: 1 + 2 * n0, got: v.len() });
        }
        Self::unchecked_stationarity(grid, v[0], v[1..=n0].to_vec(), v[n0 + 1..].to_vec())
    }

    /// `h(θ) = φ⁽¹⁾ − φ⁽²⁾`.
    pub fn constraint(&self) -> Vec<f64> {
        self.phi[0].iter().zip(&self.phi[1]).map(|(a, b)| a - b).collect()
    }
}

/// Null-model parameter `(μ, α, g)` with a shared kernel `φ = α g`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThetaNull {
    pub grid: BinGrid,
    pub mu: f64,
    pub alpha: f64,
    pub g: Vec<f64>,
}

impl ThetaNull {
    /// Requires `μ > 0`, `α ∈ [0, 1)`, `g ≥ 0` and `Σ g_k Δt_k = 1` within 1e-9.
    pub fn new(grid: BinGrid, mu: f64, alpha: f64, g: Vec<f64>) -> Result<Self> {
        if g.len() != grid.n_bins() {
            return Err(Error::DimensionMismatch { expected: grid.n_bins(), got: g.len() });
        }
        if !(mu > 0.0) || !mu.is_finite() {
            return Err(Error::InvalidParameter(format!("background rate must be positive, got {mu}")));
        }
        if !(0.0..1.0).contains(&alpha) {
            return Err(Error::InvalidParameter(format!("magnitude must lie in [0, 1), got {alpha}")));
        }
        if g.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return Err(Error::InvalidParameter("density values must be finite and non-negative".into()));
        }
        let mass: f64 = g.iter().zip(grid.widths()).map(|(a, b)| a * b).sum();
        if (mass - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParameter(format!("density integrates to {mass}, not 1")));
        }
        Ok(Self { grid, mu, alpha, g })
    }

    pub fn phi(&self) -> Vec<f64> {
        self.g.iter().map(|g| self.alpha * g).collect()
    }

    /// `φ⁽¹⁾ = φ⁽²⁾ = α g`.
    pub fn embed(&self) -> ThetaFull {
        let phi = self.phi();
        ThetaFull { grid: self.grid.clone(), mu: self.mu, phi: [phi.clone(), phi] }
    }

    pub fn kernel(&self) -> TriggeringKernel {
        TriggeringKernel::Piecewise { grid: self.grid.clone(), g: self.g.clone(), alpha: self.alpha }
    }
}
