#![allow(dead_code)]

use hawkes_gof::{simulate_batch, BinGrid, EventSequence, HawkesModel, TriggeringKernel};

pub const HORIZON: f64 = 10.0;

pub fn grid(name: &str) -> BinGrid {
    BinGrid::preset(name).unwrap()
}

/// `μ = 20`, `φ(t) = α e^{−10 t}`.
pub fn exp_model(alpha: f64) -> HawkesModel {
    HawkesModel::new(20.0, TriggeringKernel::exponential(alpha, 10.0).unwrap()).unwrap()
}

/// `μ = 20`, `φ(t) = α (p − 1) 2^{p−1} (t + 2)^{−p}`.
pub fn power_model(p: f64) -> HawkesModel {
    HawkesModel::new(20.0, TriggeringKernel::power(0.2, 2.0, p).unwrap()).unwrap()
}

/// Bin averages of `e^{−10 t}` on `grid`.
pub fn binned_exp_weights(grid: &BinGrid) -> Vec<f64> {
    grid.endpoints().windows(2).map(|w| ((-10.0 * w[0]).exp() - (-10.0 * w[1]).exp()) / (w[1] - w[0])).collect()
}

pub fn piecewise_model(grid: &BinGrid, mu: f64, weights: Vec<f64>, alpha: f64) -> HawkesModel {
    HawkesModel::new(mu, TriggeringKernel::piecewise(grid.clone(), weights, alpha).unwrap()).unwrap()
}

pub fn phi_of(model: &HawkesModel) -> Vec<f64> {
    match &model.kernel {
        TriggeringKernel::Piecewise { g, alpha, .. } => g.iter().map(|g| alpha * g).collect(),
        _ => panic!("not a piecewise kernel"),
    }
}

pub fn sample(model: &HawkesModel, count: usize, seed: u64) -> Vec<EventSequence> {
    simulate_batch(model, HORIZON, count, seed, "s").unwrap()
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

pub fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) }
}
