//! Score, observed information and the generalized score and Wald
//! statistics for the equal-kernel constraint `φ⁽¹⁾ = φ⁽²⁾`.
//!
//! With several sequences the outer-product matrix is the sum of
//! per-sequence outer products `A = Σ S_i S_iᵀ`, which is what makes the
//! `r × r` middle matrix invertible once there are at least `r` sequences.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::asymptotics::{chi2_quantile, chi2_sf};
use crate::error::{Error, Result};
use crate::likelihood::LagTable;
use crate::sequence::LabeledSequence;
use crate::theta::{ThetaFull, ThetaNull};

/// Largest condition number accepted for `B` and `H B⁻¹ A B⁻¹ Hᵀ`.
pub const MAX_CONDITION: f64 = 1e12;

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreBundle {
    pub s: DVector<f64>,
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub n_seqs: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StatKind {
    GS,
    GW,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GSResult {
    pub statistic: f64,
    pub dof: u32,
    pub p_value: f64,
    pub reject: bool,
    pub condition_number: f64,
    pub kind: StatKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct GsOptions {
    /// Replaces the default `r = n0` degrees of freedom.
    pub dof_override: Option<u32>,
    /// Adds `ridge · tr(M)/r · I` to the middle matrix. Off by default.
    pub ridge: Option<f64>,
}

/// `H = [0 | I | −I]`, of size `n0 × (1 + 2 n0)`.
pub fn constraint_matrix(n0: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n0, 1 + 2 * n0, |i, j| {
        if j == 1 + i {
            1.0
        } else if j == 1 + n0 + i {
            -1.0
        } else {
            0.0
        }
    })
}

/// Score `∂ℓ₁/∂θ` and negative Hessian of one sequence.
///
/// With `x_i = (1, n_i⁽¹⁾, n_i⁽²⁾)` the bin counts of earlier events and
/// `Δ_i = θᵀ x_i`: `S = Σ x_i/Δ_i − (T, c⁽¹⁾, c⁽²⁾)` where `c⁽ᶻ⁾_k` is the
/// exact compensator coefficient, and `B = Σ x_i x_iᵀ/Δ_i²`.
pub fn score_and_hessian(theta: &ThetaFull, seq: &LabeledSequence) -> Result<(DVector<f64>, DMatrix<f64>)> {
    score_from_table(theta, &LagTable::new(seq, &theta.grid))
}

pub(crate) fn score_from_table(theta: &ThetaFull, table: &LagTable) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let n0 = theta.n_bins();
    let d = 1 + 2 * n0;
    let mut s = DVector::zeros(d);
    let mut b = DMatrix::zeros(d, d);
    let mut x = vec![0.0; d];
    x[0] = 1.0;
    let mut nz = Vec::with_capacity(d);
    for i in 0..table.len() {
        let delta = table.delta(theta, i);
        if !(delta > 0.0) || !delta.is_finite() {
            return Err(Error::NonFiniteDerivative(i));
        }
        let w = 1.0 / delta;
        nz.clear();
        nz.push(0);
        for (k, &c) in table.row(i).iter().enumerate() {
            x[1 + k] = c as f64;
            if c > 0 {
                nz.push(1 + k);
            }
        }
        for &p in &nz {
            s[p] += x[p] * w;
            for &q in &nz {
                b[(p, q)] += x[p] * x[q] * w * w;
            }
        }
    }
    s[0] -= table.horizon();
    for z in 0..2 {
        for (k, c) in table.compensator(z).iter().enumerate() {
            s[1 + z * n0 + k] -= c;
        }
    }
    Ok((s, b))
}

/// `S = Σ S_i`, `A = Σ S_i S_iᵀ`, `B = Σ B_i`, summed in input order.
pub fn aggregate_bundles(per_seq: &[(DVector<f64>, DMatrix<f64>)]) -> Result<ScoreBundle> {
    let Some((s0, _)) = per_seq.first() else {
        return Err(Error::InsufficientSequences { needed: 1, have: 0 });
    };
    let d = s0.len();
    let mut s = DVector::zeros(d);
    let mut a = DMatrix::zeros(d, d);
    let mut b = DMatrix::zeros(d, d);
    for (si, bi) in per_seq {
        if si.len() != d {
            return Err(Error::DimensionMismatch { expected: d, got: si.len() });
        }
        if bi.nrows() != d || bi.ncols() != d {
            return Err(Error::DimensionMismatch { expected: d, got: bi.nrows().max(bi.ncols()) });
        }
        s += si;
        a.ger(1.0, si, si, 1.0);
        b += bi;
    }
    Ok(ScoreBundle { s, a, b, n_seqs: per_seq.len() })
}

/// Per-sequence scores computed in parallel and aggregated in order.
pub fn score_bundle(theta: &ThetaFull, seqs: &[LabeledSequence]) -> Result<ScoreBundle> {
    let parts: Vec<_> = seqs.par_iter().map(|s| score_and_hessian(theta, s)).collect::<Result<_>>()?;
    aggregate_bundles(&parts)
}

fn condition(m: &DMatrix<f64>) -> f64 {
    let eig = SymmetricEigen::new(m.clone()).eigenvalues;
    let max = eig.max();
    let min = eig.min();
    if min <= 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// `w_i = H B⁻¹ S_i` for each sequence, plus the condition number of `B`.
fn projected_scores(bundle: &ScoreBundle, per_seq: &[DVector<f64>], n0: usize) -> Result<(Vec<DVector<f64>>, f64)> {
    let cond_b = condition(&bundle.b);
    if !(cond_b <= MAX_CONDITION) {
        return Err(Error::SingularCovariance { matrix: "B", condition_number: cond_b });
    }
    let lu = bundle.b.clone().lu();
    let h = constraint_matrix(n0);
    per_seq
        .iter()
        .map(|s| {
            let x = lu.solve(s).ok_or(Error::SingularCovariance { matrix: "B", condition_number: cond_b })?;
            Ok(&h * x)
        })
        .collect::<Result<Vec<_>>>()
        .map(|w| (w, cond_b))
}

/// `vᵀ M⁻¹ v` for the `r × r` middle matrix `M = H B⁻¹ A B⁻¹ Hᵀ`.
fn quadratic_form(v: &DVector<f64>, middle: DMatrix<f64>, opts: &GsOptions) -> Result<(f64, f64)> {
    let r = middle.nrows();
    let middle = match opts.ridge {
        Some(eps) if eps > 0.0 => {
            let shift = eps * middle.trace() / r as f64;
            middle + DMatrix::identity(r, r) * shift
        }
        _ => middle,
    };
    let cond = condition(&middle);
    if !(cond <= MAX_CONDITION) {
        return Err(Error::SingularCovariance { matrix: "H B^-1 A B^-1 H^T", condition_number: cond });
    }
    let x = middle
        .clone()
        .lu()
        .solve(v)
        .ok_or(Error::SingularCovariance { matrix: "H B^-1 A B^-1 H^T", condition_number: cond })?;
    Ok((v.dot(&x), cond))
}

fn decide(statistic: f64, r: usize, level: f64, cond: f64, kind: StatKind, opts: &GsOptions) -> Result<GSResult> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidParameter(format!("level must lie in (0, 1), got {level}")));
    }
    let dof = opts.dof_override.unwrap_or(r as u32);
    // the quadratic form is non-negative in exact arithmetic
    let statistic = if statistic < 0.0 && statistic > -1e-8 { 0.0 } else { statistic };
    if !statistic.is_finite() || statistic < 0.0 {
        return Err(Error::NonFiniteDerivative(0));
    }
    let p_value = chi2_sf(statistic, dof)?;
    let reject = statistic > chi2_quantile(1.0 - level, dof)?;
    Ok(GSResult { statistic, dof, p_value, reject, condition_number: cond, kind })
}

/// Generalized score statistic at the shared-kernel fit.
pub fn gs_statistic(theta_hat_null: &ThetaNull, seqs: &[LabeledSequence], level: f64) -> Result<GSResult> {
    gs_statistic_with(theta_hat_null, seqs, level, &GsOptions::default())
}

pub fn gs_statistic_with(
    theta_hat_null: &ThetaNull,
    seqs: &[LabeledSequence],
    level: f64,
    opts: &GsOptions,
) -> Result<GSResult> {
    let theta = theta_hat_null.embed();
    let n0 = theta.n_bins();
    let parts: Vec<_> = seqs.par_iter().map(|s| score_and_hessian(&theta, s)).collect::<Result<_>>()?;
    let bundle = aggregate_bundles(&parts)?;
    let scores: Vec<_> = parts.into_iter().map(|p| p.0).collect();
    let (w, _) = projected_scores(&bundle, &scores, n0)?;
    let mut v = DVector::zeros(n0);
    let mut middle = DMatrix::zeros(n0, n0);
    for wi in &w {
        v += wi;
        middle.ger(1.0, wi, wi, 1.0);
    }
    let (stat, cond) = quadratic_form(&v, middle, opts)?;
    decide(stat, n0, level, cond, StatKind::GS, opts)
}

/// Generalized Wald statistic `h(θ̃)ᵀ (H B⁻¹ A B⁻¹ Hᵀ)⁻¹ h(θ̃)` at the
/// two-kernel fit.
pub fn gw_statistic(theta_tilde_full: &ThetaFull, seqs: &[LabeledSequence], level: f64) -> Result<GSResult> {
    gw_statistic_with(theta_tilde_full, seqs, level, &GsOptions::default())
}

pub fn gw_statistic_with(
    theta_tilde_full: &ThetaFull,
    seqs: &[LabeledSequence],
    level: f64,
    opts: &GsOptions,
) -> Result<GSResult> {
    let n0 = theta_tilde_full.n_bins();
    let parts: Vec<_> = seqs.par_iter().map(|s| score_and_hessian(theta_tilde_full, s)).collect::<Result<_>>()?;
    let bundle = aggregate_bundles(&parts)?;
    let scores: Vec<_> = parts.into_iter().map(|p| p.0).collect();
    let (w, _) = projected_scores(&bundle, &scores, n0)?;
    let mut middle = DMatrix::zeros(n0, n0);
    for wi in &w {
        middle.ger(1.0, wi, wi, 1.0);
    }
    let h = DVector::from_vec(theta_tilde_full.constraint());
    let (stat, cond) = quadratic_form(&h, middle, opts)?;
    decide(stat, n0, level, cond, StatKind::GW, opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::BinGrid;
    use crate::likelihood::loglik_full;
    use crate::sequence::Label;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_seq(rng: &mut ChaCha8Rng, n: usize, horizon: f64) -> LabeledSequence {
        let mut t: Vec<f64> = (0..n).map(|_| rng.random_range(1e-3..horizon)).collect();
        t.sort_by(f64::total_cmp);
        let ev = t.into_iter().map(|x| (x, if rng.random_bool(0.5) { Label::One } else { Label::Two })).collect();
        LabeledSequence::new(horizon, ev).unwrap()
    }

    fn random_theta(rng: &mut ChaCha8Rng, grid: &BinGrid) -> ThetaFull {
        let n0 = grid.n_bins();
        let mut phi = || (0..n0).map(|_| rng.random_range(0.05..0.6)).collect::<Vec<_>>();
        let (a, b) = (phi(), phi());
        ThetaFull::unchecked_stationarity(grid.clone(), rng.random_range(0.5..3.0), a, b).unwrap()
    }

    #[test]
    fn poisson_background_score() {
        let grid = BinGrid::preset("paper3").unwrap();
        let seq = LabeledSequence::new(2.0, vec![(0.1, Label::One), (0.9, Label::Two), (1.9, Label::One)]).unwrap();
        let th = ThetaFull::new(grid.clone(), 1.2, vec![0.0; 3], vec![0.0; 3]).unwrap();
        let (s, _) = score_and_hessian(&th, &seq).unwrap();
        assert!((s[0] - (3.0 / 1.2 - 2.0)).abs() < 1e-14);
        let th = ThetaFull::new(grid, 1.5, vec![0.0; 3], vec![0.0; 3]).unwrap();
        assert!(score_and_hessian(&th, &seq).unwrap().0[0].abs() < 1e-14);
    }

    #[test]
    fn constraint_matrix_layout() {
        let h = constraint_matrix(2);
        assert_eq!(h, DMatrix::from_row_slice(2, 5, &[0., 1., 0., -1., 0., 0., 0., 1., 0., -1.]));
    }

    #[test]
    fn aggregation_identities() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let grid = BinGrid::preset("paper3").unwrap();
        let th = random_theta(&mut rng, &grid);
        let seq = random_seq(&mut rng, 30, 4.0);
        let one = score_and_hessian(&th, &seq).unwrap();
        let single = aggregate_bundles(&[one.clone()]).unwrap();
        assert_eq!(single.a, &one.0 * one.0.transpose());
        let double = aggregate_bundles(&[one.clone(), one.clone()]).unwrap();
        assert_eq!(double.s, &single.s * 2.0);
        assert_eq!(double.a, &single.a * 2.0);
        assert_eq!(double.b, &single.b * 2.0);
        let bad = (DVector::zeros(3), DMatrix::zeros(3, 3));
        assert!(matches!(aggregate_bundles(&[one, bad]), Err(Error::DimensionMismatch { .. })));

        let seqs: Vec<_> = (0..10).map(|_| random_seq(&mut rng, 25, 4.0)).collect();
        let bundle = score_bundle(&th, &seqs).unwrap();
        let eig = SymmetricEigen::new(bundle.a.clone()).eigenvalues;
        assert!(eig.min() >= -1e-8 * bundle.a.trace());
        assert!((&bundle.b - bundle.b.transpose()).abs().max() < 1e-10);
    }

    #[test]
    fn corrupt_theta_is_reported() {
        let grid = BinGrid::preset("paper3").unwrap();
        let seq = LabeledSequence::new(1.0, vec![(0.5, Label::One)]).unwrap();
        let mut th = ThetaFull::new(grid, 1.0, vec![0.0; 3], vec![0.0; 3]).unwrap();
        th.mu = f64::NAN;
        assert!(matches!(score_and_hessian(&th, &seq), Err(Error::NonFiniteDerivative(0))));
    }

    #[test]
    fn score_and_hessian_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let grid = BinGrid::preset("paper3").unwrap();
        for _ in 0..25 {
            let th = random_theta(&mut rng, &grid);
            let n = rng.random_range(5..40);
            let seq = random_seq(&mut rng, n, 3.0);
            let (s, b) = score_and_hessian(&th, &seq).unwrap();
            let v = th.to_vec();
            let ll = |v: &[f64]| loglik_full(&ThetaFull::from_vec(grid.clone(), v).unwrap(), &seq).unwrap();
            let score = |v: &[f64]| score_and_hessian(&ThetaFull::from_vec(grid.clone(), v).unwrap(), &seq).unwrap().0;
            for p in 0..v.len() {
                let h = 1e-6 * v[p].abs().max(1.0);
                let (mut up, mut dn) = (v.clone(), v.clone());
                up[p] += h;
                dn[p] -= h;
                let fd = (ll(&up) - ll(&dn)) / (2.0 * h);
                assert!((fd - s[p]).abs() <= 1e-5 * s[p].abs().max(1.0), "score {p}: {fd} vs {}", s[p]);
                let col = (score(&up) - score(&dn)) / (2.0 * h);
                for q in 0..v.len() {
                    assert!((-col[q] - b[(q, p)]).abs() <= 1e-4 * b[(q, p)].abs().max(1.0));
                }
            }
            assert!((&b - b.transpose()).abs().max() < 1e-10);
        }
    }

    #[test]
    fn too_few_sequences_are_singular() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let grid = BinGrid::preset("paper3").unwrap();
        let th = ThetaNull::new(grid, 5.0, 0.3, vec![2.0, 1.0, 1.0 / 7.0]).unwrap();
        let seqs: Vec<_> = (0..2).map(|_| random_seq(&mut rng, 60, 6.0)).collect();
        assert!(matches!(gs_statistic(&th, &seqs, 0.05), Err(Error::SingularCovariance { .. })));
    }

    #[test]
    fn wald_is_zero_on_the_constraint() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let grid = BinGrid::preset("paper3").unwrap();
        let th = ThetaNull::new(grid, 5.0, 0.3, vec![2.0, 1.0, 1.0 / 7.0]).unwrap().embed();
        let seqs: Vec<_> = (0..20).map(|_| random_seq(&mut rng, 40, 6.0)).collect();
        let r = gw_statistic(&th, &seqs, 0.05).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert_eq!(r.p_value, 1.0);
        assert!(!r.reject);
        assert_eq!(r.kind, StatKind::GW);
    }

    #[test]
    fn label_swap_and_options() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let grid = BinGrid::preset("paper3").unwrap();
        let th = ThetaNull::new(grid, 5.0, 0.3, vec![2.0, 1.0, 1.0 / 7.0]).unwrap();
        let seqs: Vec<_> = (0..20).map(|_| random_seq(&mut rng, 40, 6.0)).collect();
        let swapped: Vec<_> = seqs.iter().map(|s| s.swap_labels()).collect();
        let a = gs_statistic(&th, &seqs, 0.05).unwrap();
        let b = gs_statistic(&th, &swapped, 0.05).unwrap();
        assert!((a.statistic - b.statistic).abs() <= 1e-8 * a.statistic.max(1.0));
        assert!(a.statistic >= 0.0 && a.statistic <= seqs.len() as f64 + 1e-9);
        assert_eq!(a.dof, 3);
        assert_eq!(a.reject, a.statistic > chi2_quantile(0.95, 3).unwrap());
        let o = gs_statistic_with(&th, &seqs, 0.05, &GsOptions { dof_override: Some(4), ridge: None }).unwrap();
        assert_eq!(o.dof, 4);
        assert_eq!(o.statistic, a.statistic);
        let ridged = gs_statistic_with(&th, &seqs, 0.05, &GsOptions { dof_override: None, ridge: Some(0.1) }).unwrap();
        assert!(ridged.statistic < a.statistic);
    }
}
