use hawkes_gof::baselines::{exp_mle_gd, exp_mle_gd_with, residual_process, ripley_k, ExpGdOptions};
use hawkes_gof::{simulate_batch, HawkesModel, TriggeringKernel};

fn exp_model(alpha: f64) -> HawkesModel {
    HawkesModel::new(20.0, TriggeringKernel::exponential(alpha, 10.0).unwrap()).unwrap()
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

#[test]
fn poisson_ripley_k_is_about_twice_t() {
    let seqs = simulate_batch(&exp_model(0.0), 10.0, 500, 3, "p").unwrap();
    let ks: Vec<f64> = seqs.iter().map(|s| ripley_k(s, 1.0, 20.0).unwrap()).collect();
    // without edge correction the expectation is 2 (1 - 1/(2T)) = 1.9
    assert!((mean(&ks) - 2.0).abs() < 0.2, "{}", mean(&ks));
}

#[test]
fn thinning_the_true_model_leaves_rate_mu() {
    let m = exp_model(3.0);
    let seqs = simulate_batch(&m, 10.0, 500, 5, "h").unwrap();
    let residuals: Vec<_> = seqs.iter().enumerate().map(|(i, s)| residual_process(s, &m, i as u64)).collect();
    let counts: Vec<f64> = residuals.iter().map(|r| r.len() as f64).collect();
    // Poisson(200) counts: the mean of 500 has standard error 0.63
    assert!((mean(&counts) - 200.0).abs() < 3.0, "{}", mean(&counts));
    assert!(mean(&seqs.iter().map(|s| s.len() as f64).collect::<Vec<_>>()) > 250.0);

    let poisson = simulate_batch(&exp_model(0.0), 10.0, 500, 6, "p").unwrap();
    let k_res = mean(&residuals.iter().map(|r| ripley_k(r, 1.0, 20.0).unwrap()).collect::<Vec<_>>());
    let k_poi = mean(&poisson.iter().map(|r| ripley_k(r, 1.0, 20.0).unwrap()).collect::<Vec<_>>());
    assert!((k_res - k_poi).abs() < 0.05, "{k_res} vs {k_poi}");
}

#[test]
fn gradient_ascent_on_poisson_data_finds_the_rate() {
    let seqs = simulate_batch(&exp_model(0.0), 10.0, 50, 8, "p").unwrap();
    let target = seqs.iter().map(|s| s.len()).sum::<usize>() as f64 / (50.0 * 10.0);
    let opts = ExpGdOptions { lr: 0.5, steps: 400, freeze: [false, true, true] };
    let fit = exp_mle_gd_with(&seqs, (5.0, 0.0, 10.0), &opts).unwrap();
    assert!((fit.mu - target).abs() < 1e-3, "{} vs {target}", fit.mu);
    assert_eq!(fit.alpha, 0.0);
}

#[test]
fn loglik_trace_never_decreases() {
    let seqs = simulate_batch(&exp_model(1.5), 10.0, 100, 9, "e").unwrap();
    let fit = exp_mle_gd(&seqs, (10.0, 0.5, 5.0), 1e-3, 300).unwrap();
    assert_eq!(fit.loglik_trace.len(), 301);
    assert!(fit.loglik_trace.windows(2).all(|w| w[1] >= w[0]));
    assert!(fit.loglik_trace[300] > fit.loglik_trace[0]);
}

#[test]
fn long_runs_drift_away_from_the_truth() {
    // started at the truth, the likelihood keeps rising while α wanders off
    let mut drifted = 0;
    for seed in 0..20 {
        let seqs = simulate_batch(&exp_model(1.5), 10.0, 5, 100 + seed, "e").unwrap();
        let early = exp_mle_gd(&seqs, (20.0, 1.5, 10.0), 1e-2, 1).unwrap();
        let late = exp_mle_gd(&seqs, (20.0, 1.5, 10.0), 1e-2, 2000).unwrap();
        assert!(late.loglik_trace.last() > early.loglik_trace.last());
        if (late.alpha - 1.5).abs() > (early.alpha - 1.5).abs() {
            drifted += 1;
        }
    }
    assert!(drifted >= 10, "{drifted} of 20");
}
