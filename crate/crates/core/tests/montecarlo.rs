use specnorm::extremes::GumbelModel;
use specnorm::montecarlo::{
    paired_bound_experiment, quantile_sorted, run_experiment, sweep_ratios, write_summary_csv, ExperimentConfig,
    McSummary, Statistic,
};
use specnorm::sinekernel::{k_table, KOptions};
use specnorm::structured::Family;

#[test]
fn summaries_match_sort_based_oracle() {
    let mut state = 0x9E37_79B9_7F4A_7C15u64;
    let samples: Vec<f64> = (0..10_000)
        .map(|_| {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64
        })
        .collect();
    let probes = [0.01, 0.05, 0.25, 0.5, 0.75, 0.95, 0.99];
    let s = McSummary::from_samples(Statistic::ScaledNorm, &samples, 0, &probes).unwrap();
    let mut sorted = samples.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    for (&q, &got) in probes.iter().zip(&s.quantiles) {
        let pos = q * 9_999.0;
        let k = pos as usize;
        let expect = sorted[k] * (1.0 - (pos - k as f64)) + sorted[k + 1] * (pos - k as f64);
        assert!((got - expect).abs() < 1e-15, "q = {q}");
    }
    assert!(s.quantiles.windows(2).all(|w| w[0] <= w[1]));
    assert_eq!(s.count, 10_000);
    let mean = samples.iter().sum::<f64>() / 1e4;
    assert!((s.mean - mean).abs() < 1e-12);
    assert_eq!(quantile_sorted(&sorted, 0.0), sorted[0]);
    assert_eq!(quantile_sorted(&sorted, 1.0), sorted[9_999]);
}

#[test]
fn worker_count_does_not_change_results() {
    let mut cfg = ExperimentConfig::new(Family::Hankel, 12, 30, 64);
    cfg.symmetric = true;
    cfg.base_seed = 2024;
    cfg.statistics = vec![Statistic::ScaledNorm, Statistic::CenteredNormSq];
    cfg.threads = Some(1);
    let one = run_experiment(&cfg).unwrap();
    cfg.threads = Some(8);
    let eight = run_experiment(&cfg).unwrap();
    assert_eq!(one.records, eight.records);
    assert_eq!(one.summaries, eight.summaries);
    assert_eq!(one.excluded + one.summaries[0].count, 64);
}

#[test]
fn toeplitz_sweep_reference_is_k_table() {
    let mut cfg = ExperimentConfig::new(Family::Toeplitz, 20, 20, 4);
    cfg.reference_p_base = 100;
    let rows = sweep_ratios(&cfg, &[0.5, 1.0, 0.25], 20).unwrap();
    let table = k_table(&[1.0, 0.5, 0.25], 100, &KOptions::default()).unwrap();
    assert_eq!(rows[0].references[0], table[1].k_value);
    assert_eq!(rows[1].references[0], table[0].k_value);
    assert_eq!(rows[2].references[0], table[2].k_value);
    assert_eq!((rows[0].n, rows[1].n, rows[2].n), (40, 20, 80));

    let mut buf = Vec::new();
    write_summary_csv(&mut buf, &rows).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert!(text.starts_with("ratio,p,n,count,mean,q05,median,q95,reference"));
    assert_eq!(text.lines().count(), 4);
}

#[test]
fn circulant_sweep_reference_is_one() {
    let cfg = ExperimentConfig::new(Family::Circulant, 16, 16, 3);
    let rows = sweep_ratios(&cfg, &[1.0, 0.7, 0.4, 0.1], 16).unwrap();
    assert!(rows.iter().all(|r| r.references == vec![1.0]));
}

#[test]
fn square_circulant_scaled_norm_median_near_one() {
    let mut cfg = ExperimentConfig::new(Family::Circulant, 500, 500, 400);
    cfg.base_seed = 8;
    let rows = sweep_ratios(&cfg, &[1.0], 500).unwrap();
    let median = rows[0].summaries[0].median;
    assert!((0.95..=1.3).contains(&median), "median {median}");
}

#[test]
fn centered_b_follows_shifted_gumbel() {
    // c = 1: QQ slope against Gumbel(0, 1)
    let mut cfg = ExperimentConfig::new(Family::Circulant, 512, 512, 2000);
    cfg.base_seed = 31;
    cfg.statistics = vec![Statistic::BStatistic];
    let res = run_experiment(&cfg).unwrap();
    let s = res.summary(Statistic::BStatistic).unwrap();
    let slope = specnorm::montecarlo::qq_slope(s.sorted_samples(), &GumbelModel::for_ratio(1.0).unwrap()).unwrap();
    assert!((0.8..=1.2).contains(&slope), "slope {slope}");

    // c = 1/2: median near θ_{1/2} − log log 2
    let mut cfg = ExperimentConfig::new(Family::Circulant, 256, 512, 2000);
    cfg.base_seed = 32;
    cfg.statistics = vec![Statistic::BStatistic];
    let res = run_experiment(&cfg).unwrap();
    let median = res.summary(Statistic::BStatistic).unwrap().median;
    let target = GumbelModel::for_ratio(0.5).unwrap().median();
    // 1.5965 with θ_{1/2} rounded to 1.23
    assert!((target - 1.5965).abs() < 5e-3);
    assert!((median - target).abs() <= 0.25, "median {median}, target {target}");
}

#[test]
fn paired_bound_has_no_violations() {
    let mut cfg = ExperimentConfig::new(Family::Circulant, 64, 128, 500);
    cfg.base_seed = 77;
    cfg.tol = 1e-14;
    cfg.max_iter = 100_000;
    let rep = paired_bound_experiment(&cfg).unwrap();
    assert_eq!(rep.pairs.len() + rep.excluded, 500);
    assert_eq!(rep.violations, 0);
    assert_eq!(rep.dominance.samples, rep.pairs.len());
    assert!(paired_bound_experiment(&ExperimentConfig::new(Family::Toeplitz, 64, 128, 500)).is_err());
}
