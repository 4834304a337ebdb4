use std::fs;

use omnirank_core::domain::Label;
use omnirank_core::eval::{auc_of, cross_validate, FoldPlan, LogisticFactory};
use omnirank_core::features::{build_month_features, FeatureConfig, LdaConfig, SentimentLexicon};
use omnirank_core::io::write_universe;
use omnirank_core::synth::{generate_universe, GeneratorConfig};
use omnirank_core::{Dataset, RiskScore};

/// Out-of-fold logistic-regression AUC on bundles at the last month with
/// known next-month statuses.
fn lr_oracle_auc(cfg: &GeneratorConfig) -> f64 {
    let data = Dataset::new(generate_universe(cfg).unwrap().platforms).unwrap();
    let cutoff = cfg.end().offset(-1);
    let features = FeatureConfig { lda: LdaConfig { iterations: 150, ..LdaConfig::default() }, ..FeatureConfig::default() };
    let bundles = build_month_features(&data.truncated(cutoff, cutoff), cutoff, &features, &SentimentLexicon::default())
        .unwrap()
        .bundles;
    let pairs: Vec<_> = bundles.iter().map(|b| (b.platform_id.clone(), b.label_at_cutoff)).collect();
    let plan = FoldPlan::new(&pairs, 5, 1).unwrap();
    let raw = cross_validate(&LogisticFactory::default(), &bundles, &plan, 1).unwrap();
    let scores: Vec<RiskScore> = bundles
        .iter()
        .zip(raw)
        .map(|(b, score)| RiskScore { platform_id: b.platform_id.clone(), cutoff_month: cutoff, score })
        .collect();
    let auc = auc_of(&scores, &pairs.into_iter().collect()).unwrap();
    eprintln!("logistic oracle AUC {auc:.4}");
    auc
}

#[test]
fn same_config_writes_identical_files() {
    let cfg = GeneratorConfig { n_platforms: 30, ..GeneratorConfig::default() };
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    write_universe(a.path(), &generate_universe(&cfg).unwrap()).unwrap();
    write_universe(b.path(), &generate_universe(&cfg).unwrap()).unwrap();
    for f in ["platforms.jsonl", "news.jsonl", "comments.jsonl", "truth.json"] {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap(), "{f}");
    }
}

#[test]
fn problem_count_at_full_scale() {
    let f = 1378.0 / 3050.0;
    let cfg = GeneratorConfig { n_platforms: 3050, problem_fraction: f, horizon_months: 6, ..GeneratorConfig::default() };
    let u = generate_universe(&cfg).unwrap();
    let problems = u.platforms.iter().filter(|p| p.status == Label::Problem).count() as f64;
    let sigma = (3050.0 * f * (1.0 - f)).sqrt();
    assert!((problems - 1378.0).abs() <= 3.0 * sigma, "{problems} problems, sigma {sigma:.1}");
}

#[test]
fn problem_platforms_advertise_higher_rates() {
    let u = generate_universe(&GeneratorConfig::default()).unwrap();
    let mean = |l: Label| {
        let v: Vec<f64> = u.platforms.iter().filter(|p| p.status == l).filter_map(|p| p.numeric("interest_rate")).collect();
        v.iter().sum::<f64>() / v.len() as f64
    };
    assert!(mean(Label::Problem) > mean(Label::Normal));
}

#[test]
fn zero_signal_is_chance_level() {
    let cfg = GeneratorConfig { signal_strength: 0.0, interest_risk_coupling: 0.0, ..GeneratorConfig::default() };
    let auc = lr_oracle_auc(&cfg);
    assert!((0.45..=0.55).contains(&auc), "zero-signal LR AUC {auc:.4}");
}

#[test]
fn default_signal_is_learnable_by_the_baseline() {
    let auc = lr_oracle_auc(&GeneratorConfig::default());
    assert!(auc >= 0.75, "default LR AUC {auc:.4}");
}
