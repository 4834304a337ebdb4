//! Generates the default planted universe, cleans it and evaluates the given
//! cutoffs, printing per-month metrics.
//!
//! cargo run --release -p omnirank-core --example planted_run -- 2016-04

use std::time::Instant;

use omnirank_core::cleaning::{clean_dataset, CleaningConfig, FieldDefaults};
use omnirank_core::domain::{parse_month_range, Dataset};
use omnirank_core::eval::{pool_buckets, rolling_evaluate, EvalConfig, OmniRankFactory};
use omnirank_core::features::{FeatureConfig, SentimentLexicon};
use omnirank_core::synth::{generate_universe, GeneratorConfig};

fn main() -> omnirank_core::Result<()> {
    let months = parse_month_range(&std::env::args().nth(1).unwrap_or_else(|| "2016-04".into()))?;
    let t0 = Instant::now();
    let mut config = GeneratorConfig::default();
    if let Ok(seed) = std::env::var("OMNIRANK_SEED") {
        config.seed = seed.parse().expect("OMNIRANK_SEED is an integer");
    }
    if let Ok(mix) = std::env::var("PLANT_MIX") {
        config.mix = serde_json::from_str(&mix).expect("PLANT_MIX is a JSON signal mix");
    }
    let universe = generate_universe(&config)?;
    let lexicon = SentimentLexicon::default();
    let (data, summary) = clean_dataset(
        &Dataset::new(universe.platforms)?,
        &FieldDefaults::default(),
        &lexicon,
        &CleaningConfig::default(),
    )?;
    println!("generated and cleaned in {:.1?}: {:?}", t0.elapsed(), summary.comments);
    let mut factory = OmniRankFactory::default();
    if let Ok(train) = std::env::var("TRAIN_CONFIG") {
        factory.train = serde_json::from_str(&train).expect("TRAIN_CONFIG is a JSON train config");
    }
    let reports = rolling_evaluate(
        &data,
        &factory,
        &months,
        &FeatureConfig::default(),
        &lexicon,
        &EvalConfig::default(),
    )?;
    for r in &reports {
        let base = r.baseline.as_ref().map_or(f64::NAN, |b| b.auc);
        println!(
            "{} n={} problem={} auc={:.4} lr_auc={:.4} acc={:.4}",
            r.cutoff_month, r.platforms, r.problem, r.auc, base, r.accuracy
        );
        println!("  normal  {:?}", r.histogram.normal);
        println!("  problem {:?}", r.histogram.problem);
    }
    for b in pool_buckets(&reports.iter().map(|r| r.buckets.clone()).collect::<Vec<_>>()) {
        println!("  {} {}/{} {:.2}% rate {:?}", b.limit, b.failures, b.platforms, b.failure_pct, b.mean_interest_rate);
    }
    println!("total {:.1?}", t0.elapsed());
    Ok(())
}
