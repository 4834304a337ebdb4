use std::fs;
use std::path::Path;

use omnirank_core::domain::{CategoryValue, Month};
use omnirank_core::error::Error;
use omnirank_core::features::{build_month_features, FeatureConfig, LdaConfig, SentimentLexicon};
use omnirank_core::io::dashboard::{MonthRanking, RELATED_FILE, PLATFORMS_FILE};
use omnirank_core::io::{
    export_dashboard, load_checkpoint, read_dashboard, run_pipeline, save_checkpoint, write_dataset, write_json,
    write_universe, DashboardConfig, RankingsFile, ReportsFile, RunConfig, Stage, SCHEMA_VERSION,
};
use omnirank_core::eval::RankedPlatform;
use omnirank_core::nn::{NetConfig, TrainConfig, TrainedModel};
use omnirank_core::synth::{generate_universe, GeneratorConfig};
use omnirank_core::Dataset;

fn small_config(data: &Path, out: &Path) -> RunConfig {
    let mut c = RunConfig::from_toml(
        r#"
        seed = 3
        months = "2015-03:2015-04"
        [generator]
        n_platforms = 60
        horizon_months = 12
        [features.lda]
        iterations = 30
        [train]
        epochs = 3
        [eval]
        folds = 3
        "#,
    )
    .unwrap();
    c.paths.data = data.into();
    c.paths.out = out.into();
    c
}

#[test]
fn checkpoint_reload_scores_bit_exactly() {
    let gen = GeneratorConfig { n_platforms: 40, horizon_months: 10, ..GeneratorConfig::default() };
    let data = Dataset::new(generate_universe(&gen).unwrap().platforms).unwrap();
    let cutoff = gen.start.offset(8);
    let cfg = FeatureConfig { lda: LdaConfig { iterations: 30, ..LdaConfig::default() }, ..FeatureConfig::default() };
    let bundles = build_month_features(&data, cutoff, &cfg, &SentimentLexicon::default()).unwrap().bundles;
    let model = TrainedModel::fit(&bundles, &NetConfig::default(), &TrainConfig { epochs: 3, ..TrainConfig::default() }).unwrap();
    let dir = tempfile::tempdir().unwrap();
    save_checkpoint(dir.path(), &model).unwrap();
    assert_eq!(fs::metadata(dir.path().join("params.bin")).unwrap().len(), 8 * model.params.len() as u64);
    let back = load_checkpoint(dir.path()).unwrap();
    let a = model.predict_scores(&bundles).unwrap();
    let b = back.predict_scores(&bundles).unwrap();
    assert!(a.iter().zip(&b).all(|(x, y)| x.score.to_bits() == y.score.to_bits()));
    assert_eq!(back.params, model.params);
}

#[test]
fn truncated_checkpoint_is_rejected() {
    let gen = GeneratorConfig { n_platforms: 20, horizon_months: 8, ..GeneratorConfig::default() };
    let data = Dataset::new(generate_universe(&gen).unwrap().platforms).unwrap();
    let cfg = FeatureConfig { lda: LdaConfig { iterations: 10, ..LdaConfig::default() }, ..FeatureConfig::default() };
    let bundles = build_month_features(&data, gen.start.offset(6), &cfg, &SentimentLexicon::default()).unwrap().bundles;
    let model = TrainedModel::fit(&bundles, &NetConfig::default(), &TrainConfig { epochs: 1, ..TrainConfig::default() }).unwrap();
    let dir = tempfile::tempdir().unwrap();
    save_checkpoint(dir.path(), &model).unwrap();
    let blob = fs::read(dir.path().join("params.bin")).unwrap();
    fs::write(dir.path().join("params.bin"), &blob[..blob.len() - 8]).unwrap();
    assert!(matches!(load_checkpoint(dir.path()), Err(Error::Data(_))));
}

#[test]
fn pipeline_writes_artifacts_and_reruns_identically() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("raw");
    let cfg = small_config(&data, &tmp.path().join("a"));
    write_universe(&data, &generate_universe(&cfg.seeded().generator).unwrap()).unwrap();

    let out = run_pipeline(&cfg).unwrap();
    for f in [
        "config.toml",
        "clean/platforms.jsonl",
        "clean/news.jsonl",
        "clean/comments.jsonl",
        "cleaning_summary.json",
        "bundles.jsonl",
        "model/manifest.json",
        "model/params.bin",
        "reports.json",
        "rankings.json",
    ] {
        assert!(out.out.join(f).exists(), "missing {f}");
    }
    assert_eq!(out.reports.len(), 2);
    assert_eq!(out.rankings.months.len(), 2);

    let mut again = cfg.clone();
    again.paths.out = tmp.path().join("b");
    run_pipeline(&again).unwrap();
    assert_eq!(
        fs::read(tmp.path().join("a/rankings.json")).unwrap(),
        fs::read(tmp.path().join("b/rankings.json")).unwrap()
    );

    let dash = tmp.path().join("dash");
    let bundle = export_dashboard(&out.out, &dash, &DashboardConfig::default()).unwrap();
    assert_eq!(read_dashboard(&dash).unwrap(), bundle);
}

#[test]
fn missing_input_halts_at_clean() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(&tmp.path().join("absent"), &tmp.path().join("out"));
    let err = run_pipeline(&cfg).unwrap_err();
    assert_eq!(err.stage, Stage::Clean);
    assert!(err.to_string().starts_with("stage:clean"), "{err}");
    assert_eq!(err.exit_code(), 3);
}

#[test]
fn invalid_config_halts_before_any_stage() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = small_config(&tmp.path().join("raw"), &tmp.path().join("out"));
    cfg.eval.folds = 1;
    let err = run_pipeline(&cfg).unwrap_err();
    assert_eq!(err.stage, Stage::Config);
    assert_eq!(err.exit_code(), 2);
}

/// Artifacts with `n` platforms scored at one month; `P00000` and `P00001`
/// share a tag set no one else has and hold the two best scores.
fn scored_artifacts(dir: &Path, n: usize) -> Month {
    let gen = GeneratorConfig { n_platforms: n, horizon_months: 8, ..GeneratorConfig::default() };
    let mut platforms = generate_universe(&gen).unwrap().platforms;
    let cutoff = gen.start.offset(gen.horizon_months as i32 * 2 / 3);
    let shared = platforms[0].static_categorical.clone();
    for p in platforms.iter_mut().take(2) {
        p.static_categorical = shared.clone();
        p.static_categorical.insert("tags".into(), CategoryValue::Many(vec!["tag_only_us".into()]));
    }
    write_dataset(&dir.join("clean"), &Dataset::new(platforms.clone()).unwrap()).unwrap();
    let mut online: Vec<_> = platforms.iter().filter(|p| p.online_month <= cutoff).collect();
    online.sort_by(|a, b| a.id.cmp(&b.id));
    assert_eq!(online.len(), n);
    let rankings: Vec<RankedPlatform> = online
        .iter()
        .enumerate()
        .map(|(i, p)| RankedPlatform { rank: i + 1, platform_id: p.id.clone(), score: 1.0 - i as f64 / (2 * n) as f64 })
        .collect();
    write_json(
        &dir.join("rankings.json"),
        &RankingsFile { schema_version: SCHEMA_VERSION, months: vec![MonthRanking { cutoff_month: cutoff, rankings }] },
    )
    .unwrap();
    write_json(&dir.join("reports.json"), &ReportsFile { schema_version: SCHEMA_VERSION, reports: vec![] }).unwrap();
    cutoff
}

#[test]
fn dashboard_keeps_the_top_hundred() {
    let tmp = tempfile::tempdir().unwrap();
    scored_artifacts(tmp.path(), 250);
    let b = export_dashboard(tmp.path(), &tmp.path().join("dash"), &DashboardConfig::default()).unwrap();
    assert_eq!(b.rankings.latest().unwrap().rankings.len(), 100);
    assert_eq!(b.platforms.platforms.len(), 100);
    assert_eq!(b.series.series.len(), 100);
    assert!(b.related.related.iter().all(|r| r.similar.len() == 5));
    let first = &b.related.related[0];
    assert_eq!(first.platform_id, "P00000");
    assert_eq!(first.similar[0].platform_id, "P00001");
    assert_eq!(first.similar[0].jaccard, 1.0);
    assert_eq!(first.tags, ["tag_only_us"]);
}

#[test]
fn dashboard_limit_zero_is_empty_but_valid() {
    let tmp = tempfile::tempdir().unwrap();
    scored_artifacts(tmp.path(), 30);
    let dash = tmp.path().join("dash");
    let b = export_dashboard(tmp.path(), &dash, &DashboardConfig { limit: 0, ..DashboardConfig::default() }).unwrap();
    assert!(b.rankings.months.iter().all(|m| m.rankings.is_empty()));
    assert!(b.platforms.platforms.is_empty());
    assert_eq!(read_dashboard(&dash).unwrap(), b);
}

#[test]
fn dashboard_with_fewer_platforms_than_the_limit_exports_all() {
    let tmp = tempfile::tempdir().unwrap();
    scored_artifacts(tmp.path(), 30);
    let b = export_dashboard(tmp.path(), &tmp.path().join("dash"), &DashboardConfig::default()).unwrap();
    assert_eq!(b.platforms.platforms.len(), 30);
}

#[test]
fn corrupted_bundle_is_rejected_on_read() {
    let tmp = tempfile::tempdir().unwrap();
    scored_artifacts(tmp.path(), 30);
    let dash = tmp.path().join("dash");
    export_dashboard(tmp.path(), &dash, &DashboardConfig { limit: 10, ..DashboardConfig::default() }).unwrap();

    let path = dash.join(PLATFORMS_FILE);
    let mut v: serde_json::Value = serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
    v["platforms"].as_array_mut().unwrap().remove(0);
    fs::write(&path, v.to_string()).unwrap();
    assert!(matches!(read_dashboard(&dash), Err(Error::Schema(_))));

    let path = dash.join(RELATED_FILE);
    let mut v: serde_json::Value = serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
    v["schema_version"] = 99.into();
    fs::write(&path, v.to_string()).unwrap();
    assert!(matches!(read_dashboard(&dash), Err(Error::Schema(_))));
}
