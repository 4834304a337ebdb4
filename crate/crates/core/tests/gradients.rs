use omnirank_core::nn::model::{random_input, LayerKind, ParamGroup};
use omnirank_core::nn::{grad_check, grad_check_fn, InputDims, NetConfig, OmniRank};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const EPS: f64 = 1e-5;
const TOL: f64 = 1e-4;

fn dims() -> InputDims {
    InputDims {
        static_num: 7,
        cat_fields: 4,
        cat_vocab: 23,
        window: 12,
        index_channels: 7,
        news_channels: 8,
        comment_channels: 4,
    }
}

/// Initial weights plus noise so that no bias sits exactly on a ReLU kink.
fn jittered(model: &OmniRank, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    model.init_params(seed).into_iter().map(|p| p + rng.random_range(-0.05..0.05)).collect()
}

#[test]
fn full_network_matches_finite_differences() {
    let model = OmniRank::new(dims(), NetConfig::default()).unwrap();
    let params = jittered(&model, 11);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for (target, empty_rows) in [(1.0, 0), (0.0, 4)] {
        let x = random_input(&dims(), empty_rows, &mut rng);
        let report = grad_check(&model, &params, &x, target, EPS, 200, 17).unwrap();
        for g in &report.groups {
            assert!(g.checked >= 200.min(model.param_groups().iter().find(|p| p.name == g.name).unwrap().len));
        }
        report.ensure(TOL).unwrap();
        for kind in [
            LayerKind::Dense,
            LayerKind::Conv1dMaxPool,
            LayerKind::Lstm,
            LayerKind::Embedding,
            LayerKind::Fusion,
            LayerKind::Head,
        ] {
            assert!(report.kind_max(kind).unwrap() < TOL, "{kind:?}");
        }
    }
}

#[test]
fn corrupted_gradient_names_the_layer() {
    let model = OmniRank::new(dims(), NetConfig::default()).unwrap();
    let params = jittered(&model, 3);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let x = random_input(&dims(), 0, &mut rng);
    let mut grad = vec![0.0; params.len()];
    model.loss_and_grad(&params, &x, 1.0, omnirank_core::nn::model::Mode::Eval, &mut grad);
    let groups = model.param_groups();
    let lstm: &ParamGroup = groups.iter().find(|g| g.name == "news_lstm").unwrap();
    for g in &mut grad[lstm.offset..lstm.offset + lstm.len] {
        *g = *g * 1.5 + 0.01;
    }
    let report = grad_check_fn(|p| model.loss(p, &x, 1.0), &params, &grad, &groups, EPS, 50, 2);
    let failures: Vec<&str> = report.failures(TOL).iter().map(|g| g.name.as_str()).collect();
    assert_eq!(failures, ["news_lstm"]);
}
