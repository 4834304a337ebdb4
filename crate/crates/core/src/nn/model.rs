//! The multi-branch risk network.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::layers::{bce_with_logit, dropout_mask, sigmoid, Activation, Conv1dMaxPool, ConvCache, Dense, DenseCache, Embedding, Lstm, LstmCache};
use crate::domain::FeatureBundle;
use crate::error::{bail, Result};
use crate::tensor::Tensor;

/// Layer widths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NetConfig {
    pub static_layers: usize,
    pub branch_units: usize,
    pub embedding_dim: usize,
    pub conv_filters: usize,
    pub conv_width: usize,
    pub lstm_hidden: usize,
    pub fusion_units: usize,
    pub hidden_units: usize,
}

impl Default for NetConfig {
    fn default() -> Self {
        NetConfig {
            static_layers: 2,
            branch_units: 16,
            embedding_dim: 32,
            conv_filters: 16,
            conv_width: 3,
            lstm_hidden: 16,
            fusion_units: 16,
            hidden_units: 64,
        }
    }
}

/// Input sizes the network is built for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputDims {
    /// Static numeric features plus graph features.
    pub static_num: usize,
    pub cat_fields: usize,
    pub cat_vocab: usize,
    pub window: usize,
    pub index_channels: usize,
    pub news_channels: usize,
    pub comment_channels: usize,
}

impl InputDims {
    pub fn of(bundle: &FeatureBundle) -> Self {
        InputDims {
            static_num: bundle.x_s_num.len() + bundle.kg_vec.len(),
            cat_fields: bundle.x_s_cat.rows(),
            cat_vocab: bundle.x_s_cat.cols(),
            window: bundle.x_di.rows(),
            index_channels: bundle.x_di.cols(),
            news_channels: bundle.x_dn.cols(),
            comment_channels: bundle.x_dc.cols(),
        }
    }
}

/// One network input, flattened from a (scaled) feature bundle.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelInput {
    pub static_num: Vec<f64>,
    pub static_cat: Tensor,
    pub index: Tensor,
    pub news: Tensor,
    pub comments: Tensor,
}

impl ModelInput {
    pub fn from_bundle(b: &FeatureBundle) -> Self {
        let mut static_num = b.x_s_num.clone();
        static_num.extend_from_slice(&b.kg_vec);
        ModelInput {
            static_num,
            static_cat: b.x_s_cat.clone(),
            index: b.x_di.clone(),
            news: b.x_dn.clone(),
            comments: b.x_dc.clone(),
        }
    }
}

/// Category of a parameter block, used to group gradient checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LayerKind {
    Dense,
    Conv1dMaxPool,
    Lstm,
    Embedding,
    Fusion,
    Head,
}

/// A named contiguous slice of the parameter vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamGroup {
    pub name: String,
    pub kind: LayerKind,
    pub offset: usize,
    pub len: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OmniRank {
    pub config: NetConfig,
    pub dims: InputDims,
    static_num: Vec<Dense>,
    embedding: Embedding,
    cat_conv: Conv1dMaxPool,
    index_lstm: Lstm,
    news_lstm: Lstm,
    news_conv: Conv1dMaxPool,
    comment_lstm: Lstm,
    comment_conv: Conv1dMaxPool,
    fuse_static: Dense,
    fuse_numeric: Dense,
    fuse_text: Dense,
    hidden: Dense,
    output: Dense,
    n_params: usize,
}

/// Forward or training mode.
pub enum Mode<'a> {
    Eval,
    Train { dropout: f64, rng: &'a mut ChaCha8Rng },
}

/// Intermediate values kept for the backward pass.
pub struct Trace {
    static_num: Vec<DenseCache>,
    cat_conv: ConvCache,
    index_lstm: LstmCache,
    news_lstm: LstmCache,
    news_conv: ConvCache,
    comment_lstm: LstmCache,
    comment_conv: ConvCache,
    in_static: Vec<f64>,
    in_numeric: Vec<f64>,
    in_text: Vec<f64>,
    fuse_static: DenseCache,
    fuse_numeric: DenseCache,
    fuse_text: DenseCache,
    joint: Vec<f64>,
    hidden: DenseCache,
    mask: Vec<f64>,
    dropped: Vec<f64>,
    output: DenseCache,
    pub logit: f64,
    pub score: f64,
}

fn concat(parts: &[&[f64]]) -> Vec<f64> {
    parts.iter().flat_map(|p| p.iter().copied()).collect()
}

fn add_into(dst: &mut [f64], src: &[f64]) {
    dst.iter_mut().zip(src).for_each(|(a, b)| *a += b);
}

impl OmniRank {
    pub fn new(dims: InputDims, config: NetConfig) -> Result<Self> {
        if dims.window == 0 {
            bail!(Config, "window length must be positive");
        }
        if dims.cat_fields == 0 || dims.cat_vocab == 0 {
            bail!(Shape, "categorical input must be non-empty, got {}x{}", dims.cat_fields, dims.cat_vocab);
        }
        let c = &config;
        if c.static_layers == 0
            || [c.branch_units, c.embedding_dim, c.conv_filters, c.conv_width, c.lstm_hidden, c.fusion_units, c.hidden_units].contains(&0)
        {
            bail!(Config, "network widths must be positive");
        }
        let mut off = 0usize;
        let mut take = |n: usize| {
            let o = off;
            off += n;
            o
        };
        let mut static_num = Vec::new();
        let mut width = dims.static_num;
        for _ in 0..c.static_layers {
            let l = Dense::new(width, c.branch_units, Activation::Relu, 0);
            let l = Dense { offset: take(l.param_count()), ..l };
            width = c.branch_units;
            static_num.push(l);
        }
        macro_rules! place {
            ($e:expr) => {{
                let mut l = $e;
                l.offset = take(l.param_count());
                l
            }};
        }
        let embedding = place!(Embedding::new(dims.cat_vocab, c.embedding_dim, 0));
        let cat_conv = place!(Conv1dMaxPool::new(c.embedding_dim, c.conv_filters, c.conv_width, 0));
        let index_lstm = place!(Lstm::new(dims.index_channels, c.lstm_hidden, 0));
        let news_lstm = place!(Lstm::new(dims.news_channels, c.lstm_hidden, 0));
        let news_conv = place!(Conv1dMaxPool::new(dims.news_channels, c.conv_filters, c.conv_width, 0));
        let comment_lstm = place!(Lstm::new(dims.comment_channels, c.lstm_hidden, 0));
        let comment_conv = place!(Conv1dMaxPool::new(dims.comment_channels, c.conv_filters, c.conv_width, 0));
        let text = c.lstm_hidden + c.conv_filters;
        let fuse_static = place!(Dense::new(c.branch_units + c.conv_filters, c.fusion_units, Activation::Relu, 0));
        let fuse_numeric = place!(Dense::new(c.branch_units + c.lstm_hidden, c.fusion_units, Activation::Relu, 0));
        let fuse_text = place!(Dense::new(2 * text, c.fusion_units, Activation::Relu, 0));
        let joint = c.branch_units + c.conv_filters + c.lstm_hidden + 2 * text + 3 * c.fusion_units;
        let hidden = place!(Dense::new(joint, c.hidden_units, Activation::Relu, 0));
        let output = place!(Dense::new(c.hidden_units, 1, Activation::Identity, 0));
        Ok(OmniRank {
            config,
            dims,
            static_num,
            embedding,
            cat_conv,
            index_lstm,
            news_lstm,
            news_conv,
            comment_lstm,
            comment_conv,
            fuse_static,
            fuse_numeric,
            fuse_text,
            hidden,
            output,
            n_params: off,
        })
    }

    pub fn n_params(&self) -> usize {
        self.n_params
    }

    /// Width of the concatenated vector fed to the head.
    pub fn joint_width(&self) -> usize {
        self.hidden.inputs
    }

    pub fn init_params(&self, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = vec![0.0; self.n_params];
        for l in &self.static_num {
            l.init(&mut p, &mut rng);
        }
        self.embedding.init(&mut p, &mut rng);
        self.cat_conv.init(&mut p, &mut rng);
        self.index_lstm.init(&mut p, &mut rng);
        self.news_lstm.init(&mut p, &mut rng);
        self.news_conv.init(&mut p, &mut rng);
        self.comment_lstm.init(&mut p, &mut rng);
        self.comment_conv.init(&mut p, &mut rng);
        for l in [&self.fuse_static, &self.fuse_numeric, &self.fuse_text, &self.hidden, &self.output] {
            l.init(&mut p, &mut rng);
        }
        p
    }

    /// Sets the output layer to zero so every prediction is exactly 0.5.
    pub fn zero_head(&self, params: &mut [f64]) {
        params[self.output.offset..self.output.offset + self.output.param_count()].fill(0.0);
    }

    pub fn param_groups(&self) -> Vec<ParamGroup> {
        let mut g = Vec::new();
        let mut push = |name: &str, kind, offset, len| {
            g.push(ParamGroup { name: name.to_string(), kind, offset, len })
        };
        for (i, l) in self.static_num.iter().enumerate() {
            push(&format!("static_num.{i}"), LayerKind::Dense, l.offset, l.param_count());
        }
        push("embedding", LayerKind::Embedding, self.embedding.offset, self.embedding.param_count());
        for (name, l) in [("cat_conv", &self.cat_conv), ("news_conv", &self.news_conv), ("comment_conv", &self.comment_conv)] {
            push(name, LayerKind::Conv1dMaxPool, l.offset, l.param_count());
        }
        for (name, l) in [("index_lstm", &self.index_lstm), ("news_lstm", &self.news_lstm), ("comment_lstm", &self.comment_lstm)] {
            push(name, LayerKind::Lstm, l.offset, l.param_count());
        }
        for (name, l) in [("fuse_static", &self.fuse_static), ("fuse_numeric", &self.fuse_numeric), ("fuse_text", &self.fuse_text)] {
            push(name, LayerKind::Fusion, l.offset, l.param_count());
        }
        push("hidden", LayerKind::Dense, self.hidden.offset, self.hidden.param_count());
        push("output", LayerKind::Head, self.output.offset, self.output.param_count());
        g
    }

    pub fn check_input(&self, x: &ModelInput) -> Result<()> {
        let d = &self.dims;
        let ok = x.static_num.len() == d.static_num
            && x.static_cat.shape() == [d.cat_fields, d.cat_vocab]
            && x.index.shape() == [d.window, d.index_channels]
            && x.news.shape() == [d.window, d.news_channels]
            && x.comments.shape() == [d.window, d.comment_channels];
        if !ok {
            bail!(
                Shape,
                "input does not match network dims {:?}: static {}, cat {:?}, index {:?}, news {:?}, comments {:?}",
                d,
                x.static_num.len(),
                x.static_cat.shape(),
                x.index.shape(),
                x.news.shape(),
                x.comments.shape()
            );
        }
        Ok(())
    }

    /// Runs the network; inputs are assumed shape-checked.
    pub fn forward(&self, params: &[f64], x: &ModelInput, mode: Mode<'_>) -> Trace {
        let t = self.dims.window;
        let mut static_num = Vec::with_capacity(self.static_num.len());
        let mut v = x.static_num.clone();
        for l in &self.static_num {
            let c = l.forward(params, &v);
            v = c.out.clone();
            static_num.push(c);
        }
        let a_num = v;

        let rows = self.dims.cat_fields;
        let embedded = self.embedding.forward(params, x.static_cat.data(), rows);
        let cat_conv = self.cat_conv.forward(params, &embedded, rows);
        let a_cat = cat_conv.out.clone();

        let index_lstm = self.index_lstm.forward(params, x.index.data(), t);
        let news_lstm = self.news_lstm.forward(params, x.news.data(), t);
        let news_conv = self.news_conv.forward(params, x.news.data(), t);
        let comment_lstm = self.comment_lstm.forward(params, x.comments.data(), t);
        let comment_conv = self.comment_conv.forward(params, x.comments.data(), t);
        let a_idx = index_lstm.output();
        let a_news = concat(&[news_lstm.output(), &news_conv.out]);
        let a_comments = concat(&[comment_lstm.output(), &comment_conv.out]);

        let in_static = concat(&[&a_num, &a_cat]);
        let in_numeric = concat(&[&a_num, a_idx]);
        let in_text = concat(&[&a_news, &a_comments]);
        let fuse_static = self.fuse_static.forward(params, &in_static);
        let fuse_numeric = self.fuse_numeric.forward(params, &in_numeric);
        let fuse_text = self.fuse_text.forward(params, &in_text);

        let joint = concat(&[
            &a_num,
            &a_cat,
            a_idx,
            &a_news,
            &a_comments,
            &fuse_static.out,
            &fuse_numeric.out,
            &fuse_text.out,
        ]);
        let hidden = self.hidden.forward(params, &joint);
        let mask = match mode {
            Mode::Eval => vec![1.0; hidden.out.len()],
            Mode::Train { dropout, rng } => dropout_mask(hidden.out.len(), dropout, rng),
        };
        let dropped: Vec<f64> = hidden.out.iter().zip(&mask).map(|(a, m)| a * m).collect();
        let output = self.output.forward(params, &dropped);
        let logit = output.out[0];
        Trace {
            static_num,
            cat_conv,
            index_lstm,
            news_lstm,
            news_conv,
            comment_lstm,
            comment_conv,
            in_static,
            in_numeric,
            in_text,
            fuse_static,
            fuse_numeric,
            fuse_text,
            joint,
            hidden,
            mask,
            dropped,
            output,
            logit,
            score: sigmoid(logit),
        }
    }

    /// Gradient of the loss w.r.t. all parameters given `d loss / d logit`,
    /// accumulated into `grad`.
    pub fn backward(&self, params: &[f64], x: &ModelInput, tr: &Trace, dlogit: f64, grad: &mut [f64]) {
        let c = &self.config;
        let t = self.dims.window;
        let d_dropped = self.output.backward(params, &tr.dropped, &tr.output, &[dlogit], grad);
        let d_hidden: Vec<f64> = d_dropped.iter().zip(&tr.mask).map(|(a, m)| a * m).collect();
        let d_joint = self.hidden.backward(params, &tr.joint, &tr.hidden, &d_hidden, grad);

        let (bu, cf, lh, fu) = (c.branch_units, c.conv_filters, c.lstm_hidden, c.fusion_units);
        let text = lh + cf;
        let mut at = 0usize;
        let mut take = |n: usize| {
            let s = d_joint[at..at + n].to_vec();
            at += n;
            s
        };
        let mut d_num = take(bu);
        let mut d_cat = take(cf);
        let mut d_idx = take(lh);
        let mut d_news = take(text);
        let mut d_comments = take(text);
        let d_fs = take(fu);
        let d_fn = take(fu);
        let d_ft = take(fu);

        let g = self.fuse_static.backward(params, &tr.in_static, &tr.fuse_static, &d_fs, grad);
        add_into(&mut d_num, &g[..bu]);
        add_into(&mut d_cat, &g[bu..]);
        let g = self.fuse_numeric.backward(params, &tr.in_numeric, &tr.fuse_numeric, &d_fn, grad);
        add_into(&mut d_num, &g[..bu]);
        add_into(&mut d_idx, &g[bu..]);
        let g = self.fuse_text.backward(params, &tr.in_text, &tr.fuse_text, &d_ft, grad);
        add_into(&mut d_news, &g[..text]);
        add_into(&mut d_comments, &g[text..]);

        self.comment_conv.backward(params, t, &tr.comment_conv, &d_comments[lh..], grad);
        self.comment_lstm.backward(params, x.comments.data(), &tr.comment_lstm, &d_comments[..lh], grad);
        self.news_conv.backward(params, t, &tr.news_conv, &d_news[lh..], grad);
        self.news_lstm.backward(params, x.news.data(), &tr.news_lstm, &d_news[..lh], grad);
        self.index_lstm.backward(params, x.index.data(), &tr.index_lstm, &d_idx, grad);

        let rows = self.dims.cat_fields;
        let d_emb = self.cat_conv.backward(params, rows, &tr.cat_conv, &d_cat, grad);
        self.embedding.backward(params, x.static_cat.data(), rows, &d_emb, grad);

        let mut d = d_num;
        for (i, l) in self.static_num.iter().enumerate().rev() {
            let input = if i == 0 { &x.static_num } else { &tr.static_num[i - 1].out };
            d = l.backward(params, input, &tr.static_num[i], &d, grad);
        }
    }

    /// Loss of one example and its gradient (accumulated into `grad`).
    pub fn loss_and_grad(&self, params: &[f64], x: &ModelInput, target: f64, mode: Mode<'_>, grad: &mut [f64]) -> f64 {
        let tr = self.forward(params, x, mode);
        let (loss, dz) = bce_with_logit(tr.logit, target);
        self.backward(params, x, &tr, dz, grad);
        loss
    }

    /// Deterministic loss of one example.
    pub fn loss(&self, params: &[f64], x: &ModelInput, target: f64) -> f64 {
        bce_with_logit(self.forward(params, x, Mode::Eval).logit, target).0
    }

    pub fn predict(&self, params: &[f64], x: &ModelInput) -> f64 {
        self.forward(params, x, Mode::Eval).score
    }
}

/// A random input of the given dims, for tests and benchmarks. Categorical
/// rows are one-hot; sequences have the first `empty_rows` rows zeroed.
pub fn random_input<R: Rng>(dims: &InputDims, empty_rows: usize, rng: &mut R) -> ModelInput {
    let mut seq = |c: usize| {
        let mut t = Tensor::zeros(&[dims.window, c]);
        for i in empty_rows.min(dims.window)..dims.window {
            for v in t.row_mut(i) {
                *v = rng.random_range(-1.5..1.5);
            }
        }
        t
    };
    let index = seq(dims.index_channels);
    let news = seq(dims.news_channels);
    let comments = seq(dims.comment_channels);
    let mut static_cat = Tensor::zeros(&[dims.cat_fields, dims.cat_vocab]);
    for r in 0..dims.cat_fields {
        static_cat.set2(r, rng.random_range(0..dims.cat_vocab), 1.0);
    }
    ModelInput {
        static_num: (0..dims.static_num).map(|_| rng.random_range(-2.0..2.0)).collect(),
        static_cat,
        index,
        news,
        comments,
    }
}
