use serde::{Deserialize, Serialize};

use super::features::{FeatureSpec, VIEW_FEATURES};
use super::data::{Split, TrainingPair};
use crate::error::{Error, Result};
use crate::nn::{read_params, relu_backward, relu_inplace, sigmoid, write_params, Adam, Layout, Linear};
use crate::rng;
use rand::seq::SliceRandom;

const GRID_H1: usize = 128;
const GRID_H2: usize = 64;
const VIEW_H: usize = 64;
const HEAD_H: usize = 64;
const KIND: &str = "surrogate";

/// Small two-branch network predicting post-view coverage.
///
/// Grid features pass through two rectified layers, view features through
/// one; the concatenation feeds one rectified layer and a sigmoid output.
#[derive(Debug, Clone, PartialEq)]
pub struct Surrogate {
    pub spec: FeatureSpec,
    pub layout: Layout,
    pub params: Vec<f64>,
    g1: Linear,
    g2: Linear,
    v1: Linear,
    h1: Linear,
    out: Linear,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SurrogateHyper {
    pub lr: f64,
    pub epochs: usize,
    pub batch: usize,
    pub seed: u64,
}

impl Default for SurrogateHyper {
    fn default() -> Self {
        SurrogateHyper {
            lr: 5e-4,
            epochs: 100,
            batch: 64,
            seed: 0,
        }
    }
}

/// Loss history of a training run. Index 0 of `eval_loss` is the loss at
/// initialization; entry `e` is after epoch `e`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub train_loss: Vec<f64>,
    pub eval_loss: Vec<f64>,
    /// Epoch of the returned checkpoint (0 = initialization).
    pub best_epoch: usize,
}

impl TrainReport {
    pub fn best_eval(&self) -> f64 {
        self.eval_loss[self.best_epoch]
    }
}

struct Cache {
    a1: Vec<f64>,
    a2: Vec<f64>,
    av: Vec<f64>,
    cat: Vec<f64>,
    ah: Vec<f64>,
    y: f64,
}

impl Surrogate {
    fn with_layout(spec: FeatureSpec) -> Self {
        let mut layout = Layout::default();
        let g1 = Linear::declare(&mut layout, "grid1", spec.len(), GRID_H1);
        let g2 = Linear::declare(&mut layout, "grid2", GRID_H1, GRID_H2);
        let v1 = Linear::declare(&mut layout, "view1", VIEW_FEATURES, VIEW_H);
        let h1 = Linear::declare(&mut layout, "head1", GRID_H2 + VIEW_H, HEAD_H);
        let out = Linear::declare(&mut layout, "out", HEAD_H, 1);
        let params = vec![0.0; layout.len];
        Surrogate {
            spec,
            layout,
            params,
            g1,
            g2,
            v1,
            h1,
            out,
        }
    }

    pub fn new(spec: FeatureSpec, seed: u64) -> Self {
        let mut s = Self::with_layout(spec);
        let mut r = rng::stream(seed, 0x5C0E);
        for l in [s.g1, s.g2, s.v1, s.h1, s.out] {
            l.init(&mut s.params, &mut r);
        }
        s
    }

    pub fn layers(&self) -> [(&'static str, Linear); 5] {
        [("grid1", self.g1), ("grid2", self.g2), ("view1", self.v1), ("head1", self.h1), ("out", self.out)]
    }

    /// Output of the grid branch, reusable across viewpoints.
    pub fn grid_embedding(&self, feats: &[f64]) -> Vec<f64> {
        let p = &self.params;
        let mut a1 = vec![0.0; GRID_H1];
        self.g1.forward(p, feats, &mut a1);
        relu_inplace(&mut a1);
        let mut a2 = vec![0.0; GRID_H2];
        self.g2.forward(p, &a1, &mut a2);
        relu_inplace(&mut a2);
        a2
    }

    pub fn predict_embedded(&self, emb: &[f64], view: &[f64; VIEW_FEATURES]) -> f64 {
        let p = &self.params;
        let mut av = vec![0.0; VIEW_H];
        self.v1.forward(p, view, &mut av);
        relu_inplace(&mut av);
        let mut cat = Vec::with_capacity(GRID_H2 + VIEW_H);
        cat.extend_from_slice(emb);
        cat.extend_from_slice(&av);
        let mut ah = vec![0.0; HEAD_H];
        self.h1.forward(p, &cat, &mut ah);
        relu_inplace(&mut ah);
        let mut z = [0.0];
        self.out.forward(p, &ah, &mut z);
        sigmoid(z[0])
    }

    pub fn predict(&self, feats: &[f64], view: &[f64; VIEW_FEATURES]) -> f64 {
        self.predict_embedded(&self.grid_embedding(feats), view)
    }

    fn forward_cached(&self, feats: &[f64], view: &[f64; VIEW_FEATURES]) -> Cache {
        let p = &self.params;
        let mut a1 = vec![0.0; GRID_H1];
        self.g1.forward(p, feats, &mut a1);
        relu_inplace(&mut a1);
        let mut a2 = vec![0.0; GRID_H2];
        self.g2.forward(p, &a1, &mut a2);
        relu_inplace(&mut a2);
        let mut av = vec![0.0; VIEW_H];
        self.v1.forward(p, view, &mut av);
        relu_inplace(&mut av);
        let mut cat = a2.clone();
        cat.extend_from_slice(&av);
        let mut ah = vec![0.0; HEAD_H];
        self.h1.forward(p, &cat, &mut ah);
        relu_inplace(&mut ah);
        let mut z = [0.0];
        self.out.forward(p, &ah, &mut z);
        Cache {
            a1,
            a2,
            av,
            cat,
            ah,
            y: sigmoid(z[0]),
        }
    }

    /// Mean squared error over `batch` and its gradient, accumulated into
    /// `grad` (which is not cleared).
    pub fn loss_and_grad(&self, batch: &[(&[f64], &[f64; VIEW_FEATURES], f64)], grad: &mut [f64]) -> f64 {
        let p = &self.params;
        let n = batch.len() as f64;
        let mut loss = 0.0;
        let mut d_ah = vec![0.0; HEAD_H];
        let mut d_cat = vec![0.0; GRID_H2 + VIEW_H];
        let mut d_a1 = vec![0.0; GRID_H1];
        for (feats, view, label) in batch {
            let c = self.forward_cached(feats, view);
            let err = c.y - label;
            loss += err * err / n;
            let dz = [2.0 * err / n * c.y * (1.0 - c.y)];
            self.out.backward(p, &c.ah, &dz, grad, Some(&mut d_ah));
            relu_backward(&c.ah, &mut d_ah);
            self.h1.backward(p, &c.cat, &d_ah, grad, Some(&mut d_cat));
            let (d_a2, d_av) = d_cat.split_at_mut(GRID_H2);
            relu_backward(&c.av, d_av);
            self.v1.backward(p, &view[..], d_av, grad, None);
            relu_backward(&c.a2, d_a2);
            self.g2.backward(p, &c.a1, d_a2, grad, Some(&mut d_a1));
            relu_backward(&c.a1, &mut d_a1);
            self.g1.backward(p, feats, &d_a1, grad, None);
        }
        loss
    }

    pub fn mse<'p>(&self, pairs: impl IntoIterator<Item = &'p TrainingPair>) -> f64 {
        let (mut s, mut n) = (0.0, 0usize);
        for pr in pairs {
            let e = self.predict(&pr.features, &pr.view) - pr.label;
            s += e * e;
            n += 1;
        }
        if n == 0 {
            0.0
        } else {
            s / n as f64
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        let meta = serde_json::json!({ "blocks": self.spec.blocks });
        write_params(&mut buf, KIND, &meta, &self.layout, &self.params).expect("writing to memory");
        buf
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let f = read_params(&mut &bytes[..])?;
        if f.kind != KIND {
            return Err(Error::Format(format!("expected {KIND} parameters, found {}", f.kind)));
        }
        let spec = FeatureSpec {
            blocks: serde_json::from_value(f.meta["blocks"].clone())?,
        };
        let mut s = Self::with_layout(spec);
        f.check_layout(&s.layout)?;
        s.params = f.values;
        Ok(s)
    }
}

/// Fits a surrogate to the training split of `pairs` with Adam on mean
/// squared error and returns the checkpoint with the lowest loss on the
/// evaluation split (the training split when no pair is held out).
pub fn train_surrogate(pairs: &[TrainingPair], spec: FeatureSpec, hyper: &SurrogateHyper) -> Result<(Surrogate, TrainReport)> {
    if pairs.len() < 2 {
        return Err(Error::EmptyInput("training pairs (need at least 2)"));
    }
    if hyper.batch == 0 || !(hyper.lr > 0.0) {
        return Err(Error::InvalidConfig("batch size and learning rate must be positive".into()));
    }
    if let Some(p) = pairs.iter().find(|p| p.features.len() != spec.len()) {
        return Err(Error::ShapeMismatch(format!(
            "pair has {} grid features, model expects {}",
            p.features.len(),
            spec.len()
        )));
    }
    let train: Vec<&TrainingPair> = pairs.iter().filter(|p| p.split == Split::Train).collect();
    let mut eval: Vec<&TrainingPair> = pairs.iter().filter(|p| p.split == Split::Eval).collect();
    if train.is_empty() {
        return Err(Error::EmptyInput("training split"));
    }
    if eval.is_empty() {
        eval = train.clone();
    }

    let mut model = Surrogate::new(spec, hyper.seed);
    let mut opt = Adam::new(model.params.len(), hyper.lr);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut shuffle = rng::stream(hyper.seed, 0x5F1E);
    let mut grad = vec![0.0; model.params.len()];
    let mut report = TrainReport {
        train_loss: vec![model.mse(train.iter().copied())],
        eval_loss: vec![model.mse(eval.iter().copied())],
        best_epoch: 0,
    };
    let mut best = model.params.clone();
    for epoch in 1..=hyper.epochs {
        order.shuffle(&mut shuffle);
        let mut total = 0.0;
        for chunk in order.chunks(hyper.batch) {
            let batch: Vec<_> = chunk
                .iter()
                .map(|&i| (train[i].features.as_slice(), &train[i].view, train[i].label))
                .collect();
            grad.iter_mut().for_each(|g| *g = 0.0);
            let loss = model.loss_and_grad(&batch, &mut grad);
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss {
                    epoch,
                    detail: format!("batch loss {loss}"),
                });
            }
            total += loss * chunk.len() as f64;
            opt.step(&mut model.params, &grad);
        }
        let eval_loss = model.mse(eval.iter().copied());
        if !eval_loss.is_finite() {
            return Err(Error::NonFiniteLoss {
                epoch,
                detail: "evaluation loss".into(),
            });
        }
        report.train_loss.push(total / train.len() as f64);
        report.eval_loss.push(eval_loss);
        if eval_loss < report.eval_loss[report.best_epoch] {
            report.best_epoch = epoch;
            best.copy_from_slice(&model.params);
        }
        log::debug!("surrogate epoch {epoch}: train {:.6} eval {eval_loss:.6}", total / train.len() as f64);
    }
    model.params = best;
    Ok((model, report))
}
