use std::io::{BufRead, Write};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::model::{TokenSequence, VpConfig, VpFormer};
use crate::error::{Error, Result};
use crate::nn::Adam;
use crate::rng;

/// One expert episode: the initial token followed by one token per
/// executed viewpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub scene_seed: u64,
    pub sequence: TokenSequence,
}

impl Trajectory {
    /// Teacher-forcing pair: input prefix (at most `max_len` tokens) and the
    /// viewpoint that followed each input token. `None` below two tokens.
    pub fn teacher_forcing(&self, max_len: usize) -> Option<(TokenSequence, Vec<[f64; 7]>)> {
        let n = (self.sequence.len().checked_sub(1)?).min(max_len);
        if n == 0 {
            return None;
        }
        let mut input = self.sequence.clone();
        input.tokens.truncate(n);
        let targets = self.sequence.tokens[1..=n].iter().map(|t| t.viewpoint.canonical().to_vec7()).collect();
        Some((input, targets))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ExpertDataset {
    pub trajectories: Vec<Trajectory>,
}

impl ExpertDataset {
    pub fn write_jsonl(&self, w: &mut impl Write) -> Result<()> {
        for t in &self.trajectories {
            serde_json::to_writer(&mut *w, t)?;
            w.write_all(b"\n").map_err(|e| Error::io("<trajectories>", e))?;
        }
        Ok(())
    }

    pub fn read_jsonl(r: impl BufRead) -> Result<Self> {
        let mut trajectories = Vec::new();
        for line in r.lines() {
            let line = line.map_err(|e| Error::io("<trajectories>", e))?;
            if !line.trim().is_empty() {
                trajectories.push(serde_json::from_str(&line)?);
            }
        }
        Ok(ExpertDataset { trajectories })
    }

    pub fn len(&self) -> usize {
        self.trajectories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trajectories.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BcHyper {
    pub lr: f64,
    pub epochs: usize,
    /// Trajectories per optimizer step.
    pub batch: usize,
    /// Share of trajectories held out, taken from the end.
    pub eval_fraction: f64,
    pub seed: u64,
}

impl Default for BcHyper {
    fn default() -> Self {
        BcHyper {
            lr: 5e-4,
            epochs: 100,
            batch: 64,
            eval_fraction: 0.2,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BcReport {
    /// Index 0 is the loss at initialization.
    pub train_loss: Vec<f64>,
    pub eval_loss: Vec<f64>,
    pub best_epoch: usize,
}

impl BcReport {
    pub fn best_eval(&self) -> f64 {
        self.eval_loss[self.best_epoch]
    }
}

pub type Example = (TokenSequence, Vec<[f64; 7]>);

/// Mean squared viewpoint error over every position of every example, and
/// its gradient accumulated into `grad`.
pub fn bc_loss_and_grad(model: &VpFormer, batch: &[&Example], grad: &mut [f64]) -> Result<f64> {
    let total: usize = batch.iter().map(|(_, t)| t.len()).sum();
    let norm = 1.0 / (7 * total.max(1)) as f64;
    let mut loss = 0.0;
    for (seq, targets) in batch {
        let tr = model.forward_trace(seq)?;
        let mut dy = vec![[0.0; 7]; targets.len()];
        for ((y, t), g) in tr.y.iter().zip(targets.iter()).zip(&mut dy) {
            for a in 0..7 {
                let e = y[a] - t[a];
                loss += e * e * norm;
                g[a] = 2.0 * e * norm;
            }
        }
        model.backward(&tr, &seq.bounds, &dy, grad);
    }
    Ok(loss)
}

pub fn bc_mse(model: &VpFormer, examples: &[&Example]) -> Result<f64> {
    let total: usize = examples.iter().map(|(_, t)| t.len()).sum();
    if total == 0 {
        return Ok(0.0);
    }
    let mut s = 0.0;
    for (seq, targets) in examples {
        for (y, t) in model.forward_all(seq)?.iter().zip(targets.iter()) {
            s += (0..7).map(|a| (y[a] - t[a]).powi(2)).sum::<f64>();
        }
    }
    Ok(s / (7 * total) as f64)
}

/// Behavior cloning with teacher forcing. Returns the checkpoint with the
/// lowest held-out loss.
pub fn train_bc(dataset: &ExpertDataset, cfg: VpConfig, hyper: &BcHyper) -> Result<(VpFormer, BcReport)> {
    let examples: Vec<Example> = dataset.trajectories.iter().filter_map(|t| t.teacher_forcing(cfg.max_len)).collect();
    if examples.len() < 2 {
        return Err(Error::EmptyInput("expert trajectories (need at least 2 with a move)"));
    }
    if hyper.batch == 0 || !(hyper.lr > 0.0) {
        return Err(Error::InvalidConfig("batch size and learning rate must be positive".into()));
    }
    let n_eval = ((examples.len() as f64 * hyper.eval_fraction).round() as usize).min(examples.len() - 1);
    let (train, eval) = examples.split_at(examples.len() - n_eval);
    let train: Vec<&Example> = train.iter().collect();
    let eval: Vec<&Example> = if eval.is_empty() { train.clone() } else { eval.iter().collect() };

    let mut model = VpFormer::new(cfg, hyper.seed)?;
    let mut opt = Adam::new(model.params.len(), hyper.lr);
    let mut grad = vec![0.0; model.params.len()];
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut shuffle = rng::stream(hyper.seed, 0xBC5F);
    let mut report = BcReport {
        train_loss: vec![bc_mse(&model, &train)?],
        eval_loss: vec![bc_mse(&model, &eval)?],
        best_epoch: 0,
    };
    let mut best = model.params.clone();
    for epoch in 1..=hyper.epochs {
        order.shuffle(&mut shuffle);
        let mut total = 0.0;
        let mut steps = 0;
        for chunk in order.chunks(hyper.batch) {
            let batch: Vec<&Example> = chunk.iter().map(|&i| train[i]).collect();
            grad.iter_mut().for_each(|g| *g = 0.0);
            let loss = bc_loss_and_grad(&model, &batch, &mut grad)?;
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss {
                    epoch,
                    detail: format!("batch loss {loss}"),
                });
            }
            total += loss;
            steps += 1;
            opt.step(&mut model.params, &grad);
        }
        let eval_loss = bc_mse(&model, &eval)?;
        if !eval_loss.is_finite() {
            return Err(Error::NonFiniteLoss {
                epoch,
                detail: "evaluation loss".into(),
            });
        }
        report.train_loss.push(total / steps as f64);
        report.eval_loss.push(eval_loss);
        if eval_loss < report.eval_loss[report.best_epoch] {
            report.best_epoch = epoch;
            best.copy_from_slice(&model.params);
        }
        log::debug!("bc epoch {epoch}: train {:.6} eval {eval_loss:.6}", total / steps as f64);
    }
    model.params = best;
    Ok((model, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vpformer::model::tests::{random_sequence, tiny_config};

    fn dataset(n: usize, len: usize, distinct: bool) -> ExpertDataset {
        let cfg = tiny_config();
        ExpertDataset {
            trajectories: (0..n)
                .map(|i| Trajectory {
                    scene_seed: i as u64,
                    sequence: random_sequence(&cfg, len, if distinct { i as u64 } else { 0 }),
                })
                .collect(),
        }
    }

    #[test]
    fn teacher_forcing_shifts_by_one() {
        let t = &dataset(1, 4, false).trajectories[0];
        let (input, targets) = t.teacher_forcing(8).unwrap();
        assert_eq!(input.len(), 3);
        assert_eq!(targets.len(), 3);
        for (i, target) in targets.iter().enumerate() {
            assert_eq!(*target, t.sequence.tokens[i + 1].viewpoint.canonical().to_vec7());
            assert!(target[3] >= 0.0);
        }
        let (capped, targets) = t.teacher_forcing(2).unwrap();
        assert_eq!((capped.len(), targets.len()), (2, 2));
        let single = Trajectory {
            scene_seed: 0,
            sequence: random_sequence(&tiny_config(), 1, 0),
        };
        assert!(single.teacher_forcing(8).is_none());
    }

    #[test]
    fn memorizes_a_constant_trajectory() {
        let data = dataset(6, 4, false);
        let hyper = BcHyper {
            lr: 1e-2,
            epochs: 300,
            batch: 4,
            eval_fraction: 0.2,
            seed: 2,
        };
        let (model, report) = train_bc(&data, tiny_config(), &hyper).unwrap();
        assert!(report.best_eval() < 1e-3, "best {} of {:?}", report.best_eval(), &report.eval_loss[..5]);
        let ex = data.trajectories[0].teacher_forcing(8).unwrap();
        assert!(bc_mse(&model, &[&ex]).unwrap() < 1e-3);
    }

    #[test]
    fn training_is_deterministic_and_keeps_the_best_checkpoint() {
        let data = dataset(5, 3, true);
        let hyper = BcHyper {
            epochs: 5,
            batch: 2,
            ..BcHyper::default()
        };
        let (a, ra) = train_bc(&data, tiny_config(), &hyper).unwrap();
        let (b, rb) = train_bc(&data, tiny_config(), &hyper).unwrap();
        assert_eq!(a, b);
        assert_eq!(ra, rb);
        assert_eq!(ra.eval_loss.len(), 6);
        assert!(ra.eval_loss.iter().all(|&l| l >= ra.best_eval()));
    }

    #[test]
    fn rejects_unusable_datasets() {
        let hyper = BcHyper::default();
        assert!(matches!(train_bc(&dataset(1, 3, false), tiny_config(), &hyper), Err(Error::EmptyInput(_))));
        assert!(train_bc(&dataset(4, 1, false), tiny_config(), &hyper).is_err());
        let zero = BcHyper { batch: 0, ..hyper };
        assert!(train_bc(&dataset(4, 3, false), tiny_config(), &zero).is_err());
    }

    #[test]
    fn dataset_round_trips_through_jsonl() {
        let data = dataset(3, 3, true);
        let mut buf = Vec::new();
        data.write_jsonl(&mut buf).unwrap();
        assert_eq!(buf.iter().filter(|&&b| b == b'\n').count(), 3);
        let back = ExpertDataset::read_jsonl(&buf[..]).unwrap();
        assert_eq!(back, data);
        assert!(ExpertDataset::read_jsonl(&b"{not json"[..]).is_err());
    }
}
