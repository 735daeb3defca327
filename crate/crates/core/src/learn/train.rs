use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::ca::Grid;
use crate::learn::dataset::Dataset;
use crate::learn::model::{CellModel, EVAL_CHUNK};
use crate::nn::loss::{bce_loss, bce_value};
use crate::nn::{NetworkSpec, Optimizer, OptimizerConfig, Tensor};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub optimizer: OptimizerConfig,
    /// Seeds the per-epoch shuffle.
    pub seed: u64,
    /// Recorded for manifests; the architecture itself is chosen by `build_model`.
    pub bypass_endpoints: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { epochs: 50, batch_size: 32, optimizer: OptimizerConfig::adam(1e-3), seed: 0, bypass_endpoints: false }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be at least 1".into()));
        }
        self.optimizer.validate()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub test_loss: f64,
    pub cell_accuracy: f64,
    pub exact_grid_rate: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainHistory {
    pub records: Vec<EpochRecord>,
}

impl TrainHistory {
    pub fn last(&self) -> Option<&EpochRecord> {
        self.records.last()
    }

    pub const CSV_HEADER: &'static str = "epoch,train_loss,test_loss,cell_accuracy,exact_grid_rate";

    /// One row per epoch, reals with 9 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for r in &self.records {
            out.push_str(&format!(
                "{},{:.8e},{:.8e},{:.8e},{:.8e}\n",
                r.epoch, r.train_loss, r.test_loss, r.cell_accuracy, r.exact_grid_rate
            ));
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<TrainHistory> {
        let mut lines = text.lines();
        if lines.next().map(str::trim) != Some(Self::CSV_HEADER) {
            return Err(Error::Parse("missing history CSV header".into()));
        }
        let mut records = Vec::new();
        for (i, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let fields: Vec<&str> = line.split(',').collect();
            let bad = || Error::Parse(format!("history row {}: {line:?}", i + 1));
            if fields.len() != 5 {
                return Err(bad());
            }
            let real = |s: &str| s.trim().parse::<f64>().map_err(|_| bad());
            records.push(EpochRecord {
                epoch: fields[0].trim().parse().map_err(|_| bad())?,
                train_loss: real(fields[1])?,
                test_loss: real(fields[2])?,
                cell_accuracy: real(fields[3])?,
                exact_grid_rate: real(fields[4])?,
            });
        }
        Ok(TrainHistory { records })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Evaluation {
    pub cell_accuracy: f64,
    pub exact_grid_rate: f64,
    pub mean_loss: f64,
}

/// Thresholded per-cell accuracy, fraction of grids reproduced exactly, and
/// mean BCE over `pairs`.
pub fn evaluate(model: &dyn CellModel, pairs: &[(Grid, Grid)]) -> Result<Evaluation> {
    if pairs.is_empty() {
        return Err(Error::Config("cannot evaluate on an empty dataset".into()));
    }
    let (mut correct, mut cells, mut exact, mut loss_sum) = (0usize, 0usize, 0usize, 0.0);
    for chunk in pairs.chunks(EVAL_CHUNK) {
        let input = Tensor::from_grids(chunk.iter().map(|(a, _)| a))?;
        let target = Tensor::from_grids(chunk.iter().map(|(_, b)| b))?;
        let probs = model.probabilities(&input)?;
        loss_sum += bce_value(&probs, &target)? * chunk.len() as f64;
        let per = target.len() / chunk.len();
        for (p, t) in probs.data().chunks_exact(per).zip(target.data().chunks_exact(per)) {
            let hits = p.iter().zip(t).filter(|(&p, &t)| (p > 0.5) == (t > 0.5)).count();
            correct += hits;
            cells += per;
            exact += (hits == per) as usize;
        }
    }
    Ok(Evaluation {
        cell_accuracy: correct as f64 / cells as f64,
        exact_grid_rate: exact as f64 / pairs.len() as f64,
        mean_loss: loss_sum / pairs.len() as f64,
    })
}

/// Holds the network, optimizer and shuffle stream of one training run.
pub struct Trainer {
    pub network: NetworkSpec,
    optimizer: Optimizer,
    config: TrainConfig,
    rng: ChaCha8Rng,
}

impl Trainer {
    pub fn new(network: NetworkSpec, config: TrainConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            network,
            optimizer: Optimizer::new(config.optimizer)?,
            config,
            rng: ChaCha8Rng::seed_from_u64(config.seed),
        })
    }

    /// One optimizer step on a batch; returns the batch loss before the update.
    pub fn step(&mut self, input: &Tensor, target: &Tensor) -> Result<f64> {
        let (prediction, cache) = self.network.forward(input)?;
        let (loss, grad) = bce_loss(&prediction, target)?;
        if !loss.is_finite() {
            return Err(Error::NonFinite { epoch: 0, batch: 0 });
        }
        let grads = self.network.backward(&cache, &grad)?;
        self.optimizer.step_network(&mut self.network, &grads)?;
        Ok(loss)
    }

    /// Shuffled batch order for the next epoch.
    pub fn epoch_order(&mut self, len: usize) -> Vec<usize> {
        let mut order: Vec<usize> = (0..len).collect();
        order.shuffle(&mut self.rng);
        order
    }

    /// One epoch over `train`; returns the sample-weighted mean loss.
    pub fn run_epoch(&mut self, train: &[(Grid, Grid)], epoch: usize) -> Result<f64> {
        let order = self.epoch_order(train.len());
        let mut total = 0.0;
        for (batch_idx, batch) in order.chunks(self.config.batch_size).enumerate() {
            let input = Tensor::from_grids(batch.iter().map(|&i| &train[i].0))?;
            let target = Tensor::from_grids(batch.iter().map(|&i| &train[i].1))?;
            let loss = self.step(&input, &target).map_err(|e| match e {
                Error::NonFinite { .. } => Error::NonFinite { epoch, batch: batch_idx },
                other => other,
            })?;
            total += loss * batch.len() as f64;
        }
        Ok(total / train.len() as f64)
    }
}

/// Mini-batch BCE training on `train`, evaluating on `test` after every epoch.
pub fn train_on(
    model: NetworkSpec,
    train: &[(Grid, Grid)],
    test: &[(Grid, Grid)],
    config: &TrainConfig,
) -> Result<(TrainHistory, NetworkSpec)> {
    if train.is_empty() || test.is_empty() {
        return Err(Error::Config("training needs non-empty train and test splits".into()));
    }
    let mut trainer = Trainer::new(model, *config)?;
    let mut history = TrainHistory::default();
    for epoch in 1..=config.epochs {
        let train_loss = trainer.run_epoch(train, epoch)?;
        let eval = evaluate(&trainer.network, test)?;
        history.records.push(EpochRecord {
            epoch,
            train_loss,
            test_loss: eval.mean_loss,
            cell_accuracy: eval.cell_accuracy,
            exact_grid_rate: eval.exact_grid_rate,
        });
    }
    Ok((history, trainer.network))
}

/// Trains on the leading part of `dataset`, holding out the last
/// `holdout_fraction` for the per-epoch metrics.
pub fn train(
    model: NetworkSpec,
    dataset: &Dataset,
    config: &TrainConfig,
    holdout_fraction: f64,
) -> Result<(TrainHistory, NetworkSpec)> {
    let (train_pairs, test_pairs) = dataset.split(holdout_fraction)?;
    train_on(model, train_pairs, test_pairs, config)
}
