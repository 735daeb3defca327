//! Searching for a network `N` that commutes with a frozen evolution `B`.
//!
//! The training signal compares `N(B(x))` against the label `B(thr(N(x)))`,
//! the second branch computed with the current weights but held constant,
//! so gradients flow only through `N(B(x))`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::ca::{random_grid_with, Grid, Phase, EdgeMode};
use crate::learn::dataset::DEFAULT_DENSITY;
use crate::learn::model::{build_model, CellModel, GridMap, EVAL_CHUNK};
use crate::learn::train::{EpochRecord, TrainConfig, TrainHistory, Trainer};
use crate::nn::loss::bce_value;
use crate::nn::{NetworkSpec, Tensor};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CommuteConfig {
    pub n: usize,
    pub train_grids: usize,
    pub test_grids: usize,
    /// Seeds the random initialisation of `N`.
    pub init_seed: u64,
    /// Seeds the input grids.
    pub data_seed: u64,
    pub train: TrainConfig,
}

impl Default for CommuteConfig {
    fn default() -> Self {
        Self { n: 16, train_grids: 8000, test_grids: 1000, init_seed: 0, data_seed: 0, train: TrainConfig::default() }
    }
}

impl CommuteConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.n % 2 != 0 {
            return Err(Error::InvalidSide(self.n));
        }
        if self.train_grids == 0 || self.test_grids == 0 {
            return Err(Error::Config("commute experiment needs train and test grids".into()));
        }
        self.train.validate()
    }

    /// Training and held-out input grids.
    pub fn grids(&self) -> Result<(Vec<Grid>, Vec<Grid>)> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.data_seed);
        let mut all = (0..self.train_grids + self.test_grids)
            .map(|_| random_grid_with(self.n, DEFAULT_DENSITY, &mut rng))
            .collect::<Result<Vec<_>>>()?;
        let test = all.split_off(self.train_grids);
        Ok((all, test))
    }
}

/// Inputs `B(x)` and labels `B(thr(N(x)))` for one batch of grids.
fn commute_batch(n_model: &dyn CellModel, b: &dyn GridMap, grids: &[Grid]) -> Result<(Tensor, Tensor)> {
    let input = Tensor::from_grids(&b.map_grids(grids)?)?;
    let label = Tensor::from_grids(&b.map_grids(&n_model.map_grids(grids)?)?)?;
    Ok((input, label))
}

/// Mean BCE between `N(B(x))` and `B(thr(N(x)))` over `grids`.
pub fn commutation_loss(n_model: &dyn CellModel, b: &dyn GridMap, grids: &[Grid]) -> Result<f64> {
    if grids.is_empty() {
        return Err(Error::Config("no grids to measure commutation on".into()));
    }
    let mut sum = 0.0;
    for chunk in grids.chunks(EVAL_CHUNK) {
        let (input, label) = commute_batch(n_model, b, chunk)?;
        sum += bce_value(&n_model.probabilities(&input)?, &label)? * chunk.len() as f64;
    }
    Ok(sum / grids.len() as f64)
}

/// Fraction of cells where the two maps disagree.
pub fn disagreement(a: &dyn GridMap, b: &dyn GridMap, grids: &[Grid]) -> Result<f64> {
    let (ya, yb) = (a.map_grids(grids)?, b.map_grids(grids)?);
    let mut differ = 0usize;
    let mut total = 0usize;
    for (p, q) in ya.iter().zip(&yb) {
        differ += p.cells().iter().zip(q.cells()).filter(|(x, y)| x != y).count();
        total += p.cells().len();
    }
    if total == 0 {
        return Err(Error::Config("no cells to compare".into()));
    }
    Ok(differ as f64 / total as f64)
}

/// Per-epoch record: commutation losses, and the fraction of cells/grids on
/// which `thr(N(B(x))) = B(thr(N(x)))` holds on the held-out grids.
fn commute_record(network: &NetworkSpec, b: &dyn GridMap, test: &[Grid], epoch: usize, train_loss: f64) -> Result<EpochRecord> {
    let mut loss = 0.0;
    let (mut hits, mut cells, mut exact) = (0usize, 0usize, 0usize);
    for chunk in test.chunks(EVAL_CHUNK) {
        let (input, label) = commute_batch(network, b, chunk)?;
        let probs = network.probabilities(&input)?;
        loss += bce_value(&probs, &label)? * chunk.len() as f64;
        for (p, l) in probs.to_grids()?.iter().zip(label.to_grids()?) {
            let same = p.cells().iter().zip(l.cells()).filter(|(x, y)| x == y).count();
            hits += same;
            cells += p.cells().len();
            exact += (same == p.cells().len()) as usize;
        }
    }
    Ok(EpochRecord {
        epoch,
        train_loss,
        test_loss: loss / test.len() as f64,
        cell_accuracy: hits as f64 / cells as f64,
        exact_grid_rate: exact as f64 / test.len() as f64,
    })
}

/// Trains `network` towards commuting with `b`.
pub fn commute_experiment_from(
    network: NetworkSpec,
    b: &dyn GridMap,
    config: &CommuteConfig,
) -> Result<(TrainHistory, NetworkSpec)> {
    config.validate()?;
    let (train, test) = config.grids()?;
    let mut trainer = Trainer::new(network, config.train)?;
    let mut history = TrainHistory::default();
    for epoch in 1..=config.train.epochs {
        let order = trainer.epoch_order(train.len());
        let mut total = 0.0;
        for (batch_idx, idx) in order.chunks(config.train.batch_size).enumerate() {
            let batch: Vec<Grid> = idx.iter().map(|&i| train[i].clone()).collect();
            let (input, label) = commute_batch(&trainer.network, b, &batch)?;
            let loss = trainer.step(&input, &label).map_err(|e| match e {
                Error::NonFinite { .. } => Error::NonFinite { epoch, batch: batch_idx },
                other => other,
            })?;
            total += loss * batch.len() as f64;
        }
        history.records.push(commute_record(&trainer.network, b, &test, epoch, total / train.len() as f64)?);
    }
    Ok((history, trainer.network))
}

/// Trains a randomly initialised Aligned-architecture network towards
/// commuting with `b`.
pub fn commute_experiment(b: &dyn GridMap, config: &CommuteConfig) -> Result<(TrainHistory, NetworkSpec)> {
    let network = build_model(Phase::Aligned, EdgeMode::TorusWrap, config.train.bypass_endpoints, config.init_seed);
    commute_experiment_from(network, b, config)
}

#[derive(Clone, Debug, PartialEq)]
pub struct CandidateResult {
    pub name: String,
    pub passed: usize,
    pub trials: usize,
}

impl CandidateResult {
    pub fn commutes(&self) -> bool {
        self.passed == self.trials
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CommuteReport {
    pub candidates: Vec<CandidateResult>,
    /// Commuting candidates that are pairwise distinct as maps on the sampled grids.
    pub distinct_commuters: usize,
}

impl CommuteReport {
    pub fn non_unique(&self) -> bool {
        self.distinct_commuters >= 2
    }

    pub fn summary(&self) -> String {
        let mut out = String::new();
        for c in &self.candidates {
            let verdict = if c.commutes() { "commutes" } else { "fails" };
            out.push_str(&format!("{}: {}/{} {verdict}\n", c.name, c.passed, c.trials));
        }
        out.push_str(&format!("distinct_commuters: {}\n", self.distinct_commuters));
        out.push_str(&format!("non_unique: {}\n", self.non_unique()));
        out
    }
}

/// Checks `N(B(x)) = B(N(x))` exactly on `trials` random `n×n` grids for each
/// named candidate, and counts extensionally distinct commuters.
pub fn verify_commuting_solutions(
    b: &dyn GridMap,
    candidates: &[(&str, &dyn GridMap)],
    n: usize,
    trials: usize,
    seed: u64,
) -> Result<CommuteReport> {
    if trials == 0 {
        return Err(Error::Config("need at least one trial".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let grids = (0..trials).map(|_| random_grid_with(n, DEFAULT_DENSITY, &mut rng)).collect::<Result<Vec<_>>>()?;
    let bx = b.map_grids(&grids)?;
    let mut results = Vec::new();
    let mut signatures: Vec<Vec<Grid>> = Vec::new();
    for (name, cand) in candidates {
        let nbx = cand.map_grids(&bx)?;
        let nx = cand.map_grids(&grids)?;
        let bnx = b.map_grids(&nx)?;
        let passed = nbx.iter().zip(&bnx).filter(|(p, q)| p == q).count();
        if passed == trials && !signatures.contains(&nx) {
            signatures.push(nx);
        }
        results.push(CandidateResult { name: name.to_string(), passed, trials });
    }
    Ok(CommuteReport { candidates: results, distinct_commuters: signatures.len() })
}
