//! Text key=value manifests written next to every experiment output.

use std::fmt::Display;

use crate::ca::{Direction, EdgeMode, Phase};
use crate::learn::commute::CommuteConfig;
use crate::learn::train::TrainConfig;
use crate::nn::Algorithm;
use crate::{Error, Result};

pub fn direction_name(d: Direction) -> &'static str {
    match d {
        Direction::Forward => "fwd",
        Direction::Backward => "bwd",
    }
}

pub fn phase_name(p: Phase) -> &'static str {
    match p {
        Phase::Aligned => "aligned",
        Phase::Offset => "offset",
    }
}

pub fn edge_name(e: EdgeMode) -> &'static str {
    match e {
        EdgeMode::TorusWrap => "torus",
        EdgeMode::ZeroPadCrop => "pad",
    }
}

/// Ordered key=value lines; insertion order is preserved so output is stable.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Manifest {
    entries: Vec<(String, String)>,
}

impl Manifest {
    pub fn new(command: &str) -> Self {
        let mut m = Self::default();
        m.set("command", command);
        m
    }

    /// Adds or replaces `key`.
    pub fn set(&mut self, key: &str, value: impl Display) -> &mut Self {
        let value = value.to_string();
        match self.entries.iter_mut().find(|(k, _)| k == key) {
            Some(entry) => entry.1 = value,
            None => self.entries.push((key.to_string(), value)),
        }
        self
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn entries(&self) -> &[(String, String)] {
        &self.entries
    }

    pub fn train_config(&mut self, config: &TrainConfig) -> &mut Self {
        let o = &config.optimizer;
        self.set("epochs", config.epochs)
            .set("batch_size", config.batch_size)
            .set("optimizer", match o.algorithm {
                Algorithm::Sgd => "sgd",
                Algorithm::Adam => "adam",
            })
            .set("learning_rate", o.learning_rate)
            .set("beta1", o.beta1)
            .set("beta2", o.beta2)
            .set("epsilon", o.epsilon)
            .set("shuffle_seed", config.seed)
            .set("bypass_endpoints", config.bypass_endpoints)
    }

    pub fn commute_config(&mut self, config: &CommuteConfig) -> &mut Self {
        self.set("n", config.n)
            .set("train_grids", config.train_grids)
            .set("test_grids", config.test_grids)
            .set("init_seed", config.init_seed)
            .set("data_seed", config.data_seed)
            .train_config(&config.train)
    }

    pub fn to_text(&self) -> String {
        self.entries.iter().map(|(k, v)| format!("{k}={v}\n")).collect()
    }

    pub fn parse(text: &str) -> Result<Manifest> {
        let mut m = Manifest::default();
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse(format!("manifest line without '=': {line:?}")))?;
            m.set(k.trim(), v.trim());
        }
        Ok(m)
    }
}
