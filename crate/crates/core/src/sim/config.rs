use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::learner::SyntheticSpec;
use crate::value::AssessPolicy;

/// A config value that fails validation, named by its JSON path.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid config field `{field}`: {reason}")]
pub struct ConfigError {
    pub field: String,
    pub reason: String,
}

impl ConfigError {
    pub fn new(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Self {
            field: field.into(),
            reason: reason.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Every sample goes to the cloud unexamined.
    BaselineAll,
    /// The edge forwards samples by the entropy threshold rule.
    Cognitive,
    /// The edge forwards a uniformly random subset, sized to match Cognitive.
    RandomFilter,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::BaselineAll, Mode::RandomFilter, Mode::Cognitive];

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::BaselineAll => "baseline_all",
            Mode::Cognitive => "cognitive",
            Mode::RandomFilter => "random_filter",
        }
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Link {
    /// Capacity per tick; packets that do not fit wait for the next tick.
    pub bits_per_tick: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Topology {
    pub n_devices: u32,
    pub device_edge: Link,
    pub edge_cloud: Link,
}

impl Default for Topology {
    fn default() -> Self {
        Self {
            n_devices: 5,
            device_edge: Link {
                bits_per_tick: 1_000_000_000,
            },
            edge_cloud: Link {
                bits_per_tick: 1_000_000_000,
            },
        }
    }
}

/// Linear energy model: joules per bit sent and per sample processed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnergyModel {
    pub e_tx_device_edge: f64,
    pub e_tx_edge_cloud: f64,
    pub e_assess: f64,
    pub e_train: f64,
}

impl Default for EnergyModel {
    fn default() -> Self {
        Self {
            e_tx_device_edge: 5e-8,
            e_tx_edge_cloud: 2e-7,
            e_assess: 1e-4,
            e_train: 5e-4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CloudUpdate {
    /// One self-training step per round on that round's deliveries.
    #[default]
    Incremental,
    /// Retrain from the initial model on labeled data plus every delivery so far.
    FullRetrain,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LearnerConfig {
    /// 0 selects softmax regression.
    pub hidden_units: usize,
    pub pretrain_epochs: usize,
    pub lr: f64,
    pub batch: usize,
    pub self_train_lr: f64,
    pub self_train_epochs: usize,
    pub cloud_update: CloudUpdate,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        Self {
            hidden_units: 0,
            pretrain_epochs: 30,
            lr: 0.1,
            batch: 32,
            self_train_lr: 0.02,
            self_train_epochs: 1,
            cloud_update: CloudUpdate::Incremental,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConvergenceConfig {
    pub window: usize,
    pub epsilon: f64,
}

impl Default for ConvergenceConfig {
    fn default() -> Self {
        Self {
            window: 5,
            epsilon: 0.002,
        }
    }
}

fn default_policy() -> AssessPolicy {
    AssessPolicy {
        threshold: 1.0,
        polarity: Default::default(),
    }
}

/// One experiment. Field names are the JSON config keys.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub mode: Mode,
    pub seed: u64,
    pub rounds: u32,
    /// Mailboxes each device emits per round.
    pub batch_per_round: u32,
    pub dataset: SyntheticSpec,
    #[serde(default)]
    pub topology: Topology,
    #[serde(default = "default_policy")]
    pub policy: AssessPolicy,
    #[serde(default)]
    pub energy: EnergyModel,
    #[serde(default)]
    pub learner: LearnerConfig,
    #[serde(default)]
    pub convergence: ConvergenceConfig,
    /// Cap on edge-to-cloud bytes over the whole run.
    #[serde(default)]
    pub byte_budget: Option<u64>,
    /// Per-round acceptance counts for `random_filter`. When absent they
    /// are taken from a `cognitive` run of the same config.
    #[serde(default)]
    pub random_filter_counts: Option<Vec<u32>>,
    /// Value assigned to each mailbox when a device creates it.
    #[serde(default)]
    pub intrinsic_value: f64,
}

impl SimConfig {
    /// The reference experiment: 4 classes in 8 dimensions, 200 labeled
    /// samples, a 5000-sample unlabeled stream over 50 rounds.
    pub fn reference() -> Self {
        Self {
            mode: Mode::Cognitive,
            seed: 1,
            rounds: 50,
            batch_per_round: 20,
            dataset: SyntheticSpec {
                classes: 4,
                dim: 8,
                n_labeled: 200,
                n_unlabeled: 5000,
                n_test: 2000,
                noise: REFERENCE_NOISE,
            },
            topology: Topology::default(),
            policy: default_policy(),
            energy: EnergyModel::default(),
            learner: LearnerConfig::default(),
            convergence: ConvergenceConfig::default(),
            byte_budget: None,
            random_filter_counts: None,
            intrinsic_value: 0.0,
        }
    }

    pub fn samples_per_round(&self) -> usize {
        self.topology.n_devices as usize * self.batch_per_round as usize
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let err = |f: &str, r: &str| Err(ConfigError::new(f, r));
        let d = &self.dataset;
        if d.classes < 2 {
            return err("dataset.classes", "must be at least 2");
        }
        if d.dim < 2 {
            return err("dataset.dim", "must be at least 2");
        }
        if d.dim > u16::MAX as usize {
            return err("dataset.dim", "must fit in 16 bits");
        }
        if d.n_labeled == 0 {
            return err("dataset.n_labeled", "must be positive");
        }
        if d.n_test == 0 {
            return err("dataset.n_test", "must be positive");
        }
        if !d.noise.is_finite() || d.noise < 0.0 {
            return err("dataset.noise", "must be finite and non-negative");
        }
        if self.rounds == 0 {
            return err("rounds", "must be positive");
        }
        if self.batch_per_round == 0 {
            return err("batch_per_round", "must be positive");
        }
        if self.topology.n_devices == 0 {
            return err("topology.n_devices", "must be positive");
        }
        let needed = self.rounds as usize * self.samples_per_round();
        if d.n_unlabeled < needed {
            return Err(ConfigError::new(
                "dataset.n_unlabeled",
                format!("must be at least rounds x n_devices x batch_per_round = {needed}"),
            ));
        }
        if self.topology.device_edge.bits_per_tick == 0 {
            return err("topology.device_edge.bits_per_tick", "must be positive");
        }
        if self.topology.edge_cloud.bits_per_tick == 0 {
            return err("topology.edge_cloud.bits_per_tick", "must be positive");
        }
        if !self.policy.threshold.is_finite() || self.policy.threshold < 0.0 {
            return err("policy.threshold", "must be finite and non-negative");
        }
        for (name, v) in [
            ("energy.e_tx_device_edge", self.energy.e_tx_device_edge),
            ("energy.e_tx_edge_cloud", self.energy.e_tx_edge_cloud),
            ("energy.e_assess", self.energy.e_assess),
            ("energy.e_train", self.energy.e_train),
        ] {
            if !v.is_finite() || v < 0.0 {
                return err(name, "must be finite and non-negative");
            }
        }
        let l = &self.learner;
        if l.batch == 0 {
            return err("learner.batch", "must be positive");
        }
        for (name, v) in [("learner.lr", l.lr), ("learner.self_train_lr", l.self_train_lr)] {
            if !v.is_finite() || v < 0.0 {
                return err(name, "must be finite and non-negative");
            }
        }
        if self.convergence.window == 0 {
            return err("convergence.window", "must be positive");
        }
        if !self.convergence.epsilon.is_finite() || self.convergence.epsilon <= 0.0 {
            return err("convergence.epsilon", "must be finite and positive");
        }
        if !self.intrinsic_value.is_finite() {
            return err("intrinsic_value", "must be finite");
        }
        if let Some(counts) = &self.random_filter_counts {
            if counts.len() != self.rounds as usize {
                return err("random_filter_counts", "must have one entry per round");
            }
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON encoding, hex.
    pub fn hash(&self) -> String {
        use sha2::{Digest, Sha256};
        let json = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(json))
    }
}

/// Gaussian noise of the reference dataset, chosen so that pre-training on
/// 200 labeled samples lands near 0.75 test accuracy.
pub const REFERENCE_NOISE: f64 = 0.405;
