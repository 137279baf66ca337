use std::collections::VecDeque;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use super::config::{CloudUpdate, ConfigError, Mode, SimConfig};
use super::events::EventQueue;
use super::metrics::{MetricsReport, RoundRecord};
use crate::codec::{self, CodecError};
use crate::learner::{self, evaluate, gen_synthetic, train, Dataset, LearnerError, Model, Sample, TrainConfig};
use crate::mailbox::{InfoPayload, Mailbox, MailboxError, Tick};
use crate::value::{assess, assessment_annotation, Decision};

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{link} link carries {capacity} bits per tick but a packet needs {packet_bits}")]
    LinkTooSmall {
        link: &'static str,
        packet_bits: u64,
        capacity: u64,
    },
    #[error("codec: {0}")]
    Codec(#[from] CodecError),
    #[error("mailbox: {0}")]
    Mailbox(#[from] MailboxError),
    #[error("learner: {0}")]
    Learner(#[from] LearnerError),
}

/// Mixes a stream id into the experiment seed (splitmix64 finalizer).
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

const STREAM_INIT: u64 = 1;
const STREAM_PRETRAIN: u64 = 2;
const STREAM_FILTER: u64 = 3;
const STREAM_ROUND: u64 = 0x100;

/// Node id the edge uses when it annotates.
pub fn edge_node_id(cfg: &SimConfig) -> u32 {
    cfg.topology.n_devices
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Event {
    Emit(u32),
    DeviceLink(u32),
    Assess(u32),
    CloudLink(u32),
    CloudUpdate(u32),
    Sync(u32),
}

/// Supervised pre-training shared by every mode.
pub fn pretrain(cfg: &SimConfig, data: &Dataset) -> Result<(Model, Model), LearnerError> {
    let l = &cfg.learner;
    let initial = Model::new(
        data.classes,
        data.dim,
        l.hidden_units,
        derive_seed(cfg.seed, STREAM_INIT),
    );
    let tc = TrainConfig {
        epochs: l.pretrain_epochs,
        lr: l.lr,
        batch: l.batch,
        seed: derive_seed(cfg.seed, STREAM_PRETRAIN),
    };
    let trained = train(&initial, &data.labeled, &tc)?;
    Ok((initial, trained))
}

struct World<'a> {
    cfg: &'a SimConfig,
    data: Dataset,
    initial: Model,
    cloud: Model,
    edge: Model,
    next_sample: usize,
    device_queue: VecDeque<Vec<u8>>,
    at_edge: Vec<Vec<u8>>,
    edge_queue: VecDeque<Vec<u8>>,
    at_cloud: Vec<Vec<u8>>,
    received_pool: Vec<Vec<f64>>,
    budget_used: u64,
    filter_counts: Option<Vec<u32>>,
    filter_rng: ChaCha8Rng,
    round: RoundRecord,
    transmitted_values: Vec<f64>,
    discarded_values: Vec<f64>,
    assessed: u64,
    trained: u64,
    records: Vec<RoundRecord>,
}

fn empty_record(round: u32) -> RoundRecord {
    RoundRecord {
        round,
        bits_device_edge: 0,
        bits_edge_cloud: 0,
        energy_tx: 0.0,
        energy_compute: 0.0,
        cloud_accuracy: 0.0,
        samples_transmitted: 0,
        samples_discarded: 0,
        mean_mailbox_value: None,
        mean_discarded_value: None,
    }
}

fn mean(v: &[f64]) -> Option<f64> {
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

/// Moves packets FIFO until the next one would exceed `capacity` bits.
fn transfer(queue: &mut VecDeque<Vec<u8>>, capacity: u64, link: &'static str) -> Result<(Vec<Vec<u8>>, u64), SimError> {
    let mut sent = Vec::new();
    let mut bits = 0u64;
    while let Some(head) = queue.front() {
        let packet_bits = 8 * head.len() as u64;
        if packet_bits > capacity {
            return Err(SimError::LinkTooSmall {
                link,
                packet_bits,
                capacity,
            });
        }
        if bits + packet_bits > capacity {
            break;
        }
        bits += packet_bits;
        sent.push(queue.pop_front().unwrap());
    }
    Ok((sent, bits))
}

impl<'a> World<'a> {
    fn handle(&mut self, tick: Tick, event: Event, q: &mut EventQueue<Event>) -> Result<(), SimError> {
        let cfg = self.cfg;
        match event {
            Event::Emit(r) => {
                self.round = empty_record(r);
                for _ in 0..cfg.samples_per_round() {
                    let x = &self.data.unlabeled[self.next_sample];
                    self.next_sample += 1;
                    let payload = InfoPayload::from_sample(x, None, self.data.classes as u32)?;
                    let m = Mailbox::new(payload, cfg.intrinsic_value, tick);
                    self.device_queue.push_back(codec::encode(&m)?);
                }
                q.schedule(tick, Event::DeviceLink(r));
            }
            Event::DeviceLink(r) => {
                let cap = cfg.topology.device_edge.bits_per_tick;
                let (sent, bits) = transfer(&mut self.device_queue, cap, "device-edge")?;
                self.round.bits_device_edge += bits;
                self.at_edge = sent;
                q.schedule(tick, Event::Assess(r));
            }
            Event::Assess(r) => {
                self.assess_arrivals(r, tick)?;
                q.schedule(tick, Event::CloudLink(r));
            }
            Event::CloudLink(r) => {
                let cap = cfg.topology.edge_cloud.bits_per_tick;
                let (sent, bits) = transfer(&mut self.edge_queue, cap, "edge-cloud")?;
                self.round.bits_edge_cloud += bits;
                self.at_cloud = sent;
                q.schedule(tick, Event::CloudUpdate(r));
            }
            Event::CloudUpdate(r) => {
                self.update_cloud(r)?;
                q.schedule(tick, Event::Sync(r));
            }
            Event::Sync(r) => {
                self.edge = self.cloud.clone();
                self.close_round();
                if r < cfg.rounds {
                    q.schedule(tick + 1, Event::Emit(r + 1));
                }
            }
        }
        Ok(())
    }

    fn assess_arrivals(&mut self, r: u32, tick: Tick) -> Result<(), SimError> {
        let cfg = self.cfg;
        let arrivals = std::mem::take(&mut self.at_edge);
        let mailboxes = arrivals
            .iter()
            .map(|b| codec::decode(b))
            .collect::<Result<Vec<_>, _>>()?;

        // Mailboxes to forward, in arrival order, and the ones to drop.
        let mut forward: Vec<Mailbox> = Vec::new();
        let mut drop: Vec<Mailbox> = Vec::new();
        match cfg.mode {
            Mode::BaselineAll => forward = mailboxes,
            Mode::Cognitive => {
                for m in mailboxes {
                    let (x, _) = m.payload().sample()?;
                    let p = self.edge.predict(&x)?;
                    self.assessed += 1;
                    let annotated = m.annotate(assessment_annotation(edge_node_id(cfg), tick, &p)?)?;
                    match assess(&p, &cfg.policy).decision {
                        Decision::Transmit => forward.push(annotated),
                        Decision::Discard => drop.push(annotated),
                    }
                }
            }
            Mode::RandomFilter => {
                let target = self.filter_counts.as_ref().map_or(0, |c| c[(r - 1) as usize]) as usize;
                let n = mailboxes.len();
                let mut keep = vec![false; n];
                for i in rand::seq::index::sample(&mut self.filter_rng, n, target.min(n)) {
                    keep[i] = true;
                }
                for (m, k) in mailboxes.into_iter().zip(keep) {
                    if k {
                        forward.push(m);
                    } else {
                        drop.push(m);
                    }
                }
            }
        }

        for m in forward {
            let bytes = codec::encode(&m)?;
            let len = bytes.len() as u64;
            if let Some(budget) = cfg.byte_budget {
                if self.budget_used + len > budget {
                    drop.push(m);
                    continue;
                }
            }
            self.budget_used += len;
            self.transmitted_values.push(m.current_value());
            self.round.samples_transmitted += 1;
            self.edge_queue.push_back(bytes);
        }
        for m in drop {
            self.discarded_values.push(m.current_value());
            self.round.samples_discarded += 1;
        }
        Ok(())
    }

    fn update_cloud(&mut self, r: u32) -> Result<(), SimError> {
        let cfg = self.cfg;
        let l = &cfg.learner;
        let arrivals = std::mem::take(&mut self.at_cloud);
        let mut xs = Vec::with_capacity(arrivals.len());
        for b in &arrivals {
            let (x, _) = codec::decode(b)?.payload().sample()?;
            xs.push(x);
        }
        let round_seed = derive_seed(cfg.seed, STREAM_ROUND + u64::from(r));
        match l.cloud_update {
            CloudUpdate::Incremental => {
                let tc = TrainConfig {
                    epochs: l.self_train_epochs,
                    lr: l.self_train_lr,
                    batch: l.batch,
                    seed: round_seed,
                };
                self.cloud = learner::self_train_step(&self.cloud, &xs, &tc)?;
                self.trained += (xs.len() * l.self_train_epochs) as u64;
            }
            CloudUpdate::FullRetrain => {
                if !xs.is_empty() {
                    self.received_pool.extend(xs);
                    let mut set: Vec<Sample> = self.data.labeled.clone();
                    for x in &self.received_pool {
                        set.push(Sample {
                            x: x.clone(),
                            label: self.cloud.predict(x)?.argmax(),
                        });
                    }
                    let tc = TrainConfig {
                        epochs: l.pretrain_epochs,
                        lr: l.lr,
                        batch: l.batch,
                        seed: round_seed,
                    };
                    self.cloud = train(&self.initial, &set, &tc)?;
                    self.trained += (set.len() * l.pretrain_epochs) as u64;
                }
            }
        }
        self.round.cloud_accuracy = evaluate(&self.cloud, &self.data.test)?;
        Ok(())
    }

    fn close_round(&mut self) {
        let e = &self.cfg.energy;
        let mut rec = std::mem::replace(&mut self.round, empty_record(0));
        rec.energy_tx =
            rec.bits_device_edge as f64 * e.e_tx_device_edge + rec.bits_edge_cloud as f64 * e.e_tx_edge_cloud;
        rec.energy_compute = self.assessed as f64 * e.e_assess + self.trained as f64 * e.e_train;
        rec.mean_mailbox_value = mean(&self.transmitted_values);
        rec.mean_discarded_value = mean(&self.discarded_values);
        self.transmitted_values.clear();
        self.discarded_values.clear();
        self.assessed = 0;
        self.trained = 0;
        self.records.push(rec);
    }
}

/// Runs one experiment to completion.
///
/// Each round (one tick): devices emit mailboxes, the device-edge link
/// carries what fits, the edge filters by mode, the edge-cloud link carries
/// what fits, the cloud self-trains and is evaluated, and the edge copies
/// the cloud model.
pub fn run_experiment(cfg: &SimConfig) -> Result<MetricsReport, SimError> {
    cfg.validate()?;
    let filter_counts = match (cfg.mode, &cfg.random_filter_counts) {
        (Mode::RandomFilter, Some(c)) => Some(c.clone()),
        (Mode::RandomFilter, None) => Some(matched_counts(cfg)?),
        _ => None,
    };

    let data = gen_synthetic(&cfg.dataset, cfg.seed)?;
    let (initial, pretrained) = pretrain(cfg, &data)?;
    let pretrain_accuracy = evaluate(&pretrained, &data.test)?;

    let mut world = World {
        cfg,
        data,
        initial,
        edge: pretrained.clone(),
        cloud: pretrained,
        next_sample: 0,
        device_queue: VecDeque::new(),
        at_edge: Vec::new(),
        edge_queue: VecDeque::new(),
        at_cloud: Vec::new(),
        received_pool: Vec::new(),
        budget_used: 0,
        filter_counts,
        filter_rng: ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, STREAM_FILTER)),
        round: empty_record(0),
        transmitted_values: Vec::new(),
        discarded_values: Vec::new(),
        assessed: 0,
        trained: 0,
        records: Vec::with_capacity(cfg.rounds as usize),
    };

    let mut q = EventQueue::new();
    q.schedule(1, Event::Emit(1));
    while let Some((tick, event)) = q.pop() {
        world.handle(tick, event, &mut q)?;
    }

    Ok(MetricsReport::from_records(
        cfg.mode,
        cfg.seed,
        pretrain_accuracy,
        cfg.convergence.window,
        cfg.convergence.epsilon,
        world.records,
    ))
}

/// Per-round transmitted counts of the cognitive run of `cfg`.
pub fn matched_counts(cfg: &SimConfig) -> Result<Vec<u32>, SimError> {
    let shadow = SimConfig {
        mode: Mode::Cognitive,
        random_filter_counts: None,
        ..cfg.clone()
    };
    let report = run_experiment(&shadow)?;
    Ok(report.records.iter().map(|r| r.samples_transmitted as u32).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    Threshold,
    ByteBudget,
}

impl SweepParam {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepParam::Threshold => "threshold",
            SweepParam::ByteBudget => "byte_budget",
        }
    }
}

impl std::str::FromStr for SweepParam {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "threshold" => Ok(SweepParam::Threshold),
            "byte_budget" => Ok(SweepParam::ByteBudget),
            other => Err(ConfigError::new("param", format!("unknown sweep parameter `{other}`"))),
        }
    }
}

/// Config for one grid point.
pub fn apply_grid_value(cfg: &SimConfig, param: SweepParam, value: f64) -> Result<SimConfig, ConfigError> {
    let mut c = cfg.clone();
    match param {
        SweepParam::Threshold => {
            if !value.is_finite() || value < 0.0 {
                return Err(ConfigError::new(
                    "grid",
                    format!("threshold {value} must be finite and non-negative"),
                ));
            }
            c.policy.threshold = value;
        }
        SweepParam::ByteBudget => {
            if !value.is_finite() || value < 0.0 || value.fract() != 0.0 {
                return Err(ConfigError::new(
                    "grid",
                    format!("byte budget {value} must be a non-negative integer"),
                ));
            }
            c.byte_budget = Some(value as u64);
        }
    }
    Ok(c)
}

fn check_grid(grid: &[f64]) -> Result<(), ConfigError> {
    if grid.is_empty() {
        return Err(ConfigError::new("grid", "must not be empty"));
    }
    if grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(ConfigError::new("grid", "must be strictly ascending"));
    }
    Ok(())
}

/// One run per grid point, reports in grid order.
pub fn sweep(cfg: &SimConfig, param: SweepParam, grid: &[f64]) -> Result<Vec<MetricsReport>, SimError> {
    sweep_parallel(cfg, param, grid, 1)
}

/// [`sweep`] with grid points spread over `jobs` worker threads.
pub fn sweep_parallel(
    cfg: &SimConfig,
    param: SweepParam,
    grid: &[f64],
    jobs: usize,
) -> Result<Vec<MetricsReport>, SimError> {
    check_grid(grid)?;
    let configs = grid
        .iter()
        .map(|&v| apply_grid_value(cfg, param, v))
        .collect::<Result<Vec<_>, _>>()?;
    if jobs <= 1 {
        return configs.iter().map(run_experiment).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .expect("thread pool");
    pool.install(|| configs.par_iter().map(run_experiment).collect())
}
