use std::io::Write;

use serde::{Deserialize, Serialize};

use super::config::Mode;

/// Everything that happened in one round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: u32,
    pub bits_device_edge: u64,
    pub bits_edge_cloud: u64,
    pub energy_tx: f64,
    pub energy_compute: f64,
    pub cloud_accuracy: f64,
    pub samples_transmitted: u64,
    pub samples_discarded: u64,
    /// Mean current value of the mailboxes forwarded this round.
    pub mean_mailbox_value: Option<f64>,
    /// Mean current value of the mailboxes dropped this round.
    pub mean_discarded_value: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mode: Mode,
    pub seed: u64,
    pub rounds: u32,
    pub pretrain_accuracy: f64,
    pub final_accuracy: f64,
    /// First round closing a stable accuracy window, if any.
    pub convergence_round: Option<u32>,
    pub total_bits: u64,
    pub total_bits_device_edge: u64,
    pub total_bits_edge_cloud: u64,
    pub total_energy: f64,
    pub total_energy_tx: f64,
    pub total_energy_compute: f64,
    pub total_transmitted: u64,
    pub total_discarded: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub records: Vec<RoundRecord>,
    pub summary: Summary,
}

/// Per-round CSV columns, in order.
pub const ROUND_COLUMNS: [&str; 10] = [
    "round",
    "bits_device_edge",
    "bits_edge_cloud",
    "energy_tx",
    "energy_compute",
    "cloud_accuracy",
    "samples_transmitted",
    "samples_discarded",
    "mean_mailbox_value",
    "mean_discarded_value",
];

impl RoundRecord {
    pub fn energy(&self) -> f64 {
        self.energy_tx + self.energy_compute
    }

    pub(crate) fn csv_fields(&self) -> Vec<String> {
        let opt = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_default();
        vec![
            self.round.to_string(),
            self.bits_device_edge.to_string(),
            self.bits_edge_cloud.to_string(),
            self.energy_tx.to_string(),
            self.energy_compute.to_string(),
            self.cloud_accuracy.to_string(),
            self.samples_transmitted.to_string(),
            self.samples_discarded.to_string(),
            opt(self.mean_mailbox_value),
            opt(self.mean_discarded_value),
        ]
    }
}

impl MetricsReport {
    /// Builds the summary from per-round records, summing in round order.
    pub fn from_records(
        mode: Mode,
        seed: u64,
        pretrain_accuracy: f64,
        window: usize,
        epsilon: f64,
        records: Vec<RoundRecord>,
    ) -> Self {
        let accuracies: Vec<f64> = records.iter().map(|r| r.cloud_accuracy).collect();
        let mut s = Summary {
            mode,
            seed,
            rounds: records.len() as u32,
            pretrain_accuracy,
            final_accuracy: accuracies.last().copied().unwrap_or(pretrain_accuracy),
            convergence_round: detect_convergence(&accuracies, window, epsilon).map(|r| r as u32),
            total_bits: 0,
            total_bits_device_edge: 0,
            total_bits_edge_cloud: 0,
            total_energy: 0.0,
            total_energy_tx: 0.0,
            total_energy_compute: 0.0,
            total_transmitted: 0,
            total_discarded: 0,
        };
        for r in &records {
            s.total_bits_device_edge += r.bits_device_edge;
            s.total_bits_edge_cloud += r.bits_edge_cloud;
            s.total_energy_tx += r.energy_tx;
            s.total_energy_compute += r.energy_compute;
            s.total_energy += r.energy();
            s.total_transmitted += r.samples_transmitted;
            s.total_discarded += r.samples_discarded;
        }
        s.total_bits = s.total_bits_device_edge + s.total_bits_edge_cloud;
        Self { records, summary: s }
    }

    pub fn accuracy_trace(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.cloud_accuracy).collect()
    }

    /// Cumulative energy through the first round whose accuracy reaches
    /// `level`, or `None` if it never does.
    pub fn energy_to_reach(&self, level: f64) -> Option<f64> {
        let mut total = 0.0;
        for r in &self.records {
            total += r.energy();
            if r.cloud_accuracy >= level {
                return Some(total);
            }
        }
        None
    }

    /// One row per round with the columns of [`ROUND_COLUMNS`].
    pub fn write_csv<W: Write>(&self, writer: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(ROUND_COLUMNS)?;
        for r in &self.records {
            w.write_record(r.csv_fields())?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn summary_json(&self) -> String {
        serde_json::to_string_pretty(&self.summary).expect("summary serializes")
    }
}

/// First 1-based round `r` such that the accuracies of rounds
/// `r - window + 1 ..= r` span less than `epsilon`.
pub fn detect_convergence(trace: &[f64], window: usize, epsilon: f64) -> Option<usize> {
    if window == 0 {
        return None;
    }
    trace
        .windows(window)
        .position(|w| {
            let (lo, hi) = w.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| {
                (lo.min(x), hi.max(x))
            });
            hi - lo < epsilon
        })
        .map(|start| start + window)
}
