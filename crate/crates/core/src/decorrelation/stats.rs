use serde::{Deserialize, Serialize};

use super::augment::AugmentConfig;

pub const HISTOGRAM_BINS: usize = 20;

/// Running augmentation counters. Partial stats from independent workers
/// combine with [`AugmentStats::merge`], which is associative and commutative.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AugmentStats {
    pub batches_processed: u64,
    pub samples_generated: u64,
    pub samples_rejected: u64,
    /// Batches that produced no samples (rank deficient or fully rejected).
    pub batches_skipped: u64,
    /// Per-batch rejection fraction, 20 equal bins on [0, 1].
    pub rejection_histogram: [u64; HISTOGRAM_BINS],
    /// Total batch size of the batches counted in each histogram bin.
    pub rejection_histogram_samples: [u64; HISTOGRAM_BINS],
}

fn bin_of(fraction: f64) -> usize {
    ((fraction * HISTOGRAM_BINS as f64).floor() as usize).min(HISTOGRAM_BINS - 1)
}

impl AugmentStats {
    /// Stats for one processed batch of `n` rows of which `rejected` were dropped.
    pub fn single(n: usize, rejected: usize) -> Self {
        let mut s = AugmentStats {
            batches_processed: 1,
            samples_generated: (n - rejected) as u64,
            samples_rejected: rejected as u64,
            batches_skipped: u64::from(rejected == n),
            ..Default::default()
        };
        let b = bin_of(if n == 0 { 1.0 } else { rejected as f64 / n as f64 });
        s.rejection_histogram[b] = 1;
        s.rejection_histogram_samples[b] = n as u64;
        s
    }

    /// A batch of `n` rows that could not be solved.
    pub fn skipped(n: usize) -> Self {
        Self::single(n, n)
    }

    pub fn merge(&mut self, other: &AugmentStats) {
        self.batches_processed += other.batches_processed;
        self.samples_generated += other.samples_generated;
        self.samples_rejected += other.samples_rejected;
        self.batches_skipped += other.batches_skipped;
        for b in 0..HISTOGRAM_BINS {
            self.rejection_histogram[b] += other.rejection_histogram[b];
            self.rejection_histogram_samples[b] += other.rejection_histogram_samples[b];
        }
    }

    /// Mean per-batch rejection fraction, from the exact counts.
    pub fn rejection_fraction(&self) -> f64 {
        let total = self.samples_generated + self.samples_rejected;
        if total == 0 {
            0.0
        } else {
            self.samples_rejected as f64 / total as f64
        }
    }

    /// Number of histogram bins with at least one batch.
    pub fn occupied_bins(&self) -> usize {
        self.rejection_histogram.iter().filter(|&&c| c > 0).count()
    }

    /// `bin_lo,bin_hi,batches,samples` rows.
    pub fn histogram_csv(&self) -> String {
        let mut out = String::from("bin_lo,bin_hi,batches,samples\n");
        for b in 0..HISTOGRAM_BINS {
            let lo = b as f64 / HISTOGRAM_BINS as f64;
            let hi = (b + 1) as f64 / HISTOGRAM_BINS as f64;
            out.push_str(&format!(
                "{lo},{hi},{},{}\n",
                self.rejection_histogram[b], self.rejection_histogram_samples[b]
            ));
        }
        out
    }
}

/// The `augment-stats` JSON document.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AugmentStatsDocument {
    pub config: AugmentConfig,
    pub batch_size: usize,
    pub epochs: usize,
    pub stats: AugmentStats,
    pub rejection_fraction: f64,
    pub bin_edges: Vec<f64>,
}

impl AugmentStatsDocument {
    pub fn new(config: AugmentConfig, batch_size: usize, epochs: usize, stats: AugmentStats) -> Self {
        AugmentStatsDocument {
            config,
            batch_size,
            epochs,
            rejection_fraction: stats.rejection_fraction(),
            stats,
            bin_edges: (0..=HISTOGRAM_BINS).map(|b| b as f64 / HISTOGRAM_BINS as f64).collect(),
        }
    }
}
