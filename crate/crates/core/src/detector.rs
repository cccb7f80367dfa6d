//! Monte Carlo emulation of a triggered, gated single-photon camera.
//!
//! Every trigger opens the gate once. The number of gates in an exposure is
//! Poisson distributed; each gate records at most one photon-2 detection,
//! placed by the coincidence map, and every pixel adds Poisson dark counts.
//!
//! Random streams: all draws come from [`ChaCha8Rng`] seeded with
//! `DetectorConfig::seed`. Stream 0 draws the gate count, stream 1 the dark
//! counts (row-major), and gate shard `s` (blocks of [`SHARD_GATES`]) uses
//! stream `2 + s`. Shards are merged in index order, so a frame depends only
//! on the seed and never on the number of worker threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, Poisson, WeightedIndex};

use crate::experiments::CoincidenceMap;
use crate::{Error, Exec, Result};

/// Gates per Monte Carlo shard.
pub const SHARD_GATES: u64 = 1 << 20;

const GATE_STREAM: u64 = 0;
const DARK_STREAM: u64 = 1;
const FIRST_SHARD_STREAM: u64 = 2;

#[derive(Clone, Debug, PartialEq)]
pub struct DetectorConfig {
    /// Trigger pulses per second.
    pub trigger_rate: f64,
    /// Gate open time, seconds.
    pub gate_width: f64,
    /// Gate opening delay, seconds. Bookkeeping only.
    pub gate_delay: f64,
    /// Exposure, seconds.
    pub exposure: f64,
    /// Probability that an open gate records the partner photon.
    pub pair_detection_prob: f64,
    /// Dark counts per pixel per second.
    pub dark_rate: f64,
    pub seed: u64,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            trigger_rate: 2e4,
            gate_width: 10e-9,
            gate_delay: 20e-9,
            exposure: 1800.0,
            pair_detection_prob: 0.1,
            dark_rate: 0.005,
            seed: 0,
        }
    }
}

impl DetectorConfig {
    pub fn validate(&self) -> Result<()> {
        let nonneg = [
            ("trigger_rate", self.trigger_rate),
            ("gate_width", self.gate_width),
            ("gate_delay", self.gate_delay),
            ("exposure", self.exposure),
            ("pair_detection_prob", self.pair_detection_prob),
            ("dark_rate", self.dark_rate),
        ];
        for (name, v) in nonneg {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::param(format!(
                    "{name} must be finite and >= 0, got {v}"
                )));
            }
        }
        if self.pair_detection_prob > 1.0 {
            return Err(Error::param(format!(
                "pair_detection_prob must be <= 1, got {}",
                self.pair_detection_prob
            )));
        }
        Ok(())
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self {
            seed,
            ..self.clone()
        }
    }

    pub fn with_exposure(&self, exposure: f64) -> Self {
        Self {
            exposure,
            ..self.clone()
        }
    }

    /// Mean number of gates in one exposure.
    pub fn mean_gates(&self) -> f64 {
        self.trigger_rate * self.exposure
    }

    /// Two seeds for signal and background derived from `seed`.
    pub fn sub_seeds(&self) -> (u64, u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(u64::MAX);
        (rng.gen(), rng.gen())
    }
}

/// `round(trigger_rate * exposure)`.
pub fn expected_gate_count(cfg: &DetectorConfig) -> u64 {
    cfg.mean_gates().round() as u64
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct FrameMeta {
    pub gates_opened: u64,
    /// Exposure in seconds, stored as bits so the struct stays `Eq`.
    pub exposure_bits: u64,
    pub seed: u64,
}

impl FrameMeta {
    pub fn exposure(&self) -> f64 {
        f64::from_bits(self.exposure_bits)
    }
}

/// Accumulated counts on the grid of the map that produced them.
#[derive(Clone, Debug, PartialEq)]
pub struct CountFrame {
    pub nx: usize,
    pub ny: usize,
    pub pitch: (f64, f64),
    pub origin: (f64, f64),
    /// Row-major `(y, x)`.
    pub counts: Vec<u64>,
    pub meta: FrameMeta,
}

impl CountFrame {
    pub fn at(&self, i: usize, j: usize) -> u64 {
        self.counts[j * self.nx + i]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Counts as `f64`.
    pub fn values(&self) -> Vec<f64> {
        self.counts.iter().map(|&c| c as f64).collect()
    }

    /// Counts divided by their total (all zero for an empty frame).
    pub fn distribution(&self) -> Vec<f64> {
        let t = self.total();
        if t == 0 {
            return vec![0.0; self.counts.len()];
        }
        self.counts.iter().map(|&c| c as f64 / t as f64).collect()
    }

    fn same_grid(&self, other: &Self) -> bool {
        self.nx == other.nx
            && self.ny == other.ny
            && self.pitch == other.pitch
            && self.origin == other.origin
    }
}

/// Background-corrected counts; negative values are fluctuations.
#[derive(Clone, Debug, PartialEq)]
pub struct SignedFrame {
    pub nx: usize,
    pub ny: usize,
    pub pitch: (f64, f64),
    pub origin: (f64, f64),
    pub counts: Vec<i64>,
    pub signal: FrameMeta,
    pub background: FrameMeta,
}

impl SignedFrame {
    pub fn values(&self) -> Vec<f64> {
        self.counts.iter().map(|&c| c as f64).collect()
    }
}

fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

fn poisson(r: &mut ChaCha8Rng, mean: f64) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    let d: Poisson<f64> = Poisson::new(mean).expect("positive finite mean");
    d.sample(r) as u64
}

/// One stochastic exposure of `map`.
///
/// Detections from pairs are at most one per gate. Dark counts are independent
/// of the gates, so `total() <= gates_opened` holds only when `dark_rate` is 0.
pub fn simulate_exposure(
    map: &CoincidenceMap,
    cfg: &DetectorConfig,
    exec: Exec,
) -> Result<CountFrame> {
    cfg.validate()?;
    let npix = map.values.len();
    let gates = poisson(&mut rng(cfg.seed, GATE_STREAM), cfg.mean_gates());

    let weights = if map.is_zero() || cfg.pair_detection_prob == 0.0 {
        None
    } else {
        Some(
            WeightedIndex::new(&map.values)
                .map_err(|e| Error::param(format!("map weights: {e}")))?,
        )
    };

    let mut counts = vec![0u64; npix];
    if let Some(weights) = &weights {
        let shards = gates.div_ceil(SHARD_GATES) as usize;
        let per_shard: Vec<Vec<u64>> = exec.map_indexed(shards, |s| {
            let n = SHARD_GATES.min(gates - s as u64 * SHARD_GATES);
            let mut r = rng(cfg.seed, FIRST_SHARD_STREAM + s as u64);
            let hits = Binomial::new(n, cfg.pair_detection_prob)
                .expect("probability checked")
                .sample(&mut r);
            let mut local = vec![0u64; npix];
            for _ in 0..hits {
                local[weights.sample(&mut r)] += 1;
            }
            local
        });
        for local in per_shard {
            for (c, l) in counts.iter_mut().zip(local) {
                *c += l;
            }
        }
    }

    let dark_mean = cfg.dark_rate * cfg.exposure;
    if dark_mean > 0.0 {
        let mut r = rng(cfg.seed, DARK_STREAM);
        let d: Poisson<f64> =
            Poisson::new(dark_mean).map_err(|e| Error::param(format!("dark counts: {e}")))?;
        for c in counts.iter_mut() {
            *c += d.sample(&mut r) as u64;
        }
    }

    log::debug!(
        "exposure: {gates} gates, {} counts",
        counts.iter().sum::<u64>()
    );
    Ok(CountFrame {
        nx: map.nx,
        ny: map.ny,
        pitch: map.pitch,
        origin: map.origin,
        counts,
        meta: FrameMeta {
            gates_opened: gates,
            exposure_bits: cfg.exposure.to_bits(),
            seed: cfg.seed,
        },
    })
}

/// Signal exposure minus background exposure, each with its own sub-seed.
pub fn build_ghost_image(
    signal: &CoincidenceMap,
    background: &CoincidenceMap,
    cfg: &DetectorConfig,
    exec: Exec,
) -> Result<SignedFrame> {
    if !signal.same_grid(background) {
        return Err(Error::GridMismatch(format!(
            "signal {}x{} and background {}x{} differ",
            signal.nx, signal.ny, background.nx, background.ny
        )));
    }
    let (s_seed, b_seed) = cfg.sub_seeds();
    let s = simulate_exposure(signal, &cfg.with_seed(s_seed), exec)?;
    let b = simulate_exposure(background, &cfg.with_seed(b_seed), exec)?;
    debug_assert!(s.same_grid(&b));
    Ok(SignedFrame {
        nx: s.nx,
        ny: s.ny,
        pitch: s.pitch,
        origin: s.origin,
        counts: s
            .counts
            .iter()
            .zip(&b.counts)
            .map(|(&a, &c)| a as i64 - c as i64)
            .collect(),
        signal: s.meta,
        background: b.meta,
    })
}

/// Root-mean-square difference between the count distribution of `frame`
/// (after removing the mean dark level) and the normalised map.
pub fn distribution_rms_error(
    frame: &CountFrame,
    map: &CoincidenceMap,
    cfg: &DetectorConfig,
) -> f64 {
    let dark = cfg.dark_rate * frame.meta.exposure();
    let corrected: Vec<f64> = frame.counts.iter().map(|&c| c as f64 - dark).collect();
    let total: f64 = corrected.iter().sum();
    let msum: f64 = map.values.iter().sum();
    if total <= 0.0 || msum == 0.0 {
        return f64::NAN;
    }
    let n = corrected.len() as f64;
    let ss: f64 = corrected
        .iter()
        .zip(&map.values)
        .map(|(c, m)| (c / total - m / msum).powi(2))
        .sum();
    (ss / n).sqrt()
}
