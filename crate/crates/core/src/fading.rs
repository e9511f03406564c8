//! Finite-state approximations of a Rician block-fading channel.
//!
//! A continuous fading distribution is replaced by an equal-weight Monte Carlo
//! ensemble: every expectation over fading states becomes an arithmetic mean
//! over the ensemble. Each state draws from its own ChaCha stream, so the
//! ensemble is identical no matter how the states are scheduled across
//! threads, and the first `m` antennas of an `M`-antenna ensemble coincide
//! with the `m`-antenna ensemble drawn from the same seed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Rician channel model for a single-antenna transmitter and an
/// `num_antennas`-element uniform linear receive array.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RicianConfig {
    /// Power ratio between the line-of-sight and the scattered component.
    /// `f64::INFINITY` gives a deterministic line-of-sight channel.
    pub rician_k: f64,
    /// Total mean channel power gain per antenna, `E[|g_m|^2]`.
    pub mean_power_gain: f64,
    pub num_antennas: usize,
    /// Phase increment of the line-of-sight steering vector between
    /// neighbouring antennas, in radians.
    pub ula_phase: f64,
}

impl Default for RicianConfig {
    fn default() -> Self {
        Self {
            rician_k: 3.0,
            mean_power_gain: 1e-4,
            num_antennas: 1,
            ula_phase: -std::f64::consts::FRAC_PI_2,
        }
    }
}

impl RicianConfig {
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if self.rician_k.is_nan() || self.rician_k < 0.0 {
            problems.push(format!("rician_k must be >= 0 (got {})", self.rician_k));
        }
        if !(self.mean_power_gain.is_finite() && self.mean_power_gain > 0.0) {
            problems.push(format!(
                "mean_power_gain must be finite and > 0 (got {})",
                self.mean_power_gain
            ));
        }
        if self.num_antennas == 0 {
            problems.push("num_antennas must be >= 1".to_string());
        }
        if !self.ula_phase.is_finite() {
            problems.push(format!("ula_phase must be finite (got {})", self.ula_phase));
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(problems.join("; ")))
        }
    }

    /// Power of the deterministic and of the scattered component.
    fn component_powers(&self) -> (f64, f64) {
        let g = self.mean_power_gain;
        if self.rician_k.is_infinite() {
            (g, 0.0)
        } else {
            let k = self.rician_k;
            (k / (k + 1.0) * g, g / (k + 1.0))
        }
    }
}

/// Equal-probability set of per-state, per-antenna channel power gains.
///
/// Stored row-major: state `i` occupies `gains[i * M .. (i + 1) * M]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FadingEnsemble {
    gains: Vec<f64>,
    num_antennas: usize,
}

impl FadingEnsemble {
    pub fn new(gains: Vec<f64>, num_antennas: usize) -> Result<Self> {
        if num_antennas == 0 {
            return Err(Error::Argument("ensemble needs at least one antenna".into()));
        }
        if gains.is_empty() || gains.len() % num_antennas != 0 {
            return Err(Error::Argument(format!(
                "{} gains do not form a non-empty {}-column matrix",
                gains.len(),
                num_antennas
            )));
        }
        if let Some(bad) = gains.iter().find(|g| !(g.is_finite() && **g >= 0.0)) {
            return Err(Error::Argument(format!(
                "channel power gains must be finite and >= 0 (got {bad})"
            )));
        }
        Ok(Self {
            gains,
            num_antennas,
        })
    }

    /// Single-antenna ensemble from a list of per-state gains.
    pub fn siso(gains: Vec<f64>) -> Result<Self> {
        Self::new(gains, 1)
    }

    pub fn from_states(states: &[Vec<f64>]) -> Result<Self> {
        let m = states.first().map_or(0, Vec::len);
        if states.iter().any(|s| s.len() != m) {
            return Err(Error::Argument("ragged per-antenna gain rows".into()));
        }
        Self::new(states.concat(), m)
    }

    pub fn num_states(&self) -> usize {
        self.gains.len() / self.num_antennas
    }

    pub fn num_antennas(&self) -> usize {
        self.num_antennas
    }

    /// Row-major view of all gains.
    pub fn gains(&self) -> &[f64] {
        &self.gains
    }

    pub fn state(&self, index: usize) -> &[f64] {
        let m = self.num_antennas;
        &self.gains[index * m..(index + 1) * m]
    }

    pub fn states(&self) -> std::slice::ChunksExact<'_, f64> {
        self.gains.chunks_exact(self.num_antennas)
    }

    pub fn par_states(&self) -> rayon::slice::ChunksExact<'_, f64> {
        self.gains.par_chunks_exact(self.num_antennas)
    }

    /// Per-state sum over antennas.
    pub fn total_gains(&self) -> Vec<f64> {
        self.states().map(total_gain).collect()
    }

    /// Ensemble mean of the gain seen by antenna `antenna`.
    pub fn mean_gain(&self, antenna: usize) -> f64 {
        let n = self.num_states() as f64;
        self.states().map(|s| s[antenna]).sum::<f64>() / n
    }

    /// Ensemble mean of the summed gain.
    pub fn mean_total_gain(&self) -> f64 {
        self.states().map(total_gain).sum::<f64>() / self.num_states() as f64
    }

    pub fn max_total_gain(&self) -> f64 {
        self.states().map(total_gain).fold(0.0, f64::max)
    }
}

/// Equivalent channel sum-power gain of one fading state.
pub fn total_gain(state: &[f64]) -> f64 {
    state.iter().sum()
}

/// Draws `num_states` independent Rician channel realisations.
///
/// Antenna `m` sees `g_m = a e^{j m tau} + s_m` with `a^2 = K/(K+1) G` and
/// `s_m ~ CN(0, G/(K+1))` i.i.d. across antennas; the stored gain is
/// `|g_m|^2`.
pub fn sample_rician(config: &RicianConfig, num_states: usize, seed: u64) -> Result<FadingEnsemble> {
    config.validate()?;
    if num_states == 0 {
        return Err(Error::Argument("num_states must be >= 1".into()));
    }
    let m = config.num_antennas;
    let (los_power, scatter_power) = config.component_powers();
    let los_amplitude = los_power.sqrt();
    let scatter_std = (scatter_power / 2.0).sqrt();
    let steering: Vec<(f64, f64)> = (0..m)
        .map(|i| {
            let phase = i as f64 * config.ula_phase;
            (los_amplitude * phase.cos(), los_amplitude * phase.sin())
        })
        .collect();

    let mut gains = vec![0.0; num_states * m];
    gains
        .par_chunks_exact_mut(m)
        .enumerate()
        .for_each(|(state, row)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(state as u64);
            for (gain, &(re, im)) in row.iter_mut().zip(&steering) {
                let x: f64 = StandardNormal.sample(&mut rng);
                let y: f64 = StandardNormal.sample(&mut rng);
                let re = re + scatter_std * x;
                let im = im + scatter_std * y;
                *gain = re * re + im * im;
            }
        });
    FadingEnsemble::new(gains, m)
}
