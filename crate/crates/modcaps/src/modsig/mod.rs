//! Synthetic digitally modulated baseband signals.
//!
//! A frame is a complex I/Q waveform built as: random payload bits →
//! constellation symbols → pulse shaping (square-root raised cosine for
//! the linear schemes, continuous-phase for MSK) → carrier frequency
//! offset → additive white Gaussian noise calibrated to a labeled in-band
//! SNR → normalization to unit mean power.
//!
//! Every frame is reproducible from its metadata alone: the payload, and
//! the noise are drawn from independent streams derived from the frame's
//! seed, so validation oracles can re-synthesize ground truth.

mod channel;
mod constellation;
mod demod;
mod generate;
mod shaping;
mod srrc;

pub use channel::{add_noise_to_snr, apply_cfo, measure_inband_snr, occupied_band_fraction};
pub use constellation::{
    bits_per_symbol, constellation_points, map_symbols, map_symbols_dqpsk_pi4,
};
pub use demod::{demod_oracle, DemodReport};
pub use generate::{frame_bits, frame_seed, frame_symbols, generate, synth_frame};
pub use shaping::{linear_symbols_needed, modulate_linear, msk_bits_needed, msk_modulate};
pub use srrc::srrc_taps;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Pulse span of the square-root raised-cosine filter, in symbols (even).
/// Sized so the filter's self-convolution meets the 1e-3 zero-ISI bound
/// down to rolloff 0.1; shorter spans leave too much truncation ISI at
/// small rolloffs.
pub const SRRC_SPAN: usize = 20;

/// Errors from signal synthesis and measurement.
#[derive(Debug, Error)]
pub enum SigError {
    #[error("invalid {param}: {detail}")]
    InvalidParam { param: &'static str, detail: String },
    #[error("{scheme} is not a linear constellation scheme")]
    NotLinear { scheme: &'static str },
    #[error("need {needed} symbols to synthesize the frame, got {got}")]
    InsufficientSymbols { needed: usize, got: usize },
    #[error("bit count {got} is not a multiple of {bits_per_symbol} bits per symbol")]
    RaggedBits { got: usize, bits_per_symbol: usize },
    #[error("target SNR {target_db} dB is not below the current {current_db} dB")]
    SnrIncrease { current_db: f64, target_db: f64 },
    #[error("SNR measurement undefined: {0}")]
    MeasurementUndefined(String),
    #[error("invalid profile {name}: {detail}")]
    ProfileInvalid { name: String, detail: String },
}

pub type Result<T> = std::result::Result<T, SigError>;

/// The eight supported modulation schemes, in canonical label order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModulationScheme {
    Bpsk,
    Qpsk,
    Psk8,
    Dqpsk,
    Msk,
    Qam16,
    Qam64,
    Qam256,
}

impl ModulationScheme {
    /// All schemes in canonical label order (the order fixes the class
    /// labels of the full 8-class problem).
    pub const ALL: [ModulationScheme; 8] = [
        ModulationScheme::Bpsk,
        ModulationScheme::Qpsk,
        ModulationScheme::Psk8,
        ModulationScheme::Dqpsk,
        ModulationScheme::Msk,
        ModulationScheme::Qam16,
        ModulationScheme::Qam64,
        ModulationScheme::Qam256,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ModulationScheme::Bpsk => "BPSK",
            ModulationScheme::Qpsk => "QPSK",
            ModulationScheme::Psk8 => "8PSK",
            ModulationScheme::Dqpsk => "DQPSK",
            ModulationScheme::Msk => "MSK",
            ModulationScheme::Qam16 => "16QAM",
            ModulationScheme::Qam64 => "64QAM",
            ModulationScheme::Qam256 => "256QAM",
        }
    }

    pub fn from_name(name: &str) -> Option<ModulationScheme> {
        ModulationScheme::ALL.into_iter().find(|s| s.name() == name)
    }

    /// Position in [`Self::ALL`].
    pub fn canonical_label(&self) -> usize {
        ModulationScheme::ALL
            .iter()
            .position(|s| s == self)
            .expect("every scheme appears in ALL")
    }

    /// True for schemes shaped by the square-root raised-cosine pulse.
    pub fn is_linear(&self) -> bool {
        !matches!(self, ModulationScheme::Msk)
    }
}

/// Everything needed to reproduce and interpret one frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalMeta {
    pub scheme: ModulationScheme,
    /// Class label: the scheme's index within the generating profile's
    /// scheme list (equals the canonical label for full 8-class profiles).
    pub label: usize,
    /// Samples per symbol.
    pub sps: u32,
    /// SRRC roll-off factor (drawn for every frame; unused by MSK).
    pub rolloff: f64,
    /// Carrier frequency offset as a fraction of the sample rate.
    pub cfo: f64,
    /// Labeled in-band SNR in dB; `+inf` marks a noiseless frame.
    pub snr_db: f64,
    /// Seed all of this frame's randomness derives from.
    pub rng_seed: u64,
    /// Name of the generating profile (provenance through merges).
    pub profile_tag: String,
}

/// One I/Q frame plus its metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexSignal {
    pub samples: Vec<Complex64>,
    pub meta: SignalMeta,
}

impl ComplexSignal {
    /// Mean power `E[|s|^2]`.
    pub fn mean_power(&self) -> f64 {
        if self.samples.is_empty() {
            return 0.0;
        }
        let sum: f64 = self.samples.iter().map(|s| s.norm_sqr()).sum();
        sum / self.samples.len() as f64
    }

    /// Scales the frame to unit mean power (no-op for an all-zero frame).
    pub fn normalize_power(&mut self) {
        let p = self.mean_power();
        if p > 0.0 {
            let scale = 1.0 / p.sqrt();
            for s in &mut self.samples {
                *s *= scale;
            }
        }
    }

    /// Converts to the network's `[2, L]` channel-major layout (I-row then
    /// Q-row), optionally normalizing to unit mean power first. The
    /// normalization scale is computed and applied in `f64` before the
    /// `f32` cast, so scaling the frame by a power of two beforehand leaves
    /// the result bit-identical.
    pub fn iq_channels(&self, normalize: bool) -> Vec<f32> {
        let scale = if normalize {
            let p = self.mean_power();
            if p > 0.0 {
                1.0 / p.sqrt()
            } else {
                1.0
            }
        } else {
            1.0
        };
        let l = self.samples.len();
        let mut out = vec![0.0f32; 2 * l];
        for (i, s) in self.samples.iter().enumerate() {
            out[i] = (s.re * scale) as f32;
            out[l + i] = (s.im * scale) as f32;
        }
        out
    }
}

/// Envelope of randomized frame parameters for dataset generation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetProfile {
    pub name: String,
    /// Schemes to draw from; a frame's label is its scheme's index here.
    pub schemes: Vec<ModulationScheme>,
    /// Samples per symbol, inclusive.
    pub sps_range: (u32, u32),
    /// SRRC roll-off envelope.
    pub rolloff_range: (f64, f64),
    /// Carrier frequency offset envelope (fraction of sample rate).
    pub cfo_range: (f64, f64),
    /// Labeled in-band SNR envelope in dB.
    pub snr_range_db: (f64, f64),
    /// Samples per frame.
    pub frame_len: usize,
    /// Default frame count for dataset generation.
    pub count: usize,
}

impl DatasetProfile {
    /// First reference envelope: sps up to 23, SNR 0..12 dB, near-zero CFO.
    /// `strict` restores the degenerate one-sample-per-symbol lower edge;
    /// by default generation starts at 2 samples per symbol.
    pub fn ds1(strict_sps: bool) -> DatasetProfile {
        DatasetProfile {
            name: "ds1".into(),
            schemes: ModulationScheme::ALL.to_vec(),
            sps_range: (if strict_sps { 1 } else { 2 }, 23),
            rolloff_range: (0.1, 1.0),
            cfo_range: (-0.001, 0.001),
            snr_range_db: (0.0, 12.0),
            frame_len: 32768,
            count: 112_000,
        }
    }

    /// Second reference envelope: sps up to 29, SNR 1..18 dB, and a CFO
    /// interval strictly above the first envelope's.
    pub fn ds2(strict_sps: bool) -> DatasetProfile {
        DatasetProfile {
            name: "ds2".into(),
            schemes: ModulationScheme::ALL.to_vec(),
            sps_range: (if strict_sps { 1 } else { 2 }, 29),
            rolloff_range: (0.1, 1.0),
            cfo_range: (0.005, 0.015),
            snr_range_db: (1.0, 18.0),
            frame_len: 32768,
            count: 112_000,
        }
    }

    /// Checks every envelope bound; returns the profile for chaining.
    pub fn validate(&self) -> Result<&DatasetProfile> {
        let fail = |detail: String| SigError::ProfileInvalid {
            name: self.name.clone(),
            detail,
        };
        if self.schemes.is_empty() {
            return Err(fail("no schemes listed".into()));
        }
        for (i, s) in self.schemes.iter().enumerate() {
            if self.schemes[..i].contains(s) {
                return Err(fail(format!("duplicate scheme {}", s.name())));
            }
        }
        if self.sps_range.0 < 1 || self.sps_range.0 > self.sps_range.1 {
            return Err(fail(format!("bad sps range {:?}", self.sps_range)));
        }
        if !(0.1..=1.0).contains(&self.rolloff_range.0)
            || !(0.1..=1.0).contains(&self.rolloff_range.1)
            || self.rolloff_range.0 > self.rolloff_range.1
        {
            return Err(fail(format!("bad rolloff range {:?}", self.rolloff_range)));
        }
        if self.cfo_range.0 > self.cfo_range.1
            || self.cfo_range.0.abs() >= 0.5
            || self.cfo_range.1.abs() >= 0.5
        {
            return Err(fail(format!("bad cfo range {:?}", self.cfo_range)));
        }
        if self.snr_range_db.0 > self.snr_range_db.1 || !self.snr_range_db.0.is_finite() {
            return Err(fail(format!("bad snr range {:?}", self.snr_range_db)));
        }
        if self.frame_len == 0 {
            return Err(fail("frame_len must be nonzero".into()));
        }
        Ok(self)
    }
}

/// Verifies two profiles have non-overlapping CFO intervals (the guard for
/// distribution-shift experiments).
pub fn validate_disjoint_cfo(a: &DatasetProfile, b: &DatasetProfile) -> Result<()> {
    let overlap = a.cfo_range.0 <= b.cfo_range.1 && b.cfo_range.0 <= a.cfo_range.1;
    if overlap {
        Err(SigError::ProfileInvalid {
            name: format!("{} vs {}", a.name, b.name),
            detail: format!(
                "CFO intervals {:?} and {:?} overlap",
                a.cfo_range, b.cfo_range
            ),
        })
    } else {
        Ok(())
    }
}
