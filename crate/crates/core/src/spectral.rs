//! Frequency-domain motion filtering: DFT, adaptive band zeroing driven by
//! high-band content, and inverse DFT back to a clean waveform.

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pca::Waveform;

/// Full complex DFT of a waveform; coefficient k is
/// `sum_u w[u] * exp(-i*2*pi*k*u/N)` with zero-based indices.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    coefficients: Vec<Complex64>,
}

impl Spectrum {
    /// Wraps coefficients after checking length and finiteness.
    pub fn new(coefficients: Vec<Complex64>) -> Result<Self> {
        if coefficients.len() < 2 {
            return Err(Error::InvalidShape {
                reason: format!(
                    "spectrum needs at least 2 coefficients, got {}",
                    coefficients.len()
                ),
            });
        }
        if let Some(i) = coefficients
            .iter()
            .position(|c| !c.re.is_finite() || !c.im.is_finite())
        {
            return Err(Error::InvalidShape {
                reason: format!("spectrum has a non-finite coefficient at bin {i}"),
            });
        }
        Ok(Self { coefficients })
    }

    pub fn coefficients(&self) -> &[Complex64] {
        &self.coefficients
    }

    /// Number of bins, equal to the length of the originating waveform.
    pub fn origin_length(&self) -> usize {
        self.coefficients.len()
    }

    /// Total spectral energy, `sum |X[k]|^2`.
    pub fn energy(&self) -> f64 {
        self.coefficients.iter().map(|c| c.norm_sqr()).sum()
    }
}

/// One rung of the threshold ladder: if the measured high-band count is at
/// most `bound`, keep `alpha` low-frequency bins per spectral side. A `null`
/// bound means "everything else" and must close the ladder.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LadderStep {
    pub bound: Option<u64>,
    pub alpha: u32,
}

impl LadderStep {
    pub const fn new(bound: Option<u64>, alpha: u32) -> Self {
        Self { bound, alpha }
    }
}

/// Configuration for the adaptive frequency filter.
///
/// `ladder` maps the high-band significant-bin count to a keep-band width;
/// `beta` is the fraction of the spectral maximum a bin must reach to count
/// as significant; `high_band_start_fraction` positions the start of the
/// "high" band as a fraction of the spectrum length; `fixed_alpha` bypasses
/// the ladder entirely; `enabled` lets callers skip filtering for ablations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FmfConfig {
    pub ladder: Vec<LadderStep>,
    pub beta: f64,
    pub high_band_start_fraction: f64,
    pub fixed_alpha: Option<u32>,
    pub enabled: bool,
}

impl Default for FmfConfig {
    fn default() -> Self {
        FmfConfig {
            ladder: vec![
                LadderStep::new(Some(1), 56),
                LadderStep::new(Some(3), 64),
                LadderStep::new(Some(6), 80),
                LadderStep::new(None, 96),
            ],
            beta: 0.2,
            high_band_start_fraction: 0.03125,
            fixed_alpha: None,
            enabled: true,
        }
    }
}

impl FmfConfig {
    /// Checks every documented range rule; call after building one by hand
    /// or deserializing one from a file.
    pub fn validate(&self) -> Result<()> {
        if self.ladder.is_empty() {
            return Err(Error::InvalidConfig {
                reason: "ladder must have at least one step".to_string(),
            });
        }
        let mut prev: Option<u64> = None;
        for (i, step) in self.ladder.iter().enumerate() {
            let last = i + 1 == self.ladder.len();
            match (step.bound, last) {
                (None, false) => {
                    return Err(Error::InvalidConfig {
                        reason: format!("ladder step {i} has an open bound before the last step"),
                    })
                }
                (Some(_), true) => {
                    return Err(Error::InvalidConfig {
                        reason: "ladder must end with an open (null) bound".to_string(),
                    })
                }
                (Some(b), false) => {
                    if let Some(p) = prev {
                        if b <= p {
                            return Err(Error::InvalidConfig {
                                reason: format!(
                                    "ladder bounds must increase strictly ({p} then {b})"
                                ),
                            });
                        }
                    }
                    prev = Some(b);
                }
                (None, true) => {}
            }
            if step.alpha < 2 {
                return Err(Error::InvalidConfig {
                    reason: format!("ladder step {i}: alpha must be at least 2"),
                });
            }
        }
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return Err(Error::InvalidConfig {
                reason: format!("beta must lie in (0, 1), got {}", self.beta),
            });
        }
        if !(self.high_band_start_fraction > 0.0 && self.high_band_start_fraction <= 0.5) {
            return Err(Error::InvalidConfig {
                reason: format!(
                    "high_band_start_fraction must lie in (0, 0.5], got {}",
                    self.high_band_start_fraction
                ),
            });
        }
        if self.fixed_alpha == Some(0) {
            return Err(Error::InvalidConfig {
                reason: "fixed_alpha must be positive".to_string(),
            });
        }
        Ok(())
    }
}

/// What the filter actually did to one waveform.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FmfTrace {
    /// Keep-band width that was selected (and applied unless filtering was
    /// disabled).
    pub alpha: u32,
    /// Significant-bin count measured in the high band.
    pub band_count: usize,
    /// Energy of the kept bins over total energy; 1.0 for an all-zero
    /// spectrum or when filtering was skipped.
    pub kept_energy_fraction: f64,
}

/// Discrete Fourier transform, any length, no padding.
pub fn dft(w: &Waveform) -> Spectrum {
    let mut buf: Vec<Complex64> = w
        .samples()
        .iter()
        .map(|&v| Complex64::new(v, 0.0))
        .collect();
    FftPlanner::new()
        .plan_fft_forward(buf.len())
        .process(&mut buf);
    Spectrum::new(buf).expect("finite waveform transforms to a finite spectrum")
}

/// Inverse DFT, returning the real part. The residual imaginary magnitude
/// (which should be ~0 for conjugate-symmetric spectra) is logged at `warn`
/// level when it exceeds 1e-6; use [`idft_with_residue`] to inspect it.
pub fn idft(s: &Spectrum) -> Waveform {
    let (w, residue) = idft_with_residue(s);
    if residue > 1e-6 {
        log::warn!("idft dropped imaginary residue of magnitude {residue:.3e}; the spectrum was not conjugate-symmetric");
    }
    w
}

/// Inverse DFT plus the largest imaginary magnitude that was discarded.
pub fn idft_with_residue(s: &Spectrum) -> (Waveform, f64) {
    let n = s.origin_length();
    let mut buf: Vec<Complex64> = s.coefficients().to_vec();
    FftPlanner::new().plan_fft_inverse(n).process(&mut buf);
    let scale = 1.0 / n as f64;
    let mut residue = 0.0f64;
    let samples: Vec<f64> = buf
        .iter()
        .map(|c| {
            residue = residue.max((c.im * scale).abs());
            c.re * scale
        })
        .collect();
    let w = Waveform::new(samples).expect("finite spectrum inverts to a finite waveform");
    (w, residue)
}

/// Largest keep-band width meaningful for an N-bin spectrum.
pub fn max_keep_alpha(n: usize) -> u32 {
    (n.div_ceil(2) as u32).max(2)
}

/// Zeroes every bin whose distance from DC, `min(k, N-k)`, is at least
/// `alpha`, keeping a conjugate-symmetric low-frequency band (DC always
/// survives). Requires `2 <= alpha <= max_keep_alpha(N)`.
pub fn band_keep_filter(s: &Spectrum, alpha: u32) -> Result<Spectrum> {
    let n = s.origin_length();
    let max = max_keep_alpha(n);
    if alpha < 2 || alpha > max {
        return Err(Error::AlphaOutOfRange { alpha, max, len: n });
    }
    let coefficients = s
        .coefficients()
        .iter()
        .enumerate()
        .map(|(k, &c)| {
            let dist = k.min(n - k) as u32;
            if dist >= alpha {
                Complex64::new(0.0, 0.0)
            } else {
                c
            }
        })
        .collect();
    Spectrum::new(coefficients)
}

/// Counts bins in the high band, `[ceil(f*N), floor(N/2)]`, whose magnitude
/// reaches `beta` times the largest non-DC magnitude `M` of the lower half.
/// Returns 0 when `M` is zero.
pub fn high_band_count(s: &Spectrum, cfg: &FmfConfig) -> usize {
    let n = s.origin_length();
    let half = n / 2;
    let coefficients = s.coefficients();
    let max_mag = coefficients[1..=half]
        .iter()
        .map(|c| c.norm())
        .fold(0.0f64, f64::max);
    if max_mag == 0.0 {
        return 0;
    }
    let start = (cfg.high_band_start_fraction * n as f64).ceil() as usize;
    let threshold = cfg.beta * max_mag;
    (start.max(1)..=half)
        .filter(|&k| coefficients[k].norm() >= threshold)
        .count()
}

/// Picks the keep-band width: `fixed_alpha` when set, otherwise the first
/// ladder step whose bound covers the measured high-band count. The result
/// is clamped to `[2, max_keep_alpha(N)]`.
pub fn select_alpha(s: &Spectrum, cfg: &FmfConfig) -> u32 {
    let max = max_keep_alpha(s.origin_length());
    let raw = match cfg.fixed_alpha {
        Some(a) => a,
        None => {
            let b = high_band_count(s, cfg) as u64;
            let mut chosen = cfg.ladder.last().map(|step| step.alpha).unwrap_or(max);
            for step in &cfg.ladder {
                match step.bound {
                    Some(bound) if b <= bound => {
                        chosen = step.alpha;
                        break;
                    }
                    None => {
                        chosen = step.alpha;
                        break;
                    }
                    Some(_) => {}
                }
            }
            chosen
        }
    };
    raw.clamp(2, max)
}

/// The full frequency-filter pass: transform, measure, select a band, zero
/// everything outside it, transform back. Returns the filtered waveform and
/// a trace of what was measured and applied.
pub fn fmf(w: &Waveform, cfg: &FmfConfig) -> Result<(Waveform, FmfTrace)> {
    cfg.validate()?;
    let spectrum = dft(w);
    let band_count = high_band_count(&spectrum, cfg);
    let alpha = select_alpha(&spectrum, cfg);
    let filtered = band_keep_filter(&spectrum, alpha)?;
    let total = spectrum.energy();
    let kept_energy_fraction = if total == 0.0 {
        1.0
    } else {
        filtered.energy() / total
    };
    let (out, _residue) = idft_with_residue(&filtered);
    let out = match w.frame_rate() {
        Some(r) => out.with_frame_rate(r),
        None => out,
    };
    Ok((
        out,
        FmfTrace {
            alpha,
            band_count,
            kept_energy_fraction,
        },
    ))
}
