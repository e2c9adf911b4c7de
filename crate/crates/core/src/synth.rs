//! Seeded synthetic fixtures with known repetition counts, plus slow
//! brute-force reference implementations ("oracles") used to cross-check the
//! production transform, eigendecomposition and peak detector.

use std::f64::consts::{PI, TAU};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::counter::PeakParams;
use crate::error::{Error, Result};
use crate::matrix_io::FeatureMatrix;
use crate::pca::Waveform;
use crate::spectral::Spectrum;

/// Largest waveform the naive transform oracle accepts.
pub const ORACLE_DFT_MAX: usize = 4096;
/// Largest matrix side the Jacobi eigendecomposition oracle accepts.
pub const ORACLE_EIG_MAX: usize = 12;

/// Cycle shape of the embedded scalar motion signal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WaveShape {
    Sine,
    Triangle,
    AsymmetricPulse,
}

/// A second periodic signal embedded on a direction orthogonal to the main
/// one: `period_fraction` scales the main period (0.5 = twice as fast) and
/// `relative_amplitude` scales the main amplitude.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Distractor {
    pub period_fraction: f64,
    pub relative_amplitude: f64,
}

/// Recipe for one synthetic fixture. `noise_snr_db` is the per-cell
/// signal-to-noise ratio in dB; `None` means noise-free. Identical specs
/// generate identical bits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub n_frames: usize,
    pub dim: usize,
    pub cycles: f64,
    pub shape: WaveShape,
    #[serde(default)]
    pub amplitude_drift: f64,
    #[serde(default)]
    pub frequency_drift: f64,
    #[serde(default)]
    pub noise_snr_db: Option<f64>,
    #[serde(default)]
    pub distractor: Option<Distractor>,
    #[serde(default)]
    pub seed: u64,
}

impl SynthSpec {
    /// A clean sine fixture; callers override fields as needed.
    pub fn clean_sine(n_frames: usize, dim: usize, cycles: f64, seed: u64) -> Self {
        SynthSpec {
            n_frames,
            dim,
            cycles,
            shape: WaveShape::Sine,
            amplitude_drift: 0.0,
            frequency_drift: 0.0,
            noise_snr_db: None,
            distractor: None,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |reason: String| Err(Error::SpecInvalid { reason });
        if self.n_frames < 2 {
            return fail(format!(
                "n_frames must be at least 2, got {}",
                self.n_frames
            ));
        }
        if self.dim == 0 {
            return fail("dim must be at least 1".to_string());
        }
        if !self.cycles.is_finite() || self.cycles < 1.0 {
            return fail(format!("cycles must be at least 1, got {}", self.cycles));
        }
        if (self.n_frames as f64) < 8.0 * self.cycles {
            return fail(format!(
                "{} frames cannot hold {} cycles at 8+ samples per cycle",
                self.n_frames, self.cycles
            ));
        }
        if !self.amplitude_drift.is_finite() || self.amplitude_drift < 0.0 {
            return fail(format!(
                "amplitude_drift must be finite and non-negative, got {}",
                self.amplitude_drift
            ));
        }
        if !self.frequency_drift.is_finite() || self.frequency_drift < 0.0 {
            return fail(format!(
                "frequency_drift must be finite and non-negative, got {}",
                self.frequency_drift
            ));
        }
        if let Some(snr) = self.noise_snr_db {
            if !snr.is_finite() || snr <= 0.0 {
                return fail(format!(
                    "noise_snr_db must be finite and positive, got {snr}"
                ));
            }
        }
        if let Some(d) = &self.distractor {
            if !d.period_fraction.is_finite() || d.period_fraction <= 0.0 {
                return fail(format!(
                    "distractor period_fraction must be positive, got {}",
                    d.period_fraction
                ));
            }
            if !d.relative_amplitude.is_finite() || d.relative_amplitude < 0.0 {
                return fail(format!(
                    "distractor relative_amplitude must be non-negative, got {}",
                    d.relative_amplitude
                ));
            }
        }
        Ok(())
    }
}

/// Value of the unit-amplitude, period-one cycle shape at `phase`.
fn shape_value(shape: WaveShape, phase: f64) -> f64 {
    match shape {
        WaveShape::Sine => (TAU * phase).sin(),
        WaveShape::Triangle => {
            let f = phase.fract();
            1.0 - 4.0 * (f - 0.5).abs()
        }
        WaveShape::AsymmetricPulse => {
            // Smooth bump with a fast rise and a slow fall, peaking at RISE.
            const RISE: f64 = 0.3;
            let f = phase.fract();
            if f < RISE {
                let x = (PI * f / (2.0 * RISE)).sin();
                x * x
            } else {
                let x = (PI * (f - RISE) / (2.0 * (1.0 - RISE))).cos();
                x * x
            }
        }
    }
}

/// Accumulated phase (in cycles) at normalized time `t` in `[0, 1)`. With
/// drift the instantaneous frequency compounds by `1 + drift` once per
/// cycle; the warp is normalized so the full span still covers `cycles`.
fn phase_at(cycles: f64, frequency_drift: f64, t: f64) -> f64 {
    if frequency_drift == 0.0 {
        cycles * t
    } else {
        let ratio = (1.0 + frequency_drift).powf(cycles);
        cycles * (ratio.powf(t) - 1.0) / (ratio - 1.0)
    }
}

fn random_unit(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-6 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

/// Generates the fixture matrix and its ground-truth count,
/// `floor(cycles)`. The scalar signal rides on a random unit direction; the
/// optional distractor rides on a direction orthogonalized against it;
/// Gaussian cell noise is scaled so the per-cell signal power over noise
/// power matches `noise_snr_db`.
pub fn generate(spec: &SynthSpec) -> Result<(FeatureMatrix, u32)> {
    spec.validate()?;
    let n = spec.n_frames;
    let d = spec.dim;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let main_dir = random_unit(&mut rng, d);
    let distractor_dir = spec.distractor.map(|_| {
        let mut u = random_unit(&mut rng, d);
        // Two Gram-Schmidt passes push the residual overlap to rounding
        // level even when the raw draw is nearly parallel.
        for _ in 0..2 {
            let dot: f64 = u.iter().zip(&main_dir).map(|(a, b)| a * b).sum();
            for (x, m) in u.iter_mut().zip(&main_dir) {
                *x -= dot * m;
            }
            let norm = u.iter().map(|x| x * x).sum::<f64>().sqrt();
            for x in u.iter_mut() {
                *x /= norm;
            }
        }
        u
    });

    let signal: Vec<f64> = (0..n)
        .map(|u| {
            let t = u as f64 / n as f64;
            let phase = phase_at(spec.cycles, spec.frequency_drift, t);
            let amp = (1.0 + spec.amplitude_drift).powf(phase);
            amp * shape_value(spec.shape, phase)
        })
        .collect();

    let distractor_signal: Option<Vec<f64>> = spec.distractor.map(|dis| {
        let dis_cycles = spec.cycles / dis.period_fraction;
        (0..n)
            .map(|u| {
                let t = u as f64 / n as f64;
                dis.relative_amplitude * (TAU * dis_cycles * t).sin()
            })
            .collect()
    });

    let noise_sigma = spec.noise_snr_db.map(|snr| {
        let mean_sq = signal.iter().map(|x| x * x).sum::<f64>() / n as f64;
        // Per-cell signal power: the unit direction spreads mean_sq over the
        // feature dimension.
        (mean_sq / d as f64 * 10f64.powf(-snr / 10.0)).sqrt()
    });

    let mut values = Vec::with_capacity(n * d);
    for i in 0..n {
        for j in 0..d {
            let mut x = signal[i] * main_dir[j];
            if let (Some(z), Some(dir)) = (&distractor_signal, &distractor_dir) {
                x += z[i] * dir[j];
            }
            if let Some(sigma) = noise_sigma {
                let g: f64 = StandardNormal.sample(&mut rng);
                x += sigma * g;
            }
            values.push(x);
        }
    }

    let ground_truth = spec.cycles.floor() as u32;
    Ok((FeatureMatrix::new(n, d, values)?, ground_truth))
}

/// Naive O(N^2) transform: textbook summation, no recursion, no tables.
/// The angle is reduced with integer arithmetic (`k*u mod N`) so large
/// products cost no precision.
pub fn oracle_dft(w: &Waveform) -> Result<Spectrum> {
    let n = w.len();
    if n > ORACLE_DFT_MAX {
        return Err(Error::SizeExceedsOracleLimit {
            size: n,
            limit: ORACLE_DFT_MAX,
        });
    }
    let samples = w.samples();
    let mut coefficients = Vec::with_capacity(n);
    for k in 0..n {
        let mut re = 0.0f64;
        let mut im = 0.0f64;
        for (u, &x) in samples.iter().enumerate() {
            let m = (k * u) % n;
            let angle = -TAU * m as f64 / n as f64;
            re += x * angle.cos();
            im += x * angle.sin();
        }
        coefficients.push(Complex64::new(re, im));
    }
    Spectrum::new(coefficients)
}

/// Cyclic Jacobi eigendecomposition of a small symmetric matrix. Returns
/// eigenvalues in descending order with matching unit eigenvectors. Slow and
/// simple on purpose: plain rotations until the off-diagonal norm falls
/// below 1e-12 (relative to the matrix norm).
pub fn oracle_eig(matrix: &[Vec<f64>]) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let n = matrix.len();
    if n == 0 {
        return Err(Error::SpecInvalid {
            reason: "oracle_eig needs a non-empty matrix".to_string(),
        });
    }
    if n > ORACLE_EIG_MAX {
        return Err(Error::SizeExceedsOracleLimit {
            size: n,
            limit: ORACLE_EIG_MAX,
        });
    }
    let mut scale = 0.0f64;
    for row in matrix {
        if row.len() != n {
            return Err(Error::SpecInvalid {
                reason: format!("matrix must be square: {n} rows but a row of {}", row.len()),
            });
        }
        for v in row {
            if !v.is_finite() {
                return Err(Error::SpecInvalid {
                    reason: "matrix has non-finite entries".to_string(),
                });
            }
            scale = scale.max(v.abs());
        }
    }
    for (i, row) in matrix.iter().enumerate() {
        for (j, &upper) in row.iter().enumerate().skip(i + 1) {
            if (upper - matrix[j][i]).abs() > 1e-9 * scale.max(1.0) {
                return Err(Error::SpecInvalid {
                    reason: format!("matrix is not symmetric at ({i}, {j})"),
                });
            }
        }
    }

    let mut a: Vec<Vec<f64>> = matrix.to_vec();
    let mut v = vec![vec![0.0f64; n]; n];
    for (i, row) in v.iter_mut().enumerate() {
        row[i] = 1.0;
    }

    let frobenius: f64 = a
        .iter()
        .flat_map(|row| row.iter())
        .map(|x| x * x)
        .sum::<f64>()
        .sqrt();
    let target = 1e-12 * frobenius.max(1.0);

    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum::<f64>()
            .sqrt();
        if off <= target {
            break;
        }
        for p in 0..n - 1 {
            for q in (p + 1)..n {
                let apq = a[p][q];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * apq);
                let t = if theta >= 0.0 {
                    1.0 / (theta + (theta * theta + 1.0).sqrt())
                } else {
                    1.0 / (theta - (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for row in a.iter_mut() {
                    let aip = row[p];
                    let aiq = row[q];
                    row[p] = c * aip - s * aiq;
                    row[q] = s * aip + c * aiq;
                }
                let (head, tail) = a.split_at_mut(q);
                for (apj, aqj) in head[p].iter_mut().zip(tail[0].iter_mut()) {
                    let (x, y) = (*apj, *aqj);
                    *apj = c * x - s * y;
                    *aqj = s * x + c * y;
                }
                for row in v.iter_mut() {
                    let vip = row[p];
                    let viq = row[q];
                    row[p] = c * vip - s * viq;
                    row[q] = s * vip + c * viq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| a[y][y].partial_cmp(&a[x][x]).unwrap().then(x.cmp(&y)));
    let eigenvalues: Vec<f64> = order.iter().map(|&i| a[i][i]).collect();
    let eigenvectors: Vec<Vec<f64>> = order
        .iter()
        .map(|&col| (0..n).map(|row| v[row][col]).collect())
        .collect();
    Ok((eigenvalues, eigenvectors))
}

/// Exhaustive peak scan implementing the detection contract with no
/// shortcuts: every interior rise-to-fall sample is a candidate, prominence
/// comes from full walks to the nearest higher ground, and suppression
/// repeatedly takes the globally highest survivor.
pub fn oracle_peaks(w: &Waveform, p: &PeakParams) -> Vec<usize> {
    let s = w.samples();
    let n = s.len();
    if n < 3 {
        return Vec::new();
    }

    let mut sorted = s.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let pct = |q: f64| -> f64 {
        let rank = q / 100.0 * (sorted.len() - 1) as f64;
        let lo = rank.floor() as usize;
        let frac = rank - lo as f64;
        if lo + 1 < sorted.len() {
            sorted[lo] + (sorted[lo + 1] - sorted[lo]) * frac
        } else {
            sorted[lo]
        }
    };
    let threshold = p.min_prominence_fraction * (pct(95.0) - pct(5.0));

    let mut remaining: Vec<usize> = Vec::new();
    for i in 1..n - 1 {
        if !(s[i - 1] < s[i] && s[i] >= s[i + 1]) {
            continue;
        }
        let mut left_min = s[i];
        let mut j = i;
        while j > 0 {
            j -= 1;
            if s[j] > s[i] {
                break;
            }
            left_min = left_min.min(s[j]);
        }
        let mut right_min = s[i];
        let mut j = i;
        while j + 1 < n {
            j += 1;
            if s[j] > s[i] {
                break;
            }
            right_min = right_min.min(s[j]);
        }
        let prominence = s[i] - left_min.max(right_min);
        if prominence >= threshold {
            remaining.push(i);
        }
    }

    let mut accepted = Vec::new();
    while !remaining.is_empty() {
        let mut best = 0usize;
        for (slot, &i) in remaining.iter().enumerate() {
            if s[i] > s[remaining[best]] {
                best = slot;
            }
        }
        let chosen = remaining[best];
        accepted.push(chosen);
        remaining.retain(|&i| i != chosen && i.abs_diff(chosen) >= p.min_separation);
    }
    accepted.sort_unstable();
    accepted
}
