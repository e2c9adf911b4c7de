//! Peak detection on the filtered waveform and the end-to-end repetition
//! counter that ties projection, filtering and detection together.

use std::borrow::Cow;
use std::fmt;
use std::str::FromStr;

use serde::ser::SerializeStruct;
use serde::{Deserialize, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::matrix_io::{FeatureMatrix, StreamKind};
use crate::pca::{first_component_waveform, Waveform};
use crate::spectral::{dft, fmf, high_band_count, select_alpha, FmfConfig, FmfTrace};

/// Peak acceptance rules: a candidate must rise at least
/// `min_prominence_fraction` of the waveform's robust range (95th minus 5th
/// percentile) above its surrounding terrain, and two reported peaks must be
/// at least `min_separation` samples apart.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeakParams {
    pub min_prominence_fraction: f64,
    pub min_separation: usize,
}

impl Default for PeakParams {
    fn default() -> Self {
        PeakParams {
            min_prominence_fraction: 0.15,
            min_separation: 3,
        }
    }
}

impl PeakParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.min_prominence_fraction > 0.0 && self.min_prominence_fraction < 1.0) {
            return Err(Error::InvalidConfig {
                reason: format!(
                    "min_prominence_fraction must lie in (0, 1), got {}",
                    self.min_prominence_fraction
                ),
            });
        }
        if self.min_separation == 0 {
            return Err(Error::InvalidConfig {
                reason: "min_separation must be at least 1".to_string(),
            });
        }
        Ok(())
    }
}

/// Which stream(s) feed the projection: one of the two matrices as-is, or
/// both glued frame-by-frame along the feature axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FusionMode {
    Spatial,
    Temporal,
    Concat,
}

impl fmt::Display for FusionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FusionMode::Spatial => "spatial",
            FusionMode::Temporal => "temporal",
            FusionMode::Concat => "concat",
        })
    }
}

impl FromStr for FusionMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "spatial" => Ok(FusionMode::Spatial),
            "temporal" => Ok(FusionMode::Temporal),
            "concat" => Ok(FusionMode::Concat),
            other => Err(Error::InvalidConfig {
                reason: format!(
                    "unknown fusion mode {other:?} (expected spatial, temporal or concat)"
                ),
            }),
        }
    }
}

/// Result of one counting run. Serializes flat:
/// `{"count": .., "peaks": [..], "alpha": .., "band_count": ..,
///   "kept_energy_fraction": .., "stream": ".."}`.
#[derive(Debug, Clone, PartialEq)]
pub struct CountReport {
    pub count: usize,
    pub peaks: Vec<usize>,
    pub trace: FmfTrace,
    pub stream: FusionMode,
}

impl Serialize for CountReport {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut st = serializer.serialize_struct("CountReport", 6)?;
        st.serialize_field("count", &self.count)?;
        st.serialize_field("peaks", &self.peaks)?;
        st.serialize_field("alpha", &self.trace.alpha)?;
        st.serialize_field("band_count", &self.trace.band_count)?;
        st.serialize_field("kept_energy_fraction", &self.trace.kept_energy_fraction)?;
        st.serialize_field("stream", &self.stream)?;
        st.end()
    }
}

/// Linear-interpolation percentile of pre-sorted samples, `q` in `[0, 100]`.
fn percentile(sorted: &[f64], q: f64) -> f64 {
    let rank = q / 100.0 * (sorted.len() - 1) as f64;
    let lo = rank.floor() as usize;
    let frac = rank - lo as f64;
    if lo + 1 < sorted.len() {
        sorted[lo] + (sorted[lo + 1] - sorted[lo]) * frac
    } else {
        sorted[lo]
    }
}

/// Topographic prominence of the local maximum at `i`: its height above the
/// higher of the two valley floors reached before strictly taller terrain.
fn prominence(s: &[f64], i: usize) -> f64 {
    let peak = s[i];
    let mut left_base = peak;
    let mut j = i;
    while j > 0 {
        j -= 1;
        if s[j] > peak {
            break;
        }
        left_base = left_base.min(s[j]);
    }
    let mut right_base = peak;
    let mut j = i;
    while j + 1 < s.len() {
        j += 1;
        if s[j] > peak {
            break;
        }
        right_base = right_base.min(s[j]);
    }
    peak - left_base.max(right_base)
}

/// Indices of accepted peaks, ascending. Candidates are interior samples
/// strictly above their left neighbor and at least as high as their right
/// neighbor (so a flat top counts once, at its left edge). Candidates below
/// the prominence threshold are dropped; the rest are admitted greedily from
/// the highest down (ties to the lower index), skipping any candidate closer
/// than `min_separation` to an already accepted peak.
pub fn detect_peaks(w: &Waveform, params: &PeakParams) -> Vec<usize> {
    let s = w.samples();
    let n = s.len();
    if n < 3 {
        return Vec::new();
    }

    let mut sorted = s.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let robust_range = percentile(&sorted, 95.0) - percentile(&sorted, 5.0);
    let threshold = params.min_prominence_fraction * robust_range;

    let mut candidates: Vec<usize> = (1..n - 1)
        .filter(|&i| s[i - 1] < s[i] && s[i] >= s[i + 1])
        .filter(|&i| prominence(s, i) >= threshold)
        .collect();
    candidates.sort_by(|&a, &b| s[b].partial_cmp(&s[a]).unwrap().then(a.cmp(&b)));

    let mut accepted: Vec<usize> = Vec::new();
    for i in candidates {
        if accepted
            .iter()
            .all(|&j| i.abs_diff(j) >= params.min_separation)
        {
            accepted.push(i);
        }
    }
    accepted.sort_unstable();
    accepted
}

/// Runs the full pipeline on the selected stream(s): project to the first
/// principal component, filter (or, with filtering disabled, record what the
/// filter would have chosen), then count peaks. The waveform's sign is
/// arbitrary, so peaks are detected in both orientations and the richer set
/// wins; on a tie the upright orientation is kept.
pub fn count_repetitions(
    spatial: Option<&FeatureMatrix>,
    temporal: Option<&FeatureMatrix>,
    fusion: FusionMode,
    cfg: &FmfConfig,
    params: &PeakParams,
) -> Result<CountReport> {
    cfg.validate()?;
    params.validate()?;

    fn require(m: Option<&FeatureMatrix>, stream: StreamKind) -> Result<&FeatureMatrix> {
        m.ok_or(Error::MissingStream { stream })
    }
    let working: Cow<'_, FeatureMatrix> = match fusion {
        FusionMode::Spatial => Cow::Borrowed(require(spatial, StreamKind::Spatial)?),
        FusionMode::Temporal => Cow::Borrowed(require(temporal, StreamKind::Temporal)?),
        FusionMode::Concat => {
            let s = require(spatial, StreamKind::Spatial)?;
            let t = require(temporal, StreamKind::Temporal)?;
            Cow::Owned(s.concat_features(t)?)
        }
    };

    let raw = first_component_waveform(&working)?;
    let (filtered, trace) = if cfg.enabled {
        fmf(&raw, cfg)?
    } else {
        let spectrum = dft(&raw);
        let trace = FmfTrace {
            alpha: select_alpha(&spectrum, cfg),
            band_count: high_band_count(&spectrum, cfg),
            kept_energy_fraction: 1.0,
        };
        (raw, trace)
    };

    let upright = detect_peaks(&filtered, params);
    let flipped = detect_peaks(&filtered.negated(), params);
    let peaks = if flipped.len() > upright.len() {
        flipped
    } else {
        upright
    };

    Ok(CountReport {
        count: peaks.len(),
        peaks,
        trace,
        stream: fusion,
    })
}
