//! PCA over frame features: centering, covariance, eigendecomposition and
//! projection to one-dimensional motion waveforms.

use std::path::Path;

use crate::error::{Error, Result};
use crate::matrix_io::FeatureMatrix;

/// One-dimensional signal, one sample per frame. Always at least two finite
/// samples; `frame_rate` is carried as metadata only.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    samples: Vec<f64>,
    frame_rate: Option<f64>,
}

impl Waveform {
    /// Wraps samples after checking there are at least two and all are finite.
    pub fn new(samples: Vec<f64>) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::InvalidShape {
                reason: format!("waveform needs at least 2 samples, got {}", samples.len()),
            });
        }
        if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidShape {
                reason: format!("waveform has a non-finite sample at index {i}"),
            });
        }
        Ok(Self {
            samples,
            frame_rate: None,
        })
    }

    pub fn with_frame_rate(mut self, frame_rate: f64) -> Self {
        self.frame_rate = Some(frame_rate);
        self
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn frame_rate(&self) -> Option<f64> {
        self.frame_rate
    }

    /// Flips the sign of every sample, keeping metadata.
    pub fn negated(&self) -> Waveform {
        Waveform {
            samples: self.samples.iter().map(|v| -v).collect(),
            frame_rate: self.frame_rate,
        }
    }

    /// Writes the text export format: one sample per line, shortest
    /// round-tripping decimals, LF line endings.
    pub fn save_text(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut out = String::new();
        for v in &self.samples {
            out.push_str(&v.to_string());
            out.push('\n');
        }
        std::fs::write(path, out).map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: e,
        })
    }
}

/// Fitted PCA basis: per-feature mean, orthonormal axes (rows of descending
/// variance) and the matching non-negative eigenvalues.
#[derive(Debug, Clone, PartialEq)]
pub struct PcaModel {
    mean: Vec<f64>,
    axes: Vec<Vec<f64>>,
    eigenvalues: Vec<f64>,
}

impl PcaModel {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn component_count(&self) -> usize {
        self.axes.len()
    }

    pub fn mean_vector(&self) -> &[f64] {
        &self.mean
    }

    pub fn axes(&self) -> &[Vec<f64>] {
        &self.axes
    }

    pub fn axis(&self, i: usize) -> &[f64] {
        &self.axes[i]
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }
}

/// Fixes an axis's sign so its largest-magnitude component is positive;
/// ties break toward the lowest index. Makes eigenvector signs reproducible.
pub(crate) fn canonicalize_sign(axis: &mut [f64]) {
    let mut best = 0usize;
    let mut best_mag = f64::NEG_INFINITY;
    for (i, v) in axis.iter().enumerate() {
        let mag = v.abs();
        if mag > best_mag {
            best_mag = mag;
            best = i;
        }
    }
    if axis[best] < 0.0 {
        for v in axis.iter_mut() {
            *v = -*v;
        }
    }
}

/// Fits a `k`-component PCA model. The covariance uses the population
/// convention (divide by the frame count). When there are fewer frames than
/// features the decomposition runs on the frame-by-frame Gram matrix, which
/// yields the same leading axes at far lower cost.
pub fn fit_pca(m: &FeatureMatrix, k: usize) -> Result<PcaModel> {
    imp::fit_pca(m, k)
}

/// Projects every frame of `m` onto one model axis, producing a waveform
/// with one sample per frame.
pub fn project(m: &FeatureMatrix, model: &PcaModel, component_index: usize) -> Result<Waveform> {
    if m.dim() != model.dim() {
        return Err(Error::DimensionMismatch {
            matrix_dim: m.dim(),
            model_dim: model.dim(),
        });
    }
    if component_index >= model.component_count() {
        return Err(Error::BadComponentIndex {
            index: component_index,
            count: model.component_count(),
        });
    }
    let axis = model.axis(component_index);
    let mean = model.mean_vector();
    let samples: Vec<f64> = (0..m.n_frames())
        .map(|i| {
            m.row(i)
                .iter()
                .zip(mean)
                .zip(axis)
                .map(|((x, mu), a)| (x - mu) * a)
                .sum()
        })
        .collect();
    Waveform::new(samples)
}

/// Convenience for the main pipeline: fit one component and project onto it.
pub fn first_component_waveform(m: &FeatureMatrix) -> Result<Waveform> {
    let model = fit_pca(m, 1)?;
    project(m, &model, 0)
}

mod imp {
    use super::*;
    use nalgebra::DMatrix;

    /// Relative scale below which a centered matrix counts as all-identical
    /// frames (no variance left to decompose).
    const DEGENERACY_TOL: f64 = 1e-12;

    pub(super) fn fit_pca(m: &FeatureMatrix, k: usize) -> Result<PcaModel> {
        let n = m.n_frames();
        let d = m.dim();
        if k == 0 {
            return Err(Error::InvalidConfig {
                reason: "component count k must be at least 1".to_string(),
            });
        }
        let max_k = n.min(d);
        if k > max_k {
            return Err(Error::KTooLarge { k, max: max_k });
        }

        let mut mean = vec![0.0f64; d];
        for i in 0..n {
            for (j, v) in m.row(i).iter().enumerate() {
                mean[j] += v;
            }
        }
        for v in mean.iter_mut() {
            *v /= n as f64;
        }

        let mut centered = Vec::with_capacity(n * d);
        let mut max_centered = 0.0f64;
        let mut max_raw = 0.0f64;
        for i in 0..n {
            for (j, v) in m.row(i).iter().enumerate() {
                let c = v - mean[j];
                max_centered = max_centered.max(c.abs());
                max_raw = max_raw.max(v.abs());
                centered.push(c);
            }
        }
        if max_centered <= DEGENERACY_TOL * max_raw.max(1.0) {
            return Err(Error::DegenerateMatrix);
        }

        let x = DMatrix::from_row_slice(n, d, &centered);
        let (mut eigenvalues, mut axes) = if d <= n {
            covariance_route(&x, k)
        } else {
            gram_route(&x, k)
        };

        for v in eigenvalues.iter_mut() {
            // The covariance is positive semidefinite; tiny negatives are
            // rounding noise.
            if *v < 0.0 {
                *v = 0.0;
            }
        }
        for axis in axes.iter_mut() {
            canonicalize_sign(axis);
        }

        Ok(PcaModel {
            mean,
            axes,
            eigenvalues,
        })
    }

    /// Ordinary route: decompose the dim-by-dim covariance.
    fn covariance_route(x: &DMatrix<f64>, k: usize) -> (Vec<f64>, Vec<Vec<f64>>) {
        let n = x.nrows() as f64;
        let cov = (x.transpose() * x) / n;
        let eig = cov.symmetric_eigen();
        let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
        order.sort_by(|&a, &b| {
            eig.eigenvalues[b]
                .partial_cmp(&eig.eigenvalues[a])
                .unwrap()
                .then(a.cmp(&b))
        });
        let eigenvalues = order.iter().take(k).map(|&i| eig.eigenvalues[i]).collect();
        let axes = order
            .iter()
            .take(k)
            .map(|&i| eig.eigenvectors.column(i).iter().copied().collect())
            .collect();
        (eigenvalues, axes)
    }

    /// Few-frames route: decompose the frame-by-frame Gram matrix and map its
    /// eigenvectors u back to feature space via X'u / sqrt(n * lambda).
    fn gram_route(x: &DMatrix<f64>, k: usize) -> (Vec<f64>, Vec<Vec<f64>>) {
        let n = x.nrows() as f64;
        let gram = (x * x.transpose()) / n;
        let eig = gram.symmetric_eigen();
        let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
        order.sort_by(|&a, &b| {
            eig.eigenvalues[b]
                .partial_cmp(&eig.eigenvalues[a])
                .unwrap()
                .then(a.cmp(&b))
        });

        let lambda_max = eig.eigenvalues[order[0]].max(0.0);
        let rank_tol = lambda_max * 1e-12;
        let mut eigenvalues = Vec::with_capacity(k);
        let mut axes: Vec<Vec<f64>> = Vec::with_capacity(k);
        for &i in order.iter().take(k) {
            let lambda = eig.eigenvalues[i];
            if lambda <= rank_tol {
                break;
            }
            let u = eig.eigenvectors.column(i);
            let v = x.transpose() * u;
            let norm = v.norm();
            axes.push(v.iter().map(|c| c / norm).collect());
            eigenvalues.push(lambda);
        }

        // Centering caps the rank at n_frames - 1, so a caller may legally ask
        // for more axes than carry variance. Pad deterministically with unit
        // vectors orthogonal to everything found so far, at eigenvalue zero.
        let d = x.ncols();
        let mut basis_probe = 0usize;
        while axes.len() < k && basis_probe < d {
            let mut cand = vec![0.0f64; d];
            cand[basis_probe] = 1.0;
            basis_probe += 1;
            for axis in &axes {
                let dot: f64 = cand.iter().zip(axis).map(|(a, b)| a * b).sum();
                for (c, a) in cand.iter_mut().zip(axis) {
                    *c -= dot * a;
                }
            }
            let norm: f64 = cand.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > 0.5 {
                for c in cand.iter_mut() {
                    *c /= norm;
                }
                axes.push(cand);
                eigenvalues.push(0.0);
            }
        }
        (eigenvalues, axes)
    }
}
