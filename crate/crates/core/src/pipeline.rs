//! Preprocessing: resampling, robust normalization, seq2point windowing and
//! seeded splits.
//!
//! Normalization subtracts the median and divides by the interquartile range;
//! parameters are fitted per configuration and per signal so the inverse
//! transform recovers original power scales exactly.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Guard divisor when the interquartile range collapses to zero.
pub const IQR_EPSILON: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("output period {out_s}s is not a multiple of input period {in_s}s")]
    NonDivisiblePeriod { in_s: u32, out_s: u32 },
    #[error("empty trace")]
    EmptyTrace,
    #[error("source length {len} is shorter than the window length {window}")]
    SourceShorterThanWindow { len: usize, window: usize },
    #[error("bad window spec: {0}")]
    BadWindowSpec(String),
    #[error("bad split fractions: {0}")]
    BadFractions(String),
    #[error("aligned traces differ in length: {a} vs {b}")]
    LengthMismatch { a: usize, b: usize },
    #[error("window shape mismatch: {0}")]
    ShapeMismatch(String),
}

/// Median/IQR normalization parameters for one signal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustScaleParams {
    pub signal_id: String,
    pub median: f64,
    /// Q3 − Q1; kept as fitted, the ε guard applies only in the transform.
    pub iqr: f64,
}

impl RobustScaleParams {
    fn divisor(&self) -> f64 {
        self.iqr.max(IQR_EPSILON)
    }

    pub fn transform_value(&self, x: f64) -> f64 {
        (x - self.median) / self.divisor()
    }

    pub fn inverse_value(&self, y: f64) -> f64 {
        y * self.divisor() + self.median
    }

    pub fn transform(&self, xs: &[f64]) -> Vec<f64> {
        xs.iter().map(|&x| self.transform_value(x)).collect()
    }

    pub fn inverse(&self, ys: &[f64]) -> Vec<f64> {
        ys.iter().map(|&y| self.inverse_value(y)).collect()
    }
}

/// Quantile by linear interpolation between order statistics on sorted data.
fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    let frac = h - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

/// Fit median and interquartile range for one signal.
pub fn fit_scaler(signal_id: &str, trace: &[f64]) -> Result<RobustScaleParams, PipelineError> {
    if trace.is_empty() {
        return Err(PipelineError::EmptyTrace);
    }
    let mut sorted = trace.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let median = quantile_sorted(&sorted, 0.5);
    let q1 = quantile_sorted(&sorted, 0.25);
    let q3 = quantile_sorted(&sorted, 0.75);
    Ok(RobustScaleParams {
        signal_id: signal_id.to_string(),
        median,
        iqr: q3 - q1,
    })
}

/// Resample by non-overlapping bin means. The output period must be a
/// multiple of the input period; a trailing partial bin is dropped.
pub fn resample(
    values: &[f64],
    period_in_s: u32,
    period_out_s: u32,
) -> Result<Vec<f64>, PipelineError> {
    if period_in_s == 0 || period_out_s == 0 || period_out_s % period_in_s != 0 {
        return Err(PipelineError::NonDivisiblePeriod {
            in_s: period_in_s,
            out_s: period_out_s,
        });
    }
    let bin = (period_out_s / period_in_s) as usize;
    let n_out = values.len() / bin;
    let mut out = Vec::with_capacity(n_out);
    for i in 0..n_out {
        let s = &values[i * bin..(i + 1) * bin];
        out.push(s.iter().sum::<f64>() / bin as f64);
    }
    Ok(out)
}

/// Sliding-window geometry for seq2point training pairs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowSpec {
    pub window_len: usize,
    pub stride: usize,
    /// Zero-based offset of the target sample within each window.
    pub center_index: usize,
}

impl Default for WindowSpec {
    fn default() -> Self {
        // One day of 5-minute samples, stride 25 minutes, centered target.
        Self {
            window_len: 288,
            stride: 5,
            center_index: 144,
        }
    }
}

impl WindowSpec {
    pub fn validate(&self) -> Result<(), PipelineError> {
        if self.window_len == 0 {
            return Err(PipelineError::BadWindowSpec("window_len must be ≥ 1".into()));
        }
        if self.stride == 0 {
            return Err(PipelineError::BadWindowSpec("stride must be ≥ 1".into()));
        }
        if self.center_index >= self.window_len {
            return Err(PipelineError::BadWindowSpec(format!(
                "center_index {} outside window of length {}",
                self.center_index, self.window_len
            )));
        }
        Ok(())
    }

    /// Number of windows over a source of length `len`.
    pub fn count(&self, len: usize) -> usize {
        if len < self.window_len {
            0
        } else {
            (len - self.window_len) / self.stride + 1
        }
    }
}

/// Seq2point training pairs: normalized aggregate windows and the target
/// appliance value at each window's center.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowedDataset {
    pub spec: WindowSpec,
    /// Row-major `len() × spec.window_len` inputs.
    pub inputs: Vec<f32>,
    pub targets: Vec<f32>,
    /// Source sample index of each window's center.
    pub index_map: Vec<usize>,
}

impl WindowedDataset {
    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn window(&self, i: usize) -> &[f32] {
        let w = self.spec.window_len;
        &self.inputs[i * w..(i + 1) * w]
    }

    /// New dataset holding the given window indices, in order.
    pub fn subset(&self, indices: &[usize]) -> WindowedDataset {
        let w = self.spec.window_len;
        let mut inputs = Vec::with_capacity(indices.len() * w);
        let mut targets = Vec::with_capacity(indices.len());
        let mut index_map = Vec::with_capacity(indices.len());
        for &i in indices {
            inputs.extend_from_slice(self.window(i));
            targets.push(self.targets[i]);
            index_map.push(self.index_map[i]);
        }
        WindowedDataset {
            spec: self.spec,
            inputs,
            targets,
            index_map,
        }
    }

    /// Concatenate window sets that share one spec.
    pub fn concat(parts: &[&WindowedDataset]) -> Result<WindowedDataset, PipelineError> {
        let first = parts.first().ok_or(PipelineError::EmptyTrace)?;
        let spec = first.spec;
        let mut out = WindowedDataset {
            spec,
            inputs: Vec::new(),
            targets: Vec::new(),
            index_map: Vec::new(),
        };
        for p in parts {
            if p.spec != spec {
                return Err(PipelineError::ShapeMismatch(format!(
                    "{:?} vs {:?}",
                    p.spec, spec
                )));
            }
            out.inputs.extend_from_slice(&p.inputs);
            out.targets.extend_from_slice(&p.targets);
            out.index_map.extend_from_slice(&p.index_map);
        }
        Ok(out)
    }
}

/// Cut aligned normalized traces into seq2point pairs.
pub fn make_windows(
    aggregate: &[f64],
    target: &[f64],
    spec: WindowSpec,
) -> Result<WindowedDataset, PipelineError> {
    spec.validate()?;
    if aggregate.len() != target.len() {
        return Err(PipelineError::LengthMismatch {
            a: aggregate.len(),
            b: target.len(),
        });
    }
    if aggregate.len() < spec.window_len {
        return Err(PipelineError::SourceShorterThanWindow {
            len: aggregate.len(),
            window: spec.window_len,
        });
    }
    let n = spec.count(aggregate.len());
    let w = spec.window_len;
    let mut inputs = Vec::with_capacity(n * w);
    let mut targets = Vec::with_capacity(n);
    let mut index_map = Vec::with_capacity(n);
    for k in 0..n {
        let start = k * spec.stride;
        for &v in &aggregate[start..start + w] {
            inputs.push(v as f32);
        }
        let center = start + spec.center_index;
        targets.push(target[center] as f32);
        index_map.push(center);
    }
    Ok(WindowedDataset {
        spec,
        inputs,
        targets,
        index_map,
    })
}

/// Random permutation split into train/val/test index sets.
///
/// Deterministic per seed; the three parts are disjoint and exhaustive.
pub fn split_indices(
    n: usize,
    fractions: (f64, f64, f64),
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>, Vec<usize>), PipelineError> {
    let (f1, f2, f3) = fractions;
    if f1 < 0.0 || f2 < 0.0 || f3 < 0.0 {
        return Err(PipelineError::BadFractions("negative fraction".into()));
    }
    if ((f1 + f2 + f3) - 1.0).abs() > 1e-9 {
        return Err(PipelineError::BadFractions(format!(
            "fractions sum to {}, expected 1",
            f1 + f2 + f3
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);

    let n1 = ((f1 * n as f64).round() as usize).min(n);
    let n2 = ((f2 * n as f64).round() as usize).min(n - n1);
    let train = order[..n1].to_vec();
    let val = order[n1..n1 + n2].to_vec();
    let test = order[n1 + n2..].to_vec();
    Ok((train, val, test))
}

/// Split a windowed dataset into train/val/test parts.
pub fn split(
    ds: &WindowedDataset,
    fractions: (f64, f64, f64),
    seed: u64,
) -> Result<(WindowedDataset, WindowedDataset, WindowedDataset), PipelineError> {
    let (train, val, test) = split_indices(ds.len(), fractions, seed)?;
    Ok((ds.subset(&train), ds.subset(&val), ds.subset(&test)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn five_point_quartiles() {
        let p = fit_scaler("x", &[5.0, 3.0, 1.0, 2.0, 4.0]).unwrap();
        assert_eq!(p.median, 3.0);
        assert_eq!(p.iqr, 2.0);
        assert_eq!(p.transform_value(3.0), 0.0);
        assert_eq!(p.transform_value(5.0), 1.0);
    }

    #[test]
    fn constant_trace_transforms_to_zero() {
        let p = fit_scaler("x", &[4.2; 17]).unwrap();
        assert_eq!(p.iqr, 0.0);
        assert!(p.transform(&[4.2; 5]).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn empty_trace_rejected() {
        assert!(matches!(fit_scaler("x", &[]), Err(PipelineError::EmptyTrace)));
    }

    #[test]
    fn resample_five_minute_counts() {
        let v = vec![1.0; 525_600];
        let out = resample(&v, 60, 300).unwrap();
        assert_eq!(out.len(), 105_120);
    }

    #[test]
    fn resample_bin_mean_hand_case() {
        let out = resample(&[1.0, 2.0, 3.0, 4.0, 5.0], 60, 300).unwrap();
        assert_eq!(out, vec![3.0]);
    }

    #[test]
    fn resample_constant_identity() {
        let out = resample(&[7.5; 30], 60, 300).unwrap();
        assert_eq!(out, vec![7.5; 6]);
    }

    #[test]
    fn resample_rejects_non_divisible() {
        assert!(matches!(
            resample(&[1.0; 10], 60, 90),
            Err(PipelineError::NonDivisiblePeriod { .. })
        ));
    }

    #[test]
    fn window_count_formula() {
        let spec = WindowSpec::default();
        assert_eq!(spec.count(288), 1);
        assert_eq!(spec.count(105_120), 20_967);
    }

    #[test]
    fn single_window_boundary() {
        let agg: Vec<f64> = (0..288).map(|i| i as f64).collect();
        let ds = make_windows(&agg, &agg, WindowSpec::default()).unwrap();
        assert_eq!(ds.len(), 1);
        assert_eq!(ds.targets[0], 144.0);
        assert_eq!(ds.index_map[0], 144);
    }

    #[test]
    fn targets_map_to_center_samples() {
        let n = 2000;
        let agg: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let tgt: Vec<f64> = (0..n).map(|i| i as f64 * 2.0).collect();
        let spec = WindowSpec::default();
        let ds = make_windows(&agg, &tgt, spec).unwrap();
        for k in 0..ds.len() {
            let center = k * spec.stride + spec.center_index;
            assert_eq!(ds.index_map[k], center);
            assert_eq!(ds.targets[k], tgt[center] as f32);
        }
    }

    #[test]
    fn too_short_source_rejected() {
        let v = vec![0.0; 100];
        assert!(matches!(
            make_windows(&v, &v, WindowSpec::default()),
            Err(PipelineError::SourceShorterThanWindow { .. })
        ));
    }

    #[test]
    fn split_sizes_match_default_fractions() {
        let (a, b, c) = split_indices(10_000, (0.7225, 0.1275, 0.15), 3).unwrap();
        assert_eq!((a.len(), b.len(), c.len()), (7225, 1275, 1500));
    }

    #[test]
    fn degenerate_split_all_train() {
        let (a, b, c) = split_indices(57, (1.0, 0.0, 0.0), 3).unwrap();
        assert_eq!((a.len(), b.len(), c.len()), (57, 0, 0));
    }

    #[test]
    fn split_rejects_bad_fractions() {
        assert!(split_indices(10, (0.5, 0.2, 0.2), 0).is_err());
        assert!(split_indices(10, (-0.1, 0.6, 0.5), 0).is_err());
    }

    #[test]
    fn split_deterministic_per_seed() {
        let a = split_indices(1000, (0.8, 0.1, 0.1), 42).unwrap();
        let b = split_indices(1000, (0.8, 0.1, 0.1), 42).unwrap();
        let c = split_indices(1000, (0.8, 0.1, 0.1), 43).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.0, c.0);
    }

    proptest! {
        #[test]
        fn round_trip_inverse_transform(values in proptest::collection::vec(-1e7f64..1e7, 1..300)) {
            let p = fit_scaler("t", &values).unwrap();
            let fwd = p.transform(&values);
            let back = p.inverse(&fwd);
            for (orig, rec) in values.iter().zip(&back) {
                let scale = orig.abs().max(1.0);
                prop_assert!((orig - rec).abs() / scale < 1e-9);
            }
        }

        #[test]
        fn window_count_holds_for_random_shapes(
            t in 1usize..4000,
            w in 1usize..500,
            stride in 1usize..40,
        ) {
            prop_assume!(t >= w);
            let agg = vec![0.0f64; t];
            let spec = WindowSpec { window_len: w, stride, center_index: w / 2 };
            let ds = make_windows(&agg, &agg, spec).unwrap();
            prop_assert_eq!(ds.len(), (t - w) / stride + 1);
        }

        #[test]
        fn resample_preserves_mean_when_divisible(
            bins in 1usize..50,
            bin_size in 1usize..20,
        ) {
            let n = bins * bin_size;
            let values: Vec<f64> = (0..n).map(|i| ((i * 7919) % 1000) as f64 - 500.0).collect();
            let out = resample(&values, 60, 60 * bin_size as u32).unwrap();
            let mean_in: f64 = values.iter().sum::<f64>() / n as f64;
            let mean_out: f64 = out.iter().sum::<f64>() / out.len() as f64;
            prop_assert!((mean_in - mean_out).abs() <= 1e-9 * mean_in.abs().max(1.0));
        }

        #[test]
        fn splits_disjoint_and_exhaustive(n in 0usize..500, seed in 0u64..50) {
            let (a, b, c) = split_indices(n, (0.6, 0.2, 0.2), seed).unwrap();
            let mut all: Vec<usize> = a.iter().chain(&b).chain(&c).copied().collect();
            all.sort_unstable();
            let expect: Vec<usize> = (0..n).collect();
            prop_assert_eq!(all, expect);
        }
    }
}
