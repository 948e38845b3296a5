//! Evaluation statistics: regression metrics on de-normalized power,
//! histogram KL/JS divergences, Friedman + Nemenyi rank analysis and a 2-D
//! principal-component projection for distribution plots.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("length mismatch: {a} vs {b}")]
    LengthMismatch { a: usize, b: usize },
    #[error("need at least {min} samples, got {got}")]
    TooFewSamples { min: usize, got: usize },
    #[error("NDE undefined: target signal is identically zero")]
    UndefinedNde,
    #[error("R² undefined: target signal has zero variance")]
    UndefinedR2,
    #[error("empty sample set")]
    EmptyInput,
    #[error("histogram needs at least one bin")]
    NoBins,
    #[error("rank test needs k ≥ 3 methods and N ≥ 2 blocks, got k={k}, n={n}")]
    DegenerateMatrix { k: usize, n: usize },
    #[error("no critical-value table for alpha {alpha} and k {k}")]
    UnsupportedAlpha { alpha: f64, k: usize },
    #[error("input has zero variance")]
    ZeroVariance,
}

/// Regression quality of de-normalized predictions. Errors are reported in
/// MW to keep table magnitudes readable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub mae_mw: f64,
    pub mse_mw2: f64,
    pub r2: f64,
    pub nde: f64,
    pub n: usize,
}

const W_PER_MW: f64 = 1e6;

/// Compute MAE/MSE/R²/NDE between true and predicted power in watts.
pub fn regression_metrics(y_true_w: &[f64], y_pred_w: &[f64]) -> Result<MetricsReport, MetricsError> {
    if y_true_w.len() != y_pred_w.len() {
        return Err(MetricsError::LengthMismatch {
            a: y_true_w.len(),
            b: y_pred_w.len(),
        });
    }
    let n = y_true_w.len();
    if n < 2 {
        return Err(MetricsError::TooFewSamples { min: 2, got: n });
    }
    let nf = n as f64;
    let mean_y: f64 = y_true_w.iter().sum::<f64>() / nf;

    let mut abs_sum = 0.0;
    let mut sq_sum = 0.0;
    let mut ss_res = 0.0;
    let mut ss_tot = 0.0;
    let mut y_sq = 0.0;
    for (&y, &p) in y_true_w.iter().zip(y_pred_w) {
        let d = y - p;
        abs_sum += d.abs();
        sq_sum += d * d;
        ss_res += d * d;
        ss_tot += (y - mean_y) * (y - mean_y);
        y_sq += y * y;
    }
    if y_sq == 0.0 {
        return Err(MetricsError::UndefinedNde);
    }
    if ss_tot == 0.0 {
        return Err(MetricsError::UndefinedR2);
    }
    Ok(MetricsReport {
        mae_mw: abs_sum / nf / W_PER_MW,
        mse_mw2: sq_sum / nf / (W_PER_MW * W_PER_MW),
        r2: 1.0 - ss_res / ss_tot,
        nde: sq_sum / y_sq,
        n,
    })
}

/// Histogram divergences between two sample sets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DivergenceReport {
    /// KL(P‖Q) where P is the first argument's distribution (nats).
    pub kl: f64,
    /// KL(Q‖P), reported alongside since the direction is a convention.
    pub kl_reverse: f64,
    /// Jensen-Shannon divergence (nats, ≤ ln 2).
    pub js: f64,
    pub bins: usize,
    pub smoothing_eps: f64,
}

/// Default number of equal-width histogram bins.
pub const DIVERGENCE_BINS: usize = 100;
/// Default additive smoothing mass per bin.
pub const DIVERGENCE_EPS: f64 = 1e-8;

fn kl_divergence(p: &[f64], q: &[f64]) -> f64 {
    p.iter()
        .zip(q)
        .map(|(&pi, &qi)| {
            if pi > 0.0 {
                pi * (pi / qi).ln()
            } else {
                0.0
            }
        })
        .sum()
}

/// Estimate KL and JS divergence between `a` and `b` with a shared
/// equal-width binning over the pooled range and additive smoothing.
pub fn histogram_divergence(
    a: &[f64],
    b: &[f64],
    bins: usize,
    eps: f64,
) -> Result<DivergenceReport, MetricsError> {
    if a.is_empty() || b.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    if bins == 0 {
        return Err(MetricsError::NoBins);
    }
    let lo = a
        .iter()
        .chain(b)
        .fold(f64::INFINITY, |m, &v| m.min(v));
    let hi = a
        .iter()
        .chain(b)
        .fold(f64::NEG_INFINITY, |m, &v| m.max(v));
    let width = hi - lo;

    let histogram = |xs: &[f64]| -> Vec<f64> {
        let mut counts = vec![0.0f64; bins];
        for &x in xs {
            let idx = if width == 0.0 {
                0
            } else {
                (((x - lo) / width) * bins as f64).floor() as usize
            };
            counts[idx.min(bins - 1)] += 1.0;
        }
        let n = xs.len() as f64;
        let norm = 1.0 + bins as f64 * eps;
        counts.iter().map(|&c| (c / n + eps) / norm).collect()
    };

    let p = histogram(a);
    let q = histogram(b);
    let m: Vec<f64> = p.iter().zip(&q).map(|(&x, &y)| 0.5 * (x + y)).collect();
    Ok(DivergenceReport {
        kl: kl_divergence(&p, &q),
        kl_reverse: kl_divergence(&q, &p),
        js: 0.5 * kl_divergence(&p, &m) + 0.5 * kl_divergence(&q, &m),
        bins,
        smoothing_eps: eps,
    })
}

/// Nemenyi critical values q_α for α = 0.05, index by k − 2 (k = 2..=20).
const NEMENYI_Q_05: [f64; 19] = [
    1.960, 2.343, 2.569, 2.728, 2.850, 2.949, 3.031, 3.102, 3.164, 3.219, 3.268, 3.313, 3.354,
    3.391, 3.426, 3.458, 3.489, 3.517, 3.544,
];
/// Nemenyi critical values q_α for α = 0.10.
const NEMENYI_Q_10: [f64; 19] = [
    1.645, 2.052, 2.291, 2.459, 2.589, 2.693, 2.780, 2.855, 2.920, 2.978, 3.030, 3.077, 3.120,
    3.159, 3.196, 3.230, 3.261, 3.291, 3.319,
];

fn nemenyi_q(alpha: f64, k: usize) -> Result<f64, MetricsError> {
    let table = if (alpha - 0.05).abs() < 1e-12 {
        &NEMENYI_Q_05
    } else if (alpha - 0.10).abs() < 1e-12 {
        &NEMENYI_Q_10
    } else {
        return Err(MetricsError::UnsupportedAlpha { alpha, k });
    };
    if !(2..=20).contains(&k) {
        return Err(MetricsError::UnsupportedAlpha { alpha, k });
    }
    Ok(table[k - 2])
}

/// Rank-based comparison of k methods over N blocks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankReport {
    /// Mean fractional rank of each method (1 = best).
    pub avg_ranks: Vec<f64>,
    pub friedman_statistic: f64,
    pub p_value: f64,
    pub nemenyi_critical_difference: f64,
    /// `significant[i][j]` — methods i and j differ by more than the CD.
    pub significant: Vec<Vec<bool>>,
    pub alpha: f64,
    pub methods: usize,
    pub blocks: usize,
}

/// Fractional ranks of one block's scores (lower score → rank 1).
/// Ties receive the average of the positions they span.
pub fn fractional_ranks(scores: &[f64]) -> Vec<f64> {
    let k = scores.len();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).unwrap_or(std::cmp::Ordering::Equal));
    let mut ranks = vec![0.0; k];
    let mut i = 0;
    while i < k {
        let mut j = i;
        while j + 1 < k && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // positions i..=j (0-based) share the average 1-based rank
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// Friedman test with tie correction plus the Nemenyi post-hoc critical
/// difference. `scores[m][b]` is method m's score in block b; lower is
/// better.
pub fn friedman_nemenyi(scores: &[Vec<f64>], alpha: f64) -> Result<RankReport, MetricsError> {
    let k = scores.len();
    let n = scores.first().map_or(0, |s| s.len());
    if k < 3 || n < 2 {
        return Err(MetricsError::DegenerateMatrix { k, n });
    }
    for s in scores {
        if s.len() != n {
            return Err(MetricsError::LengthMismatch { a: s.len(), b: n });
        }
    }

    let mut rank_sums = vec![0.0f64; k];
    let mut tie_term = 0.0f64; // Σ over blocks of Σ (t³ − t) per tie group
    for b in 0..n {
        let block: Vec<f64> = (0..k).map(|m| scores[m][b]).collect();
        let ranks = fractional_ranks(&block);
        for (m, r) in ranks.iter().enumerate() {
            rank_sums[m] += r;
        }
        // count tie-group sizes
        let mut sorted = block.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
        let mut i = 0;
        while i < k {
            let mut j = i;
            while j + 1 < k && sorted[j + 1] == sorted[i] {
                j += 1;
            }
            let t = (j - i + 1) as f64;
            tie_term += t * t * t - t;
            i = j + 1;
        }
    }
    let avg_ranks: Vec<f64> = rank_sums.iter().map(|&s| s / n as f64).collect();

    let nf = n as f64;
    let kf = k as f64;
    let raw = 12.0 / (nf * kf * (kf + 1.0))
        * rank_sums.iter().map(|&s| s * s).sum::<f64>()
        - 3.0 * nf * (kf + 1.0);
    let correction = 1.0 - tie_term / (nf * (kf * kf * kf - kf));
    let (statistic, p_value) = if correction <= 0.0 {
        // every block fully tied: no evidence of any difference
        (0.0, 1.0)
    } else {
        let stat = (raw / correction).max(0.0);
        let chi2 = ChiSquared::new(kf - 1.0).expect("df ≥ 2");
        (stat, 1.0 - chi2.cdf(stat))
    };

    let q = nemenyi_q(alpha, k)?;
    let cd = q * (kf * (kf + 1.0) / (6.0 * nf)).sqrt();
    let significant = (0..k)
        .map(|i| {
            (0..k)
                .map(|j| i != j && (avg_ranks[i] - avg_ranks[j]).abs() > cd)
                .collect()
        })
        .collect();

    Ok(RankReport {
        avg_ranks,
        friedman_statistic: statistic,
        p_value,
        nemenyi_critical_difference: cd,
        significant,
        alpha,
        methods: k,
        blocks: n,
    })
}

/// 2-D principal-component projection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pca2d {
    /// Per-row coordinates on the top two principal axes.
    pub coords: Vec<[f64; 2]>,
    /// Variances along the two axes.
    pub eigenvalues: [f64; 2],
    /// The two principal axes (unit loadings, d entries each).
    pub axes: [Vec<f64>; 2],
}

const PCA_TOL: f64 = 1e-9;
const PCA_MAX_ITERS: usize = 2000;

/// Dominant eigenpair of a symmetric matrix by power iteration.
fn power_iteration(cov: &[f64], d: usize) -> (f64, Vec<f64>) {
    let mut v = vec![1.0 / (d as f64).sqrt(); d];
    // deterministic asymmetric perturbation so iteration can leave
    // eigenvector-orthogonal starting points
    for (i, x) in v.iter_mut().enumerate() {
        *x += 1e-3 * ((i % 7) as f64 - 3.0) / (d as f64).sqrt();
    }
    let mut lambda = 0.0f64;
    for _ in 0..PCA_MAX_ITERS {
        let mut next = vec![0.0f64; d];
        for r in 0..d {
            let row = &cov[r * d..(r + 1) * d];
            next[r] = row.iter().zip(&v).map(|(&c, &x)| c * x).sum();
        }
        let norm = next.iter().map(|&x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            return (0.0, v);
        }
        for x in &mut next {
            *x /= norm;
        }
        let new_lambda = norm;
        let done = (new_lambda - lambda).abs() <= PCA_TOL * new_lambda.abs().max(1e-300);
        v = next;
        lambda = new_lambda;
        if done {
            break;
        }
    }
    // sign convention: largest-magnitude loading is positive
    let (mut max_i, mut max_a) = (0, 0.0f64);
    for (i, &x) in v.iter().enumerate() {
        if x.abs() > max_a {
            max_a = x.abs();
            max_i = i;
        }
    }
    if v[max_i] < 0.0 {
        for x in &mut v {
            *x = -*x;
        }
    }
    (lambda, v)
}

/// Project rows onto the top two principal axes of their covariance.
///
/// `data` is row-major `n × d`. Power iteration with deflation, deterministic
/// start and sign convention.
pub fn pca_project_2d(data: &[f32], n: usize, d: usize) -> Result<Pca2d, MetricsError> {
    if n < 2 || d == 0 {
        return Err(MetricsError::TooFewSamples { min: 2, got: n });
    }
    assert_eq!(data.len(), n * d, "data length must be n × d");

    let mut means = vec![0.0f64; d];
    for r in 0..n {
        for c in 0..d {
            means[c] += f64::from(data[r * d + c]);
        }
    }
    for m in &mut means {
        *m /= n as f64;
    }

    // covariance (d × d)
    let mut cov = vec![0.0f64; d * d];
    for r in 0..n {
        let row = &data[r * d..(r + 1) * d];
        for i in 0..d {
            let xi = f64::from(row[i]) - means[i];
            if xi == 0.0 {
                continue;
            }
            for j in i..d {
                cov[i * d + j] += xi * (f64::from(row[j]) - means[j]);
            }
        }
    }
    let denom = (n - 1) as f64;
    for i in 0..d {
        for j in i..d {
            let v = cov[i * d + j] / denom;
            cov[i * d + j] = v;
            cov[j * d + i] = v;
        }
    }
    let total_var: f64 = (0..d).map(|i| cov[i * d + i]).sum();
    if total_var <= 0.0 {
        return Err(MetricsError::ZeroVariance);
    }

    let (l1, v1) = power_iteration(&cov, d);
    // deflation: remove the first component
    for i in 0..d {
        for j in 0..d {
            cov[i * d + j] -= l1 * v1[i] * v1[j];
        }
    }
    let (l2, v2) = power_iteration(&cov, d);

    let coords = (0..n)
        .map(|r| {
            let row = &data[r * d..(r + 1) * d];
            let mut c1 = 0.0;
            let mut c2 = 0.0;
            for i in 0..d {
                let x = f64::from(row[i]) - means[i];
                c1 += x * v1[i];
                c2 += x * v2[i];
            }
            [c1, c2]
        })
        .collect();

    Ok(Pca2d {
        coords,
        eigenvalues: [l1, l2],
        axes: [v1, v2],
    })
}
