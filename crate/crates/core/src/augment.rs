//! Training-set augmentation by whole-series appliance rescaling.
//!
//! The contribution-weighted method (`amda`) scales appliance `i` by
//! `S_i = s · (1 − p_i)`, where `p_i` is the appliance's share of total
//! absolute energy, so low-contribution appliances are amplified and
//! dominant ones damped. The random baseline (`rdm`) applies one factor
//! from a fixed list to every appliance of a copy. Augmented aggregates
//! are always recomputed as the sum of the scaled columns.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sim::{
    trace_energy_mwh, ApplianceKind, ApplianceTrace, EnergySummary, FacilityDataset,
};

#[derive(Debug, Error)]
pub enum AugmentError {
    #[error("contributions undefined: all appliance signals are identically zero")]
    UndefinedContribution,
    #[error("dataset has no appliances")]
    NoAppliances,
    #[error("scaling hyper-parameter must be non-negative, got {0}")]
    NegativeScale(f64),
    #[error("factor list is empty")]
    EmptyFactors,
    #[error("negative factor {0} in list")]
    NegativeFactor(f64),
    #[error("composition has no members")]
    EmptyComposition,
    #[error("member {id} has mismatched {what}")]
    MemberMismatch { id: String, what: String },
    #[error("aggregate energy of the augmented copy is zero; cannot renormalize")]
    DegenerateRenormalization,
}

/// Per-appliance share of total absolute energy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContributionVector {
    /// `(kind, p_i, P_total_i)` where `P_total_i = Σ_t |x_{i,t}|` in
    /// watt-samples and `p_i = P_total_i / P_total`.
    pub entries: Vec<(ApplianceKind, f64, f64)>,
    /// Σ_i P_total_i in watt-samples.
    pub p_total: f64,
}

impl ContributionVector {
    pub fn p(&self, kind: ApplianceKind) -> Option<f64> {
        self.entries
            .iter()
            .find(|(k, _, _)| *k == kind)
            .map(|&(_, p, _)| p)
    }

    pub fn sum_p(&self) -> f64 {
        self.entries.iter().map(|&(_, p, _)| p).sum()
    }
}

/// How an augmented copy was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AugmentMethod {
    Amda,
    Rdm,
}

/// Scale factors applied to one augmented copy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentationPlan {
    pub method: AugmentMethod,
    /// The augmentation hyper-parameter (for `rdm`, the uniform factor).
    pub s: f64,
    /// Per-appliance factors `S_i`, in the dataset's appliance order.
    pub factors: Vec<(ApplianceKind, f64)>,
    pub source_dataset_id: String,
}

impl AugmentationPlan {
    pub fn factor(&self, kind: ApplianceKind) -> Option<f64> {
        self.factors
            .iter()
            .find(|(k, _)| *k == kind)
            .map(|&(_, f)| f)
    }
}

/// Contributions from raw columns; reusable when statistics must come from a
/// restricted sample set (e.g. the training portion only).
pub fn contributions_from_columns(
    columns: &[(ApplianceKind, &[f64])],
) -> Result<ContributionVector, AugmentError> {
    if columns.is_empty() {
        return Err(AugmentError::NoAppliances);
    }
    let sums: Vec<(ApplianceKind, f64)> = columns
        .iter()
        .map(|(kind, values)| (*kind, values.iter().map(|v| v.abs()).sum::<f64>()))
        .collect();
    let total: f64 = sums.iter().map(|&(_, s)| s).sum();
    if total <= 0.0 {
        return Err(AugmentError::UndefinedContribution);
    }
    Ok(ContributionVector {
        entries: sums
            .into_iter()
            .map(|(kind, s)| (kind, s / total, s))
            .collect(),
        p_total: total,
    })
}

/// Relative contribution of each appliance in a dataset.
pub fn relative_contributions(ds: &FacilityDataset) -> Result<ContributionVector, AugmentError> {
    let columns: Vec<(ApplianceKind, &[f64])> = ds
        .appliances
        .iter()
        .map(|a| (a.kind, a.values_w.as_slice()))
        .collect();
    contributions_from_columns(&columns)
}

/// Contribution-weighted scale factors `S_i = s · (1 − p_i)`.
pub fn amda_scale_factors(
    contributions: &ContributionVector,
    s: f64,
) -> Result<Vec<(ApplianceKind, f64)>, AugmentError> {
    if s < 0.0 {
        return Err(AugmentError::NegativeScale(s));
    }
    Ok(contributions
        .entries
        .iter()
        .map(|&(kind, p, _)| (kind, s * (1.0 - p)))
        .collect())
}

/// Apply per-appliance factors to a dataset and recompute the aggregate.
pub fn apply_plan(ds: &FacilityDataset, plan: &AugmentationPlan) -> FacilityDataset {
    let appliances: Vec<ApplianceTrace> = ds
        .appliances
        .iter()
        .map(|tr| {
            let factor = plan.factor(tr.kind).unwrap_or(1.0);
            ApplianceTrace {
                kind: tr.kind,
                role: tr.role,
                values_w: tr.values_w.iter().map(|&v| factor * v).collect(),
            }
        })
        .collect();
    let mut out = FacilityDataset {
        id: match plan.method {
            AugmentMethod::Amda => format!("{}-amda-s{}", ds.id, plan.s),
            AugmentMethod::Rdm => format!("{}-rdm-f{}", ds.id, plan.s),
        },
        config: ds.config.clone(),
        weather: ds.weather.clone(),
        appliances,
        aggregate_w: Vec::new(),
        energy: ds.energy,
    };
    out.recompute_aggregate();
    out.energy = summarize(&out);
    out
}

fn summarize(ds: &FacilityDataset) -> EnergySummary {
    let period = ds.config.sample_period_s;
    let by = |kind: ApplianceKind| -> f64 {
        ds.appliances
            .iter()
            .find(|a| a.kind == kind)
            .map_or(0.0, |a| a.energy_mwh(period))
    };
    EnergySummary {
        evse_mwh: by(ApplianceKind::Evse),
        pv_mwh: by(ApplianceKind::Pv),
        cs_mwh: by(ApplianceKind::Cs),
        chp_mwh: by(ApplianceKind::Chp),
        ba_mwh: by(ApplianceKind::Ba),
        grid_mwh: trace_energy_mwh(&ds.aggregate_w, period),
    }
}

/// One contribution-weighted augmented copy of `ds`.
pub fn amda_augment(
    ds: &FacilityDataset,
    s: f64,
) -> Result<(FacilityDataset, AugmentationPlan), AugmentError> {
    let contributions = relative_contributions(ds)?;
    amda_augment_with(ds, &contributions, s, false)
}

/// Contribution-weighted copy with explicit statistics and optional
/// aggregate-energy renormalization.
///
/// With `renormalize_aggregate`, all factors are rescaled by one constant so
/// the copy's net aggregate energy matches the source's; the relative factor
/// structure is preserved.
pub fn amda_augment_with(
    ds: &FacilityDataset,
    contributions: &ContributionVector,
    s: f64,
    renormalize_aggregate: bool,
) -> Result<(FacilityDataset, AugmentationPlan), AugmentError> {
    let factors = amda_scale_factors(contributions, s)?;
    let mut plan = AugmentationPlan {
        method: AugmentMethod::Amda,
        s,
        factors,
        source_dataset_id: ds.id.clone(),
    };
    let mut out = apply_plan(ds, &plan);
    if renormalize_aggregate {
        let src = trace_energy_mwh(&ds.aggregate_w, ds.config.sample_period_s);
        let aug = trace_energy_mwh(&out.aggregate_w, out.config.sample_period_s);
        if aug == 0.0 {
            return Err(AugmentError::DegenerateRenormalization);
        }
        let c = src / aug;
        if c < 0.0 {
            return Err(AugmentError::DegenerateRenormalization);
        }
        for (_, f) in &mut plan.factors {
            *f *= c;
        }
        out = apply_plan(ds, &plan);
    }
    Ok((out, plan))
}

/// Default random-baseline factor list: 14 values log-spaced over [0.2, 10].
pub fn default_rdm_factors() -> Vec<f64> {
    let lo = 0.2f64;
    let hi = 10.0f64;
    (0..14)
        .map(|k| lo * (hi / lo).powf(k as f64 / 13.0))
        .collect()
}

/// One uniformly scaled copy per factor.
pub fn rdm_augment(
    ds: &FacilityDataset,
    factors: &[f64],
) -> Result<Vec<(FacilityDataset, AugmentationPlan)>, AugmentError> {
    if factors.is_empty() {
        return Err(AugmentError::EmptyFactors);
    }
    if let Some(&bad) = factors.iter().find(|&&f| f < 0.0) {
        return Err(AugmentError::NegativeFactor(bad));
    }
    Ok(factors
        .iter()
        .map(|&f| {
            let plan = AugmentationPlan {
                method: AugmentMethod::Rdm,
                s: f,
                factors: ds.appliances.iter().map(|a| (a.kind, f)).collect(),
                source_dataset_id: ds.id.clone(),
            };
            (apply_plan(ds, &plan), plan)
        })
        .collect())
}

/// Provenance record of one composed-training-set member.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComposedMember {
    pub dataset_id: String,
    pub plan: Option<AugmentationPlan>,
    pub samples: usize,
}

/// Manifest of a concatenated training set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComposedTrainingSet {
    pub members: Vec<ComposedMember>,
    pub total_samples: usize,
    /// Sample count of the declared base this composition is compared to.
    pub base_samples: usize,
    /// Measured percent increase of `total_samples` over `base_samples`.
    pub relative_increase_pct: f64,
}

/// Record the composition of a training set from members that share one
/// sampling period and appliance schema. `base_samples` names the reference
/// size the relative increase is computed against.
pub fn compose_training_set(
    members: &[(&FacilityDataset, Option<&AugmentationPlan>)],
    base_samples: usize,
) -> Result<ComposedTrainingSet, AugmentError> {
    let (first, _) = members.first().ok_or(AugmentError::EmptyComposition)?;
    let period = first.config.sample_period_s;
    let kinds: Vec<ApplianceKind> = first.appliances.iter().map(|a| a.kind).collect();

    let mut recs = Vec::with_capacity(members.len());
    let mut total = 0usize;
    for (ds, plan) in members {
        if ds.config.sample_period_s != period {
            return Err(AugmentError::MemberMismatch {
                id: ds.id.clone(),
                what: "sampling period".into(),
            });
        }
        let member_kinds: Vec<ApplianceKind> = ds.appliances.iter().map(|a| a.kind).collect();
        if member_kinds != kinds {
            return Err(AugmentError::MemberMismatch {
                id: ds.id.clone(),
                what: "appliance schema".into(),
            });
        }
        total += ds.len();
        recs.push(ComposedMember {
            dataset_id: ds.id.clone(),
            plan: plan.map(AugmentationPlan::clone),
            samples: ds.len(),
        });
    }
    let relative_increase_pct = if base_samples > 0 {
        100.0 * (total as f64 - base_samples as f64) / base_samples as f64
    } else {
        0.0
    };
    Ok(ComposedTrainingSet {
        members: recs,
        total_samples: total,
        base_samples,
        relative_increase_pct,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::presets::preset;
    use crate::sim::{ApplianceRole, FacilityType, Location, WeatherTrace};

    /// Small dataset with explicit columns; producers must carry their sign.
    fn tiny_dataset(columns: Vec<(ApplianceKind, Vec<f64>)>) -> FacilityDataset {
        let n = columns.first().map_or(0, |(_, v)| v.len());
        let mut cfg = preset(FacilityType::Office, Location::Offenbach);
        cfg.year_length = n;
        let appliances: Vec<ApplianceTrace> = columns
            .into_iter()
            .map(|(kind, values_w)| ApplianceTrace {
                kind,
                role: kind.role(),
                values_w,
            })
            .collect();
        let mut ds = FacilityDataset {
            id: "tiny".into(),
            config: cfg,
            weather: WeatherTrace {
                timestamps: (0..n as i64).collect(),
                temperature_k: vec![285.0; n],
                diffuse_wm2: vec![0.0; n],
                direct_wm2: vec![0.0; n],
            },
            appliances,
            aggregate_w: vec![],
            energy: EnergySummary {
                evse_mwh: 0.0,
                pv_mwh: 0.0,
                cs_mwh: 0.0,
                chp_mwh: 0.0,
                ba_mwh: 0.0,
                grid_mwh: 0.0,
            },
        };
        ds.recompute_aggregate();
        ds
    }

    /// Absolute sums mirroring the reference contribution table for the
    /// office facility (watt-samples).
    fn office_like() -> FacilityDataset {
        tiny_dataset(vec![
            (ApplianceKind::Evse, vec![1962.0, 0.0]),
            (ApplianceKind::Pv, vec![-22_800.0, 0.0]),
            (ApplianceKind::Cs, vec![16_200.0, 0.0]),
            (ApplianceKind::Chp, vec![-37_185.0, 0.0]),
            (ApplianceKind::Ba, vec![121_921.0, 0.0]),
        ])
    }

    #[test]
    fn contributions_normalize_and_use_absolute_values() {
        let ds = office_like();
        let c = relative_contributions(&ds).unwrap();
        assert!((c.sum_p() - 1.0).abs() < 1e-9);
        let total = 1962.0 + 22_800.0 + 16_200.0 + 37_185.0 + 121_921.0;
        assert!((c.p_total - total).abs() < 1e-9);
        // producers contribute positively via |x|
        assert!((c.p(ApplianceKind::Chp).unwrap() - 37_185.0 / total).abs() < 1e-12);
        // ordering: BA > CHP > PV > CS > EVSE
        let p = |k| c.p(k).unwrap();
        assert!(p(ApplianceKind::Ba) > p(ApplianceKind::Chp));
        assert!(p(ApplianceKind::Chp) > p(ApplianceKind::Pv));
        assert!(p(ApplianceKind::Pv) > p(ApplianceKind::Cs));
        assert!(p(ApplianceKind::Cs) > p(ApplianceKind::Evse));
    }

    #[test]
    fn single_appliance_contribution_is_one() {
        let ds = tiny_dataset(vec![(ApplianceKind::Ba, vec![3.0, 4.0, 5.0])]);
        let c = relative_contributions(&ds).unwrap();
        assert_eq!(c.entries.len(), 1);
        assert_eq!(c.entries[0].1, 1.0);
    }

    #[test]
    fn streaming_abs_sum_oracle_matches() {
        let ds = office_like();
        let c = relative_contributions(&ds).unwrap();
        // independent pass over the raw columns
        for tr in &ds.appliances {
            let mut acc = 0.0f64;
            for &v in &tr.values_w {
                acc += v.abs();
            }
            let mut tot = 0.0f64;
            for t in &ds.appliances {
                for &v in &t.values_w {
                    tot += v.abs();
                }
            }
            let expect = acc / tot;
            assert!((c.p(tr.kind).unwrap() - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn all_zero_dataset_rejected() {
        let ds = tiny_dataset(vec![(ApplianceKind::Ba, vec![0.0, 0.0])]);
        assert!(matches!(
            relative_contributions(&ds),
            Err(AugmentError::UndefinedContribution)
        ));
    }

    #[test]
    fn scale_factor_worked_values() {
        let c = ContributionVector {
            entries: vec![
                (ApplianceKind::Cs, 0.25, 25.0),
                (ApplianceKind::Ba, 0.601, 60.1),
            ],
            p_total: 100.0,
        };
        let f = amda_scale_factors(&c, 1.5).unwrap();
        assert!((f[0].1 - 1.125).abs() < 1e-12);
        assert!((f[1].1 - 0.5985).abs() < 5e-4);

        let zero = amda_scale_factors(&c, 0.0).unwrap();
        assert!(zero.iter().all(|&(_, s)| s == 0.0));

        assert!(matches!(
            amda_scale_factors(&c, -0.1),
            Err(AugmentError::NegativeScale(_))
        ));
    }

    #[test]
    fn scale_factors_anti_monotone() {
        let ds = office_like();
        let c = relative_contributions(&ds).unwrap();
        let f = amda_scale_factors(&c, 2.0).unwrap();
        for (ka, pa, _) in &c.entries {
            for (kb, pb, _) in &c.entries {
                if pa < pb {
                    let sa = f.iter().find(|(k, _)| k == ka).unwrap().1;
                    let sb = f.iter().find(|(k, _)| k == kb).unwrap().1;
                    assert!(sa > sb, "p {pa} < {pb} must give S {sa} > {sb}");
                }
            }
        }
    }

    #[test]
    fn augmented_columns_scale_elementwise() {
        let ds = office_like();
        let c = relative_contributions(&ds).unwrap();
        let (aug, plan) = amda_augment(&ds, 1.73).unwrap();
        for (orig, scaled) in ds.appliances.iter().zip(&aug.appliances) {
            let s = 1.73 * (1.0 - c.p(orig.kind).unwrap());
            assert!((plan.factor(orig.kind).unwrap() - s).abs() < 1e-12);
            for (o, a) in orig.values_w.iter().zip(&scaled.values_w) {
                assert_eq!(*a, s * o, "{:?} column must scale exactly", orig.kind);
            }
        }
        // aggregate equals the independent column re-summation
        for t in 0..aug.len() {
            let sum: f64 = aug.appliances.iter().map(|a| a.values_w[t]).sum();
            let denom = sum.abs().max(1.0);
            assert!((aug.aggregate_w[t] - sum).abs() / denom < 1e-9);
        }
    }

    #[test]
    fn scaled_totals_can_reorder_against_raw_totals() {
        // With the office-like contributions at s = 1.5 the scaled CHP and PV
        // totals stay ordered, but the margin shrinks from 1.63x to 1.50x;
        // the exact factors follow from S_i = s (1 − p_i).
        let ds = office_like();
        let c = relative_contributions(&ds).unwrap();
        let (aug, _) = amda_augment(&ds, 1.5).unwrap();
        let abs_sum = |ds: &FacilityDataset, kind: ApplianceKind| -> f64 {
            ds.appliances
                .iter()
                .find(|a| a.kind == kind)
                .unwrap()
                .values_w
                .iter()
                .map(|v| v.abs())
                .sum()
        };
        let chp_expect = 37_185.0 * 1.5 * (1.0 - c.p(ApplianceKind::Chp).unwrap());
        let pv_expect = 22_800.0 * 1.5 * (1.0 - c.p(ApplianceKind::Pv).unwrap());
        assert!((abs_sum(&aug, ApplianceKind::Chp) - chp_expect).abs() < 1e-9);
        assert!((abs_sum(&aug, ApplianceKind::Pv) - pv_expect).abs() < 1e-9);
        let raw_ratio = 37_185.0 / 22_800.0;
        let scaled_ratio = chp_expect / pv_expect;
        assert!(scaled_ratio < raw_ratio);
    }

    #[test]
    fn sign_preserved_under_augmentation() {
        let ds = office_like();
        let (aug, _) = amda_augment(&ds, 3.0).unwrap();
        for (orig, scaled) in ds.appliances.iter().zip(&aug.appliances) {
            for (o, a) in orig.values_w.iter().zip(&scaled.values_w) {
                assert!(
                    a.signum() == o.signum() || *a == 0.0,
                    "sign flipped for {:?}",
                    orig.kind
                );
            }
        }
        assert_eq!(
            aug.appliances[1].role,
            ApplianceRole::Producer,
            "roles carry over"
        );
    }

    #[test]
    fn renormalized_aggregate_energy_matches_source() {
        let ds = office_like();
        let c = relative_contributions(&ds).unwrap();
        let (aug, plan) = amda_augment_with(&ds, &c, 1.73, true).unwrap();
        let src = trace_energy_mwh(&ds.aggregate_w, ds.config.sample_period_s);
        let out = trace_energy_mwh(&aug.aggregate_w, aug.config.sample_period_s);
        assert!((out - src).abs() <= 1e-9 * src.abs().max(1e-12));
        // factor structure is preserved up to one constant
        let f0 = plan.factors[0].1 / (1.73 * (1.0 - c.entries[0].1));
        for ((_, f), (_, p, _)) in plan.factors.iter().zip(&c.entries) {
            assert!((f / (1.73 * (1.0 - p)) - f0).abs() < 1e-12);
        }
    }

    #[test]
    fn rdm_identity_and_elementwise_factors() {
        let ds = office_like();
        let copies = rdm_augment(&ds, &[1.0, 0.2]).unwrap();
        assert_eq!(copies.len(), 2);
        let (identity, _) = &copies[0];
        for (o, a) in ds.appliances.iter().zip(&identity.appliances) {
            assert_eq!(o.values_w, a.values_w);
        }
        let (fifth, plan) = &copies[1];
        assert_eq!(plan.s, 0.2);
        for (o, a) in ds.appliances.iter().zip(&fifth.appliances) {
            for (x, y) in o.values_w.iter().zip(&a.values_w) {
                assert_eq!(*y, 0.2 * x);
            }
        }
    }

    #[test]
    fn rdm_default_factor_list() {
        let f = default_rdm_factors();
        assert_eq!(f.len(), 14);
        assert!((f[0] - 0.2).abs() < 1e-12);
        assert!((f[13] - 10.0).abs() < 1e-12);
        assert!(f.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn rdm_error_paths() {
        let ds = office_like();
        assert!(matches!(
            rdm_augment(&ds, &[]),
            Err(AugmentError::EmptyFactors)
        ));
        assert!(matches!(
            rdm_augment(&ds, &[1.0, -2.0]),
            Err(AugmentError::NegativeFactor(_))
        ));
    }

    #[test]
    fn composition_counts_and_increase() {
        let ds = office_like();
        let copies = rdm_augment(&ds, &default_rdm_factors()).unwrap();
        let mut members: Vec<(&FacilityDataset, Option<&AugmentationPlan>)> = vec![(&ds, None)];
        for (copy, plan) in &copies {
            members.push((copy, Some(plan)));
        }
        let composed = compose_training_set(&members, ds.len()).unwrap();
        assert_eq!(composed.total_samples, 15 * ds.len());
        assert!((composed.relative_increase_pct - 1400.0).abs() < 1e-9);
    }

    #[test]
    fn duplicate_member_doubles_samples() {
        let ds = office_like();
        let composed = compose_training_set(&[(&ds, None), (&ds, None)], ds.len()).unwrap();
        assert_eq!(composed.total_samples, 2 * ds.len());
        assert!((composed.relative_increase_pct - 100.0).abs() < 1e-9);
    }

    #[test]
    fn composition_error_paths() {
        assert!(matches!(
            compose_training_set(&[], 100),
            Err(AugmentError::EmptyComposition)
        ));
        let a = office_like();
        let mut b = office_like();
        b.config.sample_period_s = 300;
        assert!(matches!(
            compose_training_set(&[(&a, None), (&b, None)], a.len()),
            Err(AugmentError::MemberMismatch { .. })
        ));
        let c = tiny_dataset(vec![(ApplianceKind::Ba, vec![1.0, 2.0])]);
        assert!(matches!(
            compose_training_set(&[(&a, None), (&c, None)], a.len()),
            Err(AugmentError::MemberMismatch { .. })
        ));
    }
}
