//! The nine shipped facility presets: three facility types at three sites.
//!
//! Appliance sizing is shared across sites for a given facility type; the
//! sites differ in climate, solar yield and holiday calendar.

use super::{
    ApplianceGains, FacilityConfig, FacilityType, Location, LocationParams, SAMPLE_PERIOD_S,
    YEAR_SAMPLES,
};

/// Climate and calendar for one site, with the facility's workweek applied.
fn location_params(loc: Location, workweek_days: u8) -> LocationParams {
    match loc {
        Location::Offenbach => LocationParams {
            name: loc,
            latitude_deg: 50.10,
            mean_temp_k: 283.7,
            seasonal_amp_k: 9.5,
            diurnal_amp_k: 4.0,
            seasonal_phase_doy: 200.0,
            cloudiness: 0.70,
            workweek_days,
            holidays_doy: vec![1, 92, 95, 121, 133, 144, 154, 276, 359, 360],
        },
        Location::LosAngeles => LocationParams {
            name: loc,
            latitude_deg: 34.05,
            mean_temp_k: 290.7,
            seasonal_amp_k: 4.5,
            diurnal_amp_k: 5.5,
            seasonal_phase_doy: 225.0,
            cloudiness: 0.22,
            workweek_days,
            holidays_doy: vec![1, 18, 46, 151, 185, 249, 315, 329, 359],
        },
        Location::Tokyo => LocationParams {
            name: loc,
            latitude_deg: 35.68,
            mean_temp_k: 289.2,
            seasonal_amp_k: 9.0,
            diurnal_amp_k: 4.0,
            seasonal_phase_doy: 215.0,
            cloudiness: 0.60,
            workweek_days,
            holidays_doy: vec![
                1, 11, 42, 54, 79, 119, 123, 124, 125, 203, 204, 220, 263, 266, 307, 327,
            ],
        },
    }
}

/// Build the preset for one facility type at one site (seed 0).
pub fn preset(facility_type: FacilityType, location: Location) -> FacilityConfig {
    let (
        grid_mwh,
        evse_mwh,
        pv_w_per_m2,
        pv_m2,
        cs_kw,
        cs_hours,
        chp_kw,
        ba_mwh,
        server_kw,
        server_cooling,
        workweek,
        ba_peak_kw,
    ) = match facility_type {
        FacilityType::Office => (
            1334.0, 32.0, 210.0, 2000.0, 900.0, 300.0, 340.0, 2032.0, 69.0, false, 5, 600.0,
        ),
        FacilityType::Dealer => (
            162.0, 33.0, 150.0, 2000.0, 250.0, 300.0, 210.0, 501.0, 20.0, false, 6, 160.0,
        ),
        FacilityType::Logistics => (
            1689.0, 32.0, 150.0, 10_000.0, 4000.0, 500.0, 900.0, 4341.0, 20.0, true, 7, 1200.0,
        ),
    };
    FacilityConfig {
        facility_type,
        location: location_params(location, workweek),
        yearly_grid_demand_mwh: grid_mwh,
        evse_yearly_energy_mwh: evse_mwh,
        pv_power_per_m2_w: pv_w_per_m2,
        pv_area_m2: pv_m2,
        cs_nominal_power_kw: cs_kw,
        cs_usage_hours: cs_hours,
        chp_nominal_power_kw: chp_kw,
        chp_efficiency: 0.35,
        ba_yearly_demand_mwh: ba_mwh,
        ba_server_power_kw: server_kw,
        server_cooling,
        evse_peak_power_kw: 150.0,
        ba_peak_power_kw: ba_peak_kw,
        noise_level: 0.01,
        sample_period_s: SAMPLE_PERIOD_S,
        year_length: YEAR_SAMPLES,
        seed: 0,
        gains: ApplianceGains::default(),
    }
}

/// All nine presets in a fixed order.
pub fn all_presets() -> Vec<FacilityConfig> {
    let mut out = Vec::with_capacity(9);
    for ft in [
        FacilityType::Office,
        FacilityType::Dealer,
        FacilityType::Logistics,
    ] {
        for loc in [Location::Offenbach, Location::LosAngeles, Location::Tokyo] {
            out.push(preset(ft, loc));
        }
    }
    out
}

/// Identifiers accepted by `--preset`, e.g. `office-offenbach`.
pub fn preset_ids() -> Vec<String> {
    all_presets().iter().map(|c| c.preset_id()).collect()
}

/// Look up a preset by identifier.
pub fn preset_by_id(id: &str) -> Option<FacilityConfig> {
    all_presets().into_iter().find(|c| c.preset_id() == id)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nine_distinct_presets() {
        let ids = preset_ids();
        assert_eq!(ids.len(), 9);
        let unique: std::collections::HashSet<_> = ids.iter().collect();
        assert_eq!(unique.len(), 9);
    }

    #[test]
    fn presets_validate() {
        for cfg in all_presets() {
            cfg.validate().unwrap_or_else(|e| {
                panic!("preset {} invalid: {e}", cfg.preset_id());
            });
        }
    }

    #[test]
    fn lookup_round_trips() {
        let cfg = preset_by_id("logistics-tokyo").unwrap();
        assert_eq!(cfg.facility_type, FacilityType::Logistics);
        assert_eq!(cfg.location.name, Location::Tokyo);
        assert!(preset_by_id("mall-berlin").is_none());
    }

    #[test]
    fn workweek_matches_facility_type() {
        assert_eq!(
            preset(FacilityType::Office, Location::Tokyo)
                .location
                .workweek_days,
            5
        );
        assert_eq!(
            preset(FacilityType::Dealer, Location::LosAngeles)
                .location
                .workweek_days,
            6
        );
        assert_eq!(
            preset(FacilityType::Logistics, Location::Offenbach)
                .location
                .workweek_days,
            7
        );
    }
}
