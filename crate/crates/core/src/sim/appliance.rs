//! Per-appliance trace generators.
//!
//! Each generator builds a deterministic schedule from the config, calendar
//! and weather, applies the calibration gain, adds clipped Gaussian noise
//! (sigma = `noise_level` times the running mean of the deterministic
//! component) and clamps to the appliance's sign and power cap.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{
    mix_seed, ApplianceKind, ApplianceTrace, FacilityConfig, SimError, WeatherTrace,
    CHP_FLOOR_FRACTION, SALT_BA, SALT_CHP, SALT_CS, SALT_EVSE, SALT_PV,
};

/// Cooling starts above this ambient temperature (K).
const CS_SETPOINT_K: f64 = 292.0;
/// Temperature excess at which cooling reaches nominal power (K).
const CS_PROXY_FULL_K: f64 = 25.0;
/// Heating demand reference temperature for the CHP controller (K).
const CHP_TREF_K: f64 = 293.0;
/// Temperature deficit at which CHP output reaches nominal power (K).
const CHP_PROXY_FULL_K: f64 = 15.0;
/// Server-cooling baseline as a fraction of the BA server power.
const SERVER_COOLING_FRACTION: f64 = 0.5;
/// BA load outside working hours as a fraction of the working-hours level.
const BA_OFF_HOURS_FRACTION: f64 = 0.35;
/// Working hours window (local time).
const WORK_HOURS: (f64, f64) = (7.0, 19.0);
/// EV charging sessions per workday: uniform in `3..=6`.
const EVSE_SESSIONS_MEAN: f64 = 4.5;
/// EV charging session length: uniform in 30..=150 minutes.
const EVSE_DURATION_MEAN_H: f64 = 1.5;

/// Generate one appliance trace for the configured span.
///
/// The weather trace must match the configured length. Deterministic per
/// `(kind, cfg.seed)`; the calibration gain only scales amplitudes and does
/// not change the underlying random draws.
pub fn simulate_appliance(
    kind: ApplianceKind,
    cfg: &FacilityConfig,
    weather: &WeatherTrace,
) -> Result<ApplianceTrace, SimError> {
    if weather.len() != cfg.year_length {
        return Err(SimError::WeatherLengthMismatch {
            got: weather.len(),
            expected: cfg.year_length,
        });
    }
    let det = match kind {
        ApplianceKind::Evse => evse_schedule(cfg),
        ApplianceKind::Pv => pv_schedule(cfg, weather),
        ApplianceKind::Cs => cs_schedule(cfg, weather),
        ApplianceKind::Chp => chp_schedule(cfg, weather),
        ApplianceKind::Ba => ba_schedule(cfg),
    };
    let (lo, hi) = value_bounds(kind, cfg);
    let values = add_noise_and_clamp(kind, cfg, det, lo, hi);
    Ok(ApplianceTrace {
        kind,
        role: kind.role(),
        values_w: values,
    })
}

/// Allowed value range (W) for an appliance: sign discipline plus power cap.
fn value_bounds(kind: ApplianceKind, cfg: &FacilityConfig) -> (f64, f64) {
    match kind {
        ApplianceKind::Evse => (0.0, cfg.evse_peak_power_kw * 1e3),
        ApplianceKind::Pv => (-cfg.pv_power_per_m2_w * cfg.pv_area_m2, 0.0),
        ApplianceKind::Cs => (0.0, cfg.cs_nominal_power_kw * 1e3),
        // The CHP is never off: its magnitude stays strictly positive.
        ApplianceKind::Chp => (
            -cfg.chp_nominal_power_kw * 1e3,
            -0.5 * CHP_FLOOR_FRACTION * cfg.chp_nominal_power_kw * 1e3,
        ),
        ApplianceKind::Ba => (0.0, cfg.ba_peak_power_kw * 1e3),
    }
}

fn noise_salt(kind: ApplianceKind) -> u64 {
    match kind {
        ApplianceKind::Evse => SALT_EVSE,
        ApplianceKind::Pv => SALT_PV,
        ApplianceKind::Cs => SALT_CS,
        ApplianceKind::Chp => SALT_CHP,
        ApplianceKind::Ba => SALT_BA,
    }
}

/// Add Gaussian noise where the schedule is active, then clamp into bounds.
fn add_noise_and_clamp(
    kind: ApplianceKind,
    cfg: &FacilityConfig,
    det: Vec<f64>,
    lo: f64,
    hi: f64,
) -> Vec<f64> {
    if cfg.noise_level == 0.0 {
        return det.into_iter().map(|v| v.clamp(lo, hi)).collect();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(cfg.seed, noise_salt(kind) ^ 0x4e4f_4953));
    let unit = Normal::new(0.0, 1.0).expect("unit normal");
    let mut acc = 0.0f64;
    det.into_iter()
        .enumerate()
        .map(|(t, v)| {
            acc += v.abs();
            let run_mean = acc / (t as f64 + 1.0);
            // Draw unconditionally so the stream does not depend on gains.
            let eps: f64 = unit.sample(&mut rng);
            let noisy = if v != 0.0 {
                v + cfg.noise_level * run_mean * eps
            } else {
                v
            };
            noisy.clamp(lo, hi)
        })
        .collect()
}

/// EV charging: rectangular sessions on workdays, sized so the expected
/// yearly energy matches the configured target at gain 1.
fn evse_schedule(cfg: &FacilityConfig) -> Vec<f64> {
    let n = cfg.year_length;
    let spd = cfg.samples_per_day();
    let days = n / spd;
    let samples_per_min = spd as f64 / 1440.0;

    // Workdays over the full base year fix the per-day energy budget, so a
    // sliced span keeps the same session sizing as the full year.
    let yearly_workdays = (0..365).filter(|&d| cfg.location.is_workday(d)).count();
    let daily_target_wh = cfg.evse_yearly_energy_mwh * 1e6 / yearly_workdays.max(1) as f64;
    let base_level_w = daily_target_wh / (EVSE_SESSIONS_MEAN * EVSE_DURATION_MEAN_H);

    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(cfg.seed, SALT_EVSE));
    let mut det = vec![0.0f64; n];
    for day in 0..days {
        if !cfg.location.is_workday(day) {
            continue;
        }
        let sessions = rng.gen_range(3..=6);
        for _ in 0..sessions {
            let start_min: f64 = rng.gen_range(450.0..960.0); // 07:30–16:00
            let dur_min: f64 = rng.gen_range(30.0..=150.0);
            let level = base_level_w * rng.gen_range(0.7..1.3) * cfg.gains.evse;
            let s = (day * spd) + (start_min * samples_per_min) as usize;
            let e = (s + (dur_min * samples_per_min) as usize).min((day + 1) * spd);
            for v in &mut det[s..e.min(n)] {
                *v += level;
            }
        }
    }
    det
}

/// PV production: panel rating times total irradiance over the 1 kW/m²
/// reference, negative sign.
fn pv_schedule(cfg: &FacilityConfig, weather: &WeatherTrace) -> Vec<f64> {
    let nominal_w = cfg.pv_power_per_m2_w * cfg.pv_area_m2;
    weather
        .direct_wm2
        .iter()
        .zip(&weather.diffuse_wm2)
        .map(|(&dir, &dif)| -nominal_w * ((dir + dif) / 1000.0) * cfg.gains.pv)
        .collect()
}

/// Cooling: proportional to the temperature excess over the setpoint, capped
/// at nominal, plus a constant server-cooling baseline when configured.
fn cs_schedule(cfg: &FacilityConfig, weather: &WeatherTrace) -> Vec<f64> {
    let nominal_w = cfg.cs_nominal_power_kw * 1e3;
    let slope_w_per_k = nominal_w / CS_PROXY_FULL_K;
    let baseline_w = if cfg.server_cooling {
        SERVER_COOLING_FRACTION * cfg.ba_server_power_kw * 1e3
    } else {
        0.0
    };
    weather
        .temperature_k
        .iter()
        .map(|&t| {
            let demand = (slope_w_per_k * (t - CS_SETPOINT_K).max(0.0)).min(nominal_w);
            cfg.gains.cs * (demand + baseline_w)
        })
        .collect()
}

/// CHP: heating-demand-driven producer with a hard floor so it is never off.
fn chp_schedule(cfg: &FacilityConfig, weather: &WeatherTrace) -> Vec<f64> {
    let nominal_w = cfg.chp_nominal_power_kw * 1e3;
    let floor_w = CHP_FLOOR_FRACTION * nominal_w;
    let slope_w_per_k = nominal_w / CHP_PROXY_FULL_K;
    weather
        .temperature_k
        .iter()
        .map(|&t| {
            let demand = cfg.gains.chp * slope_w_per_k * (CHP_TREF_K - t).max(0.0);
            -demand.clamp(floor_w, nominal_w)
        })
        .collect()
}

/// Background appliances: constant server load plus a two-level
/// workday/off-hours step schedule sized to the yearly demand target.
fn ba_schedule(cfg: &FacilityConfig) -> Vec<f64> {
    let n = cfg.year_length;
    let spd = cfg.samples_per_day();
    let server_w = cfg.ba_server_power_kw * 1e3;
    let mean_target_w = cfg.ba_yearly_demand_mwh * 1e6 / 8760.0;

    // Fraction of working-hours samples over the full base year.
    let wh_per_day = WORK_HOURS.1 - WORK_HOURS.0;
    let yearly_workdays = (0..365).filter(|&d| cfg.location.is_workday(d)).count() as f64;
    let frac_work = yearly_workdays * wh_per_day / 8760.0;
    let level_w = ((mean_target_w - server_w)
        / (BA_OFF_HOURS_FRACTION + (1.0 - BA_OFF_HOURS_FRACTION) * frac_work))
        .max(0.0);

    let mut det = Vec::with_capacity(n);
    for t in 0..n {
        let day = t / spd;
        let hour = (t % spd) as f64 * f64::from(cfg.sample_period_s) / 3600.0;
        let active = cfg.location.is_workday(day) && hour >= WORK_HOURS.0 && hour < WORK_HOURS.1;
        let step = if active {
            level_w
        } else {
            BA_OFF_HOURS_FRACTION * level_w
        };
        det.push(cfg.gains.ba * (server_w + step));
    }
    det
}

/// Yearly cooling energy target implied by the config (MWh).
pub(super) fn cs_energy_target_mwh(cfg: &FacilityConfig) -> f64 {
    cfg.cs_nominal_power_kw * cfg.cs_usage_hours / 1e3
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::presets::preset;
    use crate::sim::{simulate_weather, FacilityType, Location};

    fn office() -> (FacilityConfig, WeatherTrace) {
        let cfg = preset(FacilityType::Office, Location::Offenbach);
        let weather = simulate_weather(&cfg.location, &cfg).unwrap();
        (cfg, weather)
    }

    #[test]
    fn pv_respects_nominal_cap() {
        let (cfg, weather) = office();
        let tr = simulate_appliance(ApplianceKind::Pv, &cfg, &weather).unwrap();
        let cap = cfg.pv_power_per_m2_w * cfg.pv_area_m2; // 210 * 2000 = 420 kW
        assert!(tr.values_w.iter().all(|&v| v <= 0.0));
        assert!(tr.values_w.iter().all(|&v| v >= -cap));
    }

    #[test]
    fn chp_never_off_and_capped() {
        let (cfg, weather) = office();
        let tr = simulate_appliance(ApplianceKind::Chp, &cfg, &weather).unwrap();
        let cap = cfg.chp_nominal_power_kw * 1e3; // 340 kW
        assert!(tr.values_w.iter().all(|&v| v < 0.0), "CHP must never be off");
        assert!(tr.values_w.iter().all(|&v| v.abs() <= cap));
    }

    #[test]
    fn consumers_are_nonnegative() {
        let (cfg, weather) = office();
        for kind in [ApplianceKind::Evse, ApplianceKind::Cs, ApplianceKind::Ba] {
            let tr = simulate_appliance(kind, &cfg, &weather).unwrap();
            assert!(
                tr.values_w.iter().all(|&v| v >= 0.0),
                "{kind:?} went negative"
            );
        }
    }

    #[test]
    fn evse_rough_energy_before_calibration() {
        let (cfg, weather) = office();
        let tr = simulate_appliance(ApplianceKind::Evse, &cfg, &weather).unwrap();
        let e = tr.energy_mwh(cfg.sample_period_s);
        // Session draws are random but the sizing targets the configured
        // yearly energy; before calibration it lands within a few percent.
        let target = cfg.evse_yearly_energy_mwh;
        assert!(
            (e - target).abs() / target < 0.10,
            "EVSE energy {e} MWh too far from target {target} MWh"
        );
    }

    #[test]
    fn ba_workday_mean_exceeds_offday_mean() {
        let (cfg, weather) = office();
        let tr = simulate_appliance(ApplianceKind::Ba, &cfg, &weather).unwrap();
        let spd = cfg.samples_per_day();
        let (mut on, mut n_on, mut off, mut n_off) = (0.0, 0usize, 0.0, 0usize);
        for (t, &v) in tr.values_w.iter().enumerate() {
            if cfg.location.is_workday(t / spd) {
                on += v;
                n_on += 1;
            } else {
                off += v;
                n_off += 1;
            }
        }
        assert!(on / n_on as f64 > off / n_off as f64);
    }

    #[test]
    fn deterministic_per_seed() {
        let (cfg, weather) = office();
        let a = simulate_appliance(ApplianceKind::Evse, &cfg, &weather).unwrap();
        let b = simulate_appliance(ApplianceKind::Evse, &cfg, &weather).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn gain_scales_schedule_without_changing_draws() {
        let (mut cfg, weather) = office();
        cfg.noise_level = 0.0;
        let base = simulate_appliance(ApplianceKind::Ba, &cfg, &weather).unwrap();
        cfg.gains.ba = 0.5;
        let half = simulate_appliance(ApplianceKind::Ba, &cfg, &weather).unwrap();
        for (b, h) in base.values_w.iter().zip(&half.values_w) {
            assert!((h - 0.5 * b).abs() < 1e-9);
        }
    }
}
