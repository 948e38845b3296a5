//! Synthetic weather: sinusoidal temperature with AR(1) noise and a
//! clear-sky radiation model attenuated by a slowly varying cloud factor.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{
    mix_seed, FacilityConfig, LocationParams, SimError, WeatherTrace, BASE_EPOCH_S,
    SALT_WEATHER_CLOUD, SALT_WEATHER_TEMP,
};

/// Peak clear-sky irradiance reaching the panels (W/m²).
const CLEAR_SKY_PEAK_WM2: f64 = 1000.0;
/// Fraction of the clear-sky beam scattered into diffuse light by clouds.
const DIFFUSE_FRACTION: f64 = 0.35;
/// Hour of day at which the diurnal temperature sinusoid peaks.
const DIURNAL_PEAK_HOUR: f64 = 15.0;

/// Temperature AR(1): per-minute persistence and innovation scale (K).
const TEMP_AR_RHO: f64 = 0.999;
const TEMP_AR_SIGMA: f64 = 1.5;
const TEMP_AR_CLIP: f64 = 6.0;

/// Cloud-factor AR(1) around the site's mean cloudiness.
const CLOUD_AR_RHO: f64 = 0.9995;
const CLOUD_AR_SIGMA: f64 = 0.35;

/// Generate the weather trace for one configured span.
///
/// Deterministic for a given `(loc, cfg.seed)`. Radiation is zero whenever
/// the solar elevation is at or below the horizon.
pub fn simulate_weather(
    loc: &LocationParams,
    cfg: &FacilityConfig,
) -> Result<WeatherTrace, SimError> {
    let samples_per_day = cfg.samples_per_day();
    if cfg.year_length == 0 || cfg.year_length % samples_per_day != 0 {
        return Err(SimError::BadYearLength {
            year_length: cfg.year_length,
            samples_per_day,
        });
    }

    let n = cfg.year_length;
    let dt_s = f64::from(cfg.sample_period_s);
    let mut temp_rng = ChaCha8Rng::seed_from_u64(mix_seed(cfg.seed, SALT_WEATHER_TEMP));
    let mut cloud_rng = ChaCha8Rng::seed_from_u64(mix_seed(cfg.seed, SALT_WEATHER_CLOUD));
    let unit = Normal::new(0.0, 1.0).expect("unit normal");

    let lat_rad = loc.latitude_deg.to_radians();
    let temp_innov = TEMP_AR_SIGMA * (1.0 - TEMP_AR_RHO * TEMP_AR_RHO).sqrt();
    let cloud_innov = CLOUD_AR_SIGMA * (1.0 - CLOUD_AR_RHO * CLOUD_AR_RHO).sqrt();

    let mut timestamps = Vec::with_capacity(n);
    let mut temperature = Vec::with_capacity(n);
    let mut diffuse = Vec::with_capacity(n);
    let mut direct = Vec::with_capacity(n);

    let mut temp_ar = 0.0f64;
    let mut cloud_ar = 0.0f64;

    for t in 0..n {
        let seconds = t as f64 * dt_s;
        let doy = seconds / 86_400.0; // fractional day of year, 0-based
        let hour = (seconds / 3600.0) % 24.0;

        temp_ar = TEMP_AR_RHO * temp_ar + temp_innov * unit.sample(&mut temp_rng);
        temp_ar = temp_ar.clamp(-TEMP_AR_CLIP, TEMP_AR_CLIP);
        cloud_ar = CLOUD_AR_RHO * cloud_ar + cloud_innov * unit.sample(&mut cloud_rng);

        let seasonal = loc.seasonal_amp_k
            * (std::f64::consts::TAU * (doy - loc.seasonal_phase_doy) / 365.0).cos();
        let diurnal =
            loc.diurnal_amp_k * (std::f64::consts::TAU * (hour - DIURNAL_PEAK_HOUR) / 24.0).cos();
        temperature.push(loc.mean_temp_k + seasonal + diurnal + temp_ar);

        let declination =
            (-23.44f64).to_radians() * (std::f64::consts::TAU * (doy + 10.0) / 365.0).cos();
        let hour_angle = (15.0 * (hour - 12.0)).to_radians();
        let sin_elev = lat_rad.sin() * declination.sin()
            + lat_rad.cos() * declination.cos() * hour_angle.cos();
        let clear = CLEAR_SKY_PEAK_WM2 * sin_elev.max(0.0);

        let cloud = (loc.cloudiness + cloud_ar).clamp(0.0, 1.0);
        direct.push(clear * (1.0 - cloud));
        diffuse.push(DIFFUSE_FRACTION * clear * cloud);

        timestamps.push(BASE_EPOCH_S + (t as i64) * i64::from(cfg.sample_period_s));
    }

    Ok(WeatherTrace {
        timestamps,
        temperature_k: temperature,
        diffuse_wm2: diffuse,
        direct_wm2: direct,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::presets::preset;
    use crate::sim::{FacilityType, Location};

    #[test]
    fn full_year_sample_count() {
        let cfg = preset(FacilityType::Office, Location::Offenbach);
        let w = simulate_weather(&cfg.location, &cfg).unwrap();
        assert_eq!(w.len(), 525_600);
    }

    #[test]
    fn no_radiation_at_local_midnight() {
        let cfg = preset(FacilityType::Office, Location::Offenbach);
        let w = simulate_weather(&cfg.location, &cfg).unwrap();
        // Sample 0 is 00:00 on Jan 1; the sun is below the horizon.
        assert_eq!(w.direct_wm2[0], 0.0);
        assert_eq!(w.diffuse_wm2[0], 0.0);
        // Every midnight of the year.
        for day in 0..365 {
            let t = day * 1440;
            assert_eq!(w.direct_wm2[t], 0.0, "direct radiation at midnight {day}");
            assert_eq!(w.diffuse_wm2[t], 0.0);
        }
    }

    #[test]
    fn radiation_nonnegative_everywhere() {
        let cfg = preset(FacilityType::Dealer, Location::Tokyo);
        let w = simulate_weather(&cfg.location, &cfg).unwrap();
        assert!(w.direct_wm2.iter().all(|&r| r >= 0.0));
        assert!(w.diffuse_wm2.iter().all(|&r| r >= 0.0));
    }

    #[test]
    fn deterministic_per_seed() {
        let cfg = preset(FacilityType::Office, Location::LosAngeles);
        let a = simulate_weather(&cfg.location, &cfg).unwrap();
        let b = simulate_weather(&cfg.location, &cfg).unwrap();
        assert_eq!(a, b);

        let mut cfg2 = cfg.clone();
        cfg2.seed += 1;
        let c = simulate_weather(&cfg2.location, &cfg2).unwrap();
        assert_ne!(a.temperature_k, c.temperature_k);
    }

    #[test]
    fn rejects_partial_days() {
        let mut cfg = preset(FacilityType::Office, Location::Offenbach);
        cfg.year_length = 1440 * 3 + 1;
        assert!(matches!(
            simulate_weather(&cfg.location, &cfg),
            Err(SimError::BadYearLength { .. })
        ));
    }
}
