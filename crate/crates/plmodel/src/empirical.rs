//! Empirical path-loss baselines: free-space loss, the close-in reference
//! distance model with least-squares exponent fitting, and the COST-231
//! Hata suburban formula.

use crate::error::{Error, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

/// Speed of light in vacuum, m/s.
pub const C_M_PER_S: f64 = 299_792_458.0;

/// Free-space path loss in dB for a carrier at `f_ghz` over `d_m` meters:
/// `20 log10(4 pi f d / c)`.
pub fn fspl_db(f_ghz: f64, d_m: f64) -> Result<f64> {
    if !(f_ghz > 0.0) || !(d_m > 0.0) {
        return Err(Error::Domain(format!(
            "fspl requires positive frequency and distance (got {f_ghz} GHz, {d_m} m)"
        )));
    }
    let f_hz = f_ghz * 1e9;
    Ok(20.0 * (4.0 * std::f64::consts::PI * f_hz * d_m / C_M_PER_S).log10())
}

/// Close-in model parameters: path-loss exponent and shadow-fading spread
/// about a free-space anchor at `d0_m`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CiParams {
    pub n: f64,
    pub sigma_db: f64,
    pub d0_m: f64,
}

/// Close-in path loss: `FSPL(f, d0) + 10 n log10(d/d0) + chi_db`.
pub fn ci_pathloss_db(params: &CiParams, f_ghz: f64, d_m: f64, chi_db: f64) -> Result<f64> {
    if d_m < params.d0_m {
        return Err(Error::Domain(format!(
            "close-in model is defined for d >= d0 (d = {d_m} m, d0 = {} m)",
            params.d0_m
        )));
    }
    Ok(fspl_db(f_ghz, params.d0_m)? + 10.0 * params.n * (d_m / params.d0_m).log10() + chi_db)
}

/// Core of the least-squares exponent fit, shared by the single-frequency
/// and mixed-frequency entry points. Each pair is `(excess_db, decade_db)`
/// where `excess = pl - FSPL(f, d0)` and `decade = 10 log10(d/d0)`.
fn ci_fit_excess(pairs: &[(f64, f64)], d0_m: f64) -> Result<CiParams> {
    if pairs.len() < 2 {
        return Err(Error::Domain(format!(
            "close-in fit needs at least 2 samples (got {})",
            pairs.len()
        )));
    }
    let sum_d2: f64 = pairs.iter().map(|&(_, d)| d * d).sum();
    if sum_d2 <= 0.0 {
        return Err(Error::Domain(
            "close-in fit is degenerate: all sample distances equal d0".into(),
        ));
    }
    let num: f64 = pairs.iter().map(|&(e, d)| e * d).sum();
    let n = num / sum_d2;
    let ss: f64 = pairs.iter().map(|&(e, d)| (e - n * d).powi(2)).sum();
    let sigma = (ss / (pairs.len() as f64 - 1.0)).sqrt();
    Ok(CiParams {
        n,
        sigma_db: sigma,
        d0_m,
    })
}

/// Fits the close-in exponent to `(distance_m, pl_db)` samples at a single
/// carrier frequency. The returned `n` minimizes the residual sum of
/// squares in closed form; `sigma_db` is the sample standard deviation of
/// the residuals.
pub fn ci_fit(samples: &[(f64, f64)], f_ghz: f64, d0_m: f64) -> Result<CiParams> {
    if !(d0_m > 0.0) {
        return Err(Error::Domain("d0 must be positive".into()));
    }
    let anchor = fspl_db(f_ghz, d0_m)?;
    let mut pairs = Vec::with_capacity(samples.len());
    for &(d, pl) in samples {
        if d < d0_m {
            return Err(Error::Domain(format!(
                "close-in fit sample at d = {d} m is below d0 = {d0_m} m"
            )));
        }
        pairs.push((pl - anchor, 10.0 * (d / d0_m).log10()));
    }
    ci_fit_excess(&pairs, d0_m)
}

/// Mixed-frequency variant of [`ci_fit`]: each sample carries its own
/// carrier, and the free-space anchor is evaluated per sample. Used when a
/// sweep dataset pools several frequencies under one exponent.
pub fn ci_fit_multifreq(samples: &[(f64, f64, f64)], d0_m: f64) -> Result<CiParams> {
    if !(d0_m > 0.0) {
        return Err(Error::Domain("d0 must be positive".into()));
    }
    let mut pairs = Vec::with_capacity(samples.len());
    for &(f_ghz, d, pl) in samples {
        if d < d0_m {
            return Err(Error::Domain(format!(
                "close-in fit sample at d = {d} m is below d0 = {d0_m} m"
            )));
        }
        pairs.push((pl - fspl_db(f_ghz, d0_m)?, 10.0 * (d / d0_m).log10()));
    }
    ci_fit_excess(&pairs, d0_m)
}

/// Draws `count` zero-mean Gaussian shadow-fading values with spread
/// `sigma_db`, deterministically from `seed`.
pub fn shadow_sample(sigma_db: f64, seed: u64, count: usize) -> Result<Vec<f64>> {
    if !(sigma_db >= 0.0) || !sigma_db.is_finite() {
        return Err(Error::Domain(format!("sigma must be >= 0 (got {sigma_db})")));
    }
    if sigma_db == 0.0 {
        return Ok(vec![0.0; count]);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, sigma_db)
        .map_err(|e| Error::Domain(format!("shadow distribution: {e}")))?;
    Ok((0..count).map(|_| normal.sample(&mut rng)).collect())
}

/// Inputs to the COST-231 Hata suburban formula.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cost231Input {
    pub f_mhz: f64,
    pub h_tx_m: f64,
    pub h_rx_m: f64,
    pub d_km: f64,
}

/// Validity-range warnings for COST-231. Inputs outside the ranges still
/// produce a value; the caller decides how loudly to complain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Cost231Warning {
    FrequencyOutOfRange,
    TxHeightOutOfRange,
    RxHeightOutOfRange,
    DistanceOutOfRange,
}

impl std::fmt::Display for Cost231Warning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Cost231Warning::FrequencyOutOfRange => "frequency outside 1500-2000 MHz",
            Cost231Warning::TxHeightOutOfRange => "transmitter height outside 30-200 m",
            Cost231Warning::RxHeightOutOfRange => "receiver height outside 1-10 m",
            Cost231Warning::DistanceOutOfRange => "distance outside 1-20 km",
        };
        f.write_str(s)
    }
}

/// COST-231 Hata path loss for suburban areas (correction constant 0 dB),
/// with the small-city mobile antenna correction. Returns the loss in dB
/// plus any validity-range warnings.
pub fn cost231_hata_suburban(inp: &Cost231Input) -> Result<(f64, Vec<Cost231Warning>)> {
    if !(inp.f_mhz > 0.0 && inp.h_tx_m > 0.0 && inp.h_rx_m > 0.0 && inp.d_km > 0.0) {
        return Err(Error::Domain(format!(
            "cost231 requires positive inputs (got {inp:?})"
        )));
    }
    let lf = inp.f_mhz.log10();
    let lht = inp.h_tx_m.log10();
    let a_hr = (1.1 * lf - 0.7) * inp.h_rx_m - (1.56 * lf - 0.8);
    let pl = 46.3 + 33.9 * lf - 13.82 * lht - a_hr + (44.9 - 6.55 * lht) * inp.d_km.log10();

    let mut warnings = Vec::new();
    if !(1500.0..=2000.0).contains(&inp.f_mhz) {
        warnings.push(Cost231Warning::FrequencyOutOfRange);
    }
    if !(30.0..=200.0).contains(&inp.h_tx_m) {
        warnings.push(Cost231Warning::TxHeightOutOfRange);
    }
    if !(1.0..=10.0).contains(&inp.h_rx_m) {
        warnings.push(Cost231Warning::RxHeightOutOfRange);
    }
    if !(1.0..=20.0).contains(&inp.d_km) {
        warnings.push(Cost231Warning::DistanceOutOfRange);
    }
    Ok((pl, warnings))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fspl_reference_point() {
        let pl = fspl_db(1.5, 1.0).unwrap();
        assert!((pl - 35.97).abs() < 0.01, "fspl(1.5 GHz, 1 m) = {pl}");
    }

    #[test]
    fn fspl_doubles_add_six_db() {
        let six = 20.0 * 2.0_f64.log10();
        for &(f, d) in &[(1.5, 10.0), (2.3, 250.0), (6.0, 1.0), (0.7, 3.3)] {
            let base = fspl_db(f, d).unwrap();
            let dd = fspl_db(f, 2.0 * d).unwrap();
            let df = fspl_db(2.0 * f, d).unwrap();
            assert!((dd - base - six).abs() < 1e-9, "distance doubling at ({f}, {d})");
            assert!((df - base - six).abs() < 1e-9, "frequency doubling at ({f}, {d})");
        }
    }

    #[test]
    fn fspl_rejects_nonpositive_input() {
        assert!(fspl_db(0.0, 1.0).is_err());
        assert!(fspl_db(1.0, -2.0).is_err());
    }

    #[test]
    fn ci_matches_fspl_at_reference_distance() {
        let p = CiParams { n: 3.0, sigma_db: 0.0, d0_m: 1.0 };
        let pl = ci_pathloss_db(&p, 2.0, 1.0, 0.0).unwrap();
        assert!((pl - fspl_db(2.0, 1.0).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn ci_slope_is_ten_n_per_decade() {
        let p = CiParams { n: 2.7, sigma_db: 0.0, d0_m: 1.0 };
        let a = ci_pathloss_db(&p, 2.0, 10.0, 0.0).unwrap();
        let b = ci_pathloss_db(&p, 2.0, 100.0, 0.0).unwrap();
        assert!((b - a - 27.0).abs() < 1e-9);
    }

    #[test]
    fn ci_rejects_distance_below_reference() {
        let p = CiParams { n: 2.0, sigma_db: 0.0, d0_m: 1.0 };
        assert!(ci_pathloss_db(&p, 2.0, 0.5, 0.0).is_err());
    }

    #[test]
    fn ci_fit_two_point_exact() {
        // (d0, anchor) and (10 d0, anchor + 25): slope 2.5 per decade.
        let f = 2.0;
        let anchor = fspl_db(f, 1.0).unwrap();
        let samples = vec![(1.0, anchor), (10.0, anchor + 25.0)];
        let p = ci_fit(&samples, f, 1.0).unwrap();
        assert!((p.n - 2.5).abs() < 1e-12, "n = {}", p.n);
        assert!(p.sigma_db.abs() < 1e-9);
    }

    #[test]
    fn ci_fit_recovers_noiseless_exponent() {
        let f = 1.5;
        let truth = CiParams { n: 2.0, sigma_db: 0.0, d0_m: 1.0 };
        let samples: Vec<(f64, f64)> = (0..10_000)
            .map(|i| {
                let d = 1.0 + 1500.0 * (i as f64 + 1.0) / 10_000.0;
                (d, ci_pathloss_db(&truth, f, d, 0.0).unwrap())
            })
            .collect();
        let p = ci_fit(&samples, f, 1.0).unwrap();
        assert!((p.n - 2.0).abs() < 1e-9, "n = {}", p.n);
        assert!(p.sigma_db < 1e-9, "sigma = {}", p.sigma_db);
    }

    #[test]
    fn ci_fit_residual_is_minimal_at_fitted_exponent() {
        // Perturbing n away from the fit must strictly increase the rms
        // residual; checks the closed form against its defining property.
        let f = 2.3;
        let chi = shadow_sample(3.0, 7, 400).unwrap();
        let truth = CiParams { n: 2.4, sigma_db: 0.0, d0_m: 1.0 };
        let samples: Vec<(f64, f64)> = (0..400)
            .map(|i| {
                let d = 2.0 + (i as f64) * 3.0;
                (d, ci_pathloss_db(&truth, f, d, chi[i]).unwrap())
            })
            .collect();
        let p = ci_fit(&samples, f, 1.0).unwrap();
        let rms = |n: f64| -> f64 {
            let anchor = fspl_db(f, 1.0).unwrap();
            samples
                .iter()
                .map(|&(d, pl)| (pl - anchor - 10.0 * n * d.log10()).powi(2))
                .sum::<f64>()
        };
        assert!(rms(p.n) < rms(p.n + 0.01));
        assert!(rms(p.n) < rms(p.n - 0.01));
    }

    #[test]
    fn ci_fit_degenerate_inputs_error() {
        assert!(ci_fit(&[(5.0, 80.0)], 2.0, 1.0).is_err(), "one sample");
        let same = vec![(1.0, 47.0), (1.0, 49.0)];
        assert!(ci_fit(&same, 2.0, 1.0).is_err(), "all distances at d0");
    }

    #[test]
    fn shadow_sample_is_deterministic_and_sized() {
        let a = shadow_sample(3.0, 42, 1000).unwrap();
        let b = shadow_sample(3.0, 42, 1000).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 1000);
        let mean = a.iter().sum::<f64>() / a.len() as f64;
        assert!(mean.abs() < 0.5, "mean = {mean}");
        assert!(shadow_sample(0.0, 1, 5).unwrap().iter().all(|&x| x == 0.0));
        assert!(shadow_sample(-1.0, 1, 5).is_err());
    }

    #[test]
    fn cost231_reference_point() {
        let (pl, warnings) = cost231_hata_suburban(&Cost231Input {
            f_mhz: 1500.0,
            h_tx_m: 30.0,
            h_rx_m: 1.5,
            d_km: 1.0,
        })
        .unwrap();
        assert!((pl - 133.5).abs() < 0.1, "pl = {pl}");
        assert!(warnings.is_empty(), "in-range inputs: {warnings:?}");
    }

    #[test]
    fn cost231_warns_out_of_range_but_still_computes() {
        let (pl, warnings) = cost231_hata_suburban(&Cost231Input {
            f_mhz: 3500.0,
            h_tx_m: 12.0,
            h_rx_m: 1.5,
            d_km: 0.3,
        })
        .unwrap();
        assert!(pl.is_finite());
        assert!(warnings.contains(&Cost231Warning::FrequencyOutOfRange));
        assert!(warnings.contains(&Cost231Warning::TxHeightOutOfRange));
        assert!(warnings.contains(&Cost231Warning::DistanceOutOfRange));
        assert!(!warnings.contains(&Cost231Warning::RxHeightOutOfRange));
    }

    #[test]
    fn cost231_rejects_nonpositive_inputs() {
        assert!(cost231_hata_suburban(&Cost231Input {
            f_mhz: 1500.0,
            h_tx_m: 0.0,
            h_rx_m: 1.5,
            d_km: 1.0,
        })
        .is_err());
    }

    #[test]
    fn cost231_distance_slope_matches_formula() {
        let base = Cost231Input { f_mhz: 1800.0, h_tx_m: 50.0, h_rx_m: 1.5, d_km: 2.0 };
        let (a, _) = cost231_hata_suburban(&base).unwrap();
        let (b, _) = cost231_hata_suburban(&Cost231Input { d_km: 20.0, ..base }).unwrap();
        let slope = 44.9 - 6.55 * 50.0_f64.log10();
        assert!((b - a - slope).abs() < 1e-9);
    }
}
