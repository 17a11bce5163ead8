//! Tours the three empirical path-loss models: the free-space law, the
//! close-in log-distance fit with shadow fading, and the COST-231 Hata
//! suburban formula with its validity-range warnings.

use plmodel::empirical::{
    ci_fit_multifreq, cost231_hata_suburban, fspl_db, shadow_sample, Cost231Input,
};

fn main() -> plmodel::Result<()> {
    // --- Free-space law: +6.02 dB per distance doubling --------------
    println!("free-space path loss at 1.5 GHz:");
    for d in [1.0, 10.0, 100.0, 1000.0] {
        println!("  {d:>6.0} m : {:>7.2} dB", fspl_db(1.5, d)?);
    }
    let step = fspl_db(1.5, 2000.0)? - fspl_db(1.5, 1000.0)?;
    println!("  doubling 1 km -> 2 km adds {step:.4} dB\n");

    // --- Close-in fit on synthetic shadowed measurements --------------
    // Ground truth: exponent 3.2 with 4 dB lognormal shadowing, sampled
    // over mixed carriers the way a pooled drive-test dataset would be.
    let n_true = 3.2;
    let sigma_true = 4.0;
    let count = 8000;
    let shadows = shadow_sample(sigma_true, 99, count)?;
    let samples: Vec<(f64, f64, f64)> = (0..count)
        .map(|i| {
            let f = 0.9 + (i % 5) as f64 * 0.45;
            let d = 10f64.powf(1.0 + 2.2 * (i as f64 + 0.5) / count as f64);
            let pl = fspl_db(f, 1.0).unwrap() + 10.0 * n_true * d.log10() + shadows[i];
            (f, d, pl)
        })
        .collect();
    let fit = ci_fit_multifreq(&samples, 1.0)?;
    println!("close-in fit over {count} shadowed samples:");
    println!("  true  : n = {n_true}, sigma = {sigma_true} dB");
    println!("  fitted: n = {:.4}, sigma = {:.4} dB\n", fit.n, fit.sigma_db);

    // --- COST-231 Hata, in range and out of range ---------------------
    let nominal = Cost231Input {
        f_mhz: 1500.0,
        h_tx_m: 30.0,
        h_rx_m: 1.5,
        d_km: 1.0,
    };
    let (pl, warnings) = cost231_hata_suburban(&nominal)?;
    println!("cost-231 hata suburban at the nominal point:");
    println!("  f = 1500 MHz, h_tx = 30 m, h_rx = 1.5 m, d = 1 km");
    println!("  path loss = {pl:.2} dB, warnings: {}", warnings.len());

    let stretched = Cost231Input {
        f_mhz: 900.0,
        h_tx_m: 12.0,
        ..nominal
    };
    let (pl, warnings) = cost231_hata_suburban(&stretched)?;
    println!("\nsame link with a 900 MHz carrier on a 12 m mast:");
    println!("  path loss = {pl:.2} dB (extrapolated)");
    for w in &warnings {
        println!("  warning: {w}");
    }
    Ok(())
}
