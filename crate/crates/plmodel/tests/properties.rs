//! Property-based checks of the invariants the rest of the toolkit leans on:
//! closed-form laws of the free-space model, algebraic properties of the
//! error metrics, exactness of the noise-free close-in fit, and the
//! bookkeeping contracts of normalization, splitting, and name slugging.

use proptest::prelude::*;

use plmodel::dataset::{Dataset, Normalizer, Sample};
use plmodel::empirical::{ci_fit_multifreq, fspl_db};
use plmodel::metrics::{msle, pearson, rmse};
use plmodel::pipeline::slug;

/// 20 log10(2): the free-space penalty for doubling the distance.
const DOUBLING_DB: f64 = 6.020599913279624;

fn tagged_dataset(n: usize) -> Dataset {
    let samples = (0..n)
        .map(|i| Sample {
            site: "S".into(),
            h_tx_m: 15.0,
            p_tx_dbm: 37.0,
            f_ghz: 1.5,
            distance_m: 10.0 + i as f64,
            elevation_deg: 1.0,
            los: i % 2 == 0,
            dlat_deg: 0.0,
            dlon_deg: 0.0,
            // Unique tag so partitions can be compared as multisets.
            azimuth_deg: i as f64,
            p_rx_dbm: -60.0,
            pl_db: 97.0,
        })
        .collect();
    Dataset { samples }
}

proptest! {
    #[test]
    fn doubling_distance_adds_a_fixed_db_increment(
        f in 0.1f64..30.0,
        d in 0.5f64..5.0e4,
    ) {
        let step = fspl_db(f, 2.0 * d).unwrap() - fspl_db(f, d).unwrap();
        prop_assert!(
            (step - DOUBLING_DB).abs() < 1e-9,
            "doubling step was {step} dB at f = {f} GHz, d = {d} m"
        );
    }

    #[test]
    fn free_space_loss_grows_with_distance_and_frequency(
        f in 0.1f64..30.0,
        d in 1.0f64..1.0e4,
        df in 0.01f64..5.0,
        dd in 0.01f64..1.0e3,
    ) {
        let base = fspl_db(f, d).unwrap();
        prop_assert!(fspl_db(f, d + dd).unwrap() > base, "farther must lose more");
        prop_assert!(fspl_db(f + df, d).unwrap() > base, "higher carrier must lose more");
    }

    #[test]
    fn rmse_is_nonnegative_and_vanishes_only_on_equality(
        v in prop::collection::vec(-120.0f64..120.0, 1..40),
        delta in 0.5f64..10.0,
    ) {
        prop_assert_eq!(rmse(&v, &v).unwrap(), 0.0, "self-distance must be zero");
        let mut w = v.clone();
        w[0] += delta;
        let r = rmse(&v, &w).unwrap();
        let expected = delta / (v.len() as f64).sqrt();
        prop_assert!(r > 0.0, "a perturbed copy must not score zero");
        prop_assert!(
            (r - expected).abs() < 1e-9 * expected.max(1.0),
            "single-element perturbation: rmse {r}, expected {expected}"
        );
    }

    #[test]
    fn msle_is_symmetric_in_its_arguments(
        pair in prop::collection::vec((40.0f64..160.0, 40.0f64..160.0), 1..40),
    ) {
        let (a, b): (Vec<f64>, Vec<f64>) = pair.into_iter().unzip();
        prop_assert_eq!(
            msle(&a, &b).unwrap(),
            msle(&b, &a).unwrap(),
            "squared log differences do not depend on argument order"
        );
    }

    #[test]
    fn correlation_is_bounded_and_exact_on_affine_images(
        v in prop::collection::vec(-100.0f64..100.0, 2..40),
        scale in 0.1f64..5.0,
        shift in -50.0f64..50.0,
        noise in prop::collection::vec(-30.0f64..30.0, 2..40),
    ) {
        let spread = v.iter().cloned().fold(f64::NAN, f64::max)
            - v.iter().cloned().fold(f64::NAN, f64::min);
        prop_assume!(spread > 1e-6);

        let image: Vec<f64> = v.iter().map(|&x| scale * x + shift).collect();
        let rho = pearson(&v, &image).unwrap();
        prop_assert!(
            (rho - 1.0).abs() < 1e-9,
            "a positive affine image must correlate at 1, got {rho}"
        );

        let n = v.len().min(noise.len());
        let other: Vec<f64> = v[..n].iter().zip(&noise[..n]).map(|(a, b)| a + b).collect();
        if let Ok(r) = pearson(&v[..n], &other) {
            prop_assert!((-1.0..=1.0).contains(&r), "correlation out of range: {r}");
        }
    }

    #[test]
    fn close_in_fit_is_exact_on_noise_free_data(
        points in prop::collection::vec((0.6f64..6.0, 0.1f64..3.0), 2..120),
        n_true in 1.5f64..6.0,
    ) {
        prop_assume!(points.iter().any(|p| p.1 != points[0].1));
        let samples: Vec<(f64, f64, f64)> = points
            .iter()
            .map(|&(f, u)| {
                let d = 10f64.powf(u);
                (f, d, fspl_db(f, 1.0).unwrap() + 10.0 * n_true * d.log10())
            })
            .collect();
        let fit = ci_fit_multifreq(&samples, 1.0).unwrap();
        prop_assert!(
            (fit.n - n_true).abs() <= 1e-9,
            "exponent {n_true} recovered as {}", fit.n
        );
        prop_assert!(
            fit.sigma_db <= 1e-9,
            "noise-free residual spread must vanish, got {}", fit.sigma_db
        );
    }

    #[test]
    fn normalized_features_live_in_the_unit_interval(
        rows in (1usize..8).prop_flat_map(|w| {
            prop::collection::vec(prop::collection::vec(-1.0e4f64..1.0e4, w), 1..40)
        }),
    ) {
        let norm = Normalizer::fit(&rows).unwrap();
        for row in norm.transform(&rows) {
            for v in row {
                prop_assert!(
                    (0.0..=1.0).contains(&v),
                    "normalized value {v} escaped the unit interval"
                );
            }
        }
    }

    #[test]
    fn splits_partition_the_dataset_with_rounded_sizes(
        n in 1usize..400,
        fraction in 0.0f64..0.9,
        seed in any::<u64>(),
    ) {
        let ds = tagged_dataset(n);
        let (train, test) = ds.train_test_split(fraction, seed).unwrap();
        prop_assert_eq!(
            test.len(),
            (fraction * n as f64).round() as usize,
            "test size must follow the rounded fraction"
        );
        prop_assert_eq!(train.len() + test.len(), n, "no sample may vanish");

        let mut tags: Vec<u64> = train
            .samples
            .iter()
            .chain(&test.samples)
            .map(|s| s.azimuth_deg as u64)
            .collect();
        tags.sort_unstable();
        prop_assert!(
            tags.iter().enumerate().all(|(i, &t)| t == i as u64),
            "partitions must cover each sample exactly once"
        );
    }

    #[test]
    fn slugs_are_lowercase_tokens_and_idempotent(name in "\\PC{0,40}") {
        let s = slug(&name);
        prop_assert!(
            s.chars().all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '-'),
            "slug {s:?} contains a character outside [a-z0-9-]"
        );
        prop_assert!(!s.starts_with('-') && !s.ends_with('-'), "slug {s:?} has edge dashes");
        prop_assert!(!s.contains("--"), "slug {s:?} has a doubled separator");
        let twice = slug(&s);
        prop_assert_eq!(twice, s, "slugging must be idempotent");
    }
}
