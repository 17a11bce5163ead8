//! Builds a training dataset the way the full study does: sweep one site
//! over several antenna heights and carriers, flatten every covered cell
//! into feature rows, then carve a seeded train/test split. Files land
//! under `target/examples/dataset_pipeline/`.

use plmodel::dataset::{sweep, SweepSpec, FEATURE_NAMES};
use plmodel::geom::{Point2, Rect};
use plmodel::raysim::SimConfig;
use plmodel::scene::{generate_scene, ReceiverGrid, SceneGenSpec, TransmitterSite};

fn main() -> plmodel::Result<()> {
    let out = std::path::PathBuf::from("target/examples/dataset_pipeline");
    std::fs::create_dir_all(&out)?;

    let scene = generate_scene(
        3,
        &SceneGenSpec {
            width_m: 500.0,
            height_m: 500.0,
            n_buildings: 18,
            ..SceneGenSpec::default()
        },
    )?;
    let site = TransmitterSite {
        name: "Depot".into(),
        position: Point2::new(20.0, -35.0),
        height_agl_m: 12.0,
        power_w: 5.0,
        gain_dbi: 0.0,
    };
    let grid = ReceiverGrid {
        extent: Rect {
            min_x: -230.0,
            min_y: -230.0,
            max_x: 230.0,
            max_y: 230.0,
        },
        spacing_m: 23.0,
        rx_height_m: 1.5,
        rx_gain_dbi: 2.1,
        max_distance_m: 1500.0,
    };
    let cfg = SimConfig {
        max_reflections: 2,
        frequency_ghz: 1.5, // overridden per sweep point
        ..SimConfig::default()
    };
    let spec = SweepSpec {
        heights_m: vec![8.0, 12.0, 20.0],
        frequencies_ghz: vec![0.9, 1.5, 2.3],
        powers_w: vec![5.0],
    };

    let ds = sweep(&scene, &site, &grid, &cfg, &spec)?;
    println!(
        "swept {} heights x {} carriers -> {} samples",
        spec.heights_m.len(),
        spec.frequencies_ghz.len(),
        ds.len()
    );
    let n_los = ds.samples.iter().filter(|s| s.los).count();
    println!(
        "  LoS {} / NLoS {} ({:.1}% obstructed)",
        n_los,
        ds.len() - n_los,
        100.0 * (ds.len() - n_los) as f64 / ds.len() as f64
    );
    println!("  feature columns: {}", FEATURE_NAMES.join(", "));

    println!("\nfirst rows (distance, elevation, los -> path loss):");
    for s in ds.samples.iter().take(5) {
        println!(
            "  h={:>4.1} f={:.1} d={:>7.2} m  elev={:>5.2} deg  los={}  pl={:.2} dB",
            s.h_tx_m, s.f_ghz, s.distance_m, s.elevation_deg, u8::from(s.los), s.pl_db
        );
    }

    let (train, test) = ds.train_test_split(0.2, 42)?;
    let full = out.join("dataset.csv");
    let train_path = out.join("train.csv");
    let test_path = out.join("test.csv");
    ds.save_csv(&full)?;
    train.save_csv(&train_path)?;
    test.save_csv(&test_path)?;
    println!("\nsplit {} -> {} train / {} test (seed 42)", ds.len(), train.len(), test.len());
    println!("wrote {}", full.display());
    println!("wrote {}", train_path.display());
    println!("wrote {}", test_path.display());
    Ok(())
}
