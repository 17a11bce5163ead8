//! Simulates a full coverage map for one transmitter over a generated
//! neighborhood and writes both the CSV table and a grayscale PGM
//! rendering (darker = stronger signal) under
//! `target/examples/coverage_map/`.

use plmodel::geom::{Point2, Rect};
use plmodel::raysim::{coverage, write_coverage_csv, write_coverage_pgm, SimConfig};
use plmodel::scene::{generate_scene, ReceiverGrid, SceneGenSpec, TransmitterSite};

fn main() -> plmodel::Result<()> {
    let out = std::path::PathBuf::from("target/examples/coverage_map");
    std::fs::create_dir_all(&out)?;

    let spec = SceneGenSpec {
        width_m: 600.0,
        height_m: 600.0,
        n_buildings: 24,
        ..SceneGenSpec::default()
    };
    let scene = generate_scene(11, &spec)?;
    let site = TransmitterSite {
        name: "Rooftop".into(),
        position: Point2::new(-40.0, 30.0),
        height_agl_m: 18.0,
        power_w: 5.0,
        gain_dbi: 3.0,
    };
    let grid = ReceiverGrid {
        extent: Rect {
            min_x: -280.0,
            min_y: -280.0,
            max_x: 280.0,
            max_y: 280.0,
        },
        spacing_m: 20.0,
        rx_height_m: 1.5,
        rx_gain_dbi: 2.1,
        max_distance_m: 2000.0,
    };
    let cfg = SimConfig {
        max_reflections: 2,
        frequency_ghz: 1.5,
        ..SimConfig::default()
    };

    let started = std::time::Instant::now();
    let cov = coverage(&scene, &site, &grid, &cfg)?;
    let elapsed = started.elapsed().as_secs_f64();

    let n = cov.cells.len();
    let covered: Vec<f64> = cov.cells.iter().filter_map(|c| c.path_loss_db).collect();
    let n_los = cov.cells.iter().filter(|c| c.los).count();
    let mean_pl = covered.iter().sum::<f64>() / covered.len() as f64;
    let worst = covered.iter().cloned().fold(f64::NAN, f64::max);

    println!(
        "simulated {} x {} cells ({} total) in {elapsed:.2} s",
        cov.n_cols, cov.n_rows, n
    );
    println!("  buildings      : {}", scene.buildings.len());
    println!("  covered cells  : {} ({:.1}%)", covered.len(), 100.0 * covered.len() as f64 / n as f64);
    println!("  line of sight  : {} ({:.1}%)", n_los, 100.0 * n_los as f64 / n as f64);
    println!("  mean path loss : {mean_pl:.1} dB");
    println!("  deepest shadow : {worst:.1} dB");

    let csv_path = out.join("coverage.csv");
    let pgm_path = out.join("coverage.pgm");
    write_coverage_csv(&cov, &csv_path)?;
    write_coverage_pgm(&cov, &pgm_path)?;
    println!("\nwrote {}", csv_path.display());
    println!("wrote {} (north-up, darker = less loss)", pgm_path.display());
    Ok(())
}
