//! Runs the full comparative study end to end at the desk-scale sweep:
//! scene generation, three-site simulation, model training, stratified
//! evaluation against the empirical baselines, and the acceptance gates.
//!
//! Writes its artifact tree under `target/examples/reproduce_study/` and
//! prints the gate table. Expect a few minutes of runtime.

use plmodel::pipeline::{reproduce, ReproduceScale};

fn main() -> plmodel::Result<()> {
    let out = std::path::PathBuf::from("target/examples/reproduce_study");
    // The study refuses a non-empty directory, so clear leftovers first.
    if out.exists() {
        std::fs::remove_dir_all(&out)?;
    }
    let started = std::time::Instant::now();
    let summary = reproduce(&out, ReproduceScale::Small, 42)?;

    println!("artifacts under {}:", out.display());
    for a in &summary.artifacts {
        println!("  {}  {}", &a.sha256[..12], a.path);
    }
    println!("\ngates:");
    for g in &summary.gates {
        let mark = if g.passed { "PASS" } else { "FAIL" };
        println!("  [{mark}] {} - {}", g.name, g.detail);
    }
    println!("\nelapsed: {:.1} s", started.elapsed().as_secs_f64());
    summary.ensure_gates()
}
