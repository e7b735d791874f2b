//! Manufactured-solution convergence on the oblate spheroid
//! `x^2 + y^2 + (2z)^2 = 1` with `u = (x, 0, 0)`.
//!
//! ```text
//! cargo run --release --example oblate_convergence -- [tet4|hex8] [refinements...]
//! ```

use cutfem_membrane::analysis::config::OblateConfig;
use cutfem_membrane::analysis::convergence::format_table;
use cutfem_membrane::analysis::oblate;
use cutfem_membrane::mesh::CellKind;

fn main() -> cutfem_membrane::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let mut args = std::env::args().skip(1);
    let mut cfg = OblateConfig::default();
    if let Some(kind) = args.next() {
        cfg.mesh.kind = if kind == "hex8" { CellKind::Hex8 } else { CellKind::Tet4 };
    }
    let levels: Vec<usize> = args.filter_map(|a| a.parse().ok()).collect();
    if !levels.is_empty() {
        cfg.mesh.refinements = levels;
    }
    let study = oblate(&cfg)?;
    print!("{}", format_table(&study.rows));
    for f in &study.failures {
        println!("refinement {} failed: {}", f.refinement, f.message);
    }
    Ok(())
}
