//! Stress convergence of a cylinder pulled along its axis.
//!
//! ```text
//! cargo run --release --example cylinder_convergence -- [tet4|hex8] [refinements...]
//! ```

use cutfem_membrane::analysis::config::CylinderConfig;
use cutfem_membrane::analysis::convergence::format_table;
use cutfem_membrane::analysis::cylinder;
use cutfem_membrane::mesh::CellKind;

fn main() -> cutfem_membrane::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let mut args = std::env::args().skip(1);
    let mut cfg = CylinderConfig::default();
    if let Some(kind) = args.next() {
        cfg.mesh.kind = if kind == "hex8" { CellKind::Hex8 } else { CellKind::Tet4 };
    }
    let levels: Vec<usize> = args.filter_map(|a| a.parse().ok()).collect();
    if !levels.is_empty() {
        cfg.mesh.refinements = levels;
    }

    let study = cylinder(&cfg)?;
    println!("{} background mesh, E = {}, nu = {}, t = {}", cfg.mesh.kind, cfg.material.e, cfg.material.nu, cfg.material.t);
    print!("{}", format_table(&study.rows));
    if let Some(l) = &study.finest {
        println!(
            "finest level: {} surface triangles, area {:.6} (exact {:.6})",
            l.solution.surface.triangles.len(),
            l.solution.surface.area,
            8.0 * std::f64::consts::PI
        );
    }
    Ok(())
}
