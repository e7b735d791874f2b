//! Condition number of the membrane matrix as a plane approaches a node
//! plane, with and without the face-jump penalty.
//!
//! ```text
//! cargo run --release --example conditioning_sweep -- [tet4|hex8]
//! ```

use cutfem_membrane::analysis::config::ConditioningConfig;
use cutfem_membrane::analysis::conditioning_sweep;
use cutfem_membrane::mesh::CellKind;

fn main() -> cutfem_membrane::Result<()> {
    env_logger::init();
    let mut cfg = ConditioningConfig::default();
    if std::env::args().nth(1).as_deref() == Some("hex8") {
        cfg.kind = CellKind::Hex8;
    }
    let rows = conditioning_sweep(&cfg)?;
    println!("{:>10} {:>14} {:>14}", "offset/h", "kappa(tau0=1)", "kappa(tau0=0)");
    for r in &rows {
        println!("{:>10.0e} {:>14.4e} {:>14.4e}", r.offset, r.kappa_stabilized, r.kappa_plain);
    }
    Ok(())
}
