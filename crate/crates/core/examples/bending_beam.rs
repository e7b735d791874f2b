//! Cantilever under a downward traction on its top face, with and without an
//! embedded cylindrical membrane along the beam axis.

use cutfem_membrane::analysis::bending_beam;
use cutfem_membrane::analysis::config::BeamConfig;

fn main() -> cutfem_membrane::Result<()> {
    env_logger::init();
    let cfg = BeamConfig::bending();
    let out = bending_beam(&cfg)?;
    let r = &out.report;
    println!("tube membrane area {:.4}", r.membrane_area);
    println!("mean downward displacement of the top face");
    println!("  bulk only       {:.6e}", r.baseline);
    println!("  with membrane   {:.6e}", r.stiffened);
    println!("  ratio           {:.4}", r.stiffened / r.baseline);
    println!("CG iterations {:?}, converged: {}", r.iterations, r.converged);
    Ok(())
}
