//! Plane cuts through a single reference cell: every polygon size a
//! tetrahedron or hexahedron can produce, with its triangulated area.
//!
//! ```text
//! cargo run --example cut_cases
//! ```

use cutfem_membrane::basis::{HEX_REFERENCE_NODES, TET_REFERENCE_NODES};
use cutfem_membrane::cut::{cut_polygon, tessellate};
use cutfem_membrane::level_set::LevelSet;
use cutfem_membrane::mesh::CellKind;
use cutfem_membrane::Vec3;

fn main() -> cutfem_membrane::Result<()> {
    let tet: Vec<Vec3> = TET_REFERENCE_NODES.iter().map(|p| Vec3::from(*p)).collect();
    // unit cube [0, 1]^3 in the hexahedron's node order
    let hex: Vec<Vec3> = HEX_REFERENCE_NODES
        .iter()
        .map(|p| (Vec3::from(*p) + Vec3::repeat(1.0)) / 2.0)
        .collect();
    let cases = [
        (CellKind::Tet4, [1.0, 0.0, 0.0], 0.5, 0.125),
        (CellKind::Tet4, [1.0, 1.0, 0.0], 0.5, 2f64.sqrt() / 4.0),
        (CellKind::Hex8, [1.0, 1.0, 1.0], 0.5, 3f64.sqrt() / 8.0),
        (CellKind::Hex8, [0.0, 0.0, 1.0], 0.5, 1.0),
        (CellKind::Hex8, [1.0, 1.0, 2.0], 1.5, 0.875 * 6f64.sqrt() / 2.0),
        (CellKind::Hex8, [1.0, 1.0, 1.0], 1.5, 3.0 * 3f64.sqrt() / 4.0),
    ];
    for (kind, normal, offset, exact) in cases {
        let coords = if kind == CellKind::Tet4 { &tet } else { &hex };
        let ls = LevelSet::Plane { normal, offset };
        let phi: Vec<f64> = coords.iter().map(|x| ls.eval(x)).collect();
        let poly = cut_polygon(0, kind, coords, &phi)?;
        let triangles = tessellate(&poly, 1e-14)?;
        let area: f64 = triangles.iter().map(|t| t.area).sum();
        println!(
            "{kind} n = {normal:?}, d = {offset}: {} points, {} triangles, area {area:.15} (exact {exact:.15})",
            poly.points.len(),
            triangles.len()
        );
        for p in &poly.points {
            println!("    ({:.4}, {:.4}, {:.4})", p.x, p.y, p.z);
        }
    }
    Ok(())
}
