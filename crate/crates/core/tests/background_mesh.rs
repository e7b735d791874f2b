use cutfem_membrane::mesh::{build_structured, jitter_interior, mesh_size, mesh_size_from_count, Aabb, CellKind};
use proptest::prelude::*;

#[test]
fn counts_and_volume() {
    let b = Aabb::new([0.0, -1.0, 2.0], [3.0, 1.0, 3.0]);
    for (kind, per_hex) in [(CellKind::Hex8, 1), (CellKind::Tet4, 6)] {
        let m = build_structured(b, [3, 4, 2], kind).unwrap();
        assert_eq!(m.n_vertices(), 4 * 5 * 3);
        assert_eq!(m.n_cells(), 24 * per_hex);
        let v: f64 = (0..m.n_cells()).map(|c| m.cell_volume(c)).sum();
        assert!((v - b.volume()).abs() < 1e-12);
        assert!((0..m.n_cells()).all(|c| m.cell_volume(c) > 0.0));
    }
}

#[test]
fn interior_faces_have_two_cells() {
    for kind in [CellKind::Hex8, CellKind::Tet4] {
        let m = build_structured(Aabb::new([0.0; 3], [1.0; 3]), [3, 3, 3], kind).unwrap();
        let nfaces = kind.faces().len();
        let boundary = m.faces().iter().filter(|f| f.is_boundary()).count();
        let interior = m.faces().len() - boundary;
        assert_eq!(2 * interior + boundary, nfaces * m.n_cells());
        // boundary faces tile the six sides of the cube
        let per_side = if kind == CellKind::Hex8 { 9 } else { 18 };
        assert_eq!(boundary, 6 * per_side);
    }
}

#[test]
fn mesh_size_from_vertex_count() {
    assert!((mesh_size_from_count(1376) - 0.0899).abs() < 5e-5);
    let m = build_structured(Aabb::new([0.0; 3], [1.0; 3]), [9, 9, 9], CellKind::Tet4).unwrap();
    assert!((mesh_size(&m) - 0.1).abs() < 1e-15);
}

#[test]
fn rejects_degenerate_input() {
    assert!(build_structured(Aabb::new([0.0; 3], [1.0; 3]), [0, 1, 1], CellKind::Hex8).is_err());
    assert!(build_structured(Aabb::new([0.0; 3], [1.0, 0.0, 1.0]), [1, 1, 1], CellKind::Tet4).is_err());
}

#[test]
fn jitter_keeps_boundary_and_orientation() {
    let m = build_structured(Aabb::new([0.0; 3], [1.0; 3]), [4, 4, 4], CellKind::Tet4).unwrap();
    let j = jitter_interior(&m, 0.2, 3).unwrap();
    let tol = 1e-12;
    for v in 0..m.n_vertices() {
        if m.is_boundary_vertex(v, tol) {
            assert_eq!(m.vertices()[v], j.vertices()[v]);
        }
    }
    assert!((0..j.n_cells()).all(|c| j.cell_volume(c) > 0.0));
    let v: f64 = (0..j.n_cells()).map(|c| j.cell_volume(c)).sum();
    assert!((v - 1.0).abs() < 1e-12);
}

proptest! {
    #[test]
    fn volumes_tile_the_box(
        nx in 1usize..5, ny in 1usize..5, nz in 1usize..5,
        lx in 0.1f64..3.0, ly in 0.1f64..3.0, lz in 0.1f64..3.0,
        hex in any::<bool>(),
    ) {
        let kind = if hex { CellKind::Hex8 } else { CellKind::Tet4 };
        let b = Aabb::new([-0.5, 0.25, 1.0], [-0.5 + lx, 0.25 + ly, 1.0 + lz]);
        let m = build_structured(b, [nx, ny, nz], kind).unwrap();
        let v: f64 = (0..m.n_cells()).map(|c| m.cell_volume(c)).sum();
        prop_assert!((v - b.volume()).abs() < 1e-12 * b.volume().max(1.0));
    }
}
