use std::f64::consts::PI;

use cutfem_membrane::analysis::cylinder_load;
use cutfem_membrane::basis::HEX_REFERENCE_NODES;
use cutfem_membrane::cut::{cut_polygon, extract_surface, tessellate, ExtractOptions, QuadratureRule};
use cutfem_membrane::level_set::{classify, discretize, Axis, LevelSet};
use cutfem_membrane::mesh::{build_structured, Aabb, CellKind};
use cutfem_membrane::Vec3;
use proptest::prelude::*;

fn unit_cube() -> Vec<Vec3> {
    HEX_REFERENCE_NODES.iter().map(|p| (Vec3::from(*p) + Vec3::repeat(1.0)) / 2.0).collect()
}

#[test]
fn axis_plane_area_is_exact() {
    for kind in [CellKind::Tet4, CellKind::Hex8] {
        let m = build_structured(Aabb::new([0.0; 3], [2.0, 3.0, 1.0]), [4, 5, 3], kind).unwrap();
        let ls = LevelSet::Plane { normal: [0.0, 0.0, 1.0], offset: 0.55 };
        let phi = discretize(&ls, &m);
        let active = classify(&m, &phi).unwrap();
        let s = extract_surface(&m, &phi, &active, ExtractOptions::for_kind(kind)).unwrap();
        assert!((s.area - 6.0).abs() < 1e-12, "{kind}: {}", s.area);
        assert!(s.skipped.is_empty());
        assert!(s.triangles.iter().all(|t| (t.facet.normal - Vec3::z()).norm() < 1e-12));
    }
}

#[test]
fn cylinder_load_integrates_to_half_the_force() {
    let ls = LevelSet::Cylinder { center: [0.0, 0.0], radius: 1.0, axis: Axis::X };
    let m = build_structured(Aabb::new([0.0, -1.2, -1.2], [4.0, 1.2, 1.2]), [40, 24, 24], CellKind::Tet4).unwrap();
    let phi = discretize(&ls, &m);
    let active = classify(&m, &phi).unwrap();
    let opts = ExtractOptions { rule: QuadratureRule::ThreePoint, area_tol: None };
    let s = extract_surface(&m, &phi, &active, opts).unwrap();
    let total: f64 = s
        .triangles
        .iter()
        .flat_map(|t| t.quadrature.iter())
        .map(|q| q.weight * cylinder_load(q.x.x, 1.0, 1.0, 4.0).x)
        .sum();
    assert!((total - 0.5).abs() < 1e-2, "{total}");
    assert!((s.area - 8.0 * PI).abs() < 0.05);
}

#[test]
fn quadrature_weights_sum_to_area() {
    let m = build_structured(Aabb::new([-1.5; 3], [1.5; 3]), [9, 9, 9], CellKind::Hex8).unwrap();
    let phi = discretize(&LevelSet::Oblate, &m);
    let active = classify(&m, &phi).unwrap();
    let s = extract_surface(&m, &phi, &active, ExtractOptions::for_kind(CellKind::Hex8)).unwrap();
    let w: f64 = s.triangles.iter().flat_map(|t| t.quadrature.iter()).map(|q| q.weight).sum();
    assert!((w - s.area).abs() < 1e-12 * s.area);
    // parent cells are sorted and every triangle sits in an active cell
    assert!(s.triangles.windows(2).all(|p| p[0].facet.cell <= p[1].facet.cell));
    assert!(s.triangles.iter().all(|t| active.is_active[t.facet.cell]));
}

proptest! {
    #[test]
    fn plane_cut_of_cube(
        n in prop::array::uniform3(-1.0f64..1.0),
        s in 0.05f64..0.95,
    ) {
        let n = Vec3::from(n);
        prop_assume!(n.norm() > 0.1);
        let n = n.normalize();
        let cube = unit_cube();
        // offset between the smallest and largest vertex values
        let vals: Vec<f64> = cube.iter().map(|x| n.dot(x)).collect();
        let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let d = lo + s * (hi - lo);
        let phi: Vec<f64> = vals.iter().map(|v| v - d).collect();
        prop_assume!(phi.iter().all(|v| v.abs() > 1e-9));
        let poly = cut_polygon(0, CellKind::Hex8, &cube, &phi).unwrap();
        prop_assert!((3..=6).contains(&poly.points.len()));
        for p in &poly.points {
            prop_assert!((n.dot(p) - d).abs() < 1e-12);
        }
        let tris = tessellate(&poly, 0.0).unwrap();
        let area: f64 = tris.iter().map(|t| t.area).sum();
        for t in &tris {
            prop_assert!((t.normal.dot(&n).abs() - 1.0).abs() < 1e-9);
            prop_assert!(t.normal.dot(&poly.orientation) > 0.0);
        }
        // the same cut through the six tetrahedra of the cube
        let tets = build_structured(Aabb::new([0.0; 3], [1.0; 3]), [1, 1, 1], CellKind::Tet4).unwrap();
        let mut tet_area = 0.0;
        for c in 0..tets.n_cells() {
            let coords = tets.cell_coords(c);
            let phi: Vec<f64> = coords.iter().map(|x| n.dot(x) - d).collect();
            if phi.iter().any(|&v| v > 0.0) && phi.iter().any(|&v| v < 0.0) {
                let p = cut_polygon(c, CellKind::Tet4, &coords, &phi).unwrap();
                tet_area += tessellate(&p, 0.0).unwrap().iter().map(|t| t.area).sum::<f64>();
            }
        }
        prop_assert!((area - tet_area).abs() < 1e-12, "{} vs {}", area, tet_area);
    }
}
