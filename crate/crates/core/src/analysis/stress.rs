//! Membrane stress recovery and stress error norms.

use crate::assembly::{DofMap, MembraneMaterial};
use crate::basis::ReferenceBasis;
use crate::cut::CutSurface;
use crate::mesh::BackgroundMesh;
use crate::tangential::{membrane_stress, surface_strain, Projector};
use crate::{Error, Mat3, Result, Vec3};

/// Discrete stress at one surface quadrature point.
#[derive(Clone, Debug, PartialEq)]
pub struct StressSample {
    pub x: Vec3,
    pub weight: f64,
    /// Normal of the surface triangle.
    pub normal: Vec3,
    pub cell: usize,
    /// Index of the triangle in the cut surface.
    pub triangle: usize,
    pub stress: Mat3,
}

/// `sigma_G(u_h)` at every surface quadrature point, using the triangle normal.
pub fn recover_stress(
    mesh: &BackgroundMesh,
    surface: &CutSurface,
    dofs: &DofMap,
    u: &[f64],
    mat: &MembraneMaterial,
) -> Result<Vec<StressSample>> {
    if u.len() != dofs.n_dofs() {
        return Err(Error::Contract(format!(
            "solution has {} entries, dof map {}",
            u.len(),
            dofs.n_dofs()
        )));
    }
    let basis = ReferenceBasis::new(mesh.kind());
    let (mu, lambda) = (mat.mu(), mat.lambda());
    let mut out = Vec::with_capacity(surface.n_quadrature_points());
    for (ti, tri) in surface.triangles.iter().enumerate() {
        let cell = tri.facet.cell;
        let coords = mesh.cell_coords(cell);
        let nodal: Vec<Vec3> = mesh
            .cell(cell)
            .iter()
            .map(|&v| {
                dofs.displacement(u, v)
                    .ok_or_else(|| Error::Index(format!("vertex {v} has no dofs")))
            })
            .collect::<Result<_>>()?;
        let p = Projector::from_unit(&tri.facet.normal);
        for q in &tri.quadrature {
            let ev = basis.eval(&coords, &q.xi)?;
            let mut jac = Mat3::zeros();
            for (ua, ga) in nodal.iter().zip(&ev.gradients) {
                jac += ua * ga.transpose();
            }
            let eps = surface_strain(&jac, &p);
            out.push(StressSample {
                x: q.x,
                weight: q.weight,
                normal: tri.facet.normal,
                cell,
                triangle: ti,
                stress: membrane_stress(&eps, &p, mu, lambda),
            });
        }
    }
    Ok(out)
}

/// `sqrt(sum_q w_q |sigma(x_q) - sigma_h(x_q)|_F^2)`.
pub fn stress_error_l2(samples: &[StressSample], exact: impl Fn(&StressSample) -> Mat3) -> f64 {
    samples
        .iter()
        .map(|s| s.weight * (exact(s) - s.stress).norm_squared())
        .sum::<f64>()
        .sqrt()
}

/// `sqrt(sum_q w_q |sigma(x_q)|_F^2)`.
pub fn stress_norm_l2(samples: &[StressSample], field: impl Fn(&StressSample) -> Mat3) -> f64 {
    samples
        .iter()
        .map(|s| s.weight * field(s).norm_squared())
        .sum::<f64>()
        .sqrt()
}

/// Area-weighted mean stress of each surface triangle, in triangle order.
pub fn triangle_stresses(samples: &[StressSample], n_triangles: usize) -> Vec<Mat3> {
    let mut sum = vec![Mat3::zeros(); n_triangles];
    let mut w = vec![0.0; n_triangles];
    for s in samples {
        sum[s.triangle] += s.stress * s.weight;
        w[s.triangle] += s.weight;
    }
    sum.into_iter()
        .zip(w)
        .map(|(s, w)| if w > 0.0 { s / w } else { s })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cut::{extract_surface, ExtractOptions};
    use crate::level_set::{classify, discretize, LevelSet};
    use crate::mesh::{build_structured, Aabb, CellKind};

    fn flat(kind: CellKind) -> (BackgroundMesh, CutSurface, DofMap) {
        let mesh = build_structured(Aabb::new([0.0; 3], [1.0; 3]), [2, 2, 2], kind).unwrap();
        let phi = discretize(&LevelSet::Plane { normal: [0.0, 0.0, 1.0], offset: 0.3 }, &mesh);
        let active = classify(&mesh, &phi).unwrap();
        let surface = extract_surface(&mesh, &phi, &active, ExtractOptions::for_kind(kind)).unwrap();
        let dofs = DofMap::band(&mesh, &active);
        (mesh, surface, dofs)
    }

    #[test]
    fn recovery_examples() {
        for kind in [CellKind::Tet4, CellKind::Hex8] {
            let (mesh, surface, dofs) = flat(kind);
            let mat = MembraneMaterial::new(1.0, 0.0, 1.0).unwrap();
            let zero = recover_stress(&mesh, &surface, &dofs, &vec![0.0; dofs.n_dofs()], &mat).unwrap();
            assert!(zero.iter().all(|s| s.stress == Mat3::zeros()));
            let tr = dofs.interpolate(&mesh, |_| Vec3::new(1.0, -2.0, 0.5));
            let s = recover_stress(&mesh, &surface, &dofs, &tr, &mat).unwrap();
            assert!(s.iter().all(|s| s.stress.abs().max() < 1e-14));
            let ux = dofs.interpolate(&mesh, |x| Vec3::new(x.x, 0.0, 0.0));
            let s = recover_stress(&mesh, &surface, &dofs, &ux, &mat).unwrap();
            let expect = Mat3::from_diagonal(&Vec3::new(1.0, 0.0, 0.0));
            assert!(s.iter().all(|s| (s.stress - expect).abs().max() < 1e-14), "{kind}");
            assert!(stress_error_l2(&s, |_| expect) < 1e-14);
            let area: f64 = s.iter().map(|s| s.weight).sum();
            assert!((area - 1.0).abs() < 1e-14);
            // constant mismatch of Frobenius norm 2 over area 1
            let off = expect + Mat3::from_diagonal(&Vec3::new(0.0, 2.0, 0.0));
            assert!((stress_error_l2(&s, |_| off) - 2.0).abs() < 1e-13);
        }
    }
}
