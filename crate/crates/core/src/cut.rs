//! Reconstruction of the discrete surface inside each active cell.
//!
//! Every sign-changing edge contributes one linearly interpolated cut point.
//! The points are projected onto the plane orthogonal to the cell orientation
//! vector, ordered by a 2D convex hull and fan-triangulated. Triangles keep
//! their original 3D vertices, so non-planar hexahedral cuts retain their area.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::basis::ReferenceBasis;
use crate::level_set::{ActiveMesh, DiscreteLevelSet};
use crate::mesh::{self, BackgroundMesh, CellKind};
use crate::{Error, Result, Vec3};

/// Interpolated zero of `phi` on the edge `xm -> xn`.
pub fn edge_cut_point(xm: &Vec3, xn: &Vec3, phi_m: f64, phi_n: f64) -> Result<Vec3> {
    if !(phi_m * phi_n < 0.0) {
        return Err(Error::Contract(format!(
            "edge values {phi_m} and {phi_n} do not change sign"
        )));
    }
    // Always interpolate from the negative end so swapping endpoints is exact.
    let (x0, x1, p0, p1) = if phi_m < 0.0 {
        (xm, xn, phi_m, phi_n)
    } else {
        (xn, xm, phi_n, phi_m)
    };
    let t = p0 / (p0 - p1);
    Ok(x0 + (x1 - x0) * t)
}

/// Sum over cut edges of `x_pos - x_neg`; falls back to the least-squares
/// gradient of `phi` when the sum cancels.
pub fn orientation_vector(kind: CellKind, coords: &[Vec3], phi: &[f64]) -> Vec3 {
    let mut n = Vec3::zeros();
    let mut scale = 0.0f64;
    for &[a, b] in kind.edges() {
        if phi[a] * phi[b] < 0.0 {
            let (neg, pos) = if phi[a] < 0.0 { (a, b) } else { (b, a) };
            let d = coords[pos] - coords[neg];
            scale = scale.max(d.norm());
            n += d;
        }
    }
    if n.norm() > 1e-12 * scale {
        return n;
    }
    fitted_gradient(coords, phi)
}

/// Gradient of the least-squares linear fit of nodal values.
fn fitted_gradient(coords: &[Vec3], phi: &[f64]) -> Vec3 {
    let k = coords.len() as f64;
    let xm: Vec3 = coords.iter().sum::<Vec3>() / k;
    let pm = phi.iter().sum::<f64>() / k;
    let mut a = crate::Mat3::zeros();
    let mut rhs = Vec3::zeros();
    for (x, p) in coords.iter().zip(phi) {
        let d = x - xm;
        a += d * d.transpose();
        rhs += d * (p - pm);
    }
    a.lu().solve(&rhs).unwrap_or_else(Vec3::zeros)
}

/// Cut points of one active cell.
#[derive(Clone, Debug)]
pub struct CutPolygon {
    pub cell: usize,
    pub points: Vec<Vec3>,
    pub orientation: Vec3,
}

/// Builds the cut polygon of a cell from its vertex coordinates and values.
pub fn cut_polygon(cell: usize, kind: CellKind, coords: &[Vec3], phi: &[f64]) -> Result<CutPolygon> {
    let edges = kind.edges();
    let mut points = Vec::with_capacity(6);
    let mut cut_edge = [usize::MAX; 12];
    for (e, &[a, b]) in edges.iter().enumerate() {
        if phi[a] * phi[b] < 0.0 {
            cut_edge[e] = points.len();
            points.push(edge_cut_point(&coords[a], &coords[b], phi[a], phi[b])?);
        }
    }
    if points.len() < 3 {
        return Err(Error::DegenerateCut {
            cell,
            reason: format!("{} cut points", points.len()),
        });
    }
    if kind == CellKind::Hex8 {
        check_single_loop(cell, kind, &cut_edge, points.len())?;
    }
    Ok(CutPolygon {
        cell,
        points,
        orientation: orientation_vector(kind, coords, phi),
    })
}

/// Rejects hex cuts that split into several loops or have ambiguous faces.
fn check_single_loop(cell: usize, kind: CellKind, cut_edge: &[usize; 12], npoints: usize) -> Result<()> {
    if npoints > 6 {
        return Err(Error::DegenerateCut {
            cell,
            reason: format!("{npoints} cut points (multi-component or saddle cut)"),
        });
    }
    let edges = kind.edges();
    let edge_of = |a: usize, b: usize| {
        edges
            .iter()
            .position(|e| (e[0] == a && e[1] == b) || (e[0] == b && e[1] == a))
            .expect("face edge is a cell edge")
    };
    let mut parent: Vec<usize> = (0..npoints).collect();
    fn root(p: &mut [usize], mut i: usize) -> usize {
        while p[i] != i {
            p[i] = p[p[i]];
            i = p[i];
        }
        i
    }
    for face in kind.faces() {
        let on_face: Vec<usize> = (0..face.len())
            .map(|i| edge_of(face[i], face[(i + 1) % face.len()]))
            .filter_map(|e| (cut_edge[e] != usize::MAX).then_some(cut_edge[e]))
            .collect();
        match on_face.len() {
            0 => {}
            2 => {
                let (a, b) = (root(&mut parent, on_face[0]), root(&mut parent, on_face[1]));
                parent[a] = b;
            }
            n => {
                return Err(Error::DegenerateCut {
                    cell,
                    reason: format!("ambiguous face with {n} cut edges"),
                })
            }
        }
    }
    let r0 = root(&mut parent, 0);
    if (1..npoints).any(|i| root(&mut parent, i) != r0) {
        return Err(Error::DegenerateCut {
            cell,
            reason: "cut splits into disjoint polygons".into(),
        });
    }
    Ok(())
}

/// Flat triangle of the discrete surface.
#[derive(Clone, Debug)]
pub struct Facet {
    pub vertices: [Vec3; 3],
    pub area: f64,
    /// Unit normal with `normal . orientation > 0`.
    pub normal: Vec3,
    pub cell: usize,
}

impl Facet {
    pub fn centroid(&self) -> Vec3 {
        (self.vertices[0] + self.vertices[1] + self.vertices[2]) / 3.0
    }
}

/// Orthonormal `(e1, e2)` with `e1 x e2 = n / |n|`.
fn plane_frame(n: &Vec3) -> (Vec3, Vec3) {
    let nz = n.normalize();
    let helper = if nz.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() };
    let e1 = helper.cross(&nz).normalize();
    let e2 = nz.cross(&e1);
    (e1, e2)
}

fn cross2(o: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

/// Counter-clockwise hull indices (Andrew's monotone chain), collinear
/// points dropped.
fn convex_hull(p: &[[f64; 2]], eps: f64) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..p.len()).collect();
    idx.sort_by(|&a, &b| p[a].partial_cmp(&p[b]).unwrap());
    if idx.len() < 3 {
        return idx;
    }
    let mut hull: Vec<usize> = Vec::with_capacity(2 * idx.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &usize>> = if pass == 0 {
            Box::new(idx.iter())
        } else {
            Box::new(idx.iter().rev())
        };
        for &i in iter {
            while hull.len() >= start + 2
                && cross2(p[hull[hull.len() - 2]], p[hull[hull.len() - 1]], p[i]) <= eps
            {
                hull.pop();
            }
            hull.push(i);
        }
        hull.pop();
    }
    hull
}

/// Orders the polygon in the plane orthogonal to its orientation vector and
/// fan-triangulates it. Triangles with area below `area_tol` are dropped.
pub fn tessellate(poly: &CutPolygon, area_tol: f64) -> Result<Vec<Facet>> {
    let pts = &poly.points;
    if pts.len() < 3 {
        return Err(Error::DegenerateCut {
            cell: poly.cell,
            reason: "fewer than three points".into(),
        });
    }
    let (e1, e2) = plane_frame(&poly.orientation);
    let origin = pts[0];
    let flat: Vec<[f64; 2]> = pts
        .iter()
        .map(|x| {
            let d = x - origin;
            [d.dot(&e1), d.dot(&e2)]
        })
        .collect();
    let extent = flat
        .iter()
        .map(|q| q[0].abs().max(q[1].abs()))
        .fold(0.0, f64::max);
    let eps = 1e-14 * extent * extent;

    let mut order = convex_hull(&flat, eps);
    if order.len() < pts.len() {
        // Non-convex projection of a warped hex cut: order all points by angle.
        let c = flat.iter().fold([0.0, 0.0], |acc, q| [acc[0] + q[0], acc[1] + q[1]]);
        let c = [c[0] / flat.len() as f64, c[1] / flat.len() as f64];
        order = (0..pts.len()).collect();
        order.sort_by(|&a, &b| {
            let ta = (flat[a][1] - c[1]).atan2(flat[a][0] - c[0]);
            let tb = (flat[b][1] - c[1]).atan2(flat[b][0] - c[0]);
            ta.partial_cmp(&tb).unwrap()
        });
    }
    let area2: f64 = (1..order.len() - 1)
        .map(|i| cross2(flat[order[0]], flat[order[i]], flat[order[i + 1]]))
        .sum();
    if area2.abs() <= eps {
        return Err(Error::DegenerateCut {
            cell: poly.cell,
            reason: "collinear cut points".into(),
        });
    }

    let mut out = Vec::with_capacity(order.len() - 2);
    for i in 1..order.len() - 1 {
        let mut v = [pts[order[0]], pts[order[i]], pts[order[i + 1]]];
        let mut n = (v[1] - v[0]).cross(&(v[2] - v[0]));
        let area = 0.5 * n.norm();
        if area <= area_tol {
            continue;
        }
        if n.dot(&poly.orientation) < 0.0 {
            v.swap(1, 2);
            n = -n;
        }
        out.push(Facet {
            vertices: v,
            area,
            normal: n / (2.0 * area),
            cell: poly.cell,
        });
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QuadratureRule {
    /// One point at the centroid.
    Centroid,
    /// Three edge midpoints with equal weights.
    ThreePoint,
}

impl QuadratureRule {
    pub fn default_for(kind: CellKind) -> Self {
        match kind {
            CellKind::Tet4 => QuadratureRule::Centroid,
            CellKind::Hex8 => QuadratureRule::ThreePoint,
        }
    }
}

#[derive(Clone, Debug)]
pub struct QuadPoint {
    pub x: Vec3,
    /// Reference coordinates in the parent cell.
    pub xi: Vec3,
    pub weight: f64,
}

/// Quadrature points of `facet` with parent-cell reference coordinates.
pub fn surface_quadrature(
    facet: &Facet,
    kind: CellKind,
    parent: &[Vec3],
    rule: QuadratureRule,
) -> Result<Vec<QuadPoint>> {
    let [a, b, c] = facet.vertices;
    let pts: Vec<(Vec3, f64)> = match rule {
        QuadratureRule::Centroid => vec![(facet.centroid(), facet.area)],
        QuadratureRule::ThreePoint => {
            let w = facet.area / 3.0;
            vec![((a + b) * 0.5, w), ((b + c) * 0.5, w), ((c + a) * 0.5, w)]
        }
    };
    let basis = ReferenceBasis::new(kind);
    let h = (parent[1] - parent[0]).norm().max((parent[2] - parent[0]).norm());
    pts.into_iter()
        .map(|(x, weight)| {
            let xi = basis.map_to_reference(parent, &x).map_err(|e| {
                Error::Geometry(format!("cell {}: {e}", facet.cell))
            })?;
            // 1e-9 h in physical terms, loosely converted to reference units
            let tol = match kind {
                CellKind::Tet4 => 1e-9,
                CellKind::Hex8 => 2e-9,
            };
            if !basis.contains(&xi, tol) {
                return Err(Error::Contract(format!(
                    "quadrature point {x:?} outside parent cell {} (h = {h:.3e})",
                    facet.cell
                )));
            }
            Ok(QuadPoint { x, xi, weight })
        })
        .collect()
}

#[derive(Clone, Debug)]
pub struct SurfaceTriangle {
    pub facet: Facet,
    pub quadrature: Vec<QuadPoint>,
}

/// A cell that produced no triangles, with the reason.
#[derive(Clone, Debug, Serialize)]
pub struct CutDiagnostic {
    pub cell: usize,
    pub reason: String,
}

/// The discrete surface: all triangles in ascending parent-cell order.
#[derive(Clone, Debug, Default)]
pub struct CutSurface {
    pub triangles: Vec<SurfaceTriangle>,
    pub area: f64,
    pub skipped: Vec<CutDiagnostic>,
}

impl CutSurface {
    pub fn n_quadrature_points(&self) -> usize {
        self.triangles.iter().map(|t| t.quadrature.len()).sum()
    }

    /// Triangles grouped by parent cell, preserving order.
    pub fn by_cell(&self) -> Vec<(usize, &[SurfaceTriangle])> {
        let mut out = Vec::new();
        let mut start = 0;
        while start < self.triangles.len() {
            let c = self.triangles[start].facet.cell;
            let mut end = start + 1;
            while end < self.triangles.len() && self.triangles[end].facet.cell == c {
                end += 1;
            }
            out.push((c, &self.triangles[start..end]));
            start = end;
        }
        out
    }
}

#[derive(Clone, Copy, Debug)]
pub struct ExtractOptions {
    pub rule: QuadratureRule,
    /// Sliver threshold; `None` uses `1e-12 h^2`.
    pub area_tol: Option<f64>,
}

impl ExtractOptions {
    pub fn for_kind(kind: CellKind) -> Self {
        Self {
            rule: QuadratureRule::default_for(kind),
            area_tol: None,
        }
    }
}

/// Extracts the cut surface of every active cell. Degenerate cells are
/// skipped and listed in [`CutSurface::skipped`].
pub fn extract_surface(
    mesh: &BackgroundMesh,
    phi: &DiscreteLevelSet,
    active: &ActiveMesh,
    opts: ExtractOptions,
) -> Result<CutSurface> {
    let h = mesh::mesh_size(mesh);
    let area_tol = opts.area_tol.unwrap_or(1e-12 * h * h);
    let kind = mesh.kind();
    let per_cell: Vec<Result<std::result::Result<Vec<SurfaceTriangle>, CutDiagnostic>>> = active
        .cells
        .par_iter()
        .map(|&c| {
            let coords = mesh.cell_coords(c);
            let values = phi.cell_values(mesh, c);
            let facets = match cut_polygon(c, kind, &coords, &values)
                .and_then(|poly| tessellate(&poly, area_tol))
            {
                Ok(f) => f,
                Err(Error::DegenerateCut { cell, reason }) => {
                    return Ok(Err(CutDiagnostic { cell, reason }))
                }
                Err(e) => return Err(e),
            };
            if facets.is_empty() {
                return Ok(Err(CutDiagnostic {
                    cell: c,
                    reason: "all triangles below area tolerance".into(),
                }));
            }
            facets
                .into_iter()
                .map(|facet| {
                    let quadrature = surface_quadrature(&facet, kind, &coords, opts.rule)?;
                    Ok(SurfaceTriangle { facet, quadrature })
                })
                .collect::<Result<Vec<_>>>()
                .map(Ok)
        })
        .collect();

    let mut surface = CutSurface::default();
    for r in per_cell {
        match r? {
            Ok(tris) => surface.triangles.extend(tris),
            Err(d) => surface.skipped.push(d),
        }
    }
    surface.area = surface.triangles.iter().map(|t| t.facet.area).sum();
    for d in &surface.skipped {
        log::debug!("skipped cell {}: {}", d.cell, d.reason);
    }
    Ok(surface)
}
