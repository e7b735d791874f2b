//! Discrete membrane, stabilisation and bulk elasticity operators.
//!
//! Unknowns are nodal displacements with three interleaved components per
//! node: dof `3 * local_node + component`. All contributions are computed
//! per element (possibly in parallel) and summed into the global matrix
//! sequentially in element order, so results do not depend on thread count.

use std::sync::Arc;

use arrayvec::ArrayVec;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::basis::{self, ReferenceBasis};
use crate::cut::{CutSurface, SurfaceTriangle};
use crate::level_set::{ActiveMesh, BandFace, NodeConstraint, NodeSelector};
use crate::mesh::{BackgroundMesh, CellKind};
use crate::sparse::CsrMatrix;
use crate::tangential::{plane_stress_lame, Projector};
use crate::{Error, Result, Vec3};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MembraneMaterial {
    #[serde(rename = "E")]
    pub e: f64,
    pub nu: f64,
    pub t: f64,
}

impl MembraneMaterial {
    pub fn new(e: f64, nu: f64, t: f64) -> Result<Self> {
        let m = Self { e, nu, t };
        m.validate()?;
        Ok(m)
    }

    /// Requires `E >= 0` (zero switches the membrane off), `-1 < nu < 1`, `t > 0`.
    pub fn validate(&self) -> Result<()> {
        if !(self.e >= 0.0 && self.nu > -1.0 && self.nu < 1.0 && self.t > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "membrane material out of range: {self:?}"
            )));
        }
        Ok(())
    }

    pub fn mu(&self) -> f64 {
        plane_stress_lame(self.e, self.nu).0
    }

    pub fn lambda(&self) -> f64 {
        plane_stress_lame(self.e, self.nu).1
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BulkMaterial {
    #[serde(rename = "E")]
    pub e: f64,
    pub nu: f64,
}

impl BulkMaterial {
    pub fn new(e: f64, nu: f64) -> Result<Self> {
        if !(e > 0.0 && nu > -1.0 && nu < 0.5) {
            return Err(Error::InvalidArgument(format!(
                "bulk material needs E > 0 and -1 < nu < 1/2, got E = {e}, nu = {nu}"
            )));
        }
        Ok(Self { e, nu })
    }

    pub fn mu(&self) -> f64 {
        self.e / (2.0 * (1.0 + self.nu))
    }

    /// 3D Lamé parameter `E nu / ((1 + nu)(1 - 2 nu))`.
    pub fn lambda(&self) -> f64 {
        self.e * self.nu / ((1.0 + self.nu) * (1.0 - 2.0 * self.nu))
    }
}

/// Face-jump penalty factor.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilizationParams {
    pub tau0: f64,
}

impl Default for StabilizationParams {
    fn default() -> Self {
        Self { tau0: 1.0 }
    }
}

/// Vector-valued load density, per unit area on membranes or per unit
/// volume in the bulk.
#[derive(Clone)]
pub struct LoadField(Arc<dyn Fn(&Vec3) -> Vec3 + Send + Sync>);

impl LoadField {
    pub fn new(f: impl Fn(&Vec3) -> Vec3 + Send + Sync + 'static) -> Self {
        Self(Arc::new(f))
    }

    pub fn zero() -> Self {
        Self::constant(Vec3::zeros())
    }

    pub fn constant(v: Vec3) -> Self {
        Self::new(move |_| v)
    }

    pub fn eval(&self, x: &Vec3) -> Vec3 {
        (self.0)(x)
    }
}

impl std::fmt::Debug for LoadField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("LoadField(..)")
    }
}

/// Numbering of the displacement unknowns on a set of mesh vertices.
#[derive(Clone, Debug)]
pub struct DofMap {
    local: Vec<usize>,
    nodes: Vec<usize>,
    prescribed: Vec<Option<f64>>,
}

impl DofMap {
    /// Dofs on the listed vertices, numbered in the given order.
    pub fn for_nodes(n_vertices: usize, nodes: &[usize]) -> Self {
        let mut local = vec![usize::MAX; n_vertices];
        for (i, &v) in nodes.iter().enumerate() {
            local[v] = i;
        }
        Self {
            local,
            nodes: nodes.to_vec(),
            prescribed: vec![None; 3 * nodes.len()],
        }
    }

    /// Membrane-only space: nodes of the active band.
    pub fn band(mesh: &BackgroundMesh, active: &ActiveMesh) -> Self {
        Self::for_nodes(mesh.n_vertices(), &active.nodes)
    }

    /// Bulk space: every mesh vertex.
    pub fn full(mesh: &BackgroundMesh) -> Self {
        let nodes: Vec<usize> = (0..mesh.n_vertices()).collect();
        Self::for_nodes(mesh.n_vertices(), &nodes)
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_dofs(&self) -> usize {
        3 * self.nodes.len()
    }

    pub fn nodes(&self) -> &[usize] {
        &self.nodes
    }

    pub fn covers_all(&self, mesh: &BackgroundMesh) -> bool {
        self.local.len() == mesh.n_vertices() && self.local.iter().all(|&l| l != usize::MAX)
    }

    pub fn local_node(&self, vertex: usize) -> Option<usize> {
        self.local.get(vertex).copied().filter(|&l| l != usize::MAX)
    }

    pub fn dof(&self, vertex: usize, component: usize) -> Option<usize> {
        self.local_node(vertex).map(|l| 3 * l + component)
    }

    fn dofs_of(&self, vertices: &[usize]) -> Result<Vec<usize>> {
        let mut out = Vec::with_capacity(3 * vertices.len());
        for &v in vertices {
            let l = self
                .local_node(v)
                .ok_or_else(|| Error::Index(format!("vertex {v} has no dofs")))?;
            out.extend([3 * l, 3 * l + 1, 3 * l + 2]);
        }
        Ok(out)
    }

    pub fn constrain(&mut self, vertex: usize, component: usize, value: f64) -> Result<()> {
        let d = self
            .dof(vertex, component)
            .ok_or_else(|| Error::Index(format!("cannot constrain vertex {vertex}: no dofs")))?;
        self.prescribed[d] = Some(value);
        Ok(())
    }

    /// Homogeneous constraints on a node selection. Returns the number of
    /// constrained dofs.
    pub fn constrain_nodes(&mut self, c: &NodeConstraint) -> Result<usize> {
        let mut n = 0;
        for &v in &c.nodes {
            for k in c.components.components() {
                self.constrain(v, k, 0.0)?;
                n += 1;
            }
        }
        Ok(n)
    }

    /// Constraints with values taken from a displacement field.
    pub fn constrain_nodes_with(
        &mut self,
        mesh: &BackgroundMesh,
        c: &NodeConstraint,
        value: impl Fn(&Vec3) -> Vec3,
    ) -> Result<usize> {
        let mut n = 0;
        for &v in &c.nodes {
            let u = value(&mesh.vertices()[v]);
            for k in c.components.components() {
                self.constrain(v, k, u[k])?;
                n += 1;
            }
        }
        Ok(n)
    }

    pub fn is_constrained(&self, dof: usize) -> bool {
        self.prescribed[dof].is_some()
    }

    pub fn constrained(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.prescribed
            .iter()
            .enumerate()
            .filter_map(|(d, p)| p.map(|v| (d, v)))
    }

    pub fn n_constrained(&self) -> usize {
        self.prescribed.iter().filter(|p| p.is_some()).count()
    }

    pub fn free_dofs(&self) -> Vec<usize> {
        (0..self.n_dofs()).filter(|&d| !self.is_constrained(d)).collect()
    }

    /// Nodal displacement of `vertex` in the solution vector `u`.
    pub fn displacement(&self, u: &[f64], vertex: usize) -> Option<Vec3> {
        self.local_node(vertex)
            .map(|l| Vec3::new(u[3 * l], u[3 * l + 1], u[3 * l + 2]))
    }

    /// Nodal interpolant of a vector field.
    pub fn interpolate(&self, mesh: &BackgroundMesh, f: impl Fn(&Vec3) -> Vec3) -> Vec<f64> {
        let mut u = vec![0.0; self.n_dofs()];
        for (l, &v) in self.nodes.iter().enumerate() {
            let val = f(&mesh.vertices()[v]);
            u[3 * l..3 * l + 3].copy_from_slice(val.as_slice());
        }
        u
    }
}

/// Collects element vertex lists and turns them into a matrix pattern.
pub struct PatternBuilder<'a> {
    dofs: &'a DofMap,
    adjacency: Vec<Vec<usize>>,
}

impl<'a> PatternBuilder<'a> {
    pub fn new(dofs: &'a DofMap) -> Self {
        Self {
            dofs,
            adjacency: vec![Vec::new(); dofs.n_nodes()],
        }
    }

    pub fn add_element(&mut self, vertices: &[usize]) -> Result<()> {
        let locals: ArrayVec<usize, 16> = vertices
            .iter()
            .map(|&v| {
                self.dofs
                    .local_node(v)
                    .ok_or_else(|| Error::Index(format!("vertex {v} has no dofs")))
            })
            .collect::<Result<_>>()?;
        for &a in &locals {
            self.adjacency[a].extend_from_slice(&locals);
        }
        Ok(())
    }

    pub fn add_cells(&mut self, mesh: &BackgroundMesh, cells: impl IntoIterator<Item = usize>) -> Result<()> {
        for c in cells {
            self.add_element(mesh.cell(c))?;
        }
        Ok(())
    }

    pub fn add_band_faces(&mut self, mesh: &BackgroundMesh, faces: &[BandFace]) -> Result<()> {
        for f in faces {
            self.add_element(&face_pair_vertices(mesh, f))?;
        }
        Ok(())
    }

    pub fn build(self) -> SparseSystem {
        let n = self.dofs.n_dofs();
        let mut rows = Vec::with_capacity(n);
        for mut adj in self.adjacency {
            adj.sort_unstable();
            adj.dedup();
            let cols: Vec<usize> = adj.iter().flat_map(|&b| [3 * b, 3 * b + 1, 3 * b + 2]).collect();
            for _ in 0..3 {
                rows.push(cols.clone());
            }
        }
        SparseSystem {
            matrix: CsrMatrix::from_pattern(n, rows),
            rhs: vec![0.0; n],
        }
    }
}

/// Symmetric matrix and right-hand side over a [`DofMap`].
#[derive(Clone, Debug)]
pub struct SparseSystem {
    pub matrix: CsrMatrix,
    pub rhs: Vec<f64>,
}

impl SparseSystem {
    /// Pattern covering the band cells and the cell pairs of its interior faces.
    pub fn for_band(mesh: &BackgroundMesh, active: &ActiveMesh, dofs: &DofMap) -> Result<Self> {
        let mut p = PatternBuilder::new(dofs);
        p.add_cells(mesh, active.cells.iter().copied())?;
        p.add_band_faces(mesh, &active.interior_faces)?;
        Ok(p.build())
    }

    /// Pattern covering every cell of the mesh.
    pub fn for_domain(mesh: &BackgroundMesh, dofs: &DofMap) -> Result<Self> {
        let mut p = PatternBuilder::new(dofs);
        p.add_cells(mesh, 0..mesh.n_cells())?;
        Ok(p.build())
    }

    pub fn n_dofs(&self) -> usize {
        self.rhs.len()
    }

    /// `v^T A v`.
    pub fn energy(&self, v: &[f64]) -> f64 {
        self.matrix.quadratic_form(v)
    }
}

struct Local {
    dofs: Vec<usize>,
    matrix: Vec<f64>,
    rhs: Vec<f64>,
}

const CHUNK: usize = 4096;

/// Computes local contributions in parallel chunks and adds them in order.
fn accumulate<T: Sync>(
    system: &mut SparseSystem,
    items: &[T],
    compute: impl Fn(&T) -> Result<Option<Local>> + Sync,
) -> Result<()> {
    for chunk in items.chunks(CHUNK) {
        let locals: Vec<Result<Option<Local>>> = chunk.par_iter().map(&compute).collect();
        for l in locals {
            let Some(l) = l? else { continue };
            if !l.matrix.is_empty() {
                system.matrix.add_block(&l.dofs, &l.matrix)?;
            }
            for (d, v) in l.dofs.iter().zip(&l.rhs) {
                system.rhs[*d] += v;
            }
        }
    }
    Ok(())
}

/// Adds `t * [(2 mu eps_G(v), eps_G(w)) + (lambda div_G v, div_G w)]` over the
/// cut surface, with tangential operators built from each facet normal.
pub fn assemble_membrane(
    system: &mut SparseSystem,
    mesh: &BackgroundMesh,
    surface: &CutSurface,
    mat: &MembraneMaterial,
    dofs: &DofMap,
) -> Result<()> {
    if mat.e == 0.0 {
        return Ok(());
    }
    let groups = surface.by_cell();
    let basis = ReferenceBasis::new(mesh.kind());
    let (mu, lambda) = (mat.mu(), mat.lambda());
    accumulate(system, &groups, |(cell, tris)| {
        let coords = mesh.cell_coords(*cell);
        let matrix = membrane_cell_matrix(&basis, &coords, tris, mat.t, mu, lambda)?;
        Ok(Some(Local {
            dofs: dofs.dofs_of(mesh.cell(*cell))?,
            matrix,
            rhs: Vec::new(),
        }))
    })
}

/// Local membrane stiffness of one cell, row-major over `3 * nodes` dofs.
pub fn membrane_cell_matrix(
    basis: &ReferenceBasis,
    coords: &[Vec3],
    tris: &[SurfaceTriangle],
    t: f64,
    mu: f64,
    lambda: f64,
) -> Result<Vec<f64>> {
    let n = coords.len();
    let m = 3 * n;
    let mut k = vec![0.0; m * m];
    for tri in tris {
        let p = Projector::from_unit(&tri.facet.normal);
        let pm = p.matrix();
        for q in &tri.quadrature {
            let ev = basis.eval(coords, &q.xi)?;
            let g: ArrayVec<Vec3, 8> = ev.gradients.iter().map(|d| pm * d).collect();
            let w = t * q.weight;
            for a in 0..n {
                for b in 0..n {
                    let gab = g[a].dot(&g[b]);
                    for i in 0..3 {
                        let row = (3 * a + i) * m + 3 * b;
                        for j in 0..3 {
                            k[row + j] += w
                                * (mu * (pm[(i, j)] * gab + g[a][j] * g[b][i])
                                    + lambda * g[a][i] * g[b][j]);
                        }
                    }
                }
            }
        }
    }
    Ok(k)
}

/// Vertices of a band face pair: the plus cell followed by the minus-only ones.
fn face_pair_vertices(mesh: &BackgroundMesh, f: &BandFace) -> ArrayVec<usize, 16> {
    let mut v: ArrayVec<usize, 16> = mesh.cell(f.plus).iter().copied().collect();
    for &x in mesh.cell(f.minus) {
        if !v.contains(&x) {
            v.push(x);
        }
    }
    v
}

/// Physical quadrature of a mesh face: `(point, weight, unit normal)`. The
/// normal follows the plus-cell outward orientation.
fn face_quadrature(mesh: &BackgroundMesh, face: usize) -> ArrayVec<(Vec3, f64, Vec3), 4> {
    let x = mesh.face_coords(face);
    match x.len() {
        3 => {
            let n = (x[1] - x[0]).cross(&(x[2] - x[0]));
            let area = 0.5 * n.norm();
            let mut out = ArrayVec::new();
            out.push(((x[0] + x[1] + x[2]) / 3.0, area, n / (2.0 * area)));
            out
        }
        _ => basis::quad_gauss_2d()
            .iter()
            .map(|([s, t], w)| {
                let nv = basis::quad_values(*s, *t);
                let dn = basis::quad_derivatives(*s, *t);
                let mut p = Vec3::zeros();
                let mut xs = Vec3::zeros();
                let mut xt = Vec3::zeros();
                for i in 0..4 {
                    p += x[i] * nv[i];
                    xs += x[i] * dn[i][0];
                    xt += x[i] * dn[i][1];
                }
                let n = xs.cross(&xt);
                let jac = n.norm();
                (p, w * jac, n / jac)
            })
            .collect(),
    }
}

/// Adds `tau0 * sum_F int_F [n_F . grad v] . [n_F . grad w]` over the interior
/// faces of the band, integrating over whole faces.
pub fn assemble_stabilization(
    system: &mut SparseSystem,
    mesh: &BackgroundMesh,
    faces: &[BandFace],
    params: StabilizationParams,
    dofs: &DofMap,
) -> Result<()> {
    if params.tau0 == 0.0 {
        return Ok(());
    }
    let basis = ReferenceBasis::new(mesh.kind());
    accumulate(system, faces, |f| {
        let verts = face_pair_vertices(mesh, f);
        let nv = verts.len();
        let m = 3 * nv;
        let plus = mesh.cell_coords(f.plus);
        let minus = mesh.cell_coords(f.minus);
        let pos_plus: ArrayVec<usize, 8> = mesh.cell(f.plus).iter().map(|v| verts.iter().position(|x| x == v).unwrap()).collect();
        let pos_minus: ArrayVec<usize, 8> = mesh.cell(f.minus).iter().map(|v| verts.iter().position(|x| x == v).unwrap()).collect();

        let mut k = vec![0.0; m * m];
        for (x, w, n) in face_quadrature(mesh, f.face) {
            // orient every point normal like the band face normal
            let n = if n.dot(&f.normal) < 0.0 { -n } else { n };
            let (xi_p, xi_m) = match mesh.kind() {
                CellKind::Tet4 => (basis.centroid(), basis.centroid()),
                CellKind::Hex8 => (
                    basis.map_to_reference(&plus, &x)?,
                    basis.map_to_reference(&minus, &x)?,
                ),
            };
            let gp = basis.eval(&plus, &xi_p)?;
            let gm = basis.eval(&minus, &xi_m)?;
            let mut jump: ArrayVec<f64, 16> = (0..nv).map(|_| 0.0).collect();
            for (i, g) in gp.gradients.iter().enumerate() {
                jump[pos_plus[i]] += n.dot(g);
            }
            for (i, g) in gm.gradients.iter().enumerate() {
                jump[pos_minus[i]] -= n.dot(g);
            }
            let s = params.tau0 * w;
            for a in 0..nv {
                for b in 0..nv {
                    let v = s * jump[a] * jump[b];
                    for c in 0..3 {
                        k[(3 * a + c) * m + 3 * b + c] += v;
                    }
                }
            }
        }
        Ok(Some(Local {
            dofs: dofs.dofs_of(&verts)?,
            matrix: k,
            rhs: Vec::new(),
        }))
    })
}

/// Adds `(f, v)` over the cut surface to the right-hand side.
pub fn assemble_membrane_load(
    system: &mut SparseSystem,
    mesh: &BackgroundMesh,
    surface: &CutSurface,
    load: &LoadField,
    dofs: &DofMap,
) -> Result<()> {
    let groups = surface.by_cell();
    let basis = ReferenceBasis::new(mesh.kind());
    accumulate(system, &groups, |(cell, tris)| {
        let n = mesh.kind().nodes_per_cell();
        let mut rhs = vec![0.0; 3 * n];
        for tri in *tris {
            for q in &tri.quadrature {
                let f = load.eval(&q.x);
                for (a, na) in basis.values(&q.xi).iter().enumerate() {
                    for k in 0..3 {
                        rhs[3 * a + k] += q.weight * f[k] * na;
                    }
                }
            }
        }
        Ok(Some(Local {
            dofs: dofs.dofs_of(mesh.cell(*cell))?,
            matrix: Vec::new(),
            rhs,
        }))
    })
}

/// Adds the 3D elasticity form `(2 mu eps(v), eps(w)) + (lambda div v, div w)`
/// and the body force over every cell.
pub fn assemble_bulk(
    system: &mut SparseSystem,
    mesh: &BackgroundMesh,
    mat: &BulkMaterial,
    body_force: Option<&LoadField>,
    dofs: &DofMap,
) -> Result<()> {
    if !dofs.covers_all(mesh) {
        return Err(Error::Contract("bulk assembly needs dofs on every vertex".into()));
    }
    let basis = ReferenceBasis::new(mesh.kind());
    let (mu, lambda) = (mat.mu(), mat.lambda());
    let cells: Vec<usize> = (0..mesh.n_cells()).collect();
    accumulate(system, &cells, |&c| {
        let coords = mesh.cell_coords(c);
        let n = coords.len();
        let m = 3 * n;
        let mut k = vec![0.0; m * m];
        let mut rhs = vec![0.0; m];
        for (xi, w_ref) in basis.volume_rule() {
            let ev = basis.eval(&coords, &xi)?;
            let w = w_ref * basis.jacobian(&coords, &xi).determinant();
            let g = &ev.gradients;
            for a in 0..n {
                for b in 0..n {
                    let gab = g[a].dot(&g[b]);
                    for i in 0..3 {
                        let row = (3 * a + i) * m + 3 * b;
                        for j in 0..3 {
                            let delta = if i == j { gab } else { 0.0 };
                            k[row + j] +=
                                w * (mu * (delta + g[a][j] * g[b][i]) + lambda * g[a][i] * g[b][j]);
                        }
                    }
                }
            }
            if let Some(f) = body_force {
                let fx = f.eval(&basis.map_to_physical(&coords, &xi));
                for (a, na) in ev.values.iter().enumerate() {
                    for i in 0..3 {
                        rhs[3 * a + i] += w * fx[i] * na;
                    }
                }
            }
        }
        Ok(Some(Local {
            dofs: dofs.dofs_of(mesh.cell(c))?,
            matrix: k,
            rhs,
        }))
    })
}

/// Adds a traction on the domain boundary faces whose vertices all satisfy
/// `selector`. Returns the loaded area.
pub fn assemble_boundary_traction(
    system: &mut SparseSystem,
    mesh: &BackgroundMesh,
    selector: NodeSelector,
    traction: &LoadField,
    dofs: &DofMap,
) -> Result<f64> {
    let faces: Vec<usize> = mesh
        .faces()
        .iter()
        .enumerate()
        .filter(|(_, f)| f.is_boundary() && f.vertices().iter().all(|&v| selector.matches(&mesh.vertices()[v])))
        .map(|(i, _)| i)
        .collect();
    let mut area = 0.0;
    for &f in &faces {
        let verts = mesh.face_vertices(f);
        let x = mesh.face_coords(f);
        let mut rhs = vec![0.0; 3 * verts.len()];
        if verts.len() == 3 {
            let a = 0.5 * (x[1] - x[0]).cross(&(x[2] - x[0])).norm();
            area += a;
            // edge midpoint rule
            for (i, j) in [(0, 1), (1, 2), (2, 0)] {
                let t = traction.eval(&((x[i] + x[j]) * 0.5));
                for k in 0..3 {
                    rhs[3 * i + k] += a / 3.0 * 0.5 * t[k];
                    rhs[3 * j + k] += a / 3.0 * 0.5 * t[k];
                }
            }
        } else {
            for ([s, t], w) in basis::quad_gauss_2d() {
                let nv = basis::quad_values(s, t);
                let dn = basis::quad_derivatives(s, t);
                let (mut p, mut xs, mut xt) = (Vec3::zeros(), Vec3::zeros(), Vec3::zeros());
                for i in 0..4 {
                    p += x[i] * nv[i];
                    xs += x[i] * dn[i][0];
                    xt += x[i] * dn[i][1];
                }
                let wj = w * xs.cross(&xt).norm();
                area += wj;
                let tr = traction.eval(&p);
                for i in 0..4 {
                    for k in 0..3 {
                        rhs[3 * i + k] += wj * nv[i] * tr[k];
                    }
                }
            }
        }
        for (d, v) in dofs.dofs_of(&verts)?.iter().zip(&rhs) {
            system.rhs[*d] += v;
        }
    }
    Ok(area)
}

/// One membrane added to a bulk problem.
#[derive(Clone, Debug)]
pub struct EmbeddedMembrane<'a> {
    pub surface: &'a CutSurface,
    pub material: MembraneMaterial,
    pub load: Option<LoadField>,
    /// Optional face-jump penalty; the bulk already stabilises the membrane.
    pub stabilization: Option<(&'a ActiveMesh, StabilizationParams)>,
}

/// Bulk stiffness plus the stiffness and loads of every embedded membrane,
/// all sharing the nodal unknowns of the background mesh.
pub fn couple(
    mesh: &BackgroundMesh,
    bulk: &BulkMaterial,
    body_force: Option<&LoadField>,
    membranes: &[EmbeddedMembrane<'_>],
    dofs: &DofMap,
) -> Result<SparseSystem> {
    if !dofs.covers_all(mesh) {
        return Err(Error::Contract(
            "coupled problems need a dof map over the whole background mesh".into(),
        ));
    }
    let mut pattern = PatternBuilder::new(dofs);
    pattern.add_cells(mesh, 0..mesh.n_cells())?;
    for m in membranes {
        if let Some((active, p)) = m.stabilization {
            if p.tau0 != 0.0 {
                pattern.add_band_faces(mesh, &active.interior_faces)?;
            }
        }
    }
    let mut system = pattern.build();
    assemble_bulk(&mut system, mesh, bulk, body_force, dofs)?;
    for m in membranes {
        m.material.validate()?;
        assemble_membrane(&mut system, mesh, m.surface, &m.material, dofs)?;
        if let Some(load) = &m.load {
            assemble_membrane_load(&mut system, mesh, m.surface, load, dofs)?;
        }
        if let Some((active, p)) = m.stabilization {
            assemble_stabilization(&mut system, mesh, &active.interior_faces, p, dofs)?;
        }
    }
    Ok(system)
}

/// Symmetric elimination of prescribed dofs: known values are moved to the
/// right-hand side, constrained rows and columns are zeroed and their
/// diagonal set to one.
pub fn apply_dirichlet(system: &mut SparseSystem, dofs: &DofMap) -> Result<()> {
    if dofs.n_dofs() != system.n_dofs() {
        return Err(Error::Contract(format!(
            "dof map has {} dofs, system has {}",
            dofs.n_dofs(),
            system.n_dofs()
        )));
    }
    let constrained: Vec<(usize, f64)> = dofs.constrained().collect();
    if !constrained.is_empty() && constrained.len() == system.n_dofs() {
        log::warn!("every dof is constrained; the system is the identity");
    }
    for &(c, g) in &constrained {
        let cols: Vec<usize> = system.matrix.row(c).0.to_vec();
        for r in cols {
            if r == c {
                continue;
            }
            if !dofs.is_constrained(r) && g != 0.0 {
                system.rhs[r] -= system.matrix.get(r, c) * g;
            }
            system.matrix.zero_entry(r, c);
        }
        let (rcols, vals) = system.matrix.row_mut(c);
        for (col, v) in rcols.iter().zip(vals.iter_mut()) {
            *v = if *col == c { 1.0 } else { 0.0 };
        }
        system.matrix.set_entry(c, c, 1.0)?;
        system.rhs[c] = g;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cut::{extract_surface, ExtractOptions};
    use crate::level_set::{classify, discretize, Axis, LevelSet};
    use crate::mesh::{build_structured, Aabb};
    use crate::tangential::{surface_divergence, surface_strain};
    use crate::Mat3;

    fn plane(normal: [f64; 3], offset: f64) -> LevelSet {
        LevelSet::Plane { normal, offset }
    }

    struct Setup {
        mesh: BackgroundMesh,
        active: ActiveMesh,
        surface: CutSurface,
        dofs: DofMap,
    }

    fn setup(kind: CellKind, div: usize, ls: &LevelSet) -> Setup {
        let mesh = build_structured(Aabb::new([0.0; 3], [1.0; 3]), [div; 3], kind).unwrap();
        let phi = discretize(ls, &mesh);
        let active = classify(&mesh, &phi).unwrap();
        let surface = extract_surface(&mesh, &phi, &active, ExtractOptions::for_kind(kind)).unwrap();
        let dofs = DofMap::band(&mesh, &active);
        Setup {
            mesh,
            active,
            surface,
            dofs,
        }
    }

    #[test]
    fn flat_membrane_energy_of_uniaxial_stretch() {
        let s = setup(CellKind::Hex8, 1, &plane([0.0, 0.0, 1.0], 0.5));
        let mut sys = SparseSystem::for_band(&s.mesh, &s.active, &s.dofs).unwrap();
        let mat = MembraneMaterial::new(1.0, 0.0, 1.0).unwrap();
        assemble_membrane(&mut sys, &s.mesh, &s.surface, &mat, &s.dofs).unwrap();
        let u = s.dofs.interpolate(&s.mesh, |x| Vec3::new(x.x, 0.0, 0.0));
        assert!((sys.energy(&u) - 1.0).abs() < 1e-13);
        let t = s.dofs.interpolate(&s.mesh, |_| Vec3::new(0.3, -1.0, 2.0));
        assert!(sys.energy(&t).abs() < 1e-13);
    }

    #[test]
    fn empty_surface_adds_nothing() {
        let s = setup(CellKind::Tet4, 2, &plane([0.0, 0.0, 1.0], 0.3));
        let mut sys = SparseSystem::for_band(&s.mesh, &s.active, &s.dofs).unwrap();
        let mat = MembraneMaterial::new(1.0, 0.3, 1.0).unwrap();
        assemble_membrane(&mut sys, &s.mesh, &CutSurface::default(), &mat, &s.dofs).unwrap();
        assert_eq!(sys.matrix.max_abs(), 0.0);
    }

    /// Element matrix entries recomputed through the pointwise operators.
    #[test]
    fn membrane_matrix_matches_pointwise_operators() {
        let s = setup(CellKind::Tet4, 3, &plane([0.3, 0.5, 0.81], 0.7));
        let basis = ReferenceBasis::new(CellKind::Tet4);
        let (mu, lambda, t) = (0.8, 1.7, 0.3);
        for (cell, tris) in s.surface.by_cell() {
            let coords = s.mesh.cell_coords(cell);
            let k = membrane_cell_matrix(&basis, &coords, tris, t, mu, lambda).unwrap();
            let m = 3 * coords.len();
            let mut brute = vec![0.0; m * m];
            for tri in tris {
                let p = Projector::from_unit(&tri.facet.normal);
                for q in &tri.quadrature {
                    let ev = basis.eval(&coords, &q.xi).unwrap();
                    let jac = |a: usize, k: usize| {
                        let mut j = Mat3::zeros();
                        j.set_row(k, &ev.gradients[a].transpose());
                        j
                    };
                    for r in 0..m {
                        for c in 0..m {
                            let (ja, jb) = (jac(r / 3, r % 3), jac(c / 3, c % 3));
                            let ea = surface_strain(&ja, &p);
                            let eb = surface_strain(&jb, &p);
                            brute[r * m + c] += t * q.weight
                                * (2.0 * mu * ea.component_mul(&eb).sum()
                                    + lambda * surface_divergence(&ja, &p) * surface_divergence(&jb, &p));
                        }
                    }
                }
            }
            for (a, b) in k.iter().zip(&brute) {
                assert!((a - b).abs() < 1e-12 * (1.0 + b.abs()));
            }
        }
    }

    #[test]
    fn stabilization_vanishes_on_linear_fields() {
        for kind in [CellKind::Tet4, CellKind::Hex8] {
            let s = setup(kind, 4, &plane([0.2, 0.3, 0.93], 0.55));
            let mut sys = SparseSystem::for_band(&s.mesh, &s.active, &s.dofs).unwrap();
            assemble_stabilization(&mut sys, &s.mesh, &s.active.interior_faces, StabilizationParams::default(), &s.dofs).unwrap();
            let u = s.dofs.interpolate(&s.mesh, |x| Vec3::new(x.x - 2.0 * x.z, 3.0 * x.y, x.x + x.y + 1.0));
            assert!(sys.energy(&u).abs() < 1e-12 * sys.matrix.max_abs(), "{kind}");
            let nonlinear = s.dofs.interpolate(&s.mesh, |x| Vec3::new(x.x * x.x, 0.0, x.y * x.z));
            assert!(sys.energy(&nonlinear) > 1e-6, "{kind}");
        }
    }

    #[test]
    fn zero_tau_adds_nothing() {
        let s = setup(CellKind::Tet4, 3, &plane([0.0, 0.0, 1.0], 0.4));
        let mut sys = SparseSystem::for_band(&s.mesh, &s.active, &s.dofs).unwrap();
        assemble_stabilization(&mut sys, &s.mesh, &s.active.interior_faces, StabilizationParams { tau0: 0.0 }, &s.dofs).unwrap();
        assert_eq!(sys.matrix.max_abs(), 0.0);
    }

    /// Two tets sharing a face: the penalty on the hat function of the
    /// off-face vertex of the plus cell is `tau0 * A * (n . grad N)^2`.
    #[test]
    fn single_face_pair_penalty() {
        let vertices = vec![
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(0.0, 1.0, 0.0),
            Vec3::new(0.0, 0.0, 1.0),
            Vec3::new(0.0, 0.0, -1.0),
        ];
        let cells = vec![0, 1, 2, 3, 0, 2, 1, 4];
        let mesh = BackgroundMesh::from_cells(
            CellKind::Tet4,
            vertices,
            cells,
            Aabb::new([0.0, 0.0, -1.0], [1.0, 1.0, 1.0]),
            Vec3::repeat(1.0),
        )
        .unwrap();
        assert!(mesh.cell_volume(0) > 0.0 && mesh.cell_volume(1) > 0.0);
        let phi = crate::level_set::DiscreteLevelSet {
            values: vec![-0.5, 0.5, -0.5, 0.5, 0.5],
            tie: 1e-12,
        };
        let active = classify(&mesh, &phi).unwrap();
        assert_eq!(active.interior_faces.len(), 1);
        let dofs = DofMap::band(&mesh, &active);
        let mut sys = SparseSystem::for_band(&mesh, &active, &dofs).unwrap();
        let tau0 = 2.5;
        assemble_stabilization(&mut sys, &mesh, &active.interior_faces, StabilizationParams { tau0 }, &dofs).unwrap();

        let face = &active.interior_faces[0];
        // off-face vertex of the plus cell
        let off = *mesh.cell(face.plus).iter().find(|v| !mesh.cell(face.minus).contains(v)).unwrap();
        let basis = ReferenceBasis::new(CellKind::Tet4);
        let ev = basis.eval(&mesh.cell_coords(face.plus), &basis.centroid()).unwrap();
        let local = mesh.cell(face.plus).iter().position(|&v| v == off).unwrap();
        let dn = face.normal.dot(&ev.gradients[local]);
        let expected = tau0 * 0.5 * dn * dn; // face area 1/2
        for k in 0..3 {
            let d = dofs.dof(off, k).unwrap();
            assert!((sys.matrix.get(d, d) - expected).abs() < 1e-14);
        }
        assert!((expected - tau0 * 0.5).abs() < 1e-14); // |n . grad N| = 1 here
    }

    #[test]
    fn membrane_load_partition_of_unity() {
        let s = setup(CellKind::Hex8, 1, &plane([0.0, 0.0, 1.0], 0.5));
        let mut sys = SparseSystem::for_band(&s.mesh, &s.active, &s.dofs).unwrap();
        assemble_membrane_load(&mut sys, &s.mesh, &s.surface, &LoadField::zero(), &s.dofs).unwrap();
        assert!(sys.rhs.iter().all(|&v| v == 0.0));
        assemble_membrane_load(&mut sys, &s.mesh, &s.surface, &LoadField::constant(Vec3::x()), &s.dofs).unwrap();
        let fx: f64 = sys.rhs.iter().step_by(3).sum();
        assert!((fx - 1.0).abs() < 1e-14);
    }

    #[test]
    fn bulk_rigid_modes_and_uniaxial_energy() {
        let mesh = build_structured(Aabb::new([0.0; 3], [1.0; 3]), [1, 1, 1], CellKind::Hex8).unwrap();
        let dofs = DofMap::full(&mesh);
        let mut sys = SparseSystem::for_domain(&mesh, &dofs).unwrap();
        let mat = BulkMaterial::new(10.0, 0.3).unwrap();
        assemble_bulk(&mut sys, &mesh, &mat, None, &dofs).unwrap();
        let u = dofs.interpolate(&mesh, |x| Vec3::new(x.x, 0.0, 0.0));
        let expected = 2.0 * mat.mu() + mat.lambda();
        assert!((sys.energy(&u) - expected).abs() < 1e-12 * expected);
        let tr = dofs.interpolate(&mesh, |_| Vec3::new(1.0, 2.0, 3.0));
        assert!(sys.energy(&tr).abs() < 1e-12);
        let rot = dofs.interpolate(&mesh, |x| Vec3::new(-x.y, x.x, 0.0));
        assert!(sys.energy(&rot).abs() < 1e-12);
    }

    #[test]
    fn bulk_kernel_has_six_modes() {
        for kind in [CellKind::Tet4, CellKind::Hex8] {
            let mesh = build_structured(Aabb::new([0.0; 3], [1.0; 3]), [2, 2, 2], kind).unwrap();
            let dofs = DofMap::full(&mesh);
            let mut sys = SparseSystem::for_domain(&mesh, &dofs).unwrap();
            assemble_bulk(&mut sys, &mesh, &BulkMaterial::new(1.0, 0.25).unwrap(), None, &dofs).unwrap();
            let eig = nalgebra::SymmetricEigen::new(sys.matrix.to_dense());
            let scale = eig.eigenvalues.max();
            let zeros = eig.eigenvalues.iter().filter(|&&l| l.abs() < 1e-10 * scale).count();
            assert_eq!(zeros, 6, "{kind}");
        }
    }

    #[test]
    fn dirichlet_examples() {
        let mesh = build_structured(Aabb::new([0.0; 3], [1.0; 3]), [2, 2, 2], CellKind::Tet4).unwrap();
        let mut dofs = DofMap::full(&mesh);
        let mut sys = SparseSystem::for_domain(&mesh, &dofs).unwrap();
        assemble_bulk(&mut sys, &mesh, &BulkMaterial::new(1.0, 0.25).unwrap(), None, &dofs).unwrap();
        let before = sys.clone();
        apply_dirichlet(&mut sys, &dofs).unwrap();
        assert_eq!(before.matrix, sys.matrix);

        // clamp the x = 0 face: the constrained matrix is positive definite
        let face = crate::level_set::domain_nodes(&mesh, NodeSelector::plane(Axis::X, 0.0), crate::level_set::ComponentMask::ALL);
        dofs.constrain_nodes(&face).unwrap();
        apply_dirichlet(&mut sys, &dofs).unwrap();
        assert!(sys.matrix.asymmetry() < 1e-14);
        let free = dofs.free_dofs();
        let reduced = sys.matrix.principal_submatrix(&free);
        let eig = nalgebra::SymmetricEigen::new(reduced.to_dense());
        assert!(eig.eigenvalues.min() > 1e-6);

        let mut all = DofMap::full(&mesh);
        let everything = crate::level_set::domain_nodes(&mesh, NodeSelector::Box { min: [-1.0; 3], max: [2.0; 3] }, crate::level_set::ComponentMask::ALL);
        all.constrain_nodes(&everything).unwrap();
        let mut sys2 = before.clone();
        apply_dirichlet(&mut sys2, &all).unwrap();
        assert_eq!(sys2.matrix.to_dense(), nalgebra::DMatrix::identity(all.n_dofs(), all.n_dofs()));
        assert!(sys2.rhs.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn coupling_adds_psd_stiffness() {
        let mesh = build_structured(Aabb::new([0.0; 3], [1.0; 3]), [3, 3, 3], CellKind::Tet4).unwrap();
        let dofs = DofMap::full(&mesh);
        let ls = plane([0.0, 0.6, 0.8], 0.55);
        let phi = discretize(&ls, &mesh);
        let active = classify(&mesh, &phi).unwrap();
        let surface = extract_surface(&mesh, &phi, &active, ExtractOptions::for_kind(CellKind::Tet4)).unwrap();
        let bulk = BulkMaterial::new(1.0, 0.3).unwrap();
        let base = couple(&mesh, &bulk, None, &[], &dofs).unwrap();
        let off = EmbeddedMembrane {
            surface: &surface,
            material: MembraneMaterial::new(0.0, 0.3, 0.1).unwrap(),
            load: None,
            stabilization: None,
        };
        let same = couple(&mesh, &bulk, None, &[off.clone()], &dofs).unwrap();
        assert_eq!(base.matrix, same.matrix);
        let on = EmbeddedMembrane {
            material: MembraneMaterial::new(50.0, 0.3, 0.1).unwrap(),
            ..off
        };
        let stiff = couple(&mesh, &bulk, None, &[on], &dofs).unwrap();
        for s in 0..20u64 {
            let v: Vec<f64> = (0..dofs.n_dofs()).map(|i| ((i as f64 + 1.0) * (s as f64 + 0.37)).sin()).collect();
            assert!(stiff.energy(&v) >= base.energy(&v) - 1e-12);
        }
        let band = DofMap::band(&mesh, &active);
        assert!(matches!(couple(&mesh, &bulk, None, &[], &band), Err(Error::Contract(_))));
    }

    #[test]
    fn boundary_traction_total_force() {
        for kind in [CellKind::Tet4, CellKind::Hex8] {
            let mesh = build_structured(Aabb::new([0.0; 3], [2.0, 1.0, 1.0]), [4, 2, 2], kind).unwrap();
            let dofs = DofMap::full(&mesh);
            let mut sys = SparseSystem::for_domain(&mesh, &dofs).unwrap();
            let area = assemble_boundary_traction(&mut sys, &mesh, NodeSelector::plane(Axis::X, 2.0), &LoadField::constant(Vec3::x()), &dofs).unwrap();
            assert!((area - 1.0).abs() < 1e-14);
            let fx: f64 = sys.rhs.iter().step_by(3).sum();
            assert!((fx - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn material_validation() {
        assert!(BulkMaterial::new(1.0, 0.5).is_err());
        assert!(MembraneMaterial::new(1.0, 0.5, 0.01).is_ok());
        assert!(MembraneMaterial::new(1.0, 0.5, 0.0).is_err());
        let b = BulkMaterial::new(100.0, 0.25).unwrap();
        assert!((b.lambda() - 40.0).abs() < 1e-12);
    }
}
