//! Analytic level sets, their nodal interpolants and the induced active band.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::mesh::{self, BackgroundMesh};
use crate::{Error, Result, Vec3};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub fn index(self) -> usize {
        self as usize
    }

    /// The two coordinate indices orthogonal to the axis.
    fn radial(self) -> [usize; 2] {
        match self {
            Axis::X => [1, 2],
            Axis::Y => [2, 0],
            Axis::Z => [0, 1],
        }
    }
}

/// Scalar field `rho` whose zero set is the membrane; negative inside.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum LevelSet {
    /// Distance to an infinite circular cylinder. `center` holds the two
    /// radial-plane coordinates (e.g. `(x_c, y_c)` for a `z` axis).
    Cylinder {
        center: [f64; 2],
        radius: f64,
        #[serde(default = "default_axis")]
        axis: Axis,
    },
    /// `x^2 + y^2 + (2z)^2 - 1`.
    Oblate,
    /// `normal . x - offset`.
    Plane { normal: [f64; 3], offset: f64 },
    /// `inner(x - offset)`.
    Translated {
        inner: Box<LevelSet>,
        offset: [f64; 3],
    },
}

fn default_axis() -> Axis {
    Axis::Z
}

impl LevelSet {
    pub fn eval(&self, x: &Vec3) -> f64 {
        match self {
            LevelSet::Cylinder {
                center,
                radius,
                axis,
            } => {
                let [a, b] = axis.radial();
                (x[a] - center[0]).hypot(x[b] - center[1]) - radius
            }
            LevelSet::Oblate => x.x * x.x + x.y * x.y + 4.0 * x.z * x.z - 1.0,
            LevelSet::Plane { normal, offset } => Vec3::from(*normal).dot(x) - offset,
            LevelSet::Translated { inner, offset } => inner.eval(&(x - Vec3::from(*offset))),
        }
    }

    pub fn gradient(&self, x: &Vec3) -> Vec3 {
        match self {
            LevelSet::Cylinder { center, axis, .. } => {
                let [a, b] = axis.radial();
                let d = Vec3::from_fn(|k, _| {
                    if k == a {
                        x[a] - center[0]
                    } else if k == b {
                        x[b] - center[1]
                    } else {
                        0.0
                    }
                });
                let n = d.norm();
                if n > 0.0 {
                    d / n
                } else {
                    Vec3::zeros()
                }
            }
            LevelSet::Oblate => Vec3::new(2.0 * x.x, 2.0 * x.y, 8.0 * x.z),
            LevelSet::Plane { normal, .. } => Vec3::from(*normal),
            LevelSet::Translated { inner, offset } => inner.gradient(&(x - Vec3::from(*offset))),
        }
    }

    /// Unit normal `grad rho / |grad rho|`.
    pub fn normal(&self, x: &Vec3) -> Vec3 {
        self.gradient(x).normalize()
    }

    /// Newton projection along the gradient onto the zero set.
    pub fn closest_point(&self, x: &Vec3) -> Vec3 {
        let mut p = *x;
        for _ in 0..50 {
            let r = self.eval(&p);
            if r.abs() < 1e-15 {
                break;
            }
            let g = self.gradient(&p);
            let gg = g.norm_squared();
            if gg == 0.0 {
                break;
            }
            p -= g * (r / gg);
        }
        p
    }
}

/// Nodal interpolant `phi_i = rho(x_i)` of a level set.
#[derive(Clone, Debug)]
pub struct DiscreteLevelSet {
    pub values: Vec<f64>,
    /// Value substituted for exact zeros.
    pub tie: f64,
}

impl DiscreteLevelSet {
    pub fn cell_values(&self, mesh: &BackgroundMesh, c: usize) -> arrayvec::ArrayVec<f64, 8> {
        mesh.cell(c).iter().map(|&v| self.values[v]).collect()
    }

    pub fn negated(&self) -> Self {
        Self {
            values: self.values.iter().map(|v| -v).collect(),
            tie: self.tie,
        }
    }
}

/// Samples `rho` at every vertex. Values within `1e-12 h` of zero, which
/// rounding can leave on either side, become `+1e-12 h`.
pub fn discretize(ls: &LevelSet, mesh: &BackgroundMesh) -> DiscreteLevelSet {
    let tie = 1e-12 * mesh::mesh_size(mesh);
    let values = mesh
        .vertices()
        .iter()
        .map(|x| {
            let v = ls.eval(x);
            if v.abs() < tie {
                tie
            } else {
                v
            }
        })
        .collect();
    DiscreteLevelSet { values, tie }
}

/// Interior face of the band with unit normal pointing from `plus` to `minus`.
#[derive(Clone, Debug)]
pub struct BandFace {
    pub face: usize,
    pub plus: usize,
    pub minus: usize,
    pub normal: Vec3,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComponentMask(pub [bool; 3]);

impl ComponentMask {
    pub const ALL: Self = Self([true; 3]);
    pub const X: Self = Self([true, false, false]);
    pub const YZ: Self = Self([false, true, true]);

    pub fn components(&self) -> impl Iterator<Item = usize> + '_ {
        (0..3).filter(|&k| self.0[k])
    }
}

/// Geometric predicate selecting constrained nodes.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum NodeSelector {
    /// Nodes with `x[axis] == value` up to `tol`.
    Plane { axis: Axis, value: f64, tol: f64 },
    /// Nodes inside an axis aligned box.
    Box { min: [f64; 3], max: [f64; 3] },
}

impl NodeSelector {
    pub fn plane(axis: Axis, value: f64) -> Self {
        NodeSelector::Plane {
            axis,
            value,
            tol: 1e-9,
        }
    }

    pub fn matches(&self, x: &Vec3) -> bool {
        match *self {
            NodeSelector::Plane { axis, value, tol } => (x[axis.index()] - value).abs() <= tol,
            NodeSelector::Box { min, max } => (0..3).all(|k| x[k] >= min[k] && x[k] <= max[k]),
        }
    }
}

/// Which node population a selector is applied to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NodeScope {
    /// Nodes on the boundary of the band.
    BandBoundary,
    /// Any node of an active cell.
    Band,
    /// Nodes on the boundary of the whole background mesh.
    DomainBoundary,
}

#[derive(Clone, Debug, PartialEq)]
pub struct NodeConstraint {
    pub nodes: Vec<usize>,
    pub components: ComponentMask,
}

/// Cells cut by the discrete surface and the band topology they induce.
#[derive(Clone, Debug)]
pub struct ActiveMesh {
    pub cells: Vec<usize>,
    pub is_active: Vec<bool>,
    pub interior_faces: Vec<BandFace>,
    /// Faces of active cells not shared with another active cell.
    pub boundary_faces: Vec<usize>,
    /// Sorted vertex indices of the band.
    pub nodes: Vec<usize>,
    /// Sorted vertex indices on the band boundary.
    pub boundary_nodes: Vec<usize>,
    pub dirichlet: BTreeMap<String, NodeConstraint>,
}

impl ActiveMesh {
    /// Total volume of the band.
    pub fn volume(&self, mesh: &BackgroundMesh) -> f64 {
        self.cells.iter().map(|&c| mesh.cell_volume(c)).sum()
    }

    /// Selects constrained nodes and stores them under `tag`.
    pub fn select_dirichlet(
        &mut self,
        tag: &str,
        mesh: &BackgroundMesh,
        selector: NodeSelector,
        scope: NodeScope,
        components: ComponentMask,
    ) -> &NodeConstraint {
        let c = dirichlet_nodes(self, mesh, selector, scope, components);
        self.dirichlet.insert(tag.to_owned(), c);
        &self.dirichlet[tag]
    }
}

/// A cell is active iff its nodal values contain both signs.
pub fn classify(mesh: &BackgroundMesh, phi: &DiscreteLevelSet) -> Result<ActiveMesh> {
    if phi.values.len() != mesh.n_vertices() {
        return Err(Error::Contract(format!(
            "level set has {} values for {} vertices",
            phi.values.len(),
            mesh.n_vertices()
        )));
    }
    let is_active: Vec<bool> = mesh
        .cells()
        .map(|nodes| {
            let neg = nodes.iter().any(|&v| phi.values[v] < 0.0);
            let pos = nodes.iter().any(|&v| phi.values[v] > 0.0);
            neg && pos
        })
        .collect();
    let cells: Vec<usize> = (0..mesh.n_cells()).filter(|&c| is_active[c]).collect();
    if cells.is_empty() {
        return Err(Error::SurfaceMissesMesh);
    }

    let mut interior_faces = Vec::new();
    let mut boundary_faces = Vec::new();
    let mut is_node = vec![false; mesh.n_vertices()];
    let mut is_bnode = vec![false; mesh.n_vertices()];
    for &c in &cells {
        for &v in mesh.cell(c) {
            is_node[v] = true;
        }
        for &f in mesh.cell_faces(c) {
            let face = &mesh.faces()[f];
            let other = if face.plus.0 == c {
                face.minus.map(|m| m.0)
            } else {
                Some(face.plus.0)
            };
            match other {
                Some(o) if is_active[o] => {
                    // record each interior face once, from its plus side
                    if face.plus.0 == c {
                        let normal = face_normal(mesh, f, c, o);
                        interior_faces.push(BandFace {
                            face: f,
                            plus: c,
                            minus: o,
                            normal,
                        });
                    }
                }
                _ => {
                    boundary_faces.push(f);
                    for &v in face.vertices() {
                        is_bnode[v] = true;
                    }
                }
            }
        }
    }
    let collect = |mask: &[bool]| (0..mask.len()).filter(|&v| mask[v]).collect::<Vec<_>>();
    Ok(ActiveMesh {
        nodes: collect(&is_node),
        boundary_nodes: collect(&is_bnode),
        cells,
        is_active,
        interior_faces,
        boundary_faces,
        dirichlet: BTreeMap::new(),
    })
}

/// Unit normal of face `f` oriented out of `plus` towards `minus`.
pub(crate) fn face_normal(mesh: &BackgroundMesh, f: usize, plus: usize, minus: usize) -> Vec3 {
    let x = mesh.face_coords(f);
    let n = match x.len() {
        3 => (x[1] - x[0]).cross(&(x[2] - x[0])),
        _ => (x[2] - x[0]).cross(&(x[3] - x[1])),
    }
    .normalize();
    let towards = mesh.cell_centroid(minus) - mesh.cell_centroid(plus);
    if n.dot(&towards) < 0.0 {
        -n
    } else {
        n
    }
}

/// Nodes of `scope` matched by `selector`, with the constrained components.
/// An empty selection is returned as-is and logged as a warning.
pub fn dirichlet_nodes(
    active: &ActiveMesh,
    mesh: &BackgroundMesh,
    selector: NodeSelector,
    scope: NodeScope,
    components: ComponentMask,
) -> NodeConstraint {
    let tol = 1e-9 * mesh.spacing().min();
    let candidates: Box<dyn Iterator<Item = usize>> = match scope {
        NodeScope::BandBoundary => Box::new(active.boundary_nodes.iter().copied()),
        NodeScope::Band => Box::new(active.nodes.iter().copied()),
        NodeScope::DomainBoundary => {
            Box::new((0..mesh.n_vertices()).filter(move |&v| mesh.is_boundary_vertex(v, tol)))
        }
    };
    let nodes: Vec<usize> = candidates
        .filter(|&v| selector.matches(&mesh.vertices()[v]))
        .collect();
    if nodes.is_empty() {
        log::warn!("Dirichlet selector {selector:?} ({scope:?}) matched no nodes");
    }
    NodeConstraint { nodes, components }
}

/// Node selection over the whole mesh, for bulk problems without a band.
pub fn domain_nodes(mesh: &BackgroundMesh, selector: NodeSelector, components: ComponentMask) -> NodeConstraint {
    let nodes: Vec<usize> = (0..mesh.n_vertices())
        .filter(|&v| selector.matches(&mesh.vertices()[v]))
        .collect();
    if nodes.is_empty() {
        log::warn!("Dirichlet selector {selector:?} matched no nodes");
    }
    NodeConstraint { nodes, components }
}
