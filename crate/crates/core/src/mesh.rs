//! Structured background meshes of linear tetrahedra or trilinear hexahedra.
//!
//! Hexahedra use the VTK vertex ordering: the bottom quad `0..4` counter
//! clockwise seen from `+z`, followed by the top quad `4..8`. Reference
//! coordinates live in `[-1, 1]^3`. Tetrahedra use barycentric reference
//! coordinates with vertex 0 at the origin.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{basis, Error, Result, Vec3};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CellKind {
    Tet4,
    Hex8,
}

const TET_FACES: [&[usize]; 4] = [&[1, 2, 3], &[0, 3, 2], &[0, 1, 3], &[0, 2, 1]];
const TET_EDGES: [[usize; 2]; 6] = [[0, 1], [1, 2], [2, 0], [0, 3], [1, 3], [2, 3]];

const HEX_FACES: [&[usize]; 6] = [
    &[0, 3, 2, 1],
    &[4, 5, 6, 7],
    &[0, 1, 5, 4],
    &[2, 3, 7, 6],
    &[0, 4, 7, 3],
    &[1, 2, 6, 5],
];
const HEX_EDGES: [[usize; 2]; 12] = [
    [0, 1],
    [1, 2],
    [2, 3],
    [3, 0],
    [4, 5],
    [5, 6],
    [6, 7],
    [7, 4],
    [0, 4],
    [1, 5],
    [2, 6],
    [3, 7],
];

impl CellKind {
    pub fn nodes_per_cell(self) -> usize {
        match self {
            CellKind::Tet4 => 4,
            CellKind::Hex8 => 8,
        }
    }

    /// Local vertex lists of each face, ordered so the right-hand normal
    /// points out of the cell.
    pub fn faces(self) -> &'static [&'static [usize]] {
        match self {
            CellKind::Tet4 => &TET_FACES,
            CellKind::Hex8 => &HEX_FACES,
        }
    }

    pub fn edges(self) -> &'static [[usize; 2]] {
        match self {
            CellKind::Tet4 => &TET_EDGES,
            CellKind::Hex8 => &HEX_EDGES,
        }
    }

    pub fn vtk_cell_type(self) -> u8 {
        match self {
            CellKind::Tet4 => 10,
            CellKind::Hex8 => 12,
        }
    }
}

impl fmt::Display for CellKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CellKind::Tet4 => f.write_str("tet4"),
            CellKind::Hex8 => f.write_str("hex8"),
        }
    }
}

/// Axis-aligned box.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl Aabb {
    pub fn new(min: [f64; 3], max: [f64; 3]) -> Self {
        Self { min, max }
    }

    pub fn extent(&self) -> Vec3 {
        Vec3::new(
            self.max[0] - self.min[0],
            self.max[1] - self.min[1],
            self.max[2] - self.min[2],
        )
    }

    pub fn volume(&self) -> f64 {
        let e = self.extent();
        e.x * e.y * e.z
    }

    pub fn contains(&self, x: &Vec3, tol: f64) -> bool {
        (0..3).all(|k| x[k] >= self.min[k] - tol && x[k] <= self.max[k] + tol)
    }
}

/// Sorted vertex indices of a face; triangles pad the last slot with `usize::MAX`.
pub type FaceKey = [usize; 4];

/// A mesh face with its one or two neighbouring cells.
#[derive(Clone, Debug, PartialEq)]
pub struct Face {
    pub key: FaceKey,
    /// First cell seen with this face, together with the local face index.
    pub plus: (usize, usize),
    /// Second cell, or `None` on the domain boundary.
    pub minus: Option<(usize, usize)>,
}

impl Face {
    pub fn is_boundary(&self) -> bool {
        self.minus.is_none()
    }

    pub fn vertices(&self) -> &[usize] {
        if self.key[3] == usize::MAX {
            &self.key[..3]
        } else {
            &self.key[..]
        }
    }
}

#[derive(Clone, Debug)]
pub struct BackgroundMesh {
    kind: CellKind,
    vertices: Vec<Vec3>,
    cells: Vec<usize>,
    faces: Vec<Face>,
    cell_faces: Vec<usize>,
    bounds: Aabb,
    spacing: Vec3,
}

impl BackgroundMesh {
    /// Builds a mesh from raw connectivity. Cells must be positively oriented.
    pub fn from_cells(
        kind: CellKind,
        vertices: Vec<Vec3>,
        cells: Vec<usize>,
        bounds: Aabb,
        spacing: Vec3,
    ) -> Result<Self> {
        let npc = kind.nodes_per_cell();
        if cells.len() % npc != 0 {
            return Err(Error::InvalidArgument(format!(
                "connectivity length {} is not a multiple of {npc}",
                cells.len()
            )));
        }
        if let Some(&bad) = cells.iter().find(|&&v| v >= vertices.len()) {
            return Err(Error::InvalidArgument(format!(
                "vertex index {bad} out of range ({} vertices)",
                vertices.len()
            )));
        }
        let (faces, cell_faces) = build_faces(kind, &cells)?;
        Ok(Self {
            kind,
            vertices,
            cells,
            faces,
            cell_faces,
            bounds,
            spacing,
        })
    }

    pub fn kind(&self) -> CellKind {
        self.kind
    }

    pub fn vertices(&self) -> &[Vec3] {
        &self.vertices
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_cells(&self) -> usize {
        self.cells.len() / self.kind.nodes_per_cell()
    }

    pub fn cell(&self, c: usize) -> &[usize] {
        let npc = self.kind.nodes_per_cell();
        &self.cells[c * npc..(c + 1) * npc]
    }

    pub fn cells(&self) -> impl Iterator<Item = &[usize]> + '_ {
        self.cells.chunks_exact(self.kind.nodes_per_cell())
    }

    /// Vertex coordinates of cell `c`, in local order.
    pub fn cell_coords(&self, c: usize) -> arrayvec::ArrayVec<Vec3, 8> {
        self.cell(c).iter().map(|&v| self.vertices[v]).collect()
    }

    pub fn faces(&self) -> &[Face] {
        &self.faces
    }

    /// Global face indices of cell `c`, in local face order.
    pub fn cell_faces(&self, c: usize) -> &[usize] {
        let nf = self.kind.faces().len();
        &self.cell_faces[c * nf..(c + 1) * nf]
    }

    pub fn find_face(&self, key: &FaceKey) -> Option<usize> {
        self.faces.binary_search_by(|f| f.key.cmp(key)).ok()
    }

    pub fn bounds(&self) -> &Aabb {
        &self.bounds
    }

    /// Nominal cell size along each axis of the generating grid.
    pub fn spacing(&self) -> Vec3 {
        self.spacing
    }

    /// Vertex indices of face `f`, ordered so the right-hand normal points
    /// out of its plus cell.
    pub fn face_vertices(&self, f: usize) -> arrayvec::ArrayVec<usize, 4> {
        let (cell, local) = self.faces[f].plus;
        let nodes = self.cell(cell);
        self.kind.faces()[local].iter().map(|&l| nodes[l]).collect()
    }

    pub fn face_coords(&self, f: usize) -> arrayvec::ArrayVec<Vec3, 4> {
        self.face_vertices(f)
            .iter()
            .map(|&v| self.vertices[v])
            .collect()
    }

    pub fn cell_volume(&self, c: usize) -> f64 {
        let x = self.cell_coords(c);
        match self.kind {
            CellKind::Tet4 => tet_signed_volume(&x[0], &x[1], &x[2], &x[3]),
            CellKind::Hex8 => basis::hex_gauss_3d()
                .iter()
                .map(|(xi, w)| w * basis::hex_jacobian(&x, xi).determinant())
                .sum(),
        }
    }

    pub fn cell_centroid(&self, c: usize) -> Vec3 {
        let x = self.cell_coords(c);
        x.iter().sum::<Vec3>() / x.len() as f64
    }

    /// True when every tet has positive volume, or every hex has a positive
    /// Jacobian determinant at all eight corners.
    pub fn cell_is_positive(&self, c: usize) -> bool {
        cell_is_positive(self.kind, &self.cell_coords(c))
    }

    pub fn is_boundary_vertex(&self, v: usize, tol: f64) -> bool {
        let x = &self.vertices[v];
        (0..3).any(|k| {
            (x[k] - self.bounds.min[k]).abs() <= tol || (x[k] - self.bounds.max[k]).abs() <= tol
        })
    }
}

/// `h = 1 / NNO^(1/3)` with `NNO` the number of mesh vertices.
pub fn mesh_size(mesh: &BackgroundMesh) -> f64 {
    mesh_size_from_count(mesh.n_vertices())
}

pub fn mesh_size_from_count(nno: usize) -> f64 {
    1.0 / (nno as f64).cbrt()
}

pub fn tet_signed_volume(a: &Vec3, b: &Vec3, c: &Vec3, d: &Vec3) -> f64 {
    (b - a).cross(&(c - a)).dot(&(d - a)) / 6.0
}

fn cell_is_positive(kind: CellKind, x: &[Vec3]) -> bool {
    match kind {
        CellKind::Tet4 => tet_signed_volume(&x[0], &x[1], &x[2], &x[3]) > 0.0,
        CellKind::Hex8 => basis::HEX_REFERENCE_NODES
            .iter()
            .all(|xi| basis::hex_jacobian(x, &Vec3::from(*xi)).determinant() > 0.0),
    }
}

fn face_key(nodes: &[usize], local: &[usize]) -> FaceKey {
    let mut key = [usize::MAX; 4];
    for (slot, &l) in key.iter_mut().zip(local) {
        *slot = nodes[l];
    }
    key.sort_unstable();
    key
}

fn build_faces(kind: CellKind, cells: &[usize]) -> Result<(Vec<Face>, Vec<usize>)> {
    let npc = kind.nodes_per_cell();
    let local_faces = kind.faces();
    let nf = local_faces.len();
    let ncells = cells.len() / npc;

    let mut entries: Vec<(FaceKey, usize, usize)> = Vec::with_capacity(ncells * nf);
    for (c, nodes) in cells.chunks_exact(npc).enumerate() {
        for (l, lf) in local_faces.iter().enumerate() {
            entries.push((face_key(nodes, lf), c, l));
        }
    }
    entries.sort_unstable();

    let mut faces = Vec::with_capacity(entries.len() / 2 + 1);
    let mut cell_faces = vec![usize::MAX; ncells * nf];
    let mut i = 0;
    while i < entries.len() {
        let (key, c0, l0) = entries[i];
        let mut j = i + 1;
        while j < entries.len() && entries[j].0 == key {
            j += 1;
        }
        let minus = match j - i {
            1 => None,
            2 => Some((entries[i + 1].1, entries[i + 1].2)),
            n => {
                return Err(Error::Geometry(format!(
                    "face {key:?} shared by {n} cells"
                )))
            }
        };
        let id = faces.len();
        for e in &entries[i..j] {
            cell_faces[e.1 * nf + e.2] = id;
        }
        faces.push(Face {
            key,
            plus: (c0, l0),
            minus,
        });
        i = j;
    }
    Ok((faces, cell_faces))
}

/// Local vertex paths of the six tetrahedra in the Kuhn subdivision of a cube.
/// Every tet contains the main diagonal 0-6, so neighbouring cubes agree on
/// their shared face diagonals.
const KUHN_TETS: [[usize; 4]; 6] = [
    [0, 1, 2, 6],
    [0, 1, 5, 6],
    [0, 3, 2, 6],
    [0, 3, 7, 6],
    [0, 4, 5, 6],
    [0, 4, 7, 6],
];

/// Uniform grid of `nx * ny * nz` hexahedra, each optionally split into six
/// tetrahedra.
pub fn build_structured(
    bounds: Aabb,
    divisions: [usize; 3],
    kind: CellKind,
) -> Result<BackgroundMesh> {
    let [nx, ny, nz] = divisions;
    if nx == 0 || ny == 0 || nz == 0 {
        return Err(Error::InvalidArgument(format!(
            "subdivision counts must be positive, got {divisions:?}"
        )));
    }
    let ext = bounds.extent();
    if !(ext.x > 0.0 && ext.y > 0.0 && ext.z > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "degenerate box {bounds:?}"
        )));
    }
    let spacing = Vec3::new(ext.x / nx as f64, ext.y / ny as f64, ext.z / nz as f64);

    let coord = |k: usize, i: usize, n: usize| -> f64 {
        // Hit the upper bound exactly so boundary predicates are exact.
        if i == n {
            bounds.max[k]
        } else {
            bounds.min[k] + ext[k] * (i as f64 / n as f64)
        }
    };
    let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1) * (nz + 1));
    for k in 0..=nz {
        for j in 0..=ny {
            for i in 0..=nx {
                vertices.push(Vec3::new(coord(0, i, nx), coord(1, j, ny), coord(2, k, nz)));
            }
        }
    }
    let vid = |i: usize, j: usize, k: usize| i + (nx + 1) * (j + (ny + 1) * k);

    let ncubes = nx * ny * nz;
    let mut cells = Vec::with_capacity(ncubes * if kind == CellKind::Tet4 { 24 } else { 8 });
    for k in 0..nz {
        for j in 0..ny {
            for i in 0..nx {
                let hex = [
                    vid(i, j, k),
                    vid(i + 1, j, k),
                    vid(i + 1, j + 1, k),
                    vid(i, j + 1, k),
                    vid(i, j, k + 1),
                    vid(i + 1, j, k + 1),
                    vid(i + 1, j + 1, k + 1),
                    vid(i, j + 1, k + 1),
                ];
                match kind {
                    CellKind::Hex8 => cells.extend_from_slice(&hex),
                    CellKind::Tet4 => {
                        for path in &KUHN_TETS {
                            let mut t = path.map(|l| hex[l]);
                            let vol = tet_signed_volume(
                                &vertices[t[0]],
                                &vertices[t[1]],
                                &vertices[t[2]],
                                &vertices[t[3]],
                            );
                            if vol < 0.0 {
                                t.swap(1, 2);
                            }
                            cells.extend_from_slice(&t);
                        }
                    }
                }
            }
        }
    }
    BackgroundMesh::from_cells(kind, vertices, cells, bounds, spacing)
}

const JITTER_RETRIES: usize = 64;

/// Moves interior vertices by a seeded random offset of at most
/// `magnitude * spacing` per axis. Boundary vertices stay put; a vertex whose
/// move inverts an incident cell is re-sampled.
pub fn jitter_interior(mesh: &BackgroundMesh, magnitude: f64, seed: u64) -> Result<BackgroundMesh> {
    if !(0.0..0.5).contains(&magnitude) {
        return Err(Error::InvalidArgument(format!(
            "jitter magnitude {magnitude} outside [0, 0.5)"
        )));
    }
    let mut out = mesh.clone();
    if magnitude == 0.0 {
        return Ok(out);
    }

    let mut incident: Vec<Vec<usize>> = vec![Vec::new(); mesh.n_vertices()];
    for (c, nodes) in mesh.cells().enumerate() {
        for &v in nodes {
            incident[v].push(c);
        }
    }

    let tol = 1e-12 * mesh.spacing().min();
    let amp = mesh.spacing() * magnitude;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for v in 0..mesh.n_vertices() {
        if mesh.is_boundary_vertex(v, tol) {
            continue;
        }
        let origin = mesh.vertices[v];
        let mut placed = false;
        for _ in 0..JITTER_RETRIES {
            let delta = Vec3::new(
                rng.gen_range(-1.0..=1.0) * amp.x,
                rng.gen_range(-1.0..=1.0) * amp.y,
                rng.gen_range(-1.0..=1.0) * amp.z,
            );
            out.vertices[v] = origin + delta;
            if incident[v].iter().all(|&c| out.cell_is_positive(c)) {
                placed = true;
                break;
            }
        }
        if !placed {
            return Err(Error::Geometry(format!(
                "vertex {v}: no positively oriented placement after {JITTER_RETRIES} draws"
            )));
        }
    }
    Ok(out)
}
