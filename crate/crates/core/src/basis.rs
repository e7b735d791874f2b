//! Linear tetrahedral and trilinear hexahedral Lagrange bases.

use arrayvec::ArrayVec;

use crate::mesh::CellKind;
use crate::{Error, Mat3, Result, Vec3};

pub const HEX_REFERENCE_NODES: [[f64; 3]; 8] = [
    [-1.0, -1.0, -1.0],
    [1.0, -1.0, -1.0],
    [1.0, 1.0, -1.0],
    [-1.0, 1.0, -1.0],
    [-1.0, -1.0, 1.0],
    [1.0, -1.0, 1.0],
    [1.0, 1.0, 1.0],
    [-1.0, 1.0, 1.0],
];

pub const TET_REFERENCE_NODES: [[f64; 3]; 4] = [
    [0.0, 0.0, 0.0],
    [1.0, 0.0, 0.0],
    [0.0, 1.0, 0.0],
    [0.0, 0.0, 1.0],
];

const NEWTON_TOL: f64 = 1e-12;
const NEWTON_MAX_ITER: usize = 20;

/// Values and physical gradients of every local shape function at one point.
#[derive(Clone, Debug)]
pub struct BasisEval {
    pub values: ArrayVec<f64, 8>,
    pub gradients: ArrayVec<Vec3, 8>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ReferenceBasis {
    pub kind: CellKind,
}

impl ReferenceBasis {
    pub fn new(kind: CellKind) -> Self {
        Self { kind }
    }

    pub fn values(&self, xi: &Vec3) -> ArrayVec<f64, 8> {
        match self.kind {
            CellKind::Tet4 => tet_values(xi),
            CellKind::Hex8 => hex_values(xi),
        }
    }

    pub fn reference_gradients(&self, xi: &Vec3) -> ArrayVec<Vec3, 8> {
        match self.kind {
            CellKind::Tet4 => tet_reference_gradients(),
            CellKind::Hex8 => hex_reference_gradients(xi),
        }
    }

    /// Jacobian `dx/dxi` of the geometric map at `xi` (columns are `dx/dxi_k`).
    pub fn jacobian(&self, coords: &[Vec3], xi: &Vec3) -> Mat3 {
        let dn = self.reference_gradients(xi);
        let mut jac = Mat3::zeros();
        for (x, g) in coords.iter().zip(&dn) {
            jac += x * g.transpose();
        }
        jac
    }

    /// Shape function values and physical gradients at reference point `xi`.
    pub fn eval(&self, coords: &[Vec3], xi: &Vec3) -> Result<BasisEval> {
        let jac = self.jacobian(coords, xi);
        let inv_t = jac
            .try_inverse()
            .filter(|_| jac.determinant().abs() > f64::MIN_POSITIVE)
            .ok_or_else(|| Error::Geometry(format!("singular cell Jacobian at xi = {xi:?}")))?
            .transpose();
        let gradients = self
            .reference_gradients(xi)
            .iter()
            .map(|g| inv_t * g)
            .collect();
        Ok(BasisEval {
            values: self.values(xi),
            gradients,
        })
    }

    pub fn map_to_physical(&self, coords: &[Vec3], xi: &Vec3) -> Vec3 {
        self.values(xi)
            .iter()
            .zip(coords)
            .map(|(n, x)| x * *n)
            .sum()
    }

    /// Reference coordinates of physical point `x`. Closed form on tets,
    /// Newton iteration on the trilinear map for hexes.
    pub fn map_to_reference(&self, coords: &[Vec3], x: &Vec3) -> Result<Vec3> {
        match self.kind {
            CellKind::Tet4 => {
                let jac = self.jacobian(coords, &Vec3::zeros());
                let inv = jac
                    .try_inverse()
                    .ok_or_else(|| Error::Geometry("degenerate tetrahedron".into()))?;
                Ok(inv * (x - coords[0]))
            }
            CellKind::Hex8 => {
                let scale = (coords[6] - coords[0]).norm();
                let mut xi = Vec3::zeros();
                for _ in 0..NEWTON_MAX_ITER {
                    let r = self.map_to_physical(coords, &xi) - x;
                    if r.norm() <= NEWTON_TOL * scale {
                        return Ok(xi);
                    }
                    let jac = self.jacobian(coords, &xi);
                    let step = jac
                        .lu()
                        .solve(&r)
                        .ok_or_else(|| Error::Geometry("singular hex Jacobian in Newton".into()))?;
                    xi -= step;
                }
                let r = self.map_to_physical(coords, &xi) - x;
                if r.norm() <= NEWTON_TOL * scale {
                    Ok(xi)
                } else {
                    Err(Error::Geometry(format!(
                        "hex inverse map did not converge for {x:?} (residual {:.3e})",
                        r.norm()
                    )))
                }
            }
        }
    }

    /// Whether `xi` lies in the reference cell, up to `tol`.
    pub fn contains(&self, xi: &Vec3, tol: f64) -> bool {
        match self.kind {
            CellKind::Tet4 => xi.iter().all(|&c| c >= -tol) && xi.sum() <= 1.0 + tol,
            CellKind::Hex8 => xi.iter().all(|c| c.abs() <= 1.0 + tol),
        }
    }

    /// Reference point of local node `i`.
    pub fn node(&self, i: usize) -> Vec3 {
        match self.kind {
            CellKind::Tet4 => Vec3::from(TET_REFERENCE_NODES[i]),
            CellKind::Hex8 => Vec3::from(HEX_REFERENCE_NODES[i]),
        }
    }

    pub fn centroid(&self) -> Vec3 {
        match self.kind {
            CellKind::Tet4 => Vec3::repeat(0.25),
            CellKind::Hex8 => Vec3::zeros(),
        }
    }

    /// Volume quadrature: one centroid point for tets, 2x2x2 Gauss for hexes.
    /// Weights are in reference measure.
    pub fn volume_rule(&self) -> Vec<(Vec3, f64)> {
        match self.kind {
            CellKind::Tet4 => vec![(Vec3::repeat(0.25), 1.0 / 6.0)],
            CellKind::Hex8 => hex_gauss_3d().to_vec(),
        }
    }
}

fn tet_values(xi: &Vec3) -> ArrayVec<f64, 8> {
    [1.0 - xi.x - xi.y - xi.z, xi.x, xi.y, xi.z]
        .into_iter()
        .collect()
}

fn tet_reference_gradients() -> ArrayVec<Vec3, 8> {
    [
        Vec3::new(-1.0, -1.0, -1.0),
        Vec3::new(1.0, 0.0, 0.0),
        Vec3::new(0.0, 1.0, 0.0),
        Vec3::new(0.0, 0.0, 1.0),
    ]
    .into_iter()
    .collect()
}

fn hex_values(xi: &Vec3) -> ArrayVec<f64, 8> {
    HEX_REFERENCE_NODES
        .iter()
        .map(|n| 0.125 * (1.0 + n[0] * xi.x) * (1.0 + n[1] * xi.y) * (1.0 + n[2] * xi.z))
        .collect()
}

fn hex_reference_gradients(xi: &Vec3) -> ArrayVec<Vec3, 8> {
    HEX_REFERENCE_NODES
        .iter()
        .map(|n| {
            let (a, b, c) = (1.0 + n[0] * xi.x, 1.0 + n[1] * xi.y, 1.0 + n[2] * xi.z);
            0.125 * Vec3::new(n[0] * b * c, n[1] * a * c, n[2] * a * b)
        })
        .collect()
}

pub(crate) fn hex_jacobian(coords: &[Vec3], xi: &Vec3) -> Mat3 {
    ReferenceBasis::new(CellKind::Hex8).jacobian(coords, xi)
}

const GAUSS_2: f64 = 0.577_350_269_189_625_8;

/// 2x2x2 Gauss points on `[-1, 1]^3`, unit weights.
pub fn hex_gauss_3d() -> [(Vec3, f64); 8] {
    let g = GAUSS_2;
    let mut out = [(Vec3::zeros(), 1.0); 8];
    let mut i = 0;
    for z in [-g, g] {
        for y in [-g, g] {
            for x in [-g, g] {
                out[i] = (Vec3::new(x, y, z), 1.0);
                i += 1;
            }
        }
    }
    out
}

/// 2x2 Gauss points on `[-1, 1]^2`, unit weights.
pub fn quad_gauss_2d() -> [([f64; 2], f64); 4] {
    let g = GAUSS_2;
    [([-g, -g], 1.0), ([g, -g], 1.0), ([g, g], 1.0), ([-g, g], 1.0)]
}

/// Bilinear quad shape functions on `[-1, 1]^2` for corners ordered
/// counter-clockwise starting at `(-1, -1)`.
pub fn quad_values(s: f64, t: f64) -> [f64; 4] {
    [
        0.25 * (1.0 - s) * (1.0 - t),
        0.25 * (1.0 + s) * (1.0 - t),
        0.25 * (1.0 + s) * (1.0 + t),
        0.25 * (1.0 - s) * (1.0 + t),
    ]
}

pub fn quad_derivatives(s: f64, t: f64) -> [[f64; 2]; 4] {
    [
        [-0.25 * (1.0 - t), -0.25 * (1.0 - s)],
        [0.25 * (1.0 - t), -0.25 * (1.0 + s)],
        [0.25 * (1.0 + t), 0.25 * (1.0 + s)],
        [-0.25 * (1.0 + t), 0.25 * (1.0 - s)],
    ]
}
