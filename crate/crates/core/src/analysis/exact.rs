//! Closed-form and manufactured reference solutions.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::assembly::MembraneMaterial;
use crate::level_set::LevelSet;
use crate::tangential::{membrane_stress, surface_strain, Projector};
use crate::{Error, Mat3, Result, Vec3};

/// Tube of radius `r` and length `L` along the x axis, fixed axially at
/// `x = 0`, fixed radially at `x = L`, under the axial load
/// `f_x = F x / (2 pi r L^2)` per unit area.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CylinderPull {
    pub radius: f64,
    pub length: f64,
    pub force: f64,
    pub thickness: f64,
}

impl Default for CylinderPull {
    fn default() -> Self {
        Self {
            radius: 1.0,
            length: 4.0,
            force: 1.0,
            thickness: 0.01,
        }
    }
}

impl CylinderPull {
    pub fn axial_stress(&self, x: f64) -> f64 {
        exact_cylinder_stress(x, self.force, self.radius, self.thickness, self.length)
    }

    pub fn load(&self, x: f64) -> Vec3 {
        cylinder_load(x, self.force, self.radius, self.length)
    }

    /// Uniaxial tensor `sigma(x) a a^T`, with `a` the x axis projected onto the
    /// plane with normal `n`.
    pub fn stress_tensor(&self, x: &Vec3, n: &Vec3) -> Mat3 {
        let a = Projector::from_unit(n).matrix() * Vec3::x();
        let aa = a.norm_squared();
        if aa == 0.0 {
            return Mat3::zeros();
        }
        a * a.transpose() * (self.axial_stress(x.x) / aa)
    }
}

/// `F (1 - (x/L)^2) / (4 pi r t)`.
pub fn exact_cylinder_stress(x: f64, force: f64, r: f64, t: f64, l: f64) -> f64 {
    force * (1.0 - (x / l).powi(2)) / (4.0 * PI * r * t)
}

/// Axial load `F x / (2 pi r L^2)` per unit area.
pub fn cylinder_load(x: f64, force: f64, r: f64, l: f64) -> Vec3 {
    Vec3::new(force * x / (2.0 * PI * r * l * l), 0.0, 0.0)
}

/// Manufactured solution `u = (x, 0, 0)` on the oblate spheroid
/// `x^2 + y^2 + (2z)^2 = 1`.
#[derive(Clone, Copy, Debug)]
pub struct OblateManufactured {
    pub material: MembraneMaterial,
    /// Central difference step of the surface divergence.
    pub step: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ManufacturedSample {
    pub displacement: Vec3,
    pub stress: Mat3,
    pub load: Vec3,
}

impl OblateManufactured {
    pub fn new(material: MembraneMaterial) -> Self {
        Self {
            material,
            step: 1e-5,
        }
    }

    pub fn displacement(x: &Vec3) -> Vec3 {
        Vec3::new(x.x, 0.0, 0.0)
    }

    /// Surface stress of `u` with the normal of the level set through `x`.
    /// Defined off the surface too, which the difference quotients rely on.
    pub fn stress(&self, x: &Vec3) -> Mat3 {
        let p = Projector::from_unit(&LevelSet::Oblate.normal(x));
        let grad_u = Mat3::new(1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
        let eps = surface_strain(&grad_u, &p);
        membrane_stress(&eps, &p, self.material.mu(), self.material.lambda())
    }

    /// `f = -t div_G sigma` from central differences along two tangents.
    pub fn load(&self, x: &Vec3) -> Vec3 {
        let n = LevelSet::Oblate.normal(x);
        let (t1, t2) = tangent_basis(&n);
        let h = self.step;
        let mut div = Vec3::zeros();
        for t in [t1, t2] {
            let ds = (self.stress(&(x + t * h)) - self.stress(&(x - t * h))) / (2.0 * h);
            div += ds * t;
        }
        -div * self.material.t
    }

    /// Exact displacement, stress and load at a point on the surface.
    pub fn sample(&self, x: &Vec3) -> Result<ManufacturedSample> {
        oblate_manufactured(self, x)
    }
}

pub fn oblate_manufactured(m: &OblateManufactured, x: &Vec3) -> Result<ManufacturedSample> {
    let rho = LevelSet::Oblate.eval(x);
    if rho.abs() > 1e-6 {
        return Err(Error::Contract(format!(
            "point {x:?} is off the oblate surface (rho = {rho:e})"
        )));
    }
    Ok(ManufacturedSample {
        displacement: OblateManufactured::displacement(x),
        stress: m.stress(x),
        load: m.load(x),
    })
}

/// Orthonormal pair spanning the plane orthogonal to the unit vector `n`.
pub fn tangent_basis(n: &Vec3) -> (Vec3, Vec3) {
    let seed = if n.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() };
    let t1 = (seed - n * n.dot(&seed)).normalize();
    (t1, n.cross(&t1))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cylinder_formulas() {
        let c = CylinderPull::default();
        assert_eq!(c.axial_stress(4.0), 0.0);
        assert!((c.axial_stress(0.0) - 1.0 / (4.0 * PI * 0.01)).abs() < 1e-12);
        assert!((c.axial_stress(0.0) - 7.9577).abs() < 1e-4);
        assert!((c.axial_stress(2.0) - 0.75 * c.axial_stress(0.0)).abs() < 1e-12);
        assert_eq!(c.load(0.0), Vec3::zeros());
        assert!((c.load(4.0).x - 1.0 / (8.0 * PI)).abs() < 1e-15);
    }

    #[test]
    fn cylinder_equilibrium() {
        // t d(sigma)/dx + f = 0
        let c = CylinderPull::default();
        for x in [0.3, 1.7, 3.2] {
            let d = (c.axial_stress(x + 1e-6) - c.axial_stress(x - 1e-6)) / 2e-6;
            assert!((c.thickness * d + c.load(x).x).abs() < 1e-8);
        }
        let s = c.stress_tensor(&Vec3::new(1.0, 0.0, 1.0), &Vec3::z());
        assert!((s[(0, 0)] - c.axial_stress(1.0)).abs() < 1e-14);
        assert_eq!(s[(1, 1)], 0.0);
    }

    #[test]
    fn oblate_points() {
        let m = OblateManufactured::new(MembraneMaterial::new(1.0, 0.5, 1.0).unwrap());
        let s = m.sample(&Vec3::new(1.0, 0.0, 0.0)).unwrap();
        assert!(s.stress.abs().max() < 1e-15);
        let s = m.sample(&Vec3::new(0.0, 1.0, 0.0)).unwrap();
        let expect = Mat3::from_diagonal(&Vec3::new(4.0 / 3.0, 0.0, 2.0 / 3.0));
        assert!((s.stress - expect).abs().max() < 1e-14);
        assert!(m.sample(&Vec3::new(0.0, 0.0, 0.6)).is_err());
    }

    /// Reference loads from symbolic differentiation of the same stress field.
    #[test]
    fn oblate_load_matches_symbolic_values() {
        let m = OblateManufactured::new(MembraneMaterial::new(1.0, 0.5, 1.0).unwrap());
        let cases = [
            (Vec3::new(0.0, 0.0, 0.5), Vec3::new(0.0, 0.0, 1.0)),
            (Vec3::new(0.0, 1.0, 0.0), Vec3::new(0.0, 4.0, 0.0)),
            (Vec3::new(0.6, 0.0, 0.4), Vec3::new(1.2272985499348358, 0.0, 0.90587300812046774)),
            (
                Vec3::new(0.5, 0.5, 2f64.sqrt() / 4.0),
                Vec3::new(1.232, 0.48533333333333333, 1.0333187095739414),
            ),
        ];
        for (x, f) in cases {
            let got = m.sample(&x).unwrap().load;
            assert!((got - f).norm() < 1e-7, "{x:?}: {got:?} vs {f:?}");
        }
    }

    #[test]
    fn tangent_basis_is_orthonormal() {
        for n in [Vec3::x(), Vec3::new(0.3, -0.4, 0.5).normalize()] {
            let (a, b) = tangent_basis(&n);
            assert!(a.dot(&n).abs() < 1e-15 && b.dot(&n).abs() < 1e-15 && a.dot(&b).abs() < 1e-15);
            assert!((a.norm() - 1.0).abs() < 1e-15 && (b.norm() - 1.0).abs() < 1e-15);
        }
    }
}
