//! Pointwise tangential calculus on a surface with unit normal `n`.
//!
//! Displacement Jacobians follow `J[i][j] = d u_i / d x_j`.

use crate::{Error, Mat3, Result, Vec3};

/// Orthogonal projection `I - n n^T` onto the tangent plane.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Projector(pub Mat3);

impl Projector {
    pub fn new(n: &Vec3) -> Result<Self> {
        if (n.norm() - 1.0).abs() >= 1e-10 {
            return Err(Error::Contract(format!(
                "projector normal must be unit length, |n| = {}",
                n.norm()
            )));
        }
        Ok(Self::from_unit(n))
    }

    /// Skips the unit-length check.
    pub fn from_unit(n: &Vec3) -> Self {
        Projector(Mat3::identity() - n * n.transpose())
    }

    pub fn matrix(&self) -> &Mat3 {
        &self.0
    }
}

pub fn projector(n: &Vec3) -> Result<Projector> {
    Projector::new(n)
}

/// `P g`.
pub fn tangential_gradient(g: &Vec3, p: &Projector) -> Vec3 {
    p.0 * g
}

/// `P sym(J) P`.
pub fn surface_strain(jac: &Mat3, p: &Projector) -> Mat3 {
    let eps = (jac + jac.transpose()) * 0.5;
    p.0 * eps * p.0
}

/// `tr(P J)`.
pub fn surface_divergence(jac: &Mat3, p: &Projector) -> f64 {
    (p.0 * jac).trace()
}

/// `2 mu eps + lambda tr(eps) P`.
pub fn membrane_stress(eps: &Mat3, p: &Projector, mu: f64, lambda: f64) -> Mat3 {
    eps * (2.0 * mu) + p.0 * (lambda * eps.trace())
}

/// Plane-stress Lamé parameters `(mu, lambda)`.
pub fn plane_stress_lame(e: f64, nu: f64) -> (f64, f64) {
    (e / (2.0 * (1.0 + nu)), e * nu / (1.0 - nu * nu))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Rotation3;
    use proptest::prelude::*;

    fn unit(v: [f64; 3]) -> Option<Vec3> {
        let v = Vec3::from(v);
        (v.norm() > 1e-3).then(|| v.normalize())
    }

    #[test]
    fn projector_examples() {
        let p = projector(&Vec3::z()).unwrap();
        assert_eq!(p.0, Mat3::from_diagonal(&Vec3::new(1.0, 1.0, 0.0)));
        let n = Vec3::repeat(1.0).normalize();
        let p = projector(&n).unwrap();
        let expect = Mat3::identity() - Mat3::repeat(1.0 / 3.0);
        assert!((p.0 - expect).abs().max() < 1e-15);
        assert!((p.0 * n).norm() < 1e-15);
        assert!(matches!(projector(&Vec3::new(0.0, 0.0, 2.0)), Err(Error::Contract(_))));
    }

    #[test]
    fn tangential_gradient_examples() {
        let p = projector(&Vec3::z()).unwrap();
        assert_eq!(tangential_gradient(&Vec3::x(), &p), Vec3::x());
        assert_eq!(tangential_gradient(&Vec3::new(0.0, 0.0, 5.0), &p), Vec3::zeros());
        assert_eq!(tangential_gradient(&Vec3::new(1.0, 0.0, 1.0), &p), Vec3::x());
    }

    #[test]
    fn surface_strain_examples() {
        let p = projector(&Vec3::z()).unwrap();
        let e1 = Mat3::new(1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
        assert_eq!(surface_strain(&e1, &p), e1);
        let skew = Mat3::new(0.0, -1.0, 2.0, 1.0, 0.0, -3.0, -2.0, 3.0, 0.0);
        assert_eq!(surface_strain(&skew, &p), Mat3::zeros());
        // u = (z, 0, 0)
        let jz = Mat3::new(0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
        assert_eq!(surface_strain(&jz, &p), Mat3::zeros());
    }

    #[test]
    fn surface_divergence_examples() {
        let pz = projector(&Vec3::z()).unwrap();
        let jxy = Mat3::from_diagonal(&Vec3::new(1.0, 1.0, 0.0));
        assert_eq!(surface_divergence(&jxy, &pz), 2.0);
        let jzzz = Mat3::new(0.0, 0.0, 1.0, 0.0, 0.0, 1.0, 0.0, 0.0, 1.0);
        assert_eq!(surface_divergence(&jzzz, &pz), 0.0);
        let px = projector(&Vec3::x()).unwrap();
        let jx = Mat3::from_diagonal(&Vec3::new(1.0, 0.0, 0.0));
        assert_eq!(surface_divergence(&jx, &px), 0.0);
    }

    #[test]
    fn membrane_stress_examples() {
        let p = projector(&Vec3::z()).unwrap();
        let eps = Mat3::from_diagonal(&Vec3::new(1.0, 0.0, 0.0));
        assert_eq!(
            membrane_stress(&eps, &p, 1.0, 1.0),
            Mat3::from_diagonal(&Vec3::new(3.0, 1.0, 0.0))
        );
        assert_eq!(membrane_stress(&Mat3::zeros(), &p, 1.0, 1.0), Mat3::zeros());
        let (mu, lambda) = plane_stress_lame(100.0, 0.5);
        assert!((mu - 100.0 / 3.0).abs() < 1e-12);
        assert!((lambda - 200.0 / 3.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn projector_invariants(n in prop::array::uniform3(-1.0..1.0f64)) {
            let Some(n) = unit(n) else { return Ok(()) };
            let p = Projector::new(&n).unwrap();
            prop_assert!((p.0 * p.0 - p.0).abs().max() < 1e-14);
            prop_assert_eq!(p.0, p.0.transpose());
            prop_assert!((p.0.trace() - 2.0).abs() < 1e-14);
            prop_assert!((p.0 * n).norm() < 1e-15);
        }

        #[test]
        fn strain_is_tangential(
            n in prop::array::uniform3(-1.0..1.0f64),
            j in prop::array::uniform9(-2.0..2.0f64),
        ) {
            let Some(n) = unit(n) else { return Ok(()) };
            let p = Projector::new(&n).unwrap();
            let jac = Mat3::from_row_slice(&j);
            let e = surface_strain(&jac, &p);
            prop_assert!((p.0 * e * p.0 - e).abs().max() < 1e-13);
            prop_assert!((e * n).norm() < 1e-13);
            // tr(eps_G) equals the surface divergence
            prop_assert!((e.trace() - surface_divergence(&jac, &p)).abs() < 1e-13);
        }

        #[test]
        fn strain_is_frame_indifferent(
            n in prop::array::uniform3(-1.0..1.0f64),
            j in prop::array::uniform9(-2.0..2.0f64),
            axis in prop::array::uniform3(-1.0..1.0f64),
            angle in -3.0..3.0f64,
        ) {
            let (Some(n), Some(axis)) = (unit(n), unit(axis)) else { return Ok(()) };
            let r = Rotation3::from_axis_angle(&nalgebra::Unit::new_normalize(axis), angle);
            let r = *r.matrix();
            let jac = Mat3::from_row_slice(&j);
            let e = surface_strain(&jac, &Projector::from_unit(&n));
            let er = surface_strain(&(r * jac * r.transpose()), &Projector::from_unit(&(r * n)));
            prop_assert!((er - r * e * r.transpose()).abs().max() < 1e-12);
        }

        #[test]
        fn stress_is_linear(
            a in prop::array::uniform9(-2.0..2.0f64),
            b in prop::array::uniform9(-2.0..2.0f64),
            s in -3.0..3.0f64,
        ) {
            let p = Projector::from_unit(&Vec3::new(0.6, 0.0, 0.8));
            let ea = surface_strain(&Mat3::from_row_slice(&a), &p);
            let eb = surface_strain(&Mat3::from_row_slice(&b), &p);
            let lhs = membrane_stress(&(ea + eb * s), &p, 1.3, 0.7);
            let rhs = membrane_stress(&ea, &p, 1.3, 0.7) + membrane_stress(&eb, &p, 1.3, 0.7) * s;
            prop_assert!((lhs - rhs).abs().max() < 1e-12);
        }
    }
}
