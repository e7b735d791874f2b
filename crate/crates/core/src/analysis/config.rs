//! Benchmark configuration files.
//!
//! Every benchmark has a typed configuration with defaults. A TOML file only
//! needs the keys it changes; its tables are merged over the defaults.

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::analysis::exact::CylinderPull;
use crate::assembly::{BulkMaterial, MembraneMaterial, StabilizationParams};
use crate::level_set::{Axis, LevelSet};
use crate::mesh::{Aabb, CellKind};
use crate::solver::SolverOptions;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Free membrane on the band, stabilised by face jumps.
    Membrane,
    /// Membranes adding stiffness to a 3D solid.
    Coupled,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeshConfig {
    pub kind: CellKind,
    /// Multipliers of the base divisions, strictly increasing.
    pub refinements: Vec<usize>,
    /// Interior vertex perturbation as a fraction of the spacing.
    pub jitter: f64,
    pub seed: u64,
}

impl MeshConfig {
    fn validate(&self) -> Result<()> {
        if self.refinements.is_empty() || self.refinements.contains(&0) {
            return Err(Error::Config("mesh.refinements must be a nonempty list of positive integers".into()));
        }
        if self.refinements.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("mesh.refinements must be strictly increasing".into()));
        }
        if !(0.0..0.5).contains(&self.jitter) {
            return Err(Error::Config("mesh.jitter must lie in [0, 0.5)".into()));
        }
        Ok(())
    }
}

fn require_mode(mode: Mode, expected: Mode, what: &str) -> Result<()> {
    if mode != expected {
        return Err(Error::Config(format!("{what} runs in {expected:?} mode, config asks for {mode:?}")));
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CylinderConfig {
    pub mode: Mode,
    pub mesh: MeshConfig,
    /// Divisions of the background box at refinement 1.
    pub base_divisions: [usize; 3],
    /// Half-width of the box cross-section in units of the radius.
    pub margin: f64,
    pub levelset: LevelSet,
    pub length: f64,
    pub force: f64,
    pub material: MembraneMaterial,
    pub stabilization: StabilizationParams,
    pub solver: SolverOptions,
}

impl Default for CylinderConfig {
    fn default() -> Self {
        Self {
            mode: Mode::Membrane,
            mesh: MeshConfig {
                kind: CellKind::Tet4,
                refinements: vec![1, 2, 4, 8],
                jitter: 0.0,
                seed: 42,
            },
            base_divisions: [10, 6, 6],
            margin: 1.2,
            levelset: LevelSet::Cylinder {
                center: [0.0, 0.0],
                radius: 1.0,
                axis: Axis::X,
            },
            length: 4.0,
            force: 1.0,
            material: MembraneMaterial {
                e: 100.0,
                nu: 0.5,
                t: 0.01,
            },
            stabilization: StabilizationParams { tau0: 1.0 },
            solver: SolverOptions::default(),
        }
    }
}

impl CylinderConfig {
    pub fn validate(&self) -> Result<()> {
        require_mode(self.mode, Mode::Membrane, "the cylinder benchmark")?;
        self.mesh.validate()?;
        self.material.validate()?;
        self.cross_section()?;
        if !(self.length > 0.0 && self.margin > 1.0) {
            return Err(Error::Config("need length > 0 and margin > 1".into()));
        }
        Ok(())
    }

    /// Center and radius of the x-aligned cylinder.
    pub fn cross_section(&self) -> Result<([f64; 2], f64)> {
        match self.levelset {
            LevelSet::Cylinder {
                center,
                radius,
                axis: Axis::X,
            } if radius > 0.0 => Ok((center, radius)),
            _ => Err(Error::Config("levelset must be a cylinder with axis = \"x\"".into())),
        }
    }

    pub fn pull(&self) -> CylinderPull {
        let (_, radius) = self.cross_section().unwrap_or(([0.0; 2], 1.0));
        CylinderPull {
            radius,
            length: self.length,
            force: self.force,
            thickness: self.material.t,
        }
    }

    pub fn bounds(&self) -> Aabb {
        let ([cy, cz], r) = self.cross_section().unwrap_or(([0.0; 2], 1.0));
        let w = self.margin * r;
        Aabb::new([0.0, cy - w, cz - w], [self.length, cy + w, cz + w])
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OblateConfig {
    pub mode: Mode,
    pub mesh: MeshConfig,
    pub base_divisions: [usize; 3],
    #[serde(rename = "box")]
    pub bounds: Aabb,
    pub material: MembraneMaterial,
    pub stabilization: StabilizationParams,
    pub solver: SolverOptions,
    /// Central difference step of the load.
    pub fd_step: f64,
}

impl Default for OblateConfig {
    fn default() -> Self {
        Self {
            mode: Mode::Membrane,
            mesh: MeshConfig {
                kind: CellKind::Tet4,
                refinements: vec![2, 4, 8],
                jitter: 0.0,
                seed: 42,
            },
            base_divisions: [10, 10, 6],
            bounds: Aabb::new([-1.25, -1.25, -0.75], [1.25, 1.25, 0.75]),
            material: MembraneMaterial {
                e: 1.0,
                nu: 0.5,
                t: 1.0,
            },
            stabilization: StabilizationParams { tau0: 1.0 },
            solver: SolverOptions::default(),
            fd_step: 1e-5,
        }
    }
}

impl OblateConfig {
    pub fn validate(&self) -> Result<()> {
        require_mode(self.mode, Mode::Membrane, "the oblate benchmark")?;
        self.mesh.validate()?;
        self.material.validate()?;
        if !(self.bounds.min[0] < 0.0 && self.bounds.max[0] > 0.0) {
            return Err(Error::Config("the box must straddle the x = 0 plane".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BeamConfig {
    pub mode: Mode,
    pub kind: CellKind,
    pub divisions: [usize; 3],
    #[serde(rename = "box")]
    pub bounds: Aabb,
    pub bulk: BulkMaterial,
    pub material: MembraneMaterial,
    pub stabilization: StabilizationParams,
    pub solver: SolverOptions,
    /// Traction magnitude on the loaded face.
    pub traction: f64,
    /// Embedded surfaces. Empty means the benchmark default.
    pub membranes: Vec<LevelSet>,
}

impl BeamConfig {
    fn base() -> Self {
        Self {
            mode: Mode::Coupled,
            kind: CellKind::Hex8,
            divisions: [16, 8, 8],
            bounds: Aabb::new([0.0; 3], [2.0, 1.0, 1.0]),
            bulk: BulkMaterial { e: 100.0, nu: 0.499 },
            material: MembraneMaterial {
                e: 1000.0,
                nu: 0.5,
                t: 0.01,
            },
            stabilization: StabilizationParams { tau0: 0.0 },
            solver: SolverOptions::default(),
            traction: 1.0,
            membranes: Vec::new(),
        }
    }

    /// Eight planes `z = const` through the middle of the cell layers.
    pub fn stiffened() -> Self {
        let mut c = Self::base();
        let (z0, z1) = (c.bounds.min[2], c.bounds.max[2]);
        c.membranes = (0..8)
            .map(|i| LevelSet::Plane {
                normal: [0.0, 0.0, 1.0],
                offset: z0 + (z1 - z0) * (2 * i + 1) as f64 / 16.0,
            })
            .collect();
        c
    }

    /// One tube of radius 0.3 along the beam axis.
    pub fn bending() -> Self {
        let mut c = Self::base();
        c.membranes = vec![LevelSet::Cylinder {
            center: [0.5, 0.5],
            radius: 0.3,
            axis: Axis::X,
        }];
        c
    }

    pub fn validate(&self) -> Result<()> {
        require_mode(self.mode, Mode::Coupled, "the beam benchmarks")?;
        BulkMaterial::new(self.bulk.e, self.bulk.nu)?;
        self.material.validate()?;
        if self.stabilization.tau0 < 0.0 {
            return Err(Error::Config("stabilization.tau0 must be nonnegative".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditioningConfig {
    pub mode: Mode,
    pub kind: CellKind,
    pub divisions: usize,
    /// Offsets of the plane from the node plane `z = 1/2`, in units of `h`.
    pub offsets: Vec<f64>,
    pub material: MembraneMaterial,
    /// Penalty used for the stabilised column.
    pub tau0: f64,
    pub power_iterations: usize,
    pub seed: u64,
    pub inner_tol: f64,
}

impl Default for ConditioningConfig {
    fn default() -> Self {
        Self {
            mode: Mode::Membrane,
            kind: CellKind::Tet4,
            divisions: 6,
            offsets: vec![0.5, 1e-2, 1e-4, 1e-6, 1e-8],
            material: MembraneMaterial {
                e: 1.0,
                nu: 0.3,
                t: 1.0,
            },
            tau0: 1.0,
            power_iterations: 2000,
            seed: 7,
            inner_tol: 1e-12,
        }
    }
}

impl ConditioningConfig {
    pub fn validate(&self) -> Result<()> {
        require_mode(self.mode, Mode::Membrane, "the conditioning sweep")?;
        self.material.validate()?;
        if self.divisions < 2 || self.divisions % 2 != 0 {
            return Err(Error::Config("divisions must be even and at least 2".into()));
        }
        if self.offsets.iter().any(|d| !(*d > 0.0 && *d < 1.0)) {
            return Err(Error::Config("offsets must lie in (0, 1)".into()));
        }
        Ok(())
    }
}

/// Merges `overlay` into `base`. Tables are merged key by key, except that a
/// level set of a different `kind` replaces the old one wholesale.
fn merge(base: &mut toml::Value, overlay: toml::Value) {
    match (base, overlay) {
        (toml::Value::Table(b), toml::Value::Table(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(old) if k != "levelset" || same_kind(old, &v) => merge(old, v),
                    _ => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (b, o) => *b = o,
    }
}

fn same_kind(a: &toml::Value, b: &toml::Value) -> bool {
    match (a, b) {
        (toml::Value::Table(a), toml::Value::Table(b)) => match (a.get("kind"), b.get("kind")) {
            (Some(x), Some(y)) => x == y,
            (_, None) => true,
            (None, Some(_)) => false,
        },
        _ => false,
    }
}

/// Parses a TOML document over `defaults`.
pub fn from_toml_str<T: Serialize + DeserializeOwned>(defaults: &T, text: &str) -> Result<T> {
    let mut base = toml::Value::try_from(defaults).map_err(|e| Error::Config(e.to_string()))?;
    let overlay: toml::Value = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    merge(&mut base, overlay);
    base.try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))
}

pub fn load<T: Serialize + DeserializeOwned>(defaults: &T, path: &std::path::Path) -> Result<T> {
    from_toml_str(defaults, &std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let c = CylinderConfig::default();
        assert_eq!(from_toml_str(&c, "").unwrap(), c);
        c.validate().unwrap();
        OblateConfig::default().validate().unwrap();
        BeamConfig::stiffened().validate().unwrap();
        BeamConfig::bending().validate().unwrap();
        ConditioningConfig::default().validate().unwrap();
    }

    #[test]
    fn partial_overrides() {
        let text = r#"
            [material]
            E = 50.0
            [mesh]
            kind = "hex8"
            refinements = [1, 2]
            [solver]
            tol = 1e-8
        "#;
        let c = from_toml_str(&CylinderConfig::default(), text).unwrap();
        assert_eq!(c.material.e, 50.0);
        assert_eq!(c.material.nu, 0.5);
        assert_eq!(c.mesh.kind, CellKind::Hex8);
        assert_eq!(c.mesh.refinements, vec![1, 2]);
        assert_eq!(c.solver.tol, 1e-8);
        assert_eq!(c.length, 4.0);
    }

    #[test]
    fn level_set_kind_replaces_table() {
        let text = r#"
            [levelset]
            kind = "plane"
            normal = [0.0, 0.0, 1.0]
            offset = 0.5
        "#;
        let c = from_toml_str(&CylinderConfig::default(), text).unwrap();
        assert!(matches!(c.levelset, LevelSet::Plane { .. }));
        assert!(c.validate().is_err());
    }

    #[test]
    fn rejects_bad_values() {
        let c = from_toml_str(&CylinderConfig::default(), "[mesh]\nrefinements = [2, 1]").unwrap();
        assert!(matches!(c.validate(), Err(Error::Config(_))));
        let c = from_toml_str(&CylinderConfig::default(), "mode = \"coupled\"").unwrap();
        assert!(c.validate().is_err());
        assert!(from_toml_str(&CylinderConfig::default(), "length = \"long\"").is_err());
    }
}
