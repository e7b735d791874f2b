//! Benchmark drivers: membrane convergence studies, embedded-membrane beams
//! and the small-cut conditioning sweep.

use std::time::Instant;

use serde::Serialize;

use crate::analysis::config::{BeamConfig, ConditioningConfig, CylinderConfig, OblateConfig};
use crate::analysis::convergence::{fill_rates, ConvergenceRow};
use crate::analysis::exact::OblateManufactured;
use crate::analysis::stress::{recover_stress, stress_error_l2, StressSample};
use crate::assembly::{
    apply_dirichlet, assemble_boundary_traction, assemble_membrane, assemble_membrane_load,
    assemble_stabilization, couple, DofMap, EmbeddedMembrane, LoadField, MembraneMaterial,
    SparseSystem, StabilizationParams,
};
use crate::cut::{extract_surface, CutSurface, ExtractOptions};
use crate::level_set::{
    classify, discretize, domain_nodes, ActiveMesh, Axis, ComponentMask, DiscreteLevelSet,
    LevelSet, NodeScope, NodeSelector,
};
use crate::mesh::{self, build_structured, jitter_interior, Aabb, BackgroundMesh, CellKind};
use crate::solver::{estimate_condition, solve_cg, ConditionOptions, SolverOptions};
use crate::{Error, Result, Vec3};

/// Geometric Dirichlet condition of a membrane problem.
#[derive(Clone, Debug)]
pub struct DirichletSpec {
    pub tag: String,
    pub selector: NodeSelector,
    pub scope: NodeScope,
    pub components: ComponentMask,
    /// Prescribed displacement; zero when `None`.
    pub values: Option<LoadField>,
}

impl DirichletSpec {
    pub fn new(tag: &str, selector: NodeSelector, scope: NodeScope, components: ComponentMask) -> Self {
        Self {
            tag: tag.to_owned(),
            selector,
            scope,
            components,
            values: None,
        }
    }

    pub fn with_values(mut self, values: LoadField) -> Self {
        self.values = Some(values);
        self
    }
}

/// A free membrane on the zero set of `level_set`.
#[derive(Clone, Debug)]
pub struct MembraneProblem {
    pub level_set: LevelSet,
    pub material: MembraneMaterial,
    pub stabilization: StabilizationParams,
    pub load: LoadField,
    pub dirichlet: Vec<DirichletSpec>,
    pub solver: SolverOptions,
    pub extract: Option<ExtractOptions>,
}

/// Geometry, numbering and constrained system of a membrane problem.
#[derive(Clone, Debug)]
pub struct MembraneSystem {
    pub phi: DiscreteLevelSet,
    pub active: ActiveMesh,
    pub surface: CutSurface,
    pub dofs: DofMap,
    pub system: SparseSystem,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct SolveSummary {
    pub iterations: usize,
    pub relative_residual: f64,
    pub converged: bool,
}

#[derive(Clone, Debug)]
pub struct MembraneSolution {
    pub phi: DiscreteLevelSet,
    pub active: ActiveMesh,
    pub surface: CutSurface,
    pub dofs: DofMap,
    pub u: Vec<f64>,
    pub solve: SolveSummary,
    pub stresses: Vec<StressSample>,
}

/// Builds the band, the surface and the constrained system. Accepts
/// `tau0 = 0`, which leaves small cuts unstabilised.
pub fn assemble_membrane_problem(mesh: &BackgroundMesh, p: &MembraneProblem) -> Result<MembraneSystem> {
    p.material.validate()?;
    if p.stabilization.tau0 < 0.0 {
        return Err(Error::InvalidArgument("tau0 must be nonnegative".into()));
    }
    let phi = discretize(&p.level_set, mesh);
    let mut active = classify(mesh, &phi)?;
    let opts = p.extract.unwrap_or_else(|| ExtractOptions::for_kind(mesh.kind()));
    let surface = extract_surface(mesh, &phi, &active, opts)?;
    if !surface.skipped.is_empty() {
        log::warn!("{} cut cells skipped as degenerate", surface.skipped.len());
    }
    let mut dofs = DofMap::band(mesh, &active);
    let mut system = SparseSystem::for_band(mesh, &active, &dofs)?;
    assemble_membrane(&mut system, mesh, &surface, &p.material, &dofs)?;
    assemble_stabilization(&mut system, mesh, &active.interior_faces, p.stabilization, &dofs)?;
    assemble_membrane_load(&mut system, mesh, &surface, &p.load, &dofs)?;
    for d in &p.dirichlet {
        let c = active
            .select_dirichlet(&d.tag, mesh, d.selector, d.scope, d.components)
            .clone();
        match &d.values {
            Some(f) => dofs.constrain_nodes_with(mesh, &c, |x| f.eval(x))?,
            None => dofs.constrain_nodes(&c)?,
        };
    }
    apply_dirichlet(&mut system, &dofs)?;
    Ok(MembraneSystem {
        phi,
        active,
        surface,
        dofs,
        system,
    })
}

/// Assembles, solves and recovers stresses. A free membrane needs
/// `tau0 > 0`.
pub fn solve_membrane(mesh: &BackgroundMesh, p: &MembraneProblem) -> Result<MembraneSolution> {
    if p.stabilization.tau0 <= 0.0 {
        return Err(Error::InvalidArgument(
            "membrane-only solves need tau0 > 0; tau0 = 0 is reserved for coupled problems".into(),
        ));
    }
    let s = assemble_membrane_problem(mesh, p)?;
    let rep = solve_cg(&s.system.matrix, &s.system.rhs, p.solver)?;
    let stresses = recover_stress(mesh, &s.surface, &s.dofs, &rep.x, &p.material)?;
    Ok(MembraneSolution {
        phi: s.phi,
        active: s.active,
        surface: s.surface,
        dofs: s.dofs,
        solve: SolveSummary {
            iterations: rep.iterations,
            relative_residual: rep.relative_residual,
            converged: rep.converged,
        },
        u: rep.x,
        stresses,
    })
}

/// One refinement level of a convergence study.
#[derive(Clone, Debug)]
pub struct Level {
    pub refinement: usize,
    pub mesh: BackgroundMesh,
    pub solution: MembraneSolution,
    pub error: f64,
    pub seconds: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct LevelFailure {
    pub refinement: usize,
    pub message: String,
}

#[derive(Clone, Debug)]
pub struct Study {
    pub rows: Vec<ConvergenceRow>,
    pub failures: Vec<LevelFailure>,
    /// The finest level that succeeded.
    pub finest: Option<Level>,
}

impl Study {
    pub fn errors(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.error).collect()
    }

    pub fn rates(&self) -> Vec<f64> {
        self.rows.iter().filter_map(|r| r.rate).collect()
    }
}

/// Runs `level` for every refinement. A failing level is recorded and
/// skipped; rates are taken between consecutive successful levels.
pub fn convergence_study(
    refinements: &[usize],
    mut level: impl FnMut(usize) -> Result<Level>,
) -> Study {
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    let mut finest = None;
    for &m in refinements {
        match level(m) {
            Ok(l) => {
                log::info!(
                    "refinement {m}: h = {:.4}, error = {:.4e}, {} CG iterations, {:.1} s",
                    mesh::mesh_size(&l.mesh),
                    l.error,
                    l.solution.solve.iterations,
                    l.seconds
                );
                if !l.solution.solve.converged {
                    log::warn!("refinement {m}: CG did not converge");
                }
                rows.push(ConvergenceRow {
                    h: mesh::mesh_size(&l.mesh),
                    nno: l.mesh.n_vertices(),
                    ndof: l.solution.dofs.n_dofs(),
                    error: l.error,
                    rate: None,
                });
                finest = Some(l);
            }
            Err(e) => {
                log::error!("refinement {m} failed: {e}");
                failures.push(LevelFailure {
                    refinement: m,
                    message: e.to_string(),
                });
            }
        }
    }
    fill_rates(&mut rows);
    Study { rows, failures, finest }
}

fn structured(bounds: Aabb, base: [usize; 3], m: usize, kind: CellKind, jitter: f64, seed: u64) -> Result<BackgroundMesh> {
    let mesh = build_structured(bounds, base.map(|d| d * m), kind)?;
    if jitter > 0.0 {
        jitter_interior(&mesh, jitter, seed)
    } else {
        Ok(mesh)
    }
}

/// The cylinder problem on one mesh.
pub fn cylinder_problem(cfg: &CylinderConfig) -> MembraneProblem {
    let pull = cfg.pull();
    MembraneProblem {
        level_set: cfg.levelset.clone(),
        material: cfg.material,
        stabilization: cfg.stabilization,
        load: LoadField::new(move |x| pull.load(x.x)),
        dirichlet: vec![
            DirichletSpec::new("axial", NodeSelector::plane(Axis::X, 0.0), NodeScope::BandBoundary, ComponentMask::X),
            DirichletSpec::new(
                "radial",
                NodeSelector::plane(Axis::X, cfg.length),
                NodeScope::BandBoundary,
                ComponentMask::YZ,
            ),
        ],
        solver: cfg.solver,
        extract: None,
    }
}

/// Solves the cylinder pull on refinement `m`.
pub fn cylinder_level(cfg: &CylinderConfig, m: usize) -> Result<Level> {
    cfg.validate()?;
    let start = Instant::now();
    let mesh = structured(cfg.bounds(), cfg.base_divisions, m, cfg.mesh.kind, cfg.mesh.jitter, cfg.mesh.seed)?;
    let solution = solve_membrane(&mesh, &cylinder_problem(cfg))?;
    let pull = cfg.pull();
    let error = stress_error_l2(&solution.stresses, |s| pull.stress_tensor(&s.x, &s.normal));
    Ok(Level {
        refinement: m,
        mesh,
        solution,
        error,
        seconds: start.elapsed().as_secs_f64(),
    })
}

/// Stress convergence of the pulled cylinder.
pub fn cylinder(cfg: &CylinderConfig) -> Result<Study> {
    cfg.validate()?;
    Ok(convergence_study(&cfg.mesh.refinements, |m| cylinder_level(cfg, m)))
}

/// The oblate problem: `u = (x, 0, 0)` imposed on the band nodes in the plane
/// `x = 0`, and the manufactured load evaluated at the closest surface point.
pub fn oblate_problem(cfg: &OblateConfig) -> MembraneProblem {
    let mut exact = OblateManufactured::new(cfg.material);
    exact.step = cfg.fd_step;
    MembraneProblem {
        level_set: LevelSet::Oblate,
        material: cfg.material,
        stabilization: cfg.stabilization,
        load: LoadField::new(move |x| exact.load(&LevelSet::Oblate.closest_point(x))),
        dirichlet: vec![DirichletSpec::new(
            "symmetry",
            NodeSelector::plane(Axis::X, 0.0),
            NodeScope::Band,
            ComponentMask::ALL,
        )
        .with_values(LoadField::new(OblateManufactured::displacement))],
        solver: cfg.solver,
        extract: None,
    }
}

pub fn oblate_level(cfg: &OblateConfig, m: usize) -> Result<Level> {
    cfg.validate()?;
    let start = Instant::now();
    let mesh = structured(cfg.bounds, cfg.base_divisions, m, cfg.mesh.kind, cfg.mesh.jitter, cfg.mesh.seed)?;
    let solution = solve_membrane(&mesh, &oblate_problem(cfg))?;
    let exact = OblateManufactured::new(cfg.material);
    let error = stress_error_l2(&solution.stresses, |s| exact.stress(&LevelSet::Oblate.closest_point(&s.x)));
    Ok(Level {
        refinement: m,
        mesh,
        solution,
        error,
        seconds: start.elapsed().as_secs_f64(),
    })
}

/// Stress convergence of the oblate spheroid with the manufactured solution.
pub fn oblate(cfg: &OblateConfig) -> Result<Study> {
    cfg.validate()?;
    Ok(convergence_study(&cfg.mesh.refinements, |m| oblate_level(cfg, m)))
}

/// Coupled bulk solve with and without embedded membranes.
#[derive(Clone, Debug)]
pub struct BeamOutcome {
    pub mesh: BackgroundMesh,
    pub surfaces: Vec<CutSurface>,
    pub u_baseline: Vec<f64>,
    pub u_stiffened: Vec<f64>,
    pub report: BeamReport,
}

#[derive(Clone, Debug, Serialize)]
pub struct BeamReport {
    /// Mean displacement of the loaded face along the load direction.
    pub baseline: f64,
    pub stiffened: f64,
    pub n_membranes: usize,
    pub membrane_area: f64,
    pub ndof: usize,
    pub iterations: [usize; 2],
    pub converged: bool,
    pub bulk_nu: f64,
    pub support: &'static str,
    pub load: String,
}

fn beam(cfg: &BeamConfig, loaded: NodeSelector, direction: Vec3, load: String) -> Result<BeamOutcome> {
    cfg.validate()?;
    let mesh = build_structured(cfg.bounds, cfg.divisions, cfg.kind)?;
    let mut dofs = DofMap::full(&mesh);
    let clamp = domain_nodes(&mesh, NodeSelector::plane(Axis::X, cfg.bounds.min[0]), ComponentMask::ALL);
    dofs.constrain_nodes(&clamp)?;

    let mut geometry = Vec::new();
    for ls in &cfg.membranes {
        let phi = discretize(ls, &mesh);
        let active = classify(&mesh, &phi)?;
        let surface = extract_surface(&mesh, &phi, &active, ExtractOptions::for_kind(cfg.kind))?;
        geometry.push((active, surface));
    }
    let embedded: Vec<EmbeddedMembrane> = geometry
        .iter()
        .map(|(active, surface)| EmbeddedMembrane {
            surface,
            material: cfg.material,
            load: None,
            stabilization: (cfg.stabilization.tau0 > 0.0).then_some((active, cfg.stabilization)),
        })
        .collect();

    let traction = LoadField::constant(direction * cfg.traction);
    let unit = LoadField::constant(direction);
    let bulk = cfg.bulk;
    let solve = |membranes: &[EmbeddedMembrane]| -> Result<(Vec<f64>, f64, usize, bool)> {
        let mut sys = couple(&mesh, &bulk, None, membranes, &dofs)?;
        assemble_boundary_traction(&mut sys, &mesh, loaded, &traction, &dofs)?;
        apply_dirichlet(&mut sys, &dofs)?;
        let rep = solve_cg(&sys.matrix, &sys.rhs, cfg.solver)?;
        // area-weighted mean of u . direction over the loaded face
        let mut probe = SparseSystem {
            matrix: crate::sparse::CsrMatrix::identity(0),
            rhs: vec![0.0; dofs.n_dofs()],
        };
        let area = assemble_boundary_traction(&mut probe, &mesh, loaded, &unit, &dofs)?;
        let mean = probe.rhs.iter().zip(&rep.x).map(|(a, b)| a * b).sum::<f64>() / area;
        Ok((rep.x, mean, rep.iterations, rep.converged))
    };
    let (u_baseline, baseline, it0, c0) = solve(&[])?;
    let (u_stiffened, stiffened, it1, c1) = solve(&embedded)?;
    let surfaces: Vec<CutSurface> = geometry.into_iter().map(|(_, s)| s).collect();
    let report = BeamReport {
        baseline,
        stiffened,
        n_membranes: surfaces.len(),
        membrane_area: surfaces.iter().map(|s| s.area).sum(),
        ndof: dofs.n_dofs(),
        iterations: [it0, it1],
        converged: c0 && c1,
        bulk_nu: cfg.bulk.nu,
        support: "all components fixed on x = min",
        load,
    };
    Ok(BeamOutcome {
        mesh,
        surfaces,
        u_baseline,
        u_stiffened,
        report,
    })
}

/// Axial traction on the far end of a beam reinforced by membranes.
pub fn stiffened_beam(cfg: &BeamConfig) -> Result<BeamOutcome> {
    beam(
        cfg,
        NodeSelector::plane(Axis::X, cfg.bounds.max[0]),
        Vec3::x(),
        format!("traction {} along +x on x = {}", cfg.traction, cfg.bounds.max[0]),
    )
}

/// Downward traction on the top face of a cantilever with an embedded tube.
pub fn bending_beam(cfg: &BeamConfig) -> Result<BeamOutcome> {
    beam(
        cfg,
        NodeSelector::plane(Axis::Z, cfg.bounds.max[2]),
        -Vec3::z(),
        format!("traction {} along -z on z = {}", cfg.traction, cfg.bounds.max[2]),
    )
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct ConditioningRow {
    /// Offset of the plane above the node plane, in units of `h`.
    pub offset: f64,
    pub kappa_stabilized: f64,
    /// `f64::INFINITY` when the inner solves of the estimate failed.
    pub kappa_plain: f64,
    pub ndof: usize,
}

/// The constrained membrane matrix of the plane `z = 1/2 + offset h` on a
/// unit cube, restricted to its free dofs.
///
/// The membrane is clamped on the band boundary at `x, y in {0, 1}`, and the
/// out-of-plane component is fixed everywhere: a flat membrane has no
/// stiffness against it, stabilised or not.
pub fn conditioning_matrix(cfg: &ConditioningConfig, offset: f64, tau0: f64) -> Result<crate::sparse::CsrMatrix> {
    let n = cfg.divisions;
    let mesh = build_structured(Aabb::new([0.0; 3], [1.0; 3]), [n; 3], cfg.kind)?;
    let h = mesh::mesh_size(&mesh);
    let mut dirichlet: Vec<DirichletSpec> = [(Axis::X, 0.0), (Axis::X, 1.0), (Axis::Y, 0.0), (Axis::Y, 1.0)]
        .iter()
        .map(|&(a, v)| DirichletSpec::new("side", NodeSelector::plane(a, v), NodeScope::BandBoundary, ComponentMask::ALL))
        .collect();
    dirichlet.push(DirichletSpec::new(
        "normal",
        NodeSelector::Box {
            min: [-1.0; 3],
            max: [2.0; 3],
        },
        NodeScope::Band,
        ComponentMask([false, false, true]),
    ));
    let problem = MembraneProblem {
        level_set: LevelSet::Plane {
            normal: [0.0, 0.0, 1.0],
            offset: 0.5 + offset * h,
        },
        material: cfg.material,
        stabilization: StabilizationParams { tau0 },
        load: LoadField::zero(),
        dirichlet,
        solver: SolverOptions::default(),
        extract: None,
    };
    let s = assemble_membrane_problem(&mesh, &problem)?;
    Ok(s.system.matrix.principal_submatrix(&s.dofs.free_dofs()))
}

/// Condition numbers with and without the face penalty over the offsets.
pub fn conditioning_sweep(cfg: &ConditioningConfig) -> Result<Vec<ConditioningRow>> {
    cfg.validate()?;
    let opts = ConditionOptions {
        iterations: cfg.power_iterations,
        rel_change: 1e-10,
        seed: cfg.seed,
        inner: SolverOptions {
            tol: cfg.inner_tol,
            max_iter: None,
        },
    };
    let kappa = |a: &crate::sparse::CsrMatrix| -> Result<f64> {
        let c = estimate_condition(a, opts)?;
        Ok(if c.lower_bound { f64::INFINITY } else { c.kappa })
    };
    cfg.offsets
        .iter()
        .map(|&offset| {
            let stab = conditioning_matrix(cfg, offset, cfg.tau0)?;
            let plain = conditioning_matrix(cfg, offset, 0.0)?;
            let row = ConditioningRow {
                offset,
                kappa_stabilized: kappa(&stab)?,
                kappa_plain: kappa(&plain)?,
                ndof: stab.nrows(),
            };
            log::info!("offset {offset:e} h: kappa = {:.3e} (tau0 = {}), {:.3e} (tau0 = 0)", row.kappa_stabilized, cfg.tau0, row.kappa_plain);
            Ok(row)
        })
        .collect()
}
