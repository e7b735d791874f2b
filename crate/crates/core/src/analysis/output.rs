//! Files written by benchmark runs: CSV tables, JSON run logs and VTK.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::analysis::benchmarks::{BeamOutcome, ConditioningRow, Level, Study};
use crate::analysis::convergence;
use crate::analysis::stress::triangle_stresses;
use crate::assembly::DofMap;
use crate::vtk;
use crate::Result;

/// JSON sidecar describing one run.
#[derive(Debug, Serialize)]
pub struct RunLog<'a, C: Serialize, R: Serialize> {
    pub benchmark: &'a str,
    pub version: &'a str,
    pub threads: usize,
    pub seconds: f64,
    pub config: &'a C,
    pub results: R,
    pub notes: Vec<String>,
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(value)?)?;
    Ok(())
}

/// Writes the CSV table and, for the finest level, the band grid and the
/// surface with stresses. Returns the files written.
pub fn write_study(dir: &Path, name: &str, study: &Study) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut files = Vec::new();
    let csv = dir.join(format!("{name}.csv"));
    convergence::write_csv(&csv, &study.rows)?;
    files.push(csv);
    if let Some(level) = &study.finest {
        files.extend(write_level(dir, name, level)?);
    }
    Ok(files)
}

pub fn write_level(dir: &Path, name: &str, level: &Level) -> Result<Vec<PathBuf>> {
    let s = &level.solution;
    let grid = dir.join(format!("{name}_band.vtk"));
    vtk::write_grid(&grid, &level.mesh, &s.active.cells, Some((&s.dofs, &s.u)))?;
    let surf = dir.join(format!("{name}_surface.vtk"));
    let stress = triangle_stresses(&s.stresses, s.surface.triangles.len());
    vtk::write_surface(&surf, &level.mesh, &s.surface, Some((&s.dofs, &s.u)), Some(&stress))?;
    Ok(vec![grid, surf])
}

pub fn write_beam(dir: &Path, name: &str, out: &BeamOutcome) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let dofs = DofMap::full(&out.mesh);
    let all: Vec<usize> = (0..out.mesh.n_cells()).collect();
    let mut files = Vec::new();
    for (tag, u) in [("baseline", &out.u_baseline), ("stiffened", &out.u_stiffened)] {
        let p = dir.join(format!("{name}_{tag}.vtk"));
        vtk::write_grid(&p, &out.mesh, &all, Some((&dofs, u)))?;
        files.push(p);
    }
    for (i, s) in out.surfaces.iter().enumerate() {
        let p = dir.join(format!("{name}_membrane_{i}.vtk"));
        vtk::write_surface(&p, &out.mesh, s, Some((&dofs, &out.u_stiffened)), None)?;
        files.push(p);
    }
    Ok(files)
}

pub fn conditioning_csv(rows: &[ConditioningRow]) -> String {
    let mut s = String::from("offset,kappa_stabilized,kappa_plain,ndof\n");
    for r in rows {
        s.push_str(&format!("{:e},{:.6e},{:.6e},{}\n", r.offset, r.kappa_stabilized, r.kappa_plain, r.ndof));
    }
    s
}
