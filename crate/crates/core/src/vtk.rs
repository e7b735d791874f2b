//! Legacy ASCII VTK output.

use std::fmt::Write as _;
use std::path::Path;

use crate::assembly::DofMap;
use crate::basis::ReferenceBasis;
use crate::cut::CutSurface;
use crate::mesh::BackgroundMesh;
use crate::{Error, Mat3, Result, Vec3};

/// Unstructured grid of the listed cells with an optional nodal displacement.
pub fn grid_string(mesh: &BackgroundMesh, cells: &[usize], field: Option<(&DofMap, &[f64])>) -> String {
    let mut local = vec![usize::MAX; mesh.n_vertices()];
    let mut points = Vec::new();
    for &c in cells {
        for &v in mesh.cell(c) {
            if local[v] == usize::MAX {
                local[v] = points.len();
                points.push(v);
            }
        }
    }
    let npc = mesh.kind().nodes_per_cell();
    let mut s = String::new();
    s.push_str("# vtk DataFile Version 3.0\ncut membrane background grid\nASCII\nDATASET UNSTRUCTURED_GRID\n");
    writeln!(s, "POINTS {} double", points.len()).unwrap();
    for &v in &points {
        let x = mesh.vertices()[v];
        writeln!(s, "{} {} {}", x.x, x.y, x.z).unwrap();
    }
    writeln!(s, "CELLS {} {}", cells.len(), cells.len() * (npc + 1)).unwrap();
    for &c in cells {
        s.push_str(&npc.to_string());
        for &v in mesh.cell(c) {
            write!(s, " {}", local[v]).unwrap();
        }
        s.push('\n');
    }
    writeln!(s, "CELL_TYPES {}", cells.len()).unwrap();
    for _ in cells {
        writeln!(s, "{}", mesh.kind().vtk_cell_type()).unwrap();
    }
    if let Some((dofs, u)) = field {
        writeln!(s, "POINT_DATA {}\nVECTORS displacement double", points.len()).unwrap();
        for &v in &points {
            let d = dofs.displacement(u, v).unwrap_or_else(Vec3::zeros);
            writeln!(s, "{} {} {}", d.x, d.y, d.z).unwrap();
        }
    }
    s
}

pub fn write_grid(path: &Path, mesh: &BackgroundMesh, cells: &[usize], field: Option<(&DofMap, &[f64])>) -> Result<()> {
    std::fs::write(path, grid_string(mesh, cells, field))?;
    Ok(())
}

/// Surface triangles as polydata, three points per triangle. Cell data holds
/// the normal and parent cell, plus the stress tensor when given; point data
/// holds the displacement interpolated from the parent cell.
pub fn surface_string(
    mesh: &BackgroundMesh,
    surface: &CutSurface,
    field: Option<(&DofMap, &[f64])>,
    stress: Option<&[Mat3]>,
) -> Result<String> {
    let n = surface.triangles.len();
    let mut s = String::new();
    s.push_str("# vtk DataFile Version 3.0\ncut membrane surface\nASCII\nDATASET POLYDATA\n");
    writeln!(s, "POINTS {} double", 3 * n).unwrap();
    for t in &surface.triangles {
        for x in &t.facet.vertices {
            writeln!(s, "{} {} {}", x.x, x.y, x.z).unwrap();
        }
    }
    writeln!(s, "POLYGONS {} {}", n, 4 * n).unwrap();
    for i in 0..n {
        writeln!(s, "3 {} {} {}", 3 * i, 3 * i + 1, 3 * i + 2).unwrap();
    }
    writeln!(s, "CELL_DATA {n}\nNORMALS normal double").unwrap();
    for t in &surface.triangles {
        let v = t.facet.normal;
        writeln!(s, "{} {} {}", v.x, v.y, v.z).unwrap();
    }
    s.push_str("SCALARS parent_cell int 1\nLOOKUP_TABLE default\n");
    for t in &surface.triangles {
        writeln!(s, "{}", t.facet.cell).unwrap();
    }
    if let Some(stress) = stress {
        if stress.len() != n {
            return Err(Error::Contract(format!("{} stresses for {n} triangles", stress.len())));
        }
        s.push_str("TENSORS stress double\n");
        for m in stress {
            for r in 0..3 {
                writeln!(s, "{} {} {}", m[(r, 0)], m[(r, 1)], m[(r, 2)]).unwrap();
            }
        }
    }
    if let Some((dofs, u)) = field {
        let basis = ReferenceBasis::new(mesh.kind());
        writeln!(s, "POINT_DATA {}\nVECTORS displacement double", 3 * n).unwrap();
        for t in &surface.triangles {
            let coords = mesh.cell_coords(t.facet.cell);
            for x in &t.facet.vertices {
                let xi = basis.map_to_reference(&coords, x)?;
                let mut d = Vec3::zeros();
                for (nv, &v) in basis.values(&xi).iter().zip(mesh.cell(t.facet.cell)) {
                    d += dofs.displacement(u, v).unwrap_or_else(Vec3::zeros) * *nv;
                }
                writeln!(s, "{} {} {}", d.x, d.y, d.z).unwrap();
            }
        }
    }
    Ok(s)
}

pub fn write_surface(
    path: &Path,
    mesh: &BackgroundMesh,
    surface: &CutSurface,
    field: Option<(&DofMap, &[f64])>,
    stress: Option<&[Mat3]>,
) -> Result<()> {
    std::fs::write(path, surface_string(mesh, surface, field, stress)?)?;
    Ok(())
}

/// Point and cell counts declared in a legacy VTK file.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct VtkCounts {
    pub points: usize,
    pub cells: usize,
}

/// Reads the `POINTS` count and the `CELLS` or `POLYGONS` count, checking
/// that the listed records are present.
pub fn read_counts(text: &str) -> Result<VtkCounts> {
    let bad = |m: &str| Error::InvalidArgument(format!("malformed VTK: {m}"));
    let lines: Vec<&str> = text.lines().collect();
    let mut points = None;
    let mut cells = None;
    let mut i = 0;
    while i < lines.len() {
        let mut it = lines[i].split_whitespace();
        match it.next() {
            Some("POINTS") => {
                let n: usize = it.next().and_then(|v| v.parse().ok()).ok_or_else(|| bad("POINTS count"))?;
                let coords = lines[i + 1..].iter().take_while(|l| {
                    l.split_whitespace().next().is_some_and(|t| t.parse::<f64>().is_ok())
                });
                let values: usize = coords.map(|l| l.split_whitespace().count()).sum();
                if values != 3 * n {
                    return Err(bad("point coordinates do not match the count"));
                }
                points = Some(n);
            }
            Some("CELLS") | Some("POLYGONS") => {
                let n: usize = it.next().and_then(|v| v.parse().ok()).ok_or_else(|| bad("cell count"))?;
                if lines.len() < i + 1 + n {
                    return Err(bad("truncated cell list"));
                }
                cells = Some(n);
            }
            _ => {}
        }
        i += 1;
    }
    Ok(VtkCounts {
        points: points.ok_or_else(|| bad("no POINTS"))?,
        cells: cells.ok_or_else(|| bad("no CELLS or POLYGONS"))?,
    })
}
