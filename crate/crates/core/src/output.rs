//! Run outputs: diagnostics CSV, VTK snapshots and the resolved config.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::config::RunConfig;
use crate::coupled::{pressure, SimState};
use crate::diagnostics::DiagnosticsRow;
use crate::error::{Error, Result};
use crate::materials::MaterialModel;
use crate::mesh::{Grid, ScalarField};
use crate::stepper::Trajectory;

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io { path: path.to_path_buf(), source }
}

/// Diagnostics table with header.
pub fn diagnostics_csv(rows: &[DiagnosticsRow]) -> String {
    let mut s = String::with_capacity(160 * (rows.len() + 1));
    s.push_str(DiagnosticsRow::HEADER);
    s.push('\n');
    for r in rows {
        s.push_str(&r.csv_line());
        s.push('\n');
    }
    s
}

/// Legacy ASCII VTK `STRUCTURED_POINTS` file with `φ`, `θ`, `p`, `|u|`,
/// `u_x`, `u_y`.
pub fn vtk_snapshot(grid: &Grid, material: &MaterialModel, state: &SimState) -> String {
    let p = if state.derived_valid() {
        state.p.clone()
    } else {
        pressure(grid, material, &state.phi, &state.theta, &state.u)
    };
    let ux = ScalarField::wrap(grid, state.u.x.clone());
    let uy = ScalarField::wrap(grid, state.u.y.clone());
    let fields: [(&str, &ScalarField); 6] = [
        ("phi", &state.phi),
        ("theta", &state.theta),
        ("p", &p),
        ("u_magnitude", &state.u.magnitude(grid)),
        ("u_x", &ux),
        ("u_y", &uy),
    ];
    let mut s = String::new();
    let _ = writeln!(s, "# vtk DataFile Version 3.0");
    let _ = writeln!(s, "chbiot snapshot t={:e}", state.t);
    let _ = writeln!(s, "ASCII");
    let _ = writeln!(s, "DATASET STRUCTURED_POINTS");
    let _ = writeln!(s, "DIMENSIONS {} {} 1", grid.nx(), grid.ny());
    let _ = writeln!(s, "ORIGIN 0 0 0");
    let _ = writeln!(s, "SPACING {:e} {:e} 1", grid.hx(), grid.hy());
    let _ = writeln!(s, "POINT_DATA {}", grid.len());
    for (name, f) in fields {
        let _ = writeln!(s, "SCALARS {name} double 1");
        let _ = writeln!(s, "LOOKUP_TABLE default");
        for v in f.values() {
            let _ = writeln!(s, "{v:e}");
        }
    }
    s
}

/// Files written by [`write_outputs`].
#[derive(Debug, Clone, PartialEq, Default)]
pub struct OutputSummary {
    pub csv: PathBuf,
    pub echo: PathBuf,
    pub snapshots: Vec<PathBuf>,
    pub failure: Option<PathBuf>,
}

/// Writes `diagnostics.csv`, `config.echo`, one `snapshot_NNNNN.vtk` per
/// `stride` windows (window 0 included) and, for incomplete runs,
/// `failure.txt`.
pub fn write_outputs(traj: &Trajectory, cfg: &RunConfig, grid: &Grid, dir: &Path) -> Result<OutputSummary> {
    fs::create_dir_all(dir).map_err(io(dir))?;
    let csv = dir.join("diagnostics.csv");
    fs::write(&csv, diagnostics_csv(&traj.rows)).map_err(io(&csv))?;
    let echo = dir.join("config.echo");
    fs::write(&echo, cfg.serialize()).map_err(io(&echo))?;
    let mut snapshots = Vec::new();
    for (i, state) in traj.states.iter().enumerate().step_by(cfg.output.stride.max(1)) {
        let path = dir.join(format!("snapshot_{i:05}.vtk"));
        fs::write(&path, vtk_snapshot(grid, &cfg.material, state)).map_err(io(&path))?;
        snapshots.push(path);
    }
    let failure = match &traj.failure {
        Some(f) => {
            let path = dir.join("failure.txt");
            let mut s = format!("{f}\n");
            for e in &f.report.shrinks {
                let _ = writeln!(s, "rejected dt {:e}: {}", e.dt, e.reason);
            }
            let _ = writeln!(s, "residuals of last attempt: {:?}", f.report.residuals);
            fs::write(&path, s).map_err(io(&path))?;
            Some(path)
        }
        None => None,
    };
    Ok(OutputSummary { csv, echo, snapshots, failure })
}
