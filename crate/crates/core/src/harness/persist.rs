//! Per-path trajectory files: one JSON metadata header line (prefixed
//! with '#') followed by CSV rows `t,u_0,...,u_N`. Floats are printed in
//! shortest round-trip form, so read(write(traj)) reproduces the
//! trajectory exactly.

use std::fmt::Write as _;
use std::fs;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::GridFunction;
use crate::solver::{SchemeMeta, Trajectory};
use crate::Real;

use super::config::SCHEMA_VERSION;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrajHeader {
    pub schema_version: u32,
    pub master_seed: u64,
    pub path_index: u64,
    pub meta: SchemeMeta<Real>,
    pub cutoff_active: bool,
    pub diverged: bool,
    pub rows: usize,
}

pub fn trajectory_file_name(path_index: u64) -> String {
    format!("path_{path_index:05}.csv")
}

pub fn write_trajectory(dir: &Path, traj: &Trajectory<Real>) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let header = TrajHeader {
        schema_version: SCHEMA_VERSION,
        master_seed: traj.master_seed,
        path_index: traj.path_index,
        meta: traj.meta,
        cutoff_active: traj.cutoff_active,
        diverged: traj.diverged,
        rows: traj.snapshots.len(),
    };
    let mut out = String::new();
    let _ = writeln!(out, "# {}", serde_json::to_string(&header)?);
    for (t, g) in &traj.snapshots {
        let _ = write!(out, "{t}");
        for v in g.values() {
            let _ = write!(out, ",{v}");
        }
        let _ = writeln!(out);
    }
    let file = dir.join(trajectory_file_name(traj.path_index));
    fs::write(&file, out)?;
    Ok(file)
}

pub fn read_trajectory(file: &Path) -> Result<Trajectory<Real>> {
    let reader = BufReader::new(fs::File::open(file)?);
    let mut lines = reader.lines();
    let first = lines
        .next()
        .ok_or_else(|| Error::InvalidParameter(format!("{}: empty file", file.display())))??;
    let json = first.strip_prefix('#').ok_or_else(|| {
        Error::InvalidParameter(format!("{}: missing '# {{json}}' header", file.display()))
    })?;
    let header: TrajHeader = serde_json::from_str(json.trim())?;
    if header.schema_version != SCHEMA_VERSION {
        return Err(Error::InvalidParameter(format!(
            "{}: schema_version {} unsupported",
            file.display(),
            header.schema_version
        )));
    }
    let mut snapshots = Vec::with_capacity(header.rows);
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let mut it = line.split(',');
        let t: Real = it
            .next()
            .unwrap()
            .parse()
            .map_err(|e| Error::InvalidParameter(format!("bad time value: {e}")))?;
        let values: std::result::Result<Vec<Real>, _> = it.map(|v| v.parse::<Real>()).collect();
        let values =
            values.map_err(|e| Error::InvalidParameter(format!("bad node value: {e}")))?;
        if values.len() != header.meta.n + 1 {
            return Err(Error::InvalidParameter(format!(
                "row has {} values, expected {}",
                values.len(),
                header.meta.n + 1
            )));
        }
        snapshots.push((t, GridFunction::new(values)?));
    }
    if snapshots.len() != header.rows {
        return Err(Error::InvalidParameter(format!(
            "expected {} rows, found {}",
            header.rows,
            snapshots.len()
        )));
    }
    Ok(Trajectory {
        snapshots,
        master_seed: header.master_seed,
        path_index: header.path_index,
        meta: header.meta,
        cutoff_active: header.cutoff_active,
        diverged: header.diverged,
    })
}

/// All trajectory files in a directory, sorted by path index.
pub fn list_trajectories(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .map(|n| n.starts_with("path_") && n.ends_with(".csv"))
                .unwrap_or(false)
        })
        .collect();
    files.sort();
    Ok(files)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::RngStream;
    use crate::solver::{simulate_path, CoeffField, Nonlinearity, SchemeParams, SpdeProblem};

    #[test]
    fn write_read_roundtrip_is_exact() {
        let n = 32;
        let problem = SpdeProblem {
            a: CoeffField::Const(1.0),
            b: CoeffField::Const(0.0),
            c: CoeffField::Const(0.0),
            xi: CoeffField::Const(1.0),
            lambda: 0.25,
            u0: GridFunction::from_fn(n, |x: f64| x * (1.0 - x)),
            horizon: 0.01,
            delta0: 1.0,
            big_k: 2.0,
            nonlinearity: Nonlinearity::CutoffPower,
        };
        let scheme = SchemeParams {
            n,
            dt: 1e-4,
            k_modes: n - 1,
            cutoff_m: 4.0,
            snapshot_times: SchemeParams::uniform_snapshots(10, 0.01),
            nu: 0.8,
        };
        let mut rng = RngStream::new(7, 3);
        let traj = simulate_path(&problem, &scheme, &mut rng).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let file = write_trajectory(dir.path(), &traj).unwrap();
        let back = read_trajectory(&file).unwrap();
        assert_eq!(traj, back);
        assert_eq!(list_trajectories(dir.path()).unwrap(), vec![file]);
    }
}
