//! CSV and JSON output. Every CSV starts with `# eikograph <version> <hash>`.
//!
//! Floats are written in Rust's shortest round-trip form, so identical
//! inputs give identical bytes.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::harness::ConvergenceTable;
use crate::manifold::{Density, ManifoldSpec, PointCloud};
use crate::reference::ErrorRecord;
use crate::solver::Field;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Column order of `errors.csv`.
pub const ERROR_COLUMNS: &str = "n,epsilon,dt,sup_error,boundary_hausdorff,runtime_seconds,seed";

pub fn header_line(config_hash: &str) -> String {
    format!("# eikograph {VERSION} {config_hash}")
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir)?;
        }
    }
    Ok(BufWriter::new(File::create(path)?))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    let mut w = create(path)?;
    w.write_all(text.as_bytes())?;
    w.flush()?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_text(path, &text)
}

/// Metadata written next to a point-cloud CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CloudMetadata {
    pub spec: ManifoldSpec,
    pub n: usize,
    pub seed: u64,
    pub density: Density,
    pub acceptance_rate: f64,
}

impl CloudMetadata {
    pub fn of(cloud: &PointCloud) -> Self {
        CloudMetadata {
            spec: cloud.spec.clone(),
            n: cloud.len(),
            seed: cloud.seed,
            density: cloud.density,
            acceptance_rate: cloud.acceptance_rate,
        }
    }
}

/// Writes `x0,...,x{m-1}` rows to `path` and the metadata sidecar to
/// `path` with a `.json` extension.
pub fn write_points(path: &Path, cloud: &PointCloud, header: &str) -> Result<()> {
    let mut w = create(path)?;
    writeln!(w, "{header}")?;
    let cols: Vec<String> = (0..cloud.dim).map(|k| format!("x{k}")).collect();
    writeln!(w, "{}", cols.join(","))?;
    for p in cloud.points() {
        writeln!(w, "{}", join(p))?;
    }
    w.flush()?;
    write_json(&path.with_extension("json"), &CloudMetadata::of(cloud))
}

/// Reads a cloud written by [`write_points`], checking every row against
/// the manifold in the sidecar.
pub fn read_points(path: &Path) -> Result<PointCloud> {
    let meta_text = std::fs::read_to_string(path.with_extension("json"))?;
    let meta: CloudMetadata = serde_json::from_str(&meta_text)?;
    let reader = BufReader::new(File::open(path)?);
    let mut coords = Vec::new();
    let mut saw_header = false;
    for line in reader.lines() {
        let line = line?;
        if line.starts_with('#') || line.trim().is_empty() {
            continue;
        }
        if !saw_header {
            saw_header = true;
            continue;
        }
        for field in line.split(',') {
            coords.push(
                field.trim().parse::<f64>().map_err(|e| Error::Config(format!("bad coordinate `{field}`: {e}")))?,
            );
        }
    }
    let mut cloud = PointCloud::from_coords(meta.spec, coords)?;
    if cloud.len() != meta.n {
        return Err(Error::Config(format!("sidecar lists {} points, file has {}", meta.n, cloud.len())));
    }
    cloud.seed = meta.seed;
    cloud.density = meta.density;
    cloud.acceptance_rate = meta.acceptance_rate;
    Ok(cloud)
}

fn join(values: &[f64]) -> String {
    values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
}

/// Writes `edges.csv` (each unordered pair once, `i < j`, sorted) and
/// `vertices.csv` into `dir`.
pub fn write_graph(dir: &Path, graph: &Graph, header: &str) -> Result<()> {
    let mut w = create(&dir.join("edges.csv"))?;
    writeln!(w, "{header}")?;
    writeln!(w, "i,j,dtilde,weight")?;
    for i in 0..graph.len() {
        let (targets, dtilde, weights) = graph.row(i);
        for k in 0..targets.len() {
            let j = targets[k] as usize;
            if j > i {
                writeln!(w, "{i},{j},{},{}", dtilde[k], weights[k])?;
            }
        }
    }
    w.flush()?;

    let cloud = graph.cloud();
    let mut w = create(&dir.join("vertices.csv"))?;
    writeln!(w, "{header}")?;
    let cols: Vec<String> = (0..cloud.dim).map(|k| format!("x{k}")).collect();
    writeln!(w, "index,boundary_flag,{}", cols.join(","))?;
    for (i, b) in graph.boundary_mask().iter().enumerate() {
        writeln!(w, "{i},{},{}", u8::from(*b), join(cloud.point(i)))?;
    }
    w.flush()?;
    Ok(())
}

/// `t,vertex_index,value` rows for every snapshot.
pub fn write_solution(path: &Path, trajectory: &[Field], header: &str) -> Result<()> {
    let mut w = create(path)?;
    writeln!(w, "{header}")?;
    writeln!(w, "t,vertex_index,value")?;
    for f in trajectory {
        for (i, v) in f.values.iter().enumerate() {
            writeln!(w, "{},{i},{v}", f.time)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Error records in [`ERROR_COLUMNS`] order; `runtime_seconds` is empty
/// when not recorded.
pub fn write_errors<'a>(path: &Path, records: impl IntoIterator<Item = &'a ErrorRecord>, header: &str) -> Result<()> {
    let mut w = create(path)?;
    writeln!(w, "{header}")?;
    writeln!(w, "{ERROR_COLUMNS}")?;
    for r in records {
        let runtime = r.runtime_seconds.map_or(String::new(), |s| s.to_string());
        writeln!(w, "{},{},{},{},{},{runtime},{}", r.n, r.epsilon, r.dt, r.sup_error, r.boundary_hausdorff, r.seed)?;
    }
    w.flush()?;
    Ok(())
}

/// One row per trial, failed trials included with their reason.
pub fn write_convergence_csv(path: &Path, table: &ConvergenceTable, header: &str) -> Result<()> {
    let mut w = create(path)?;
    writeln!(w, "{header}")?;
    writeln!(w, "n,seed,epsilon,dt,sup_error,boundary_hausdorff,status")?;
    for g in &table.groups {
        let mut rows: Vec<(u64, String)> = g
            .records
            .iter()
            .map(|r| (r.seed, format!("{},{},{},{},{},{},ok", r.n, r.seed, r.epsilon, r.dt, r.sup_error, r.boundary_hausdorff)))
            .collect();
        rows.extend(g.failures.iter().map(|f| {
            let reason = f.reason.replace([',', '\n'], ";");
            (f.seed, format!("{},{},{},{},,,failed: {reason}", f.n, f.seed, g.epsilon, g.dt))
        }));
        rows.sort_by_key(|r| r.0);
        for (_, row) in rows {
            writeln!(w, "{row}")?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Wall times per trial; separate from `errors.csv` so that file stays
/// reproducible.
pub fn write_timings(path: &Path, table: &ConvergenceTable, header: &str) -> Result<()> {
    let mut w = create(path)?;
    writeln!(w, "{header}")?;
    writeln!(w, "n,seed,directed_edges,seconds")?;
    for t in &table.timings {
        writeln!(w, "{},{},{},{}", t.n, t.seed, t.directed_edges, t.seconds)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::build_graph;
    use crate::kernel::{kernel_constants, make_kernel, DEFAULT_GRID_STEP};
    use crate::manifold::sample_points;

    #[test]
    fn points_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let cloud = sample_points(&ManifoldSpec::unit_sphere(), 64, Density::Uniform, 5).unwrap();
        let path = dir.path().join("points.csv");
        write_points(&path, &cloud, &header_line("abc")).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("# eikograph "));
        assert_eq!(text.lines().nth(1), Some("x0,x1,x2"));
        assert_eq!(read_points(&path).unwrap(), cloud);
    }

    #[test]
    fn graph_csv_lists_each_pair_once() {
        let dir = tempfile::tempdir().unwrap();
        let k = make_kernel("triangular", &[], None).unwrap();
        let c = kernel_constants(&k, DEFAULT_GRID_STEP).unwrap();
        let cloud = sample_points(&ManifoldSpec::unit_sphere(), 100, Density::Uniform, 1).unwrap();
        let g = build_graph(cloud, &k, &c, 0.5).unwrap();
        write_graph(dir.path(), &g, "# h").unwrap();
        let edges = std::fs::read_to_string(dir.path().join("edges.csv")).unwrap();
        let pairs: Vec<(usize, usize)> = edges
            .lines()
            .skip(2)
            .map(|l| {
                let mut it = l.split(',');
                (it.next().unwrap().parse().unwrap(), it.next().unwrap().parse().unwrap())
            })
            .collect();
        assert_eq!(2 * pairs.len(), g.directed_edge_count());
        assert!(pairs.windows(2).all(|w| w[0] < w[1]));
        assert!(pairs.iter().all(|(i, j)| i < j));
        let vertices = std::fs::read_to_string(dir.path().join("vertices.csv")).unwrap();
        assert_eq!(vertices.lines().count(), 102);
    }

    #[test]
    fn errors_csv_layout() {
        let dir = tempfile::tempdir().unwrap();
        let rec = ErrorRecord {
            n: 10,
            epsilon: 0.5,
            dt: 0.25,
            sup_error: 0.125,
            boundary_hausdorff: 0.0,
            runtime_seconds: None,
            seed: 3,
        };
        let path = dir.path().join("errors.csv");
        write_errors(&path, [&rec], "# h").unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), format!("# h\n{ERROR_COLUMNS}\n10,0.5,0.25,0.125,0,,3\n"));
    }
}
