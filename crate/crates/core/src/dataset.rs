//! Point datasets on disk: `point_index,c0,c1,...` plus a JSON sidecar.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::datagen::{Dataset, GenSpec, GENERATOR_ID};
use crate::error::{Error, Result};
use crate::geometry::{self, Chart, Point};

/// Sphere rows further than this from unit norm are rejected. Rows off by
/// more than the point tolerance but within this one are renormalized.
pub const LOAD_NORM_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetKind {
    Generated,
    Preshape,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub kind: DatasetKind,
    pub chart: Chart,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spec: Option<GenSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lift_constant: Option<f64>,
    /// Number of landmarks for preshape data.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub landmarks: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub specimen_ids: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alignment_mean: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alignment_iterations: Option<usize>,
}

impl DatasetMeta {
    pub fn generated(d: &Dataset) -> Self {
        DatasetMeta {
            kind: DatasetKind::Generated,
            chart: Chart::Sphere,
            generator: Some(GENERATOR_ID.to_string()),
            spec: Some(d.spec.clone()),
            lift_constant: Some(d.lift_constant),
            landmarks: None,
            specimen_ids: None,
            alignment_mean: None,
            alignment_iterations: None,
        }
    }

    pub fn preshape(k: usize, ids: Vec<String>, mean: &Point, iterations: usize) -> Self {
        DatasetMeta {
            kind: DatasetKind::Preshape,
            chart: Chart::Sphere,
            generator: None,
            spec: None,
            lift_constant: None,
            landmarks: Some(k),
            specimen_ids: Some(ids),
            alignment_mean: Some(mean.coords().iter().copied().collect()),
            alignment_iterations: Some(iterations),
        }
    }
}

/// `data.csv` -> `data.meta.json`.
pub fn sidecar_path(path: &Path) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}.meta.json"))
}

pub fn write_points_csv(path: &Path, points: &[Point]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    let dim = points.first().map_or(0, Point::ambient_dim);
    let mut header = String::from("point_index");
    for j in 0..dim {
        header.push_str(&format!(",c{j}"));
    }
    writeln!(w, "{header}").map_err(io)?;
    for (i, p) in points.iter().enumerate() {
        let mut line = i.to_string();
        for x in p.coords().iter() {
            line.push_str(&format!(",{x:.16e}"));
        }
        writeln!(w, "{line}").map_err(io)?;
    }
    w.flush().map_err(io)
}

pub fn read_points_csv(path: &Path, chart: Chart) -> Result<Vec<Point>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(file);
    let mut points = Vec::new();
    let mut dim = None;
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            Error::parse(path, line, e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let values = rec
            .iter()
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::parse(path, line, e.to_string()))?;
        if values.len() < 2 {
            return Err(Error::parse(path, line, "row has no coordinates"));
        }
        if values[0] != points.len() as f64 {
            return Err(Error::parse(
                path,
                line,
                format!("expected point_index {}, got {}", points.len(), values[0]),
            ));
        }
        let coords = &values[1..];
        if *dim.get_or_insert(coords.len()) != coords.len() {
            return Err(Error::parse(path, line, "inconsistent number of coordinates"));
        }
        let v = nalgebra::DVector::from_column_slice(coords);
        let p = match chart {
            Chart::Flat => Point::flat(v),
            Chart::Sphere => {
                let n = v.norm();
                if (n - 1.0).abs() > LOAD_NORM_TOL {
                    return Err(Error::parse(path, line, format!("norm {n} is not 1")));
                }
                // exact values written by this crate load back unchanged
                Point::sphere(v.clone()).or_else(|_| geometry::project_to_sphere(&v))
            }
        }
        .map_err(|e| Error::parse(path, line, e.to_string()))?;
        points.push(p);
    }
    Ok(points)
}

pub fn write_meta(path: &Path, meta: &DatasetMeta) -> Result<()> {
    let mut text = serde_json::to_string_pretty(meta).map_err(|e| Error::io(path, e.into()))?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_meta(path: &Path) -> Result<DatasetMeta> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::parse(path, e.line(), e.to_string()))
}

/// Writes the points and their sidecar.
pub fn write_dataset(path: &Path, points: &[Point], meta: &DatasetMeta) -> Result<()> {
    write_points_csv(path, points)?;
    write_meta(&sidecar_path(path), meta)
}

/// Reads points using the sidecar's chart when present, else `default_chart`.
pub fn read_dataset(path: &Path, default_chart: Chart) -> Result<(Vec<Point>, Option<DatasetMeta>)> {
    let side = sidecar_path(path);
    let meta = if side.exists() { Some(read_meta(&side)?) } else { None };
    let chart = meta.as_ref().map_or(default_chart, |m| m.chart);
    Ok((read_points_csv(path, chart)?, meta))
}
