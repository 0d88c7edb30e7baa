//! Principal-direction extraction, shape grids and the E3 projection, plus
//! the CSV/JSON exports of a fitted sub-manifold.
//!
//! PD3 and PD4 are the diagonal diameters of the seed ring. They are not the
//! third and fourth principal components.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fitting::Submanifold;
use crate::geometry::{self, Point};
use crate::shape::{self, LandmarkConfig};
use crate::stats::{self, EigenFrame, KernelSpec};

/// Where a polyline vertex came from; the start point is `(0, 0)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetTag {
    pub net_index: usize,
    pub level: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrincipalDirection {
    /// 1 to 4.
    pub number: usize,
    /// Net indices `(first, second)`; the first net is traversed in reverse.
    pub nets: (usize, usize),
    pub points: Vec<Point>,
    pub tags: Vec<NetTag>,
}

impl PrincipalDirection {
    pub fn label(&self) -> String {
        format!("pd{}", self.number)
    }

    /// Position of the start point in `points`.
    pub fn join(&self) -> usize {
        self.tags.iter().position(|t| t.net_index == 0).unwrap_or(0)
    }
}

/// Net index pairs of PD1..PD4 for `d` directions of a k-dimensional fit.
///
/// PD3/PD4 need `d % 8 == 0` and are omitted otherwise. A curve fit has only
/// PD1, made of its two nets; fits with k >= 3 have no circle of seeds.
pub fn direction_pairs(k: usize, d: usize) -> Vec<(usize, usize)> {
    match k {
        1 => vec![(2, 1)],
        2 => {
            let mut pairs = vec![(d / 2, d), (d / 4, 3 * d / 4)];
            if d.is_multiple_of(8) {
                pairs.push((d / 8, 5 * d / 8));
                pairs.push((3 * d / 8, 7 * d / 8));
            }
            pairs
        }
        _ => Vec::new(),
    }
}

pub fn principal_directions(sub: &Submanifold) -> Vec<PrincipalDirection> {
    direction_pairs(sub.dim(), sub.nets.len())
        .into_iter()
        .enumerate()
        .filter_map(|(i, (a, b))| {
            let first = sub.net(a)?;
            let second = sub.net(b)?;
            let mut points = Vec::with_capacity(first.points.len() + second.points.len() - 1);
            let mut tags = Vec::with_capacity(points.capacity());
            for level in (1..first.points.len()).rev() {
                points.push(first.points[level].clone());
                tags.push(NetTag { net_index: a, level });
            }
            points.push(sub.start.clone());
            tags.push(NetTag { net_index: 0, level: 0 });
            for level in 1..second.points.len() {
                points.push(second.points[level].clone());
                tags.push(NetTag { net_index: b, level });
            }
            Some(PrincipalDirection {
                number: i + 1,
                nets: (a, b),
                points,
                tags,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProjectedSubmanifold {
    /// Top three eigenvectors at the start point.
    pub basis: EigenFrame,
    /// `nets[l - 1][i]` is the projection of `A_{l,i}`.
    pub nets: Vec<Vec<[f64; 3]>>,
    pub data: Vec<[f64; 3]>,
}

impl ProjectedSubmanifold {
    /// `E3^T (p - A)`.
    pub fn project(&self, p: &Point) -> [f64; 3] {
        project_with(&self.basis, p)
    }
}

fn project_with(basis: &EigenFrame, p: &Point) -> [f64; 3] {
    let d = p.coords() - basis.base().coords();
    [basis.vector(0).dot(&d), basis.vector(1).dot(&d), basis.vector(2).dot(&d)]
}

pub fn project_submanifold(
    sub: &Submanifold,
    data: &[Point],
    kernel: &KernelSpec,
) -> Result<ProjectedSubmanifold> {
    let sigma = stats::local_covariance(&sub.start, data, kernel)?;
    let basis = stats::eigenframe(&sigma, &sub.start, 3)?;
    let nets = sub
        .nets
        .iter()
        .map(|n| n.points.iter().map(|p| project_with(&basis, p)).collect())
        .collect();
    let data = data.iter().map(|p| project_with(&basis, p)).collect();
    Ok(ProjectedSubmanifold { basis, nets, data })
}

/// Square grid of recovered shapes; `cells[row][col]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ShapeGrid {
    pub k: usize,
    pub side: usize,
    pub cells: Vec<Vec<Option<LandmarkConfig>>>,
}

impl ShapeGrid {
    pub fn center(&self) -> &LandmarkConfig {
        let c = self.side / 2;
        self.cells[c][c].as_ref().expect("center cell is always filled")
    }
}

/// Indices into `points` nearest to the arc lengths `j L / m`, j = 1..m,
/// along the polyline starting at `points[0]`.
fn resample(points: &[&Point], m: usize) -> Vec<usize> {
    let mut cum = vec![0.0];
    for w in points.windows(2) {
        cum.push(cum.last().unwrap() + geometry::distance_raw(w[0], w[1]));
    }
    let total = *cum.last().unwrap();
    (1..=m)
        .map(|j| {
            let target = j as f64 * total / m as f64;
            let mut best = 0;
            for (i, c) in cum.iter().enumerate() {
                if (c - target).abs() < (cum[best] - target).abs() {
                    best = i;
                }
            }
            best
        })
        .collect()
}

/// Lays out shapes along the principal directions of a preshape fit.
///
/// With `c` the center index: row `c` holds PD1 and column `c` holds PD2,
/// each with the first (reversed) net toward lower indices. The main diagonal
/// holds PD3 with its first net toward the top-left; the anti-diagonal holds
/// PD4 with its first net toward the top-right. Other cells are empty.
pub fn shape_grid(sub: &Submanifold, samples_per_direction: usize) -> Result<ShapeGrid> {
    if samples_per_direction.is_multiple_of(2) {
        return Err(Error::Invalid(format!(
            "samples_per_direction must be odd, got {samples_per_direction}"
        )));
    }
    let dim = sub.start.ambient_dim();
    if !dim.is_multiple_of(2) || dim < 6 {
        return Err(Error::NotAShapeFit(format!(
            "{dim} coordinates do not describe planar landmarks"
        )));
    }
    let k = dim / 2;
    let to_shape = |p: &Point| {
        shape::from_preshape(p, k).map_err(|e| Error::NotAShapeFit(e.to_string()))
    };
    let side = samples_per_direction;
    let c = side / 2;
    let mut cells: Vec<Vec<Option<LandmarkConfig>>> = vec![vec![None; side]; side];
    cells[c][c] = Some(to_shape(&sub.start)?);

    for pd in principal_directions(sub) {
        let join = pd.join();
        let first: Vec<&Point> = pd.points[..=join].iter().rev().collect();
        let second: Vec<&Point> = pd.points[join..].iter().collect();
        for (half, sign) in [(first, -1isize), (second, 1)] {
            for (j, idx) in resample(&half, c).into_iter().enumerate() {
                let off = (j + 1) as isize * sign;
                let (r, col) = match pd.number {
                    1 => (0, off),
                    2 => (off, 0),
                    3 => (off, off),
                    _ => (off, -off),
                };
                let r = (c as isize + r) as usize;
                let col = (c as isize + col) as usize;
                cells[r][col] = Some(to_shape(half[idx])?);
            }
        }
    }
    Ok(ShapeGrid { k, side, cells })
}

/// Great circle through the start along `e_i(A)` (1-based `i`), sampled at
/// the levels of the matching principal direction.
///
/// The returned points pair one-to-one with `pd.points`: the vertex tagged
/// `(l, j)` on the first net maps to `exp_A(-j eps e_i)`, on the second net
/// to `exp_A(+j eps e_i)`.
pub fn geodesic_baseline(sub: &Submanifold, pd: &PrincipalDirection, i: usize) -> Result<Vec<Point>> {
    if i == 0 || i > sub.frame_at_start.len() {
        return Err(Error::Invalid(format!(
            "no eigenvector {i} in a frame of {}",
            sub.frame_at_start.len()
        )));
    }
    let eps = sub.config.epsilon;
    let e = sub.frame_at_start.vector(i - 1);
    let join = pd.join();
    let half = |n: usize, dir: DVector<f64>| -> Result<Vec<Point>> {
        if n == 0 {
            return Ok(vec![sub.start.clone()]);
        }
        let t = geometry::Tangent::new(sub.start.clone(), dir)?;
        geometry::sample_geodesic(&sub.start, &t, n as f64 * eps, n + 1)
    };
    let mut back = half(join, -e.clone())?;
    back.reverse();
    let fwd = half(pd.points.len() - 1 - join, e.clone())?;
    back.extend(fwd.into_iter().skip(1));
    Ok(back)
}

/// Largest pointwise distance between two matched polylines.
pub fn max_deviation(a: &[Point], b: &[Point]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    a.iter()
        .zip(b)
        .map(|(p, q)| geometry::geodesic_distance(p, q))
        .try_fold(0.0f64, |m, d| Ok(m.max(d?)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RowKind {
    Net,
    Data,
    Pd1,
    Pd2,
    Pd3,
    Pd4,
    Geodesic,
}

impl RowKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            RowKind::Net => "net",
            RowKind::Data => "data",
            RowKind::Pd1 => "pd1",
            RowKind::Pd2 => "pd2",
            RowKind::Pd3 => "pd3",
            RowKind::Pd4 => "pd4",
            RowKind::Geodesic => "geodesic",
        }
    }

    fn pd(number: usize) -> RowKind {
        match number {
            1 => RowKind::Pd1,
            2 => RowKind::Pd2,
            3 => RowKind::Pd3,
            _ => RowKind::Pd4,
        }
    }
}

impl std::str::FromStr for RowKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "net" => RowKind::Net,
            "data" => RowKind::Data,
            "pd1" => RowKind::Pd1,
            "pd2" => RowKind::Pd2,
            "pd3" => RowKind::Pd3,
            "pd4" => RowKind::Pd4,
            "geodesic" => RowKind::Geodesic,
            other => return Err(Error::Invalid(format!("unknown row kind `{other}`"))),
        })
    }
}

/// One line of `projected.csv`. Data rows use the point index as `level`
/// and `net_index = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectedRow {
    pub kind: RowKind,
    pub net_index: usize,
    pub level: usize,
    pub p: [f64; 3],
}

/// Rows for nets, data and principal directions. Geodesic rows are added by
/// [`geodesic_rows`].
pub fn projected_rows(proj: &ProjectedSubmanifold, pds: &[PrincipalDirection]) -> Vec<ProjectedRow> {
    let mut rows = Vec::new();
    for (l, net) in proj.nets.iter().enumerate() {
        for (level, p) in net.iter().enumerate() {
            rows.push(ProjectedRow {
                kind: RowKind::Net,
                net_index: l + 1,
                level,
                p: *p,
            });
        }
    }
    for (i, p) in proj.data.iter().enumerate() {
        rows.push(ProjectedRow {
            kind: RowKind::Data,
            net_index: 0,
            level: i,
            p: *p,
        });
    }
    for pd in pds {
        for (t, point) in pd.tags.iter().zip(&pd.points) {
            rows.push(ProjectedRow {
                kind: RowKind::pd(pd.number),
                net_index: t.net_index,
                level: t.level,
                p: proj.project(point),
            });
        }
    }
    rows
}

/// Geodesic rows tagged like the principal-direction vertices they pair with.
pub fn geodesic_rows(proj: &ProjectedSubmanifold, pd: &PrincipalDirection, geodesic: &[Point]) -> Vec<ProjectedRow> {
    pd.tags
        .iter()
        .zip(geodesic)
        .map(|(t, p)| ProjectedRow {
            kind: RowKind::Geodesic,
            net_index: t.net_index,
            level: t.level,
            p: proj.project(p),
        })
        .collect()
}

fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

/// `net_index,level,c0,...`: every net point, start included at level 0.
pub fn write_submanifold_csv(path: &Path, sub: &Submanifold) -> Result<()> {
    let mut w = create(path)?;
    let io = |e| Error::io(path, e);
    let mut header = String::from("net_index,level");
    for j in 0..sub.start.ambient_dim() {
        header.push_str(&format!(",c{j}"));
    }
    writeln!(w, "{header}").map_err(io)?;
    for net in &sub.nets {
        for (level, p) in net.points.iter().enumerate() {
            let mut line = format!("{},{}", net.direction_index, level);
            for x in p.coords().iter() {
                line.push(',');
                line.push_str(&fmt_f64(*x));
            }
            writeln!(w, "{line}").map_err(io)?;
        }
    }
    w.flush().map_err(io)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubmanifoldRow {
    pub net_index: usize,
    pub level: usize,
    pub coords: Vec<f64>,
}

fn csv_reader(path: &Path) -> Result<csv::Reader<File>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::ReaderBuilder::new().has_headers(true).from_reader(file))
}

fn field<T: std::str::FromStr>(path: &Path, rec: &csv::StringRecord, i: usize) -> Result<T> {
    let line = rec.position().map_or(0, |p| p.line() as usize);
    let raw = rec
        .get(i)
        .ok_or_else(|| Error::parse(path, line, format!("missing column {i}")))?;
    raw.trim()
        .parse()
        .map_err(|_| Error::parse(path, line, format!("cannot parse `{raw}`")))
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    Error::parse(path, line, e.to_string())
}

pub fn read_submanifold_csv(path: &Path) -> Result<Vec<SubmanifoldRow>> {
    let mut rdr = csv_reader(path)?;
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let coords = (2..rec.len()).map(|i| field(path, &rec, i)).collect::<Result<_>>()?;
        rows.push(SubmanifoldRow {
            net_index: field(path, &rec, 0)?,
            level: field(path, &rec, 1)?,
            coords,
        });
    }
    Ok(rows)
}

pub fn write_projected_csv(path: &Path, rows: &[ProjectedRow]) -> Result<()> {
    let mut w = create(path)?;
    let io = |e| Error::io(path, e);
    writeln!(w, "kind,net_index,level,p1,p2,p3").map_err(io)?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            r.kind.as_str(),
            r.net_index,
            r.level,
            fmt_f64(r.p[0]),
            fmt_f64(r.p[1]),
            fmt_f64(r.p[2])
        )
        .map_err(io)?;
    }
    w.flush().map_err(io)
}

pub fn read_projected_csv(path: &Path) -> Result<Vec<ProjectedRow>> {
    let mut rdr = csv_reader(path)?;
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        rows.push(ProjectedRow {
            kind: field(path, &rec, 0)?,
            net_index: field(path, &rec, 1)?,
            level: field(path, &rec, 2)?,
            p: [field(path, &rec, 3)?, field(path, &rec, 4)?, field(path, &rec, 5)?],
        });
    }
    Ok(rows)
}

/// Serialized form of a [`ShapeGrid`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapesFile {
    pub k: usize,
    pub samples_per_direction: usize,
    pub start_kind: String,
    pub note: String,
    /// `grid[row][col]`, `null` for empty cells.
    pub grid: Vec<Vec<Option<Vec<[f64; 2]>>>>,
}

impl ShapesFile {
    pub fn from_grid(grid: &ShapeGrid, start_kind: &str) -> Self {
        ShapesFile {
            k: grid.k,
            samples_per_direction: grid.side,
            start_kind: start_kind.to_string(),
            note: "row center: pd1, column center: pd2, main diagonal: pd3, anti-diagonal: pd4; \
                   pd3 and pd4 are diagonal seed directions, not principal components"
                .to_string(),
            grid: grid
                .cells
                .iter()
                .map(|row| row.iter().map(|c| c.as_ref().map(|s| s.landmarks().to_vec())).collect())
                .collect(),
        }
    }
}

pub fn write_shapes_json(path: &Path, file: &ShapesFile) -> Result<()> {
    let mut w = create(path)?;
    let io = |e| Error::io(path, e);
    serde_json::to_writer_pretty(&mut w, file).map_err(|e| Error::io(path, e.into()))?;
    writeln!(w).map_err(io)?;
    w.flush().map_err(io)
}

pub fn read_shapes_json(path: &Path) -> Result<ShapesFile> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::parse(path, e.line(), e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fitting::{FitConfig, Net, StopReason};
    use crate::geometry::Chart;

    fn flat(c: &[f64]) -> Point {
        Point::from_slice(Chart::Flat, c).unwrap()
    }

    /// Straight nets in the flat plane, `levels` steps each.
    fn toy_sub(d: usize, levels: usize) -> Submanifold {
        let start = flat(&[0.0, 0.0, 0.0]);
        let frame = EigenFrame::from_parts(
            start.clone(),
            vec![
                DVector::from_column_slice(&[1.0, 0.0, 0.0]),
                DVector::from_column_slice(&[0.0, 1.0, 0.0]),
            ],
            vec![2.0, 1.0],
        )
        .unwrap();
        let cfg = FitConfig {
            num_directions: d,
            ..FitConfig::default()
        };
        let nets = (1..=d)
            .map(|l| {
                let th = 2.0 * std::f64::consts::PI * l as f64 / d as f64;
                let points = (0..=levels)
                    .map(|i| {
                        let r = i as f64 * cfg.epsilon;
                        flat(&[r * th.cos(), r * th.sin(), 0.0])
                    })
                    .collect();
                Net {
                    direction_index: l,
                    direction: vec![th.cos(), th.sin()],
                    points,
                    stop_reason: StopReason::LengthExceeded,
                }
            })
            .collect();
        Submanifold {
            start,
            nets,
            frame_at_start: frame,
            config: cfg,
        }
    }

    #[test]
    fn pairs_for_180() {
        assert_eq!(
            direction_pairs(2, 180),
            vec![(90, 180), (45, 135)],
            "180 is not divisible by 8"
        );
        assert_eq!(direction_pairs(2, 16), vec![(8, 16), (4, 12), (2, 10), (6, 14)]);
        assert_eq!(direction_pairs(1, 2), vec![(2, 1)]);
        assert!(direction_pairs(3, 40).is_empty());
    }

    #[test]
    fn pd_polylines_pass_through_start_once() {
        let sub = toy_sub(16, 5);
        let pds = principal_directions(&sub);
        assert_eq!(pds.len(), 4);
        for pd in &pds {
            assert_eq!(pd.points.len(), 11);
            assert_eq!(pd.tags.iter().filter(|t| t.net_index == 0).count(), 1);
            assert_eq!(pd.join(), 5);
            assert_eq!(pd.points[5], sub.start);
        }
        // PD1 runs from -e1 to +e1
        let pd1 = &pds[0];
        assert!((pd1.points[0].coords()[0] + 0.1).abs() < 1e-12);
        assert!((pd1.points[10].coords()[0] - 0.1).abs() < 1e-12);
    }

    #[test]
    fn geodesic_baseline_matches_flat_pd1() {
        let sub = toy_sub(8, 4);
        let pd1 = &principal_directions(&sub)[0];
        let g = geodesic_baseline(&sub, pd1, 1).unwrap();
        assert!(max_deviation(&pd1.points, &g).unwrap() < 1e-12);
    }

    #[test]
    fn resample_picks_even_arcs() {
        let pts: Vec<Point> = (0..=10).map(|i| flat(&[i as f64, 0.0])).collect();
        let refs: Vec<&Point> = pts.iter().collect();
        assert_eq!(resample(&refs, 5), vec![2, 4, 6, 8, 10]);
        assert_eq!(resample(&refs[..1], 2), vec![0, 0]);
    }

    #[test]
    fn row_kind_round_trip() {
        for k in [
            RowKind::Net,
            RowKind::Data,
            RowKind::Pd1,
            RowKind::Pd2,
            RowKind::Pd3,
            RowKind::Pd4,
            RowKind::Geodesic,
        ] {
            assert_eq!(k.as_str().parse::<RowKind>().unwrap(), k);
        }
    }
}
