//! Planar landmark configurations and their preshapes on S^(2k-3).
//!
//! A configuration of k landmarks is centered, scaled to unit norm and
//! flattened as `(x1, y1, x2, y2, ...)`. Rotations act on the flattened
//! vector as multiplication of each `x + iy` by a unit complex number.

use std::path::Path;

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::geometry::{self, Chart, Point};
use crate::stats;

const CENTER_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct LandmarkConfig {
    pub specimen_id: String,
    landmarks: Vec<[f64; 2]>,
}

impl LandmarkConfig {
    pub fn new(specimen_id: impl Into<String>, landmarks: Vec<[f64; 2]>) -> Result<Self> {
        if landmarks.len() < 3 {
            return Err(Error::Invalid(format!(
                "a configuration needs at least 3 landmarks, got {}",
                landmarks.len()
            )));
        }
        if landmarks.iter().flatten().any(|c| !c.is_finite()) {
            return Err(Error::Invalid("non-finite landmark coordinate".into()));
        }
        Ok(LandmarkConfig {
            specimen_id: specimen_id.into(),
            landmarks,
        })
    }

    pub fn landmarks(&self) -> &[[f64; 2]] {
        &self.landmarks
    }

    pub fn k(&self) -> usize {
        self.landmarks.len()
    }

    /// Applies `x -> scale * R(angle) x + shift` to every landmark.
    pub fn similarity(&self, scale: f64, angle: f64, shift: [f64; 2]) -> LandmarkConfig {
        let (s, c) = angle.sin_cos();
        let landmarks = self
            .landmarks
            .iter()
            .map(|[x, y]| {
                [
                    scale * (c * x - s * y) + shift[0],
                    scale * (s * x + c * y) + shift[1],
                ]
            })
            .collect();
        LandmarkConfig {
            specimen_id: self.specimen_id.clone(),
            landmarks,
        }
    }
}

/// A centered, unit-norm, flattened configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct Preshape {
    point: Point,
}

impl Preshape {
    pub fn from_point(point: Point) -> Result<Self> {
        check_preshape_point(&point)?;
        Ok(Preshape { point })
    }

    pub fn point(&self) -> &Point {
        &self.point
    }

    pub fn into_point(self) -> Point {
        self.point
    }

    pub fn k(&self) -> usize {
        self.point.ambient_dim() / 2
    }
}

fn centroid_offset(v: &DVector<f64>) -> f64 {
    let (mut sx, mut sy) = (0.0, 0.0);
    for pair in v.as_slice().chunks_exact(2) {
        sx += pair[0];
        sy += pair[1];
    }
    sx.hypot(sy)
}

fn check_preshape_point(p: &Point) -> Result<()> {
    if p.chart() != Chart::Sphere {
        return Err(Error::ChartMismatch);
    }
    if !p.ambient_dim().is_multiple_of(2) || p.ambient_dim() < 6 {
        return Err(Error::Invalid(format!(
            "preshape needs an even number (>= 6) of coordinates, got {}",
            p.ambient_dim()
        )));
    }
    let off = centroid_offset(p.coords());
    if off > CENTER_TOL {
        return Err(Error::NotCentered(off));
    }
    Ok(())
}

pub fn to_preshape(c: &LandmarkConfig) -> Result<Preshape> {
    let k = c.k() as f64;
    let (mx, my) = c
        .landmarks
        .iter()
        .fold((0.0, 0.0), |(sx, sy), [x, y]| (sx + x, sy + y));
    let (mx, my) = (mx / k, my / k);
    let v = DVector::from_iterator(
        2 * c.k(),
        c.landmarks.iter().flat_map(|[x, y]| [x - mx, y - my]),
    );
    if v.norm() < 1e-12 {
        return Err(Error::DegenerateConfig);
    }
    let point = geometry::project_to_sphere(&v)?;
    Ok(Preshape { point })
}

/// `sum_j conj(b_j) p_j` over landmarks viewed as complex numbers.
fn complex_inner(base: &DVector<f64>, p: &DVector<f64>) -> (f64, f64) {
    base.as_slice()
        .chunks_exact(2)
        .zip(p.as_slice().chunks_exact(2))
        .fold((0.0, 0.0), |(re, im), (b, q)| {
            (re + b[0] * q[0] + b[1] * q[1], im + b[0] * q[1] - b[1] * q[0])
        })
}

fn rotate(v: &DVector<f64>, cos: f64, sin: f64) -> DVector<f64> {
    let mut out = v.clone();
    for pair in out.as_mut_slice().chunks_exact_mut(2) {
        let (x, y) = (pair[0], pair[1]);
        pair[0] = cos * x - sin * y;
        pair[1] = sin * x + cos * y;
    }
    out
}

/// Rotates `p` in the plane to minimize its geodesic distance to `base`.
pub fn align_rotation(p: &Preshape, base: &Preshape) -> Result<Preshape> {
    if p.point.ambient_dim() != base.point.ambient_dim() {
        return Err(Error::DimensionMismatch {
            expected: base.point.ambient_dim(),
            got: p.point.ambient_dim(),
        });
    }
    let v = align_raw(p.point.coords(), base.point.coords())?;
    Ok(Preshape {
        point: Point::new_unchecked(v, Chart::Sphere),
    })
}

fn align_raw(p: &DVector<f64>, base: &DVector<f64>) -> Result<DVector<f64>> {
    let (re, im) = complex_inner(base, p);
    let modulus = re.hypot(im);
    if modulus < 1e-14 {
        return Err(Error::DegenerateOrbit(modulus));
    }
    // Re(e^{i t} z) is maximal at t = -arg z.
    Ok(rotate(p, re / modulus, -im / modulus))
}

/// Result of generalized Procrustes alignment on the preshape sphere.
#[derive(Debug, Clone)]
pub struct AlignedDataset {
    pub points: Vec<Point>,
    pub mean: Point,
    pub iterations: usize,
}

/// Aligns every configuration to the evolving Fréchet mean of the aligned
/// preshapes until the mean moves less than `1e-9`.
pub fn align_dataset(configs: &[LandmarkConfig]) -> Result<AlignedDataset> {
    const MAX_ITER: usize = 100;
    const MEAN_TOL: f64 = 1e-9;
    if configs.len() < 2 {
        return Err(Error::Invalid(format!(
            "alignment needs at least 2 configurations, got {}",
            configs.len()
        )));
    }
    let k = configs[0].k();
    if let Some(c) = configs.iter().find(|c| c.k() != k) {
        return Err(Error::DimensionMismatch {
            expected: k,
            got: c.k(),
        });
    }
    let pre: Vec<Preshape> = configs.iter().map(to_preshape).collect::<Result<_>>()?;
    let mut mean = pre[0].point.clone();
    let align_all = |mean: &Point| -> Result<Vec<Point>> {
        pre.iter()
            .map(|p| {
                let v = align_raw(p.point.coords(), mean.coords())?;
                Ok(Point::new_unchecked(v, Chart::Sphere))
            })
            .collect()
    };
    let mut moved = f64::NAN;
    for it in 1..=MAX_ITER {
        let aligned = align_all(&mean)?;
        let next = stats::frechet_mean(&aligned, 1e-13, 1000)?;
        moved = geometry::geodesic_distance(&mean, &next)?;
        mean = next;
        if moved < MEAN_TOL {
            // final pass so the points are aligned to the mean actually returned
            let points = align_all(&mean)?;
            return Ok(AlignedDataset {
                points,
                mean,
                iterations: it,
            });
        }
    }
    Err(Error::NoConvergence {
        iterations: MAX_ITER,
        residual: moved,
    })
}

/// Reshapes a preshape vector back into `k` planar landmarks.
pub fn from_preshape(p: &Point, k: usize) -> Result<LandmarkConfig> {
    if p.ambient_dim() != 2 * k {
        return Err(Error::DimensionMismatch {
            expected: 2 * k,
            got: p.ambient_dim(),
        });
    }
    let off = centroid_offset(p.coords());
    if off > CENTER_TOL {
        return Err(Error::NotCentered(off));
    }
    let landmarks = p
        .coords()
        .as_slice()
        .chunks_exact(2)
        .map(|c| [c[0], c[1]])
        .collect();
    LandmarkConfig::new("", landmarks)
}

/// Reads a landmark file in either supported layout.
///
/// * CSV with header `specimen_id,landmark_index,x,y`; each specimen's rows
///   are contiguous with consecutive indices starting at 0 or 1.
/// * Whitespace separated `x y` rows, one block of k rows per specimen,
///   blocks separated by blank lines. Specimens are numbered from 1.
pub fn read_landmark_file(path: &Path) -> Result<Vec<LandmarkConfig>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_landmarks(&text, path)
}

pub fn parse_landmarks(text: &str, path: &Path) -> Result<Vec<LandmarkConfig>> {
    let first = text.lines().find(|l| !l.trim().is_empty());
    let configs = match first {
        Some(l) if l.trim_start().starts_with("specimen_id") => parse_csv(text, path)?,
        Some(_) => parse_blocks(text, path)?,
        None => return Err(Error::parse(path, 1, "empty landmark file")),
    };
    if let Some(first) = configs.first() {
        let k = first.k();
        if let Some(c) = configs.iter().find(|c| c.k() != k) {
            return Err(Error::parse(
                path,
                0,
                format!(
                    "specimen `{}` has {} landmarks, expected {k}",
                    c.specimen_id,
                    c.k()
                ),
            ));
        }
    }
    Ok(configs)
}

fn parse_f64(s: &str, path: &Path, line: usize) -> Result<f64> {
    let v: f64 = s
        .trim()
        .parse()
        .map_err(|_| Error::parse(path, line, format!("invalid number `{}`", s.trim())))?;
    if !v.is_finite() {
        return Err(Error::parse(path, line, "non-finite coordinate"));
    }
    Ok(v)
}

fn parse_csv(text: &str, path: &Path) -> Result<Vec<LandmarkConfig>> {
    let mut configs = Vec::new();
    let mut seen = std::collections::HashSet::new();
    let mut current: Option<(String, i64, Vec<[f64; 2]>, usize)> = None;
    let finish = |cur: Option<(String, i64, Vec<[f64; 2]>, usize)>,
                      configs: &mut Vec<LandmarkConfig>|
     -> Result<()> {
        if let Some((id, _, lms, line)) = cur {
            let c = LandmarkConfig::new(id, lms).map_err(|e| Error::parse(path, line, e.to_string()))?;
            configs.push(c);
        }
        Ok(())
    };
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        if idx == 0 {
            let cols: Vec<&str> = raw.split(',').map(str::trim).collect();
            if cols != ["specimen_id", "landmark_index", "x", "y"] {
                return Err(Error::parse(path, line, "expected header specimen_id,landmark_index,x,y"));
            }
            continue;
        }
        if raw.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = raw.split(',').collect();
        if cols.len() != 4 {
            return Err(Error::parse(path, line, format!("expected 4 fields, got {}", cols.len())));
        }
        let id = cols[0].trim().to_string();
        let index: i64 = cols[1]
            .trim()
            .parse()
            .map_err(|_| Error::parse(path, line, format!("invalid landmark index `{}`", cols[1].trim())))?;
        let xy = [parse_f64(cols[2], path, line)?, parse_f64(cols[3], path, line)?];
        match current.as_mut() {
            Some((cur_id, last, lms, _)) if *cur_id == id => {
                if index != *last + 1 {
                    return Err(Error::parse(
                        path,
                        line,
                        format!("landmark index {index} follows {last} for specimen `{id}`"),
                    ));
                }
                *last = index;
                lms.push(xy);
            }
            _ => {
                if !seen.insert(id.clone()) {
                    return Err(Error::parse(path, line, format!("rows of specimen `{id}` are not contiguous")));
                }
                if index != 0 && index != 1 {
                    return Err(Error::parse(path, line, format!("first landmark index must be 0 or 1, got {index}")));
                }
                finish(current.take(), &mut configs)?;
                current = Some((id, index, vec![xy], line));
            }
        }
    }
    finish(current.take(), &mut configs)?;
    if configs.is_empty() {
        return Err(Error::parse(path, 1, "no landmark rows"));
    }
    Ok(configs)
}

fn parse_blocks(text: &str, path: &Path) -> Result<Vec<LandmarkConfig>> {
    let mut configs = Vec::new();
    let mut block: Vec<[f64; 2]> = Vec::new();
    let mut block_start = 0;
    let flush = |block: &mut Vec<[f64; 2]>, start: usize, configs: &mut Vec<LandmarkConfig>| -> Result<()> {
        if !block.is_empty() {
            let id = (configs.len() + 1).to_string();
            let c = LandmarkConfig::new(id, std::mem::take(block))
                .map_err(|e| Error::parse(path, start, e.to_string()))?;
            configs.push(c);
        }
        Ok(())
    };
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let fields: Vec<&str> = raw.split_whitespace().collect();
        if fields.is_empty() {
            flush(&mut block, block_start, &mut configs)?;
            continue;
        }
        if fields.len() != 2 {
            return Err(Error::parse(path, line, format!("expected `x y`, got {} fields", fields.len())));
        }
        if block.is_empty() {
            block_start = line;
        }
        block.push([parse_f64(fields[0], path, line)?, parse_f64(fields[1], path, line)?]);
    }
    flush(&mut block, block_start, &mut configs)?;
    Ok(configs)
}

/// Writes configurations in the CSV layout read by [`read_landmark_file`].
pub fn write_landmark_csv(path: &Path, configs: &[LandmarkConfig]) -> Result<()> {
    let mut out = String::from("specimen_id,landmark_index,x,y\n");
    for c in configs {
        for (j, [x, y]) in c.landmarks.iter().enumerate() {
            out.push_str(&format!("{},{},{:.16e},{:.16e}\n", c.specimen_id, j + 1, x, y));
        }
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}
