//! Exponential and logarithm maps, geodesic distances and geodesic sampling.
//!
//! Two charts share one interface. [`Chart::Sphere`] is the unit sphere
//! S^d embedded in R^(d+1) with the round metric induced by the ambient dot
//! product. [`Chart::Flat`] is plain Euclidean space, where the exponential
//! map is vector addition and the logarithm is vector subtraction.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Allowed deviation of a sphere point from unit norm.
pub const UNIT_NORM_TOL: f64 = 1e-12;
/// Allowed normal component of a sphere tangent vector.
pub const TANGENT_TOL: f64 = 1e-10;
/// Tangent vectors at least this close to pi in norm are rejected by `exp_map`.
pub const CUT_LOCUS_MARGIN: f64 = 1e-9;
/// `log_map` refuses pairs whose inner product is below `-1 + ANTIPODAL_MARGIN`.
pub const ANTIPODAL_MARGIN: f64 = 1e-10;

const ZERO_NORM: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Chart {
    Sphere,
    Flat,
}

impl std::fmt::Display for Chart {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Chart::Sphere => f.write_str("sphere"),
            Chart::Flat => f.write_str("flat"),
        }
    }
}

impl std::str::FromStr for Chart {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sphere" => Ok(Chart::Sphere),
            "flat" => Ok(Chart::Flat),
            other => Err(Error::Invalid(format!("unknown chart `{other}`"))),
        }
    }
}

/// A location on the manifold, stored in ambient coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct Point {
    coords: DVector<f64>,
    chart: Chart,
}

impl Point {
    /// A point of the unit sphere. The coordinates must already have unit
    /// norm; use [`project_to_sphere`] to normalize arbitrary vectors.
    pub fn sphere(coords: DVector<f64>) -> Result<Self> {
        let norm = coords.norm();
        if !norm.is_finite() || (norm - 1.0).abs() > UNIT_NORM_TOL {
            return Err(Error::Invalid(format!(
                "sphere point has norm {norm}, expected 1"
            )));
        }
        Ok(Point {
            coords,
            chart: Chart::Sphere,
        })
    }

    pub fn flat(coords: DVector<f64>) -> Result<Self> {
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::Invalid("flat point has non-finite coordinates".into()));
        }
        Ok(Point {
            coords,
            chart: Chart::Flat,
        })
    }

    pub fn from_slice(chart: Chart, coords: &[f64]) -> Result<Self> {
        let v = DVector::from_column_slice(coords);
        match chart {
            Chart::Sphere => Point::sphere(v),
            Chart::Flat => Point::flat(v),
        }
    }

    /// Builds a point without validation. Sphere coordinates are renormalized.
    pub(crate) fn new_unchecked(coords: DVector<f64>, chart: Chart) -> Self {
        match chart {
            Chart::Sphere => {
                let n = coords.norm();
                Point {
                    coords: coords / n,
                    chart,
                }
            }
            Chart::Flat => Point { coords, chart },
        }
    }

    pub fn coords(&self) -> &DVector<f64> {
        &self.coords
    }

    pub fn chart(&self) -> Chart {
        self.chart
    }

    /// Ambient dimension (d + 1 for S^d).
    pub fn ambient_dim(&self) -> usize {
        self.coords.len()
    }

    pub fn into_coords(self) -> DVector<f64> {
        self.coords
    }

    fn same_space(&self, other: &Point) -> Result<()> {
        if self.chart != other.chart {
            return Err(Error::ChartMismatch);
        }
        if self.coords.len() != other.coords.len() {
            return Err(Error::DimensionMismatch {
                expected: self.coords.len(),
                got: other.coords.len(),
            });
        }
        Ok(())
    }
}

/// A velocity attached to a base point.
#[derive(Debug, Clone, PartialEq)]
pub struct Tangent {
    base: Point,
    vec: DVector<f64>,
}

impl Tangent {
    /// Wraps `vec` as a tangent at `base`, checking orthogonality on the sphere.
    pub fn new(base: Point, vec: DVector<f64>) -> Result<Self> {
        if vec.len() != base.ambient_dim() {
            return Err(Error::DimensionMismatch {
                expected: base.ambient_dim(),
                got: vec.len(),
            });
        }
        if base.chart == Chart::Sphere {
            let normal = base.coords.dot(&vec);
            if normal.abs() > TANGENT_TOL * vec.norm().max(1.0) {
                return Err(Error::Invalid(format!(
                    "vector has normal component {normal:e}"
                )));
            }
        }
        Ok(Tangent { base, vec })
    }

    pub fn zero(base: &Point) -> Self {
        Tangent {
            vec: DVector::zeros(base.ambient_dim()),
            base: base.clone(),
        }
    }

    pub fn base(&self) -> &Point {
        &self.base
    }

    pub fn vec(&self) -> &DVector<f64> {
        &self.vec
    }

    pub fn norm(&self) -> f64 {
        self.vec.norm()
    }

    pub fn into_vec(self) -> DVector<f64> {
        self.vec
    }

    pub fn scaled(&self, factor: f64) -> Tangent {
        Tangent {
            base: self.base.clone(),
            vec: &self.vec * factor,
        }
    }
}

/// Scales a nonzero ambient vector onto the unit sphere.
pub fn project_to_sphere(v: &DVector<f64>) -> Result<Point> {
    let norm = v.norm();
    if !(norm >= ZERO_NORM) || !norm.is_finite() {
        return Err(Error::ZeroVector(norm));
    }
    Ok(Point {
        coords: v / norm,
        chart: Chart::Sphere,
    })
}

/// Removes the normal component of `w` at `x` (identity on the flat chart).
pub fn tangent_project(x: &Point, w: &DVector<f64>) -> Result<Tangent> {
    if w.len() != x.ambient_dim() {
        return Err(Error::DimensionMismatch {
            expected: x.ambient_dim(),
            got: w.len(),
        });
    }
    Ok(Tangent {
        base: x.clone(),
        vec: project_raw(x, w),
    })
}

pub(crate) fn project_raw(x: &Point, w: &DVector<f64>) -> DVector<f64> {
    match x.chart {
        Chart::Sphere => w - &x.coords * x.coords.dot(w),
        Chart::Flat => w.clone(),
    }
}

pub fn exp_map(x: &Point, v: &Tangent) -> Result<Point> {
    if v.base.chart != x.chart || v.base.coords != x.coords {
        return Err(Error::BaseMismatch);
    }
    exp_raw(x, &v.vec)
}

/// Exponential map on a raw ambient vector assumed tangent at `x`.
pub(crate) fn exp_raw(x: &Point, v: &DVector<f64>) -> Result<Point> {
    match x.chart {
        Chart::Flat => Ok(Point {
            coords: &x.coords + v,
            chart: Chart::Flat,
        }),
        Chart::Sphere => {
            let theta = v.norm();
            if theta >= std::f64::consts::PI - CUT_LOCUS_MARGIN {
                return Err(Error::CutLocus(theta));
            }
            if theta == 0.0 {
                return Ok(x.clone());
            }
            let y = &x.coords * theta.cos() + v * (theta.sin() / theta);
            Ok(Point::new_unchecked(y, Chart::Sphere))
        }
    }
}

pub fn log_map(x: &Point, y: &Point) -> Result<Tangent> {
    x.same_space(y)?;
    Ok(Tangent {
        base: x.clone(),
        vec: log_raw(x, y)?,
    })
}

/// Logarithm map returning the bare ambient vector.
pub(crate) fn log_raw(x: &Point, y: &Point) -> Result<DVector<f64>> {
    match x.chart {
        Chart::Flat => Ok(&y.coords - &x.coords),
        Chart::Sphere => {
            let c = x.coords.dot(&y.coords);
            if c < -1.0 + ANTIPODAL_MARGIN {
                return Err(Error::AntipodalPair(c));
            }
            let w = &y.coords - &x.coords * c;
            let s = w.norm();
            if s == 0.0 {
                return Ok(DVector::zeros(x.coords.len()));
            }
            // atan2 keeps full precision for nearby points where acos does not.
            let theta = s.atan2(c);
            Ok(w * (theta / s))
        }
    }
}

pub fn geodesic_distance(x: &Point, y: &Point) -> Result<f64> {
    x.same_space(y)?;
    Ok(distance_raw(x, y))
}

pub(crate) fn distance_raw(x: &Point, y: &Point) -> f64 {
    match x.chart {
        Chart::Flat => (&y.coords - &x.coords).norm(),
        // half-chord form: exactly symmetric in x and y
        Chart::Sphere => 2.0 * (&x.coords - &y.coords).norm().atan2((&x.coords + &y.coords).norm()),
    }
}

/// Samples `exp_x(t * v / |v|)` at `steps` evenly spaced `t` in `[0, length]`.
pub fn sample_geodesic(x: &Point, v: &Tangent, length: f64, steps: usize) -> Result<Vec<Point>> {
    if v.base.coords != x.coords || v.base.chart != x.chart {
        return Err(Error::BaseMismatch);
    }
    if steps < 2 {
        return Err(Error::Invalid(format!("need at least 2 steps, got {steps}")));
    }
    let norm = v.norm();
    if norm < ZERO_NORM {
        return Err(Error::ZeroVector(norm));
    }
    if x.chart == Chart::Sphere && length > std::f64::consts::PI + CUT_LOCUS_MARGIN {
        return Err(Error::CutLocus(length));
    }
    let dir = &v.vec / norm;
    let pts = (0..steps)
        .map(|i| {
            let t = length * i as f64 / (steps - 1) as f64;
            match x.chart {
                // Closed form of the great circle; valid up to and including the antipode.
                Chart::Sphere => {
                    Point::new_unchecked(&x.coords * t.cos() + &dir * t.sin(), Chart::Sphere)
                }
                Chart::Flat => Point::new_unchecked(&x.coords + &dir * t, Chart::Flat),
            }
        })
        .collect();
    Ok(pts)
}
