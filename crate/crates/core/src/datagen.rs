//! Seedable synthetic datasets on S^3.
//!
//! Each family first draws triplets in R^3, then lifts them to the sphere:
//! a fourth coordinate `sqrt(C - |x|^2)` puts every lifted point on the
//! sphere of radius `sqrt(C)`, and the result is normalized onto S^3.

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{self, Point};

/// Identifier of the random stream, recorded in dataset metadata.
pub const GENERATOR_ID: &str = "rand_chacha-0.9/ChaCha8Rng::seed_from_u64 + rand_distr-0.5";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    SCurve,
    SeaWave,
    Ellipsoid,
}

impl std::str::FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "s_curve" => Ok(Family::SCurve),
            "sea_wave" => Ok(Family::SeaWave),
            "ellipsoid" => Ok(Family::Ellipsoid),
            other => Err(Error::Invalid(format!("unknown family `{other}`"))),
        }
    }
}

impl std::fmt::Display for Family {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Family::SCurve => "s_curve",
            Family::SeaWave => "sea_wave",
            Family::Ellipsoid => "ellipsoid",
        })
    }
}

/// How the lift constant C is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "value")]
pub enum Shift {
    /// `C = max_i |x_i|^2 + margin`.
    Feasible(f64),
    /// A fixed C; rejected when any triplet lies outside the radius sqrt(C).
    Fixed(f64),
}

impl Default for Shift {
    fn default() -> Self {
        Shift::Feasible(0.05)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenSpec {
    pub family: Family,
    pub n: usize,
    pub seed: u64,
    pub shift: Shift,
    /// Multiplier on the `32 U` term of the S-curve; 1 reproduces the raw recipe.
    pub noise_scale_u: f64,
    /// Ellipsoid semi-axes.
    pub semi_axes: [f64; 3],
    /// Sample on the ellipsoid surface instead of the solid.
    pub surface: bool,
    /// Isotropic noise of the sea-wave sheet.
    pub noise_level: f64,
}

impl GenSpec {
    pub fn new(family: Family, n: usize, seed: u64) -> Self {
        GenSpec {
            family,
            n,
            seed,
            shift: Shift::default(),
            noise_scale_u: 1.0 / 32.0,
            semi_axes: [2.5, std::f64::consts::SQRT_2, 1.0],
            surface: false,
            noise_level: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 3 {
            return Err(Error::Invalid(format!("need at least 3 points, got {}", self.n)));
        }
        if self.semi_axes.iter().any(|a| !(*a > 0.0)) {
            return Err(Error::Invalid("ellipsoid semi-axes must be positive".into()));
        }
        if !(self.noise_level >= 0.0) || !(self.noise_scale_u >= 0.0) {
            return Err(Error::Invalid("noise parameters must be non-negative".into()));
        }
        match self.shift {
            Shift::Feasible(m) if !(m > 0.0) => {
                Err(Error::Invalid(format!("shift margin must be positive, got {m}")))
            }
            Shift::Fixed(c) if !(c > 0.0) => Err(Error::Invalid(format!("C must be positive, got {c}"))),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub spec: GenSpec,
    /// Pre-lift triplets, in the same order as `points`.
    pub triplets: Vec<[f64; 3]>,
    pub points: Vec<Point>,
    pub lift_constant: f64,
}

pub fn generate(spec: &GenSpec) -> Result<Dataset> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let triplets = match spec.family {
        Family::SCurve => s_curve_triplets(spec.n, spec.noise_scale_u, &mut rng),
        Family::Ellipsoid => ellipsoid_triplets(spec.n, spec.semi_axes, spec.surface, &mut rng),
        Family::SeaWave => sea_wave_triplets(spec.n, spec.noise_level, &mut rng),
    };
    let (points, lift_constant) = lift(&triplets, spec.shift)?;
    Ok(Dataset {
        spec: spec.clone(),
        triplets,
        points,
        lift_constant,
    })
}

pub fn gen_s_curve(n: usize, seed: u64, noise_scale_u: f64, shift: Shift) -> Result<Dataset> {
    generate(&GenSpec {
        noise_scale_u,
        shift,
        ..GenSpec::new(Family::SCurve, n, seed)
    })
}

pub fn gen_ellipsoid(n: usize, seed: u64, semi_axes: [f64; 3], surface: bool) -> Result<Dataset> {
    generate(&GenSpec {
        semi_axes,
        surface,
        ..GenSpec::new(Family::Ellipsoid, n, seed)
    })
}

pub fn gen_sea_wave(n: usize, seed: u64, noise_level: f64) -> Result<Dataset> {
    generate(&GenSpec {
        noise_level,
        ..GenSpec::new(Family::SeaWave, n, seed)
    })
}

/// `x1 = (i - n/2)/n`, `x2 = sin(2 x1)/6 + 32 s U`, `x3 = 1 + V/100` with
/// `s = noise_scale_u` and normal `U`, `V` of standard deviations 1/10 and
/// 1/100.
fn s_curve_triplets(n: usize, noise_scale_u: f64, rng: &mut ChaCha8Rng) -> Vec<[f64; 3]> {
    let u = Normal::new(0.0, 0.1).expect("valid normal");
    let v = Normal::new(0.0, 0.01).expect("valid normal");
    (1..=n)
        .map(|i| {
            let x1 = (i as f64 - n as f64 / 2.0) / n as f64;
            let du = u.sample(rng);
            let dv = v.sample(rng);
            [x1, (2.0 * x1).sin() / 6.0 + noise_scale_u * 32.0 * du, 1.0 + dv / 100.0]
        })
        .collect()
}

fn ellipsoid_triplets(n: usize, axes: [f64; 3], surface: bool, rng: &mut ChaCha8Rng) -> Vec<[f64; 3]> {
    let mut out = Vec::with_capacity(n);
    if surface {
        let g = Normal::new(0.0, 1.0).expect("valid normal");
        while out.len() < n {
            let d: [f64; 3] = [g.sample(rng), g.sample(rng), g.sample(rng)];
            let r = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
            if r < 1e-12 {
                continue;
            }
            out.push([axes[0] * d[0] / r, axes[1] * d[1] / r, axes[2] * d[2] / r]);
        }
    } else {
        let unit = Uniform::new_inclusive(-1.0, 1.0).expect("valid range");
        while out.len() < n {
            let d: [f64; 3] = [unit.sample(rng), unit.sample(rng), unit.sample(rng)];
            if d[0] * d[0] + d[1] * d[1] + d[2] * d[2] <= 1.0 {
                out.push([axes[0] * d[0], axes[1] * d[1], axes[2] * d[2]]);
            }
        }
    }
    out
}

const WAVE_AMPLITUDE: f64 = 0.3;
const WAVE_FREQUENCY: f64 = std::f64::consts::PI;

/// Height of the generating sea-wave sheet over `(s, t)`.
pub fn sea_wave_height(s: f64, t: f64) -> f64 {
    WAVE_AMPLITUDE * (WAVE_FREQUENCY * s).sin() * (WAVE_FREQUENCY * t).cos()
}

/// Vertical residual of a triplet to the sea-wave sheet.
pub fn sea_wave_residual(p: &[f64; 3]) -> f64 {
    (p[2] - sea_wave_height(p[0], p[1])).abs()
}

fn sea_wave_triplets(n: usize, noise_level: f64, rng: &mut ChaCha8Rng) -> Vec<[f64; 3]> {
    let unit = Uniform::new_inclusive(-1.0, 1.0).expect("valid range");
    let g = Normal::new(0.0, 1.0).expect("valid normal");
    (0..n)
        .map(|_| {
            let s = unit.sample(rng);
            let t = unit.sample(rng);
            let noise = [g.sample(rng), g.sample(rng), g.sample(rng)];
            [
                s + noise_level * noise[0],
                t + noise_level * noise[1],
                sea_wave_height(s, t) + noise_level * noise[2],
            ]
        })
        .collect()
}

/// Lifts triplets onto S^3; returns the points and the constant C used.
pub fn lift(triplets: &[[f64; 3]], shift: Shift) -> Result<(Vec<Point>, f64)> {
    let sq: Vec<f64> = triplets.iter().map(|p| p.iter().map(|c| c * c).sum()).collect();
    let max_sq = sq.iter().cloned().fold(0.0, f64::max);
    let c = match shift {
        Shift::Feasible(margin) => max_sq + margin,
        Shift::Fixed(c) => c,
    };
    if c - max_sq < 0.0 {
        return Err(Error::InfeasibleShift {
            c,
            radicand: c - max_sq,
        });
    }
    let points = triplets
        .iter()
        .zip(&sq)
        .map(|(p, r2)| {
            let v = DVector::from_column_slice(&[p[0], p[1], p[2], (c - r2).sqrt()]);
            geometry::project_to_sphere(&v)
        })
        .collect::<Result<_>>()?;
    Ok((points, c))
}

/// Geodesic distance from a point of S^3 to the lifted S-curve sheet
/// `{x3 = 1}`, which on the sphere is the latitude set `q3 = 1/sqrt(C)`.
pub fn s_curve_sheet_distance(p: &Point, lift_constant: f64) -> f64 {
    let q3 = p.coords()[2].clamp(-1.0, 1.0);
    (q3.asin() - (1.0 / lift_constant.sqrt()).asin()).abs()
}
