//! Net-growing approximation of a principal sub-manifold.
//!
//! From a start point `A`, a ring of seeds `exp_A(eps * (cos t e1 + sin t e2))`
//! is laid out in the top local eigenplane. Each seed grows a net: at the
//! current point the local covariance is recomputed, the backward step
//! `v = log_cur(prev)` is projected onto the top-k eigenvectors, and the net
//! advances by `exp_cur(-eps * u / |u|)`. A net stops when the new point has
//! left the data (every data point lies behind it), when no data remain
//! within `delta`, or when the net has grown past `max_net_length`.

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{self, Chart, Point};
use crate::stats::{self, EigenFrame, KernelSpec};

const LENGTH_SLACK: f64 = 1e-12;
const MIN_PROJECTION: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    /// Step length on the manifold.
    pub epsilon: f64,
    /// Radius of the data-exhaustion neighborhood.
    pub delta: f64,
    pub kernel: KernelSpec,
    pub num_directions: usize,
    pub max_net_length: f64,
    /// Hard cap on levels per net; `None` means `ceil(10 * max_net_length / epsilon)`.
    pub max_levels: Option<usize>,
    /// Dimension k of the fitted sub-manifold.
    pub dim: usize,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            epsilon: 0.02,
            delta: 0.2,
            kernel: KernelSpec::default(),
            num_directions: 180,
            max_net_length: 1.0,
            max_levels: None,
            dim: 2,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Invalid(msg));
        if !(self.epsilon > 0.0) || !self.epsilon.is_finite() {
            return bad(format!("epsilon must be positive, got {}", self.epsilon));
        }
        if !(self.epsilon < self.delta) {
            return bad(format!(
                "epsilon ({}) must be smaller than delta ({})",
                self.epsilon, self.delta
            ));
        }
        if !(self.epsilon < std::f64::consts::FRAC_PI_8) {
            return bad(format!("epsilon must be below pi/8, got {}", self.epsilon));
        }
        if self.num_directions < 4 || !self.num_directions.is_multiple_of(4) {
            return bad(format!(
                "num_directions must be a positive multiple of 4, got {}",
                self.num_directions
            ));
        }
        if !(self.max_net_length > 0.0) {
            return bad(format!("max_net_length must be positive, got {}", self.max_net_length));
        }
        if self.dim == 0 {
            return bad("sub-manifold dimension must be at least 1".into());
        }
        if self.max_levels == Some(0) {
            return bad("max_levels must be at least 1".into());
        }
        if !(self.kernel.bandwidth > 0.0) {
            return bad(format!("bandwidth must be positive, got {}", self.kernel.bandwidth));
        }
        Ok(())
    }

    pub fn level_cap(&self) -> usize {
        self.max_levels
            .unwrap_or_else(|| (10.0 * self.max_net_length / self.epsilon).ceil() as usize)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    /// Every data point lies behind the newest point.
    ConvexHullExit,
    /// No data point within `delta` of the newest point, or no data inside
    /// the kernel support at the current point.
    EmptyNeighborhood,
    LengthExceeded,
    /// The backward step is orthogonal to (or the local frame lacks) the
    /// leading eigen-directions.
    DegenerateProjection,
    LevelCap,
    /// A logarithm was undefined (antipodal data).
    AntipodalGuard,
}

impl StopReason {
    pub const ALL: [StopReason; 6] = [
        StopReason::ConvexHullExit,
        StopReason::EmptyNeighborhood,
        StopReason::LengthExceeded,
        StopReason::DegenerateProjection,
        StopReason::LevelCap,
        StopReason::AntipodalGuard,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            StopReason::ConvexHullExit => "convex_hull_exit",
            StopReason::EmptyNeighborhood => "empty_neighborhood",
            StopReason::LengthExceeded => "length_exceeded",
            StopReason::DegenerateProjection => "degenerate_projection",
            StopReason::LevelCap => "level_cap",
            StopReason::AntipodalGuard => "antipodal_guard",
        }
    }
}

impl std::fmt::Display for StopReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One net `A_{l,0} = A, A_{l,1}, ..., A_{l,N(l)}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Net {
    /// 1-based direction index l.
    pub direction_index: usize,
    /// Seed direction as coefficients on the start frame.
    pub direction: Vec<f64>,
    pub points: Vec<Point>,
    pub stop_reason: StopReason,
}

impl Net {
    /// Number of levels beyond the start point.
    pub fn levels(&self) -> usize {
        self.points.len().saturating_sub(1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Submanifold {
    pub start: Point,
    pub nets: Vec<Net>,
    pub frame_at_start: EigenFrame,
    pub config: FitConfig,
}

impl Submanifold {
    /// Net with 1-based index `l`.
    pub fn net(&self, l: usize) -> Option<&Net> {
        l.checked_sub(1).and_then(|i| self.nets.get(i))
    }

    pub fn dim(&self) -> usize {
        self.config.dim
    }
}

/// Unit coefficient vectors for the seed directions of a k-dimensional fit.
///
/// For k = 2 these are `(cos(2 pi l / D), sin(2 pi l / D))`, l = 1..D. For
/// k = 1 the pair `(+1), (-1)`. For k >= 3 a deterministic low-discrepancy
/// cloud on S^(k-1).
pub fn direction_coefficients(k: usize, num_directions: usize) -> Vec<Vec<f64>> {
    use std::f64::consts::PI;
    match k {
        0 => Vec::new(),
        1 => vec![vec![1.0], vec![-1.0]],
        2 => (1..=num_directions)
            .map(|l| {
                let t = 2.0 * l as f64 * PI / num_directions as f64;
                vec![t.cos(), t.sin()]
            })
            .collect(),
        _ => {
            // Kronecker sequence with generalized golden-ratio steps, pushed
            // through Box-Muller and normalized.
            let m = k + (k % 2);
            let mut phi = 2.0f64;
            for _ in 0..64 {
                phi = (1.0 + phi).powf(1.0 / (m as f64 + 1.0));
            }
            let alpha: Vec<f64> = (1..=m).map(|j| (1.0 / phi.powi(j as i32)).fract()).collect();
            (1..=num_directions)
                .map(|l| {
                    let u: Vec<f64> = alpha
                        .iter()
                        .map(|a| (0.5 + a * l as f64).fract().clamp(1e-12, 1.0 - 1e-12))
                        .collect();
                    let mut g = Vec::with_capacity(m);
                    for pair in u.chunks_exact(2) {
                        let r = (-2.0 * pair[0].ln()).sqrt();
                        let t = 2.0 * PI * pair[1];
                        g.push(r * t.cos());
                        g.push(r * t.sin());
                    }
                    g.truncate(k);
                    let n = g.iter().map(|x| x * x).sum::<f64>().sqrt();
                    g.into_iter().map(|x| x / n).collect()
                })
                .collect()
        }
    }
}

fn combine(frame: &EigenFrame, coeffs: &[f64], scale: f64) -> DVector<f64> {
    let mut z = DVector::zeros(frame.base().ambient_dim());
    for (c, e) in coeffs.iter().zip(frame.vectors()) {
        z.axpy(scale * c, e, 1.0);
    }
    z
}

/// Seeds `exp_A(eps * sum_j c_j e_j(A))` for every direction of `cfg`.
pub fn seed_directions(a: &Point, frame: &EigenFrame, cfg: &FitConfig) -> Result<Vec<Point>> {
    let k = cfg.dim.max(2);
    if frame.len() < k {
        return Err(Error::Invalid(format!(
            "seeding needs a frame of at least {k} vectors, got {}",
            frame.len()
        )));
    }
    direction_coefficients(k, cfg.num_directions)
        .iter()
        .map(|c| geometry::exp_raw(a, &combine(frame, c, cfg.epsilon)))
        .collect()
}

/// Projects the backward step onto `frame` and advances by `eps` on the
/// opposite side.
pub fn advance(prev: &Point, cur: &Point, frame: &EigenFrame, epsilon: f64) -> Result<Point> {
    let v = geometry::log_raw(cur, prev)?;
    let u = geometry::project_raw(cur, &frame.project(&v));
    let norm = u.norm();
    if norm < MIN_PROJECTION {
        return Err(Error::DegenerateProjection);
    }
    // v points back toward prev, so -r moves forward.
    let r = u * (epsilon / norm);
    geometry::exp_raw(cur, &(-r))
}

/// One level of net growth from `cur`, given the previous point `prev`.
pub fn step_net(prev: &Point, cur: &Point, data: &[Point], cfg: &FitConfig) -> Result<Point> {
    let sigma = stats::local_covariance(cur, data, &cfg.kernel)?;
    let frame = stats::eigenframe(&sigma, cur, cfg.dim)?;
    advance(prev, cur, &frame, cfg.epsilon)
}

/// Stop rules at a freshly computed point, in order: convex hull exit,
/// empty neighborhood, length bound. `net_len` is the length of the net
/// up to `cur`.
pub fn stop_check(
    next: &Point,
    cur: &Point,
    data: &[Point],
    cfg: &FitConfig,
    net_len: f64,
) -> Result<Option<StopReason>> {
    if next.chart() != cur.chart() {
        return Err(Error::ChartMismatch);
    }
    let back = match geometry::log_raw(next, cur) {
        Ok(b) => b,
        Err(_) => return Ok(Some(StopReason::AntipodalGuard)),
    };
    let mut behind = true;
    let mut far = true;
    for x in data {
        if x.chart() != next.chart() || x.ambient_dim() != next.ambient_dim() {
            return Err(Error::ChartMismatch);
        }
        let y = match geometry::log_raw(next, x) {
            Ok(y) => y,
            Err(_) => return Ok(Some(StopReason::AntipodalGuard)),
        };
        if back.dot(&y) < 0.0 {
            behind = false;
        }
        if y.norm() <= cfg.delta {
            far = false;
        }
    }
    if behind {
        return Ok(Some(StopReason::ConvexHullExit));
    }
    if far {
        return Ok(Some(StopReason::EmptyNeighborhood));
    }
    if net_len + cfg.epsilon > cfg.max_net_length + LENGTH_SLACK {
        return Ok(Some(StopReason::LengthExceeded));
    }
    Ok(None)
}

/// Step failures that end a net rather than the whole fit.
fn stop_for(err: &Error) -> Option<StopReason> {
    match err {
        Error::DegenerateProjection | Error::RankDeficient { .. } => {
            Some(StopReason::DegenerateProjection)
        }
        Error::EmptyNeighborhood => Some(StopReason::EmptyNeighborhood),
        Error::AntipodalPair(_) | Error::CutLocus(_) => Some(StopReason::AntipodalGuard),
        _ => None,
    }
}

fn grow_net(
    index: usize,
    coeffs: Vec<f64>,
    start: &Point,
    frame: &EigenFrame,
    data: &[Point],
    cfg: &FitConfig,
) -> Result<Net> {
    let cap = cfg.level_cap();
    let seed = geometry::exp_raw(start, &combine(frame, &coeffs, cfg.epsilon))?;
    let mut points = vec![start.clone()];
    let mut len = 0.0;
    let mut pending = stop_check(&seed, start, data, cfg, len)?;
    len += geometry::distance_raw(start, &seed);
    points.push(seed);
    let stop_reason = loop {
        if let Some(reason) = pending {
            break reason;
        }
        if points.len() > cap {
            break StopReason::LevelCap;
        }
        let n = points.len();
        let (prev, cur) = (&points[n - 2], &points[n - 1]);
        let next = match step_net(prev, cur, data, cfg) {
            Ok(p) => p,
            Err(e) => match stop_for(&e) {
                Some(reason) => break reason,
                None => return Err(e),
            },
        };
        pending = stop_check(&next, cur, data, cfg, len)?;
        len += geometry::distance_raw(cur, &next);
        points.push(next);
    };
    Ok(Net {
        direction_index: index,
        direction: coeffs,
        points,
        stop_reason,
    })
}

fn check_inputs(data: &[Point], start: &Point) -> Result<()> {
    if data.is_empty() {
        return Err(Error::Invalid("no data points".into()));
    }
    for x in data.iter().chain(std::iter::once(start)) {
        if x.chart() != start.chart() {
            return Err(Error::ChartMismatch);
        }
        if x.ambient_dim() != start.ambient_dim() {
            return Err(Error::DimensionMismatch {
                expected: start.ambient_dim(),
                got: x.ambient_dim(),
            });
        }
        if x.chart() == Chart::Sphere && (x.coords().norm() - 1.0).abs() > geometry::UNIT_NORM_TOL {
            return Err(Error::Invalid("data point off the unit sphere".into()));
        }
    }
    Ok(())
}

fn fit_with(
    data: &[Point],
    start: &Point,
    cfg: &FitConfig,
    directions: Vec<Vec<f64>>,
) -> Result<Submanifold> {
    let sigma = stats::local_covariance(start, data, &cfg.kernel)?;
    let frame = stats::eigenframe(&sigma, start, cfg.dim)?;
    let nets = directions
        .into_par_iter()
        .enumerate()
        .map(|(i, c)| grow_net(i + 1, c, start, &frame, data, cfg))
        .collect::<Result<Vec<_>>>()?;
    Ok(Submanifold {
        start: start.clone(),
        nets,
        frame_at_start: frame,
        config: *cfg,
    })
}

/// Grows all nets from `start`. Nets are independent and are computed in
/// parallel on the current rayon pool; the result does not depend on the
/// number of workers.
pub fn fit_submanifold(data: &[Point], start: &Point, cfg: &FitConfig) -> Result<Submanifold> {
    cfg.validate()?;
    check_inputs(data, start)?;
    if cfg.dim == 1 {
        return fit_flow(data, start, cfg);
    }
    if cfg.dim >= start.ambient_dim() {
        return Err(Error::Invalid(format!(
            "dimension {} too large for ambient dimension {}",
            cfg.dim,
            start.ambient_dim()
        )));
    }
    fit_with(data, start, cfg, direction_coefficients(cfg.dim, cfg.num_directions))
}

/// The one-dimensional case: two nets leaving `start` along `+e1` and `-e1`.
pub fn fit_flow(data: &[Point], start: &Point, cfg: &FitConfig) -> Result<Submanifold> {
    let cfg = FitConfig { dim: 1, ..*cfg };
    cfg.validate()?;
    check_inputs(data, start)?;
    fit_with(data, start, &cfg, direction_coefficients(1, 2))
}

/// Sum of consecutive geodesic distances along the net.
pub fn net_length(net: &Net) -> f64 {
    net.points
        .windows(2)
        .map(|w| geometry::distance_raw(&w[0], &w[1]))
        .sum()
}

/// Which covariance supplies the eigenvalues and frames of the score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ScoreSpectrum {
    /// Covariance of the log-mapped data about their mean.
    #[default]
    Centered,
    /// Second moment of the log-mapped data about the base point, the same
    /// matrix the fit uses for its frames.
    SecondMoment,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VariationScore {
    pub per_net: Vec<f64>,
    pub total: f64,
}

/// Volume of the shell between radii `(i-1) eps` and `i eps` in R^k, split
/// evenly over `directions` nets. For k = 2 this is `(2 pi / D)(i - 1/2) eps^2`.
pub fn polar_weight(k: usize, directions: usize, level: usize, epsilon: f64) -> f64 {
    // surface area of S^(k-1): |S^0| = 2, |S^1| = 2 pi, |S^n| = 2 pi |S^(n-2)| / (n - 1)
    let mut area = if k % 2 == 1 { 2.0 } else { 2.0 * std::f64::consts::PI };
    let mut n = if k % 2 == 1 { 0 } else { 1 };
    while n + 2 < k {
        n += 2;
        area *= 2.0 * std::f64::consts::PI / (n as f64 - 1.0);
    }
    let i = level as f64;
    let kf = k as f64;
    area / directions as f64 * epsilon.powi(k as i32) * (i.powf(kf) - (i - 1.0).powf(kf)) / kf
}

/// Discretized integral of `cos(alpha'_B) * sum_{j<=k} lambda_j(B)` over the
/// fitted nets, using polar-coordinate area weights. `alpha'_B` is the angle
/// between the step arriving at `B` and the leading k eigenvectors at `B`,
/// with the spectrum taken over the whole sample.
pub fn variation_score(sub: &Submanifold, data: &[Point]) -> Result<VariationScore> {
    variation_score_with(sub, data, ScoreSpectrum::default())
}

pub fn variation_score_with(
    sub: &Submanifold,
    data: &[Point],
    spectrum: ScoreSpectrum,
) -> Result<VariationScore> {
    let k = sub.config.dim;
    let global = KernelSpec::global();
    let per_net = sub
        .nets
        .par_iter()
        .map(|net| {
            let mut s = 0.0;
            for (i, w) in net.points.windows(2).enumerate() {
                let (prev, b) = (&w[0], &w[1]);
                let sigma = match spectrum {
                    ScoreSpectrum::Centered => stats::centered_covariance(b, data, &global)?,
                    ScoreSpectrum::SecondMoment => stats::local_covariance(b, data, &global)?,
                };
                let frame = stats::top_eigenpairs(&sigma, b, k)?;
                let incoming = -geometry::log_raw(b, prev)?;
                let cos = stats::vector_cos_raw(&incoming, &frame)?;
                let lambda: f64 = frame.eigenvalues().iter().sum();
                s += cos * lambda * polar_weight(k, sub.nets.len(), i + 1, sub.config.epsilon);
            }
            Ok(s)
        })
        .collect::<Result<Vec<f64>>>()?;
    let total = per_net.iter().sum();
    Ok(VariationScore { per_net, total })
}
