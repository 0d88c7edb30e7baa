//! Tangent-space statistics: Fréchet means, kernel-weighted tangent
//! covariance, eigenframes and the angle diagnostics between subspaces.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{self, Chart, Point, Tangent};

/// Eigenvalues at or below this are treated as zero.
pub const RANK_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelKind {
    /// Indicator of the closed ball of radius h.
    UniformBall,
    /// `exp(-(d/h)^2 / 2)`.
    Gaussian,
}

impl std::str::FromStr for KernelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" | "uniform_ball" => Ok(KernelKind::UniformBall),
            "gaussian" => Ok(KernelKind::Gaussian),
            other => Err(Error::Invalid(format!("unknown kernel `{other}`"))),
        }
    }
}

/// Kernel shape plus bandwidth. The bandwidth may be `f64::INFINITY`, in
/// which case every point gets weight one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub kind: KernelKind,
    pub bandwidth: f64,
}

impl KernelSpec {
    pub fn new(kind: KernelKind, bandwidth: f64) -> Result<Self> {
        if !(bandwidth > 0.0) {
            return Err(Error::Invalid(format!("bandwidth must be positive, got {bandwidth}")));
        }
        Ok(KernelSpec { kind, bandwidth })
    }

    pub fn uniform(bandwidth: f64) -> Result<Self> {
        KernelSpec::new(KernelKind::UniformBall, bandwidth)
    }

    pub fn gaussian(bandwidth: f64) -> Result<Self> {
        KernelSpec::new(KernelKind::Gaussian, bandwidth)
    }

    /// Uniform weights over the whole sample.
    pub fn global() -> Self {
        KernelSpec {
            kind: KernelKind::UniformBall,
            bandwidth: f64::INFINITY,
        }
    }

    /// Weight of a point at tangent distance `dist` from the base.
    pub fn weight(&self, dist: f64) -> f64 {
        if self.bandwidth.is_infinite() {
            return 1.0;
        }
        match self.kind {
            KernelKind::UniformBall => {
                if dist <= self.bandwidth {
                    1.0
                } else {
                    0.0
                }
            }
            KernelKind::Gaussian => {
                let r = dist / self.bandwidth;
                (-0.5 * r * r).exp()
            }
        }
    }
}

impl Default for KernelSpec {
    fn default() -> Self {
        KernelSpec {
            kind: KernelKind::UniformBall,
            bandwidth: 0.4,
        }
    }
}

/// Leading eigenvectors of a tangent covariance at `base`, sorted by
/// nonincreasing eigenvalue.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenFrame {
    base: Point,
    vectors: Vec<DVector<f64>>,
    eigenvalues: Vec<f64>,
    degenerate: bool,
}

impl EigenFrame {
    /// Assembles a frame from orthonormal tangent vectors at `base`.
    pub fn from_parts(base: Point, vectors: Vec<DVector<f64>>, eigenvalues: Vec<f64>) -> Result<Self> {
        if vectors.len() != eigenvalues.len() {
            return Err(Error::Invalid("one eigenvalue per vector required".into()));
        }
        for (i, v) in vectors.iter().enumerate() {
            if v.len() != base.ambient_dim() {
                return Err(Error::DimensionMismatch {
                    expected: base.ambient_dim(),
                    got: v.len(),
                });
            }
            for (j, w) in vectors.iter().enumerate().take(i + 1) {
                let target = if i == j { 1.0 } else { 0.0 };
                if (v.dot(w) - target).abs() > 1e-9 {
                    return Err(Error::Invalid("frame vectors are not orthonormal".into()));
                }
            }
        }
        Ok(EigenFrame {
            base,
            vectors,
            eigenvalues,
            degenerate: false,
        })
    }

    pub fn base(&self) -> &Point {
        &self.base
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn vectors(&self) -> &[DVector<f64>] {
        &self.vectors
    }

    pub fn vector(&self, i: usize) -> &DVector<f64> {
        &self.vectors[i]
    }

    pub fn tangent(&self, i: usize) -> Tangent {
        geometry::tangent_project(&self.base, &self.vectors[i]).expect("frame vector dimension")
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// True when the k-th eigenvalue ties with the (k+1)-th, so only the
    /// span (not the individual vectors) is well defined.
    pub fn is_degenerate(&self) -> bool {
        self.degenerate
    }

    /// Orthogonal projection of `v` onto the span of the frame.
    pub fn project(&self, v: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(v.len());
        for e in &self.vectors {
            out.axpy(e.dot(v), e, 1.0);
        }
        out
    }

    pub fn with_signs_flipped(&self, mask: &[bool]) -> EigenFrame {
        let mut f = self.clone();
        for (v, &flip) in f.vectors.iter_mut().zip(mask) {
            if flip {
                *v = -v.clone();
            }
        }
        f
    }
}

fn check_data(base: &Point, data: &[Point]) -> Result<()> {
    for x in data {
        if x.chart() != base.chart() {
            return Err(Error::ChartMismatch);
        }
        if x.ambient_dim() != base.ambient_dim() {
            return Err(Error::DimensionMismatch {
                expected: base.ambient_dim(),
                got: x.ambient_dim(),
            });
        }
    }
    Ok(())
}

/// `(1/n) sum d(p, x_i)^2`.
pub fn frechet_variance(p: &Point, data: &[Point]) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::Invalid("empty data".into()));
    }
    check_data(p, data)?;
    let sum: f64 = data
        .iter()
        .map(|x| geometry::distance_raw(p, x).powi(2))
        .sum();
    Ok(sum / data.len() as f64)
}

/// Mean of `log_p(x_i)`; half the negative Riemannian gradient of the
/// Fréchet variance.
pub fn mean_log(p: &Point, data: &[Point]) -> Result<DVector<f64>> {
    check_data(p, data)?;
    let mut acc = DVector::zeros(p.ambient_dim());
    for x in data {
        let l = geometry::log_raw(p, x).map_err(|_| Error::HemisphereViolation)?;
        acc += l;
    }
    Ok(acc / data.len() as f64)
}

/// Karcher iteration `p <- exp_p(mean_i log_p(x_i))` started from the
/// normalized extrinsic average.
pub fn frechet_mean(data: &[Point], tol: f64, max_iter: usize) -> Result<Point> {
    let first = data
        .first()
        .ok_or_else(|| Error::Invalid("empty data".into()))?;
    check_data(first, data)?;
    let mut sum = DVector::zeros(first.ambient_dim());
    for x in data {
        sum += x.coords();
    }
    let mut p = match first.chart() {
        Chart::Flat => Point::flat(sum / data.len() as f64)?,
        Chart::Sphere => {
            geometry::project_to_sphere(&sum).map_err(|_| Error::HemisphereViolation)?
        }
    };
    let mut residual = f64::INFINITY;
    for _ in 0..max_iter {
        let g = mean_log(&p, data)?;
        residual = g.norm();
        if residual <= tol {
            return Ok(p);
        }
        p = geometry::exp_raw(&p, &g).map_err(|_| Error::HemisphereViolation)?;
    }
    let g = mean_log(&p, data)?;
    if g.norm() <= tol {
        return Ok(p);
    }
    Err(Error::NoConvergence {
        iterations: max_iter,
        residual: residual.min(g.norm()),
    })
}

/// Weighted second moment of the log-mapped data at `base`:
/// `(1/W) sum_i w_i log(x_i) log(x_i)^T`, with `w_i` the kernel weight of the
/// geodesic distance `|log(x_i)|`.
pub fn local_covariance(base: &Point, data: &[Point], kernel: &KernelSpec) -> Result<DMatrix<f64>> {
    check_data(base, data)?;
    let n = base.ambient_dim();
    let mut sigma = DMatrix::zeros(n, n);
    let mut total = 0.0;
    for x in data {
        let y = geometry::log_raw(base, x)?;
        let w = kernel.weight(y.norm());
        if w > 0.0 {
            sigma.ger(w, &y, &y, 1.0);
            total += w;
        }
    }
    if !(total > 0.0) {
        return Err(Error::EmptyNeighborhood);
    }
    sigma /= total;
    symmetrize(&mut sigma);
    Ok(sigma)
}

/// Weighted covariance of the log-mapped data about their weighted mean.
///
/// Unlike [`local_covariance`], this is blind to where `base` sits inside
/// the cloud; on the flat chart it is the same matrix at every base point.
pub fn centered_covariance(base: &Point, data: &[Point], kernel: &KernelSpec) -> Result<DMatrix<f64>> {
    check_data(base, data)?;
    let n = base.ambient_dim();
    let mut logs = Vec::with_capacity(data.len());
    let mut mean = DVector::zeros(n);
    let mut total = 0.0;
    for x in data {
        let y = geometry::log_raw(base, x)?;
        let w = kernel.weight(y.norm());
        if w > 0.0 {
            mean.axpy(w, &y, 1.0);
            total += w;
            logs.push((w, y));
        }
    }
    if !(total > 0.0) {
        return Err(Error::EmptyNeighborhood);
    }
    mean /= total;
    let mut sigma = DMatrix::zeros(n, n);
    for (w, y) in logs {
        let c = y - &mean;
        sigma.ger(w, &c, &c, 1.0);
    }
    sigma /= total;
    symmetrize(&mut sigma);
    Ok(sigma)
}

fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let a = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = a;
            m[(j, i)] = a;
        }
    }
}

/// Full spectrum sorted by nonincreasing eigenvalue, with the sign of each
/// eigenvector fixed so its first non-negligible coordinate is positive.
pub fn sorted_spectrum(sigma: &DMatrix<f64>) -> Result<(Vec<f64>, Vec<DVector<f64>>)> {
    if !sigma.is_square() {
        return Err(Error::DimensionMismatch {
            expected: sigma.nrows(),
            got: sigma.ncols(),
        });
    }
    let eig = nalgebra::SymmetricEigen::new(sigma.clone());
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    // stable sort keeps the solver's order among exact ties
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = order
        .iter()
        .map(|&i| {
            let mut v: DVector<f64> = eig.eigenvectors.column(i).into_owned();
            v /= v.norm();
            if let Some(c) = v.iter().find(|c| c.abs() > 1e-12) {
                if *c < 0.0 {
                    v = -v;
                }
            }
            v
        })
        .collect();
    Ok((values, vectors))
}

/// Top-`k` eigenpairs of `sigma`, attached to `base` as tangent directions.
pub fn eigenframe(sigma: &DMatrix<f64>, base: &Point, k: usize) -> Result<EigenFrame> {
    let frame = top_eigenpairs(sigma, base, k)?;
    let lambda = frame.eigenvalues[k - 1];
    if lambda <= RANK_TOL {
        return Err(Error::RankDeficient { k, lambda });
    }
    Ok(frame)
}

/// Like [`eigenframe`] but without the rank check.
pub(crate) fn top_eigenpairs(sigma: &DMatrix<f64>, base: &Point, k: usize) -> Result<EigenFrame> {
    let n = base.ambient_dim();
    if sigma.nrows() != n || sigma.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: sigma.nrows(),
        });
    }
    if k == 0 || k > n {
        return Err(Error::Invalid(format!("frame size {k} outside 1..={n}")));
    }
    let (values, vectors) = sorted_spectrum(sigma)?;
    let degenerate = k < n && (values[k - 1] - values[k]).abs() <= RANK_TOL;
    Ok(EigenFrame {
        base: base.clone(),
        vectors: vectors.into_iter().take(k).collect(),
        eigenvalues: values.into_iter().take(k).collect(),
        degenerate,
    })
}

/// Cosine of the largest principal angle between the spans of two frames.
pub fn subspace_cos_angle(f1: &EigenFrame, f2: &EigenFrame) -> Result<f64> {
    if f1.len() != f2.len() {
        return Err(Error::DimensionMismatch {
            expected: f1.len(),
            got: f2.len(),
        });
    }
    if f1.base.ambient_dim() != f2.base.ambient_dim() {
        return Err(Error::DimensionMismatch {
            expected: f1.base.ambient_dim(),
            got: f2.base.ambient_dim(),
        });
    }
    let k = f1.len();
    if k == 0 {
        return Err(Error::Invalid("empty frames".into()));
    }
    let m = DMatrix::from_fn(k, k, |i, j| f1.vectors[i].dot(&f2.vectors[j]));
    let sv = m.singular_values();
    let smallest = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(smallest.clamp(0.0, 1.0))
}

/// `|proj_F v| / |v|`: cosine of the angle between `v` and span(F).
pub fn vector_subspace_cos(v: &Tangent, frame: &EigenFrame) -> Result<f64> {
    vector_cos_raw(v.vec(), frame)
}

pub(crate) fn vector_cos_raw(v: &DVector<f64>, frame: &EigenFrame) -> Result<f64> {
    if v.len() != frame.base.ambient_dim() {
        return Err(Error::DimensionMismatch {
            expected: frame.base.ambient_dim(),
            got: v.len(),
        });
    }
    let norm = v.norm();
    if norm < 1e-14 {
        return Err(Error::ZeroVector(norm));
    }
    Ok((frame.project(v).norm() / norm).clamp(0.0, 1.0))
}
