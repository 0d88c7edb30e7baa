use nalgebra::{DMatrix, DVector, SymmetricEigen};
use proptest::prelude::*;
use psm_core::datagen::{self, Shift};
use psm_core::fitting::{self, FitConfig, ScoreSpectrum, StopReason, Submanifold};
use psm_core::geometry::{self, Chart, Point};
use psm_core::stats::{self, KernelSpec};
use psm_core::viz;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn gaussian_cloud(seed: u64, n: usize, scales: &[f64]) -> Vec<Point> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = Normal::new(0.0, 1.0).unwrap();
    (0..n)
        .map(|_| {
            let c: Vec<f64> = scales.iter().map(|s| s * g.sample(&mut rng) + 0.5).collect();
            Point::from_slice(Chart::Flat, &c).unwrap()
        })
        .collect()
}

fn flat_mean(data: &[Point]) -> Point {
    let mut m = DVector::zeros(data[0].ambient_dim());
    for p in data {
        m += p.coords();
    }
    Point::flat(m / data.len() as f64).unwrap()
}

/// Top eigenvectors of the uncentered second moment about `a`, computed
/// directly.
fn top_axes(data: &[Point], a: &Point, k: usize) -> Vec<DVector<f64>> {
    let d = a.ambient_dim();
    let mut s = DMatrix::zeros(d, d);
    for p in data {
        let y = p.coords() - a.coords();
        s += &y * y.transpose();
    }
    let eig = SymmetricEigen::new(s / data.len() as f64);
    let mut idx: Vec<usize> = (0..d).collect();
    idx.sort_by(|&i, &j| eig.eigenvalues[j].partial_cmp(&eig.eigenvalues[i]).unwrap());
    idx[..k].iter().map(|&i| eig.eigenvectors.column(i).into_owned()).collect()
}

fn dist_to_span(p: &Point, a: &Point, axes: &[DVector<f64>]) -> f64 {
    let mut r = p.coords() - a.coords();
    for e in axes {
        r -= e * e.dot(&r);
    }
    r.norm()
}

fn flat_fit() -> (Vec<Point>, Submanifold) {
    let data = gaussian_cloud(1, 200, &[1.0, 0.7, 0.1, 0.05]);
    let a = flat_mean(&data);
    let cfg = FitConfig {
        kernel: KernelSpec::global(),
        ..FitConfig::default()
    };
    let sub = fitting::fit_submanifold(&data, &a, &cfg).unwrap();
    (data, sub)
}

#[test]
fn flat_global_fit_stays_in_the_top_plane() {
    let (data, sub) = flat_fit();
    let axes = top_axes(&data, &sub.start, 2);
    let mut worst = 0.0f64;
    for net in &sub.nets {
        assert!(net.levels() > 1);
        for p in &net.points {
            worst = worst.max(dist_to_span(p, &sub.start, &axes));
        }
    }
    assert!(worst <= 1e-8, "max distance to plane {worst}");

    let pd1 = &viz::principal_directions(&sub)[0];
    for p in &pd1.points {
        assert!(dist_to_span(p, &sub.start, &axes[..1]) <= 1e-8);
    }
}

#[test]
fn flat_step_continues_straight() {
    let (data, sub) = flat_fit();
    let cfg = sub.config;
    let e1 = sub.frame_at_start.vector(0).clone();
    let cur = &sub.start;
    let prev = Point::flat(cur.coords() - &e1 * cfg.epsilon).unwrap();
    let next = fitting::step_net(&prev, cur, &data, &cfg).unwrap();
    assert!((next.coords() - (cur.coords() + &e1 * cfg.epsilon)).norm() < 1e-12);
}

#[test]
fn flat_flow_follows_first_component() {
    let data = gaussian_cloud(2, 150, &[2.0, 0.7, 0.3]);
    let a = flat_mean(&data);
    let cfg = FitConfig {
        kernel: KernelSpec::global(),
        dim: 1,
        ..FitConfig::default()
    };
    let sub = fitting::fit_flow(&data, &a, &cfg).unwrap();
    assert_eq!(sub.nets.len(), 2);
    let axis = top_axes(&data, &a, 1);
    for net in &sub.nets {
        for p in &net.points {
            assert!(dist_to_span(p, &a, &axis) <= 1e-8);
        }
    }
}

/// Points on the great circle through e0 and e1 of S^3, with tangent noise.
fn noisy_circle(seed: u64, n: usize, noise: f64, span: f64) -> Vec<Point> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = Normal::new(0.0, noise).unwrap();
    (0..n)
        .map(|i| {
            let t = -span + 2.0 * span * i as f64 / (n - 1) as f64;
            let p = Point::from_slice(Chart::Sphere, &[t.cos(), t.sin(), 0.0, 0.0]).unwrap();
            let w = DVector::from_vec(vec![0.0, 0.0, g.sample(&mut rng), g.sample(&mut rng)]);
            let v = geometry::tangent_project(&p, &w).unwrap();
            geometry::exp_map(&p, &v).unwrap()
        })
        .collect()
}

fn circle_distance(p: &Point) -> f64 {
    let c = p.coords();
    let off = (c[2] * c[2] + c[3] * c[3]).sqrt();
    off.atan2((c[0] * c[0] + c[1] * c[1]).sqrt())
}

#[test]
fn flow_recovers_a_great_circle() {
    let data = noisy_circle(4, 100, 1e-3, 1.0);
    let a = stats::frechet_mean(&data, 1e-12, 1000).unwrap();
    let cfg = FitConfig { dim: 1, ..FitConfig::default() };
    let sub = fitting::fit_flow(&data, &a, &cfg).unwrap();
    for net in &sub.nets {
        assert!(net.levels() > 10);
        for p in &net.points {
            assert!(circle_distance(p) < 5e-3);
        }
    }
}

#[test]
fn flow_on_symmetric_data_is_mirrored() {
    let data: Vec<Point> = (-20..=20)
        .flat_map(|i| {
            let t = i as f64 * 0.03;
            [0.02, -0.02].map(|z: f64| {
                geometry::project_to_sphere(&DVector::from_vec(vec![t.cos(), t.sin(), z, 0.0])).unwrap()
            })
        })
        .collect();
    let a = Point::from_slice(Chart::Sphere, &[1.0, 0.0, 0.0, 0.0]).unwrap();
    let cfg = FitConfig { dim: 1, ..FitConfig::default() };
    let sub = fitting::fit_flow(&data, &a, &cfg).unwrap();
    let (n1, n2) = (&sub.nets[0], &sub.nets[1]);
    assert_eq!(n1.points.len(), n2.points.len());
    for (p, q) in n1.points.iter().zip(&n2.points) {
        let (p, q) = (p.coords(), q.coords());
        assert!((p[0] - q[0]).abs() < 1e-6 && (p[1] + q[1]).abs() < 1e-6);
        assert!((p[2] - q[2]).abs() < 1e-6 && (p[3] - q[3]).abs() < 1e-6);
    }
}

fn s_curve_fit() -> (Vec<Point>, Submanifold) {
    let d = datagen::gen_s_curve(200, 7, 1.0 / 32.0, Shift::default()).unwrap();
    let a = stats::frechet_mean(&d.points, 1e-12, 1000).unwrap();
    let sub = fitting::fit_submanifold(&d.points, &a, &FitConfig::default()).unwrap();
    (d.points, sub)
}

#[test]
fn s_curve_nets_satisfy_structural_invariants() {
    let (data, sub) = s_curve_fit();
    let eps = sub.config.epsilon;
    assert_eq!(sub.nets.len(), 180);
    for (i, net) in sub.nets.iter().enumerate() {
        assert_eq!(net.direction_index, i + 1);
        assert_eq!(net.points[0], sub.start);
        for p in &net.points {
            assert!((p.coords().norm() - 1.0).abs() <= 1e-12);
        }
        for w in net.points.windows(2) {
            assert!((geometry::geodesic_distance(&w[0], &w[1]).unwrap() - eps).abs() <= 1e-8);
        }
        for w in net.points.windows(3) {
            let fwd = geometry::log_map(&w[1], &w[2]).unwrap();
            let back = geometry::log_map(&w[1], &w[0]).unwrap();
            assert!(fwd.vec().dot(back.vec()) < 0.0);
        }
        if net.stop_reason == StopReason::ConvexHullExit {
            let n = net.points.len();
            let (cur, last) = (&net.points[n - 2], &net.points[n - 1]);
            let back = geometry::log_map(last, cur).unwrap();
            for x in &data {
                assert!(back.vec().dot(geometry::log_map(last, x).unwrap().vec()) >= 0.0);
            }
        }
        assert!(fitting::net_length(net) <= sub.config.max_net_length + eps + 1e-9);
    }
}

#[test]
fn fit_is_deterministic_across_pool_sizes() {
    let d = datagen::gen_s_curve(120, 3, 1.0 / 32.0, Shift::default()).unwrap();
    let a = stats::frechet_mean(&d.points, 1e-12, 1000).unwrap();
    let cfg = FitConfig { num_directions: 40, ..FitConfig::default() };
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| fitting::fit_submanifold(&d.points, &a, &cfg).unwrap())
    };
    let one = run(1);
    assert_eq!(one, run(4));
    assert_eq!(one, fitting::fit_submanifold(&d.points, &a, &cfg).unwrap());
}

#[test]
fn seeds_lie_on_the_epsilon_circle() {
    let (data, sub) = s_curve_fit();
    let cfg = sub.config;
    let seeds = fitting::seed_directions(&sub.start, &sub.frame_at_start, &cfg).unwrap();
    assert_eq!(seeds.len(), 180);
    for s in &seeds {
        assert!((geometry::geodesic_distance(&sub.start, s).unwrap() - cfg.epsilon).abs() <= 1e-10);
    }
    let back = geometry::Tangent::new(sub.start.clone(), -sub.frame_at_start.vector(0) * cfg.epsilon).unwrap();
    let expect = geometry::exp_map(&sub.start, &back).unwrap();
    assert!((seeds[89].coords() - expect.coords()).norm() < 1e-14);
    for (s, net) in seeds.iter().zip(&sub.nets) {
        assert_eq!(s, &net.points[1]);
    }
    drop(data);
}

#[test]
fn net_length_matches_pairwise_sum() {
    let (_, sub) = s_curve_fit();
    for net in sub.nets.iter().step_by(17) {
        let direct: f64 = (1..net.points.len())
            .map(|i| geometry::geodesic_distance(&net.points[i - 1], &net.points[i]).unwrap())
            .sum();
        assert!((fitting::net_length(net) - direct).abs() < 1e-12);
        assert!((fitting::net_length(net) - net.levels() as f64 * sub.config.epsilon).abs() < 1e-8);
    }
}

/// Rotates every net point about the start by `pi/2` in the plane of the
/// given ambient directions.
fn rotate_nets(sub: &Submanifold, from: &DVector<f64>, to: &DVector<f64>) -> Submanifold {
    let mut out = sub.clone();
    for net in &mut out.nets {
        for p in &mut net.points {
            let d = p.coords() - sub.start.coords();
            let (a, b) = (from.dot(&d), to.dot(&d));
            let r = &d - from * a - to * b + to * a - from * b;
            *p = Point::flat(sub.start.coords() + r).unwrap();
        }
    }
    out
}

#[test]
fn flat_score_equals_spectrum_times_weights() {
    let (data, sub) = flat_fit();
    let score = fitting::variation_score(&sub, &data).unwrap();
    let sigma = stats::centered_covariance(&sub.start, &data, &KernelSpec::global()).unwrap();
    let (vals, _) = stats::sorted_spectrum(&sigma).unwrap();
    let weights: f64 = sub
        .nets
        .iter()
        .flat_map(|n| (1..n.points.len()).map(|i| fitting::polar_weight(2, 180, i, sub.config.epsilon)))
        .sum();
    let expect = (vals[0] + vals[1]) * weights;
    assert!(((score.total - expect) / expect).abs() <= 1e-6);
    assert_eq!(score.per_net.len(), 180);

    let e2 = sub.frame_at_start.vector(1).clone();
    let axes = top_axes(&data, &sub.start, 3);
    let mut e3 = axes[2].clone();
    e3 -= sub.frame_at_start.vector(0) * sub.frame_at_start.vector(0).dot(&e3);
    e3 -= &e2 * e2.dot(&e3);
    let rotated = rotate_nets(&sub, &e2, &e3.normalize());
    let lower = fitting::variation_score(&rotated, &data).unwrap();
    assert!(lower.total < score.total);
}

#[test]
fn second_moment_spectrum_grows_with_offset() {
    // sum of in-plane eigenvalues at B = those at A plus |B - A|^2
    let (data, sub) = flat_fit();
    let g = KernelSpec::global();
    let at = |p: &Point| {
        let f = stats::eigenframe(&stats::local_covariance(p, &data, &g).unwrap(), p, 2).unwrap();
        f.eigenvalues().iter().sum::<f64>()
    };
    let base = at(&sub.start);
    for net in sub.nets.iter().step_by(23) {
        let b = net.points.last().unwrap();
        let d2 = (b.coords() - sub.start.coords()).norm_squared();
        assert!((at(b) - base - d2).abs() < 1e-9);
    }
    let s1 = fitting::variation_score_with(&sub, &data, ScoreSpectrum::SecondMoment).unwrap();
    let s2 = fitting::variation_score_with(&sub, &data, ScoreSpectrum::Centered).unwrap();
    assert!(s1.total > s2.total);
}

#[test]
fn score_vanishes_for_orthogonal_steps() {
    // data along e0 only; a hand-built net stepping along e1
    let data: Vec<Point> = (-5..=5)
        .flat_map(|i| {
            let t = i as f64 * 0.1;
            [Point::from_slice(Chart::Flat, &[t, 0.0, 0.0]).unwrap(), Point::from_slice(Chart::Flat, &[t, 0.0, 0.01]).unwrap()]
        })
        .collect();
    let (_, mut sub) = flat_fit();
    sub.start = Point::from_slice(Chart::Flat, &[0.0; 3]).unwrap();
    sub.config.dim = 1;
    sub.nets.truncate(1);
    sub.nets[0].points = (0..4)
        .map(|i| Point::from_slice(Chart::Flat, &[0.0, 0.02 * i as f64, 0.0]).unwrap())
        .collect();
    let s = fitting::variation_score(&sub, &data).unwrap();
    assert!(s.total.abs() < 1e-15);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn step_ignores_eigenvector_signs(i in 1usize..60, l in 0usize..180, f0: bool, f1: bool) {
        let (data, sub) = s_curve_fit_cached();
        let net = &sub.nets[l];
        prop_assume!(i < net.points.len());
        let (prev, cur) = (&net.points[i - 1], &net.points[i]);
        let sigma = stats::local_covariance(cur, data, &sub.config.kernel).unwrap();
        let Ok(frame) = stats::eigenframe(&sigma, cur, 2) else { return Ok(()) };
        let flipped = frame.with_signs_flipped(&[f0, f1]);
        let a = fitting::advance(prev, cur, &frame, sub.config.epsilon);
        let b = fitting::advance(prev, cur, &flipped, sub.config.epsilon);
        match (a, b) {
            (Ok(a), Ok(b)) => prop_assert_eq!(a, b),
            (a, b) => prop_assert_eq!(a.is_err(), b.is_err()),
        }
    }
}

fn s_curve_fit_cached() -> &'static (Vec<Point>, Submanifold) {
    static FIT: std::sync::OnceLock<(Vec<Point>, Submanifold)> = std::sync::OnceLock::new();
    FIT.get_or_init(s_curve_fit)
}

#[test]
fn rejects_bad_inputs() {
    let (data, sub) = s_curve_fit_cached();
    let flat = Point::from_slice(Chart::Flat, &[0.0; 4]).unwrap();
    assert!(matches!(
        fitting::fit_submanifold(data, &flat, &sub.config),
        Err(psm_core::Error::ChartMismatch)
    ));
    assert!(fitting::fit_submanifold(&[], &sub.start, &sub.config).is_err());
    let bad = FitConfig { epsilon: 0.5, ..sub.config };
    assert!(fitting::fit_submanifold(data, &sub.start, &bad).is_err());
    // a single point has no spread
    assert!(matches!(
        fitting::fit_submanifold(&data[..1], &data[0], &sub.config),
        Err(psm_core::Error::RankDeficient { .. })
    ));
}
