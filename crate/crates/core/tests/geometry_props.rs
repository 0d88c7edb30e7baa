use nalgebra::DVector;
use proptest::prelude::*;
use psm_core::geometry::{self, Chart, Point};

const PI: f64 = std::f64::consts::PI;

fn unit(v: Vec<f64>) -> Option<Point> {
    let v = DVector::from_vec(v);
    (v.norm() > 1e-3).then(|| geometry::project_to_sphere(&v).unwrap())
}

prop_compose! {
    fn sphere_point()(v in prop::collection::vec(-1.0f64..1.0, 4)
        .prop_filter_map("near zero", unit)) -> Point { v }
}

prop_compose! {
    /// Base point and a tangent of norm at most pi - 0.1.
    fn base_and_tangent()(x in sphere_point(),
                          w in prop::collection::vec(-1.0f64..1.0, 4),
                          len in 0.0f64..(PI - 0.1)) -> (Point, DVector<f64>) {
        let t = geometry::tangent_project(&x, &DVector::from_vec(w)).unwrap();
        let n = t.norm();
        let v = if n < 1e-9 { t.into_vec() * 0.0 } else { t.into_vec() * (len / n) };
        (x, v)
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn log_inverts_exp((x, v) in base_and_tangent()) {
        let t = geometry::Tangent::new(x.clone(), v.clone()).unwrap();
        let y = geometry::exp_map(&x, &t).unwrap();
        prop_assert!((y.coords().norm() - 1.0).abs() <= 1e-12);
        let back = geometry::log_map(&x, &y).unwrap();
        prop_assert!((back.vec() - &v).norm() <= 1e-9);
        let d = geometry::geodesic_distance(&x, &y).unwrap();
        prop_assert!((d - v.norm()).abs() <= 1e-10);
    }

    #[test]
    fn exp_inverts_log(x in sphere_point(), y in sphere_point()) {
        prop_assume!(x.coords().dot(y.coords()) > -1.0 + 1e-6);
        let v = geometry::log_map(&x, &y).unwrap();
        prop_assert!(x.coords().dot(v.vec()).abs() <= 1e-10);
        let z = geometry::exp_map(&x, &v).unwrap();
        prop_assert!((z.coords() - y.coords()).norm() <= 1e-9);
    }

    #[test]
    fn distance_is_a_metric(x in sphere_point(), y in sphere_point(), z in sphere_point()) {
        let dxy = geometry::geodesic_distance(&x, &y).unwrap();
        let dyx = geometry::geodesic_distance(&y, &x).unwrap();
        prop_assert_eq!(dxy, dyx);
        prop_assert!((0.0..=PI).contains(&dxy));
        let dxz = geometry::geodesic_distance(&x, &z).unwrap();
        let dzy = geometry::geodesic_distance(&z, &y).unwrap();
        prop_assert!(dxy <= dxz + dzy + 1e-12);
    }

    #[test]
    fn flat_chart_is_vector_arithmetic(a in prop::collection::vec(-5.0f64..5.0, 3),
                                       b in prop::collection::vec(-5.0f64..5.0, 3)) {
        let x = Point::from_slice(Chart::Flat, &a).unwrap();
        let y = Point::from_slice(Chart::Flat, &b).unwrap();
        let v = geometry::log_map(&x, &y).unwrap();
        let expect = DVector::from_vec(b.clone()) - DVector::from_vec(a.clone());
        prop_assert_eq!(v.vec(), &expect);
        let z = geometry::exp_map(&x, &v).unwrap();
        prop_assert_eq!(z.coords(), &(x.coords() + v.vec()));
        prop_assert_eq!(geometry::geodesic_distance(&x, &y).unwrap(), expect.norm());
    }

    #[test]
    fn geodesic_samples_are_evenly_spaced((x, v) in base_and_tangent(),
                                          steps in 2usize..40) {
        prop_assume!(v.norm() > 1e-6);
        let length = v.norm();
        let t = geometry::Tangent::new(x.clone(), v).unwrap();
        let pts = geometry::sample_geodesic(&x, &t, length, steps).unwrap();
        prop_assert_eq!(pts.len(), steps);
        let h = length / (steps - 1) as f64;
        for w in pts.windows(2) {
            let d = geometry::geodesic_distance(&w[0], &w[1]).unwrap();
            prop_assert!((d - h).abs() <= 1e-10);
        }
    }
}

#[test]
fn quarter_and_half_circles() {
    let x = Point::from_slice(Chart::Sphere, &[1.0, 0.0]).unwrap();
    let y = Point::from_slice(Chart::Sphere, &[0.0, 1.0]).unwrap();
    let v = geometry::log_map(&x, &y).unwrap();
    assert!((v.vec() - DVector::from_vec(vec![0.0, PI / 2.0])).norm() < 1e-15);

    let up = geometry::Tangent::new(x.clone(), DVector::from_vec(vec![0.0, 1.0])).unwrap();
    let pts = geometry::sample_geodesic(&x, &up, PI, 3).unwrap();
    let expect = [[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0]];
    for (p, e) in pts.iter().zip(expect) {
        assert!((p.coords() - DVector::from_vec(e.to_vec())).norm() < 1e-15);
    }
    let flat = geometry::sample_geodesic(&x, &up, 0.0, 4).unwrap();
    assert!(flat.iter().all(|p| p == &x));
}

#[test]
fn cut_locus_and_antipodes_are_errors() {
    let x = Point::from_slice(Chart::Sphere, &[1.0, 0.0, 0.0]).unwrap();
    let v = geometry::Tangent::new(x.clone(), DVector::from_vec(vec![0.0, PI, 0.0])).unwrap();
    assert!(matches!(geometry::exp_map(&x, &v), Err(psm_core::Error::CutLocus(_))));
    let anti = Point::from_slice(Chart::Sphere, &[-1.0, 0.0, 0.0]).unwrap();
    assert!(matches!(geometry::log_map(&x, &anti), Err(psm_core::Error::AntipodalPair(_))));
    assert!((geometry::geodesic_distance(&x, &anti).unwrap() - PI).abs() < 1e-15);
}
