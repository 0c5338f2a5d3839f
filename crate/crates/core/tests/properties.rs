use proptest::prelude::*;

use shardflow::alexandrov::{dual_value_and_gradient, solve_weights_with, Init, SolverOptions};
use shardflow::cli::{parse_config, random_problem};
use shardflow::convexify::{legendre_1d, Axis, GridFunction};
use shardflow::geom2d::{clip_halfplane, intersect, ConvexPolygon, HalfPlane, Point, Tolerance};
use shardflow::io;

fn point() -> impl Strategy<Value = Point> {
    (-2.0..2.0f64, -2.0..2.0f64).prop_map(|(x, y)| Point::new(x, y))
}

fn polygon() -> impl Strategy<Value = ConvexPolygon> {
    (point(), 0.1..2.0f64, 3usize..12).prop_map(|(c, r, n)| ConvexPolygon::regular(c, r, n))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn clipping_never_grows_area(p in polygon(), n in point(), off in -2.0..2.0f64) {
        prop_assume!(n.norm() > 1e-3);
        let hp = HalfPlane::new(n, off);
        let inside = clip_halfplane(&p, &hp);
        let outside = clip_halfplane(&p, &hp.complement());
        prop_assert!(inside.area() <= p.area() + 1e-12);
        prop_assert!((inside.area() + outside.area() - p.area()).abs() < 1e-9);
    }

    #[test]
    fn intersection_is_symmetric_and_bounded(p in polygon(), q in polygon()) {
        let tol = Tolerance::default();
        let a = intersect(&p, &q, &tol).area();
        let b = intersect(&q, &p, &tol).area();
        prop_assert!((a - b).abs() < 1e-9);
        prop_assert!(a <= p.area().min(q.area()) + 1e-9);
    }

    #[test]
    fn translation_preserves_area(p in polygon(), d in point()) {
        prop_assert!((p.translate(&d).area() - p.area()).abs() < 1e-12);
    }

    #[test]
    fn legendre_reverses_order(vals in prop::collection::vec(-3.0..3.0f64, 33), bump in prop::collection::vec(0.0..1.0f64, 33)) {
        let z = Axis::spanning(-1.0, 1.0, 33);
        let s = Axis::spanning(-4.0, 4.0, 65);
        let f = GridFunction::new(&[z], vals.clone()).unwrap();
        let g = GridFunction::new(&[z], vals.iter().zip(&bump).map(|(v, b)| v + b).collect()).unwrap();
        let (fs, gs) = (legendre_1d(&f, Some(s)), legendre_1d(&g, Some(s)));
        for (a, b) in fs.values.iter().zip(&gs.values) {
            prop_assert!(a >= b);
        }
    }

    #[test]
    fn triple_transform_equals_single(vals in prop::collection::vec(-3.0..3.0f64, 33)) {
        let z = Axis::spanning(-1.0, 1.0, 33);
        let s = Axis::spanning(-4.0, 4.0, 65);
        let f = GridFunction::new(&[z], vals).unwrap();
        let once = legendre_1d(&f, Some(s));
        let thrice = legendre_1d(&legendre_1d(&once, Some(z)), Some(s));
        for (a, b) in once.values.iter().zip(&thrice.values) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn parsers_never_panic(s in ".{0,200}", bytes in prop::collection::vec(any::<u8>(), 0..256)) {
        let _ = io::parse_polygon_json(&s);
        let _ = io::parse_problem_json(&s);
        let _ = io::parse_solution_json(&s);
        let _ = io::parse_partition_json(&s);
        let _ = io::parse_pieces1d_json(&s);
        let _ = io::parse_packing_csv(&s);
        let _ = io::parse_grid(&s, &bytes);
        let _ = parse_config(&s);
        let text = String::from_utf8_lossy(&bytes);
        let _ = io::parse_packing_csv(&text);
        let _ = io::parse_problem_json(&text);
    }

    #[test]
    fn grid_header_fuzz_never_panics(o in -1e3..1e3f64, h in -1.0..1.0f64, n0 in 0usize..6, n1 in 0usize..6, bytes in prop::collection::vec(any::<u8>(), 0..400)) {
        let header = format!(r#"{{"origin":[{o},{o}],"spacing":[{h},{h}],"dims":[{n0},{n1}]}}"#);
        let _ = io::parse_grid(&header, &bytes);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn dual_is_convex_and_gradient_monotone(k in 2usize..12, seed in 0u64..1000, d in prop::collection::vec(-0.3..0.3f64, 12)) {
        let data = random_problem(k, seed);
        let h0 = vec![0.0; k];
        let h1: Vec<f64> = d[..k].to_vec();
        let mid: Vec<f64> = h1.iter().map(|x| 0.5 * x).collect();
        let (f0, g0) = dual_value_and_gradient(&data, &h0).unwrap();
        let (f1, g1) = dual_value_and_gradient(&data, &h1).unwrap();
        let (fm, _) = dual_value_and_gradient(&data, &mid).unwrap();
        prop_assert!(fm <= 0.5 * (f0 + f1) + 1e-10);
        let mono: f64 = g1.iter().zip(&g0).zip(&h1).map(|((a, b), x)| (a - b) * x).sum();
        prop_assert!(mono >= -1e-10);
    }

    #[test]
    fn heights_unique_up_to_constant(k in 2usize..30, seed in 0u64..1000, ax in 0.2..0.8f64, ay in 0.2..0.8f64) {
        let data = random_problem(k, seed);
        let mut a = solve_weights_with(&data, &SolverOptions::default()).unwrap().potential;
        let opts = SolverOptions {
            init: Init::Voronoi { anchor: Point::new(ax, ay), scale: None },
            ..SolverOptions::default()
        };
        let mut b = solve_weights_with(&data, &opts).unwrap().potential;
        a.normalize();
        b.normalize();
        for (x, y) in a.heights.iter().zip(&b.heights) {
            prop_assert!((x - y).abs() < 1e-6);
        }
    }
}
