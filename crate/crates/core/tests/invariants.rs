//! Structural invariants checked on random inputs.

use std::sync::OnceLock;

use proptest::prelude::*;
use roughlayer::analytic::{bessel_i, bessel_k, disk_np_eigenvalue};
use roughlayer::boundary::{induced_norm, neumann_series_solve, BoundaryOperators, InducedNorm, OperatorKind, SeriesSign};
use roughlayer::mesh::{make_interface, InterfaceShape, MeshBuilder, Region};
use roughlayer::operators::{energy_product, SolveContext};
use roughlayer::report::{read_csv, write_csv, Scope};
use roughlayer::spaces::{jump_flux, jump_trace, CotraceVector, TraceVector};

struct Fixture {
    ctx: SolveContext,
    ops: BoundaryOperators,
}

fn fixture() -> &'static Fixture {
    static F: OnceLock<Fixture> = OnceLock::new();
    F.get_or_init(|| {
        let curve = make_interface(&InterfaceShape::Koch { level: 1, side: 1.0 }).unwrap();
        let mesh = MeshBuilder::new(curve, 3.0).h_target(0.1).build().unwrap();
        let ctx = SolveContext::new(&mesh, 1.0).unwrap();
        let ops = BoundaryOperators::build(&ctx).unwrap();
        Fixture { ctx, ops }
    })
}

fn data() -> impl Strategy<Value = Vec<f64>> {
    let n = fixture().ops.dim();
    prop::collection::vec(-1.0..1.0f64, n)
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn max_abs(a: &[f64]) -> f64 {
    a.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn double_layer_jumps_by_its_density(f in data()) {
        let fx = fixture();
        let f = TraceVector(f);
        let u = fx.ctx.double_layer(&f).unwrap();
        let neg: Vec<f64> = f.iter().map(|x| -x).collect();
        prop_assert!(max_diff(&jump_trace(fx.ctx.dofs(), &u), &neg) <= 1e-12);
        prop_assert!(max_abs(&jump_flux(fx.ctx.forms(), &u).unwrap()) <= 1e-9 * max_abs(&f).max(1.0));
    }

    #[test]
    fn single_layer_is_continuous_with_flux_jump(g in data()) {
        let fx = fixture();
        let g = CotraceVector(g);
        let u = fx.ctx.single_layer(&g).unwrap();
        prop_assert!(max_abs(&jump_trace(fx.ctx.dofs(), &u)) <= 1e-12);
        prop_assert!(max_diff(&jump_flux(fx.ctx.forms(), &u).unwrap(), &g) <= 1e-9);
    }

    #[test]
    fn single_layer_energy_is_the_v_form(g in data()) {
        let fx = fixture();
        let g = CotraceVector(g);
        let u = fx.ctx.single_layer(&g).unwrap();
        let e = energy_product(&fx.ctx, &u, &u);
        let v = induced_norm(&fx.ops, &g, InducedNorm::V).unwrap().powi(2);
        prop_assert!((e - v).abs() <= 1e-10 * e);
    }

    #[test]
    fn neumann_series_solves_its_equation(phi in data()) {
        let fx = fixture();
        let phi = TraceVector(phi);
        let r = neumann_series_solve(&fx.ops, &phi, SeriesSign::Plus, 1e-10, 5000).unwrap();
        let kf = fx.ops.get(OperatorKind::K).apply(&r.solution);
        let lhs: Vec<f64> = r.solution.iter().zip(&kf).map(|(f, k)| 0.5 * f - k).collect();
        let res = TraceVector(lhs.iter().zip(phi.iter()).map(|(a, b)| a - b).collect());
        let rel = induced_norm(&fx.ops, &res, InducedNorm::Vinv).unwrap()
            / induced_norm(&fx.ops, &phi, InducedNorm::Vinv).unwrap();
        prop_assert!(rel <= 1e-10 * (1.0 + 1e-6));
        prop_assert!(r.residuals.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn bessel_wronskian(n in 0u32..19, x in 0.05..40.0f64) {
        let w = bessel_i(n, x).unwrap() * bessel_k(n + 1, x).unwrap()
            + bessel_i(n + 1, x).unwrap() * bessel_k(n, x).unwrap();
        prop_assert!((w * x - 1.0).abs() <= 1e-11);
    }

    #[test]
    fn disk_eigenvalues_are_inside_the_gap(n in 0u32..20, r in 0.05..20.0f64) {
        let l = disk_np_eigenvalue(n, r).unwrap();
        prop_assert!(l > -0.5 && l < 0.0);
    }

    #[test]
    fn region_codes_round_trip(code in 0u32..70_000) {
        match Region::from_code(code) {
            Ok(r) => prop_assert_eq!(r.code(), code),
            Err(_) => prop_assert!(code > 2 + u16::MAX as u32),
        }
    }

    #[test]
    fn shape_strings_round_trip(radius in 0.01..100.0f64, m in 3usize..5000, level in 0u32..6, side in 0.01..10.0f64) {
        for s in [
            InterfaceShape::Circle { radius, segments: m },
            InterfaceShape::Square { side },
            InterfaceShape::Koch { level, side },
        ] {
            prop_assert_eq!(s.to_string().parse::<InterfaceShape>().unwrap(), s);
        }
    }

    #[test]
    fn report_csv_round_trips(values in prop::collection::vec((-1e300..1e300f64, prop::option::of(0.0..1e10f64)), 0..20)) {
        let s = Scope::new("suite", "koch(2, 1)", 0.125, 4.0);
        let records: Vec<_> = values
            .iter()
            .enumerate()
            .map(|(i, &(v, t))| match t {
                Some(t) => s.at_most(&format!("q{i}"), v, t),
                None => s.info(&format!("q{i}"), v),
            })
            .collect();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.csv");
        write_csv(&records, &p).unwrap();
        prop_assert_eq!(read_csv(&p).unwrap(), records);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn meshes_tile_the_box(side in 0.3..1.5f64, b in 2.0..4.0f64, h in 0.05..0.3f64) {
        let sq = make_interface(&InterfaceShape::Square { side }).unwrap();
        let m = MeshBuilder::new(sq, b).h_target(h).build().unwrap();
        m.validate().unwrap();
        let total = m.area_where(|_| true);
        prop_assert!((total - 4.0 * b * b).abs() <= 1e-10 * b * b);
        prop_assert!((m.area_where(Region::is_interior) - side * side).abs() <= 1e-10);
    }
}
