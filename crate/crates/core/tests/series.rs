mod common;

use common::{dd, dyadic_times, loglog_slope, Dd, Oracle};
use crnsynth::extremal::extremal_flow;
use crnsynth::linalg::det3;
use crnsynth::ode::{OdeOptions, Stop};
use crnsynth::series::flow::{symbolic_ring, target_init};
use crnsynth::series::*;
use crnsynth::{ControlAffine, SemiNormalForm, Tutorial};
use proptest::prelude::*;

fn eval_dd(s: &TruncatedSeries, x: &[f64]) -> Dd {
    let mut acc = dd(0.0);
    for (e, c) in s.terms() {
        let mut term = dd(*c);
        for (k, v) in e.iter().zip(x) {
            for _ in 0..*k {
                term = term * dd(*v);
            }
        }
        acc = acc + term;
    }
    acc
}

/// Max over the six coordinates of `|series − RK|` at each dyadic time.
fn series_errors<M: PolynomialSystem>(m: &M, oracle: Oracle, eps: f64, ord: u16, w0: f64, s0: f64) -> Vec<f64> {
    let flow = bc_flow(m, eps, ord).unwrap();
    let n = m.target().normal;
    let y0 = [m.target().level, w0, s0, n[0], n[1], n[2]];
    dyadic_times()
        .into_iter()
        .map(|t| {
            // Backward in time, as for boundary extremals.
            let t = -t;
            let rk = oracle.flow(y0, eps, dd(t), 400);
            (0..6)
                .map(|i| f64::from(eval_dd(&flow.coords[i], &[t, w0, s0]) - rk[i]).abs())
                .fold(0.0, f64::max)
        })
        .collect()
}

#[test]
fn lie_series_order_on_tutorial() {
    let m = Tutorial::new(1.0, 1.0).unwrap();
    let oracle = Oracle::Tutorial { a: 1.0, c: 1.0 };
    for eps in [1.0, -1.0] {
        for ord in [2u16, 3] {
            let es = series_errors(&m, oracle, eps, ord, 0.25, 0.5);
            let slope = loglog_slope(&dyadic_times(), &es);
            assert!(slope >= ord as f64 + 0.8, "ord {ord} eps {eps}: slope {slope} errors {es:?}");
        }
        // The bang flow is polynomial in t of degree 4, so from order 4 on
        // only coefficient rounding remains.
        let es = series_errors(&m, oracle, eps, 4, 0.25, 0.5);
        assert!(es.iter().all(|e| *e < 1e-22), "{es:?}");
    }
}

#[test]
fn lie_series_order_on_semi_normal_form() {
    let m = SemiNormalForm { us0: 1.0, ..Default::default() };
    let oracle = Oracle::Seminf { a: 1.0, b: 1.0, c: 1.0, u0: 1.0, ux: 1.0, uy: 1.0, al: [1.0; 3] };
    for ord in [2u16, 3, 4] {
        for eps in [1.0, -1.0] {
            let es = series_errors(&m, oracle, eps, ord, -0.125, 0.25);
            let slope = loglog_slope(&dyadic_times(), &es);
            assert!(slope >= ord as f64 + 0.8, "ord {ord} eps {eps}: slope {slope}");
        }
    }
}

#[test]
fn p3_series_with_zero_initial_data() {
    let m = Tutorial::new(1.0, 1.0).unwrap();
    let f = bc_flow(&m, 1.0, 3).unwrap();
    // p₃ = t²/2 − t³ at w0 = s0 = 0
    let p3 = f.p3();
    assert!((p3.coeff(&[2, 0, 0]) - 0.5).abs() < 1e-15);
    assert!((p3.coeff(&[3, 0, 0]) + 1.0).abs() < 1e-15);
    assert_eq!(p3.coeff(&[1, 0, 0]), 0.0);
}

#[test]
fn gamma_coefficients() {
    let m = Tutorial::new(1.0, 1.0).unwrap();
    for eps in [1.0, -1.0] {
        let g = gamma_surface(&m, eps, 4).unwrap();
        assert_eq!(g[1].coeff(&[2, 0, 0]), eps / 2.0);
        assert_eq!(g[1].coeff(&[1, 0, 1]), 1.0);
        assert_eq!(g[1].coeff(&[0, 1, 0]), 1.0);
    }
}

#[test]
fn gamma_x_against_integration_at_small_time() {
    let m = Tutorial::new(1.0, 1.0).unwrap();
    let s0 = 0.3;
    let w0 = s0 * s0;
    for eps in [1.0, -1.0] {
        let g = gamma_surface(&m, eps, 6).unwrap();
        let t = -1e-3;
        let sol = extremal_flow(&m, &[0.0, w0, s0], &[1.0, 0.0, 0.0], Some(eps), t, &OdeOptions::with_tol(1e-13, 1e-15), &mut [])
            .unwrap();
        let q = sol.trajectory.last();
        assert!((g[0].eval(&[t, w0, s0]) - q[0]).abs() < 1e-11);
    }
}

/// Switch points of the ε-extremal from `(0, w0, s0)`: `(t_sw, q(t_sw))`.
fn switch_point(m: &Tutorial, eps: f64, w0: f64, s0: f64) -> (f64, [f64; 3]) {
    let mut ev: Vec<crnsynth::ode::EventFn> = vec![Box::new(|_, y: &[f64]| y[5])];
    let sol = extremal_flow(m, &[0.0, w0, s0], &[1.0, 0.0, 0.0], Some(eps), -0.05, &OdeOptions::with_tol(1e-13, 1e-15), &mut ev)
        .unwrap();
    let Stop::Event { t, .. } = sol.stop else { panic!("no switch for w0={w0} s0={s0}") };
    let y = sol.trajectory.at(t);
    (t, [y[0], y[1], y[2]])
}

#[test]
fn switching_surface_against_event_detection() {
    let m = Tutorial::new(1.0, 1.0).unwrap();
    for eps in [1.0, -1.0] {
        let k = switching_surface_series(&m, eps, 5).unwrap();
        for &(t, s0) in &[(-0.01, 0.4), (-0.005, -0.3), (-0.008, 0.6)] {
            let w0 = k.w0.eval(&[t, 0.0, s0]);
            let (tsw, q) = switch_point(&m, eps, w0, s0);
            assert!((tsw - t).abs() < 1e-6, "{tsw} vs {t}");
            for i in 0..3 {
                assert!((k.k[i].eval(&[t, 0.0, s0]) - q[i]).abs() < 1e-6);
            }
        }
    }
}

#[test]
fn switching_surface_solves_p3() {
    for (a, c) in [(1.0, 1.0), (0.5, 2.0), (-1.0, 0.75)] {
        let m = Tutorial::new(a, c).unwrap();
        for eps in [1.0, -1.0] {
            let ord = 4;
            let k = switching_surface_series(&m, eps, ord).unwrap();
            let p3 = bc_flow(&m, eps, ord + 1).unwrap().coords[5].clone();
            let res = p3.substitute(1, &k.w0).truncate_in(0, ord + 1);
            assert!(res.max_abs_coeff() < 1e-12, "{a} {c} {eps}: {}", res.max_abs_coeff());
        }
    }
}

#[test]
fn crossing_sign_matches_numeric_switch_surface() {
    let m = Tutorial::new(1.0, 1.0).unwrap();
    for eps in [1.0, -1.0] {
        let k = switching_surface_series(&m, eps, 5).unwrap();
        let mut checked = 0;
        for i in 0..20 {
            let s0 = -0.9 + 1.8 * i as f64 / 19.0;
            let det = crossing_test(&k, s0);
            if det.abs() < 0.05 {
                continue;
            }
            // Switch surface parameterized by (w0, s0) from numerical
            // switch detection, then reparameterized by switching time.
            let t_star = -0.004;
            let w0 = k.w0.eval(&[t_star, 0.0, s0]);
            let h = 1e-5;
            let (t0, q) = switch_point(&m, eps, w0, s0);
            let (tw_p, pw_p) = switch_point(&m, eps, w0 + h, s0);
            let (tw_m, pw_m) = switch_point(&m, eps, w0 - h, s0);
            let (_, ps_p) = switch_point(&m, eps, w0, s0 + h);
            let (_, ps_m) = switch_point(&m, eps, w0, s0 - h);
            let pw: [f64; 3] = std::array::from_fn(|j| (pw_p[j] - pw_m[j]) / (2.0 * h));
            let ps: [f64; 3] = std::array::from_fn(|j| (ps_p[j] - ps_m[j]) / (2.0 * h));
            let t_w = (tw_p - tw_m) / (2.0 * h);
            let f = m.drift(&q);
            let v = [f[0], f[1], f[2] + eps];
            let numeric = det3(&pw, &ps, &v) / t_w;
            assert!(t0 < 0.0);
            assert_eq!(numeric.signum(), det.signum(), "eps {eps} s0 {s0}: numeric {numeric} series {det}");
            checked += 1;
        }
        assert!(checked >= 15);
    }
}

#[test]
fn locus_nonempty_for_strata_constants() {
    let m = SemiNormalForm { us0: 1.0, ..Default::default() };
    let grid = LocusGrid { w0: (-0.2, 0.2, 9), s0: (-0.4, 0.4, 9), ..Default::default() };
    let c1 = splitting_locus(&m, 3, LocusKind::C1, &grid).unwrap();
    let c12 = splitting_locus(&m, 2, LocusKind::C12, &grid).unwrap();
    assert!(c1.iter().any(|s| s.point[1] < 0.0 && s.extremal));
    assert!(!c12.is_empty());
    for s in c1.iter().chain(&c12) {
        assert!(s.residual < 1e-10);
        assert!(s.t.abs() >= grid.t_min);
    }
    // ordered by grid index
    assert!(c1.windows(2).all(|w| w[0].index < w[1].index));
}

#[test]
fn singular_leaf_alternate_x_differs() {
    let leaf = SingularLeaf::new(&Tutorial::default());
    let (z0, z) = (0.3, 0.5);
    let gap = (leaf.alternate_x(z0, z) - leaf.at(z0, z).x).abs();
    assert!(gap > 1e-8);
}

#[test]
fn singular_expansion_pole() {
    // D = −6cz vanishes at s0 = 0.
    let m = Tutorial::default();
    let ring = symbolic_ring(3);
    let mut init = target_init(&m, &ring);
    init[2] = TruncatedSeries::constant(&ring, 0.0);
    assert!(matches!(
        lie_series_flow(&m, ControlLaw::Singular, &init, 0, 3),
        Err(crnsynth::Error::Pole(_))
    ));
}

#[test]
fn singular_expansion_against_integration() {
    let m = Tutorial::default();
    let ring = Ring::new(&["t"], 6);
    let q0 = [0.0, 0.25, 0.5];
    let p0 = [1.0, 0.0, 0.0];
    let init: [TruncatedSeries; 6] = std::array::from_fn(|i| {
        TruncatedSeries::constant(&ring, if i < 3 { q0[i] } else { p0[i - 3] })
    });
    let s = lie_series_flow(&m, ControlLaw::Singular, &init, 0, 6).unwrap();
    let t = -0.01;
    let sol = extremal_flow(&m, &q0, &p0, None, t, &OdeOptions::with_tol(1e-13, 1e-15), &mut []).unwrap();
    let y = sol.trajectory.last();
    for i in 0..6 {
        assert!((s.coords[i].eval(&[t]) - y[i]).abs() < 1e-11, "{i}");
    }
}

fn arb_poly(ring: std::sync::Arc<Ring>) -> impl Strategy<Value = TruncatedSeries> {
    prop::collection::vec(((0u16..3, 0u16..3, 0u16..3), -2.0f64..2.0), 1..8).prop_map(move |ts| {
        TruncatedSeries::from_terms(&ring, ts.into_iter().map(|((a, b, c), v)| (vec![a, b, c], v)))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn product_is_associative(
        (f, g, h) in {
            let r = Ring::new(&["t", "w0", "s0"], 5);
            (arb_poly(r.clone()), arb_poly(r.clone()), arb_poly(r))
        }
    ) {
        let l = &(&f * &g) * &h;
        let r = &f * &(&g * &h);
        prop_assert!((&l - &r).max_abs_coeff() < 1e-14 * (1.0 + l.max_abs_coeff()));
        for (e, _) in l.terms() {
            prop_assert!(e.iter().map(|&k| k as u32).sum::<u32>() <= 5);
        }
    }

    #[test]
    fn flow_starts_at_initial_point(a in -2.0f64..2.0, c in 0.1f64..3.0, eps in prop::sample::select(vec![1.0, -1.0]),
                                    w0 in -1.0f64..1.0, s0 in -1.0f64..1.0) {
        let m = Tutorial::new(a, c).unwrap();
        let f = bc_flow(&m, eps, 3).unwrap();
        let v = f.eval(&[0.0, w0, s0]);
        prop_assert_eq!(v, [0.0, w0, s0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn z_series_is_exact(eps in prop::sample::select(vec![1.0, -1.0]), ord in 1u16..6, s0 in -1.0f64..1.0, t in -0.1f64..0.1) {
        let f = bc_flow(&Tutorial::default(), eps, ord).unwrap();
        prop_assert!((f.coords[2].eval(&[t, 0.3, s0]) - (s0 + eps * t)).abs() < 1e-15);
    }
}
