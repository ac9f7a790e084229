use crnsynth::crn::*;
use crnsynth::liealg::ControlAffine;
use crnsynth::ode::{integrate, OdeOptions};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn params() -> McKeithanParams {
    McKeithanParams::new([2.0, 0.5, 1.0], [1.0, 0.7, 1.3], [1.0, 1.2]).unwrap()
}

fn react(s: usize, t: usize, k: f64) -> Reaction {
    Reaction { source: s, target: t, rate: RateLaw::constant(k).unwrap() }
}

fn names(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("S{i}")).collect()
}

/// Mass action for `T + M ⇄ A → B → T + M` written out by hand.
fn mck_rhs(k: [f64; 4], c: &[f64]) -> [f64; 4] {
    let [t, m, a, b] = [c[0], c[1], c[2], c[3]];
    let bind = k[0] * t * m;
    let back = k[2] * a + k[3] * b;
    [-bind + back, -bind + back, bind - (k[1] + k[2]) * a, k[1] * a - k[3] * b]
}

#[test]
fn arrhenius_examples() {
    let r = RateLaw::new(1.0, 0.0, 8.314).unwrap();
    assert_eq!(arrhenius(&r, 300.0).unwrap(), 1.0);
    let r = RateLaw::new(1.0, 8.314 * 300.0, 8.314).unwrap();
    assert!((arrhenius(&r, 300.0).unwrap() - 0.36787944117144233).abs() < 1e-15);
    assert!(arrhenius(&r, -1.0).is_err());
    assert!(arrhenius(&r, 310.0).unwrap() > arrhenius(&r, 300.0).unwrap());
}

#[test]
fn mckeithan_laplacian() {
    let p = params();
    let v = 0.8;
    let k = p.rates(v);
    let l = p.network(v).unwrap().laplacian(300.0).unwrap();
    let want = [[-k[0], k[2], k[3]], [k[0], -(k[1] + k[2]), 0.0], [0.0, k[1], -k[3]]];
    for i in 0..3 {
        for j in 0..3 {
            assert!((l[(i, j)] - want[i][j]).abs() < 1e-15, "{i}{j}");
        }
    }
}

#[test]
fn empty_and_disjoint_networks() {
    let net = ReactionNetwork::new(names(2), vec![vec![1, 0], vec![0, 1]], vec![]).unwrap();
    assert!(net.laplacian(300.0).unwrap().iter().all(|x| *x == 0.0));
    let net = ReactionNetwork::new(
        names(4),
        vec![vec![1, 0, 0, 0], vec![0, 1, 0, 0], vec![0, 0, 1, 0], vec![0, 0, 0, 1]],
        vec![react(0, 1, 1.0), react(2, 3, 1.0)],
    )
    .unwrap();
    assert_eq!(net.deficiency(), Deficiency { n: 4, l: 2, s: 2, delta: 0 });
    let cyc = ReactionNetwork::new(names(2), vec![vec![1, 0], vec![0, 1]], vec![react(0, 1, 1.0), react(1, 0, 2.0)]).unwrap();
    assert!(cyc.strongly_connected());
}

#[test]
fn zero_state_has_zero_velocity() {
    let net = params().network(1.0).unwrap();
    assert!(net.mass_action_rhs(&[0.0; 4], 300.0).unwrap().iter().all(|x| *x == 0.0));
}

#[test]
fn mckeithan_deficiency_zero_for_all_lengths() {
    for n in 0..=5usize {
        let k_off: Vec<f64> = (0..n).map(|i| 1.0 + i as f64).collect();
        let k_p: Vec<f64> = (0..n.saturating_sub(1)).map(|i| 0.5 + i as f64).collect();
        let net = mckeithan_network(2.0, &k_off, &k_p).unwrap();
        let d = net.deficiency();
        assert_eq!(d.delta, 0, "N = {n}: {d:?}");
        if n > 0 {
            assert!(net.strongly_connected());
        }
    }
    let d = params().network(1.0).unwrap().deficiency();
    assert_eq!(d, Deficiency { n: 3, l: 1, s: 2, delta: 0 });
}

#[test]
fn simulation_conserves_and_converges() {
    let p = params();
    let net = p.network(1.5).unwrap();
    let (d1, d2) = (p.delta[0], p.delta[1]);
    let c0 = p.full_state(0.1, 0.2);
    let sim = net.simulate(&c0, 300.0, 50.0, 1e-10, 200).unwrap();
    assert_eq!(sim.states.len(), 201);
    for c in &sim.states {
        // δ1 = T + A + B, δ2 = M + A + B
        assert!((c[0] + c[2] + c[3] - d1).abs() < 1e-9);
        assert!((c[1] + c[2] + c[3] - d2).abs() < 1e-9);
        assert!(c.iter().all(|x| *x >= 0.0));
    }
    let c1 = p.full_state(0.5, 0.0);
    let a = net.simulate(&c0, 300.0, 400.0, 1e-10, 1).unwrap();
    let b = net.simulate(&c1, 300.0, 400.0, 1e-10, 1).unwrap();
    let (ea, eb) = (a.states.last().unwrap(), b.states.last().unwrap());
    for i in 0..4 {
        assert!((ea[i] - eb[i]).abs() < 1e-6, "{ea:?} vs {eb:?}");
    }
    let eq = net.equilibrium(&c0, 300.0, 1e-12).unwrap();
    let r = net.mass_action_rhs(&eq, 300.0).unwrap();
    assert!(r.iter().map(|x| x * x).sum::<f64>().sqrt() < 1e-10);
    let still = net.simulate(&eq, 300.0, 10.0, 1e-10, 5).unwrap();
    for c in &still.states {
        assert!(c.iter().zip(&eq).all(|(a, b)| (a - b).abs() < 1e-9));
    }
}

#[test]
fn lift_matches_reduced_simulation() {
    let p = params();
    let v = 0.9;
    let net = p.network(v).unwrap();
    let lift = mckeithan_lift(&p, 0.2).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let opts = OdeOptions::with_tol(1e-12, 1e-14);
    for _ in 0..100 {
        let x = rng.gen_range(0.0..0.5);
        let y = rng.gen_range(0.0..0.5);
        let full = net.simulate(&p.full_state(x, y), 300.0, 1.0, 1e-12, 1).unwrap();
        let reduced = integrate(
            |_, s, ds| {
                let f = lift.drift(&[s[0], s[1], v]);
                ds[0] = f[0];
                ds[1] = f[1];
            },
            0.0,
            &[x, y],
            1.0,
            &opts,
            &mut [],
        )
        .unwrap();
        let (a, b) = (full.states.last().unwrap(), reduced.trajectory.last());
        assert!((a[2] - b[0]).abs() < 1e-8 && (a[3] - b[1]).abs() < 1e-8, "{a:?} vs {b:?}");
    }
}

#[test]
fn lift_examples() {
    let p = McKeithanParams::new([1.0; 3], [1.0; 3], [1.0, 1.0]).unwrap();
    let s = mckeithan_lift(&p, 0.5).unwrap();
    // x = y = 0: ẋ = δ4 v
    let f = s.drift(&[0.0, 0.0, 2.0]);
    assert_eq!((f[0], f[1]), (2.0, 0.0));
    let f = s.drift(&[1.0, 1.0, 1.0]);
    assert_eq!((f[0], f[1]), (-1.0, 0.0));
    assert_eq!(s.control(&[0.3, 0.1, 2.0]), [0.0, 0.0, 1.0]);
    let frac = mckeithan_lift(&params(), 0.2).unwrap();
    assert!(frac.check_domain(&[0.1, 0.1, 0.0]).is_err());
}

#[test]
fn network_file_errors_name_the_problem() {
    let e = parse_network(r#"{"species": ["A"], "complexes": [[1]], "reactions": [], "bogus": 1}"#).unwrap_err();
    assert!(e.to_string().contains("bogus"), "{e}");
    let e = parse_network("{\n\"species\": [\"A\"],\n").unwrap_err();
    assert!(e.to_string().contains("line"), "{e}");
    let e = parse_network(r#"{"species": ["A", "B"], "complexes": [[1, 0], [0, 1]], "reactions": [{"from": 1, "to": 3, "A": 1, "E": 0}]}"#);
    assert!(e.is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn laplacian_columns_sum_to_zero(k in prop::collection::vec(0.01f64..100.0, 4), v in 0.1f64..3.0) {
        let net = mckeithan_network(k[0], &[k[1], k[2]], &[k[3]]).unwrap();
        let l = net.laplacian(300.0).unwrap();
        for j in 0..l.ncols() {
            let s: f64 = l.column(j).iter().sum();
            let m = l.column(j).amax().max(1.0);
            prop_assert!(s.abs() <= 1e-14 * m);
        }
        let p = params();
        let l = p.network(v).unwrap().laplacian(300.0).unwrap();
        for j in 0..3 {
            prop_assert!(l.column(j).iter().sum::<f64>().abs() < 1e-13);
        }
    }

    #[test]
    fn rhs_conserves_mckeithan_totals(c in prop::collection::vec(0.0f64..2.0, 4), v in 0.1f64..3.0) {
        let p = params();
        let net = p.network(v).unwrap();
        let r = net.mass_action_rhs(&c, 300.0).unwrap();
        prop_assert!((r[0] + r[2] + r[3]).abs() < 1e-12);
        prop_assert!((r[1] + r[2] + r[3]).abs() < 1e-12);
        let want = mck_rhs(p.rates(v), &c);
        for i in 0..4 {
            prop_assert!((r[i] - want[i]).abs() < 1e-12 * (1.0 + want[i].abs()));
        }
        for w in net.conservation_basis() {
            let dot: f64 = w.iter().zip(&r).map(|(a, b)| a * b).sum();
            prop_assert!(dot.abs() < 1e-12);
        }
    }

    #[test]
    fn arrhenius_increases_with_temperature(a in 0.1f64..10.0, e in 1.0f64..1e4, t in 100.0f64..1000.0) {
        let r = RateLaw::new(a, e, 8.314).unwrap();
        prop_assert!(arrhenius(&r, t + 1.0).unwrap() > arrhenius(&r, t).unwrap());
    }
}
