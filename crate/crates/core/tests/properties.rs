use fuelgames::nplayer::diagonal_value;
use fuelgames::*;
use proptest::prelude::*;

fn q() -> CostSpec {
    CostSpec::quadratic()
}

const C3: f64 = 2.862265734192829;

fn state(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-20.0..20.0f64, n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn resolvent_parity(x in -10.0..10.0f64, n in 1usize..8, alpha in 0.2..20.0f64) {
        let r = Resolvent::new(n, alpha, q()).unwrap();
        prop_assert!((p_n(x, &r).unwrap() - p_n(-x, &r).unwrap()).abs() <= 1e-10);
        let (a1, a2) = p_n_derivs(x, &r).unwrap();
        let (b1, b2) = p_n_derivs(-x, &r).unwrap();
        prop_assert!((a1 + b1).abs() <= 1e-10);
        prop_assert!((a2 - b2).abs() <= 1e-10);
    }

    #[test]
    fn quadratic_ratio_is_affine(x in -10.0..10.0f64, n in 1usize..8, alpha in 0.2..20.0f64) {
        let r = Resolvent::new(n, alpha, q()).unwrap();
        let k = r.k_ratio();
        let (d1, d2) = p_n_derivs(x, &r).unwrap();
        prop_assert!(((d1 - 1.0) / d2 - (x - alpha * k * k / 2.0)).abs() <= 1e-9 * (1.0 + alpha * k * k));
    }

    #[test]
    fn slope_matches_central_difference(x in -10.0..10.0f64, n in 1usize..6) {
        let r = Resolvent::new(n, 2.0, q()).unwrap();
        let h = 1e-4;
        let fd = (p_n(x + h, &r).unwrap() - p_n(x - h, &r).unwrap()) / (2.0 * h);
        prop_assert!((fd - p_n_derivs(x, &r).unwrap().0).abs() <= 1e-5);
    }

    #[test]
    fn deviation_identity(x in state(5)) {
        let s = StateVector::new(x.clone());
        let m = s.mean();
        for (i, xi) in x.iter().enumerate() {
            prop_assert!((s.y(i) - 1.25 * (xi - m)).abs() <= 1e-12 * (1.0 + xi.abs() + m.abs()));
        }
    }

    #[test]
    fn classification_partitions(x in state(3), shift in -50.0..50.0f64) {
        let s = StateVector::new(x.clone());
        let label = classify(&s, C3).unwrap();
        let ys = s.ys();
        let max = ys.iter().fold(0.0f64, |m, y| m.max(y.abs()));
        match label {
            RegionLabel::CommonWait => prop_assert!(max < C3),
            RegionLabel::Boundary { .. } => prop_assert!((max - C3).abs() <= 1e-12 * C3.max(1.0)),
            RegionLabel::Action { player, side } => {
                prop_assert!(ys[player].abs() > C3);
                prop_assert_eq!(side, Side::of(ys[player]));
                // Weakly beats smaller indices, strictly beats larger ones.
                for (j, y) in ys.iter().enumerate() {
                    if j < player {
                        prop_assert!(ys[player].abs() >= y.abs());
                    } else if j > player {
                        prop_assert!(ys[player].abs() > y.abs());
                    }
                }
            }
        }
        let moved = StateVector::new(x.iter().map(|v| v + shift).collect());
        // Translation changes y only by rounding; compare away from the edge.
        if (max - C3).abs() > 1e-9 {
            prop_assert_eq!(classify(&moved, C3).unwrap(), label);
        }
    }

    #[test]
    fn algorithm1_bounds(n in 2usize..7, seed in any::<u64>()) {
        let streams = fuelgames::rng::Streams::new(seed);
        let x: Vec<f64> = (0..n).map(|i| -20.0 + 40.0 * streams.uniform_pair(i as u32, 0, 0).0).collect();
        let c_n = solve_c_n(n, 2.0, &q()).unwrap();
        let range = x.iter().cloned().fold(f64::MIN, f64::max) - x.iter().cloned().fold(f64::MAX, f64::min);
        let seq = algorithm1(&StateVector::new(x), c_n).unwrap();
        prop_assert!(seq.total_distance <= n as f64 * range + 1e-9);
        let end = seq.endpoint();
        prop_assert!(end.ys().iter().all(|y| y.abs() <= c_n + 1e-9));
        let charged: f64 = (0..n).map(|i| seq.charged_to(i)).sum();
        prop_assert!((charged - seq.total_distance).abs() <= 1e-9);
    }

    #[test]
    fn value_is_translation_invariant(x in state(3), shift in -30.0..30.0f64, i in 0usize..3) {
        let params = GameParams::new(3, 2.0).unwrap();
        let t = Thresholds::solve(3, 2.0, &q()).unwrap();
        let v = |x: Vec<f64>| value_i(&NeValueRequest { player: i, x: StateVector::new(x), params, thresholds: t.clone() }).unwrap();
        let a = v(x.clone());
        let b = v(x.iter().map(|z| z + shift).collect());
        prop_assert!((a - b).abs() <= 1e-8 * (1.0 + a.abs()));
    }

    #[test]
    fn value_is_exchange_symmetric(x in prop::collection::vec(-2.0..2.0f64, 3), i in 0usize..3) {
        // Inside the waiting region no jump order is involved, so any
        // relabeling of players must carry values along.
        let params = GameParams::new(3, 2.0).unwrap();
        let t = Thresholds::solve(3, 2.0, &q()).unwrap();
        let v = |p: usize, x: Vec<f64>| value_i(&NeValueRequest { player: p, x: StateVector::new(x), params, thresholds: t.clone() }).unwrap();
        let perm = [2usize, 0, 1];
        let mut sx = vec![0.0; 3];
        for (j, &pj) in perm.iter().enumerate() {
            sx[pj] = x[j];
        }
        prop_assert!((v(i, x.clone()) - v(perm[i], sx)).abs() <= 1e-12);
    }

    #[test]
    fn mfg_value_shape(m0 in -5.0..5.0f64, d in 0.0..6.0f64, alpha in 0.5..8.0f64) {
        let sol = MfgSolution::solve(m0, alpha, &q()).unwrap();
        let a = sol.value(m0 + d).unwrap();
        prop_assert!((a - sol.value(m0 - d).unwrap()).abs() <= 1e-12);
        prop_assert!((sol.slope(m0 + sol.c).unwrap() - 1.0).abs() <= 1e-8);
        prop_assert!((sol.slope(m0 - sol.c).unwrap() + 1.0).abs() <= 1e-8);
        if d > sol.c {
            prop_assert!((a - sol.value(m0 + sol.c).unwrap() - (d - sol.c)).abs() <= 1e-10);
        }
    }

    #[test]
    fn control_is_odd(m0 in -5.0..5.0f64, d in 0.0..10.0f64, c in 0.1..5.0f64) {
        let up = mfg_control_step(m0 + d, m0, c);
        let down = mfg_control_step(m0 - d, m0, c);
        prop_assert!((up + down).abs() <= 1e-12 * (1.0 + m0.abs() + d));
        prop_assert!(((m0 + d + up) - m0).abs() <= c + 1e-12 * (1.0 + m0.abs() + d));
    }
}

#[test]
fn value_grows_along_rays() {
    let params = GameParams::new(3, 2.0).unwrap();
    let t = Thresholds::solve(3, 2.0, &q()).unwrap();
    for dir in [[1.0, 0.0, 0.0], [1.0, -1.0, 0.0], [0.3, -0.5, 0.2]] {
        let mut last = f64::NEG_INFINITY;
        let mut last_y = 0.0;
        for s in 0..200 {
            let x: Vec<f64> = dir.iter().map(|d| d * s as f64 * 0.05).collect();
            let sv = StateVector::new(x.clone());
            let y = sv.y(0).abs();
            let v = value_i(&NeValueRequest { player: 0, x: sv, params, thresholds: t.clone() }).unwrap();
            if y >= last_y && y <= t.c_n {
                assert!(v >= last - 1e-12, "{dir:?} step {s}: {v} < {last}");
            }
            last = v;
            last_y = y;
        }
    }
}

#[test]
fn thresholds_converge_at_rate_one_over_n() {
    let c = solve_c(2.0, &q()).unwrap();
    for n in [4, 8, 16, 32] {
        let ratio = (solve_c_n(2 * n, 2.0, &q()).unwrap() - c) / (solve_c_n(n, 2.0, &q()).unwrap() - c);
        assert!((0.3..=0.7).contains(&ratio), "N {n}: ratio {ratio}");
    }
    let e10 = (solve_c_n(10, 2.0, &q()).unwrap() - c).abs();
    let e100 = (solve_c_n(100, 2.0, &q()).unwrap() - c).abs();
    assert!(e100 < e10 / 5.0);
}

#[test]
fn thresholds_increase_with_discount() {
    for n in [2, 3, 5, 10] {
        let cs: Vec<f64> = [1.0, 2.0, 4.0].iter().map(|&a| solve_c_n(n, a, &q()).unwrap()).collect();
        assert!(cs[0] < cs[1] && cs[1] < cs[2], "N {n}: {cs:?}");
    }
    let cs: Vec<f64> = [1.0, 2.0, 4.0].iter().map(|&a| solve_c(a, &q()).unwrap()).collect();
    assert!(cs[0] < cs[1] && cs[1] < cs[2], "{cs:?}");
}

#[test]
fn monotone_in_player_count() {
    for alpha in [0.2, 2.0, 20.0] {
        let mut prev: Option<(f64, f64)> = None;
        for n in 2..=50 {
            let t = Thresholds::solve(n, alpha, &q()).unwrap();
            let v = diagonal_value(&t).unwrap();
            if let Some((pc, pv)) = prev {
                assert!(t.c_n < pc && v > pv, "alpha {alpha}, N {n}");
            }
            prev = Some((t.c_n, v));
        }
    }
}

#[test]
fn face_products_up_to_sixteen() {
    for n in 2..=16 {
        let p = build_polyhedron(n, 1.5).unwrap();
        let want = ((n as f64 - 1.0) / n as f64).sqrt();
        for j in 0..2 * n {
            assert!((p.d_dot_n(j) - want).abs() <= 1e-12);
            if j < n {
                for (a, b) in p.normals[j].iter().zip(&p.normals[j + n]) {
                    assert_eq!(*a, -*b);
                }
            }
        }
    }
}
