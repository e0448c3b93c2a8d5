use nalgebra::DMatrix;
use ndarray::Array2;
use posbias_core::linalg::{row_stochastic_defect, spectral_norm};
use posbias_core::theory::monotone_path_count;
use posbias_core::{init_stack, rollout, rope_rotate, MaskGraph, MaskKind, PeMode};
use proptest::prelude::*;

fn mask_kind(n: usize) -> impl Strategy<Value = MaskKind> {
    prop_oneof![
        Just(MaskKind::Causal),
        Just(MaskKind::Complete),
        (1..=n).prop_map(|k| MaskKind::Prefix { prefix_len: k }),
        (2..=n.max(2)).prop_map(move |w| MaskKind::SlidingWindow { width: w.min(n) }),
    ]
    .prop_filter("valid for n", move |k| k.validate(n).is_ok())
}

fn pe_mode() -> impl Strategy<Value = PeMode> {
    prop_oneof![
        Just(PeMode::NoPe),
        Just(PeMode::Sinusoidal),
        (0.05f64..2.0).prop_map(|m| PeMode::Decay { m, symmetric: false }),
        Just("rope".parse::<PeMode>().unwrap()),
    ]
}

fn case() -> impl Strategy<Value = (usize, MaskKind, PeMode, usize, u64, f64)> {
    (2usize..9).prop_flat_map(|n| (Just(n), mask_kind(n), pe_mode(), 1usize..7, any::<u64>(), 0.1f64..3.0))
}

/// DP count of non-decreasing sequences `j = k_0 <= k_1 <= ... <= k_{t+1} = j + x`.
fn dp_paths(t: usize, x: usize) -> u128 {
    let mut ways = vec![0u128; x + 1];
    ways[0] = 1;
    for _ in 0..=t {
        let mut next = vec![0u128; x + 1];
        for to in 0..=x {
            next[to] = (0..=to).map(|from| ways[from]).sum();
        }
        ways = next;
    }
    ways[x]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn maps_and_products_are_row_stochastic((n, kind, pe, depth, seed, c) in case()) {
        let stack = init_stack(4, depth, c, seed).unwrap();
        let x0 = Array2::from_shape_fn((n, 4), |(i, j)| ((seed % 97) as f64 + (i * 4 + j) as f64).cos());
        let g = MaskGraph::new(kind, n).unwrap();
        let tr = rollout(x0.view(), &stack, &g, &pe).unwrap();
        for (a, p) in tr.maps.iter().zip(&tr.cumulative) {
            prop_assert!(row_stochastic_defect(a.view()) < 1e-12);
            prop_assert!(row_stochastic_defect(p.view()) < 1e-10 * n as f64);
            for i in 0..n {
                for j in 0..n {
                    prop_assert!(a.get(i, j) >= 0.0);
                    if !g.allows(i, j) {
                        prop_assert_eq!(a.get(i, j), 0.0);
                    }
                }
            }
        }
    }

    #[test]
    fn token_norms_stay_bounded((n, kind, _pe, depth, seed, c) in case()) {
        // Convex combinations followed by ‖W_V‖₂ = 1 cannot grow the largest row norm.
        let stack = init_stack(4, depth, c, seed).unwrap();
        let x0 = Array2::from_shape_fn((n, 4), |(i, j)| ((i + 2 * j) as f64 * 0.7).sin());
        let g = MaskGraph::new(kind, n).unwrap();
        let tr = rollout(x0.view(), &stack, &g, &PeMode::NoPe).unwrap();
        let row_max = |x: &Array2<f64>| x.rows().into_iter().map(|r| r.dot(&r).sqrt()).fold(0.0, f64::max);
        let start = row_max(&tr.states[0]);
        for s in &tr.states {
            prop_assert!(row_max(s) <= start * (1.0 + 1e-9));
        }
    }

    #[test]
    fn center_columns_never_lose_reachability((n, depth, seed) in (2usize..9, 1usize..10, any::<u64>())) {
        // Under a causal mask column 1 is positive in every row of every P^(t).
        let stack = init_stack(3, depth, 2.0, seed).unwrap();
        let x0 = Array2::from_shape_fn((n, 3), |(i, j)| (i as f64 - j as f64) / 3.0);
        let g = MaskGraph::new(MaskKind::Causal, n).unwrap();
        let tr = rollout(x0.view(), &stack, &g, &PeMode::NoPe).unwrap();
        for p in &tr.cumulative {
            prop_assert!(p.column(0).iter().all(|&v| v > 0.0));
        }
    }

    #[test]
    fn rope_rotation_is_an_isometry(v in prop::collection::vec(-5.0f64..5.0, 1..5), pos in 0usize..200, base in 1.5f64..20000.0) {
        let mut v = v;
        if v.len() % 2 == 1 { v.push(0.5); }
        let theta: Vec<f64> = (0..v.len() / 2).map(|k| base.powf(-2.0 * k as f64 / v.len() as f64)).collect();
        let r = rope_rotate(&v, pos, &theta).unwrap();
        let n0: f64 = v.iter().map(|a| a * a).sum();
        let n1: f64 = r.iter().map(|a| a * a).sum();
        prop_assert!((n0 - n1).abs() <= 1e-10 * n0.max(1.0));
    }

    #[test]
    fn rope_scores_depend_on_offset_only(q in prop::collection::vec(-2.0f64..2.0, 4), k in prop::collection::vec(-2.0f64..2.0, 4), i in 1usize..50, j in 1usize..50, shift in 0usize..50) {
        let theta = [0.3, 0.01];
        let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
        let s0 = dot(&rope_rotate(&q, i, &theta).unwrap(), &rope_rotate(&k, j, &theta).unwrap());
        let s1 = dot(&rope_rotate(&q, i + shift, &theta).unwrap(), &rope_rotate(&k, j + shift, &theta).unwrap());
        prop_assert!((s0 - s1).abs() < 1e-9);
    }

    #[test]
    fn spectral_norm_matches_svd(vals in prop::collection::vec(-3.0f64..3.0, 1..50)) {
        let d = (vals.len() as f64).sqrt().floor() as usize;
        let w = Array2::from_shape_vec((d, d), vals[..d * d].to_vec()).unwrap();
        let m = DMatrix::from_row_slice(d, d, &vals[..d * d]);
        let svd = m.singular_values().max();
        prop_assert!((spectral_norm(w.view()) - svd).abs() <= 1e-8 * svd.max(1.0));
    }

    #[test]
    fn init_stack_hits_caps(d in 1usize..7, depth in 1usize..4, c in 0.05f64..4.0, seed in any::<u64>()) {
        let s = init_stack(d, depth, c, seed).unwrap();
        for l in &s.layers {
            for (w, cap) in [(&l.wq, c), (&l.wk, c), (&l.wv, 1.0)] {
                let m = DMatrix::from_row_slice(d, d, w.as_slice().unwrap());
                prop_assert!((m.singular_values().max() - cap).abs() < 1e-6 * cap.max(1.0));
            }
        }
        prop_assert_eq!(&s, &init_stack(d, depth, c, seed).unwrap());
    }
}

#[test]
fn path_count_matches_dp_oracle() {
    for t in 0..=8u64 {
        for x in 0..=8u64 {
            assert_eq!(monotone_path_count(t, x).unwrap(), dp_paths(t as usize, x as usize), "t={t} x={x}");
        }
    }
}
