//! Rollout against naive per-layer recomputation and brute-force path sums.

use ndarray::Array2;
use posbias_core::{init_stack, rollout, MaskGraph, MaskKind, PeMode};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn allowed(kind: MaskKind, i: usize, j: usize) -> bool {
    // 1-based i attends to j.
    match kind {
        MaskKind::Causal => j <= i,
        MaskKind::SlidingWindow { width } => j <= i && i - j < width,
        MaskKind::Prefix { prefix_len } => j <= i || j <= prefix_len,
        MaskKind::Complete => true,
    }
}

fn naive_map(x: &Array2<f64>, wq: &Array2<f64>, wk: &Array2<f64>, kind: MaskKind) -> Array2<f64> {
    let (n, d) = x.dim();
    let mut q = Array2::<f64>::zeros((n, d));
    let mut k = Array2::<f64>::zeros((n, d));
    for i in 0..n {
        for c in 0..d {
            for r in 0..d {
                q[[i, c]] += x[[i, r]] * wq[[r, c]];
                k[[i, c]] += x[[i, r]] * wk[[r, c]];
            }
        }
    }
    let mut a = Array2::zeros((n, n));
    for i in 0..n {
        let z: Vec<Option<f64>> = (0..n)
            .map(|j| allowed(kind, i + 1, j + 1).then(|| (0..d).map(|c| q[[i, c]] * k[[j, c]]).sum()))
            .collect();
        let total: f64 = z.iter().flatten().map(|v| v.exp()).sum();
        for j in 0..n {
            if let Some(v) = z[j] {
                a[[i, j]] = v.exp() / total;
            }
        }
    }
    a
}

fn path_sum(maps: &[Array2<f64>], i: usize, j: usize) -> f64 {
    // Σ over k_t, ..., k_1 of A^(t)_{i k_t} ... A^(0)_{k_1 j}.
    fn go(maps: &[Array2<f64>], layer: usize, at: usize, j: usize) -> f64 {
        let a = &maps[layer];
        if layer == 0 {
            return a[[at, j]];
        }
        (0..a.ncols()).map(|k| a[[at, k]] * go(maps, layer - 1, k, j)).sum()
    }
    go(maps, maps.len() - 1, i, j)
}

#[test]
fn rollout_matches_path_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for n in 1..=6 {
        let mut kinds = vec![MaskKind::Causal, MaskKind::Complete, MaskKind::Prefix { prefix_len: 1.max(n / 2) }];
        if n >= 2 {
            kinds.push(MaskKind::SlidingWindow { width: 2 });
        }
        for kind in kinds {
            for depth in 1..=5 {
                let d = 3;
                let stack = init_stack(d, depth, 1.5, rng.random()).unwrap();
                let x0 = Array2::from_shape_fn((n, d), |_| rng.random_range(-1.0..1.0));
                let g = MaskGraph::new(kind, n).unwrap();
                let tr = rollout(x0.view(), &stack, &g, &PeMode::NoPe).unwrap();

                let mut x = x0.clone();
                let mut maps = Vec::new();
                for (t, w) in stack.layers.iter().enumerate() {
                    let a = naive_map(&x, &w.wq, &w.wk, kind);
                    for (u, v) in a.iter().zip(tr.maps[t].0.iter()) {
                        assert!((u - v).abs() < 1e-12, "{kind} n={n} layer {t}");
                    }
                    x = a.dot(&x).dot(&w.wv);
                    maps.push(a);
                    for i in 0..n {
                        for j in 0..n {
                            let want = path_sum(&maps, i, j);
                            let got = tr.cumulative[t][[i, j]];
                            assert!((want - got).abs() < 1e-10, "{kind} n={n} t={t} ({i},{j}): {got} vs {want}");
                        }
                    }
                }
            }
        }
    }
}

#[test]
fn unreachable_entries_vanish() {
    // Window w=2: P^(t)_{ij} > 0 exactly when 0 <= i-j <= t+1.
    let n = 6;
    let g = MaskGraph::new(MaskKind::SlidingWindow { width: 2 }, n).unwrap();
    let stack = init_stack(2, 4, 1.0, 3).unwrap();
    let x0 = Array2::from_shape_fn((n, 2), |(i, c)| ((i * 2 + c) as f64).sin());
    let tr = rollout(x0.view(), &stack, &g, &PeMode::NoPe).unwrap();
    for (t, p) in tr.cumulative.iter().enumerate() {
        for i in 0..n {
            for j in 0..n {
                let reachable = j <= i && i - j <= t + 1;
                assert_eq!(p[[i, j]] > 0.0, reachable, "t={t} ({},{})", i + 1, j + 1);
            }
        }
    }
}
