use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::*;
use crate::exec::Exec;

fn matrix(columns: Vec<Vec<f64>>) -> SeriesMatrix {
    SeriesMatrix::unlabeled(&columns).unwrap()
}

fn steps(l: usize, breaks: &[usize], levels: &[f64]) -> Vec<f64> {
    (0..l)
        .map(|t| levels[breaks.iter().filter(|&&b| t >= b).count()])
        .collect()
}

fn noisy(l: usize, m: usize, breaks: &[usize], sigma: f64, seed: u64) -> SeriesMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, sigma).unwrap();
    let columns = (0..m)
        .map(|_| {
            let levels: Vec<f64> = (0..=breaks.len())
                .map(|_| rng.random_range(-2.0..2.0))
                .collect();
            steps(l, breaks, &levels)
                .into_iter()
                .map(|v| v + noise.sample(&mut rng))
                .collect()
        })
        .collect();
    matrix(columns)
}

/// First breakpoint by explicit centred design columns: for each i build
/// x_i(t) = δ_i (1[t ≥ i] − (l − i)/l) and score ‖Σ_t x_i(t) F_t‖.
fn brute_force_first_pick(f: &SeriesMatrix) -> usize {
    let (l, m) = (f.len(), f.width());
    let lf = l as f64;
    let mut best = (0, f64::NEG_INFINITY);
    for i in 1..l {
        let delta = (lf / (i as f64 * (lf - i as f64))).sqrt();
        let shift = (l - i) as f64 / lf;
        let mut norm = 0.0;
        for j in 0..m {
            let dot: f64 = (0..l)
                .map(|t| delta * (f64::from(u8::from(t >= i)) - shift) * f.get(t, j))
                .sum();
            norm += dot * dot;
        }
        if norm > best.1 * (1.0 + 1e-12) {
            best = (i, norm);
        }
    }
    best.0
}

/// Group LARS on an explicit centred unit-norm step design with dense
/// elimination. Returns entry order as breakpoint positions.
fn naive_group_lars(f: &SeriesMatrix, k_max: usize) -> Vec<usize> {
    let (l, m) = (f.len(), f.width());
    let p = l - 1;
    let mut x = vec![vec![0.0; p]; l];
    for j in 0..p {
        let i = j + 1;
        for (t, row) in x.iter_mut().enumerate() {
            row[j] = f64::from(u8::from(t >= i)) - (l - i) as f64 / l as f64;
        }
        let norm = x.iter().map(|row| row[j] * row[j]).sum::<f64>().sqrt();
        for row in x.iter_mut() {
            row[j] /= norm;
        }
    }
    let means: Vec<f64> = (0..m).map(|q| f.column(q).iter().sum::<f64>() / l as f64).collect();
    let mut r: Vec<Vec<f64>> = (0..l).map(|t| (0..m).map(|q| f.get(t, q) - means[q]).collect()).collect();
    let corr = |r: &[Vec<f64>]| -> Vec<Vec<f64>> {
        (0..p)
            .map(|j| (0..m).map(|q| (0..l).map(|t| x[t][j] * r[t][q]).sum()).collect())
            .collect()
    };
    let norm = |v: &[f64]| v.iter().map(|a| a * a).sum::<f64>().sqrt();

    let c = corr(&r);
    let mut active = vec![(0..p)
        .max_by(|&a, &b| norm(&c[a]).total_cmp(&norm(&c[b])).then(b.cmp(&a)))
        .unwrap()];
    while active.len() < k_max {
        let c = corr(&r);
        let cmax = norm(&c[active[0]]);
        let k = active.len();
        let mut w = vec![vec![0.0; m]; k];
        for q in 0..m {
            let mut a: Vec<Vec<f64>> = (0..k)
                .map(|u| (0..k).map(|v| (0..l).map(|t| x[t][active[u]] * x[t][active[v]]).sum()).collect())
                .collect();
            let mut b: Vec<f64> = active.iter().map(|&j| c[j][q]).collect();
            for i in 0..k {
                for jj in i + 1..k {
                    let factor = a[jj][i] / a[i][i];
                    for kk in i..k {
                        a[jj][kk] -= factor * a[i][kk];
                    }
                    b[jj] -= factor * b[i];
                }
            }
            for i in (0..k).rev() {
                let s: f64 = b[i] - (i + 1..k).map(|jj| a[i][jj] * w[jj][q]).sum::<f64>();
                w[i][q] = s / a[i][i];
            }
        }
        let dir: Vec<Vec<f64>> = (0..l)
            .map(|t| (0..m).map(|q| (0..k).map(|u| x[t][active[u]] * w[u][q]).sum()).collect())
            .collect();
        let a = corr(&dir);
        let mut best: Option<(f64, usize)> = None;
        for j in (0..p).filter(|j| !active.contains(j)) {
            let dot = |u: &[f64], v: &[f64]| u.iter().zip(v).map(|(s, t)| s * t).sum::<f64>();
            let c2 = cmax * cmax;
            let (qa, qb, qc) = (
                dot(&a[j], &a[j]) - c2,
                2.0 * c2 - 2.0 * dot(&c[j], &a[j]),
                dot(&c[j], &c[j]) - c2,
            );
            let mut roots = Vec::new();
            if qa.abs() < 1e-14 {
                if qb.abs() > 1e-14 {
                    roots.push(-qc / qb);
                }
            } else {
                let d = qb * qb - 4.0 * qa * qc;
                if d >= 0.0 {
                    roots.push((-qb - d.sqrt()) / (2.0 * qa));
                    roots.push((-qb + d.sqrt()) / (2.0 * qa));
                }
            }
            for g in roots.into_iter().filter(|&g| g > 1e-12 && g <= 1.0 + 1e-12) {
                if best.is_none_or(|(bg, _)| g < bg) {
                    best = Some((g, j));
                }
            }
        }
        let Some((gamma, j)) = best else { break };
        for t in 0..l {
            for q in 0..m {
                r[t][q] -= gamma * dir[t][q];
            }
        }
        active.push(j);
    }
    active.into_iter().map(|j| j + 1).collect()
}

#[test]
fn weights_are_symmetric() {
    for l in [2, 3, 10, 31, 200] {
        let w = tv_weights(l).unwrap();
        assert_eq!(w.len(), l - 1);
        for i in 1..l {
            assert!((w[i - 1] - w[l - i - 1]).abs() < 1e-14);
            let expect = (l as f64 / (i as f64 * (l - i) as f64)).sqrt();
            assert!((w[i - 1] - expect).abs() < 1e-14);
        }
    }
    assert!(tv_weights(1).is_err());
}

#[test]
fn matrix_validation() {
    assert!(SeriesMatrix::unlabeled(&[]).is_err());
    assert!(SeriesMatrix::unlabeled(&[vec![1.0]]).is_err());
    assert!(SeriesMatrix::unlabeled(&[vec![1.0, 2.0], vec![1.0]]).is_err());
    assert!(SeriesMatrix::unlabeled(&[vec![1.0, f64::NAN]]).is_err());
    assert!(SeriesMatrix::from_columns(&[vec![1.0, 2.0]], vec![]).is_err());
    let f = matrix(vec![vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]]);
    assert_eq!((f.len(), f.width()), (3, 2));
    assert_eq!(f.row(1), [2.0, 5.0]);
    assert_eq!(f.column(1), [4.0, 5.0, 6.0]);
    let p = f.permute_columns(&[1, 0]).unwrap();
    assert_eq!(p.column(0), f.column(1));
    assert_eq!(p.labels(), ["s1", "s0"]);
}

#[test]
fn segment_means_and_residual() {
    let f = matrix(vec![vec![1.0, 3.0, 10.0, 10.0, 12.0]]);
    let r = ChangePointResult::from_breakpoints(&f, &[2]).unwrap();
    let col: Vec<f64> = r.approximation.iter().map(|row| row[0]).collect();
    let third = 32.0 / 3.0;
    assert_eq!(col[..2], [2.0, 2.0]);
    assert!(col[2..].iter().all(|v| (v - third).abs() < 1e-12));
    let expected = 2.0 + (10.0 - third).powi(2) * 2.0 + (12.0 - third).powi(2);
    assert!((r.residual - expected).abs() < 1e-12);
    assert!(ChangePointResult::from_breakpoints(&f, &[0]).is_err());
    assert!(ChangePointResult::from_breakpoints(&f, &[3, 2]).is_err());
    assert!(ChangePointResult::from_breakpoints(&f, &[5]).is_err());
}

#[test]
fn clean_steps_are_recovered_exactly() {
    let l = 60;
    let f = matrix(vec![
        steps(l, &[15, 40], &[0.0, 3.0, 1.0]),
        steps(l, &[15, 40], &[2.0, -1.0, 4.0]),
    ]);
    let d = detect_group_changepoints(&f, Some(2), SelectionConfig::default()).unwrap();
    assert_eq!(d.result.breakpoints, [15, 40]);
    assert!(d.result.residual < 1e-18);
    let auto = detect_group_changepoints(&f, None, SelectionConfig::default()).unwrap();
    assert_eq!(auto.result.breakpoints, [15, 40]);
    assert_eq!(auto.residual_path.unwrap().len(), 11);
}

#[test]
fn constant_input_has_no_changepoints() {
    let f = matrix(vec![vec![0.5; 30], vec![-1.0; 30]]);
    let auto = detect_group_changepoints(&f, None, SelectionConfig::default()).unwrap();
    assert_eq!(auto.result.k(), 0);
    assert!(gflars_candidates(&f, 5).unwrap().is_empty());
    let fixed = detect_group_changepoints(&f, Some(3), SelectionConfig::default()).unwrap();
    assert!(fixed.result.shortfall);
    assert!(fixed.result.residual < 1e-18);
}

#[test]
fn requested_k_is_bounded() {
    let f = matrix(vec![vec![0.0, 1.0, 0.0, 1.0]]);
    assert!(detect_group_changepoints(&f, Some(4), SelectionConfig::default()).is_err());
    assert_eq!(
        detect_group_changepoints(&f, Some(0), SelectionConfig::default())
            .unwrap()
            .result
            .k(),
        0
    );
    assert!(gflars_candidates(&f, 0).is_err());
    assert!(gflars_candidates(&f, 4).is_err());
}

#[test]
fn dp_over_every_position_is_exact() {
    for seed in 0..20 {
        let f = noisy(18, 3, &[5, 11], 0.8, seed);
        let all: Vec<usize> = (1..18).collect();
        for k in 1..=4 {
            let dp = dp_refine(&f, &all, k).unwrap();
            let oracle = exhaustive_oracle(&f, k, Exec::default()).unwrap();
            assert!(
                (dp.residual - oracle.residual).abs() <= 1e-9 * (1.0 + oracle.residual),
                "seed {seed} k {k}: {} vs {}",
                dp.residual,
                oracle.residual
            );
        }
    }
}

#[test]
fn dp_checks_candidates() {
    let f = matrix(vec![vec![0.0, 1.0, 2.0, 3.0]]);
    assert!(dp_refine(&f, &[0], 1).is_err());
    assert!(dp_refine(&f, &[4], 1).is_err());
    let r = dp_refine(&f, &[2, 2, 1], 3).unwrap();
    assert!(r.shortfall);
    assert_eq!(r.breakpoints, [1, 2]);
}

#[test]
fn oracle_is_the_same_in_both_modes() {
    let f = noisy(20, 2, &[7], 1.0, 3);
    let a = exhaustive_oracle(&f, 3, Exec::Sequential).unwrap();
    let b = exhaustive_oracle(&f, 3, Exec::default()).unwrap();
    assert_eq!(a, b);
}

#[test]
fn residual_path_is_monotone() {
    for seed in 0..10 {
        let f = noisy(50, 4, &[12, 30, 41], 1.0, seed);
        let d = detect_group_changepoints(&f, None, SelectionConfig::default()).unwrap();
        let path = d.residual_path.unwrap();
        assert!(path.windows(2).all(|w| w[1] <= w[0] + 1e-9), "{path:?}");
    }
}

#[test]
fn selection_threshold_controls_k() {
    let f = noisy(60, 3, &[20, 40], 0.1, 11);
    let strict = SelectionConfig {
        min_relative_drop: 1.0,
        ..SelectionConfig::default()
    };
    assert_eq!(detect_group_changepoints(&f, None, strict).unwrap().result.k(), 0);
    let capped = SelectionConfig {
        max_k: 1,
        ..SelectionConfig::default()
    };
    assert_eq!(detect_group_changepoints(&f, None, capped).unwrap().result.k(), 1);
}

fn matrix_strategy() -> impl Strategy<Value = (SeriesMatrix, u64)> {
    (6usize..40, 1usize..5, any::<u64>()).prop_map(|(l, m, seed)| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let b = rng.random_range(1..l);
        (noisy(l, m, &[b], 1.0, seed), seed)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn first_pick_matches_brute_force((f, _) in matrix_strategy()) {
        let picks = gflars_candidates(&f, 1).unwrap();
        prop_assert_eq!(picks.len(), 1);
        prop_assert_eq!(picks[0], brute_force_first_pick(&f));
    }

    #[test]
    fn lars_path_matches_dense_implementation((f, _) in matrix_strategy()) {
        let k = 6.min(f.len() - 1);
        prop_assert_eq!(gflars_candidates(&f, k).unwrap(), naive_group_lars(&f, k));
    }

    #[test]
    fn candidates_are_distinct_and_in_range((f, _) in matrix_strategy(), k in 1usize..6) {
        let k = k.min(f.len() - 1);
        let c = gflars_candidates(&f, k).unwrap();
        prop_assert!(c.len() <= k);
        prop_assert!(c.iter().all(|&b| b >= 1 && b < f.len()));
        let mut sorted = c.clone();
        sorted.sort_unstable();
        sorted.dedup();
        prop_assert_eq!(sorted.len(), c.len());
    }

    #[test]
    fn invariant_to_scale_and_column_order((f, seed) in matrix_strategy(), scale in 0.01f64..100.0) {
        let k = 2.min(f.len() - 1);
        let base = detect_group_changepoints(&f, Some(k), SelectionConfig::default()).unwrap();
        let scaled = detect_group_changepoints(&f.scaled(scale), Some(k), SelectionConfig::default()).unwrap();
        prop_assert_eq!(&base.result.breakpoints, &scaled.result.breakpoints);
        prop_assert!((scaled.result.residual - base.result.residual * scale * scale).abs()
            <= 1e-8 * (1.0 + scaled.result.residual));

        let mut order: Vec<usize> = (0..f.width()).collect();
        order.rotate_left((seed % f.width() as u64) as usize);
        let permuted = detect_group_changepoints(&f.permute_columns(&order).unwrap(), Some(k), SelectionConfig::default()).unwrap();
        prop_assert_eq!(&base.result.breakpoints, &permuted.result.breakpoints);
    }

    #[test]
    fn fixed_k_residual_decreases((f, _) in matrix_strategy()) {
        let mut last = f64::INFINITY;
        for k in 0..4.min(f.len()) {
            let r = detect_group_changepoints(&f, Some(k), SelectionConfig::default()).unwrap().result;
            prop_assert!(r.residual <= last + 1e-9);
            last = r.residual;
        }
    }

    #[test]
    fn dp_never_beats_the_oracle((f, _) in matrix_strategy(), k in 1usize..4) {
        let k = k.min(f.len() - 1);
        let d = detect_group_changepoints(&f, Some(k), SelectionConfig::default()).unwrap().result;
        let o = exhaustive_oracle(&f, k, Exec::default()).unwrap();
        prop_assert!(d.residual >= o.residual - 1e-9 * (1.0 + o.residual));
    }
}
