use num_complex::Complex64 as C64;
use proptest::prelude::*;

use soman::harness::{monotone_within_stderr, to_normalized, to_physical, trial_seed, PhysicalScene};
use soman::localize::eval_dual_field;
use soman::model::{apply_br, random_bases, wrap_dist, Atom, Channel3D, ProblemDims, Scene, Which};
use soman::waveforms::{build_w, recover_ls};

fn c64() -> impl Strategy<Value = C64> {
    (-1.0f64..1.0, -1.0f64..1.0).prop_map(|(a, b)| C64::new(a, b))
}

fn small_dims() -> impl Strategy<Value = ProblemDims> {
    (0usize..3, 1usize..4, 1usize..4, 1usize..3).prop_map(|(h, p, nr, j)| ProblemDims::new(2 * h + 1, p, nr, j, 1, 1).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn wrap_distance_is_a_metric_on_the_circle(a in -3.0f64..3.0, b in -3.0f64..3.0, c in -3.0f64..3.0, k in -3i32..3) {
        let d = wrap_dist(a, b);
        prop_assert!((0.0..=0.5).contains(&d));
        prop_assert!((d - wrap_dist(b, a)).abs() < 1e-12);
        prop_assert!((d - wrap_dist(a + k as f64, b)).abs() < 1e-9);
        prop_assert!(wrap_dist(a, c) <= d + wrap_dist(b, c) + 1e-12);
    }

    #[test]
    fn index_and_split_are_inverse(dims in small_dims(), seed in any::<u64>()) {
        let i = (seed as usize) % dims.len();
        let (n, p, r) = dims.split(i);
        prop_assert!(n.unsigned_abs() as usize <= dims.half() && p < dims.p && r < dims.nr);
        prop_assert_eq!(dims.index(n, p, r), i);
    }

    #[test]
    fn physical_round_trip(tau in 0.0f64..1.0, nu in 0.0f64..1.0, beta in 0.0f64..1.0, fc in 1e9f64..1e11) {
        let s = PhysicalScene::half_wavelength(fc, 2e8, 5e-5, 1.5e6);
        let p = to_physical([tau, nu, beta], &s).unwrap();
        prop_assert!(p.range_m >= 0.0 && p.angle_deg.abs() <= 90.0);
        let back = to_normalized(&p, &s).unwrap();
        for k in 0..3 {
            prop_assert!(wrap_dist(back[k], [tau, nu, beta][k]) < 1e-12, "axis {}: {:?}", k, back);
        }
    }

    #[test]
    fn field_scales_with_squared_modulus(dims in small_dims(), seed in 0u64..1000, c in c64()) {
        let bases = random_bases(&dims, seed);
        let q: Vec<C64> = (0..dims.len()).map(|i| C64::cis(i as f64 * 0.7 + seed as f64)).collect();
        let cq: Vec<C64> = q.iter().map(|x| c * x).collect();
        let grid = [2 * dims.m, 2 * dims.p, 2 * dims.nr];
        for which in [Which::Radar, Which::Comms] {
            let f = eval_dual_field(&q, &bases, &dims, grid, which).unwrap();
            let g = eval_dual_field(&cq, &bases, &dims, grid, which).unwrap();
            let scale = f.max().max(1e-300);
            for (a, b) in f.values.iter().zip(&g.values) {
                prop_assert!((b - c.norm_sqr() * a).abs() <= 1e-10 * scale * c.norm_sqr().max(1.0));
            }
        }
    }

    #[test]
    fn observation_is_linear_in_amplitudes(seed in 0u64..1000, c in c64()) {
        let dims = ProblemDims::new(5, 2, 3, 2, 1, 1).unwrap();
        let sc = Scene::random(&dims, [0.2, 0.5, 1.0 / 3.0], seed).unwrap();
        let scaled = |ch: &Channel3D| Channel3D::new(ch.atoms.iter().map(|a| Atom { alpha: a.alpha * c, ..*a }).collect());
        let sc2 = Scene { radar: scaled(&sc.radar), comms: scaled(&sc.comms), ..sc.clone() };
        let (y, y2) = (sc.observation().unwrap(), sc2.observation().unwrap());
        for (a, b) in y.iter().zip(&y2) {
            prop_assert!((b - c * a).norm() < 1e-12);
        }
        let t = sc.truth();
        let x: faer::Mat<C64> = faer::Mat::from_fn(t.x_r.nrows(), t.x_r.ncols(), |i, j| c * t.x_r[(i, j)]);
        let (br, br2) = (apply_br(&t.x_r, &sc.bases, &dims).unwrap(), apply_br(&x, &sc.bases, &dims).unwrap());
        for (a, b) in br.iter().zip(&br2) {
            prop_assert!((b - c * a).norm() < 1e-12);
        }
    }

    #[test]
    fn least_squares_residual_is_orthogonal_to_the_design(seed in 0u64..1000, ys in proptest::collection::vec(c64(), 45)) {
        let dims = ProblemDims::new(5, 3, 3, 2, 1, 1).unwrap();
        let bases = random_bases(&dims, seed);
        let design = build_w(&[[0.1, 0.3, 0.5]], &[[0.6, 0.0, 0.1]], &bases, &dims).unwrap();
        let rec = recover_ls(&design, &ys, &bases).unwrap();
        let w = &design.w;
        let r: Vec<C64> = (0..w.nrows()).map(|i| ys[i] - (0..w.ncols()).map(|k| w[(i, k)] * rec.stack[k]).sum::<C64>()).collect();
        let yn = ys.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        for k in 0..w.ncols() {
            let g: C64 = (0..w.nrows()).map(|i| w[(i, k)].conj() * r[i]).sum();
            prop_assert!(g.norm() <= 1e-9 * yn.max(1.0));
        }
        prop_assert!((rec.residual - r.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()).abs() <= 1e-9 * yn.max(1.0));
    }

    #[test]
    fn trial_seed_is_pure(master in any::<u64>(), t in 0usize..1000) {
        prop_assert_eq!(trial_seed(master, "m=7", t), trial_seed(master, "m=7", t));
    }

    #[test]
    fn nondecreasing_rates_never_flag(mut rates in proptest::collection::vec(0.0f64..1.0, 0..8)) {
        rates.sort_by(f64::total_cmp);
        let se = vec![0.0; rates.len()];
        prop_assert!(monotone_within_stderr(&rates, &se).is_empty());
    }
}
