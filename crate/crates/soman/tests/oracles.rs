//! Independent recomputations of quantities the library evaluates through
//! faster or more structured routes.

use faer::Mat;
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use soman::certificate::{build_f, certificate_rhs, construct_certificate};
use soman::localize::{eval_dual_field, DualPolynomial};
use soman::model::{
    adjoint_bc, adjoint_br, apply_bc, apply_br, inner, inner_mat, random_bases, steering_vector, synth_observation, Atom, Channel3D,
    ProblemDims, Scene, Which,
};

fn rand_c(rng: &mut ChaCha8Rng) -> C64 {
    C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
}

fn rand_vec(n: usize, seed: u64) -> Vec<C64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rand_c(&mut rng)).collect()
}

fn rand_mat(r: usize, c: usize, seed: u64) -> Mat<C64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Mat::from_fn(r, c, |_, _| rand_c(&mut rng))
}

/// `‖Σ_m̃ q_m̃ conj(b_m̃) e^{j2π⟨k, r⟩}‖²` straight from the definition of
/// the sensing rows, without the polynomial's coefficient tables.
fn direct_norm2(q: &[C64], scene: &Scene, which: Which, r: [f64; 3]) -> f64 {
    let d = scene.dims;
    let w = steering_vector(r, &d);
    let rows = match which {
        Which::Radar => d.j,
        Which::Comms => d.p * d.j,
    };
    let mut f = vec![C64::new(0.0, 0.0); rows];
    for i in 0..d.len() {
        let (n, p, _) = d.split(i);
        let row = (n + d.half() as i64) as usize;
        for (j, fj) in f.iter_mut().enumerate() {
            let b = match which {
                Which::Radar => scene.bases.t[(row, j)],
                Which::Comms if j / d.j == p => scene.bases.d_blocks[p][(row, j % d.j)],
                Which::Comms => continue,
            };
            *fj += q[i] * b.conj() * w[i];
        }
    }
    f.iter().map(|x| x.norm_sqr()).sum()
}

fn scene(dims: ProblemDims, seed: u64) -> Scene {
    let sep = [1.0 / dims.m as f64, 1.0 / dims.p as f64, 1.0 / dims.nr as f64];
    Scene::random(&dims, sep, seed).unwrap()
}

#[test]
fn fft_field_matches_direct_evaluation() {
    for (dims, seed) in [(ProblemDims::new(5, 3, 2, 2, 1, 1).unwrap(), 1), (ProblemDims::new(7, 2, 3, 3, 1, 1).unwrap(), 2)] {
        let sc = scene(dims, seed);
        let q = rand_vec(dims.len(), seed + 10);
        let grid = [2 * dims.m + 1, 2 * dims.p + 1, 2 * dims.nr];
        for which in [Which::Radar, Which::Comms] {
            let field = eval_dual_field(&q, &sc.bases, &dims, grid, which).unwrap();
            let scale = field.max().max(1.0);
            let mut worst = 0.0f64;
            for c in 0..grid[2] {
                for b in 0..grid[1] {
                    for a in 0..grid[0] {
                        let direct = direct_norm2(&q, &sc, which, field.point([a, b, c]));
                        worst = worst.max((field.at(a, b, c) - direct).abs() / scale);
                    }
                }
            }
            assert!(worst <= 1e-10, "{which:?} field differs by {worst:e}");
        }
    }
}

#[test]
fn adjoint_identities() {
    let dims = ProblemDims::new(5, 3, 2, 2, 1, 1).unwrap();
    let bases = random_bases(&dims, 4);
    let q = rand_vec(dims.len(), 5);
    let xr = rand_mat(dims.j, dims.len(), 6);
    let xc = rand_mat(dims.p * dims.j, dims.len(), 7);
    let lhs = inner(&apply_br(&xr, &bases, &dims).unwrap(), &q);
    let rhs = inner_mat(&xr, &adjoint_br(&q, &bases, &dims).unwrap());
    assert!((lhs - rhs).norm() <= 1e-10 * lhs.norm().max(1.0));
    let lhs = inner(&apply_bc(&xc, &bases, &dims).unwrap(), &q);
    let rhs = inner_mat(&xc, &adjoint_bc(&q, &bases, &dims).unwrap());
    assert!((lhs - rhs).norm() <= 1e-10 * lhs.norm().max(1.0));
}

#[test]
fn lifted_and_direct_observations_agree() {
    let dims = ProblemDims::new(7, 3, 3, 2, 2, 1).unwrap();
    let sc = scene(dims, 8);
    let y = sc.observation().unwrap();
    let t = sc.truth();
    let yr = apply_br(&t.x_r, &sc.bases, &dims).unwrap();
    let yc = apply_bc(&t.x_c, &sc.bases, &dims).unwrap();
    for i in 0..y.len() {
        assert!((y[i] - yr[i] - yc[i]).norm() < 1e-12);
    }
    // and from the closed form y = Σ α (t_n^H u) e^{-j2π⟨k,r⟩}, row n of T being t_n^H
    let mut yy = vec![C64::new(0.0, 0.0); dims.len()];
    for a in &sc.radar.atoms {
        let w = steering_vector(a.params(), &dims);
        for i in 0..dims.len() {
            let (n, _, _) = dims.split(i);
            let row = (n + dims.half() as i64) as usize;
            let tu: C64 = (0..dims.j).map(|j| sc.bases.t[(row, j)] * sc.u[j]).sum();
            yy[i] += a.alpha * tu * w[i].conj();
        }
    }
    for i in 0..dims.len() {
        assert!((yr[i] - yy[i]).norm() < 1e-12);
    }
    let again = synth_observation(&sc.radar, &sc.comms, &sc.bases, &sc.u, &sc.v, &dims).unwrap();
    assert_eq!(y, again);
}

fn radar_only(dims: ProblemDims, atoms: Vec<Atom>, seed: u64) -> Scene {
    let base = scene(ProblemDims { l: 0, q: 0, ..dims }, seed);
    Scene { dims: ProblemDims { l: atoms.len(), q: 0, ..dims }, radar: Channel3D::new(atoms), comms: Channel3D::new(vec![]), ..base }
}

#[test]
fn f_rows_match_polynomial_jets() {
    let dims = ProblemDims::new(7, 3, 3, 2, 2, 1).unwrap();
    let sc = scene(dims, 9);
    let f = build_f(&sc).unwrap();
    let q = rand_vec(dims.len(), 11);
    let fq: Vec<C64> = (0..f.nrows()).map(|i| (0..f.ncols()).map(|k| f[(i, k)] * q[k]).sum()).collect();
    let centre = [0.0, ((dims.p - 1) / 2) as f64, ((dims.nr - 1) / 2) as f64];
    let mut offset = 0;
    for (which, atoms) in [(Which::Radar, &sc.radar.atoms), (Which::Comms, &sc.comms.atoms)] {
        let poly = DualPolynomial::from_bases(&q, &sc.bases, &dims, which).unwrap();
        let comps = poly.n_components();
        let per = atoms.len() * comps;
        for (a, atom) in atoms.iter().enumerate() {
            let jet = poly.jet(atom.params());
            for c in 0..comps {
                let row = offset + a * comps + c;
                assert!((fq[row] - jet.value[c]).norm() <= 1e-10);
                for k in 0..3 {
                    // derivative rows are taken about the centre of each axis
                    let g = jet.grad[k][c] - C64::new(0.0, 2.0 * std::f64::consts::PI * centre[k]) * jet.value[c];
                    assert!((fq[row + (k + 1) * per] - g).norm() <= 1e-10 * g.norm().max(1.0));
                }
            }
        }
        offset += 4 * per;
    }
    assert_eq!(offset, f.nrows());
    assert_eq!(certificate_rhs(&sc).len(), f.nrows());
}

#[test]
fn certificate_routes_agree() {
    let dims = ProblemDims::new(11, 5, 3, 2, 1, 0).unwrap();
    let sc = radar_only(dims, vec![Atom::new(0.3, 0.6, 0.2, C64::cis(1.1)), Atom::new(0.72, 0.15, 0.65, C64::cis(-0.4))], 12);
    let cert = construct_certificate(&sc).unwrap();
    let scale = soman::model::norm(&cert.q0);
    let gap = soman::model::norm(&cert.q0.iter().zip(&cert.q0_pinv).map(|(a, b)| a - b).collect::<Vec<_>>());
    assert!(gap <= 1e-8 * scale, "normal equations vs pseudo-inverse differ by {gap:e}");
    assert!(cert.constraint_residual <= 1e-9);
}

#[test]
fn analytic_derivatives_match_finite_differences() {
    let dims = ProblemDims::new(7, 3, 3, 2, 1, 1).unwrap();
    let sc = scene(dims, 13);
    let q = rand_vec(dims.len(), 14);
    let h = 1e-5;
    for which in [Which::Radar, Which::Comms] {
        let poly = DualPolynomial::from_bases(&q, &sc.bases, &dims, which).unwrap();
        for r in [[0.11, 0.52, 0.93], [0.7, 0.05, 0.4]] {
            let (v, g, hess) = poly.norm2_derivatives(r);
            assert!((v - poly.norm2(r)).abs() <= 1e-12 * v.max(1.0));
            for k in 0..3 {
                let (mut rp, mut rm) = (r, r);
                rp[k] += h;
                rm[k] -= h;
                let fd = (poly.norm2(rp) - poly.norm2(rm)) / (2.0 * h);
                assert!((fd - g[k]).abs() <= 1e-5 * g[k].abs().max(v).max(1.0), "grad {k}: {fd} vs {}", g[k]);
                let (gp, gm) = (poly.norm2_derivatives(rp).1, poly.norm2_derivatives(rm).1);
                for l in 0..3 {
                    let fd2 = (gp[l] - gm[l]) / (2.0 * h);
                    assert!((fd2 - hess[k][l]).abs() <= 1e-4 * hess[k][l].abs().max(v).max(1.0));
                }
            }
        }
    }
}
