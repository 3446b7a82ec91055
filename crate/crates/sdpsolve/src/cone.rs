//! PSD cone utilities on complex Hermitian matrices.

use faer::{Mat, MatRef, Side};
use num_complex::Complex64 as C64;

use crate::error::{Result, SdpError};

/// `(H + H^H) / 2`.
pub fn hermitian_part(h: MatRef<'_, C64>) -> Mat<C64> {
    let n = h.nrows();
    assert_eq!(n, h.ncols(), "square matrix expected");
    Mat::from_fn(n, n, |i, j| (h[(i, j)] + h[(j, i)].conj()) * 0.5)
}

/// Eigenvalues (ascending) and eigenvectors of a Hermitian matrix; only the
/// lower triangle is read.
pub fn hermitian_eigen(h: MatRef<'_, C64>) -> Result<(Vec<f64>, Mat<C64>)> {
    let evd = h.self_adjoint_eigen(Side::Lower).map_err(|_| SdpError::Eigen("hermitian_eigen".into()))?;
    let s = evd.S();
    let vals: Vec<f64> = (0..h.nrows()).map(|i| s[i].re).collect();
    Ok((vals, evd.U().to_owned()))
}

/// Frobenius-nearest PSD matrix: eigenvalues clipped at zero.
pub fn psd_project(h: MatRef<'_, C64>) -> Result<Mat<C64>> {
    let sym = hermitian_part(h);
    let (vals, vecs) = hermitian_eigen(sym.as_ref())?;
    Ok(reassemble(&vals, vecs.as_ref(), |l| l.max(0.0)))
}

/// `U f(Λ) U^H` restricted to eigenpairs where `f` is nonzero.
pub(crate) fn reassemble(vals: &[f64], vecs: MatRef<'_, C64>, f: impl Fn(f64) -> f64) -> Mat<C64> {
    let n = vecs.nrows();
    let keep: Vec<(usize, f64)> = vals.iter().enumerate().map(|(i, &l)| (i, f(l))).filter(|&(_, w)| w != 0.0).collect();
    if keep.is_empty() {
        return Mat::zeros(n, n);
    }
    let k = keep.len();
    let u = Mat::from_fn(n, k, |i, j| vecs[(i, keep[j].0)]);
    let uw = Mat::from_fn(n, k, |i, j| vecs[(i, keep[j].0)] * keep[j].1);
    &uw * u.adjoint()
}

/// `[[Re H, -Im H], [Im H, Re H]]`, the real symmetric form of a Hermitian matrix.
pub fn hermitian_to_real_embedding(h: MatRef<'_, C64>) -> Mat<f64> {
    let n = h.nrows();
    Mat::from_fn(2 * n, 2 * n, |i, j| {
        let (bi, ii) = (i / n, i % n);
        let (bj, jj) = (j / n, j % n);
        let z = h[(ii, jj)];
        match (bi, bj) {
            (0, 0) | (1, 1) => z.re,
            (0, 1) => -z.im,
            _ => z.im,
        }
    })
}

/// Inverse of [`hermitian_to_real_embedding`]; averages the redundant copies.
pub fn real_embedding_to_hermitian(r: MatRef<'_, f64>) -> Mat<C64> {
    assert!(r.nrows() % 2 == 0 && r.nrows() == r.ncols(), "even square matrix expected");
    let n = r.nrows() / 2;
    Mat::from_fn(n, n, |i, j| {
        let re = 0.5 * (r[(i, j)] + r[(n + i, n + j)]);
        let im = 0.5 * (r[(n + i, j)] - r[(i, n + j)]);
        C64::new(re, im)
    })
}

/// `Re tr(A^H B)`.
pub fn inner(a: MatRef<'_, C64>, b: MatRef<'_, C64>) -> f64 {
    let mut s = 0.0;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            let (x, y) = (a[(i, j)], b[(i, j)]);
            s += x.re * y.re + x.im * y.im;
        }
    }
    s
}

pub fn frob_sq(a: MatRef<'_, C64>) -> f64 {
    inner(a, a)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_hermitian(n: usize, rng: &mut impl Rng) -> Mat<C64> {
        let a = Mat::from_fn(n, n, |_, _| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        hermitian_part(a.as_ref())
    }

    fn max_abs_diff(a: MatRef<'_, C64>, b: MatRef<'_, C64>) -> f64 {
        let mut m = 0.0f64;
        for j in 0..a.ncols() {
            for i in 0..a.nrows() {
                m = m.max((a[(i, j)] - b[(i, j)]).norm());
            }
        }
        m
    }

    #[test]
    fn clip_diagonal() {
        let mut h = Mat::<C64>::zeros(2, 2);
        h[(0, 0)] = C64::new(1.0, 0.0);
        h[(1, 1)] = C64::new(-2.0, 0.0);
        let p = psd_project(h.as_ref()).unwrap();
        assert!((p[(0, 0)].re - 1.0).abs() < 1e-14);
        assert!(p[(1, 1)].norm() < 1e-14 && p[(0, 1)].norm() < 1e-14);
    }

    #[test]
    fn psd_input_is_fixed_point_and_projection_idempotent() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random_hermitian(6, &mut rng);
        let psd = &a * &a;
        let p = psd_project(psd.as_ref()).unwrap();
        assert!(max_abs_diff(p.as_ref(), psd.as_ref()) < 1e-12);
        let h = random_hermitian(7, &mut rng);
        let p1 = psd_project(h.as_ref()).unwrap();
        let p2 = psd_project(p1.as_ref()).unwrap();
        assert!(max_abs_diff(p1.as_ref(), p2.as_ref()) < 1e-12);
    }

    #[test]
    fn projection_beats_random_psd_candidates() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let h = random_hermitian(5, &mut rng);
        let p = psd_project(h.as_ref()).unwrap();
        let best = frob_sq((&h - &p).as_ref());
        for _ in 0..1000 {
            let g = Mat::from_fn(5, 5, |_, _| C64::new(rng.random_range(-0.3..0.3), rng.random_range(-0.3..0.3)));
            let cand = psd_project((&p + &g).as_ref()).unwrap();
            assert!(frob_sq((&h - &cand).as_ref()) >= best - 1e-12);
        }
    }

    #[test]
    fn embedding_of_pauli_y() {
        let mut h = Mat::<C64>::zeros(2, 2);
        h[(0, 1)] = C64::new(0.0, -1.0);
        h[(1, 0)] = C64::new(0.0, 1.0);
        let r = hermitian_to_real_embedding(h.as_ref());
        let evd = r.self_adjoint_eigen(Side::Lower).unwrap();
        let mut vals: Vec<f64> = (0..4).map(|i| evd.S()[i]).collect();
        vals.sort_by(f64::total_cmp);
        for (v, e) in vals.iter().zip([-1.0, -1.0, 1.0, 1.0]) {
            assert!((v - e).abs() < 1e-12);
        }
    }

    #[test]
    fn embedding_of_real_matrix_is_block_diagonal() {
        let h = Mat::from_fn(3, 3, |i, j| C64::new((i + j) as f64, 0.0));
        let r = hermitian_to_real_embedding(h.as_ref());
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(r[(i, j)], h[(i, j)].re);
                assert_eq!(r[(i + 3, j + 3)], h[(i, j)].re);
                assert_eq!(r[(i, j + 3)], 0.0);
                assert_eq!(r[(i + 3, j)], 0.0);
            }
        }
    }

    #[test]
    fn embedding_round_trip_and_spectrum() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let h = random_hermitian(4, &mut rng);
        let back = real_embedding_to_hermitian(hermitian_to_real_embedding(h.as_ref()).as_ref());
        assert!(max_abs_diff(h.as_ref(), back.as_ref()) < 1e-15);

        let (vals, _) = hermitian_eigen(h.as_ref()).unwrap();
        let r = hermitian_to_real_embedding(h.as_ref());
        let evd = r.self_adjoint_eigen(Side::Lower).unwrap();
        let mut rv: Vec<f64> = (0..8).map(|i| evd.S()[i]).collect();
        rv.sort_by(f64::total_cmp);
        for (i, v) in vals.iter().enumerate() {
            assert!((rv[2 * i] - v).abs() < 1e-12 && (rv[2 * i + 1] - v).abs() < 1e-12);
        }
    }
}
