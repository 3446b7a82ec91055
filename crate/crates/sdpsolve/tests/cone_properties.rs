use proptest::prelude::*;
use sdpsolve::cone::{frob_sq, hermitian_eigen, inner};
use sdpsolve::{hermitian_to_real_embedding, psd_project, real_embedding_to_hermitian, Mat, C64};

fn hermitian() -> impl Strategy<Value = Mat<C64>> {
    (1usize..6).prop_flat_map(|n| {
        proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), n * n).prop_map(move |v| {
            let a = Mat::from_fn(n, n, |i, j| C64::new(v[i * n + j].0, v[i * n + j].1));
            Mat::from_fn(n, n, |i, j| (a[(i, j)] + a[(j, i)].conj()) * 0.5)
        })
    })
}

fn min_eig(h: &Mat<C64>) -> f64 {
    hermitian_eigen(h.as_ref()).unwrap().0.into_iter().fold(f64::INFINITY, f64::min)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    /// Moreau split: H = P(H) − N with both parts PSD and mutually orthogonal.
    #[test]
    fn projection_is_a_moreau_split(h in hermitian()) {
        let p = psd_project(h.as_ref()).unwrap();
        let n = &p - &h;
        let scale = frob_sq(h.as_ref()).sqrt().max(1.0);
        prop_assert!(min_eig(&p) >= -1e-12 * scale);
        prop_assert!(min_eig(&n) >= -1e-12 * scale);
        prop_assert!(inner(p.as_ref(), n.as_ref()).abs() <= 1e-12 * scale * scale);
        let again = psd_project(p.as_ref()).unwrap();
        prop_assert!(frob_sq((&again - &p).as_ref()).sqrt() <= 1e-12 * scale);
    }

    #[test]
    fn embedding_round_trips_and_doubles_the_spectrum(h in hermitian()) {
        let r = hermitian_to_real_embedding(h.as_ref());
        let back = real_embedding_to_hermitian(r.as_ref());
        prop_assert!(frob_sq((&back - &h).as_ref()) == 0.0);
        let rc = Mat::from_fn(r.nrows(), r.ncols(), |i, j| C64::new(r[(i, j)], 0.0));
        let mut big = hermitian_eigen(rc.as_ref()).unwrap().0;
        let small = hermitian_eigen(h.as_ref()).unwrap().0;
        big.sort_by(f64::total_cmp);
        let mut twice: Vec<f64> = small.iter().flat_map(|&x| [x, x]).collect();
        twice.sort_by(f64::total_cmp);
        for (a, b) in big.iter().zip(&twice) {
            prop_assert!((a - b).abs() <= 1e-12 * (1.0 + b.abs()));
        }
    }
}
