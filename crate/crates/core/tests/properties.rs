use std::collections::BTreeMap;
use std::io::Cursor;

use proptest::prelude::*;
use spand::dense::rrqr_sparsify;
use spand::sparse::{read_matrix_market_from, write_matrix_market_to};
use spand::{build_hierarchy, factorize, laplacian_2d, DenseMatrix, SchemeKind, SparseSymMatrix};

fn scheme() -> impl Strategy<Value = SchemeKind> {
    prop::sample::select(SchemeKind::ALL.to_vec())
}

fn matrix(max_rows: usize, max_cols: usize) -> impl Strategy<Value = DenseMatrix> {
    (1..=max_rows, 1..=max_cols).prop_flat_map(|(r, c)| {
        prop::collection::vec(-1.0f64..1.0, r * c)
            .prop_map(move |v| DenseMatrix::from_col_major(r, c, v).unwrap())
    })
}

/// Diagonally dominant symmetric matrix with a random sparsity pattern.
fn sparse_spd() -> impl Strategy<Value = SparseSymMatrix> {
    (2usize..15).prop_flat_map(|n| {
        prop::collection::vec((0..n, 0..n, -1.0f64..1.0), 0..3 * n).prop_map(move |entries| {
            let off: BTreeMap<(usize, usize), f64> =
                entries.into_iter().filter(|e| e.0 != e.1).map(|(i, j, v)| ((i.min(j), i.max(j)), v)).collect();
            let mut t = Vec::new();
            let mut diag = vec![1.0; n];
            for (&(i, j), &v) in &off {
                t.push((i, j, v));
                t.push((j, i, v));
                diag[i] += v.abs();
                diag[j] += v.abs();
            }
            t.extend(diag.iter().enumerate().map(|(i, &d)| (i, i, d)));
            SparseSymMatrix::from_triplets(n, &t).unwrap()
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn rrqr_basis_is_orthogonal(a in matrix(10, 12), eps in 0.0f64..1.0, s in scheme()) {
        let r = rrqr_sparsify(&a, eps, s).unwrap();
        let m = a.rows();
        prop_assert!(r.rank_c <= m.min(a.cols()));
        let q = DenseMatrix::hcat(m, &[&r.q_c, &r.q_f]);
        prop_assert!(q.t_matmul(&q).sub(&DenseMatrix::identity(m)).max_abs() <= 1e-12);
        // the coarse rows are exactly Q_cᵀA
        prop_assert!(r.q_c.t_matmul(&a).sub(&r.r_coarse).max_abs() <= 1e-12);
    }

    #[test]
    fn rrqr_is_exact_without_truncation(a in matrix(8, 8)) {
        let r = rrqr_sparsify(&a, 0.0, SchemeKind::SecondOrderFull).unwrap();
        let q = DenseMatrix::hcat(a.rows(), &[&r.q_c, &r.q_f]);
        let back = q.matmul(&DenseMatrix::vcat(a.cols(), &[&r.r_coarse, &r.e_tilde]));
        prop_assert!(back.sub(&a).max_abs() <= 1e-12);
    }

    #[test]
    fn matrix_market_round_trip(a in sparse_spd()) {
        let mut buf = Vec::new();
        write_matrix_market_to(&mut buf, &a).unwrap();
        let b = read_matrix_market_from(Cursor::new(buf)).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn preconditioner_stays_positive(d in 4usize..14, eps in 0.0f64..0.9, s in scheme(), seed in any::<u64>()) {
        let a = laplacian_2d(d);
        let h = build_hierarchy(&a, 2);
        let f = factorize(&a, &h, eps, s, 0).unwrap();
        let x: Vec<f64> = (0..a.n()).map(|i| ((i as u64 ^ seed) % 97) as f64 - 48.0).collect();
        let mut mx = x.clone();
        f.apply_m(&mut mx).unwrap();
        let q: f64 = x.iter().zip(&mx).map(|(p, q)| p * q).sum();
        prop_assume!(x.iter().any(|&v| v != 0.0));
        prop_assert!(q > 0.0);
    }
}
