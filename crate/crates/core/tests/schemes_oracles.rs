mod common;

use common::*;
use spand::analysis::build_two_level;
use spand::schemes::{local_error, make_elimination, make_scaling, make_sparsification};
use spand::{BlockOperator, DenseMatrix, SchemeKind};

#[test]
fn schur_complement_matches_nalgebra() {
    let mut r = rng(11);
    let a_ss = spd(12, 12.0, &mut r);
    let a_sw = gaussian(12, 7, &mut r);
    let (elim, schur) = make_elimination(&a_ss, &a_sw).unwrap();
    let oracle = to_na(&a_sw).transpose() * to_na(&a_ss).try_inverse().unwrap() * to_na(&a_sw);
    let err = (to_na(&schur) - &oracle).norm() / oracle.norm();
    assert!(err <= 1e-12, "{err}");
    assert_eq!(elim.factor.shape(), (12, 12));
    assert_eq!(elim.coupling.shape(), (12, 7));
}

#[test]
fn scaling_whitens_the_pivot_block() {
    let mut r = rng(12);
    let a_pp = spd(8, 1.0, &mut r);
    let a_pw = gaussian(8, 15, &mut r);
    let (z, panel) = make_scaling(&a_pp, &a_pw).unwrap();
    let zi = to_na(&z).try_inverse().unwrap();
    let whitened = &zi * to_na(&a_pp) * zi.transpose();
    let err = (whitened - nalgebra::DMatrix::identity(8, 8)).norm();
    assert!(err <= 1e-12, "{err}");
    assert!((to_na(&z) * to_na(&panel) - to_na(&a_pw)).norm() <= 1e-12 * a_pw.frobenius_norm());
}

#[test]
fn scaling_rejects_indefinite_block() {
    let a_pp = DenseMatrix::from_rows(&[&[1.0, 3.0], &[3.0, 1.0]]);
    assert!(make_scaling(&a_pp, &DenseMatrix::zeros(2, 3)).is_err());
}

/// `[[I, C], [Cᵀ, 2I]]` with `‖C‖₂ = 1`: the leading block is already scaled.
fn single_block(p: usize, w: usize, seed: u64) -> (DenseMatrix, DenseMatrix) {
    let mut r = rng(seed);
    let sigma: Vec<f64> = (0..p.min(w)).map(|k| 0.3f64.powi(k as i32)).collect();
    let c = with_singular_values(p, w, &sigma, &mut r);
    let mut a = DenseMatrix::identity(p + w);
    a.set_submatrix(0, p, &c);
    a.set_submatrix(p, 0, &c.transpose());
    for i in p..p + w {
        a[(i, i)] = 2.0;
    }
    (a, c)
}

#[test]
fn local_error_bounds_dense_reconstruction() {
    for seed in 0..5 {
        let (a, c) = single_block(8, 8, 20 + seed);
        for scheme in SchemeKind::ALL {
            for eps in [0.3, 0.1, 0.03] {
                let sp = make_sparsification(&c, eps, scheme).unwrap();
                let local = local_error(scheme, &sp);
                let setup = build_two_level(&a, 8, eps, scheme).unwrap();
                let dense = setup.reconstruction_error(scheme);
                assert!(
                    dense >= local * (1.0 - 1e-10) && dense <= 2.0 * local + 1e-14,
                    "{scheme} eps {eps}: dense {dense:e} local {local:e}"
                );
            }
        }
    }
}

#[test]
fn correction_payload_shapes() {
    let (_, c) = single_block(10, 6, 31);
    let fo = make_sparsification(&c, 0.1, SchemeKind::FirstOrder).unwrap();
    assert!(fo.correction().is_none());
    let so = make_sparsification(&c, 0.1, SchemeKind::SecondOrderFull).unwrap();
    let blk = so.correction().unwrap();
    assert_eq!(blk.fine, so.rank_c()..10);
    assert!(!blk.trapezoidal);
    assert_eq!(blk.block.shape(), (10 - so.rank_c(), 6 - so.rank_c()));
    let sf = make_sparsification(&c, 0.1, SchemeKind::SecondOrderSuperfine).unwrap();
    let blk = sf.correction().unwrap();
    assert!(blk.trapezoidal);
    assert_eq!(blk.fine.len(), sf.rank_f2());
    // upper trapezoidal: entry (i, j) vanishes for i > j
    for j in 0..blk.block.cols() {
        for i in j + 1..blk.block.rows() {
            assert_eq!(blk.block[(i, j)], 0.0);
        }
    }
}

#[test]
fn operators_apply_their_inverse_transposes_consistently() {
    // ⟨Op x, y⟩ = ⟨x, Opᵀ y⟩ for every operator kind
    let mut r = rng(40);
    let a_ss = spd(4, 4.0, &mut r);
    let a_sw = gaussian(4, 3, &mut r);
    let (elim, _) = make_elimination(&a_ss, &a_sw).unwrap();
    let (_, c) = single_block(4, 3, 41);
    let sp = make_sparsification(&c, 0.5, SchemeKind::SecondOrderFull).unwrap();
    let corr = sp.correction().unwrap();
    let slots: Vec<usize> = (0..4).collect();
    let others: Vec<usize> = (4..7).collect();
    let ops = [
        BlockOperator::Elimination {
            pivot: slots.clone(),
            neighbors: others.clone(),
            factor: elim.factor.clone(),
            coupling: elim.coupling.clone(),
        },
        BlockOperator::Scaling { slots: slots.clone(), factor: elim.factor.clone() },
        BlockOperator::Orthogonal { slots: slots.clone(), reflectors: sp.reflectors().clone() },
        BlockOperator::ErrorCorrection {
            fine: corr.fine.clone().collect(),
            neighbors: others.clone(),
            columns: corr.columns.clone(),
            block: corr.block.clone(),
            trapezoidal: false,
        },
    ];
    let x: Vec<f64> = (0..7).map(|i| (i as f64 * 0.7).sin()).collect();
    let y: Vec<f64> = (0..7).map(|i| (i as f64 * 1.3).cos()).collect();
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(p, q)| p * q).sum::<f64>();
    let mut scratch = Vec::new();
    for op in &ops {
        let mut ox = x.clone();
        op.apply(&mut ox, &mut scratch);
        let mut oty = y.clone();
        op.apply_transpose(&mut oty, &mut scratch);
        let (l, rr) = (dot(&ox, &y), dot(&x, &oty));
        assert!((l - rr).abs() <= 1e-12 * l.abs().max(1.0), "{:?}: {l} vs {rr}", op.kind());
    }
}
