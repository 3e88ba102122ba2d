mod common;

use common::*;
use spand::analysis::{
    build_two_level, cond_first, cond_second, dense_condition, loglog_slope, make_theorem_instance,
    precond_matrix, random_spd, rate_identity, second_order_system, theorem_harness, TwoLevelSetup,
};
use spand::{DenseMatrix, SchemeKind};

fn block(k: &DenseMatrix, r0: usize, c0: usize, rows: usize, cols: usize) -> DenseMatrix {
    k.submatrix(r0, c0, rows, cols)
}

fn off_identity(m: &DenseMatrix) -> f64 {
    m.sub(&DenseMatrix::identity(m.rows())).max_abs()
}

#[test]
fn decoupled_blocks_have_no_error() {
    let mut r = rng(70);
    let mut a = DenseMatrix::identity(20);
    a.set_submatrix(0, 0, &spd(8, 1.0, &mut r));
    a.set_submatrix(8, 8, &spd(12, 1.0, &mut r));
    let s = build_two_level(&a, 8, 0.1, SchemeKind::FirstOrder).unwrap();
    assert_eq!(s.e_tilde, 0.0);
    assert_eq!(s.rank_c, 0);
    assert_eq!(cond_first(&s), 1.0);
}

#[test]
fn exact_limit() {
    let a = random_spd(30, 0.9, 71);
    for scheme in SchemeKind::ALL {
        let s = build_two_level(&a, 12, 0.0, scheme).unwrap();
        assert!(s.e_tilde <= 1e-12);
        assert!((dense_condition(&precond_matrix(&s, scheme).unwrap()) - 1.0).abs() <= 1e-10);
    }
}

#[test]
fn identity_reconstruction_is_exact() {
    let a = random_spd(40, 0.85, 72);
    let s = build_two_level(&a, 15, 0.2, SchemeKind::SecondOrderFull).unwrap();
    let rel = s.exact_reconstruction_error() / spectral(&a);
    assert!(rel <= 1e-12, "{rel}");
}

fn spectral(a: &DenseMatrix) -> f64 {
    na_norm2(&to_na(a))
}

fn setups() -> Vec<TwoLevelSetup> {
    (0..12)
        .map(|i| {
            let a = random_spd(30 + 3 * i, 0.9, 80 + i as u64);
            build_two_level(&a, 10 + i, [0.05, 0.2, 0.5][i % 3], SchemeKind::SecondOrderSuperfine).unwrap()
        })
        .collect()
}

#[test]
fn preconditioned_matrix_structure() {
    for s in setups() {
        let f = s.fine();
        let m = s.a_hat.rows();
        // first order: identity diagonal blocks, L̂⁻¹Êᵀ off the diagonal
        let k1 = precond_matrix(&s, SchemeKind::FirstOrder).unwrap();
        assert!(off_identity(&block(&k1, 0, 0, f, f)) <= 1e-12);
        assert!(off_identity(&block(&k1, f, f, m, m)) <= 1e-12);
        let lhat = to_na(&s.l_hat);
        let cross = lhat.solve_lower_triangular(&to_na(&s.e_hat).transpose()).unwrap();
        assert!((to_na(&block(&k1, f, 0, m, f)) - &cross).amax() <= 1e-12);
        // second order: block diagonal, trailing block I − L̂⁻¹ÊᵀÊL̂⁻ᵀ
        let k2 = precond_matrix(&s, SchemeKind::SecondOrderFull).unwrap();
        assert!(block(&k2, f, 0, m, f).max_abs() <= 1e-12);
        let expect = nalgebra::DMatrix::identity(m, m) - &cross * cross.transpose();
        assert!((to_na(&block(&k2, f, f, m, m)) - expect).amax() <= 1e-12);
        // ẽ is the spectral norm of the cross term
        assert!((na_norm2(&cross) - s.e_tilde).abs() <= 1e-12);
    }
}

#[test]
fn superfine_equals_second_order_without_e1() {
    // σ = (1, 0.5, 0.05): at eps = 0.1 the third pivot lands in f₂ and Ê₁ is empty
    let mut r = rng(73);
    let panel = with_singular_values(3, 5, &[1.0, 0.5, 0.05], &mut r);
    let mut a = DenseMatrix::identity(8);
    a.set_submatrix(0, 3, &panel);
    a.set_submatrix(3, 0, &panel.transpose());
    for i in 3..8 {
        a[(i, i)] = 2.0;
    }
    let s = build_two_level(&a, 3, 0.1, SchemeKind::SecondOrderSuperfine).unwrap();
    assert_eq!((s.rank_c, s.rank_f2), (2, 1));
    assert_eq!(s.e_hat1().rows(), 0);
    let k2 = precond_matrix(&s, SchemeKind::SecondOrderFull).unwrap();
    let k3 = precond_matrix(&s, SchemeKind::SecondOrderSuperfine).unwrap();
    assert!(k2.sub(&k3).max_abs() <= 1e-14);
}

#[test]
fn second_order_condition_is_smaller() {
    for s in setups() {
        assert!(s.e_tilde < 1.0);
        let (k1, k2) = (cond_first(&s), cond_second(&s));
        assert!(k2 <= k1);
        let d1 = dense_condition(&precond_matrix(&s, SchemeKind::FirstOrder).unwrap());
        let d2 = dense_condition(&precond_matrix(&s, SchemeKind::SecondOrderFull).unwrap());
        assert!((d1 - k1).abs() <= 1e-8 * k1, "{d1} vs {k1}");
        assert!((d2 - k2).abs() <= 1e-8 * k2, "{d2} vs {k2}");
    }
}

#[test]
fn rate_identity_holds() {
    for i in 1..20 {
        let (r1, r2, gap) = rate_identity(i as f64 * 0.05);
        assert!(gap <= 1e-14);
        assert!(r2 <= r1);
    }
}

#[test]
fn second_order_system_blocks() {
    let inst = make_theorem_instance(6, 3, 5);
    let a2 = second_order_system(&inst.c, 1.0);
    assert_eq!(block(&a2, 0, 6, 6, 3).max_abs(), 0.0);
    assert!(block(&a2, 6, 6, 3, 3).sub(&inst.f()).max_abs() <= 1e-15);
    let ctb: f64 = inst.c.transpose().matvec(&inst.b1).iter().map(|x| x.abs()).fold(0.0, f64::max);
    assert!(ctb <= 1e-12);
    assert!(inst.b1.iter().any(|&x| x != 0.0));
}

#[test]
fn residuals_match_at_double_steps() {
    for seed in 0..5 {
        let inst = make_theorem_instance(8, 4, 300 + seed);
        let out = theorem_harness(&inst, 1e-10).unwrap();
        assert!(out.max_deviation <= 1e-8, "{}", out.max_deviation);
        assert!(out.residuals1.len() >= out.residuals2.len());
        let broken = theorem_harness(&inst.with_broken_constraint(), 1e-10).unwrap();
        assert!(broken.max_deviation > 1e-4);
    }
}

#[test]
fn slope_of_power_law() {
    let x = [1e-1, 1e-2, 1e-3];
    let y: Vec<f64> = x.iter().map(|v| 3.0 * v * v).collect();
    assert!((loglog_slope(&x, &y) - 2.0).abs() <= 1e-12);
}
