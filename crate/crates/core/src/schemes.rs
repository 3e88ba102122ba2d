//! Elementary operators of the factorization and the per-block assembly
//! functions that produce them: interior elimination, interface scaling and
//! interface sparsification under the three approximation schemes.
//!
//! All three schemes share the same trailing (middle) matrix after a
//! sparsification: the coarse rows `Q_cᵀ A_pw` replace the interface rows
//! and the fine variables are decoupled. They differ only in what the outer
//! factor keeps:
//!
//! * first order drops `E = Q_fᵀ A_pw` entirely (error `O(‖E‖)`),
//! * full second order keeps `E` in a unit block-triangular correction and
//!   drops only `−EᵀE` from the Schur complement (error `O(‖E‖²)`),
//! * superfine keeps only `E₂ = Q_f₂ᵀ A_pw` and drops `E₁` (where
//!   `‖E₁‖ = O(ε²)`) along with `−E₂ᵀE₂`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dense::{
    cholesky, spectral_norm, tri_solve, DenseMatrix, PivotedQr, Reflectors, Side, StopRule,
    Transpose,
};
use crate::dense::triangular::{lower_solve_in_place, lower_t_solve_in_place};
use crate::error::DenseError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SchemeKind {
    #[serde(rename = "first")]
    FirstOrder,
    #[serde(rename = "second-full")]
    SecondOrderFull,
    #[serde(rename = "second-superfine")]
    SecondOrderSuperfine,
}

impl SchemeKind {
    pub const ALL: [SchemeKind; 3] = [
        SchemeKind::FirstOrder,
        SchemeKind::SecondOrderFull,
        SchemeKind::SecondOrderSuperfine,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SchemeKind::FirstOrder => "first",
            SchemeKind::SecondOrderFull => "second-full",
            SchemeKind::SecondOrderSuperfine => "second-superfine",
        }
    }

    pub(crate) fn tag(self) -> u8 {
        match self {
            SchemeKind::FirstOrder => 1,
            SchemeKind::SecondOrderFull => 2,
            SchemeKind::SecondOrderSuperfine => 3,
        }
    }

    pub(crate) fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            1 => Some(SchemeKind::FirstOrder),
            2 => Some(SchemeKind::SecondOrderFull),
            3 => Some(SchemeKind::SecondOrderSuperfine),
            _ => None,
        }
    }
}

impl fmt::Display for SchemeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SchemeKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "first" | "first-order" | "fo" => Ok(SchemeKind::FirstOrder),
            "second-full" | "second" | "so" => Ok(SchemeKind::SecondOrderFull),
            "second-superfine" | "superfine" | "sf" => Ok(SchemeKind::SecondOrderSuperfine),
            other => Err(format!(
                "unknown scheme `{other}` (expected first, second-full or second-superfine)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OperatorKind {
    Elimination,
    Scaling,
    Orthogonal,
    ErrorCorrection,
}

/// One elementary factor of `L⁻¹`, acting on the entries of a global vector
/// named by its slot lists.
#[derive(Debug, Clone, PartialEq)]
pub enum BlockOperator {
    /// `x_s ← L_s⁻¹ x_s; x_w ← x_w − (L_s⁻¹ A_sw)ᵀ x_s`
    Elimination {
        pivot: Vec<usize>,
        neighbors: Vec<usize>,
        factor: DenseMatrix,
        /// `L_s⁻¹ A_sw`, `|s| × |w|`.
        coupling: DenseMatrix,
    },
    /// `x_p ← Z_p⁻¹ x_p`
    Scaling { slots: Vec<usize>, factor: DenseMatrix },
    /// `x_p ← Qᵀ x_p`; afterwards the leading `rank_c` slots hold the coarse
    /// variables and the rest the fine ones.
    Orthogonal { slots: Vec<usize>, reflectors: Reflectors },
    /// `x_w ← x_w − Ẽᵀ x_f`, with `Ẽ` stored on the column subset `columns`
    /// of the neighbor slot list (the other columns are structurally zero).
    ErrorCorrection {
        fine: Vec<usize>,
        neighbors: Vec<usize>,
        columns: Vec<usize>,
        block: DenseMatrix,
        /// `block` is upper trapezoidal (superfine `E₂`).
        trapezoidal: bool,
    },
}

impl BlockOperator {
    pub fn kind(&self) -> OperatorKind {
        match self {
            BlockOperator::Elimination { .. } => OperatorKind::Elimination,
            BlockOperator::Scaling { .. } => OperatorKind::Scaling,
            BlockOperator::Orthogonal { .. } => OperatorKind::Orthogonal,
            BlockOperator::ErrorCorrection { .. } => OperatorKind::ErrorCorrection,
        }
    }

    /// Stored payload entries: the triangle of triangular factors (just the
    /// diagonal when the factor is diagonal), whole coupling panels, the
    /// reflector vectors, and the upper trapezoid of a superfine `Ẽ`.
    pub fn nnz(&self) -> usize {
        let triangle = |f: &DenseMatrix| if f.is_diagonal() { f.rows() } else { f.lower_triangle_len() };
        match self {
            BlockOperator::Elimination { factor, coupling, .. } => triangle(factor) + coupling.as_slice().len(),
            BlockOperator::Scaling { factor, .. } => triangle(factor),
            BlockOperator::Orthogonal { reflectors, .. } => reflectors.stored_len(),
            BlockOperator::ErrorCorrection { block, trapezoidal, .. } => {
                if *trapezoidal {
                    block.upper_trapezoid_len()
                } else {
                    block.as_slice().len()
                }
            }
        }
    }

    /// `x ← op · x`, where `op` is this factor of `L⁻¹`.
    pub fn apply(&self, x: &mut [f64], scratch: &mut Vec<f64>) {
        match self {
            BlockOperator::Elimination { pivot, neighbors, factor, coupling } => {
                gather(x, pivot, scratch);
                lower_solve_in_place(factor, scratch);
                scatter(scratch, pivot, x);
                for (c, &w) in neighbors.iter().enumerate() {
                    x[w] -= crate::dense::dot(coupling.col(c), scratch);
                }
            }
            BlockOperator::Scaling { slots, factor } => {
                gather(x, slots, scratch);
                lower_solve_in_place(factor, scratch);
                scatter(scratch, slots, x);
            }
            BlockOperator::Orthogonal { slots, reflectors } => {
                gather(x, slots, scratch);
                reflectors.apply_qt(scratch);
                scatter(scratch, slots, x);
            }
            BlockOperator::ErrorCorrection { fine, neighbors, columns, block, .. } => {
                gather(x, fine, scratch);
                for (c, &pos) in columns.iter().enumerate() {
                    x[neighbors[pos]] -= crate::dense::dot(block.col(c), scratch);
                }
            }
        }
    }

    /// `x ← opᵀ · x`.
    pub fn apply_transpose(&self, x: &mut [f64], scratch: &mut Vec<f64>) {
        match self {
            BlockOperator::Elimination { pivot, neighbors, factor, coupling } => {
                gather(x, pivot, scratch);
                for (c, &w) in neighbors.iter().enumerate() {
                    let xw = x[w];
                    if xw != 0.0 {
                        for (s, &v) in scratch.iter_mut().zip(coupling.col(c)) {
                            *s -= v * xw;
                        }
                    }
                }
                lower_t_solve_in_place(factor, scratch);
                scatter(scratch, pivot, x);
            }
            BlockOperator::Scaling { slots, factor } => {
                gather(x, slots, scratch);
                lower_t_solve_in_place(factor, scratch);
                scatter(scratch, slots, x);
            }
            BlockOperator::Orthogonal { slots, reflectors } => {
                gather(x, slots, scratch);
                reflectors.apply_q(scratch);
                scatter(scratch, slots, x);
            }
            BlockOperator::ErrorCorrection { fine, neighbors, columns, block, .. } => {
                gather(x, fine, scratch);
                for (c, &pos) in columns.iter().enumerate() {
                    let xw = x[neighbors[pos]];
                    if xw != 0.0 {
                        for (s, &v) in scratch.iter_mut().zip(block.col(c)) {
                            *s -= v * xw;
                        }
                    }
                }
                scatter(scratch, fine, x);
            }
        }
    }
}

#[inline]
fn gather(x: &[f64], idx: &[usize], out: &mut Vec<f64>) {
    out.clear();
    out.extend(idx.iter().map(|&i| x[i]));
}

#[inline]
fn scatter(vals: &[f64], idx: &[usize], x: &mut [f64]) {
    for (&i, &v) in idx.iter().zip(vals) {
        x[i] = v;
    }
}

/// Payload of an interior elimination.
#[derive(Debug, Clone, PartialEq)]
pub struct Elimination {
    /// `L_s` with `A_ss = L_s L_sᵀ`.
    pub factor: DenseMatrix,
    /// `L_s⁻¹ A_sw`
    pub coupling: DenseMatrix,
}

impl Elimination {
    /// `A_ws A_ss⁻¹ A_sw`, the product to subtract from `A_ww`.
    pub fn schur_product(&self) -> DenseMatrix {
        self.coupling.gram()
    }
}

/// Block Cholesky step on an interior `s`.
///
/// `a_sw` is the coupling of `s` to all its neighbors, `|s| × |w|`
/// (the transpose of `A_ws`). Returns the elimination payload together with
/// `A_ws A_ss⁻¹ A_sw`, which the caller subtracts from `A_ww`.
pub fn make_elimination(
    a_ss: &DenseMatrix,
    a_sw: &DenseMatrix,
) -> Result<(Elimination, DenseMatrix), DenseError> {
    let factor = cholesky(a_ss)?;
    let coupling = tri_solve(&factor, a_sw, Side::Left, Transpose::No)?;
    let elim = Elimination { factor, coupling };
    let schur = elim.schur_product();
    Ok((elim, schur))
}

/// Cholesky scaling of an interface: returns `Z_p` (with `A_pp = Z_p Z_pᵀ`)
/// and the scaled panel `Z_p⁻¹ A_pw`.
pub fn make_scaling(
    a_pp: &DenseMatrix,
    a_pw: &DenseMatrix,
) -> Result<(DenseMatrix, DenseMatrix), DenseError> {
    let z = cholesky(a_pp)?;
    let panel = tri_solve(&z, a_pw, Side::Left, Transpose::No)?;
    Ok((z, panel))
}

/// Result of sparsifying one scaled interface panel.
#[derive(Debug, Clone)]
pub struct Sparsification {
    scheme: SchemeKind,
    qr: PivotedQr,
}

/// Error-correction payload relative to the panel's column space.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrectionBlock {
    /// Range of fine positions (after `Qᵀ`) the correction reads.
    pub fine: std::ops::Range<usize>,
    /// Panel columns carrying nonzeros.
    pub columns: Vec<usize>,
    pub block: DenseMatrix,
    pub trapezoidal: bool,
}

impl Sparsification {
    pub fn scheme(&self) -> SchemeKind {
        self.scheme
    }

    pub fn qr(&self) -> &PivotedQr {
        &self.qr
    }

    pub fn rank_c(&self) -> usize {
        self.qr.rank_c()
    }

    pub fn rank_f2(&self) -> usize {
        match self.scheme {
            SchemeKind::SecondOrderSuperfine => self.qr.rank_f2(),
            _ => 0,
        }
    }

    pub fn interface_size(&self) -> usize {
        self.qr.rows()
    }

    pub fn fine_count(&self) -> usize {
        self.interface_size() - self.rank_c()
    }

    /// `Q_cᵀ A_pw`, the new coupling of the coarse variables.
    pub fn coarse_rows(&self) -> DenseMatrix {
        self.qr.coarse_rows()
    }

    /// The full change of basis on the interface.
    pub fn reflectors(&self) -> &Reflectors {
        self.qr.reflectors()
    }

    /// Ẽ: `None` for first order or when no fine variable is corrected.
    pub fn correction(&self) -> Option<CorrectionBlock> {
        let k = self.rank_c();
        let m = self.interface_size();
        let (end, trapezoidal) = match self.scheme {
            SchemeKind::FirstOrder => return None,
            SchemeKind::SecondOrderFull => (m, false),
            SchemeKind::SecondOrderSuperfine => (self.qr.steps(), true),
        };
        if end == k || self.qr.cols() == k {
            return None;
        }
        Some(CorrectionBlock {
            fine: k..end,
            columns: self.qr.perm()[k..].to_vec(),
            block: self.qr.trailing_block(k, end, k),
            trapezoidal,
        })
    }

    /// `E = Q_fᵀ A_pw` in the basis of the performed reflectors, in panel column order.
    pub fn dropped_full(&self) -> DenseMatrix {
        self.qr.rows_unpermuted(self.rank_c(), self.interface_size())
    }

    /// `(E₂, E₁)` for the superfine split (`E₂` empty for the other schemes).
    pub fn dropped_split(&self) -> (DenseMatrix, DenseMatrix) {
        let k = self.rank_c();
        let s = k + self.rank_f2();
        let m = self.interface_size();
        (self.qr.rows_unpermuted(k, s), self.qr.rows_unpermuted(s, m))
    }
}

/// Truncated pivoted QR of a scaled interface panel under `scheme`.
pub fn make_sparsification(
    panel: &DenseMatrix,
    eps: f64,
    scheme: SchemeKind,
) -> Result<Sparsification, DenseError> {
    let qr = PivotedQr::compute(panel, StopRule::for_scheme(eps, scheme))?;
    Ok(Sparsification { scheme, qr })
}

/// Norm of the term the scheme drops: `‖E‖₂` (first order), `‖EᵀE‖₂ = ‖E‖₂²`
/// (full second order), `max(‖E₂‖₂², ‖E₁‖₂)` (superfine).
pub fn local_error(scheme: SchemeKind, sparsification: &Sparsification) -> f64 {
    match scheme {
        SchemeKind::FirstOrder => spectral_norm(&sparsification.dropped_full()),
        SchemeKind::SecondOrderFull => spectral_norm(&sparsification.dropped_full()).powi(2),
        SchemeKind::SecondOrderSuperfine => {
            let (e2, e1) = sparsification.dropped_split();
            spectral_norm(&e2).powi(2).max(spectral_norm(&e1))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scheme_names_roundtrip() {
        for s in SchemeKind::ALL {
            assert_eq!(s.name().parse::<SchemeKind>().unwrap(), s);
            assert_eq!(SchemeKind::from_tag(s.tag()), Some(s));
        }
        assert!("third".parse::<SchemeKind>().is_err());
    }

    #[test]
    fn decoupled_block_eliminates_trivially() {
        let (e, schur) = make_elimination(&DenseMatrix::identity(3), &DenseMatrix::zeros(3, 4)).unwrap();
        assert_eq!(e.factor, DenseMatrix::identity(3));
        assert_eq!(schur, DenseMatrix::zeros(4, 4));
    }

    #[test]
    fn two_by_two_schur() {
        let a_ss = DenseMatrix::from_rows(&[&[4.0]]);
        let a_sw = DenseMatrix::from_rows(&[&[2.0]]);
        let (_, schur) = make_elimination(&a_ss, &a_sw).unwrap();
        assert_eq!(5.0 - schur[(0, 0)], 4.0);
    }

    #[test]
    fn scaling_cases() {
        let panel = DenseMatrix::from_fn(2, 3, |i, j| (i + j) as f64);
        let (z, scaled) = make_scaling(&DenseMatrix::identity(2), &panel).unwrap();
        assert_eq!(z, DenseMatrix::identity(2));
        assert_eq!(scaled, panel);

        let four = DenseMatrix::from_diagonal(&[4.0; 3]);
        let ones = DenseMatrix::from_fn(3, 5, |_, _| 1.0);
        let (_, scaled) = make_scaling(&four, &ones).unwrap();
        assert_eq!(scaled, DenseMatrix::from_fn(3, 5, |_, _| 0.5));
    }

    #[test]
    fn eps_extremes() {
        let panel = DenseMatrix::from_fn(4, 6, |i, j| {
            if i == j {
                1.0 / (1 + i) as f64
            } else {
                0.01 * (i + j) as f64
            }
        });
        let s = make_sparsification(&panel, 0.0, SchemeKind::SecondOrderFull).unwrap();
        assert_eq!(s.fine_count(), 0);
        assert!(s.correction().is_none());
        let s = make_sparsification(&panel, 1.0, SchemeKind::SecondOrderFull).unwrap();
        assert_eq!(s.rank_c(), 1);
        assert_eq!(s.fine_count(), 3);
        let c = s.correction().unwrap();
        assert_eq!(c.fine, 1..4);
        assert_eq!(c.columns.len(), 5);
    }

    #[test]
    fn local_error_closed_forms() {
        let zero = make_sparsification(&DenseMatrix::zeros(3, 3), 0.1, SchemeKind::FirstOrder).unwrap();
        for s in SchemeKind::ALL {
            assert_eq!(local_error(s, &zero), 0.0);
        }
        let panel = DenseMatrix::from_rows(&[&[1.0, 0.0], &[0.0, 0.1]]);
        let fo = make_sparsification(&panel, 0.5, SchemeKind::FirstOrder).unwrap();
        let so = make_sparsification(&panel, 0.5, SchemeKind::SecondOrderFull).unwrap();
        assert!((local_error(SchemeKind::FirstOrder, &fo) - 0.1).abs() < 1e-15);
        assert!((local_error(SchemeKind::SecondOrderFull, &so) - 0.01).abs() < 1e-15);
    }

    #[test]
    fn operator_and_transpose_are_adjoint() {
        let factor = DenseMatrix::from_rows(&[&[2.0, 0.0], &[0.5, 1.5]]);
        let coupling = DenseMatrix::from_rows(&[&[1.0, -1.0, 0.5], &[0.25, 2.0, -0.5]]);
        let ops = vec![
            BlockOperator::Elimination {
                pivot: vec![4, 1],
                neighbors: vec![0, 3, 2],
                factor: factor.clone(),
                coupling,
            },
            BlockOperator::Scaling { slots: vec![2, 0], factor },
            BlockOperator::ErrorCorrection {
                fine: vec![1, 4],
                neighbors: vec![0, 2, 3],
                columns: vec![2, 0],
                block: DenseMatrix::from_rows(&[&[0.3, -0.2], &[0.0, 0.7]]),
                trapezoidal: true,
            },
        ];
        let x: Vec<f64> = vec![1.0, -2.0, 0.5, 3.0, -1.5];
        let y: Vec<f64> = vec![0.2, 1.0, -0.7, 0.4, 2.5];
        let mut scratch = Vec::new();
        for op in &ops {
            let mut ax = x.clone();
            op.apply(&mut ax, &mut scratch);
            let mut aty = y.clone();
            op.apply_transpose(&mut aty, &mut scratch);
            let lhs: f64 = ax.iter().zip(&y).map(|(a, b)| a * b).sum();
            let rhs: f64 = x.iter().zip(&aty).map(|(a, b)| a * b).sum();
            assert!((lhs - rhs).abs() < 1e-13, "{:?}", op.kind());
        }
    }
}
