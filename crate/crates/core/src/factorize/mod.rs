//! The spaND driver: level by level, eliminate interiors, scale interfaces,
//! sparsify interfaces; the recorded operators form `L⁻¹`.

mod io;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::dense::DenseMatrix;
use crate::error::FactorError;
use crate::krylov::Preconditioner;
use crate::partition::{ClusterKind, PartitionHierarchy};
use crate::schemes::{
    make_elimination, make_scaling, make_sparsification, BlockOperator, SchemeKind,
};
use crate::sparse::SparseSymMatrix;

pub use io::{read_factorization, write_factorization};

pub const DEFAULT_SKIP_LEVELS: usize = 4;

/// Per-phase statistics.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LevelDiagnostics {
    pub level: usize,
    pub interiors: usize,
    pub eliminated_dofs: usize,
    pub interfaces: usize,
    pub sparsified: bool,
    /// Interface sizes before sparsification.
    pub sizes_before: Vec<usize>,
    /// Coarse sizes after sparsification.
    pub sizes_after: Vec<usize>,
    /// Superfine `f₂` sizes (superfine scheme only).
    pub rank_f2: Vec<usize>,
    /// Frobenius norms of the dropped couplings `E`.
    pub dropped_norms: Vec<f64>,
}

/// `L⁻¹` as an ordered product of elementary operators; `M = L⁻ᵀ L⁻¹ ≈ A⁻¹`.
#[derive(Debug, Clone, PartialEq)]
pub struct Factorization {
    pub(crate) n: usize,
    pub(crate) eps: f64,
    pub(crate) scheme: SchemeKind,
    pub(crate) ops: Vec<BlockOperator>,
    pub(crate) diagnostics: Vec<LevelDiagnostics>,
}

impl Factorization {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn scheme(&self) -> SchemeKind {
        self.scheme
    }

    pub fn ops(&self) -> &[BlockOperator] {
        &self.ops
    }

    pub fn diagnostics(&self) -> &[LevelDiagnostics] {
        &self.diagnostics
    }

    /// Stored payload entries across all operators.
    pub fn nnz(&self) -> usize {
        self.ops.iter().map(BlockOperator::nnz).sum()
    }

    /// `μ = nnz(L) / nnz(A)`
    pub fn memory_ratio(&self, a: &SparseSymMatrix) -> f64 {
        self.nnz() as f64 / a.nnz() as f64
    }

    fn check_len(&self, len: usize) -> Result<(), FactorError> {
        if len != self.n {
            return Err(FactorError::DimensionMismatch { expected: self.n, found: len });
        }
        Ok(())
    }

    /// `x ← L⁻¹ x`
    pub fn apply_inv(&self, x: &mut [f64]) -> Result<(), FactorError> {
        self.check_len(x.len())?;
        let mut scratch = Vec::new();
        for op in &self.ops {
            op.apply(x, &mut scratch);
        }
        Ok(())
    }

    /// `x ← L⁻ᵀ x`
    pub fn apply_inv_t(&self, x: &mut [f64]) -> Result<(), FactorError> {
        self.check_len(x.len())?;
        let mut scratch = Vec::new();
        for op in self.ops.iter().rev() {
            op.apply_transpose(x, &mut scratch);
        }
        Ok(())
    }

    /// `x ← M x = L⁻ᵀ L⁻¹ x`
    pub fn apply_m(&self, x: &mut [f64]) -> Result<(), FactorError> {
        self.apply_inv(x)?;
        self.apply_inv_t(x)
    }

    pub fn diagnostics_json(&self) -> serde_json::Value {
        serde_json::json!({
            "schema": 1,
            "n": self.n,
            "eps": self.eps,
            "scheme": self.scheme,
            "nnz": self.nnz(),
            "levels": self.diagnostics,
        })
    }
}

impl Preconditioner for Factorization {
    fn precondition(&self, r: &[f64], z: &mut [f64]) {
        z.copy_from_slice(r);
        self.apply_m(z).expect("preconditioner dimension checked by the solver");
    }
}

/// Working state of one active cluster: the vector positions it owns and its
/// blocks of the trailing matrix (row = this cluster), keyed by column cluster.
#[derive(Debug, Default)]
struct Active {
    slots: Vec<usize>,
    blocks: BTreeMap<usize, DenseMatrix>,
}

struct Trailing {
    clusters: BTreeMap<usize, Active>,
}

impl Trailing {
    fn neighbors(&self, c: usize) -> Vec<usize> {
        self.clusters[&c].blocks.keys().copied().filter(|&k| k != c).collect()
    }

    fn slots_of(&self, ids: &[usize]) -> Vec<usize> {
        ids.iter().flat_map(|k| self.clusters[k].slots.iter().copied()).collect()
    }

    fn row_panel(&self, c: usize, cols: &[usize]) -> DenseMatrix {
        let a = &self.clusters[&c];
        let blocks: Vec<&DenseMatrix> = cols.iter().map(|k| &a.blocks[k]).collect();
        DenseMatrix::hcat(a.slots.len(), &blocks)
    }

    /// Sets block `(i, j)` and its mirror.
    fn set_pair(&mut self, i: usize, j: usize, block: DenseMatrix) {
        if i != j {
            let t = block.transpose();
            self.clusters.get_mut(&j).unwrap().blocks.insert(i, t);
        }
        self.clusters.get_mut(&i).unwrap().blocks.insert(j, block);
    }

    /// Replaces the row panel of `c` over `cols` (and the mirrored column panel).
    fn set_row_panel(&mut self, c: usize, cols: &[usize], panel: &DenseMatrix) {
        let mut off = 0;
        for &k in cols {
            let w = self.clusters[&k].slots.len();
            let block = panel.submatrix(0, off, panel.rows(), w);
            off += w;
            self.set_pair(c, k, block);
        }
    }

    fn remove(&mut self, c: usize) -> Active {
        let gone = self.clusters.remove(&c).expect("active cluster");
        for k in gone.blocks.keys() {
            if *k != c {
                self.clusters.get_mut(k).unwrap().blocks.remove(&c);
            }
        }
        gone
    }
}

/// Approximate factorization of `a` over `hierarchy`.
///
/// Phases run from the leaves (`l = ℓ`) to the root (`l = 0`). The first
/// `skip_levels` phases eliminate only; afterwards every phase `l ≥ 1` also
/// scales and sparsifies its interfaces with accuracy `eps` under `scheme`.
pub fn factorize(
    a: &SparseSymMatrix,
    hierarchy: &PartitionHierarchy,
    eps: f64,
    scheme: SchemeKind,
    skip_levels: usize,
) -> Result<Factorization, FactorError> {
    if !(0.0..=1.0).contains(&eps) {
        return Err(FactorError::InvalidParameter(format!("eps = {eps} is outside [0, 1]")));
    }
    if hierarchy.n != a.n() {
        return Err(FactorError::HierarchyMismatch(format!(
            "hierarchy has {} unknowns, matrix has {}",
            hierarchy.n,
            a.n()
        )));
    }
    let n = a.n();
    let top = hierarchy.levels;
    let mut state = initial_state(a, hierarchy)?;
    let mut ops = Vec::new();
    let mut diagnostics = Vec::new();

    for (phase, l) in (0..=top).rev().enumerate() {
        let mut diag = LevelDiagnostics { level: l, ..Default::default() };

        // interiors
        let interiors: Vec<usize> = hierarchy
            .interiors(l)
            .map(|c| c.id)
            .filter(|id| state.clusters.contains_key(id))
            .collect();
        for s in interiors {
            let w = state.neighbors(s);
            let a_ss = state.clusters[&s].blocks[&s].clone();
            let a_sw = state.row_panel(s, &w);
            let (elim, schur) = make_elimination(&a_ss, &a_sw)
                .map_err(|source| FactorError::NotSpd { cluster: s, source })?;
            let mut off_i = 0;
            for &wi in &w {
                let ni = state.clusters[&wi].slots.len();
                let mut off_j = 0;
                for &wj in &w {
                    let nj = state.clusters[&wj].slots.len();
                    let upd = schur.submatrix(off_i, off_j, ni, nj);
                    let blocks = &mut state.clusters.get_mut(&wi).unwrap().blocks;
                    match blocks.get_mut(&wj) {
                        Some(b) => b.axpy(-1.0, &upd),
                        None => {
                            let mut b = upd;
                            b.scale(-1.0);
                            blocks.insert(wj, b);
                        }
                    }
                    off_j += nj;
                }
                off_i += ni;
            }
            let neighbors = state.slots_of(&w);
            let gone = state.remove(s);
            diag.interiors += 1;
            diag.eliminated_dofs += gone.slots.len();
            ops.push(BlockOperator::Elimination {
                pivot: gone.slots,
                neighbors,
                factor: elim.factor,
                coupling: elim.coupling,
            });
        }

        let interfaces: Vec<usize> = hierarchy
            .interfaces(l)
            .map(|c| c.id)
            .filter(|id| state.clusters.contains_key(id))
            .collect();
        diag.interfaces = interfaces.len();
        diag.sparsified = l >= 1 && phase >= skip_levels;

        if diag.sparsified {
            // scaling D_p: A_pp → I, two-sided on the couplings
            for &p in &interfaces {
                let w = state.neighbors(p);
                let a_pp = state.clusters[&p].blocks[&p].clone();
                let a_pw = state.row_panel(p, &w);
                let (z, panel) = make_scaling(&a_pp, &a_pw)
                    .map_err(|source| FactorError::NotSpd { cluster: p, source })?;
                let m = z.rows();
                state.set_pair(p, p, DenseMatrix::identity(m));
                state.set_row_panel(p, &w, &panel);
                ops.push(BlockOperator::Scaling { slots: state.clusters[&p].slots.clone(), factor: z });
            }
            // sparsification Q_p, E_p
            for &p in &interfaces {
                let w = state.neighbors(p);
                let panel = state.row_panel(p, &w);
                let sp = make_sparsification(&panel, eps, scheme)?;
                let m = sp.interface_size();
                let k = sp.rank_c();
                diag.sizes_before.push(m);
                diag.sizes_after.push(k);
                diag.rank_f2.push(sp.rank_f2());
                if k == m {
                    diag.dropped_norms.push(0.0);
                    continue;
                }
                diag.dropped_norms.push(sp.dropped_full().frobenius_norm());
                let slots = state.clusters[&p].slots.clone();
                ops.push(BlockOperator::Orthogonal {
                    slots: slots.clone(),
                    reflectors: sp.reflectors().clone(),
                });
                if let Some(corr) = sp.correction() {
                    ops.push(BlockOperator::ErrorCorrection {
                        fine: slots[corr.fine.clone()].to_vec(),
                        neighbors: state.slots_of(&w),
                        columns: corr.columns,
                        block: corr.block,
                        trapezoidal: corr.trapezoidal,
                    });
                }
                if k == 0 {
                    state.remove(p);
                    continue;
                }
                let coarse = sp.coarse_rows();
                state.clusters.get_mut(&p).unwrap().slots.truncate(k);
                state.set_pair(p, p, DenseMatrix::identity(k));
                state.set_row_panel(p, &w, &coarse);
            }
        }
        diagnostics.push(diag);

        if l > 0 {
            state = promote(state, hierarchy, l)?;
        }
    }
    if !state.clusters.is_empty() {
        return Err(FactorError::HierarchyMismatch(format!(
            "{} clusters left after the root phase",
            state.clusters.len()
        )));
    }
    Ok(Factorization { n, eps, scheme, ops, diagnostics })
}

fn initial_state(a: &SparseSymMatrix, h: &PartitionHierarchy) -> Result<Trailing, FactorError> {
    let n = a.n();
    let mut cluster_of = vec![usize::MAX; n];
    let mut local = vec![0usize; n];
    let mut clusters = BTreeMap::new();
    for c in h.level(h.levels) {
        for (i, &v) in c.dofs.iter().enumerate() {
            if v >= n || cluster_of[v] != usize::MAX {
                return Err(FactorError::HierarchyMismatch(format!("dof {v} assigned twice or out of range")));
            }
            cluster_of[v] = c.id;
            local[v] = i;
        }
        clusters.insert(c.id, Active { slots: c.dofs.clone(), blocks: BTreeMap::new() });
    }
    if let Some(v) = cluster_of.iter().position(|&c| c == usize::MAX) {
        return Err(FactorError::HierarchyMismatch(format!("dof {v} is not covered")));
    }
    for (&id, act) in clusters.iter_mut() {
        let m = act.slots.len();
        for (i, &v) in act.slots.iter().enumerate() {
            let (cols, vals) = a.row(v);
            for (&u, &val) in cols.iter().zip(vals) {
                let cu = cluster_of[u];
                let nu = h.cluster(cu).dofs.len();
                let b = act.blocks.entry(cu).or_insert_with(|| DenseMatrix::zeros(m, nu));
                b[(i, local[u])] = val;
            }
        }
        debug_assert!(act.blocks.contains_key(&id));
    }
    Ok(Trailing { clusters })
}

/// Merges the surviving level-`l` interfaces into their level-`(l−1)` clusters.
fn promote(state: Trailing, h: &PartitionHierarchy, l: usize) -> Result<Trailing, FactorError> {
    let mut target = BTreeMap::new();
    for &id in state.clusters.keys() {
        let c = h.cluster(id);
        if c.level != l || c.kind != ClusterKind::Interface {
            return Err(FactorError::HierarchyMismatch(format!(
                "cluster {id} still active after phase {l}"
            )));
        }
        let t = c.promotion.ok_or_else(|| {
            FactorError::HierarchyMismatch(format!("interface {id} has no promotion target"))
        })?;
        target.insert(id, t);
    }
    // member list and offsets of each new cluster
    let mut members: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (&id, &t) in &target {
        members.entry(t).or_default().push(id);
    }
    let mut offset = BTreeMap::new();
    let mut size = BTreeMap::new();
    for (&t, ms) in &members {
        let mut off = 0;
        for &m in ms {
            offset.insert(m, off);
            off += state.clusters[&m].slots.len();
        }
        size.insert(t, off);
    }
    let mut merged: BTreeMap<usize, Active> = BTreeMap::new();
    for (&t, ms) in &members {
        let slots = ms.iter().flat_map(|m| state.clusters[m].slots.iter().copied()).collect();
        merged.insert(t, Active { slots, blocks: BTreeMap::new() });
    }
    for (id, act) in state.clusters {
        let t = target[&id];
        let r0 = offset[&id];
        for (k, block) in act.blocks {
            let tk = target[&k];
            let entry = merged
                .get_mut(&t)
                .unwrap()
                .blocks
                .entry(tk)
                .or_insert_with(|| DenseMatrix::zeros(size[&t], size[&tk]));
            entry.set_submatrix(r0, offset[&k], &block);
        }
    }
    Ok(Trailing { clusters: merged })
}
