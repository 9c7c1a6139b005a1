//! Sparse shifted solves, dense eigendecomposition and basis helpers.
//!
//! Shifted systems (sI - A)x = y are solved by splitting the sparsity graph
//! into connected components, ordering each one with reverse Cuthill-McKee
//! and running a banded LU with partial pivoting. The symbolic part only
//! depends on the pattern of A and is computed once per system.

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};
use nalgebra_sparse::{CooMatrix, CsrMatrix};

use crate::{Error, Result, C64};

/// A pivot smaller than this times the infinity norm of the matrix counts as zero.
pub const SINGULAR_PIVOT_RTOL: f64 = 1e-14;

/// Singular values below this fraction of the largest one are dropped.
pub const RANK_DROP_RTOL: f64 = 1e-12;

#[derive(Debug, Clone)]
struct BlockPlan {
    /// Local index to global index.
    nodes: Vec<usize>,
    kl: usize,
    ku: usize,
}

/// Pattern-only data shared by every shifted factorization of one matrix.
#[derive(Debug, Clone)]
pub struct SolvePlan {
    n: usize,
    blocks: Vec<BlockPlan>,
    block_of: Vec<usize>,
    local: Vec<usize>,
}

impl SolvePlan {
    pub fn new(a: &CsrMatrix<C64>) -> Self {
        let n = a.nrows();
        let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (i, row) in a.row_iter().enumerate() {
            for &j in row.col_indices() {
                if i != j {
                    adj[i].push(j);
                    adj[j].push(i);
                }
            }
        }
        for l in &mut adj {
            l.sort_unstable();
            l.dedup();
        }

        let mut block_of = vec![usize::MAX; n];
        let mut local = vec![0; n];
        let mut blocks = Vec::new();
        let mut marks = Marks::new(n);
        for start in 0..n {
            if block_of[start] != usize::MAX {
                continue;
            }
            let b = blocks.len();
            let component = bfs_order(&adj, start, &mut marks);
            let root = pseudo_peripheral(&adj, &component, &mut marks);
            let mut order = cuthill_mckee(&adj, root, &mut marks);
            order.reverse();
            for (k, &g) in order.iter().enumerate() {
                block_of[g] = b;
                local[g] = k;
            }
            blocks.push(BlockPlan { nodes: order, kl: 0, ku: 0 });
        }

        for (i, row) in a.row_iter().enumerate() {
            let li = local[i];
            let blk = &mut blocks[block_of[i]];
            for &j in row.col_indices() {
                let lj = local[j];
                if lj > li {
                    blk.ku = blk.ku.max(lj - li);
                } else {
                    blk.kl = blk.kl.max(li - lj);
                }
            }
        }
        Self { n, blocks, block_of, local }
    }

    pub fn n_blocks(&self) -> usize {
        self.blocks.len()
    }

    /// Largest (lower, upper) bandwidth over all blocks.
    pub fn bandwidth(&self) -> (usize, usize) {
        self.blocks.iter().fold((0, 0), |(l, u), b| (l.max(b.kl), u.max(b.ku)))
    }

    /// Factors sI - A, where `a` must have the pattern this plan was built from.
    pub fn factor<'p>(&'p self, a: &CsrMatrix<C64>, s: C64) -> Result<ShiftedSolver<'p>> {
        let mut lus = Vec::with_capacity(self.blocks.len());
        let mut norm = 0.0f64;
        let mut min_pivot = f64::INFINITY;
        for (b, blk) in self.blocks.iter().enumerate() {
            let m = blk.nodes.len();
            let mut lu = BandLu::zeros(m, blk.kl, blk.ku);
            for (li, &gi) in blk.nodes.iter().enumerate() {
                let row = a.row(gi);
                let mut row_sum = 0.0;
                let mut diag = s;
                for (&j, &v) in row.col_indices().iter().zip(row.values()) {
                    debug_assert_eq!(self.block_of[j], b);
                    if j == gi {
                        diag -= v;
                    } else {
                        lu.set(li, self.local[j], -v);
                        row_sum += v.norm();
                    }
                }
                lu.set(li, li, diag);
                norm = norm.max(row_sum + diag.norm());
            }
            let piv = lu.factor().ok_or(Error::SingularShift { shift: s })?;
            min_pivot = min_pivot.min(piv);
            lus.push(lu);
        }
        if self.n > 0 && !(min_pivot > SINGULAR_PIVOT_RTOL * norm) {
            return Err(Error::SingularShift { shift: s });
        }
        Ok(ShiftedSolver { plan: self, lus, shift: s })
    }
}

/// Visited flags that reset in O(1) by bumping a generation counter.
struct Marks {
    stamp: Vec<u32>,
    gen: u32,
}

impl Marks {
    fn new(n: usize) -> Self {
        Self { stamp: vec![0; n], gen: 0 }
    }
    fn reset(&mut self) {
        self.gen += 1;
    }
    /// Marks `v`, returning whether it was unmarked.
    fn visit(&mut self, v: usize) -> bool {
        let fresh = self.stamp[v] != self.gen;
        self.stamp[v] = self.gen;
        fresh
    }
}

fn bfs_order(adj: &[Vec<usize>], start: usize, marks: &mut Marks) -> Vec<usize> {
    marks.reset();
    marks.visit(start);
    let mut out = vec![start];
    let mut head = 0;
    while head < out.len() {
        let v = out[head];
        head += 1;
        for &u in &adj[v] {
            if marks.visit(u) {
                out.push(u);
            }
        }
    }
    out
}

/// Level structure rooted at `root`: (eccentricity, min-degree node of the last level).
fn last_level(adj: &[Vec<usize>], root: usize, marks: &mut Marks) -> (usize, usize) {
    marks.reset();
    marks.visit(root);
    let mut level = vec![root];
    let mut depth = 0;
    loop {
        let mut next = Vec::new();
        for &v in &level {
            for &u in &adj[v] {
                if marks.visit(u) {
                    next.push(u);
                }
            }
        }
        if next.is_empty() {
            let pick = *level.iter().min_by_key(|&&v| (adj[v].len(), v)).unwrap();
            return (depth, pick);
        }
        level = next;
        depth += 1;
    }
}

// George-Liu heuristic: hop to the far end until the eccentricity stops growing.
fn pseudo_peripheral(adj: &[Vec<usize>], comp: &[usize], marks: &mut Marks) -> usize {
    let mut root = *comp.iter().min_by_key(|&&v| (adj[v].len(), v)).unwrap();
    let mut ecc = None;
    for _ in 0..8 {
        let (e, cand) = last_level(adj, root, marks);
        if ecc.is_some_and(|old| e <= old) {
            break;
        }
        ecc = Some(e);
        root = cand;
    }
    root
}

fn cuthill_mckee(adj: &[Vec<usize>], root: usize, marks: &mut Marks) -> Vec<usize> {
    marks.reset();
    marks.visit(root);
    let mut out = Vec::new();
    let mut queue = VecDeque::from([root]);
    while let Some(v) = queue.pop_front() {
        out.push(v);
        let mut nb: Vec<usize> = adj[v].iter().copied().filter(|&u| marks.stamp[u] != marks.gen).collect();
        nb.sort_by_key(|&u| (adj[u].len(), u));
        for u in nb {
            marks.visit(u);
            queue.push_back(u);
        }
    }
    out
}

/// Banded LU with partial pivoting; multipliers are kept apart from U so row
/// swaps never touch them.
#[derive(Debug, Clone)]
struct BandLu {
    n: usize,
    kl: usize,
    ku: usize,
    w: usize,
    ab: Vec<C64>,
    lmul: Vec<C64>,
    piv: Vec<usize>,
}

impl BandLu {
    fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let w = 2 * kl + ku + 1;
        Self {
            n,
            kl,
            ku,
            w,
            ab: vec![C64::new(0.0, 0.0); n * w],
            lmul: vec![C64::new(0.0, 0.0); n * kl],
            piv: vec![0; n],
        }
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        i * self.w + j + self.kl - i
    }

    fn set(&mut self, i: usize, j: usize, v: C64) {
        let k = self.idx(i, j);
        self.ab[k] = v;
    }

    /// Returns the smallest pivot magnitude, or `None` on an exactly zero pivot.
    fn factor(&mut self) -> Option<f64> {
        let (n, kl, ku) = (self.n, self.kl, self.ku);
        let mut min_pivot = f64::INFINITY;
        for k in 0..n {
            let last = (k + kl).min(n - 1);
            let mut p = k;
            let mut best = self.ab[self.idx(k, k)].norm();
            for i in k + 1..=last {
                let v = self.ab[self.idx(i, k)].norm();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best == 0.0 || !best.is_finite() {
                return None;
            }
            min_pivot = min_pivot.min(best);
            self.piv[k] = p;
            let jmax = (k + kl + ku).min(n - 1);
            if p != k {
                for j in k..=jmax {
                    let (a, b) = (self.idx(k, j), self.idx(p, j));
                    self.ab.swap(a, b);
                }
            }
            let inv = self.ab[self.idx(k, k)].inv();
            let krow = self.idx(k, k);
            for i in k + 1..=last {
                let m = self.ab[self.idx(i, k)] * inv;
                self.lmul[k * kl + i - k - 1] = m;
                if m == C64::new(0.0, 0.0) {
                    continue;
                }
                let irow = self.idx(i, k);
                for off in 1..=jmax - k {
                    let u = self.ab[krow + off];
                    self.ab[irow + off] -= m * u;
                }
            }
        }
        Some(min_pivot)
    }

    #[allow(clippy::needless_range_loop)]
    fn solve_in_place(&self, x: &mut [C64]) {
        let (n, kl, ku) = (self.n, self.kl, self.ku);
        for k in 0..n {
            let p = self.piv[k];
            if p != k {
                x.swap(k, p);
            }
            let xk = x[k];
            if xk == C64::new(0.0, 0.0) {
                continue;
            }
            for i in k + 1..=(k + kl).min(n.saturating_sub(1)) {
                x[i] -= self.lmul[k * kl + i - k - 1] * xk;
            }
        }
        for i in (0..n).rev() {
            let d = self.idx(i, i);
            let mut s = x[i];
            for j in i + 1..=(i + kl + ku).min(n - 1) {
                s -= self.ab[d + j - i] * x[j];
            }
            x[i] = s / self.ab[d];
        }
    }
}

/// A factored sI - A ready for repeated solves.
#[derive(Debug, Clone)]
pub struct ShiftedSolver<'p> {
    plan: &'p SolvePlan,
    lus: Vec<BandLu>,
    pub shift: C64,
}

impl ShiftedSolver<'_> {
    pub fn solve(&self, rhs: &DVector<C64>) -> DVector<C64> {
        let plan = self.plan;
        let mut out = DVector::zeros(plan.n);
        let mut buf = Vec::new();
        for (blk, lu) in plan.blocks.iter().zip(&self.lus) {
            buf.clear();
            buf.extend(blk.nodes.iter().map(|&g| rhs[g]));
            lu.solve_in_place(&mut buf);
            for (&g, &v) in blk.nodes.iter().zip(&buf) {
                out[g] = v;
            }
        }
        out
    }
}

pub fn csr_from_dense(a: &DMatrix<C64>) -> CsrMatrix<C64> {
    let mut coo = CooMatrix::new(a.nrows(), a.ncols());
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            let v = a[(i, j)];
            if v != C64::new(0.0, 0.0) {
                coo.push(i, j, v);
            }
        }
    }
    CsrMatrix::from(&coo)
}

pub fn csr_to_dense(a: &CsrMatrix<C64>) -> DMatrix<C64> {
    let mut d = DMatrix::zeros(a.nrows(), a.ncols());
    for (i, j, &v) in a.triplet_iter() {
        d[(i, j)] += v;
    }
    d
}

pub fn csr_adjoint(a: &CsrMatrix<C64>) -> CsrMatrix<C64> {
    let mut coo = CooMatrix::new(a.ncols(), a.nrows());
    for (i, j, v) in a.triplet_iter() {
        coo.push(j, i, v.conj());
    }
    CsrMatrix::from(&coo)
}

/// y = A x
pub fn csr_mul(a: &CsrMatrix<C64>, x: &[C64], y: &mut [C64]) {
    let (offsets, cols, vals) = (a.row_offsets(), a.col_indices(), a.values());
    for (i, yi) in y.iter_mut().enumerate().take(a.nrows()) {
        let (lo, hi) = (offsets[i], offsets[i + 1]);
        *yi = cols[lo..hi].iter().zip(&vals[lo..hi]).map(|(&j, &v)| v * x[j]).sum();
    }
}

/// Eigenvalues and right eigenvectors (as columns) of a dense complex matrix.
pub fn eig(a: &DMatrix<C64>) -> Result<(Vec<C64>, DMatrix<C64>)> {
    let n = a.nrows();
    if n != a.ncols() {
        return Err(Error::DimensionMismatch(format!("eig of a {}x{} matrix", n, a.ncols())));
    }
    if n == 0 {
        return Ok((Vec::new(), DMatrix::zeros(0, 0)));
    }
    let m = faer::Mat::<C64>::from_fn(n, n, |i, j| a[(i, j)]);
    let e = m
        .eigen()
        .map_err(|_| Error::WrongRegime("eigenvalue iteration did not converge".into()))?;
    let s = e.S();
    let u = e.U();
    let vals = (0..n).map(|i| s[i]).collect();
    let vecs = DMatrix::from_fn(n, n, |i, j| u[(i, j)]);
    Ok((vals, vecs))
}

pub fn eigenvalues(a: &DMatrix<C64>) -> Result<Vec<C64>> {
    Ok(eig(a)?.0)
}

/// Singular values of a dense matrix, largest first.
pub fn singular_values(a: &DMatrix<C64>) -> Vec<f64> {
    if a.is_empty() {
        return Vec::new();
    }
    let mut sv: Vec<f64> = a.singular_values().iter().copied().collect();
    sv.sort_by(|x, y| y.total_cmp(x));
    sv
}

pub fn condition_number(a: &DMatrix<C64>) -> f64 {
    let sv = singular_values(a);
    match (sv.first(), sv.last()) {
        (Some(&hi), Some(&lo)) if lo > 0.0 => hi / lo,
        (Some(_), Some(_)) => f64::INFINITY,
        _ => 1.0,
    }
}

/// Orthonormal basis of the column span; fails when the normalized columns
/// are numerically dependent.
pub fn orthonormal_basis(m: DMatrix<C64>) -> Result<DMatrix<C64>> {
    orthonormalize(m, true)
}

/// Householder QR of the normalized columns, with an optional numerical rank check.
pub fn orthonormalize(mut m: DMatrix<C64>, check_rank: bool) -> Result<DMatrix<C64>> {
    let r = m.ncols();
    if r > m.nrows() {
        return Err(Error::RankDeficient { rank: m.nrows(), expected: r });
    }
    for mut col in m.column_iter_mut() {
        let nrm = col.norm();
        if nrm == 0.0 || !nrm.is_finite() {
            return Err(Error::RankDeficient { rank: 0, expected: r });
        }
        col /= C64::new(nrm, 0.0);
    }
    let qr = m.qr();
    if check_rank {
        let sv = singular_values(&qr.r());
        let rank = sv.iter().filter(|&&s| s > RANK_DROP_RTOL * sv[0]).count();
        if rank < r {
            return Err(Error::RankDeficient { rank, expected: r });
        }
    }
    Ok(qr.q())
}
