//! Single-input single-output systems in state-space and pole-residue form.

use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};
use nalgebra_sparse::{CooMatrix, CsrMatrix};

use crate::linalg::{self, ShiftedSolver, SolvePlan};
use crate::{Error, Result, C64};

/// Relative separation below which two poles count as a repeated eigenvalue.
pub const POLE_SEP_RTOL: f64 = 1e-10;

pub(crate) fn pole_sep_tol(poles: &[C64]) -> f64 {
    let scale = poles.iter().map(|p| p.norm()).fold(0.0, f64::max);
    POLE_SEP_RTOL * (1.0 + scale)
}

/// Anything that can be evaluated as a scalar transfer function.
pub trait TransferFunction {
    fn eval(&self, s: C64) -> Result<C64>;

    /// Value and derivative at `s`.
    fn eval_with_deriv(&self, s: C64) -> Result<(C64, C64)>;

    /// Known pole locations, used as quadrature hints.
    fn pole_hints(&self) -> Vec<C64> {
        Vec::new()
    }
}

/// H(s) = c^* (sI - A)^{-1} b with A stored sparse.
#[derive(Debug, Clone)]
pub struct StateSpaceSystem {
    a: CsrMatrix<C64>,
    b: DVector<C64>,
    c: DVector<C64>,
    plan: OnceLock<SolvePlan>,
    adjoint: OnceLock<(CsrMatrix<C64>, SolvePlan)>,
}

impl StateSpaceSystem {
    pub fn new(a: CsrMatrix<C64>, b: DVector<C64>, c: DVector<C64>) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n || b.len() != n || c.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "A is {}x{}, b has {} entries, c has {}",
                n,
                a.ncols(),
                b.len(),
                c.len()
            )));
        }
        if a.values().iter().chain(b.iter()).chain(c.iter()).any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::DimensionMismatch("non-finite entries in (A, b, c)".into()));
        }
        Ok(Self { a, b, c, plan: OnceLock::new(), adjoint: OnceLock::new() })
    }

    pub fn from_dense(a: &DMatrix<C64>, b: DVector<C64>, c: DVector<C64>) -> Result<Self> {
        Self::new(linalg::csr_from_dense(a), b, c)
    }

    /// Builds A from (row, col, value) triplets; duplicates are summed.
    pub fn from_triplets(
        n: usize,
        triplets: impl IntoIterator<Item = (usize, usize, C64)>,
        b: DVector<C64>,
        c: DVector<C64>,
    ) -> Result<Self> {
        let mut coo = CooMatrix::new(n, n);
        for (i, j, v) in triplets {
            if i >= n || j >= n {
                return Err(Error::DimensionMismatch(format!("entry ({i}, {j}) outside a {n}x{n} matrix")));
            }
            coo.push(i, j, v);
        }
        Self::new(CsrMatrix::from(&coo), b, c)
    }

    pub fn dim(&self) -> usize {
        self.b.len()
    }
    pub fn a(&self) -> &CsrMatrix<C64> {
        &self.a
    }
    pub fn b(&self) -> &DVector<C64> {
        &self.b
    }
    pub fn c(&self) -> &DVector<C64> {
        &self.c
    }
    pub fn a_dense(&self) -> DMatrix<C64> {
        linalg::csr_to_dense(&self.a)
    }

    pub fn solve_plan(&self) -> &SolvePlan {
        self.plan.get_or_init(|| SolvePlan::new(&self.a))
    }

    /// Factors sI - A.
    pub fn factor_shifted(&self, s: C64) -> Result<ShiftedSolver<'_>> {
        self.solve_plan().factor(&self.a, s)
    }

    /// Factors sI - A^*.
    pub fn factor_shifted_adjoint(&self, s: C64) -> Result<ShiftedSolver<'_>> {
        let (ah, plan) = self.adjoint.get_or_init(|| {
            let ah = linalg::csr_adjoint(&self.a);
            let plan = SolvePlan::new(&ah);
            (ah, plan)
        });
        plan.factor(ah, s)
    }

    /// (sI - A)^{-1} b
    pub fn resolvent_b(&self, s: C64) -> Result<DVector<C64>> {
        Ok(self.factor_shifted(s)?.solve(&self.b))
    }

    pub fn eval_tf(&self, s: C64) -> Result<C64> {
        let x = self.resolvent_b(s)?;
        Ok(self.c.dotc(&x))
    }

    pub fn eval_tf_deriv(&self, s: C64) -> Result<C64> {
        Ok(self.eval_tf_with_deriv(s)?.1)
    }

    /// H(s) and H'(s) = -c^*(sI - A)^{-2} b from a single factorization.
    pub fn eval_tf_with_deriv(&self, s: C64) -> Result<(C64, C64)> {
        let lu = self.factor_shifted(s)?;
        let x = lu.solve(&self.b);
        let y = lu.solve(&x);
        Ok((self.c.dotc(&x), -self.c.dotc(&y)))
    }

    /// y = A x
    pub fn apply_a(&self, x: &[C64], y: &mut [C64]) {
        linalg::csr_mul(&self.a, x, y);
    }

    pub fn poles(&self) -> Result<Vec<C64>> {
        linalg::eigenvalues(&self.a_dense())
    }

    /// Diagonalizes A. Residues use right eigenvectors V and z = V^{-1} b,
    /// which pairs every v_i with the dual left eigenvector normalized to w_i^* v_i = 1.
    pub fn to_pole_residue(&self) -> Result<PoleResidueForm> {
        let (vals, vecs) = linalg::eig(&self.a_dense())?;
        check_distinct(&vals)?;
        let lu = vecs.clone().lu();
        let z = lu.solve(&self.b).ok_or_else(|| {
            let tol = pole_sep_tol(&vals);
            Error::DefectiveSystem { gap: 0.0, tol }
        })?;
        let terms = vals
            .iter()
            .enumerate()
            .map(|(i, &lam)| (lam, self.c.dotc(&vecs.column(i)) * z[i]))
            .collect();
        PoleResidueForm::new(terms)
    }

    /// State-space realization of `self - other` (block diagonal).
    pub fn difference(&self, other: &StateSpaceSystem) -> Result<StateSpaceSystem> {
        let (n, m) = (self.dim(), other.dim());
        let trip = self
            .a
            .triplet_iter()
            .map(|(i, j, &v)| (i, j, v))
            .chain(other.a.triplet_iter().map(|(i, j, &v)| (i + n, j + n, v)));
        let b = DVector::from_iterator(n + m, self.b.iter().chain(other.b.iter()).copied());
        let c = DVector::from_iterator(n + m, self.c.iter().copied().chain(other.c.iter().map(|&v| -v)));
        StateSpaceSystem::from_triplets(n + m, trip, b, c)
    }
}

impl TransferFunction for StateSpaceSystem {
    fn eval(&self, s: C64) -> Result<C64> {
        self.eval_tf(s)
    }
    fn eval_with_deriv(&self, s: C64) -> Result<(C64, C64)> {
        self.eval_tf_with_deriv(s)
    }
}

fn check_distinct(poles: &[C64]) -> Result<()> {
    let tol = pole_sep_tol(poles);
    let mut gap = f64::INFINITY;
    for i in 0..poles.len() {
        for j in 0..i {
            gap = gap.min((poles[i] - poles[j]).norm());
        }
    }
    if gap <= tol {
        return Err(Error::DefectiveSystem { gap, tol });
    }
    Ok(())
}

/// H(s) = sum_i residue_i / (s - pole_i) with distinct poles.
#[derive(Debug, Clone, PartialEq)]
pub struct PoleResidueForm {
    poles: Vec<C64>,
    residues: Vec<C64>,
}

impl PoleResidueForm {
    pub fn new(terms: Vec<(C64, C64)>) -> Result<Self> {
        let (poles, residues): (Vec<_>, Vec<_>) = terms.into_iter().unzip();
        check_distinct(&poles)?;
        Ok(Self { poles, residues })
    }

    pub fn len(&self) -> usize {
        self.poles.len()
    }
    pub fn is_empty(&self) -> bool {
        self.poles.is_empty()
    }
    pub fn poles(&self) -> &[C64] {
        &self.poles
    }
    pub fn residues(&self) -> &[C64] {
        &self.residues
    }
    pub fn terms(&self) -> impl Iterator<Item = (C64, C64)> + '_ {
        self.poles.iter().copied().zip(self.residues.iter().copied())
    }

    fn check_pole(&self, s: C64) -> Result<()> {
        let tol = 1e-14 * (1.0 + s.norm());
        match self.poles.iter().find(|&&p| (s - p).norm() <= tol) {
            Some(_) => Err(Error::PoleHit { point: s }),
            None => Ok(()),
        }
    }

    pub fn eval(&self, s: C64) -> Result<C64> {
        self.check_pole(s)?;
        Ok(self.terms().map(|(p, r)| r / (s - p)).sum())
    }

    pub fn eval_deriv(&self, s: C64) -> Result<C64> {
        self.check_pole(s)?;
        Ok(self.terms().map(|(p, r)| -r / ((s - p) * (s - p))).sum())
    }

    /// Diagonal realization A = diag(poles), b = residues, c = 1.
    pub fn to_state_space(&self) -> Result<StateSpaceSystem> {
        let n = self.len();
        let one = C64::new(1.0, 0.0);
        StateSpaceSystem::from_triplets(
            n,
            self.poles.iter().enumerate().map(|(i, &p)| (i, i, p)),
            DVector::from_column_slice(&self.residues),
            DVector::from_element(n, one),
        )
    }
}

impl TransferFunction for PoleResidueForm {
    fn eval(&self, s: C64) -> Result<C64> {
        PoleResidueForm::eval(self, s)
    }
    fn eval_with_deriv(&self, s: C64) -> Result<(C64, C64)> {
        Ok((PoleResidueForm::eval(self, s)?, self.eval_deriv(s)?))
    }
    fn pole_hints(&self) -> Vec<C64> {
        self.poles.clone()
    }
}

/// Wraps a transfer function with extra pole hints for quadrature.
pub struct WithPoleHints<'a, F: ?Sized> {
    pub inner: &'a F,
    pub hints: Vec<C64>,
}

impl<F: TransferFunction + ?Sized> TransferFunction for WithPoleHints<'_, F> {
    fn eval(&self, s: C64) -> Result<C64> {
        self.inner.eval(s)
    }
    fn eval_with_deriv(&self, s: C64) -> Result<(C64, C64)> {
        self.inner.eval_with_deriv(s)
    }
    fn pole_hints(&self) -> Vec<C64> {
        let mut h = self.inner.pole_hints();
        h.extend_from_slice(&self.hints);
        h
    }
}
