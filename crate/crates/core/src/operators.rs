//! Admissible discrete generators.
//!
//! A [`GeneratorSpec`] is a real matrix `A` with nonpositive off-diagonal
//! entries, so that `e^{-tA}` and `(lambda + A)^{-1}` are positive operators.
//! The 1-D Laplacians built here are not symmetric (ghost-node closures give
//! a factor two in the boundary rows) but become symmetric after multiplying
//! by the trapezoid weights `W`; the semigroup is then evaluated exactly
//! through the eigendecomposition of `W^{1/2} A W^{-1/2}`. Matrices without
//! such a symmetriser fall back to Taylor scaling-and-squaring.

use std::collections::VecDeque;
use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::order::{GridFunction, TOL_ORDER};

/// Boundary closure of the 1-D Laplacian on the unit interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum BoundaryCondition {
    Dirichlet,
    Neumann,
    Robin { beta: f64 },
}

#[derive(Debug, Clone)]
enum Spectral {
    /// `A = D^{-1} Q diag(eigs) Q^T D` with `D = W^{1/2}`.
    Symmetric {
        eigs: DVector<f64>,
        left: DMatrix<f64>,
        right: DMatrix<f64>,
    },
    General,
}

/// A discrete generator `A` (so that `-A` generates the semigroup).
#[derive(Debug, Clone)]
pub struct GeneratorSpec {
    matrix: DMatrix<f64>,
    weights: DVector<f64>,
    mesh_h: f64,
    bc: Option<BoundaryCondition>,
    coords: Vec<f64>,
    components: usize,
    potential: Option<GridFunction>,
    shift: f64,
    spectral: OnceLock<Spectral>,
}

/// Principal eigenvalue with its positive eigenvector, normalised to sup-norm one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigPair {
    pub lambda1: f64,
    pub phi0: GridFunction,
    pub residual: f64,
    pub iterations: usize,
}

/// Outcome of the two sub-markovian tests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubMarkovReport {
    pub min_row_sum: f64,
    pub max_semigroup_excess: f64,
    pub row_sum_test: bool,
    pub semigroup_test: bool,
}

impl GeneratorSpec {
    /// Wrap an arbitrary matrix. `weights` must be positive; when `diag(weights) * A`
    /// is symmetric the exact spectral route is used.
    pub fn from_matrix(
        matrix: DMatrix<f64>,
        weights: Option<DVector<f64>>,
        components: usize,
    ) -> Result<Self> {
        let n = matrix.nrows();
        if n == 0 || matrix.ncols() != n {
            return Err(Error::structural("generator must be a nonempty square matrix"));
        }
        if components == 0 || !n.is_multiple_of(components) {
            return Err(Error::structural("dimension is not a multiple of the component count"));
        }
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(Error::validation("generator has non-finite entries"));
        }
        for j in 0..n {
            for i in 0..n {
                if i != j && matrix[(i, j)] > 0.0 {
                    return Err(Error::validation(format!(
                        "off-diagonal entry ({i},{j}) = {} is positive; semigroup would not be positive",
                        matrix[(i, j)]
                    )));
                }
            }
        }
        let weights = weights.unwrap_or_else(|| DVector::from_element(n, 1.0));
        if weights.len() != n || weights.iter().any(|&w| !(w > 0.0)) {
            return Err(Error::validation("weights must be positive, one per row"));
        }
        let nodes = n / components;
        Ok(Self {
            matrix,
            weights,
            mesh_h: 1.0,
            bc: None,
            coords: (0..nodes).map(|i| i as f64).collect(),
            components,
            potential: None,
            shift: 0.0,
            spectral: OnceLock::new(),
        })
    }

    /// `A = [a]`, the generator of `u' + a u = 0`.
    pub fn scalar(a: f64) -> Result<Self> {
        let mut g = Self::from_matrix(DMatrix::from_element(1, 1, a), None, 1)?;
        g.coords = vec![0.0];
        Ok(g)
    }

    /// Block-diagonal system generator on a shared mesh.
    pub fn block_diagonal(blocks: &[GeneratorSpec]) -> Result<Self> {
        let first = blocks
            .first()
            .ok_or_else(|| Error::structural("need at least one block"))?;
        let nodes = first.nodes();
        let mut dim = 0;
        let mut components = 0;
        for b in blocks {
            if b.nodes() != nodes {
                return Err(Error::structural("blocks must share the mesh"));
            }
            dim += b.dim();
            components += b.components;
        }
        let mut matrix = DMatrix::zeros(dim, dim);
        let mut weights = DVector::zeros(dim);
        let mut off = 0;
        for b in blocks {
            let d = b.dim();
            matrix.view_mut((off, off), (d, d)).copy_from(&b.matrix);
            weights.rows_mut(off, d).copy_from(&b.weights);
            off += d;
        }
        let same_bc = blocks.iter().all(|b| b.bc == first.bc);
        Ok(Self {
            matrix,
            weights,
            mesh_h: first.mesh_h,
            bc: if same_bc { first.bc } else { None },
            coords: first.coords.clone(),
            components,
            potential: None,
            shift: 0.0,
            spectral: OnceLock::new(),
        })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn weights(&self) -> &DVector<f64> {
        &self.weights
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn components(&self) -> usize {
        self.components
    }

    pub fn nodes(&self) -> usize {
        self.dim() / self.components
    }

    pub fn mesh_h(&self) -> f64 {
        self.mesh_h
    }

    pub fn bc(&self) -> Option<BoundaryCondition> {
        self.bc
    }

    /// Mesh node coordinates in `[0, 1]`.
    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn potential(&self) -> Option<&GridFunction> {
        self.potential.as_ref()
    }

    /// Accumulated scalar shift `mu` (the generator is `A + mu I`).
    pub fn shift(&self) -> f64 {
        self.shift
    }

    /// `A + mu I`.
    pub fn shifted(&self, mu: f64) -> GeneratorSpec {
        let mut g = self.clone();
        for i in 0..g.dim() {
            g.matrix[(i, i)] += mu;
        }
        g.shift += mu;
        // eigenvectors are unchanged, eigenvalues move by mu
        g.spectral = OnceLock::new();
        if let Some(Spectral::Symmetric { eigs, left, right }) = self.spectral.get() {
            let _ = g.spectral.set(Spectral::Symmetric {
                eigs: eigs.map(|e| e + mu),
                left: left.clone(),
                right: right.clone(),
            });
        }
        g
    }

    pub fn apply(&self, v: &GridFunction) -> Result<GridFunction> {
        self.check_dim(v)?;
        let out = &self.matrix * DVector::from_column_slice(v.values());
        Ok(GridFunction::from_raw(out.as_slice().to_vec(), v.components()))
    }

    pub(crate) fn apply_slice(&self, v: &[f64]) -> Vec<f64> {
        (&self.matrix * DVector::from_column_slice(v)).as_slice().to_vec()
    }

    pub fn row_sums(&self) -> Vec<f64> {
        self.matrix.row_iter().map(|r| r.sum()).collect()
    }

    /// `max_ij |A_ij|`, the scale used for relative slacks.
    pub fn max_abs_entry(&self) -> f64 {
        self.matrix.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// Infinity norm of the matrix.
    pub fn norm_inf(&self) -> f64 {
        self.matrix
            .row_iter()
            .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Lower Gershgorin bound on the spectrum.
    pub fn gershgorin_lower(&self) -> f64 {
        (0..self.dim())
            .map(|i| {
                let off: f64 = (0..self.dim())
                    .filter(|&j| j != i)
                    .map(|j| self.matrix[(i, j)].abs())
                    .sum();
                self.matrix[(i, i)] - off
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// Strong connectivity of the off-diagonal pattern.
    pub fn is_irreducible(&self) -> bool {
        let n = self.dim();
        let reach = |transpose: bool| -> bool {
            let mut seen = vec![false; n];
            let mut queue = VecDeque::from([0usize]);
            seen[0] = true;
            while let Some(i) = queue.pop_front() {
                for j in 0..n {
                    let a = if transpose { self.matrix[(j, i)] } else { self.matrix[(i, j)] };
                    if j != i && a != 0.0 && !seen[j] {
                        seen[j] = true;
                        queue.push_back(j);
                    }
                }
            }
            seen.into_iter().all(|s| s)
        };
        reach(false) && reach(true)
    }

    pub fn is_symmetrizable(&self) -> bool {
        let n = self.dim();
        let scale = self.max_abs_entry().max(1.0);
        for i in 0..n {
            for j in (i + 1)..n {
                let a = self.weights[i] * self.matrix[(i, j)];
                let b = self.weights[j] * self.matrix[(j, i)];
                if (a - b).abs() > 1e-12 * scale {
                    return false;
                }
            }
        }
        true
    }

    /// Smallest real eigenvalue: exact for symmetrisable generators, Perron
    /// value for irreducible ones, Gershgorin bound otherwise.
    pub fn lambda_min(&self) -> f64 {
        if let Some(e) = self.eigenvalues() {
            return e[0];
        }
        if self.is_irreducible() {
            if let Ok(ep) = principal_eig(self) {
                return ep.lambda1;
            }
        }
        self.gershgorin_lower()
    }

    fn spectral(&self) -> &Spectral {
        self.spectral.get_or_init(|| {
            if !self.is_symmetrizable() {
                return Spectral::General;
            }
            let n = self.dim();
            let d: Vec<f64> = self.weights.iter().map(|w| w.sqrt()).collect();
            let mut b = DMatrix::zeros(n, n);
            for j in 0..n {
                for i in 0..n {
                    b[(i, j)] = d[i] * self.matrix[(i, j)] / d[j];
                }
            }
            let b = (&b + b.transpose()) * 0.5;
            let eig = b.symmetric_eigen();
            let q = eig.eigenvectors;
            let mut left = q.clone();
            let mut right = q.transpose();
            for i in 0..n {
                left.row_mut(i).scale_mut(1.0 / d[i]);
                right.column_mut(i).scale_mut(d[i]);
            }
            Spectral::Symmetric {
                eigs: eig.eigenvalues,
                left,
                right,
            }
        })
    }

    /// All eigenvalues in ascending order, when the exact spectral route applies.
    pub fn eigenvalues(&self) -> Option<Vec<f64>> {
        match self.spectral() {
            Spectral::Symmetric { eigs, .. } => {
                let mut v: Vec<f64> = eigs.iter().copied().collect();
                v.sort_by(|a, b| a.total_cmp(b));
                Some(v)
            }
            Spectral::General => None,
        }
    }

    fn spectral_function(&self, f: impl Fn(f64) -> f64) -> Option<DMatrix<f64>> {
        match self.spectral() {
            Spectral::Symmetric { eigs, left, right } => {
                let mut l = left.clone();
                for (k, &e) in eigs.iter().enumerate() {
                    l.column_mut(k).scale_mut(f(e));
                }
                Some(l * right)
            }
            Spectral::General => None,
        }
    }

    /// Dense `e^{-tA}`.
    pub fn semigroup_matrix(&self, t: f64) -> Result<DMatrix<f64>> {
        if !(t >= 0.0) {
            return Err(Error::validation(format!("semigroup time t = {t} must be >= 0")));
        }
        if t == 0.0 {
            return Ok(DMatrix::identity(self.dim(), self.dim()));
        }
        Ok(self
            .spectral_function(|e| (-t * e).exp())
            .unwrap_or_else(|| expm_taylor(&(-&self.matrix * t))))
    }

    /// Dense `int_0^t e^{-sA} ds` (equal to `A^{-1}(I - e^{-tA})` when `A` is invertible).
    pub fn integral_matrix(&self, t: f64) -> Result<DMatrix<f64>> {
        if !(t >= 0.0) {
            return Err(Error::validation(format!("integration time t = {t} must be >= 0")));
        }
        let n = self.dim();
        if let Some(m) = self.spectral_function(|e| phi1(e, t)) {
            return Ok(m);
        }
        let mut aug = DMatrix::zeros(2 * n, 2 * n);
        aug.view_mut((0, 0), (n, n)).copy_from(&(-&self.matrix * t));
        aug.view_mut((0, n), (n, n))
            .copy_from(&(DMatrix::<f64>::identity(n, n) * t));
        let e = expm_taylor(&aug);
        Ok(e.view((0, n), (n, n)).into_owned())
    }

    fn check_dim(&self, v: &GridFunction) -> Result<()> {
        if v.len() != self.dim() {
            return Err(Error::structural(format!(
                "vector of length {} does not match generator dimension {}",
                v.len(),
                self.dim()
            )));
        }
        Ok(())
    }
}

/// `(1 - e^{-t e}) / e`, continuous at `e = 0`.
fn phi1(e: f64, t: f64) -> f64 {
    let x = t * e;
    if x.abs() < 1e-300 {
        t
    } else {
        -(-x).exp_m1() / e
    }
}

/// Matrix exponential by scaling and squaring of a truncated Taylor series.
pub(crate) fn expm_taylor(m: &DMatrix<f64>) -> DMatrix<f64> {
    let n = m.nrows();
    let norm1 = m
        .column_iter()
        .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let s = if norm1 > 0.5 {
        (norm1 / 0.5).log2().ceil() as i32
    } else {
        0
    };
    let x = m / 2f64.powi(s);
    let mut result = DMatrix::<f64>::identity(n, n);
    let mut term = DMatrix::<f64>::identity(n, n);
    for k in 1..=30 {
        term = &term * &x / k as f64;
        result += &term;
        if term.amax() <= f64::EPSILON * result.amax() {
            break;
        }
    }
    for _ in 0..s {
        result = &result * &result;
    }
    result
}

/// Second-difference Laplacian `-d^2/dx^2` on the unit interval.
///
/// Dirichlet uses the `n` interior nodes of a mesh with `h = 1/(n+1)`;
/// Neumann and Robin use `n` vertex-centred nodes with `h = 1/(n-1)` and a
/// ghost-node closure, which keeps all off-diagonals nonpositive.
pub fn build_laplacian_1d(n: usize, bc: BoundaryCondition) -> Result<GeneratorSpec> {
    if n < 2 {
        return Err(Error::structural(format!("need at least 2 mesh points, got {n}")));
    }
    let (h, coords) = match bc {
        BoundaryCondition::Dirichlet => {
            let h = 1.0 / (n as f64 + 1.0);
            (h, (0..n).map(|i| (i + 1) as f64 * h).collect::<Vec<_>>())
        }
        BoundaryCondition::Neumann => {
            let h = 1.0 / (n as f64 - 1.0);
            (h, (0..n).map(|i| i as f64 * h).collect())
        }
        BoundaryCondition::Robin { beta } => {
            if !(beta >= 0.0) || !beta.is_finite() {
                return Err(Error::validation(format!("Robin coefficient beta = {beta} must be >= 0")));
            }
            let h = 1.0 / (n as f64 - 1.0);
            (h, (0..n).map(|i| i as f64 * h).collect())
        }
    };
    let inv_h2 = 1.0 / (h * h);
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        m[(i, i)] = 2.0 * inv_h2;
        if i > 0 {
            m[(i, i - 1)] = -inv_h2;
        }
        if i + 1 < n {
            m[(i, i + 1)] = -inv_h2;
        }
    }
    let mut weights = DVector::from_element(n, 1.0);
    match bc {
        BoundaryCondition::Dirichlet => {}
        BoundaryCondition::Neumann | BoundaryCondition::Robin { .. } => {
            m[(0, 1)] = -2.0 * inv_h2;
            m[(n - 1, n - 2)] = -2.0 * inv_h2;
            if let BoundaryCondition::Robin { beta } = bc {
                m[(0, 0)] += 2.0 * beta / h;
                m[(n - 1, n - 1)] += 2.0 * beta / h;
            }
            weights[0] = 0.5;
            weights[n - 1] = 0.5;
        }
    }
    let mut g = GeneratorSpec::from_matrix(m, Some(weights), 1)?;
    g.mesh_h = h;
    g.bc = Some(bc);
    g.coords = coords;
    Ok(g)
}

/// `e^{-tA} v`.
pub fn semigroup_apply(a: &GeneratorSpec, t: f64, v: &GridFunction) -> Result<GridFunction> {
    a.check_dim(v)?;
    let s = a.semigroup_matrix(t)?;
    let out = s * DVector::from_column_slice(v.values());
    Ok(GridFunction::from_raw(out.as_slice().to_vec(), v.components()))
}

/// Solve `(lambda I + A) x = v`.
pub fn resolvent_apply(a: &GeneratorSpec, lambda: f64, v: &GridFunction) -> Result<GridFunction> {
    a.check_dim(v)?;
    if let Some(eigs) = a.eigenvalues() {
        let closest = eigs
            .iter()
            .map(|e| (e + lambda).abs())
            .fold(f64::INFINITY, f64::min);
        if closest <= 1e-12 * (1.0 + a.norm_inf()) {
            return Err(Error::numerical(format!(
                "lambda = {lambda} is (numerically) in the spectrum of -A; resolvent undefined"
            )));
        }
    }
    let n = a.dim();
    let m = a.matrix() + DMatrix::<f64>::identity(n, n) * lambda;
    let x = m
        .lu()
        .solve(&DVector::from_column_slice(v.values()))
        .filter(|x| x.iter().all(|e| e.is_finite()))
        .ok_or_else(|| Error::numerical(format!("resolvent system singular at lambda = {lambda}")))?;
    Ok(GridFunction::from_raw(x.as_slice().to_vec(), v.components()))
}

/// Rayleigh quotient `<Wv, Av> / <Wv, v>`, assembled as a potential part plus a
/// sum of squared differences so that the Laplacian part has no cancellation.
fn rayleigh_quotient(a: &GeneratorSpec, v: &[f64]) -> f64 {
    let n = a.dim();
    if !a.is_symmetrizable() {
        let av = a.apply_slice(v);
        let num: f64 = av.iter().zip(v).map(|(x, y)| x * y).sum();
        let den: f64 = v.iter().map(|x| x * x).sum();
        return num / den;
    }
    let w = &a.weights;
    let m = &a.matrix;
    let mut num = 0.0;
    for i in 0..n {
        let row_sum: f64 = (0..n).map(|j| m[(i, j)]).sum();
        num += w[i] * row_sum * v[i] * v[i];
        for j in (i + 1)..n {
            let b = w[i] * m[(i, j)];
            if b != 0.0 {
                let d = v[i] - v[j];
                num -= b * d * d;
            }
        }
    }
    let den: f64 = (0..n).map(|i| w[i] * v[i] * v[i]).sum();
    num / den
}

/// Principal eigenpair by inverse power iteration on `sigma I + A`, with
/// `sigma` chosen from the Gershgorin bound so the shifted matrix is positive definite.
pub fn principal_eig(a: &GeneratorSpec) -> Result<EigPair> {
    principal_eig_with(a, 1e-10, 50_000)
}

pub fn principal_eig_with(a: &GeneratorSpec, tol: f64, max_iter: usize) -> Result<EigPair> {
    if !a.is_irreducible() {
        return Err(Error::validation(
            "principal eigenpair requires an irreducible generator",
        ));
    }
    let n = a.dim();
    let sigma = 1.0 - a.gershgorin_lower();
    let lu = (a.matrix() + DMatrix::<f64>::identity(n, n) * sigma).lu();
    let mut v = DVector::from_element(n, 1.0);
    let mut lambda = rayleigh_quotient(a, v.as_slice());
    let mut residual = f64::INFINITY;
    let mut stalled = 0;
    for it in 1..=max_iter {
        let mut x = lu
            .solve(&v)
            .ok_or_else(|| Error::numerical("shifted generator is singular"))?;
        let s = x.amax();
        if x.sum() < 0.0 {
            x.neg_mut();
        }
        x /= s;
        let change = (&x - &v).amax();
        v = x;
        lambda = rayleigh_quotient(a, v.as_slice());
        let av = a.matrix() * &v;
        let r = (av - &v * lambda).amax();
        if r <= tol && change <= 1e-14 {
            return finish_eig(lambda, v, r, it);
        }
        // converged to round-off: further iterations cannot lower the residual
        if change <= 1e-15 {
            stalled += 1;
            if stalled > 3 {
                residual = r;
                if r <= tol {
                    return finish_eig(lambda, v, r, it);
                }
                break;
            }
        }
        residual = r;
    }
    Err(Error::numerical(format!(
        "inverse iteration did not converge (lambda ~ {lambda}, residual {residual:.3e})"
    )))
}

fn finish_eig(lambda: f64, v: DVector<f64>, residual: f64, iterations: usize) -> Result<EigPair> {
    if v.iter().any(|&x| !(x > 0.0)) {
        return Err(Error::numerical("principal eigenvector is not strictly positive"));
    }
    Ok(EigPair {
        lambda1: lambda,
        phi0: GridFunction::from_raw(v.as_slice().to_vec(), 1),
        residual,
        iterations,
    })
}

/// `A + diag(m)`.
pub fn add_potential(a: &GeneratorSpec, m: &GridFunction) -> Result<GeneratorSpec> {
    a.check_dim(m)?;
    let mut g = a.clone();
    for (i, &mi) in m.values().iter().enumerate() {
        g.matrix[(i, i)] += mi;
    }
    g.potential = Some(match &a.potential {
        Some(p) => p.add(&GridFunction::from_raw(m.values().to_vec(), p.components()))?,
        None => GridFunction::from_raw(m.values().to_vec(), 1),
    });
    g.spectral = OnceLock::new();
    Ok(g)
}

/// Both sub-markovian tests: `A 1 >= 0` and `e^{-tA} 1 <= 1`.
pub fn submarkovian_report(a: &GeneratorSpec, t_probe: f64) -> Result<SubMarkovReport> {
    if !(t_probe > 0.0) {
        return Err(Error::validation(format!("probe time {t_probe} must be > 0")));
    }
    let sums = a.row_sums();
    let scale = a.max_abs_entry().max(1.0);
    let min_row_sum = sums.iter().copied().fold(f64::INFINITY, f64::min);
    let ones = GridFunction::constant(a.nodes(), a.components(), 1.0);
    let s1 = semigroup_apply(a, t_probe, &ones)?;
    let max_semigroup_excess = s1
        .values()
        .iter()
        .map(|v| v - 1.0)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(SubMarkovReport {
        min_row_sum,
        max_semigroup_excess,
        row_sum_test: min_row_sum >= -TOL_ORDER * scale,
        semigroup_test: max_semigroup_excess <= TOL_ORDER * scale * t_probe.max(1.0),
    })
}

/// Sub-markovian certificate; errors if the two tests disagree.
pub fn check_submarkovian(a: &GeneratorSpec, t_probe: f64) -> Result<bool> {
    let r = submarkovian_report(a, t_probe)?;
    if r.row_sum_test != r.semigroup_test {
        return Err(Error::numerical(format!(
            "sub-markovian tests disagree: min row sum {:.3e}, semigroup excess {:.3e}",
            r.min_row_sum, r.max_semigroup_excess
        )));
    }
    Ok(r.row_sum_test)
}
