//! Substitution operators `[F(u)](x) = f(x, u(x))` with interval-local
//! Lipschitz bounds and quasi-increasing shifts.
//!
//! Vectors are component-major: for `c` components on `n` nodes, entry
//! `k * n + i` is component `k` at node `i`.

use std::fmt::Debug;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::order::{GridFunction, OrderInterval};

/// Lipschitz constant on an interval; `Unbounded` for the square root at 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Lipschitz {
    Bounded(f64),
    Unbounded,
}

impl Lipschitz {
    pub fn is_bounded(&self) -> bool {
        matches!(self, Lipschitz::Bounded(_))
    }
}

pub trait Nonlinearity: Send + Sync + Debug {
    fn name(&self) -> &str;

    fn components(&self) -> usize;

    /// Node count the map is tied to, if any (the Fisher weight is).
    fn nodes(&self) -> Option<usize> {
        None
    }

    /// `out = F(u)`; both slices have length `nodes * components`.
    fn eval_into(&self, u: &[f64], out: &mut [f64]);

    /// Row-major `c x c` Jacobian of the pointwise map at `node`.
    fn node_jacobian(&self, u: &[f64], node: usize, jac: &mut [f64]);

    fn lipschitz_on(&self, interval: &OrderInterval) -> Lipschitz;

    /// Smallest `mu >= 0` such that `F + mu id` is increasing on the interval
    /// in the interval's cone order.
    fn quasi_increasing_shift(&self, interval: &OrderInterval) -> Result<f64>;

    /// Upper bound on `sup |F(v)|` over the interval.
    fn sup_bound(&self, interval: &OrderInterval) -> f64;
}

impl dyn Nonlinearity + '_ {
    pub fn eval(&self, u: &GridFunction) -> Result<GridFunction> {
        self.check(u.len(), u.components())?;
        let mut out = vec![0.0; u.len()];
        self.eval_into(u.values(), &mut out);
        GridFunction::new(out, u.components())
    }

    pub(crate) fn check(&self, len: usize, components: usize) -> Result<()> {
        if components != self.components() {
            return Err(Error::structural(format!(
                "{} expects {} components, got {components}",
                self.name(),
                self.components()
            )));
        }
        if let Some(n) = self.nodes() {
            if len != n * components {
                return Err(Error::structural(format!(
                    "{} is defined on {n} nodes, got {}",
                    self.name(),
                    len / components
                )));
            }
        }
        Ok(())
    }
}

pub fn quasi_increasing_shift(f: &dyn Nonlinearity, interval: &OrderInterval) -> Result<f64> {
    f.check(interval.dim(), interval.cone().components())?;
    f.quasi_increasing_shift(interval)
}

fn node_ranges(interval: &OrderInterval) -> impl Iterator<Item = (f64, f64)> + '_ {
    (0..interval.dim()).map(|i| interval.entry_range(i))
}

fn scalar_only(f: &dyn Nonlinearity, interval: &OrderInterval) -> Result<()> {
    if interval.cone().sign(0) < 0.0 {
        return Err(Error::validation(format!(
            "{} is certified for the standard cone only",
            f.name()
        )));
    }
    Ok(())
}

/// `f(xi) = a xi - b xi^2`.
#[derive(Debug, Clone, PartialEq)]
pub struct Logistic {
    pub a: f64,
    pub b: f64,
}

pub fn logistic(a: f64, b: f64) -> Result<Logistic> {
    if !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()) {
        return Err(Error::validation(format!("logistic needs a, b > 0 (got a = {a}, b = {b})")));
    }
    Ok(Logistic { a, b })
}

impl Nonlinearity for Logistic {
    fn name(&self) -> &str {
        "logistic"
    }

    fn components(&self) -> usize {
        1
    }

    fn eval_into(&self, u: &[f64], out: &mut [f64]) {
        for (o, &x) in out.iter_mut().zip(u) {
            *o = x * (self.a - self.b * x);
        }
    }

    fn node_jacobian(&self, u: &[f64], node: usize, jac: &mut [f64]) {
        jac[0] = self.a - 2.0 * self.b * u[node];
    }

    fn lipschitz_on(&self, interval: &OrderInterval) -> Lipschitz {
        let m = node_ranges(interval).fold(0.0_f64, |m, (lo, hi)| m.max(lo.abs()).max(hi.abs()));
        Lipschitz::Bounded(self.a + 2.0 * self.b * m)
    }

    fn quasi_increasing_shift(&self, interval: &OrderInterval) -> Result<f64> {
        scalar_only(self, interval)?;
        Ok(node_ranges(interval).fold(0.0_f64, |mu, (_, hi)| mu.max(2.0 * self.b * hi - self.a)))
    }

    fn sup_bound(&self, interval: &OrderInterval) -> f64 {
        let peak = self.a / (2.0 * self.b);
        node_ranges(interval).fold(0.0_f64, |s, (lo, hi)| {
            let f = |x: f64| (x * (self.a - self.b * x)).abs();
            let mut v = f(lo).max(f(hi));
            if lo <= peak && peak <= hi {
                v = v.max(f(peak));
            }
            s.max(v)
        })
    }
}

/// `F(u) = m h(u)` with `h(xi) = xi (1 - xi) (alpha (1 - xi) + (1 - alpha) xi)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Fisher {
    pub m: Vec<f64>,
    pub alpha: f64,
}

pub fn fisher(m: &GridFunction, alpha: f64) -> Result<Fisher> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::validation(format!("fisher alpha = {alpha} must lie in (0, 1)")));
    }
    if m.components() != 1 {
        return Err(Error::structural("fisher weight must be a scalar field"));
    }
    Ok(Fisher { m: m.values().to_vec(), alpha })
}

impl Fisher {
    pub fn h(&self, x: f64) -> f64 {
        x * (1.0 - x) * (self.alpha * (1.0 - x) + (1.0 - self.alpha) * x)
    }

    /// `h'(xi) = alpha + 2 (c - alpha) xi - 3 c xi^2` with `c = 1 - 2 alpha`.
    pub fn dh(&self, x: f64) -> f64 {
        let c = 1.0 - 2.0 * self.alpha;
        self.alpha + 2.0 * (c - self.alpha) * x - 3.0 * c * x * x
    }

    /// Range of `h'` on `[lo, hi]`.
    fn dh_range(&self, lo: f64, hi: f64) -> (f64, f64) {
        let c = 1.0 - 2.0 * self.alpha;
        let mut vals = vec![self.dh(lo), self.dh(hi)];
        if c != 0.0 {
            let crit = (c - self.alpha) / (3.0 * c);
            if lo < crit && crit < hi {
                vals.push(self.dh(crit));
            }
        }
        let min = vals.iter().copied().fold(f64::INFINITY, f64::min);
        let max = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (min, max)
    }

    fn h_abs_max(&self, lo: f64, hi: f64) -> f64 {
        // critical points of h are the roots of the quadratic h'
        let c = 1.0 - 2.0 * self.alpha;
        let (qa, qb, qc) = (-3.0 * c, 2.0 * (c - self.alpha), self.alpha);
        let mut pts = vec![lo, hi];
        if qa == 0.0 {
            if qb != 0.0 {
                pts.push(-qc / qb);
            }
        } else {
            let disc = qb * qb - 4.0 * qa * qc;
            if disc >= 0.0 {
                pts.push((-qb + disc.sqrt()) / (2.0 * qa));
                pts.push((-qb - disc.sqrt()) / (2.0 * qa));
            }
        }
        pts.into_iter()
            .filter(|p| *p >= lo && *p <= hi)
            .map(|p| self.h(p).abs())
            .fold(0.0, f64::max)
    }
}

impl Nonlinearity for Fisher {
    fn name(&self) -> &str {
        "fisher"
    }

    fn components(&self) -> usize {
        1
    }

    fn nodes(&self) -> Option<usize> {
        Some(self.m.len())
    }

    fn eval_into(&self, u: &[f64], out: &mut [f64]) {
        for ((o, &x), &m) in out.iter_mut().zip(u).zip(&self.m) {
            *o = m * self.h(x);
        }
    }

    fn node_jacobian(&self, u: &[f64], node: usize, jac: &mut [f64]) {
        jac[0] = self.m[node] * self.dh(u[node]);
    }

    fn lipschitz_on(&self, interval: &OrderInterval) -> Lipschitz {
        let l = node_ranges(interval)
            .zip(&self.m)
            .fold(0.0_f64, |l, ((lo, hi), &m)| {
                let (dmin, dmax) = self.dh_range(lo, hi);
                l.max(m.abs() * dmin.abs().max(dmax.abs()))
            });
        Lipschitz::Bounded(l)
    }

    fn quasi_increasing_shift(&self, interval: &OrderInterval) -> Result<f64> {
        scalar_only(self, interval)?;
        Ok(node_ranges(interval)
            .zip(&self.m)
            .fold(0.0_f64, |mu, ((lo, hi), &m)| {
                let (dmin, dmax) = self.dh_range(lo, hi);
                let fmin = if m >= 0.0 { m * dmin } else { m * dmax };
                mu.max(-fmin)
            }))
    }

    fn sup_bound(&self, interval: &OrderInterval) -> f64 {
        node_ranges(interval)
            .zip(&self.m)
            .fold(0.0, |s, ((lo, hi), &m)| s.max(m.abs() * self.h_abs_max(lo, hi)))
    }
}

/// Lotka-Volterra competition `F = (u1 (a1 - b11 u1 - b12 u2), u2 (a2 - b21 u1 - b22 u2))`,
/// quasi-increasing in the cone with the second component flipped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Competition {
    pub a1: f64,
    pub a2: f64,
    pub b11: f64,
    pub b12: f64,
    pub b21: f64,
    pub b22: f64,
}

pub fn competition(a1: f64, a2: f64, b11: f64, b12: f64, b21: f64, b22: f64) -> Result<Competition> {
    let c = Competition { a1, a2, b11, b12, b21, b22 };
    c.validate()?;
    Ok(c)
}

impl Competition {
    pub fn validate(&self) -> Result<()> {
        let all = [self.a1, self.a2, self.b11, self.b12, self.b21, self.b22];
        if all.iter().any(|p| !(*p >= 0.0 && p.is_finite())) || self.a1 == 0.0 || self.a2 == 0.0 || self.b11 == 0.0 || self.b22 == 0.0 {
            return Err(Error::validation(
                "competition needs a1, a2, b11, b22 > 0 and b12, b21 >= 0",
            ));
        }
        Ok(())
    }

    /// Per-node boxes `[lo1, hi1] x [lo2, hi2]`, which must be nonnegative.
    fn boxes(&self, interval: &OrderInterval) -> Result<Vec<[f64; 4]>> {
        if interval.cone().components() != 2 {
            return Err(Error::structural("competition needs a two-component interval"));
        }
        let n = interval.dim() / 2;
        (0..n)
            .map(|i| {
                let (lo1, hi1) = interval.entry_range(i);
                let (lo2, hi2) = interval.entry_range(n + i);
                if lo1 < 0.0 || lo2 < 0.0 {
                    return Err(Error::validation(
                        "competition shift is certified on nonnegative boxes only",
                    ));
                }
                Ok([lo1, hi1, lo2, hi2])
            })
            .collect()
    }
}

impl Nonlinearity for Competition {
    fn name(&self) -> &str {
        "competition"
    }

    fn components(&self) -> usize {
        2
    }

    fn eval_into(&self, u: &[f64], out: &mut [f64]) {
        let n = u.len() / 2;
        let (u1, u2) = u.split_at(n);
        let (o1, o2) = out.split_at_mut(n);
        for i in 0..n {
            o1[i] = u1[i] * (self.a1 - self.b11 * u1[i] - self.b12 * u2[i]);
            o2[i] = u2[i] * (self.a2 - self.b21 * u1[i] - self.b22 * u2[i]);
        }
    }

    fn node_jacobian(&self, u: &[f64], node: usize, jac: &mut [f64]) {
        let n = u.len() / 2;
        let (x, y) = (u[node], u[n + node]);
        jac[0] = self.a1 - 2.0 * self.b11 * x - self.b12 * y;
        jac[1] = -self.b12 * x;
        jac[2] = -self.b21 * y;
        jac[3] = self.a2 - self.b21 * x - 2.0 * self.b22 * y;
    }

    fn lipschitz_on(&self, interval: &OrderInterval) -> Lipschitz {
        let Ok(boxes) = self.boxes(interval) else {
            return Lipschitz::Unbounded;
        };
        let l = boxes.iter().fold(0.0_f64, |l, &[lo1, hi1, lo2, hi2]| {
            // diagonal Jacobian entries are affine and decreasing in both variables
            let d1 = (self.a1 - 2.0 * self.b11 * lo1 - self.b12 * lo2)
                .abs()
                .max((self.a1 - 2.0 * self.b11 * hi1 - self.b12 * hi2).abs());
            let d2 = (self.a2 - self.b21 * lo1 - 2.0 * self.b22 * lo2)
                .abs()
                .max((self.a2 - self.b21 * hi1 - 2.0 * self.b22 * hi2).abs());
            l.max(d1 + self.b12 * hi1).max(d2 + self.b21 * hi2)
        });
        Lipschitz::Bounded(l)
    }

    fn quasi_increasing_shift(&self, interval: &OrderInterval) -> Result<f64> {
        if interval.cone().sign(0) < 0.0 || interval.cone().sign(1) > 0.0 {
            return Err(Error::validation(
                "competition is quasi-increasing only in the (+1, -1) cone",
            ));
        }
        let boxes = self.boxes(interval)?;
        Ok(boxes.iter().fold(0.0_f64, |mu, &[_, hi1, _, hi2]| {
            mu.max(2.0 * self.b11 * hi1 + self.b12 * hi2 - self.a1)
                .max(self.b21 * hi1 + 2.0 * self.b22 * hi2 - self.a2)
        }))
    }

    fn sup_bound(&self, interval: &OrderInterval) -> f64 {
        let n = interval.dim() / 2;
        (0..n).fold(0.0, |s, i| {
            let (lo1, hi1) = interval.entry_range(i);
            let (lo2, hi2) = interval.entry_range(n + i);
            let x = lo1.abs().max(hi1.abs());
            let y = lo2.abs().max(hi2.abs());
            s.max(x * (self.a1 + self.b11 * x + self.b12 * y))
                .max(y * (self.a2 + self.b21 * x + self.b22 * y))
        })
    }
}

/// `F(xi) = sign(xi) sqrt(|xi|)`: increasing, not Lipschitz at 0.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SignedSqrt;

pub fn signed_sqrt() -> SignedSqrt {
    SignedSqrt
}

impl Nonlinearity for SignedSqrt {
    fn name(&self) -> &str {
        "signed_sqrt"
    }

    fn components(&self) -> usize {
        1
    }

    fn eval_into(&self, u: &[f64], out: &mut [f64]) {
        for (o, &x) in out.iter_mut().zip(u) {
            *o = x.signum() * x.abs().sqrt();
            if x == 0.0 {
                *o = 0.0;
            }
        }
    }

    fn node_jacobian(&self, u: &[f64], node: usize, jac: &mut [f64]) {
        jac[0] = 0.5 / u[node].abs().max(1e-300).sqrt();
    }

    fn lipschitz_on(&self, interval: &OrderInterval) -> Lipschitz {
        let mut min_abs = f64::INFINITY;
        for (lo, hi) in node_ranges(interval) {
            if lo <= 0.0 && hi >= 0.0 {
                return Lipschitz::Unbounded;
            }
            min_abs = min_abs.min(lo.abs().min(hi.abs()));
        }
        Lipschitz::Bounded(0.5 / min_abs.sqrt())
    }

    fn quasi_increasing_shift(&self, interval: &OrderInterval) -> Result<f64> {
        scalar_only(self, interval)?;
        Ok(0.0)
    }

    fn sup_bound(&self, interval: &OrderInterval) -> f64 {
        node_ranges(interval).fold(0.0, |s, (lo, hi)| s.max(lo.abs().max(hi.abs()).sqrt()))
    }
}

/// `F(u) = c u`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Linear {
    pub c: f64,
    pub components: usize,
}

pub fn linear(c: f64) -> Linear {
    Linear { c, components: 1 }
}

impl Nonlinearity for Linear {
    fn name(&self) -> &str {
        "linear"
    }

    fn components(&self) -> usize {
        self.components
    }

    fn eval_into(&self, u: &[f64], out: &mut [f64]) {
        for (o, &x) in out.iter_mut().zip(u) {
            *o = self.c * x;
        }
    }

    fn node_jacobian(&self, _u: &[f64], _node: usize, jac: &mut [f64]) {
        let c = self.components;
        for k in 0..c {
            for l in 0..c {
                jac[k * c + l] = if k == l { self.c } else { 0.0 };
            }
        }
    }

    fn lipschitz_on(&self, _interval: &OrderInterval) -> Lipschitz {
        Lipschitz::Bounded(self.c.abs())
    }

    fn quasi_increasing_shift(&self, _interval: &OrderInterval) -> Result<f64> {
        // diagonal, so the shift works in every orthant cone
        Ok((-self.c).max(0.0))
    }

    fn sup_bound(&self, interval: &OrderInterval) -> f64 {
        node_ranges(interval).fold(0.0, |s, (lo, hi)| s.max(self.c.abs() * lo.abs().max(hi.abs())))
    }
}

/// `F + mu id`, the nonlinearity of the scaled problem.
#[derive(Debug, Clone)]
pub struct Shifted {
    pub inner: Arc<dyn Nonlinearity>,
    pub mu: f64,
    name: String,
}

pub fn shifted(inner: Arc<dyn Nonlinearity>, mu: f64) -> Shifted {
    let name = format!("{}+{mu}id", inner.name());
    Shifted { inner, mu, name }
}

impl Nonlinearity for Shifted {
    fn name(&self) -> &str {
        &self.name
    }

    fn components(&self) -> usize {
        self.inner.components()
    }

    fn nodes(&self) -> Option<usize> {
        self.inner.nodes()
    }

    fn eval_into(&self, u: &[f64], out: &mut [f64]) {
        self.inner.eval_into(u, out);
        for (o, &x) in out.iter_mut().zip(u) {
            *o += self.mu * x;
        }
    }

    fn node_jacobian(&self, u: &[f64], node: usize, jac: &mut [f64]) {
        self.inner.node_jacobian(u, node, jac);
        let c = self.components();
        for k in 0..c {
            jac[k * c + k] += self.mu;
        }
    }

    fn lipschitz_on(&self, interval: &OrderInterval) -> Lipschitz {
        match self.inner.lipschitz_on(interval) {
            Lipschitz::Bounded(l) => Lipschitz::Bounded(l + self.mu.abs()),
            Lipschitz::Unbounded => Lipschitz::Unbounded,
        }
    }

    fn quasi_increasing_shift(&self, interval: &OrderInterval) -> Result<f64> {
        Ok((self.inner.quasi_increasing_shift(interval)? - self.mu).max(0.0))
    }

    fn sup_bound(&self, interval: &OrderInterval) -> f64 {
        let m = (0..interval.dim())
            .map(|i| {
                let (lo, hi) = interval.entry_range(i);
                lo.abs().max(hi.abs())
            })
            .fold(0.0, f64::max);
        self.inner.sup_bound(interval) + self.mu.abs() * m
    }
}

/// Spatial weight profile for the Fisher preset, sampled at mesh coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "profile", rename_all = "snake_case")]
pub enum WeightProfile {
    /// `offset + amplitude * sin(2 pi freq x)`
    Sin { amplitude: f64, freq: f64, #[serde(default)] offset: f64 },
    /// `offset + amplitude * cos(pi freq x)`
    Cos { amplitude: f64, freq: f64, #[serde(default)] offset: f64 },
    Constant { value: f64 },
    Values { values: Vec<f64> },
}

impl WeightProfile {
    pub fn sample(&self, coords: &[f64]) -> Result<GridFunction> {
        use std::f64::consts::PI;
        let v = match self {
            WeightProfile::Sin { amplitude, freq, offset } => coords
                .iter()
                .map(|x| offset + amplitude * (2.0 * PI * freq * x).sin())
                .collect(),
            WeightProfile::Cos { amplitude, freq, offset } => coords
                .iter()
                .map(|x| offset + amplitude * (PI * freq * x).cos())
                .collect(),
            WeightProfile::Constant { value } => vec![*value; coords.len()],
            WeightProfile::Values { values } => {
                if values.len() != coords.len() {
                    return Err(Error::structural(format!(
                        "weight has {} values for {} nodes",
                        values.len(),
                        coords.len()
                    )));
                }
                values.clone()
            }
        };
        GridFunction::scalar_field(v)
    }
}

/// Named presets with their parameters, as they appear in run configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum NonlinearityConfig {
    Logistic { a: f64, b: f64 },
    Fisher { alpha: f64, m: WeightProfile },
    Competition { a1: f64, a2: f64, b11: f64, b12: f64, b21: f64, b22: f64 },
    SignedSqrt,
    Linear { c: f64 },
}

impl NonlinearityConfig {
    /// Instantiate on a mesh with the given node coordinates.
    pub fn build(&self, coords: &[f64]) -> Result<Arc<dyn Nonlinearity>> {
        Ok(match self {
            NonlinearityConfig::Logistic { a, b } => Arc::new(logistic(*a, *b)?),
            NonlinearityConfig::Fisher { alpha, m } => Arc::new(fisher(&m.sample(coords)?, *alpha)?),
            NonlinearityConfig::Competition { a1, a2, b11, b12, b21, b22 } => {
                Arc::new(competition(*a1, *a2, *b11, *b12, *b21, *b22)?)
            }
            NonlinearityConfig::SignedSqrt => Arc::new(signed_sqrt()),
            NonlinearityConfig::Linear { c } => Arc::new(linear(*c)),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::order::{leq, ConeSpec};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn scalar_interval(lo: f64, hi: f64, n: usize) -> OrderInterval {
        OrderInterval::new(
            GridFunction::constant(n, 1, lo),
            GridFunction::constant(n, 1, hi),
            ConeSpec::standard(1),
        )
        .unwrap()
    }

    fn eval(f: &dyn Nonlinearity, u: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; u.len()];
        f.eval_into(u, &mut out);
        out
    }

    #[test]
    fn logistic_values_and_shift() {
        let f = logistic(1.0, 1.0).unwrap();
        assert_eq!(eval(&f, &[0.0, 1.0, 3.0]), vec![0.0, 0.0, -6.0]);
        let g = logistic(2.0, 0.5).unwrap();
        assert_eq!(eval(&g, &[4.0]), vec![0.0]);
        assert_eq!(eval(&g, &[1.0]), vec![1.5]);
        let i = scalar_interval(0.0, 2.0, 3);
        assert_eq!(f.quasi_increasing_shift(&i).unwrap(), 3.0);
        assert_eq!(f.lipschitz_on(&i), Lipschitz::Bounded(5.0));
        assert!(logistic(-1.0, 1.0).is_err());
    }

    #[test]
    fn fisher_endpoints() {
        for alpha in [0.1, 0.5, 0.8] {
            let f = fisher(&GridFunction::constant(1, 1, 1.0), alpha).unwrap();
            assert_eq!(f.h(0.0), 0.0);
            assert_eq!(f.h(1.0), 0.0);
            assert!((f.h(0.5) - 0.125).abs() < 1e-15);
            let eps = 1e-7;
            let d0 = (f.h(eps) - f.h(-eps)) / (2.0 * eps);
            let d1 = (f.h(1.0 + eps) - f.h(1.0 - eps)) / (2.0 * eps);
            assert!((d0 - alpha).abs() < 1e-6);
            assert!((d1 - (alpha - 1.0)).abs() < 1e-6);
            assert!((f.dh(0.0) - alpha).abs() < 1e-15);
            assert!((f.dh(1.0) - (alpha - 1.0)).abs() < 1e-15);
        }
        assert!(fisher(&GridFunction::constant(1, 1, 1.0), 1.0).is_err());
        assert!(fisher(&GridFunction::constant(1, 1, 1.0), 0.0).is_err());
    }

    #[test]
    fn competition_values() {
        let f = competition(1.0, 2.0, 0.5, 0.25, 0.125, 1.0).unwrap();
        assert_eq!(eval(&f, &[0.0, 0.0]), vec![0.0, 0.0]);
        assert_eq!(eval(&f, &[2.0, 0.0])[0], 0.0);
        assert_eq!(eval(&f, &[1.0, 1.0]), vec![1.0 - 0.5 - 0.25, 2.0 - 0.125 - 1.0]);
    }

    #[test]
    fn signed_sqrt_values() {
        let f = signed_sqrt();
        assert_eq!(eval(&f, &[0.0, 1.0, -4.0]), vec![0.0, 1.0, -2.0]);
        assert_eq!(f.lipschitz_on(&scalar_interval(-2.0, 2.0, 1)), Lipschitz::Unbounded);
        assert!(f.lipschitz_on(&scalar_interval(1.0, 4.0, 1)).is_bounded());
        assert_eq!(f.quasi_increasing_shift(&scalar_interval(-2.0, 2.0, 1)).unwrap(), 0.0);
    }

    #[test]
    fn competition_needs_flipped_nonnegative_box() {
        let f = competition(1.0, 1.0, 1.0, 0.1, 0.1, 1.0).unwrap();
        let std = OrderInterval::new(
            GridFunction::constant(2, 2, 0.0),
            GridFunction::constant(2, 2, 1.0),
            ConeSpec::standard(2),
        )
        .unwrap();
        assert!(f.quasi_increasing_shift(&std).is_err());
        let neg = OrderInterval::new(
            GridFunction::stack(&[&GridFunction::constant(2, 1, -1.0), &GridFunction::constant(2, 1, 1.0)]).unwrap(),
            GridFunction::stack(&[&GridFunction::constant(2, 1, 1.0), &GridFunction::constant(2, 1, 0.0)]).unwrap(),
            ConeSpec::competition(),
        )
        .unwrap();
        assert!(f.quasi_increasing_shift(&neg).is_err());
    }

    fn competition_box(m: f64, n: usize) -> OrderInterval {
        OrderInterval::new(
            GridFunction::stack(&[&GridFunction::constant(n, 1, 0.0), &GridFunction::constant(n, 1, m)]).unwrap(),
            GridFunction::stack(&[&GridFunction::constant(n, 1, m), &GridFunction::constant(n, 1, 0.0)]).unwrap(),
            ConeSpec::competition(),
        )
        .unwrap()
    }

    /// Random ordered pair inside the interval, in the interval's cone order.
    fn ordered_pair(i: &OrderInterval, rng: &mut ChaCha8Rng) -> (GridFunction, GridFunction) {
        let c = i.cone().components();
        let n = i.dim() / c;
        let mut u = vec![0.0; i.dim()];
        let mut v = vec![0.0; i.dim()];
        for k in 0..c {
            for j in 0..n {
                let idx = k * n + j;
                let (lo, hi) = i.entry_range(idx);
                let a = rng.random_range(lo..=hi);
                let b = rng.random_range(lo..=hi);
                let (small, big) = if a <= b { (a, b) } else { (b, a) };
                if i.cone().sign(k) > 0.0 {
                    u[idx] = small;
                    v[idx] = big;
                } else {
                    u[idx] = big;
                    v[idx] = small;
                }
            }
        }
        (GridFunction::new(u, c).unwrap(), GridFunction::new(v, c).unwrap())
    }

    fn check_shift_makes_increasing(f: Arc<dyn Nonlinearity>, i: &OrderInterval, samples: usize) {
        let mu = quasi_increasing_shift(f.as_ref(), i).unwrap();
        let fm: Arc<dyn Nonlinearity> = Arc::new(shifted(f, mu));
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..samples {
            let (u, v) = ordered_pair(i, &mut rng);
            assert!(leq(&u, &v, i.cone()).unwrap());
            let fu = fm.eval(&u).unwrap();
            let fv = fm.eval(&v).unwrap();
            assert!(leq(&fu, &fv, i.cone()).unwrap(), "{}: shift {mu} not enough", fm.name());
        }
    }

    #[test]
    fn shifted_maps_are_increasing() {
        check_shift_makes_increasing(Arc::new(logistic(1.0, 1.0).unwrap()), &scalar_interval(0.0, 2.0, 1), 10_000);
        check_shift_makes_increasing(Arc::new(logistic(3.0, 0.5).unwrap()), &scalar_interval(0.0, 8.0, 4), 2_500);
        let m = WeightProfile::Sin { amplitude: 3.0, freq: 1.0, offset: 0.0 }
            .sample(&[0.0, 0.2, 0.45, 0.7, 0.9])
            .unwrap();
        check_shift_makes_increasing(Arc::new(fisher(&m, 0.3).unwrap()), &scalar_interval(0.0, 1.0, 5), 2_000);
        check_shift_makes_increasing(Arc::new(fisher(&m, 0.5).unwrap()), &scalar_interval(0.0, 1.0, 5), 2_000);
        check_shift_makes_increasing(Arc::new(competition(1.0, 1.5, 1.0, 0.4, 0.7, 2.0).unwrap()), &competition_box(2.0, 1), 10_000);
        check_shift_makes_increasing(Arc::new(signed_sqrt()), &scalar_interval(-2.0, 2.0, 1), 10_000);
    }

    #[test]
    fn competition_shift_formula() {
        let f = competition(1.0, 1.5, 1.0, 0.4, 0.7, 2.0).unwrap();
        let mu = f.quasi_increasing_shift(&competition_box(2.0, 3)).unwrap();
        assert!((mu - (2.0f64 * 1.0 * 2.0 + 0.4 * 2.0 - 1.0).max(0.7 * 2.0 + 2.0 * 2.0 * 2.0 - 1.5)).abs() < 1e-14);
    }

    #[test]
    fn sup_bounds_dominate_samples() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let m = WeightProfile::Cos { amplitude: 2.0, freq: 1.0, offset: 0.5 }
            .sample(&[0.0, 0.3, 0.6, 1.0])
            .unwrap();
        let cases: Vec<(Arc<dyn Nonlinearity>, OrderInterval)> = vec![
            (Arc::new(logistic(2.0, 1.0).unwrap()), scalar_interval(-1.0, 3.0, 4)),
            (Arc::new(fisher(&m, 0.2).unwrap()), scalar_interval(0.0, 1.0, 4)),
            (Arc::new(competition(1.0, 1.0, 1.0, 0.3, 0.2, 1.0).unwrap()), competition_box(1.5, 2)),
            (Arc::new(signed_sqrt()), scalar_interval(-3.0, 5.0, 2)),
        ];
        for (f, i) in cases {
            let bound = f.sup_bound(&i);
            let mut corners = vec![i.lower().clone(), i.upper().clone()];
            for _ in 0..500 {
                let (u, v) = ordered_pair(&i, &mut rng);
                corners.push(u);
                corners.push(v);
            }
            for u in corners {
                let fu = f.eval(&u).unwrap();
                assert!(fu.values().iter().all(|x| x.abs() <= bound + 1e-12), "{}", f.name());
            }
        }
    }

    #[test]
    fn lipschitz_bounds_hold_on_samples() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let m = GridFunction::scalar_field(vec![1.0, -2.0, 0.5]).unwrap();
        let cases: Vec<(Arc<dyn Nonlinearity>, OrderInterval)> = vec![
            (Arc::new(logistic(2.0, 1.0).unwrap()), scalar_interval(0.0, 3.0, 3)),
            (Arc::new(fisher(&m, 0.7).unwrap()), scalar_interval(0.0, 1.0, 3)),
            (Arc::new(competition(1.0, 1.0, 1.0, 0.3, 0.2, 1.0).unwrap()), competition_box(1.5, 3)),
        ];
        for (f, i) in cases {
            let Lipschitz::Bounded(l) = f.lipschitz_on(&i) else { panic!() };
            for _ in 0..2000 {
                let (u, v) = ordered_pair(&i, &mut rng);
                let fu = f.eval(&u).unwrap();
                let fv = f.eval(&v).unwrap();
                let d = fu.sub(&fv).unwrap();
                let x = u.sub(&v).unwrap();
                // pointwise maps: compare node by node
                let n = u.len() / u.components();
                for node in 0..n {
                    let dn = (0..u.components()).map(|k| d.values()[k * n + node].abs()).fold(0.0, f64::max);
                    let xn = (0..u.components()).map(|k| x.values()[k * n + node].abs()).fold(0.0, f64::max);
                    assert!(dn <= l * xn + 1e-12, "{}", f.name());
                }
            }
        }
    }

    #[test]
    fn jacobians_match_finite_differences() {
        let m = GridFunction::scalar_field(vec![1.5, -0.5]).unwrap();
        let cases: Vec<(Arc<dyn Nonlinearity>, Vec<f64>)> = vec![
            (Arc::new(logistic(2.0, 1.0).unwrap()), vec![0.3, 1.7]),
            (Arc::new(fisher(&m, 0.3).unwrap()), vec![0.2, 0.9]),
            (Arc::new(competition(1.0, 1.3, 1.0, 0.3, 0.2, 0.8).unwrap()), vec![0.4, 0.9, 1.1, 0.2]),
            (Arc::new(shifted(Arc::new(signed_sqrt()), 2.0)), vec![0.5, -2.0]),
        ];
        for (f, u) in cases {
            let c = f.components();
            let n = u.len() / c;
            let mut jac = vec![0.0; c * c];
            for node in 0..n {
                f.node_jacobian(&u, node, &mut jac);
                for l in 0..c {
                    let h = 1e-6;
                    let mut up = u.clone();
                    let mut dn = u.clone();
                    up[l * n + node] += h;
                    dn[l * n + node] -= h;
                    let fp = eval(f.as_ref(), &up);
                    let fd = eval(f.as_ref(), &dn);
                    for k in 0..c {
                        let fdk = (fp[k * n + node] - fd[k * n + node]) / (2.0 * h);
                        assert!((fdk - jac[k * c + l]).abs() < 1e-6, "{} d{k}/d{l}", f.name());
                    }
                }
            }
        }
    }

    #[test]
    fn preset_registry_round_trip() {
        let cfg: NonlinearityConfig = serde_json::from_str(
            r#"{"name":"fisher","alpha":0.5,"m":{"profile":"sin","amplitude":4.0,"freq":1.0}}"#,
        )
        .unwrap();
        let f = cfg.build(&[0.0, 0.25, 0.5]).unwrap();
        assert_eq!(f.name(), "fisher");
        assert_eq!(f.nodes(), Some(3));
        let cfg: NonlinearityConfig = serde_json::from_str(r#"{"name":"signed_sqrt"}"#).unwrap();
        assert_eq!(cfg.build(&[0.0]).unwrap().name(), "signed_sqrt");
        assert!(serde_json::from_str::<NonlinearityConfig>(r#"{"name":"logistic","a":1}"#).is_err());
    }

    proptest! {
        #[test]
        fn logistic_shift_is_tight(a in 0.1f64..5.0, b in 0.1f64..5.0, m in 0.1f64..5.0) {
            let f = logistic(a, b).unwrap();
            let mu = f.quasi_increasing_shift(&scalar_interval(0.0, m, 1)).unwrap();
            prop_assert!((mu - (2.0 * b * m - a).max(0.0)).abs() < 1e-12);
            // derivative of F + mu id at the top end is >= 0
            prop_assert!(a - 2.0 * b * m + mu >= -1e-12);
        }

        #[test]
        fn fisher_shift_covers_derivative(alpha in 0.01f64..0.99, m in -5.0f64..5.0, x in 0.0f64..1.0) {
            let f = fisher(&GridFunction::constant(1, 1, m), alpha).unwrap();
            let mu = f.quasi_increasing_shift(&scalar_interval(0.0, 1.0, 1)).unwrap();
            prop_assert!(m * f.dh(x) + mu >= -1e-12);
        }
    }
}
