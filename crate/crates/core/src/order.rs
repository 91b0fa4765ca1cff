//! Ordered finite-dimensional spaces.
//!
//! Elements are real vectors over a 1-D mesh, possibly carrying several
//! components stored component-major (`index = component * nodes + node`).
//! The order is induced by a sign-flipped orthant: component `k` is ordered
//! pointwise when its sign is `+1` and reversed when it is `-1`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute slack used by every order comparison.
pub const TOL_ORDER: f64 = 1e-12;

/// A real vector on the mesh, `components` blocks of equal length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridFunction {
    values: Vec<f64>,
    components: usize,
}

impl GridFunction {
    pub fn new(values: Vec<f64>, components: usize) -> Result<Self> {
        if components == 0 {
            return Err(Error::structural("component count must be positive"));
        }
        if values.is_empty() || !values.len().is_multiple_of(components) {
            return Err(Error::structural(format!(
                "length {} is not a positive multiple of {components} components",
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::validation(format!("non-finite entry at index {i}")));
        }
        Ok(Self { values, components })
    }

    /// Single-component function.
    pub fn scalar_field(values: Vec<f64>) -> Result<Self> {
        Self::new(values, 1)
    }

    pub fn constant(nodes: usize, components: usize, value: f64) -> Self {
        Self {
            values: vec![value; nodes * components],
            components,
        }
    }

    pub fn zeros(nodes: usize, components: usize) -> Self {
        Self::constant(nodes, components, 0.0)
    }

    /// Stack single-component blocks into a system state.
    pub fn stack(blocks: &[&GridFunction]) -> Result<Self> {
        let first = blocks
            .first()
            .ok_or_else(|| Error::structural("cannot stack zero blocks"))?;
        let n = first.len();
        let mut values = Vec::with_capacity(n * blocks.len());
        for b in blocks {
            if b.components != 1 || b.len() != n {
                return Err(Error::structural("stacked blocks must be scalar fields of equal length"));
            }
            values.extend_from_slice(&b.values);
        }
        Self::new(values, blocks.len())
    }

    pub(crate) fn from_raw(values: Vec<f64>, components: usize) -> Self {
        debug_assert!(components > 0 && values.len().is_multiple_of(components));
        Self { values, components }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn components(&self) -> usize {
        self.components
    }

    pub fn nodes(&self) -> usize {
        self.values.len() / self.components
    }

    /// The block of component `k`.
    pub fn component(&self, k: usize) -> &[f64] {
        let n = self.nodes();
        &self.values[k * n..(k + 1) * n]
    }

    pub fn component_field(&self, k: usize) -> GridFunction {
        GridFunction::from_raw(self.component(k).to_vec(), 1)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn scaled(&self, factor: f64) -> GridFunction {
        GridFunction::from_raw(self.values.iter().map(|v| v * factor).collect(), self.components)
    }

    pub fn axpy(&self, factor: f64, other: &GridFunction) -> Result<GridFunction> {
        self.check_same_shape(other)?;
        Ok(GridFunction::from_raw(
            self.values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a + factor * b)
                .collect(),
            self.components,
        ))
    }

    pub fn sub(&self, other: &GridFunction) -> Result<GridFunction> {
        self.axpy(-1.0, other)
    }

    pub fn add(&self, other: &GridFunction) -> Result<GridFunction> {
        self.axpy(1.0, other)
    }

    pub fn check_same_shape(&self, other: &GridFunction) -> Result<()> {
        if self.len() != other.len() || self.components != other.components {
            return Err(Error::structural(format!(
                "shape mismatch: {}x{} vs {}x{}",
                self.nodes(),
                self.components,
                other.nodes(),
                other.components
            )));
        }
        Ok(())
    }
}

/// Sign pattern of the orthant cone, one sign per component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConeSpec {
    signs: Vec<f64>,
}

impl ConeSpec {
    pub fn new(signs: Vec<f64>) -> Result<Self> {
        if signs.is_empty() {
            return Err(Error::structural("cone needs at least one component"));
        }
        if let Some(s) = signs.iter().find(|&&s| s != 1.0 && s != -1.0) {
            return Err(Error::validation(format!("cone sign {s} is not +1 or -1")));
        }
        Ok(Self { signs })
    }

    /// The pointwise cone with `components` components.
    pub fn standard(components: usize) -> Self {
        Self {
            signs: vec![1.0; components.max(1)],
        }
    }

    /// `E+ x (-E+)`, the order used for two-species competition.
    pub fn competition() -> Self {
        Self {
            signs: vec![1.0, -1.0],
        }
    }

    pub fn signs(&self) -> &[f64] {
        &self.signs
    }

    pub fn components(&self) -> usize {
        self.signs.len()
    }

    pub fn sign(&self, component: usize) -> f64 {
        self.signs[component]
    }

    fn check(&self, u: &GridFunction) -> Result<()> {
        if u.components() != self.components() {
            return Err(Error::structural(format!(
                "cone has {} components, function has {}",
                self.components(),
                u.components()
            )));
        }
        Ok(())
    }
}

/// Largest amount by which `u <= v` fails in the cone order, on raw slices
/// of `signs.len()` equal blocks. Zero or negative means the order holds.
pub(crate) fn order_gap(u: &[f64], v: &[f64], signs: &[f64]) -> f64 {
    debug_assert_eq!(u.len(), v.len());
    let n = u.len() / signs.len();
    let mut worst = f64::NEG_INFINITY;
    for (k, &s) in signs.iter().enumerate() {
        for i in k * n..(k + 1) * n {
            let gap = -s * (v[i] - u[i]);
            if gap > worst {
                worst = gap;
            }
        }
    }
    worst
}

/// Worst violation of `u <= v`; positive values mean the order fails by that much.
pub fn order_violation(u: &GridFunction, v: &GridFunction, cone: &ConeSpec) -> Result<f64> {
    u.check_same_shape(v)?;
    cone.check(u)?;
    Ok(order_gap(u.values(), v.values(), cone.signs()))
}

/// `u <= v` in the cone order, up to [`TOL_ORDER`].
pub fn leq(u: &GridFunction, v: &GridFunction, cone: &ConeSpec) -> Result<bool> {
    Ok(order_violation(u, v, cone)? <= TOL_ORDER)
}

/// Sup-norm. Monotone on every orthant cone: `0 <= a <= b` implies `|a| <= |b|`.
pub fn monotone_norm(u: &GridFunction) -> f64 {
    sup_norm(u.values())
}

pub(crate) fn sup_norm(values: &[f64]) -> f64 {
    values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
}

pub(crate) fn sup_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .fold(0.0_f64, |m, (x, y)| m.max((x - y).abs()))
}

/// An order interval `[lower, upper]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderInterval {
    lower: GridFunction,
    upper: GridFunction,
    cone: ConeSpec,
}

impl OrderInterval {
    pub fn new(lower: GridFunction, upper: GridFunction, cone: ConeSpec) -> Result<Self> {
        let gap = order_violation(&lower, &upper, &cone)?;
        if gap > TOL_ORDER {
            return Err(Error::validation(format!(
                "interval bounds are not ordered (violation {gap:.3e})"
            )));
        }
        Ok(Self { lower, upper, cone })
    }

    pub fn lower(&self) -> &GridFunction {
        &self.lower
    }

    pub fn upper(&self) -> &GridFunction {
        &self.upper
    }

    pub fn cone(&self) -> &ConeSpec {
        &self.cone
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    /// Entrywise `(min, max)` of the two bounds, independent of orientation.
    pub fn entry_range(&self, i: usize) -> (f64, f64) {
        let (a, b) = (self.lower.values()[i], self.upper.values()[i]);
        (a.min(b), a.max(b))
    }

    pub fn contains(&self, u: &GridFunction) -> Result<bool> {
        Ok(leq(&self.lower, u, &self.cone)? && leq(u, &self.upper, &self.cone)?)
    }

    /// Bounds coincide up to the order slack.
    pub fn is_degenerate(&self) -> bool {
        sup_dist(self.lower.values(), self.upper.values()) <= TOL_ORDER
    }

    /// Clamp raw values in place; returns how many entries moved by more than [`TOL_ORDER`].
    pub(crate) fn clamp_slice(&self, values: &mut [f64]) -> usize {
        let lo = self.lower.values();
        let hi = self.upper.values();
        let mut moved = 0;
        for (i, v) in values.iter_mut().enumerate() {
            let (a, b) = if lo[i] <= hi[i] { (lo[i], hi[i]) } else { (hi[i], lo[i]) };
            if *v < a {
                if a - *v > TOL_ORDER {
                    moved += 1;
                }
                *v = a;
            } else if *v > b {
                if *v - b > TOL_ORDER {
                    moved += 1;
                }
                *v = b;
            }
        }
        moved
    }
}

/// Entrywise projection onto the interval, respecting each component's orientation.
pub fn clamp_to_interval(u: &GridFunction, interval: &OrderInterval) -> Result<GridFunction> {
    u.check_same_shape(&interval.lower)?;
    let mut values = u.values().to_vec();
    interval.clamp_slice(&mut values);
    Ok(GridFunction::from_raw(values, u.components()))
}
