//! Point-symmetric tensor-product velocity grids.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{composite_legendre, graded_edges};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Mapping {
    /// Composite Gauss–Legendre on [-R, R], panels graded toward the origin.
    Truncated { radius: f64 },
    /// Midpoint rule in u with v = L·u/(1−u²).
    AlgebraicMap { scale: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub n_per_axis: usize,
    pub mapping: Mapping,
}

impl GridSpec {
    pub fn refined(&self) -> GridSpec {
        GridSpec { n_per_axis: 2 * self.n_per_axis, ..*self }
    }
}

/// Real or complex nodal values.
pub trait Scalar:
    Copy
    + std::ops::Add<Output = Self>
    + std::ops::Sub<Output = Self>
    + std::ops::Mul<f64, Output = Self>
    + std::ops::AddAssign
    + Send
    + Sync
{
    fn zero() -> Self;
    fn finite(self) -> bool;
    fn norm_sqr(self) -> f64;
}

impl Scalar for f64 {
    fn zero() -> Self {
        0.0
    }
    fn finite(self) -> bool {
        self.is_finite()
    }
    fn norm_sqr(self) -> f64 {
        self * self
    }
}

impl Scalar for num_complex::Complex64 {
    fn zero() -> Self {
        num_complex::Complex64::new(0.0, 0.0)
    }
    fn finite(self) -> bool {
        self.re.is_finite() && self.im.is_finite()
    }
    fn norm_sqr(self) -> f64 {
        num_complex::Complex64::norm_sqr(&self)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VelocityGrid {
    pub d: usize,
    pub spec: GridSpec,
    axis: Vec<f64>,
    axis_weights: Vec<f64>,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    speed2: Vec<f64>,
    /// Reflection orbits {(±v₁, ±v₂)}; summing within an orbit first makes
    /// integrals of coordinate-odd integrands exactly zero.
    groups: Vec<[usize; 4]>,
}

/// Largest divisor of `n` not exceeding 8.
fn panel_order(n: usize) -> usize {
    (1..=8).rev().find(|m| n % m == 0).unwrap_or(1)
}

/// Panel edges on [0, R]: half the panels geometrically graded on [0, 1]
/// (first edge shrinking like 1/npan²), the rest uniform on [1, R].
fn origin_graded_edges(radius: f64, npan: usize) -> Vec<f64> {
    if radius <= 1.0 || npan == 1 {
        return graded_edges(radius, npan, (2.56 / (npan * npan) as f64).min(0.1));
    }
    let n_geo = (npan / 2).max(1);
    let n_uni = npan - n_geo;
    let mut edges = graded_edges(1.0, n_geo, (2.56 / (npan * npan) as f64).min(0.1));
    for j in 1..=n_uni {
        edges.push(1.0 + (radius - 1.0) * j as f64 / n_uni as f64);
    }
    edges
}

/// One-dimensional rule for a mapping, sorted ascending and exactly symmetric.
pub fn axis_rule(n: usize, mapping: Mapping) -> Result<(Vec<f64>, Vec<f64>)> {
    if n < 8 || n % 2 == 1 {
        return Err(Error::InvalidSpec(format!("n_per_axis = {n} must be even and at least 8")));
    }
    let half = n / 2;
    let (pos, wpos) = match mapping {
        Mapping::Truncated { radius } => {
            if !(radius > 0.0 && radius.is_finite()) {
                return Err(Error::InvalidSpec(format!("truncation radius {radius} must be positive")));
            }
            let m = panel_order(half);
            composite_legendre(&origin_graded_edges(radius, half / m), m)
        }
        Mapping::AlgebraicMap { scale } => {
            if !(scale > 0.0 && scale.is_finite()) {
                return Err(Error::InvalidSpec(format!("map scale {scale} must be positive")));
            }
            let h = 2.0 / n as f64;
            (0..half)
                .map(|j| {
                    let u = h * (j as f64 + 0.5);
                    let s = 1.0 - u * u;
                    (scale * u / s, h * scale * (1.0 + u * u) / (s * s))
                })
                .unzip()
        }
    };
    let mut x = Vec::with_capacity(n);
    let mut w = Vec::with_capacity(n);
    for j in (0..half).rev() {
        x.push(-pos[j]);
        w.push(wpos[j]);
    }
    x.extend_from_slice(&pos);
    w.extend_from_slice(&wpos);
    Ok((x, w))
}

pub fn build_grid(d: usize, spec: GridSpec) -> Result<VelocityGrid> {
    if !(d == 1 || d == 2) {
        return Err(Error::InvalidSpec(format!("dimension {d} not supported (1 or 2)")));
    }
    let (axis, axis_weights) = axis_rule(spec.n_per_axis, spec.mapping)?;
    let n = axis.len();
    let total = n.pow(d as u32);
    let mut nodes = Vec::with_capacity(total * d);
    let mut weights = Vec::with_capacity(total);
    let mut speed2 = Vec::with_capacity(total);
    if d == 1 {
        for (x, w) in axis.iter().zip(&axis_weights) {
            nodes.push(*x);
            weights.push(*w);
            speed2.push(x * x);
        }
    } else {
        for (x, wx) in axis.iter().zip(&axis_weights) {
            for (y, wy) in axis.iter().zip(&axis_weights) {
                nodes.push(*x);
                nodes.push(*y);
                weights.push(wx * wy);
                speed2.push(x * x + y * y);
            }
        }
    }
    let h = n / 2;
    let mut groups = Vec::with_capacity(total / (1 << d));
    if d == 1 {
        for a in h..n {
            groups.push([a, n - 1 - a, usize::MAX, usize::MAX]);
        }
    } else {
        for a in h..n {
            for b in h..n {
                let (ra, rb) = (n - 1 - a, n - 1 - b);
                groups.push([a * n + b, ra * n + b, a * n + rb, ra * n + rb]);
            }
        }
    }
    Ok(VelocityGrid { d, spec, axis, axis_weights, nodes, weights, speed2, groups })
}

impl VelocityGrid {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn node(&self, i: usize) -> &[f64] {
        &self.nodes[i * self.d..(i + 1) * self.d]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn speed2(&self) -> &[f64] {
        &self.speed2
    }

    pub fn axis(&self) -> (&[f64], &[f64]) {
        (&self.axis, &self.axis_weights)
    }

    /// Index of the node at −v.
    pub fn mirror(&self, i: usize) -> usize {
        self.len() - 1 - i
    }

    /// Σ_i w_i g(i), summed orbit by orbit in a fixed order.
    pub fn symmetric_sum<T: Scalar, G: FnMut(usize) -> T>(&self, mut g: G) -> T {
        let mut acc = T::zero();
        for grp in &self.groups {
            let w = self.weights[grp[0]];
            let s = if self.d == 1 {
                g(grp[0]) + g(grp[1])
            } else {
                let a = g(grp[0]) + g(grp[1]);
                let b = g(grp[2]) + g(grp[3]);
                a + b
            };
            acc += s * w;
        }
        acc
    }

    /// Vector version of `symmetric_sum`: `g(i, out)` adds its values into `out`.
    pub fn symmetric_sum_vec<T: Scalar, G: FnMut(usize, &mut [T])>(&self, m: usize, mut g: G) -> Vec<T> {
        let mut acc = vec![T::zero(); m];
        let mut part = vec![T::zero(); m];
        let mut tmp = vec![T::zero(); m];
        let mut pair = vec![T::zero(); m];
        let members = if self.d == 1 { 2 } else { 4 };
        for grp in &self.groups {
            let w = self.weights[grp[0]];
            part.iter_mut().for_each(|x| *x = T::zero());
            // pair sums first: (g0 + g1) + (g2 + g3)
            for (slot, &i) in grp[..members].iter().enumerate() {
                tmp.iter_mut().for_each(|x| *x = T::zero());
                g(i, &mut tmp);
                for (p, t) in pair.iter_mut().zip(&tmp) {
                    *p += *t;
                }
                if slot % 2 == 1 {
                    for (q, p) in part.iter_mut().zip(pair.iter_mut()) {
                        *q += *p;
                        *p = T::zero();
                    }
                }
            }
            for (a, q) in acc.iter_mut().zip(&part) {
                *a += *q * w;
            }
        }
        acc
    }

    /// Largest |v| on the grid.
    pub fn max_speed(&self) -> f64 {
        self.speed2.iter().cloned().fold(0.0, f64::max).sqrt()
    }
}

/// Weighted sum of `integrand` over the nodes, in node order.
pub fn quad<F: Fn(&[f64]) -> f64>(grid: &VelocityGrid, integrand: F) -> Result<f64> {
    let values: Vec<f64> = (0..grid.len()).map(|i| integrand(grid.node(i))).collect();
    quad_values(grid, &values)
}

/// Vector-valued `quad`: the closure fills `out` (length `m`) at each node.
pub fn quad_vec<F: Fn(&[f64], &mut [f64])>(grid: &VelocityGrid, m: usize, integrand: F) -> Result<Vec<f64>> {
    let mut table = vec![0.0; m * grid.len()];
    for i in 0..grid.len() {
        let out = &mut table[i * m..(i + 1) * m];
        integrand(grid.node(i), out);
        if out.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFiniteIntegrand { node: i });
        }
    }
    Ok(grid.symmetric_sum_vec(m, |i, out: &mut [f64]| {
        for (o, t) in out.iter_mut().zip(&table[i * m..(i + 1) * m]) {
            *o += *t;
        }
    }))
}

/// Quadrature of tabulated nodal values.
pub fn quad_values(grid: &VelocityGrid, values: &[f64]) -> Result<f64> {
    assert_eq!(values.len(), grid.len());
    if let Some(node) = values.iter().position(|f| !f.is_finite()) {
        return Err(Error::NonFiniteIntegrand { node });
    }
    Ok(grid.symmetric_sum(|i| values[i]))
}
