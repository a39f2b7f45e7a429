//! One-dimensional quadrature rules shared by the velocity grids, the
//! singular-integral Laplacian and the auxiliary-function integrals.

use gauss_quad::{GaussLaguerre, GaussLegendre};

/// Gauss–Legendre rule on [-1, 1], mirrored from the positive half so that
/// nodes and weights are exactly antisymmetric / symmetric.
pub fn gauss_legendre(m: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(m >= 1, "rule needs at least one node");
    let rule = GaussLegendre::new(m.try_into().expect("m > 0"));
    let mut pairs: Vec<(f64, f64)> = rule.nodes().copied().zip(rule.weights().copied()).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut x = vec![0.0; m];
    let mut w = vec![0.0; m];
    for j in 0..m / 2 {
        let (xp, wp) = pairs[m - 1 - j];
        let (xn, wn) = pairs[j];
        let xs = 0.5 * (xp - xn);
        let ws = 0.5 * (wp + wn);
        x[j] = -xs;
        x[m - 1 - j] = xs;
        w[j] = ws;
        w[m - 1 - j] = ws;
    }
    if m % 2 == 1 {
        x[m / 2] = 0.0;
        w[m / 2] = pairs[m / 2].1;
    }
    (x, w)
}

/// Composite Gauss–Legendre rule with `m` nodes on each panel `[e_j, e_{j+1}]`.
pub fn composite_legendre(edges: &[f64], m: usize) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(m);
    let mut nodes = Vec::with_capacity(m * edges.len().saturating_sub(1));
    let mut weights = Vec::with_capacity(nodes.capacity());
    for pair in edges.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        for (xi, wi) in x.iter().zip(&w) {
            nodes.push(mid + half * xi);
            weights.push(half * wi);
        }
    }
    (nodes, weights)
}

/// Gauss rule for the weight e^{-s} on [0, ∞).
#[derive(Debug, Clone)]
pub struct LaguerreRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl LaguerreRule {
    pub fn new(n: usize) -> Self {
        let rule = GaussLaguerre::new(
            n.try_into().expect("n > 0"),
            0.0.try_into().expect("alpha = 0 is admissible"),
        );
        let mut pairs: Vec<(f64, f64)> = rule.nodes().copied().zip(rule.weights().copied()).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let (nodes, weights) = pairs.into_iter().unzip();
        LaguerreRule { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// Geometric panel edges on [0, r]: 0, r·g, ..., r with ratio chosen so the
/// first interior edge sits at `r * first`.
pub fn graded_edges(r: f64, npan: usize, first: f64) -> Vec<f64> {
    let mut edges = vec![0.0];
    if npan == 1 {
        edges.push(r);
        return edges;
    }
    for j in 0..npan {
        let t = j as f64 / (npan - 1) as f64;
        edges.push(r * first.powf(1.0 - t));
    }
    edges
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn legendre_is_exact_for_polynomials() {
        let (x, w) = gauss_legendre(8);
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(14)).sum();
        assert!((s - 2.0 / 15.0).abs() < 1e-14);
        for j in 0..8 {
            assert_eq!(x[j], -x[7 - j]);
            assert_eq!(w[j], w[7 - j]);
        }
    }

    #[test]
    fn odd_legendre_has_center_node() {
        let (x, w) = gauss_legendre(5);
        assert_eq!(x[2], 0.0);
        assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn laguerre_integrates_cosine() {
        let q = LaguerreRule::new(64);
        let s: f64 = q.nodes.iter().zip(&q.weights).map(|(s, w)| w * s.cos()).sum();
        assert!((s - 0.5).abs() < 1e-12);
    }

    #[test]
    fn graded_edges_end_at_radius() {
        let e = graded_edges(8.0, 16, 0.01);
        assert_eq!(e.len(), 17);
        assert!((e[1] - 0.08).abs() < 1e-14);
        assert!((e[16] - 8.0).abs() < 1e-14);
        assert!(e.windows(2).all(|p| p[1] > p[0]));
    }
}
