//! Fixed-order Gauss–Legendre rules.

use gauss_quad::GaussLegendre;

use crate::error::{domain, Result};
use crate::scalar::{lit, Real};

/// Gauss–Legendre nodes and weights on the reference interval `[-1, 1]`,
/// sorted by node.
#[derive(Debug, Clone)]
pub struct LegendreRule<T> {
    nodes: Vec<T>,
    weights: Vec<T>,
}

impl<T: Real> LegendreRule<T> {
    pub fn new(order: usize) -> Result<Self> {
        let rule = GaussLegendre::new(order)
            .map_err(|e| domain(format!("Gauss-Legendre order {order}: {e}")))?;
        let mut pairs: Vec<(f64, f64)> = rule.as_node_weight_pairs().to_vec();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        Ok(Self {
            nodes: pairs.iter().map(|p| lit(p.0)).collect(),
            weights: pairs.iter().map(|p| lit(p.1)).collect(),
        })
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    /// Nodes and weights mapped onto `[a, b]`.
    pub fn mapped(&self, a: T, b: T) -> impl Iterator<Item = (T, T)> + '_ {
        let half = (b - a) * lit(0.5);
        let mid = (b + a) * lit(0.5);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(&x, &w)| (mid + half * x, half * w))
    }

    pub fn integrate<F: FnMut(T) -> T>(&self, a: T, b: T, mut f: F) -> T {
        self.mapped(a, b).fold(T::zero(), |acc, (x, w)| acc + w * f(x))
    }
}

/// A rule mapped once onto `[0, 1]`; integrals against sampled data become
/// dot products with [`UnitGrid::weights`].
#[derive(Debug, Clone)]
pub struct UnitGrid<T> {
    pub nodes: Vec<T>,
    pub weights: Vec<T>,
}

impl<T: Real> UnitGrid<T> {
    pub fn new(order: usize) -> Result<Self> {
        let rule = LegendreRule::new(order)?;
        let (nodes, weights) = rule.mapped(T::zero(), T::one()).unzip();
        Ok(Self { nodes, weights })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// `∫₀¹ f` given samples of `f` at the nodes.
    pub fn dot(&self, samples: &[T]) -> T {
        debug_assert_eq!(samples.len(), self.weights.len());
        self.weights
            .iter()
            .zip(samples)
            .fold(T::zero(), |acc, (&w, &s)| acc + w * s)
    }

    /// `∫₀¹ f·g` given samples of both at the nodes.
    pub fn dot2(&self, f: &[T], g: &[T]) -> T {
        debug_assert_eq!(f.len(), self.weights.len());
        debug_assert_eq!(g.len(), self.weights.len());
        self.weights
            .iter()
            .zip(f.iter().zip(g))
            .fold(T::zero(), |acc, (&w, (&a, &b))| acc + w * a * b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integrates_polynomials_exactly() {
        let rule = LegendreRule::<f64>::new(8).unwrap();
        // degree 15 is the exactness limit for 8 points
        let v = rule.integrate(0.0, 2.0, |x| x.powi(15));
        assert!((v - 2f64.powi(16) / 16.0).abs() < 1e-9);
    }

    #[test]
    fn unit_grid_weights_sum_to_one() {
        let g = UnitGrid::<f64>::new(64).unwrap();
        let s: f64 = g.weights.iter().sum();
        assert!((s - 1.0).abs() < 1e-14);
        assert!(g.nodes.windows(2).all(|w| w[0] < w[1]));
        assert!(g.nodes[0] > 0.0 && *g.nodes.last().unwrap() < 1.0);
    }

    #[test]
    fn rejects_degenerate_order() {
        assert!(LegendreRule::<f64>::new(1).is_err());
    }
}
