use crate::domain::{linspace, tensor_product, Domain};

/// Tensor-product trapezoid rule on a box.
#[derive(Clone, Debug)]
pub struct QuadratureRule {
    nodes: Vec<Vec<f64>>,
    weights: Vec<f64>,
}

impl QuadratureRule {
    /// `per_axis` equispaced nodes on every axis (endpoints included), so
    /// `N = per_axis^d`.
    pub fn trapezoid(domain: &Domain, per_axis: usize) -> Self {
        assert!(per_axis >= 2, "trapezoid rule needs at least two nodes per axis");
        let axes: Vec<Vec<f64>> = (0..domain.dim())
            .map(|k| linspace(domain.lower()[k], domain.upper()[k], per_axis))
            .collect();
        let axis_weights: Vec<Vec<f64>> = (0..domain.dim())
            .map(|k| {
                let h = domain.edge(k) / (per_axis - 1) as f64;
                (0..per_axis)
                    .map(|i| if i == 0 || i == per_axis - 1 { 0.5 * h } else { h })
                    .collect()
            })
            .collect();
        let nodes = tensor_product(&axes);
        let weights = tensor_product(&axis_weights)
            .into_iter()
            .map(|w| w.iter().product())
            .collect();
        Self { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[Vec<f64>] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn integrate(&self, f: impl Fn(&[f64]) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| w * f(x))
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_sum_to_volume() {
        let d = Domain::new(vec![0.2, -4.0], vec![0.9, 12.0]).unwrap();
        let q = QuadratureRule::trapezoid(&d, 33);
        assert_eq!(q.len(), 1089);
        let total: f64 = q.weights().iter().sum();
        assert!((total - d.volume()).abs() < 1e-10);
        assert!(q.weights().iter().all(|w| *w > 0.0));
        assert!(q.nodes().iter().all(|x| d.contains(x)));
    }

    #[test]
    fn exact_for_bilinear() {
        let d = Domain::unit(2);
        let q = QuadratureRule::trapezoid(&d, 5);
        let v = q.integrate(|x| 1.0 + x[0] + 2.0 * x[0] * x[1]);
        assert!((v - 2.0).abs() < 1e-14);
    }
}
