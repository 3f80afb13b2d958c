//! Gauss rules on [0, 1] and Q1 shape functions on the reference square.
//!
//! Local node order matches `Grid::cell_nodes`: lexicographic in the
//! reference coordinates, 0 = (0,0), 1 = (0,1), 2 = (1,0), 3 = (1,1).

/// 3-point Gauss-Legendre rule on [0, 1] as (point, weight).
pub const GAUSS_3: [(f64, f64); 3] = [
    (0.11270166537925831, 0.2777777777777778),
    (0.5, 0.4444444444444444),
    (0.8872983346207417, 0.2777777777777778),
];

/// 2-point Gauss-Legendre rule on [0, 1].
pub const GAUSS_2: [(f64, f64); 2] = [
    (0.21132486540518713, 0.5),
    (0.7886751345948129, 0.5),
];

/// Q1 shape function values at reference coordinates (xi, eta).
pub fn shape(xi: f64, eta: f64) -> [f64; 4] {
    [
        (1.0 - xi) * (1.0 - eta),
        (1.0 - xi) * eta,
        xi * (1.0 - eta),
        xi * eta,
    ]
}

/// Reference gradients (d/dxi, d/deta) of the Q1 shape functions.
pub fn shape_grad(xi: f64, eta: f64) -> [[f64; 2]; 4] {
    [
        [-(1.0 - eta), -(1.0 - xi)],
        [-eta, 1.0 - xi],
        [1.0 - eta, -xi],
        [eta, xi],
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_rules_integrate_polynomials() {
        // 3-point rule is exact to degree 5, 2-point to degree 3
        for p in 0..=5 {
            let exact = 1.0 / (p as f64 + 1.0);
            let got: f64 = GAUSS_3.iter().map(|&(x, w)| w * x.powi(p)).sum();
            assert!((got - exact).abs() < 1e-14, "degree {p}");
        }
        for p in 0..=3 {
            let exact = 1.0 / (p as f64 + 1.0);
            let got: f64 = GAUSS_2.iter().map(|&(x, w)| w * x.powi(p)).sum();
            assert!((got - exact).abs() < 1e-14, "degree {p}");
        }
    }

    #[test]
    fn shapes_are_nodal_and_partition_unity() {
        let corners = [(0.0, 0.0), (0.0, 1.0), (1.0, 0.0), (1.0, 1.0)];
        for (i, &(x, e)) in corners.iter().enumerate() {
            let s = shape(x, e);
            for (j, &v) in s.iter().enumerate() {
                assert_eq!(v, if i == j { 1.0 } else { 0.0 });
            }
        }
        let s = shape(0.3, 0.8);
        assert!((s.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        let g = shape_grad(0.3, 0.8);
        for d in 0..2 {
            assert!((g.iter().map(|r| r[d]).sum::<f64>()).abs() < 1e-15);
        }
    }
}
