//! Shared helpers for unit tests.

use crate::tensor::{MetricPoint, RiemannPoint, TwoFormPoint};
use nalgebra::DMatrix;
use rand::prelude::*;

pub fn random_metric(rng: &mut impl Rng, n: usize) -> MetricPoint {
    loop {
        let a = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
        let m = &a * a.transpose() + DMatrix::identity(n, n) * 0.05;
        if let Ok(g) = MetricPoint::new(m) {
            return g;
        }
    }
}

pub fn random_two_form(rng: &mut impl Rng, n: usize) -> TwoFormPoint {
    let a = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
    TwoFormPoint::new(&a - a.transpose()).unwrap()
}

/// Closed-form curvature tensor of a complex space form: constant
/// holomorphic sectional curvature `c` with respect to (g, J).
pub fn complex_space_form(g: &MetricPoint, j: &DMatrix<f64>, c: f64) -> RiemannPoint {
    let gm = g.components();
    let mut jl = DMatrix::zeros(4, 4);
    for i in 0..4 {
        for jj in 0..4 {
            let mut s = 0.0;
            for k in 0..4 {
                s += j[(k, i)] * gm[(k, jj)];
            }
            jl[(i, jj)] = s;
        }
    }
    RiemannPoint::from_fn(4, |i, jj, k, l| {
        let t1 = gm[(i, k)] * gm[(jj, l)] - gm[(i, l)] * gm[(jj, k)];
        let t2 = jl[(i, k)] * jl[(jj, l)] - jl[(i, l)] * jl[(jj, k)];
        let t3 = 2.0 * jl[(i, jj)] * jl[(k, l)];
        c / 4.0 * (t1 + t2 + t3)
    })
}

/// Standard constant complex structure on R^4 ordered (x1, y1, x2, y2).
pub fn standard_j4() -> DMatrix<f64> {
    let mut j = DMatrix::zeros(4, 4);
    j[(1, 0)] = 1.0;
    j[(0, 1)] = -1.0;
    j[(3, 2)] = 1.0;
    j[(2, 3)] = -1.0;
    j
}
