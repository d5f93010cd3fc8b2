//! Composite Gauss-Legendre quadrature with panel doubling.
//!
//! Several integrands sharing the same abscissae are integrated in one
//! pass; refinement stops once every component agrees with the previous
//! level to the requested relative tolerance.

use std::sync::OnceLock;

const ORDER: usize = 20;
const START_PANELS: usize = 8;
const MAX_PANELS: usize = 1 << 14;

struct Rule {
    nodes: [f64; ORDER],
    weights: [f64; ORDER],
}

/// Nodes and weights on [-1, 1] by Newton iteration on the Legendre
/// polynomial of degree `ORDER`.
fn rule() -> &'static Rule {
    static RULE: OnceLock<Rule> = OnceLock::new();
    RULE.get_or_init(|| {
        let n = ORDER;
        let mut nodes = [0.0; ORDER];
        let mut weights = [0.0; ORDER];
        for i in 0..n.div_ceil(2) {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=n {
                    let k = k as f64;
                    let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                    p0 = p1;
                    p1 = p2;
                }
                dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        Rule { nodes, weights }
    })
}

fn composite<const K: usize>(f: &impl Fn(f64) -> [f64; K], a: f64, b: f64, panels: usize) -> [f64; K] {
    let r = rule();
    let h = (b - a) / panels as f64;
    let half = 0.5 * h;
    let mut acc = [0.0; K];
    for p in 0..panels {
        let mid = a + (p as f64 + 0.5) * h;
        for (x, w) in r.nodes.iter().zip(r.weights.iter()) {
            let vals = f(mid + half * x);
            for k in 0..K {
                acc[k] += w * vals[k];
            }
        }
    }
    acc.map(|v| v * half)
}

/// Outcome of an adaptive integration.
#[derive(Debug, Clone, Copy)]
pub struct Integral<const K: usize> {
    pub values: [f64; K],
    pub panels: usize,
    pub converged: bool,
}

/// Integrates `K` functions over `[a, b]`, doubling the panel count until
/// successive levels agree to `rel_tol` (or to `abs_floor` absolutely for
/// components that are essentially zero).
pub fn integrate<const K: usize>(
    f: impl Fn(f64) -> [f64; K],
    a: f64,
    b: f64,
    rel_tol: f64,
    abs_floor: f64,
) -> Integral<K> {
    let mut panels = START_PANELS;
    let mut prev = composite(&f, a, b, panels);
    loop {
        let next_panels = panels * 2;
        let next = composite(&f, a, b, next_panels);
        let ok = prev
            .iter()
            .zip(next.iter())
            .all(|(p, q)| (p - q).abs() <= rel_tol * q.abs().max(abs_floor));
        if ok || next_panels >= MAX_PANELS {
            return Integral {
                values: next,
                panels: next_panels,
                converged: ok,
            };
        }
        panels = next_panels;
        prev = next;
    }
}

/// Integral of an even function over `[-half_width, half_width]`, computed
/// as twice the integral over `[0, half_width]`.
pub fn integrate_even<const K: usize>(
    f: impl Fn(f64) -> [f64; K],
    half_width: f64,
    rel_tol: f64,
    abs_floor: f64,
) -> Integral<K> {
    let mut out = integrate(f, 0.0, half_width, rel_tol, abs_floor);
    out.values = out.values.map(|v| 2.0 * v);
    out
}
