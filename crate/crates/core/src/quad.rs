//! Composite Gauss–Legendre quadrature with level doubling.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    /// Nodes and weights on [−1, 1] by Newton iteration on `P_n`.
    pub fn new(n: usize) -> Self {
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        for i in 0..n {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=n {
                    let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
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
            nodes[i] = x;
            weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
        }
        GaussLegendre { nodes, weights }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct QuadConfig {
    pub order: usize,
    pub rtol: f64,
    pub max_level: u32,
}

impl Default for QuadConfig {
    fn default() -> Self {
        QuadConfig { order: 16, rtol: 1e-10, max_level: 8 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct QuadResult {
    pub value: f64,
    pub estimate_error: f64,
    pub panels: usize,
    pub evaluations: usize,
}

/// `∫_a^b f` on `2^k` equal panels, doubling `k` until two successive levels
/// agree to `rtol`. Node evaluations run in parallel; the sum is taken in a
/// fixed order.
pub fn integrate<F>(f: F, a: f64, b: f64, cfg: &QuadConfig) -> Result<QuadResult>
where
    F: Fn(f64) -> Result<f64> + Sync,
{
    let gl = GaussLegendre::new(cfg.order);
    let mut prev: Option<f64> = None;
    let mut evaluations = 0;
    for level in 0..=cfg.max_level {
        let panels = 1usize << level;
        let h = (b - a) / panels as f64;
        let pts: Vec<(f64, f64)> = (0..panels)
            .flat_map(|p| {
                let lo = a + p as f64 * h;
                gl.nodes.iter().zip(&gl.weights).map(move |(x, w)| (lo + 0.5 * h * (x + 1.0), 0.5 * h * w))
            })
            .collect();
        let vals: Vec<Result<f64>> = pts.par_iter().map(|(x, _)| f(*x)).collect();
        evaluations += pts.len();
        let mut sum = 0.0;
        for ((_, w), v) in pts.iter().zip(vals) {
            sum += w * v?;
        }
        if let Some(p) = prev {
            let err = (sum - p).abs();
            if err <= cfg.rtol * sum.abs().max(f64::MIN_POSITIVE) || err == 0.0 {
                return Ok(QuadResult { value: sum, estimate_error: err, panels, evaluations });
            }
        }
        prev = Some(sum);
    }
    Err(Error::Quadrature(format!("no agreement to {:e} after {} levels", cfg.rtol, cfg.max_level)))
}
