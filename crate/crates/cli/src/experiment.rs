//! Built-in reproduction of the LC curve on the two-dimensional Mexican Hat.

use std::io::Write;

use lcattr_core::{
    mexican_hat, solve_lc, BuiltinModel, Dataset, LcHyperParams, Sample, Standardizer,
};
use serde::Serialize;

pub const TEST_POINT: [f64; 2] = [1.0, 0.0];

#[derive(Clone, Debug)]
pub struct MexicanHatParams {
    pub lc: LcHyperParams,
    pub sigma2: f64,
    /// Also brute-force the objective on a grid for each `y`.
    pub oracle: bool,
    pub oracle_half_width: f64,
    pub oracle_step: f64,
}

impl Default for MexicanHatParams {
    fn default() -> Self {
        let mut lc = LcHyperParams::for_dim(2);
        lc.nu = 0.0;
        lc.lambda = 0.01;
        MexicanHatParams {
            lc,
            sigma2: 0.05,
            oracle: false,
            oracle_half_width: 3.0,
            oracle_step: 0.005,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CurvePoint {
    pub y: f64,
    pub delta1: f64,
    pub delta2: f64,
    /// `f(x + δ) − y`.
    pub fit_gap: f64,
    pub converged: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid_delta1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid_delta2: Option<f64>,
}

/// Solves LC at `(1, 0)` for every target in `y_grid`, on raw coordinates.
pub fn experiment_mexican_hat(
    y_grid: &[f64],
    params: &MexicanHatParams,
) -> lcattr_core::Result<Vec<CurvePoint>> {
    let model = BuiltinModel::MexicanHat;
    let id = Standardizer::identity(2);
    y_grid
        .iter()
        .map(|&y| {
            let data = Dataset::single(Sample::new("t", TEST_POINT.to_vec(), y));
            let r = solve_lc(&model, &data, &[params.sigma2], &params.lc, &id)?;
            let moved = [TEST_POINT[0] + r.scores[0], TEST_POINT[1] + r.scores[1]];
            let grid = params.oracle.then(|| {
                grid_minimizer(
                    y,
                    params.sigma2,
                    params.lc.lambda,
                    params.lc.nu,
                    params.oracle_half_width,
                    params.oracle_step,
                )
            });
            Ok(CurvePoint {
                y,
                delta1: r.scores[0],
                delta2: r.scores[1],
                fit_gap: mexican_hat(&moved) - y,
                converged: r.diagnostics.converged,
                grid_delta1: grid.map(|g| g[0]),
                grid_delta2: grid.map(|g| g[1]),
            })
        })
        .collect()
}

/// Exhaustive minimizer of the single-sample objective over δ on a square grid.
pub fn grid_minimizer(
    y: f64,
    sigma2: f64,
    lambda: f64,
    nu: f64,
    half_width: f64,
    step: f64,
) -> [f64; 2] {
    let n = (2.0 * half_width / step).round() as i64;
    let mut best = (f64::INFINITY, [0.0, 0.0]);
    for i in 0..=n {
        let d1 = -half_width + i as f64 * step;
        for j in 0..=n {
            let d2 = -half_width + j as f64 * step;
            let r = y - mexican_hat(&[TEST_POINT[0] + d1, TEST_POINT[1] + d2]);
            let obj = r * r / (2.0 * sigma2)
                + 0.5 * lambda * (d1 * d1 + d2 * d2)
                + nu * (d1.abs() + d2.abs());
            if obj < best.0 {
                best = (obj, [d1, d2]);
            }
        }
    }
    best.1
}

pub fn write_curve<W: Write>(points: &[CurvePoint], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for p in points {
        w.serialize(p)?;
    }
    w.flush()?;
    Ok(())
}

/// `count` evenly spaced targets from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => vec![],
        1 => vec![lo],
        _ => (0..count)
            .map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64)
            .collect(),
    }
}
