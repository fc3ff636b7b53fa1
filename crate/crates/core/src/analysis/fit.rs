use serde::{Deserialize, Serialize};

use super::{AnalysisError, VersionPoint};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum XAxis {
    Ratio,
    Loss,
}

impl XAxis {
    fn name(self) -> &'static str {
        match self {
            XAxis::Ratio => "compression_ratio",
            XAxis::Loss => "training_loss",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    /// `y = a·x + b`, params `[a, b]`.
    Linear,
    /// `y = a·exp(b·x) + c`, params `[a, b, c]`.
    Exponential,
    /// Non-increasing step function, params are the fitted values at `knots`.
    IsotonicDecreasing,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Increasing,
    Decreasing,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveFit {
    pub family: Family,
    pub params: Vec<f64>,
    /// Sorted x positions for the isotonic family; empty otherwise.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub knots: Vec<f64>,
    pub r_squared: f64,
    pub direction: Direction,
}

impl CurveFit {
    pub fn predict(&self, x: f64) -> f64 {
        match self.family {
            Family::Linear => self.params[0] * x + self.params[1],
            Family::Exponential => self.params[0] * (self.params[1] * x).exp() + self.params[2],
            Family::IsotonicDecreasing => {
                // step function: value of the last knot at or before x
                let pos = self.knots.partition_point(|&k| k <= x);
                self.params[pos.saturating_sub(1)]
            }
        }
    }
}

fn r_squared(ys: &[f64], fitted: &[f64]) -> f64 {
    let mean = ys.iter().sum::<f64>() / ys.len() as f64;
    let ss_tot: f64 = ys.iter().map(|y| (y - mean).powi(2)).sum();
    let ss_res: f64 = ys.iter().zip(fitted).map(|(y, f)| (y - f).powi(2)).sum();
    if ss_tot == 0.0 {
        if ss_res == 0.0 {
            1.0
        } else {
            f64::NEG_INFINITY
        }
    } else {
        1.0 - ss_res / ss_tot
    }
}

/// Least-squares slope and intercept of `y` on `x`; `None` when `x` is constant.
fn least_squares(xs: &[f64], ys: &[f64]) -> Option<(f64, f64)> {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx <= f64::EPSILON * mx.abs().max(1.0) {
        return None;
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    Some((slope, my - slope * mx))
}

/// For fixed rate `b`, solves `a` and `c` by linear least squares and returns
/// `(sse, a, c)`.
fn exp_profile(xs: &[f64], ys: &[f64], x0: f64, b: f64) -> Option<(f64, f64, f64)> {
    let zs: Vec<f64> = xs.iter().map(|x| (b * (x - x0)).exp()).collect();
    if zs.iter().any(|z| !z.is_finite()) {
        return None;
    }
    let (a_shifted, c) = least_squares(&zs, ys)?;
    let sse: f64 = zs
        .iter()
        .zip(ys)
        .map(|(z, y)| (a_shifted * z + c - y).powi(2))
        .sum();
    let a = a_shifted * (-b * x0).exp();
    Some((sse, a, c))
}

fn fit_exponential(xs: &[f64], ys: &[f64]) -> Option<(f64, f64, f64)> {
    let x0 = xs.iter().cloned().fold(f64::INFINITY, f64::min);
    let span = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - x0;
    let limit = 40.0 / span;
    const STEPS: usize = 2000;

    let eval = |b: f64| {
        if b.abs() < 1e-9 * limit {
            None
        } else {
            exp_profile(xs, ys, x0, b)
        }
    };
    let mut best: Option<(f64, f64)> = None;
    for i in 0..=STEPS {
        let b = -limit + 2.0 * limit * i as f64 / STEPS as f64;
        if let Some((sse, _, _)) = eval(b) {
            if best.is_none_or(|(s, _)| sse < s) {
                best = Some((sse, b));
            }
        }
    }
    let (_, mut b) = best?;
    // refine around the grid minimum with shrinking local grids
    let mut step = 2.0 * limit / STEPS as f64;
    for _ in 0..30 {
        let mut local = (eval(b).map_or(f64::INFINITY, |r| r.0), b);
        for j in -10..=10 {
            let cand = b + step * j as f64 / 10.0;
            if let Some((sse, _, _)) = eval(cand) {
                if sse < local.0 {
                    local = (sse, cand);
                }
            }
        }
        b = local.1;
        step /= 5.0;
    }
    eval(b).map(|(_, a, c)| (a, b, c))
}

/// Pool-adjacent-violators for a non-increasing fit; `ys` sorted by x.
fn pava_decreasing(ys: &[f64], weights: &[f64]) -> Vec<f64> {
    // blocks of (mean, weight, count)
    let mut blocks: Vec<(f64, f64, usize)> = Vec::with_capacity(ys.len());
    for (&y, &w) in ys.iter().zip(weights) {
        blocks.push((y, w, 1));
        while blocks.len() > 1 {
            let (m2, w2, c2) = blocks[blocks.len() - 1];
            let (m1, w1, c1) = blocks[blocks.len() - 2];
            if m1 >= m2 {
                break;
            }
            blocks.pop();
            let w = w1 + w2;
            *blocks.last_mut().unwrap() = ((m1 * w1 + m2 * w2) / w, w, c1 + c2);
        }
    }
    blocks
        .into_iter()
        .flat_map(|(m, _, c)| std::iter::repeat_n(m, c))
        .collect()
}

/// Fits performance against compression ratio or training loss.
pub fn fit_entropy_curve(
    points: &[VersionPoint],
    x: XAxis,
    family: Family,
) -> Result<CurveFit, AnalysisError> {
    let mut data: Vec<(f64, f64)> = points
        .iter()
        .filter_map(|p| {
            let xv = match x {
                XAxis::Ratio => Some(p.compression_ratio),
                XAxis::Loss => p.training_loss,
            }?;
            Some((xv, p.performance?))
        })
        .collect();
    if data.len() < 3 {
        return Err(AnalysisError::TooFewPoints(x.name(), data.len()));
    }
    data.sort_by(|a, b| a.0.total_cmp(&b.0));
    let xs: Vec<f64> = data.iter().map(|d| d.0).collect();
    let ys: Vec<f64> = data.iter().map(|d| d.1).collect();
    if xs.first() == xs.last() {
        return Err(AnalysisError::DegenerateX);
    }

    let fit = match family {
        Family::Linear => {
            let (a, b) = least_squares(&xs, &ys).ok_or(AnalysisError::DegenerateX)?;
            let fitted: Vec<f64> = xs.iter().map(|x| a * x + b).collect();
            CurveFit {
                family,
                params: vec![a, b],
                knots: Vec::new(),
                r_squared: r_squared(&ys, &fitted),
                direction: if a < 0.0 {
                    Direction::Decreasing
                } else {
                    Direction::Increasing
                },
            }
        }
        Family::Exponential => {
            let (a, b, c) = fit_exponential(&xs, &ys).ok_or(AnalysisError::DegenerateX)?;
            let fitted: Vec<f64> = xs.iter().map(|x| a * (b * x).exp() + c).collect();
            CurveFit {
                family,
                params: vec![a, b, c],
                knots: Vec::new(),
                r_squared: r_squared(&ys, &fitted),
                direction: if a * b < 0.0 {
                    Direction::Decreasing
                } else {
                    Direction::Increasing
                },
            }
        }
        Family::IsotonicDecreasing => {
            // merge tied x first so every knot is unique
            let mut knots: Vec<f64> = Vec::new();
            let mut sums: Vec<(f64, f64)> = Vec::new();
            for (&xv, &yv) in xs.iter().zip(&ys) {
                if knots.last() == Some(&xv) {
                    let last = sums.last_mut().unwrap();
                    last.0 += yv;
                    last.1 += 1.0;
                } else {
                    knots.push(xv);
                    sums.push((yv, 1.0));
                }
            }
            let means: Vec<f64> = sums.iter().map(|(s, w)| s / w).collect();
            let weights: Vec<f64> = sums.iter().map(|(_, w)| *w).collect();
            let params = pava_decreasing(&means, &weights);
            let fitted: Vec<f64> = xs
                .iter()
                .map(|x| params[knots.partition_point(|k| k < x)])
                .collect();
            CurveFit {
                family,
                params,
                knots,
                r_squared: r_squared(&ys, &fitted),
                direction: Direction::Decreasing,
            }
        }
    };
    Ok(fit)
}
