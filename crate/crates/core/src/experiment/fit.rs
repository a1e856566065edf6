//! Four-parameter least-squares fits of saturated entropy against the swept
//! parameter, by Levenberg-Marquardt with numerical Jacobians.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector, Matrix4, Vector4};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FitModel {
    /// `a + b exp(-c t) + d t`
    ExpOffset,
    /// `a t^b exp(-c t) + d`, requires `t > 0`
    PowerExp,
    /// `(a + b t) / (1 + c t + d t^2)`
    Rational,
}

impl FitModel {
    pub const ALL: [FitModel; 3] = [FitModel::ExpOffset, FitModel::PowerExp, FitModel::Rational];

    pub fn name(self) -> &'static str {
        match self {
            FitModel::ExpOffset => "exp-offset",
            FitModel::PowerExp => "power-exp",
            FitModel::Rational => "rational",
        }
    }

    pub fn formula(self) -> &'static str {
        match self {
            FitModel::ExpOffset => "a + b*exp(-c*t) + d*t",
            FitModel::PowerExp => "a * t^b * exp(-c*t) + d",
            FitModel::Rational => "(a + b*t) / (1 + c*t + d*t^2)",
        }
    }

    pub fn eval(self, p: &[f64; 4], t: f64) -> f64 {
        let [a, b, c, d] = *p;
        match self {
            FitModel::ExpOffset => a + b * (-c * t).exp() + d * t,
            FitModel::PowerExp => a * t.powf(b) * (-c * t).exp() + d,
            FitModel::Rational => (a + b * t) / (1.0 + c * t + d * t * t),
        }
    }

    fn initial_guesses(self, t: &[f64], y: &[f64]) -> Vec<[f64; 4]> {
        let n = t.len();
        let (t_min, t_max) = (t[0], t[n - 1]);
        let span = (t_max - t_min).max(1e-12);
        match self {
            FitModel::ExpOffset => [0.3, 1.0, 3.0, 10.0]
                .iter()
                .map(|k| [y[n - 1], y[0] - y[n - 1], k / span, 0.0])
                .collect(),
            FitModel::PowerExp => {
                // log-linear fit of ln y = ln a + b ln t - c t with d = 0
                let mut guesses = vec![[y.iter().sum::<f64>() / n as f64, 0.0, 0.0, 0.0]];
                if y.iter().all(|&v| v > 0.0) && t.iter().all(|&v| v > 0.0) {
                    let rows: Vec<[f64; 3]> = t.iter().map(|&tv| [1.0, tv.ln(), -tv]).collect();
                    let rhs: Vec<f64> = y.iter().map(|v| v.ln()).collect();
                    if let Some(s) = linear_least_squares(&rows, &rhs) {
                        guesses.insert(0, [s[0].exp(), s[1], s[2], 0.0]);
                    }
                }
                guesses
            }
            FitModel::Rational => {
                // y (1 + c t + d t^2) = a + b t, linear in (a, b, c, d)
                let rows: Vec<[f64; 4]> = t
                    .iter()
                    .zip(y)
                    .map(|(&tv, &yv)| [1.0, tv, -tv * yv, -tv * tv * yv])
                    .collect();
                let mut guesses = vec![[y.iter().sum::<f64>() / n as f64, 0.0, 0.0, 0.0]];
                if let Some(s) = linear_least_squares(&rows, y) {
                    guesses.insert(0, [s[0], s[1], s[2], s[3]]);
                }
                guesses
            }
        }
    }
}

impl fmt::Display for FitModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FitModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.name() == s.trim())
            .ok_or_else(|| Error::Config(format!("unknown fit model {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub model: FitModel,
    pub formula: String,
    pub params: [f64; 4],
    /// `sqrt(sum of squared residuals)`.
    pub residual: f64,
    /// Diagonal of `s^2 (J^T J)^-1` with `s^2 = SSR / (n - 4)`; `None` when
    /// the normal matrix is singular.
    pub covariance_diag: [Option<f64>; 4],
    pub converged: bool,
    pub iterations: usize,
}

const MAX_ITER: usize = 500;

fn linear_least_squares<const K: usize>(rows: &[[f64; K]], rhs: &[f64]) -> Option<[f64; K]> {
    let a = DMatrix::from_fn(rows.len(), K, |r, c| rows[r][c]);
    let b = DVector::from_column_slice(rhs);
    let sol = a.svd(true, true).solve(&b, 1e-12).ok()?;
    let mut out = [0.0; K];
    out.copy_from_slice(sol.as_slice());
    out.iter().all(|v| v.is_finite()).then_some(out)
}

fn residuals(model: FitModel, p: &[f64; 4], t: &[f64], y: &[f64]) -> Vec<f64> {
    t.iter().zip(y).map(|(&tv, &yv)| model.eval(p, tv) - yv).collect()
}

fn cost(r: &[f64]) -> f64 {
    let c: f64 = r.iter().map(|v| v * v).sum();
    if c.is_finite() {
        c
    } else {
        f64::INFINITY
    }
}

fn jacobian(model: FitModel, p: &[f64; 4], t: &[f64]) -> DMatrix<f64> {
    let mut j = DMatrix::zeros(t.len(), 4);
    for k in 0..4 {
        let h = 1e-7 * p[k].abs().max(1e-3);
        let (mut up, mut dn) = (*p, *p);
        up[k] += h;
        dn[k] -= h;
        for (i, &tv) in t.iter().enumerate() {
            j[(i, k)] = (model.eval(&up, tv) - model.eval(&dn, tv)) / (2.0 * h);
        }
    }
    j
}

struct LmOutcome {
    params: [f64; 4],
    cost: f64,
    converged: bool,
    iterations: usize,
}

fn levenberg_marquardt(model: FitModel, start: [f64; 4], t: &[f64], y: &[f64]) -> LmOutcome {
    let mut p = start;
    let mut c = cost(&residuals(model, &p, t, y));
    let mut lambda = 1e-3;
    let scale = y.iter().map(|v| v * v).sum::<f64>().max(1e-300);
    for iter in 0..MAX_ITER {
        if c <= 1e-30 * scale {
            return LmOutcome { params: p, cost: c, converged: true, iterations: iter };
        }
        let r = DVector::from_vec(residuals(model, &p, t, y));
        let j = jacobian(model, &p, t);
        let jtj: Matrix4<f64> = (j.transpose() * &j).fixed_view::<4, 4>(0, 0).into_owned();
        let g: Vector4<f64> = (j.transpose() * &r).fixed_rows::<4>(0).into_owned();
        if g.amax() <= 1e-15 * scale.sqrt() {
            return LmOutcome { params: p, cost: c, converged: true, iterations: iter };
        }
        let mut improved = false;
        for _ in 0..30 {
            let mut a = jtj;
            for k in 0..4 {
                a[(k, k)] += lambda * jtj[(k, k)].max(1e-12);
            }
            let Some(step) = a.lu().solve(&(-g)) else {
                lambda *= 4.0;
                continue;
            };
            let mut trial = p;
            for k in 0..4 {
                trial[k] += step[k];
            }
            let ct = cost(&residuals(model, &trial, t, y));
            if ct < c {
                let rel_step = (0..4)
                    .map(|k| step[k].abs() / p[k].abs().max(1e-8))
                    .fold(0.0, f64::max);
                let rel_drop = (c - ct) / c;
                p = trial;
                c = ct;
                lambda = (lambda / 3.0).max(1e-12);
                improved = true;
                if rel_step < 1e-10 || rel_drop < 1e-14 {
                    return LmOutcome { params: p, cost: c, converged: true, iterations: iter + 1 };
                }
                break;
            }
            lambda *= 2.0;
        }
        if !improved {
            // no downhill step at any damping: stationary to working precision
            return LmOutcome { params: p, cost: c, converged: true, iterations: iter };
        }
    }
    LmOutcome { params: p, cost: c, converged: false, iterations: MAX_ITER }
}

/// Fit `model` to `(t, y)` points (at least five). Several deterministic
/// starting points are tried and the lowest-cost solution is reported. A
/// non-converged best fit is returned with `converged = false`.
pub fn fit_saturation(points: &[(f64, f64)], model: FitModel) -> Result<FitResult> {
    let mut pts: Vec<(f64, f64)> =
        points.iter().copied().filter(|(t, y)| t.is_finite() && y.is_finite()).collect();
    if pts.len() < 5 {
        return Err(Error::Fit(format!("need at least 5 finite points, got {}", pts.len())));
    }
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    if model == FitModel::PowerExp && pts.iter().any(|&(t, _)| t <= 0.0) {
        return Err(Error::Fit("power-exp model requires positive abscissae".into()));
    }
    let t: Vec<f64> = pts.iter().map(|p| p.0).collect();
    let y: Vec<f64> = pts.iter().map(|p| p.1).collect();

    let best = model
        .initial_guesses(&t, &y)
        .into_iter()
        .map(|g| levenberg_marquardt(model, g, &t, &y))
        .filter(|o| o.cost.is_finite())
        .min_by(|a, b| a.cost.total_cmp(&b.cost))
        .ok_or_else(|| Error::Fit("no starting point produced a finite residual".into()))?;

    let j = jacobian(model, &best.params, &t);
    let dof = (t.len() - 4).max(1) as f64;
    let s2 = best.cost / dof;
    let jtj: Matrix4<f64> = (j.transpose() * &j).fixed_view::<4, 4>(0, 0).into_owned();
    let covariance_diag = match jtj.try_inverse() {
        Some(inv) => [0, 1, 2, 3].map(|k| Some(s2 * inv[(k, k)]).filter(|v| v.is_finite())),
        None => [None; 4],
    };
    Ok(FitResult {
        model,
        formula: model.formula().to_string(),
        params: best.params,
        residual: best.cost.sqrt(),
        covariance_diag,
        converged: best.converged,
        iterations: best.iterations,
    })
}

impl FitResult {
    pub fn eval_at(&self, t: f64) -> f64 {
        self.model.eval(&self.params, t)
    }
}

/// Ordinary least-squares line `y = slope t + intercept`.
pub fn linear_fit(points: &[(f64, f64)]) -> Result<(f64, f64)> {
    if points.len() < 2 {
        return Err(Error::Fit("linear fit needs at least 2 points".into()));
    }
    let n = points.len() as f64;
    let mt = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mt).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Fit("linear fit needs distinct abscissae".into()));
    }
    let sxy: f64 = points.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    Ok((slope, my - slope * mt))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn recovers_exp_offset_parameters() {
        let truth = [0.5, 1.0, 2.0, -0.05];
        let mut rng = rand::rngs::StdRng::seed_from_u64(17);
        let pts: Vec<(f64, f64)> = (0..25)
            .map(|k| {
                let t = k as f64 * 0.2;
                let y = FitModel::ExpOffset.eval(&truth, t);
                (t, y * (1.0 + 0.01 * (2.0 * rng.gen::<f64>() - 1.0)))
            })
            .collect();
        let fit = fit_saturation(&pts, FitModel::ExpOffset).unwrap();
        assert!(fit.converged);
        for (k, (got, want)) in fit.params.iter().zip(&truth).enumerate() {
            let rel = (got - want).abs() / want.abs();
            assert!(rel < 0.05, "param {k}: {got} vs {want}");
        }
        assert!(fit.covariance_diag.iter().all(|v| v.is_some_and(|v| v >= 0.0)));
    }

    #[test]
    fn constant_data_fits_exactly() {
        let pts: Vec<(f64, f64)> = (0..8).map(|k| (0.5 * k as f64, 0.0266)).collect();
        let fit = fit_saturation(&pts, FitModel::ExpOffset).unwrap();
        assert!(fit.residual < 1e-12, "{}", fit.residual);
        assert!((fit.eval_at(3.3) - 0.0266).abs() < 1e-12);
    }

    #[test]
    fn other_models_fit_their_own_data() {
        let t: Vec<f64> = (1..=12).map(|k| k as f64 * 0.25).collect();
        for (model, truth) in [
            (FitModel::PowerExp, [0.8, 0.5, 1.2, 0.02]),
            (FitModel::Rational, [0.3, 0.1, 0.8, 0.2]),
        ] {
            let pts: Vec<(f64, f64)> = t.iter().map(|&tv| (tv, model.eval(&truth, tv))).collect();
            let fit = fit_saturation(&pts, model).unwrap();
            assert!(fit.residual < 1e-8, "{model}: {}", fit.residual);
        }
    }

    #[test]
    fn rejects_too_few_points() {
        let pts = [(0.0, 1.0), (1.0, 2.0), (2.0, 3.0), (3.0, 4.0)];
        assert!(fit_saturation(&pts, FitModel::ExpOffset).is_err());
        let pts: Vec<(f64, f64)> = (0..6).map(|k| (k as f64, 1.0)).collect();
        assert!(fit_saturation(&pts, FitModel::PowerExp).is_err());
    }

    #[test]
    fn line() {
        let (m, b) = linear_fit(&[(0.0, 1.0), (1.0, 3.0), (2.0, 5.0)]).unwrap();
        assert!((m - 2.0).abs() < 1e-14 && (b - 1.0).abs() < 1e-14);
        assert!(linear_fit(&[(1.0, 1.0), (1.0, 2.0)]).is_err());
    }

    #[test]
    fn json_shape() {
        let pts: Vec<(f64, f64)> = (0..6).map(|k| (k as f64, 2.0)).collect();
        let fit = fit_saturation(&pts, FitModel::ExpOffset).unwrap();
        let json = serde_json::to_string(&fit).unwrap();
        assert!(json.contains("\"model\":\"exp-offset\""));
        let back: FitResult = serde_json::from_str(&json).unwrap();
        assert_eq!(back.model, FitModel::ExpOffset);
    }

    #[test]
    fn model_names_parse() {
        for m in FitModel::ALL {
            assert_eq!(m.name().parse::<FitModel>().unwrap(), m);
        }
        assert!("cubic".parse::<FitModel>().is_err());
    }
}
