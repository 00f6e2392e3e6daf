//! Gradient-based minimisers: L-BFGS with a strong-Wolfe line search, and Adam.
//!
//! Objectives are closures `θ ↦ (f, ∇f)` writing the gradient into a buffer.
//! An objective error inside the line search is treated as `f = +∞` (the step
//! is shrunk); an error raised by the per-iteration callback aborts the run.

use std::fmt::Write as _;
use std::time::Instant;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct LbfgsConfig {
    pub history: usize,
    pub c1: f64,
    pub c2: f64,
    pub grad_tol: f64,
    /// Relative decrease below which the run counts as stalled.
    pub f_tol: f64,
    pub max_iter: usize,
    pub max_line_search: usize,
    /// Adam phase run once after a failed line search, before L-BFGS restarts.
    pub stall_fallback: Option<AdamConfig>,
}

impl Default for LbfgsConfig {
    fn default() -> Self {
        LbfgsConfig {
            history: 10,
            c1: 1e-4,
            c2: 0.9,
            grad_tol: 1e-7,
            f_tol: 1e-14,
            max_iter: 500,
            max_line_search: 25,
            stall_fallback: Some(AdamConfig { lr: 1e-3, max_iter: 200, grad_tol: 0.0, ..AdamConfig::default() }),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub grad_tol: f64,
    pub max_iter: usize,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig { lr: 1e-2, beta1: 0.9, beta2: 0.999, eps: 1e-8, grad_tol: 1e-7, max_iter: 2000 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Optimizer {
    Lbfgs(LbfgsConfig),
    Adam(AdamConfig),
}

impl Default for Optimizer {
    fn default() -> Self {
        Optimizer::Lbfgs(LbfgsConfig::default())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    GradientTolerance,
    Stalled,
    MaxIterations,
    LineSearchFailed,
    Callback,
}

/// State passed to the per-iteration callback.
#[derive(Debug)]
pub struct Iterate<'a> {
    pub iter: usize,
    pub theta: &'a [f64],
    pub value: f64,
    pub grad: &'a [f64],
    pub step: f64,
    pub evaluations: usize,
}

/// What the callback returns: extra log columns and whether to stop.
#[derive(Debug, Clone, Default)]
pub struct Control {
    pub extras: Vec<f64>,
    pub stop: bool,
}

#[derive(Debug, Clone)]
pub struct RunLog {
    pub extra_names: Vec<String>,
    pub record_timing: bool,
    pub rows: Vec<LogRow>,
}

#[derive(Debug, Clone)]
pub struct LogRow {
    pub iter: usize,
    pub value: f64,
    pub grad_norm: f64,
    pub step: f64,
    pub evaluations: usize,
    pub seconds: f64,
    pub extras: Vec<f64>,
}

impl RunLog {
    pub fn new(extra_names: &[&str], record_timing: bool) -> Self {
        RunLog { extra_names: extra_names.iter().map(|s| s.to_string()).collect(), record_timing, rows: Vec::new() }
    }

    /// CSV with columns `iter,value,grad_norm,step,evals[,seconds],extras…`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("iter,value,grad_norm,step,evals");
        if self.record_timing {
            out.push_str(",seconds");
        }
        for n in &self.extra_names {
            out.push(',');
            out.push_str(n);
        }
        out.push('\n');
        for r in &self.rows {
            let _ = write!(out, "{},{:.17e},{:.17e},{:.17e},{}", r.iter, r.value, r.grad_norm, r.step, r.evaluations);
            if self.record_timing {
                let _ = write!(out, ",{:.6}", r.seconds);
            }
            for e in &r.extras {
                let _ = write!(out, ",{e:.17e}");
            }
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct OptimizeResult {
    pub theta: Vec<f64>,
    pub value: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub reason: StopReason,
    pub log: RunLog,
}

impl OptimizeResult {
    pub fn converged(&self) -> bool {
        matches!(self.reason, StopReason::GradientTolerance | StopReason::Stalled)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

struct Counter<'a, F> {
    f: &'a mut F,
    evals: usize,
}

impl<F: FnMut(&[f64], &mut [f64]) -> Result<f64>> Counter<'_, F> {
    /// Non-finite values and objective errors both come back as `None`.
    fn eval(&mut self, x: &[f64], g: &mut [f64]) -> Option<f64> {
        self.evals += 1;
        g.iter_mut().for_each(|v| *v = 0.0);
        match (self.f)(x, g) {
            Ok(v) if v.is_finite() && g.iter().all(|c| c.is_finite()) => Some(v),
            Ok(_) => None,
            Err(e) => {
                log::debug!("objective failed during line search: {e}");
                None
            }
        }
    }
}

struct LinePoint {
    alpha: f64,
    f: f64,
    x: Vec<f64>,
    g: Vec<f64>,
}

/// Strong-Wolfe line search along `p` from `x`.
fn line_search<F: FnMut(&[f64], &mut [f64]) -> Result<f64>>(
    obj: &mut Counter<'_, F>,
    x: &[f64],
    f0: f64,
    g0: &[f64],
    p: &[f64],
    alpha0: f64,
    cfg: &LbfgsConfig,
) -> Option<LinePoint> {
    let d0 = dot(g0, p);
    if d0 >= 0.0 {
        return None;
    }
    let n = x.len();
    let try_at = |obj: &mut Counter<'_, F>, a: f64| {
        let xa: Vec<f64> = x.iter().zip(p).map(|(xi, pi)| xi + a * pi).collect();
        let mut ga = vec![0.0; n];
        let fa = obj.eval(&xa, &mut ga);
        (fa, xa, ga)
    };
    let armijo = |a: f64, f: f64| f <= f0 + cfg.c1 * a * d0;
    let curvature = |d: f64| d.abs() <= -cfg.c2 * d0;
    // best point with sufficient decrease, used if the search runs out of budget
    let mut fallback: Option<LinePoint> = None;
    let (mut a_prev, mut f_prev, mut d_prev) = (0.0, f0, d0);
    let mut a = alpha0;
    let mut budget = cfg.max_line_search;
    let (mut lo, mut hi);
    loop {
        if budget == 0 {
            return fallback;
        }
        budget -= 1;
        let (fa, xa, ga) = try_at(obj, a);
        match fa {
            None => {
                lo = (a_prev, f_prev, d_prev);
                hi = (a, f64::INFINITY, f64::NAN);
                break;
            }
            Some(fa) => {
                let da = dot(&ga, p);
                if !armijo(a, fa) || (a_prev > 0.0 && fa >= f_prev) {
                    lo = (a_prev, f_prev, d_prev);
                    hi = (a, fa, da);
                    break;
                }
                if curvature(da) {
                    return Some(LinePoint { alpha: a, f: fa, x: xa, g: ga });
                }
                if fallback.as_ref().is_none_or(|b| fa < b.f) {
                    fallback = Some(LinePoint { alpha: a, f: fa, x: xa.clone(), g: ga.clone() });
                }
                if da >= 0.0 {
                    lo = (a, fa, da);
                    hi = (a_prev, f_prev, d_prev);
                    break;
                }
                a_prev = a;
                f_prev = fa;
                d_prev = da;
                a *= 2.0;
            }
        }
    }
    // zoom between lo (sufficient decrease) and hi
    while budget > 0 {
        budget -= 1;
        let (al, fl, dl) = lo;
        let (ah, fh, dh) = hi;
        let width = ah - al;
        let mut a = if fh.is_finite() && dh.is_finite() {
            // cubic interpolant through both end points
            let d1 = dl + dh - 3.0 * (fl - fh) / (al - ah);
            let disc = d1 * d1 - dl * dh;
            if disc >= 0.0 {
                let d2 = disc.sqrt() * width.signum();
                ah - (ah - al) * (dh + d2 - d1) / (dh - dl + 2.0 * d2)
            } else {
                al + 0.5 * width
            }
        } else if fh.is_finite() {
            // quadratic from f(lo), f'(lo), f(hi)
            let denom = 2.0 * (fh - fl - dl * width);
            if denom > 0.0 {
                al - dl * width * width / denom
            } else {
                al + 0.5 * width
            }
        } else {
            al + 0.5 * width
        };
        let (mn, mx) = if al < ah { (al, ah) } else { (ah, al) };
        let margin = 0.1 * (mx - mn);
        if !a.is_finite() || a < mn + margin || a > mx - margin {
            a = al + 0.5 * width;
        }
        let (fa, xa, ga) = try_at(obj, a);
        match fa {
            None => hi = (a, f64::INFINITY, f64::NAN),
            Some(fa) => {
                let da = dot(&ga, p);
                if !armijo(a, fa) || fa >= fl {
                    hi = (a, fa, da);
                } else {
                    if curvature(da) {
                        return Some(LinePoint { alpha: a, f: fa, x: xa, g: ga });
                    }
                    if fallback.as_ref().is_none_or(|b| fa < b.f) {
                        fallback = Some(LinePoint { alpha: a, f: fa, x: xa.clone(), g: ga.clone() });
                    }
                    if da * (ah - al) >= 0.0 {
                        hi = lo;
                    }
                    lo = (a, fa, da);
                }
            }
        }
        if (hi.0 - lo.0).abs() < 1e-16 * lo.0.abs().max(1e-16) {
            break;
        }
    }
    fallback
}

/// Minimises `f` from `theta0`. `callback` runs after every accepted step; an
/// error from it aborts the whole run.
pub fn minimize<F, C>(mut f: F, theta0: &[f64], opt: &Optimizer, log: RunLog, callback: C) -> Result<OptimizeResult>
where
    F: FnMut(&[f64], &mut [f64]) -> Result<f64>,
    C: FnMut(&Iterate) -> Result<Control>,
{
    match opt {
        Optimizer::Lbfgs(cfg) => {
            let mut callback = callback;
            let first = lbfgs(&mut f, theta0, cfg, log, &mut callback)?;
            match (&cfg.stall_fallback, first.reason) {
                (Some(acfg), StopReason::LineSearchFailed) => {
                    log::info!("line search failed at iteration {}, switching to Adam", first.iterations);
                    let mid = continue_with(first, &mut callback, |log, cb, x| adam(&mut f, x, acfg, log, cb))?;
                    if mid.reason == StopReason::Callback {
                        return Ok(mid);
                    }
                    let once = LbfgsConfig { stall_fallback: None, ..cfg.clone() };
                    continue_with(mid, &mut callback, |log, cb, x| lbfgs(&mut f, x, &once, log, cb))
                }
                _ => Ok(first),
            }
        }
        Optimizer::Adam(cfg) => adam(&mut f, theta0, cfg, log, callback),
    }
}

/// Runs another phase from `prev.theta`, numbering its iterations after the
/// previous ones and dropping its duplicate starting row.
fn continue_with<C, P>(prev: OptimizeResult, callback: &mut C, phase: P) -> Result<OptimizeResult>
where
    C: FnMut(&Iterate) -> Result<Control>,
    P: FnOnce(RunLog, &mut dyn FnMut(&Iterate) -> Result<Control>, &[f64]) -> Result<OptimizeResult>,
{
    let offset = prev.iterations;
    let evals = prev.evaluations;
    let fresh = RunLog { rows: Vec::new(), ..prev.log.clone() };
    let mut shifted = |it: &Iterate| {
        if it.iter == 0 {
            return Ok(Control::default());
        }
        callback(&Iterate { iter: it.iter + offset, evaluations: it.evaluations + evals, ..*it })
    };
    let next = phase(fresh, &mut shifted, &prev.theta)?;
    let mut log = prev.log;
    log.rows.extend(next.log.rows.into_iter().skip(1).map(|mut r| {
        r.iter += offset;
        r.evaluations += evals;
        r
    }));
    Ok(OptimizeResult { iterations: offset + next.iterations, evaluations: evals + next.evaluations, log, ..next })
}

fn validate_start(f0: Option<f64>) -> Result<f64> {
    f0.ok_or_else(|| Error::Optimizer("objective is not finite at the starting point".into()))
}

fn push_row(log: &mut RunLog, start: &Instant, it: &Iterate, extras: Vec<f64>) {
    log.rows.push(LogRow {
        iter: it.iter,
        value: it.value,
        grad_norm: norm(it.grad),
        step: it.step,
        evaluations: it.evaluations,
        seconds: if log.record_timing { start.elapsed().as_secs_f64() } else { 0.0 },
        extras,
    });
}

pub fn lbfgs<F, C>(
    f: &mut F,
    theta0: &[f64],
    cfg: &LbfgsConfig,
    mut log: RunLog,
    mut callback: C,
) -> Result<OptimizeResult>
where
    F: FnMut(&[f64], &mut [f64]) -> Result<f64>,
    C: FnMut(&Iterate) -> Result<Control>,
{
    if cfg.history == 0 || cfg.c1 <= 0.0 || cfg.c2 <= cfg.c1 || cfg.c2 >= 1.0 {
        return Err(Error::Optimizer("L-BFGS needs history ≥ 1 and 0 < c1 < c2 < 1".into()));
    }
    let start = Instant::now();
    let n = theta0.len();
    let mut obj = Counter { f, evals: 0 };
    let mut x = theta0.to_vec();
    let mut g = vec![0.0; n];
    let mut fx = validate_start(obj.eval(&x, &mut g))?;
    let mut mem: std::collections::VecDeque<(Vec<f64>, Vec<f64>, f64)> = std::collections::VecDeque::new();
    let it0 = Iterate { iter: 0, theta: &x, value: fx, grad: &g, step: 0.0, evaluations: obj.evals };
    let ctl = callback(&it0)?;
    push_row(&mut log, &start, &it0, ctl.extras);
    let mut reason = StopReason::MaxIterations;
    let mut iterations = 0;
    if ctl.stop {
        reason = StopReason::Callback;
    } else if norm(&g) <= cfg.grad_tol {
        reason = StopReason::GradientTolerance;
    } else {
        for k in 1..=cfg.max_iter {
            // two-loop recursion
            let mut q = g.clone();
            let mut alphas = Vec::with_capacity(mem.len());
            for (s, y, rho) in mem.iter().rev() {
                let a = rho * dot(s, &q);
                q.iter_mut().zip(y).for_each(|(qi, yi)| *qi -= a * yi);
                alphas.push(a);
            }
            if let Some((s, y, _)) = mem.back() {
                let gamma = dot(s, y) / dot(y, y);
                q.iter_mut().for_each(|v| *v *= gamma);
            }
            for ((s, y, rho), a) in mem.iter().zip(alphas.iter().rev()) {
                let b = rho * dot(y, &q);
                q.iter_mut().zip(s).for_each(|(qi, si)| *qi += (a - b) * si);
            }
            let mut p: Vec<f64> = q.iter().map(|v| -v).collect();
            if dot(&p, &g) >= 0.0 {
                mem.clear();
                p = g.iter().map(|v| -v).collect();
            }
            let alpha0 = if mem.is_empty() { (1.0 / norm(&g)).min(1.0) } else { 1.0 };
            let mut found = line_search(&mut obj, &x, fx, &g, &p, alpha0, cfg);
            if found.is_none() && !mem.is_empty() {
                mem.clear();
                p = g.iter().map(|v| -v).collect();
                found = line_search(&mut obj, &x, fx, &g, &p, (1.0 / norm(&g)).min(1.0), cfg);
            }
            let Some(lp) = found else {
                reason = StopReason::LineSearchFailed;
                break;
            };
            let s: Vec<f64> = lp.x.iter().zip(&x).map(|(a, b)| a - b).collect();
            let y: Vec<f64> = lp.g.iter().zip(&g).map(|(a, b)| a - b).collect();
            let sy = dot(&s, &y);
            if sy > 1e-12 * norm(&s) * norm(&y) {
                if mem.len() == cfg.history {
                    mem.pop_front();
                }
                mem.push_back((s, y, 1.0 / sy));
            }
            let df = fx - lp.f;
            x = lp.x;
            g = lp.g;
            fx = lp.f;
            iterations = k;
            let it =
                Iterate { iter: k, theta: &x, value: fx, grad: &g, step: lp.alpha * norm(&p), evaluations: obj.evals };
            let ctl = callback(&it)?;
            push_row(&mut log, &start, &it, ctl.extras);
            if ctl.stop {
                reason = StopReason::Callback;
                break;
            }
            if norm(&g) <= cfg.grad_tol {
                reason = StopReason::GradientTolerance;
                break;
            }
            if df <= cfg.f_tol * fx.abs().max(1.0) {
                reason = StopReason::Stalled;
                break;
            }
        }
    }
    Ok(OptimizeResult { grad_norm: norm(&g), theta: x, value: fx, iterations, evaluations: obj.evals, reason, log })
}

pub fn adam<F, C>(
    f: &mut F,
    theta0: &[f64],
    cfg: &AdamConfig,
    mut log: RunLog,
    mut callback: C,
) -> Result<OptimizeResult>
where
    F: FnMut(&[f64], &mut [f64]) -> Result<f64>,
    C: FnMut(&Iterate) -> Result<Control>,
{
    if cfg.lr <= 0.0 || !(0.0..1.0).contains(&cfg.beta1) || !(0.0..1.0).contains(&cfg.beta2) {
        return Err(Error::Optimizer("Adam needs lr > 0 and betas in [0, 1)".into()));
    }
    let start = Instant::now();
    let n = theta0.len();
    let mut obj = Counter { f, evals: 0 };
    let mut x = theta0.to_vec();
    let mut g = vec![0.0; n];
    let mut fx = validate_start(obj.eval(&x, &mut g))?;
    let (mut m, mut v) = (vec![0.0; n], vec![0.0; n]);
    let it0 = Iterate { iter: 0, theta: &x, value: fx, grad: &g, step: 0.0, evaluations: obj.evals };
    let ctl = callback(&it0)?;
    push_row(&mut log, &start, &it0, ctl.extras);
    let mut reason = StopReason::MaxIterations;
    let mut iterations = 0;
    if ctl.stop {
        reason = StopReason::Callback;
    }
    for k in 1..=cfg.max_iter {
        if reason == StopReason::Callback {
            break;
        }
        if norm(&g) <= cfg.grad_tol {
            reason = StopReason::GradientTolerance;
            break;
        }
        let (b1, b2) = (1.0 - cfg.beta1.powi(k as i32), 1.0 - cfg.beta2.powi(k as i32));
        let mut step = vec![0.0; n];
        for i in 0..n {
            m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
            v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
            step[i] = -cfg.lr * (m[i] / b1) / ((v[i] / b2).sqrt() + cfg.eps);
        }
        // shrink the step until the objective is defined again
        let mut trial = None;
        for _ in 0..30 {
            let xt: Vec<f64> = x.iter().zip(&step).map(|(a, b)| a + b).collect();
            let mut gt = vec![0.0; n];
            if let Some(ft) = obj.eval(&xt, &mut gt) {
                trial = Some((xt, gt, ft));
                break;
            }
            step.iter_mut().for_each(|s| *s *= 0.5);
        }
        let Some((xt, gt, ft)) = trial else {
            reason = StopReason::LineSearchFailed;
            break;
        };
        x = xt;
        g = gt;
        fx = ft;
        iterations = k;
        let it = Iterate { iter: k, theta: &x, value: fx, grad: &g, step: norm(&step), evaluations: obj.evals };
        let ctl = callback(&it)?;
        push_row(&mut log, &start, &it, ctl.extras);
        if ctl.stop {
            reason = StopReason::Callback;
        }
    }
    Ok(OptimizeResult { grad_norm: norm(&g), theta: x, value: fx, iterations, evaluations: obj.evals, reason, log })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rosenbrock(x: &[f64], g: &mut [f64]) -> Result<f64> {
        let mut f = 0.0;
        for i in 0..x.len() - 1 {
            let a = 1.0 - x[i];
            let b = x[i + 1] - x[i] * x[i];
            f += a * a + 100.0 * b * b;
            g[i] += -2.0 * a - 400.0 * x[i] * b;
            g[i + 1] += 200.0 * b;
        }
        Ok(f)
    }

    fn none(_: &Iterate) -> Result<Control> {
        Ok(Control::default())
    }

    #[test]
    fn lbfgs_solves_rosenbrock() {
        let r = minimize(rosenbrock, &[-1.2, 1.0, -0.5, 0.8], &Optimizer::default(), RunLog::new(&[], false), none)
            .unwrap();
        assert!(r.converged(), "{:?}", r.reason);
        assert!(r.theta.iter().all(|v| (v - 1.0).abs() < 1e-6), "{:?}", r.theta);
        assert!(r.iterations < 200);
        // monotone decrease
        for w in r.log.rows.windows(2) {
            assert!(w[1].value <= w[0].value);
        }
    }

    #[test]
    fn lbfgs_quadratic_in_few_steps() {
        let diag = [1.0, 10.0, 100.0];
        let f = |x: &[f64], g: &mut [f64]| {
            let mut v = 0.0;
            for i in 0..3 {
                v += 0.5 * diag[i] * x[i] * x[i];
                g[i] = diag[i] * x[i];
            }
            Ok(v)
        };
        let r = minimize(f, &[1.0, 1.0, 1.0], &Optimizer::default(), RunLog::new(&[], false), none).unwrap();
        assert_eq!(r.reason, StopReason::GradientTolerance);
        assert!(r.iterations <= 20);
    }

    #[test]
    fn line_search_backs_off_from_undefined_region() {
        // log barrier: undefined for x ≤ 0
        let f = |x: &[f64], g: &mut [f64]| {
            if x[0] <= 0.0 {
                return Err(Error::Domain("outside".into()));
            }
            g[0] = 1.0 - 1.0 / x[0];
            Ok(x[0] - x[0].ln())
        };
        let r = minimize(f, &[5.0], &Optimizer::default(), RunLog::new(&[], false), none).unwrap();
        assert!((r.theta[0] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn adam_and_callback_abort() {
        let f = |x: &[f64], g: &mut [f64]| {
            g[0] = 2.0 * (x[0] - 3.0);
            Ok((x[0] - 3.0).powi(2))
        };
        let opt = Optimizer::Adam(AdamConfig { lr: 0.1, max_iter: 3000, grad_tol: 1e-6, ..Default::default() });
        let r = minimize(f, &[0.0], &opt, RunLog::new(&["x"], false), |it| {
            Ok(Control { extras: vec![it.theta[0]], stop: false })
        })
        .unwrap();
        assert!((r.theta[0] - 3.0).abs() < 1e-4);
        assert!(r.log.to_csv().starts_with("iter,value,grad_norm,step,evals,x\n"));
        let abort = minimize(f, &[0.0], &Optimizer::default(), RunLog::new(&[], false), |it| {
            if it.iter >= 1 {
                Err(Error::Optimizer("stop".into()))
            } else {
                Ok(Control::default())
            }
        });
        assert!(abort.is_err());
    }

    #[test]
    fn stall_falls_back_to_adam_then_retries() {
        // the reported gradient points uphill, so every line search fails
        let f = |x: &[f64], g: &mut [f64]| {
            g[0] = -2.0 * x[0];
            Ok(x[0] * x[0])
        };
        let mut seen = Vec::new();
        let r = minimize(f, &[1.0], &Optimizer::default(), RunLog::new(&[], false), |it| {
            seen.push(it.iter);
            Ok(Control::default())
        })
        .unwrap();
        assert_eq!(r.reason, StopReason::LineSearchFailed);
        assert_eq!(r.iterations, 200);
        let iters: Vec<usize> = r.log.rows.iter().map(|r| r.iter).collect();
        assert_eq!(iters, (0..=200).collect::<Vec<_>>());
        assert_eq!(seen, iters);
        let plain = LbfgsConfig { stall_fallback: None, ..LbfgsConfig::default() };
        let r = minimize(f, &[1.0], &Optimizer::Lbfgs(plain), RunLog::new(&[], false), none).unwrap();
        assert_eq!(r.iterations, 0);
    }
}
