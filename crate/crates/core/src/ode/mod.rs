//! Adaptive explicit integration with Hermite dense output and event location.

mod pairs;
mod root;

pub use pairs::{cash_karp, dopri5, rkf45, EmbeddedPair, PairRegistry, Tableau, Trial};
pub use root::{refine_root, RootTolerance};

use crate::error::{Error, Result};

/// `f(t, y, dy)` writing the derivative into `dy`.
pub type Rhs<'a> = dyn Fn(f64, &[f64], &mut [f64]) + 'a;

pub type EventFn<'a> = dyn Fn(f64, &[f64]) -> f64 + 'a;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Controls {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_step: f64,
    pub min_step: f64,
    pub max_steps: usize,
    pub initial_step: Option<f64>,
}

impl Default for Controls {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            abs_tol: 1e-12,
            max_step: 0.05,
            min_step: 1e-14,
            max_steps: 1_000_000,
            initial_step: None,
        }
    }
}

impl Controls {
    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0 && self.abs_tol > 0.0) {
            return Err(Error::Config("rel_tol and abs_tol must be > 0".into()));
        }
        if !(self.min_step > 0.0 && self.min_step < self.max_step) {
            return Err(Error::Config("need 0 < min_step < max_step".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    Any,
    Rising,
    Falling,
}

impl Direction {
    fn crossed(self, before: f64, after: f64) -> bool {
        let rising = before < 0.0 && after >= 0.0;
        let falling = before > 0.0 && after <= 0.0;
        match self {
            Direction::Any => rising || falling,
            Direction::Rising => rising,
            Direction::Falling => falling,
        }
    }
}

pub struct Event<'a> {
    pub func: Box<EventFn<'a>>,
    pub direction: Direction,
    pub terminal: bool,
}

impl<'a> Event<'a> {
    pub fn terminal(direction: Direction, func: impl Fn(f64, &[f64]) -> f64 + 'a) -> Self {
        Self {
            func: Box::new(func),
            direction,
            terminal: true,
        }
    }

    pub fn mark(direction: Direction, func: impl Fn(f64, &[f64]) -> f64 + 'a) -> Self {
        Self {
            func: Box::new(func),
            direction,
            terminal: false,
        }
    }
}

pub struct IvpProblem<'a> {
    pub rhs: &'a Rhs<'a>,
    pub t0: f64,
    pub y0: Vec<f64>,
    pub t_max: f64,
    pub events: Vec<Event<'a>>,
    pub controls: Controls,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Termination {
    ReachedTMax,
    Event { index: usize, t: f64 },
    StepUnderflow { t: f64 },
    StepBudget { t: f64 },
}

/// Accepted steps of one integration with their derivatives.
#[derive(Clone, Debug)]
pub struct SampledArc {
    pub t: Vec<f64>,
    pub y: Vec<Vec<f64>>,
    pub dy: Vec<Vec<f64>>,
    pub termination: Termination,
    /// Non-terminal events as `(index, t)`.
    pub marks: Vec<(usize, f64)>,
    pub rejected: usize,
}

impl SampledArc {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn t_end(&self) -> f64 {
        *self.t.last().expect("arc has the initial sample")
    }

    pub fn y_end(&self) -> &[f64] {
        self.y.last().expect("arc has the initial sample")
    }

    /// Index `i` with `t[i] <= t <= t[i+1]`.
    pub fn segment(&self, t: f64) -> Result<usize> {
        let (lo, hi) = (self.t[0], self.t_end());
        if !(t >= lo && t <= hi) {
            return Err(Error::OutOfRange { value: t, lo, hi });
        }
        let i = self.t.partition_point(|&x| x <= t).saturating_sub(1);
        Ok(i.min(self.len().saturating_sub(2)))
    }

    /// Cubic Hermite interpolation between accepted steps.
    pub fn interpolate(&self, t: f64) -> Result<Vec<f64>> {
        if self.len() == 1 {
            return if t == self.t[0] {
                Ok(self.y[0].clone())
            } else {
                Err(Error::OutOfRange {
                    value: t,
                    lo: self.t[0],
                    hi: self.t[0],
                })
            };
        }
        let i = self.segment(t)?;
        let (t0, t1) = (self.t[i], self.t[i + 1]);
        let h = t1 - t0;
        let th = (t - t0) / h;
        let h00 = (1.0 + 2.0 * th) * (1.0 - th) * (1.0 - th);
        let h10 = th * (1.0 - th) * (1.0 - th);
        let h01 = th * th * (3.0 - 2.0 * th);
        let h11 = th * th * (th - 1.0);
        Ok((0..self.y[i].len())
            .map(|j| {
                h00 * self.y[i][j]
                    + h10 * h * self.dy[i][j]
                    + h01 * self.y[i + 1][j]
                    + h11 * h * self.dy[i + 1][j]
            })
            .collect())
    }
}

fn all_finite(v: &[f64]) -> bool {
    v.iter().all(|x| x.is_finite())
}

fn error_norm(err: &[f64], y0: &[f64], y1: &[f64], c: &Controls) -> f64 {
    err.iter()
        .zip(y0.iter().zip(y1))
        .map(|(e, (a, b))| e.abs() / (c.abs_tol + c.rel_tol * a.abs().max(b.abs())))
        .fold(0.0, f64::max)
}

fn initial_step(p: &IvpProblem, f0: &[f64], order: usize) -> f64 {
    let c = &p.controls;
    let scale: Vec<f64> = p.y0.iter().map(|y| c.abs_tol + c.rel_tol * y.abs()).collect();
    let norm = |v: &[f64]| v.iter().zip(&scale).map(|(x, s)| (x / s).abs()).fold(0.0, f64::max);
    let (d0, d1) = (norm(&p.y0), norm(f0));
    let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    let h0 = h0.min(c.max_step);
    let y1: Vec<f64> = p.y0.iter().zip(f0).map(|(y, f)| y + h0 * f).collect();
    let mut f1 = vec![0.0; y1.len()];
    (p.rhs)(p.t0 + h0, &y1, &mut f1);
    if !all_finite(&f1) {
        return h0 * 1e-3;
    }
    let diff: Vec<f64> = f1.iter().zip(f0).map(|(a, b)| a - b).collect();
    let d2 = norm(&diff) / h0;
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(1.0 / order as f64)
    };
    (100.0 * h0).min(h1)
}

/// One step of size `h` from `(t, y)`; used to evaluate the solution at
/// interior points to full method order.
pub fn substep(pair: &dyn EmbeddedPair, rhs: &Rhs, t: f64, y: &[f64], f0: &[f64], h: f64) -> Vec<f64> {
    if h == 0.0 {
        return y.to_vec();
    }
    pair.step(rhs, t, y, f0, h).y
}

pub fn integrate(p: &IvpProblem, pair: &dyn EmbeddedPair) -> Result<SampledArc> {
    let c = p.controls;
    c.validate()?;
    if !(p.t_max > p.t0) {
        return Err(Error::Config(format!("t_max {} must exceed t0 {}", p.t_max, p.t0)));
    }
    let n = p.y0.len();
    let mut f = vec![0.0; n];
    (p.rhs)(p.t0, &p.y0, &mut f);
    if !all_finite(&f) || !all_finite(&p.y0) {
        return Err(Error::NonFiniteRhs { t: p.t0 });
    }
    let q = pair.error_order() as f64;
    let (alpha, beta) = (0.7 / q, 0.4 / q);

    let mut arc = SampledArc {
        t: vec![p.t0],
        y: vec![p.y0.clone()],
        dy: vec![f.clone()],
        termination: Termination::ReachedTMax,
        marks: Vec::new(),
        rejected: 0,
    };
    let mut t = p.t0;
    let mut y = p.y0.clone();
    let mut g_prev: Vec<f64> = p.events.iter().map(|e| (e.func)(t, &y)).collect();
    let mut h = c
        .initial_step
        .unwrap_or_else(|| initial_step(p, &f, pair.error_order()))
        .clamp(c.min_step, c.max_step);
    let mut err_prev: f64 = 1e-4;
    let mut attempts = 0usize;

    loop {
        if t >= p.t_max {
            arc.termination = Termination::ReachedTMax;
            break;
        }
        if attempts >= c.max_steps {
            arc.termination = Termination::StepBudget { t };
            break;
        }
        attempts += 1;
        let last = t + h >= p.t_max;
        if last {
            h = p.t_max - t;
        }
        let trial = pair.step(p.rhs, t, &y, &f, h);
        let err = if all_finite(&trial.y) && all_finite(&trial.err) {
            error_norm(&trial.err, &y, &trial.y, &c)
        } else {
            f64::INFINITY
        };
        let f_end = if err <= 1.0 {
            let fe = trial.f_end.clone().unwrap_or_else(|| {
                let mut fe = vec![0.0; n];
                (p.rhs)(t + h, &trial.y, &mut fe);
                fe
            });
            Some(fe).filter(|v| all_finite(v))
        } else {
            None
        };
        let Some(f_new) = f_end else {
            arc.rejected += 1;
            let shrink = if err.is_finite() {
                (0.9 * err.powf(-1.0 / q)).clamp(0.1, 0.9)
            } else {
                0.25
            };
            h *= shrink;
            if h < c.min_step {
                arc.termination = Termination::StepUnderflow { t };
                break;
            }
            continue;
        };
        let t_new = if last { p.t_max } else { t + h };

        // events on this step
        let g_new: Vec<f64> = p.events.iter().map(|e| (e.func)(t_new, &trial.y)).collect();
        let mut hits: Vec<(f64, usize)> = Vec::new();
        for (i, e) in p.events.iter().enumerate() {
            if e.direction.crossed(g_prev[i], g_new[i]) {
                let tol = RootTolerance {
                    x_tol: 1e-12 * t.abs().max(1.0),
                    f_tol: 0.0,
                    max_iter: 200,
                };
                let theta = refine_root(
                    |th| {
                        let ys = substep(pair, p.rhs, t, &y, &f, th);
                        (e.func)(t + th, &ys)
                    },
                    0.0,
                    t_new - t,
                    tol,
                )?;
                hits.push((t + theta, i));
            }
        }
        hits.sort_by(|a, b| a.0.total_cmp(&b.0));
        let stop = hits.iter().find(|(_, i)| p.events[*i].terminal).copied();
        for &(te, i) in &hits {
            if stop.is_some_and(|(ts, _)| te > ts) {
                break;
            }
            if !p.events[i].terminal {
                arc.marks.push((i, te));
            }
        }
        if let Some((ts, i)) = stop {
            let ys = substep(pair, p.rhs, t, &y, &f, ts - t);
            let mut fs = vec![0.0; n];
            (p.rhs)(ts, &ys, &mut fs);
            if ts > t {
                arc.t.push(ts);
                arc.y.push(ys);
                arc.dy.push(fs);
            }
            arc.termination = Termination::Event { index: i, t: ts };
            break;
        }

        t = t_new;
        y = trial.y;
        f = f_new;
        g_prev = g_new;
        arc.t.push(t);
        arc.y.push(y.clone());
        arc.dy.push(f.clone());

        let err_c = err.max(1e-10);
        let factor = (0.9 * err_c.powf(-alpha) * err_prev.powf(beta)).clamp(0.2, 5.0);
        err_prev = err_c;
        h = (h * factor).clamp(c.min_step, c.max_step);
    }
    Ok(arc)
}
