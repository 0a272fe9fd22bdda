//! Explicit embedded Runge–Kutta pairs, selectable by name.

use std::collections::BTreeMap;
use std::sync::Arc;

use super::Rhs;
use crate::error::{Error, Result};

/// Result of one trial step.
pub struct Trial {
    pub y: Vec<f64>,
    pub err: Vec<f64>,
    /// `f(t + h, y)` when the pair computes it for free.
    pub f_end: Option<Vec<f64>>,
}

pub trait EmbeddedPair: Send + Sync {
    fn name(&self) -> &'static str;

    /// Order of the lower-order member plus one; drives the step controller.
    fn error_order(&self) -> usize;

    fn step(&self, rhs: &Rhs, t: f64, y: &[f64], f0: &[f64], h: f64) -> Trial;
}

/// Butcher tableau with a propagating weight row and an embedded one.
#[derive(Clone, Debug)]
pub struct Tableau {
    pub name: &'static str,
    pub c: Vec<f64>,
    pub a: Vec<Vec<f64>>,
    pub b: Vec<f64>,
    pub b_hat: Vec<f64>,
    pub error_order: usize,
    /// Last stage is evaluated at the propagated solution.
    pub fsal: bool,
}

impl EmbeddedPair for Tableau {
    fn name(&self) -> &'static str {
        self.name
    }

    fn error_order(&self) -> usize {
        self.error_order
    }

    fn step(&self, rhs: &Rhs, t: f64, y: &[f64], f0: &[f64], h: f64) -> Trial {
        let n = y.len();
        let stages = self.c.len();
        let mut k: Vec<Vec<f64>> = Vec::with_capacity(stages);
        k.push(f0.to_vec());
        let mut tmp = vec![0.0; n];
        for i in 1..stages {
            for (j, t_j) in tmp.iter_mut().enumerate() {
                let mut acc = 0.0;
                for (aij, kj) in self.a[i - 1].iter().zip(&k) {
                    acc += aij * kj[j];
                }
                *t_j = y[j] + h * acc;
            }
            let mut ki = vec![0.0; n];
            rhs(t + self.c[i] * h, &tmp, &mut ki);
            k.push(ki);
        }
        let mut y_new = vec![0.0; n];
        let mut err = vec![0.0; n];
        for j in 0..n {
            let (mut hi, mut lo) = (0.0, 0.0);
            for ((b, b_hat), ki) in self.b.iter().zip(&self.b_hat).zip(&k) {
                hi += b * ki[j];
                lo += b_hat * ki[j];
            }
            y_new[j] = y[j] + h * hi;
            err[j] = h * (hi - lo);
        }
        let f_end = if self.fsal { k.pop() } else { None };
        Trial {
            y: y_new,
            err,
            f_end,
        }
    }
}

pub fn dopri5() -> Tableau {
    Tableau {
        name: "dopri5",
        c: vec![0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0],
        a: vec![
            vec![0.2],
            vec![3.0 / 40.0, 9.0 / 40.0],
            vec![44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0],
            vec![19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0],
            vec![
                9017.0 / 3168.0,
                -355.0 / 33.0,
                46732.0 / 5247.0,
                49.0 / 176.0,
                -5103.0 / 18656.0,
            ],
            vec![
                35.0 / 384.0,
                0.0,
                500.0 / 1113.0,
                125.0 / 192.0,
                -2187.0 / 6784.0,
                11.0 / 84.0,
            ],
        ],
        b: vec![
            35.0 / 384.0,
            0.0,
            500.0 / 1113.0,
            125.0 / 192.0,
            -2187.0 / 6784.0,
            11.0 / 84.0,
            0.0,
        ],
        b_hat: vec![
            5179.0 / 57600.0,
            0.0,
            7571.0 / 16695.0,
            393.0 / 640.0,
            -92097.0 / 339200.0,
            187.0 / 2100.0,
            1.0 / 40.0,
        ],
        error_order: 5,
        fsal: true,
    }
}

pub fn rkf45() -> Tableau {
    Tableau {
        name: "rkf45",
        c: vec![0.0, 0.25, 0.375, 12.0 / 13.0, 1.0, 0.5],
        a: vec![
            vec![0.25],
            vec![3.0 / 32.0, 9.0 / 32.0],
            vec![1932.0 / 2197.0, -7200.0 / 2197.0, 7296.0 / 2197.0],
            vec![439.0 / 216.0, -8.0, 3680.0 / 513.0, -845.0 / 4104.0],
            vec![-8.0 / 27.0, 2.0, -3544.0 / 2565.0, 1859.0 / 4104.0, -11.0 / 40.0],
        ],
        b: vec![
            16.0 / 135.0,
            0.0,
            6656.0 / 12825.0,
            28561.0 / 56430.0,
            -9.0 / 50.0,
            2.0 / 55.0,
        ],
        b_hat: vec![25.0 / 216.0, 0.0, 1408.0 / 2565.0, 2197.0 / 4104.0, -0.2, 0.0],
        error_order: 5,
        fsal: false,
    }
}

pub fn cash_karp() -> Tableau {
    Tableau {
        name: "cash_karp",
        c: vec![0.0, 0.2, 0.3, 0.6, 1.0, 0.875],
        a: vec![
            vec![0.2],
            vec![3.0 / 40.0, 9.0 / 40.0],
            vec![0.3, -0.9, 1.2],
            vec![-11.0 / 54.0, 2.5, -70.0 / 27.0, 35.0 / 27.0],
            vec![
                1631.0 / 55296.0,
                175.0 / 512.0,
                575.0 / 13824.0,
                44275.0 / 110592.0,
                253.0 / 4096.0,
            ],
        ],
        b: vec![37.0 / 378.0, 0.0, 250.0 / 621.0, 125.0 / 594.0, 0.0, 512.0 / 1771.0],
        b_hat: vec![
            2825.0 / 27648.0,
            0.0,
            18575.0 / 48384.0,
            13525.0 / 55296.0,
            277.0 / 14336.0,
            0.25,
        ],
        error_order: 5,
        fsal: false,
    }
}

pub struct PairRegistry {
    pairs: BTreeMap<&'static str, Arc<dyn EmbeddedPair>>,
}

impl PairRegistry {
    pub fn empty() -> Self {
        Self {
            pairs: BTreeMap::new(),
        }
    }

    pub fn builtin() -> Self {
        let mut reg = Self::empty();
        reg.register(Arc::new(dopri5()));
        reg.register(Arc::new(rkf45()));
        reg.register(Arc::new(cash_karp()));
        reg
    }

    pub fn register(&mut self, pair: Arc<dyn EmbeddedPair>) {
        self.pairs.insert(pair.name(), pair);
    }

    pub fn names(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.pairs.keys().copied()
    }

    pub fn get(&self, name: &str) -> Result<Arc<dyn EmbeddedPair>> {
        self.pairs.get(name).cloned().ok_or_else(|| {
            let known: Vec<_> = self.names().collect();
            Error::Config(format!("unknown integrator '{name}' (known: {})", known.join(", ")))
        })
    }
}

impl Default for PairRegistry {
    fn default() -> Self {
        Self::builtin()
    }
}
