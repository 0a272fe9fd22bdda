use std::fmt;

use super::{Claim, RadialState, StoredEnergy};

pub const GRID_MIN: f64 = 1e-6;
pub const GRID_MAX: f64 = 1e6;
const POINTS_PER_DECADE: usize = 20;
const LIMIT_REL_TOL: f64 = 1e-3;
const NU_FLOOR: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq)]
pub enum Verdict {
    Pass,
    Fail { witness: String },
    NotApplicable { reason: String },
}

impl Verdict {
    pub fn passed(&self) -> bool {
        matches!(self, Verdict::Pass)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    ClosedForm,
    Grid,
    Mixed,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::ClosedForm => "closed-form",
            Method::Grid => "grid",
            Method::Mixed => "closed-form+grid",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct HypothesisEntry {
    pub id: &'static str,
    pub statement: &'static str,
    pub verdict: Verdict,
    pub method: Method,
}

/// Verdicts for H0–H8 plus the cached constants they produce.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct HypothesisReport {
    pub entries: Vec<HypothesisEntry>,
    pub dim: usize,
    pub gamma: Option<f64>,
    pub gamma0: Option<f64>,
    pub rest_volume: Option<f64>,
    pub nu: f64,
    pub grid: (f64, f64),
    pub points_per_decade: usize,
}

impl HypothesisReport {
    pub fn entry(&self, id: &str) -> Option<&HypothesisEntry> {
        self.entries.iter().find(|e| e.id == id)
    }

    pub fn passed(&self, id: &str) -> bool {
        self.entry(id).is_some_and(|e| e.verdict.passed())
    }

    /// True when every listed hypothesis passes.
    pub fn all_pass(&self, ids: &[&str]) -> bool {
        ids.iter().all(|id| self.passed(id))
    }

    pub fn first_failure(&self, ids: &[&str]) -> Option<&HypothesisEntry> {
        ids.iter()
            .filter_map(|id| self.entry(id))
            .find(|e| !e.verdict.passed())
    }
}

fn opt(x: Option<f64>) -> String {
    x.map_or_else(|| "undetermined".to_string(), |v| format!("{v:.12}"))
}

impl fmt::Display for HypothesisReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "dimension d = {}", self.dim)?;
        writeln!(
            f,
            "grid: [{:e}, {:e}], {} points per decade",
            self.grid.0, self.grid.1, self.points_per_decade
        )?;
        for e in &self.entries {
            let (tag, extra) = match &e.verdict {
                Verdict::Pass => ("pass", String::new()),
                Verdict::Fail { witness } => ("FAIL", format!(" witness: {witness}")),
                Verdict::NotApplicable { reason } => ("n/a", format!(" ({reason})")),
            };
            writeln!(f, "{:<3} {:<5} [{}] {}{}", e.id, tag, e.method, e.statement, extra)?;
        }
        writeln!(f, "gamma = {}", opt(self.gamma))?;
        writeln!(f, "gamma0 = {}", opt(self.gamma0))?;
        writeln!(f, "H = {}", opt(self.rest_volume))?;
        write!(f, "nu = {:.12}", self.nu)
    }
}

pub(crate) fn grid() -> Vec<f64> {
    let decades = (GRID_MAX / GRID_MIN).log10().round() as usize;
    let n = decades * POINTS_PER_DECADE;
    (0..=n)
        .map(|i| GRID_MIN * 10f64.powf(i as f64 / POINTS_PER_DECADE as f64))
        .collect()
}

/// First grid point where `pred` fails, if any.
fn scan(xs: &[f64], pred: impl Fn(f64) -> bool) -> Option<f64> {
    xs.iter().copied().find(|&x| !pred(x))
}

/// `lim g'(x)/x^{d−2}`; `Some(±∞)` for unbounded growth.
pub(crate) fn growth_limit(e: &StoredEnergy) -> Option<f64> {
    let k = e.dim() as f64 - 2.0;
    if let Some(l) = e.g().derivative_growth(k) {
        return Some(l);
    }
    let ratio = |x: f64| e.g().first(x) / x.powf(k);
    let (r1, r0) = (ratio(GRID_MAX), ratio(GRID_MAX / 10.0));
    if !r1.is_finite() || !r0.is_finite() {
        return None;
    }
    if (r1 - r0).abs() <= LIMIT_REL_TOL * r1.abs().max(1.0) {
        Some(r1)
    } else if r1.abs() > r0.abs() {
        Some(r1.signum() * f64::INFINITY)
    } else {
        None
    }
}

pub(crate) fn nu_lower_bound(e: &StoredEnergy) -> f64 {
    let h_convex = e.h().closed_form(Claim::SecondPositive) == Some(true);
    if let (true, Some(floor)) = (h_convex, e.g().curvature_floor()) {
        if floor > 0.0 {
            return floor.sqrt();
        }
    }
    let min = grid()
        .into_iter()
        .filter_map(|x| e.phi11(RadialState::diagonal(x)).ok())
        .fold(f64::INFINITY, f64::min);
    if min.is_finite() && min > 0.0 {
        min.sqrt().max(NU_FLOOR)
    } else {
        NU_FLOOR
    }
}

fn verdict(fail: Option<String>) -> Verdict {
    match fail {
        None => Verdict::Pass,
        Some(witness) => Verdict::Fail { witness },
    }
}

pub fn check_hypotheses(e: &StoredEnergy) -> HypothesisReport {
    let xs = grid();
    let (g, h) = (e.g(), e.h());
    let d = e.dim() as i32;
    let mut entries = Vec::with_capacity(9);

    // H0
    let fail = if !g.defined_at_zero() {
        Some("g is not C^3 at x = 0".to_string())
    } else if !g.eval(0.0).iter().all(|v| v.is_finite()) {
        Some("g non-finite at x = 0".to_string())
    } else {
        scan(&xs, |x| {
            g.eval(x).iter().all(|v| v.is_finite()) && h.eval(x).iter().all(|v| v.is_finite())
        })
        .map(|x| format!("non-finite derivative at x = {x:e}"))
    };
    entries.push(HypothesisEntry {
        id: "H0",
        statement: "g in C3[0,inf), h in C3(0,inf)",
        verdict: verdict(fail),
        method: Method::Mixed,
    });

    // H1
    let mut method = Method::ClosedForm;
    let mut fail = None;
    for (name, f, at_zero) in [("g", g, g.defined_at_zero()), ("h", h, false)] {
        if fail.is_some() {
            break;
        }
        fail = match f.closed_form(Claim::SecondPositive) {
            Some(true) => None,
            Some(false) => Some(format!("{name}'' vanishes identically")),
            None => {
                method = Method::Mixed;
                let zero = if at_zero && !(f.second(0.0) > 0.0) {
                    Some(0.0)
                } else {
                    None
                };
                zero.or_else(|| scan(&xs, |x| f.second(x) > 0.0))
                    .map(|x| format!("{name}''({x:e}) = {:e}", f.second(x)))
            }
        };
    }
    if fail.is_none() {
        method = Method::Mixed;
        let head = &xs[..=POINTS_PER_DECADE];
        let tail = &xs[xs.len() - 1 - POINTS_PER_DECADE..];
        let h0 = |x: f64| h.eval(x)[0];
        if head.windows(2).any(|w| !(h0(w[0]) > h0(w[1]))) {
            fail = Some(format!("h not increasing toward x -> 0 (h({GRID_MIN:e}) = {:e})", h0(GRID_MIN)));
        } else if tail.windows(2).any(|w| !(h0(w[0]) < h0(w[1]))) {
            fail = Some(format!("h not increasing toward x -> inf (h({GRID_MAX:e}) = {:e})", h0(GRID_MAX)));
        }
    }
    entries.push(HypothesisEntry {
        id: "H1",
        statement: "g'' > 0, h'' > 0, h -> +inf at 0 and inf",
        verdict: verdict(fail),
        method,
    });

    // H2
    let mut method = Method::ClosedForm;
    let fail = match g.closed_form(Claim::ThirdNonPositive) {
        Some(true) => None,
        Some(false) => Some("g''' > 0".to_string()),
        None => {
            method = Method::Grid;
            scan(&xs, |x| g.eval(x)[3] <= 0.0).map(|x| format!("g'''({x:e}) = {:e}", g.eval(x)[3]))
        }
    }
    .or_else(|| match h.closed_form(Claim::ThirdNegative) {
        Some(true) => None,
        Some(false) => Some("h''' vanishes identically".to_string()),
        None => {
            method = if method == Method::Grid { Method::Grid } else { Method::Mixed };
            scan(&xs, |x| h.eval(x)[3] < 0.0).map(|x| format!("h'''({x:e}) = {:e}", h.eval(x)[3]))
        }
    });
    entries.push(HypothesisEntry {
        id: "H2",
        statement: "g''' <= 0, h''' < 0",
        verdict: verdict(fail),
        method,
    });

    // H3
    let k = d - 2;
    let method = if g.derivative_growth(k as f64).is_some() {
        Method::ClosedForm
    } else {
        Method::Grid
    };
    let v = match growth_limit(e) {
        Some(l) if l.is_finite() && l >= 0.0 => Verdict::Pass,
        Some(l) => Verdict::Fail {
            witness: format!(
                "g'(x)/x^{k} -> {l} (g'({GRID_MAX:e})/{GRID_MAX:e}^{k} = {:e})",
                g.first(GRID_MAX) / GRID_MAX.powi(k)
            ),
        },
        None => Verdict::Fail {
            witness: format!(
                "g'(x)/x^{k} does not settle (value {:e} at x = {GRID_MAX:e})",
                g.first(GRID_MAX) / GRID_MAX.powi(k)
            ),
        },
    };
    entries.push(HypothesisEntry {
        id: "H3",
        statement: "lim g'(x)/x^(d-2) = gamma >= 0",
        verdict: v,
        method,
    });

    // H4
    let (v, method) = match h.derivative_limits() {
        Some((lo, hi)) => {
            let v = if lo == f64::NEG_INFINITY && hi == f64::INFINITY {
                Verdict::Pass
            } else {
                Verdict::Fail {
                    witness: format!("h'(0+) = {lo}, h'(inf) = {hi}"),
                }
            };
            (v, Method::ClosedForm)
        }
        None => {
            let (lo, hi) = (h.first(GRID_MIN), h.first(GRID_MAX));
            let head_trend = h.first(GRID_MIN * 10.0) > lo;
            let tail_trend = h.first(GRID_MAX / 10.0) < hi;
            let v = if lo < 0.0 && hi > 0.0 && head_trend && tail_trend {
                Verdict::Pass
            } else {
                Verdict::Fail {
                    witness: format!("h'({GRID_MIN:e}) = {lo:e}, h'({GRID_MAX:e}) = {hi:e}"),
                }
            };
            (v, Method::Grid)
        }
    };
    entries.push(HypothesisEntry {
        id: "H4",
        statement: "h' -> -inf at 0+, h' -> +inf at inf",
        verdict: v,
        method,
    });

    // H5
    let fail = scan(&xs, |x| e.phi11(RadialState::diagonal(x)).is_ok_and(|p| p > 0.0)).map(|x| {
        format!(
            "Phi11({x:e}, {x:e}) = {:e}",
            e.phi11(RadialState::diagonal(x)).unwrap_or(f64::NAN)
        )
    });
    let v = match fail {
        Some(w) => Verdict::Fail { witness: w },
        None if e.nu() > NU_FLOOR => Verdict::Pass,
        None => Verdict::Fail {
            witness: format!("nu floored at {NU_FLOOR:e}"),
        },
    };
    entries.push(HypothesisEntry {
        id: "H5",
        statement: "Phi11(x,x) >= nu^2 > 0",
        verdict: v,
        method: Method::Mixed,
    });

    // H6
    let fail = scan(&xs, |x| e.chi_prime(x) > 0.0)
        .map(|x| format!("chi'({x:e}) = {:e}", e.chi_prime(x)))
        .or_else(|| {
            scan(&xs[..=POINTS_PER_DECADE], |x| h.first(x) * x < 0.0)
                .map(|x| format!("h'(x)x = {:e} at x = {x:e}", h.first(x) * x))
        });
    entries.push(HypothesisEntry {
        id: "H6",
        statement: "chi' > 0, limsup h'(x)x < 0 at 0+",
        verdict: verdict(fail),
        method: Method::Grid,
    });

    // H7
    let be = |x: f64| {
        let [_, g1, g2, _] = g.eval(x);
        g2 * x + g1
    };
    let fail = scan(&xs, |x| be(x) > 0.0).map(|x| format!("(g'x)'({x:e}) = {:e}", be(x)));
    entries.push(HypothesisEntry {
        id: "H7",
        statement: "(g'(x)x)' > 0",
        verdict: verdict(fail),
        method: Method::Grid,
    });

    // H8
    let ddg = |x: f64| {
        let [_, _, g2, g3] = g.eval(x);
        g3 * x + g2
    };
    let fail = scan(&xs, |x| ddg(x) >= 0.0).map(|x| format!("(g''x)'({x:e}) = {:e}", ddg(x)));
    entries.push(HypothesisEntry {
        id: "H8",
        statement: "(g''(x)x)' >= 0",
        verdict: verdict(fail),
        method: Method::Grid,
    });

    HypothesisReport {
        entries,
        dim: e.dim(),
        gamma: e.gamma(),
        gamma0: e.gamma0(),
        rest_volume: e.rest_volume(),
        nu: e.nu(),
        grid: (GRID_MIN, GRID_MAX),
        points_per_decade: POINTS_PER_DECADE,
    }
}
