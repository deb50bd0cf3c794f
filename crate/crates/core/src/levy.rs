//! Levy density factors `k`, where the free Levy measure is `k(t)/|t| dt`,
//! together with the free characteristic triplet and generating pair.
//!
//! A density suitable for the boundary-curve machinery is C^2 away from the
//! origin, increasing on `(-inf, 0)`, decreasing on `(0, inf)`, strictly
//! positive, and `(1 + t^2)^2 k^(j)(t)` is bounded for `j <= 2`.
//! [`validate_conditions`] samples these on a grid.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::mollify::MollifiedDensity;
use crate::quad::{self, QuadSpec};
use crate::report::ValidationReport;

/// Floor added to one-sided densities so that they stay strictly positive.
pub const DEFAULT_EPSILON_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    SymExp,
    GaussScaled,
    HalfExp,
    Table,
    Mollified,
    Sum,
    Dilated,
    Cauchy,
    Zero,
}

impl Family {
    pub fn tag(self) -> &'static str {
        match self {
            Family::SymExp => "symexp",
            Family::GaussScaled => "gauss-scaled",
            Family::HalfExp => "half-exp",
            Family::Table => "table",
            Family::Mollified => "mollified",
            Family::Sum => "sum",
            Family::Dilated => "dilated",
            Family::Cauchy => "cauchy",
            Family::Zero => "zero",
        }
    }
}

/// Upper envelope of `k` on `|t| >= T`, used to bound truncated tails.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Envelope {
    /// `k <= amp` on `|t| < reach`, zero beyond.
    Compact { reach: f64, amp: f64 },
    /// `k(t) <= amp * exp(-rate |t|)`.
    Exp { amp: f64, rate: f64 },
    /// `k(t) <= amp * exp(-rate t^2)`.
    Gauss { amp: f64, rate: f64 },
    /// `k(t) <= amp * |t|^-power` for `|t| >= 1`.
    Power { amp: f64, power: f64 },
}

fn ln_factorial(n: i32) -> f64 {
    (2..=n).map(|j| (j as f64).ln()).sum()
}

/// Bound on `int_T^inf t^p exp(ln_amp - beta t) dt`.
fn exp_tail(ln_amp: f64, beta: f64, cutoff: f64, p: i32) -> f64 {
    let bt = beta * cutoff;
    if p >= 0 {
        // amp * Gamma(p+1, beta T) / beta^(p+1), expanded as a finite sum.
        let base = ln_amp - bt + ln_factorial(p) - (p as f64 + 1.0) * beta.ln();
        (0..=p)
            .map(|j| (base + j as f64 * bt.ln() - ln_factorial(j)).exp())
            .sum()
    } else {
        (ln_amp - bt + p as f64 * cutoff.ln() - beta.ln()).exp()
    }
}

impl Envelope {
    /// Bound on `int_{t > T} t^p k(t) dt` for one half-line.
    pub fn tail(&self, cutoff: f64, p: i32) -> f64 {
        match *self {
            Envelope::Compact { reach, amp } => {
                if cutoff >= reach || amp == 0.0 {
                    0.0
                } else if p == -1 {
                    amp * (reach / cutoff).ln()
                } else {
                    let q = p as f64 + 1.0;
                    amp * (reach.powf(q) - cutoff.powf(q)) / q
                }
            }
            Envelope::Exp { amp, rate } => {
                if amp == 0.0 {
                    0.0
                } else {
                    exp_tail(amp.ln(), rate, cutoff, p)
                }
            }
            Envelope::Gauss { amp, rate } => {
                if amp == 0.0 {
                    0.0
                } else {
                    // exp(-r t^2) <= exp(r T^2) exp(-2 r T t) for t >= T
                    exp_tail(amp.ln() + rate * cutoff * cutoff, 2.0 * rate * cutoff, cutoff, p)
                }
            }
            Envelope::Power { amp, power } => {
                let excess = power - p as f64 - 1.0;
                if amp == 0.0 {
                    0.0
                } else if excess <= 0.0 || cutoff < 1.0 {
                    f64::INFINITY
                } else {
                    amp * cutoff.powf(-excess) / excess
                }
            }
        }
    }

    /// Bound on `sup_{t >= T} k(t)`.
    pub fn sup(&self, cutoff: f64) -> f64 {
        match *self {
            Envelope::Compact { reach, amp } => {
                if cutoff >= reach {
                    0.0
                } else {
                    amp
                }
            }
            Envelope::Exp { amp, rate } => amp * (-rate * cutoff).exp(),
            Envelope::Gauss { amp, rate } => amp * (-rate * cutoff * cutoff).exp(),
            Envelope::Power { amp, power } => {
                if cutoff < 1.0 {
                    f64::INFINITY
                } else {
                    amp * cutoff.powf(-power)
                }
            }
        }
    }

    fn dilated(self, c: f64) -> Self {
        match self {
            Envelope::Compact { reach, amp } => Envelope::Compact {
                reach: reach * c,
                amp,
            },
            Envelope::Exp { amp, rate } => Envelope::Exp {
                amp,
                rate: rate / c,
            },
            Envelope::Gauss { amp, rate } => Envelope::Gauss {
                amp,
                rate: rate / (c * c),
            },
            // valid for |t| >= max(1, c); widen the amplitude to cover |t| >= 1
            Envelope::Power { amp, power } => Envelope::Power {
                amp: amp * c.powf(power) * c.max(1.0).powf(power),
                power,
            },
        }
    }

    fn scaled(self, w: f64) -> Self {
        match self {
            Envelope::Compact { reach, amp } => Envelope::Compact {
                reach,
                amp: amp * w,
            },
            Envelope::Exp { amp, rate } => Envelope::Exp {
                amp: amp * w,
                rate,
            },
            Envelope::Gauss { amp, rate } => Envelope::Gauss {
                amp: amp * w,
                rate,
            },
            Envelope::Power { amp, power } => Envelope::Power {
                amp: amp * w,
                power,
            },
        }
    }
}

/// Piecewise-linear monotone density per half-line with exponential tails.
#[derive(Debug, Clone, PartialEq)]
pub struct TableDensity {
    /// Knots `(|t|, k)` on the positive half-line, ascending in `|t|`.
    pos: Vec<(f64, f64)>,
    /// Knots `(|t|, k)` on the negative half-line, ascending in `|t|`.
    neg: Vec<(f64, f64)>,
    pos_rate: f64,
    neg_rate: f64,
}

fn tail_rate(knots: &[(f64, f64)]) -> f64 {
    match knots {
        [] => 0.0,
        [(u, _)] => 1.0 / u,
        [.., (u0, k0), (u1, k1)] => {
            let slope = (k1 - k0) / (u1 - u0);
            if *k1 > 0.0 && slope < 0.0 {
                -slope / k1
            } else {
                1.0 / u1
            }
        }
    }
}

impl TableDensity {
    /// Builds a table from knots, rejecting non-monotone input.
    pub fn new(t: &[f64], k: &[f64]) -> Result<Self> {
        let table = Self::new_unchecked(t, k)?;
        for knots in [&table.pos, &table.neg] {
            for w in knots.windows(2) {
                if w[1].1 > w[0].1 {
                    let sign = if std::ptr::eq(knots, &table.pos) { 1.0 } else { -1.0 };
                    return Err(Error::NonMonotoneTable { t: sign * w[1].0 });
                }
            }
        }
        Ok(table)
    }

    /// Builds a table without the monotonicity check, e.g. to exercise the
    /// validators on a deliberately corrupted input.
    pub fn new_unchecked(t: &[f64], k: &[f64]) -> Result<Self> {
        if t.len() != k.len() || t.is_empty() {
            return Err(Error::InvalidArgument(
                "table needs equally many t and k values (at least one)".into(),
            ));
        }
        let mut pos = Vec::new();
        let mut neg = Vec::new();
        for (&ti, &ki) in t.iter().zip(k) {
            if !ti.is_finite() || ti == 0.0 {
                return Err(Error::InvalidParameter {
                    name: "table.t".into(),
                    value: ti,
                    reason: "knots must be finite and nonzero",
                });
            }
            if !(ki >= 0.0) || !ki.is_finite() {
                return Err(Error::InvalidParameter {
                    name: "table.k".into(),
                    value: ki,
                    reason: "values must be finite and nonnegative",
                });
            }
            if ti > 0.0 {
                pos.push((ti, ki));
            } else {
                neg.push((-ti, ki));
            }
        }
        for knots in [&mut pos, &mut neg] {
            knots.sort_by(|a, b| a.0.total_cmp(&b.0));
            if knots.windows(2).any(|w| w[0].0 == w[1].0) {
                return Err(Error::InvalidArgument("duplicate table knot".into()));
            }
        }
        let pos_rate = tail_rate(&pos);
        let neg_rate = tail_rate(&neg);
        Ok(Self {
            pos,
            neg,
            pos_rate,
            neg_rate,
        })
    }

    fn side(&self, t: f64) -> (&[(f64, f64)], f64) {
        if t > 0.0 {
            (&self.pos, self.pos_rate)
        } else {
            (&self.neg, self.neg_rate)
        }
    }

    fn eval(&self, t: f64) -> f64 {
        let (knots, rate) = self.side(t);
        let u = t.abs();
        match knots.iter().position(|&(ui, _)| ui >= u) {
            None => match knots.last() {
                None => 0.0,
                Some(&(ul, kl)) => kl * (-rate * (u - ul)).exp(),
            },
            Some(0) => knots[0].1,
            Some(i) => {
                let (u0, k0) = knots[i - 1];
                let (u1, k1) = knots[i];
                k0 + (k1 - k0) * (u - u0) / (u1 - u0)
            }
        }
    }

    fn ln_eval(&self, t: f64) -> f64 {
        let (knots, rate) = self.side(t);
        let u = t.abs();
        match knots.last() {
            Some(&(ul, kl)) if u > ul => kl.ln() - rate * (u - ul),
            _ => self.eval(t).ln(),
        }
    }

    fn deriv(&self, t: f64) -> f64 {
        let (knots, rate) = self.side(t);
        let sign = t.signum();
        let u = t.abs();
        let du = match knots.iter().position(|&(ui, _)| ui >= u) {
            None => match knots.last() {
                None => 0.0,
                Some(&(ul, kl)) => -rate * kl * (-rate * (u - ul)).exp(),
            },
            Some(0) => 0.0,
            Some(i) => {
                let (u0, k0) = knots[i - 1];
                let (u1, k1) = knots[i];
                (k1 - k0) / (u1 - u0)
            }
        };
        sign * du
    }

    fn breakpoints(&self) -> Vec<f64> {
        self.pos
            .iter()
            .map(|&(u, _)| u)
            .chain(self.neg.iter().map(|&(u, _)| -u))
            .collect()
    }

    fn envelopes(&self) -> Vec<Envelope> {
        let mut out = Vec::new();
        for (knots, rate) in [(&self.pos, self.pos_rate), (&self.neg, self.neg_rate)] {
            if let Some(&(ul, kl)) = knots.last() {
                let kmax = knots.iter().map(|p| p.1).fold(0.0, f64::max);
                out.push(Envelope::Compact { reach: ul, amp: kmax });
                if kl > 0.0 {
                    out.push(Envelope::Exp {
                        amp: kl * (rate * ul).exp(),
                        rate,
                    });
                }
            }
        }
        out
    }
}

/// A Levy density factor `k` on `R \ {0}`.
///
/// Values are immutable and cheap to clone (composite variants share their
/// parts through `Arc`).
#[derive(Debug, Clone)]
pub enum LevyDensity {
    /// `lambda * exp(-|t|)`.
    SymExp { lambda: f64 },
    /// `a * n^2 * exp(-(n t)^2)`.
    GaussScaled { a: f64, n: f64 },
    /// `lambda * exp(-t) 1_{t > 0} + epsilon * exp(-t^2)`.
    HalfExp { lambda: f64, epsilon: f64 },
    Table(Arc<TableDensity>),
    Mollified(Arc<MollifiedDensity>),
    /// `sum_i w_i k_i` with nonnegative weights.
    Sum(Arc<Vec<(f64, LevyDensity)>>),
    /// `t -> base(t / c)`.
    Dilated { base: Arc<LevyDensity>, c: f64 },
    /// `scale / (pi |t|)`; the Levy density of the Cauchy law. Not integrable
    /// in the sense needed by the transforms, only usable as a mollification base.
    Cauchy { scale: f64 },
    Zero,
}

impl LevyDensity {
    pub fn symexp(lambda: f64) -> Result<Self> {
        positive("lambda", lambda)?;
        Ok(Self::SymExp { lambda })
    }

    pub fn gauss_scaled(a: f64, n: f64) -> Result<Self> {
        positive("a", a)?;
        positive("n", n)?;
        Ok(Self::GaussScaled { a, n })
    }

    pub fn half_exp(lambda: f64, epsilon: f64) -> Result<Self> {
        positive("lambda", lambda)?;
        nonnegative("epsilon", epsilon)?;
        Ok(Self::HalfExp { lambda, epsilon })
    }

    pub fn cauchy(scale: f64) -> Result<Self> {
        positive("scale", scale)?;
        Ok(Self::Cauchy { scale })
    }

    pub fn table(table: TableDensity) -> Self {
        Self::Table(Arc::new(table))
    }

    pub fn sum(parts: Vec<(f64, LevyDensity)>) -> Result<Self> {
        for (w, _) in &parts {
            nonnegative("weight", *w)?;
        }
        Ok(Self::Sum(Arc::new(parts)))
    }

    /// `t -> self(t / c)`.
    pub fn dilate(&self, c: f64) -> Result<Self> {
        positive("c", c)?;
        Ok(Self::Dilated {
            base: Arc::new(self.clone()),
            c,
        })
    }

    /// `t -> w * self(t)`.
    pub fn scale(&self, w: f64) -> Result<Self> {
        Self::sum(vec![(w, self.clone())])
    }

    pub fn family(&self) -> Family {
        match self {
            Self::SymExp { .. } => Family::SymExp,
            Self::GaussScaled { .. } => Family::GaussScaled,
            Self::HalfExp { .. } => Family::HalfExp,
            Self::Table(_) => Family::Table,
            Self::Mollified(_) => Family::Mollified,
            Self::Sum(_) => Family::Sum,
            Self::Dilated { .. } => Family::Dilated,
            Self::Cauchy { .. } => Family::Cauchy,
            Self::Zero => Family::Zero,
        }
    }

    /// Interval outside of which `k` vanishes identically.
    pub fn support_hint(&self) -> (f64, f64) {
        match self {
            Self::HalfExp { epsilon, .. } if *epsilon == 0.0 => (0.0, f64::INFINITY),
            Self::Mollified(m) => m.support_hint(),
            Self::Zero => (0.0, 0.0),
            _ => (f64::NEG_INFINITY, f64::INFINITY),
        }
    }

    /// `k(t)`, for `t != 0`.
    pub fn eval(&self, t: f64) -> f64 {
        match self {
            Self::SymExp { lambda } => lambda * (-t.abs()).exp(),
            Self::GaussScaled { a, n } => a * n * n * (-(n * t).powi(2)).exp(),
            Self::HalfExp { lambda, epsilon } => {
                let pos = if t > 0.0 { lambda * (-t).exp() } else { 0.0 };
                pos + epsilon * (-t * t).exp()
            }
            Self::Table(table) => table.eval(t),
            Self::Mollified(m) => m.eval(t),
            Self::Sum(parts) => parts.iter().map(|(w, k)| w * k.eval(t)).sum(),
            Self::Dilated { base, c } => base.eval(t / c),
            Self::Cauchy { scale } => scale / (PI * t.abs()),
            Self::Zero => 0.0,
        }
    }

    /// `|t| k(t)`, the weight appearing in every kernel integral.
    pub fn weighted(&self, t: f64) -> f64 {
        match self {
            Self::Cauchy { scale } => scale / PI,
            Self::Dilated { base, c } => c * base.weighted(t / c),
            Self::Sum(parts) => parts.iter().map(|(w, k)| w * k.weighted(t)).sum(),
            _ => {
                if t == 0.0 {
                    0.0
                } else {
                    t.abs() * self.eval(t)
                }
            }
        }
    }

    /// `ln k(t)`, finite wherever `k(t) > 0` even if `k(t)` underflows.
    pub fn ln_eval(&self, t: f64) -> f64 {
        match self {
            Self::SymExp { lambda } => lambda.ln() - t.abs(),
            Self::GaussScaled { a, n } => (a * n * n).ln() - (n * t).powi(2),
            Self::HalfExp { lambda, epsilon } => {
                let pos = if t > 0.0 {
                    lambda.ln() - t
                } else {
                    f64::NEG_INFINITY
                };
                log_sum_exp(&[pos, epsilon.ln() - t * t])
            }
            Self::Table(table) => table.ln_eval(t),
            Self::Mollified(m) => m.ln_eval(t),
            Self::Sum(parts) => {
                let terms: Vec<f64> = parts.iter().map(|(w, k)| w.ln() + k.ln_eval(t)).collect();
                log_sum_exp(&terms)
            }
            Self::Dilated { base, c } => base.ln_eval(t / c),
            Self::Cauchy { scale } => (scale / (PI * t.abs())).ln(),
            Self::Zero => f64::NEG_INFINITY,
        }
    }

    /// `k'(t)`.
    pub fn deriv(&self, t: f64) -> f64 {
        match self {
            Self::SymExp { lambda } => -t.signum() * lambda * (-t.abs()).exp(),
            Self::GaussScaled { a, n } => -2.0 * a * n.powi(4) * t * (-(n * t).powi(2)).exp(),
            Self::HalfExp { lambda, epsilon } => {
                let pos = if t > 0.0 { -lambda * (-t).exp() } else { 0.0 };
                pos - 2.0 * epsilon * t * (-t * t).exp()
            }
            Self::Table(table) => table.deriv(t),
            Self::Mollified(m) => m.deriv(t),
            Self::Sum(parts) => parts.iter().map(|(w, k)| w * k.deriv(t)).sum(),
            Self::Dilated { base, c } => base.deriv(t / c) / c,
            Self::Cauchy { scale } => -t.signum() * scale / (PI * t * t),
            Self::Zero => 0.0,
        }
    }

    /// `k''(t)` where the family has it in closed form.
    pub fn second_deriv(&self, t: f64) -> Option<f64> {
        match self {
            Self::SymExp { lambda } => Some(lambda * (-t.abs()).exp()),
            Self::GaussScaled { a, n } => {
                let u = n * t;
                Some(a * n.powi(4) * (4.0 * u * u - 2.0) * (-u * u).exp())
            }
            Self::HalfExp { lambda, epsilon } => {
                let pos = if t > 0.0 { lambda * (-t).exp() } else { 0.0 };
                Some(pos + epsilon * (4.0 * t * t - 2.0) * (-t * t).exp())
            }
            Self::Sum(parts) => parts
                .iter()
                .map(|(w, k)| k.second_deriv(t).map(|d| w * d))
                .sum(),
            Self::Dilated { base, c } => base.second_deriv(t / c).map(|d| d / (c * c)),
            Self::Cauchy { scale } => Some(2.0 * scale / (PI * t.abs().powi(3))),
            Self::Zero => Some(0.0),
            Self::Table(_) | Self::Mollified(_) => None,
        }
    }

    /// Points where `k` has kinks or changes scale; used as quadrature splits.
    pub fn breakpoints(&self) -> Vec<f64> {
        match self {
            Self::GaussScaled { n, .. } => vec![-3.0 / n, -1.0 / n, 1.0 / n, 3.0 / n],
            Self::Table(table) => table.breakpoints(),
            Self::Mollified(m) => m.breakpoints(),
            Self::Sum(parts) => parts.iter().flat_map(|(_, k)| k.breakpoints()).collect(),
            Self::Dilated { base, c } => base.breakpoints().into_iter().map(|b| b * c).collect(),
            _ => Vec::new(),
        }
    }

    pub fn envelopes(&self) -> Vec<Envelope> {
        match self {
            Self::SymExp { lambda } => vec![Envelope::Exp {
                amp: *lambda,
                rate: 1.0,
            }],
            Self::GaussScaled { a, n } => vec![Envelope::Gauss {
                amp: a * n * n,
                rate: n * n,
            }],
            Self::HalfExp { lambda, epsilon } => vec![
                Envelope::Exp {
                    amp: *lambda,
                    rate: 1.0,
                },
                Envelope::Gauss {
                    amp: *epsilon,
                    rate: 1.0,
                },
            ],
            Self::Table(table) => table.envelopes(),
            Self::Mollified(m) => m.envelopes(),
            Self::Sum(parts) => parts
                .iter()
                .flat_map(|(w, k)| k.envelopes().into_iter().map(move |e| e.scaled(*w)))
                .collect(),
            Self::Dilated { base, c } => base.envelopes().into_iter().map(|e| e.dilated(*c)).collect(),
            Self::Cauchy { scale } => vec![Envelope::Power {
                amp: scale / PI,
                power: 1.0,
            }],
            Self::Zero => Vec::new(),
        }
    }

    /// Bound on `int_{|t| > T} |t|^p k(t) dt`.
    pub fn tail_bound(&self, cutoff: f64, p: i32) -> f64 {
        2.0 * self.envelopes().iter().map(|e| e.tail(cutoff, p)).sum::<f64>()
    }

    /// Bound on `sup_{|t| >= T} k(t)`.
    pub fn tail_sup(&self, cutoff: f64) -> f64 {
        self.envelopes().iter().map(|e| e.sup(cutoff)).sum()
    }

    /// True if the tails of `k` decay faster than any power.
    pub fn is_light_tailed(&self) -> bool {
        !self
            .envelopes()
            .iter()
            .any(|e| matches!(e, Envelope::Power { .. }))
    }
}

fn log_sum_exp(terms: &[f64]) -> f64 {
    let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + terms.iter().map(|t| (t - max).exp()).sum::<f64>().ln()
}

fn positive(name: &str, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name: name.into(),
            value,
            reason: "must be positive and finite",
        })
    }
}

fn nonnegative(name: &str, value: f64) -> Result<()> {
    if value >= 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name: name.into(),
            value,
            reason: "must be nonnegative and finite",
        })
    }
}

/// Family tag plus parameters, as read from a configuration file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FamilySpec {
    pub family: String,
    pub params: BTreeMap<String, f64>,
    /// Knots `(t, k)` for the `table` family.
    pub table: Option<(Vec<f64>, Vec<f64>)>,
    /// Sub-densities for `sum`, `dilated` and `mollified`.
    pub components: Vec<FamilySpec>,
}

impl FamilySpec {
    pub fn new(family: &str) -> Self {
        Self {
            family: family.into(),
            ..Self::default()
        }
    }

    pub fn param(mut self, name: &str, value: f64) -> Self {
        self.params.insert(name.into(), value);
        self
    }

    fn get(&self, name: &str, default: f64) -> f64 {
        self.params.get(name).copied().unwrap_or(default)
    }
}

/// Builds a density from a family tag and its parameters.
pub fn make_family(spec: &FamilySpec) -> Result<LevyDensity> {
    match spec.family.as_str() {
        "symexp" => LevyDensity::symexp(spec.get("lambda", 1.0)),
        "gauss-scaled" => LevyDensity::gauss_scaled(spec.get("a", 1.0), spec.get("n", 1.0)),
        "half-exp" => LevyDensity::half_exp(
            spec.get("lambda", 1.0),
            spec.get("epsilon", DEFAULT_EPSILON_FLOOR),
        ),
        "cauchy" => LevyDensity::cauchy(spec.get("scale", 1.0)),
        "zero" => Ok(LevyDensity::Zero),
        "table" => {
            let (t, k) = spec
                .table
                .as_ref()
                .ok_or_else(|| Error::MissingParameter("table".into()))?;
            Ok(LevyDensity::table(TableDensity::new(t, k)?))
        }
        "sum" => {
            if spec.components.is_empty() {
                return Err(Error::MissingParameter("components".into()));
            }
            let parts = spec
                .components
                .iter()
                .enumerate()
                .map(|(i, c)| Ok((spec.get(&format!("w{i}"), 1.0), make_family(c)?)))
                .collect::<Result<Vec<_>>>()?;
            LevyDensity::sum(parts)
        }
        "dilated" => {
            let base = single_component(spec)?;
            make_family(base)?.dilate(spec.get("c", 1.0))
        }
        "mollified" => {
            let base = make_family(single_component(spec)?)?;
            let a = spec.get("a", 0.0);
            let n = spec.get("n", 1.0);
            if n.fract() != 0.0 || n < 1.0 {
                return Err(Error::InvalidParameter {
                    name: "n".into(),
                    value: n,
                    reason: "must be a positive integer",
                });
            }
            let floor = spec
                .params
                .get("epsilon_floor")
                .copied()
                .unwrap_or_else(|| crate::mollify::default_floor(a));
            crate::mollify::mollify_k(&base, a, n as u32, floor)
        }
        other => Err(Error::UnknownFamily(other.into())),
    }
}

fn single_component(spec: &FamilySpec) -> Result<&FamilySpec> {
    match spec.components.as_slice() {
        [one] => Ok(one),
        _ => Err(Error::InvalidArgument(format!(
            "family `{}` needs exactly one component",
            spec.family
        ))),
    }
}

/// Sorted, symmetric sample points excluding zero.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleGrid {
    points: Vec<f64>,
}

impl SampleGrid {
    /// `per_side` log-spaced points on `[min, max]` and their mirror images.
    pub fn log_symmetric(min: f64, max: f64, per_side: usize) -> Result<Self> {
        if !(min > 0.0 && max > min) || per_side < 2 {
            return Err(Error::InvalidArgument(
                "log grid needs 0 < min < max and at least two points per side".into(),
            ));
        }
        let (lmin, lmax) = (min.ln(), max.ln());
        let pos: Vec<f64> = (0..per_side)
            .map(|i| (lmin + (lmax - lmin) * i as f64 / (per_side - 1) as f64).exp())
            .collect();
        let mut points: Vec<f64> = pos.iter().rev().map(|t| -t).collect();
        points.extend(pos);
        Ok(Self { points })
    }

    pub fn from_points(mut points: Vec<f64>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidArgument("sample grid is empty".into()));
        }
        if points.iter().any(|t| *t == 0.0 || !t.is_finite()) {
            return Err(Error::InvalidArgument(
                "sample grid must exclude 0 and be finite".into(),
            ));
        }
        points.sort_by(f64::total_cmp);
        let n = points.len();
        for i in 0..n {
            let (a, b) = (points[i], -points[n - 1 - i]);
            if (a - b).abs() > 1e-12 * a.abs() {
                return Err(Error::InvalidArgument(
                    "sample grid must be symmetric about 0".into(),
                ));
            }
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }
}

impl Default for SampleGrid {
    /// 400 log-spaced points per side on `1e-6 <= |t| <= 1e3`.
    fn default() -> Self {
        Self::log_symmetric(1e-6, 1e3, 400).expect("static grid parameters are valid")
    }
}

/// Largest value the boundedness proxies may take.
pub const CONDITION_BOUND: f64 = 1e12;

fn bounded_check(
    report: &mut ValidationReport,
    name: &str,
    grid: &SampleGrid,
    f: impl Fn(f64) -> f64,
) {
    let values: Vec<f64> = grid
        .points()
        .iter()
        .map(|&t| (1.0 + t * t).powi(2) * f(t).abs())
        .collect();
    let max = values.iter().copied().fold(0.0, f64::max);
    let finite = values.iter().all(|v| v.is_finite());
    // A bounded function cannot keep growing toward the edges of the sample range.
    let n = values.len();
    let half = n / 2;
    let interior = |range: std::ops::Range<usize>| {
        values[range].iter().copied().fold(0.0, f64::max)
    };
    let growing_at = [
        (0, values[0] > interior(1..half) * (1.0 + 1e-9)),
        (half - 1, values[half - 1] > interior(0..half - 1) * (1.0 + 1e-9)),
        (half, values[half] > interior(half + 1..n) * (1.0 + 1e-9)),
        (n - 1, values[n - 1] > interior(half..n - 1) * (1.0 + 1e-9)),
    ];
    let growing = growing_at.iter().find(|(_, g)| *g).map(|(i, _)| grid.points()[*i]);
    let pass = finite && max <= CONDITION_BOUND && growing.is_none();
    match growing {
        Some(t) => report.push_detail(name, pass, max, format!("growing toward t = {t:e}")),
        None => report.push(name, pass, max),
    }
}

/// Samples positivity, per-half-line monotonicity and the boundedness proxies.
pub fn validate_conditions(k: &LevyDensity, grid: &SampleGrid) -> ValidationReport {
    let mut report = ValidationReport::new();
    let pts = grid.points();

    let bad: Vec<f64> = pts
        .iter()
        .copied()
        .filter(|&t| !(k.ln_eval(t) > f64::NEG_INFINITY))
        .collect();
    match bad.first() {
        Some(t) => report.push_detail("positivity", false, bad.len() as f64, format!("k(t) = 0 at t = {t:e}")),
        None => report.push("positivity", true, 0.0),
    }

    let mut worst = 0.0;
    let mut worst_t = None;
    for w in pts.windows(2) {
        let (t1, t2) = (w[0], w[1]);
        if t1 < 0.0 && t2 > 0.0 {
            continue;
        }
        let (k1, k2) = (k.eval(t1), k.eval(t2));
        // increasing on the negative half-line, decreasing on the positive
        let excess = if t2 < 0.0 { k1 - k2 } else { k2 - k1 };
        let violation = excess - 1e-12 * k1.max(k2);
        if violation > worst {
            worst = violation;
            worst_t = Some(if t2 < 0.0 { t1 } else { t2 });
        }
    }
    match worst_t {
        Some(t) => report.push_detail("monotone", false, worst, format!("violated at t = {t:e}")),
        None => report.push("monotone", true, 0.0),
    }

    bounded_check(&mut report, "bounded_k", grid, |t| k.eval(t));
    bounded_check(&mut report, "bounded_dk", grid, |t| k.deriv(t));
    if k.second_deriv(1.0).is_some() {
        bounded_check(&mut report, "bounded_d2k", grid, |t| {
            k.second_deriv(t).unwrap_or(f64::NAN)
        });
    }
    report
}

/// Checks that the cofactor density `(k(t) - k(t/c)) / |t|` of the
/// decomposition at scale `c` is nonnegative on the grid.
pub fn sd_residual_nonneg(k: &LevyDensity, c: f64, grid: &SampleGrid) -> Result<ValidationReport> {
    if !(c > 0.0 && c < 1.0) {
        return Err(Error::InvalidParameter {
            name: "c".into(),
            value: c,
            reason: "must lie in (0, 1)",
        });
    }
    let mut min = f64::INFINITY;
    let mut min_t = 0.0;
    for &t in grid.points() {
        let r = k.eval(t) - k.eval(t / c);
        if r < min {
            min = r;
            min_t = t;
        }
    }
    let mut report = ValidationReport::new();
    let name = format!("sd_residual_c{c}");
    if min >= -1e-12 {
        report.push(name, true, min.min(0.0).abs());
    } else {
        report.push_detail(name, false, -min, format!("k(t) < k(t/c) at t = {min_t:e}"));
    }
    Ok(report)
}

/// Integrates `f(t)` against the real line where `f` is dominated by
/// `weight(|t|) * k(t)`; `tail(T)` must bound the integral over `|t| > T`.
pub(crate) fn line_integral(
    k: &LevyDensity,
    f: impl Fn(f64) -> f64,
    tail: impl Fn(f64) -> f64,
    extra_breaks: &[f64],
    spec: &QuadSpec,
) -> Result<f64> {
    let mut cutoff = 1.0;
    while tail(cutoff) > 0.1 * spec.abs_tol {
        cutoff *= 2.0;
        if cutoff > 1e12 {
            return Err(Error::NonIntegrable);
        }
    }
    let mut breaks = vec![-cutoff, 0.0, cutoff];
    breaks.extend(
        k.breakpoints()
            .into_iter()
            .chain(extra_breaks.iter().copied())
            .filter(|b| b.abs() < cutoff),
    );
    quad::integrate(&f, &breaks, spec)
}

fn tilde_spec() -> QuadSpec {
    QuadSpec {
        abs_tol: 1e-11,
        rel_tol: 1e-12,
        ..QuadSpec::default()
    }
}

/// `gamma_k = int sign(t) k(t) dt`.
pub fn gamma_k(k: &LevyDensity) -> Result<f64> {
    if !k.is_light_tailed() {
        return Err(Error::NonIntegrable);
    }
    line_integral(
        k,
        |t| if t == 0.0 { 0.0 } else { t.signum() * k.eval(t) },
        |c| k.tail_bound(c, 0),
        &[],
        &tilde_spec(),
    )
}

/// The drift of the measure with triplet `(0, k(t)/|t| dt, eta)` whose
/// Cauchy transform inverts `H_k`: `eta = int_{-1}^{1} sign(t) k(t) dt`.
pub fn lemma_eta(k: &LevyDensity) -> Result<f64> {
    let spec = tilde_spec();
    let mut breaks = vec![-1.0, 0.0, 1.0];
    breaks.extend(k.breakpoints().into_iter().filter(|b| b.abs() < 1.0));
    let f = |t: f64| if t == 0.0 { 0.0 } else { t.signum() * k.eval(t) };
    quad::integrate(&f, &breaks, &spec)
}

/// `int t (1_{[-1,1]}(t) - 1/(1+t^2)) k(t)/|t| dt`, the drift difference
/// between the triplet and the generating pair.
pub fn drift_correction(k: &LevyDensity) -> Result<f64> {
    line_integral(
        k,
        |t| {
            if t == 0.0 {
                return 0.0;
            }
            let s = t.signum() * k.eval(t);
            if t.abs() <= 1.0 {
                s * t * t / (1.0 + t * t)
            } else {
                -s / (1.0 + t * t)
            }
        },
        |c| k.tail_bound(c, -2),
        &[-1.0, 1.0],
        &tilde_spec(),
    )
}

/// Free characteristic triplet `(a, k(t)/|t| dt, eta)`.
#[derive(Debug, Clone)]
pub struct FreeTriplet {
    pub a: f64,
    pub k: LevyDensity,
    pub eta: f64,
}

impl FreeTriplet {
    pub fn new(a: f64, k: LevyDensity, eta: f64) -> Result<Self> {
        nonnegative("a", a)?;
        if !eta.is_finite() {
            return Err(Error::InvalidParameter {
                name: "eta".into(),
                value: eta,
                reason: "must be finite",
            });
        }
        Ok(Self { a, k, eta })
    }

    /// The triplet `(0, k, lemma_eta(k))`.
    pub fn lemma(k: LevyDensity) -> Result<Self> {
        let eta = lemma_eta(&k)?;
        Self::new(0.0, k, eta)
    }

    /// `int min(1, t^2) k(t)/|t| dt`, finite for a Levy measure.
    pub fn levy_mass(&self) -> Result<f64> {
        let k = &self.k;
        line_integral(
            k,
            |t| {
                if t == 0.0 {
                    0.0
                } else if t.abs() <= 1.0 {
                    t.abs() * k.eval(t)
                } else {
                    k.eval(t) / t.abs()
                }
            },
            |c| k.tail_bound(c, -1),
            &[-1.0, 1.0],
            &tilde_spec(),
        )
    }
}

/// Free generating pair `(gamma, sigma)` with
/// `sigma = sigma_atom delta_0 + |t| k(t) / (1 + t^2) dt`.
#[derive(Debug, Clone)]
pub struct GeneratingPair {
    pub gamma: f64,
    pub sigma_atom: f64,
    k: LevyDensity,
}

impl GeneratingPair {
    pub fn new(gamma: f64, sigma_atom: f64, k: LevyDensity) -> Result<Self> {
        nonnegative("sigma_atom", sigma_atom)?;
        Ok(Self {
            gamma,
            sigma_atom,
            k,
        })
    }

    /// Density of the absolutely continuous part of sigma.
    pub fn sigma_density(&self, t: f64) -> f64 {
        self.k.weighted(t) / (1.0 + t * t)
    }

    pub fn total_mass(&self) -> Result<f64> {
        let k = &self.k;
        let ac = line_integral(
            k,
            |t| self.sigma_density(t),
            |c| k.tail_bound(c, -1),
            &[],
            &tilde_spec(),
        )?;
        Ok(self.sigma_atom + ac)
    }

    pub fn levy_density(&self) -> &LevyDensity {
        &self.k
    }
}

pub fn triplet_to_pair(triplet: &FreeTriplet) -> Result<GeneratingPair> {
    let gamma = triplet.eta - drift_correction(&triplet.k)?;
    GeneratingPair::new(gamma, triplet.a, triplet.k.clone())
}

pub fn pair_to_triplet(pair: &GeneratingPair) -> Result<FreeTriplet> {
    let eta = pair.gamma + drift_correction(&pair.k)?;
    FreeTriplet::new(pair.sigma_atom, pair.k.clone(), eta)
}
