//! Smooth, strictly positive approximations `k_n` of a monotone density `k`
//! plus a semicircular coefficient `a`.
//!
//! For `t > 0`,
//!
//! ```text
//! k_n(t) = a n^2 exp(-(n t)^2) + R_n(t) + floor * exp(-t^2),
//! R_n(t) = int_0^1 k_n^0(t + u/n) phi(-u) du,
//! ```
//!
//! where `k_n^0` equals `k(1/n)` on `(0, 1/n)`, `k` on `[1/n, n]` and vanishes
//! beyond `n`, and `phi` is the normalized smooth bump on `(-1, 0)`. The
//! negative half-line is the mirror image.

use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::levy::{self, Envelope, LevyDensity, SampleGrid, DEFAULT_EPSILON_FLOOR};
use crate::quad::{self, QuadSpec};

/// Floor used when the caller does not choose one: without a semicircular
/// part the mollified density has compact support, so it needs the floor.
pub fn default_floor(a: f64) -> f64 {
    if a == 0.0 {
        DEFAULT_EPSILON_FLOOR
    } else {
        0.0
    }
}

fn bump_raw(s: f64) -> f64 {
    let q = 2.0 * s + 1.0;
    if q.abs() >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - q * q)).exp()
    }
}

fn bump_raw_deriv(s: f64) -> f64 {
    let q = 2.0 * s + 1.0;
    if q.abs() >= 1.0 {
        0.0
    } else {
        let d = 1.0 - q * q;
        -4.0 * q * (-1.0 / d).exp() / (d * d)
    }
}

/// Normalizing constant of the bump on `(-1, 0)`.
fn bump_constant() -> f64 {
    static C: OnceLock<f64> = OnceLock::new();
    *C.get_or_init(|| {
        let spec = QuadSpec {
            abs_tol: 1e-14,
            rel_tol: 1e-13,
            ..QuadSpec::default()
        };
        let mass: f64 = quad::integrate(&bump_raw, &[-1.0, -0.5, 0.0], &spec)
            .expect("bump integral converges");
        1.0 / mass
    })
}

/// The unit-mass bump `phi` supported in `[-1, 0]`.
pub fn bump(s: f64) -> f64 {
    bump_constant() * bump_raw(s)
}

/// Gauss-Legendre node on a piece of `[0, 1]` with the bump and its
/// derivative folded into the weights.
#[derive(Debug, Clone, Copy)]
struct WindowNode {
    u: f64,
    phi: f64,
    dphi: f64,
}

fn window_rule(lo: f64, hi: f64) -> Vec<WindowNode> {
    let (nodes, weights) = quad::gauss_legendre_32();
    let half = 0.5 * (hi - lo);
    let mid = 0.5 * (hi + lo);
    nodes
        .iter()
        .zip(weights)
        .map(|(x, wt)| {
            let u = mid + half * x;
            WindowNode {
                u,
                phi: wt * half * bump_raw(-u),
                dphi: wt * half * bump_raw_deriv(-u),
            }
        })
        .filter(|node| node.phi != 0.0)
        .collect()
}

fn full_window_rule() -> &'static [WindowNode] {
    static RULE: OnceLock<Vec<WindowNode>> = OnceLock::new();
    RULE.get_or_init(|| window_rule(0.0, 1.0))
}

#[derive(Debug, Clone)]
pub struct MollifiedDensity {
    base: LevyDensity,
    a: f64,
    n: u32,
    floor: f64,
    /// `k(1/n)` and `k(-1/n)`: the clamped values near the origin.
    clamp_pos: f64,
    clamp_neg: f64,
}

impl MollifiedDensity {
    pub fn base(&self) -> &LevyDensity {
        &self.base
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn epsilon_floor(&self) -> f64 {
        self.floor
    }

    fn nf(&self) -> f64 {
        self.n as f64
    }

    /// The truncated base `k_n^0`.
    pub fn truncated(&self, t: f64) -> f64 {
        let n = self.nf();
        let u = t.abs();
        if u < 1.0 / n {
            if t > 0.0 {
                self.clamp_pos
            } else {
                self.clamp_neg
            }
        } else if u <= n {
            self.base.eval(t)
        } else {
            0.0
        }
    }

    /// Fixed-rule averages `(int k_n^0 phi, int k_n^0 phi')` over the window.
    fn window(&self, t: f64) -> (f64, f64) {
        let n = self.nf();
        let sign = if t > 0.0 { 1.0 } else { -1.0 };
        let u0 = t.abs();
        // the window [u0, u0 + 1/n] may cross the kink at 1/n and the cut at n
        let mut cuts = [0.0, 1.0, 1.0, 1.0];
        let mut len = 1;
        for c in [1.0 - n * u0, n * (n - u0)] {
            if c > 0.0 && c < 1.0 {
                cuts[len] = c;
                len += 1;
            }
        }
        let cuts = &mut cuts[..=len];
        cuts.sort_by(f64::total_cmp);
        let (mut norm, mut value, mut slope) = (0.0, 0.0, 0.0);
        let mut accumulate = |rule: &[WindowNode]| {
            for node in rule {
                let kv = self.truncated(sign * (u0 + node.u / n));
                norm += node.phi;
                value += node.phi * kv;
                slope += node.dphi * kv;
            }
        };
        if len == 1 {
            accumulate(full_window_rule());
        } else {
            for w in cuts.windows(2) {
                accumulate(&window_rule(w[0], w[1]));
            }
        }
        (value / norm, sign * n * slope / norm)
    }

    /// `R_n(t)` for `t > 0`, `L_n(t)` for `t < 0`.
    pub fn smoothed(&self, t: f64) -> f64 {
        if t.abs() >= self.nf() {
            0.0
        } else {
            self.window(t).0
        }
    }

    pub(crate) fn eval(&self, t: f64) -> f64 {
        let n = self.nf();
        self.a * n * n * (-(n * t).powi(2)).exp() + self.smoothed(t) + self.floor * (-t * t).exp()
    }

    pub(crate) fn deriv(&self, t: f64) -> f64 {
        let n = self.nf();
        let smooth = if t.abs() >= n { 0.0 } else { self.window(t).1 };
        -2.0 * self.a * n.powi(4) * t * (-(n * t).powi(2)).exp() + smooth
            - 2.0 * self.floor * t * (-t * t).exp()
    }

    pub(crate) fn ln_eval(&self, t: f64) -> f64 {
        let n = self.nf();
        let terms = [
            (self.a * n * n).ln() - (n * t).powi(2),
            self.smoothed(t).ln(),
            self.floor.ln() - t * t,
        ];
        let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if max == f64::NEG_INFINITY {
            return max;
        }
        max + terms.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
    }

    pub(crate) fn breakpoints(&self) -> Vec<f64> {
        let n = self.nf();
        let mut out: Vec<f64> = [1.0 / n, 2.0 / n, 3.0 / n, n - 1.0 / n, n]
            .iter()
            .flat_map(|&b| [b, -b])
            .collect();
        out.extend(
            self.base
                .breakpoints()
                .into_iter()
                .filter(|b| b.abs() > 1.0 / n && b.abs() < n),
        );
        out
    }

    pub(crate) fn envelopes(&self) -> Vec<Envelope> {
        let n = self.nf();
        vec![
            Envelope::Gauss {
                amp: self.a * n * n,
                rate: n * n,
            },
            Envelope::Gauss {
                amp: self.floor,
                rate: 1.0,
            },
            Envelope::Compact {
                reach: n,
                amp: self.clamp_pos.max(self.clamp_neg),
            },
        ]
    }

    pub(crate) fn support_hint(&self) -> (f64, f64) {
        if self.a > 0.0 || self.floor > 0.0 {
            return (f64::NEG_INFINITY, f64::INFINITY);
        }
        let n = self.nf();
        let lo = if self.clamp_neg > 0.0 { -n } else { 0.0 };
        let hi = if self.clamp_pos > 0.0 { n } else { 0.0 };
        (lo, hi)
    }
}

/// Builds `k_n` from a base density that is monotone on each half-line.
pub fn mollify_k(base: &LevyDensity, a: f64, n: u32, epsilon_floor: f64) -> Result<LevyDensity> {
    if n == 0 {
        return Err(Error::InvalidParameter {
            name: "n".into(),
            value: 0.0,
            reason: "must be at least 1",
        });
    }
    for (name, value) in [("a", a), ("epsilon_floor", epsilon_floor)] {
        if !(value >= 0.0 && value.is_finite()) {
            return Err(Error::InvalidParameter {
                name: name.into(),
                value,
                reason: "must be nonnegative and finite",
            });
        }
    }
    let report = levy::validate_conditions(base, &SampleGrid::default());
    if let Some(entry) = report.get("monotone").filter(|e| !e.pass) {
        return Err(Error::InvalidArgument(format!(
            "mollification base is not monotone ({})",
            entry.detail.as_deref().unwrap_or("")
        )));
    }
    let nf = n as f64;
    Ok(LevyDensity::Mollified(std::sync::Arc::new(MollifiedDensity {
        clamp_pos: base.eval(1.0 / nf),
        clamp_neg: base.eval(-1.0 / nf),
        base: base.clone(),
        a,
        n,
        floor: epsilon_floor,
    })))
}

const MAX_PERIOD_BREAKS: f64 = 200_000.0;

/// Default test frequencies `s` for the functions `cos(s t)`.
pub const DEFAULT_TEST_FREQUENCIES: [f64; 5] = [0.0, 0.5, 1.0, 2.0, 4.0];

/// `int cos(s t) |t| k(t) / (1 + t^2) dt`.
fn sigma_cos(k: &LevyDensity, s: f64) -> Result<f64> {
    let mut spec = QuadSpec {
        abs_tol: 1e-9,
        rel_tol: 1e-9,
        ..QuadSpec::default()
    };
    // for s > 0 the tail is an alternating integral of a decreasing function
    let tail = |c: f64| {
        let plain = k.tail_bound(c, -1);
        if s > 0.0 {
            plain.min(4.0 * c * k.tail_sup(c) / ((1.0 + c * c) * s))
        } else {
            plain
        }
    };
    // heavy tails reach far out: give every period its own panel
    let mut breaks = vec![-1.0, 1.0];
    if s > 0.0 {
        let mut cutoff: f64 = 1.0;
        while tail(cutoff) > 0.1 * spec.abs_tol && cutoff < 1e12 {
            cutoff *= 2.0;
        }
        let period = 2.0 * std::f64::consts::PI / s;
        let count = (cutoff / period).ceil().min(MAX_PERIOD_BREAKS) as usize;
        breaks.extend((1..=count).flat_map(|j| [j as f64 * period, -(j as f64) * period]));
        spec.max_panels = spec.max_panels.max(8 * breaks.len());
    }
    levy::line_integral(
        k,
        |t| (s * t).cos() * k.weighted(t) / (1.0 + t * t),
        tail,
        &breaks,
        &spec,
    )
}

/// Largest deviation, over the test functions `cos(s t)`, between the
/// generating measure of `mollified` and `a delta_0 + |t| k(t)/(1+t^2) dt`.
pub fn sigma_distance(
    mollified: &LevyDensity,
    base: &LevyDensity,
    a: f64,
    frequencies: &[f64],
) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for &s in frequencies {
        let approx = sigma_cos(mollified, s)?;
        let target = a + sigma_cos(base, s)?;
        worst = worst.max((approx - target).abs());
    }
    Ok(worst)
}

/// Mass of the semicircular Gaussian part, `int |t| a n^2 exp(-(nt)^2) dt = a`.
pub fn gaussian_part_mass(a: f64) -> f64 {
    a
}
