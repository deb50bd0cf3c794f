//! Free cumulants of `nu` straight from the triplet, and moments through the
//! free moment-cumulant recursion.
//!
//! Expanding the free cumulant transform in powers of `w` gives
//! `kappa_1 = eta + int_{|t|>1} sign(t) k(t) dt`,
//! `kappa_2 = a + int |t| k(t) dt` and
//! `kappa_{m+1} = int t^m sign(t) k(t) dt` for `m >= 2`.

use crate::error::{Error, Result};
use crate::levy::{self, FreeTriplet};
use crate::quad::QuadSpec;

/// Largest supported cumulant order.
pub const MAX_ORDER: usize = 12;

#[derive(Debug, Clone, PartialEq)]
pub struct CumulantList {
    /// `kappa[j]` is the cumulant of order `j + 1`.
    pub kappa: Vec<f64>,
    pub a: f64,
    pub eta: f64,
}

impl CumulantList {
    /// Cumulant of order `n` (1-based).
    pub fn order(&self, n: usize) -> Option<f64> {
        n.checked_sub(1).and_then(|i| self.kappa.get(i).copied())
    }
}

fn moment_spec() -> QuadSpec {
    QuadSpec {
        abs_tol: 1e-11,
        rel_tol: 1e-12,
        ..QuadSpec::default()
    }
}

/// `int_{|t| > cut} t^m sign(t) k(t) dt`, with `cut = 0` for the whole line.
fn signed_moment(triplet: &FreeTriplet, m: i32, cut: f64, order: usize) -> Result<f64> {
    let k = &triplet.k;
    let integrand = |t: f64| {
        if t == 0.0 || t.abs() <= cut {
            0.0
        } else {
            t.signum() * t.powi(m) * k.eval(t)
        }
    };
    let breaks = if cut > 0.0 { vec![-cut, cut] } else { Vec::new() };
    match levy::line_integral(k, integrand, |c| k.tail_bound(c, m), &breaks, &moment_spec()) {
        Err(Error::NonIntegrable) => Err(Error::DivergentMoment { order }),
        other => other,
    }
}

/// Cumulants of orders `1..=order`.
pub fn cumulants_from_k(triplet: &FreeTriplet, order: usize) -> Result<CumulantList> {
    if order == 0 || order > MAX_ORDER {
        return Err(Error::InvalidArgument(format!(
            "cumulant order must lie in 1..={MAX_ORDER}, got {order}"
        )));
    }
    let mut kappa = Vec::with_capacity(order);
    kappa.push(triplet.eta + signed_moment(triplet, 0, 1.0, 1)?);
    for n in 2..=order {
        let mut value = signed_moment(triplet, n as i32 - 1, 0.0, n)?;
        if n == 2 {
            value += triplet.a;
        }
        kappa.push(value);
    }
    Ok(CumulantList {
        kappa,
        a: triplet.a,
        eta: triplet.eta,
    })
}

/// Moments `m_1..m_N` from free cumulants `kappa_1..kappa_N`:
/// `m_n = sum_{s=1}^{n} kappa_s sum_{i_1+...+i_s = n-s} m_{i_1} ... m_{i_s}`.
pub fn moments_from_cumulants(kappa: &[f64]) -> Vec<f64> {
    let mut m = vec![1.0];
    for n in 1..=kappa.len() {
        let mut total = 0.0;
        // coefficients of M(z)^s up to degree n - 1
        let mut power = vec![0.0; n];
        power[0] = 1.0;
        for s in 1..=n {
            let mut next = vec![0.0; n];
            for (i, &p) in power.iter().enumerate() {
                if p == 0.0 {
                    continue;
                }
                for (j, &mj) in m.iter().enumerate().take(n - i) {
                    next[i + j] += p * mj;
                }
            }
            power = next;
            total += kappa[s - 1] * power[n - s];
        }
        m.push(total);
    }
    m.remove(0);
    m
}
