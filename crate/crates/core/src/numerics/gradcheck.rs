use alloc::format;
use alloc::vec::Vec;

use super::{Graph, Matrix, Var};
use crate::{Error, Result};

/// Outcome of a finite-difference comparison.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheck {
    /// `max |analytic − numeric| / max(1, |analytic|)` over all entries.
    pub max_rel_error: f64,
    /// Which input and which flat entry produced the maximum.
    pub worst: (usize, usize),
    pub analytic: f64,
    pub numeric: f64,
}

/// Compares reverse-mode gradients of a scalar objective against central
/// differences `(f(θ+h) − f(θ−h)) / 2h`, entry by entry.
///
/// `objective` receives a fresh graph and one leaf per input matrix and must
/// return a `1×1` node. It is called `1 + 2·(number of entries)` times, so it
/// has to be deterministic.
pub fn grad_check<F>(mut objective: F, at: &[Matrix], h: f64) -> Result<GradCheck>
where
    F: FnMut(&mut Graph, &[Var]) -> Result<Var>,
{
    if !(1e-7..=1e-3).contains(&h) {
        return Err(Error::Contract(format!("grad_check: step {h} outside [1e-7, 1e-3]")));
    }

    let mut graph = Graph::new();
    let leaves: Vec<Var> = at.iter().map(|m| graph.leaf(m.clone())).collect();
    let out = objective(&mut graph, &leaves)?;
    if graph.value(out).shape() != (1, 1) {
        let (r, c) = graph.value(out).shape();
        return Err(Error::Contract(format!(
            "grad_check: objective must be scalar, got {r}x{c}"
        )));
    }
    let grads = graph.backward(out)?;
    let analytic: Vec<Matrix> = leaves
        .iter()
        .zip(at)
        .map(|(&v, m)| grads.get_or_zeros(v, m))
        .collect();

    let mut eval = |inputs: &[Matrix]| -> Result<f64> {
        let mut g = Graph::new();
        let leaves: Vec<Var> = inputs.iter().map(|m| g.leaf(m.clone())).collect();
        let out = objective(&mut g, &leaves)?;
        Ok(g.value(out).get(0, 0))
    };

    let mut report = GradCheck {
        max_rel_error: 0.0,
        worst: (0, 0),
        analytic: 0.0,
        numeric: 0.0,
    };
    let mut inputs: Vec<Matrix> = at.to_vec();
    for p in 0..inputs.len() {
        for k in 0..inputs[p].len() {
            let orig = inputs[p].data()[k];
            inputs[p].data_mut()[k] = orig + h;
            let plus = eval(&inputs)?;
            inputs[p].data_mut()[k] = orig - h;
            let minus = eval(&inputs)?;
            inputs[p].data_mut()[k] = orig;

            let numeric = (plus - minus) / (2.0 * h);
            let a = analytic[p].data()[k];
            let err = (a - numeric).abs() / a.abs().max(1.0);
            if err > report.max_rel_error || !err.is_finite() {
                report = GradCheck {
                    max_rel_error: if err.is_finite() { err } else { f64::INFINITY },
                    worst: (p, k),
                    analytic: a,
                    numeric,
                };
            }
        }
    }
    Ok(report)
}
