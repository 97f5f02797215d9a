//! Best mean inside an L1 ball around `p`, over the closed simplex.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct OlpSolution {
    pub value: f64,
    /// Maximizer; may contain zeros.
    pub optimizer: Vec<f64>,
}

/// Exact solution of `max { Σ q v : ‖p - q‖₁ ≤ δ, q ∈ simplex }`.
///
/// Moves `m = min(δ/2, 1 - p[x*])` of mass onto `x* = argmax v`, taking it
/// from the lowest-valued states first.
pub fn b_value(p: &[f64], v: &[f64], delta: f64) -> Result<OlpSolution> {
    if p.len() != v.len() {
        return Err(Error::Dimension {
            expected: p.len(),
            got: v.len(),
        });
    }
    if p.is_empty() {
        return Err(Error::InvalidArgument("empty distribution".into()));
    }
    if delta.is_nan() || delta < 0.0 {
        return Err(Error::InvalidArgument(format!("L1 radius {delta} is negative")));
    }
    let top = (0..v.len()).fold(0, |best, x| if v[x] > v[best] { x } else { best });
    let mut q = p.to_vec();
    let mass = (0.5 * delta).min(1.0 - p[top]).max(0.0);
    if mass > 0.0 {
        let mut order: Vec<usize> = (0..v.len()).filter(|&x| x != top).collect();
        order.sort_by(|&a, &b| v[a].total_cmp(&v[b]).then(a.cmp(&b)));
        let mut remaining = mass;
        for x in order {
            if remaining <= 0.0 {
                break;
            }
            let take = q[x].min(remaining);
            q[x] -= take;
            remaining -= take;
        }
        q[top] += mass - remaining.max(0.0);
    }
    let value = crate::mdp::dot(&q, v);
    Ok(OlpSolution { value, optimizer: q })
}
