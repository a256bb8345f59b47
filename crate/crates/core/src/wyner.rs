//! Wyner common information for the symmetric binary erasure source and the
//! exact channel-simulation rate region of the binary erasure channel.

use serde::Serialize;

use crate::prob::binary_entropy;
use crate::{Error, Result};

/// Two cascaded erasure stages realizing the SBES auxiliary W:
/// `p1 + p2 - p1*p2 = p`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SbesWynerParams {
    pub p1: f64,
    pub p2: f64,
}

/// Piecewise closed form: 1 for `p <= 1/2`, `H(p)` above (continuous at 1/2).
pub fn wyner_sbes_closed(p: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::OutOfRange {
            what: "erasure probability",
            value: p,
        });
    }
    if p <= 0.5 {
        Ok(1.0)
    } else {
        binary_entropy(p)
    }
}

/// Result of the numeric minimization over the two-stage parametrization.
#[derive(Debug, Clone, Serialize)]
pub struct WynerNumeric {
    pub j_bits: f64,
    pub argmin: SbesWynerParams,
}

/// Objective `(1 - p1) + H(p) - (1 - p1) H(p2)` with `p2 = (p - p1)/(1 - p1)`.
fn objective(p: f64, p1: f64) -> f64 {
    let h_p = binary_entropy(p).expect("p validated");
    let r = 1.0 - p1;
    if r <= 1e-15 {
        return h_p;
    }
    let p2 = ((p - p1) / r).clamp(0.0, 1.0);
    r + h_p - r * binary_entropy(p2).expect("clamped")
}

/// Minimizes the two-stage objective over `p1 ∈ [0, p]` with a grid of
/// `steps` points followed by golden-section refinement. Matches
/// [`wyner_sbes_closed`] to well below 1e-6.
pub fn wyner_sbes_numeric(p: f64, steps: usize) -> Result<WynerNumeric> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::OutOfRange {
            what: "erasure probability",
            value: p,
        });
    }
    let steps = steps.max(2);
    let mut best_i = 0;
    let mut best = f64::INFINITY;
    let at = |i: usize| p * i as f64 / (steps - 1) as f64;
    for i in 0..steps {
        let v = objective(p, at(i));
        if v < best {
            best = v;
            best_i = i;
        }
    }
    // Golden-section refinement on the bracketing interval.
    let mut lo = at(best_i.saturating_sub(1));
    let mut hi = at((best_i + 1).min(steps - 1));
    const INVPHI: f64 = 0.618_033_988_749_894_9;
    let mut x1 = hi - INVPHI * (hi - lo);
    let mut x2 = lo + INVPHI * (hi - lo);
    let mut f1 = objective(p, x1);
    let mut f2 = objective(p, x2);
    for _ in 0..120 {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INVPHI * (hi - lo);
            f1 = objective(p, x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INVPHI * (hi - lo);
            f2 = objective(p, x2);
        }
    }
    let p1 = if f1 <= f2 { x1 } else { x2 };
    let j_bits = objective(p, p1).min(best);
    let p1 = if j_bits < best { p1 } else { at(best_i) };
    let p2 = if 1.0 - p1 > 1e-15 {
        ((p - p1) / (1.0 - p1)).clamp(0.0, 1.0)
    } else {
        0.0
    };
    Ok(WynerNumeric {
        j_bits,
        argmin: SbesWynerParams { p1, p2 },
    })
}

/// One point of the erasure-channel exact-simulation boundary.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct RateRegionPoint {
    pub r: f64,
    pub r_min: f64,
    pub sum_min: f64,
}

fn sum_min(p: f64, r: f64) -> f64 {
    let h_p = binary_entropy(p).expect("p validated");
    let arg = ((1.0 - p) / r).clamp(0.0, 1.0);
    h_p + r * (1.0 - binary_entropy(arg).expect("clamped"))
}

/// Samples the region boundary at `steps` uniformly spaced values of the
/// rate parameter `r ∈ [1-p, min(2(1-p), 1)]`.
pub fn bec_region_boundary(p: f64, steps: usize) -> Result<Vec<RateRegionPoint>> {
    if !(0.0 < p && p < 1.0) {
        return Err(Error::OutOfRange {
            what: "erasure probability",
            value: p,
        });
    }
    let steps = steps.max(2);
    let lo = 1.0 - p;
    let hi = (2.0 * (1.0 - p)).min(1.0);
    Ok((0..steps)
        .map(|i| {
            let r = lo + (hi - lo) * i as f64 / (steps - 1) as f64;
            RateRegionPoint {
                r,
                r_min: r,
                sum_min: sum_min(p, r),
            }
        })
        .collect())
}

/// True when some admissible `r` satisfies both region constraints for the
/// rate pair `(R, R0)`. Checks the clamp of `R` into the interval plus a
/// 33-point scan.
pub fn bec_region_contains(p: f64, rate: f64, r0: f64) -> Result<bool> {
    if !(0.0 < p && p < 1.0) {
        return Err(Error::OutOfRange {
            what: "erasure probability",
            value: p,
        });
    }
    if rate < 0.0 || r0 < 0.0 {
        return Ok(false);
    }
    let lo = 1.0 - p;
    let hi = (2.0 * (1.0 - p)).min(1.0);
    const SLACK: f64 = 1e-9;
    let admits = |r: f64| rate >= r - SLACK && rate + r0 >= sum_min(p, r) - SLACK;
    if admits(rate.clamp(lo, hi)) {
        return Ok(true);
    }
    Ok((0..33).any(|i| admits(lo + (hi - lo) * i as f64 / 32.0)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn closed_form_branches() {
        assert_eq!(wyner_sbes_closed(0.3).unwrap(), 1.0);
        assert!(close(
            wyner_sbes_closed(0.9).unwrap(),
            0.4689955935892812,
            1e-12
        ));
        assert_eq!(wyner_sbes_closed(0.5).unwrap(), 1.0);
        assert!(wyner_sbes_closed(1.2).is_err());
    }

    #[test]
    fn numeric_matches_closed() {
        for &p in &[0.0, 0.1, 0.3, 0.5, 0.7, 0.9, 1.0] {
            let num = wyner_sbes_numeric(p, 256).unwrap();
            let closed = wyner_sbes_closed(p).unwrap();
            assert!(
                close(num.j_bits, closed, 1e-7),
                "p={p}: {} vs {closed}",
                num.j_bits
            );
        }
        // Above threshold the optimizer sits at p1 = 2p-1, p2 = 1/2.
        let num = wyner_sbes_numeric(0.9, 256).unwrap();
        assert!(close(num.argmin.p1, 0.8, 1e-4));
        assert!(close(num.argmin.p2, 0.5, 1e-3));
    }

    #[test]
    fn region_boundary_known_points() {
        let pts = bec_region_boundary(0.5, 3).unwrap();
        assert!(close(pts[0].r, 0.5, 1e-15));
        assert!(close(pts[0].sum_min, 1.5, 1e-12));
        assert!(close(pts[2].r, 1.0, 1e-15));
        assert!(close(pts[2].sum_min, 1.0, 1e-12));
        assert!(bec_region_boundary(0.0, 4).is_err());
    }

    #[test]
    fn region_containment() {
        assert!(bec_region_contains(0.5, 1.0, 0.0).unwrap());
        assert!(!bec_region_contains(0.5, 0.4, 10.0).unwrap());
        assert!(bec_region_contains(0.5, 0.5, 1.0).unwrap());
    }
}
