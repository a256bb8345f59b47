//! Multiletter common entropy: per-letter values `(1/n) G(X^n;Y^n)`,
//! subadditivity checks via the concatenated certificate, and the resulting
//! interval bound on the per-letter limit.

use serde::Serialize;

use crate::factorization::MarkovFactorization;
use crate::prob::{renormalize_exact, sbes_erasure_probability, JointPmf};
use crate::solver::{cardinality_bound, solve_best, SolveConfig, SolveReport};
use crate::wyner::wyner_sbes_closed;
use crate::Result;

/// Product-source solves cap the component cardinality here to keep desk
/// runtimes bounded; `card_capped` reports when the cap was binding.
pub const MULTILETTER_CARD_CAP: usize = 16;

#[derive(Debug, Clone, Serialize)]
pub struct MultiletterReport {
    pub n: usize,
    pub g_n: f64,
    pub per_letter: f64,
    pub card_capped: bool,
    pub solve: SolveReport,
}

/// `G(X^n;Y^n)` of the i.i.d. product source, and its per-letter value.
pub fn g_multiletter(j: &JointPmf, n: usize, cfg: &SolveConfig) -> Result<MultiletterReport> {
    let product = j.product_source(n)?;
    let bound = cardinality_bound(product.nx(), product.ny());
    let card_capped = bound > MULTILETTER_CARD_CAP && cfg.max_card.is_none();
    let cfg = if card_capped {
        SolveConfig {
            max_card: Some(MULTILETTER_CARD_CAP),
            ..cfg.clone()
        }
    } else {
        cfg.clone()
    };
    let solve = solve_best(&product, &cfg)?;
    Ok(MultiletterReport {
        n,
        g_n: solve.g_bits,
        per_letter: solve.g_bits / n as f64,
        card_capped,
        solve,
    })
}

/// The pair certificate `(W_m, W_n)`: outer-product weights, per-letter
/// columns combined by tensor product. Always feasible for the
/// `(m+n)`-letter product.
pub fn concatenated(
    f_m: &MarkovFactorization,
    f_n: &MarkovFactorization,
) -> MarkovFactorization {
    let kron = |a: &[f64], b: &[f64]| -> Vec<f64> {
        let mut out = Vec::with_capacity(a.len() * b.len());
        for &x in a {
            for &y in b {
                out.push(x * y);
            }
        }
        out
    };
    let mut weights = Vec::new();
    let mut x_cols = Vec::new();
    let mut y_cols = Vec::new();
    for wm in 0..f_m.card() {
        for wn in 0..f_n.card() {
            weights.push(f_m.weights()[wm] * f_n.weights()[wn]);
            x_cols.push(kron(f_m.x_col(wm), f_n.x_col(wn)));
            y_cols.push(kron(f_m.y_col(wm), f_n.y_col(wn)));
        }
    }
    renormalize_exact(&mut weights);
    MarkovFactorization::new(weights, x_cols, y_cols)
        .expect("tensor product of valid factorizations is valid")
}

#[derive(Debug, Clone, Serialize)]
pub struct SubadditivityReport {
    pub m: usize,
    pub n: usize,
    pub g_m: f64,
    pub g_n: f64,
    pub g_mn: f64,
    /// `g_{m+n} <= g_m + g_n` up to solver slack.
    pub ok: bool,
    /// Max-abs error of the concatenated certificate on the (m+n)-product.
    pub concat_error: f64,
    pub concat_entropy: f64,
}

/// Solver slack allowed in the subadditivity comparison.
pub const SUBADD_SLACK: f64 = 2e-3;

/// Checks `G(X^{m+n};Y^{m+n}) <= G(X^m;Y^m) + G(X^n;Y^n)` at solver slack and
/// verifies the concatenated certificate against the `(m+n)`-product.
pub fn subadditivity_check(
    j: &JointPmf,
    m: usize,
    n: usize,
    cfg: &SolveConfig,
) -> Result<SubadditivityReport> {
    let rep_m = g_multiletter(j, m, cfg)?;
    let rep_n = g_multiletter(j, n, cfg)?;
    let rep_mn = g_multiletter(j, m + n, cfg)?;
    let concat = concatenated(&rep_m.solve.certificate, &rep_n.solve.certificate);
    let product = j.product_source(m + n)?;
    let verify = concat.verify(&product, 1e-8)?;
    Ok(SubadditivityReport {
        m,
        n,
        g_m: rep_m.g_n,
        g_n: rep_n.g_n,
        g_mn: rep_mn.g_n,
        ok: rep_mn.g_n <= rep_m.g_n + rep_n.g_n + SUBADD_SLACK,
        concat_error: verify.max_abs_error,
        concat_entropy: concat.weight_entropy(),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct PerLetterValue {
    pub n: usize,
    pub g_n: f64,
    pub per_letter: f64,
}

/// Interval bound on the per-letter limit: the upper end is the best
/// per-letter value seen up to `n_max`; the lower end is the exact Wyner
/// value for SBES instances and `I(X;Y)` otherwise. No single-letter formula
/// is known, so only the interval is reported.
#[derive(Debug, Clone, Serialize)]
pub struct GbarBound {
    pub lower_bits: f64,
    pub upper_bits: f64,
    pub lower_source: &'static str,
    pub per_letter: Vec<PerLetterValue>,
}

pub fn gbar_upper(j: &JointPmf, n_max: usize, cfg: &SolveConfig) -> Result<GbarBound> {
    let mut per_letter = Vec::new();
    for n in 1..=n_max.max(1) {
        let rep = g_multiletter(j, n, cfg)?;
        per_letter.push(PerLetterValue {
            n,
            g_n: rep.g_n,
            per_letter: rep.per_letter,
        });
    }
    let upper_bits = per_letter
        .iter()
        .map(|v| v.per_letter)
        .fold(f64::INFINITY, f64::min);
    let (lower_bits, lower_source) = match sbes_erasure_probability(j) {
        Some(p) => (wyner_sbes_closed(p)?, "wyner_sbes"),
        None => (j.mutual_information(), "mutual_information"),
    };
    Ok(GbarBound {
        lower_bits,
        upper_bits,
        lower_source,
        per_letter,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prob::sbes;

    #[test]
    fn concatenated_certificate_is_feasible() {
        let j = JointPmf::from_matrix(vec![
            vec![1.0 / 3.0, 1.0 / 3.0],
            vec![1.0 / 3.0, 0.0],
        ])
        .unwrap();
        let one = solve_best(&j, &SolveConfig::quick(4, 0)).unwrap();
        let cc = concatenated(&one.certificate, &one.certificate);
        let p2 = j.product_source(2).unwrap();
        let rep = cc.verify(&p2, 1e-10).unwrap();
        assert!(rep.ok, "error {}", rep.max_abs_error);
        assert!(
            (cc.weight_entropy() - 2.0 * one.g_bits).abs() < 1e-12,
            "tensor entropy adds"
        );
    }

    #[test]
    fn independent_source_multiletter_is_zero() {
        let j = JointPmf::from_matrix(vec![vec![0.25, 0.25], vec![0.25, 0.25]]).unwrap();
        let rep = g_multiletter(&j, 2, &SolveConfig::quick(4, 0)).unwrap();
        assert!(rep.g_n < 1e-9);
    }

    #[test]
    fn perfectly_correlated_bit_two_letters() {
        let j = JointPmf::from_matrix(vec![vec![0.5, 0.0], vec![0.0, 0.5]]).unwrap();
        let rep = g_multiletter(&j, 2, &SolveConfig::quick(4, 0)).unwrap();
        assert!((rep.g_n - 2.0).abs() < 1e-9, "got {}", rep.g_n);
        assert!((rep.per_letter - 1.0).abs() < 1e-9);
    }

    #[test]
    fn gbar_interval_for_sbes() {
        let s = sbes(0.9).unwrap();
        let bound = gbar_upper(&s, 1, &SolveConfig::quick(4, 0)).unwrap();
        assert_eq!(bound.lower_source, "wyner_sbes");
        assert!((bound.lower_bits - 0.4689955935892812).abs() < 1e-12);
        assert!((bound.upper_bits - 0.5689955935892812).abs() < 1e-9);
        assert!(bound.lower_bits <= bound.upper_bits);
    }
}
