//! Markov factorizations `(p_W, p_{X|W}, p_{Y|W})` witnessing `X → W → Y`,
//! and the structural moves on them.
//!
//! A factorization is stored per component: weight, a column distribution
//! over X, and one over Y. The induced joint is the mixture of the rank-1
//! products. Two entropy-reducing moves operate on a factorization without
//! changing its induced joint:
//!
//! - [`MarkovFactorization::reduce_support`] walks null-space perturbations of
//!   the lifted joint `p(x,y,w)` to an extreme step, zeroing one component
//!   weight at a time until `|W|` is at most the rank bound;
//! - [`MarkovFactorization::same_support_improve`] takes two components whose
//!   conditional columns share a support and extends the segment between the
//!   columns to the simplex boundary, strictly lowering `H(W)` or making the
//!   supports distinct.

use std::collections::BTreeSet;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::prob::{entropy_bits, renormalize_exact, Dist, JointPmf};
use crate::{Error, Result};

/// Column-stochastic sum tolerance.
pub const COLUMN_TOL: f64 = 1e-12;

/// Entries above this count as support members.
pub const SUPPORT_EPS: f64 = 1e-9;

/// Conditional rows closer than this (max-abs) are merged by the
/// sufficient-statistic collapse; same threshold for identical columns.
pub const ROW_MATCH_TOL: f64 = 1e-12;

/// Component weights at or below this are dropped at construction.
const WEIGHT_SNAP: f64 = 1e-15;

/// Outcome of checking a factorization against a target pmf.
#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub max_abs_error: f64,
    pub tol: f64,
    pub ok: bool,
}

/// A feasible direction `φ` over W for the weight perturbation
/// `p_ε(x,y,w) = p(x,y,w)(1 + ε φ(w))`, with the extreme admissible steps.
#[derive(Debug, Clone)]
pub struct Perturbation {
    pub phi: Vec<f64>,
    pub eps_neg: f64,
    pub eps_pos: f64,
}

/// A mixture of rank-1 product components reconstructing a joint pmf.
///
/// Canonical order: components sorted by descending weight, ties broken by
/// lexicographic comparison of the Y column, then the X column. Components
/// with zero weight are dropped at construction.
///
/// JSON shape: `{"p_w": [...], "p_x_given_w": [[|X| rows x |W| cols]],
/// "p_y_given_w": [[|Y| x |W|]]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "FactorizationJson", into = "FactorizationJson")]
pub struct MarkovFactorization {
    weights: Vec<f64>,
    x_cols: Vec<Vec<f64>>,
    y_cols: Vec<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
struct FactorizationJson {
    p_w: Vec<f64>,
    p_x_given_w: Vec<Vec<f64>>,
    p_y_given_w: Vec<Vec<f64>>,
}

impl TryFrom<FactorizationJson> for MarkovFactorization {
    type Error = Error;

    fn try_from(j: FactorizationJson) -> Result<Self> {
        let k = j.p_w.len();
        let cols = |rows: &[Vec<f64>], what: &str| -> Result<Vec<Vec<f64>>> {
            if rows.iter().any(|r| r.len() != k) {
                return Err(Error::DimensionMismatch(format!(
                    "{what} rows must have {k} columns"
                )));
            }
            Ok((0..k)
                .map(|w| rows.iter().map(|r| r[w]).collect())
                .collect())
        };
        MarkovFactorization::new(
            j.p_w.clone(),
            cols(&j.p_x_given_w, "p_x_given_w")?,
            cols(&j.p_y_given_w, "p_y_given_w")?,
        )
    }
}

impl From<MarkovFactorization> for FactorizationJson {
    fn from(f: MarkovFactorization) -> Self {
        let rows = |cols: &[Vec<f64>], n: usize| -> Vec<Vec<f64>> {
            (0..n)
                .map(|i| cols.iter().map(|c| c[i]).collect())
                .collect()
        };
        FactorizationJson {
            p_w: f.weights.clone(),
            p_x_given_w: rows(&f.x_cols, f.nx()),
            p_y_given_w: rows(&f.y_cols, f.ny()),
        }
    }
}

fn lex_cmp(a: &[f64], b: &[f64]) -> std::cmp::Ordering {
    for (x, y) in a.iter().zip(b.iter()) {
        let ord = x.total_cmp(y);
        if ord != std::cmp::Ordering::Equal {
            return ord;
        }
    }
    std::cmp::Ordering::Equal
}

impl MarkovFactorization {
    /// Validates and canonicalizes: weights on the simplex (within column
    /// tolerance, then renormalized exactly), both conditional matrices
    /// column-stochastic, zero-weight components dropped, canonical sort.
    pub fn new(
        weights: Vec<f64>,
        x_cols: Vec<Vec<f64>>,
        y_cols: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let k = weights.len();
        if k == 0 {
            return Err(Error::Empty("factorization"));
        }
        if x_cols.len() != k || y_cols.len() != k {
            return Err(Error::DimensionMismatch(format!(
                "{} weights, {} x columns, {} y columns",
                k,
                x_cols.len(),
                y_cols.len()
            )));
        }
        let nx = x_cols[0].len();
        let ny = y_cols[0].len();
        if nx == 0 || ny == 0 {
            return Err(Error::Empty("conditional column"));
        }
        for (i, &w) in weights.iter().enumerate() {
            if w < 0.0 {
                return Err(Error::NegativeEntry {
                    row: i,
                    col: 0,
                    value: w,
                });
            }
        }
        let wsum: f64 = weights.iter().sum();
        if (wsum - 1.0).abs() > COLUMN_TOL {
            return Err(Error::MassViolation { sum: wsum });
        }
        let check_col = |col: &[f64], n: usize, what: &str| -> Result<()> {
            if col.len() != n {
                return Err(Error::DimensionMismatch(format!(
                    "{what} column has {} entries, expected {n}",
                    col.len()
                )));
            }
            for (i, &v) in col.iter().enumerate() {
                if v < 0.0 {
                    return Err(Error::NegativeEntry {
                        row: i,
                        col: 0,
                        value: v,
                    });
                }
            }
            let s: f64 = col.iter().sum();
            if (s - 1.0).abs() > COLUMN_TOL {
                return Err(Error::MassViolation { sum: s });
            }
            Ok(())
        };
        for col in &x_cols {
            check_col(col, nx, "p_x_given_w")?;
        }
        for col in &y_cols {
            check_col(col, ny, "p_y_given_w")?;
        }

        let mut comps: Vec<(f64, Vec<f64>, Vec<f64>)> = weights
            .into_iter()
            .zip(x_cols)
            .zip(y_cols)
            .filter(|((w, _), _)| *w > WEIGHT_SNAP)
            .map(|((w, mut x), mut y)| {
                renormalize_exact(&mut x);
                renormalize_exact(&mut y);
                (w, x, y)
            })
            .collect();
        if comps.is_empty() {
            return Err(Error::MassViolation { sum: 0.0 });
        }
        comps.sort_by(|a, b| {
            b.0.total_cmp(&a.0)
                .then_with(|| lex_cmp(&a.2, &b.2))
                .then_with(|| lex_cmp(&a.1, &b.1))
        });
        let mut weights: Vec<f64> = comps.iter().map(|c| c.0).collect();
        renormalize_exact(&mut weights);
        Ok(Self {
            weights,
            x_cols: comps.iter().map(|c| c.1.clone()).collect(),
            y_cols: comps.into_iter().map(|c| c.2).collect(),
        })
    }

    /// The trivial factorization of an independent pair: one component.
    pub fn independent(px: &Dist, py: &Dist) -> Self {
        Self {
            weights: vec![1.0],
            x_cols: vec![px.weights().to_vec()],
            y_cols: vec![py.weights().to_vec()],
        }
    }

    /// `W = X`: identity on the X side, conditional rows on the Y side.
    pub fn from_w_equals_x(j: &JointPmf) -> Self {
        let px = j.x_marginal();
        let weights = px.weights().to_vec();
        let x_cols = (0..j.nx())
            .map(|i| {
                let mut c = vec![0.0; j.nx()];
                c[i] = 1.0;
                c
            })
            .collect();
        let y_cols = j.conditional_rows();
        Self::new(weights, x_cols, y_cols).expect("W=X is always a valid factorization")
    }

    /// `W = Y`, symmetric to [`MarkovFactorization::from_w_equals_x`].
    pub fn from_w_equals_y(j: &JointPmf) -> Self {
        Self::from_w_equals_x(&j.transpose()).transposed()
    }

    /// `W = (X,Y)`: one point-mass component per support cell.
    pub fn from_w_equals_xy(j: &JointPmf) -> Self {
        let mut weights = Vec::new();
        let mut x_cols = Vec::new();
        let mut y_cols = Vec::new();
        for i in 0..j.nx() {
            for jj in 0..j.ny() {
                let w = j.get(i, jj);
                if w > 0.0 {
                    weights.push(w);
                    let mut xc = vec![0.0; j.nx()];
                    xc[i] = 1.0;
                    x_cols.push(xc);
                    let mut yc = vec![0.0; j.ny()];
                    yc[jj] = 1.0;
                    y_cols.push(yc);
                }
            }
        }
        Self::new(weights, x_cols, y_cols).expect("W=(X,Y) is always valid")
    }

    pub fn card(&self) -> usize {
        self.weights.len()
    }

    pub fn nx(&self) -> usize {
        self.x_cols[0].len()
    }

    pub fn ny(&self) -> usize {
        self.y_cols[0].len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weight_dist(&self) -> Dist {
        Dist::from_unnormalized(self.weights.clone()).expect("weights sum to 1")
    }

    pub fn x_col(&self, w: usize) -> &[f64] {
        &self.x_cols[w]
    }

    pub fn y_col(&self, w: usize) -> &[f64] {
        &self.y_cols[w]
    }

    /// Swaps the roles of X and Y.
    pub fn transposed(&self) -> Self {
        Self {
            weights: self.weights.clone(),
            x_cols: self.y_cols.clone(),
            y_cols: self.x_cols.clone(),
        }
        .resorted()
    }

    fn resorted(self) -> Self {
        Self::new(self.weights, self.x_cols, self.y_cols).expect("resort of valid factorization")
    }

    /// `Σ_w p_w(w) p(x|w) p(y|w)` as a flat row-major `|X| x |Y|` matrix.
    pub fn induced_matrix(&self) -> Vec<f64> {
        let (nx, ny) = (self.nx(), self.ny());
        let mut m = vec![0.0; nx * ny];
        for w in 0..self.card() {
            let pw = self.weights[w];
            for (i, &px) in self.x_cols[w].iter().enumerate() {
                if px == 0.0 {
                    continue;
                }
                for (j, &py) in self.y_cols[w].iter().enumerate() {
                    m[i * ny + j] += pw * px * py;
                }
            }
        }
        m
    }

    /// The induced joint as a canonical [`JointPmf`] over the given labels.
    pub fn induced_joint(&self, x_labels: &[String], y_labels: &[String]) -> Result<JointPmf> {
        if x_labels.len() != self.nx() || y_labels.len() != self.ny() {
            return Err(Error::DimensionMismatch(
                "labels do not match factorization dimensions".into(),
            ));
        }
        let ny = self.ny();
        let m = self.induced_matrix();
        let rows = (0..self.nx())
            .map(|i| m[i * ny..(i + 1) * ny].to_vec())
            .collect();
        JointPmf::new(rows, x_labels.to_vec(), y_labels.to_vec())
    }

    /// Max-abs error of the induced joint against `target`.
    pub fn verify(&self, target: &JointPmf, tol: f64) -> Result<VerifyReport> {
        if self.nx() != target.nx() || self.ny() != target.ny() {
            return Err(Error::DimensionMismatch(format!(
                "factorization is {}x{}, target is {}x{}",
                self.nx(),
                self.ny(),
                target.nx(),
                target.ny()
            )));
        }
        let m = self.induced_matrix();
        let max_abs_error = m
            .iter()
            .zip(target.matrix())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        Ok(VerifyReport {
            max_abs_error,
            tol,
            ok: max_abs_error <= tol,
        })
    }

    /// `H(p_W)` in bits.
    pub fn weight_entropy(&self) -> f64 {
        entropy_bits(&self.weights)
    }

    /// `I(W; X,Y)` of the lifted joint `p(w,x,y)`, the objective of the Wyner
    /// quantity. Never exceeds [`MarkovFactorization::weight_entropy`].
    pub fn wyner_objective(&self) -> f64 {
        let induced = self.induced_matrix();
        let ny = self.ny();
        let mut mi = 0.0;
        for w in 0..self.card() {
            let pw = self.weights[w];
            if pw == 0.0 {
                continue;
            }
            for (i, &px) in self.x_cols[w].iter().enumerate() {
                for (j, &py) in self.y_cols[w].iter().enumerate() {
                    let q = pw * px * py;
                    if q > 0.0 {
                        mi += q * (q / (pw * induced[i * ny + j])).log2();
                    }
                }
            }
        }
        mi.max(0.0)
    }

    fn support(col: &[f64]) -> BTreeSet<usize> {
        col.iter()
            .enumerate()
            .filter(|(_, &v)| v > SUPPORT_EPS)
            .map(|(i, _)| i)
            .collect()
    }

    /// Support sets of the Y columns, one per component.
    pub fn y_supports(&self) -> Vec<BTreeSet<usize>> {
        self.y_cols.iter().map(|c| Self::support(c)).collect()
    }

    /// Support sets of the X columns.
    pub fn x_supports(&self) -> Vec<BTreeSet<usize>> {
        self.x_cols.iter().map(|c| Self::support(c)).collect()
    }

    /// True when the Y supports (and, symmetrically, X supports) are pairwise
    /// distinct — the conclusion of the distinct-support lemma.
    pub fn has_distinct_supports(&self) -> bool {
        let distinct = |sets: Vec<BTreeSet<usize>>| {
            let n = sets.len();
            let unique: BTreeSet<_> = sets.into_iter().collect();
            unique.len() == n
        };
        distinct(self.y_supports()) && distinct(self.x_supports())
    }

    /// A basis for the null space of the `|X||Y| x |W|` matrix
    /// `A[(x,y),w] = p(x,y,w)`, each vector packaged with its admissible
    /// extreme steps. Empty when `|W| <= rank(A)`.
    pub fn null_space_perturbations(&self) -> Vec<Perturbation> {
        let k = self.card();
        let cells = self.nx() * self.ny();
        let rows = cells.max(k);
        // Pad with zero rows so the SVD returns a full K x K right factor.
        let mut a = DMatrix::<f64>::zeros(rows, k);
        let ny = self.ny();
        for w in 0..k {
            let pw = self.weights[w];
            for (i, &px) in self.x_cols[w].iter().enumerate() {
                for (j, &py) in self.y_cols[w].iter().enumerate() {
                    a[(i * ny + j, w)] = pw * px * py;
                }
            }
        }
        let svd = a.svd(false, true);
        let v_t = svd.v_t.expect("requested V^T");
        let sv_max = svd.singular_values.iter().cloned().fold(0.0f64, f64::max);
        let tol = (sv_max * 1e-12).max(1e-15);
        let mut out = Vec::new();
        for idx in 0..k {
            let sv = if idx < svd.singular_values.len() {
                svd.singular_values[idx]
            } else {
                0.0
            };
            if sv >= tol {
                continue;
            }
            let phi: Vec<f64> = (0..k).map(|w| v_t[(idx, w)]).collect();
            let mut eps_pos = f64::INFINITY;
            let mut eps_neg = f64::NEG_INFINITY;
            for &p in &phi {
                if p < -1e-14 {
                    eps_pos = eps_pos.min(-1.0 / p);
                } else if p > 1e-14 {
                    eps_neg = eps_neg.max(-1.0 / p);
                }
            }
            out.push(Perturbation {
                phi,
                eps_neg,
                eps_pos,
            });
        }
        out
    }

    /// Repeatedly applies the extreme-step null-space move, zeroing one
    /// component per round, until the null space is empty. The induced joint
    /// is unchanged (up to ~1e-12 drift) and the weight entropy never
    /// increases. The result has `|W| <= |X||Y|`.
    pub fn reduce_support(&self, target: &JointPmf) -> Result<Self> {
        if self.nx() != target.nx() || self.ny() != target.ny() {
            return Err(Error::DimensionMismatch(
                "reduce_support target shape".into(),
            ));
        }
        let baseline = self.induced_matrix();
        let mut f = self.clone();
        loop {
            let perts = f.null_space_perturbations();
            if perts.is_empty() {
                break;
            }
            let h0 = f.weight_entropy();
            // Candidate = (entropy drop, lowest index zeroed, pert idx, eps).
            let mut best: Option<(f64, usize, usize, f64)> = None;
            for (pi, pert) in perts.iter().enumerate() {
                for &eps in &[pert.eps_neg, pert.eps_pos] {
                    if !eps.is_finite() || eps == 0.0 {
                        continue;
                    }
                    let mut neww: Vec<f64> = f
                        .weights
                        .iter()
                        .zip(&pert.phi)
                        .map(|(&w, &p)| w * (1.0 + eps * p))
                        .collect();
                    if neww.iter().any(|&w| w < -1e-10) {
                        continue;
                    }
                    let mut zeroed = Vec::new();
                    for (i, w) in neww.iter_mut().enumerate() {
                        if *w <= 1e-13 {
                            *w = 0.0;
                            zeroed.push(i);
                        }
                    }
                    if zeroed.is_empty() {
                        continue;
                    }
                    let h1 = {
                        let s: f64 = neww.iter().sum();
                        entropy_bits(&neww.iter().map(|w| w / s).collect::<Vec<_>>())
                    };
                    if h1 > h0 + 1e-12 {
                        continue;
                    }
                    let cand = (h0 - h1, zeroed[0], pi, eps);
                    let better = match &best {
                        None => true,
                        Some(b) => {
                            cand.0 > b.0 + 1e-15
                                || ((cand.0 - b.0).abs() <= 1e-15 && cand.1 < b.1)
                        }
                    };
                    if better {
                        best = Some(cand);
                    }
                }
            }
            let Some((_, _, pi, eps)) = best else { break };
            let phi = &perts[pi].phi;
            let mut weights = Vec::new();
            let mut x_cols = Vec::new();
            let mut y_cols = Vec::new();
            for w in 0..f.card() {
                let nw = f.weights[w] * (1.0 + eps * phi[w]);
                if nw > 1e-13 {
                    weights.push(nw);
                    x_cols.push(f.x_cols[w].clone());
                    y_cols.push(f.y_cols[w].clone());
                }
            }
            renormalize_exact(&mut weights);
            f = Self::new(weights, x_cols, y_cols)?;
        }
        let drift = f
            .induced_matrix()
            .iter()
            .zip(&baseline)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        if drift > 1e-10 {
            return Err(Error::Infeasible(format!(
                "support reduction drifted by {drift:.3e}"
            )));
        }
        Ok(f)
    }

    /// While two components share a conditional support (first on the Y side,
    /// then on the X side), merges identical columns or extends the segment
    /// between the two columns to the simplex boundary, picking the extension
    /// with the largest entropy drop. Each move strictly lowers `H(W)` or
    /// makes the supports distinct; the induced joint is unchanged.
    pub fn same_support_improve(&self, target: &JointPmf) -> Result<Self> {
        if self.nx() != target.nx() || self.ny() != target.ny() {
            return Err(Error::DimensionMismatch(
                "same_support_improve target shape".into(),
            ));
        }
        let baseline = self.induced_matrix();
        let mut f = self.clone();
        // Moves on one side can re-equalize supports on the other, so cap the
        // total number of rounds.
        let cap = 64 + 8 * f.card() * (f.nx() + f.ny());
        for _ in 0..cap {
            if let Some(next) = f.one_same_support_move() {
                f = next?;
            } else {
                let ft = f.transposed();
                if let Some(next) = ft.one_same_support_move() {
                    f = next?.transposed();
                } else {
                    break;
                }
            }
        }
        let drift = f
            .induced_matrix()
            .iter()
            .zip(&baseline)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        if drift > 1e-10 {
            return Err(Error::Infeasible(format!(
                "same-support move drifted by {drift:.3e}"
            )));
        }
        Ok(f)
    }

    /// One Y-side move on the first same-support pair, or `None`.
    fn one_same_support_move(&self) -> Option<Result<Self>> {
        let supports = self.y_supports();
        for w1 in 0..self.card() {
            for w2 in (w1 + 1)..self.card() {
                if supports[w1] == supports[w2] {
                    return Some(self.apply_segment_move(w1, w2));
                }
            }
        }
        None
    }

    fn apply_segment_move(&self, w1: usize, w2: usize) -> Result<Self> {
        let v1 = &self.y_cols[w1];
        let v2 = &self.y_cols[w2];
        let (p1, p2) = (self.weights[w1], self.weights[w2]);
        let psum = p1 + p2;
        let pfrac = p1 / psum;

        let max_diff = v1
            .iter()
            .zip(v2)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        if max_diff <= ROW_MATCH_TOL {
            // Identical columns: merge the pair into one component.
            let mut weights = Vec::new();
            let mut x_cols = Vec::new();
            let mut y_cols = Vec::new();
            for w in 0..self.card() {
                if w == w2 {
                    continue;
                }
                if w == w1 {
                    weights.push(psum);
                    x_cols.push(
                        self.x_cols[w1]
                            .iter()
                            .zip(&self.x_cols[w2])
                            .map(|(a, b)| (p1 * a + p2 * b) / psum)
                            .collect(),
                    );
                    y_cols.push(
                        v1.iter()
                            .zip(v2)
                            .map(|(a, b)| (p1 * a + p2 * b) / psum)
                            .collect(),
                    );
                } else {
                    weights.push(self.weights[w]);
                    x_cols.push(self.x_cols[w].clone());
                    y_cols.push(self.y_cols[w].clone());
                }
            }
            return Self::new(weights, x_cols, y_cols);
        }

        // Segment extension. Admissible range keeps both endpoints inside the
        // simplex face spanned by the shared support.
        let d: Vec<f64> = v1.iter().zip(v2).map(|(a, b)| a - b).collect();
        let mut a_max = f64::INFINITY;
        let mut b_max = f64::INFINITY;
        for y in 0..self.ny() {
            if v1[y] <= SUPPORT_EPS && v2[y] <= SUPPORT_EPS {
                continue;
            }
            if d[y] < -1e-15 {
                a_max = a_max.min(v1[y] / -d[y]);
            } else if d[y] > 1e-15 {
                b_max = b_max.min(v2[y] / d[y]);
            }
        }
        if !a_max.is_finite() || !b_max.is_finite() || a_max <= 0.0 || b_max <= 0.0 {
            // Columns differ only below the support threshold; merging keeps
            // the induced joint within drift tolerance.
            return self.apply_merge_nearly_equal(w1, w2);
        }

        // The post-move weight split is t = (b + pfrac)/(a + b + 1); its
        // entropy is concave over the reachable interval, so scan the grid of
        // (a,b) boundary values and keep the minimum, which sits at a corner.
        let t_lo = pfrac / (a_max + 1.0);
        let t_hi = (b_max + pfrac) / (b_max + 1.0);
        let mut best_t = t_lo;
        let mut best_h = entropy_bits(&[t_lo, 1.0 - t_lo]);
        for i in 0..=64 {
            let t = t_lo + (t_hi - t_lo) * (i as f64) / 64.0;
            let h = entropy_bits(&[t, 1.0 - t]);
            if h < best_h {
                best_h = h;
                best_t = t;
            }
        }
        // Map the winning t back to an (a,b) boundary point.
        let (a, b) = if best_t >= pfrac {
            (0.0, ((best_t - pfrac) / (1.0 - best_t)).min(b_max))
        } else {
            ((pfrac / best_t - 1.0).min(a_max), 0.0)
        };

        let denom = a + b + 1.0;
        let m11 = (b + 1.0) / denom;
        let m21 = a / denom;
        let m12 = b / denom;
        let m22 = (a + 1.0) / denom;
        let q1 = m11 * p1 + m12 * p2;
        let q2 = m21 * p1 + m22 * p2;

        let clamp_col = |col: Vec<f64>| -> Vec<f64> {
            let mut c: Vec<f64> = col.into_iter().map(|v| v.max(0.0)).collect();
            renormalize_exact(&mut c);
            c
        };
        let v1p = clamp_col(v1.iter().zip(&d).map(|(v, dd)| v + a * dd).collect());
        let v2p = clamp_col(v2.iter().zip(&d).map(|(v, dd)| v - b * dd).collect());
        let mix_x = |c1: f64, c2: f64, q: f64| -> Vec<f64> {
            clamp_col(
                self.x_cols[w1]
                    .iter()
                    .zip(&self.x_cols[w2])
                    .map(|(x1, x2)| (c1 * p1 * x1 + c2 * p2 * x2) / q)
                    .collect(),
            )
        };

        let mut weights = Vec::new();
        let mut x_cols = Vec::new();
        let mut y_cols = Vec::new();
        for w in 0..self.card() {
            if w == w1 {
                if q1 > WEIGHT_SNAP {
                    weights.push(q1);
                    x_cols.push(mix_x(m11, m12, q1));
                    y_cols.push(v1p.clone());
                }
            } else if w == w2 {
                if q2 > WEIGHT_SNAP {
                    weights.push(q2);
                    x_cols.push(mix_x(m21, m22, q2));
                    y_cols.push(v2p.clone());
                }
            } else {
                weights.push(self.weights[w]);
                x_cols.push(self.x_cols[w].clone());
                y_cols.push(self.y_cols[w].clone());
            }
        }
        renormalize_exact(&mut weights);
        Self::new(weights, x_cols, y_cols)
    }

    fn apply_merge_nearly_equal(&self, w1: usize, w2: usize) -> Result<Self> {
        let (p1, p2) = (self.weights[w1], self.weights[w2]);
        let psum = p1 + p2;
        let mut weights = Vec::new();
        let mut x_cols = Vec::new();
        let mut y_cols = Vec::new();
        for w in 0..self.card() {
            if w == w2 {
                continue;
            }
            if w == w1 {
                weights.push(psum);
                x_cols.push(
                    self.x_cols[w1]
                        .iter()
                        .zip(&self.x_cols[w2])
                        .map(|(a, b)| (p1 * a + p2 * b) / psum)
                        .collect(),
                );
                y_cols.push(
                    self.y_cols[w1]
                        .iter()
                        .zip(&self.y_cols[w2])
                        .map(|(a, b)| (p1 * a + p2 * b) / psum)
                        .collect(),
                );
            } else {
                weights.push(self.weights[w]);
                x_cols.push(self.x_cols[w].clone());
                y_cols.push(self.y_cols[w].clone());
            }
        }
        Self::new(weights, x_cols, y_cols)
    }

    /// The restricted source over a subset of W components: the mixture of the
    /// subset's rank-1 products with renormalized weights.
    pub fn restricted_source(
        &self,
        subset: &[usize],
        x_labels: &[String],
        y_labels: &[String],
    ) -> Result<JointPmf> {
        if subset.is_empty() {
            return Err(Error::Empty("component subset"));
        }
        if subset.iter().any(|&w| w >= self.card()) {
            return Err(Error::DimensionMismatch(
                "subset index out of range".into(),
            ));
        }
        let mass: f64 = subset.iter().map(|&w| self.weights[w]).sum();
        let ny = self.ny();
        let mut m = vec![0.0; self.nx() * ny];
        for &w in subset {
            let pw = self.weights[w] / mass;
            for (i, &px) in self.x_cols[w].iter().enumerate() {
                for (j, &py) in self.y_cols[w].iter().enumerate() {
                    m[i * ny + j] += pw * px * py;
                }
            }
        }
        let rows = (0..self.nx())
            .map(|i| m[i * ny..(i + 1) * ny].to_vec())
            .collect();
        JointPmf::new(rows, x_labels.to_vec(), y_labels.to_vec())
    }

    /// `H(W | W ∈ subset)` in bits.
    pub fn conditional_entropy_given(&self, subset: &[usize]) -> Result<f64> {
        if subset.is_empty() {
            return Err(Error::Empty("component subset"));
        }
        if subset.iter().any(|&w| w >= self.card()) {
            return Err(Error::DimensionMismatch(
                "subset index out of range".into(),
            ));
        }
        let mass: f64 = subset.iter().map(|&w| self.weights[w]).sum();
        Ok(entropy_bits(
            &subset
                .iter()
                .map(|&w| self.weights[w] / mass)
                .collect::<Vec<_>>(),
        ))
    }
}

/// Groups x symbols with identical conditional rows `p(y|x)` (within
/// [`ROW_MATCH_TOL`]) into classes. Returns the class index of every x symbol
/// and the collapsed pmf; the common entropy of the collapsed instance equals
/// that of the original.
pub fn sufficient_statistic_collapse(j: &JointPmf) -> (Vec<usize>, JointPmf) {
    let rows = j.conditional_rows();
    let mut class_of = vec![usize::MAX; j.nx()];
    let mut reps: Vec<usize> = Vec::new();
    for i in 0..j.nx() {
        let found = reps.iter().position(|&r| {
            rows[i]
                .iter()
                .zip(&rows[r])
                .all(|(a, b)| (a - b).abs() <= ROW_MATCH_TOL)
        });
        class_of[i] = match found {
            Some(c) => c,
            None => {
                reps.push(i);
                reps.len() - 1
            }
        };
    }
    if reps.len() == j.nx() {
        return (class_of, j.clone());
    }
    let mut matrix = vec![vec![0.0; j.ny()]; reps.len()];
    for i in 0..j.nx() {
        for y in 0..j.ny() {
            matrix[class_of[i]][y] += j.get(i, y);
        }
    }
    let labels: Vec<String> = (0..reps.len())
        .map(|c| {
            (0..j.nx())
                .filter(|&i| class_of[i] == c)
                .map(|i| j.x_labels()[i].clone())
                .collect::<Vec<_>>()
                .join("+")
        })
        .collect();
    let collapsed = JointPmf::new(matrix, labels, j.y_labels().to_vec())
        .expect("collapse of canonical pmf is canonical");
    (class_of, collapsed)
}

/// The finest common function of X and Y: component labels of the bipartite
/// support graph.
#[derive(Debug, Clone)]
pub struct CommonPart {
    pub z_of_x: Vec<usize>,
    pub z_of_y: Vec<usize>,
    pub dist: Dist,
}

/// Connected components of the support graph of `j`. A connected support
/// yields the trivial single-component part.
pub fn common_part(j: &JointPmf) -> CommonPart {
    let (nx, ny) = (j.nx(), j.ny());
    let mut z_of_x = vec![usize::MAX; nx];
    let mut z_of_y = vec![usize::MAX; ny];
    let mut masses = Vec::new();
    for start in 0..nx {
        if z_of_x[start] != usize::MAX {
            continue;
        }
        let z = masses.len();
        let mut mass = 0.0;
        let mut stack = vec![(true, start)];
        z_of_x[start] = z;
        while let Some((is_x, idx)) = stack.pop() {
            if is_x {
                for y in 0..ny {
                    if j.get(idx, y) > 0.0 {
                        mass += j.get(idx, y);
                        if z_of_y[y] == usize::MAX {
                            z_of_y[y] = z;
                            stack.push((false, y));
                        }
                    }
                }
            } else {
                for x in 0..nx {
                    if j.get(x, idx) > 0.0 && z_of_x[x] == usize::MAX {
                        z_of_x[x] = z;
                        stack.push((true, x));
                    }
                }
            }
        }
        masses.push(mass);
    }
    CommonPart {
        z_of_x,
        z_of_y,
        dist: Dist::from_unnormalized(masses).expect("component masses are positive"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prob::sbes;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    fn example_2x2() -> JointPmf {
        JointPmf::from_matrix(vec![vec![1.0 / 3.0, 1.0 / 3.0], vec![1.0 / 3.0, 0.0]]).unwrap()
    }

    #[test]
    fn induced_joint_single_component_is_product() {
        let f = MarkovFactorization::independent(
            &Dist::new(vec![0.3, 0.7]).unwrap(),
            &Dist::new(vec![0.5, 0.5]).unwrap(),
        );
        let m = f.induced_matrix();
        assert!(close(m[0], 0.15, 1e-15));
        assert!(close(m[3], 0.35, 1e-15));
    }

    #[test]
    fn w_equals_x_reconstructs() {
        let j = example_2x2();
        let f = MarkovFactorization::from_w_equals_x(&j);
        let rep = f.verify(&j, 1e-12).unwrap();
        assert!(rep.ok, "error {}", rep.max_abs_error);
        assert!(close(f.weight_entropy(), j.x_marginal().entropy(), 1e-12));
    }

    #[test]
    fn paper_two_letter_factorization_reconstructs() {
        // Four rank-1 terms with weights [4/9, 3/9, 1/9, 1/9] reconstruct the
        // two-letter product of the 2x2 example.
        let j2 = example_2x2().product_source(2).unwrap();
        let q = |v: Vec<f64>| v;
        let f = MarkovFactorization::new(
            vec![4.0 / 9.0, 3.0 / 9.0, 1.0 / 9.0, 1.0 / 9.0],
            vec![
                q(vec![0.25, 0.25, 0.25, 0.25]),
                q(vec![1.0, 0.0, 0.0, 0.0]),
                q(vec![0.0, 1.0, 0.0, 0.0]),
                q(vec![0.0, 0.0, 1.0, 0.0]),
            ],
            vec![
                q(vec![1.0, 0.0, 0.0, 0.0]),
                q(vec![0.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0]),
                q(vec![0.0, 0.0, 1.0, 0.0]),
                q(vec![0.0, 1.0, 0.0, 0.0]),
            ],
        )
        .unwrap();
        let rep = f.verify(&j2, 1e-12).unwrap();
        assert!(rep.ok, "error {}", rep.max_abs_error);
        assert!(close(f.weight_entropy(), 1.7527152789797047, 1e-12));
    }

    #[test]
    fn verify_flags_perturbed_weight() {
        let j = example_2x2();
        let f = MarkovFactorization::from_w_equals_x(&j);
        let mut w = f.weights().to_vec();
        w[0] += 1e-6;
        w[1] -= 1e-6;
        let g = MarkovFactorization::new(
            w,
            (0..f.card()).map(|i| f.x_col(i).to_vec()).collect(),
            (0..f.card()).map(|i| f.y_col(i).to_vec()).collect(),
        )
        .unwrap();
        assert!(!g.verify(&j, 1e-8).unwrap().ok);
    }

    #[test]
    fn wyner_objective_extremes() {
        let j = example_2x2();
        // Point-mass W: both quantities vanish.
        let f = MarkovFactorization::independent(&j.x_marginal(), &j.y_marginal());
        assert_eq!(f.weight_entropy(), 0.0);
        assert!(f.wyner_objective() < 1e-12);
        // W = (X,Y): both equal H(X,Y).
        let g = MarkovFactorization::from_w_equals_xy(&j);
        assert!(close(g.weight_entropy(), j.entropy(), 1e-12));
        assert!(close(g.wyner_objective(), j.entropy(), 1e-12));
        // In between: objective never exceeds entropy.
        let h = MarkovFactorization::from_w_equals_x(&j);
        assert!(h.wyner_objective() <= h.weight_entropy() + 1e-12);
    }

    #[test]
    fn null_space_of_duplicated_component() {
        // Marginals (0.5, 0.5), so the split halves (0.25) are uniquely
        // identifiable among the component weights.
        let j = JointPmf::from_matrix(vec![vec![0.4, 0.1], vec![0.2, 0.3]]).unwrap();
        let f = MarkovFactorization::from_w_equals_x(&j);
        // Split the first component into two identical halves.
        let mut weights = f.weights().to_vec();
        let w0 = weights[0];
        weights[0] = w0 / 2.0;
        weights.push(w0 / 2.0);
        let mut x_cols: Vec<Vec<f64>> = (0..f.card()).map(|i| f.x_col(i).to_vec()).collect();
        let mut y_cols: Vec<Vec<f64>> = (0..f.card()).map(|i| f.y_col(i).to_vec()).collect();
        x_cols.push(x_cols[0].clone());
        y_cols.push(y_cols[0].clone());
        let g = MarkovFactorization::new(weights, x_cols, y_cols).unwrap();

        let perts = g.null_space_perturbations();
        assert_eq!(perts.len(), 1);
        let phi = &perts[0].phi;
        // The duplicated pair carries the ±(1,-1) direction; after canonical
        // sorting the two equal-weight duplicates are adjacent.
        let pair: Vec<usize> = (0..g.card())
            .filter(|&w| close(g.weights()[w], w0 / 2.0, 1e-12))
            .collect();
        assert_eq!(pair.len(), 2);
        assert!(close(phi[pair[0]] + phi[pair[1]], 0.0, 1e-9));
        assert!(phi[pair[0]].abs() > 0.5);
        // Full-rank W=X on this source has no null space.
        assert!(f.null_space_perturbations().is_empty());
    }

    #[test]
    fn reduce_support_merges_duplicate() {
        let j = example_2x2();
        let f = MarkovFactorization::from_w_equals_x(&j);
        let mut weights = f.weights().to_vec();
        let w0 = weights[0];
        weights[0] = w0 / 2.0;
        weights.push(w0 / 2.0);
        let mut x_cols: Vec<Vec<f64>> = (0..f.card()).map(|i| f.x_col(i).to_vec()).collect();
        let mut y_cols: Vec<Vec<f64>> = (0..f.card()).map(|i| f.y_col(i).to_vec()).collect();
        x_cols.push(x_cols[0].clone());
        y_cols.push(y_cols[0].clone());
        let g = MarkovFactorization::new(weights, x_cols, y_cols).unwrap();

        let reduced = g.reduce_support(&j).unwrap();
        assert_eq!(reduced.card(), 2);
        assert!(reduced.weight_entropy() <= g.weight_entropy() + 1e-12);
        assert!(reduced.verify(&j, 1e-10).unwrap().ok);
        // Already-extremal factorization is unchanged.
        let again = reduced.reduce_support(&j).unwrap();
        assert_eq!(again.card(), reduced.card());
        assert!(close(again.weight_entropy(), reduced.weight_entropy(), 1e-12));
    }

    #[test]
    fn same_support_merges_identical_columns() {
        let j = example_2x2();
        // Two components with identical Y columns but different X columns.
        let f = MarkovFactorization::new(
            vec![0.5, 0.25, 0.25],
            vec![
                vec![1.0, 0.0],
                vec![0.2, 0.8],
                vec![0.6, 0.4],
            ],
            vec![
                vec![0.5, 0.5],
                vec![0.9, 0.1],
                vec![0.9, 0.1],
            ],
        )
        .unwrap();
        let target = {
            let m = f.induced_matrix();
            JointPmf::from_matrix(vec![m[0..2].to_vec(), m[2..4].to_vec()]).unwrap()
        };
        let g = f.same_support_improve(&target).unwrap();
        assert!(g.card() < f.card() || g.weight_entropy() < f.weight_entropy() - 1e-12);
        assert!(g.verify(&target, 1e-9).unwrap().ok);
        assert!(g.has_distinct_supports());
        let _ = j;
    }

    #[test]
    fn same_support_extension_reaches_distinct_supports() {
        // Full-support 2x2: W=X has both Y supports equal to {0,1}; the move
        // must split them and lower the entropy to the binary closed form.
        let j = JointPmf::from_matrix(vec![vec![0.4, 0.1], vec![0.2, 0.3]]).unwrap();
        let f = MarkovFactorization::from_w_equals_x(&j);
        assert!(!f.has_distinct_supports());
        let g = f.same_support_improve(&j).unwrap();
        assert!(g.has_distinct_supports());
        assert!(g.weight_entropy() < f.weight_entropy() - 1e-9);
        assert!(g.verify(&j, 1e-9).unwrap().ok);
    }

    #[test]
    fn collapse_groups_identical_conditionals() {
        let j = JointPmf::from_matrix(vec![
            vec![0.2, 0.2],
            vec![0.15, 0.15],
            vec![0.0, 0.3],
        ])
        .unwrap();
        let (classes, collapsed) = sufficient_statistic_collapse(&j);
        assert_eq!(classes, vec![0, 0, 1]);
        assert_eq!(collapsed.nx(), 2);
        assert!(close(collapsed.get(0, 0), 0.35, 1e-12));

        let distinct = example_2x2();
        let (classes, same) = sufficient_statistic_collapse(&distinct);
        assert_eq!(classes, vec![0, 1]);
        assert_eq!(same.nx(), 2);

        let s = sbes(0.9).unwrap();
        let (_, c) = sufficient_statistic_collapse(&s);
        assert_eq!(c.nx(), 2);
    }

    #[test]
    fn common_part_block_diagonal() {
        let j = JointPmf::from_matrix(vec![
            vec![0.3, 0.1, 0.0],
            vec![0.1, 0.1, 0.0],
            vec![0.0, 0.0, 0.4],
        ])
        .unwrap();
        let cp = common_part(&j);
        assert_eq!(cp.dist.len(), 2);
        assert!(close(cp.dist.get(0), 0.6, 1e-12));
        assert_eq!(cp.z_of_x, vec![0, 0, 1]);
        assert_eq!(cp.z_of_y, vec![0, 0, 1]);

        let s = sbes(0.9).unwrap();
        assert_eq!(common_part(&s).dist.len(), 1);

        let indep = JointPmf::from_matrix(vec![vec![0.25, 0.25], vec![0.25, 0.25]]).unwrap();
        assert_eq!(common_part(&indep).dist.len(), 1);
    }

    #[test]
    fn restricted_source_singleton_is_product() {
        let j = example_2x2();
        let f = MarkovFactorization::from_w_equals_x(&j);
        let r = f
            .restricted_source(&[0], j.x_labels(), j.y_labels())
            .unwrap();
        assert!(r.is_independent(1e-12));
        assert!(close(f.conditional_entropy_given(&[0]).unwrap(), 0.0, 1e-15));
        assert!(f.restricted_source(&[], j.x_labels(), j.y_labels()).is_err());
    }

    #[test]
    fn json_round_trip() {
        let j = example_2x2();
        let f = MarkovFactorization::from_w_equals_x(&j);
        let s = serde_json::to_string(&f).unwrap();
        assert!(s.contains("p_w") && s.contains("p_x_given_w") && s.contains("p_y_given_w"));
        let back: MarkovFactorization = serde_json::from_str(&s).unwrap();
        assert_eq!(back, f);
    }
}
