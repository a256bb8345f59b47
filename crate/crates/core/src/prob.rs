//! Exact finite-probability primitives: joint pmfs over labeled alphabets,
//! marginals, entropies in bits, total variation, i.i.d. products, and the
//! symmetric binary erasure source.
//!
//! All probabilities are `f64`. Input validation tolerates a mass deviation of
//! [`MASS_TOL`] and then renormalizes so the total is exactly 1; symbols with
//! zero probability are stripped so downstream code can assume full-support
//! marginals.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Allowed deviation of input mass from 1 before [`JointPmf::validate`] rejects.
pub const MASS_TOL: f64 = 1e-9;

/// Sum tolerance for an already-normalized distribution.
pub const DIST_TOL: f64 = 1e-12;

/// Row/column masses below this are treated as zero-probability symbols.
const STRIP_TOL: f64 = 1e-15;

/// Default cell budget for i.i.d. product sources.
pub const PRODUCT_CELL_BUDGET: usize = 4096;

/// `-Σ p log2 p` with `0·log 0 := 0`. Accepts any nonnegative vector.
pub fn entropy_bits(weights: &[f64]) -> f64 {
    weights
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| -p * p.log2())
        .sum()
}

/// Binary entropy `H(p)` in bits.
pub fn binary_entropy(p: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::OutOfRange {
            what: "binary entropy argument",
            value: p,
        });
    }
    Ok(entropy_bits(&[p, 1.0 - p]))
}

/// Rescale so the entries sum to exactly 1 (largest entry absorbs the
/// floating-point residual).
pub(crate) fn renormalize_exact(weights: &mut [f64]) {
    let sum: f64 = weights.iter().sum();
    for w in weights.iter_mut() {
        *w /= sum;
    }
    let residual: f64 = weights.iter().sum::<f64>() - 1.0;
    if residual != 0.0 {
        let imax = weights
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i)
            .unwrap();
        weights[imax] -= residual;
    }
}

/// A probability vector: entries nonnegative, summing to exactly 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Dist {
    weights: Vec<f64>,
}

impl Dist {
    /// Validates a probability vector. The sum must be within [`DIST_TOL`] of
    /// 1; it is then renormalized exactly.
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        Self::with_tolerance(weights, DIST_TOL)
    }

    /// Like [`Dist::new`] with a caller-chosen mass tolerance.
    pub fn with_tolerance(mut weights: Vec<f64>, tol: f64) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::Empty("distribution"));
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
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > tol {
            return Err(Error::MassViolation { sum });
        }
        renormalize_exact(&mut weights);
        Ok(Self { weights })
    }

    /// Normalizes an arbitrary nonnegative vector with positive mass.
    pub fn from_unnormalized(mut weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::Empty("distribution"));
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
        let sum: f64 = weights.iter().sum();
        if sum <= 0.0 {
            return Err(Error::MassViolation { sum });
        }
        renormalize_exact(&mut weights);
        Ok(Self { weights })
    }

    /// Point mass on symbol `i` of an `n`-symbol alphabet.
    pub fn point_mass(n: usize, i: usize) -> Self {
        let mut weights = vec![0.0; n];
        weights[i] = 1.0;
        Self { weights }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn get(&self, i: usize) -> f64 {
        self.weights[i]
    }

    /// Shannon entropy in bits.
    pub fn entropy(&self) -> f64 {
        entropy_bits(&self.weights)
    }
}

/// A finite joint pmf `p(x,y)` over labeled alphabets, stored row-major
/// (`|X|` rows by `|Y|` columns).
///
/// Canonical form: entries nonnegative, total exactly 1, no all-zero row or
/// column. The JSON shape is `{"x_labels": [...], "y_labels": [...],
/// "pmf": [[...], ...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "JointPmfJson", into = "JointPmfJson")]
pub struct JointPmf {
    x_labels: Vec<String>,
    y_labels: Vec<String>,
    p: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct JointPmfJson {
    x_labels: Vec<String>,
    y_labels: Vec<String>,
    pmf: Vec<Vec<f64>>,
}

impl TryFrom<JointPmfJson> for JointPmf {
    type Error = Error;

    fn try_from(j: JointPmfJson) -> Result<Self> {
        Ok(JointPmf::validate(j.pmf, j.x_labels, j.y_labels)?.pmf)
    }
}

impl From<JointPmf> for JointPmfJson {
    fn from(p: JointPmf) -> Self {
        JointPmfJson {
            pmf: p.to_rows(),
            x_labels: p.x_labels,
            y_labels: p.y_labels,
        }
    }
}

/// Outcome of [`JointPmf::validate`]: the canonical pmf plus the labels of any
/// stripped zero-probability symbols.
#[derive(Debug, Clone)]
pub struct Validation {
    pub pmf: JointPmf,
    pub dropped_x: Vec<String>,
    pub dropped_y: Vec<String>,
}

impl JointPmf {
    /// Validates and canonicalizes a matrix: checks nonnegativity and total
    /// mass within [`MASS_TOL`], strips zero rows/columns (recording their
    /// labels), and renormalizes to an exact sum of 1.
    pub fn validate(
        matrix: Vec<Vec<f64>>,
        x_labels: Vec<String>,
        y_labels: Vec<String>,
    ) -> Result<Validation> {
        Self::validate_inner(matrix, x_labels, y_labels, false)
    }

    /// Like [`JointPmf::validate`] but accepts any positive total mass and
    /// normalizes it away (the CLI `--normalize` path).
    pub fn validate_normalizing(
        matrix: Vec<Vec<f64>>,
        x_labels: Vec<String>,
        y_labels: Vec<String>,
    ) -> Result<Validation> {
        Self::validate_inner(matrix, x_labels, y_labels, true)
    }

    fn validate_inner(
        matrix: Vec<Vec<f64>>,
        x_labels: Vec<String>,
        y_labels: Vec<String>,
        normalize: bool,
    ) -> Result<Validation> {
        let nx = x_labels.len();
        let ny = y_labels.len();
        if matrix.len() != nx {
            return Err(Error::DimensionMismatch(format!(
                "{} rows, {} x labels",
                matrix.len(),
                nx
            )));
        }
        if nx == 0 || ny == 0 {
            return Err(Error::Empty("alphabet"));
        }
        let mut flat = Vec::with_capacity(nx * ny);
        for (i, row) in matrix.iter().enumerate() {
            if row.len() != ny {
                return Err(Error::DimensionMismatch(format!(
                    "row {} has {} entries, {} y labels",
                    i,
                    row.len(),
                    ny
                )));
            }
            for (j, &v) in row.iter().enumerate() {
                if v < 0.0 {
                    return Err(Error::NegativeEntry {
                        row: i,
                        col: j,
                        value: v,
                    });
                }
                flat.push(v);
            }
        }
        let sum: f64 = flat.iter().sum();
        if normalize {
            if sum <= 0.0 {
                return Err(Error::MassViolation { sum });
            }
        } else if (sum - 1.0).abs() > MASS_TOL {
            return Err(Error::MassViolation { sum });
        }

        // Strip zero-probability symbols before renormalizing.
        let keep_x: Vec<usize> = (0..nx)
            .filter(|&i| (0..ny).map(|j| flat[i * ny + j]).sum::<f64>() > STRIP_TOL)
            .collect();
        let keep_y: Vec<usize> = (0..ny)
            .filter(|&j| (0..nx).map(|i| flat[i * ny + j]).sum::<f64>() > STRIP_TOL)
            .collect();
        if keep_x.is_empty() || keep_y.is_empty() {
            return Err(Error::MassViolation { sum });
        }
        let dropped_x = (0..nx)
            .filter(|i| !keep_x.contains(i))
            .map(|i| x_labels[i].clone())
            .collect();
        let dropped_y = (0..ny)
            .filter(|j| !keep_y.contains(j))
            .map(|j| y_labels[j].clone())
            .collect();

        let mut p = Vec::with_capacity(keep_x.len() * keep_y.len());
        for &i in &keep_x {
            for &j in &keep_y {
                p.push(flat[i * ny + j]);
            }
        }
        renormalize_exact(&mut p);

        Ok(Validation {
            pmf: JointPmf {
                x_labels: keep_x.iter().map(|&i| x_labels[i].clone()).collect(),
                y_labels: keep_y.iter().map(|&j| y_labels[j].clone()).collect(),
                p,
            },
            dropped_x,
            dropped_y,
        })
    }

    /// Validates with the given labels, discarding the strip record.
    pub fn new(
        matrix: Vec<Vec<f64>>,
        x_labels: Vec<String>,
        y_labels: Vec<String>,
    ) -> Result<Self> {
        Ok(Self::validate(matrix, x_labels, y_labels)?.pmf)
    }

    /// Validates with default labels `x0..`, `y0..`.
    pub fn from_matrix(matrix: Vec<Vec<f64>>) -> Result<Self> {
        let nx = matrix.len();
        let ny = matrix.first().map_or(0, |r| r.len());
        let x_labels = (0..nx).map(|i| format!("x{i}")).collect();
        let y_labels = (0..ny).map(|j| format!("y{j}")).collect();
        Self::new(matrix, x_labels, y_labels)
    }

    pub fn nx(&self) -> usize {
        self.x_labels.len()
    }

    pub fn ny(&self) -> usize {
        self.y_labels.len()
    }

    pub fn x_labels(&self) -> &[String] {
        &self.x_labels
    }

    pub fn y_labels(&self) -> &[String] {
        &self.y_labels
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.p[i * self.ny() + j]
    }

    /// Row `i` as a slice of length `ny`.
    pub fn row(&self, i: usize) -> &[f64] {
        let ny = self.ny();
        &self.p[i * ny..(i + 1) * ny]
    }

    /// Flat row-major view.
    pub fn matrix(&self) -> &[f64] {
        &self.p
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.nx()).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn x_marginal(&self) -> Dist {
        let weights = (0..self.nx()).map(|i| self.row(i).iter().sum()).collect();
        Dist::from_unnormalized(weights).expect("canonical pmf has positive rows")
    }

    pub fn y_marginal(&self) -> Dist {
        let ny = self.ny();
        let mut weights = vec![0.0; ny];
        for i in 0..self.nx() {
            for (j, w) in weights.iter_mut().enumerate() {
                *w += self.get(i, j);
            }
        }
        Dist::from_unnormalized(weights).expect("canonical pmf has positive columns")
    }

    /// The joint flattened to a single distribution over `(x,y)` cells.
    pub fn flat_dist(&self) -> Dist {
        Dist::from_unnormalized(self.p.clone()).expect("canonical pmf has mass 1")
    }

    /// Joint entropy `H(X,Y)` in bits.
    pub fn entropy(&self) -> f64 {
        entropy_bits(&self.p)
    }

    /// `I(X;Y) = H(X) + H(Y) - H(X,Y)`, clamped at 0.
    pub fn mutual_information(&self) -> f64 {
        let mi = self.x_marginal().entropy() + self.y_marginal().entropy() - self.entropy();
        mi.max(0.0)
    }

    /// True when the joint equals the product of its marginals entrywise
    /// within `tol`.
    pub fn is_independent(&self, tol: f64) -> bool {
        let px = self.x_marginal();
        let py = self.y_marginal();
        (0..self.nx()).all(|i| {
            (0..self.ny()).all(|j| (self.get(i, j) - px.get(i) * py.get(j)).abs() <= tol)
        })
    }

    /// Total variation distance `½ Σ |a - b|`; requires identical alphabets.
    pub fn total_variation(&self, other: &JointPmf) -> Result<f64> {
        if self.x_labels != other.x_labels || self.y_labels != other.y_labels {
            return Err(Error::AlphabetMismatch(
                "total variation needs identical alphabets".into(),
            ));
        }
        Ok(self
            .p
            .iter()
            .zip(other.p.iter())
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
            / 2.0)
    }

    /// Pairwise product `p(x1,y1)·q(x2,y2)` over the tuple alphabets
    /// (labels joined with a comma, lexicographic tuple order).
    pub fn product_with(&self, other: &JointPmf) -> Result<JointPmf> {
        let cells = self
            .nx()
            .checked_mul(other.nx())
            .and_then(|r| r.checked_mul(self.ny()))
            .and_then(|r| r.checked_mul(other.ny()))
            .ok_or(Error::SizeBudget {
                cells: usize::MAX,
                budget: PRODUCT_CELL_BUDGET,
            })?;
        if cells > PRODUCT_CELL_BUDGET {
            return Err(Error::SizeBudget {
                cells,
                budget: PRODUCT_CELL_BUDGET,
            });
        }
        let join = |a: &str, b: &str| format!("{a},{b}");
        let x_labels: Vec<String> = self
            .x_labels
            .iter()
            .flat_map(|a| other.x_labels.iter().map(move |b| join(a, b)))
            .collect();
        let y_labels: Vec<String> = self
            .y_labels
            .iter()
            .flat_map(|a| other.y_labels.iter().map(move |b| join(a, b)))
            .collect();
        let mut p = Vec::with_capacity(cells);
        for i1 in 0..self.nx() {
            for i2 in 0..other.nx() {
                for j1 in 0..self.ny() {
                    for j2 in 0..other.ny() {
                        p.push(self.get(i1, j1) * other.get(i2, j2));
                    }
                }
            }
        }
        renormalize_exact(&mut p);
        Ok(JointPmf {
            x_labels,
            y_labels,
            p,
        })
    }

    /// The i.i.d. `n`-letter product source with tuple alphabets in
    /// lexicographic order. Fails when `|X|^n·|Y|^n` exceeds the cell budget.
    pub fn product_source(&self, n: usize) -> Result<JointPmf> {
        if n == 0 {
            return Err(Error::OutOfRange {
                what: "product length",
                value: 0.0,
            });
        }
        let mut acc = self.clone();
        for _ in 1..n {
            acc = acc.product_with(self)?;
        }
        Ok(acc)
    }

    /// Swaps the roles of X and Y.
    pub fn transpose(&self) -> JointPmf {
        let mut p = Vec::with_capacity(self.p.len());
        for j in 0..self.ny() {
            for i in 0..self.nx() {
                p.push(self.get(i, j));
            }
        }
        JointPmf {
            x_labels: self.y_labels.clone(),
            y_labels: self.x_labels.clone(),
            p,
        }
    }

    /// Conditional rows `p(y|x)`, one normalized row per x symbol.
    pub fn conditional_rows(&self) -> Vec<Vec<f64>> {
        (0..self.nx())
            .map(|i| {
                let mass: f64 = self.row(i).iter().sum();
                self.row(i).iter().map(|&v| v / mass).collect()
            })
            .collect()
    }
}

/// Symmetric binary erasure source: `X ~ Bern(1/2)`, `Y = X` with probability
/// `1-p` and the erasure symbol `e` otherwise. Degenerate erasure columns
/// (p = 0) or data columns (p = 1) are stripped by canonicalization.
pub fn sbes(p: f64) -> Result<JointPmf> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::OutOfRange {
            what: "erasure probability",
            value: p,
        });
    }
    let matrix = vec![
        vec![(1.0 - p) / 2.0, 0.0, p / 2.0],
        vec![0.0, (1.0 - p) / 2.0, p / 2.0],
    ];
    JointPmf::new(
        matrix,
        vec!["0".into(), "1".into()],
        vec!["0".into(), "1".into(), "e".into()],
    )
}

/// Recognizes a pmf with the exact canonical SBES layout (diagonal data block
/// in columns 0 and 1, erasure mass in the last column) and returns its
/// erasure probability. Values are matched within 1e-12; permuted layouts are
/// not recognized and take the general solving route instead.
pub fn sbes_erasure_probability(j: &JointPmf) -> Option<f64> {
    const TOL: f64 = 1e-12;
    if j.nx() != 2 {
        return None;
    }
    let close = |a: f64, b: f64| (a - b).abs() <= TOL;
    match j.ny() {
        1 => (close(j.get(0, 0), 0.5) && close(j.get(1, 0), 0.5)).then_some(1.0),
        2 => {
            let half = 0.5;
            (close(j.get(0, 0), half)
                && close(j.get(1, 1), half)
                && close(j.get(0, 1), 0.0)
                && close(j.get(1, 0), 0.0))
            .then_some(0.0)
        }
        3 => {
            let p = 2.0 * j.get(0, 2);
            if !(0.0..=1.0).contains(&p) {
                return None;
            }
            let half = (1.0 - p) / 2.0;
            (close(j.get(1, 2), p / 2.0)
                && close(j.get(0, 0), half)
                && close(j.get(1, 1), half)
                && close(j.get(0, 1), 0.0)
                && close(j.get(1, 0), 0.0))
            .then_some(p)
        }
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn validate_uniform() {
        let v = JointPmf::validate(
            vec![vec![0.25, 0.25], vec![0.25, 0.25]],
            vec!["a".into(), "b".into()],
            vec!["c".into(), "d".into()],
        )
        .unwrap();
        assert_eq!(v.pmf.nx(), 2);
        assert_eq!(v.pmf.ny(), 2);
        assert!(v.dropped_x.is_empty() && v.dropped_y.is_empty());
        assert_eq!(v.pmf.matrix().iter().sum::<f64>(), 1.0);
    }

    #[test]
    fn validate_strips_zero_row() {
        let v = JointPmf::validate(
            vec![vec![0.5, 0.5], vec![0.0, 0.0]],
            vec!["a".into(), "b".into()],
            vec!["c".into(), "d".into()],
        )
        .unwrap();
        assert_eq!(v.pmf.nx(), 1);
        assert_eq!(v.pmf.ny(), 2);
        assert_eq!(v.dropped_x, vec!["b".to_string()]);
    }

    #[test]
    fn validate_rejects_bad_mass() {
        let err = JointPmf::validate(
            vec![vec![0.5, 0.6], vec![0.0, 0.0]],
            vec!["a".into(), "b".into()],
            vec!["c".into(), "d".into()],
        )
        .unwrap_err();
        assert!(matches!(err, Error::MassViolation { .. }));
    }

    #[test]
    fn validate_rejects_negative() {
        let err = JointPmf::from_matrix(vec![vec![0.6, -0.1], vec![0.25, 0.25]]).unwrap_err();
        assert!(matches!(err, Error::NegativeEntry { .. }));
    }

    #[test]
    fn normalizing_path_accepts_off_mass() {
        let v = JointPmf::validate_normalizing(
            vec![vec![1.0, 1.0], vec![1.0, 1.0]],
            vec!["a".into(), "b".into()],
            vec!["c".into(), "d".into()],
        )
        .unwrap();
        assert!(close(v.pmf.get(0, 0), 0.25, 1e-15));
    }

    #[test]
    fn entropy_values() {
        assert_eq!(Dist::new(vec![0.5, 0.5]).unwrap().entropy(), 1.0);
        assert_eq!(Dist::new(vec![1.0]).unwrap().entropy(), 0.0);
        // Direct evaluation of -Σ p log2 p, cross-checked at 30 digits.
        let d = Dist::new(vec![4.0 / 9.0, 3.0 / 9.0, 1.0 / 9.0, 1.0 / 9.0]).unwrap();
        assert!(close(d.entropy(), 1.7527152789797047, 1e-12));
    }

    #[test]
    fn binary_entropy_values() {
        assert_eq!(binary_entropy(0.5).unwrap(), 1.0);
        assert_eq!(binary_entropy(0.0).unwrap(), 0.0);
        assert_eq!(binary_entropy(1.0).unwrap(), 0.0);
        assert!(close(
            binary_entropy(1.0 / 3.0).unwrap(),
            0.9182958340544896,
            1e-12
        ));
        assert!(binary_entropy(-0.1).is_err());
        assert!(binary_entropy(1.1).is_err());
    }

    #[test]
    fn mutual_information_cases() {
        let indep = JointPmf::from_matrix(vec![vec![0.21, 0.49], vec![0.09, 0.21]]).unwrap();
        assert!(indep.mutual_information() < 1e-12);
        assert!(indep.is_independent(1e-12));

        let equal = JointPmf::from_matrix(vec![vec![0.5, 0.0], vec![0.0, 0.5]]).unwrap();
        assert!(close(equal.mutual_information(), 1.0, 1e-12));

        let s = sbes(0.9).unwrap();
        assert!(close(s.mutual_information(), 0.1, 1e-12));
    }

    #[test]
    fn total_variation_cases() {
        let a = JointPmf::from_matrix(vec![vec![0.5, 0.5]]).unwrap();
        let b = JointPmf::from_matrix(vec![vec![0.6, 0.4]]).unwrap();
        assert_eq!(a.total_variation(&a).unwrap(), 0.0);
        assert!(close(a.total_variation(&b).unwrap(), 0.1, 1e-15));
        assert!(close(
            a.total_variation(&b).unwrap(),
            b.total_variation(&a).unwrap(),
            0.0
        ));

        let c = JointPmf::from_matrix(vec![vec![0.25, 0.25], vec![0.25, 0.25]]).unwrap();
        assert!(a.total_variation(&c).is_err());
    }

    #[test]
    fn disjoint_support_tv_is_one() {
        // 1x1 pmfs with different labels are an alphabet mismatch, so compare
        // through a shared 2x2 alphabet with opposite corners.
        let a = JointPmf::new(
            vec![vec![1.0 - 1e-13, 1e-13 / 3.0], vec![1e-13 / 3.0, 1e-13 / 3.0]],
            vec!["0".into(), "1".into()],
            vec!["0".into(), "1".into()],
        )
        .unwrap();
        let b = JointPmf::new(
            vec![vec![1e-13 / 3.0, 1e-13 / 3.0], vec![1e-13 / 3.0, 1.0 - 1e-13]],
            vec!["0".into(), "1".into()],
            vec!["0".into(), "1".into()],
        )
        .unwrap();
        assert!(close(a.total_variation(&b).unwrap(), 1.0, 1e-9));
    }

    #[test]
    fn product_source_matches_two_letter_matrix() {
        let j = JointPmf::from_matrix(vec![
            vec![1.0 / 3.0, 1.0 / 3.0],
            vec![1.0 / 3.0, 0.0],
        ])
        .unwrap();
        let j2 = j.product_source(2).unwrap();
        let expect = [
            [1.0, 1.0, 1.0, 1.0],
            [1.0, 0.0, 1.0, 0.0],
            [1.0, 1.0, 0.0, 0.0],
            [1.0, 0.0, 0.0, 0.0],
        ];
        for i in 0..4 {
            for jj in 0..4 {
                assert!(close(j2.get(i, jj), expect[i][jj] / 9.0, 1e-12));
            }
        }
        assert_eq!(j2.x_labels()[1], "x0,x1");
    }

    #[test]
    fn product_source_identity_and_budget() {
        let j = JointPmf::from_matrix(vec![vec![0.25, 0.25], vec![0.25, 0.25]]).unwrap();
        let j1 = j.product_source(1).unwrap();
        assert_eq!(j1.matrix(), j.matrix());
        assert!(matches!(
            j.product_source(7),
            Err(Error::SizeBudget { .. })
        ));
    }

    #[test]
    fn sbes_shapes() {
        let s = sbes(0.9).unwrap();
        assert_eq!((s.nx(), s.ny()), (2, 3));
        assert!(close(s.get(0, 0), 0.05, 1e-15));
        assert!(close(s.get(0, 2), 0.45, 1e-15));
        assert!(close(s.get(1, 1), 0.05, 1e-15));

        let s0 = sbes(0.0).unwrap();
        assert_eq!((s0.nx(), s0.ny()), (2, 2));
        assert!(close(s0.get(0, 0), 0.5, 1e-15));

        let s1 = sbes(1.0).unwrap();
        assert_eq!((s1.nx(), s1.ny()), (2, 1));
        assert!(s1.is_independent(1e-15));

        assert!(sbes(1.5).is_err());
    }

    #[test]
    fn sbes_detection() {
        for &p in &[0.0, 0.1, 0.5, 0.9, 1.0] {
            let s = sbes(p).unwrap();
            let found = sbes_erasure_probability(&s).unwrap();
            assert!(close(found, p, 1e-12), "p={p} found={found}");
        }
        let not = JointPmf::from_matrix(vec![vec![0.4, 0.1], vec![0.1, 0.4]]).unwrap();
        assert!(sbes_erasure_probability(&not).is_none());
    }
}
