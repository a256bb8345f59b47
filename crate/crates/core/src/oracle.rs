//! Brute-force grid oracle for `G(X;Y)` on alphabets up to 3x3.
//!
//! Optimal certificates have pairwise-distinct Y-column supports, so the
//! oracle enumerates every family of distinct non-empty support patterns (up
//! to the cardinality bound), grids the support-constrained Y columns, and
//! for each gridded `B` recovers the weight matrix row by row: the set
//! `{c >= 0 : B^T c = m_x}` is a polytope whose extreme points carry the
//! minimal entropy, found here by small least-squares solves over column
//! subsets. The result is an upper bound on G that shares no code path with
//! the descent solver.

use crate::factorization::MarkovFactorization;
use crate::prob::{entropy_bits, JointPmf};
use crate::solver::cardinality_bound;
use crate::{Error, Result};

/// Per-family grid budget; the per-parameter resolution is reduced until a
/// family fits (local refinement recovers the lost precision).
const FAMILY_POINT_BUDGET: usize = 300_000;

/// Residual at which a row system counts as solved exactly.
const VERT_TOL: f64 = 1e-10;

/// Cap on exhaustive row-vertex combinations before falling back to a greedy
/// coordinate walk.
const COMBO_CAP: usize = 4096;

/// Rounds of x4 local refinement around the best grid cell.
const REFINE_ROUNDS: usize = 5;

/// Output of [`g_oracle_grid`].
#[derive(Debug, Clone)]
pub struct OracleReport {
    pub upper_bits: f64,
    pub certificate: MarkovFactorization,
    pub families_scanned: usize,
}

/// Independent upper-bound oracle for instances with `|X| <= 3`, `|Y| <= 3`.
/// `resolution` is the default number of grid steps per free parameter.
pub fn g_oracle_grid(j: &JointPmf, resolution: usize) -> Result<OracleReport> {
    if j.nx() > 3 || j.ny() > 3 {
        return Err(Error::AlphabetTooLarge(format!(
            "oracle accepts up to 3x3, got {}x{}",
            j.nx(),
            j.ny()
        )));
    }
    let resolution = resolution.max(2);
    let (nx, ny) = (j.nx(), j.ny());
    let k_max = cardinality_bound(nx, ny);

    // All non-empty support patterns over Y, as sorted index lists.
    let patterns: Vec<Vec<usize>> = (1..(1usize << ny))
        .map(|mask| (0..ny).filter(|y| mask >> y & 1 == 1).collect())
        .collect();

    let mut best: Option<(f64, Vec<Vec<f64>>, Vec<Vec<f64>>)> = None; // (H, bcols, crows)
    let mut families_scanned = 0usize;

    // Families = subsets of patterns, enumerated by bitmask over the pattern
    // list; supports must be pairwise distinct by construction and must
    // jointly cover Y.
    for fam_mask in 1usize..(1 << patterns.len()) {
        let family: Vec<&Vec<usize>> = patterns
            .iter()
            .enumerate()
            .filter(|(i, _)| fam_mask >> i & 1 == 1)
            .map(|(_, p)| p)
            .collect();
        if family.len() > k_max {
            continue;
        }
        let mut covered = vec![false; ny];
        for s in &family {
            for &y in s.iter() {
                covered[y] = true;
            }
        }
        if !covered.iter().all(|&c| c) {
            continue;
        }
        families_scanned += 1;

        let res = family_resolution(&family, resolution);
        scan_family(j, &family, res, &mut best);
    }

    let (_, bcols, crows) = best.ok_or_else(|| {
        Error::Infeasible("oracle found no exact factorization on the grid".into())
    })?;

    // Local refinement around the winning grid point.
    let mut bcols = bcols;
    let mut crows = crows;
    let mut h_best = entropy_weights(&crows).0;
    let mut step = 1.0 / resolution as f64;
    for _ in 0..REFINE_ROUNDS {
        step /= 4.0;
        let mut improved = true;
        while improved {
            improved = false;
            for w in 0..bcols.len() {
                let support: Vec<usize> = (0..ny).filter(|&y| bcols[w][y] > 0.0).collect();
                if support.len() < 2 {
                    continue;
                }
                for &y_up in &support {
                    for &y_dn in &support {
                        if y_up == y_dn {
                            continue;
                        }
                        let mut cand = bcols.clone();
                        cand[w][y_up] += step;
                        cand[w][y_dn] -= step;
                        if cand[w][y_dn] <= 0.0 {
                            continue;
                        }
                        if let Some((h, rows)) = solve_point(j, &cand) {
                            if h < h_best - 1e-13 {
                                h_best = h;
                                bcols = cand;
                                crows = rows;
                                improved = true;
                            }
                        }
                    }
                }
            }
        }
    }

    let certificate = assemble(&bcols, &crows, nx, ny)?;
    let rep = certificate.verify(j, 1e-8)?;
    if !rep.ok {
        return Err(Error::Infeasible(format!(
            "oracle certificate off by {:.3e}",
            rep.max_abs_error
        )));
    }
    Ok(OracleReport {
        upper_bits: certificate.weight_entropy(),
        certificate,
        families_scanned,
    })
}

/// Points in the interior grid of an (s-1)-simplex at the given resolution.
fn simplex_points(s: usize, res: usize) -> usize {
    match s {
        1 => 1,
        2 => res.saturating_sub(1),
        3 => {
            let n = res.saturating_sub(1);
            n.saturating_mul(n.saturating_sub(1)) / 2
        }
        _ => unreachable!("|Y| <= 3"),
    }
}

fn family_resolution(family: &[&Vec<usize>], resolution: usize) -> usize {
    let floor = family.iter().map(|s| s.len() + 1).max().unwrap_or(2);
    let mut res = resolution.max(floor);
    loop {
        let total: usize = family
            .iter()
            .map(|s| simplex_points(s.len(), res))
            .try_fold(1usize, |acc, p| acc.checked_mul(p))
            .unwrap_or(usize::MAX);
        if total <= FAMILY_POINT_BUDGET || res <= floor {
            return res;
        }
        res -= 1;
    }
}

fn scan_family(
    j: &JointPmf,
    family: &[&Vec<usize>],
    res: usize,
    best: &mut Option<(f64, Vec<Vec<f64>>, Vec<Vec<f64>>)>,
) {
    let ny = j.ny();
    // Per-pattern candidate columns: the interior grid, plus the target's
    // conditional rows restricted to the pattern. Optimal columns often sit
    // exactly on those restricted rows (the feasibility boundary), which a
    // uniform grid can straddle without touching.
    let per_pattern: Vec<Vec<Vec<f64>>> = family
        .iter()
        .map(|support| {
            let mut cols = Vec::new();
            match support.len() {
                1 => {
                    let mut col = vec![0.0; ny];
                    col[support[0]] = 1.0;
                    cols.push(col);
                }
                2 => {
                    for i in 1..res {
                        let mut col = vec![0.0; ny];
                        col[support[0]] = i as f64 / res as f64;
                        col[support[1]] = 1.0 - i as f64 / res as f64;
                        cols.push(col);
                    }
                }
                3 => {
                    for i in 1..res {
                        for l in 1..(res - i) {
                            let mut col = vec![0.0; ny];
                            col[support[0]] = i as f64 / res as f64;
                            col[support[1]] = l as f64 / res as f64;
                            col[support[2]] = 1.0 - (i + l) as f64 / res as f64;
                            cols.push(col);
                        }
                    }
                }
                _ => unreachable!(),
            }
            for x in 0..j.nx() {
                let mass: f64 = support.iter().map(|&y| j.get(x, y)).sum();
                if mass <= 1e-12 {
                    continue;
                }
                if support.iter().any(|&y| j.get(x, y) <= 1e-12) {
                    continue; // belongs to a sub-pattern family
                }
                let mut col = vec![0.0; ny];
                for &y in support.iter() {
                    col[y] = j.get(x, y) / mass;
                }
                cols.push(col);
            }
            cols
        })
        .collect();

    // Odometer over the product of per-pattern choices.
    let mut idx = vec![0usize; family.len()];
    loop {
        let bcols: Vec<Vec<f64>> = idx
            .iter()
            .enumerate()
            .map(|(w, &i)| per_pattern[w][i].clone())
            .collect();
        if let Some((h, rows)) = solve_point(j, &bcols) {
            if best.as_ref().is_none_or(|(bh, _, _)| h < bh - 1e-13) {
                *best = Some((h, bcols, rows));
            }
        }
        // Advance.
        let mut pos = 0;
        loop {
            if pos == family.len() {
                return;
            }
            idx[pos] += 1;
            if idx[pos] < per_pattern[pos].len() {
                break;
            }
            idx[pos] = 0;
            pos += 1;
        }
    }
}

/// For fixed Y columns, find the minimum-entropy nonnegative weight matrix
/// reconstructing the target exactly, if one exists.
fn solve_point(j: &JointPmf, bcols: &[Vec<f64>]) -> Option<(f64, Vec<Vec<f64>>)> {
    let (nx, ny) = (j.nx(), j.ny());

    let mut row_vertices: Vec<Vec<Vec<f64>>> = Vec::with_capacity(nx);
    for x in 0..nx {
        let verts = enumerate_row_vertices(bcols, j.row(x), ny);
        if verts.is_empty() {
            return None;
        }
        row_vertices.push(verts);
    }

    let combos: usize = row_vertices
        .iter()
        .map(|v| v.len())
        .try_fold(1usize, |a, b| a.checked_mul(b))
        .unwrap_or(usize::MAX);

    if combos <= COMBO_CAP {
        let mut idx = vec![0usize; nx];
        let mut best: Option<(f64, Vec<Vec<f64>>)> = None;
        loop {
            let rows: Vec<Vec<f64>> = idx
                .iter()
                .enumerate()
                .map(|(x, &i)| row_vertices[x][i].clone())
                .collect();
            let (h, _) = entropy_weights(&rows);
            if best.as_ref().is_none_or(|(bh, _)| h < bh - 1e-15) {
                best = Some((h, rows));
            }
            let mut pos = 0;
            loop {
                if pos == nx {
                    return best;
                }
                idx[pos] += 1;
                if idx[pos] < row_vertices[pos].len() {
                    break;
                }
                idx[pos] = 0;
                pos += 1;
            }
        }
    } else {
        // Greedy coordinate walk over row choices.
        let mut idx = vec![0usize; nx];
        let current = |idx: &[usize]| -> Vec<Vec<f64>> {
            idx.iter()
                .enumerate()
                .map(|(x, &i)| row_vertices[x][i].clone())
                .collect()
        };
        let mut h_cur = entropy_weights(&current(&idx)).0;
        loop {
            let mut improved = false;
            for x in 0..nx {
                let keep = idx[x];
                for cand in 0..row_vertices[x].len() {
                    if cand == keep {
                        continue;
                    }
                    idx[x] = cand;
                    let h = entropy_weights(&current(&idx)).0;
                    if h < h_cur - 1e-13 {
                        h_cur = h;
                        improved = true;
                    } else {
                        idx[x] = keep;
                    }
                }
            }
            if !improved {
                break;
            }
        }
        Some((h_cur, current(&idx)))
    }
}

/// Extreme points of `{c >= 0 : B c = target}` via least squares over column
/// subsets of size up to `rank`.
///
/// Columns carrying mass on a zero of the target are excluded up front (their
/// weight would have to vanish), and near-singular subsets are skipped: their
/// extreme points are reachable through smaller subsets.
fn enumerate_row_vertices(bcols: &[Vec<f64>], target: &[f64], ny: usize) -> Vec<Vec<f64>> {
    let k = bcols.len();
    let allowed: Vec<usize> = (0..k)
        .filter(|&w| (0..ny).all(|y| target[y] > 0.0 || bcols[w][y] == 0.0))
        .collect();
    let max_support = allowed.len().min(ny);
    let mut out: Vec<Vec<f64>> = Vec::new();
    let mut sol = [0.0f64; 3];
    for mask in 1usize..(1 << allowed.len()) {
        let s = (mask as u32).count_ones() as usize;
        if s > max_support {
            continue;
        }
        let support: Vec<usize> = (0..allowed.len())
            .filter(|i| mask >> i & 1 == 1)
            .map(|i| allowed[i])
            .collect();
        // Normal equations G c = rhs with G[i][j] = <b_i, b_j>.
        let mut g = [[0.0f64; 3]; 3];
        let mut rhs = [0.0f64; 3];
        for i in 0..s {
            for jj in i..s {
                let v: f64 = (0..ny)
                    .map(|y| bcols[support[i]][y] * bcols[support[jj]][y])
                    .sum();
                g[i][jj] = v;
                g[jj][i] = v;
            }
            rhs[i] = (0..ny).map(|y| bcols[support[i]][y] * target[y]).sum();
        }
        if !solve_small(&mut g, &mut rhs, s, &mut sol) {
            continue;
        }
        if sol[..s].iter().any(|&c| c < -1e-12) {
            continue;
        }
        let residual = (0..ny)
            .map(|y| {
                let mut v = -target[y];
                for i in 0..s {
                    v += sol[i] * bcols[support[i]][y];
                }
                v.abs()
            })
            .fold(0.0f64, f64::max);
        if residual > VERT_TOL {
            continue;
        }
        let mut full = vec![0.0; k];
        for (i, &w) in support.iter().enumerate() {
            full[w] = sol[i].max(0.0);
        }
        let dup = out.iter().any(|v| {
            v.iter()
                .zip(&full)
                .all(|(a, b)| (a - b).abs() <= 1e-12)
        });
        if !dup {
            out.push(full);
        }
    }
    out
}

/// Gaussian elimination with partial pivoting on an s x s system (s <= 3).
/// Returns false for near-singular systems.
fn solve_small(g: &mut [[f64; 3]; 3], rhs: &mut [f64; 3], s: usize, sol: &mut [f64; 3]) -> bool {
    let mut perm = [0usize, 1, 2];
    for col in 0..s {
        let pivot = (col..s)
            .max_by(|&a, &b| g[perm[a]][col].abs().total_cmp(&g[perm[b]][col].abs()))
            .unwrap();
        perm.swap(col, pivot);
        let p = g[perm[col]][col];
        if p.abs() < 1e-12 {
            return false;
        }
        for row in (col + 1)..s {
            let f = g[perm[row]][col] / p;
            for cc in col..s {
                g[perm[row]][cc] -= f * g[perm[col]][cc];
            }
            rhs[perm[row]] -= f * rhs[perm[col]];
        }
    }
    for col in (0..s).rev() {
        let mut v = rhs[perm[col]];
        for cc in (col + 1)..s {
            v -= g[perm[col]][cc] * sol[cc];
        }
        sol[col] = v / g[perm[col]][col];
    }
    true
}

/// Column sums of the row-weight matrix and their entropy.
fn entropy_weights(rows: &[Vec<f64>]) -> (f64, Vec<f64>) {
    let k = rows[0].len();
    let mut lam = vec![0.0; k];
    for row in rows {
        for (l, &c) in lam.iter_mut().zip(row) {
            *l += c;
        }
    }
    (entropy_bits(&lam), lam)
}

fn assemble(
    bcols: &[Vec<f64>],
    crows: &[Vec<f64>],
    nx: usize,
    _ny: usize,
) -> Result<MarkovFactorization> {
    let (_, lam) = entropy_weights(crows);
    let mut weights = Vec::new();
    let mut x_cols = Vec::new();
    let mut y_cols = Vec::new();
    for (w, &l) in lam.iter().enumerate() {
        if l <= 1e-14 {
            continue;
        }
        weights.push(l);
        x_cols.push((0..nx).map(|x| crows[x][w] / l).collect());
        y_cols.push(bcols[w].clone());
    }
    let total: f64 = weights.iter().sum();
    for w in weights.iter_mut() {
        *w /= total;
    }
    MarkovFactorization::new(weights, x_cols, y_cols)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prob::sbes;
    use crate::solver::g_closed_form_2x2;

    #[test]
    fn oracle_perfectly_correlated_bit_is_exact() {
        let j = JointPmf::from_matrix(vec![vec![0.5, 0.0], vec![0.0, 0.5]]).unwrap();
        let rep = g_oracle_grid(&j, 64).unwrap();
        assert!((rep.upper_bits - 1.0).abs() < 1e-12, "got {}", rep.upper_bits);
    }

    #[test]
    fn oracle_matches_2x2_closed_form() {
        let j = JointPmf::from_matrix(vec![vec![0.4, 0.1], vec![0.2, 0.3]]).unwrap();
        let oracle = g_oracle_grid(&j, 64).unwrap();
        let closed = g_closed_form_2x2(&j).unwrap();
        assert!(
            (oracle.upper_bits - closed.g_bits).abs() <= 2e-3,
            "oracle {} closed {}",
            oracle.upper_bits,
            closed.g_bits
        );
    }

    #[test]
    fn oracle_sbes_09() {
        let s = sbes(0.9).unwrap();
        let rep = g_oracle_grid(&s, 32).unwrap();
        assert!(
            (rep.upper_bits - 0.5689955935892812).abs() <= 2e-3,
            "got {}",
            rep.upper_bits
        );
    }

    #[test]
    fn oracle_rejects_large_alphabets() {
        let big = JointPmf::from_matrix(vec![vec![1.0 / 16.0; 4]; 4]).unwrap();
        assert!(g_oracle_grid(&big, 8).is_err());
    }
}
