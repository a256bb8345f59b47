//! Computing the common entropy `G(X;Y)`.
//!
//! Closed forms cover the binary 2x2 case and the symmetric binary erasure
//! source. Everything else goes through [`g_general`]: the instance is first
//! collapsed along sufficient statistics and split at its common part, then
//! each connected piece is attacked by multi-start penalized descent over
//! exact factorizations. Every restart runs three phases — multiplicative
//! divergence updates to reach feasibility, exponentiated-gradient descent on
//! `H(W) + λ·D(target ‖ induced)` with an increasing penalty, and a final
//! multiplicative re-projection — and is then polished by the support
//! reduction moves. Baseline certificates `W=X`, `W=Y`, `W=(X,Y)` are always
//! evaluated, so the result never exceeds `min(H(X), H(Y))`.
//!
//! Global optimality is not certified (the objective is concave over a
//! nonconvex set); the grid oracle in [`crate::oracle`] provides the
//! independent cross-check.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use serde::Serialize;

use crate::factorization::{common_part, sufficient_statistic_collapse, MarkovFactorization};
use crate::prob::{
    binary_entropy, renormalize_exact, sbes, sbes_erasure_probability, JointPmf,
};
use crate::{Error, Result};

/// Largest instance (in pmf cells) the general solver accepts.
pub const SOLVER_CELL_BUDGET: usize = 4096;

/// One stage of the penalty continuation.
#[derive(Debug, Clone, Serialize)]
pub struct PenaltyStage {
    pub multiplier: f64,
    pub iters: usize,
}

/// Knobs for [`g_general`]. `Default` matches the documented defaults; restart
/// `r` always uses seed `seed ^ r`, so results are reproducible.
#[derive(Debug, Clone, Serialize)]
pub struct SolveConfig {
    /// Cap on `|W|`. `None` means the cardinality bound of the instance. When
    /// set explicitly the solver works on the whole instance (no common-part
    /// assembly, whose total cardinality could exceed the cap).
    pub max_card: Option<usize>,
    pub restarts: usize,
    pub seed: u64,
    /// Max-abs reconstruction error at which a certificate counts as exact.
    pub feas_tol: f64,
    pub penalty_schedule: Vec<PenaltyStage>,
    /// Iteration cap for the initial feasibility phase.
    pub nmf_iters: usize,
    /// Iteration cap for the final re-projection phase.
    pub reproject_iters: usize,
    /// Skip the common-part decomposition (used to test the Property-5
    /// identity against a direct solve).
    pub skip_decomposition: bool,
    /// Optional wall-clock budget in seconds; restarts that would exceed it
    /// are skipped. Leave `None` for deterministic output.
    pub time_budget: Option<f64>,
}

impl Default for SolveConfig {
    fn default() -> Self {
        Self {
            max_card: None,
            restarts: 64,
            seed: 0,
            feas_tol: 1e-10,
            penalty_schedule: vec![
                PenaltyStage { multiplier: 1e1, iters: 500 },
                PenaltyStage { multiplier: 1e2, iters: 500 },
                PenaltyStage { multiplier: 1e3, iters: 500 },
                PenaltyStage { multiplier: 1e4, iters: 500 },
            ],
            nmf_iters: 2000,
            reproject_iters: 20000,
            skip_decomposition: false,
            time_budget: None,
        }
    }
}

impl SolveConfig {
    /// A lighter configuration for bulk property sweeps.
    pub fn quick(restarts: usize, seed: u64) -> Self {
        Self {
            restarts,
            seed,
            penalty_schedule: vec![
                PenaltyStage { multiplier: 1e1, iters: 200 },
                PenaltyStage { multiplier: 1e2, iters: 200 },
                PenaltyStage { multiplier: 1e3, iters: 200 },
                PenaltyStage { multiplier: 1e4, iters: 200 },
            ],
            nmf_iters: 1000,
            reproject_iters: 6000,
            ..Self::default()
        }
    }
}

/// How a report was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    ClosedForm2x2,
    ClosedFormSbes,
    General,
    Oracle,
}

/// Result of a G computation: the achieved entropy, its certificate, and
/// solver diagnostics.
#[derive(Debug, Clone, Serialize)]
pub struct SolveReport {
    pub g_bits: f64,
    pub certificate: MarkovFactorization,
    /// `I(X;Y)`, a lower bound on G for any instance.
    pub lower_hint_bits: f64,
    /// The closed-form value when one applies.
    pub closed_form_bits: Option<f64>,
    /// Achieved entropy per restart (`null` = restart failed feasibility).
    pub per_restart: Vec<Option<f64>>,
    pub method: Method,
    /// True when no restart reached feasibility and only baseline
    /// certificates back the result.
    pub restarts_failed: bool,
}

/// `min(|X||Y|, 2^min(|X|,|Y|) - 1)`: the tighter of the two cardinality
/// bounds on an optimal W.
pub fn cardinality_bound(nx: usize, ny: usize) -> usize {
    let m = nx.min(ny);
    let pow = if m >= usize::BITS as usize - 1 {
        usize::MAX
    } else {
        (1usize << m) - 1
    };
    (nx * ny).min(pow).max(1)
}

fn independent_certificate(j: &JointPmf) -> MarkovFactorization {
    MarkovFactorization::independent(&j.x_marginal(), &j.y_marginal())
}

fn report(
    j: &JointPmf,
    certificate: MarkovFactorization,
    method: Method,
    closed_form_bits: Option<f64>,
    per_restart: Vec<Option<f64>>,
    restarts_failed: bool,
) -> SolveReport {
    SolveReport {
        g_bits: certificate.weight_entropy(),
        lower_hint_bits: j.mutual_information(),
        closed_form_bits,
        certificate,
        per_restart,
        method,
        restarts_failed,
    }
}

// ---------------------------------------------------------------------------
// Closed forms
// ---------------------------------------------------------------------------

/// Explicit G for a canonical 2x2 pmf.
///
/// After swapping Y labels so the conditional parameters admit both candidate
/// structures, each candidate's weight vector comes from `p_{W|X} · p_X` and
/// is verified against the input; the entropy-minimal verified candidate
/// wins. Independent inputs return the one-point W.
pub fn g_closed_form_2x2(j: &JointPmf) -> Result<SolveReport> {
    if j.nx() != 2 || j.ny() != 2 {
        return Err(Error::DimensionMismatch(format!(
            "closed form needs a 2x2 pmf, got {}x{}",
            j.nx(),
            j.ny()
        )));
    }
    if j.is_independent(1e-12) {
        return Ok(report(
            j,
            independent_certificate(j),
            Method::ClosedForm2x2,
            Some(0.0),
            vec![],
            false,
        ));
    }
    let px = j.x_marginal();
    let mut alpha = j.get(0, 0) / px.get(0);
    let mut beta = j.get(1, 0) / px.get(1);
    let swapped = alpha > beta;
    if swapped {
        alpha = 1.0 - alpha;
        beta = 1.0 - beta;
    }

    // Candidate = (P(W=0|X=0), P(W=0|X=1), y columns in the swapped frame).
    let mut candidates: Vec<([f64; 2], [Vec<f64>; 2])> = Vec::new();
    if 1.0 - alpha > 0.0 {
        let t = (1.0 - beta) / (1.0 - alpha);
        if (-1e-12..=1.0 + 1e-12).contains(&t) {
            let t = t.clamp(0.0, 1.0);
            candidates.push((
                [1.0, t],
                [vec![alpha, 1.0 - alpha], vec![1.0, 0.0]],
            ));
        }
    }
    if beta > 0.0 {
        let t = alpha / beta;
        if (-1e-12..=1.0 + 1e-12).contains(&t) {
            let t = t.clamp(0.0, 1.0);
            candidates.push((
                [1.0 - t, 0.0],
                [vec![0.0, 1.0], vec![beta, 1.0 - beta]],
            ));
        }
    }

    let mut best: Option<MarkovFactorization> = None;
    for (w_given_x, y_cols_swapped) in candidates {
        let pw0 = w_given_x[0] * px.get(0) + w_given_x[1] * px.get(1);
        let pw = [pw0, 1.0 - pw0];
        let mut weights = Vec::new();
        let mut x_cols = Vec::new();
        let mut y_cols = Vec::new();
        for w in 0..2 {
            if pw[w] <= 1e-15 {
                continue;
            }
            weights.push(pw[w]);
            let pwx = |x: usize| if w == 0 { w_given_x[x] } else { 1.0 - w_given_x[x] };
            let mut xc = vec![pwx(0) * px.get(0) / pw[w], pwx(1) * px.get(1) / pw[w]];
            renormalize_exact(&mut xc);
            let mut yc = y_cols_swapped[w].clone();
            if swapped {
                yc.reverse();
            }
            x_cols.push(xc);
            y_cols.push(yc);
        }
        renormalize_exact(&mut weights);
        let Ok(f) = MarkovFactorization::new(weights, x_cols, y_cols) else {
            continue;
        };
        if !f.verify(j, 1e-10)?.ok {
            continue;
        }
        let better = best
            .as_ref()
            .is_none_or(|b| f.weight_entropy() < b.weight_entropy() - 1e-15);
        if better {
            best = Some(f);
        }
    }
    let best = best.ok_or_else(|| {
        Error::Infeasible("no 2x2 candidate factorization verified".into())
    })?;
    let g = best.weight_entropy();
    Ok(report(j, best, Method::ClosedForm2x2, Some(g), vec![], false))
}

/// Explicit G for the symmetric binary erasure source with erasure
/// probability `p`: the four corner factorizations of the three-category
/// decomposition are evaluated and the entropy-minimal one returned. The
/// value equals `min(1, H(p) + 1 - p)`.
pub fn g_closed_form_sbes(p: f64) -> Result<SolveReport> {
    let target = sbes(p)?;
    let corners = [
        (0.0, 0.0),
        (p / 2.0, p / 2.0),
        (0.0, p / 2.0),
        (p / 2.0, 0.0),
    ];
    // Column positions of the retained y labels within the full (0, 1, e) set.
    let full_pos: Vec<usize> = target
        .y_labels()
        .iter()
        .map(|l| match l.as_str() {
            "0" => 0,
            "1" => 1,
            _ => 2,
        })
        .collect();
    let project = |col: [f64; 3]| -> Vec<f64> {
        let mut c: Vec<f64> = full_pos.iter().map(|&i| col[i]).collect();
        renormalize_exact(&mut c);
        c
    };

    let mut best: Option<MarkovFactorization> = None;
    for &(c1, c2) in &corners {
        let cat = [
            (0.5 - c1, vec![1.0, 0.0], [(1.0 - p) / 2.0, 0.0, p / 2.0 - c1]),
            (0.5 - c2, vec![0.0, 1.0], [0.0, (1.0 - p) / 2.0, p / 2.0 - c2]),
            (
                c1 + c2,
                if c1 + c2 > 0.0 {
                    vec![c1 / (c1 + c2), c2 / (c1 + c2)]
                } else {
                    vec![0.5, 0.5]
                },
                [0.0, 0.0, 1.0],
            ),
        ];
        let mut weights = Vec::new();
        let mut x_cols = Vec::new();
        let mut y_cols = Vec::new();
        for (w, xc, yc_full) in cat {
            if w <= 1e-15 {
                continue;
            }
            weights.push(w);
            x_cols.push(xc);
            y_cols.push(project(yc_full));
        }
        renormalize_exact(&mut weights);
        let f = MarkovFactorization::new(weights, x_cols, y_cols)?;
        if !f.verify(&target, 1e-10)?.ok {
            continue;
        }
        let better = best
            .as_ref()
            .is_none_or(|b| f.weight_entropy() < b.weight_entropy() - 1e-15);
        if better {
            best = Some(f);
        }
    }
    let best = best.ok_or_else(|| Error::Infeasible("no SBES corner verified".into()))?;
    let formula = (binary_entropy(p)? + 1.0 - p).min(1.0);
    Ok(report(
        &target,
        best,
        Method::ClosedFormSbes,
        Some(formula),
        vec![],
        false,
    ))
}

// ---------------------------------------------------------------------------
// General solver
// ---------------------------------------------------------------------------

/// Routes to a closed form when one applies (2x2 pmfs, canonical SBES
/// layouts) and to [`g_general`] otherwise. An explicit `max_card` always
/// forces the general route.
pub fn solve_best(j: &JointPmf, cfg: &SolveConfig) -> Result<SolveReport> {
    if cfg.max_card.is_none() {
        if j.nx() == 2 && j.ny() == 2 {
            return g_closed_form_2x2(j);
        }
        if let Some(p) = sbes_erasure_probability(j) {
            return g_closed_form_sbes(p);
        }
    }
    g_general(j, cfg)
}

/// Multi-start search for `G(X;Y)` on an arbitrary small instance.
pub fn g_general(j: &JointPmf, cfg: &SolveConfig) -> Result<SolveReport> {
    if j.nx() * j.ny() > SOLVER_CELL_BUDGET {
        return Err(Error::AlphabetTooLarge(format!(
            "{}x{} exceeds {} cells",
            j.nx(),
            j.ny(),
            SOLVER_CELL_BUDGET
        )));
    }
    let deadline = cfg
        .time_budget
        .map(|s| std::time::Instant::now() + std::time::Duration::from_secs_f64(s));

    // Sufficient-statistic collapse on both sides; certificates lift back.
    let (_, collapsed_x) = sufficient_statistic_collapse(j);
    let (_, collapsed_yt) = sufficient_statistic_collapse(&collapsed_x.transpose());
    let collapsed = collapsed_yt.transpose();

    let solved = solve_collapsed(&collapsed, cfg, deadline)?;
    let lifted = lift_collapse(&solved.certificate, &collapsed, &collapsed_x, j)?;
    let rep = lifted.verify(j, cfg.feas_tol.max(1e-9))?;
    if !rep.ok {
        return Err(Error::Infeasible(format!(
            "lifted certificate missed the target by {:.3e}",
            rep.max_abs_error
        )));
    }
    Ok(report(
        j,
        lifted,
        Method::General,
        None,
        solved.per_restart,
        solved.restarts_failed,
    ))
}

struct Solved {
    certificate: MarkovFactorization,
    per_restart: Vec<Option<f64>>,
    restarts_failed: bool,
}

/// Expands a certificate of the doubly-collapsed instance back to the
/// original alphabets: within a merged class, symbols split proportionally to
/// their marginal.
fn lift_collapse(
    f: &MarkovFactorization,
    collapsed: &JointPmf,
    collapsed_x: &JointPmf,
    original: &JointPmf,
) -> Result<MarkovFactorization> {
    // Y lift: collapsed -> collapsed_x; X lift: collapsed_x -> original.
    let (y_classes, _) = sufficient_statistic_collapse(&collapsed_x.transpose());
    let (x_classes, _) = sufficient_statistic_collapse(original);

    let py_orig = collapsed_x.y_marginal();
    let py_coll = collapsed.y_marginal();
    let px_orig = original.x_marginal();
    let px_coll = collapsed_x.x_marginal();

    let weights = f.weights().to_vec();
    let y_cols = (0..f.card())
        .map(|w| {
            let col = f.y_col(w);
            let mut out: Vec<f64> = (0..collapsed_x.ny())
                .map(|y| col[y_classes[y]] * py_orig.get(y) / py_coll.get(y_classes[y]))
                .collect();
            renormalize_exact(&mut out);
            out
        })
        .collect();
    let x_cols = (0..f.card())
        .map(|w| {
            let col = f.x_col(w);
            let mut out: Vec<f64> = (0..original.nx())
                .map(|x| col[x_classes[x]] * px_orig.get(x) / px_coll.get(x_classes[x]))
                .collect();
            renormalize_exact(&mut out);
            out
        })
        .collect();
    MarkovFactorization::new(weights, x_cols, y_cols)
}

fn solve_collapsed(
    j: &JointPmf,
    cfg: &SolveConfig,
    deadline: Option<std::time::Instant>,
) -> Result<Solved> {
    // Trivial and degenerate shapes first.
    if j.nx() == 1 || j.ny() == 1 || j.is_independent(1e-12) {
        return Ok(Solved {
            certificate: independent_certificate(j),
            per_restart: vec![],
            restarts_failed: false,
        });
    }
    if let Some(f) = degenerate_certificate(j) {
        return Ok(Solved {
            certificate: f,
            per_restart: vec![],
            restarts_failed: false,
        });
    }

    if cfg.max_card.is_some() || cfg.skip_decomposition {
        let k = cfg
            .max_card
            .unwrap_or_else(|| cardinality_bound(j.nx(), j.ny()));
        return solve_connected(j, k, cfg, deadline);
    }

    let cp = common_part(j);
    if cp.dist.len() == 1 {
        let k = cardinality_bound(j.nx(), j.ny());
        return solve_connected(j, k, cfg, deadline);
    }

    // Solve each connected component and assemble W = (Z, W_z).
    let mut weights = Vec::new();
    let mut x_cols: Vec<Vec<f64>> = Vec::new();
    let mut y_cols: Vec<Vec<f64>> = Vec::new();
    let mut per_component: Vec<(f64, f64, Vec<Option<f64>>)> = Vec::new();
    let mut restarts_failed = false;
    for z in 0..cp.dist.len() {
        let xs: Vec<usize> = (0..j.nx()).filter(|&x| cp.z_of_x[x] == z).collect();
        let ys: Vec<usize> = (0..j.ny()).filter(|&y| cp.z_of_y[y] == z).collect();
        let pz = cp.dist.get(z);
        let rows: Vec<Vec<f64>> = xs
            .iter()
            .map(|&x| ys.iter().map(|&y| j.get(x, y) / pz).collect())
            .collect();
        let sub = JointPmf::new(
            rows,
            xs.iter().map(|&x| j.x_labels()[x].clone()).collect(),
            ys.iter().map(|&y| j.y_labels()[y].clone()).collect(),
        )?;
        let sub_solved = solve_collapsed(&sub, cfg, deadline)?;
        restarts_failed |= sub_solved.restarts_failed;
        let f = &sub_solved.certificate;
        for w in 0..f.card() {
            weights.push(pz * f.weights()[w]);
            let mut xc = vec![0.0; j.nx()];
            for (local, &x) in xs.iter().enumerate() {
                xc[x] = f.x_col(w)[local];
            }
            x_cols.push(xc);
            let mut yc = vec![0.0; j.ny()];
            for (local, &y) in ys.iter().enumerate() {
                yc[y] = f.y_col(w)[local];
            }
            y_cols.push(yc);
        }
        per_component.push((
            pz,
            f.weight_entropy(),
            sub_solved.per_restart,
        ));
    }
    renormalize_exact(&mut weights);
    let certificate = MarkovFactorization::new(weights, x_cols, y_cols)?;

    // Per-restart entropies assemble through the Property-5 identity; a
    // component without restart data contributes its exact value.
    let h_z = cp.dist.entropy();
    let per_restart = (0..cfg.restarts)
        .map(|r| {
            let mut total = h_z;
            for (pz, h_exact, per) in &per_component {
                let h = if per.is_empty() {
                    Some(*h_exact)
                } else {
                    per.get(r).copied().flatten()
                };
                total += pz * h?;
            }
            Some(total)
        })
        .collect();
    Ok(Solved {
        certificate,
        per_restart,
        restarts_failed,
    })
}

/// For sources where one side is a function of the other (at most one positive
/// entry per row, or per column), `G = H(common part)` directly.
fn degenerate_certificate(j: &JointPmf) -> Option<MarkovFactorization> {
    let rows_det = (0..j.nx()).all(|x| j.row(x).iter().filter(|&&v| v > 0.0).count() <= 1);
    let cols_det = (0..j.ny()).all(|y| (0..j.nx()).filter(|&x| j.get(x, y) > 0.0).count() <= 1);
    if !rows_det && !cols_det {
        return None;
    }
    let cp = common_part(j);
    let k = cp.dist.len();
    let mut weights = Vec::with_capacity(k);
    let mut x_cols = Vec::with_capacity(k);
    let mut y_cols = Vec::with_capacity(k);
    let px = j.x_marginal();
    let py = j.y_marginal();
    for z in 0..k {
        let pz = cp.dist.get(z);
        weights.push(pz);
        let mut xc = vec![0.0; j.nx()];
        for x in 0..j.nx() {
            if cp.z_of_x[x] == z {
                xc[x] = px.get(x) / pz;
            }
        }
        renormalize_exact(&mut xc);
        x_cols.push(xc);
        let mut yc = vec![0.0; j.ny()];
        for y in 0..j.ny() {
            if cp.z_of_y[y] == z {
                yc[y] = py.get(y) / pz;
            }
        }
        renormalize_exact(&mut yc);
        y_cols.push(yc);
    }
    let f = MarkovFactorization::new(weights, x_cols, y_cols).ok()?;
    f.verify(j, 1e-11).ok()?.ok.then_some(f)
}

fn solve_connected(
    j: &JointPmf,
    k: usize,
    cfg: &SolveConfig,
    deadline: Option<std::time::Instant>,
) -> Result<Solved> {
    let mut candidates: Vec<MarkovFactorization> = Vec::new();

    let push_polished = |f: MarkovFactorization, out: &mut Vec<MarkovFactorization>| {
        let polished = polish(&f, j);
        let g = polished.as_ref().unwrap_or(&f);
        if g.card() <= k {
            if let Ok(rep) = g.verify(j, cfg.feas_tol) {
                if rep.ok {
                    out.push(g.clone());
                }
            }
        } else if f.card() <= k {
            out.push(f);
        }
    };

    // Baselines. Polishing may shrink them below the cap even when the raw
    // card exceeds it, so try all three and filter afterwards.
    for f in [
        MarkovFactorization::from_w_equals_x(j),
        MarkovFactorization::from_w_equals_y(j),
        MarkovFactorization::from_w_equals_xy(j),
    ] {
        push_polished(f, &mut candidates);
    }

    let mut per_restart: Vec<Option<f64>> = vec![None; cfg.restarts];
    for r in 0..cfg.restarts {
        if let Some(d) = deadline {
            if std::time::Instant::now() >= d {
                break;
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ (r as u64));
        let Some(raw) = restart_solve(j, k, cfg, &mut rng) else {
            continue;
        };
        let before = candidates.len();
        push_polished(raw, &mut candidates);
        if candidates.len() > before {
            per_restart[r] = Some(candidates.last().unwrap().weight_entropy());
        }
    }
    let restarts_failed = per_restart.iter().all(|v| v.is_none());

    let best = candidates
        .into_iter()
        .min_by(|a, b| a.weight_entropy().total_cmp(&b.weight_entropy()))
        .ok_or_else(|| {
            Error::Infeasible(format!(
                "no certificate with |W| <= {k} reached feasibility"
            ))
        })?;
    Ok(Solved {
        certificate: best,
        per_restart,
        restarts_failed,
    })
}

/// Alternate the two entropy-reducing moves to a fixed point.
fn polish(f: &MarkovFactorization, target: &JointPmf) -> Option<MarkovFactorization> {
    let mut cur = f.clone();
    for _ in 0..4 {
        let reduced = cur.reduce_support(target).ok()?;
        let improved = reduced.same_support_improve(target).ok()?;
        let settled = improved.card() == cur.card()
            && (improved.weight_entropy() - cur.weight_entropy()).abs() <= 1e-13;
        cur = improved;
        if settled {
            break;
        }
    }
    Some(cur)
}

// One restart: random init, multiplicative KL updates to feasibility,
// penalized exponentiated-gradient descent, multiplicative re-projection.
fn restart_solve(
    target: &JointPmf,
    k: usize,
    cfg: &SolveConfig,
    rng: &mut ChaCha8Rng,
) -> Option<MarkovFactorization> {
    let (nx, ny) = (target.nx(), target.ny());
    let m = target.matrix();

    let mut lam = random_simplex(k, rng);
    let mut a: Vec<Vec<f64>> = (0..k).map(|_| random_simplex(nx, rng)).collect();
    let mut b: Vec<Vec<f64>> = (0..k).map(|_| random_simplex(ny, rng)).collect();

    multiplicative_phase(m, nx, ny, &mut lam, &mut a, &mut b, cfg.nmf_iters);

    for stage in &cfg.penalty_schedule {
        eg_phase(m, nx, ny, &mut lam, &mut a, &mut b, stage);
    }

    // Snap the structure found by the descent, then re-project exactly.
    let lam_max = lam.iter().cloned().fold(0.0f64, f64::max);
    let keep: Vec<usize> = (0..k).filter(|&w| lam[w] > 1e-10 * lam_max).collect();
    if keep.is_empty() {
        return None;
    }
    let mut lam: Vec<f64> = keep.iter().map(|&w| lam[w]).collect();
    renormalize_exact(&mut lam);
    let snap_col = |col: &[f64]| {
        let mut c: Vec<f64> = col.iter().map(|&v| if v < 1e-13 { 0.0 } else { v }).collect();
        renormalize_exact(&mut c);
        c
    };
    let mut a: Vec<Vec<f64>> = keep.iter().map(|&w| snap_col(&a[w])).collect();
    let mut b: Vec<Vec<f64>> = keep.iter().map(|&w| snap_col(&b[w])).collect();

    let err = multiplicative_phase(m, nx, ny, &mut lam, &mut a, &mut b, cfg.reproject_iters);
    if err > cfg.feas_tol * 0.9 {
        return None;
    }
    MarkovFactorization::new(lam, a, b).ok()
}

fn random_simplex(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut v: Vec<f64> = (0..n).map(|_| -unit_f64(rng).max(1e-12).ln()).collect();
    renormalize_exact(&mut v);
    v
}

fn unit_f64(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

fn induced(
    nx: usize,
    ny: usize,
    lam: &[f64],
    a: &[Vec<f64>],
    b: &[Vec<f64>],
) -> Vec<f64> {
    let mut p = vec![0.0; nx * ny];
    for (w, &l) in lam.iter().enumerate() {
        if l == 0.0 {
            continue;
        }
        for (x, &ax) in a[w].iter().enumerate() {
            if ax == 0.0 {
                continue;
            }
            let row = &mut p[x * ny..(x + 1) * ny];
            for (y, &by) in b[w].iter().enumerate() {
                row[y] += l * ax * by;
            }
        }
    }
    p
}

fn max_abs_err(m: &[f64], p: &[f64]) -> f64 {
    m.iter()
        .zip(p)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0f64, f64::max)
}

/// Divergence-driven multiplicative updates toward an exact factorization.
/// Returns the final max-abs reconstruction error.
fn multiplicative_phase(
    m: &[f64],
    nx: usize,
    ny: usize,
    lam: &mut Vec<f64>,
    a: &mut [Vec<f64>],
    b: &mut [Vec<f64>],
    iters: usize,
) -> f64 {
    let k = lam.len();
    for _ in 0..iters {
        let p = induced(nx, ny, lam, a, b);
        if max_abs_err(m, &p) < 1e-12 {
            break;
        }
        let ratio: Vec<f64> = m
            .iter()
            .zip(&p)
            .map(|(&mv, &pv)| if mv == 0.0 { 0.0 } else { mv / pv.max(1e-300) })
            .collect();
        // X-side columns.
        for w in 0..k {
            let mut col = vec![0.0; nx];
            for x in 0..nx {
                let mut s = 0.0;
                for y in 0..ny {
                    s += b[w][y] * ratio[x * ny + y];
                }
                col[x] = a[w][x] * s;
            }
            let sum: f64 = col.iter().sum();
            if sum > 0.0 {
                for (ax, c) in a[w].iter_mut().zip(col) {
                    *ax = c / sum;
                }
            }
        }
        // Y-side columns and weights.
        let p = induced(nx, ny, lam, a, b);
        let ratio: Vec<f64> = m
            .iter()
            .zip(&p)
            .map(|(&mv, &pv)| if mv == 0.0 { 0.0 } else { mv / pv.max(1e-300) })
            .collect();
        for w in 0..k {
            let mut col = vec![0.0; ny];
            let mut total = 0.0;
            for y in 0..ny {
                let mut s = 0.0;
                for x in 0..nx {
                    s += a[w][x] * ratio[x * ny + y];
                }
                col[y] = b[w][y] * s;
                total += col[y];
            }
            lam[w] *= total;
            if total > 0.0 {
                for (by, c) in b[w].iter_mut().zip(col) {
                    *by = c / total;
                }
            }
        }
        let lsum: f64 = lam.iter().sum();
        if lsum > 0.0 {
            for l in lam.iter_mut() {
                *l /= lsum;
            }
        }
    }
    let p = induced(nx, ny, lam, a, b);
    max_abs_err(m, &p)
}

/// One continuation stage of exponentiated-gradient descent on
/// `H(lam) + multiplier · KL(m ‖ induced)`.
fn eg_phase(
    m: &[f64],
    nx: usize,
    ny: usize,
    lam: &mut Vec<f64>,
    a: &mut [Vec<f64>],
    b: &mut [Vec<f64>],
    stage: &PenaltyStage,
) {
    const ETA: f64 = 0.3;
    let k = lam.len();
    let c = stage.multiplier;
    let ln2_inv = 1.0 / std::f64::consts::LN_2;
    for _ in 0..stage.iters {
        let p = induced(nx, ny, lam, a, b);
        let ratio: Vec<f64> = m
            .iter()
            .zip(&p)
            .map(|(&mv, &pv)| if mv == 0.0 { 0.0 } else { mv / pv.max(1e-300) })
            .collect();

        // Gradient wrt the weights: entropy pressure plus penalty coupling.
        let mut glam = vec![0.0; k];
        for w in 0..k {
            let mut s = 0.0;
            for x in 0..nx {
                if a[w][x] == 0.0 {
                    continue;
                }
                for y in 0..ny {
                    s += a[w][x] * b[w][y] * ratio[x * ny + y];
                }
            }
            let h_term = -(lam[w].max(1e-300)).log2() - ln2_inv;
            glam[w] = c * (1.0 - s) + h_term;
        }
        eg_step(lam, &glam, ETA);

        let p = induced(nx, ny, lam, a, b);
        let ratio: Vec<f64> = m
            .iter()
            .zip(&p)
            .map(|(&mv, &pv)| if mv == 0.0 { 0.0 } else { mv / pv.max(1e-300) })
            .collect();
        for w in 0..k {
            let lw = lam[w];
            if lw == 0.0 {
                continue;
            }
            let mut ga = vec![0.0; nx];
            for x in 0..nx {
                let mut s = 0.0;
                for y in 0..ny {
                    s += b[w][y] * ratio[x * ny + y];
                }
                ga[x] = c * lw * (1.0 - s);
            }
            eg_step(&mut a[w], &ga, ETA);
            let mut gb = vec![0.0; ny];
            for y in 0..ny {
                let mut s = 0.0;
                for x in 0..nx {
                    s += a[w][x] * ratio[x * ny + y];
                }
                gb[y] = c * lw * (1.0 - s);
            }
            eg_step(&mut b[w], &gb, ETA);
        }
    }
}

fn eg_step(v: &mut Vec<f64>, grad: &[f64], eta: f64) {
    let scale = grad
        .iter()
        .zip(v.iter())
        .filter(|(_, &vi)| vi > 0.0)
        .map(|(g, _)| g.abs())
        .fold(0.0f64, f64::max);
    if scale == 0.0 {
        return;
    }
    for (vi, g) in v.iter_mut().zip(grad) {
        if *vi > 0.0 {
            *vi *= (-eta * g / scale).exp();
        }
    }
    let sum: f64 = v.iter().sum();
    if sum > 0.0 {
        for vi in v.iter_mut() {
            *vi /= sum;
        }
    }
}

// ---------------------------------------------------------------------------
// Restriction audit
// ---------------------------------------------------------------------------

/// Result of the restricted-source optimality audit.
#[derive(Debug, Clone, Serialize)]
pub struct RestrictionReport {
    pub g_restricted: f64,
    pub h_conditional: f64,
    pub gap: f64,
}

/// Necessary-condition audit of a claimed-optimal certificate: the common
/// entropy of the source restricted to a subset of W components must equal
/// `H(W | W ∈ subset)`. A gap beyond tolerance means the certificate was not
/// optimal.
pub fn restriction_check(
    f: &MarkovFactorization,
    target: &JointPmf,
    subset: &[usize],
    cfg: &SolveConfig,
) -> Result<RestrictionReport> {
    let restricted = f.restricted_source(subset, target.x_labels(), target.y_labels())?;
    let h_conditional = f.conditional_entropy_given(subset)?;
    let sub = solve_best(&restricted, cfg)?;
    Ok(RestrictionReport {
        g_restricted: sub.g_bits,
        h_conditional,
        gap: (sub.g_bits - h_conditional).abs(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn cardinality_bounds() {
        assert_eq!(cardinality_bound(2, 2), 3);
        assert_eq!(cardinality_bound(2, 3), 3);
        assert_eq!(cardinality_bound(3, 3), 7);
        assert_eq!(cardinality_bound(4, 4), 15);
        assert_eq!(cardinality_bound(1, 5), 1);
    }

    #[test]
    fn closed_form_2x2_section_example() {
        let j = JointPmf::from_matrix(vec![
            vec![1.0 / 3.0, 1.0 / 3.0],
            vec![1.0 / 3.0, 0.0],
        ])
        .unwrap();
        let rep = g_closed_form_2x2(&j).unwrap();
        assert!(close(rep.g_bits, 0.9182958340544896, 1e-12));
        assert!(rep.certificate.verify(&j, 1e-10).unwrap().ok);
    }

    #[test]
    fn closed_form_2x2_independent_and_correlated() {
        let prod = JointPmf::from_matrix(vec![vec![0.21, 0.49], vec![0.09, 0.21]]).unwrap();
        assert!(g_closed_form_2x2(&prod).unwrap().g_bits < 1e-12);

        let eq = JointPmf::from_matrix(vec![vec![0.5, 0.0], vec![0.0, 0.5]]).unwrap();
        let rep = g_closed_form_2x2(&eq).unwrap();
        assert!(close(rep.g_bits, 1.0, 1e-12));

        let s = sbes(0.9).unwrap();
        assert!(g_closed_form_2x2(&s).is_err());
    }

    #[test]
    fn closed_form_sbes_values() {
        let rep = g_closed_form_sbes(0.9).unwrap();
        assert!(close(rep.g_bits, 0.5689955935892812, 1e-12));
        assert_eq!(rep.certificate.card(), 3);
        let w = rep.certificate.weights();
        assert!(close(w[0], 0.9, 1e-12));
        assert!(close(w[1], 0.05, 1e-12));
        assert!(close(w[2], 0.05, 1e-12));

        let rep = g_closed_form_sbes(0.3).unwrap();
        assert!(close(rep.g_bits, 1.0, 1e-12));
        assert_eq!(rep.certificate.card(), 2);

        let rep = g_closed_form_sbes(0.0).unwrap();
        assert!(close(rep.g_bits, 1.0, 1e-12));

        let rep = g_closed_form_sbes(1.0).unwrap();
        assert!(close(rep.g_bits, 0.0, 1e-12));

        assert!(g_closed_form_sbes(-0.1).is_err());
    }

    #[test]
    fn general_solver_on_uniform_independent_3x3() {
        let j = JointPmf::from_matrix(vec![vec![1.0 / 9.0; 3]; 3]).unwrap();
        let rep = g_general(&j, &SolveConfig::quick(4, 7)).unwrap();
        assert!(rep.g_bits < 1e-9);
    }

    #[test]
    fn general_solver_matches_sbes_closed_form() {
        let s = sbes(0.9).unwrap();
        let rep = g_general(&s, &SolveConfig::quick(8, 1)).unwrap();
        assert!(
            close(rep.g_bits, 0.5689955935892812, 1e-6),
            "got {}",
            rep.g_bits
        );
        assert!(rep.certificate.verify(&s, 1e-8).unwrap().ok);
        assert!(rep.certificate.has_distinct_supports());
    }

    #[test]
    fn general_solver_respects_card_cap() {
        let s = sbes(0.9).unwrap();
        let cfg = SolveConfig {
            max_card: Some(2),
            ..SolveConfig::quick(8, 0)
        };
        let rep = g_general(&s, &cfg).unwrap();
        assert!(rep.g_bits >= 1.0 - 1e-9, "got {}", rep.g_bits);
        assert!(rep.certificate.card() <= 2);
    }

    #[test]
    fn general_solver_block_diagonal_uses_common_part() {
        // Two perfectly separated blocks: G = H(0.6) + 0.6*G1 + 0.4*G2, with
        // the per-block values taken from the 2x2 closed form.
        let j = JointPmf::from_matrix(vec![
            vec![0.2, 0.2, 0.0, 0.0],
            vec![0.1, 0.1, 0.0, 0.0],
            vec![0.0, 0.0, 0.2, 0.1],
            vec![0.0, 0.0, 0.1, 0.0],
        ])
        .unwrap();
        let rep = g_general(&j, &SolveConfig::quick(6, 3)).unwrap();
        let block1 =
            JointPmf::from_matrix(vec![vec![1.0 / 3.0, 1.0 / 3.0], vec![1.0 / 6.0, 1.0 / 6.0]])
                .unwrap();
        let block2 = JointPmf::from_matrix(vec![vec![0.5, 0.25], vec![0.25, 0.0]]).unwrap();
        let expect = binary_entropy(0.6).unwrap()
            + 0.6 * g_closed_form_2x2(&block1).unwrap().g_bits
            + 0.4 * g_closed_form_2x2(&block2).unwrap().g_bits;
        assert!(close(rep.g_bits, expect, 1e-6), "got {} want {}", rep.g_bits, expect);
        assert!(rep.certificate.verify(&j, 1e-9).unwrap().ok);
    }

    #[test]
    fn restriction_check_full_set_is_consistent() {
        let rep = g_closed_form_sbes(0.9).unwrap();
        let s = sbes(0.9).unwrap();
        let all: Vec<usize> = (0..rep.certificate.card()).collect();
        let audit =
            restriction_check(&rep.certificate, &s, &all, &SolveConfig::quick(8, 5)).unwrap();
        assert!(audit.gap < 1e-6, "gap {}", audit.gap);
    }

    #[test]
    fn solve_best_routes() {
        let j = JointPmf::from_matrix(vec![
            vec![1.0 / 3.0, 1.0 / 3.0],
            vec![1.0 / 3.0, 0.0],
        ])
        .unwrap();
        assert_eq!(
            solve_best(&j, &SolveConfig::default()).unwrap().method,
            Method::ClosedForm2x2
        );
        let s = sbes(0.4).unwrap();
        assert_eq!(
            solve_best(&s, &SolveConfig::default()).unwrap().method,
            Method::ClosedFormSbes
        );
    }
}
