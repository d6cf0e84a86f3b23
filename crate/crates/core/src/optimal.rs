//! Least-squares optimal planar pose from three or more correspondences.
//!
//! Every correspondence contributes one row `a` of the homogeneous system
//! `A x = 0` with `x = [cos β, sin β, sin(α+β), cos(α+β)]`. Fixing one of the
//! last two coordinates to 1 removes the scale, and a single Lagrange
//! multiplier `λ` enforces equal lengths of the two halves of `x`:
//!
//! ```text
//! Ĵ = ‖γ a₁ + δ a₂ + ε a₃ + a₄‖² + λ (γ² + δ² − ε² − 1)
//! ```
//!
//! Stationarity gives `M(λ) [γ δ ε]ᵀ = b` with `M(λ) = G₃ + λ diag(1, 1, −1)`.
//! Writing the solution as `adj(M) b / det M` and substituting into the
//! constraint yields a degree-6 polynomial in `λ` whose real roots are the
//! candidate multipliers. Both choices of the fixed coordinate are solved and
//! pooled so that neither `sin(α+β) ≈ 0` nor `cos(α+β) ≈ 0` is a blind spot.

use nalgebra::{DMatrix, Matrix3, Matrix4, Vector3};
use serde::Serialize;

use crate::error::{PoseError, Result};
use crate::geom::{cheirality_select, validate_points, Correspondence, PlanarPose};
use crate::poly::{real_roots, Polynomial, DEFAULT_IMAG_TOL};
use crate::robust::{select_by_holdout_index, split_holdout};

/// Absolute threshold on the Gram diagonal below which a column block counts as zero.
pub const DEFAULT_DEGENERACY_TOL: f64 = 1e-12;

/// Candidates whose constraint residual exceeds this after polishing are dropped.
pub const DEFAULT_MAX_CONSTRAINT_RESIDUAL: f64 = 1e-5;

const COMPENSATED_SUM_THRESHOLD: usize = 10_000;
const CONSTRAINT_REFINE_STEPS: usize = 3;
const COST_TIE_RELATIVE: f64 = 1e-14;

/// The four design columns `a₁..a₄`, kept as their Gram matrix `AᵀA`.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignColumns {
    n: usize,
    gram: Matrix4<f64>,
}

impl DesignColumns {
    pub fn from_gram(n: usize, gram: Matrix4<f64>) -> Self {
        Self { n, gram }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn gram(&self) -> &Matrix4<f64> {
        &self.gram
    }

    /// `‖A x‖²` at the unit-normalized parameter vector of `pose`.
    pub fn unit_cost(&self, pose: &PlanarPose) -> f64 {
        let x = nalgebra::Vector4::from(pose.parameter_vector());
        (x.transpose() * self.gram * x)[(0, 0)].max(0.0)
    }

    /// `‖γa₁ + δa₂ + εa₃ + a₄‖²` in the parameterization of `branch`, i.e.
    /// `‖A x‖²` with `x` scaled so that the fixed coordinate equals one.
    /// Infinite when that coordinate is zero for `pose`.
    pub fn branch_cost(&self, pose: &PlanarPose, branch: Branch) -> f64 {
        let fixed = pose.parameter_vector()[branch.fixed_index()];
        if fixed == 0.0 {
            return f64::INFINITY;
        }
        self.unit_cost(pose) / (fixed * fixed)
    }

    fn permuted(&self, branch: Branch) -> Matrix4<f64> {
        let o = branch.order();
        Matrix4::from_fn(|i, j| self.gram[(o[i], o[j])])
    }
}

#[derive(Default, Clone, Copy)]
struct Neumaier {
    sum: f64,
    comp: f64,
}

impl Neumaier {
    fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Accumulates `AᵀA` over the design rows of `points` in one pass.
pub fn build_design(points: &[Correspondence]) -> Result<DesignColumns> {
    validate_points(points, 3)?;
    Ok(accumulate_design(points))
}

fn accumulate_design(points: &[Correspondence]) -> DesignColumns {
    let mut gram = Matrix4::zeros();
    if points.len() > COMPENSATED_SUM_THRESHOLD {
        let mut acc = [[Neumaier::default(); 4]; 4];
        for c in points {
            let r = c.design_row();
            for i in 0..4 {
                for j in i..4 {
                    acc[i][j].add(r[i] * r[j]);
                }
            }
        }
        for i in 0..4 {
            for j in i..4 {
                gram[(i, j)] = acc[i][j].value();
                gram[(j, i)] = gram[(i, j)];
            }
        }
    } else {
        for c in points {
            let r = c.design_row();
            for i in 0..4 {
                for j in i..4 {
                    gram[(i, j)] += r[i] * r[j];
                }
            }
        }
        for i in 0..4 {
            for j in 0..i {
                gram[(i, j)] = gram[(j, i)];
            }
        }
    }
    DesignColumns {
        n: points.len(),
        gram,
    }
}

/// `Σ (rowᵢ · x)²` evaluated residual by residual, free of the cancellation
/// in the Gram quadratic form.
pub fn residual_cost(points: &[Correspondence], x: &[f64; 4]) -> f64 {
    let r2 = |c: &Correspondence| {
        let r = c.design_row();
        let v = r[0] * x[0] + r[1] * x[1] + r[2] * x[2] + r[3] * x[3];
        v * v
    };
    if points.len() > COMPENSATED_SUM_THRESHOLD {
        let mut acc = Neumaier::default();
        points.iter().for_each(|c| acc.add(r2(c)));
        acc.value()
    } else {
        points.iter().map(r2).sum()
    }
}

/// Parameter vector of `pose` scaled so that the coordinate fixed by
/// `branch` equals one; `None` if that coordinate is zero.
pub fn branch_vector(pose: &PlanarPose, branch: Branch) -> Option<[f64; 4]> {
    let x = pose.parameter_vector();
    let f = x[branch.fixed_index()];
    (f != 0.0).then(|| x.map(|v| v / f))
}

/// True when either 2-column block of the design matrix is numerically zero,
/// in which case one of the two angles is unobservable.
pub fn check_degenerate(d: &DesignColumns, tol: f64) -> bool {
    let g = &d.gram;
    g[(0, 0)].max(g[(1, 1)]) <= tol || g[(2, 2)].max(g[(3, 3)]) <= tol
}

/// Which coordinate of the parameter vector is fixed to one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Branch {
    /// `x = [γ, δ, ε, 1]`
    FixFourth,
    /// `x = [γ, δ, 1, ε]`, i.e. the third and fourth columns swapped
    FixThird,
}

impl Branch {
    pub const ALL: [Branch; 2] = [Branch::FixFourth, Branch::FixThird];

    /// Column order of the branch's design matrix.
    pub fn order(self) -> [usize; 4] {
        match self {
            Branch::FixFourth => [0, 1, 2, 3],
            Branch::FixThird => [0, 1, 3, 2],
        }
    }

    pub fn fixed_index(self) -> usize {
        self.order()[3]
    }

    /// Full parameter vector in the natural column order from `[γ, δ, ε]`.
    pub fn expand(self, gde: &[f64; 3]) -> [f64; 4] {
        let o = self.order();
        let mut x = [0.0; 4];
        x[o[0]] = gde[0];
        x[o[1]] = gde[1];
        x[o[2]] = gde[2];
        x[o[3]] = 1.0;
        x
    }

    pub fn name(self) -> &'static str {
        match self {
            Branch::FixFourth => "fix_fourth",
            Branch::FixThird => "fix_third",
        }
    }
}

/// `P₁..P₃` (numerators of `γ, δ, ε`) and `P₄ = det M(λ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LambdaPolynomials {
    pub numerators: [Polynomial; 3],
    pub determinant: Polynomial,
}

impl LambdaPolynomials {
    /// `P₁² + P₂² − P₃² − P₄²`; its roots make `γ² + δ² − ε² − 1` vanish.
    pub fn constraint_polynomial(&self) -> Polynomial {
        let [p1, p2, p3] = &self.numerators;
        let sum = &(&p1.sq_norm() + &p2.sq_norm()) - &p3.sq_norm();
        &sum - &self.determinant.sq_norm()
    }

    /// `[γ, δ, ε] = [P₁, P₂, P₃] / P₄` evaluated at `lambda`.
    pub fn solution_via_adjugate(&self, lambda: f64) -> [f64; 3] {
        let d = self.determinant.eval(lambda);
        self.numerators.each_ref().map(|p| p.eval(lambda) / d)
    }
}

fn system_matrix_poly(g: &Matrix4<f64>) -> [[Polynomial; 3]; 3] {
    let sign = [1.0, 1.0, -1.0];
    std::array::from_fn(|i| {
        std::array::from_fn(|j| {
            if i == j {
                Polynomial::linear(g[(i, j)], sign[i])
            } else {
                Polynomial::constant(g[(i, j)])
            }
        })
    })
}

fn cofactor(m: &[[Polynomial; 3]; 3], i: usize, j: usize) -> Polynomial {
    let rows: Vec<usize> = (0..3).filter(|&r| r != i).collect();
    let cols: Vec<usize> = (0..3).filter(|&c| c != j).collect();
    let minor = &(&m[rows[0]][cols[0]] * &m[rows[1]][cols[1]])
        - &(&m[rows[0]][cols[1]] * &m[rows[1]][cols[0]]);
    if (i + j).is_multiple_of(2) {
        minor
    } else {
        -&minor
    }
}

/// Rows of `adj M(λ)` times `b = -[g₁₄, g₂₄, g₃₄]`, and `det M(λ)`, for the
/// column order of `branch`.
pub fn build_lambda_polynomials(d: &DesignColumns, branch: Branch) -> Result<LambdaPolynomials> {
    if check_degenerate(d, DEFAULT_DEGENERACY_TOL) {
        return Err(PoseError::Degenerate(
            "a column block of the design matrix vanishes".into(),
        ));
    }
    Ok(lambda_polynomials_unchecked(&d.permuted(branch)))
}

fn lambda_polynomials_unchecked(g: &Matrix4<f64>) -> LambdaPolynomials {
    let m = system_matrix_poly(g);
    let cof: [[Polynomial; 3]; 3] =
        std::array::from_fn(|i| std::array::from_fn(|j| cofactor(&m, i, j)));
    let b = [-g[(0, 3)], -g[(1, 3)], -g[(2, 3)]];
    let numerators = std::array::from_fn(|i| {
        // adj(M)[i][j] = cof[j][i]
        (0..3).fold(Polynomial::zero(), |acc, j| &acc + &(&cof[j][i] * b[j]))
    });
    let determinant = (0..3).fold(Polynomial::zero(), |acc, j| &acc + &(&m[0][j] * &cof[0][j]));
    LambdaPolynomials {
        numerators,
        determinant,
    }
}

/// Options for [`solve_optimal`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimalOptions {
    /// Fraction of points left out of the fit and used to pick among
    /// candidates. Zero selects by in-sample cost.
    pub holdout_fraction: f64,
    pub degeneracy_tol: f64,
    pub imag_tol: f64,
    pub max_constraint_residual: f64,
}

impl Default for OptimalOptions {
    fn default() -> Self {
        Self {
            holdout_fraction: 0.0,
            degeneracy_tol: DEFAULT_DEGENERACY_TOL,
            imag_tol: DEFAULT_IMAG_TOL,
            max_constraint_residual: DEFAULT_MAX_CONSTRAINT_RESIDUAL,
        }
    }
}

/// One stationary point of the Lagrangian.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolverCandidate {
    pub lambda: f64,
    pub gamma: f64,
    pub delta: f64,
    pub epsilon: f64,
    pub branch: Branch,
    /// `‖γa₁ + δa₂ + εa₃ + a₄‖²` on all input points.
    pub cost: f64,
    /// `‖A x‖²` with both halves of `x` unit length, on all input points.
    pub unit_cost: f64,
    /// `|γ² + δ² − ε² − 1|` before renormalization.
    pub constraint_residual: f64,
    /// Pose of the candidate; the sign of `t` is not resolved.
    pub pose: PlanarPose,
}

/// Everything the solver looked at on the way to its answer.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Diagnostics {
    pub candidates: Vec<SolverCandidate>,
    /// Real roots found per branch, `[FixFourth, FixThird]`.
    pub root_counts: [usize; 2],
    pub selected_index: usize,
    pub selected_branch: Branch,
    /// Branch cost of the returned pose, summed residual by residual over all
    /// input points.
    pub cost: f64,
    pub unit_cost: f64,
    pub holdout_size: usize,
}

impl Diagnostics {
    pub fn selected(&self) -> &SolverCandidate {
        &self.candidates[self.selected_index]
    }
}

/// Solves `M(λ) x = b` and polishes `λ` on the constraint `xᵀ D x − 1`,
/// which is better conditioned than the squared degree-6 polynomial. Roots
/// whose residual stays above `max_residual` are rejected; survivors are
/// projected onto the constraint and the remaining residual is returned.
fn back_substitute(
    g: &Matrix4<f64>,
    lambda0: f64,
    max_residual: f64,
) -> Option<(f64, Vector3<f64>, f64)> {
    let g3 = g.fixed_view::<3, 3>(0, 0).into_owned();
    let b = -Vector3::new(g[(0, 3)], g[(1, 3)], g[(2, 3)]);
    let dsign = Vector3::new(1.0, 1.0, -1.0);

    let solve = |lambda: f64| -> Option<(Vector3<f64>, f64, f64)> {
        let m = g3 + Matrix3::from_diagonal(&(dsign * lambda));
        let lu = m.lu();
        let x = lu.solve(&b)?;
        if !x.iter().all(|v| v.is_finite()) {
            return None;
        }
        let dx = x.component_mul(&dsign);
        let f = x.dot(&dx) - 1.0;
        let y = lu.solve(&dx)?;
        let df = -2.0 * dx.dot(&y);
        Some((x, f, df))
    };

    let mut lambda = lambda0;
    let (mut x, mut f, mut df) = solve(lambda)?;
    for _ in 0..CONSTRAINT_REFINE_STEPS {
        if f == 0.0 || df == 0.0 || !df.is_finite() {
            break;
        }
        let cand = lambda - f / df;
        match solve(cand) {
            Some((xc, fc, dfc)) if fc.abs() < f.abs() => {
                lambda = cand;
                x = xc;
                f = fc;
                df = dfc;
            }
            _ => break,
        }
    }
    if !(f.abs() <= max_residual) {
        return None;
    }
    // one step along the constraint normal; large |x| otherwise leaves the
    // residual at the rounding level of x²
    let n = x.component_mul(&dsign);
    let nn = n.dot(&n);
    if nn > 0.0 {
        x -= n * (f / (2.0 * nn));
    }
    let residual = (x.dot(&x.component_mul(&dsign)) - 1.0).abs();
    Some((lambda, x, residual))
}

fn branch_candidates(
    scaled: &DesignColumns,
    scale: f64,
    full: &DesignColumns,
    branch: Branch,
    opts: &OptimalOptions,
) -> Result<(Vec<SolverCandidate>, usize)> {
    let g = scaled.permuted(branch);
    let polys = lambda_polynomials_unchecked(&g);
    let constraint = polys.constraint_polynomial();
    debug_assert_eq!(constraint.coeff(6), -1.0);
    let roots = real_roots(&constraint, opts.imag_tol)?;

    let mut out = Vec::with_capacity(roots.len());
    for &root in &roots {
        let Some((lambda, x, residual)) = back_substitute(&g, root, opts.max_constraint_residual)
        else {
            continue;
        };
        let gde = [x[0], x[1], x[2]];
        let full_x = branch.expand(&gde);
        let n1 = full_x[0].hypot(full_x[1]);
        let n2 = full_x[2].hypot(full_x[3]);
        if n1 == 0.0 || n2 == 0.0 || !n1.is_finite() || !n2.is_finite() {
            continue;
        }
        let unit = [
            full_x[0] / n1,
            full_x[1] / n1,
            full_x[2] / n2,
            full_x[3] / n2,
        ];
        let pose = PlanarPose::from_parameter_vector(&unit);
        let xv = nalgebra::Vector4::from(full_x);
        let cost = (xv.transpose() * full.gram * xv)[(0, 0)].max(0.0);
        out.push(SolverCandidate {
            lambda: lambda * scale,
            gamma: gde[0],
            delta: gde[1],
            epsilon: gde[2],
            branch,
            cost,
            unit_cost: full.unit_cost(&pose),
            constraint_residual: residual,
            pose,
        });
    }
    Ok((out, roots.len()))
}

fn better_within_branch(a: &SolverCandidate, b: &SolverCandidate) -> bool {
    let tie = (a.cost - b.cost).abs() <= COST_TIE_RELATIVE * a.cost.max(b.cost);
    if tie {
        a.lambda.abs() < b.lambda.abs()
    } else {
        a.cost < b.cost
    }
}

/// Least-squares optimal planar pose from `points` (at least three).
///
/// Candidates from both parameterization branches are pooled. Without a
/// hold-out, each branch contributes its minimum-cost candidate and the two are
/// compared by unit-normalized cost, preferring [`Branch::FixFourth`] on a
/// tie. With a hold-out, every candidate is ranked by its algebraic error on
/// the held-out points. The sign of the translation is resolved by cheirality
/// on all points.
pub fn solve_optimal(
    points: &[Correspondence],
    opts: &OptimalOptions,
) -> Result<(PlanarPose, Diagnostics)> {
    validate_points(points, 3)?;
    let (fit_idx, holdout_idx) = split_holdout(points.len(), opts.holdout_fraction, 3);
    let fit: Vec<Correspondence> = fit_idx.iter().map(|&i| points[i]).collect();
    let holdout: Vec<Correspondence> = holdout_idx.iter().map(|&i| points[i]).collect();

    let design = accumulate_design(&fit);
    if check_degenerate(&design, opts.degeneracy_tol) {
        return Err(PoseError::Degenerate(
            "all second image coordinates vanish in one column block".into(),
        ));
    }
    let full = if holdout.is_empty() {
        design.clone()
    } else {
        accumulate_design(points)
    };

    // λ scales with G; normalizing keeps the polynomial coefficients O(1)
    let scale = design.gram.diagonal().max();
    let scaled = DesignColumns::from_gram(design.n, design.gram / scale);

    let mut candidates = Vec::new();
    let mut root_counts = [0usize; 2];
    for (k, branch) in Branch::ALL.into_iter().enumerate() {
        let (c, roots) = branch_candidates(&scaled, scale, &full, branch, opts)?;
        root_counts[k] = roots;
        candidates.extend(c);
    }
    if candidates.is_empty() {
        return Err(PoseError::NoSolution);
    }

    let selected_index = if holdout.is_empty() {
        let mut branch_best: Vec<usize> = Vec::new();
        for branch in Branch::ALL {
            let best = candidates
                .iter()
                .enumerate()
                .filter(|(_, c)| c.branch == branch)
                .fold(None::<usize>, |acc, (i, c)| match acc {
                    Some(j) if !better_within_branch(c, &candidates[j]) => Some(j),
                    _ => Some(i),
                });
            branch_best.extend(best);
        }
        // branch_best is ordered FixFourth first, which wins ties
        let mut sel = branch_best[0];
        for &i in &branch_best[1..] {
            let (a, b) = (candidates[i].unit_cost, candidates[sel].unit_cost);
            let tie = (a - b).abs() <= COST_TIE_RELATIVE * a.max(b);
            if !tie && a < b {
                sel = i;
            }
        }
        sel
    } else {
        let scored: Vec<(PlanarPose, f64)> =
            candidates.iter().map(|c| (c.pose, c.unit_cost)).collect();
        select_by_holdout_index(&scored, &holdout).expect("candidates are non-empty")
    };

    let chosen = candidates[selected_index];
    let pose = cheirality_select(&[chosen.pose, chosen.pose.flipped()], points)
        .expect("two candidates supplied");
    let cost = branch_vector(&pose, chosen.branch)
        .map(|x| residual_cost(points, &x))
        .unwrap_or(f64::INFINITY);
    let diagnostics = Diagnostics {
        selected_branch: chosen.branch,
        cost,
        unit_cost: residual_cost(points, &pose.parameter_vector()),
        candidates,
        root_counts,
        selected_index,
        holdout_size: holdout.len(),
    };
    Ok((pose, diagnostics))
}

/// Linear baseline: the right singular vector of `A` for the smallest singular
/// value, with its two halves normalized independently.
pub fn solve_linear_planar(points: &[Correspondence]) -> Result<PlanarPose> {
    validate_points(points, 3)?;
    let design = accumulate_design(points);
    if check_degenerate(&design, DEFAULT_DEGENERACY_TOL) {
        return Err(PoseError::Degenerate(
            "all second image coordinates vanish in one column block".into(),
        ));
    }
    let x = null_vector(points).ok_or(PoseError::NoSolution)?;
    let n1 = x[0].hypot(x[1]);
    let n2 = x[2].hypot(x[3]);
    if n1 == 0.0 || n2 == 0.0 {
        return Err(PoseError::Degenerate(
            "null vector has a vanishing half".into(),
        ));
    }
    let pose = PlanarPose::from_parameter_vector(&[x[0] / n1, x[1] / n1, x[2] / n2, x[3] / n2]);
    Ok(cheirality_select(&[pose, pose.flipped()], points).expect("two candidates supplied"))
}

fn null_vector(points: &[Correspondence]) -> Option<[f64; 4]> {
    // at least 4 rows so that the thin SVD exposes the full right basis
    let rows = points.len().max(4);
    let mut a = DMatrix::<f64>::zeros(rows, 4);
    for (i, c) in points.iter().enumerate() {
        let r = c.design_row();
        for j in 0..4 {
            a[(i, j)] = r[j];
        }
    }
    let svd = a.svd(false, true);
    let v_t = svd.v_t?;
    let k = svd.singular_values.argmin().0;
    Some([v_t[(k, 0)], v_t[(k, 1)], v_t[(k, 2)], v_t[(k, 3)]])
}

/// Branch in which `pose` is better conditioned (larger fixed coordinate).
pub fn natural_branch(pose: &PlanarPose) -> Branch {
    let x = pose.parameter_vector();
    if x[3].abs() >= x[2].abs() {
        Branch::FixFourth
    } else {
        Branch::FixThird
    }
}
