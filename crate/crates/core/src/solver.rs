//! Preconditioned primal-dual splitting for the constrained denoising problem
//!
//! ```text
//! min  R(u)   s.t.  ||s||_1 <= alpha,  ||t||_1 <= beta,  Dv t = 0,
//!                   ||u + s + t - v||_2 <= epsilon,  mu_lower <= u <= mu_upper
//! ```
//!
//! where `R` is S3TTV or SSTV. The solver keeps three primal variables
//! `(u, s, t)` and three dual variables: the regularizer dual `y1` (one matrix
//! per block for S3TTV, a pair of difference cubes for SSTV), the flatness
//! dual `y2` and the fidelity dual `y3`.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cube::{adjoint_diff, forward_diff, second_order_diff, second_order_diff_adjoint, Axis, HSCube};
use crate::error::{Error, Result};
use crate::prox::{self, prox_conjugate};
use crate::regularizer::{self, BlockGeometry, Regularizer};

/// Radii of the sparse, stripe and fidelity constraints.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Radii {
    pub alpha: f64,
    pub beta: f64,
    pub epsilon: f64,
}

/// Everything that defines one denoising instance.
#[derive(Debug, Clone)]
pub struct DenoiseProblem {
    pub observed: HSCube,
    pub radii: Radii,
    pub mu_lower: f64,
    pub mu_upper: f64,
    pub geometry: BlockGeometry,
    pub regularizer: Regularizer,
}

impl DenoiseProblem {
    pub fn new(
        observed: HSCube,
        radii: Radii,
        range: (f64, f64),
        geometry: BlockGeometry,
        regularizer: Regularizer,
    ) -> Result<Self> {
        let (mu_lower, mu_upper) = range;
        if mu_lower.is_nan() || mu_upper.is_nan() || mu_lower >= mu_upper {
            return Err(Error::InvalidBounds {
                lower: mu_lower,
                upper: mu_upper,
            });
        }
        for (name, r) in [
            ("alpha", radii.alpha),
            ("beta", radii.beta),
            ("epsilon", radii.epsilon),
        ] {
            if !(r.is_finite() && r >= 0.0) {
                return Err(Error::InvalidParameter {
                    name,
                    reason: format!("radius must be finite and nonnegative, got {r}"),
                });
            }
        }
        if geometry.spatial_dims() != (observed.n1(), observed.n2()) {
            let shape = geometry.shape();
            return Err(Error::IncompatibleGeometry {
                block_h: shape.block_h,
                block_w: shape.block_w,
                n1: observed.n1(),
                n2: observed.n2(),
            });
        }
        Ok(Self {
            observed,
            radii,
            mu_lower,
            mu_upper,
            geometry,
            regularizer,
        })
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        self.observed.dims()
    }

    /// Constraint residuals of a candidate `(u, s, t)`.
    pub fn residuals(&self, u: &HSCube, s: &HSCube, t: &HSCube) -> Residuals {
        let box_violation = u
            .as_slice()
            .iter()
            .map(|&x| (self.mu_lower - x).max(x - self.mu_upper).max(0.0))
            .fold(0.0, f64::max);
        let fidelity = u.add(s).add(t).sub(&self.observed).norm2();
        Residuals {
            l1_s: s.norm1() - self.radii.alpha,
            l1_t: t.norm1() - self.radii.beta,
            flatness: forward_diff(t, Axis::Vertical).norm2(),
            fidelity: fidelity - self.radii.epsilon,
            r#box: box_violation,
        }
    }
}

/// Signed constraint residuals; a constraint holds when its entry is `<= 0`
/// (`flatness` and `box` are nonnegative by construction).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Residuals {
    pub l1_s: f64,
    pub l1_t: f64,
    pub flatness: f64,
    pub fidelity: f64,
    pub r#box: f64,
}

impl Residuals {
    /// Largest positive violation over the five constraints.
    pub fn max_violation(&self) -> f64 {
        [self.l1_s, self.l1_t, self.flatness, self.fidelity, self.r#box]
            .into_iter()
            .fold(0.0, f64::max)
    }
}

/// Primal and dual stepsizes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepsizeSet {
    pub tau_u: f64,
    pub tau_s: f64,
    pub tau_t: f64,
    pub sigma_blocks: f64,
    pub sigma_stripe: f64,
    pub sigma_fidelity: f64,
}

impl StepsizeSet {
    /// Stepsizes used by [`solve`]: the closed-form values for S3TTV and the
    /// row/column-sum values for SSTV.
    pub fn for_problem(problem: &DenoiseProblem) -> Self {
        match problem.regularizer {
            Regularizer::S3ttv => compute_stepsizes(&problem.geometry),
            Regularizer::Sstv => {
                preconditioned_stepsizes(&problem.geometry, problem.dims(), Regularizer::Sstv)
            }
        }
    }
}

/// Closed-form S3TTV stepsizes for `B` blocks:
/// `(1/(8B+1), 1, 1/3, 1/4, 1/2, 1/3)`.
pub fn compute_stepsizes(geom: &BlockGeometry) -> StepsizeSet {
    let b = geom.block_count() as f64;
    StepsizeSet {
        tau_u: 1.0 / (8.0 * b + 1.0),
        tau_s: 1.0,
        tau_t: 1.0 / 3.0,
        sigma_blocks: 1.0 / 4.0,
        sigma_stripe: 1.0 / 2.0,
        sigma_fidelity: 1.0 / 3.0,
    }
}

/// Stepsizes from reciprocal absolute row/column sums of the assembled
/// operators, taking the largest sum when they differ across elements.
///
/// For S3TTV the `u` column sum depends on how many blocks read each pixel,
/// so it reflects the actual block overlap instead of the `8B` bound.
pub fn preconditioned_stepsizes(
    geom: &BlockGeometry,
    dims: (usize, usize, usize),
    kind: Regularizer,
) -> StepsizeSet {
    let (n1, n2, n3) = dims;
    // Absolute column (= row) sum of a periodic forward difference on n points.
    let d = |n: usize| if n >= 2 { 2.0 } else { 0.0 };
    let (dv, dh, ds) = (d(n1), d(n2), d(n3));
    let recip = |x: f64| if x > 0.0 { 1.0 / x } else { 1.0 };

    let coverage: Vec<f64> = match kind {
        Regularizer::S3ttv => geom.coverage().into_iter().map(|c| c as f64).collect(),
        Regularizer::Sstv => vec![1.0; n1 * n2],
    };
    // Each voxel feeds Dv Ds outputs at its own pixel and the one above it,
    // and Dh Ds outputs at its own pixel and the one to its left.
    let mut u_col = 0.0_f64;
    for j in 0..n2 {
        for i in 0..n1 {
            let here = coverage[i + n1 * j];
            let up = coverage[(i + n1 - 1) % n1 + n1 * j];
            let left = coverage[i + n1 * ((j + n2 - 1) % n2)];
            let v = if n1 >= 2 { here + up } else { 0.0 };
            let h = if n2 >= 2 { here + left } else { 0.0 };
            u_col = u_col.max(0.5 * ds * (dv * v + dh * h));
        }
    }
    let row_reg = ds * dv.max(dh);
    StepsizeSet {
        tau_u: recip(u_col + 1.0),
        tau_s: 1.0,
        tau_t: recip(dv + 1.0),
        sigma_blocks: recip(row_reg),
        sigma_stripe: recip(dv),
        sigma_fidelity: 1.0 / 3.0,
    }
}

/// Dual variable attached to the regularizer.
#[derive(Debug, Clone, PartialEq)]
pub enum RegularizerDual {
    /// One `(block_h * block_w) x (2 n3)` matrix per block.
    Blocks(Vec<DMatrix<f64>>),
    /// Duals of `Dv Ds u` and `Dh Ds u`.
    Differences(HSCube, HSCube),
}

/// Primal and dual iterates of the solver.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverState {
    pub u: HSCube,
    pub s: HSCube,
    pub t: HSCube,
    pub y1: RegularizerDual,
    pub y2: HSCube,
    pub y3: HSCube,
    pub iteration: usize,
    pub last_relative_change: f64,
}

impl SolverState {
    /// `u = clamp(v)`, everything else zero.
    pub fn initial(problem: &DenoiseProblem) -> Result<Self> {
        let (n1, n2, n3) = problem.dims();
        let zeros = HSCube::zeros(n1, n2, n3);
        let y1 = match problem.regularizer {
            Regularizer::S3ttv => RegularizerDual::Blocks(vec![
                DMatrix::zeros(problem.geometry.block_pixels(), 2 * n3);
                problem.geometry.block_count()
            ]),
            Regularizer::Sstv => RegularizerDual::Differences(zeros.clone(), zeros.clone()),
        };
        Ok(Self {
            u: prox::project_box(&problem.observed, problem.mu_lower, problem.mu_upper)?,
            s: zeros.clone(),
            t: zeros.clone(),
            y1,
            y2: zeros.clone(),
            y3: zeros,
            iteration: 0,
            last_relative_change: f64::INFINITY,
        })
    }
}

/// `A1^T y1`, the regularizer operator's adjoint applied to its dual.
fn regularizer_adjoint(y1: &RegularizerDual, problem: &DenoiseProblem) -> HSCube {
    let (dv, dh) = match y1 {
        RegularizerDual::Blocks(blocks) => {
            let refs: Vec<&DMatrix<f64>> = blocks.iter().collect();
            regularizer::scatter_matrices(&refs, &problem.geometry, problem.dims())
        }
        RegularizerDual::Differences(a, b) => (a.clone(), b.clone()),
    };
    second_order_diff_adjoint(&dv, &dh)
}

fn relative_change(new: &HSCube, old: &HSCube) -> f64 {
    let diff = new.sub(old).norm2();
    let base = old.norm2();
    if base > 0.0 {
        diff / base
    } else {
        diff
    }
}

/// One sweep of primal updates, extrapolation and dual updates.
pub fn ppds_step(
    state: &SolverState,
    problem: &DenoiseProblem,
    steps: &StepsizeSet,
) -> Result<SolverState> {
    let iteration = state.iteration + 1;
    let wrap = |e: Error| Error::Iteration {
        iteration,
        source: Box::new(e),
    };

    // Primal updates.
    let grad_u = regularizer_adjoint(&state.y1, problem).add(&state.y3);
    let u = prox::project_box(
        &state.u.add_scaled(-steps.tau_u, &grad_u),
        problem.mu_lower,
        problem.mu_upper,
    )
    .map_err(wrap)?;
    let s = prox::project_l1_ball(&state.s.add_scaled(-steps.tau_s, &state.y3), problem.radii.alpha);
    let grad_t = adjoint_diff(&state.y2, Axis::Vertical).add(&state.y3);
    let t = prox::project_l1_ball(&state.t.add_scaled(-steps.tau_t, &grad_t), problem.radii.beta);

    // Extrapolation.
    let u_bar = u.scale(2.0).sub(&state.u);
    let s_bar = s.scale(2.0).sub(&state.s);
    let t_bar = t.scale(2.0).sub(&state.t);

    // Dual updates.
    let (dv, dh) = second_order_diff(&u_bar);
    let sigma1 = steps.sigma_blocks;
    let y1 = match &state.y1 {
        RegularizerDual::Blocks(prev) => {
            let tensors = regularizer::extract_matrices(&dv, &dh, &problem.geometry);
            let next: Vec<DMatrix<f64>> = prev
                .par_iter()
                .zip(tensors.par_iter())
                .enumerate()
                .map(|(b, (y, l))| {
                    let z = y + l * sigma1;
                    prox_conjugate(&z, sigma1, |m: &DMatrix<f64>, lambda| {
                        prox::prox_nuclear(m, lambda, b)
                    })
                })
                .collect::<Result<_>>()
                .map_err(wrap)?;
            RegularizerDual::Blocks(next)
        }
        RegularizerDual::Differences(a, b) => {
            let conj = |y: &HSCube, d: &HSCube| {
                prox_conjugate(&y.add_scaled(sigma1, d), sigma1, |z: &HSCube, lambda| {
                    Ok(prox::prox_l1_norm(z, lambda))
                })
            };
            RegularizerDual::Differences(conj(a, &dv).map_err(wrap)?, conj(b, &dh).map_err(wrap)?)
        }
    };
    // Conjugate of the zero-set indicator is zero, so its prox is the identity.
    let y2 = prox_conjugate(
        &state.y2.add_scaled(steps.sigma_stripe, &forward_diff(&t_bar, Axis::Vertical)),
        steps.sigma_stripe,
        |z: &HSCube, _| prox::BallSpec::ZeroSet.project(z),
    )
    .map_err(wrap)?;
    let sum_bar = u_bar.add(&s_bar).add(&t_bar);
    let y3 = prox_conjugate(
        &state.y3.add_scaled(steps.sigma_fidelity, &sum_bar),
        steps.sigma_fidelity,
        |z: &HSCube, _| prox::project_l2_ball(z, &problem.observed, problem.radii.epsilon),
    )
    .map_err(wrap)?;

    let last_relative_change = relative_change(&u, &state.u);
    Ok(SolverState {
        u,
        s,
        t,
        y1,
        y2,
        y3,
        iteration,
        last_relative_change,
    })
}

/// When to stop iterating.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StoppingRule {
    /// Stop once `||u_new - u_old||_2 / ||u_old||_2` falls below this.
    pub relative_change_threshold: f64,
    pub max_iterations: usize,
    /// Record the regularizer value every this many iterations (0 disables).
    pub objective_every: usize,
    /// If set, additionally require the raw iterate's largest constraint
    /// violation to be at most this before stopping.
    #[serde(default)]
    pub feasibility_tolerance: Option<f64>,
}

impl Default for StoppingRule {
    fn default() -> Self {
        Self {
            relative_change_threshold: 1e-5,
            max_iterations: 20_000,
            objective_every: 1,
            feasibility_tolerance: None,
        }
    }
}

impl StoppingRule {
    pub fn validate(&self) -> Result<()> {
        if self.relative_change_threshold.is_nan() || self.relative_change_threshold <= 0.0 {
            return Err(Error::InvalidParameter {
                name: "relative_change_threshold",
                reason: "must be positive".into(),
            });
        }
        if let Some(tol) = self.feasibility_tolerance {
            if tol.is_nan() || tol < 0.0 {
                return Err(Error::InvalidParameter {
                    name: "feasibility_tolerance",
                    reason: "must be nonnegative".into(),
                });
            }
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidParameter {
                name: "max_iterations",
                reason: "must be positive".into(),
            });
        }
        Ok(())
    }
}

/// Diagnostics of a finished run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub iterations: usize,
    pub relative_change: f64,
    pub converged: bool,
    pub regularizer: Regularizer,
    pub stepsizes: StepsizeSet,
    /// Row/column-sum stepsizes of the assembled operators, for comparison.
    pub preconditioned_stepsizes: StepsizeSet,
    pub objective_trace: Vec<f64>,
    /// Residuals of the returned `(u, s, t)`.
    pub residuals: Residuals,
    /// Residuals of the last iterate before feasibility restoration.
    pub raw_residuals: Residuals,
}

impl ConvergenceReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Recovered components and diagnostics.
#[derive(Debug, Clone)]
pub struct Solution {
    pub u: HSCube,
    pub s: HSCube,
    pub t: HSCube,
    pub report: ConvergenceReport,
}

/// Solver configuration beyond the problem itself.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    pub stop: StoppingRule,
    /// Overrides [`StepsizeSet::for_problem`].
    pub steps: Option<StepsizeSet>,
    /// Map the last iterate onto the constraint set before returning it,
    /// see [`restore_feasibility`].
    pub restore_feasibility: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            stop: StoppingRule::default(),
            steps: None,
            restore_feasibility: true,
        }
    }
}

/// Runs the solver from [`SolverState::initial`] with the stepsizes of
/// [`StepsizeSet::for_problem`] and restores feasibility at the end.
pub fn solve(problem: &DenoiseProblem, stop: &StoppingRule) -> Result<Solution> {
    solve_with(
        problem,
        &SolveOptions {
            stop: *stop,
            ..SolveOptions::default()
        },
    )
}

pub fn solve_with(problem: &DenoiseProblem, options: &SolveOptions) -> Result<Solution> {
    // Run the loop on a pool worker so each parallel section executes in
    // place instead of being handed over from an outside thread.
    rayon::scope(|_| solve_on_worker(problem, options))
}

fn solve_on_worker(problem: &DenoiseProblem, options: &SolveOptions) -> Result<Solution> {
    let stop = &options.stop;
    stop.validate()?;
    let steps = options
        .steps
        .unwrap_or_else(|| StepsizeSet::for_problem(problem));
    let mut state = SolverState::initial(problem)?;
    let mut trace = Vec::new();
    let mut converged = false;
    while state.iteration < stop.max_iterations {
        state = ppds_step(&state, problem, &steps)?;
        if stop.objective_every > 0 && state.iteration % stop.objective_every == 0 {
            trace.push(
                regularizer::regularizer_value(problem.regularizer, &state.u, &problem.geometry)
                    .map_err(|e| Error::Iteration {
                        iteration: state.iteration,
                        source: Box::new(e),
                    })?,
            );
        }
        // The first sweep starts from zero duals and never moves u, so the
        // criterion is only meaningful from the second sweep on.
        if state.iteration >= 2
            && state.last_relative_change < stop.relative_change_threshold
            && stop.feasibility_tolerance.is_none_or(|tol| {
                problem.residuals(&state.u, &state.s, &state.t).max_violation() <= tol
            })
        {
            converged = true;
            break;
        }
    }
    let raw_residuals = problem.residuals(&state.u, &state.s, &state.t);
    let (u, s, t) = if options.restore_feasibility {
        restore_feasibility(problem, &state.u, &state.s, &state.t)
    } else {
        (state.u, state.s, state.t)
    };
    let report = ConvergenceReport {
        iterations: state.iteration,
        relative_change: state.last_relative_change,
        converged,
        regularizer: problem.regularizer,
        stepsizes: steps,
        preconditioned_stepsizes: preconditioned_stepsizes(
            &problem.geometry,
            problem.dims(),
            problem.regularizer,
        ),
        objective_trace: trace,
        residuals: problem.residuals(&u, &s, &t),
        raw_residuals,
    };
    Ok(Solution { u, s, t, report })
}

/// Moves an approximate solution onto the constraint set.
///
/// The primal-dual iteration enforces `Dv t = 0` and the fidelity ball only
/// through their duals, so a stopped iterate violates them slightly. This
/// projects `t` onto the flat cubes of the `beta` ball, keeps `s`, and moves
/// `u` along the segment towards `clamp(v - s - t)` by the smallest step that
/// enters the fidelity ball. Box and l1 constraints stay satisfied. If even
/// the segment end lies outside the ball, `u` becomes that end point, which
/// is the closest point of the box.
pub fn restore_feasibility(
    problem: &DenoiseProblem,
    u: &HSCube,
    s: &HSCube,
    t: &HSCube,
) -> (HSCube, HSCube, HSCube) {
    let t = prox::project_flat_l1_ball(t, problem.radii.beta);
    let target = problem.observed.sub(s).sub(&t);
    let eps = problem.radii.epsilon;
    let offset = u.sub(&target);
    let dist_sq = offset.dot(&offset);
    if dist_sq <= eps * eps {
        return (u.clone(), s.clone(), t);
    }
    let anchor = prox::project_box(&target, problem.mu_lower, problem.mu_upper)
        .expect("problem bounds are validated");
    let dir = anchor.sub(u);
    // ||offset + lambda dir||^2 = eps^2, smallest root in [0, 1].
    let a = dir.dot(&dir);
    let b = 2.0 * offset.dot(&dir);
    let c = dist_sq - eps * eps;
    let disc = b * b - 4.0 * a * c;
    let lambda = if a > 0.0 && disc >= 0.0 {
        let root = (-b - disc.sqrt()) / (2.0 * a);
        root.clamp(0.0, 1.0)
    } else {
        1.0
    };
    let mut restored = u.add_scaled(lambda, &dir);
    if restored.sub(&target).norm2() > eps && lambda < 1.0 {
        // Rounding left us a hair outside; nudge further along the segment.
        let nudged = (lambda + 1e-12).min(1.0);
        restored = u.add_scaled(nudged, &dir);
    }
    // Convex combinations of box points stay in the box up to rounding.
    let restored = prox::project_box(&restored, problem.mu_lower, problem.mu_upper)
        .expect("problem bounds are validated");
    (restored, s.clone(), t)
}
