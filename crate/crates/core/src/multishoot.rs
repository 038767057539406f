//! Multiple-shooting refinement of equilibrium candidates.
//!
//! A single backward trace amplifies errors in the final condition by roughly
//! `e^{(σ+γ)T}`, which leaves Newton iterations on the four-dimensional
//! residual with a badly scaled, strongly nonlinear map. Cutting the horizon
//! into segments and treating the joint state at each interior node as an
//! unknown keeps every segment short. Continuity at the nodes plus the
//! initial-state match give a square system with the same roots as the
//! single-shooting residual.

use alloc::string::String;
use alloc::vec::Vec;
use core::ops::ControlFlow;

use crate::epidemic::initial_state;
use crate::integrate::{integrate, integrate_with, IntegratorConfig, Method};
use crate::linalg::solve_dense;
use crate::params::ModelParams;
use crate::schedule::Schedule;
use crate::shooter::{
    assemble, coupled_rhs, terminal_joint_state, Behavior, CandidateResult, Classification, FinalCondition,
    TraceOptions, TracedPath,
};
use crate::trajectory::{replay, Trajectory};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MultiShootConfig {
    pub segments: usize,
    pub max_iters: usize,
    /// Max-norm of the stacked residual at which Newton stops.
    pub tol: f64,
    /// Relative forward-difference step.
    pub fd_step: f64,
    /// Factor by which a Newton step that fails to reduce the residual is
    /// shortened. At 1 every full step is taken.
    pub damping: f64,
}

impl Default for MultiShootConfig {
    fn default() -> Self {
        Self { segments: 12, max_iters: 40, tol: 1e-11, fd_step: 1e-7, damping: 0.5 }
    }
}

/// Starting point for a multiple-shooting solve: a final condition and the
/// joint state at every interior node.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeSeed {
    pub final_condition: FinalCondition,
    pub nodes: Vec<[f64; 10]>,
}

/// Node times `0 = t_0 < … < t_M = T`. Under fixed-step RK4 the nodes sit on
/// the full-horizon grid so segments reproduce the single trace step for step.
pub fn node_times(p: &ModelParams, cfg: &IntegratorConfig, segments: usize) -> Vec<f64> {
    let t_end = p.vaccine_time;
    let m = segments.max(1);
    match cfg.method {
        Method::Rk4 => {
            let n = cfg.fixed_steps(t_end);
            let h = t_end / n as f64;
            let m = m.min(n);
            let mut ts: Vec<f64> = (0..m).map(|j| (j * n / m) as f64 * h).collect();
            ts.push(t_end);
            ts
        }
        Method::Rk45 => {
            let mut ts: Vec<f64> = (0..m).map(|j| t_end * j as f64 / m as f64).collect();
            ts.push(t_end);
            ts
        }
    }
}

fn joint_at(traj: &Trajectory, t: f64) -> [f64; 10] {
    let s = &traj.samples;
    let k = s.partition_point(|x| x.t < t).min(s.len() - 1);
    let pack = |i: usize| {
        let mut y = [0.0; 10];
        y[..5].copy_from_slice(&s[i].epi.to_array());
        y[5..].copy_from_slice(&s[i].welfare.to_array());
        y
    };
    if k == 0 || s[k].t == t {
        return pack(k);
    }
    let (a, b) = (pack(k - 1), pack(k));
    let w = (t - s[k - 1].t) / (s[k].t - s[k - 1].t);
    core::array::from_fn(|j| a[j] + w * (b[j] - a[j]))
}

impl NodeSeed {
    /// Reads node states off a trajectory covering `[0, T]`.
    pub fn from_trajectory(traj: &Trajectory, p: &ModelParams, cfg: &IntegratorConfig, segments: usize) -> Option<Self> {
        if traj.len() < 2 {
            return None;
        }
        let ts = node_times(p, cfg, segments);
        let nodes = ts[1..ts.len() - 1].iter().map(|t| joint_at(traj, *t)).collect();
        Some(Self { final_condition: FinalCondition::from_state(&traj.last().epi), nodes })
    }

    /// Seed from a fixed-behavior run: the forward epidemic under `schedule`
    /// together with the continuation losses it induces.
    pub fn from_schedule(p: &ModelParams, schedule: &Schedule, cfg: &IntegratorConfig, segments: usize) -> Option<Self> {
        let steps = cfg.fixed_steps(p.vaccine_time).max(segments);
        let r = replay(p, schedule, steps).ok()?;
        Self::from_trajectory(&r.trajectory, p, cfg, segments)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultiShootOutcome {
    pub final_condition: FinalCondition,
    /// Joint state at the interior nodes.
    pub nodes: Vec<[f64; 10]>,
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn segment_config(p: &ModelParams, cfg: &IntegratorConfig) -> IntegratorConfig {
    match cfg.method {
        Method::Rk4 => IntegratorConfig { step_size: Some(p.vaccine_time / cfg.fixed_steps(p.vaccine_time) as f64), ..*cfg },
        Method::Rk45 => *cfg,
    }
}

struct System<'a> {
    p: &'a ModelParams,
    seg_cfg: IntegratorConfig,
    ts: Vec<f64>,
    /// Row weight for welfare defects, putting them on the scale of the
    /// epidemic masses.
    welfare_scale: f64,
    /// Harm scaling seen by the agents; 1 is the true game.
    lambda: f64,
}

impl<'a> System<'a> {
    fn new(p: &'a ModelParams, cfg: &IntegratorConfig, segments: usize, lambda: f64) -> Self {
        let welfare_scale = p.gamma / libm::fmax(p.full_benefit(), 1e-12);
        Self { p, seg_cfg: segment_config(p, cfg), ts: node_times(p, cfg, segments), welfare_scale, lambda }
    }

    fn segments(&self) -> usize {
        self.ts.len() - 1
    }

    fn dim(&self) -> usize {
        4 + 10 * (self.segments() - 1)
    }

    fn behavior(&self) -> Behavior<'static> {
        if self.lambda == 1.0 {
            Behavior::Equilibrium
        } else {
            Behavior::ScaledHarm(self.lambda)
        }
    }

    /// Natural size of unknown `c`, used to make continuation steps isotropic.
    fn unknown_scale(&self, c: usize) -> f64 {
        if c >= 4 && (c - 4) % 10 >= 5 {
            1.0 / self.welfare_scale
        } else {
            1.0
        }
    }

    /// Integrates segment `j` (from `t_j` down to `t_{j-1}`).
    fn propagate(&self, j: usize, y: [f64; 10]) -> Option<[f64; 10]> {
        let behavior = self.behavior();
        let sol = integrate(|t, y: &[f64; 10]| coupled_rhs(t, y, self.p, behavior), y, self.ts[j], self.ts[j - 1], &self.seg_cfg)
            .ok()?;
        let (_, end) = sol.last();
        end.iter().all(|v| v.is_finite() && libm::fabs(*v) < 1e6).then_some(end)
    }

    fn start(&self, x: &[f64], j: usize) -> [f64; 10] {
        let m = self.segments();
        if j == m {
            terminal_joint_state(&FinalCondition::from_array([x[0], x[1], x[2], x[3]]), self.p)
        } else {
            let o = 4 + 10 * (j - 1);
            core::array::from_fn(|k| x[o + k])
        }
    }

    /// Defect of segment `j`: its backward end minus the next node, or for
    /// the first segment the mismatch with the prescribed initial state.
    fn defect(&self, x: &[f64], j: usize, end: &[f64; 10], out: &mut [f64]) {
        if j == 1 {
            let e0 = initial_state(self.p);
            out[0] = end[0] - e0.s;
            out[1] = end[2] - e0.i;
            out[2] = end[3] - e0.r_c;
            out[3] = end[4] - e0.r_i;
        } else {
            let o = 4 + 10 * (j - 2);
            for k in 0..10 {
                let w = if k < 5 { 1.0 } else { self.welfare_scale };
                out[k] = w * (end[k] - x[o + k]);
            }
        }
    }

    /// Row offset and length of the equations owned by segment `j`.
    fn rows(&self, j: usize) -> (usize, usize) {
        if j == 1 {
            (0, 4)
        } else {
            (4 + 10 * (j - 2), 10)
        }
    }

    fn residual(&self, x: &[f64]) -> Option<Vec<f64>> {
        let mut f = alloc::vec![0.0; self.dim()];
        for j in 1..=self.segments() {
            let end = self.propagate(j, self.start(x, j))?;
            let (o, len) = self.rows(j);
            self.defect(x, j, &end, &mut f[o..o + len]);
        }
        Some(f)
    }

    fn jacobian(&self, x: &[f64], f: &[f64], step: f64) -> Option<Vec<f64>> {
        let n = self.dim();
        let mut jac = alloc::vec![0.0; n * n];
        let mut scratch = [0.0; 10];
        for j in 1..=self.segments() {
            // Unknowns feeding segment j's start.
            let cols = if j == self.segments() { 0..4 } else { let o = 4 + 10 * (j - 1); o..o + 10 };
            let (ro, rlen) = self.rows(j);
            for c in cols {
                let h = step * libm::fmax(libm::fabs(x[c]), 1e-2);
                let mut xp = x.to_vec();
                xp[c] += h;
                let end = self.propagate(j, self.start(&xp, j))?;
                self.defect(&xp, j, &end, &mut scratch[..rlen]);
                for r in 0..rlen {
                    jac[(ro + r) * n + c] = (scratch[r] - f[ro + r]) / h;
                }
            }
            // Segment j's defect subtracts node j-1 directly.
            if j > 1 {
                let o = 4 + 10 * (j - 2);
                for k in 0..10 {
                    jac[(ro + k) * n + o + k] = if k < 5 { -1.0 } else { -self.welfare_scale };
                }
            }
        }
        Some(jac)
    }

    /// Derivative of the residual with respect to the harm scaling.
    fn lambda_column(&self, x: &[f64], f: &[f64], step: f64) -> Option<Vec<f64>> {
        let h = step * libm::fmax(libm::fabs(self.lambda), 1e-1);
        let shifted = System { lambda: self.lambda + h, seg_cfg: self.seg_cfg, ts: self.ts.clone(), ..*self };
        let fp = shifted.residual(x)?;
        Some(fp.iter().zip(f).map(|(a, b)| (a - b) / h).collect())
    }
}

fn max_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| libm::fabs(*x)).fold(0.0, f64::max)
}

fn sq_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

fn pack(seed: &NodeSeed) -> Vec<f64> {
    let mut x: Vec<f64> = seed.final_condition.to_array().to_vec();
    for node in &seed.nodes {
        x.extend_from_slice(node);
    }
    x
}

fn unpack(x: &[f64]) -> NodeSeed {
    NodeSeed {
        final_condition: FinalCondition::from_array([x[0], x[1], x[2], x[3]]),
        nodes: x[4..].chunks_exact(10).map(|c| core::array::from_fn(|k| c[k])).collect(),
    }
}

/// Damped Newton at the system's fixed harm scaling. Returns the final
/// iterate with its residual, plus the iteration count and a convergence flag.
fn newton(sys: &System<'_>, mut x: Vec<f64>, ms: &MultiShootConfig) -> Option<(Vec<f64>, Vec<f64>, usize, bool)> {
    let mut f = sys.residual(&x)?;
    let mut iterations = 0;
    while iterations < ms.max_iters && max_norm(&f) >= ms.tol {
        iterations += 1;
        let jac = sys.jacobian(&x, &f, ms.fd_step)?;
        let dx = solve_dense(jac, f.iter().map(|v| -v).collect())?;
        let base = sq_norm(&f);
        let mut lam = 1.0;
        loop {
            let trial: Vec<f64> = x.iter().zip(&dx).map(|(a, b)| a + lam * b).collect();
            if let Some(ft) = sys.residual(&trial) {
                if ms.damping >= 1.0 || sq_norm(&ft) < base * (1.0 - 1e-4 * lam) {
                    x = trial;
                    f = ft;
                    break;
                }
            }
            lam *= ms.damping;
            if ms.damping >= 1.0 || lam < 1e-4 {
                return Some((x, f, iterations, false));
            }
        }
    }
    let converged = max_norm(&f) < ms.tol;
    Some((x, f, iterations, converged))
}

/// Damped Newton on the stacked node system starting from `seed`.
pub fn solve(p: &ModelParams, cfg: &IntegratorConfig, seed: &NodeSeed, ms: &MultiShootConfig) -> Option<MultiShootOutcome> {
    let sys = System::new(p, cfg, ms.segments, 1.0);
    if seed.nodes.len() + 2 != sys.ts.len() {
        return None;
    }
    let (x, f, iterations, converged) = newton(&sys, pack(seed), ms)?;
    let s = unpack(&x);
    Some(MultiShootOutcome { final_condition: s.final_condition, nodes: s.nodes, residual: max_norm(&f), iterations, converged })
}

/// Settings for following the equilibrium branch as the perceived harm is
/// scaled from zero up to its true value.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct ContinuationConfig {
    pub max_steps: usize,
    /// Initial arclength step, in units where epidemic masses and scaled
    /// losses are both of order one.
    pub initial_step: f64,
    pub min_step: f64,
    pub max_step: f64,
    /// The branch is followed until the harm scaling exceeds this.
    pub lambda_max: f64,
    pub corrector_iters: usize,
    /// Max-norm of the node residual accepted by the corrector.
    pub tol: f64,
}

impl Default for ContinuationConfig {
    fn default() -> Self {
        Self { max_steps: 400, initial_step: 0.05, min_step: 1e-6, max_step: 0.5, lambda_max: 1.25, corrector_iters: 8, tol: 1e-7 }
    }
}

/// One accepted point on a harm continuation branch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BranchPoint {
    pub lambda: f64,
    pub final_condition: FinalCondition,
}

/// What a harm continuation found.
#[derive(Debug, Clone, PartialEq)]
pub struct HarmBranch {
    /// Accepted branch points, in order.
    pub points: Vec<BranchPoint>,
    /// Interpolated branch states wherever the scaling crossed 1.
    pub crossings: Vec<NodeSeed>,
    /// Number of turning points in the scaling along the branch.
    pub folds: usize,
    /// True when the branch was followed past `lambda_max`.
    pub completed: bool,
}

/// Solves `[J | j_λ ; tᵀ] z = rhs` for the bordered continuation system. The
/// Jacobian is taken in scaled unknowns.
fn bordered_solve(jac: &[f64], jl: &[f64], scales: &[f64], t: &[f64], rhs: Vec<f64>) -> Option<Vec<f64>> {
    let n = jl.len();
    let m = n + 1;
    let mut a = alloc::vec![0.0; m * m];
    for r in 0..n {
        for c in 0..n {
            a[r * m + c] = jac[r * n + c] * scales[c];
        }
        a[r * m + n] = jl[r];
    }
    a[n * m..].copy_from_slice(t);
    solve_dense(a, rhs)
}

fn normalized(mut v: Vec<f64>) -> Vec<f64> {
    let norm = libm::sqrt(sq_norm(&v));
    v.iter_mut().for_each(|x| *x /= norm);
    v
}

/// Follows the equilibrium branch of the harm-scaled game by pseudo-arclength
/// continuation, starting from the uncontrolled epidemic at zero scaling,
/// where the equilibrium is unique. Every crossing of scaling 1 is a seed for
/// an equilibrium of the true game; turning points mean several coexist.
pub fn continue_in_harm(
    p: &ModelParams,
    cfg: &IntegratorConfig,
    segments: usize,
    cc: &ContinuationConfig,
    ms: &MultiShootConfig,
) -> Option<HarmBranch> {
    let seed = NodeSeed::from_schedule(p, &Schedule::Constant(0.0), cfg, segments)?;
    let mut sys = System::new(p, cfg, segments, 0.0);
    let (x0, f0, _, ok) = newton(&sys, pack(&seed), &MultiShootConfig { tol: cc.tol, ..*ms })?;
    if !ok {
        return None;
    }
    let n = sys.dim();
    let scales: Vec<f64> = (0..n).map(|c| sys.unknown_scale(c)).collect();
    // z holds scaled unknowns followed by the scaling.
    let mut z: Vec<f64> = x0.iter().zip(&scales).map(|(x, s)| x / s).collect();
    z.push(0.0);
    let unscale = |z: &[f64]| -> Vec<f64> { z[..n].iter().zip(&scales).map(|(u, s)| u * s).collect() };

    // Jacobian blocks at the last accepted branch point.
    let mut jac = sys.jacobian(&x0, &f0, ms.fd_step)?;
    let mut jl = sys.lambda_column(&x0, &f0, ms.fd_step)?;
    let mut unit = alloc::vec![0.0; n + 1];
    unit[n] = 1.0;
    let mut tangent = normalized(bordered_solve(&jac, &jl, &scales, &unit, unit.clone())?);

    let point = |z: &[f64]| BranchPoint { lambda: z[n], final_condition: FinalCondition::from_array([z[0], z[1], z[2], z[3]]) };
    let mut branch = HarmBranch { points: alloc::vec![point(&z)], crossings: Vec::new(), folds: 0, completed: false };
    let mut ds = cc.initial_step;
    for _ in 0..cc.max_steps {
        let predicted: Vec<f64> = z.iter().zip(&tangent).map(|(a, b)| a + ds * b).collect();
        let mut w = predicted.clone();
        let (mut cj, mut cl) = (jac.clone(), jl.clone());
        let mut accepted = None;
        for iter in 1..=cc.corrector_iters {
            sys.lambda = w[n];
            let Some(f) = sys.residual(&unscale(&w)) else { break };
            let arc: f64 = tangent.iter().zip(w.iter().zip(&predicted)).map(|(t, (a, b))| t * (a - b)).sum();
            if max_norm(&f) < cc.tol && libm::fabs(arc) < cc.tol {
                accepted = Some((f, iter));
                break;
            }
            let mut g: Vec<f64> = f.iter().map(|v| -v).collect();
            g.push(-arc);
            // The first correction reuses the Jacobian from the last branch
            // point. Chord iterations stall where distancing switches regime,
            // so later ones refresh it.
            if iter > 1 {
                let x = unscale(&w);
                let (Some(j), Some(l)) = (sys.jacobian(&x, &f, ms.fd_step), sys.lambda_column(&x, &f, ms.fd_step)) else { break };
                cj = j;
                cl = l;
            }
            let Some(dz) = bordered_solve(&cj, &cl, &scales, &tangent, g) else { break };
            w.iter_mut().zip(&dz).for_each(|(a, b)| *a += b);
        }
        let Some((f, iters)) = accepted else {
            ds *= 0.5;
            if ds < cc.min_step {
                return Some(branch);
            }
            continue;
        };
        let x = unscale(&w);
        jac = sys.jacobian(&x, &f, ms.fd_step)?;
        jl = sys.lambda_column(&x, &f, ms.fd_step)?;
        let next = normalized(bordered_solve(&jac, &jl, &scales, &tangent, unit.clone())?);
        if next[n] * tangent[n] < 0.0 {
            branch.folds += 1;
        }
        let (l0, l1) = (z[n], w[n]);
        if (l0 - 1.0) * (l1 - 1.0) <= 0.0 && l0 != l1 {
            let s = (1.0 - l0) / (l1 - l0);
            let mid: Vec<f64> = z.iter().zip(&w).map(|(a, b)| a + s * (b - a)).collect();
            branch.crossings.push(unpack(&unscale(&mid)));
        }
        branch.points.push(point(&w));
        z = w;
        tangent = next;
        if z[n] > cc.lambda_max || z[n] < 0.0 {
            branch.completed = z[n] > cc.lambda_max;
            return Some(branch);
        }
        ds = if iters <= 4 { libm::fmin(ds * 1.5, cc.max_step) } else if iters >= 7 { ds * 0.6 } else { ds };
    }
    Some(branch)
}

/// Traces the candidate backward one segment at a time, restarting each
/// segment from its node. The result is classified like a single trace, and
/// additionally counts as an equilibrium only if every continuity gap at the
/// nodes is below the match tolerance.
pub fn trace_segmented(
    fc: &FinalCondition,
    nodes: &[[f64; 10]],
    p: &ModelParams,
    cfg: &IntegratorConfig,
    opts: &TraceOptions,
) -> CandidateResult {
    let ts = node_times(p, cfg, nodes.len() + 1);
    let invalid = |diagnostic: String| CandidateResult {
        final_condition: *fc,
        classification: Classification::InvalidBoundary,
        trajectory: Trajectory::default(),
        initial_residual: [f64::INFINITY; 5],
        boundary_time: Some(p.vaccine_time),
        diagnostic: Some(diagnostic),
    };
    if let Err(e) = fc.validate() {
        return invalid(alloc::format!("{e}"));
    }
    if nodes.len() + 2 != ts.len() {
        return invalid(alloc::string::String::from("node count does not match the integration grid"));
    }
    let seg_cfg = segment_config(p, cfg);
    let m = ts.len() - 1;
    let mut t_all: Vec<f64> = Vec::new();
    let mut y_all: Vec<[f64; 10]> = Vec::new();
    let mut boundary_time = None;
    let mut defect: f64 = 0.0;
    for j in (1..=m).rev() {
        let start = if j == m { terminal_joint_state(fc, p) } else { nodes[j - 1] };
        if let Some(prev) = y_all.last() {
            defect = start.iter().zip(prev).map(|(a, b)| libm::fabs(a - b)).fold(defect, f64::max);
            t_all.pop();
            y_all.pop();
        }
        let observe = |t: f64, y: &[f64; 10]| {
            if t > 0.0 && y[..5].iter().any(|v| *v < -opts.boundary_slack) {
                boundary_time = Some(t);
                return ControlFlow::Break(());
            }
            ControlFlow::Continue(())
        };
        let rhs = |t: f64, y: &[f64; 10]| coupled_rhs(t, y, p, Behavior::Equilibrium);
        match integrate_with(rhs, start, ts[j], ts[j - 1], &seg_cfg, observe) {
            Ok(sol) => {
                t_all.extend_from_slice(&sol.t);
                y_all.extend_from_slice(&sol.y);
            }
            Err(e) => return invalid(alloc::format!("{e}")),
        }
        if boundary_time.is_some() {
            break;
        }
    }
    let diagnostic = Some(alloc::format!("segmented trace over {m} segments, max node gap {defect:.3e}"));
    let path = TracedPath { t: &t_all, y: &y_all, boundary_time, defect };
    assemble(fc, p, Behavior::Equilibrium, opts, path, diagnostic)
}
