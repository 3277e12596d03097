//! Monte Carlo estimators for hitting probabilities, exit overshoot, escape
//! to infinity, and the nested-ball escape recursion.
//!
//! Estimators are deterministic for a given `(seed, config)`: paths draw
//! from counter-keyed streams and reductions run in path order. Hitting
//! probabilities of the form `P(T_B < ∞)` are never estimated by a bare
//! finite horizon; paths stop at an escape sphere and an extrapolation
//! ladder `R, 2R, 4R` supplies the limit.

pub mod engine;
pub mod increments;

use std::io::Write as IoWrite;

use serde::Serialize;

use crate::error::Error;
use crate::exponents::CharacteristicExponent;
use crate::geometry::{norm, Ball, BallFamily};
use crate::green::GreenModel;
use crate::Result;

use engine::{
    run_paths, stepper_calibration, walk_exact, walk_stepper, Arena, ExitLawHandle, Obstacles,
    Outcome, StepPolicy, StepperConfig,
};

pub use increments::{sample_one_sided_stable, sample_stable_increment};

/// How paths advance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum StepRule {
    /// Ball-exit jumps with the exact exit law (stable kinds only).
    ExactIncrement,
    /// Euler increments at a fixed `Δt`.
    FixedStep(f64),
    /// Euler increments with the median step targeting `frac` times the
    /// distance to the nearest boundary.
    AdaptiveStep { frac: f64 },
}

/// Monte Carlo run configuration.
#[derive(Debug, Clone, Serialize)]
pub struct SimConfig {
    pub paths: usize,
    pub step_rule: StepRule,
    /// Escape sphere radius; must enclose every obstacle in scope.
    pub r_esc: f64,
    pub t_max: f64,
    pub seed: u64,
    pub antithetic: bool,
}

impl SimConfig {
    pub fn exact(paths: usize, r_esc: f64, seed: u64) -> Self {
        SimConfig {
            paths,
            step_rule: StepRule::ExactIncrement,
            r_esc,
            t_max: f64::INFINITY,
            seed,
            antithetic: false,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.paths < 100 {
            return Err(Error::Config(format!(
                "paths = {} below the minimum of 100",
                self.paths
            )));
        }
        if self.r_esc <= 0.0 {
            return Err(Error::config("escape radius must be positive"));
        }
        Ok(())
    }
}

/// Binomial estimate with a 95% normal-approximation interval.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct HittingEstimate {
    pub p_hat: f64,
    pub ci_half_width: f64,
    pub n_hit: u64,
    pub n_escape: u64,
    pub n_censored: u64,
}

impl HittingEstimate {
    fn from_counts(n_hit: u64, n_escape: u64, n_censored: u64) -> Self {
        let n = (n_hit + n_escape + n_censored) as f64;
        let p = n_hit as f64 / n;
        HittingEstimate {
            p_hat: p,
            ci_half_width: 1.96 * (p * (1.0 - p) / n).sqrt(),
            n_hit,
            n_escape,
            n_censored,
        }
    }

    pub fn paths(&self) -> u64 {
        self.n_hit + self.n_escape + self.n_censored
    }

    /// One standard error of the estimate.
    pub fn sigma(&self) -> f64 {
        self.ci_half_width / 1.96
    }
}

const CENSOR_LIMIT: f64 = 0.20;

fn censor_check(est: &HittingEstimate) -> Result<()> {
    let frac = est.n_censored as f64 / est.paths() as f64;
    if frac > CENSOR_LIMIT {
        return Err(Error::Horizon {
            censored: frac,
            limit: CENSOR_LIMIT,
        });
    }
    Ok(())
}

/// Run one hit-vs-escape experiment and count outcomes; `record` receives
/// each path's terminal state.
fn run_experiment(
    exp: &CharacteristicExponent,
    arena: &Arena,
    start: &[f64],
    cfg: &SimConfig,
    record: Option<&(dyn Fn(&engine::PathResult) + Sync)>,
) -> Result<HittingEstimate> {
    cfg.validate()?;
    let results: Vec<engine::PathResult> = match cfg.step_rule {
        StepRule::ExactIncrement => {
            let exit = ExitLawHandle::for_exponent(exp)?;
            run_paths(cfg.paths, cfg.seed, cfg.antithetic, |rng, flip| {
                walk_exact(arena, &exit, start, rng, flip)
            })
        }
        StepRule::FixedStep(dt) => {
            let cal = stepper_calibration(exp)?;
            let scfg = StepperConfig {
                policy: StepPolicy::Fixed(dt),
                t_max: cfg.t_max,
                max_steps: 5_000_000,
                bridge: true,
            };
            run_paths(cfg.paths, cfg.seed, cfg.antithetic, |rng, flip| {
                walk_stepper(arena, exp, &scfg, cal, start, rng, flip)
            })
        }
        StepRule::AdaptiveStep { frac } => {
            let cal = stepper_calibration(exp)?;
            let scfg = StepperConfig {
                policy: StepPolicy::Adaptive { frac },
                t_max: cfg.t_max,
                max_steps: 5_000_000,
                bridge: true,
            };
            run_paths(cfg.paths, cfg.seed, cfg.antithetic, |rng, flip| {
                walk_stepper(arena, exp, &scfg, cal, start, rng, flip)
            })
        }
    };
    let mut counts = [0u64; 3];
    for r in &results {
        if let Some(f) = record {
            f(r);
        }
        match r.outcome {
            Outcome::Hit => counts[0] += 1,
            Outcome::Escape => counts[1] += 1,
            Outcome::Censored => counts[2] += 1,
        }
    }
    Ok(HittingEstimate::from_counts(counts[0], counts[1], counts[2]))
}

/// One rung of the escape-radius extrapolation ladder.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct LadderPoint {
    pub r_esc: f64,
    pub estimate: HittingEstimate,
}

/// Single-ball hitting report.
#[derive(Debug, Clone, Serialize)]
pub struct SingleBallReport {
    /// Annulus-stopped estimate at the configured escape radius.
    pub base: HittingEstimate,
    /// Estimates at `R, 2R, 4R`.
    pub ladder: Vec<LadderPoint>,
    /// Aitken-extrapolated limit, estimating `P(T_B < ∞)`.
    pub p_infinity: f64,
    /// Richardson Δt-halving bias gauge (stepper modes only).
    pub bias: Option<BiasReport>,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct BiasReport {
    pub p_coarse: f64,
    pub p_fine: f64,
    pub bias_estimate: f64,
}

fn aitken(p: &[f64]) -> f64 {
    // p_k = p_inf − c q^k: solve from the last three ladder points.
    if p.len() < 3 {
        return *p.last().unwrap();
    }
    let (a, b, c) = (p[p.len() - 3], p[p.len() - 2], p[p.len() - 1]);
    let d1 = b - a;
    let d2 = c - b;
    if d2.abs() < 1e-12 || (d1 - d2).abs() < 1e-12 {
        return c;
    }
    let q = d2 / d1;
    if !(0.0..1.0).contains(&q.abs()) {
        return c;
    }
    c + d2 * q / (1.0 - q)
}

/// Estimate the probability of hitting `ball` before leaving the escape
/// sphere, with an `R, 2R, 4R` ladder whose extrapolation estimates
/// `P(T_B < ∞)`.
pub fn estimate_single_ball_hit(
    exp: &CharacteristicExponent,
    x_start: &[f64],
    ball: &Ball,
    cfg: &SimConfig,
) -> Result<SingleBallReport> {
    cfg.validate()?;
    if ball.contains(x_start) {
        let est = HittingEstimate {
            p_hat: 1.0,
            ci_half_width: 0.0,
            n_hit: cfg.paths as u64,
            n_escape: 0,
            n_censored: 0,
        };
        return Ok(SingleBallReport {
            base: est,
            ladder: vec![],
            p_infinity: 1.0,
            bias: None,
        });
    }
    let mut ladder = Vec::new();
    for mult in [1.0, 2.0, 4.0] {
        let r = cfg.r_esc * mult;
        let arena = Arena::new(Obstacles::from_balls(vec![ball.clone()]), r)?;
        let est = run_experiment(exp, &arena, x_start, &SimConfig { r_esc: r, ..cfg.clone() }, None)?;
        censor_check(&est)?;
        ladder.push(LadderPoint { r_esc: r, estimate: est });
    }
    let ps: Vec<f64> = ladder.iter().map(|l| l.estimate.p_hat).collect();
    let p_infinity = aitken(&ps).clamp(0.0, 1.0);

    let bias = match cfg.step_rule {
        StepRule::ExactIncrement => None,
        StepRule::FixedStep(dt) => {
            let arena = Arena::new(Obstacles::from_balls(vec![ball.clone()]), cfg.r_esc)?;
            let fine = run_experiment(
                exp,
                &arena,
                x_start,
                &SimConfig {
                    step_rule: StepRule::FixedStep(dt / 2.0),
                    ..cfg.clone()
                },
                None,
            )?;
            Some(BiasReport {
                p_coarse: ladder[0].estimate.p_hat,
                p_fine: fine.p_hat,
                bias_estimate: (ladder[0].estimate.p_hat - fine.p_hat).abs(),
            })
        }
        StepRule::AdaptiveStep { frac } => {
            let arena = Arena::new(Obstacles::from_balls(vec![ball.clone()]), cfg.r_esc)?;
            let fine = run_experiment(
                exp,
                &arena,
                x_start,
                &SimConfig {
                    step_rule: StepRule::AdaptiveStep { frac: frac / 2.0 },
                    ..cfg.clone()
                },
                None,
            )?;
            Some(BiasReport {
                p_coarse: ladder[0].estimate.p_hat,
                p_fine: fine.p_hat,
                bias_estimate: (ladder[0].estimate.p_hat - fine.p_hat).abs(),
            })
        }
    };

    Ok(SingleBallReport {
        base: ladder[0].estimate,
        ladder,
        p_infinity,
        bias,
    })
}

/// Exit-overshoot report for `B(0, r)`.
#[derive(Debug, Clone, Serialize)]
pub struct OvershootReport {
    /// `(s, worst-start overshoot estimate)` per threshold.
    pub per_threshold: Vec<(f64, HittingEstimate)>,
    /// Slope of `log p` against `log(r/s)`; the scaling theory pins this to
    /// the lower-scaling exponent.
    pub fitted_exponent: f64,
    /// Fraction of paths that left `B(0, s_max)` on every start (flags the
    /// degenerate all-overshoot regime).
    pub degenerate: bool,
}

/// Estimate `sup_x P_x(X_{τ_{B(0,r)}} ∉ B(0, s))` over a start grid inside
/// the ball, for each `s` in `thresholds` (each `≥ 2r`).
pub fn estimate_overshoot(
    exp: &CharacteristicExponent,
    r: f64,
    thresholds: &[f64],
    cfg: &SimConfig,
) -> Result<OvershootReport> {
    cfg.validate()?;
    if r <= 0.0 {
        return Err(Error::domain("ball radius must be positive"));
    }
    for &s in thresholds {
        if s < 2.0 * r {
            return Err(Error::Domain(format!("threshold {s} below 2r = {}", 2.0 * r)));
        }
    }
    let d = exp.dimension();
    let starts: Vec<Vec<f64>> = [0.0, 0.25, 0.5, 0.75, 0.95]
        .iter()
        .map(|&f| {
            let mut p = vec![0.0; d];
            p[0] = f * r;
            p
        })
        .collect();

    // Exit positions from B(0, r): run the exact walker with the ball
    // boundary as the escape sphere (no obstacles), or the stepper until the
    // state leaves the ball.
    let mut per_start: Vec<Vec<f64>> = Vec::new(); // exit norms per start
    for start in &starts {
        let exits: Vec<f64> = match cfg.step_rule {
            StepRule::ExactIncrement => {
                let exit = ExitLawHandle::for_exponent(exp)?;
                let arena = Arena::new(Obstacles::from_balls(vec![]), r)?;
                run_paths(cfg.paths, cfg.seed, cfg.antithetic, |rng, flip| {
                    walk_exact(&arena, &exit, start, rng, flip).terminal
                })
                .iter()
                .map(|t| norm(t))
                .collect()
            }
            _ => {
                let cal = stepper_calibration(exp)?;
                let scfg = StepperConfig {
                    policy: match cfg.step_rule {
                        StepRule::FixedStep(dt) => StepPolicy::Fixed(dt),
                        _ => StepPolicy::Adaptive { frac: 0.2 },
                    },
                    t_max: cfg.t_max,
                    max_steps: 5_000_000,
                    bridge: false,
                };
                let arena = Arena::new(Obstacles::from_balls(vec![]), r)?;
                run_paths(cfg.paths, cfg.seed, cfg.antithetic, |rng, flip| {
                    walk_stepper(&arena, exp, &scfg, cal, start, rng, flip).terminal
                })
                .iter()
                .map(|t| norm(t))
                .collect()
            }
        };
        per_start.push(exits);
    }

    let mut per_threshold = Vec::new();
    let mut all_over = true;
    for &s in thresholds {
        let mut worst: Option<HittingEstimate> = None;
        for exits in &per_start {
            let n_over = exits.iter().filter(|&&e| e > s).count() as u64;
            let est = HittingEstimate::from_counts(n_over, exits.len() as u64 - n_over, 0);
            if worst.map_or(true, |w| est.p_hat > w.p_hat) {
                worst = Some(est);
            }
        }
        let w = worst.unwrap();
        if w.p_hat < 1.0 {
            all_over = false;
        }
        per_threshold.push((s, w));
    }

    let pts: Vec<(f64, f64)> = per_threshold
        .iter()
        .filter(|(_, e)| e.p_hat > 0.0)
        .map(|(s, e)| ((r / s).ln(), e.p_hat.ln()))
        .collect();
    let fitted = if pts.len() >= 2 {
        let n = pts.len() as f64;
        let sx: f64 = pts.iter().map(|p| p.0).sum();
        let sy: f64 = pts.iter().map(|p| p.1).sum();
        let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
        let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
        (n * sxy - sx * sy) / (n * sxx - sx * sx)
    } else {
        f64::NAN
    };

    Ok(OvershootReport {
        per_threshold,
        fitted_exponent: fitted,
        degenerate: all_over,
    })
}

/// Escape probability: reach `|x| = R_esc` from the origin before hitting
/// any ball of the truncated family.
pub fn estimate_escape(
    family: &BallFamily,
    truncation: f64,
    exp: &CharacteristicExponent,
    cfg: &SimConfig,
) -> Result<HittingEstimate> {
    cfg.validate()?;
    if truncation >= cfg.r_esc / 2.0 {
        return Err(Error::Config(format!(
            "truncation {truncation} must stay below half the escape radius {}",
            cfg.r_esc
        )));
    }
    let obstacles = obstacles_for(family, truncation);
    let arena = Arena::new(obstacles, cfg.r_esc)?;
    let start = vec![0.0; exp.dimension()];
    let est = run_experiment(exp, &arena, &start, cfg, None)?;
    censor_check(&est)?;
    // Escape probability = fraction of paths that reached the sphere.
    Ok(HittingEstimate::from_counts(
        est.n_escape,
        est.n_hit,
        est.n_censored,
    ))
}

/// Pick the cheap lattice lookup when the family is a lattice.
fn obstacles_for(family: &BallFamily, truncation: f64) -> Obstacles {
    match family.source() {
        crate::geometry::FamilySource::Lattice {
            spacing,
            min_norm,
            law,
        } => Obstacles::Lattice {
            spacing: *spacing,
            min_norm: *min_norm,
            max_norm: truncation,
            law: *law,
        },
        _ => Obstacles::from_balls(family.balls_within(truncation)),
    }
}

/// One rung of the nested-ball escape recursion.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct RecursionRung {
    pub radius_from: f64,
    pub radius_to: f64,
    /// `p_n = P_0(τ_{B_n} < T_A)`.
    pub p: HittingEstimate,
    /// `p_{n+1}` at the next radius.
    pub p_next: HittingEstimate,
    /// `q_n`: worst sampled restart in the waist annulus.
    pub q: f64,
    /// `t_n`: chance the exit lands in the waist, given escape-before-hit.
    pub t: f64,
    /// Right-hand side `p_n (q_n t_n + 1 − t_n)`.
    pub rhs: f64,
    /// Statistical slack (3σ-style) granted to the inequality.
    pub slack: f64,
}

impl RecursionRung {
    /// Does `p_{n+1} ≤ p_n (q_n t_n + 1 − t_n)` hold within slack?
    pub fn holds(&self) -> bool {
        self.p_next.p_hat <= self.rhs + self.slack
    }
}

/// Estimate the rungs of the recursion
/// `p_{n+1} ≤ p_n (q_n t_n + 1 − t_n)` for nested balls `B(0, ρ_n)`.
pub fn recursion_diagnostic(
    family: &BallFamily,
    exp: &CharacteristicExponent,
    radii: &[f64],
    cfg: &SimConfig,
) -> Result<Vec<RecursionRung>> {
    use std::sync::atomic::{AtomicU64, Ordering};

    cfg.validate()?;
    if radii.len() < 2 {
        return Err(Error::config("need at least two nested radii"));
    }
    for w in radii.windows(2) {
        if w[1] <= w[0] {
            return Err(Error::config("radii must increase"));
        }
    }
    let d = exp.dimension();
    let trunc = radii.last().unwrap() * 2.0;
    let obstacles = obstacles_for(family, trunc);
    let start = vec![0.0; d];

    // Escape-before-hit estimate at each radius, plus the waist-landing
    // fraction toward the next radius.
    let mut p_at = Vec::with_capacity(radii.len());
    let mut t_at = Vec::with_capacity(radii.len());
    for (k, &rn) in radii.iter().enumerate() {
        let arena = Arena::new(obstacles.clone(), rn)?;
        let waist = if k + 1 < radii.len() {
            (rn * radii[k + 1]).sqrt()
        } else {
            f64::INFINITY
        };
        let waist_hits = AtomicU64::new(0);
        let escapes = AtomicU64::new(0);
        let record = |r: &engine::PathResult| {
            if r.outcome == Outcome::Escape {
                escapes.fetch_add(1, Ordering::Relaxed);
                if norm(&r.terminal) <= waist {
                    waist_hits.fetch_add(1, Ordering::Relaxed);
                }
            }
        };
        let est = run_experiment(
            exp,
            &arena,
            &start,
            &SimConfig { r_esc: rn, ..cfg.clone() },
            Some(&record),
        )?;
        let n_escape = escapes.load(Ordering::Relaxed);
        if k + 1 < radii.len() && n_escape < 500 {
            return Err(Error::Config(format!(
                "only {n_escape} conditional samples at radius {rn}; widen paths"
            )));
        }
        p_at.push(HittingEstimate::from_counts(
            est.n_escape,
            est.n_hit,
            est.n_censored,
        ));
        let t = if n_escape > 0 {
            waist_hits.load(Ordering::Relaxed) as f64 / n_escape as f64
        } else {
            0.0
        };
        t_at.push((t, n_escape));
    }

    let mut rungs = Vec::new();
    for k in 0..radii.len() - 1 {
        let rn = radii[k];
        let rn1 = radii[k + 1];

        // q_n: worst restart over a small radial grid inside the waist.
        let arena_next = Arena::new(obstacles.clone(), rn1)?;
        let q_paths = (cfg.paths / 4).max(2_000);
        let mut q: f64 = 0.0;
        let mut q_sigma = 0.0;
        for frac in [1.05, 1.3, 1.7] {
            let mut y = vec![0.0; d];
            y[0] = rn * frac;
            if y[0] >= rn1 {
                continue;
            }
            let qe = run_experiment(
                exp,
                &arena_next,
                &y,
                &SimConfig {
                    paths: q_paths,
                    r_esc: rn1,
                    ..cfg.clone()
                },
                None,
            )?;
            let q_here = qe.n_escape as f64 / qe.paths() as f64;
            if q_here > q {
                q = q_here;
                q_sigma = (q_here * (1.0 - q_here) / qe.paths() as f64).sqrt();
            }
        }

        let (t, n_cond) = t_at[k];
        let t_sigma = (t * (1.0 - t) / n_cond.max(1) as f64).sqrt();
        let p = p_at[k];
        let p_next = p_at[k + 1];
        let rhs = p.p_hat * (q * t + 1.0 - t);
        let slack =
            3.0 * (p_next.sigma() + p.sigma() + p.p_hat * (t * q_sigma + (1.0 - q) * t_sigma));
        rungs.push(RecursionRung {
            radius_from: rn,
            radius_to: rn1,
            p,
            p_next,
            q,
            t,
            rhs,
            slack,
        });
    }
    Ok(rungs)
}

/// Probability of exiting `B(0, radius)` before hitting the family.
pub fn escape_before_hit(
    family: &BallFamily,
    exp: &CharacteristicExponent,
    radius: f64,
    truncation: f64,
    cfg: &SimConfig,
) -> Result<HittingEstimate> {
    let obstacles = obstacles_for(family, truncation);
    let arena = Arena::new(obstacles, radius)?;
    let start = vec![0.0; exp.dimension()];
    let est = run_experiment(exp, &arena, &start, &SimConfig { r_esc: radius, ..cfg.clone() }, None)?;
    Ok(HittingEstimate::from_counts(
        est.n_escape,
        est.n_hit,
        est.n_censored,
    ))
}

/// Fitted hitting lower-envelope constant.
#[derive(Debug, Clone, Serialize)]
pub struct CeFit {
    pub c_e: f64,
    /// `(|x|/r, extrapolated estimate, envelope upper bound)` per grid point.
    pub points: Vec<(f64, f64, f64)>,
    /// Statistical sigma at the minimizing point.
    pub sigma_at_min: f64,
}

/// Fit the constant of the hitting lower envelope: the infimum over a
/// distance grid of `p̂(T_B < ∞) / (G(|x|)/G(r))`.
pub fn fit_ce(
    exp: &CharacteristicExponent,
    model: &GreenModel,
    ratios: &[f64],
    cfg: &SimConfig,
) -> Result<CeFit> {
    cfg.validate()?;
    let d = exp.dimension();
    let ball = Ball::new(vec![0.0; d], 1.0);
    let mut points = Vec::new();
    let mut c_e = f64::INFINITY;
    let mut sigma_at_min = 0.0;
    for &ratio in ratios {
        if ratio < 2.0 {
            return Err(Error::domain("distance ratios below 2 are too close to the ball"));
        }
        let mut start = vec![0.0; d];
        start[0] = ratio;
        let run_cfg = SimConfig {
            r_esc: (8.0 * ratio).max(cfg.r_esc),
            ..cfg.clone()
        };
        let rep = estimate_single_ball_hit(exp, &start, &ball, &run_cfg)?;
        let upper = model.hitting_envelope(&vec![0.0; d], 1.0, &start)?.upper;
        let q = rep.p_infinity / upper;
        if q < c_e {
            c_e = q;
            sigma_at_min = rep.base.sigma() / upper;
        }
        points.push((ratio, rep.p_infinity, upper));
    }
    if !(c_e.is_finite() && c_e > 0.0) {
        return Err(Error::numeric("degenerate C_E fit"));
    }
    if sigma_at_min > 0.1 * c_e {
        return Err(Error::Numeric(format!(
            "statistical noise {sigma_at_min:.4} exceeds 10% of fitted C_E {c_e:.4}; more paths required"
        )));
    }
    Ok(CeFit {
        c_e: c_e.min(1.0),
        points,
        sigma_at_min,
    })
}

/// Binary event-log record layout: path id `u64`, event code `u8`
/// (1 = hit, 2 = escape, 3 = censored), time `f64`, position `f64 × d`,
/// all little-endian.
pub fn write_event_log<W: IoWrite>(
    mut out: W,
    events: &[(u64, u8, f64, Vec<f64>)],
) -> Result<()> {
    for (id, code, time, pos) in events {
        out.write_all(&id.to_le_bytes())?;
        out.write_all(&[*code])?;
        out.write_all(&time.to_le_bytes())?;
        for p in pos {
            out.write_all(&p.to_le_bytes())?;
        }
    }
    Ok(())
}

/// Coupled monotonicity helper: hitting probability of a single ball under
/// the fixed-step rule with shared increments. Radius enlargement can only
/// convert escapes into hits path by path.
pub fn coupled_hit_probability(
    exp: &CharacteristicExponent,
    x_start: &[f64],
    ball: &Ball,
    dt: f64,
    cfg: &SimConfig,
) -> Result<HittingEstimate> {
    let arena = Arena::new(Obstacles::from_balls(vec![ball.clone()]), cfg.r_esc)?;
    run_experiment(
        exp,
        &arena,
        x_start,
        &SimConfig {
            step_rule: StepRule::FixedStep(dt),
            ..cfg.clone()
        },
        None,
    )
}

/// Classical Brownian annulus-stopped hitting probability, used as an oracle
/// in tests: start `|x| = a`, inner ball radius `r`, stop sphere `R`, d = 3.
pub fn brownian_annulus_oracle(r: f64, a: f64, big_r: f64) -> f64 {
    ((1.0 / a) - (1.0 / big_r)) / ((1.0 / r) - (1.0 / big_r))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exponents::CharacteristicExponent;
    use crate::geometry::RadiusLaw;

    fn brownian() -> CharacteristicExponent {
        CharacteristicExponent::brownian(3)
    }

    #[test]
    fn brownian_annulus_hit_matches_oracle_exact_mode() {
        let exp = brownian();
        let ball = Ball::new(vec![0.0; 3], 1.0);
        let cfg = SimConfig::exact(20_000, 8.0, 42);
        let rep = estimate_single_ball_hit(&exp, &[2.0, 0.0, 0.0], &ball, &cfg).unwrap();
        let oracle = brownian_annulus_oracle(1.0, 2.0, 8.0);
        let tol = 4.0 * rep.base.sigma();
        assert!(
            (rep.base.p_hat - oracle).abs() < tol,
            "got {}, oracle {oracle}, tol {tol}",
            rep.base.p_hat
        );
        // Extrapolation approaches the R = ∞ value r/|x| = 0.5.
        assert!((rep.p_infinity - 0.5).abs() < 0.02, "p_inf {}", rep.p_infinity);
    }

    #[test]
    fn brownian_annulus_hit_matches_oracle_stepper() {
        let exp = brownian();
        let ball = Ball::new(vec![0.0; 3], 1.0);
        let cfg = SimConfig {
            paths: 8_000,
            step_rule: StepRule::AdaptiveStep { frac: 0.2 },
            r_esc: 8.0,
            t_max: 1e9,
            seed: 7,
            antithetic: false,
        };
        let rep = estimate_single_ball_hit(&exp, &[2.0, 0.0, 0.0], &ball, &cfg).unwrap();
        let oracle = brownian_annulus_oracle(1.0, 2.0, 8.0);
        let tol = 4.0 * rep.base.sigma() + 0.01;
        assert!(
            (rep.base.p_hat - oracle).abs() < tol,
            "got {}, oracle {oracle}",
            rep.base.p_hat
        );
        assert!(rep.bias.is_some());
    }

    #[test]
    fn start_inside_ball_hits_immediately() {
        let exp = brownian();
        let ball = Ball::new(vec![0.0; 3], 1.0);
        let cfg = SimConfig::exact(200, 8.0, 1);
        let rep = estimate_single_ball_hit(&exp, &[0.5, 0.0, 0.0], &ball, &cfg).unwrap();
        assert_eq!(rep.base.p_hat, 1.0);
        assert_eq!(rep.base.ci_half_width, 0.0);
    }

    #[test]
    fn estimates_are_bit_reproducible() {
        let exp = CharacteristicExponent::stable(3, 1.5).unwrap();
        let ball = Ball::new(vec![0.0; 3], 1.0);
        let cfg = SimConfig::exact(2_000, 16.0, 99);
        let a = estimate_single_ball_hit(&exp, &[3.0, 0.0, 0.0], &ball, &cfg).unwrap();
        let b = estimate_single_ball_hit(&exp, &[3.0, 0.0, 0.0], &ball, &cfg).unwrap();
        assert_eq!(a.base.p_hat.to_bits(), b.base.p_hat.to_bits());
        assert_eq!(a.p_infinity.to_bits(), b.p_infinity.to_bits());
    }

    #[test]
    fn brownian_overshoot_is_zero() {
        let exp = brownian();
        let cfg = SimConfig::exact(2_000, 8.0, 3);
        let rep = estimate_overshoot(&exp, 1.0, &[2.0, 4.0], &cfg).unwrap();
        for (s, est) in &rep.per_threshold {
            assert_eq!(est.p_hat, 0.0, "overshoot at s = {s}");
        }
    }

    #[test]
    fn stable_overshoot_exponent_tracks_index() {
        let beta = 1.2;
        let exp = CharacteristicExponent::stable(3, beta).unwrap();
        let cfg = SimConfig::exact(30_000, 8.0, 5);
        let thresholds: Vec<f64> = (1..=5).map(|k| 2f64.powi(k)).collect();
        let rep = estimate_overshoot(&exp, 1.0, &thresholds, &cfg).unwrap();
        assert!(
            (rep.fitted_exponent - beta).abs() < 0.15,
            "slope {} for beta {beta}",
            rep.fitted_exponent
        );
        // Ratio check between s = 2r and s = 4r.
        let p2 = rep.per_threshold[0].1.p_hat;
        let p4 = rep.per_threshold[1].1.p_hat;
        assert!(p2 / p4 >= 2f64.powf(beta) / 2.0, "p2 {p2} p4 {p4}");
    }

    #[test]
    fn escape_with_no_balls_is_certain() {
        let exp = brownian();
        let fam = crate::geometry::BallFamily::explicit(3, vec![]).unwrap();
        let cfg = SimConfig::exact(500, 8.0, 4);
        let est = estimate_escape(&fam, 2.0, &exp, &cfg).unwrap();
        assert_eq!(est.p_hat, 1.0);
    }

    #[test]
    fn escape_single_ball_complements_hit() {
        let exp = brownian();
        let fam = crate::geometry::BallFamily::explicit(
            3,
            vec![Ball::new(vec![2.0, 0.0, 0.0], 1.0)],
        )
        .unwrap();
        let cfg = SimConfig::exact(20_000, 8.0, 21);
        let est = estimate_escape(&fam, 3.5, &exp, &cfg).unwrap();
        // From the origin, hitting B((2,0,0), 1) before |x| = 8 has the same
        // law as from distance 2 of a centered ball.
        let oracle = 1.0 - brownian_annulus_oracle(1.0, 2.0, 8.0);
        assert!(
            (est.p_hat - oracle).abs() < 4.0 * est.sigma(),
            "got {}, oracle {oracle}",
            est.p_hat
        );
    }

    #[test]
    fn escape_monotone_in_truncation() {
        let exp = brownian();
        let fam = crate::geometry::BallFamily::lattice(
            3,
            1.0,
            1.0,
            RadiusLaw::Power { coeff: 0.05, exponent: 1.0 },
        )
        .unwrap();
        let cfg = SimConfig::exact(4_000, 24.0, 11);
        let mut last = 1.01;
        for trunc in [3.0, 6.0, 11.0] {
            let est = estimate_escape(&fam, trunc, &exp, &cfg).unwrap();
            assert!(
                est.p_hat <= last + 3.0 * est.sigma() + 0.02,
                "escape should not grow with more balls"
            );
            last = est.p_hat;
        }
    }

    #[test]
    fn coupled_radius_monotonicity_is_deterministic() {
        let exp = brownian();
        let cfg = SimConfig {
            paths: 1_000,
            step_rule: StepRule::FixedStep(0.01),
            r_esc: 8.0,
            t_max: 500.0,
            seed: 31,
            antithetic: false,
        };
        let mut last = 0.0;
        for radius in [0.6, 0.8, 1.0, 1.2] {
            let ball = Ball::new(vec![0.0; 3], radius);
            let est = coupled_hit_probability(&exp, &[2.0, 0.0, 0.0], &ball, 0.01, &cfg).unwrap();
            assert!(
                est.p_hat >= last,
                "shared-increment hits must be monotone in radius"
            );
            last = est.p_hat;
        }
    }

    #[test]
    fn fit_ce_brownian_is_near_one() {
        let exp = brownian();
        let model = GreenModel::exact(exp.clone()).unwrap();
        let cfg = SimConfig::exact(8_000, 16.0, 13);
        let fit = fit_ce(&exp, &model, &[2.0, 4.0, 8.0], &cfg).unwrap();
        assert!(fit.c_e > 0.9, "Brownian C_E should be ~1, got {}", fit.c_e);
    }

    #[test]
    fn event_log_layout() {
        let mut buf = Vec::new();
        write_event_log(&mut buf, &[(7, 2, 1.5, vec![1.0, 2.0, 3.0])]).unwrap();
        assert_eq!(buf.len(), 8 + 1 + 8 + 24);
        assert_eq!(u64::from_le_bytes(buf[0..8].try_into().unwrap()), 7);
        assert_eq!(buf[8], 2);
    }
}
