//! Path engines.
//!
//! Two walkers share one arena abstraction (obstacle balls inside an escape
//! sphere):
//!
//! - the exact-increment walker advances by ball-exit jumps: the process
//!   started at the center of a free ball exits it at a radius governed by a
//!   `Beta(β/2, 1−β/2)` draw (on the sphere itself for Brownian motion), so
//!   hitting and escape carry no time-discretization bias;
//! - the stepper advances by `Δt` increments with state-in-ball detection, a
//!   Brownian-bridge crossing correction at `β = 2`, and adaptive step
//!   control near obstacles.
//!
//! Per-path randomness is keyed by `(seed, path index)`; increments and hit
//! decisions live on separate streams so coupled configurations share
//! trajectories.

use rand_chacha::rand_core::RngCore;
use rand_distr::{Beta, Distribution};
use rayon::prelude::*;

use crate::error::Error;
use crate::exponents::{CharacteristicExponent, ExponentKind};
use crate::geometry::{Ball, RadiusLaw};
use crate::rng::{standard_normal, uniform_open, PathRng};
use crate::Result;

use super::increments::{increment_draws, median_step_norm, process_increment_into};

/// Obstacle lookup: either a flat list or the lattice fast path.
#[derive(Debug, Clone)]
pub enum Obstacles {
    List(Vec<Ball>),
    Lattice {
        spacing: f64,
        min_norm: f64,
        max_norm: f64,
        law: RadiusLaw,
    },
}

impl Obstacles {
    pub fn from_balls(balls: Vec<Ball>) -> Self {
        Obstacles::List(balls)
    }

    pub fn is_empty(&self) -> bool {
        match self {
            Obstacles::List(b) => b.is_empty(),
            Obstacles::Lattice { .. } => false,
        }
    }

    pub fn max_extent(&self) -> f64 {
        match self {
            Obstacles::List(b) => b
                .iter()
                .map(|x| x.center_norm() + x.radius)
                .fold(0.0, f64::max),
            Obstacles::Lattice {
                max_norm,
                law,
                min_norm,
                ..
            } => max_norm + law.radius(*min_norm),
        }
    }

    pub fn min_radius(&self) -> f64 {
        match self {
            Obstacles::List(b) => b.iter().map(|x| x.radius).fold(f64::INFINITY, f64::min),
            Obstacles::Lattice { law, max_norm, .. } => law.radius(*max_norm),
        }
    }

    /// Certified lower bound on the distance from `x` to the nearest
    /// obstacle surface (negative when inside one).
    fn nearest_surface(&self, x: &[f64]) -> f64 {
        match self {
            Obstacles::List(balls) => balls
                .iter()
                .map(|b| dist_slice(&b.center, x) - b.radius)
                .fold(f64::INFINITY, f64::min),
            Obstacles::Lattice {
                spacing,
                min_norm,
                max_norm,
                law,
            } => {
                let d = x.len();
                let h = *spacing;
                let mut best = f64::INFINITY;
                let mut offs = vec![-1i64; d];
                let base: Vec<i64> = x.iter().map(|&v| (v / h).round() as i64).collect();
                'cells: loop {
                    let mut c = vec![0.0; d];
                    for i in 0..d {
                        c[i] = (base[i] + offs[i]) as f64 * h;
                    }
                    let n = c.iter().map(|v| v * v).sum::<f64>().sqrt();
                    if n >= *min_norm && n <= *max_norm {
                        best = best.min(dist_slice(&c, x) - law.radius(n));
                    }
                    for pos in (0..d).rev() {
                        if offs[pos] < 1 {
                            offs[pos] += 1;
                            for later in offs.iter_mut().skip(pos + 1) {
                                *later = -1;
                            }
                            continue 'cells;
                        }
                    }
                    break;
                }
                // Centers two or more cells away sit at least this far out.
                let ring2 = h * (2.0 - 0.5 * (d as f64).sqrt()) - law.radius(*min_norm);
                best.min(ring2.max(h * 0.5))
            }
        }
    }

    /// The obstacle containing `x`, if any.
    fn containing(&self, x: &[f64]) -> bool {
        match self {
            Obstacles::List(balls) => balls.iter().any(|b| b.contains(x)),
            Obstacles::Lattice { .. } => self.nearest_surface(x) <= 0.0,
        }
    }
}

fn dist_slice(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(p, q)| (p - q) * (p - q))
        .sum::<f64>()
        .sqrt()
}

fn norm_slice(a: &[f64]) -> f64 {
    a.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Walk domain: the escape ball minus the obstacles.
#[derive(Debug, Clone)]
pub struct Arena {
    pub obstacles: Obstacles,
    pub r_esc: f64,
}

impl Arena {
    pub fn new(obstacles: Obstacles, r_esc: f64) -> Result<Self> {
        if r_esc <= 0.0 {
            return Err(Error::domain("escape radius must be positive"));
        }
        if !obstacles.is_empty() && obstacles.max_extent() >= r_esc {
            return Err(Error::Config(format!(
                "escape radius {r_esc} does not enclose the obstacles (extent {})",
                obstacles.max_extent()
            )));
        }
        Ok(Arena { obstacles, r_esc })
    }

    fn free_radius(&self, x: &[f64]) -> f64 {
        let to_sphere = self.r_esc - norm_slice(x);
        if self.obstacles.is_empty() {
            to_sphere
        } else {
            to_sphere.min(self.obstacles.nearest_surface(x))
        }
    }
}

/// Terminal state of one path.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Hit,
    Escape,
    Censored,
}

#[derive(Debug, Clone)]
pub struct PathResult {
    pub outcome: Outcome,
    /// Position at termination (landing point for jumps).
    pub terminal: Vec<f64>,
    pub time: f64,
}

/// Exit-radius factor for the exact walker: the process started at the
/// center of a free ball of radius ρ lands at distance `ρ/√w`,
/// `w ~ Beta(β/2, 1 − β/2)`; Brownian paths land on the sphere itself.
struct ExitLaw {
    dist: Option<Beta<f64>>,
}

impl ExitLaw {
    fn new(beta: f64) -> Result<Self> {
        if beta >= 2.0 {
            return Ok(ExitLaw { dist: None });
        }
        let dist = Beta::new(beta / 2.0, 1.0 - beta / 2.0)
            .map_err(|e| Error::Numeric(format!("beta law: {e}")))?;
        Ok(ExitLaw { dist: Some(dist) })
    }

    fn factor(&self, rng: &mut impl RngCore) -> f64 {
        match &self.dist {
            None => 1.0,
            Some(b) => {
                let w: f64 = b.sample(rng).clamp(1e-300, 1.0);
                1.0 / w.sqrt()
            }
        }
    }
}

fn uniform_direction(d: usize, rng: &mut impl RngCore, out: &mut [f64]) {
    loop {
        let mut n2 = 0.0;
        for o in out.iter_mut().take(d) {
            *o = standard_normal(rng);
            n2 += *o * *o;
        }
        if n2 > 1e-24 {
            let inv = n2.sqrt().recip();
            for o in out.iter_mut().take(d) {
                *o *= inv;
            }
            return;
        }
    }
}

const MAX_EXACT_STEPS: usize = 200_000;

/// Exact-increment walk until hit, escape, or the step cap.
///
/// `flip` negates every direction draw (antithetic pairing).
pub fn walk_exact(
    arena: &Arena,
    exit: &ExitLawHandle,
    start: &[f64],
    rng: &mut PathRng,
    flip: bool,
) -> PathResult {
    let d = start.len();
    let mut x = start.to_vec();
    let mut dir = vec![0.0; d];
    let eps_hit = 1e-6 * arena.obstacles.min_radius().min(arena.r_esc);
    let eps_out = arena.r_esc * (1.0 - 1e-9);
    if arena.obstacles.containing(&x) {
        return PathResult {
            outcome: Outcome::Hit,
            terminal: x,
            time: 0.0,
        };
    }
    for _ in 0..MAX_EXACT_STEPS {
        if norm_slice(&x) >= eps_out {
            return PathResult {
                outcome: Outcome::Escape,
                terminal: x,
                time: 0.0,
            };
        }
        let rho = arena.free_radius(&x);
        if rho <= eps_hit {
            // Within the absorption shell of an obstacle (the escape sphere
            // was handled above).
            return PathResult {
                outcome: Outcome::Hit,
                terminal: x,
                time: 0.0,
            };
        }
        let jump = rho * exit.0.factor(&mut rng.increments);
        uniform_direction(d, &mut rng.increments, &mut dir);
        let sign = if flip { -1.0 } else { 1.0 };
        for i in 0..d {
            x[i] += sign * jump * dir[i];
        }
        if arena.obstacles.containing(&x) {
            return PathResult {
                outcome: Outcome::Hit,
                terminal: x,
                time: 0.0,
            };
        }
    }
    PathResult {
        outcome: Outcome::Censored,
        terminal: x,
        time: 0.0,
    }
}

/// Shareable exit law (the Beta distribution is `Copy`-ish and thread-safe).
pub struct ExitLawHandle(ExitLaw);

impl ExitLawHandle {
    pub fn for_exponent(exp: &CharacteristicExponent) -> Result<Self> {
        match exp.kind() {
            ExponentKind::Stable { beta } => Ok(ExitLawHandle(ExitLaw::new(*beta)?)),
            _ => Err(Error::unsupported(
                "exact-increment walks need a stable kind; use the stepper",
            )),
        }
    }
}

/// Step-size policy for the stepper.
#[derive(Debug, Clone, Copy)]
pub enum StepPolicy {
    Fixed(f64),
    /// Median increment length targets `frac` times the free distance.
    Adaptive { frac: f64 },
}

pub struct StepperConfig {
    pub policy: StepPolicy,
    pub t_max: f64,
    pub max_steps: usize,
    /// Apply the Brownian-bridge crossing correction (β = 2 only).
    pub bridge: bool,
}

/// Fixed-Δt / adaptive-Δt walk with state-in-ball detection.
///
/// For β = 2 a tangent-plane bridge correction is applied against the
/// nearest obstacle and the escape sphere: a 1-d Brownian bridge between
/// distances `d₁, d₂` over `Δt` (per-coordinate variance `2Δt`) crosses with
/// probability `exp(−d₁ d₂ / Δt)`.
///
/// The decision stream consumes exactly two uniforms per step regardless of
/// the obstacle configuration, so runs with shared seeds stay coupled.
pub fn walk_stepper(
    arena: &Arena,
    exp: &CharacteristicExponent,
    cfg: &StepperConfig,
    median_unit_step: f64,
    start: &[f64],
    rng: &mut PathRng,
    flip: bool,
) -> PathResult {
    let d = start.len();
    let mut x = start.to_vec();
    let mut inc = vec![0.0; d];
    let mut scratch = vec![0.0; d];
    let mut t = 0.0;
    let beta_is_two = matches!(exp.kind(), ExponentKind::Stable { beta } if *beta == 2.0);
    let r_min = arena.obstacles.min_radius().min(arena.r_esc);

    if arena.obstacles.containing(&x) {
        return PathResult {
            outcome: Outcome::Hit,
            terminal: x,
            time: 0.0,
        };
    }

    for _ in 0..cfg.max_steps {
        if t >= cfg.t_max {
            break;
        }
        let free = arena.free_radius(&x).max(r_min * 1e-4);
        let dt = match cfg.policy {
            StepPolicy::Fixed(dt) => dt,
            StepPolicy::Adaptive { frac } => {
                // Choose Δt so the median increment is ≈ frac · free.
                let target = frac * free;
                if beta_is_two {
                    // Median norm scales like sqrt(dt).
                    (target / median_unit_step).powi(2)
                } else {
                    match exp.kind() {
                        ExponentKind::Stable { beta } => {
                            (target / median_unit_step).powf(*beta)
                        }
                        // Mixed kinds: the heavier component dominates small
                        // steps; scale by the Brownian part as a safe floor.
                        _ => (target / median_unit_step).powi(2),
                    }
                }
            }
        };
        let d1_obs = if arena.obstacles.is_empty() {
            f64::INFINITY
        } else {
            arena.obstacles.nearest_surface(&x)
        };
        let d1_esc = arena.r_esc - norm_slice(&x);

        process_increment_into(exp, dt, &mut rng.increments, &mut inc, &mut scratch);
        if flip {
            for v in inc.iter_mut() {
                *v = -*v;
            }
        }
        for i in 0..d {
            x[i] += inc[i];
        }
        t += dt;

        // Decision draws happen unconditionally to keep streams aligned.
        let u_obs = uniform_open(&mut rng.decisions);
        let u_esc = uniform_open(&mut rng.decisions);

        if arena.obstacles.containing(&x) {
            return PathResult {
                outcome: Outcome::Hit,
                terminal: x,
                time: t,
            };
        }
        let n = norm_slice(&x);
        if n >= arena.r_esc {
            return PathResult {
                outcome: Outcome::Escape,
                terminal: x,
                time: t,
            };
        }
        if cfg.bridge && beta_is_two {
            let d2_obs = if arena.obstacles.is_empty() {
                f64::INFINITY
            } else {
                arena.obstacles.nearest_surface(&x)
            };
            if d1_obs.is_finite() && d2_obs.is_finite() && d1_obs > 0.0 && d2_obs > 0.0 {
                let p_cross = (-d1_obs * d2_obs / dt).exp();
                if u_obs < p_cross {
                    return PathResult {
                        outcome: Outcome::Hit,
                        terminal: x,
                        time: t,
                    };
                }
            }
            let d2_esc = arena.r_esc - n;
            if d1_esc > 0.0 && d2_esc > 0.0 {
                let p_cross = (-d1_esc * d2_esc / dt).exp();
                if u_esc < p_cross {
                    return PathResult {
                        outcome: Outcome::Escape,
                        terminal: x,
                        time: t,
                    };
                }
            }
        }
    }
    PathResult {
        outcome: Outcome::Censored,
        terminal: x,
        time: t,
    }
}

/// Run `paths` walks in parallel with per-path keyed streams and a
/// deterministic (path-ordered) reduction.
pub fn run_paths<F, T>(paths: usize, seed: u64, antithetic: bool, runner: F) -> Vec<T>
where
    F: Fn(&mut PathRng, bool) -> T + Sync,
    T: Send,
{
    (0..paths)
        .into_par_iter()
        .map(|i| {
            // Antithetic pairs share a stream key and flip directions.
            let (key, flip) = if antithetic {
                ((i / 2) as u64, i % 2 == 1)
            } else {
                (i as u64, false)
            };
            let mut rng = PathRng::new(seed, key);
            if antithetic && flip {
                // Same draws as the partner path, mirrored.
                runner(&mut rng, true)
            } else {
                runner(&mut rng, false)
            }
        })
        .collect()
}

/// Convenience: median unit-step norm for the stepper, or 0 when unused.
pub fn stepper_calibration(exp: &CharacteristicExponent) -> Result<f64> {
    increment_draws(exp.kind())?;
    Ok(median_step_norm(exp, exp.dimension()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exponents::CharacteristicExponent;

    #[test]
    fn arena_rejects_uncontained_obstacles() {
        let obs = Obstacles::from_balls(vec![Ball::new(vec![5.0, 0.0, 0.0], 1.0)]);
        assert!(Arena::new(obs, 4.0).is_err());
    }

    #[test]
    fn lattice_nearest_surface_agrees_with_scan() {
        let law = RadiusLaw::Power { coeff: 0.2, exponent: 1.0 };
        let lat = Obstacles::Lattice {
            spacing: 1.0,
            min_norm: 0.5,
            max_norm: 6.0,
            law,
        };
        let fam = crate::geometry::BallFamily::lattice(3, 1.0, 0.5, law).unwrap();
        let list = Obstacles::from_balls(fam.balls_within(6.0));
        for p in [
            [0.3, 0.2, 0.1],
            [1.4, 1.6, 0.2],
            [2.5, 2.5, 2.5],
            [0.5, 0.0, 0.0],
        ] {
            let a = lat.nearest_surface(&p);
            let b = list.nearest_surface(&p);
            // The lattice path may be conservative, never optimistic.
            assert!(a <= b + 1e-12, "at {p:?}: lattice {a} vs scan {b}");
            if b < 0.4 {
                assert!((a - b).abs() < 1e-12, "near-field must be exact at {p:?}");
            }
            assert_eq!(lat.containing(&p), list.containing(&p));
        }
    }

    #[test]
    fn exact_walk_terminates_and_is_reproducible() {
        let exp = CharacteristicExponent::brownian(3);
        let exit = ExitLawHandle::for_exponent(&exp).unwrap();
        let obs = Obstacles::from_balls(vec![Ball::new(vec![0.0, 0.0, 0.0], 1.0)]);
        let arena = Arena::new(obs, 8.0).unwrap();
        let start = [2.0, 0.0, 0.0];
        let mut r1 = PathRng::new(9, 3);
        let mut r2 = PathRng::new(9, 3);
        let a = walk_exact(&arena, &exit, &start, &mut r1, false);
        let b = walk_exact(&arena, &exit, &start, &mut r2, false);
        assert_eq!(a.outcome, b.outcome);
        assert_eq!(a.terminal, b.terminal);
    }

    #[test]
    fn stepper_brownian_does_not_overshoot_far() {
        // Continuous paths: landing far outside the escape sphere means a bug.
        let exp = CharacteristicExponent::brownian(3);
        let arena = Arena::new(Obstacles::from_balls(vec![]), 4.0).unwrap();
        let cal = stepper_calibration(&exp).unwrap();
        let cfg = StepperConfig {
            policy: StepPolicy::Adaptive { frac: 0.2 },
            t_max: 1e9,
            max_steps: 1_000_000,
            bridge: true,
        };
        for k in 0..20 {
            let mut rng = PathRng::new(17, k);
            let res = walk_stepper(&arena, &exp, &cfg, cal, &[0.5, 0.0, 0.0], &mut rng, false);
            assert_eq!(res.outcome, Outcome::Escape);
            assert!(norm_slice(&res.terminal) < 4.0 * 1.4);
        }
    }
}
