//! Poissonian ball collections.
//!
//! Centers come from an inhomogeneous Poisson point process with radial
//! density `μ`, each carrying a ball of radius `φ(x)`. The admissibility
//! conditions bound the oscillation of `φ` and `μ` on `B(x, |x|/2)`, keep
//! `φ(x) ≤ |x|/2`, and cap `μ` by `ψ*(1/|x|) G(φ(x))` at infinity. Under
//! them, avoidability of the random collection is decided by the
//! percolation integral `∫_{|x|>1} G(x)/G(φ(x)) μ(x) dx`.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::Serialize;

use crate::criteria::{RadiusSchedule, SeriesVerdict};
use crate::error::Error;
use crate::exponents::CharacteristicExponent;
use crate::geometry::{cube_containing, whitney_decompose, Annulus, Ball, RadiusLaw, WhitneyCube};
use crate::green::{sphere_area, GreenModel};
use crate::interval::Interval;
use crate::quad;
use crate::rng::uniform_open;
use crate::Result;

/// Radial point density.
#[derive(Debug, Clone, Serialize)]
pub enum RadialDensity {
    /// `μ(x) = coeff · |x|^{-exponent}`.
    Power { coeff: f64, exponent: f64 },
    /// Piecewise log-linear interpolation of `(radius, value)` samples.
    Table { radii: Vec<f64>, values: Vec<f64> },
}

impl RadialDensity {
    pub fn eval(&self, t: f64) -> f64 {
        match self {
            RadialDensity::Power { coeff, exponent } => coeff * t.powf(-exponent),
            RadialDensity::Table { radii, values } => {
                if radii.is_empty() {
                    return 0.0;
                }
                if t <= radii[0] {
                    return values[0];
                }
                if t >= *radii.last().unwrap() {
                    return *values.last().unwrap();
                }
                let i = radii.partition_point(|&r| r < t).max(1);
                let (r0, r1) = (radii[i - 1], radii[i]);
                let (v0, v1) = (values[i - 1], values[i]);
                let w = (t.ln() - r0.ln()) / (r1.ln() - r0.ln());
                (v0.ln() * (1.0 - w) + v1.ln() * w).exp()
            }
        }
    }

    /// Upper bound of the density over `[a, b]` (sampled; exact for
    /// monotone power laws).
    fn sup_on(&self, a: f64, b: f64) -> f64 {
        match self {
            RadialDensity::Power { coeff, exponent } => {
                if *exponent >= 0.0 {
                    coeff * a.powf(-exponent)
                } else {
                    coeff * b.powf(-exponent)
                }
            }
            RadialDensity::Table { .. } => {
                let mut m: f64 = 0.0;
                for i in 0..=64 {
                    let t = a * (b / a).powf(i as f64 / 64.0);
                    m = m.max(self.eval(t));
                }
                m * 1.001
            }
        }
    }
}

/// Intensity model for the Poissonian collection.
#[derive(Debug, Clone)]
pub struct IntensityModel {
    pub density: RadialDensity,
    pub radius_law: RadiusLaw,
    /// Declared admissibility constant (> 1).
    pub c_p: f64,
}

impl IntensityModel {
    pub fn new(density: RadialDensity, radius_law: RadiusLaw, c_p: f64) -> Result<Self> {
        if c_p <= 1.0 {
            return Err(Error::config("C_P must exceed 1"));
        }
        Ok(IntensityModel {
            density,
            radius_law,
            c_p,
        })
    }
}

/// Outcome of the admissibility sweep.
#[derive(Debug, Clone, Serialize)]
pub struct IntensityValidation {
    /// Oscillation of `φ` and `μ` over `B(x, |x|/2)` stays within `C_P`.
    pub oscillation_ok: bool,
    /// `φ(x) ≤ |x|/2` everywhere on the grid.
    pub radius_bound_ok: bool,
    /// `ψ*(1/|x|)^{-1} G(φ(x))^{-1} μ(x) ≤ C_P` on the outer decade.
    pub tail_bound_ok: bool,
    /// Smallest admissible constant found by the sweep.
    pub smallest_admissible_c_p: f64,
    pub witness: Option<String>,
}

impl IntensityValidation {
    pub fn pass(&self) -> bool {
        self.oscillation_ok && self.radius_bound_ok && self.tail_bound_ok
    }
}

/// Sweep the admissibility conditions over `|x|` spanning at least three
/// decades.
pub fn validate_intensity(
    m: &IntensityModel,
    exp: &CharacteristicExponent,
    model: &GreenModel,
    norms: (f64, f64),
) -> Result<IntensityValidation> {
    if norms.0 <= 0.0 || (norms.1 / norms.0).log10() < 3.0 {
        return Err(Error::config("norm grid must span at least three decades"));
    }
    let n = 240;
    let grid: Vec<f64> = (0..n)
        .map(|i| norms.0 * (norms.1 / norms.0).powf(i as f64 / (n - 1) as f64))
        .collect();

    let phi = |t: f64| m.radius_law.radius(t);
    let mut worst_osc: f64 = 1.0;
    let mut radius_bound_ok = true;
    let mut witness = None;
    for &x in &grid {
        // On B(x, |x|/2) the distance to the origin ranges over
        // [|x|/2, 3|x|/2]; monotone radial laws attain extremes there.
        for f in [
            phi(x / 2.0) / phi(x),
            phi(x) / phi(1.5 * x),
            m.density.eval(x / 2.0) / m.density.eval(x),
            m.density.eval(x) / m.density.eval(1.5 * x),
        ] {
            worst_osc = worst_osc.max(f).max(1.0 / f.max(1e-300));
        }
        if phi(x) > x / 2.0 {
            radius_bound_ok = false;
            witness.get_or_insert(format!("phi({x}) = {} exceeds |x|/2", phi(x)));
        }
    }
    let oscillation_ok = worst_osc <= m.c_p * (1.0 + 1e-9);
    if !oscillation_ok {
        witness.get_or_insert(format!(
            "oscillation {worst_osc:.4} exceeds declared C_P = {}",
            m.c_p
        ));
    }

    // Tail bound on the outer decade of the grid.
    let mut worst_tail: f64 = 0.0;
    for &x in grid.iter().filter(|&&x| x >= norms.1 / 10.0) {
        let g = model.eval(phi(x))?;
        let q = m.density.eval(x) / (exp.psi_star(1.0 / x)? * g.lo);
        worst_tail = worst_tail.max(q);
    }
    let tail_bound_ok = worst_tail <= m.c_p * (1.0 + 1e-9);
    if !tail_bound_ok {
        witness.get_or_insert(format!(
            "tail quantity {worst_tail:.4} exceeds declared C_P = {}",
            m.c_p
        ));
    }

    Ok(IntensityValidation {
        oscillation_ok,
        radius_bound_ok,
        tail_bound_ok,
        smallest_admissible_c_p: worst_osc.max(worst_tail),
        witness,
    })
}

/// One sampled configuration of centers (with their radii) in a window.
#[derive(Debug, Clone, Serialize)]
pub struct PoissonRealization {
    pub window: Annulus,
    pub balls: Vec<Ball>,
    pub seed: u64,
}

/// Expected number of points in the annular window.
pub fn expected_count(m: &IntensityModel, d: usize, window: Annulus) -> Result<f64> {
    let area = sphere_area(d);
    let lo = window.inner.max(1e-12);
    let q = quad::integrate_default(
        |t| area * t.powi(d as i32 - 1) * m.density.eval(t),
        lo,
        window.outer,
    )?;
    Ok(q.value)
}

/// Sample an inhomogeneous Poisson realization on the window by thinning
/// against a dominating constant on dyadic sub-annuli. Deterministic for a
/// given seed.
pub fn sample_realization(
    m: &IntensityModel,
    d: usize,
    window: Annulus,
    seed: u64,
) -> Result<PoissonRealization> {
    if window.inner < 0.0 || window.outer <= window.inner {
        return Err(Error::domain("window must satisfy 0 <= inner < outer"));
    }
    if window.inner == window.outer {
        return Ok(PoissonRealization {
            window,
            balls: vec![],
            seed,
        });
    }
    let mean = expected_count(m, d, window)?;
    if !mean.is_finite() {
        return Err(Error::domain("density not integrable on the window"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let area = sphere_area(d);
    let mut balls = Vec::new();
    let mut a = window.inner.max(window.outer / 1024.0).max(1e-9);
    if window.inner > 0.0 {
        a = window.inner;
    }
    while a < window.outer {
        let b = (2.0 * a).min(window.outer);
        let mu_max = m.density.sup_on(a, b);
        let vol = area / d as f64 * (b.powi(d as i32) - a.powi(d as i32));
        let lambda = mu_max * vol;
        if lambda > 0.0 {
            let n = if lambda < 1e-12 {
                0
            } else {
                Poisson::new(lambda)
                    .map_err(|e| Error::Numeric(format!("poisson sampler: {e}")))?
                    .sample(&mut rng) as usize
            };
            for _ in 0..n {
                // Radius with density ∝ t^{d-1} on [a, b], direction uniform.
                let u = uniform_open(&mut rng);
                let t = (a.powi(d as i32) + u * (b.powi(d as i32) - a.powi(d as i32)))
                    .powf(1.0 / d as f64);
                let mut dir = vec![0.0; d];
                loop {
                    let mut n2 = 0.0;
                    for v in dir.iter_mut() {
                        *v = crate::rng::standard_normal(&mut rng);
                        n2 += *v * *v;
                    }
                    if n2 > 1e-24 {
                        let inv = n2.sqrt().recip();
                        for v in dir.iter_mut() {
                            *v *= inv;
                        }
                        break;
                    }
                }
                let accept = uniform_open(&mut rng) < m.density.eval(t) / mu_max;
                if accept {
                    let center: Vec<f64> = dir.iter().map(|&v| v * t).collect();
                    let radius = m.radius_law.radius(t);
                    balls.push(Ball::new(center, radius));
                }
            }
        }
        a = b;
    }
    Ok(PoissonRealization {
        window,
        balls,
        seed,
    })
}

/// Percolation test: tail classification of
/// `∫_{|x|>1} G(x)/G(φ(x)) μ(x) dx` over the schedule's expanding annuli.
pub fn percolation_integral(
    m: &IntensityModel,
    model: &GreenModel,
    schedule: &RadiusSchedule,
) -> Result<SeriesVerdict> {
    let radii = schedule.radii();
    if radii.len() < 5 {
        return Err(Error::config("schedule needs at least 5 radii"));
    }
    let d = model.dimension() as i32;
    let area = sphere_area(model.dimension());
    let mut increments = Vec::with_capacity(radii.len());
    let mut prev = 1.0f64.min(schedule.start);
    for &r in &radii {
        if r <= prev {
            increments.push(Interval::ZERO);
            continue;
        }
        let lo = quad::integrate_default(
            |t| {
                let g = model.eval(t).expect("t > 0");
                let gphi = model.eval(m.radius_law.radius(t)).expect("phi > 0");
                area * t.powi(d - 1) * (g.lo / gphi.hi) * m.density.eval(t)
            },
            prev,
            r,
        )?
        .value;
        let hi = quad::integrate_default(
            |t| {
                let g = model.eval(t).expect("t > 0");
                let gphi = model.eval(m.radius_law.radius(t)).expect("phi > 0");
                area * t.powi(d - 1) * (g.hi / gphi.lo) * m.density.eval(t)
            },
            prev,
            r,
        )?
        .value;
        increments.push(Interval::new(lo, hi.max(lo)));
        prev = r;
    }
    Ok(series_verdict_from(&radii, &increments, schedule.factor))
}

// Local mirror of the criteria-module assembly (kept private there).
fn series_verdict_from(radii: &[f64], increments: &[Interval], factor: f64) -> SeriesVerdict {
    crate::criteria::assemble_series_verdict(radii, increments, factor)
}

/// Expected Wiener sum: `Σ_m G(diam Q_m) μ(Q_m) / G(φ(x_m))` with cube
/// centers `x_m`, accumulated per generation. Classification must agree
/// with [`percolation_integral`] for admissible intensities.
pub fn expected_wiener_sum(
    m: &IntensityModel,
    model: &GreenModel,
    truncation: &RadiusSchedule,
) -> Result<SeriesVerdict> {
    if matches!(
        model.exponent().kind(),
        crate::exponents::ExponentKind::Custom(_)
    ) {
        return Err(Error::unsupported(
            "expected Wiener sum requires a subordinate-Brownian kind",
        ));
    }
    let d = model.dimension();
    let mut p_start = vec![0.0; d];
    p_start[0] = truncation.start;
    let mut p_end = vec![0.0; d];
    p_end[0] = truncation.max_radius();
    let j_min = cube_containing(&p_start)?.generation;
    let j_max = cube_containing(&p_end)?.generation;
    if j_max - j_min + 1 < 5 {
        return Err(Error::config("schedule spans fewer than 5 cube generations"));
    }
    let mut radii = Vec::new();
    let mut increments = Vec::new();
    for j in j_min..=j_max {
        let cubes = whitney_decompose(d, j, j)?;
        let mut inc = Interval::ZERO;
        for q in &cubes {
            inc = inc.add(&expected_cube_term(m, model, &q)?);
        }
        radii.push(3f64.powi(j) / 2.0);
        increments.push(inc);
    }
    Ok(series_verdict_from(&radii, &increments, 3.0))
}

fn expected_cube_term(m: &IntensityModel, model: &GreenModel, q: &WhitneyCube) -> Result<Interval> {
    let center_norm = crate::geometry::norm(&q.center);
    let vol = q.side.powi(q.dimension() as i32);
    let mu_q = m.density.eval(center_norm) * vol;
    let g_diam = model.eval(q.diameter())?;
    let g_phi = model.eval(m.radius_law.radius(center_norm))?;
    Ok(g_diam.div_pos(&g_phi).scale(mu_q))
}

/// Monte Carlo check of the expected capacity of `A_P ∩ Q`.
#[derive(Debug, Clone, Serialize)]
pub struct CapExpectationReport {
    /// Mean subadditive (sum of ball capacities) proxy.
    pub mean_upper: f64,
    /// Mean packed-subfamily proxy.
    pub mean_lower: f64,
    /// Comparison quantity `μ(Q)/G(φ(x_Q))`.
    pub target: f64,
    /// Smallest constant making both comparison inequalities hold.
    pub c4: f64,
    pub seeds: usize,
}

/// Estimate `E[Cap(A_P ∩ Q)]` over `seeds` independent realizations and
/// compare with `μ(Q)/G(φ(x_Q))`.
pub fn empirical_capacity_expectation(
    m: &IntensityModel,
    model: &GreenModel,
    cube: &WhitneyCube,
    seeds: usize,
    base_seed: u64,
) -> Result<CapExpectationReport> {
    if seeds < 50 {
        return Err(Error::config("need at least 50 seeds"));
    }
    if model.eval_exact(1.0).is_none() {
        return Err(Error::unsupported(
            "empirical capacity expectation needs an exact-mode model",
        ));
    }
    let d = cube.dimension();
    let center_norm = crate::geometry::norm(&cube.center);
    let phi_q = m.radius_law.radius(center_norm);
    let eta = model.capacity_equivalent_radius(phi_q)?.hi;
    let pack_dist = 4.0 * eta;

    let mut sum_upper = 0.0;
    let mut sum_lower = 0.0;
    for s in 0..seeds {
        let pts = sample_points_in_cube(m, cube, base_seed.wrapping_add(s as u64))?;
        let mut upper = 0.0;
        let mut lower = 0.0;
        let mut accepted: Vec<&Vec<f64>> = Vec::new();
        for p in &pts {
            let r = m.radius_law.radius(crate::geometry::norm(p));
            let cap = model.capacity_ball(r)?.exact.unwrap();
            upper += cap;
            let inside = p
                .iter()
                .zip(&cube.center)
                .all(|(x, c)| (x - c).abs() + r <= cube.side / 2.0);
            if inside && accepted.iter().all(|a| crate::geometry::dist(a, p) >= pack_dist) {
                accepted.push(p);
                lower += cap;
            }
        }
        sum_upper += upper;
        sum_lower += lower;
    }
    let mean_upper = sum_upper / seeds as f64;
    let mean_lower = sum_lower / seeds as f64;
    let target = m.density.eval(center_norm) * cube.side.powi(d as i32)
        / model.eval_exact(phi_q).unwrap();
    let c4 = (mean_upper / target).max(target / mean_lower.max(1e-300)).max(1.0);
    Ok(CapExpectationReport {
        mean_upper,
        mean_lower,
        target,
        c4,
        seeds,
    })
}

/// Poisson points of the intensity restricted to a cube, by thinning.
fn sample_points_in_cube(
    m: &IntensityModel,
    cube: &WhitneyCube,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    let d = cube.dimension();
    let h = cube.side / 2.0;
    // Distance to the origin over the cube spans [dist, dist + diam].
    let lo = cube.dist_to_origin().max(1e-12);
    let hi = lo + cube.diameter();
    let mu_max = m.density.sup_on(lo, hi);
    let lambda = mu_max * cube.side.powi(d as i32);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    if lambda <= 0.0 {
        return Ok(out);
    }
    let n = Poisson::new(lambda)
        .map_err(|e| Error::Numeric(format!("poisson sampler: {e}")))?
        .sample(&mut rng) as usize;
    for _ in 0..n {
        let p: Vec<f64> = cube
            .center
            .iter()
            .map(|c| c - h + 2.0 * h * uniform_open(&mut rng))
            .collect();
        let t = crate::geometry::norm(&p);
        if uniform_open(&mut rng) < m.density.eval(t) / mu_max {
            out.push(p);
        }
    }
    Ok(out)
}

/// Upper-proxy Wiener sum of one realization (subadditive per-cube
/// capacities), for zero-one-law trend checks.
pub fn realization_wiener_sum(
    realization: &PoissonRealization,
    model: &GreenModel,
) -> Result<f64> {
    let mut sum = 0.0;
    for b in &realization.balls {
        let cube = cube_containing(&b.center)?;
        let cap = model.capacity_interval(b.radius)?.hi;
        sum += model.eval(cube.diameter())?.hi * cap;
    }
    Ok(sum)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::criteria::Classification as C;

    fn stable_model() -> (CharacteristicExponent, GreenModel) {
        let e = CharacteristicExponent::stable(3, 1.5).unwrap();
        let m = GreenModel::exact(e.clone()).unwrap();
        (e, m)
    }

    #[test]
    fn power_law_intensity_validates() {
        let (e, g) = stable_model();
        let m = IntensityModel::new(
            RadialDensity::Power { coeff: 1.0, exponent: 3.0 },
            RadiusLaw::Power { coeff: 0.3, exponent: 1.0 },
            16.0,
        )
        .unwrap();
        let rep = validate_intensity(&m, &e, &g, (1.0, 1e4)).unwrap();
        assert!(rep.pass(), "{rep:?}");
        // Oscillation of |x|^{-3} over the half-ball is 2^3 = 8 on each side.
        assert!(rep.smallest_admissible_c_p >= 8.0 * (1.0 - 1e-9));
    }

    #[test]
    fn oversized_radius_law_fails() {
        let (e, g) = stable_model();
        let m = IntensityModel::new(
            RadialDensity::Power { coeff: 1.0, exponent: 3.0 },
            RadiusLaw::Power { coeff: 1.0, exponent: 0.0 }, // φ = 1 > |x|/2 near 1
            16.0,
        )
        .unwrap();
        let rep = validate_intensity(&m, &e, &g, (1.0, 1e4)).unwrap();
        assert!(!rep.radius_bound_ok);
    }

    #[test]
    fn homogeneous_counts_match_mean() {
        let m = IntensityModel::new(
            RadialDensity::Power { coeff: 2.0, exponent: 0.0 },
            RadiusLaw::Constant(0.01),
            2.0,
        )
        .unwrap();
        let window = Annulus { inner: 1.0, outer: 2.0 };
        let mean = expected_count(&m, 3, window).unwrap();
        let runs = 400;
        let mut total = 0usize;
        for s in 0..runs {
            total += sample_realization(&m, 3, window, s).unwrap().balls.len();
        }
        let emp = total as f64 / runs as f64;
        let sigma = (mean / runs as f64).sqrt();
        assert!(
            (emp - mean).abs() < 4.0 * sigma + 0.05 * mean,
            "empirical {emp}, expected {mean}"
        );
    }

    #[test]
    fn empty_window_is_empty() {
        let m = IntensityModel::new(
            RadialDensity::Power { coeff: 1.0, exponent: 2.0 },
            RadiusLaw::Constant(0.01),
            2.0,
        )
        .unwrap();
        let r = sample_realization(&m, 3, Annulus { inner: 2.0, outer: 2.0 }, 7).unwrap();
        assert!(r.balls.is_empty());
    }

    #[test]
    fn realization_is_seed_deterministic() {
        let m = IntensityModel::new(
            RadialDensity::Power { coeff: 1.0, exponent: 1.0 },
            RadiusLaw::Power { coeff: 0.1, exponent: 1.0 },
            4.0,
        )
        .unwrap();
        let w = Annulus { inner: 1.0, outer: 4.0 };
        let a = sample_realization(&m, 3, w, 123).unwrap();
        let b = sample_realization(&m, 3, w, 123).unwrap();
        assert_eq!(a.balls, b.balls);
    }

    #[test]
    fn disjoint_windows_have_independent_counts() {
        // 2x2 contingency chi-square (1 dof) over seeds: median-split counts
        // in two disjoint windows. Critical value at p = 0.001 is 10.83.
        let m = IntensityModel::new(
            RadialDensity::Power { coeff: 6.0, exponent: 1.0 },
            RadiusLaw::Constant(0.01),
            4.0,
        )
        .unwrap();
        let w1 = Annulus { inner: 1.0, outer: 2.0 };
        let w2 = Annulus { inner: 2.0, outer: 4.0 };
        let seeds = 1000;
        let mut c1 = Vec::new();
        let mut c2 = Vec::new();
        for s in 0..seeds {
            // Different sub-seeds: windows are sampled independently.
            c1.push(sample_realization(&m, 3, w1, 2 * s).unwrap().balls.len() as f64);
            c2.push(sample_realization(&m, 3, w2, 2 * s + 1).unwrap().balls.len() as f64);
        }
        let med = |v: &Vec<f64>| {
            let mut s = v.clone();
            s.sort_by(f64::total_cmp);
            s[s.len() / 2]
        };
        let (m1, m2) = (med(&c1), med(&c2));
        let mut table = [[0.0f64; 2]; 2];
        for i in 0..seeds as usize {
            let a = usize::from(c1[i] > m1);
            let b = usize::from(c2[i] > m2);
            table[a][b] += 1.0;
        }
        let n: f64 = seeds as f64;
        let row: Vec<f64> = (0..2).map(|i| table[i][0] + table[i][1]).collect();
        let col: Vec<f64> = (0..2).map(|j| table[0][j] + table[1][j]).collect();
        let mut chi2 = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                let e = row[i] * col[j] / n;
                chi2 += (table[i][j] - e).powi(2) / e;
            }
        }
        assert!(chi2 < 10.83, "chi-square {chi2}");
    }

    #[test]
    fn chi_square_subcell_counts() {
        // Homogeneous density: counts over 20 radial sub-cells follow the
        // expected profile (19 dof, p = 0.001 critical value 43.8).
        let m = IntensityModel::new(
            RadialDensity::Power { coeff: 3.0, exponent: 0.0 },
            RadiusLaw::Constant(0.001),
            2.0,
        )
        .unwrap();
        let cells = 20;
        let mut observed = vec![0.0f64; cells];
        let mut expected = vec![0.0f64; cells];
        let seeds = 300;
        for k in 0..cells {
            let w = Annulus {
                inner: 1.0 + k as f64 * 0.05,
                outer: 1.0 + (k + 1) as f64 * 0.05,
            };
            expected[k] = expected_count(&m, 3, w).unwrap() * seeds as f64;
            for s in 0..seeds {
                observed[k] +=
                    sample_realization(&m, 3, w, (k * 10_000 + s) as u64).unwrap().balls.len() as f64;
            }
        }
        let chi2: f64 = observed
            .iter()
            .zip(&expected)
            .map(|(o, e)| (o - e).powi(2) / e)
            .sum();
        assert!(chi2 < 43.8, "chi-square {chi2}");
    }

    #[test]
    fn percolation_power_integrand_thresholds() {
        // Stable(1.5), φ = |x|^{-γ}, μ = |x|^{-s}: the integrand decays like
        // r^{0.5 - 1.5γ - s}; convergence iff (γ+1)(d−β) + s > d.
        let (_, g) = stable_model();
        let sched = RadiusSchedule::doubling(1.0, 9);
        let mk = |gamma: f64, s: f64| {
            IntensityModel::new(
                RadialDensity::Power { coeff: 1.0, exponent: s },
                RadiusLaw::Power { coeff: 0.25, exponent: gamma },
                64.0,
            )
            .unwrap()
        };
        let conv = percolation_integral(&mk(1.0, 1.5), &g, &sched).unwrap();
        assert_eq!(conv.classification, C::Converges);
        let div = percolation_integral(&mk(0.0, 0.0), &g, &sched).unwrap();
        assert_eq!(div.classification, C::Diverges);
    }

    #[test]
    fn compact_support_converges() {
        let (_, g) = stable_model();
        let sched = RadiusSchedule::doubling(1.0, 8);
        let m = IntensityModel::new(
            RadialDensity::Table {
                radii: vec![1.0, 2.0, 4.0],
                values: vec![1.0, 0.3, 0.0],
            },
            RadiusLaw::Power { coeff: 0.25, exponent: 1.0 },
            8.0,
        )
        .unwrap();
        let v = percolation_integral(&m, &g, &sched).unwrap();
        assert_eq!(v.classification, C::Converges);
    }

    #[test]
    fn expected_wiener_single_generation_count() {
        let (_, g) = stable_model();
        let m = IntensityModel::new(
            RadialDensity::Power { coeff: 1.0, exponent: 3.0 },
            RadiusLaw::Power { coeff: 0.1, exponent: 1.0 },
            16.0,
        )
        .unwrap();
        let cubes = whitney_decompose(3, 2, 2).unwrap();
        assert_eq!(cubes.len(), 26);
        let mut total = 0.0;
        for q in &cubes {
            total += expected_cube_term(&m, &g, q).unwrap().mid();
        }
        assert!(total > 0.0);
    }

    #[test]
    fn zero_density_gives_zero_sum() {
        let (_, g) = stable_model();
        let m = IntensityModel::new(
            RadialDensity::Power { coeff: 0.0, exponent: 1.0 },
            RadiusLaw::Power { coeff: 0.1, exponent: 1.0 },
            4.0,
        )
        .unwrap();
        let cube = whitney_decompose(3, 3, 3).unwrap().into_iter().next().unwrap();
        let rep = empirical_capacity_expectation(&m, &g, &cube, 60, 5).unwrap();
        assert_eq!(rep.mean_upper, 0.0);
    }

    #[test]
    fn rare_event_linear_regime() {
        // With E[points per cube] << 1 the subadditive proxy's mean is
        // exactly μ(Q)·Cap(ball), which is the comparison target under the
        // capacity convention Cap = 1/G.
        let (_, g) = stable_model();
        let m = IntensityModel::new(
            RadialDensity::Power { coeff: 5e-5, exponent: 0.0 },
            RadiusLaw::Constant(0.05),
            4.0,
        )
        .unwrap();
        let cube = whitney_decompose(3, 3, 3).unwrap().into_iter().next().unwrap();
        let rep = empirical_capacity_expectation(&m, &g, &cube, 4000, 7).unwrap();
        assert!(
            (rep.mean_upper - rep.target).abs() < 0.35 * rep.target,
            "upper {} vs target {}",
            rep.mean_upper,
            rep.target
        );
    }

    #[test]
    fn too_few_seeds_rejected() {
        let (_, g) = stable_model();
        let m = IntensityModel::new(
            RadialDensity::Power { coeff: 1.0, exponent: 3.0 },
            RadiusLaw::Power { coeff: 0.1, exponent: 1.0 },
            4.0,
        )
        .unwrap();
        let cube = whitney_decompose(3, 3, 3).unwrap().into_iter().next().unwrap();
        assert!(empirical_capacity_expectation(&m, &g, &cube, 10, 1).is_err());
    }
}
