//! Avoidability classifiers.
//!
//! Whether a ball collection is avoidable is characterized by convergence of
//! capacity-weighted series and integrals. Finite computation cannot decide
//! convergence outright, so every test returns a three-valued
//! [`Classification`] backed by a growth certificate over a doubling
//! truncation schedule:
//!
//! - `Diverges` needs a fitted tail-increment exponent above
//!   [`DIVERGENCE_EXPONENT`];
//! - `Converges` needs the tail increments to decay geometrically (ratio
//!   below [`DECAY_RATIO_PER_DOUBLING`] per doubling) over the last four
//!   steps;
//! - anything else stays `Indeterminate`.
//!
//! In envelope mode the two endpoints of every interval sum are classified
//! separately and must agree, otherwise the verdict is `Indeterminate`.

use std::collections::{BTreeMap, HashMap};

use serde::Serialize;

use crate::error::Error;
use crate::exponents::{CharacteristicExponent, ExponentKind};
use crate::geometry::{
    check_separation, cube_containing, BallFamily, RadiusLaw, RegularSpec, SeparationReport,
    WhitneyCube,
};
use crate::green::{GreenMode, GreenModel};
use crate::interval::Interval;
use crate::quad;
use crate::Result;

/// Fitted tail exponent above which a sum is certified divergent.
pub const DIVERGENCE_EXPONENT: f64 = 0.05;
/// Required per-doubling decay of tail increments for a convergence
/// certificate.
pub const DECAY_RATIO_PER_DOUBLING: f64 = 0.95;

/// Three-valued convergence outcome.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Classification {
    Converges,
    Diverges,
    Indeterminate,
}

/// Geometric truncation schedule: radii `start · factor^k`, `k = 0..steps`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct RadiusSchedule {
    pub start: f64,
    pub factor: f64,
    pub steps: usize,
}

impl RadiusSchedule {
    pub fn doubling(start: f64, steps: usize) -> Self {
        RadiusSchedule {
            start,
            factor: 2.0,
            steps,
        }
    }

    pub fn radii(&self) -> Vec<f64> {
        (0..self.steps)
            .map(|k| self.start * self.factor.powi(k as i32))
            .collect()
    }

    pub fn max_radius(&self) -> f64 {
        self.start * self.factor.powi(self.steps as i32 - 1)
    }

    fn validate(&self) -> Result<()> {
        if self.start <= 0.0 || self.factor <= 1.0 {
            return Err(Error::config("schedule needs start > 0 and factor > 1"));
        }
        if self.steps < 5 {
            return Err(Error::Config(format!(
                "schedule has {} radii; need at least 5 (4 growth steps)",
                self.steps
            )));
        }
        Ok(())
    }
}

/// Verdict of one series/integral test.
#[derive(Debug, Clone, Serialize)]
pub struct SeriesVerdict {
    /// `(truncation radius, partial sum)` along the schedule.
    pub partial_sums: Vec<(f64, Interval)>,
    /// Fitted tail-increment exponent (on interval midpoints).
    pub growth_exponent: f64,
    pub classification: Classification,
    /// Total-sum interval at the last truncation.
    pub envelope: Interval,
}

/// Assemble a verdict from per-annulus interval increments (shared with the
/// Poisson module).
pub(crate) fn assemble_series_verdict(
    radii: &[f64],
    increments: &[Interval],
    factor: f64,
) -> SeriesVerdict {
    SeriesVerdict::from_increments(radii, increments, factor)
}

impl SeriesVerdict {
    fn from_increments(radii: &[f64], increments: &[Interval], factor: f64) -> Self {
        let mut sums = Vec::with_capacity(radii.len());
        let mut acc = Interval::ZERO;
        // First radius gets the sum up to it (first "increment" bucket).
        for (r, inc) in radii.iter().zip(increments) {
            acc = acc.add(inc);
            sums.push((*r, acc));
        }
        let tail_r = &radii[1..];
        let lo: Vec<f64> = increments[1..].iter().map(|i| i.lo).collect();
        let hi: Vec<f64> = increments[1..].iter().map(|i| i.hi).collect();
        let mid: Vec<f64> = increments[1..].iter().map(|i| i.mid()).collect();
        let c_lo = classify_tail(tail_r, &lo, factor);
        let c_hi = classify_tail(tail_r, &hi, factor);
        let classification = if c_lo == c_hi {
            c_lo
        } else {
            Classification::Indeterminate
        };
        SeriesVerdict {
            partial_sums: sums,
            growth_exponent: fitted_exponent(tail_r, &mid),
            classification,
            envelope: acc,
        }
    }
}

fn fitted_exponent(radii: &[f64], increments: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = radii
        .iter()
        .zip(increments)
        .filter(|(_, &d)| d > 0.0)
        .map(|(&r, &d)| (r.ln(), d.ln()))
        .collect();
    if pts.len() < 2 {
        return f64::NEG_INFINITY;
    }
    // Least squares over the tail half (at least 4 points).
    let take = pts.len().min(pts.len().div_ceil(2).max(4));
    let tail = &pts[pts.len() - take..];
    let n = tail.len() as f64;
    let sx: f64 = tail.iter().map(|p| p.0).sum();
    let sy: f64 = tail.iter().map(|p| p.1).sum();
    let sxx: f64 = tail.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = tail.iter().map(|p| p.0 * p.1).sum();
    let denom = n * sxx - sx * sx;
    if denom <= 0.0 {
        return f64::NEG_INFINITY;
    }
    (n * sxy - sx * sy) / denom
}

/// Classify annulus increments `Δ_k` collected at radii `R_k = R_0 f^k`.
fn classify_tail(radii: &[f64], increments: &[f64], factor: f64) -> Classification {
    debug_assert_eq!(radii.len(), increments.len());
    if increments.iter().all(|&d| d <= 0.0) {
        // Nothing left in the tail: the sum has stabilized.
        return Classification::Converges;
    }
    let slope = fitted_exponent(radii, increments);
    if slope > DIVERGENCE_EXPONENT && *increments.last().unwrap() > 0.0 {
        return Classification::Diverges;
    }
    // Geometric decay certificate on the last four steps, expressed per
    // doubling so the threshold is schedule-independent.
    let conv_exponent = DECAY_RATIO_PER_DOUBLING.ln() / 2f64.ln();
    let n = increments.len();
    if n >= 4 {
        let decaying = (n - 4..n).all(|k| {
            let cur = increments[k];
            if cur <= 0.0 {
                return true;
            }
            if k == 0 {
                return false;
            }
            let prev = increments[k - 1];
            if prev <= 0.0 {
                return false;
            }
            (cur / prev).ln() / factor.ln() < conv_exponent
        });
        if decaying {
            return Classification::Converges;
        }
    }
    Classification::Indeterminate
}

/// Green-function ratio `G(num) / G(den)` as an interval.
fn green_ratio(model: &GreenModel, num: f64, den: f64) -> Interval {
    match model.eval_exact(num) {
        Some(g) => Interval::point(g / model.eval_exact(den).unwrap()),
        None => {
            let a = model.eval(num).expect("num > 0");
            let b = model.eval(den).expect("den > 0");
            a.div_pos(&b)
        }
    }
}

/// Per-annulus interval sums of `term(center, |center|, radius)` over a
/// schedule of truncation radii.
fn annulus_sums<F>(family: &BallFamily, schedule: &RadiusSchedule, term: F) -> Vec<Interval>
where
    F: Fn(&[f64], f64, f64) -> Interval + Sync,
{
    let radii = schedule.radii();
    let mut out = Vec::with_capacity(radii.len());
    let mut prev = 0.0;
    for &r in &radii {
        let lo = family.par_sum_terms(r, |c, n, rad| {
            if n > prev {
                term(c, n, rad).lo
            } else {
                0.0
            }
        });
        let hi = family.par_sum_terms(r, |c, n, rad| {
            if n > prev {
                term(c, n, rad).hi
            } else {
                0.0
            }
        });
        out.push(Interval::new(lo, hi.max(lo)));
        prev = r;
    }
    out
}

/// Series test: partial sums of `G(|x_n|) / G(r_n)` over the truncation
/// schedule.
pub fn series_criterion(
    family: &BallFamily,
    model: &GreenModel,
    schedule: &RadiusSchedule,
) -> Result<SeriesVerdict> {
    schedule.validate()?;
    let radii = schedule.radii();
    let increments = annulus_sums(family, schedule, |_c, n, r| green_ratio(model, n, r));
    Ok(SeriesVerdict::from_increments(
        &radii,
        &increments,
        schedule.factor,
    ))
}

/// The same test expressed through the exponent alone:
/// terms `r^d ψ(1/r) / (|x|^d ψ(1/|x|))`.
pub fn psi_form_criterion(
    family: &BallFamily,
    exp: &CharacteristicExponent,
    schedule: &RadiusSchedule,
) -> Result<SeriesVerdict> {
    schedule.validate()?;
    let d = exp.dimension() as i32;
    let radii = schedule.radii();
    let increments = annulus_sums(family, schedule, |_c, n, r| {
        Interval::point(r.powi(d) * exp.psi(1.0 / r) / (n.powi(d) * exp.psi(1.0 / n)))
    });
    Ok(SeriesVerdict::from_increments(
        &radii,
        &increments,
        schedule.factor,
    ))
}

/// Integral test for regularly located families:
/// `∫ r^{d-1} G(r) / G(φ(r)) dr` accumulated over the schedule.
pub fn integral_criterion(
    law: &RadiusLaw,
    model: &GreenModel,
    schedule: &RadiusSchedule,
) -> Result<SeriesVerdict> {
    schedule.validate()?;
    if !law.is_nonincreasing() {
        return Err(Error::domain("radius law must be nonincreasing"));
    }
    let d = model.dimension() as i32;
    let radii = schedule.radii();
    let mut increments = Vec::with_capacity(radii.len());
    let mut prev = 1.0f64.min(schedule.start);
    for &r in &radii {
        if r <= prev {
            increments.push(Interval::ZERO);
            continue;
        }
        let lo = quad::integrate_default(
            |t| t.powi(d - 1) * green_ratio(model, t, law.radius(t)).lo,
            prev,
            r,
        )?
        .value;
        let hi = if model.mode() == GreenMode::Exact {
            lo
        } else {
            quad::integrate_default(
                |t| t.powi(d - 1) * green_ratio(model, t, law.radius(t)).hi,
                prev,
                r,
            )?
            .value
        };
        increments.push(Interval::new(lo, hi.max(lo)));
        prev = r;
    }
    Ok(SeriesVerdict::from_increments(
        &radii,
        &increments,
        schedule.factor,
    ))
}

/// Matched-window comparison of the lattice series and the integral.
#[derive(Debug, Clone, Serialize)]
pub struct ConsistencyReport {
    pub windows: Vec<f64>,
    pub series_sums: Vec<f64>,
    pub integrals: Vec<f64>,
    pub ratios: Vec<f64>,
    /// max ratio / min ratio across the windows.
    pub band: f64,
}

/// Compare `Σ_{|x_n| ≤ W} G(|x_n|)/G(φ(|x_n|))` with
/// `∫_1^W r^{d-1} G(r)/G(φ(r)) dr` over growing windows. The two quantities
/// are comparable, not equal; the report records the ratio band.
pub fn series_integral_consistency(
    family: &BallFamily,
    law: &RadiusLaw,
    model: &GreenModel,
    windows: &[f64],
) -> Result<ConsistencyReport> {
    if windows.len() < 2 {
        return Err(Error::config("need at least two windows"));
    }
    let d = model.dimension() as i32;
    let mut series_sums = Vec::new();
    let mut integrals = Vec::new();
    let mut ratios = Vec::new();
    for &w in windows {
        let s = family.par_sum_terms(w, |_c, n, r| green_ratio(model, n, r).mid());
        let i = quad::integrate_default(
            |t| t.powi(d - 1) * green_ratio(model, t, law.radius(t)).mid(),
            1.0,
            w,
        )?
        .value;
        if i <= 0.0 {
            return Err(Error::numeric("integral window produced no mass"));
        }
        series_sums.push(s);
        integrals.push(i);
        ratios.push(s / i);
    }
    let max = ratios.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let min = ratios.iter().fold(f64::INFINITY, |a, &b| a.min(b));
    Ok(ConsistencyReport {
        windows: windows.to_vec(),
        series_sums,
        integrals,
        ratios,
        band: max / min,
    })
}

/// Region accumulator for the Wiener-type sums.
///
/// Per region (Whitney cube or annulus) three quantities are tracked:
/// - `upper`: subadditive sum of full-ball capacities (valid upper bound);
/// - `max_piece`: largest wholly-inside single-ball capacity (valid lower
///   bound by monotonicity);
/// - `packed`: sum over a greedily packed subfamily whose
///   capacity-equivalent enlargements are disjoint. Superadditivity for such
///   packings makes the true capacity comparable to this sum, so its growth
///   exponent (not its constant) is what classification uses.
#[derive(Debug, Default, Clone)]
struct RegionCap {
    upper: f64,
    max_piece: f64,
    packed: f64,
    pack_cells: HashMap<Vec<i64>, Vec<Vec<f64>>>,
    pack_scale: f64,
}

impl RegionCap {
    fn add_ball(&mut self, center: &[f64], cap: f64, eta: f64, wholly_inside: bool) {
        self.upper += cap;
        if !wholly_inside {
            return;
        }
        self.max_piece = self.max_piece.max(cap);
        // Greedy packing at spacing 4η via a spatial hash.
        if self.pack_scale == 0.0 {
            self.pack_scale = (4.0 * eta).max(1e-12);
        }
        let s = self.pack_scale;
        let key: Vec<i64> = center.iter().map(|&v| (v / s).floor() as i64).collect();
        let d = key.len();
        let mut blocked = false;
        let mut offs = vec![-1i64; d];
        'cells: loop {
            let k: Vec<i64> = key.iter().zip(&offs).map(|(a, b)| a + b).collect();
            if let Some(others) = self.pack_cells.get(&k) {
                for o in others {
                    let dist2: f64 = o.iter().zip(center).map(|(a, b)| (a - b) * (a - b)).sum();
                    if dist2 < s * s {
                        blocked = true;
                        break 'cells;
                    }
                }
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
        if !blocked {
            self.pack_cells.entry(key).or_default().push(center.to_vec());
            self.packed += cap;
        }
    }
}

fn reject_custom_kind(model: &GreenModel, what: &str) -> Result<()> {
    if matches!(model.exponent().kind(), ExponentKind::Custom(_)) {
        return Err(Error::Unsupported(format!(
            "{what} requires a subordinate-Brownian kind (stable, stable sum, subordinate BM)"
        )));
    }
    Ok(())
}

/// Classify from region accumulators grouped into schedule-ordered buckets.
fn wiener_verdict(
    model: &GreenModel,
    buckets: Vec<(f64, f64, Vec<RegionCap>)>, // (radius, green scale radius, regions)
    factor: f64,
) -> Result<SeriesVerdict> {
    let mut radii = Vec::new();
    let mut reported = Vec::new();
    let mut packed_inc = Vec::new();
    let mut upper_inc = Vec::new();
    for (radius, g_radius, regions) in buckets {
        let g = model.eval(g_radius)?;
        let mut lo = 0.0;
        let mut hi = 0.0;
        let mut packed = 0.0;
        for r in &regions {
            lo += r.max_piece;
            hi += r.upper;
            packed += r.packed;
        }
        radii.push(radius);
        reported.push(Interval::new(g.lo * lo, g.hi * hi));
        packed_inc.push(g.lo * packed);
        upper_inc.push(g.hi * hi);
    }
    // Certified numeric envelope for the reported sums.
    let mut sums = Vec::new();
    let mut acc = Interval::ZERO;
    for (r, inc) in radii.iter().zip(&reported) {
        acc = acc.add(inc);
        sums.push((*r, acc));
    }
    // Classification from the quasiadditive pair (packed lower route,
    // subadditive upper route).
    let tail = &radii[1..];
    let c_lo = classify_tail(tail, &packed_inc[1..], factor);
    let c_hi = classify_tail(tail, &upper_inc[1..], factor);
    let classification = if c_lo == c_hi {
        c_lo
    } else {
        Classification::Indeterminate
    };
    let mids: Vec<f64> = reported[1..].iter().map(|i| i.mid()).collect();
    Ok(SeriesVerdict {
        partial_sums: sums,
        growth_exponent: fitted_exponent(tail, &mids),
        classification,
        envelope: acc,
    })
}

/// Wiener-type sum over Whitney cubes: `Σ_m G(diam Q_m) Cap(F ∩ Q_m)`.
///
/// Partial sums are accumulated per cube generation (a ×3 schedule); the
/// `truncation` schedule fixes the covered radius range.
pub fn wiener_whitney_sum(
    family: &BallFamily,
    model: &GreenModel,
    truncation: &RadiusSchedule,
) -> Result<SeriesVerdict> {
    truncation.validate()?;
    reject_custom_kind(model, "wiener_whitney_sum")?;
    let r_max = truncation.max_radius();
    let j_min = cube_containing(&first_axis_point(family.dimension(), truncation.start))?.generation;
    let j_max = cube_containing(&first_axis_point(family.dimension(), r_max))?.generation;
    if j_max - j_min + 1 < 5 {
        return Err(Error::config(
            "truncation schedule spans fewer than 5 cube generations",
        ));
    }

    let mut regions: BTreeMap<(i32, Vec<i8>), RegionCap> = BTreeMap::new();
    let mut err: Option<Error> = None;
    family.for_each_ball(r_max, |c, n, r| {
        if err.is_some() || n < truncation.start {
            return;
        }
        let cube = match cube_containing(c) {
            Ok(q) => q,
            Err(e) => {
                err = Some(e);
                return;
            }
        };
        if cube.generation < j_min || cube.generation > j_max {
            return;
        }
        let cap = match model.capacity_interval(r) {
            Ok(i) => i,
            Err(e) => {
                err = Some(e);
                return;
            }
        };
        let eta = match model.capacity_equivalent_radius(r) {
            Ok(i) => i.hi,
            Err(e) => {
                err = Some(e);
                return;
            }
        };
        let inside = ball_wholly_in_cube(&cube, c, r);
        regions
            .entry(cube.key())
            .or_default()
            // Upper endpoint of the capacity envelope keeps the upper sum a
            // true bound; the packed sum only needs comparability.
            .add_ball(c, cap.hi, eta, inside);
    });
    if let Some(e) = err {
        return Err(e);
    }

    let mut buckets = Vec::new();
    for j in j_min..=j_max {
        let side = 3f64.powi(j - 1);
        let diam = side * (family.dimension() as f64).sqrt();
        let outer = 3f64.powi(j) / 2.0;
        let gen_regions: Vec<RegionCap> = regions
            .iter()
            .filter(|((g, _), _)| *g == j)
            .map(|(_, v)| v.clone())
            .collect();
        buckets.push((outer, diam, gen_regions));
    }
    wiener_verdict(model, buckets, 3.0)
}

fn first_axis_point(d: usize, r: f64) -> Vec<f64> {
    let mut p = vec![0.0; d];
    p[0] = r;
    p
}

fn ball_wholly_in_cube(cube: &WhitneyCube, center: &[f64], radius: f64) -> bool {
    let h = cube.side / 2.0;
    center
        .iter()
        .zip(&cube.center)
        .all(|(x, c)| x - radius >= c - h && x + radius <= c + h)
}

/// Wiener criterion over dyadic-type annuli `A_n = {λ^n ≤ |x| < λ^{n+1}}`:
/// `Σ_n G(λ^n) Cap(E ∩ A_n)`.
pub fn wiener_annuli_sum(
    family: &BallFamily,
    model: &GreenModel,
    lambda: f64,
    truncation: &RadiusSchedule,
) -> Result<SeriesVerdict> {
    truncation.validate()?;
    if lambda <= 1.0 {
        return Err(Error::domain("annulus ratio lambda must exceed 1"));
    }
    reject_custom_kind(model, "wiener_annuli_sum")?;
    let r_max = truncation.max_radius();
    let n_min = truncation.start.ln().div_euclid(lambda.ln()) as i32;
    let n_max = (r_max.ln() / lambda.ln()).floor() as i32;
    if n_max - n_min + 1 < 5 {
        return Err(Error::config(
            "truncation schedule spans fewer than 5 annuli; lower lambda or widen it",
        ));
    }

    let mut regions: BTreeMap<i32, RegionCap> = BTreeMap::new();
    let mut err: Option<Error> = None;
    family.for_each_ball(r_max, |c, n, r| {
        if err.is_some() {
            return;
        }
        let band = (n.ln() / lambda.ln()).floor() as i32;
        if band < n_min || band > n_max {
            return;
        }
        let inner = lambda.powi(band);
        let outer = lambda.powi(band + 1);
        let cap = match model.capacity_interval(r) {
            Ok(i) => i,
            Err(e) => {
                err = Some(e);
                return;
            }
        };
        let eta = match model.capacity_equivalent_radius(r) {
            Ok(i) => i.hi,
            Err(e) => {
                err = Some(e);
                return;
            }
        };
        let inside = n - r >= inner && n + r < outer;
        regions.entry(band).or_default().add_ball(c, cap.hi, eta, inside);
    });
    if let Some(e) = err {
        return Err(e);
    }

    let mut buckets = Vec::new();
    for band in n_min..=n_max {
        let inner = lambda.powi(band);
        let outer = lambda.powi(band + 1);
        let region: Vec<RegionCap> = regions.get(&band).map(|r| vec![r.clone()]).unwrap_or_default();
        buckets.push((outer, inner, region));
    }
    wiener_verdict(model, buckets, lambda)
}

/// Whether `r ↦ r^d G(r)/G(φ(r))` grows without bound over the window.
#[derive(Debug, Clone, Serialize)]
pub struct RatioReport {
    pub unbounded: bool,
    pub fitted_exponent: f64,
    pub samples: Vec<(f64, f64)>,
}

/// Examine the unavoidability ratio on a log grid and fit its growth
/// exponent. An unbounded ratio makes a regularly located family
/// unavoidable regardless of the series verdict.
pub fn ratio_boundedness_test(
    law: &RadiusLaw,
    model: &GreenModel,
    window: (f64, f64),
) -> Result<RatioReport> {
    if window.0 <= 0.0 || window.1 <= window.0 {
        return Err(Error::domain("window must satisfy 0 < lo < hi"));
    }
    let d = model.dimension() as i32;
    let n = 200;
    let mut samples = Vec::with_capacity(n);
    for i in 0..n {
        let r = window.0 * (window.1 / window.0).powf(i as f64 / (n - 1) as f64);
        // Envelope constants cancel in the fitted slope.
        let h = r.powi(d) * green_ratio(model, r, law.radius(r)).mid();
        samples.push((r, h));
    }
    let slope = {
        let rs: Vec<f64> = samples.iter().map(|s| s.0).collect();
        let hs: Vec<f64> = samples.iter().map(|s| s.1).collect();
        fitted_exponent(&rs, &hs)
    };
    Ok(RatioReport {
        unbounded: slope > DIVERGENCE_EXPONENT,
        fitted_exponent: slope,
        samples,
    })
}

/// Avoidability outcome.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Verdict {
    Avoidable,
    Unavoidable,
    Indeterminate,
}

/// Which rule produced the verdict.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Basis {
    /// Convergent hitting-probability series.
    SeriesConverges,
    /// Divergent series together with the separation condition.
    SeriesDivergesWithSeparation,
    /// Regularly located family decided by the integral test.
    RegularIntegral,
    /// Regularly located family with unbounded capacity ratio.
    RatioUnbounded,
    /// No rule fired.
    None,
}

/// Full classification record.
#[derive(Debug, Clone, Serialize)]
pub struct AvoidabilityVerdict {
    pub verdict: Verdict,
    pub basis: Basis,
    pub series: SeriesVerdict,
    pub separation: Option<SeparationReport>,
    pub integral: Option<SeriesVerdict>,
    pub ratio: Option<RatioReport>,
}

/// Knobs for [`classify`].
#[derive(Debug, Clone)]
pub struct ClassifyOptions {
    pub schedule: RadiusSchedule,
    /// Threshold `c0` for the separation infimum.
    pub separation_threshold: f64,
    /// Regular-location data, when the family has it.
    pub regular: Option<RegularSpec>,
}

impl ClassifyOptions {
    pub fn new(schedule: RadiusSchedule) -> Self {
        ClassifyOptions {
            schedule,
            separation_threshold: 1e-9,
            regular: None,
        }
    }
}

/// Decide avoidability from the applicable criteria.
///
/// - A convergence certificate (series, or integral for regularly located
///   families) yields `Avoidable`.
/// - A divergence certificate yields `Unavoidable` only when paired with the
///   separation condition, a regular location, or an unbounded capacity
///   ratio; a divergent series with failing separation stays
///   `Indeterminate` (a separation condition is genuinely required).
pub fn classify(
    family: &BallFamily,
    exp: &CharacteristicExponent,
    model: &GreenModel,
    options: &ClassifyOptions,
) -> Result<AvoidabilityVerdict> {
    let series = series_criterion(family, model, &options.schedule)?;
    let mut integral = None;
    let mut ratio = None;
    let mut separation = None;

    if let Some(reg) = &options.regular {
        integral = Some(integral_criterion(&reg.law, model, &options.schedule)?);
        ratio = Some(ratio_boundedness_test(
            &reg.law,
            model,
            (options.schedule.start, options.schedule.max_radius()),
        )?);
    }

    if series.classification == Classification::Converges {
        return Ok(AvoidabilityVerdict {
            verdict: Verdict::Avoidable,
            basis: Basis::SeriesConverges,
            series,
            separation,
            integral,
            ratio,
        });
    }

    if let Some(int) = &integral {
        match int.classification {
            Classification::Converges => {
                return Ok(AvoidabilityVerdict {
                    verdict: Verdict::Avoidable,
                    basis: Basis::RegularIntegral,
                    series,
                    separation,
                    integral,
                    ratio,
                });
            }
            Classification::Diverges => {
                return Ok(AvoidabilityVerdict {
                    verdict: Verdict::Unavoidable,
                    basis: Basis::RegularIntegral,
                    series,
                    separation,
                    integral,
                    ratio,
                });
            }
            Classification::Indeterminate => {}
        }
    }
    if let Some(r) = &ratio {
        if r.unbounded {
            return Ok(AvoidabilityVerdict {
                verdict: Verdict::Unavoidable,
                basis: Basis::RatioUnbounded,
                series,
                separation,
                integral,
                ratio,
            });
        }
    }

    if series.classification == Classification::Diverges {
        let rep = check_separation(
            family,
            exp,
            model,
            options.schedule.max_radius(),
            options.separation_threshold,
        )?;
        let pass = rep.pass;
        separation = Some(rep);
        if pass {
            return Ok(AvoidabilityVerdict {
                verdict: Verdict::Unavoidable,
                basis: Basis::SeriesDivergesWithSeparation,
                series,
                separation,
                integral,
                ratio,
            });
        }
    }

    Ok(AvoidabilityVerdict {
        verdict: Verdict::Indeterminate,
        basis: Basis::None,
        series,
        separation,
        integral,
        ratio,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Ball;

    fn brownian_model() -> (CharacteristicExponent, GreenModel) {
        let e = CharacteristicExponent::brownian(3);
        let m = GreenModel::exact(e.clone()).unwrap();
        (e, m)
    }

    fn geometric_family() -> BallFamily {
        BallFamily::geometric_ray(3, 2.0, 2.0, RadiusLaw::Constant(1.0)).unwrap()
    }

    #[test]
    fn geometric_series_converges_to_one() {
        // Brownian, x_n = 2^n e1, r_n = 1: terms 2^{-n}, sum -> 1.
        let (_, m) = brownian_model();
        let sched = RadiusSchedule::doubling(2.0, 10);
        let v = series_criterion(&geometric_family(), &m, &sched).unwrap();
        assert_eq!(v.classification, Classification::Converges);
        let total = v.envelope.mid();
        assert!((total - (2.0 - 2f64.powi(-9))).abs() < 1e-9, "sum {total}");
    }

    #[test]
    fn psi_form_matches_series_on_geometric() {
        let (e, m) = brownian_model();
        let sched = RadiusSchedule::doubling(2.0, 8);
        let a = series_criterion(&geometric_family(), &m, &sched).unwrap();
        let b = psi_form_criterion(&geometric_family(), &e, &sched).unwrap();
        assert_eq!(a.classification, b.classification);
        // Stable exponents cancel exactly: identical sums.
        for (x, y) in a.partial_sums.iter().zip(&b.partial_sums) {
            assert!((x.1.mid() - y.1.mid()).abs() <= 1e-10 * x.1.mid().max(1.0));
        }
    }

    #[test]
    fn divergent_lattice_is_detected() {
        let (_, m) = brownian_model();
        let fam = BallFamily::lattice(3, 1.0, 1.0, RadiusLaw::Power { coeff: 0.2, exponent: 1.0 })
            .unwrap();
        let sched = RadiusSchedule::doubling(2.0, 6);
        let v = series_criterion(&fam, &m, &sched).unwrap();
        assert_eq!(v.classification, Classification::Diverges);
        assert!((v.growth_exponent - 1.0).abs() < 0.2, "slope {}", v.growth_exponent);
    }

    #[test]
    fn integral_thresholds_brownian() {
        // Integrand r^{1-γ}: diverges for γ = 1.5, converges for γ = 2.5.
        let (_, m) = brownian_model();
        let sched = RadiusSchedule::doubling(1.0, 10);
        let div = integral_criterion(&RadiusLaw::Power { coeff: 1.0, exponent: 1.5 }, &m, &sched)
            .unwrap();
        assert_eq!(div.classification, Classification::Diverges);
        let conv = integral_criterion(&RadiusLaw::Power { coeff: 1.0, exponent: 2.5 }, &m, &sched)
            .unwrap();
        assert_eq!(conv.classification, Classification::Converges);
    }

    #[test]
    fn integral_constant_radius_diverges_for_stable() {
        let e = CharacteristicExponent::stable(3, 1.0).unwrap();
        let m = GreenModel::exact(e).unwrap();
        let sched = RadiusSchedule::doubling(1.0, 8);
        let v = integral_criterion(&RadiusLaw::Constant(0.2), &m, &sched).unwrap();
        assert_eq!(v.classification, Classification::Diverges);
    }

    #[test]
    fn integral_rejects_increasing_law() {
        let (_, m) = brownian_model();
        let sched = RadiusSchedule::doubling(1.0, 6);
        let law = RadiusLaw::Power { coeff: 1.0, exponent: -0.5 };
        assert!(integral_criterion(&law, &m, &sched).is_err());
    }

    #[test]
    fn integral_classification_ignores_compact_perturbation() {
        // Changing φ on [1, K] shifts partial sums by a constant; the tail
        // classification is unchanged.
        let (_, m) = brownian_model();
        let sched = RadiusSchedule::doubling(16.0, 7);
        for gamma in [1.5, 2.5] {
            let law = RadiusLaw::Power { coeff: 1.0, exponent: gamma };
            let scaled = RadiusLaw::Power { coeff: 3.0, exponent: gamma };
            let a = integral_criterion(&law, &m, &sched).unwrap();
            let b = integral_criterion(&scaled, &m, &sched).unwrap();
            assert_eq!(a.classification, b.classification, "gamma {gamma}");
        }
    }

    #[test]
    fn schedule_too_short_is_config_error() {
        let (_, m) = brownian_model();
        let sched = RadiusSchedule::doubling(2.0, 3);
        assert!(matches!(
            series_criterion(&geometric_family(), &m, &sched),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn empty_family_converges() {
        let (_, m) = brownian_model();
        let fam = BallFamily::explicit(3, vec![]).unwrap();
        let sched = RadiusSchedule::doubling(2.0, 6);
        let v = wiener_whitney_sum(&fam, &m, &sched).unwrap();
        assert_eq!(v.classification, Classification::Converges);
        assert_eq!(v.envelope.hi, 0.0);
    }

    #[test]
    fn wiener_single_ball_converges() {
        let (_, m) = brownian_model();
        let fam = BallFamily::explicit(3, vec![Ball::new(vec![3.0, 0.0, 0.0], 0.5)]).unwrap();
        let sched = RadiusSchedule::doubling(1.0, 8);
        let v = wiener_annuli_sum(&fam, &m, 2.0, &sched).unwrap();
        assert_eq!(v.classification, Classification::Converges);
        assert!(v.envelope.lo > 0.0);
    }

    #[test]
    fn wiener_full_cube_terms_diverge() {
        // One ball inscribed in every cube of each generation: each term is
        // G(diam Q) Cap(ball ≍ cube) ≍ 1, so the sum grows linearly in the
        // number of generations.
        let (_, m) = brownian_model();
        let mut balls = Vec::new();
        for j in 1..=9 {
            let side = 3f64.powi(j - 1);
            for k in [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [-1.0, 0.0, 0.0]] {
                let center = vec![k[0] * side, k[1] * side, k[2] * side];
                balls.push(Ball::new(center, side * 0.45));
            }
        }
        let fam = BallFamily::explicit(3, balls).unwrap();
        let sched = RadiusSchedule { start: 1.0, factor: 3.0, steps: 9 };
        let v = wiener_whitney_sum(&fam, &m, &sched).unwrap();
        // Constant increments: not geometric decay, slope ~ 0. The honest
        // answer at this resolution is Indeterminate (log-type growth).
        assert_ne!(v.classification, Classification::Converges);
    }

    #[test]
    fn ratio_boundedness_powers() {
        let (_, m) = brownian_model();
        let unb = ratio_boundedness_test(
            &RadiusLaw::Power { coeff: 1.0, exponent: 1.0 },
            &m,
            (1.0, 1e4),
        )
        .unwrap();
        assert!(unb.unbounded);
        assert!((unb.fitted_exponent - 1.0).abs() < 0.05);
        let bounded = ratio_boundedness_test(
            &RadiusLaw::Power { coeff: 1.0, exponent: 3.0 },
            &m,
            (1.0, 1e4),
        )
        .unwrap();
        assert!(!bounded.unbounded);
        assert!((bounded.fitted_exponent + 1.0).abs() < 0.05);
    }

    #[test]
    fn classify_geometric_family_avoidable() {
        let (e, m) = brownian_model();
        let opts = ClassifyOptions::new(RadiusSchedule::doubling(2.0, 8));
        let v = classify(&geometric_family(), &e, &m, &opts).unwrap();
        assert_eq!(v.verdict, Verdict::Avoidable);
        assert_eq!(v.basis, Basis::SeriesConverges);
    }

    #[test]
    fn classify_dense_lattice_unavoidable_via_integral() {
        let (e, m) = brownian_model();
        let law = RadiusLaw::Power { coeff: 0.2, exponent: 1.0 };
        let fam = BallFamily::lattice(3, 1.0, 1.0, law).unwrap();
        let mut opts = ClassifyOptions::new(RadiusSchedule::doubling(2.0, 6));
        opts.regular = Some(RegularSpec {
            epsilon: 0.4,
            density_radius: 3f64.sqrt(),
            law,
        });
        let v = classify(&fam, &e, &m, &opts).unwrap();
        assert_eq!(v.verdict, Verdict::Unavoidable);
        assert_eq!(v.basis, Basis::RegularIntegral);
    }

    #[test]
    fn classify_divergent_with_failing_separation_is_indeterminate() {
        // Lattice with constant radii: series diverges but the separation
        // quantity decays, so with a strict threshold nothing fires.
        let (e, m) = brownian_model();
        let fam = BallFamily::lattice(3, 1.0, 1.0, RadiusLaw::Constant(0.2)).unwrap();
        let mut opts = ClassifyOptions::new(RadiusSchedule::doubling(2.0, 6));
        opts.separation_threshold = 1e3; // unattainable
        let v = classify(&fam, &e, &m, &opts).unwrap();
        assert_eq!(v.verdict, Verdict::Indeterminate);
        assert!(v.separation.is_some());
    }

    #[test]
    fn classify_divergent_with_separation_unavoidable() {
        let (e, m) = brownian_model();
        let fam = BallFamily::lattice(3, 1.0, 1.0, RadiusLaw::Constant(0.2)).unwrap();
        let mut opts = ClassifyOptions::new(RadiusSchedule::doubling(2.0, 6));
        opts.separation_threshold = 1e-9;
        let v = classify(&fam, &e, &m, &opts).unwrap();
        assert_eq!(v.verdict, Verdict::Unavoidable);
        assert_eq!(v.basis, Basis::SeriesDivergesWithSeparation);
    }
}
