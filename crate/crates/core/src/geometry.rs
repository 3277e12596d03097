//! Ball families, separation bookkeeping and the Whitney decomposition of
//! `R^d \ {0}`.
//!
//! Families may be explicit lists or procedural generators (lattices, rays
//! with geometrically growing centers). Generators are infinite; every
//! consumer works through an explicit truncation radius, either streaming
//! (`for_each_ball`, `par_sum_terms`) or materialized (`balls_within`).

use std::collections::{BTreeMap, HashMap};
use std::io::{Read as IoRead, Write as IoWrite};

use rayon::prelude::*;
use serde::Serialize;

use crate::error::Error;
use crate::exponents::CharacteristicExponent;
use crate::green::GreenModel;
use crate::interval::Interval;
use crate::Result;

pub fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub fn dist(x: &[f64], y: &[f64]) -> f64 {
    x.iter()
        .zip(y)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt()
}

/// Closed ball.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Ball {
    pub center: Vec<f64>,
    pub radius: f64,
}

impl Ball {
    pub fn new(center: Vec<f64>, radius: f64) -> Self {
        Ball { center, radius }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        dist(&self.center, x) <= self.radius
    }

    pub fn center_norm(&self) -> f64 {
        norm(&self.center)
    }
}

/// Radius law `r = φ(|x|)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum RadiusLaw {
    Constant(f64),
    /// `φ(t) = coeff · t^{-exponent}`.
    Power { coeff: f64, exponent: f64 },
}

impl RadiusLaw {
    pub fn radius(&self, t: f64) -> f64 {
        match *self {
            RadiusLaw::Constant(c) => c,
            RadiusLaw::Power { coeff, exponent } => coeff * t.powf(-exponent),
        }
    }

    /// True when the law never increases with distance.
    pub fn is_nonincreasing(&self) -> bool {
        match *self {
            RadiusLaw::Constant(_) => true,
            RadiusLaw::Power { exponent, .. } => exponent >= 0.0,
        }
    }
}

/// Regular location data: `2ε` separation, `R` uniform density, radius law.
#[derive(Debug, Clone, Copy)]
pub struct RegularSpec {
    pub epsilon: f64,
    pub density_radius: f64,
    pub law: RadiusLaw,
}

/// How the family's balls are produced.
#[derive(Debug, Clone)]
pub enum FamilySource {
    Explicit(Vec<Ball>),
    /// Centers `start · ratio^n · e1`, `n = 0, 1, 2, …`
    GeometricRay {
        start: f64,
        ratio: f64,
        law: RadiusLaw,
    },
    /// Scaled integer lattice, excluding centers with `|x| < min_norm`.
    Lattice {
        spacing: f64,
        min_norm: f64,
        law: RadiusLaw,
    },
}

/// A finite or procedurally generated collection of closed balls.
#[derive(Debug, Clone)]
pub struct BallFamily {
    dimension: usize,
    source: FamilySource,
}

impl BallFamily {
    pub fn explicit(dimension: usize, balls: Vec<Ball>) -> Result<Self> {
        for b in &balls {
            if b.center.len() != dimension {
                return Err(Error::config("ball center dimension mismatch"));
            }
            if b.radius <= 0.0 {
                return Err(Error::config("ball radius must be positive"));
            }
        }
        Ok(BallFamily {
            dimension,
            source: FamilySource::Explicit(balls),
        })
    }

    pub fn geometric_ray(dimension: usize, start: f64, ratio: f64, law: RadiusLaw) -> Result<Self> {
        if start <= 0.0 || ratio <= 1.0 {
            return Err(Error::config("geometric ray needs start > 0, ratio > 1"));
        }
        Ok(BallFamily {
            dimension,
            source: FamilySource::GeometricRay { start, ratio, law },
        })
    }

    pub fn lattice(dimension: usize, spacing: f64, min_norm: f64, law: RadiusLaw) -> Result<Self> {
        if spacing <= 0.0 {
            return Err(Error::config("lattice spacing must be positive"));
        }
        Ok(BallFamily {
            dimension,
            source: FamilySource::Lattice {
                spacing,
                min_norm: min_norm.max(spacing * 0.5),
                law,
            },
        })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn source(&self) -> &FamilySource {
        &self.source
    }

    /// Visit every ball with center norm in `(0, r_max]` in a deterministic
    /// order (lattice scan order / ray order / list order).
    pub fn for_each_ball<F: FnMut(&[f64], f64, f64)>(&self, r_max: f64, mut f: F) {
        match &self.source {
            FamilySource::Explicit(balls) => {
                for b in balls {
                    let n = b.center_norm();
                    if n <= r_max {
                        f(&b.center, n, b.radius);
                    }
                }
            }
            FamilySource::GeometricRay { start, ratio, law } => {
                let mut t = *start;
                let mut center = vec![0.0; self.dimension];
                while t <= r_max {
                    center[0] = t;
                    f(&center, t, law.radius(t));
                    t *= ratio;
                }
            }
            FamilySource::Lattice {
                spacing,
                min_norm,
                law,
            } => {
                let k = (r_max / spacing).floor() as i64;
                let mut idx = vec![-k; self.dimension];
                let mut center = vec![0.0; self.dimension];
                'scan: loop {
                    for (c, &i) in center.iter_mut().zip(idx.iter()) {
                        *c = i as f64 * spacing;
                    }
                    let n = norm(&center);
                    if n >= *min_norm && n <= r_max {
                        f(&center, n, law.radius(n));
                    }
                    // Odometer increment over the box [-k, k]^d.
                    for pos in (0..self.dimension).rev() {
                        if idx[pos] < k {
                            idx[pos] += 1;
                            for later in idx.iter_mut().skip(pos + 1) {
                                *later = -k;
                            }
                            continue 'scan;
                        }
                    }
                    break;
                }
            }
        }
    }

    /// Materialize all balls with center norm `≤ r_max`, sorted by
    /// `(|x|, center lexicographic)`.
    pub fn balls_within(&self, r_max: f64) -> Vec<Ball> {
        let mut out = Vec::new();
        self.for_each_ball(r_max, |c, _, r| out.push(Ball::new(c.to_vec(), r)));
        out.sort_by(|a, b| {
            a.center_norm()
                .total_cmp(&b.center_norm())
                .then_with(|| a.center.partial_cmp(&b.center).unwrap())
        });
        out
    }

    /// Deterministic parallel sum of `term(center, |center|, radius)` over
    /// the truncated family: partial sums are computed per slab and combined
    /// in slab order, so the result does not depend on thread scheduling.
    pub fn par_sum_terms<F>(&self, r_max: f64, term: F) -> f64
    where
        F: Fn(&[f64], f64, f64) -> f64 + Sync,
    {
        match &self.source {
            FamilySource::Lattice {
                spacing,
                min_norm,
                law,
            } => {
                let d = self.dimension;
                let k = (r_max / spacing).floor() as i64;
                let partials: Vec<f64> = (-k..=k)
                    .into_par_iter()
                    .map(|i0| {
                        let mut acc = 0.0;
                        let mut idx = vec![-k; d];
                        let mut center = vec![0.0; d];
                        idx[0] = i0;
                        if d == 1 {
                            center[0] = i0 as f64 * spacing;
                            let n = norm(&center);
                            if n >= *min_norm && n <= r_max {
                                acc += term(&center, n, law.radius(n));
                            }
                            return acc;
                        }
                        'scan: loop {
                            for (c, &i) in center.iter_mut().zip(idx.iter()) {
                                *c = i as f64 * spacing;
                            }
                            let n = norm(&center);
                            if n >= *min_norm && n <= r_max {
                                acc += term(&center, n, law.radius(n));
                            }
                            for pos in (1..d).rev() {
                                if idx[pos] < k {
                                    idx[pos] += 1;
                                    for later in idx.iter_mut().skip(pos + 1) {
                                        *later = -k;
                                    }
                                    continue 'scan;
                                }
                            }
                            break;
                        }
                        acc
                    })
                    .collect();
                partials.iter().sum()
            }
            _ => {
                let mut acc = 0.0;
                self.for_each_ball(r_max, |c, n, r| acc += term(c, n, r));
                acc
            }
        }
    }

    /// Count centers `x_n` with `r ≤ |x_n − x| ≤ 2r`.
    pub fn count_in_annulus(&self, x: &[f64], r: f64) -> usize {
        let reach = norm(x) + 2.0 * r;
        let mut count = 0;
        self.for_each_ball(reach, |c, _, _| {
            let d = dist(c, x);
            if r <= d && d <= 2.0 * r {
                count += 1;
            }
        });
        count
    }

    /// Check pairwise disjointness and origin exclusion within a window.
    pub fn validate(&self, r_max: f64) -> Result<()> {
        let balls = self.balls_within(r_max);
        if balls.is_empty() {
            return Ok(());
        }
        for b in &balls {
            if b.center_norm() <= b.radius {
                return Err(Error::Config(format!(
                    "ball at {:?} (radius {}) contains the origin",
                    b.center, b.radius
                )));
            }
        }
        let grid = NearestGrid::build(&balls);
        for (i, b) in balls.iter().enumerate() {
            if let Some((j, d)) = grid.nearest_other(i) {
                if d <= b.radius + balls[j].radius {
                    return Err(Error::Config(format!(
                        "balls at {:?} and {:?} overlap",
                        b.center, balls[j].center
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Hash-grid nearest neighbor over a fixed set of ball centers.
pub(crate) struct NearestGrid<'a> {
    cell: f64,
    map: HashMap<Vec<i64>, Vec<usize>>,
    balls: &'a [Ball],
}

impl<'a> NearestGrid<'a> {
    pub fn build(balls: &'a [Ball]) -> Self {
        let d = balls.first().map(|b| b.center.len()).unwrap_or(1);
        let max_norm = balls
            .iter()
            .map(|b| b.center_norm())
            .fold(1e-12, f64::max);
        // Cell size near the average center spacing.
        let cell = (2.0 * max_norm / (balls.len() as f64).powf(1.0 / d as f64)).max(1e-12);
        let mut map: HashMap<Vec<i64>, Vec<usize>> = HashMap::new();
        for (i, b) in balls.iter().enumerate() {
            map.entry(Self::key(&b.center, cell)).or_default().push(i);
        }
        NearestGrid { cell, map, balls }
    }

    fn key(x: &[f64], cell: f64) -> Vec<i64> {
        x.iter().map(|&v| (v / cell).floor() as i64).collect()
    }

    /// Nearest distinct center and its distance.
    pub fn nearest_other(&self, i: usize) -> Option<(usize, f64)> {
        let x = &self.balls[i].center;
        let base = Self::key(x, self.cell);
        let d = x.len();
        let mut best: Option<(usize, f64)> = None;
        let mut ring = 1i64;
        loop {
            // Scan all cells with Chebyshev distance <= ring from base.
            let mut offs = vec![-ring; d];
            'cells: loop {
                let key: Vec<i64> = base.iter().zip(&offs).map(|(b, o)| b + o).collect();
                if let Some(members) = self.map.get(&key) {
                    for &j in members {
                        if j != i {
                            let dj = dist(x, &self.balls[j].center);
                            if best.map_or(true, |(_, bd)| dj < bd) {
                                best = Some((j, dj));
                            }
                        }
                    }
                }
                for pos in (0..d).rev() {
                    if offs[pos] < ring {
                        offs[pos] += 1;
                        for later in offs.iter_mut().skip(pos + 1) {
                            *later = -ring;
                        }
                        continue 'cells;
                    }
                }
                break;
            }
            // Any unscanned cell holds points at distance >= ring * cell.
            if let Some((_, bd)) = best {
                if bd <= ring as f64 * self.cell {
                    return best;
                }
            }
            ring += 1;
            if ring as f64 * self.cell > 4.0 * self.balls.len() as f64 * self.cell + 1e12 {
                return best;
            }
        }
    }
}

/// Separation quantity report: the running infimum of
/// `|x_m − x_n|^d ψ(|x_n|^{-1}) G(r_n)` over nearest-neighbor pairs.
#[derive(Debug, Clone, Serialize)]
pub struct SeparationReport {
    pub infimum: Interval,
    pub threshold: f64,
    pub pass: bool,
    /// `(center norm, running infimum lower endpoint)` at doubling norms.
    pub trend: Vec<(f64, f64)>,
    pub witness: Option<SeparationWitness>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SeparationWitness {
    pub center: Vec<f64>,
    pub neighbor: Vec<f64>,
    pub quantity: f64,
}

/// Evaluate the separation condition over the truncated family against a
/// user threshold `c0`.
pub fn check_separation(
    family: &BallFamily,
    exp: &CharacteristicExponent,
    model: &GreenModel,
    truncation: f64,
    c0: f64,
) -> Result<SeparationReport> {
    let balls = family.balls_within(truncation);
    if balls.len() < 2 {
        return Err(Error::domain(
            "separation needs at least two balls inside the truncation",
        ));
    }
    let d = family.dimension() as i32;
    let grid = NearestGrid::build(&balls);
    let mut inf = Interval::new(f64::INFINITY, f64::INFINITY);
    let mut witness = None;
    let mut trend = Vec::new();
    let mut next_trend_norm = balls[0].center_norm().max(1e-12);
    for (i, b) in balls.iter().enumerate() {
        let (j, nn) = grid
            .nearest_other(i)
            .ok_or_else(|| Error::domain("nearest-neighbor search failed"))?;
        let g = model.eval(b.radius)?;
        let q = g.scale(nn.powi(d) * exp.psi(1.0 / b.center_norm()));
        if q.lo < inf.lo {
            inf = Interval::new(q.lo, inf.hi.min(q.hi));
            witness = Some(SeparationWitness {
                center: b.center.clone(),
                neighbor: balls[j].center.clone(),
                quantity: q.lo,
            });
        }
        inf = Interval::new(inf.lo, inf.hi.min(q.hi));
        if b.center_norm() >= next_trend_norm {
            trend.push((b.center_norm(), inf.lo));
            next_trend_norm *= 2.0;
        }
    }
    trend.push((balls.last().unwrap().center_norm(), inf.lo));
    Ok(SeparationReport {
        infimum: inf,
        threshold: c0,
        pass: inf.lo > c0,
        trend,
        witness,
    })
}

/// Annular window `inner ≤ |x| ≤ outer`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Annulus {
    pub inner: f64,
    pub outer: f64,
}

/// Result of the regular-location checks.
#[derive(Debug, Clone, Serialize)]
pub struct RegularReport {
    pub separation_ok: bool,
    pub density_ok: bool,
    pub radius_law_ok: bool,
    /// Net spacing used for the density semi-decision.
    pub net_spacing: f64,
    pub witness: Option<String>,
}

impl RegularReport {
    pub fn pass(&self) -> bool {
        self.separation_ok && self.density_ok && self.radius_law_ok
    }
}

/// Verify (i) `2ε` separation, (ii) `R`-uniform density on a `δ = R/10` net,
/// (iii) the radius law, all within the window.
///
/// The density check is a semi-decision: it certifies the condition at net
/// points only. Cost grows like `(outer/δ)^d`; keep windows modest.
pub fn check_regular_located(
    family: &BallFamily,
    spec: &RegularSpec,
    window: Annulus,
) -> Result<RegularReport> {
    if window.outer <= window.inner || window.inner < 0.0 {
        return Err(Error::domain("window must satisfy 0 <= inner < outer"));
    }
    let reach = window.outer + spec.density_radius;
    let balls = family.balls_within(reach);
    if balls.is_empty() {
        return Err(Error::domain("no balls inside the window"));
    }
    let d = family.dimension();
    let grid = NearestGrid::build(&balls);

    let mut separation_ok = true;
    let mut radius_law_ok = true;
    let mut witness = None;
    for (i, b) in balls.iter().enumerate() {
        let n = b.center_norm();
        if n < window.inner || n > window.outer {
            continue;
        }
        if let Some((_, nn)) = grid.nearest_other(i) {
            if nn <= 2.0 * spec.epsilon && separation_ok {
                separation_ok = false;
                witness = Some(format!(
                    "centers at {:?} separated by {nn} <= 2 epsilon",
                    b.center
                ));
            }
        }
        let want = spec.law.radius(n);
        if (b.radius - want).abs() > 1e-12 * want.max(1e-300) && radius_law_ok {
            radius_law_ok = false;
            witness.get_or_insert(format!(
                "radius {} at {:?} deviates from law value {want}",
                b.radius, b.center
            ));
        }
    }

    // Density: every R-ball centered at a net point must contain a center.
    let delta = spec.density_radius / 10.0;
    let mut density_ok = true;
    let span = (window.outer / delta).ceil() as i64;
    let mut idx = vec![-span; d];
    let mut point = vec![0.0; d];
    'net: loop {
        for (p, &i) in point.iter_mut().zip(idx.iter()) {
            *p = i as f64 * delta;
        }
        let n = norm(&point);
        if n >= window.inner && n <= window.outer {
            let mut found = false;
            for b in &balls {
                if dist(&b.center, &point) <= spec.density_radius {
                    found = true;
                    break;
                }
            }
            if !found {
                density_ok = false;
                witness.get_or_insert(format!(
                    "ball B({point:?}, {}) contains no center",
                    spec.density_radius
                ));
                break;
            }
        }
        for pos in (0..d).rev() {
            if idx[pos] < span {
                idx[pos] += 1;
                for later in idx.iter_mut().skip(pos + 1) {
                    *later = -span;
                }
                continue 'net;
            }
        }
        break;
    }

    Ok(RegularReport {
        separation_ok,
        density_ok,
        radius_law_ok,
        net_spacing: delta,
        witness,
    })
}

/// One cube of the Whitney decomposition of `R^d \ {0}`.
///
/// Generation `j` has side `3^{j-1}` and centers `k · 3^{j-1}` for
/// `k ∈ {-1,0,1}^d \ {0}`. Cubes are half-open on their upper faces so the
/// decomposition is an exact partition.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WhitneyCube {
    pub generation: i32,
    pub index: Vec<i8>,
    pub side: f64,
    pub center: Vec<f64>,
}

impl WhitneyCube {
    fn new(generation: i32, index: Vec<i8>) -> Self {
        let side = 3f64.powi(generation - 1);
        let center = index.iter().map(|&k| k as f64 * side).collect();
        WhitneyCube {
            generation,
            index,
            side,
            center,
        }
    }

    pub fn dimension(&self) -> usize {
        self.index.len()
    }

    pub fn diameter(&self) -> f64 {
        self.side * (self.dimension() as f64).sqrt()
    }

    /// Half-open membership: `c_i − s/2 ≤ x_i < c_i + s/2`.
    pub fn contains(&self, x: &[f64]) -> bool {
        let h = self.side / 2.0;
        x.iter()
            .zip(&self.center)
            .all(|(xi, ci)| ci - h <= *xi && *xi < ci + h)
    }

    /// Euclidean distance from the closed cube to the origin.
    pub fn dist_to_origin(&self) -> f64 {
        let h = self.side / 2.0;
        self.center
            .iter()
            .map(|c| (c.abs() - h).max(0.0).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    /// Stable sort key `(generation, index lexicographic)`.
    pub fn key(&self) -> (i32, Vec<i8>) {
        (self.generation, self.index.clone())
    }
}

fn indices(d: usize) -> Vec<Vec<i8>> {
    let mut out = Vec::with_capacity(3usize.pow(d as u32) - 1);
    let mut idx = vec![-1i8; d];
    'gen: loop {
        if idx.iter().any(|&k| k != 0) {
            out.push(idx.clone());
        }
        for pos in (0..d).rev() {
            if idx[pos] < 1 {
                idx[pos] += 1;
                for later in idx.iter_mut().skip(pos + 1) {
                    *later = -1;
                }
                continue 'gen;
            }
        }
        break;
    }
    out
}

/// Emit all cubes of generations `j ∈ [j_min, j_max]`, ordered by
/// `(generation, index)`.
pub fn whitney_decompose(d: usize, j_min: i32, j_max: i32) -> Result<Vec<WhitneyCube>> {
    if j_min > j_max {
        return Err(Error::config("need j_min <= j_max"));
    }
    if d == 0 {
        return Err(Error::config("dimension must be positive"));
    }
    let idxs = indices(d);
    let mut cubes = Vec::with_capacity(idxs.len() * (j_max - j_min + 1) as usize);
    for j in j_min..=j_max {
        for k in &idxs {
            cubes.push(WhitneyCube::new(j, k.clone()));
        }
    }
    Ok(cubes)
}

/// The unique cube containing `x ≠ 0`.
pub fn cube_containing(x: &[f64]) -> Result<WhitneyCube> {
    let m = x.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
    if m == 0.0 {
        return Err(Error::domain("the origin belongs to no Whitney cube"));
    }
    let fits = |j: i32| -> bool {
        let h = 3f64.powi(j) / 2.0;
        x.iter().all(|&xi| -h <= xi && xi < h)
    };
    let mut j = (2.0 * m).log(3.0).floor() as i32 + 1;
    while !fits(j) {
        j += 1;
    }
    while fits(j - 1) {
        j -= 1;
    }
    let s = 3f64.powi(j - 1);
    let index: Vec<i8> = x
        .iter()
        .map(|&xi| {
            if xi < -s / 2.0 {
                -1
            } else if xi < s / 2.0 {
                0
            } else {
                1
            }
        })
        .collect();
    debug_assert!(index.iter().any(|&k| k != 0));
    Ok(WhitneyCube::new(j, index))
}

/// Assign each ball (by index into `balls`) to the cube containing its
/// center. Centers falling outside the provided generations are strays.
pub fn assign_balls_to_cubes(
    balls: &[Ball],
    cubes: &[WhitneyCube],
) -> Result<BTreeMap<(i32, Vec<i8>), Vec<usize>>> {
    let (j_min, j_max) = match cubes.iter().map(|c| c.generation).fold(None, |acc, j| match acc {
        None => Some((j, j)),
        Some((lo, hi)) => Some((lo.min(j), hi.max(j))),
    }) {
        Some(range) => range,
        None => return Err(Error::config("no cubes supplied")),
    };
    let mut map: BTreeMap<(i32, Vec<i8>), Vec<usize>> = BTreeMap::new();
    let mut strays = Vec::new();
    for (i, b) in balls.iter().enumerate() {
        let cube = cube_containing(&b.center)?;
        if cube.generation < j_min || cube.generation > j_max {
            strays.push(i);
            continue;
        }
        map.entry(cube.key()).or_default().push(i);
    }
    if !strays.is_empty() {
        return Err(Error::Assignment {
            stray_count: strays.len(),
            first: balls[strays[0]].center.clone(),
        });
    }
    Ok(map)
}

/// Write a family as CSV rows `x1, …, xd, r`.
pub fn write_family_csv<W: IoWrite>(balls: &[Ball], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for b in balls {
        let mut rec: Vec<String> = b.center.iter().map(|v| format!("{v}")).collect();
        rec.push(format!("{}", b.radius));
        w.write_record(&rec).map_err(|e| Error::Parse(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

/// Read a family from CSV rows `x1, …, xd, r`.
pub fn read_family_csv<R: IoRead>(dimension: usize, input: R) -> Result<BallFamily> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).from_reader(input);
    let mut balls = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::Parse(e.to_string()))?;
        if rec.len() != dimension + 1 {
            return Err(Error::Parse(format!(
                "row has {} fields, expected {}",
                rec.len(),
                dimension + 1
            )));
        }
        let vals: Vec<f64> = rec
            .iter()
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Parse(e.to_string()))?;
        balls.push(Ball::new(vals[..dimension].to_vec(), vals[dimension]));
    }
    BallFamily::explicit(dimension, balls)
}

/// Write Whitney cubes as CSV rows `j, index, center…, side`.
pub fn write_cubes_csv<W: IoWrite>(cubes: &[WhitneyCube], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for c in cubes {
        let mut rec = vec![
            format!("{}", c.generation),
            c.index
                .iter()
                .map(|k| k.to_string())
                .collect::<Vec<_>>()
                .join(";"),
        ];
        rec.extend(c.center.iter().map(|v| format!("{v}")));
        rec.push(format!("{}", c.side));
        w.write_record(&rec).map_err(|e| Error::Parse(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exponents::CharacteristicExponent;
    use crate::green::GreenModel;
    use proptest::prelude::*;

    #[test]
    fn whitney_counts_per_generation() {
        assert_eq!(whitney_decompose(1, 1, 1).unwrap().len(), 2);
        assert_eq!(whitney_decompose(2, 1, 1).unwrap().len(), 8);
        assert_eq!(whitney_decompose(3, 1, 1).unwrap().len(), 26);
        assert_eq!(whitney_decompose(2, 0, 2).unwrap().len(), 24);
    }

    #[test]
    fn whitney_distance_comparable_to_side() {
        for cube in whitney_decompose(3, -2, 3).unwrap() {
            let d = cube.dist_to_origin();
            assert!(d >= cube.side / 2.0 - 1e-15, "{cube:?}");
            assert!(d <= 1.5 * cube.side * 3f64.sqrt() + 1e-15, "{cube:?}");
        }
    }

    #[test]
    fn whitney_d2_partition_is_exact() {
        // Exhaustive overlap and cover check for d = 2, generations 0..2.
        let cubes = whitney_decompose(2, 0, 2).unwrap();
        for (i, a) in cubes.iter().enumerate() {
            for b in cubes.iter().skip(i + 1) {
                let sep = a.center.iter().zip(&b.center).enumerate().any(|(k, (ca, cb))| {
                    (ca - cb).abs() >= (a.side + b.side) / 2.0 - 1e-12 && {
                        let _ = k;
                        true
                    }
                });
                assert!(sep, "interior overlap between {a:?} and {b:?}");
            }
        }
        // Cover: the union is the square shell 3^{-1}/2 ≤ ||x||_inf < 3^2/2.
        let step = 0.11;
        let mut x = -4.4f64;
        while x < 4.4 {
            let mut y = -4.4f64;
            while y < 4.4 {
                let m = x.abs().max(y.abs());
                let p = [x, y];
                let holders = cubes.iter().filter(|c| c.contains(&p)).count();
                if m >= 3f64.powi(-1) / 2.0 && m < 4.5 {
                    assert_eq!(holders, 1, "point {p:?} held by {holders}");
                } else {
                    assert_eq!(holders, 0, "point {p:?} outside shell held by {holders}");
                }
                y += step;
            }
            x += step;
        }
    }

    #[test]
    fn cube_containing_matches_membership() {
        let xs = [
            vec![1.0, 0.0, 0.0],
            vec![0.5, 0.5, -0.2],
            vec![-40.0, 3.0, 1e-3],
            vec![1e-4, 0.0, 2e-4],
        ];
        for x in &xs {
            let c = cube_containing(x).unwrap();
            assert!(c.contains(x), "{x:?} not in {c:?}");
        }
        assert!(cube_containing(&[0.0, 0.0]).is_err());
    }

    #[test]
    fn face_points_assigned_deterministically() {
        // A center on a cube face belongs to exactly one half-open cube.
        let x = [0.5, 0.0, 0.0]; // face between generation-1 cubes (side 1)
        let c1 = cube_containing(&x).unwrap();
        let c2 = cube_containing(&x).unwrap();
        assert_eq!(c1, c2);
        assert!(c1.contains(&x));
    }

    #[test]
    fn assignment_partitions_lattice() {
        let fam = BallFamily::lattice(3, 1.0, 1.0, RadiusLaw::Constant(0.2)).unwrap();
        let balls = fam.balls_within(12.0);
        let cubes = whitney_decompose(3, -5, 12).unwrap();
        let map = assign_balls_to_cubes(&balls, &cubes).unwrap();
        let total: usize = map.values().map(|v| v.len()).sum();
        assert_eq!(total, balls.len());
    }

    #[test]
    fn assignment_reports_strays() {
        let balls = vec![Ball::new(vec![1.0, 0.0, 0.0], 0.1)];
        let cubes = whitney_decompose(3, 5, 6).unwrap();
        match assign_balls_to_cubes(&balls, &cubes) {
            Err(Error::Assignment { stray_count, .. }) => assert_eq!(stray_count, 1),
            other => panic!("expected assignment error, got {other:?}"),
        }
    }

    #[test]
    fn single_ball_has_single_cube() {
        let balls = vec![Ball::new(vec![1.0, 0.0, 0.0], 0.1)];
        let cubes = whitney_decompose(3, -3, 4).unwrap();
        let map = assign_balls_to_cubes(&balls, &cubes).unwrap();
        assert_eq!(map.len(), 1);
    }

    #[test]
    fn annulus_counts_track_volume() {
        let fam = BallFamily::lattice(3, 1.0, 1.0, RadiusLaw::Constant(0.2)).unwrap();
        // Count/r^3 stays in one band over three scales.
        let mut ratios = Vec::new();
        for &r in &[4.0, 8.0, 16.0, 32.0] {
            let c = fam.count_in_annulus(&[0.0; 3], r);
            ratios.push(c as f64 / r.powi(3));
        }
        let max = ratios.iter().fold(0.0f64, |a, &b| a.max(b));
        let min = ratios.iter().fold(f64::INFINITY, |a, &b| a.min(b));
        assert!(max / min < 1.5, "band [{min}, {max}]");
        // Tiny annulus away from lattice points can be empty.
        assert_eq!(fam.count_in_annulus(&[0.45, 0.5, 0.5], 0.05), 0);
        // Two-ball family.
        let two = BallFamily::explicit(
            3,
            vec![
                Ball::new(vec![2.0, 0.0, 0.0], 0.5),
                Ball::new(vec![5.0, 0.0, 0.0], 0.5),
            ],
        )
        .unwrap();
        assert!(two.count_in_annulus(&[0.0; 3], 2.0) <= 2);
    }

    #[test]
    fn regular_located_lattice_passes() {
        let fam = BallFamily::lattice(3, 1.0, 1.0, RadiusLaw::Power { coeff: 1.0, exponent: 3.0 })
            .unwrap();
        let spec = RegularSpec {
            epsilon: 0.4,
            density_radius: 3f64.sqrt(),
            law: RadiusLaw::Power { coeff: 1.0, exponent: 3.0 },
        };
        let rep = check_regular_located(&fam, &spec, Annulus { inner: 1.5, outer: 5.0 }).unwrap();
        assert!(rep.pass(), "{rep:?}");
    }

    #[test]
    fn regular_located_detects_missing_center() {
        let law = RadiusLaw::Power { coeff: 1.0, exponent: 3.0 };
        let fam = BallFamily::lattice(3, 1.0, 1.0, law).unwrap();
        let mut balls = fam.balls_within(8.0);
        let victim = [3.0, 2.0, 1.0];
        balls.retain(|b| dist(&b.center, &victim) > 1e-9);
        let pruned = BallFamily::explicit(3, balls).unwrap();
        let spec = RegularSpec {
            epsilon: 0.4,
            density_radius: 3f64.sqrt() / 2.0,
            law,
        };
        let rep = check_regular_located(&pruned, &spec, Annulus { inner: 2.0, outer: 4.5 }).unwrap();
        assert!(!rep.density_ok, "{rep:?}");
    }

    #[test]
    fn regular_located_detects_radius_drift() {
        let law = RadiusLaw::Power { coeff: 1.0, exponent: 3.0 };
        let fam = BallFamily::lattice(3, 1.0, 1.0, law).unwrap();
        let balls: Vec<Ball> = fam
            .balls_within(5.0)
            .into_iter()
            .map(|mut b| {
                b.radius *= 1.0 + 1e-6;
                b
            })
            .collect();
        let drifted = BallFamily::explicit(3, balls).unwrap();
        let spec = RegularSpec {
            epsilon: 0.4,
            density_radius: 3f64.sqrt(),
            law,
        };
        let rep = check_regular_located(&drifted, &spec, Annulus { inner: 1.5, outer: 4.0 }).unwrap();
        assert!(!rep.radius_law_ok);
    }

    #[test]
    fn separation_two_far_balls_passes() {
        let exp = CharacteristicExponent::brownian(3);
        let model = GreenModel::exact(exp.clone()).unwrap();
        let fam = BallFamily::explicit(
            3,
            vec![
                Ball::new(vec![2.0, 0.0, 0.0], 0.5),
                Ball::new(vec![50.0, 0.0, 0.0], 0.5),
            ],
        )
        .unwrap();
        let rep = check_separation(&fam, &exp, &model, 100.0, 1e-6).unwrap();
        assert!(rep.pass, "{rep:?}");
        assert!(rep.infimum.lo > 1.0);
    }

    #[test]
    fn separation_lattice_constant_radius_decays() {
        // Unit lattice with constant radii: the quantity decays like
        // |x_n|^{-2}, so the running infimum falls as the window grows.
        let exp = CharacteristicExponent::brownian(3);
        let model = GreenModel::exact(exp.clone()).unwrap();
        let fam = BallFamily::lattice(3, 1.0, 1.0, RadiusLaw::Constant(0.2)).unwrap();
        let small = check_separation(&fam, &exp, &model, 6.0, 0.0).unwrap();
        let large = check_separation(&fam, &exp, &model, 14.0, 0.0).unwrap();
        assert!(large.infimum.lo < small.infimum.lo);
        let t = &large.trend;
        assert!(t.first().unwrap().1 >= t.last().unwrap().1);
    }

    #[test]
    fn family_validation_rejects_origin_cover() {
        let fam = BallFamily::explicit(3, vec![Ball::new(vec![0.5, 0.0, 0.0], 0.6)]).unwrap();
        assert!(fam.validate(2.0).is_err());
        let overlap = BallFamily::explicit(
            3,
            vec![
                Ball::new(vec![2.0, 0.0, 0.0], 0.6),
                Ball::new(vec![3.0, 0.0, 0.0], 0.6),
            ],
        )
        .unwrap();
        assert!(overlap.validate(5.0).is_err());
    }

    #[test]
    fn par_sum_matches_sequential() {
        let fam = BallFamily::lattice(3, 1.0, 1.0, RadiusLaw::Constant(0.2)).unwrap();
        let term = |_c: &[f64], n: f64, r: f64| r / n.powi(2);
        let par = fam.par_sum_terms(9.0, term);
        let mut seq = 0.0;
        fam.for_each_ball(9.0, |c, n, r| seq += term(c, n, r));
        assert!((par - seq).abs() <= 1e-12 * seq.abs());
    }

    #[test]
    fn csv_roundtrip() {
        let fam = BallFamily::explicit(
            2,
            vec![
                Ball::new(vec![1.0, 2.0], 0.25),
                Ball::new(vec![-3.0, 0.5], 0.125),
            ],
        )
        .unwrap();
        let mut buf = Vec::new();
        write_family_csv(&fam.balls_within(10.0), &mut buf).unwrap();
        let back = read_family_csv(2, buf.as_slice()).unwrap();
        assert_eq!(back.balls_within(10.0), fam.balls_within(10.0));
    }

    proptest! {
        // Random nonzero points always land in exactly one cube of a window
        // of generations around them.
        #[test]
        fn whitney_partition_property(
            x in -40.0f64..40.0, y in -40.0f64..40.0, z in -40.0f64..40.0
        ) {
            prop_assume!(x.abs().max(y.abs()).max(z.abs()) > 1e-3);
            let p = [x, y, z];
            let cubes = whitney_decompose(3, -8, 5).unwrap();
            let holders = cubes.iter().filter(|c| c.contains(&p)).count();
            prop_assert_eq!(holders, 1);
            let c = cube_containing(&p).unwrap();
            prop_assert!(c.contains(&p));
        }
    }
}
