//! Declarative experiment scenarios.
//!
//! A scenario file is a TOML document with one section per module
//! (exponent, green, family, criteria, simulation, …). Running a scenario
//! produces a `verdicts.json` record, one plot-ready CSV of partial sums per
//! series-type check, and a `manifest.json` with enough to reproduce the run
//! (config hash, seed, library version). Identical configs and seeds yield
//! byte-identical JSON.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::criteria::{
    classify, integral_criterion, psi_form_criterion, ratio_boundedness_test, series_criterion,
    wiener_annuli_sum, wiener_whitney_sum, ClassifyOptions, RadiusSchedule,
    SeriesVerdict,
};
use crate::error::Error;
use crate::exponents::{BernsteinSpec, CharacteristicExponent};
use crate::geometry::{BallFamily, RadiusLaw, RegularSpec};
use crate::green::GreenModel;
use crate::poisson::{
    expected_wiener_sum, percolation_integral, validate_intensity, IntensityModel, RadialDensity,
};
use crate::simulate::{
    estimate_escape, estimate_overshoot, estimate_single_ball_hit, HittingEstimate, SimConfig,
    StepRule,
};
use crate::Result;

pub const SCHEMA_VERSION: u32 = 1;

/// Scenario file representation.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    #[serde(default = "default_seed")]
    pub seed: u64,
    pub exponent: ExponentSection,
    #[serde(default)]
    pub green: GreenSection,
    #[serde(default)]
    pub family: Option<FamilySection>,
    #[serde(default)]
    pub regular: Option<RegularSection>,
    #[serde(default)]
    pub intensity: Option<IntensitySection>,
    #[serde(default)]
    pub criteria: Option<CriteriaSection>,
    #[serde(default)]
    pub simulation: Option<SimulationSection>,
    #[serde(default)]
    pub output: Option<OutputSection>,
}

fn default_seed() -> u64 {
    0
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExponentSection {
    pub kind: String,
    pub dimension: usize,
    #[serde(default)]
    pub beta: Option<f64>,
    #[serde(default)]
    pub a: Option<f64>,
    #[serde(default)]
    pub b: Option<f64>,
    /// Bernstein power-sum terms `[coeff, power]` for subordinate-bm.
    #[serde(default)]
    pub f_terms: Option<Vec<[f64; 2]>>,
    #[serde(default)]
    pub alpha: Option<f64>,
    #[serde(default)]
    pub c_l: Option<f64>,
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct GreenSection {
    #[serde(default)]
    pub mode: Option<String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilySection {
    pub kind: String,
    #[serde(default)]
    pub spacing: Option<f64>,
    #[serde(default)]
    pub min_norm: Option<f64>,
    #[serde(default)]
    pub start: Option<f64>,
    #[serde(default)]
    pub ratio: Option<f64>,
    #[serde(default)]
    pub csv: Option<String>,
    pub radius_law: RadiusLawSection,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RadiusLawSection {
    pub form: String,
    pub coeff: f64,
    #[serde(default)]
    pub exponent: Option<f64>,
}

impl RadiusLawSection {
    pub fn build(&self) -> Result<RadiusLaw> {
        match self.form.as_str() {
            "constant" => Ok(RadiusLaw::Constant(self.coeff)),
            "power" => Ok(RadiusLaw::Power {
                coeff: self.coeff,
                exponent: self.exponent.ok_or_else(|| {
                    Error::Parse("radius_law.form = \"power\" needs `exponent`".into())
                })?,
            }),
            other => Err(Error::Parse(format!("unknown radius law form `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegularSection {
    pub epsilon: f64,
    pub density_radius: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntensitySection {
    pub c_p: f64,
    pub density: DensitySection,
    pub radius_law: RadiusLawSection,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DensitySection {
    pub form: String,
    #[serde(default)]
    pub coeff: Option<f64>,
    #[serde(default)]
    pub exponent: Option<f64>,
    #[serde(default)]
    pub radii: Option<Vec<f64>>,
    #[serde(default)]
    pub values: Option<Vec<f64>>,
}

impl DensitySection {
    fn build(&self) -> Result<RadialDensity> {
        match self.form.as_str() {
            "power" => Ok(RadialDensity::Power {
                coeff: self.coeff.ok_or_else(|| Error::Parse("density needs `coeff`".into()))?,
                exponent: self
                    .exponent
                    .ok_or_else(|| Error::Parse("density needs `exponent`".into()))?,
            }),
            "table" => {
                let radii = self
                    .radii
                    .clone()
                    .ok_or_else(|| Error::Parse("table density needs `radii`".into()))?;
                let values = self
                    .values
                    .clone()
                    .ok_or_else(|| Error::Parse("table density needs `values`".into()))?;
                if radii.len() != values.len() {
                    return Err(Error::Parse("radii/values length mismatch".into()));
                }
                Ok(RadialDensity::Table { radii, values })
            }
            other => Err(Error::Parse(format!("unknown density form `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CriteriaSection {
    pub run: Vec<String>,
    pub schedule: ScheduleSection,
    #[serde(default)]
    pub lambda: Option<f64>,
    #[serde(default)]
    pub separation_threshold: Option<f64>,
    /// Optional sweep of the radius-law exponent for the integral test.
    #[serde(default)]
    pub gammas: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleSection {
    pub start: f64,
    #[serde(default = "default_factor")]
    pub factor: f64,
    pub steps: usize,
}

fn default_factor() -> f64 {
    2.0
}

impl ScheduleSection {
    fn build(&self) -> RadiusSchedule {
        RadiusSchedule {
            start: self.start,
            factor: self.factor,
            steps: self.steps,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationSection {
    pub kind: String,
    pub paths: usize,
    pub r_esc: f64,
    #[serde(default)]
    pub mode: Option<String>,
    #[serde(default)]
    pub dt: Option<f64>,
    #[serde(default)]
    pub frac: Option<f64>,
    #[serde(default)]
    pub t_max: Option<f64>,
    #[serde(default)]
    pub start: Option<Vec<f64>>,
    #[serde(default)]
    pub ball_center: Option<Vec<f64>>,
    #[serde(default)]
    pub ball_radius: Option<f64>,
    #[serde(default)]
    pub truncation: Option<f64>,
    #[serde(default)]
    pub thresholds: Option<Vec<f64>>,
    #[serde(default)]
    pub antithetic: Option<bool>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: String,
}

impl Scenario {
    pub fn from_path(path: &Path) -> Result<(Self, String)> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
        let scenario: Scenario = toml::from_str(&text).map_err(|e| Error::Parse(e.to_string()))?;
        let hash = hex_digest(text.as_bytes());
        Ok((scenario, hash))
    }

    pub fn build_exponent(&self) -> Result<CharacteristicExponent> {
        let s = &self.exponent;
        let mut exp = match s.kind.as_str() {
            "brownian" => CharacteristicExponent::brownian(s.dimension),
            "stable" => CharacteristicExponent::stable(
                s.dimension,
                s.beta.ok_or_else(|| Error::Parse("stable kind needs `beta`".into()))?,
            )?,
            "stable-sum" => CharacteristicExponent::stable_sum(
                s.dimension,
                s.a.ok_or_else(|| Error::Parse("stable-sum needs `a`".into()))?,
                s.b.ok_or_else(|| Error::Parse("stable-sum needs `b`".into()))?,
            )?,
            "brownian-plus-stable" => CharacteristicExponent::brownian_plus_stable(
                s.dimension,
                s.beta.ok_or_else(|| Error::Parse("kind needs `beta`".into()))?,
            )?,
            "subordinate-bm" => {
                let terms = s
                    .f_terms
                    .clone()
                    .ok_or_else(|| Error::Parse("subordinate-bm needs `f_terms`".into()))?;
                let spec =
                    BernsteinSpec::power_sum(terms.iter().map(|t| (t[0], t[1])).collect())?;
                CharacteristicExponent::subordinate_bm(s.dimension, spec)
            }
            other => return Err(Error::Parse(format!("unknown exponent kind `{other}`"))),
        };
        if let Some(a) = s.alpha {
            exp.alpha = a;
        }
        if let Some(c) = s.c_l {
            exp.c_l = c;
        }
        Ok(exp)
    }

    pub fn build_green(&self, exp: &CharacteristicExponent) -> Result<GreenModel> {
        match self.green.mode.as_deref().unwrap_or("exact") {
            "exact" => GreenModel::exact(exp.clone()),
            "envelope" => GreenModel::envelope(exp.clone()),
            other => Err(Error::Parse(format!("unknown green mode `{other}`"))),
        }
    }

    pub fn build_family(&self) -> Result<Option<BallFamily>> {
        let Some(f) = &self.family else {
            return Ok(None);
        };
        let d = self.exponent.dimension;
        let law = f.radius_law.build()?;
        let fam = match f.kind.as_str() {
            "lattice" => BallFamily::lattice(
                d,
                f.spacing.unwrap_or(1.0),
                f.min_norm.unwrap_or(1.0),
                law,
            )?,
            "geometric" => BallFamily::geometric_ray(
                d,
                f.start.ok_or_else(|| Error::Parse("geometric family needs `start`".into()))?,
                f.ratio.ok_or_else(|| Error::Parse("geometric family needs `ratio`".into()))?,
                law,
            )?,
            "csv" => {
                let path = f
                    .csv
                    .as_ref()
                    .ok_or_else(|| Error::Parse("csv family needs `csv` path".into()))?;
                let file = fs::File::open(path)?;
                crate::geometry::read_family_csv(d, file)?
            }
            other => return Err(Error::Parse(format!("unknown family kind `{other}`"))),
        };
        Ok(Some(fam))
    }

    pub fn build_regular(&self) -> Result<Option<RegularSpec>> {
        match (&self.regular, &self.family) {
            (Some(r), Some(f)) => Ok(Some(RegularSpec {
                epsilon: r.epsilon,
                density_radius: r.density_radius,
                law: f.radius_law.build()?,
            })),
            (Some(_), None) => Err(Error::Parse(
                "[regular] requires a [family] with a radius law".into(),
            )),
            _ => Ok(None),
        }
    }

    pub fn build_intensity(&self) -> Result<Option<IntensityModel>> {
        match &self.intensity {
            Some(i) => Ok(Some(IntensityModel::new(
                i.density.build()?,
                i.radius_law.build()?,
                i.c_p,
            )?)),
            None => Ok(None),
        }
    }

    pub fn build_sim_config(&self, seed: u64) -> Result<Option<SimConfig>> {
        let Some(s) = &self.simulation else {
            return Ok(None);
        };
        let step_rule = match s.mode.as_deref().unwrap_or("exact") {
            "exact" => StepRule::ExactIncrement,
            "fixed" => StepRule::FixedStep(
                s.dt.ok_or_else(|| Error::Parse("fixed mode needs `dt`".into()))?,
            ),
            "adaptive" => StepRule::AdaptiveStep {
                frac: s.frac.unwrap_or(0.2),
            },
            other => return Err(Error::Parse(format!("unknown simulation mode `{other}`"))),
        };
        Ok(Some(SimConfig {
            paths: s.paths,
            step_rule,
            r_esc: s.r_esc,
            t_max: s.t_max.unwrap_or(f64::INFINITY),
            seed,
            antithetic: s.antithetic.unwrap_or(false),
        }))
    }
}

fn hex_digest(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let out = hasher.finalize();
    out.iter().map(|b| format!("{b:02x}")).collect()
}

/// One check's persisted result.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum CheckResult {
    Series {
        check: String,
        classification: String,
        growth_exponent: Option<f64>,
        total_lo: f64,
        total_hi: f64,
    },
    Verdict {
        check: String,
        verdict: String,
        basis: String,
    },
    Estimate {
        check: String,
        p_hat: f64,
        ci_half_width: f64,
        n_hit: u64,
        n_escape: u64,
        n_censored: u64,
        extras: BTreeMap<String, f64>,
    },
    Report {
        check: String,
        pass: bool,
        details: BTreeMap<String, f64>,
    },
}

impl CheckResult {
    fn classification(&self) -> Option<&str> {
        match self {
            CheckResult::Series { classification, .. } => Some(classification),
            CheckResult::Verdict { verdict, .. } => Some(verdict),
            _ => None,
        }
    }
}

/// Persisted run output (the `verdicts.json` document).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunOutput {
    pub schema_version: u32,
    pub name: String,
    pub seed: u64,
    pub config_hash: String,
    pub library_version: String,
    pub results: Vec<CheckResult>,
}

/// Reproducibility manifest.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub name: String,
    pub config_hash: String,
    pub seed: u64,
    pub library_version: String,
    pub artifacts: Vec<String>,
}

/// Exit disposition of a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunStatus {
    Success,
    /// Every classification-type result came back indeterminate.
    IndeterminateOnly,
}

impl RunStatus {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunStatus::Success => 0,
            RunStatus::IndeterminateOnly => 2,
        }
    }
}

pub struct RunSummary {
    pub output: RunOutput,
    pub status: RunStatus,
    pub out_dir: PathBuf,
    pub artifacts: Vec<String>,
}

fn series_result(check: &str, v: &SeriesVerdict) -> CheckResult {
    CheckResult::Series {
        check: check.to_string(),
        classification: format!("{:?}", v.classification),
        growth_exponent: v.growth_exponent.is_finite().then_some(v.growth_exponent),
        total_lo: v.envelope.lo,
        total_hi: v.envelope.hi,
    }
}

fn estimate_result(check: &str, e: &HittingEstimate, extras: BTreeMap<String, f64>) -> CheckResult {
    CheckResult::Estimate {
        check: check.to_string(),
        p_hat: e.p_hat,
        ci_half_width: e.ci_half_width,
        n_hit: e.n_hit,
        n_escape: e.n_escape,
        n_censored: e.n_censored,
        extras,
    }
}

fn write_series_csv(dir: &Path, check: &str, v: &SeriesVerdict) -> Result<String> {
    let file = format!("series_{}.csv", check.replace(['/', ' '], "_"));
    let mut w = csv::Writer::from_path(dir.join(&file)).map_err(|e| Error::Parse(e.to_string()))?;
    w.write_record(["radius", "sum_lo", "sum_hi"])
        .map_err(|e| Error::Parse(e.to_string()))?;
    for (r, s) in &v.partial_sums {
        w.write_record(&[format!("{r}"), format!("{}", s.lo), format!("{}", s.hi)])
            .map_err(|e| Error::Parse(e.to_string()))?;
    }
    w.flush()?;
    Ok(file)
}

/// Execute a scenario: run the requested checks and write artifacts under
/// `out_override`/`[output].dir`/name.
pub fn run_scenario(
    path: &Path,
    out_override: Option<&Path>,
    seed_override: Option<u64>,
    only: Option<&[&str]>,
) -> Result<RunSummary> {
    let (scenario, config_hash) = Scenario::from_path(path)?;
    let seed = seed_override.unwrap_or(scenario.seed);
    let exp = scenario.build_exponent()?;
    let model = scenario.build_green(&exp)?;
    let family = scenario.build_family()?;
    let regular = scenario.build_regular()?;
    let intensity = scenario.build_intensity()?;

    let out_root = out_override
        .map(Path::to_path_buf)
        .or_else(|| scenario.output.as_ref().map(|o| PathBuf::from(&o.dir)))
        .unwrap_or_else(|| PathBuf::from("out"));
    let out_dir = out_root.join(&scenario.name);
    fs::create_dir_all(&out_dir)?;

    let mut results = Vec::new();
    let mut artifacts = Vec::new();

    if let Some(crit) = &scenario.criteria {
        let schedule = crit.schedule.build();
        let checks: Vec<&str> = match only {
            Some(list) => crit
                .run
                .iter()
                .map(String::as_str)
                .filter(|c| list.contains(c))
                .collect(),
            None => crit.run.iter().map(String::as_str).collect(),
        };
        for check in checks {
            match check {
                "series" => {
                    let fam = family.as_ref().ok_or_else(|| missing("series", "family"))?;
                    let v = series_criterion(fam, &model, &schedule)?;
                    artifacts.push(write_series_csv(&out_dir, "series", &v)?);
                    results.push(series_result("series", &v));
                }
                "psi-form" => {
                    let fam = family.as_ref().ok_or_else(|| missing("psi-form", "family"))?;
                    let v = psi_form_criterion(fam, &exp, &schedule)?;
                    artifacts.push(write_series_csv(&out_dir, "psi-form", &v)?);
                    results.push(series_result("psi-form", &v));
                }
                "integral" => {
                    let reg = regular
                        .as_ref()
                        .ok_or_else(|| missing("integral", "regular"))?;
                    match &crit.gammas {
                        None => {
                            let v = integral_criterion(&reg.law, &model, &schedule)?;
                            artifacts.push(write_series_csv(&out_dir, "integral", &v)?);
                            results.push(series_result("integral", &v));
                        }
                        Some(gammas) => {
                            for &g in gammas {
                                let law = match reg.law {
                                    RadiusLaw::Power { coeff, .. } => RadiusLaw::Power {
                                        coeff,
                                        exponent: g,
                                    },
                                    RadiusLaw::Constant(c) => RadiusLaw::Power {
                                        coeff: c,
                                        exponent: g,
                                    },
                                };
                                let v = integral_criterion(&law, &model, &schedule)?;
                                let label = format!("integral-gamma-{g}");
                                artifacts.push(write_series_csv(&out_dir, &label, &v)?);
                                results.push(series_result(&label, &v));
                            }
                        }
                    }
                }
                "wiener-whitney" => {
                    let fam = family
                        .as_ref()
                        .ok_or_else(|| missing("wiener-whitney", "family"))?;
                    let v = wiener_whitney_sum(fam, &model, &schedule)?;
                    artifacts.push(write_series_csv(&out_dir, "wiener-whitney", &v)?);
                    results.push(series_result("wiener-whitney", &v));
                }
                "wiener-annuli" => {
                    let fam = family
                        .as_ref()
                        .ok_or_else(|| missing("wiener-annuli", "family"))?;
                    let lambda = crit.lambda.unwrap_or(3.0);
                    let v = wiener_annuli_sum(fam, &model, lambda, &schedule)?;
                    artifacts.push(write_series_csv(&out_dir, "wiener-annuli", &v)?);
                    results.push(series_result("wiener-annuli", &v));
                }
                "ratio" => {
                    let reg = regular.as_ref().ok_or_else(|| missing("ratio", "regular"))?;
                    let r = ratio_boundedness_test(
                        &reg.law,
                        &model,
                        (schedule.start, schedule.max_radius()),
                    )?;
                    let mut details = BTreeMap::new();
                    details.insert("fitted_exponent".into(), r.fitted_exponent);
                    results.push(CheckResult::Report {
                        check: "ratio".into(),
                        pass: !r.unbounded,
                        details,
                    });
                }
                "classify" => {
                    let fam = family.as_ref().ok_or_else(|| missing("classify", "family"))?;
                    let mut opts = ClassifyOptions::new(schedule);
                    opts.regular = regular;
                    if let Some(t) = crit.separation_threshold {
                        opts.separation_threshold = t;
                    }
                    let v = classify(fam, &exp, &model, &opts)?;
                    artifacts.push(write_series_csv(&out_dir, "classify-series", &v.series)?);
                    results.push(CheckResult::Verdict {
                        check: "classify".into(),
                        verdict: format!("{:?}", v.verdict),
                        basis: format!("{:?}", v.basis),
                    });
                }
                "percolation" => {
                    let m = intensity
                        .as_ref()
                        .ok_or_else(|| missing("percolation", "intensity"))?;
                    let v = percolation_integral(m, &model, &schedule)?;
                    artifacts.push(write_series_csv(&out_dir, "percolation", &v)?);
                    results.push(series_result("percolation", &v));
                }
                "expected-wiener" => {
                    let m = intensity
                        .as_ref()
                        .ok_or_else(|| missing("expected-wiener", "intensity"))?;
                    let v = expected_wiener_sum(m, &model, &schedule)?;
                    artifacts.push(write_series_csv(&out_dir, "expected-wiener", &v)?);
                    results.push(series_result("expected-wiener", &v));
                }
                "validate-intensity" => {
                    let m = intensity
                        .as_ref()
                        .ok_or_else(|| missing("validate-intensity", "intensity"))?;
                    let rep =
                        validate_intensity(m, &exp, &model, (schedule.start, schedule.max_radius().max(schedule.start * 1e3)))?;
                    let mut details = BTreeMap::new();
                    details.insert("smallest_admissible_c_p".into(), rep.smallest_admissible_c_p);
                    results.push(CheckResult::Report {
                        check: "validate-intensity".into(),
                        pass: rep.pass(),
                        details,
                    });
                }
                other => {
                    return Err(Error::Parse(format!("unknown criterion `{other}`")));
                }
            }
        }
    }

    if only.map_or(true, |list| list.contains(&"simulate")) {
        if let Some(cfg) = scenario.build_sim_config(seed)? {
            let sim = scenario.simulation.as_ref().unwrap();
            match sim.kind.as_str() {
                "hit" => {
                    let start = sim
                        .start
                        .clone()
                        .ok_or_else(|| missing("simulate hit", "start"))?;
                    let ball = crate::geometry::Ball::new(
                        sim.ball_center
                            .clone()
                            .unwrap_or_else(|| vec![0.0; exp.dimension()]),
                        sim.ball_radius.unwrap_or(1.0),
                    );
                    let rep = estimate_single_ball_hit(&exp, &start, &ball, &cfg)?;
                    let mut extras = BTreeMap::new();
                    extras.insert("p_infinity".into(), rep.p_infinity);
                    let env = model.hitting_envelope(&ball.center, ball.radius, &start)?;
                    extras.insert("envelope_lower".into(), env.lower);
                    extras.insert("envelope_upper".into(), env.upper);
                    extras.insert(
                        "in_envelope".into(),
                        f64::from(u8::from(
                            rep.p_infinity >= env.lower - 3.0 * rep.base.sigma()
                                && rep.p_infinity <= env.upper + 3.0 * rep.base.sigma(),
                        )),
                    );
                    results.push(estimate_result("simulate-hit", &rep.base, extras));
                }
                "escape" => {
                    let fam = family
                        .as_ref()
                        .ok_or_else(|| missing("simulate escape", "family"))?;
                    let trunc = sim
                        .truncation
                        .ok_or_else(|| missing("simulate escape", "truncation"))?;
                    let est = estimate_escape(fam, trunc, &exp, &cfg)?;
                    results.push(estimate_result("simulate-escape", &est, BTreeMap::new()));
                }
                "overshoot" => {
                    let thresholds = sim
                        .thresholds
                        .clone()
                        .ok_or_else(|| missing("simulate overshoot", "thresholds"))?;
                    let rep = estimate_overshoot(&exp, sim.ball_radius.unwrap_or(1.0), &thresholds, &cfg)?;
                    let mut extras = BTreeMap::new();
                    if rep.fitted_exponent.is_finite() {
                        extras.insert("fitted_exponent".into(), rep.fitted_exponent);
                    }
                    let worst = rep
                        .per_threshold
                        .first()
                        .map(|(_, e)| *e)
                        .unwrap_or(HittingEstimate {
                            p_hat: 0.0,
                            ci_half_width: 0.0,
                            n_hit: 0,
                            n_escape: 0,
                            n_censored: 0,
                        });
                    results.push(estimate_result("simulate-overshoot", &worst, extras));
                }
                other => return Err(Error::Parse(format!("unknown simulation kind `{other}`"))),
            }
        }
    }

    let output = RunOutput {
        schema_version: SCHEMA_VERSION,
        name: scenario.name.clone(),
        seed,
        config_hash,
        library_version: env!("CARGO_PKG_VERSION").to_string(),
        results,
    };

    let verdicts_json = serde_json::to_string_pretty(&output)
        .map_err(|e| Error::Parse(e.to_string()))?;
    fs::write(out_dir.join("verdicts.json"), &verdicts_json)?;
    artifacts.push("verdicts.json".into());

    let manifest = Manifest {
        schema_version: SCHEMA_VERSION,
        name: output.name.clone(),
        config_hash: output.config_hash.clone(),
        seed,
        library_version: output.library_version.clone(),
        artifacts: artifacts.clone(),
    };
    fs::write(
        out_dir.join("manifest.json"),
        serde_json::to_string_pretty(&manifest).map_err(|e| Error::Parse(e.to_string()))?,
    )?;
    artifacts.push("manifest.json".into());

    let class_results: Vec<&CheckResult> = output
        .results
        .iter()
        .filter(|r| r.classification().is_some())
        .collect();
    let status = if !class_results.is_empty()
        && class_results
            .iter()
            .all(|r| r.classification() == Some("Indeterminate"))
    {
        RunStatus::IndeterminateOnly
    } else {
        RunStatus::Success
    };

    Ok(RunSummary {
        output,
        status,
        out_dir,
        artifacts,
    })
}

fn missing(check: &str, what: &str) -> Error {
    Error::Config(format!("criterion `{check}` needs a [{what}] section"))
}

/// Field-wise diff of two runs.
#[derive(Debug, Clone, Serialize)]
pub struct DiffReport {
    pub equal: bool,
    pub diffs: Vec<String>,
}

/// Compare two persisted runs: verdicts must match exactly, estimates must
/// agree within combined confidence intervals.
pub fn compare_runs(a: &RunOutput, b: &RunOutput) -> Result<DiffReport> {
    if a.schema_version != b.schema_version {
        return Err(Error::Version(format!(
            "schema {} vs {}",
            a.schema_version, b.schema_version
        )));
    }
    let mut diffs = Vec::new();
    let index = |o: &RunOutput| -> BTreeMap<String, CheckResult> {
        o.results
            .iter()
            .map(|r| {
                let key = match r {
                    CheckResult::Series { check, .. }
                    | CheckResult::Verdict { check, .. }
                    | CheckResult::Estimate { check, .. }
                    | CheckResult::Report { check, .. } => check.clone(),
                };
                (key, r.clone())
            })
            .collect()
    };
    let ia = index(a);
    let ib = index(b);
    for (key, ra) in &ia {
        match ib.get(key) {
            None => diffs.push(format!("{key}: missing in second run")),
            Some(rb) => match (ra, rb) {
                (
                    CheckResult::Series { classification: ca, .. },
                    CheckResult::Series { classification: cb, .. },
                ) => {
                    if ca != cb {
                        diffs.push(format!("{key}: {ca} vs {cb}"));
                    }
                }
                (
                    CheckResult::Verdict { verdict: va, basis: ba, .. },
                    CheckResult::Verdict { verdict: vb, basis: bb, .. },
                ) => {
                    if va != vb || ba != bb {
                        diffs.push(format!("{key}: {va}/{ba} vs {vb}/{bb}"));
                    }
                }
                (
                    CheckResult::Estimate { p_hat: pa, ci_half_width: wa, .. },
                    CheckResult::Estimate { p_hat: pb, ci_half_width: wb, .. },
                ) => {
                    // CI-aware equality at ~3 sigma.
                    let tol = 1.6 * (wa + wb) + 1e-12;
                    if (pa - pb).abs() > tol {
                        diffs.push(format!("{key}: estimate {pa} vs {pb} beyond tolerance {tol}"));
                    }
                }
                (
                    CheckResult::Report { pass: pa, .. },
                    CheckResult::Report { pass: pb, .. },
                ) => {
                    if pa != pb {
                        diffs.push(format!("{key}: pass {pa} vs {pb}"));
                    }
                }
                _ => diffs.push(format!("{key}: result kinds differ")),
            },
        }
    }
    for key in ib.keys() {
        if !ia.contains_key(key) {
            diffs.push(format!("{key}: missing in first run"));
        }
    }
    Ok(DiffReport {
        equal: diffs.is_empty(),
        diffs,
    })
}

pub fn load_run_output(path: &Path) -> Result<RunOutput> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::Parse(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
name = "mini"
seed = 7

[exponent]
kind = "brownian"
dimension = 3

[family]
kind = "geometric"
start = 2.0
ratio = 2.0

[family.radius_law]
form = "constant"
coeff = 1.0

[criteria]
run = ["series"]
schedule = { start = 2.0, steps = 8 }
"#;

    #[test]
    fn minimal_scenario_parses_and_builds() {
        let s: Scenario = toml::from_str(MINIMAL).unwrap();
        let exp = s.build_exponent().unwrap();
        assert_eq!(exp.dimension(), 3);
        let fam = s.build_family().unwrap().unwrap();
        assert_eq!(fam.balls_within(16.0).len(), 4);
    }

    #[test]
    fn unknown_key_is_rejected_with_location() {
        let bad = MINIMAL.replace("seed = 7", "sede = 7");
        let err = toml::from_str::<Scenario>(&bad).unwrap_err().to_string();
        assert!(err.contains("sede"), "{err}");
    }

    #[test]
    fn run_writes_artifacts_and_is_reproducible() {
        let dir = std::env::temp_dir().join(format!("avoid-scenario-{}", std::process::id()));
        let path = dir.join("mini.toml");
        fs::create_dir_all(&dir).unwrap();
        fs::write(&path, MINIMAL).unwrap();
        let s1 = run_scenario(&path, Some(&dir.join("out1")), None, None).unwrap();
        let s2 = run_scenario(&path, Some(&dir.join("out2")), None, None).unwrap();
        assert_eq!(s1.status, RunStatus::Success);
        let j1 = fs::read(s1.out_dir.join("verdicts.json")).unwrap();
        let j2 = fs::read(s2.out_dir.join("verdicts.json")).unwrap();
        assert_eq!(j1, j2, "same config + seed must be byte-identical");
        let diff = compare_runs(&s1.output, &s2.output).unwrap();
        assert!(diff.equal);
        fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn empty_criteria_list_is_noop_success() {
        let dir = std::env::temp_dir().join(format!("avoid-noop-{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        let toml_text = MINIMAL.replace("run = [\"series\"]", "run = []");
        let path = dir.join("noop.toml");
        fs::write(&path, toml_text).unwrap();
        let s = run_scenario(&path, Some(&dir.join("out")), None, None).unwrap();
        assert_eq!(s.status, RunStatus::Success);
        assert!(s.out_dir.join("manifest.json").exists());
        fs::remove_dir_all(&dir).ok();
    }
}
