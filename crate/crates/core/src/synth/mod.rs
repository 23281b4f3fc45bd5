//! Deterministic synthetic cohorts.
//!
//! Schools draw their attributes and a random effect; pupils draw their
//! background characteristics independently from configured marginals and
//! a KS2 group, and their Attainment 8 is the adjusted-model prediction
//! plus the school effect plus pupil noise, clamped to [0, 90].
//!
//! KS2 is linked to pupil background through a Gaussian copula on the
//! pupil's background index (the summed background coefficients). The
//! index is mapped to an exact standard normal score by a randomised
//! probability integral transform over its enumerated distribution, so
//! every marginal, KS2 included, is preserved exactly while
//! `ks2_background_link` sets the dependence. A link of zero gives fully
//! independent characteristics.
//!
//! Every random draw comes from a ChaCha stream keyed on the seed and
//! positioned by (school index, pupil index), so output does not depend
//! on generation order or thread count.

pub mod tables;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use statrs::distribution::{ContinuousCDF, Normal};
use thiserror::Error;

use crate::accountability::Characteristic;
use crate::cohort::{
    validate_cohort, Admissions, AgeRange, Categorical, Cohort, Ethnicity, Fsm, Gender, Language, Month, PupilRecord,
    Region, Religion, SchoolGender, SchoolRecord, SchoolType, Sen, ATTAINMENT8_MAX,
};
use crate::design::{ks2_representative_value, model_spec, Factor, SpecName, KS2_GROUPS};
use crate::valueadded::POINTS_PER_GRADE;
use tables::*;

/// Copula correlation between KS2 and the background index used by
/// default; chosen so the prior-attainment-only model explains about
/// 57% of Attainment 8 variance with the default coefficients.
pub const DEFAULT_KS2_BACKGROUND_LINK: f64 = 0.5;

/// Pupil progress SD, school mean SD and typical school size the default
/// variance components are calibrated to.
pub const DEFAULT_VARIANCE_TARGETS: (f64, f64, usize) = (1.06, 0.40, 162);

const PROB_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SynthError {
    #[error("invalid synthetic config: {0}")]
    InvalidConfig(String),
    #[error("no non-negative variance components reach these targets: {0}")]
    Infeasible(String),
}

fn invalid(msg: impl Into<String>) -> SynthError {
    SynthError::InvalidConfig(msg.into())
}

/// Log-normal school size with a floor, rounded to whole pupils.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchoolSize {
    pub median: f64,
    /// SD of log size.
    pub sigma: f64,
    pub min: usize,
}

impl Default for SchoolSize {
    fn default() -> Self {
        SchoolSize {
            median: 162.0,
            sigma: 0.35,
            min: 5,
        }
    }
}

/// Category probabilities for the pupil-level draws, in canonical
/// category order.
#[derive(Debug, Clone, PartialEq)]
pub struct PupilMarginals {
    pub ks2_group: Vec<f64>,
    pub month: Vec<f64>,
    pub gender: Vec<f64>,
    pub ethnicity: Vec<f64>,
    pub language: Vec<f64>,
    pub sen: Vec<f64>,
    pub fsm: Vec<f64>,
    pub idaci_decile: Vec<f64>,
}

impl Default for PupilMarginals {
    fn default() -> Self {
        PupilMarginals {
            ks2_group: proportions(&KS2_GROUP_PUPILS),
            month: proportions(&MONTH_PUPILS),
            gender: proportions(&GENDER_PUPILS),
            ethnicity: proportions(&ETHNICITY_PUPILS),
            language: proportions(&LANGUAGE_PUPILS),
            sen: proportions(&SEN_PUPILS),
            fsm: proportions(&FSM_PUPILS),
            idaci_decile: proportions(&IDACI_PUPILS),
        }
    }
}

impl PupilMarginals {
    pub const NAMES: [&'static str; 8] = [
        "ks2_group",
        "month",
        "gender",
        "ethnicity",
        "language",
        "sen",
        "fsm",
        "idaci_decile",
    ];

    pub fn get(&self, name: &str) -> Option<&Vec<f64>> {
        Some(match name {
            "ks2_group" => &self.ks2_group,
            "month" => &self.month,
            "gender" => &self.gender,
            "ethnicity" => &self.ethnicity,
            "language" => &self.language,
            "sen" => &self.sen,
            "fsm" => &self.fsm,
            "idaci_decile" => &self.idaci_decile,
            _ => return None,
        })
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Vec<f64>> {
        Some(match name {
            "ks2_group" => &mut self.ks2_group,
            "month" => &mut self.month,
            "gender" => &mut self.gender,
            "ethnicity" => &mut self.ethnicity,
            "language" => &mut self.language,
            "sen" => &mut self.sen,
            "fsm" => &mut self.fsm,
            "idaci_decile" => &mut self.idaci_decile,
            _ => return None,
        })
    }

    /// Category tokens of a marginal (`"1"`..`"34"` for KS2 groups).
    pub fn categories(name: &str) -> Option<Vec<String>> {
        if name == "ks2_group" {
            return Some((1..=KS2_GROUPS).map(|g| g.to_string()).collect());
        }
        name.parse::<Characteristic>().ok().map(Characteristic::categories)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SchoolMarginals {
    pub region: Vec<f64>,
    pub school_type: Vec<f64>,
    pub admissions: Vec<f64>,
    pub age_range: Vec<f64>,
    pub school_gender: Vec<f64>,
    pub religion: Vec<f64>,
    pub school_idaci_decile: Vec<f64>,
}

impl Default for SchoolMarginals {
    fn default() -> Self {
        SchoolMarginals {
            region: proportions(&REGION_SCHOOLS),
            school_type: proportions(&SCHOOL_TYPE_SCHOOLS),
            admissions: proportions(&ADMISSIONS_SCHOOLS),
            age_range: proportions(&AGE_RANGE_SCHOOLS),
            school_gender: proportions(&SCHOOL_GENDER_SCHOOLS),
            religion: proportions(&RELIGION_SCHOOLS),
            school_idaci_decile: proportions(&SCHOOL_IDACI_SCHOOLS),
        }
    }
}

impl SchoolMarginals {
    pub const NAMES: [&'static str; 7] = [
        "region",
        "school_type",
        "admissions",
        "age_range",
        "school_gender",
        "religion",
        "school_idaci_decile",
    ];

    pub fn get(&self, name: &str) -> Option<&Vec<f64>> {
        Some(match name {
            "region" => &self.region,
            "school_type" => &self.school_type,
            "admissions" => &self.admissions,
            "age_range" => &self.age_range,
            "school_gender" => &self.school_gender,
            "religion" => &self.religion,
            "school_idaci_decile" => &self.school_idaci_decile,
            _ => return None,
        })
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Vec<f64>> {
        Some(match name {
            "region" => &mut self.region,
            "school_type" => &mut self.school_type,
            "admissions" => &mut self.admissions,
            "age_range" => &mut self.age_range,
            "school_gender" => &mut self.school_gender,
            "religion" => &mut self.religion,
            "school_idaci_decile" => &mut self.school_idaci_decile,
            _ => return None,
        })
    }
}

/// Places one pupil category disproportionately in a subset of schools:
/// the first `round(school_share * n_schools)` schools draw it with
/// `inside_prob`, the rest with `outside_prob`. The other categories of
/// the characteristic keep their relative proportions.
#[derive(Debug, Clone, PartialEq)]
pub struct Concentration {
    pub characteristic: Characteristic,
    pub category: String,
    pub school_share: f64,
    pub inside_prob: f64,
    pub outside_prob: f64,
}

impl Concentration {
    pub fn n_inside(&self, n_schools: usize) -> usize {
        (self.school_share * n_schools as f64).round() as usize
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub n_schools: usize,
    pub school_size: SchoolSize,
    pub pupil_marginals: PupilMarginals,
    pub school_marginals: SchoolMarginals,
    /// Attainment 8 points, parallel to the adjusted model's column labels.
    pub coefficients: Vec<f64>,
    /// School effect SD (grades).
    pub sigma_u: f64,
    /// Pupil noise SD (points). Zero gives noise-free attainment.
    pub sigma_e: f64,
    pub seed: u64,
    /// Copula correlation between KS2 and the background index, in [0, 1).
    pub ks2_background_link: f64,
    pub concentration: Option<Concentration>,
}

impl Default for SynthConfig {
    fn default() -> Self {
        let (pupil_sd, school_sd, n) = DEFAULT_VARIANCE_TARGETS;
        let v = calibrate_variances(pupil_sd, school_sd, n).expect("default targets are feasible");
        SynthConfig {
            n_schools: 600,
            school_size: SchoolSize::default(),
            pupil_marginals: PupilMarginals::default(),
            school_marginals: SchoolMarginals::default(),
            coefficients: ADJUSTED_COEFFICIENTS.to_vec(),
            sigma_u: v.sigma_u,
            sigma_e: v.sigma_e,
            seed: 1,
            ks2_background_link: DEFAULT_KS2_BACKGROUND_LINK,
            concentration: None,
        }
    }
}

impl SynthConfig {
    /// Labels the coefficients are keyed by.
    pub fn coefficient_labels() -> Vec<String> {
        model_spec(SpecName::Adjusted).column_labels()
    }

    pub fn coefficient(&self, label: &str) -> Option<f64> {
        Self::coefficient_labels()
            .iter()
            .position(|l| l == label)
            .map(|i| self.coefficients[i])
    }

    pub fn set_coefficient(&mut self, label: &str, value: f64) -> Result<(), SynthError> {
        let i = Self::coefficient_labels()
            .iter()
            .position(|l| l == label)
            .ok_or_else(|| invalid(format!("unknown coefficient {label}")))?;
        self.coefficients[i] = value;
        Ok(())
    }

    /// Sets every background (non-KS2) coefficient to zero.
    pub fn zero_background(&mut self) {
        let labels = Self::coefficient_labels();
        for (l, c) in labels.iter().zip(self.coefficients.iter_mut()) {
            if l != "const" && !l.starts_with("ks2_") {
                *c = 0.0;
            }
        }
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        if self.n_schools < 2 {
            return Err(invalid("n_schools must be at least 2"));
        }
        let s = &self.school_size;
        if !(s.median.is_finite() && s.median >= 1.0) || !(s.sigma.is_finite() && s.sigma >= 0.0) || s.min < 1 {
            return Err(invalid("school size needs median >= 1, sigma >= 0, min >= 1"));
        }
        for name in PupilMarginals::NAMES {
            let p = self.pupil_marginals.get(name).unwrap();
            let expected = PupilMarginals::categories(name).unwrap().len();
            check_probs(name, p, expected)?;
        }
        for name in SchoolMarginals::NAMES {
            let p = self.school_marginals.get(name).unwrap();
            let c: Characteristic = name.parse().unwrap();
            check_probs(name, p, c.categories().len())?;
        }
        if self.coefficients.len() != Self::coefficient_labels().len() || self.coefficients.iter().any(|c| !c.is_finite()) {
            return Err(invalid("coefficients must be 78 finite values"));
        }
        if !(self.sigma_u.is_finite() && self.sigma_u >= 0.0) {
            return Err(invalid("sigma_u must be >= 0"));
        }
        if !(self.sigma_e.is_finite() && self.sigma_e >= 0.0) {
            return Err(invalid("sigma_e must be >= 0"));
        }
        if !(0.0..1.0).contains(&self.ks2_background_link) {
            return Err(invalid("ks2_background_link must lie in [0, 1)"));
        }
        if let Some(c) = &self.concentration {
            if c.characteristic.is_school_level() {
                return Err(invalid("concentration applies to pupil characteristics"));
            }
            let tokens = c.characteristic.categories();
            let Some(k) = tokens.iter().position(|t| *t == c.category) else {
                return Err(invalid(format!("unknown category {} of {}", c.category, c.characteristic)));
            };
            let base = self.pupil_marginals.get(c.characteristic.name()).unwrap()[k];
            for (what, v) in [
                ("school_share", c.school_share),
                ("inside_prob", c.inside_prob),
                ("outside_prob", c.outside_prob),
            ] {
                if !(0.0..=1.0).contains(&v) {
                    return Err(invalid(format!("concentration {what} must lie in [0, 1]")));
                }
            }
            if base >= 1.0 && (c.inside_prob < 1.0 || c.outside_prob < 1.0) {
                return Err(invalid("cannot concentrate a category with probability 1"));
            }
        }
        Ok(())
    }
}

fn check_probs(name: &str, p: &[f64], expected: usize) -> Result<(), SynthError> {
    if p.len() != expected {
        return Err(invalid(format!("{name}: expected {expected} probabilities, got {}", p.len())));
    }
    if p.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(invalid(format!("{name}: probabilities must be non-negative")));
    }
    let total: f64 = p.iter().sum();
    if (total - 1.0).abs() > PROB_TOL {
        return Err(invalid(format!("{name}: probabilities sum to {total}, not 1")));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VarianceComponents {
    /// School effect SD, grades.
    pub sigma_u: f64,
    /// Pupil noise SD, Attainment 8 points.
    pub sigma_e: f64,
}

/// Solves `school_sd^2 = sigma_u^2 + s^2 / n` and
/// `pupil_sd^2 = sigma_u^2 + s^2` for the school effect SD `sigma_u` and
/// within-school SD `s` (grades); returns `sigma_e = 10 s` in points.
pub fn calibrate_variances(
    target_pupil_sd: f64,
    target_school_sd: f64,
    typical_n: usize,
) -> Result<VarianceComponents, SynthError> {
    let (p, s) = (target_pupil_sd, target_school_sd);
    if !(p.is_finite() && s.is_finite() && s > 0.0 && s < p) {
        return Err(SynthError::Infeasible(format!(
            "need 0 < school sd < pupil sd, got pupil {p}, school {s}"
        )));
    }
    if typical_n < 2 {
        return Err(SynthError::Infeasible("typical school size must be at least 2".into()));
    }
    let n = typical_n as f64;
    let within2 = (p * p - s * s) / (1.0 - 1.0 / n);
    let mut between2 = s * s - within2 / n;
    if between2 < 0.0 {
        if between2 > -1e-12 * s * s {
            between2 = 0.0;
        } else {
            return Err(SynthError::Infeasible(format!(
                "school sd {s} is below pupil sd / sqrt(n) = {}",
                p / n.sqrt()
            )));
        }
    }
    Ok(VarianceComponents {
        sigma_u: between2.sqrt(),
        sigma_e: POINTS_PER_GRADE * within2.sqrt(),
    })
}

/// Inverse-CDF sampler over a finite distribution.
struct Sampler {
    cumulative: Vec<f64>,
    last: usize,
}

impl Sampler {
    fn new(p: &[f64]) -> Self {
        let mut acc = 0.0;
        let cumulative = p
            .iter()
            .map(|v| {
                acc += v;
                acc
            })
            .collect();
        let last = p.iter().rposition(|&v| v > 0.0).unwrap_or(0);
        Sampler { cumulative, last }
    }

    fn sample(&self, u: f64) -> usize {
        self.cumulative.partition_point(|&c| c <= u).min(self.last)
    }
}

/// Background factors in design order, after KS2.
const BACKGROUND: [Factor; 7] = [
    Factor::Month,
    Factor::Gender,
    Factor::Ethnicity,
    Factor::Language,
    Factor::Sen,
    Factor::Fsm,
    Factor::Idaci,
];

/// Exact distribution of the background index under one set of marginals:
/// for each combination of categories, the probability mass below it in
/// index order and its own mass.
struct BackgroundDistribution {
    samplers: Vec<Sampler>,
    below: Vec<f64>,
    mass: Vec<f64>,
}

impl BackgroundDistribution {
    fn new(marginals: &[Vec<f64>], effects: &[Vec<f64>]) -> Self {
        let radices: Vec<usize> = marginals.iter().map(Vec::len).collect();
        let atoms: usize = radices.iter().product();
        let mut value = vec![0.0; atoms];
        let mut mass = vec![0.0; atoms];
        for atom in 0..atoms {
            let (mut rest, mut p, mut c) = (atom, 1.0, 0.0);
            for f in (0..radices.len()).rev() {
                let level = rest % radices[f];
                rest /= radices[f];
                p *= marginals[f][level];
                c += effects[f][level];
            }
            value[atom] = c;
            mass[atom] = p;
        }
        let mut order: Vec<usize> = (0..atoms).collect();
        order.sort_by(|&a, &b| value[a].total_cmp(&value[b]).then(a.cmp(&b)));
        let total: f64 = mass.iter().sum();
        let mut below = vec![0.0; atoms];
        let mut acc = 0.0;
        for &a in &order {
            below[a] = acc / total;
            acc += mass[a];
        }
        for m in &mut mass {
            *m /= total;
        }
        BackgroundDistribution {
            samplers: marginals.iter().map(|p| Sampler::new(p)).collect(),
            below,
            mass,
        }
    }
}

/// Everything the pupil draw needs, shared across schools.
struct Model {
    intercept: f64,
    ks2_effect: Vec<f64>,
    background_effect: Vec<Vec<f64>>,
    ks2: Sampler,
    standard: BackgroundDistribution,
    concentrated: Option<(usize, BackgroundDistribution)>,
    link: f64,
}

fn marginals_for(config: &SynthConfig, concentrated: bool) -> Vec<Vec<f64>> {
    let m = &config.pupil_marginals;
    let mut out = vec![
        m.month.clone(),
        m.gender.clone(),
        m.ethnicity.clone(),
        m.language.clone(),
        m.sen.clone(),
        m.fsm.clone(),
        m.idaci_decile.clone(),
    ];
    if let Some(c) = &config.concentration {
        let f = BACKGROUND
            .iter()
            .position(|f| f.name() == factor_name(c.characteristic))
            .expect("pupil characteristic");
        let k = c.characteristic.categories().iter().position(|t| *t == c.category).unwrap();
        let target = if concentrated { c.inside_prob } else { c.outside_prob };
        let p = &mut out[f];
        let rest = 1.0 - p[k];
        for (i, v) in p.iter_mut().enumerate() {
            *v = if i == k {
                target
            } else if rest > 0.0 {
                *v / rest * (1.0 - target)
            } else {
                0.0
            };
        }
    }
    out
}

fn factor_name(c: Characteristic) -> &'static str {
    match c {
        Characteristic::IdaciDecile => "idaci",
        other => other.name(),
    }
}

impl Model {
    fn new(config: &SynthConfig) -> Self {
        let c = &config.coefficients;
        let mut ks2_effect = vec![0.0];
        ks2_effect.extend_from_slice(&c[1..KS2_GROUPS as usize]);
        let mut background_effect = Vec::new();
        let mut at = KS2_GROUPS as usize;
        for f in BACKGROUND {
            let width = f.n_levels() - 1;
            let mut e = vec![0.0];
            e.extend_from_slice(&c[at..at + width]);
            background_effect.push(e);
            at += width;
        }
        let standard = BackgroundDistribution::new(&marginals_for(config, false), &background_effect);
        let concentrated = config.concentration.as_ref().map(|conc| {
            (
                conc.n_inside(config.n_schools),
                BackgroundDistribution::new(&marginals_for(config, true), &background_effect),
            )
        });
        Model {
            intercept: c[0],
            ks2_effect,
            background_effect,
            ks2: Sampler::new(&config.pupil_marginals.ks2_group),
            standard,
            concentrated,
            link: config.ks2_background_link,
        }
    }

    fn background_for(&self, school: usize) -> &BackgroundDistribution {
        match &self.concentrated {
            Some((inside, dist)) if school < *inside => dist,
            _ => &self.standard,
        }
    }
}

fn key_from_seed(seed: u64) -> [u8; 32] {
    // SplitMix64 expansion
    let mut state = seed;
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        chunk.copy_from_slice(&(z ^ (z >> 31)).to_le_bytes());
    }
    key
}

/// Stream for `(school, slot)`: slot 0 is the school's own draws, slot
/// `i + 1` belongs to its `i`-th pupil.
fn stream(key: [u8; 32], school: usize, slot: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(school as u64);
    rng.set_word_pos((slot as u128) << 16);
    rng
}

struct SchoolDraw {
    record: SchoolRecord,
    size: usize,
    effect: f64,
}

fn pick<C: Categorical>(sampler: &Sampler, u: f64) -> C {
    C::ALL[sampler.sample(u)]
}

fn draw_school(config: &SynthConfig, key: [u8; 32], index: usize, samplers: &[Sampler]) -> SchoolDraw {
    let mut rng = stream(key, index, 0);
    let z: f64 = rng.sample(StandardNormal);
    let s = &config.school_size;
    let size = ((s.median.ln() + s.sigma * z).exp().round() as usize).max(s.min);
    let mut u = || rng.random::<f64>();
    let record = SchoolRecord {
        school_id: school_id(index, config.n_schools),
        region: pick::<Region>(&samplers[0], u()),
        school_type: pick::<SchoolType>(&samplers[1], u()),
        admissions: pick::<Admissions>(&samplers[2], u()),
        age_range: pick::<AgeRange>(&samplers[3], u()),
        school_gender: pick::<SchoolGender>(&samplers[4], u()),
        religion: pick::<Religion>(&samplers[5], u()),
        school_idaci_decile: samplers[6].sample(u()) as u8 + 1,
    };
    let effect = config.sigma_u * rng.sample::<f64, _>(StandardNormal);
    SchoolDraw { record, size, effect }
}

fn school_id(index: usize, n: usize) -> String {
    let width = n.to_string().len().max(4);
    format!("S{:0width$}", index + 1)
}

fn pupil_id(index: usize, n: usize) -> String {
    let width = n.to_string().len().max(6);
    format!("P{:0width$}", index + 1)
}

fn draw_pupil(
    model: &Model,
    config: &SynthConfig,
    key: [u8; 32],
    school: &SchoolDraw,
    school_index: usize,
    pupil_index: usize,
    id: String,
) -> PupilRecord {
    let normal = Normal::standard();
    let dist = model.background_for(school_index);
    let mut rng = stream(key, school_index, pupil_index + 1);
    let mut levels = [0usize; 7];
    for (l, s) in levels.iter_mut().zip(&dist.samplers) {
        *l = s.sample(rng.random::<f64>());
    }
    let atom = levels
        .iter()
        .zip(&model.background_effect)
        .fold(0usize, |acc, (&l, e)| acc * e.len() + l);
    let background: f64 = levels.iter().zip(&model.background_effect).map(|(&l, e)| e[l]).sum();

    // randomised PIT of the background index, then the copula
    let v: f64 = rng.random();
    let u_index = (dist.below[atom] + v * dist.mass[atom]).clamp(1e-15, 1.0 - 1e-15);
    let w: f64 = rng.sample(StandardNormal);
    let latent = model.link * normal.inverse_cdf(u_index) + (1.0 - model.link * model.link).sqrt() * w;
    let group = model.ks2.sample(normal.cdf(latent));

    let noise: f64 = rng.sample(StandardNormal);
    let a8 = model.intercept
        + model.ks2_effect[group]
        + background
        + POINTS_PER_GRADE * school.effect
        + config.sigma_e * noise;

    PupilRecord {
        pupil_id: id,
        school_id: school.record.school_id.clone(),
        ks2: ks2_representative_value(group as u8 + 1),
        attainment8: a8.clamp(0.0, ATTAINMENT8_MAX),
        month: Month::ALL[levels[0]],
        gender: Gender::ALL[levels[1]],
        ethnicity: Ethnicity::ALL[levels[2]],
        language: Language::ALL[levels[3]],
        sen: Sen::ALL[levels[4]],
        fsm: Fsm::ALL[levels[5]],
        idaci_decile: levels[6] as u8 + 1,
    }
}

/// Generates a cohort; identical configs give identical cohorts.
pub fn generate_cohort(config: &SynthConfig) -> Result<Cohort, SynthError> {
    config.validate()?;
    let key = key_from_seed(config.seed);
    let model = Model::new(config);
    let school_samplers: Vec<Sampler> = SchoolMarginals::NAMES
        .iter()
        .map(|n| Sampler::new(config.school_marginals.get(n).unwrap()))
        .collect();

    let schools: Vec<SchoolDraw> = (0..config.n_schools)
        .into_par_iter()
        .map(|s| draw_school(config, key, s, &school_samplers))
        .collect();
    let mut offsets = Vec::with_capacity(schools.len());
    let mut total = 0;
    for s in &schools {
        offsets.push(total);
        total += s.size;
    }
    let pupils: Vec<PupilRecord> = schools
        .par_iter()
        .enumerate()
        .flat_map_iter(|(s, school)| {
            let model = &model;
            let offset = offsets[s];
            (0..school.size).map(move |i| {
                draw_pupil(model, config, key, school, s, i, pupil_id(offset + i, total))
            })
        })
        .collect();
    let records = schools.into_iter().map(|s| s.record).collect();
    let validated = validate_cohort(pupils, records).map_err(|e| invalid(format!("generated cohort invalid: {e}")))?;
    Ok(validated.cohort)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(seed: u64) -> SynthConfig {
        SynthConfig {
            n_schools: 40,
            school_size: SchoolSize {
                median: 50.0,
                sigma: 0.3,
                min: 5,
            },
            seed,
            ..SynthConfig::default()
        }
    }

    #[test]
    fn calibration_example() {
        let v = calibrate_variances(1.06, 0.40, 162).unwrap();
        assert!((v.sigma_u - 0.392).abs() < 5e-4, "{}", v.sigma_u);
        assert!((v.sigma_e / 10.0 - 0.985).abs() < 5e-4);
        // back-substitution
        let s2 = (v.sigma_e / 10.0).powi(2);
        assert!((v.sigma_u.powi(2) + s2 / 162.0 - 0.16).abs() < 1e-12);
        assert!((v.sigma_u.powi(2) + s2 - 1.06f64.powi(2)).abs() < 1e-12);
    }

    #[test]
    fn calibration_boundary_and_infeasible() {
        let p: f64 = 1.2;
        let n = 16;
        let v = calibrate_variances(p, p / 4.0, n).unwrap();
        assert_eq!(v.sigma_u, 0.0);
        assert!((v.sigma_e - 12.0).abs() < 1e-12);
        assert!(matches!(calibrate_variances(1.0, 1.1, 162), Err(SynthError::Infeasible(_))));
        assert!(matches!(calibrate_variances(1.0, 0.01, 162), Err(SynthError::Infeasible(_))));
        assert!(matches!(calibrate_variances(1.0, 0.5, 1), Err(SynthError::Infeasible(_))));
    }

    #[test]
    fn default_config_is_valid() {
        let c = SynthConfig::default();
        c.validate().unwrap();
        assert_eq!(c.coefficient("fsm_eligible"), Some(-4.01));
    }

    #[test]
    fn invalid_configs() {
        let mut c = SynthConfig::default();
        c.pupil_marginals.fsm = vec![0.5, 0.6];
        assert!(matches!(c.validate(), Err(SynthError::InvalidConfig(_))));
        let mut c = SynthConfig::default();
        c.sigma_e = -1.0;
        assert!(c.validate().is_err());
        let mut c = SynthConfig::default();
        c.n_schools = 1;
        assert!(c.validate().is_err());
        let mut c = SynthConfig::default();
        c.ks2_background_link = 1.0;
        assert!(c.validate().is_err());
        assert!(c.set_coefficient("nope", 1.0).is_err());
        let mut c = SynthConfig::default();
        c.concentration = Some(Concentration {
            characteristic: Characteristic::Region,
            category: "london".into(),
            school_share: 0.2,
            inside_prob: 0.5,
            outside_prob: 0.0,
        });
        assert!(c.validate().is_err());
    }

    #[test]
    fn same_seed_same_cohort() {
        let a = generate_cohort(&small(7)).unwrap();
        let b = generate_cohort(&small(7)).unwrap();
        assert_eq!(a, b);
        let c = generate_cohort(&small(8)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn thread_count_does_not_change_output() {
        let cfg = small(3);
        let one = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(|| generate_cohort(&cfg).unwrap());
        let four = rayon::ThreadPoolBuilder::new()
            .num_threads(4)
            .build()
            .unwrap()
            .install(|| generate_cohort(&cfg).unwrap());
        assert_eq!(one, four);
    }

    #[test]
    fn schools_and_pupils_are_well_formed() {
        let c = generate_cohort(&small(5)).unwrap();
        assert_eq!(c.schools().len(), 40);
        for p in c.pupils() {
            assert!((0.0..=90.0).contains(&p.attainment8));
            let g = crate::design::ks2_band_of(p.ks2).unwrap();
            assert_eq!(g.representative_value, p.ks2);
        }
    }

    #[test]
    fn noise_free_cohort_recovers_coefficients_exactly() {
        let mut cfg = small(9);
        cfg.sigma_u = 0.0;
        cfg.sigma_e = 0.0;
        // lowest possible prediction is positive; the highest needs a rare
        // combination, checked below
        cfg.set_coefficient("const", 25.0).unwrap();
        let cohort = generate_cohort(&cfg).unwrap();
        assert!(cohort.pupils().iter().all(|p| p.attainment8 > 0.0 && p.attainment8 < 90.0));
        let fit = crate::valueadded::run_pipeline(&cohort, SpecName::Adjusted).unwrap();
        for (label, truth) in SynthConfig::coefficient_labels().iter().zip(&cfg.coefficients) {
            if let Some(est) = fit.fit.coefficient(label) {
                assert!((est - truth).abs() < 1e-8, "{label}: {est} vs {truth}");
            } else {
                assert!(fit.dropped_columns.contains(label));
            }
        }
        assert!(fit.pupil_scores.iter().all(|p| p.score.abs() < 1e-9));
    }

    #[test]
    fn independent_link_keeps_ks2_unrelated_to_background() {
        let mut cfg = small(4);
        cfg.n_schools = 200;
        cfg.ks2_background_link = 0.0;
        let cohort = generate_cohort(&cfg).unwrap();
        let (mut fsm_ks2, mut rest_ks2, mut n_fsm) = (0.0, 0.0, 0usize);
        for p in cohort.pupils() {
            if p.fsm == Fsm::Eligible {
                fsm_ks2 += p.ks2;
                n_fsm += 1;
            } else {
                rest_ks2 += p.ks2;
            }
        }
        let gap = fsm_ks2 / n_fsm as f64 - rest_ks2 / (cohort.len() - n_fsm) as f64;
        assert!(gap.abs() < 0.05, "{gap}");
        cfg.ks2_background_link = 0.5;
        let linked = generate_cohort(&cfg).unwrap();
        let (mut a, mut b, mut n) = (0.0, 0.0, 0usize);
        for p in linked.pupils() {
            if p.fsm == Fsm::Eligible {
                a += p.ks2;
                n += 1;
            } else {
                b += p.ks2;
            }
        }
        let linked_gap = a / n as f64 - b / (linked.len() - n) as f64;
        assert!(linked_gap < -0.1, "{linked_gap}");
    }

    #[test]
    fn background_distribution_is_a_distribution() {
        let cfg = SynthConfig::default();
        let model = Model::new(&cfg);
        let d = &model.standard;
        let total: f64 = d.mass.iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
        let max_below = d
            .below
            .iter()
            .zip(&d.mass)
            .map(|(b, m)| b + m)
            .fold(0.0f64, f64::max);
        assert!((max_below - 1.0).abs() < 1e-12);
    }

    #[test]
    fn concentration_reweights_marginals() {
        let mut cfg = SynthConfig::default();
        cfg.concentration = Some(Concentration {
            characteristic: Characteristic::Language,
            category: "english_additional".into(),
            school_share: 0.2,
            inside_prob: 0.5,
            outside_prob: 0.0,
        });
        cfg.validate().unwrap();
        let inside = marginals_for(&cfg, true);
        let outside = marginals_for(&cfg, false);
        assert_eq!(inside[3], vec![0.5, 0.5]);
        assert_eq!(outside[3], vec![1.0, 0.0]);
        assert_eq!(inside[0], cfg.pupil_marginals.month);
    }
}
