//! Pupil, school and cohort records.
//!
//! Every categorical attribute is a closed enumeration with a fixed
//! lowercase token used in the CSV files. Records are plain data; a
//! [`Cohort`] is only obtained through [`validate_cohort`], which enforces
//! the referential and range invariants.

use std::collections::{BTreeMap, HashSet};
use std::fmt;

use thiserror::Error;

/// Upper bound accepted for Attainment 8 points.
pub const ATTAINMENT8_MAX: f64 = 90.0;

/// Closed set of categories with stable tokens.
pub trait Categorical: Copy + Eq + Sized + 'static {
    /// All categories in canonical order. The first is the model reference.
    const ALL: &'static [Self];
    /// Name of the attribute, e.g. `"ethnicity"`.
    const FACTOR: &'static str;

    fn token(self) -> &'static str;

    fn index(self) -> usize {
        Self::ALL.iter().position(|&c| c == self).unwrap()
    }

    fn from_token(token: &str) -> Option<Self> {
        Self::ALL.iter().copied().find(|c| c.token() == token)
    }
}

macro_rules! categorical {
    (
        $(#[$meta:meta])*
        $name:ident, $factor:literal {
            $($variant:ident => $token:literal),+ $(,)?
        }
    ) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
        pub enum $name {
            $($variant),+
        }

        impl Categorical for $name {
            const ALL: &'static [Self] = &[$($name::$variant),+];
            const FACTOR: &'static str = $factor;

            fn token(self) -> &'static str {
                match self {
                    $($name::$variant => $token),+
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.token())
            }
        }
    };
}

categorical! {
    /// Month of birth within the academic year (September is oldest).
    Month, "month" {
        September => "september",
        October => "october",
        November => "november",
        December => "december",
        January => "january",
        February => "february",
        March => "march",
        April => "april",
        May => "may",
        June => "june",
        July => "july",
        August => "august",
    }
}

categorical! {
    Gender, "gender" {
        Male => "male",
        Female => "female",
    }
}

categorical! {
    /// The twenty ethnic group codes, White British first.
    Ethnicity, "ethnicity" {
        WhiteBritish => "white_british",
        WhiteIrish => "white_irish",
        TravellerOfIrishHeritage => "traveller_of_irish_heritage",
        GypsyRoma => "gypsy_roma",
        AnyOtherWhite => "any_other_white",
        BlackAfrican => "black_african",
        BlackCaribbean => "black_caribbean",
        AnyOtherBlack => "any_other_black",
        Indian => "indian",
        Pakistani => "pakistani",
        Bangladeshi => "bangladeshi",
        AnyOtherAsian => "any_other_asian",
        Chinese => "chinese",
        WhiteAndBlackAfrican => "white_and_black_african",
        WhiteAndBlackCaribbean => "white_and_black_caribbean",
        WhiteAndAsian => "white_and_asian",
        AnyOtherMixed => "any_other_mixed",
        AnyOtherEthnicGroup => "any_other_ethnic_group",
        InformationNotYetObtained => "information_not_yet_obtained",
        Refused => "refused",
    }
}

categorical! {
    /// First language.
    Language, "language" {
        EnglishFirst => "english_first",
        EnglishAdditional => "english_additional",
    }
}

categorical! {
    /// Special educational needs status.
    Sen, "sen" {
        None => "none",
        Support => "sen_support",
        Statement => "statement",
    }
}

categorical! {
    /// Free-school-meal eligibility in the last six years.
    Fsm, "fsm" {
        NotEligible => "not_eligible",
        Eligible => "eligible",
    }
}

categorical! {
    Region, "region" {
        London => "london",
        SouthEast => "south_east",
        SouthWest => "south_west",
        WestMidlands => "west_midlands",
        NorthWest => "north_west",
        NorthEast => "north_east",
        YorkshireAndHumber => "yorkshire_and_humber",
        EastMidlands => "east_midlands",
        EastOfEngland => "east_of_england",
    }
}

categorical! {
    SchoolType, "school_type" {
        Community => "community",
        Foundation => "foundation",
        VoluntaryAided => "voluntary_aided",
        VoluntaryControlled => "voluntary_controlled",
        CityTechnologyCollege => "city_technology_college",
        SponsoredAcademy => "sponsored_academy",
        ConverterAcademy => "converter_academy",
        Free => "free",
        Studio => "studio",
        UniversityTechnicalCollege => "university_technical_college",
        FurtherEducationCollege => "further_education_college",
    }
}

categorical! {
    Admissions, "admissions" {
        Comprehensive => "comprehensive",
        Grammar => "grammar",
        SecondaryModern => "secondary_modern",
    }
}

categorical! {
    /// Age range taught. Tokens use an underscore in place of the dash.
    AgeRange, "age_range" {
        From11To18 => "11_18",
        From11To16 => "11_16",
        From14To18 => "14_18",
        From4To18 => "4_18",
        From4To16 => "4_16",
    }
}

categorical! {
    SchoolGender, "school_gender" {
        Mixed => "mixed",
        Boys => "boys",
        Girls => "girls",
    }
}

categorical! {
    Religion, "religion" {
        None => "none",
        ChurchOfEngland => "church_of_england",
        RomanCatholic => "roman_catholic",
        OtherChristian => "other_christian",
        Jewish => "jewish",
        Muslim => "muslim",
        Sikh => "sikh",
    }
}

/// One pupil in the analysis sample.
#[derive(Debug, Clone, PartialEq)]
pub struct PupilRecord {
    pub pupil_id: String,
    pub school_id: String,
    /// KS2 fine-grade score.
    pub ks2: f64,
    /// Attainment 8 points.
    pub attainment8: f64,
    pub month: Month,
    pub gender: Gender,
    pub ethnicity: Ethnicity,
    pub language: Language,
    pub sen: Sen,
    pub fsm: Fsm,
    /// Neighbourhood deprivation decile, 1 = least deprived.
    pub idaci_decile: u8,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SchoolRecord {
    pub school_id: String,
    pub region: Region,
    pub school_type: SchoolType,
    pub admissions: Admissions,
    pub age_range: AgeRange,
    pub school_gender: SchoolGender,
    pub religion: Religion,
    pub school_idaci_decile: u8,
}

/// A validated set of pupils and the schools they attend.
#[derive(Debug, Clone, PartialEq)]
pub struct Cohort {
    pupils: Vec<PupilRecord>,
    schools: BTreeMap<String, SchoolRecord>,
}

impl Cohort {
    pub fn pupils(&self) -> &[PupilRecord] {
        &self.pupils
    }

    /// Schools keyed by id, in id order.
    pub fn schools(&self) -> &BTreeMap<String, SchoolRecord> {
        &self.schools
    }

    pub fn school(&self, id: &str) -> Option<&SchoolRecord> {
        self.schools.get(id)
    }

    pub fn school_of(&self, pupil: &PupilRecord) -> &SchoolRecord {
        // validated: every pupil resolves
        &self.schools[&pupil.school_id]
    }

    /// School id of every pupil, in pupil order.
    pub fn school_ids(&self) -> Vec<&str> {
        self.pupils.iter().map(|p| p.school_id.as_str()).collect()
    }

    pub fn len(&self) -> usize {
        self.pupils.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pupils.is_empty()
    }

    pub fn into_parts(self) -> (Vec<PupilRecord>, Vec<SchoolRecord>) {
        (self.pupils, self.schools.into_values().collect())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CohortError {
    #[error("pupil {pupil_id} refers to unknown school {school_id}")]
    DanglingSchoolRef { pupil_id: String, school_id: String },
    #[error("duplicate {kind} id {id}")]
    DuplicateId { kind: &'static str, id: String },
    #[error("row {row}: field {field} out of range ({value})")]
    OutOfRangeField {
        field: &'static str,
        /// 1-based position in the input list.
        row: usize,
        value: String,
    },
    #[error("no values to summarise")]
    EmptyInput,
}

/// Result of validation: the cohort plus the ids of schools dropped for
/// having no pupils.
#[derive(Debug, Clone, PartialEq)]
pub struct Validated {
    pub cohort: Cohort,
    pub dropped_schools: Vec<String>,
}

/// Checks ids, references and field ranges, and drops schools without
/// pupils.
pub fn validate_cohort(
    pupils: Vec<PupilRecord>,
    schools: Vec<SchoolRecord>,
) -> Result<Validated, CohortError> {
    let mut school_map = BTreeMap::new();
    for (i, s) in schools.into_iter().enumerate() {
        if !(1..=10).contains(&s.school_idaci_decile) {
            return Err(CohortError::OutOfRangeField {
                field: "school_idaci_decile",
                row: i + 1,
                value: s.school_idaci_decile.to_string(),
            });
        }
        if school_map.contains_key(&s.school_id) {
            return Err(CohortError::DuplicateId {
                kind: "school",
                id: s.school_id,
            });
        }
        school_map.insert(s.school_id.clone(), s);
    }

    let mut seen = HashSet::with_capacity(pupils.len());
    let mut used = HashSet::new();
    for (i, p) in pupils.iter().enumerate() {
        let row = i + 1;
        if !seen.insert(p.pupil_id.as_str()) {
            return Err(CohortError::DuplicateId {
                kind: "pupil",
                id: p.pupil_id.clone(),
            });
        }
        if !school_map.contains_key(&p.school_id) {
            return Err(CohortError::DanglingSchoolRef {
                pupil_id: p.pupil_id.clone(),
                school_id: p.school_id.clone(),
            });
        }
        used.insert(p.school_id.as_str());
        if !(p.ks2.is_finite() && (0.0..=6.0).contains(&p.ks2)) {
            return Err(CohortError::OutOfRangeField {
                field: "ks2",
                row,
                value: p.ks2.to_string(),
            });
        }
        if !(p.attainment8.is_finite() && (0.0..=ATTAINMENT8_MAX).contains(&p.attainment8)) {
            return Err(CohortError::OutOfRangeField {
                field: "attainment8",
                row,
                value: p.attainment8.to_string(),
            });
        }
        if !(1..=10).contains(&p.idaci_decile) {
            return Err(CohortError::OutOfRangeField {
                field: "idaci_decile",
                row,
                value: p.idaci_decile.to_string(),
            });
        }
    }

    let dropped: Vec<String> = school_map
        .keys()
        .filter(|id| !used.contains(id.as_str()))
        .cloned()
        .collect();
    drop(used);
    drop(seen);
    if !dropped.is_empty() {
        log::warn!("dropping {} schools with no pupils", dropped.len());
        for id in &dropped {
            school_map.remove(id);
        }
    }

    Ok(Validated {
        cohort: Cohort {
            pupils,
            schools: school_map,
        },
        dropped_schools: dropped,
    })
}

/// Sample summary of a score distribution.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct SummaryStats {
    pub n: usize,
    pub mean: f64,
    /// Sample standard deviation (N - 1 denominator); 0 for a single value.
    pub sd: f64,
    pub min: f64,
    pub p10: f64,
    pub p25: f64,
    pub p50: f64,
    pub p75: f64,
    pub p90: f64,
    pub max: f64,
}

/// Linear interpolation between order statistics at 0-based position
/// `p * (n - 1)`.
pub fn percentile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = p * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Two-pass sample standard deviation.
pub fn sample_sd(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let m = mean(values);
    let ss: f64 = values.iter().map(|v| (v - m) * (v - m)).sum();
    (ss / (values.len() - 1) as f64).sqrt()
}

pub fn summary_stats(values: &[f64]) -> Result<SummaryStats, CohortError> {
    if values.is_empty() {
        return Err(CohortError::EmptyInput);
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(SummaryStats {
        n: values.len(),
        mean: mean(&sorted),
        sd: sample_sd(&sorted),
        min: sorted[0],
        p10: percentile_sorted(&sorted, 0.10),
        p25: percentile_sorted(&sorted, 0.25),
        p50: percentile_sorted(&sorted, 0.50),
        p75: percentile_sorted(&sorted, 0.75),
        p90: percentile_sorted(&sorted, 0.90),
        max: sorted[sorted.len() - 1],
    })
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use proptest::prelude::*;

    pub(crate) fn school(id: &str) -> SchoolRecord {
        SchoolRecord {
            school_id: id.to_string(),
            region: Region::London,
            school_type: SchoolType::Community,
            admissions: Admissions::Comprehensive,
            age_range: AgeRange::From11To18,
            school_gender: SchoolGender::Mixed,
            religion: Religion::None,
            school_idaci_decile: 5,
        }
    }

    pub(crate) fn pupil(id: &str, school: &str, ks2: f64, a8: f64) -> PupilRecord {
        PupilRecord {
            pupil_id: id.to_string(),
            school_id: school.to_string(),
            ks2,
            attainment8: a8,
            month: Month::September,
            gender: Gender::Male,
            ethnicity: Ethnicity::WhiteBritish,
            language: Language::EnglishFirst,
            sen: Sen::None,
            fsm: Fsm::NotEligible,
            idaci_decile: 1,
        }
    }

    #[test]
    fn enumerations_have_expected_sizes() {
        assert_eq!(Month::ALL.len(), 12);
        assert_eq!(Ethnicity::ALL.len(), 20);
        assert_eq!(Region::ALL.len(), 9);
        assert_eq!(SchoolType::ALL.len(), 11);
        assert_eq!(AgeRange::ALL.len(), 5);
        assert_eq!(Religion::ALL.len(), 7);
        assert_eq!(Ethnicity::from_token("chinese"), Some(Ethnicity::Chinese));
        assert_eq!(Ethnicity::from_token("chinese "), None);
        assert_eq!(Sen::Support.token(), "sen_support");
    }

    #[test]
    fn two_pupils_one_school() {
        let v = validate_cohort(
            vec![pupil("a", "s1", 4.6, 50.0), pupil("b", "s1", 4.2, 40.0)],
            vec![school("s1")],
        )
        .unwrap();
        assert_eq!(v.cohort.len(), 2);
        assert_eq!(v.cohort.schools().len(), 1);
        assert!(v.dropped_schools.is_empty());
    }

    #[test]
    fn dangling_reference() {
        let err = validate_cohort(vec![pupil("a", "X", 4.6, 50.0)], vec![school("s1")]).unwrap_err();
        assert_eq!(
            err,
            CohortError::DanglingSchoolRef {
                pupil_id: "a".into(),
                school_id: "X".into()
            }
        );
    }

    #[test]
    fn duplicate_ids() {
        let err = validate_cohort(
            vec![pupil("a", "s1", 4.6, 50.0), pupil("a", "s1", 4.6, 50.0)],
            vec![school("s1")],
        )
        .unwrap_err();
        assert!(matches!(err, CohortError::DuplicateId { kind: "pupil", .. }));
        let err = validate_cohort(vec![], vec![school("s1"), school("s1")]).unwrap_err();
        assert!(matches!(err, CohortError::DuplicateId { kind: "school", .. }));
    }

    #[test]
    fn out_of_range_fields() {
        let mut p = pupil("a", "s1", 4.6, 50.0);
        p.idaci_decile = 11;
        let err = validate_cohort(vec![pupil("z", "s1", 4.0, 1.0), p], vec![school("s1")]).unwrap_err();
        assert_eq!(
            err,
            CohortError::OutOfRangeField {
                field: "idaci_decile",
                row: 2,
                value: "11".into()
            }
        );
        let err = validate_cohort(vec![pupil("a", "s1", 4.6, 91.0)], vec![school("s1")]).unwrap_err();
        assert!(matches!(err, CohortError::OutOfRangeField { field: "attainment8", .. }));
        let err = validate_cohort(vec![pupil("a", "s1", f64::NAN, 50.0)], vec![school("s1")]).unwrap_err();
        assert!(matches!(err, CohortError::OutOfRangeField { field: "ks2", .. }));
    }

    #[test]
    fn empty_schools_are_dropped() {
        let v = validate_cohort(
            vec![pupil("a", "s1", 4.6, 50.0)],
            vec![school("s1"), school("s2")],
        )
        .unwrap();
        assert_eq!(v.dropped_schools, vec!["s2".to_string()]);
        assert!(v.cohort.school("s2").is_none());
    }

    #[test]
    fn validation_is_idempotent() {
        let v = validate_cohort(
            vec![pupil("a", "s1", 4.6, 50.0), pupil("b", "s2", 3.0, 20.0)],
            vec![school("s2"), school("s1"), school("s3")],
        )
        .unwrap();
        let (p, s) = v.cohort.clone().into_parts();
        let again = validate_cohort(p, s).unwrap();
        assert_eq!(again.cohort, v.cohort);
        assert!(again.dropped_schools.is_empty());
    }

    #[test]
    fn summary_of_small_lists() {
        let s = summary_stats(&[1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        assert_eq!((s.mean, s.p50, s.min, s.max), (3.0, 3.0, 1.0, 5.0));
        assert!((s.sd - 2.5f64.sqrt()).abs() < 1e-15);
        assert!((s.p10 - 1.4).abs() < 1e-12);
        let c = summary_stats(&[7.0, 7.0, 7.0]).unwrap();
        assert_eq!(c.sd, 0.0);
        for q in [c.p10, c.p25, c.p50, c.p75, c.p90] {
            assert_eq!(q, 7.0);
        }
        assert_eq!(summary_stats(&[]), Err(CohortError::EmptyInput));
    }

    #[test]
    fn median_of_uniform_draws() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let draws: Vec<f64> = (0..10_001).map(|_| rng.random::<f64>()).collect();
        let s = summary_stats(&draws).unwrap();
        assert!((s.p50 - 0.5).abs() < 0.02, "median {}", s.p50);
    }

    fn welford_sd(values: &[f64]) -> f64 {
        let (mut n, mut m, mut m2) = (0.0, 0.0, 0.0);
        for &v in values {
            n += 1.0;
            let d = v - m;
            m += d / n;
            m2 += d * (v - m);
        }
        (m2 / (n - 1.0)).sqrt()
    }

    proptest! {
        #[test]
        fn sd_agrees_with_single_pass(values in prop::collection::vec(-1e3f64..1e3, 2..200)) {
            let a = sample_sd(&values);
            let b = welford_sd(&values);
            prop_assert!((a - b).abs() <= 1e-10 * a.max(1e-300) || (a - b).abs() < 1e-12);
        }

        #[test]
        fn summary_is_permutation_invariant(
            values in prop::collection::vec(-50f64..50.0, 1..100),
            seed in any::<u64>(),
        ) {
            use rand::{seq::SliceRandom, SeedableRng};
            let mut shuffled = values.clone();
            shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let a = summary_stats(&values).unwrap();
            let b = summary_stats(&shuffled).unwrap();
            prop_assert_eq!(a, b);
            prop_assert!(a.min <= a.p10 && a.p10 <= a.p25 && a.p25 <= a.p50);
            prop_assert!(a.p50 <= a.p75 && a.p75 <= a.p90 && a.p90 <= a.max);
        }
    }
}
