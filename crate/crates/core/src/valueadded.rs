//! The two-stage progress pipeline: regression residuals become pupil
//! progress scores, which are averaged into school scores with 95%
//! intervals, and optionally shrunk towards zero.

use std::collections::BTreeMap;

use serde::Serialize;
use thiserror::Error;

use crate::cohort::{sample_sd, Cohort};
use crate::design::{build_design, model_spec, DesignError, SpecName};
use crate::numerics::{fit_ols, FittedModel, NumericsError};

/// Attainment 8 points gained by one grade higher in every subject (eight
/// subjects, English and maths double weighted).
pub const POINTS_PER_GRADE: f64 = 10.0;

/// Normal critical value for a two-sided 95% interval.
pub const Z_95: f64 = 1.96;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ValueAddedError {
    #[error(transparent)]
    Design(#[from] DesignError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error("school {0} has no pupils")]
    NoPupils(String),
    #[error("national standard deviation must be positive, got {0}")]
    InvalidSd(f64),
    #[error("need at least two schools")]
    TooFewSchools,
    #[error("within-school variance undefined: every school has one pupil")]
    DegenerateWithin,
    #[error("{0} scores for {1} pupils")]
    LengthMismatch(usize, usize),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PupilProgress {
    pub pupil_id: String,
    /// Grades per subject relative to the model prediction.
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SchoolScore {
    pub school_id: String,
    pub n_pupils: usize,
    pub score: f64,
    pub se: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// The interval excludes zero.
    pub significant: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineResult {
    pub spec: SpecName,
    pub fit: FittedModel,
    /// Design columns dropped: empty categories, and the stand-in for an
    /// empty reference category.
    pub dropped_columns: Vec<String>,
    pub pupil_scores: Vec<PupilProgress>,
    /// Ordered by descending score.
    pub school_scores: Vec<SchoolScore>,
    pub national_sd: f64,
}

impl PipelineResult {
    pub fn scores(&self) -> Vec<f64> {
        self.pupil_scores.iter().map(|p| p.score).collect()
    }

    pub fn school(&self, id: &str) -> Option<&SchoolScore> {
        self.school_scores.iter().find(|s| s.school_id == id)
    }

    /// School scores keyed by school id.
    pub fn school_map(&self) -> BTreeMap<&str, &SchoolScore> {
        self.school_scores
            .iter()
            .map(|s| (s.school_id.as_str(), s))
            .collect()
    }
}

/// Fits the named specification and derives pupil and school progress.
pub fn run_pipeline(cohort: &Cohort, spec: SpecName) -> Result<PipelineResult, ValueAddedError> {
    let model = model_spec(spec);
    let mut design = build_design(cohort, &model)?;
    let mut dropped_columns = design.matrix.drop_empty_columns();
    for label in &dropped_columns {
        log::warn!("{spec} model: no pupils in category {label}; column dropped");
    }
    // an empty reference level leaves the remaining dummies summing to the
    // intercept; the lowest occupied level stands in for it
    for factor in &model.factors {
        let mut lowest = usize::MAX;
        for p in cohort.pupils() {
            lowest = lowest.min(factor.level_of(p)?);
        }
        if lowest > 0 && lowest != usize::MAX {
            let label = &factor.level_labels()[lowest];
            design.matrix.drop_column(label);
            log::warn!("{spec} model: reference {} category is empty; {label} used as reference", factor.name());
            dropped_columns.push(label.clone());
        }
    }
    let fit = fit_ols(&design.matrix, &design.response)?;
    let pupil_scores: Vec<PupilProgress> = cohort
        .pupils()
        .iter()
        .zip(&fit.residuals)
        .map(|(p, e)| PupilProgress {
            pupil_id: p.pupil_id.clone(),
            score: e / POINTS_PER_GRADE,
        })
        .collect();
    let scores: Vec<f64> = pupil_scores.iter().map(|p| p.score).collect();
    let national_sd = sample_sd(&scores);
    let school_scores = school_scores(&scores, &design.cluster_ids, national_sd)?;
    Ok(PipelineResult {
        spec,
        fit,
        dropped_columns,
        pupil_scores,
        school_scores,
        national_sd,
    })
}

/// Groups values by school id, in id order.
pub(crate) fn group_by_school<'a, S: AsRef<str>>(
    values: &[f64],
    assignment: &'a [S],
) -> Result<BTreeMap<&'a str, Vec<f64>>, ValueAddedError> {
    if values.len() != assignment.len() {
        return Err(ValueAddedError::LengthMismatch(values.len(), assignment.len()));
    }
    let mut groups: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for (v, s) in values.iter().zip(assignment) {
        groups.entry(s.as_ref()).or_default().push(*v);
    }
    Ok(groups)
}

/// School means of pupil scores with `se = national_sd / sqrt(n)` and a
/// `score -/+ 1.96 se` interval. Sorted by descending score, then id.
pub fn school_scores<S: AsRef<str>>(
    pupil_scores: &[f64],
    assignment: &[S],
    national_sd: f64,
) -> Result<Vec<SchoolScore>, ValueAddedError> {
    if !(national_sd > 0.0 && national_sd.is_finite()) {
        return Err(ValueAddedError::InvalidSd(national_sd));
    }
    let groups = group_by_school(pupil_scores, assignment)?;
    let mut out: Vec<SchoolScore> = groups
        .into_iter()
        .map(|(id, v)| school_score(id, &v, national_sd))
        .collect::<Result<_, _>>()?;
    out.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.school_id.cmp(&b.school_id)));
    Ok(out)
}

pub fn school_score(school_id: &str, scores: &[f64], national_sd: f64) -> Result<SchoolScore, ValueAddedError> {
    if scores.is_empty() {
        return Err(ValueAddedError::NoPupils(school_id.to_string()));
    }
    let n = scores.len();
    let score = scores.iter().sum::<f64>() / n as f64;
    let se = national_sd / (n as f64).sqrt();
    let half = Z_95 * se;
    Ok(SchoolScore {
        school_id: school_id.to_string(),
        n_pupils: n,
        score,
        se,
        ci_low: score - half,
        ci_high: score + half,
        significant: score.abs() > half,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShrunkSchool {
    pub school_id: String,
    pub n_pupils: usize,
    pub raw_score: f64,
    pub lambda: f64,
    pub shrunk_score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShrinkageEstimates {
    /// Between-school variance (grade^2), clamped at zero.
    pub sigma2_between: f64,
    /// Pooled within-school variance (grade^2).
    pub sigma2_within: f64,
    /// In school id order.
    pub schools: Vec<ShrunkSchool>,
}

impl ShrinkageEstimates {
    pub fn school(&self, id: &str) -> Option<&ShrunkSchool> {
        self.schools.iter().find(|s| s.school_id == id)
    }
}

/// Empirical-Bayes shrinkage of school means towards zero.
///
/// Variance components come from the unbalanced one-way ANOVA moment
/// estimator: the pooled within-school variance, and
/// `max(0, (MSB - s2_within) / n0)` with `n0 = (N - sum n_j^2 / N) / (M - 1)`.
/// Each school mean is multiplied by
/// `lambda_j = s2_between / (s2_between + s2_within / n_j)`.
pub fn shrink_school_scores<S: AsRef<str>>(
    pupil_scores: &[f64],
    assignment: &[S],
) -> Result<ShrinkageEstimates, ValueAddedError> {
    let groups = group_by_school(pupil_scores, assignment)?;
    let m = groups.len();
    if m < 2 {
        return Err(ValueAddedError::TooFewSchools);
    }
    let n: usize = groups.values().map(Vec::len).sum();
    if n == m {
        return Err(ValueAddedError::DegenerateWithin);
    }
    let grand = pupil_scores.iter().sum::<f64>() / n as f64;

    let mut within_ss = 0.0;
    let mut between_ss = 0.0;
    let mut sum_n2 = 0.0;
    let means: Vec<(&str, usize, f64)> = groups
        .iter()
        .map(|(id, v)| {
            let nj = v.len();
            let mean = v.iter().sum::<f64>() / nj as f64;
            within_ss += v.iter().map(|y| (y - mean) * (y - mean)).sum::<f64>();
            between_ss += nj as f64 * (mean - grand) * (mean - grand);
            sum_n2 += (nj * nj) as f64;
            (*id, nj, mean)
        })
        .collect();

    let sigma2_within = within_ss / (n - m) as f64;
    if !(sigma2_within > 0.0) {
        return Err(ValueAddedError::DegenerateWithin);
    }
    let msb = between_ss / (m - 1) as f64;
    let n0 = (n as f64 - sum_n2 / n as f64) / (m - 1) as f64;
    let sigma2_between = ((msb - sigma2_within) / n0).max(0.0);

    let schools = means
        .into_iter()
        .map(|(id, nj, mean)| {
            let lambda = sigma2_between / (sigma2_between + sigma2_within / nj as f64);
            ShrunkSchool {
                school_id: id.to_string(),
                n_pupils: nj,
                raw_score: mean,
                lambda,
                shrunk_score: lambda * mean,
            }
        })
        .collect();
    Ok(ShrinkageEstimates {
        sigma2_between,
        sigma2_within,
        schools,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn empty_reference_group_is_replaced() {
        use crate::cohort::tests::{pupil, school};
        use crate::cohort::validate_cohort;
        // KS2 groups 3, 4 and 22 only; group 1 is the usual reference
        let pupils = vec![
            pupil("p1", "A", 2.5, 20.0),
            pupil("p2", "A", 2.5, 24.0),
            pupil("p3", "B", 2.8, 30.0),
            pupil("p4", "B", 2.8, 34.0),
            pupil("p5", "A", 4.6, 50.0),
            pupil("p6", "B", 4.6, 56.0),
        ];
        let cohort = validate_cohort(pupils, vec![school("A"), school("B")]).unwrap().cohort;
        let r = run_pipeline(&cohort, SpecName::Base).unwrap();
        assert!(r.dropped_columns.contains(&"ks2_g3".to_string()));
        assert_eq!(r.fit.labels, ["const", "ks2_g4", "ks2_g22"]);
        assert!(close(r.fit.coefficient("const").unwrap(), 22.0, 1e-9));
        assert!(close(r.fit.coefficient("ks2_g22").unwrap(), 31.0, 1e-9));
        let scores = r.scores();
        assert!(close(scores[0], -0.2, 1e-12));
        assert!(close(scores[5], 0.3, 1e-12));
    }

    #[test]
    fn interval_arithmetic() {
        let s = school_score("a", &vec![0.2; 100], 1.06).unwrap();
        assert!(close(s.se, 0.106, 1e-12));
        assert!(close(s.ci_low, -0.00776, 1e-12) && close(s.ci_high, 0.40776, 1e-12));
        assert!(!s.significant);

        let s = school_score("b", &vec![0.2; 400], 1.06).unwrap();
        assert!(close(s.se, 0.053, 1e-12));
        assert!(close(s.ci_low, 0.09612, 1e-12) && close(s.ci_high, 0.30388, 1e-12));
        assert!(s.significant);

        let s = school_score("c", &[2.0], 1.06).unwrap();
        assert!(close(s.ci_low, -0.0776, 1e-12) && close(s.ci_high, 4.0776, 1e-12));
        assert!(!s.significant);
        assert!(matches!(school_score("d", &[], 1.0), Err(ValueAddedError::NoPupils(_))));
    }

    #[test]
    fn school_scores_are_sorted_and_checked() {
        let v = [0.1, 0.3, -0.2, 0.5];
        let ids = ["a", "b", "a", "c"];
        let out = school_scores(&v, &ids, 1.0).unwrap();
        let order: Vec<&str> = out.iter().map(|s| s.school_id.as_str()).collect();
        assert_eq!(order, ["c", "b", "a"]);
        assert_eq!(out[2].n_pupils, 2);
        assert!(matches!(school_scores(&v, &ids, 0.0), Err(ValueAddedError::InvalidSd(_))));
        assert!(matches!(
            school_scores(&v, &ids[..3], 1.0),
            Err(ValueAddedError::LengthMismatch(4, 3))
        ));
    }

    #[test]
    fn two_school_hand_example() {
        // A = {1, 3}, B = {-2, 0}
        // means 2, -1; grand 0.5; within SS 2 + 2 = 4 over N - M = 2 -> 2
        // MSB = 2(1.5^2) + 2(1.5^2) = 9 over 1; n0 = (4 - 8/4)/1 = 2
        // between = (9 - 2) / 2 = 3.5; lambda = 3.5 / (3.5 + 1) = 7/9
        let v = [1.0, 3.0, -2.0, 0.0];
        let ids = ["A", "A", "B", "B"];
        let est = shrink_school_scores(&v, &ids).unwrap();
        assert!(close(est.sigma2_within, 2.0, 1e-12));
        assert!(close(est.sigma2_between, 3.5, 1e-12));
        let a = est.school("A").unwrap();
        let b = est.school("B").unwrap();
        assert!(close(a.lambda, 7.0 / 9.0, 1e-12));
        assert!(close(a.shrunk_score, 14.0 / 9.0, 1e-12));
        assert!(close(b.shrunk_score, -7.0 / 9.0, 1e-12));
    }

    #[test]
    fn clamp_to_zero_between() {
        // identical school means: MSB = 0
        let v = [1.0, -1.0, 1.0, -1.0, 0.5, -0.5];
        let ids = ["a", "a", "b", "b", "c", "c"];
        let est = shrink_school_scores(&v, &ids).unwrap();
        assert_eq!(est.sigma2_between, 0.0);
        assert!(est.schools.iter().all(|s| s.lambda == 0.0 && s.shrunk_score == 0.0));
    }

    #[test]
    fn shrinkage_errors() {
        assert_eq!(
            shrink_school_scores(&[1.0, 2.0], &["a", "a"]).unwrap_err(),
            ValueAddedError::TooFewSchools
        );
        assert_eq!(
            shrink_school_scores(&[1.0, 2.0], &["a", "b"]).unwrap_err(),
            ValueAddedError::DegenerateWithin
        );
    }

    #[test]
    fn large_schools_approach_raw_means() {
        let mut v = Vec::new();
        let mut ids = Vec::new();
        for (id, mean, n) in [("a", 0.5, 20_000), ("b", -0.5, 20_000), ("c", 0.1, 5)] {
            for i in 0..n {
                v.push(mean + if i % 2 == 0 { 1.0 } else { -1.0 });
                ids.push(id);
            }
        }
        let est = shrink_school_scores(&v, &ids).unwrap();
        let a = est.school("a").unwrap();
        assert!(a.lambda > 0.999);
        assert!(close(a.shrunk_score, a.raw_score, 1e-3));
        assert!(est.school("c").unwrap().lambda < a.lambda);
    }

    proptest! {
        #[test]
        fn shrinkage_properties(
            schools in prop::collection::vec(
                (prop::collection::vec(-3f64..3.0, 1..12), -1.5f64..1.5), 2..12)
        ) {
            let mut v = Vec::new();
            let mut ids = Vec::new();
            for (j, (noise, effect)) in schools.iter().enumerate() {
                for e in noise {
                    v.push(effect + e);
                    ids.push(format!("s{j:02}"));
                }
            }
            let Ok(est) = shrink_school_scores(&v, &ids) else { return Ok(()); };
            prop_assert!(est.sigma2_between >= 0.0);
            for s in &est.schools {
                prop_assert!((0.0..1.0).contains(&s.lambda));
                prop_assert!(s.shrunk_score.abs() <= s.raw_score.abs());
                prop_assert!(s.shrunk_score == 0.0 || s.shrunk_score.signum() == s.raw_score.signum());
            }
            for a in &est.schools {
                for b in &est.schools {
                    if a.n_pupils > b.n_pupils {
                        prop_assert!(a.lambda >= b.lambda);
                    }
                    if a.n_pupils == b.n_pupils && a.raw_score >= b.raw_score {
                        prop_assert!(a.shrunk_score >= b.shrunk_score);
                    }
                }
            }
        }
    }
}
