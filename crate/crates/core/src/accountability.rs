//! Accountability outputs built from school scores: five-band
//! classification, floor standard, measure-to-measure transition tables,
//! league-table rank movement and group-gap reports.

use std::fmt;
use std::str::FromStr;

use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::cohort::{
    Admissions, AgeRange, Categorical, Cohort, Ethnicity, Fsm, Gender, Language, Month, PupilRecord, Region,
    Religion, SchoolGender, SchoolRecord, SchoolType, Sen,
};
use crate::design::DesignMatrix;
use crate::numerics::{
    cluster_robust_cov, fit_ols, pearson_corr, rank_competition, spearman_corr, wald_test, NumericsError, SquareMatrix,
    WaldTest,
};
use crate::valueadded::SchoolScore;

/// Rank-movement thresholds reported by default.
pub const DEFAULT_RANK_THRESHOLDS: [usize; 2] = [500, 1000];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AccountabilityError {
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("need at least two schools to compare")]
    EmptyInput,
    #[error("characteristic {0} has fewer than two non-empty categories")]
    SingleCategory(String),
    #[error("unknown characteristic {0:?}")]
    UnknownCharacteristic(String),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

/// Five-level school banding, 1 = well below average.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Band {
    WellBelow = 1,
    Below = 2,
    Average = 3,
    Above = 4,
    WellAbove = 5,
}

impl Band {
    /// Lowest band first.
    pub const ALL: [Band; 5] = [Band::WellBelow, Band::Below, Band::Average, Band::Above, Band::WellAbove];

    pub fn value(self) -> u8 {
        self as u8
    }

    pub fn token(self) -> &'static str {
        match self {
            Band::WellBelow => "well_below",
            Band::Below => "below",
            Band::Average => "average",
            Band::Above => "above",
            Band::WellAbove => "well_above",
        }
    }

    pub fn from_token(token: &str) -> Option<Band> {
        Band::ALL.into_iter().find(|b| b.token() == token)
    }

    fn index(self) -> usize {
        self as usize - 1
    }
}

impl fmt::Display for Band {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

impl Serialize for Band {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.token())
    }
}

/// Band of a school score (grade units) given whether its interval
/// excludes zero. A significant score of exactly zero is average.
pub fn band_of(score: f64, significant: bool) -> Band {
    if !significant {
        Band::Average
    } else if score >= 0.5 {
        Band::WellAbove
    } else if score > 0.0 {
        Band::Above
    } else if (-0.5..0.0).contains(&score) {
        Band::Below
    } else if score < -0.5 {
        Band::WellBelow
    } else {
        Band::Average
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BandedSchool {
    pub school_id: String,
    pub band: Band,
    /// Below the floor standard, i.e. well below average.
    pub below_floor: bool,
}

pub fn band_schools(scores: &[SchoolScore]) -> Vec<BandedSchool> {
    scores
        .iter()
        .map(|s| {
            let band = band_of(s.score, s.significant);
            BandedSchool {
                school_id: s.school_id.clone(),
                band,
                below_floor: band == Band::WellBelow,
            }
        })
        .collect()
}

/// Number of schools per band, lowest band first.
pub fn band_counts(bands: &[Band]) -> [usize; 5] {
    let mut counts = [0; 5];
    for b in bands {
        counts[b.index()] += 1;
    }
    counts
}

/// Cross-tabulation of bandings under two measures.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransitionTable {
    /// `counts[a][b]`: band `a` under the first measure, `b` under the
    /// second, both indexed lowest band first.
    pub counts: [[usize; 5]; 5],
    pub row_totals: [usize; 5],
    pub column_totals: [usize; 5],
    pub total: usize,
    /// Percent of each row; all zero for an empty row.
    pub row_percentages: [[f64; 5]; 5],
    /// Schools whose band differs between measures.
    pub changed: usize,
    pub changed_share: f64,
}

impl TransitionTable {
    pub fn count(&self, a: Band, b: Band) -> usize {
        self.counts[a.index()][b.index()]
    }
}

pub fn transition_table(bands_a: &[Band], bands_b: &[Band]) -> Result<TransitionTable, AccountabilityError> {
    if bands_a.len() != bands_b.len() {
        return Err(AccountabilityError::LengthMismatch(bands_a.len(), bands_b.len()));
    }
    let mut counts = [[0usize; 5]; 5];
    for (a, b) in bands_a.iter().zip(bands_b) {
        counts[a.index()][b.index()] += 1;
    }
    let mut row_totals = [0; 5];
    let mut column_totals = [0; 5];
    let mut row_percentages = [[0.0; 5]; 5];
    for a in 0..5 {
        for b in 0..5 {
            row_totals[a] += counts[a][b];
            column_totals[b] += counts[a][b];
        }
        if row_totals[a] > 0 {
            for b in 0..5 {
                row_percentages[a][b] = 100.0 * counts[a][b] as f64 / row_totals[a] as f64;
            }
        }
    }
    let total = bands_a.len();
    let changed = total - (0..5).map(|i| counts[i][i]).sum::<usize>();
    Ok(TransitionTable {
        counts,
        row_totals,
        column_totals,
        total,
        row_percentages,
        changed,
        changed_share: if total > 0 { changed as f64 / total as f64 } else { 0.0 },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RankRow {
    pub rank_a: usize,
    pub rank_b: usize,
    /// `rank_a - rank_b`; positive means the school moves up under B.
    pub delta: i64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThresholdCount {
    pub threshold: usize,
    /// Schools with `|delta| >= threshold`.
    pub count: usize,
    pub share: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankReport {
    /// Parallel to the input score vectors.
    pub rows: Vec<RankRow>,
    pub thresholds: Vec<ThresholdCount>,
    pub max_abs_delta: u64,
    pub pearson: f64,
    pub spearman: f64,
}

/// Competition ranks under both measures, movement counts and the
/// correlations of the raw scores.
pub fn rank_movement(
    scores_a: &[f64],
    scores_b: &[f64],
    thresholds: &[usize],
) -> Result<RankReport, AccountabilityError> {
    if scores_a.len() != scores_b.len() {
        return Err(AccountabilityError::LengthMismatch(scores_a.len(), scores_b.len()));
    }
    if scores_a.len() < 2 {
        return Err(AccountabilityError::EmptyInput);
    }
    let ra = rank_competition(scores_a)?;
    let rb = rank_competition(scores_b)?;
    let rows: Vec<RankRow> = ra
        .iter()
        .zip(&rb)
        .map(|(&a, &b)| RankRow {
            rank_a: a,
            rank_b: b,
            delta: a as i64 - b as i64,
        })
        .collect();
    let n = rows.len() as f64;
    let thresholds = thresholds
        .iter()
        .map(|&t| {
            let count = rows.iter().filter(|r| r.delta.unsigned_abs() >= t as u64).count();
            ThresholdCount {
                threshold: t,
                count,
                share: count as f64 / n,
            }
        })
        .collect();
    Ok(RankReport {
        max_abs_delta: rows.iter().map(|r| r.delta.unsigned_abs()).max().unwrap_or(0),
        rows,
        thresholds,
        pearson: pearson_corr(scores_a, scores_b)?,
        spearman: spearman_corr(scores_a, scores_b)?,
    })
}

/// Pupil or school attribute a gap report can be broken down by.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Characteristic {
    Month,
    Gender,
    Ethnicity,
    Language,
    Sen,
    Fsm,
    IdaciDecile,
    Region,
    SchoolType,
    Admissions,
    AgeRange,
    SchoolGender,
    Religion,
    SchoolIdaciDecile,
}

fn tokens<C: Categorical>() -> Vec<String> {
    C::ALL.iter().map(|c| c.token().to_string()).collect()
}

impl Characteristic {
    pub const ALL: [Characteristic; 14] = [
        Characteristic::Month,
        Characteristic::Gender,
        Characteristic::Ethnicity,
        Characteristic::Language,
        Characteristic::Sen,
        Characteristic::Fsm,
        Characteristic::IdaciDecile,
        Characteristic::Region,
        Characteristic::SchoolType,
        Characteristic::Admissions,
        Characteristic::AgeRange,
        Characteristic::SchoolGender,
        Characteristic::Religion,
        Characteristic::SchoolIdaciDecile,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Characteristic::Month => "month",
            Characteristic::Gender => "gender",
            Characteristic::Ethnicity => "ethnicity",
            Characteristic::Language => "language",
            Characteristic::Sen => "sen",
            Characteristic::Fsm => "fsm",
            Characteristic::IdaciDecile => "idaci_decile",
            Characteristic::Region => "region",
            Characteristic::SchoolType => "school_type",
            Characteristic::Admissions => "admissions",
            Characteristic::AgeRange => "age_range",
            Characteristic::SchoolGender => "school_gender",
            Characteristic::Religion => "religion",
            Characteristic::SchoolIdaciDecile => "school_idaci_decile",
        }
    }

    pub fn is_school_level(self) -> bool {
        matches!(
            self,
            Characteristic::Region
                | Characteristic::SchoolType
                | Characteristic::Admissions
                | Characteristic::AgeRange
                | Characteristic::SchoolGender
                | Characteristic::Religion
                | Characteristic::SchoolIdaciDecile
        )
    }

    /// Category tokens in canonical order.
    pub fn categories(self) -> Vec<String> {
        match self {
            Characteristic::Month => tokens::<Month>(),
            Characteristic::Gender => tokens::<Gender>(),
            Characteristic::Ethnicity => tokens::<Ethnicity>(),
            Characteristic::Language => tokens::<Language>(),
            Characteristic::Sen => tokens::<Sen>(),
            Characteristic::Fsm => tokens::<Fsm>(),
            Characteristic::Region => tokens::<Region>(),
            Characteristic::SchoolType => tokens::<SchoolType>(),
            Characteristic::Admissions => tokens::<Admissions>(),
            Characteristic::AgeRange => tokens::<AgeRange>(),
            Characteristic::SchoolGender => tokens::<SchoolGender>(),
            Characteristic::Religion => tokens::<Religion>(),
            Characteristic::IdaciDecile | Characteristic::SchoolIdaciDecile => {
                (1..=10).map(|d| d.to_string()).collect()
            }
        }
    }

    /// 0-based category of a pupil.
    pub fn category_of(self, pupil: &PupilRecord, school: &SchoolRecord) -> usize {
        match self {
            Characteristic::Month => pupil.month.index(),
            Characteristic::Gender => pupil.gender.index(),
            Characteristic::Ethnicity => pupil.ethnicity.index(),
            Characteristic::Language => pupil.language.index(),
            Characteristic::Sen => pupil.sen.index(),
            Characteristic::Fsm => pupil.fsm.index(),
            Characteristic::IdaciDecile => usize::from(pupil.idaci_decile) - 1,
            Characteristic::Region => school.region.index(),
            Characteristic::SchoolType => school.school_type.index(),
            Characteristic::Admissions => school.admissions.index(),
            Characteristic::AgeRange => school.age_range.index(),
            Characteristic::SchoolGender => school.school_gender.index(),
            Characteristic::Religion => school.religion.index(),
            Characteristic::SchoolIdaciDecile => usize::from(school.school_idaci_decile) - 1,
        }
    }
}

impl fmt::Display for Characteristic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Characteristic {
    type Err = AccountabilityError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Characteristic::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| AccountabilityError::UnknownCharacteristic(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CategoryGap {
    pub category: String,
    pub n: usize,
    /// Mean pupil progress in the category (grade units).
    pub mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupGapReport {
    pub characteristic: String,
    /// Non-empty categories, highest mean first.
    pub categories: Vec<CategoryGap>,
    pub overall_mean: f64,
    /// Joint test that all category means are equal, with school-clustered
    /// covariance.
    pub test: WaldTest,
    /// Categories left out of the joint test because their clustered
    /// variance is degenerate (e.g. all their pupils attend one school).
    pub untested_categories: Vec<String>,
}

impl GroupGapReport {
    pub fn category(&self, token: &str) -> Option<&CategoryGap> {
        self.categories.iter().find(|c| c.category == token)
    }

    /// Difference between the highest and lowest category means.
    pub fn range(&self) -> f64 {
        let first = self.categories.first().map_or(0.0, |c| c.mean);
        let last = self.categories.last().map_or(0.0, |c| c.mean);
        first - last
    }
}

/// Mean pupil progress by category with a school-clustered Wald test of
/// equal means (regression of the scores on category dummies).
pub fn group_gaps(
    pupil_scores: &[f64],
    cohort: &Cohort,
    characteristic: Characteristic,
) -> Result<GroupGapReport, AccountabilityError> {
    let pupils = cohort.pupils();
    if pupil_scores.len() != pupils.len() {
        return Err(AccountabilityError::LengthMismatch(pupil_scores.len(), pupils.len()));
    }
    let tokens = characteristic.categories();
    let levels: Vec<usize> = pupils
        .iter()
        .map(|p| characteristic.category_of(p, cohort.school_of(p)))
        .collect();
    let mut counts = vec![0usize; tokens.len()];
    let mut sums = vec![0.0; tokens.len()];
    for (&l, &s) in levels.iter().zip(pupil_scores) {
        counts[l] += 1;
        sums[l] += s;
    }
    let present: Vec<usize> = (0..tokens.len()).filter(|&l| counts[l] > 0).collect();
    if present.len() < 2 {
        return Err(AccountabilityError::SingleCategory(characteristic.name().to_string()));
    }

    // reference = first non-empty category
    let mut remap = vec![usize::MAX; tokens.len()];
    for (i, &l) in present.iter().enumerate() {
        remap[l] = i;
    }
    let labels: Vec<String> = present
        .iter()
        .map(|&l| format!("{}_{}", characteristic.name(), tokens[l]))
        .collect();
    let dummies = labels[1..].to_vec();
    let x = DesignMatrix::from_levels(
        pupils.len(),
        &[(labels, levels.iter().map(|&l| remap[l]).collect())],
    );
    let fit = fit_ols(&x, pupil_scores)?;
    let cov = cluster_robust_cov(&fit, &x, &cohort.school_ids())?;
    // a category confined to one school has no clustered variance
    let idx: Vec<usize> = dummies.iter().map(|l| fit.index_of(l).unwrap()).collect();
    let kept = identifiable(&cov.matrix.submatrix(&idx));
    if kept.is_empty() {
        return Err(NumericsError::SingularSubmatrix.into());
    }
    let untested_categories: Vec<String> = (0..dummies.len())
        .filter(|k| !kept.contains(k))
        .map(|k| tokens[present[k + 1]].clone())
        .collect();
    if !untested_categories.is_empty() {
        log::warn!(
            "{characteristic}: categories {} vary within too few schools and are left out of the joint test",
            untested_categories.join(", ")
        );
    }
    let kept_labels: Vec<&String> = kept.iter().map(|&k| &dummies[k]).collect();
    let test = wald_test(&fit, &cov, &kept_labels)?;

    let mut categories: Vec<CategoryGap> = present
        .iter()
        .map(|&l| CategoryGap {
            category: tokens[l].clone(),
            n: counts[l],
            mean: sums[l] / counts[l] as f64,
        })
        .collect();
    categories.sort_by(|a, b| b.mean.total_cmp(&a.mean));
    Ok(GroupGapReport {
        characteristic: characteristic.name().to_string(),
        categories,
        overall_mean: pupil_scores.iter().sum::<f64>() / pupil_scores.len() as f64,
        test,
        untested_categories,
    })
}

/// Greedy maximal set of coordinates with a non-degenerate covariance,
/// in input order.
fn identifiable(v: &SquareMatrix) -> Vec<usize> {
    let floor = 1e-10 * v.diagonal().into_iter().fold(0.0f64, f64::max);
    let mut kept: Vec<usize> = Vec::new();
    for j in 0..v.dim() {
        let conditional = if kept.is_empty() {
            v.get(j, j)
        } else {
            let cross: Vec<f64> = kept.iter().map(|&k| v.get(k, j)).collect();
            match v.submatrix(&kept).spd_solve(&cross) {
                Some(w) => v.get(j, j) - cross.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>(),
                None => 0.0,
            }
        };
        if conditional > floor {
            kept.push(j);
        }
    }
    kept
}
