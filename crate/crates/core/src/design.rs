//! Model terms: KS2 prior-attainment banding, reference-category dummy
//! coding and the two fixed model specifications.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::cohort::{Categorical, Cohort, Ethnicity, Fsm, Gender, Language, Month, PupilRecord, Sen};

/// Number of KS2 prior-attainment groups.
pub const KS2_GROUPS: u8 = 34;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DesignError {
    #[error("invalid KS2 score {value}{}", row.map(|r| format!(" at row {r}")).unwrap_or_default())]
    InvalidKs2 { value: f64, row: Option<usize> },
    #[error("unknown model specification {0:?}")]
    UnknownSpec(String),
}

/// A KS2 prior-attainment group and the fine-grade value it stands for.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ks2Band {
    pub group: u8,
    pub representative_value: f64,
}

/// Representative KS2 value of group `g` (1..=34): 1.5, 2.0, 2.5, then
/// 2.8 rising by 0.1 to 5.8.
pub fn ks2_representative_value(group: u8) -> f64 {
    assert!((1..=KS2_GROUPS).contains(&group), "KS2 group {group} out of range");
    match group {
        1 => 1.5,
        2 => 2.0,
        3 => 2.5,
        // integer tenths keep the values exact decimals
        g => f64::from(28 + u32::from(g) - 4) / 10.0,
    }
}

/// Maps a KS2 fine grade to its group: clamp to [1.5, 5.8] and take the
/// nearest representative value, resolving exact midpoints downwards.
pub fn ks2_band_of(ks2: f64) -> Result<Ks2Band, DesignError> {
    if !ks2.is_finite() || !(0.0..=6.0).contains(&ks2) {
        return Err(DesignError::InvalidKs2 { value: ks2, row: None });
    }
    // midpoints such as 2.65 are not exact in binary; treat anything within
    // this distance of a midpoint as the tie
    const TIE_EPS: f64 = 1e-9;
    let mut group = KS2_GROUPS;
    for g in 1..KS2_GROUPS {
        let mid = 0.5 * (ks2_representative_value(g) + ks2_representative_value(g + 1));
        if ks2 <= mid + TIE_EPS {
            group = g;
            break;
        }
    }
    Ok(Ks2Band {
        group,
        representative_value: ks2_representative_value(group),
    })
}

/// A categorical model factor. Level 0 is always the reference category.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Factor {
    Ks2,
    Month,
    Gender,
    Ethnicity,
    Language,
    Sen,
    Fsm,
    Idaci,
}

fn labels_of<C: Categorical>() -> Vec<String> {
    C::ALL
        .iter()
        .map(|c| {
            let token = c.token();
            let prefix = format!("{}_", C::FACTOR);
            if token.starts_with(&prefix) {
                token.to_string()
            } else {
                format!("{prefix}{token}")
            }
        })
        .collect()
}

impl Factor {
    pub fn name(self) -> &'static str {
        match self {
            Factor::Ks2 => "ks2",
            Factor::Month => Month::FACTOR,
            Factor::Gender => Gender::FACTOR,
            Factor::Ethnicity => Ethnicity::FACTOR,
            Factor::Language => Language::FACTOR,
            Factor::Sen => Sen::FACTOR,
            Factor::Fsm => Fsm::FACTOR,
            Factor::Idaci => "idaci",
        }
    }

    /// Column label for every level, reference first.
    pub fn level_labels(self) -> Vec<String> {
        match self {
            Factor::Ks2 => (1..=KS2_GROUPS).map(|g| format!("ks2_g{g}")).collect(),
            Factor::Month => labels_of::<Month>(),
            Factor::Gender => labels_of::<Gender>(),
            Factor::Ethnicity => labels_of::<Ethnicity>(),
            Factor::Language => labels_of::<Language>(),
            Factor::Sen => labels_of::<Sen>(),
            Factor::Fsm => labels_of::<Fsm>(),
            Factor::Idaci => (1..=10).map(|d| format!("idaci_d{d}")).collect(),
        }
    }

    pub fn n_levels(self) -> usize {
        match self {
            Factor::Ks2 => KS2_GROUPS as usize,
            Factor::Month => Month::ALL.len(),
            Factor::Gender => Gender::ALL.len(),
            Factor::Ethnicity => Ethnicity::ALL.len(),
            Factor::Language => Language::ALL.len(),
            Factor::Sen => Sen::ALL.len(),
            Factor::Fsm => Fsm::ALL.len(),
            Factor::Idaci => 10,
        }
    }

    /// 0-based level of a pupil.
    pub fn level_of(self, pupil: &PupilRecord) -> Result<usize, DesignError> {
        Ok(match self {
            Factor::Ks2 => usize::from(ks2_band_of(pupil.ks2)?.group) - 1,
            Factor::Month => pupil.month.index(),
            Factor::Gender => pupil.gender.index(),
            Factor::Ethnicity => pupil.ethnicity.index(),
            Factor::Language => pupil.language.index(),
            Factor::Sen => pupil.sen.index(),
            Factor::Fsm => pupil.fsm.index(),
            Factor::Idaci => usize::from(pupil.idaci_decile) - 1,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SpecName {
    Base,
    Adjusted,
}

impl SpecName {
    pub fn as_str(self) -> &'static str {
        match self {
            SpecName::Base => "base",
            SpecName::Adjusted => "adjusted",
        }
    }
}

impl fmt::Display for SpecName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SpecName {
    type Err = DesignError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "base" => Ok(SpecName::Base),
            "adjusted" => Ok(SpecName::Adjusted),
            other => Err(DesignError::UnknownSpec(other.to_string())),
        }
    }
}

/// Intercept plus reference-coded factors.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub name: SpecName,
    pub factors: Vec<Factor>,
}

impl ModelSpec {
    /// Coefficient labels in design-column order, `"const"` first.
    pub fn column_labels(&self) -> Vec<String> {
        let mut labels = vec!["const".to_string()];
        for f in &self.factors {
            labels.extend(f.level_labels().into_iter().skip(1));
        }
        labels
    }

    pub fn n_coefficients(&self) -> usize {
        1 + self.factors.iter().map(|f| f.n_levels() - 1).sum::<usize>()
    }
}

/// The prior-attainment-only specification or the one that also adjusts
/// for the seven pupil background characteristics.
pub fn model_spec(name: SpecName) -> ModelSpec {
    let factors = match name {
        SpecName::Base => vec![Factor::Ks2],
        SpecName::Adjusted => vec![
            Factor::Ks2,
            Factor::Month,
            Factor::Gender,
            Factor::Ethnicity,
            Factor::Language,
            Factor::Sen,
            Factor::Fsm,
            Factor::Idaci,
        ],
    };
    ModelSpec { name, factors }
}

/// Dense column-major design matrix with labelled columns.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    n_rows: usize,
    labels: Vec<String>,
    columns: Vec<Vec<f64>>,
}

impl DesignMatrix {
    pub fn from_columns(labels: Vec<String>, columns: Vec<Vec<f64>>) -> Self {
        assert_eq!(labels.len(), columns.len(), "one label per column");
        let n_rows = columns.first().map_or(0, Vec::len);
        assert!(columns.iter().all(|c| c.len() == n_rows), "ragged columns");
        DesignMatrix {
            n_rows,
            labels,
            columns,
        }
    }

    /// Intercept plus one dummy per non-reference level of each factor.
    /// `factors` holds, per factor, the labels of all its levels (reference
    /// first) and each row's 0-based level.
    pub fn from_levels(n_rows: usize, factors: &[(Vec<String>, Vec<usize>)]) -> Self {
        let mut labels = vec!["const".to_string()];
        let mut columns = vec![vec![1.0; n_rows]];
        for (level_labels, levels) in factors {
            assert_eq!(levels.len(), n_rows);
            let first = columns.len();
            for label in &level_labels[1..] {
                labels.push(label.clone());
                columns.push(vec![0.0; n_rows]);
            }
            for (row, &level) in levels.iter().enumerate() {
                if level > 0 {
                    columns[first + level - 1][row] = 1.0;
                }
            }
        }
        DesignMatrix {
            n_rows,
            labels,
            columns,
        }
    }

    pub fn nrows(&self) -> usize {
        self.n_rows
    }

    pub fn ncols(&self) -> usize {
        self.columns.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn columns(&self) -> &[Vec<f64>] {
        &self.columns
    }

    pub fn column(&self, j: usize) -> &[f64] {
        &self.columns[j]
    }

    pub fn column_index(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.columns[col][row]
    }

    /// Removes the column with this label; false if there is none.
    pub fn drop_column(&mut self, label: &str) -> bool {
        match self.column_index(label) {
            Some(j) => {
                self.labels.remove(j);
                self.columns.remove(j);
                true
            }
            None => false,
        }
    }

    /// Removes columns that are identically zero and returns their labels.
    pub fn drop_empty_columns(&mut self) -> Vec<String> {
        let mut dropped = Vec::new();
        let mut keep_labels = Vec::with_capacity(self.labels.len());
        let mut keep_cols = Vec::with_capacity(self.columns.len());
        for (label, col) in self.labels.drain(..).zip(self.columns.drain(..)) {
            if col.iter().all(|&v| v == 0.0) {
                dropped.push(label);
            } else {
                keep_labels.push(label);
                keep_cols.push(col);
            }
        }
        self.labels = keep_labels;
        self.columns = keep_cols;
        dropped
    }
}

/// Design matrix, response and cluster ids, all in cohort pupil order.
#[derive(Debug, Clone, PartialEq)]
pub struct Design {
    pub matrix: DesignMatrix,
    /// Attainment 8 points.
    pub response: Vec<f64>,
    pub cluster_ids: Vec<String>,
}

pub fn build_design(cohort: &Cohort, spec: &ModelSpec) -> Result<Design, DesignError> {
    let pupils = cohort.pupils();
    let mut factors = Vec::with_capacity(spec.factors.len());
    for &f in &spec.factors {
        let levels = pupils
            .iter()
            .enumerate()
            .map(|(row, p)| {
                f.level_of(p).map_err(|e| match e {
                    DesignError::InvalidKs2 { value, .. } => DesignError::InvalidKs2 {
                        value,
                        row: Some(row + 1),
                    },
                    other => other,
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        factors.push((f.level_labels(), levels));
    }
    Ok(Design {
        matrix: DesignMatrix::from_levels(pupils.len(), &factors),
        response: pupils.iter().map(|p| p.attainment8).collect(),
        cluster_ids: pupils.iter().map(|p| p.school_id.clone()).collect(),
    })
}
