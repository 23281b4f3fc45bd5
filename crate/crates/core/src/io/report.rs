//! Run analysis and report files.
//!
//! Numeric report fields use fixed 6-decimal formatting; `summary.json`
//! rounds to 6 decimals. Given the same cohort every file is
//! byte-identical across runs and thread counts.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Map, Value};

use super::records::{number, read_table, write_cohort, write_rows};
use super::IoError;
use crate::accountability::{
    band_counts, band_of, group_gaps, rank_movement, transition_table, AccountabilityError, Band, Characteristic,
    GroupGapReport, RankReport, TransitionTable, DEFAULT_RANK_THRESHOLDS,
};
use crate::cohort::{sample_sd, summary_stats, Cohort};
use crate::design::SpecName;
use crate::numerics::pearson_corr;
use crate::valueadded::{run_pipeline, shrink_school_scores, PipelineResult, SchoolScore, ShrinkageEstimates};
use crate::Error;

pub const SCHOOLS_HEADER: [&str; 19] = [
    "school_id",
    "n_pupils",
    "score_base",
    "ci_low_base",
    "ci_high_base",
    "significant_base",
    "band_base",
    "score_adjusted",
    "ci_low_adjusted",
    "ci_high_adjusted",
    "significant_adjusted",
    "band_adjusted",
    "shrunk_base",
    "shrunk_adjusted",
    "rank_base",
    "rank_adjusted",
    "rank_delta",
    "below_floor_base",
    "below_floor_adjusted",
];

pub const SCORE_HEADER: [&str; 8] = [
    "school_id",
    "n_pupils",
    "score",
    "se",
    "ci_low",
    "ci_high",
    "significant",
    "band",
];

const TRANSITION_HEADER: [&str; 12] = [
    "band_base",
    "well_below",
    "below",
    "average",
    "above",
    "well_above",
    "total",
    "pct_well_below",
    "pct_below",
    "pct_average",
    "pct_above",
    "pct_well_above",
];

const GAP_HEADER: [&str; 8] = ["measure", "category", "n", "mean", "f_statistic", "df1", "df2", "p_value"];

/// Fixed 6-decimal rendering; negative zero prints as zero.
pub fn format_fixed(x: f64) -> String {
    let s = format!("{x:.6}");
    if s == "-0.000000" {
        "0.000000".to_string()
    } else {
        s
    }
}

fn round6(x: f64) -> f64 {
    let r = (x * 1e6).round() / 1e6;
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    pub shrinkage: bool,
    pub thresholds: Vec<usize>,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            shrinkage: true,
            thresholds: DEFAULT_RANK_THRESHOLDS.to_vec(),
        }
    }
}

/// One school under both measures.
#[derive(Debug, Clone, PartialEq)]
pub struct SchoolRow {
    pub base: SchoolScore,
    pub adjusted: SchoolScore,
    pub band_base: Band,
    pub band_adjusted: Band,
    pub shrunk_base: Option<f64>,
    pub shrunk_adjusted: Option<f64>,
    pub rank_base: usize,
    pub rank_adjusted: usize,
    pub rank_delta: i64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GapPair {
    pub characteristic: Characteristic,
    pub base: GroupGapReport,
    pub adjusted: GroupGapReport,
}

/// Everything a run reports.
#[derive(Debug, Clone)]
pub struct RunReport {
    pub base: PipelineResult,
    pub adjusted: PipelineResult,
    pub shrinkage: Option<[ShrinkageEstimates; 2]>,
    /// Descending base score, then id.
    pub schools: Vec<SchoolRow>,
    pub transitions: TransitionTable,
    /// Parallel to `schools`.
    pub ranks: RankReport,
    /// Correlation of the two pupil score vectors.
    pub pupil_correlation: f64,
    /// Characteristics with at least two non-empty categories.
    pub gaps: Vec<GapPair>,
}

/// Fits both specifications and derives every accountability output.
pub fn analyze(cohort: &Cohort, options: &RunOptions) -> Result<RunReport, Error> {
    let base = run_pipeline(cohort, SpecName::Base)?;
    let adjusted = run_pipeline(cohort, SpecName::Adjusted)?;
    let ids = cohort.school_ids();
    let shrinkage = if options.shrinkage {
        Some([
            shrink_school_scores(&base.scores(), &ids)?,
            shrink_school_scores(&adjusted.scores(), &ids)?,
        ])
    } else {
        None
    };

    let adjusted_by_id = adjusted.school_map();
    let pairs: Vec<(&SchoolScore, &SchoolScore)> = base
        .school_scores
        .iter()
        .map(|b| (b, adjusted_by_id[b.school_id.as_str()]))
        .collect();
    let score_a: Vec<f64> = pairs.iter().map(|(b, _)| b.score).collect();
    let score_b: Vec<f64> = pairs.iter().map(|(_, a)| a.score).collect();
    let ranks = rank_movement(&score_a, &score_b, &options.thresholds)?;
    let bands_a: Vec<Band> = pairs.iter().map(|(b, _)| band_of(b.score, b.significant)).collect();
    let bands_b: Vec<Band> = pairs.iter().map(|(_, a)| band_of(a.score, a.significant)).collect();
    let transitions = transition_table(&bands_a, &bands_b)?;

    let schools = pairs
        .iter()
        .enumerate()
        .map(|(i, (b, a))| {
            let shrunk = |k: usize| {
                shrinkage
                    .as_ref()
                    .and_then(|s| s[k].school(&b.school_id))
                    .map(|s| s.shrunk_score)
            };
            SchoolRow {
                base: (*b).clone(),
                adjusted: (*a).clone(),
                band_base: bands_a[i],
                band_adjusted: bands_b[i],
                shrunk_base: shrunk(0),
                shrunk_adjusted: shrunk(1),
                rank_base: ranks.rows[i].rank_a,
                rank_adjusted: ranks.rows[i].rank_b,
                rank_delta: ranks.rows[i].delta,
            }
        })
        .collect();

    let pupil_correlation = pearson_corr(&base.scores(), &adjusted.scores())?;
    let mut gaps = Vec::new();
    for c in Characteristic::ALL {
        match (group_gaps(&base.scores(), cohort, c), group_gaps(&adjusted.scores(), cohort, c)) {
            (Ok(b), Ok(a)) => gaps.push(GapPair {
                characteristic: c,
                base: b,
                adjusted: a,
            }),
            (Err(AccountabilityError::SingleCategory(_)), _) => {
                log::warn!("{c}: fewer than two non-empty categories; no gap report");
            }
            (Err(e), _) | (_, Err(e)) => return Err(e.into()),
        }
    }

    Ok(RunReport {
        base,
        adjusted,
        shrinkage,
        schools,
        transitions,
        ranks,
        pupil_correlation,
        gaps,
    })
}

fn opt_fixed(x: Option<f64>) -> String {
    x.map(format_fixed).unwrap_or_default()
}

fn path_in(dir: &Path, name: &str) -> PathBuf {
    dir.join(name)
}

fn score_rows(scores: &[SchoolScore]) -> impl Iterator<Item = Vec<String>> + '_ {
    scores.iter().map(|s| {
        vec![
            s.school_id.clone(),
            s.n_pupils.to_string(),
            format_fixed(s.score),
            format_fixed(s.se),
            format_fixed(s.ci_low),
            format_fixed(s.ci_high),
            s.significant.to_string(),
            band_of(s.score, s.significant).to_string(),
        ]
    })
}

/// Writes one score vector as a standalone CSV, in descending score order.
pub fn write_score_file(path: &Path, scores: &[SchoolScore]) -> Result<(), IoError> {
    write_rows(path, &SCORE_HEADER, score_rows(scores))
}

/// A school score as read back from a score CSV.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoreRow {
    pub school_id: String,
    pub n_pupils: usize,
    pub score: f64,
    pub se: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub significant: bool,
    pub band: Band,
}

pub fn read_score_file(path: &Path) -> Result<Vec<ScoreRow>, IoError> {
    read_table(path, &SCORE_HEADER)?
        .into_iter()
        .map(|(row, r)| {
            let significant = match &r[6] {
                "true" => true,
                "false" => false,
                other => {
                    return Err(IoError::BadToken {
                        row,
                        column: "significant",
                        value: other.to_string(),
                    })
                }
            };
            Ok(ScoreRow {
                school_id: r[0].to_string(),
                n_pupils: number(row, "n_pupils", &r[1])?,
                score: number(row, "score", &r[2])?,
                se: number(row, "se", &r[3])?,
                ci_low: number(row, "ci_low", &r[4])?,
                ci_high: number(row, "ci_high", &r[5])?,
                significant,
                band: Band::from_token(&r[7]).ok_or_else(|| IoError::BadToken {
                    row,
                    column: "band",
                    value: r[7].to_string(),
                })?,
            })
        })
        .collect()
}

fn gap_report_rows(spec: SpecName, report: &GroupGapReport) -> impl Iterator<Item = Vec<String>> + '_ {
    report.categories.iter().map(move |c| {
        vec![
            spec.to_string(),
            c.category.clone(),
            c.n.to_string(),
            format_fixed(c.mean),
            format_fixed(report.test.statistic),
            report.test.df1.to_string(),
            report.test.df2.to_string(),
            format_fixed(report.test.p_value),
        ]
    })
}

/// Category means per measure, highest first, with the measure's
/// clustered test repeated on each row.
pub fn gap_rows(gap: &GapPair) -> Vec<Vec<String>> {
    gap_report_rows(SpecName::Base, &gap.base)
        .chain(gap_report_rows(SpecName::Adjusted, &gap.adjusted))
        .collect()
}

pub fn write_gap_file(path: &Path, gap: &GapPair) -> Result<(), IoError> {
    write_rows(path, &GAP_HEADER, gap_rows(gap))
}

fn transition_rows(t: &TransitionTable) -> Vec<Vec<String>> {
    let mut rows: Vec<Vec<String>> = Band::ALL
        .iter()
        .enumerate()
        .map(|(i, band)| {
            let mut row = vec![band.to_string()];
            row.extend(t.counts[i].iter().map(usize::to_string));
            row.push(t.row_totals[i].to_string());
            row.extend(t.row_percentages[i].iter().map(|&p| format_fixed(p)));
            row
        })
        .collect();
    let mut total = vec!["total".to_string()];
    total.extend(t.column_totals.iter().map(usize::to_string));
    total.push(t.total.to_string());
    total.extend(std::iter::repeat_n(String::new(), 5));
    rows.push(total);
    rows
}

fn band_count_map(counts: [usize; 5]) -> Value {
    let mut m = Map::new();
    for (b, c) in Band::ALL.iter().zip(counts) {
        m.insert(b.token().to_string(), json!(c));
    }
    Value::Object(m)
}

fn stats_value(values: &[f64]) -> Result<Value, Error> {
    let s = summary_stats(values)?;
    Ok(json!({
        "n": s.n,
        "mean": round6(s.mean),
        "sd": round6(s.sd),
        "min": round6(s.min),
        "p10": round6(s.p10),
        "p25": round6(s.p25),
        "p50": round6(s.p50),
        "p75": round6(s.p75),
        "p90": round6(s.p90),
        "max": round6(s.max),
    }))
}

fn fit_value(p: &PipelineResult) -> Value {
    json!({
        "n_obs": p.fit.n_obs,
        "n_params": p.fit.n_params,
        "r_squared": round6(p.fit.r_squared),
        "adj_r_squared": round6(p.fit.adj_r_squared),
        "rmse": round6(p.fit.rmse),
        "pupil_sd": round6(p.national_sd),
        "dropped_columns": p.dropped_columns,
    })
}

impl RunReport {
    pub fn band_counts(&self) -> [[usize; 5]; 2] {
        let a: Vec<Band> = self.schools.iter().map(|s| s.band_base).collect();
        let b: Vec<Band> = self.schools.iter().map(|s| s.band_adjusted).collect();
        [band_counts(&a), band_counts(&b)]
    }

    /// Machine-readable summary written as `summary.json`.
    pub fn summary(&self) -> Result<Value, Error> {
        let school_a: Vec<f64> = self.schools.iter().map(|s| s.base.score).collect();
        let school_b: Vec<f64> = self.schools.iter().map(|s| s.adjusted.score).collect();
        let [counts_a, counts_b] = self.band_counts();
        let t = &self.transitions;
        let shrinkage = match &self.shrinkage {
            None => Value::Null,
            Some(est) => {
                let one = |e: &ShrinkageEstimates| {
                    let raw: Vec<f64> = e.schools.iter().map(|s| s.raw_score).collect();
                    let shrunk: Vec<f64> = e.schools.iter().map(|s| s.shrunk_score).collect();
                    let (sd_raw, sd_shrunk) = (sample_sd(&raw), sample_sd(&shrunk));
                    json!({
                        "sigma2_between": round6(e.sigma2_between),
                        "sigma2_within": round6(e.sigma2_within),
                        "sd_raw": round6(sd_raw),
                        "sd_shrunk": round6(sd_shrunk),
                        "sd_reduction": round6(if sd_raw > 0.0 { 1.0 - sd_shrunk / sd_raw } else { 0.0 }),
                    })
                };
                json!({ "base": one(&est[0]), "adjusted": one(&est[1]) })
            }
        };
        let mut gaps = Map::new();
        for g in &self.gaps {
            let test = |r: &GroupGapReport| {
                json!({
                    "f_statistic": round6(r.test.statistic),
                    "df1": r.test.df1,
                    "df2": r.test.df2,
                    "p_value": round6(r.test.p_value),
                    "range": round6(r.range()),
                })
            };
            gaps.insert(
                g.characteristic.name().to_string(),
                json!({ "base": test(&g.base), "adjusted": test(&g.adjusted) }),
            );
        }
        let below_floor = |c: [usize; 5]| c[0];
        Ok(json!({
            "n_pupils": self.base.fit.n_obs,
            "n_schools": self.schools.len(),
            "models": { "base": fit_value(&self.base), "adjusted": fit_value(&self.adjusted) },
            "pupil_scores": {
                "base": stats_value(&self.base.scores())?,
                "adjusted": stats_value(&self.adjusted.scores())?,
            },
            "school_scores": {
                "base": stats_value(&school_a)?,
                "adjusted": stats_value(&school_b)?,
            },
            "correlations": {
                "school_pearson": round6(self.ranks.pearson),
                "school_spearman": round6(self.ranks.spearman),
                "pupil_pearson": round6(self.pupil_correlation),
            },
            "band_counts": { "base": band_count_map(counts_a), "adjusted": band_count_map(counts_b) },
            "below_floor": { "base": below_floor(counts_a), "adjusted": below_floor(counts_b) },
            "transitions": {
                "counts": t.counts,
                "row_totals": t.row_totals,
                "column_totals": t.column_totals,
                "total": t.total,
                "row_percentages": t.row_percentages.iter().map(|r| r.iter().map(|&p| round6(p)).collect::<Vec<_>>()).collect::<Vec<_>>(),
                "changed": t.changed,
                "changed_share": round6(t.changed_share),
            },
            "rank_movement": {
                "max_abs_delta": self.ranks.max_abs_delta,
                "thresholds": self.ranks.thresholds.iter().map(|c| json!({
                    "threshold": c.threshold,
                    "count": c.count,
                    "share": round6(c.share),
                })).collect::<Vec<_>>(),
            },
            "shrinkage": shrinkage,
            "group_gaps": Value::Object(gaps),
        }))
    }
}

fn school_csv_rows(report: &RunReport) -> impl Iterator<Item = Vec<String>> + '_ {
    report.schools.iter().map(|s| {
        vec![
            s.base.school_id.clone(),
            s.base.n_pupils.to_string(),
            format_fixed(s.base.score),
            format_fixed(s.base.ci_low),
            format_fixed(s.base.ci_high),
            s.base.significant.to_string(),
            s.band_base.to_string(),
            format_fixed(s.adjusted.score),
            format_fixed(s.adjusted.ci_low),
            format_fixed(s.adjusted.ci_high),
            s.adjusted.significant.to_string(),
            s.band_adjusted.to_string(),
            opt_fixed(s.shrunk_base),
            opt_fixed(s.shrunk_adjusted),
            s.rank_base.to_string(),
            s.rank_adjusted.to_string(),
            s.rank_delta.to_string(),
            (s.band_base == Band::WellBelow).to_string(),
            (s.band_adjusted == Band::WellBelow).to_string(),
        ]
    })
}

fn write_json(path: &Path, value: &Value) -> Result<(), IoError> {
    let mut text = serde_json::to_string_pretty(value).expect("json values serialise");
    text.push('\n');
    fs::write(path, text).map_err(|e| IoError::io(path, e))
}

/// Writes the report files into `out_dir` (created if needed):
/// `schools.csv`, `scores_base.csv`, `scores_adjusted.csv`,
/// `pupil_scores.csv`, `transitions.csv`, `gaps_<characteristic>.csv`,
/// `summary.json`, and a copy of the cohort under `cohort/`.
pub fn write_reports(report: &RunReport, cohort: &Cohort, out_dir: &Path) -> Result<(), Error> {
    let cohort_dir = out_dir.join("cohort");
    fs::create_dir_all(&cohort_dir).map_err(|e| IoError::io(&cohort_dir, e))?;
    write_rows(&path_in(out_dir, "schools.csv"), &SCHOOLS_HEADER, school_csv_rows(report))?;
    write_score_file(&path_in(out_dir, "scores_base.csv"), &report.base.school_scores)?;
    write_score_file(&path_in(out_dir, "scores_adjusted.csv"), &report.adjusted.school_scores)?;
    write_rows(
        &path_in(out_dir, "pupil_scores.csv"),
        &["pupil_id", "school_id", "score_base", "score_adjusted"],
        cohort
            .pupils()
            .iter()
            .zip(report.base.scores().into_iter().zip(report.adjusted.scores()))
            .map(|(p, (a, b))| vec![p.pupil_id.clone(), p.school_id.clone(), format_fixed(a), format_fixed(b)]),
    )?;
    write_rows(
        &path_in(out_dir, "transitions.csv"),
        &TRANSITION_HEADER,
        transition_rows(&report.transitions),
    )?;
    for gap in &report.gaps {
        write_gap_file(&path_in(out_dir, &format!("gaps_{}.csv", gap.characteristic)), gap)?;
    }
    write_json(&path_in(out_dir, "summary.json"), &report.summary()?)?;
    write_cohort(cohort, &cohort_dir.join("pupils.csv"), &cohort_dir.join("schools.csv"))?;
    Ok(())
}

/// Two school score vectors joined by school id.
#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    /// In the order of the first file.
    pub school_ids: Vec<String>,
    pub ranks: RankReport,
    pub transitions: TransitionTable,
}

impl Comparison {
    /// Joins two score files; both must cover the same schools.
    pub fn from_files(a: &Path, b: &Path, thresholds: &[usize]) -> Result<Comparison, Error> {
        let rows_a = read_score_file(a)?;
        let rows_b = read_score_file(b)?;
        let by_id: BTreeMap<&str, &ScoreRow> = rows_b.iter().map(|r| (r.school_id.as_str(), r)).collect();
        if by_id.len() != rows_a.len() || rows_b.len() != rows_a.len() {
            return Err(IoError::Csv {
                path: b.to_path_buf(),
                message: format!("{} schools in {}, {} here", rows_a.len(), a.display(), rows_b.len()),
            }
            .into());
        }
        let mut joined = Vec::with_capacity(rows_a.len());
        for r in &rows_a {
            let other = by_id.get(r.school_id.as_str()).ok_or_else(|| IoError::Csv {
                path: b.to_path_buf(),
                message: format!("school {} missing", r.school_id),
            })?;
            joined.push((r, *other));
        }
        let sa: Vec<f64> = joined.iter().map(|(x, _)| x.score).collect();
        let sb: Vec<f64> = joined.iter().map(|(_, y)| y.score).collect();
        let ba: Vec<Band> = joined.iter().map(|(x, _)| x.band).collect();
        let bb: Vec<Band> = joined.iter().map(|(_, y)| y.band).collect();
        Ok(Comparison {
            school_ids: joined.iter().map(|(x, _)| x.school_id.clone()).collect(),
            ranks: rank_movement(&sa, &sb, thresholds)?,
            transitions: transition_table(&ba, &bb)?,
        })
    }

    pub fn summary(&self) -> Value {
        json!({
            "n_schools": self.school_ids.len(),
            "pearson": round6(self.ranks.pearson),
            "spearman": round6(self.ranks.spearman),
            "max_abs_delta": self.ranks.max_abs_delta,
            "thresholds": self.ranks.thresholds.iter().map(|c| json!({
                "threshold": c.threshold,
                "count": c.count,
                "share": round6(c.share),
            })).collect::<Vec<_>>(),
            "transitions": {
                "counts": self.transitions.counts,
                "changed": self.transitions.changed,
                "changed_share": round6(self.transitions.changed_share),
            },
        })
    }
}

/// Writes `comparison.json` and `rank_movement.csv` into `out_dir`.
pub fn write_comparison(out_dir: &Path, c: &Comparison) -> Result<(), IoError> {
    fs::create_dir_all(out_dir).map_err(|e| IoError::io(out_dir, e))?;
    write_json(&out_dir.join("comparison.json"), &c.summary())?;
    write_rows(
        &out_dir.join("rank_movement.csv"),
        &["school_id", "rank_a", "rank_b", "delta"],
        c.school_ids.iter().zip(&c.ranks.rows).map(|(id, r)| {
            vec![id.clone(), r.rank_a.to_string(), r.rank_b.to_string(), r.delta.to_string()]
        }),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{generate_cohort, SchoolSize, SynthConfig};

    fn cohort() -> Cohort {
        generate_cohort(&SynthConfig {
            n_schools: 30,
            school_size: SchoolSize {
                median: 60.0,
                sigma: 0.3,
                min: 10,
            },
            seed: 11,
            ..SynthConfig::default()
        })
        .unwrap()
    }

    #[test]
    fn fixed_format() {
        assert_eq!(format_fixed(1.0), "1.000000");
        assert_eq!(format_fixed(-1e-9), "0.000000");
        assert_eq!(format_fixed(-0.1234567), "-0.123457");
    }

    #[test]
    fn report_is_consistent() {
        let c = cohort();
        let r = analyze(&c, &RunOptions::default()).unwrap();
        assert_eq!(r.transitions.total, r.schools.len());
        assert!(r.adjusted.fit.r_squared >= r.base.fit.r_squared);
        let [a, b] = r.band_counts();
        assert_eq!(a, r.transitions.row_totals);
        assert_eq!(b, r.transitions.column_totals);
        for w in r.schools.windows(2) {
            assert!(w[0].base.score >= w[1].base.score);
        }
        let summary = r.summary().unwrap();
        assert_eq!(summary["n_schools"], json!(r.schools.len()));
        for (band, n) in Band::ALL.iter().zip(a) {
            assert_eq!(summary["band_counts"]["base"][band.token()], json!(n));
        }
    }

    #[test]
    fn files_are_deterministic_and_score_files_compare() {
        let c = cohort();
        let r = analyze(&c, &RunOptions::default()).unwrap();
        let d1 = tempfile::tempdir().unwrap();
        let d2 = tempfile::tempdir().unwrap();
        write_reports(&r, &c, d1.path()).unwrap();
        write_reports(&analyze(&c, &RunOptions::default()).unwrap(), &c, d2.path()).unwrap();
        for name in ["schools.csv", "summary.json", "transitions.csv", "gaps_fsm.csv", "cohort/pupils.csv"] {
            assert_eq!(
                fs::read(d1.path().join(name)).unwrap(),
                fs::read(d2.path().join(name)).unwrap(),
                "{name}"
            );
        }
        let cmp = Comparison::from_files(
            &d1.path().join("scores_base.csv"),
            &d1.path().join("scores_adjusted.csv"),
            &[5, 10],
        )
        .unwrap();
        assert_eq!(cmp.transitions, r.transitions);
        assert!((cmp.ranks.pearson - r.ranks.pearson).abs() < 1e-5);
        let rows = read_score_file(&d1.path().join("scores_base.csv")).unwrap();
        assert_eq!(rows.len(), r.schools.len());
        assert_eq!(rows[0].school_id, r.schools[0].base.school_id);
    }

    #[test]
    fn transition_percentages_sum_to_100() {
        let c = cohort();
        let r = analyze(&c, &RunOptions::default()).unwrap();
        for (row, total) in transition_rows(&r.transitions).iter().zip(r.transitions.row_totals) {
            if total > 0 {
                let s: f64 = row[7..].iter().map(|v| v.parse::<f64>().unwrap()).sum();
                assert!((s - 100.0).abs() < 0.1, "{s}");
            }
        }
    }

    #[test]
    fn no_shrinkage_leaves_columns_empty() {
        let c = cohort();
        let r = analyze(
            &c,
            &RunOptions {
                shrinkage: false,
                ..RunOptions::default()
            },
        )
        .unwrap();
        assert!(r.schools.iter().all(|s| s.shrunk_base.is_none()));
        assert_eq!(r.summary().unwrap()["shrinkage"], Value::Null);
    }
}
