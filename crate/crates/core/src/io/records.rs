use std::path::Path;

use csv::{ReaderBuilder, StringRecord, WriterBuilder};

use super::IoError;
use crate::cohort::{validate_cohort, Categorical, Cohort, PupilRecord, SchoolRecord};

pub const PUPIL_HEADER: [&str; 11] = [
    "pupil_id",
    "school_id",
    "ks2",
    "attainment8",
    "month",
    "gender",
    "ethnicity",
    "language",
    "sen",
    "fsm",
    "idaci_decile",
];

pub const SCHOOL_HEADER: [&str; 8] = [
    "school_id",
    "region",
    "school_type",
    "admissions",
    "age_range",
    "school_gender",
    "religion",
    "school_idaci_decile",
];

/// Reads a CSV whose header must equal `header` exactly; returns data rows
/// with their 1-based row numbers.
pub(crate) fn read_table(path: &Path, header: &[&str]) -> Result<Vec<(usize, StringRecord)>, IoError> {
    let mut reader = ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| IoError::csv(path, e))?;
    let found = reader.headers().map_err(|e| IoError::csv(path, e))?.clone();
    check_header(path, &found, header)?;
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        rows.push((i + 1, record.map_err(|e| IoError::csv(path, e))?));
    }
    Ok(rows)
}

fn check_header(path: &Path, found: &StringRecord, expected: &[&str]) -> Result<(), IoError> {
    if found.iter().eq(expected.iter().copied()) {
        return Ok(());
    }
    let missing: Vec<&str> = expected.iter().copied().filter(|c| !found.iter().any(|f| f == *c)).collect();
    let extra: Vec<&str> = found.iter().filter(|f| !expected.contains(f)).collect();
    let detail = if missing.is_empty() && extra.is_empty() {
        format!("columns out of order; expected {}", expected.join(","))
    } else {
        let mut parts = Vec::new();
        if !missing.is_empty() {
            parts.push(format!("missing column(s) {}", missing.join(", ")));
        }
        if !extra.is_empty() {
            parts.push(format!("unexpected column(s) {}", extra.join(", ")));
        }
        parts.join("; ")
    };
    Err(IoError::SchemaMismatch {
        path: path.to_path_buf(),
        detail,
    })
}

pub(crate) fn token<C: Categorical>(row: usize, column: &'static str, value: &str) -> Result<C, IoError> {
    C::from_token(value).ok_or_else(|| IoError::BadToken {
        row,
        column,
        value: value.to_string(),
    })
}

pub(crate) fn number<T: std::str::FromStr>(row: usize, column: &'static str, value: &str) -> Result<T, IoError> {
    value.parse().map_err(|_| IoError::BadNumber {
        row,
        column,
        value: value.to_string(),
    })
}

pub fn read_pupils(path: &Path) -> Result<Vec<PupilRecord>, IoError> {
    read_table(path, &PUPIL_HEADER)?
        .into_iter()
        .map(|(row, r)| {
            Ok(PupilRecord {
                pupil_id: r[0].to_string(),
                school_id: r[1].to_string(),
                ks2: number(row, "ks2", &r[2])?,
                attainment8: number(row, "attainment8", &r[3])?,
                month: token(row, "month", &r[4])?,
                gender: token(row, "gender", &r[5])?,
                ethnicity: token(row, "ethnicity", &r[6])?,
                language: token(row, "language", &r[7])?,
                sen: token(row, "sen", &r[8])?,
                fsm: token(row, "fsm", &r[9])?,
                idaci_decile: number(row, "idaci_decile", &r[10])?,
            })
        })
        .collect()
}

pub fn read_schools(path: &Path) -> Result<Vec<SchoolRecord>, IoError> {
    read_table(path, &SCHOOL_HEADER)?
        .into_iter()
        .map(|(row, r)| {
            Ok(SchoolRecord {
                school_id: r[0].to_string(),
                region: token(row, "region", &r[1])?,
                school_type: token(row, "school_type", &r[2])?,
                admissions: token(row, "admissions", &r[3])?,
                age_range: token(row, "age_range", &r[4])?,
                school_gender: token(row, "school_gender", &r[5])?,
                religion: token(row, "religion", &r[6])?,
                school_idaci_decile: number(row, "school_idaci_decile", &r[7])?,
            })
        })
        .collect()
}

/// Reads and validates a cohort. Schools without pupils are dropped.
pub fn load_cohort(pupil_path: &Path, school_path: &Path) -> Result<Cohort, IoError> {
    let pupils = read_pupils(pupil_path)?;
    let schools = read_schools(school_path)?;
    Ok(validate_cohort(pupils, schools)?.cohort)
}

pub(crate) fn write_rows<I>(path: &Path, header: &[&str], rows: I) -> Result<(), IoError>
where
    I: IntoIterator<Item = Vec<String>>,
{
    let mut w = WriterBuilder::new().from_path(path).map_err(|e| IoError::csv(path, e))?;
    w.write_record(header).map_err(|e| IoError::csv(path, e))?;
    for row in rows {
        w.write_record(&row).map_err(|e| IoError::csv(path, e))?;
    }
    w.flush().map_err(|e| IoError::io(path, e))
}

/// Floats are written in shortest round-trip form, so reading back is
/// lossless.
pub fn write_pupils(path: &Path, pupils: &[PupilRecord]) -> Result<(), IoError> {
    write_rows(
        path,
        &PUPIL_HEADER,
        pupils.iter().map(|p| {
            vec![
                p.pupil_id.clone(),
                p.school_id.clone(),
                p.ks2.to_string(),
                p.attainment8.to_string(),
                p.month.to_string(),
                p.gender.to_string(),
                p.ethnicity.to_string(),
                p.language.to_string(),
                p.sen.to_string(),
                p.fsm.to_string(),
                p.idaci_decile.to_string(),
            ]
        }),
    )
}

pub fn write_schools<'a, I>(path: &Path, schools: I) -> Result<(), IoError>
where
    I: IntoIterator<Item = &'a SchoolRecord>,
{
    write_rows(
        path,
        &SCHOOL_HEADER,
        schools.into_iter().map(|s| {
            vec![
                s.school_id.clone(),
                s.region.to_string(),
                s.school_type.to_string(),
                s.admissions.to_string(),
                s.age_range.to_string(),
                s.school_gender.to_string(),
                s.religion.to_string(),
                s.school_idaci_decile.to_string(),
            ]
        }),
    )
}

pub fn write_cohort(cohort: &Cohort, pupil_path: &Path, school_path: &Path) -> Result<(), IoError> {
    write_pupils(pupil_path, cohort.pupils())?;
    write_schools(school_path, cohort.schools().values())
}
