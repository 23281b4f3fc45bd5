//! Reference national distributions and model coefficients used as
//! generator defaults. Counts are pupils (or schools) per category in a
//! national cohort of 502,851 pupils in 3,098 schools; coefficients are
//! Attainment 8 points from the background-adjusted regression.

pub const KS2_GROUP_PUPILS: [u32; 34] = [
    960, 1164, 7692, 3133, 2413, 2417, 3287, 3359, 4757, 5228, 6357, 7499, 8337, 10041, 12033, 13679, 16026,
    19589, 23473, 25852, 29549, 30450, 30669, 31371, 30990, 29952, 28983, 27346, 24938, 21913, 18167, 12225,
    6505, 2497,
];

pub const MONTH_PUPILS: [u32; 12] = [
    43346, 41981, 41113, 42700, 42124, 38949, 42158, 40458, 42601, 40983, 43493, 42945,
];

pub const GENDER_PUPILS: [u32; 2] = [253733, 249118];

pub const ETHNICITY_PUPILS: [u32; 20] = [
    380949, 1606, 104, 659, 17129, 14379, 6650, 2690, 12426, 18722, 7709, 6900, 1585, 2390, 6873, 4656, 6983, 6198,
    2098, 2145,
];

pub const LANGUAGE_PUPILS: [u32; 2] = [438585, 64266];

pub const SEN_PUPILS: [u32; 3] = [436229, 55601, 11021];

pub const FSM_PUPILS: [u32; 2] = [369147, 133704];

pub const IDACI_PUPILS: [u32; 10] = [50289, 51790, 49086, 51072, 50340, 49321, 50172, 50853, 49761, 50167];

pub const REGION_SCHOOLS: [u32; 9] = [431, 474, 309, 373, 447, 152, 298, 269, 345];

pub const SCHOOL_TYPE_SCHOOLS: [u32; 11] = [538, 275, 273, 34, 3, 560, 1320, 27, 30, 26, 12];

pub const ADMISSIONS_SCHOOLS: [u32; 3] = [2819, 162, 117];

pub const AGE_RANGE_SCHOOLS: [u32; 5] = [1881, 971, 135, 83, 28];

pub const SCHOOL_GENDER_SCHOOLS: [u32; 3] = [2738, 151, 209];

pub const RELIGION_SCHOOLS: [u32; 7] = [2524, 176, 310, 68, 11, 8, 1];

pub const SCHOOL_IDACI_SCHOOLS: [u32; 10] = [288, 329, 313, 303, 325, 332, 327, 320, 289, 272];

/// Adjusted-model coefficients in design-column order (78 values).
pub const ADJUSTED_COEFFICIENTS: [f64; 78] = [
    // const
    19.74,
    // KS2 groups 2..34
    5.52, 6.73, 7.71, 9.29, 9.86, 10.84, 11.67, 13.04, 13.63, 14.75, 16.03, 17.22, 18.48, 20.09, 21.24, 22.72,
    24.18, 25.86, 27.38, 28.89, 30.76, 32.53, 34.40, 36.18, 37.87, 39.94, 41.92, 43.93, 46.11, 48.27, 50.69,
    52.90, 54.91,
    // October..August
    0.15, 0.35, 0.42, 0.59, 0.78, 0.99, 1.12, 1.21, 1.30, 1.49, 1.62,
    // female
    2.44,
    // ethnicity, White Irish..Refused
    2.02, -6.92, -5.63, 3.90, 5.42, 1.80, 3.75, 4.16, 1.93, 4.49, 4.71, 6.26, 2.46, 0.04, 2.08, 2.32, 5.67,
    -0.14, 1.36,
    // English as an additional language
    2.55,
    // SEN support, statement
    -4.42, -6.88,
    // FSM eligible
    -4.01,
    // IDACI deciles 2..10
    -0.22, -0.79, -1.28, -1.87, -2.66, -2.99, -3.43, -3.82, -4.52,
];

/// Standard errors of [`ADJUSTED_COEFFICIENTS`] in the national fit.
pub const ADJUSTED_STANDARD_ERRORS: [f64; 78] = [
    0.33, 0.43, 0.34, 0.37, 0.38, 0.38, 0.37, 0.37, 0.35, 0.35, 0.35, 0.34, 0.34, 0.34, 0.34, 0.33, 0.33, 0.33,
    0.33, 0.33, 0.33, 0.33, 0.33, 0.33, 0.33, 0.33, 0.33, 0.33, 0.33, 0.33, 0.33, 0.34, 0.35, 0.38, 0.07,
    0.07, 0.07, 0.07, 0.07, 0.07, 0.07, 0.07, 0.07, 0.07, 0.07, 0.03, 0.25, 0.97, 0.39, 0.09, 0.09, 0.12, 0.19,
    0.10, 0.09, 0.13, 0.13, 0.25, 0.20, 0.12, 0.15, 0.12, 0.14, 0.22, 0.21, 0.07, 0.05, 0.10, 0.04, 0.06, 0.06,
    0.06, 0.06, 0.06, 0.06, 0.06, 0.07, 0.07,
];

/// Prior-attainment-only model: intercept and KS2 groups 2..34.
pub const BASE_COEFFICIENTS: [f64; 34] = [
    14.52, 5.55, 6.73, 8.00, 10.11, 10.83, 11.94, 13.11, 14.78, 15.62, 16.97, 18.62, 20.04, 21.56, 23.47, 24.83,
    26.43, 28.16, 29.94, 31.70, 33.34, 35.43, 37.33, 39.39, 41.32, 43.17, 45.40, 47.51, 49.62, 52.01, 54.30,
    56.96, 59.34, 61.54,
];

pub fn proportions(counts: &[u32]) -> Vec<f64> {
    let total: f64 = counts.iter().map(|&c| f64::from(c)).sum();
    counts.iter().map(|&c| f64::from(c) / total).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::{model_spec, SpecName};

    fn total(c: &[u32]) -> u32 {
        c.iter().sum()
    }

    #[test]
    fn pupil_tables_cover_the_cohort() {
        for t in [
            &KS2_GROUP_PUPILS[..],
            &MONTH_PUPILS,
            &GENDER_PUPILS,
            &ETHNICITY_PUPILS,
            &LANGUAGE_PUPILS,
            &SEN_PUPILS,
            &FSM_PUPILS,
            &IDACI_PUPILS,
        ] {
            assert_eq!(total(t), 502_851);
        }
    }

    #[test]
    fn school_tables_cover_all_schools() {
        for t in [
            &REGION_SCHOOLS[..],
            &SCHOOL_TYPE_SCHOOLS,
            &ADMISSIONS_SCHOOLS,
            &AGE_RANGE_SCHOOLS,
            &SCHOOL_GENDER_SCHOOLS,
            &RELIGION_SCHOOLS,
            &SCHOOL_IDACI_SCHOOLS,
        ] {
            assert_eq!(total(t), 3_098);
        }
    }

    #[test]
    fn coefficient_layout_matches_adjusted_spec() {
        let labels = model_spec(SpecName::Adjusted).column_labels();
        assert_eq!(labels.len(), ADJUSTED_COEFFICIENTS.len());
        let at = |l: &str| ADJUSTED_COEFFICIENTS[labels.iter().position(|x| x == l).unwrap()];
        assert_eq!(at("fsm_eligible"), -4.01);
        assert_eq!(at("ethnicity_chinese"), 6.26);
        assert_eq!(at("gender_female"), 2.44);
        assert_eq!(at("month_august"), 1.62);
        assert_eq!(at("ks2_g34"), 54.91);
        assert_eq!(at("idaci_d10"), -4.52);
        assert_eq!(at("sen_statement"), -6.88);
        assert_eq!(at("language_english_additional"), 2.55);
        assert_eq!(at("ethnicity_traveller_of_irish_heritage"), -6.92);
        assert_eq!(at("ethnicity_refused"), 1.36);
    }

    #[test]
    fn fsm_share() {
        let p = proportions(&FSM_PUPILS);
        assert!((p[1] - 0.266).abs() < 5e-4);
    }
}
