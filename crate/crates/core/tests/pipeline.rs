use proptest::prelude::*;

use vamod::accountability::{band_schools, group_gaps, transition_table, Band, Characteristic};
use vamod::cohort::{mean, sample_sd, Cohort, Fsm};
use vamod::design::SpecName;
use vamod::synth::{generate_cohort, SchoolSize, SynthConfig};
use vamod::valueadded::{run_pipeline, shrink_school_scores, POINTS_PER_GRADE, Z_95};

fn cohort(n_schools: usize, median: f64, seed: u64) -> Cohort {
    generate_cohort(&SynthConfig {
        n_schools,
        school_size: SchoolSize {
            median,
            sigma: 0.3,
            min: 10,
        },
        seed,
        ..SynthConfig::default()
    })
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn pipeline_invariants_hold_for_any_seed(seed in any::<u64>(), n_schools in 25usize..60) {
        let c = cohort(n_schools, 90.0, seed);
        for spec in [SpecName::Base, SpecName::Adjusted] {
            let r = run_pipeline(&c, spec).unwrap();
            let scores = r.scores();
            prop_assert!(mean(&scores).abs() < 1e-9);
            prop_assert!((r.national_sd - sample_sd(&scores)).abs() < 1e-12);
            for (score, resid) in scores.iter().zip(&r.fit.residuals) {
                prop_assert!((score - resid / POINTS_PER_GRADE).abs() < 1e-12);
            }

            let total: usize = r.school_scores.iter().map(|s| s.n_pupils).sum();
            prop_assert_eq!(total, c.len());
            let weighted: f64 = r.school_scores.iter().map(|s| s.score * s.n_pupils as f64).sum();
            prop_assert!(weighted.abs() < 1e-7);
            for s in &r.school_scores {
                let half = Z_95 * s.se;
                prop_assert!((s.ci_high - s.ci_low - 2.0 * half).abs() < 1e-12);
                prop_assert_eq!(s.significant, s.score.abs() > half);
            }
            for w in r.school_scores.windows(2) {
                prop_assert!(w[0].score >= w[1].score);
            }
        }
    }

    #[test]
    fn shrinkage_pulls_towards_zero_on_generated_cohorts(seed in any::<u64>()) {
        let c = cohort(30, 40.0, seed);
        let r = run_pipeline(&c, SpecName::Base).unwrap();
        let ids: Vec<&str> = c.pupils().iter().map(|p| p.school_id.as_str()).collect();
        let est = shrink_school_scores(&r.scores(), &ids).unwrap();
        prop_assert_eq!(est.schools.len(), 30);
        for s in &est.schools {
            let raw = r.school(&s.school_id).unwrap();
            prop_assert!((s.raw_score - raw.score).abs() < 1e-12);
            prop_assert!(s.shrunk_score.abs() <= s.raw_score.abs());
        }
    }
}

#[test]
fn weighted_category_means_equal_overall_mean() {
    let c = cohort(60, 100.0, 9);
    let r = run_pipeline(&c, SpecName::Base).unwrap();
    let scores = r.scores();
    for ch in Characteristic::ALL {
        let g = match group_gaps(&scores, &c, ch) {
            Ok(g) => g,
            // a school attribute may take one value across 60 schools
            Err(_) if ch.is_school_level() => continue,
            Err(e) => panic!("{ch}: {e}"),
        };
        let n: usize = g.categories.iter().map(|k| k.n).sum();
        assert_eq!(n, c.len());
        let weighted: f64 = g.categories.iter().map(|k| k.mean * k.n as f64).sum::<f64>() / n as f64;
        assert!((weighted - g.overall_mean).abs() < 1e-9, "{ch}");
        assert!((g.overall_mean - mean(&scores)).abs() < 1e-9);
    }
}

#[test]
fn adjustment_removes_pupil_level_gaps() {
    let c = cohort(80, 120.0, 5);
    let base = run_pipeline(&c, SpecName::Base).unwrap();
    let adjusted = run_pipeline(&c, SpecName::Adjusted).unwrap();
    let b = group_gaps(&base.scores(), &c, Characteristic::Fsm).unwrap();
    let a = group_gaps(&adjusted.scores(), &c, Characteristic::Fsm).unwrap();
    assert!(b.range() > 0.2, "base fsm gap {}", b.range());
    assert!(b.test.p_value < 1e-3);
    assert!(a.range() < 1e-9);
    assert!(a.test.statistic < 1e-12);
}

#[test]
fn transition_totals_match_bandings_of_both_measures() {
    let c = cohort(120, 80.0, 31);
    let base = run_pipeline(&c, SpecName::Base).unwrap();
    let adjusted = run_pipeline(&c, SpecName::Adjusted).unwrap();
    let mut a = band_schools(&base.school_scores);
    let mut b = band_schools(&adjusted.school_scores);
    a.sort_by(|x, y| x.school_id.cmp(&y.school_id));
    b.sort_by(|x, y| x.school_id.cmp(&y.school_id));
    let ba: Vec<Band> = a.iter().map(|s| s.band).collect();
    let bb: Vec<Band> = b.iter().map(|s| s.band).collect();
    let t = transition_table(&ba, &bb).unwrap();
    assert_eq!(t.total, 120);
    for (j, band) in Band::ALL.iter().enumerate() {
        assert_eq!(t.column_totals[j], bb.iter().filter(|x| *x == band).count());
    }
    let diagonal: usize = (0..5).map(|i| t.counts[i][i]).sum();
    assert_eq!(t.changed, 120 - diagonal);
    for s in &a {
        assert_eq!(s.below_floor, s.band == Band::WellBelow);
    }
}

#[test]
fn synthetic_marginals_match_national_shares() {
    let config = SynthConfig {
        n_schools: 700,
        school_size: SchoolSize {
            median: 150.0,
            sigma: 0.2,
            min: 10,
        },
        seed: 77,
        ..SynthConfig::default()
    };
    let c = generate_cohort(&config).unwrap();
    let n = c.len() as f64;
    assert!(n > 100_000.0);

    let fsm = c.pupils().iter().filter(|p| p.fsm == Fsm::Eligible).count() as f64 / n;
    assert!((fsm - 0.266).abs() < 0.01, "fsm share {fsm}");

    for name in ["month", "gender", "ethnicity", "language", "sen", "fsm", "idaci_decile"] {
        let probs = config.pupil_marginals.get(name).unwrap();
        let cats = vamod::synth::PupilMarginals::categories(name).unwrap();
        for (cat, &p) in cats.iter().zip(probs) {
            let count = c
                .pupils()
                .iter()
                .filter(|pu| token_of(pu, name) == *cat)
                .count() as f64;
            let sd = (n * p * (1.0 - p)).sqrt();
            assert!(
                (count - n * p).abs() <= 4.0 * sd + 1.0,
                "{name}={cat}: {count} vs expected {:.0}",
                n * p
            );
        }
    }
}

fn token_of(p: &vamod::cohort::PupilRecord, name: &str) -> String {
    match name {
        "month" => p.month.to_string(),
        "gender" => p.gender.to_string(),
        "ethnicity" => p.ethnicity.to_string(),
        "language" => p.language.to_string(),
        "sen" => p.sen.to_string(),
        "fsm" => p.fsm.to_string(),
        "idaci_decile" => p.idaci_decile.to_string(),
        _ => unreachable!(),
    }
}
