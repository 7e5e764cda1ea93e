use proptest::prelude::*;
use routelens::features::{FeatureVector, N_FEATURES};
use routelens::model::SolutionSource;
use routelens::scenarios::{build_scenario, class_balance, LabeledSolution, ScenarioSpec};
use routelens::ScenarioId;

fn corpus(gaps: &[[f64; 3]]) -> Vec<LabeledSolution> {
    let mut out = Vec::new();
    for (i, g) in gaps.iter().enumerate() {
        let id = format!("inst-{i:04}");
        let row = |source, gap: f64| LabeledSolution {
            features: FeatureVector { instance_id: id.clone(), source, values: [gap; N_FEATURES] },
            gap_percent: gap,
        };
        out.push(row(SolutionSource::OptimalProxy, 0.0));
        out.push(row(SolutionSource::Mnslite, g[0]));
        out.push(row(SolutionSource::ClarkeWright, g[1]));
        out.push(row(SolutionSource::Sweep, g[2]));
    }
    out
}

fn negatives(c: &[LabeledSolution], id: ScenarioId) -> Option<Vec<(String, SolutionSource)>> {
    let ds = build_scenario(c, ScenarioSpec::standard(id), 0.25, 3).ok()?;
    Some(
        ds.rows
            .iter()
            .zip(&ds.labels)
            .filter(|(_, &l)| l == 0)
            .map(|(r, _)| (r.instance_id.clone(), r.source))
            .collect(),
    )
}

proptest! {
    #[test]
    fn threshold_scenarios_nest(gaps in proptest::collection::vec(proptest::array::uniform3(0.0f64..25.0), 5..60)) {
        let c = corpus(&gaps);
        let ids = [ScenarioId::S4, ScenarioId::S5, ScenarioId::S6, ScenarioId::S7, ScenarioId::S8];
        for w in ids.windows(2) {
            let (Some(a), Some(b)) = (negatives(&c, w[0]), negatives(&c, w[1])) else { continue };
            prop_assert!(b.iter().all(|r| a.contains(r)), "{} not within {}", w[1], w[0]);
        }
    }

    #[test]
    fn every_instance_has_one_positive(gaps in proptest::collection::vec(proptest::array::uniform3(0.1f64..25.0), 3..40)) {
        let c = corpus(&gaps);
        let ds = build_scenario(&c, ScenarioSpec::standard(ScenarioId::S1), 0.25, 1).unwrap();
        let b = class_balance(&ds);
        prop_assert_eq!(b.positives, gaps.len());
        prop_assert_eq!(b.negatives, gaps.len());
        let test_pos = ds.test.iter().filter(|&&i| ds.labels[i] == 1).count() as f64;
        prop_assert!((test_pos - 0.25 * gaps.len() as f64).abs() <= 1.0);
    }
}

#[test]
fn overlapping_selectors_recount() {
    let gaps: Vec<[f64; 3]> = (0..30).map(|i| [i as f64 * 0.3, i as f64 * 0.5 + 1.0, i as f64 * 0.9 + 2.0]).collect();
    let c = corpus(&gaps);
    let mut total = 0;
    for id in ScenarioId::ALL {
        let ds = build_scenario(&c, ScenarioSpec::standard(id), 0.25, 1).unwrap();
        let spec = ScenarioSpec::standard(id);
        let recount = c.iter().filter(|s| spec.selects(s.features.source, s.gap_percent)).count();
        assert_eq!(class_balance(&ds).negatives, recount);
        total += recount;
    }
    let by_row: usize = c
        .iter()
        .map(|s| ScenarioId::ALL.iter().filter(|&&id| ScenarioSpec::standard(id).selects(s.features.source, s.gap_percent)).count())
        .sum();
    assert_eq!(total, by_row);
}
