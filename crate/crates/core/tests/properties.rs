mod common;

use common::*;
use fdisac::experiments::{summarize, RunRecord, Scheme};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn taylor_bounds_dominate(seed in any::<u64>()) {
        prop_assert_eq!(check_taylor_dominance(seed), Ok(()));
    }

    #[test]
    fn closed_form_receivers_are_optimal(seed in any::<u64>()) {
        prop_assert_eq!(check_receiver_optimality(seed), Ok(()));
    }

    #[test]
    fn sinr_is_receiver_scale_invariant(
        seed in any::<u64>(),
        re in -1e3f64..1e3,
        im in -1e3f64..1e3,
    ) {
        prop_assume!(re.hypot(im) > 1e-6);
        prop_assert_eq!(check_receiver_scale_invariance(seed, re, im), Ok(()));
    }

    #[test]
    fn embedding_round_trips(seed in any::<u64>(), n in 1usize..9) {
        prop_assert_eq!(check_embedding_round_trip(seed, n), Ok(()));
    }

    #[test]
    fn roc_is_monotone(
        sinrs in prop::collection::vec(-20.0f64..25.0, 2..8),
        pfas in prop::collection::vec(-10.0f64..-0.01, 2..8),
    ) {
        let pfas: Vec<f64> = pfas.iter().map(|e| 10f64.powf(*e)).collect();
        prop_assert_eq!(check_roc(&sinrs, &pfas), Ok(()));
    }

    #[test]
    fn summary_means_match_raw_rows(
        rows in prop::collection::vec((0usize..3, 0usize..3, -1e3f64..1e3, 0usize..40, any::<bool>()), 1..60),
    ) {
        let schemes = [Scheme::Fd, Scheme::Hd, Scheme::CommOnly];
        let records: Vec<RunRecord> = rows
            .iter()
            .enumerate()
            .map(|(i, &(sweep, scheme, obj, iters, ok))| RunRecord {
                trial: i,
                seed: i as u64,
                sweep_value: sweep as f64 * 2.0,
                scheme: schemes[scheme],
                objective: obj,
                radar_slack: 0.0,
                min_ul_slack: 0.0,
                min_dl_slack: 0.0,
                iterations: iters,
                wall_ms: 1.0,
                mean_iter_ms: 1.0,
                status: if ok { "ok".into() } else { "infeasible".into() },
            })
            .collect();
        let summary = summarize(&records);
        for row in &summary {
            let group: Vec<&RunRecord> = records
                .iter()
                .filter(|r| r.sweep_value == row.sweep_value && r.scheme == row.scheme)
                .collect();
            let ok: Vec<f64> = group.iter().filter(|r| r.ok()).map(|r| r.objective).collect();
            prop_assert_eq!(row.trials, group.len());
            prop_assert!((row.feasibility_rate - ok.len() as f64 / group.len() as f64).abs() < 1e-12);
            if ok.is_empty() {
                prop_assert!(row.mean_objective.is_nan());
            } else {
                let mean = ok.iter().sum::<f64>() / ok.len() as f64;
                prop_assert!((row.mean_objective - mean).abs() <= 1e-12 * mean.abs().max(1.0));
            }
        }
        let groups: std::collections::BTreeSet<(u64, Scheme)> =
            records.iter().map(|r| (r.sweep_value.to_bits(), r.scheme)).collect();
        prop_assert_eq!(summary.len(), groups.len());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn sca_objective_never_increases(seed in 0u64..10_000) {
        prop_assert_eq!(check_sca_monotone(seed), Ok(()));
    }
}
