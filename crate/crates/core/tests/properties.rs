use std::collections::BTreeMap;

use ballotlens::features::{binary_outcome, race_ratios, to_cumulative, weekly_average};
use ballotlens::ingest::{election_day, DailySeries, Metric};
use ballotlens::pipeline::parse_weeks;
use ballotlens::regress::{ols_fit, predict_prob, DesignMatrix, FitResult};
use chrono::Duration;
use proptest::prelude::*;

fn race() -> impl Strategy<Value = BTreeMap<u8, f64>> {
    prop::collection::vec(prop_oneof![Just(0.0), 0.0..1e7_f64], 1..8)
        .prop_map(|v| v.into_iter().enumerate().map(|(i, x)| (i as u8, x)).collect())
}

proptest! {
    #[test]
    fn ratios_sum_to_one(values in race()) {
        let r = race_ratios(&values);
        let total: f64 = values.values().sum();
        prop_assert_eq!(r.zero_total, total == 0.0);
        if !r.zero_total {
            let s: f64 = r.ratios.values().map(|v| v.unwrap()).sum();
            prop_assert!((s - 1.0).abs() <= 1e-12);
            prop_assert!(r.ratios.values().all(|v| (0.0..=1.0).contains(&v.unwrap())));
        } else {
            prop_assert!(r.ratios.values().all(Option::is_none));
        }
    }

    #[test]
    fn ratios_and_winners_are_scale_free(values in race(), c in prop_oneof![Just(1e-3), Just(1.0), Just(1e6), 1e-2..1e2_f64]) {
        let scaled: BTreeMap<u8, f64> = values.iter().map(|(&k, &v)| (k, v * c)).collect();
        let (a, b) = (race_ratios(&values), race_ratios(&scaled));
        for (x, y) in a.ratios.values().zip(b.ratios.values()) {
            match (x, y) {
                (Some(x), Some(y)) => prop_assert!((x - y).abs() <= 1e-12),
                (None, None) => {}
                _ => prop_assert!(false, "zero-total flag changed under scaling"),
            }
        }
        prop_assert_eq!(binary_outcome(&values), binary_outcome(&scaled));
    }

    #[test]
    fn at_most_one_winner(values in race()) {
        let w = binary_outcome(&values);
        let winners: Vec<u8> = w.iter().filter(|(_, &v)| v == 1).map(|(&k, _)| k).collect();
        prop_assert!(winners.len() <= 1);
        let max = values.values().copied().fold(f64::NEG_INFINITY, f64::max);
        let ties = values.values().filter(|&&v| v == max).count();
        prop_assert_eq!(winners.len(), usize::from(ties == 1));
        if let Some(k) = winners.first() {
            prop_assert_eq!(values[k], max);
        }
    }

    #[test]
    fn cumulative_last_week_is_the_daily_total(counts in prop::collection::vec(0u64..1_000_000, 364), year in prop_oneof![Just(2016), Just(2018)]) {
        let eday = election_day(year).unwrap();
        let total = counts.iter().sum::<u64>() as f64;
        let daily = DailySeries { candidate_id: "c".into(), metric: Metric::TvMentions, start_date: eday - Duration::days(363), counts };
        let weekly = weekly_average(&daily, eday).unwrap();
        prop_assert_eq!(weekly.values.len(), 52);
        let cum = to_cumulative(&weekly).unwrap();
        prop_assert!(cum.values.windows(2).all(|w| w[1] >= w[0]));
        prop_assert!((cum.values[51] * 7.0 - total).abs() <= 1e-9 * total.max(1.0));
        prop_assert!(to_cumulative(&cum).is_err());
    }

    #[test]
    fn week_selection_parses_to_sorted_unique_weeks(weeks in prop::collection::vec(0u8..52, 1..20)) {
        let spec = weeks.iter().map(u8::to_string).collect::<Vec<_>>().join(",");
        let parsed = parse_weeks(&spec).unwrap();
        prop_assert!(parsed.windows(2).all(|w| w[0] < w[1]));
        for w in &weeks {
            prop_assert!(parsed.contains(w));
        }
        prop_assert!(parsed.iter().all(|w| weeks.contains(w)));
    }

    #[test]
    fn predict_prob_is_monotone_and_bounded(b0 in -10.0..10.0_f64, b1 in 0.01..10.0_f64, x in -3.0..3.0_f64) {
        let lo = predict_prob(&[b0, b1], &[1.0, x]).unwrap();
        let hi = predict_prob(&[b0, b1], &[1.0, x + 0.1]).unwrap();
        prop_assert!((0.0..=1.0).contains(&lo));
        prop_assert!(hi >= lo);
        let flipped = predict_prob(&[-b0, -b1], &[1.0, x]).unwrap();
        prop_assert!((lo + flipped - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ols_ignores_row_order_and_scales_with_response(
        rows in prop::collection::vec((0.0..1.0_f64, 0u8..2, -0.1..0.1_f64), 12..40),
        shift in 0usize..40,
        c in 0.5..4.0_f64,
    ) {
        let x: Vec<Vec<f64>> = rows.iter().map(|&(a, b, _)| vec![1.0, a, f64::from(b)]).collect();
        let y: Vec<f64> = rows.iter().map(|&(a, b, e)| 0.3 + 0.2 * a - 0.1 * f64::from(b) + e).collect();
        let labels = ["Intercept", "a", "b"];
        let Ok(base) = DesignMatrix::from_rows(&labels, &x, &y).and_then(|d| ols_fit(&d)) else {
            // a constant b column makes the design rank deficient
            return Ok(());
        };
        let k = shift % x.len();
        let (mut xr, mut yr) = (x.clone(), y.clone());
        xr.rotate_left(k);
        yr.rotate_left(k);
        let rotated = ols_fit(&DesignMatrix::from_rows(&labels, &xr, &yr).unwrap()).unwrap();
        let ys: Vec<f64> = y.iter().map(|v| v * c).collect();
        let scaled = ols_fit(&DesignMatrix::from_rows(&labels, &x, &ys).unwrap()).unwrap();
        for i in 0..3 {
            prop_assert!((base.coefficients[i] - rotated.coefficients[i]).abs() < 1e-10);
            prop_assert!((base.coefficients[i] * c - scaled.coefficients[i]).abs() < 1e-10);
        }
        let back = FitResult::from_json(&base.to_json()).unwrap();
        prop_assert_eq!(back.coefficients, base.coefficients);
    }
}
