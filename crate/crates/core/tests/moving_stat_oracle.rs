//! Moving statistics against a naive per-window recomputation, plus the
//! feature-matrix invariants.

use minerscope::features::{featurize, moving_stat, MovingKind, WindowConfig};
use minerscope::trace::{Direction, DirectionalTrace, PacketRecord, TraceLabel};
use proptest::prelude::*;

/// Recompute every trailing window from scratch.
fn naive(series: &[f64], w: usize) -> (Vec<f64>, Vec<f64>) {
    let mut means = Vec::new();
    let mut stds = Vec::new();
    for i in 0..series.len() {
        let lo = (i + 1).saturating_sub(w);
        let window: Vec<f64> = series[lo..=i].to_vec();
        let n = window.len() as f64;
        let mut sum = 0.0;
        for v in &window {
            sum += v;
        }
        let m = sum / n;
        let mut ss = 0.0;
        for v in &window {
            ss += (v - m).powi(2);
        }
        means.push(m);
        stds.push((ss / n).sqrt());
    }
    (means, stds)
}

fn rel_close(a: f64, b: f64, scale: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(scale)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn matches_naive_oracle(
        series in prop::collection::vec(-1e6f64..1e6, 1..=64),
        w in 1usize..=8,
    ) {
        let (m, s) = naive(&series, w);
        let scale = series.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let mm = moving_stat(&series, w, MovingKind::Mean).unwrap();
        let sd = moving_stat(&series, w, MovingKind::Std).unwrap();
        for i in 0..series.len() {
            prop_assert!(rel_close(mm[i], m[i], scale), "mean {} vs {}", mm[i], m[i]);
            prop_assert!(rel_close(sd[i], s[i], scale), "std {} vs {}", sd[i], s[i]);
        }
    }

    #[test]
    fn full_window_mean_is_global_mean(series in prop::collection::vec(0.0f64..1e3, 1..=64)) {
        let w = series.len() + 3;
        let mm = moving_stat(&series, w, MovingKind::Mean).unwrap();
        let global = series.iter().sum::<f64>() / series.len() as f64;
        let last = *mm.last().unwrap();
        prop_assert!((last - global).abs() <= 1e-12 * global.abs().max(1e-300));
    }
}

fn arb_trace() -> impl Strategy<Value = DirectionalTrace> {
    prop::collection::vec((0u64..10_000_000, 54u16..1515), 2..80).prop_map(|v| {
        let mut t = 0;
        let packets = v
            .into_iter()
            .map(|(dt, size)| {
                t += dt;
                PacketRecord::new(t, size, Direction::Ingoing)
            })
            .collect();
        DirectionalTrace::new(Direction::Ingoing, packets, TraceLabel::new("T").unwrap()).unwrap()
    })
}

proptest! {
    #[test]
    fn featurize_is_shift_invariant(trace in arb_trace(), shift in 0u64..1_000_000_000_000, w in 1usize..10) {
        let cfg = WindowConfig::new(w).unwrap();
        let a = featurize(&trace, cfg).unwrap();
        let b = featurize(&trace.shifted(shift), cfg).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn moving_means_stay_inside_their_window(trace in arb_trace(), w in 1usize..10) {
        let m = featurize(&trace, WindowConfig::new(w).unwrap()).unwrap();
        prop_assert_eq!(m.len(), trace.len() - 1);
        for i in 0..m.len() {
            let lo = (i + 1).saturating_sub(w);
            let win = &m.rows[lo..=i];
            let (dmin, dmax) = win.iter().fold((f64::MAX, f64::MIN), |(a, b), r| (a.min(r.dt), b.max(r.dt)));
            let (smin, smax) = win.iter().fold((f64::MAX, f64::MIN), |(a, b), r| (a.min(r.sz), b.max(r.sz)));
            let r = m.rows[i];
            let eps = 1e-12 * dmax.abs().max(1e-300);
            prop_assert!(r.mm_dt >= dmin - eps && r.mm_dt <= dmax + eps);
            prop_assert!(r.mm_sz >= smin - 1e-9 && r.mm_sz <= smax + 1e-9);
            prop_assert!(r.sd_dt >= 0.0 && r.sd_sz >= 0.0);
        }
    }
}
