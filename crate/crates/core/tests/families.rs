mod common;

use bayesmix_core::families::{
    changepoint_value, count_extensions, gen_changepoint, restart_oracle_bits, switch_prior_budget,
    ChangePointSpec, ChangeSchedule, Frac, SegmentSource, SwitchingKt, TypicalMixture,
    TypicalMixtureSpec,
};
use bayesmix_core::measures::schedule;
use bayesmix_core::{log_prob, Alphabet};
use common::*;
use num_traits::ToPrimitive;

fn seeded_spec(alpha: f64, n: usize) -> ChangePointSpec {
    ChangePointSpec {
        alpha,
        n,
        schedule: ChangeSchedule::Bernoulli {},
        source: SegmentSource::Uniform {},
    }
}

#[test]
fn segment_means_concentrate() {
    let spec = seeded_spec(1.0 / 64.0, 4096);
    let mut outside = 0;
    let mut total = 0;
    for seed in 0..10 {
        let tr = gen_changepoint(&spec, seed).unwrap();
        assert!(tr.change_times.len() <= 64);
        assert_eq!(tr.segments.len(), tr.change_times.len() + 1);
        assert_eq!(tr.segments.iter().map(|s| s.len).sum::<usize>(), 4096);
        for s in &tr.segments {
            let ones = tr.symbols[s.start..s.start + s.len]
                .iter()
                .filter(|&&b| b == 1)
                .count() as f64;
            let mean = ones / s.len as f64;
            let sigma = (s.theta * (1.0 - s.theta) / s.len as f64).sqrt();
            total += 1;
            if (mean - s.theta).abs() > 3.0 * sigma + 1.0 / s.len as f64 {
                outside += 1;
                assert_ne!(seed, 0, "segment at {} of the reference run", s.start);
            }
        }
    }
    // a 3σ band misses about 0.3% of segments
    assert!(outside * 100 <= total, "{outside} of {total}");
}

#[test]
fn trace_csv_marks_changes() {
    let tr = gen_changepoint(&seeded_spec(1.0 / 16.0, 200), 5).unwrap();
    let csv = tr.to_csv().unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("t,symbol,is_change,theta"));
    let flagged: Vec<usize> = lines
        .filter(|l| l.split(',').nth(2) == Some("1"))
        .map(|l| l.split(',').next().unwrap().parse().unwrap())
        .collect();
    assert_eq!(flagged, tr.change_times);
}

#[test]
fn value_formula_increases_on_grid() {
    assert_eq!(changepoint_value(1.0 / 16.0).unwrap(), 0.1875);
    assert_eq!(changepoint_value(1.0 / 64.0).unwrap(), 0.0625);
    let vals: Vec<f64> = (2..=10)
        .rev()
        .map(|e| changepoint_value((-(e as f64)).exp2()).unwrap())
        .collect();
    assert!(vals.windows(2).all(|w| w[0] < w[1]));
    assert!(changepoint_value(0.0).is_err() && changepoint_value(1.0).is_err());
}

#[test]
fn switching_predictor_within_budget() {
    let alpha_hat = 1.0 / 64.0;
    let spec = seeded_spec(alpha_hat, 2048);
    let p = SwitchingKt::new(Alphabet::BINARY, alpha_hat).unwrap();
    for seed in 0..3 {
        let tr = gen_changepoint(&spec, seed).unwrap();
        let bits = log_prob(&p, &tr.symbols).unwrap().bits();
        let oracle = restart_oracle_bits(&tr.symbols, &tr.change_times).unwrap();
        let n = tr.symbols.len();
        let budget = switch_prior_budget(tr.change_times.len(), n, alpha_hat);
        assert!((bits - oracle) / n as f64 <= budget + 0.02, "seed {seed}");
    }
}

#[test]
fn restart_oracle_without_changes_is_kt() {
    let x: Vec<u8> = (0..50).map(|i| (i % 3 == 0) as u8).collect();
    let a = restart_oracle_bits(&x, &[]).unwrap();
    let b = log_prob(kt(2).as_ref(), &x).unwrap().bits();
    assert_eq!(a, b);
}

#[test]
fn switching_state_posterior_normalized() {
    let p = SwitchingKt::new(Alphabet::BINARY, 0.1).unwrap();
    let tr = gen_changepoint(&seeded_spec(0.05, 300), 2).unwrap();
    let mut s = p.state();
    for &b in &tr.symbols {
        let post: f64 = s.posterior().iter().map(|c| c.1).sum();
        assert!((post - 1.0).abs() <= 1e-12);
        assert!((s.predict().iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        s.update(b);
    }
    assert_eq!(s.time(), 300);
}

fn third() -> Frac {
    Frac::new(1, 3).unwrap()
}

/// Representative sets `S_j^l` listed explicitly, with their weights.
fn enumerated_sets(spec: &TypicalMixtureSpec) -> Vec<(f64, Vec<Vec<u8>>)> {
    let p = third().value();
    let mut out = Vec::new();
    for j in 1..=spec.max_j {
        let n_j = 1usize << j;
        for l in 1..=spec.max_l {
            let eps = (-(l as f64)).exp2();
            let set: Vec<Vec<u8>> = all_sequences(2, n_j)
                .into_iter()
                .filter(|s| {
                    let f = s.iter().filter(|&&b| b == 1).count() as f64 / n_j as f64;
                    (f - p).abs() <= eps + 1e-15
                })
                .collect();
            if !set.is_empty() {
                out.push((schedule::weight(l as u64) * schedule::weight(j as u64), set));
            }
        }
    }
    out
}

fn enumerated_log_prob(sets: &[(f64, Vec<Vec<u8>>)], prefix: &[u8]) -> f64 {
    let mut total = 0.0;
    for (w, set) in sets {
        if set[0].len() < prefix.len() {
            continue;
        }
        let hits = set.iter().filter(|s| s.starts_with(prefix)).count() as f64;
        total += w * hits / set.len() as f64;
    }
    total.log2()
}

#[test]
fn typical_mixture_matches_enumerated_sets() {
    let spec = TypicalMixtureSpec {
        p_star: third(),
        max_j: 4,
        max_l: 4,
    };
    let sets = enumerated_sets(&spec);
    let mix = TypicalMixture::new(spec).unwrap();
    for len in 0..=16 {
        for x in all_sequences(2, len)
            .into_iter()
            .step_by(if len > 8 { 97 } else { 1 })
        {
            let got = mix.log_prob(&x).unwrap().value();
            let want = enumerated_log_prob(&sets, &x);
            if want == f64::NEG_INFINITY {
                assert_eq!(got, want, "{x:?}");
            } else {
                assert!((got - want).abs() < 1e-9, "{x:?}: {got} vs {want}");
            }
        }
    }
}

#[test]
fn typical_mixture_is_superadditive() {
    let mix = TypicalMixture::new(TypicalMixtureSpec {
        max_j: 7,
        ..TypicalMixtureSpec::default()
    })
    .unwrap();
    for len in 0..10 {
        for x in all_sequences(2, len) {
            let here = mix.log_prob(&x).unwrap().prob();
            let mut ext = 0.0;
            for b in 0..2 {
                let mut y = x.clone();
                y.push(b);
                ext += mix.log_prob(&y).unwrap().prob();
            }
            assert!(ext <= here * (1.0 + 1e-12));
        }
    }
}

#[test]
fn counting_examples_exact() {
    let sixth = Frac::new(1, 6).unwrap();
    assert_eq!(count_extensions(0, 0, 6, sixth, third()).to_u64(), Some(41));
    assert_eq!(count_extensions(2, 2, 6, sixth, third()).to_u64(), Some(5));
    assert_eq!(count_extensions(2, 6, 6, sixth, third()).to_u64(), Some(1));
    assert_eq!(count_extensions(5, 6, 6, sixth, third()).to_u64(), Some(0));
}

#[test]
fn typical_curve_on_periodic_sequence() {
    let x: Vec<u8> = (0..3000).map(|i| (i % 3 == 0) as u8).collect();
    let mix = TypicalMixture::new(TypicalMixtureSpec::default()).unwrap();
    let curve = mix.loss_curve(&x, &[300, 3000]).unwrap();
    let h = 0.918_295_834_054_489_6;
    let last = curve.last().unwrap();
    assert!((last.per_symbol_bits - h).abs() <= 0.05);
    assert!((last.baseline_bits - h).abs() <= 0.01);
    let ones = vec![1u8; 4096];
    let c = mix.loss_curve(&ones, &[64, 4096]).unwrap();
    assert!(c[0].per_symbol_bits.is_finite());
    assert_eq!(c[1].per_symbol_bits, f64::INFINITY);
}
