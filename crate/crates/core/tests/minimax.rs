mod common;

use bayesmix_core::fixtures::{seeded, two_dirac, SeededFamily};
use bayesmix_core::loss::{EvalOptions, Method};
use bayesmix_core::measures::log_prob_table;
use bayesmix_core::minimax::{admissibility_check, capacity_iterate, minimax_gap, CapacityOptions};
use bayesmix_core::Measure;
use common::*;

const TOL: f64 = 1e-6;
const ITER: usize = 1_000_000;

/// Best mutual information over a grid of two-point priors, bits per symbol.
fn grid_oracle(class: &[Measure], n: usize) -> (f64, f64) {
    let t: Vec<Vec<f64>> = class
        .iter()
        .map(|m| {
            log_prob_table(m.as_ref(), n, 1 << 20)
                .unwrap()
                .iter()
                .map(|l| l.exp2())
                .collect()
        })
        .collect();
    let mut best = (f64::NEG_INFINITY, 0.0);
    for step in 0..=10_000 {
        let p = step as f64 / 10_000.0;
        let w = [p, 1.0 - p];
        let mut info = 0.0;
        for c in 0..t[0].len() {
            let mix = w[0] * t[0][c] + w[1] * t[1][c];
            for i in 0..2 {
                if w[i] > 0.0 && t[i][c] > 0.0 {
                    info += w[i] * t[i][c] * (t[i][c] / mix).log2();
                }
            }
        }
        if info / n as f64 > best.0 {
            best = (info / n as f64, p);
        }
    }
    best
}

#[test]
fn two_dirac_matches_grid_search() {
    let class = two_dirac().build().unwrap();
    let (v, p) = grid_oracle(&class, 4);
    assert!((v - 0.25).abs() < 1e-12 && (p - 0.5).abs() < 1e-12);
    let r = capacity_iterate(&class, 4, TOL, ITER).unwrap();
    assert!((r.value_bits_per_symbol - v).abs() <= TOL);
    assert!((r.value_bits_per_symbol * 4.0 - 1.0).abs() <= 4.0 * TOL);
    assert!((r.prior.weights()[0] - 0.5).abs() <= 1e-4);
}

#[test]
fn bernoulli_pair_matches_grid_search() {
    let class = vec![bern(0.2), bern(0.8)];
    let (v, p) = grid_oracle(&class, 1);
    assert!((v - 0.278_072).abs() < 1e-5);
    let r = capacity_iterate(&class, 1, TOL, ITER).unwrap();
    assert!((r.value_bits_per_symbol - v).abs() < 1e-5);
    assert!((r.prior.weights()[0] - p).abs() <= 1e-4);
    for (c, n) in [(vec![bern(0.1), bern(0.6)], 3), (vec![bern(0.3), kt(2)], 4)] {
        let (v, _) = grid_oracle(&c, n);
        let r = capacity_iterate(&c, n, 1e-8, ITER).unwrap();
        assert!(
            (r.value_bits_per_symbol - v).abs() < 1e-6,
            "{} vs {v}",
            r.value_bits_per_symbol
        );
    }
}

#[test]
fn sandwich_on_seeded_classes() {
    for seed in 0..20u64 {
        let class = seeded(SeededFamily::Bernoulli, 5, seed)
            .unwrap()
            .build()
            .unwrap();
        let g = minimax_gap(&class, 8, TOL).unwrap();
        assert!(g.converged, "seed {seed}");
        assert!(
            g.lower <= g.upper + 1e-15 && g.upper - g.lower <= 2.0 * TOL,
            "seed {seed}: {g:?}"
        );
    }
}

#[test]
fn invariant_under_permutation_and_duplication() {
    for seed in 0..5u64 {
        let class = seeded(SeededFamily::Mixed, 4, seed)
            .unwrap()
            .build()
            .unwrap();
        let base = capacity_iterate(&class, 6, TOL, ITER)
            .unwrap()
            .value_bits_per_symbol;
        let mut rev = class.clone();
        rev.reverse();
        let r = capacity_iterate(&rev, 6, TOL, ITER)
            .unwrap()
            .value_bits_per_symbol;
        assert!((r - base).abs() <= 2.0 * TOL);
        let mut dup = class.clone();
        dup.push(class[1].clone());
        let d = capacity_iterate(&dup, 6, TOL, ITER)
            .unwrap()
            .value_bits_per_symbol;
        assert!((d - base).abs() <= 2.0 * TOL);
    }
}

#[test]
fn equalizer_at_optimum() {
    for seed in 0..5u64 {
        let class = seeded(SeededFamily::Markov, 5, seed)
            .unwrap()
            .build()
            .unwrap();
        let r = capacity_iterate(&class, 7, TOL, ITER).unwrap();
        for (w, risk) in r.prior.weights().iter().zip(&r.risks) {
            if *w > TOL {
                assert!(
                    (risk - r.value_bits_per_symbol).abs() <= 10.0 * TOL,
                    "seed {seed} w {w} risk {risk} {r:?}"
                );
            }
        }
        assert_eq!(r.bayes_mixture.len(), r.support.len());
    }
}

#[test]
fn adding_members_never_lowers_value() {
    let class = seeded(SeededFamily::Bernoulli, 6, 3)
        .unwrap()
        .build()
        .unwrap();
    let mut prev = 0.0;
    for j in 1..=class.len() {
        let v = capacity_iterate(&class[..j], 8, TOL, ITER)
            .unwrap()
            .value_bits_per_symbol;
        assert!(v >= prev - 2.0 * TOL);
        prev = v;
    }
}

#[test]
fn capacity_options_enforce_cap() {
    let class = seeded(SeededFamily::Bernoulli, 5, 0)
        .unwrap()
        .build()
        .unwrap();
    let opts = CapacityOptions {
        cap: 1 << 10,
        ..CapacityOptions::default()
    };
    assert!(bayesmix_core::minimax::capacity_with(&class, 8, &opts).is_err());
}

#[test]
fn admissibility_exhaustive_and_sampled() {
    let opts = EvalOptions::default();
    let measures = zoo(2);
    for mu in &measures {
        for rho in &measures {
            for n in [1, 6, 12] {
                let r = admissibility_check(rho, mu, n, &opts).unwrap();
                assert!(
                    r.mixed.dn <= 1.0 + 1e-9,
                    "{} / {} n={n}",
                    mu.tag(),
                    rho.tag()
                );
                assert!(r.bound_holds);
            }
        }
    }
    let opts = EvalOptions {
        mc_samples: 400,
        seed: 3,
        ..EvalOptions::default()
    };
    for (mu, rho) in [
        (seeded_classes()[1][0].clone(), kt(2)),
        (bern(0.75), bern(0.25)),
        (dirac(0), uniform(2)),
    ] {
        let r = admissibility_check(&rho, &mu, 1000, &opts).unwrap();
        assert!(r.bound_holds, "{r:?}");
        if r.mixed.method == Method::MonteCarlo {
            assert!(r.mixed.dn <= 1.0 + 4.0 * r.mixed.stderr.unwrap());
        }
    }
}
