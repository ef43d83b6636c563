mod common;

use std::collections::BTreeSet;
use std::sync::Arc;

use bayesmix_core::cover::{
    assemble, dominance_audit, greedy_cover, level_partition, likelihood_set, LevelParams,
    SlackParams,
};
use bayesmix_core::fixtures::{seeded, SeededFamily};
use bayesmix_core::measures::log_prob_table;
use bayesmix_core::{log_prob, Alphabet, Error, Measure, ModelClass, ProcessMeasure};
use common::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const CAP: u64 = 1 << 22;

fn lr(mu: &dyn ProcessMeasure, rho: &dyn ProcessMeasure, x: &[u8]) -> f64 {
    log_prob(mu, x).unwrap().value() - log_prob(rho, x).unwrap().value()
}

/// Cells by direct scoring: cell 1 starts at −log₂n/n, cell i ends at i/k,
/// cell k ends at 1 + 1/n.
fn oracle_cells(
    mu: &dyn ProcessMeasure,
    rho: &dyn ProcessMeasure,
    n: usize,
    k: usize,
) -> Vec<BTreeSet<u32>> {
    let al = Alphabet::BINARY;
    let mut cells = vec![BTreeSet::new(); k];
    for x in all_sequences(2, n) {
        let r = lr(mu, rho, &x);
        if r < -(n as f64).log2() {
            continue;
        }
        let score = r / n as f64;
        let i = (1..=k).find(|&i| score <= i as f64 / k as f64).unwrap_or(k);
        assert!(score <= 1.0 + 1.0 / n as f64);
        cells[i - 1].insert(al.encode(&x));
    }
    cells
}

/// Greedy with explicit set differences, lowest index wins ties.
fn oracle_greedy(cells: &[BTreeSet<u32>], rho_p: &[f64]) -> Vec<(usize, f64)> {
    let mut covered: BTreeSet<u32> = BTreeSet::new();
    let mut out = Vec::new();
    loop {
        let gains: Vec<f64> = cells
            .iter()
            .map(|c| c.difference(&covered).map(|&x| rho_p[x as usize]).sum())
            .collect();
        let mut best = 0;
        for j in 1..gains.len() {
            if gains[j] > gains[best] {
                best = j;
            }
        }
        if gains[best] <= 0.0 {
            return out;
        }
        covered.extend(cells[best].iter().copied());
        out.push((best, gains[best]));
    }
}

fn codes(al: Alphabet, xs: &[&[u8]]) -> Vec<u32> {
    let mut v: Vec<u32> = xs.iter().map(|x| al.encode(x)).collect();
    v.sort_unstable();
    v
}

#[test]
fn likelihood_set_examples() {
    let b = Alphabet::BINARY;
    let all = likelihood_set(bern(0.3).as_ref(), bern(0.3).as_ref(), 5, CAP).unwrap();
    assert_eq!(all.len(), 32);
    let one = likelihood_set(dirac(0).as_ref(), uniform(2).as_ref(), 3, CAP).unwrap();
    assert_eq!(one.codes, codes(b, &[&[0, 0, 0]]));
    let t = likelihood_set(bern(0.75).as_ref(), bern(0.25).as_ref(), 2, CAP).unwrap();
    assert_eq!(t.codes, codes(b, &[&[0, 1], &[1, 0], &[1, 1]]));
    let mass: f64 = t
        .sequences()
        .iter()
        .map(|x| log_prob(bern(0.75).as_ref(), x).unwrap().prob())
        .sum();
    assert!((mass - 15.0 / 16.0).abs() < 1e-15);
}

#[test]
fn partition_examples() {
    let p = level_partition(bern(0.3).as_ref(), bern(0.3).as_ref(), 6, 3, CAP).unwrap();
    assert_eq!(p.cells[0].codes.len(), 64);
    let d = level_partition(dirac(0).as_ref(), uniform(2).as_ref(), 4, 2, CAP).unwrap();
    assert!(d.cells[0].codes.is_empty());
    assert_eq!(d.cells[1].codes, vec![0]);
}

#[test]
fn unbounded_reference_is_a_contract_violation() {
    // 111111 scores log₂3 > 1 + 1/6 against Bern(¼)
    let err = level_partition(bern(0.75).as_ref(), bern(0.25).as_ref(), 6, 3, CAP).unwrap_err();
    assert!(matches!(err, Error::Contract(_)), "{err}");
}

#[test]
fn bernoulli_cells_match_count_classes() {
    let mu = bern(0.75);
    let rho = smooth(bern(0.25));
    let p = level_partition(mu.as_ref(), rho.as_ref(), 6, 3, CAP).unwrap();
    let oracle = oracle_cells(mu.as_ref(), rho.as_ref(), 6, 3);
    for i in 0..3 {
        let got: BTreeSet<u32> = p.cells[i].codes.iter().copied().collect();
        assert_eq!(got, oracle[i], "cell {}", i + 1);
    }
    let sizes: Vec<usize> = p.cells.iter().map(|c| c.codes.len()).collect();
    assert_eq!(sizes, vec![35, 6, 1]);
}

fn random_binary(rng: &mut ChaCha8Rng) -> Measure {
    match rng.gen_range(0..3) {
        0 => bern(rng.gen_range(0.05..0.95)),
        1 => {
            let (a, b, c) = (
                rng.gen_range(0.05..0.95),
                rng.gen_range(0.05..0.95),
                rng.gen_range(0.05..0.95),
            );
            Arc::new(
                bayesmix_core::MarkovChain::new(
                    vec![1.0 - a, a],
                    vec![vec![1.0 - b, b], vec![1.0 - c, c]],
                )
                .unwrap(),
            )
        }
        _ => {
            let cycle: Vec<u8> = (0..rng.gen_range(1..4))
                .map(|_| rng.gen_range(0..2))
                .collect();
            Arc::new(bayesmix_core::Dirac::new(Alphabet::BINARY, vec![], cycle).unwrap())
        }
    }
}

#[test]
fn partition_properties_exhaustive() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for trial in 0..50 {
        let mu = random_binary(&mut rng);
        let rho = smooth(random_binary(&mut rng));
        let n = 2 + trial % 11;
        let k = [1, 2, 3, 4][trial % 4];
        let p = level_partition(mu.as_ref(), rho.as_ref(), n, k, CAP).unwrap();
        assert!(p.violations().is_empty(), "{:?}", p.violations());
        assert!(p.outside_mass <= 1.0 / n as f64 + 1e-12);
        let mut union: Vec<u32> = p
            .cells
            .iter()
            .flat_map(|c| c.codes.iter().copied())
            .collect();
        union.sort_unstable();
        let len = union.len();
        union.dedup();
        assert_eq!(len, union.len());
        assert_eq!(union, p.likelihood);
        let params = LevelParams::new(n, k, Alphabet::BINARY).unwrap();
        for c in &p.cells {
            for &r in &c.log_ratio {
                assert!(params.cops1_holds(c.i, r) && params.cops2_holds(c.i, r));
            }
        }
        if n <= 10 {
            let oracle = oracle_cells(mu.as_ref(), rho.as_ref(), n, k);
            for c in &p.cells {
                assert_eq!(
                    c.codes.iter().copied().collect::<BTreeSet<_>>(),
                    oracle[c.i - 1]
                );
            }
        }
    }
}

#[test]
fn greedy_single_member() {
    let g = greedy_cover(&[bern(0.6)], uniform(2).as_ref(), 5, 2, 1, CAP).unwrap();
    assert_eq!(g.picks(), vec![0]);
    assert_eq!(g.terminated_at, 2);
    assert_eq!(g.mass_at(2), 0.0);
}

#[test]
fn greedy_two_dirac_tie() {
    let g = greedy_cover(&[dirac(0), dirac(1)], uniform(2).as_ref(), 3, 1, 1, CAP).unwrap();
    assert_eq!(g.picks(), vec![0, 1]);
    assert_eq!(g.steps[0].mass, 0.125);
    assert_eq!(g.steps[1].mass, 0.125);
    assert_eq!(g.terminated_at, 3);
}

#[test]
fn greedy_matches_set_oracle() {
    for seed in 0..6u64 {
        let class = seeded(SeededFamily::Markov, 8, seed)
            .unwrap()
            .build()
            .unwrap();
        let rho = uniform(2);
        for (n, k) in [(6, 2), (5, 3), (4, 1)] {
            let rho_p: Vec<f64> = log_prob_table(rho.as_ref(), n, CAP)
                .unwrap()
                .iter()
                .map(|l| l.exp2())
                .collect();
            let cells: Vec<Vec<BTreeSet<u32>>> = class
                .iter()
                .map(|m| oracle_cells(m.as_ref(), rho.as_ref(), n, k))
                .collect();
            for i in 1..=k {
                let cell_i: Vec<BTreeSet<u32>> = cells.iter().map(|c| c[i - 1].clone()).collect();
                let want = oracle_greedy(&cell_i, &rho_p);
                let got = greedy_cover(&class, rho.as_ref(), n, k, i, CAP).unwrap();
                assert_eq!(got.picks(), want.iter().map(|w| w.0).collect::<Vec<_>>());
                for (s, w) in got.steps.iter().zip(&want) {
                    assert!((s.mass - w.1).abs() < 1e-12);
                }
                let slices: Vec<Vec<u32>> =
                    cell_i.iter().map(|c| c.iter().copied().collect()).collect();
                let refs: Vec<&[u32]> = slices.iter().map(|v| v.as_slice()).collect();
                assert!(got.violations(&refs, &rho_p).is_empty());
            }
        }
    }
}

#[test]
fn assemble_single_member() {
    let mu = bern(0.3);
    let ex = assemble(std::slice::from_ref(&mu), uniform(2).as_ref(), &[(4, 2), (6, 1)], CAP).unwrap();
    assert_eq!(ex.weights, vec![(0, 1.0)]);
    let nu = ex.mixture().unwrap();
    for x in all_sequences(2, 6) {
        let a = log_prob(&nu, &x).unwrap().value();
        let b = log_prob(mu.as_ref(), &x).unwrap().value();
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn assemble_dirac_weight_ratio() {
    let ex = assemble(&[dirac(0), dirac(1)], uniform(2).as_ref(), &[(3, 1)], CAP).unwrap();
    let ratio = ex.weight_of(0) / ex.weight_of(1);
    let want = 3.0 * 3f64.log2().powi(2) / 2.0;
    assert!((ratio - want).abs() < 1e-12, "{ratio} vs {want}");
}

#[test]
fn assemble_sums_duplicates() {
    let class = vec![bern(0.2), bern(0.2), bern(0.8)];
    let ex = assemble(&class, uniform(2).as_ref(), &[(4, 2)], CAP).unwrap();
    let total: f64 = ex.weights.iter().map(|w| w.1).sum();
    assert!((total - 1.0).abs() < 1e-12);
    assert!(ex.weights.iter().all(|w| w.1 > 0.0));
    let mut ids: Vec<usize> = ex.weights.iter().map(|w| w.0).collect();
    ids.dedup();
    assert_eq!(ids.len(), ex.weights.len());
}

#[test]
fn extracted_document_round_trips() {
    let class = seeded(SeededFamily::Mixed, 5, 3).unwrap().build().unwrap();
    let ex = assemble(&class, uniform(2).as_ref(), &[(5, 2), (6, 4)], CAP).unwrap();
    let doc = ex.to_document(Some("nu".into())).unwrap();
    let back = ModelClass::from_toml_str(&doc.to_toml_string().unwrap()).unwrap();
    assert_eq!(doc, back);
    let rebuilt = back.build().unwrap().remove(0);
    let direct = ex.to_measure().unwrap();
    let a = log_prob_table(rebuilt.as_ref(), 7, CAP).unwrap();
    let b = log_prob_table(direct.as_ref(), 7, CAP).unwrap();
    for (x, y) in a.iter().zip(&b) {
        assert!((x - y).abs() < 1e-12);
    }
}

#[test]
fn audit_single_member() {
    let mu = bern(0.3);
    let rho = smooth(mu.clone());
    let (n, k) = (6, 2);
    let ex = assemble(std::slice::from_ref(&mu), rho.as_ref(), &[(n, k)], CAP).unwrap();
    let params = LevelParams::new(n, k, Alphabet::BINARY).unwrap();
    let r = dominance_audit(
        &[mu],
        rho.as_ref(),
        &ex,
        n,
        k,
        SlackParams::new(1.0, &params).unwrap(),
        CAP,
    )
    .unwrap();
    assert!(r.passed(), "{:?}", r.violations);
    for row in &r.rows {
        assert!(row.exceptional_mass <= 1.0 / n as f64);
    }
}

#[test]
fn audit_two_dirac() {
    let (n, k) = (8, 2);
    let class = vec![dirac(0), dirac(1)];
    let rho = uniform(2);
    let ex = assemble(&class, rho.as_ref(), &[(n, k)], CAP).unwrap();
    let params = LevelParams::new(n, k, Alphabet::BINARY).unwrap();
    let r = dominance_audit(
        &class,
        rho.as_ref(),
        &ex,
        n,
        k,
        SlackParams::new(1.0, &params).unwrap(),
        CAP,
    )
    .unwrap();
    assert!(r.passed(), "{:?}", r.violations);
    assert!(r.rows.iter().all(|row| row.exceptional_mass == 0.0));
    // both Diracs sit in cell 2; step weights w(1):w(2) then smoothing
    let want = [1.332_458_961_412_411_6, 3.226_808_491_992_642_7];
    for (h, w) in r.headline.iter().zip(want) {
        assert_eq!(h.dn_rho_bits, 8.0);
        assert!((h.dn_nu_bits - w).abs() < 1e-9, "{}", h.dn_nu_bits);
    }
    assert!(r.to_csv().unwrap().starts_with(
        "mu_id,cell_i,covered_mass,exceptional_mass,bound_rhs_bits,max_violation_bits\n"
    ));
}

#[test]
fn audit_sixteen_bernoulli() {
    let (n, k) = (10, 4);
    let class = seeded(SeededFamily::Bernoulli, 16, 7)
        .unwrap()
        .build()
        .unwrap();
    let rho = bern(0.5);
    let ex = assemble(&class, rho.as_ref(), &[(n, k)], CAP).unwrap();
    let params = LevelParams::new(n, k, Alphabet::BINARY).unwrap();
    let r = dominance_audit(
        &class,
        rho.as_ref(),
        &ex,
        n,
        k,
        SlackParams::new(0.5, &params).unwrap(),
        CAP,
    )
    .unwrap();
    assert!(r.passed(), "{:?}", r.violations);
    assert_eq!(r.rows.len(), 16 * k);
    assert!(r.max_dn_nu() <= r.headline_bound);
}

#[test]
fn audit_rejects_foreign_extraction() {
    let class = vec![dirac(0), dirac(1)];
    let ex = assemble(&class, uniform(2).as_ref(), &[(6, 2)], CAP).unwrap();
    let params = LevelParams::new(8, 2, Alphabet::BINARY).unwrap();
    let slack = SlackParams::new(1.0, &params).unwrap();
    assert!(dominance_audit(&class, uniform(2).as_ref(), &ex, 8, 2, slack, CAP).is_err());
    let other = vec![dirac(0), bern(0.5)];
    let params = LevelParams::new(6, 2, Alphabet::BINARY).unwrap();
    let slack = SlackParams::new(1.0, &params).unwrap();
    assert!(dominance_audit(&other, uniform(2).as_ref(), &ex, 6, 2, slack, CAP).is_err());
}

#[test]
fn slack_requires_margin_above_cell_width() {
    let p = LevelParams::new(10, 2, Alphabet::BINARY).unwrap();
    assert!(SlackParams::new(0.5, &p).is_err());
    assert!(SlackParams::new(0.51, &p).is_ok());
    let s = SlackParams::new(1.0, &p).unwrap();
    assert_eq!(
        s.l_star(&p, 1),
        ((0.5 + 1.0) * 10.0 + 1.0_f64).exp2() as u64
    );
}
