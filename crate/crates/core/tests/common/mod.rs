#![allow(dead_code)]

use std::sync::Arc;

use bayesmix_core::families::SwitchingKt;
use bayesmix_core::fixtures::{seeded, SeededFamily};
use bayesmix_core::measures::Stepper;
use bayesmix_core::{
    mix_with_uniform, Alphabet, Dirac, FiniteMixture, Iid, Kt, MarkovChain, Measure, ProcessMeasure,
};

pub fn bern(p: f64) -> Measure {
    Arc::new(Iid::bernoulli(p).unwrap())
}

pub fn uniform(a: usize) -> Measure {
    Arc::new(Iid::uniform(Alphabet::new(a).unwrap()))
}

pub fn dirac(s: u8) -> Measure {
    Arc::new(Dirac::constant(Alphabet::BINARY, s).unwrap())
}

pub fn kt(a: usize) -> Measure {
    Arc::new(Kt::new(Alphabet::new(a).unwrap()))
}

pub fn smooth(m: Measure) -> Measure {
    Arc::new(mix_with_uniform(m))
}

/// One measure of every family over an alphabet of size 2 or 3.
pub fn zoo(a: usize) -> Vec<Measure> {
    let al = Alphabet::new(a).unwrap();
    let theta: Vec<f64> = if a == 2 {
        vec![0.3, 0.7]
    } else {
        vec![0.2, 0.5, 0.3]
    };
    let (initial, transition) = if a == 2 {
        (vec![0.6, 0.4], vec![vec![0.9, 0.1], vec![0.25, 0.75]])
    } else {
        (
            vec![0.2, 0.3, 0.5],
            vec![
                vec![0.1, 0.6, 0.3],
                vec![0.5, 0.5, 0.0],
                vec![0.3, 0.3, 0.4],
            ],
        )
    };
    let iid: Measure = Arc::new(Iid::new(theta).unwrap());
    let markov: Measure = Arc::new(MarkovChain::new(initial, transition).unwrap());
    let dirac: Measure = Arc::new(Dirac::new(al, vec![1], vec![0, (a - 1) as u8]).unwrap());
    let mix: Measure = Arc::new(
        FiniteMixture::new(vec![
            (0.3, iid.clone()),
            (0.5, markov.clone()),
            (0.2, dirac.clone()),
        ])
        .unwrap(),
    );
    vec![
        iid,
        markov,
        dirac.clone(),
        kt(a),
        uniform(a),
        mix,
        smooth(dirac),
        Arc::new(SwitchingKt::new(al, 0.05).unwrap()),
    ]
}

/// Calls `visit(prefix, stepper)` on every prefix up to `depth`.
pub fn walk_prefixes(
    m: &dyn ProcessMeasure,
    depth: usize,
    visit: &mut dyn FnMut(&[u8], &dyn Stepper),
) {
    fn go(
        s: &dyn Stepper,
        a: usize,
        depth: usize,
        prefix: &mut Vec<u8>,
        visit: &mut dyn FnMut(&[u8], &dyn Stepper),
    ) {
        visit(prefix, s);
        if prefix.len() == depth {
            return;
        }
        for sym in 0..a as u8 {
            let mut next = s.box_clone();
            next.advance(sym);
            prefix.push(sym);
            go(next.as_ref(), a, depth, prefix, visit);
            prefix.pop();
        }
    }
    let s = m.stepper();
    go(
        s.as_ref(),
        m.alphabet().size(),
        depth,
        &mut Vec::new(),
        visit,
    );
}

/// Ten seeded binary classes mixing Bernoulli, Markov and Dirac members.
pub fn seeded_classes() -> Vec<Vec<Measure>> {
    (0..10u64)
        .map(|seed| {
            let family = match seed % 3 {
                0 => SeededFamily::Mixed,
                1 => SeededFamily::Bernoulli,
                _ => SeededFamily::Markov,
            };
            seeded(family, 3 + (seed as usize % 4), seed)
                .unwrap()
                .build()
                .unwrap()
        })
        .collect()
}

pub fn all_sequences(a: usize, n: usize) -> Vec<Vec<u8>> {
    let al = Alphabet::new(a).unwrap();
    (0..al.count(n) as u32).map(|c| al.decode(c, n)).collect()
}
