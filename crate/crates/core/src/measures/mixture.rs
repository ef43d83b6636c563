use std::sync::Arc;

use super::{log_prob, Alphabet, Iid, Measure, Member, ModelSpec, ProcessMeasure, Stepper, Symbol};
use crate::error::{Error, Result};
use crate::logprob::log2_sum_exp;

/// A finite Bayesian mixture `Σ_k w_k μ_k`.
///
/// Weights are normalized explicitly at construction. The conditional at each
/// step is the posterior-weighted average of the component conditionals, so
/// sequence probabilities equal `Σ_k w_k μ_k(x)`.
#[derive(Clone, Debug)]
pub struct FiniteMixture {
    alphabet: Alphabet,
    weights: Vec<f64>,
    components: Vec<Measure>,
}

impl FiniteMixture {
    pub fn new(components: Vec<(f64, Measure)>) -> Result<Self> {
        let Some(first) = components.first() else {
            return Err(Error::EmptyClass);
        };
        let alphabet = first.1.alphabet();
        for (w, m) in &components {
            if !(w.is_finite() && *w > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "mixture weight {w} for {} must be positive and finite",
                    m.tag()
                )));
            }
            if m.alphabet() != alphabet {
                return Err(Error::AlphabetMismatch {
                    expected: alphabet.size(),
                    found: m.alphabet().size(),
                });
            }
        }
        let total: f64 = components.iter().map(|(w, _)| w).sum();
        let (weights, components) = components.into_iter().map(|(w, m)| (w / total, m)).unzip();
        Ok(FiniteMixture {
            alphabet,
            weights,
            components,
        })
    }

    /// Equal weights over `components`.
    pub fn uniform_over(components: Vec<Measure>) -> Result<Self> {
        FiniteMixture::new(components.into_iter().map(|m| (1.0, m)).collect())
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn components(&self) -> &[Measure] {
        &self.components
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn into_measure(self) -> Measure {
        Arc::new(self)
    }
}

/// Posterior over mixture components after observing `prefix`.
pub fn posterior_weights(mix: &FiniteMixture, prefix: &[Symbol]) -> Result<Vec<f64>> {
    let mut log_post = Vec::with_capacity(mix.len());
    for (w, m) in mix.weights.iter().zip(&mix.components) {
        log_post.push(w.log2() + log_prob(m.as_ref(), prefix)?.value());
    }
    let z = log2_sum_exp(&log_post);
    if z == f64::NEG_INFINITY {
        return Err(Error::DegenerateConditioning);
    }
    Ok(log_post.iter().map(|&l| (l - z).exp2()).collect())
}

/// `½ m + ½ p` with `p` the uniform i.i.d. measure, so that
/// `-log₂ ν(x_{1..n}) ≤ n·log₂A + 1` for every `x`.
pub fn mix_with_uniform(m: Measure) -> FiniteMixture {
    let uniform: Measure = Arc::new(Iid::uniform(m.alphabet()));
    FiniteMixture::new(vec![(0.5, m), (0.5, uniform)])
        .expect("two positive weights on one alphabet")
}

struct MixtureStepper<'a> {
    alphabet: Alphabet,
    steppers: Vec<Box<dyn Stepper + 'a>>,
    conds: Vec<Vec<f64>>,
    log_post: Vec<f64>,
}

impl Stepper for MixtureStepper<'_> {
    fn cond(&self) -> Vec<f64> {
        let max = self
            .log_post
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        if max == f64::NEG_INFINITY {
            return self.alphabet.uniform();
        }
        let mut out = vec![0.0; self.alphabet.size()];
        let mut z = 0.0;
        for (lp, c) in self.log_post.iter().zip(&self.conds) {
            if *lp == f64::NEG_INFINITY {
                continue;
            }
            let p = (lp - max).exp2();
            z += p;
            for (o, ci) in out.iter_mut().zip(c) {
                *o += p * ci;
            }
        }
        out.iter_mut().for_each(|o| *o /= z);
        out
    }

    fn advance(&mut self, symbol: Symbol) {
        for k in 0..self.steppers.len() {
            let p = self.conds[k][symbol as usize];
            if self.log_post[k] > f64::NEG_INFINITY {
                self.log_post[k] += if p > 0.0 { p.log2() } else { f64::NEG_INFINITY };
            }
            self.steppers[k].advance(symbol);
            if self.log_post[k] > f64::NEG_INFINITY {
                self.conds[k] = self.steppers[k].cond();
            }
        }
    }

    fn box_clone(&self) -> Box<dyn Stepper + '_> {
        Box::new(MixtureStepper {
            alphabet: self.alphabet,
            steppers: self.steppers.iter().map(|s| s.box_clone()).collect(),
            conds: self.conds.clone(),
            log_post: self.log_post.clone(),
        })
    }
}

impl ProcessMeasure for FiniteMixture {
    fn alphabet(&self) -> Alphabet {
        self.alphabet
    }

    fn tag(&self) -> String {
        if self.len() == 2
            && self.weights == [0.5, 0.5]
            && self.components[1].tag().starts_with("uniform(")
        {
            return format!("smooth({})", self.components[0].tag());
        }
        let parts: Vec<String> = self
            .weights
            .iter()
            .zip(&self.components)
            .map(|(w, m)| format!("{w:.4}*{}", m.tag()))
            .collect();
        format!("mix[{}]", parts.join(" + "))
    }

    fn stepper(&self) -> Box<dyn Stepper + '_> {
        let steppers: Vec<_> = self.components.iter().map(|m| m.stepper()).collect();
        let conds = steppers.iter().map(|s| s.cond()).collect();
        Box::new(MixtureStepper {
            alphabet: self.alphabet,
            steppers,
            conds,
            log_post: self.weights.iter().map(|w| w.log2()).collect(),
        })
    }

    fn iid_theta(&self) -> Option<Vec<f64>> {
        // a mixture of identical i.i.d. laws is that law
        let first = self.components[0].iid_theta()?;
        self.components[1..]
            .iter()
            .all(|m| m.iid_theta().as_ref() == Some(&first))
            .then_some(first)
    }

    fn spec(&self) -> Option<ModelSpec> {
        let member = self
            .weights
            .iter()
            .zip(&self.components)
            .map(|(w, m)| {
                Some(Member {
                    id: None,
                    weight: Some(*w),
                    model: m.spec()?,
                })
            })
            .collect::<Option<Vec<_>>>()?;
        Some(ModelSpec::Mixture { member })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::{parse_seq, Dirac};

    fn bern(p: f64) -> Measure {
        Arc::new(Iid::bernoulli(p).unwrap())
    }

    fn dirac(s: Symbol) -> Measure {
        Arc::new(Dirac::constant(Alphabet::BINARY, s).unwrap())
    }

    #[test]
    fn posterior_examples() {
        let mix = FiniteMixture::new(vec![(0.5, dirac(0)), (0.5, dirac(1))]).unwrap();
        assert_eq!(posterior_weights(&mix, &[]).unwrap(), vec![0.5, 0.5]);
        assert_eq!(posterior_weights(&mix, &[1]).unwrap(), vec![0.0, 1.0]);
        let err = posterior_weights(&mix, &[0, 1]).unwrap_err();
        assert!(matches!(err, Error::DegenerateConditioning));

        let mix = FiniteMixture::new(vec![(0.5, bern(0.25)), (0.5, bern(0.75))]).unwrap();
        let post = posterior_weights(&mix, &[1]).unwrap();
        assert!((post[0] - 0.25).abs() < 1e-15 && (post[1] - 0.75).abs() < 1e-15);
    }

    #[test]
    fn weights_are_normalized() {
        let mix = FiniteMixture::new(vec![(2.0, bern(0.1)), (6.0, bern(0.9))]).unwrap();
        assert_eq!(mix.weights(), &[0.25, 0.75]);
        assert!(FiniteMixture::new(vec![]).is_err());
        assert!(FiniteMixture::new(vec![(0.0, bern(0.1))]).is_err());
        let tri: Measure = Arc::new(Iid::uniform(Alphabet::new(3).unwrap()));
        assert!(FiniteMixture::new(vec![(1.0, bern(0.1)), (1.0, tri)]).is_err());
    }

    #[test]
    fn mixture_probability_is_weighted_sum() {
        let mix = FiniteMixture::new(vec![(0.3, bern(0.2)), (0.7, bern(0.9))]).unwrap();
        let x = parse_seq("1101").unwrap();
        let direct = 0.3 * 0.2f64.powi(3) * 0.8 + 0.7 * 0.9f64.powi(3) * 0.1;
        assert!((log_prob(&mix, &x).unwrap().value() - direct.log2()).abs() < 1e-12);
    }

    #[test]
    fn smoothing_examples() {
        let smoothed = mix_with_uniform(dirac(0));
        let x = parse_seq("111").unwrap();
        let lp = log_prob(&smoothed, &x).unwrap().value();
        assert_eq!(lp, -4.0);
        assert_eq!(-lp, 3.0 * 1.0 + 1.0);

        let on_u = mix_with_uniform(Arc::new(Iid::uniform(Alphabet::BINARY)));
        assert!((log_prob(&on_u, &x).unwrap().value() + 3.0).abs() < 1e-15);

        let b = mix_with_uniform(bern(0.75));
        assert!((log_prob(&b, &[1]).unwrap().prob() - 0.625).abs() < 1e-15);
    }

    #[test]
    fn zero_mass_prefix_conditions_uniformly() {
        let mix = FiniteMixture::new(vec![(0.5, dirac(0)), (0.5, dirac(0))]).unwrap();
        assert_eq!(mix.cond_dist(&[1]), vec![0.5, 0.5]);
    }
}
