use super::{validate_dist, Alphabet, ModelSpec, ProcessMeasure, Stepper, Symbol};
use crate::error::{Error, Result};

/// Point mass on one eventually periodic sequence `prefix · cycle^∞`.
#[derive(Clone, Debug, PartialEq)]
pub struct Dirac {
    alphabet: Alphabet,
    prefix: Vec<Symbol>,
    cycle: Vec<Symbol>,
}

impl Dirac {
    pub fn new(alphabet: Alphabet, prefix: Vec<Symbol>, cycle: Vec<Symbol>) -> Result<Self> {
        if cycle.is_empty() {
            return Err(Error::InvalidParameter(
                "dirac cycle must be non-empty".into(),
            ));
        }
        alphabet.check(&prefix)?;
        alphabet.check(&cycle)?;
        Ok(Dirac {
            alphabet,
            prefix,
            cycle,
        })
    }

    /// The constant sequence `s s s …`.
    pub fn constant(alphabet: Alphabet, s: Symbol) -> Result<Self> {
        Dirac::new(alphabet, Vec::new(), vec![s])
    }

    pub fn symbol_at(&self, t: usize) -> Symbol {
        if t < self.prefix.len() {
            self.prefix[t]
        } else {
            self.cycle[(t - self.prefix.len()) % self.cycle.len()]
        }
    }

    pub fn path(&self, n: usize) -> Vec<Symbol> {
        (0..n).map(|t| self.symbol_at(t)).collect()
    }
}

fn digits(x: &[Symbol]) -> String {
    x.iter()
        .map(|&s| std::char::from_digit(s as u32, 36).unwrap_or('?'))
        .collect()
}

struct DiracStepper<'a> {
    dirac: &'a Dirac,
    t: usize,
    on_path: bool,
}

impl Stepper for DiracStepper<'_> {
    fn cond(&self) -> Vec<f64> {
        if !self.on_path {
            return self.dirac.alphabet.uniform();
        }
        let mut p = vec![0.0; self.dirac.alphabet.size()];
        p[self.dirac.symbol_at(self.t) as usize] = 1.0;
        p
    }

    fn advance(&mut self, symbol: Symbol) {
        if self.on_path && symbol != self.dirac.symbol_at(self.t) {
            self.on_path = false;
        }
        self.t += 1;
    }

    fn box_clone(&self) -> Box<dyn Stepper + '_> {
        Box::new(DiracStepper { ..*self })
    }
}

impl ProcessMeasure for Dirac {
    fn alphabet(&self) -> Alphabet {
        self.alphabet
    }

    fn tag(&self) -> String {
        if self.prefix.is_empty() {
            format!("dirac({})", digits(&self.cycle))
        } else {
            format!("dirac({}|{})", digits(&self.prefix), digits(&self.cycle))
        }
    }

    fn stepper(&self) -> Box<dyn Stepper + '_> {
        Box::new(DiracStepper {
            dirac: self,
            t: 0,
            on_path: true,
        })
    }

    fn spec(&self) -> Option<ModelSpec> {
        Some(ModelSpec::Dirac {
            prefix: self.prefix.clone(),
            cycle: self.cycle.clone(),
        })
    }
}

/// I.i.d. categorical measure.
#[derive(Clone, Debug, PartialEq)]
pub struct Iid {
    alphabet: Alphabet,
    theta: Vec<f64>,
}

impl Iid {
    pub fn new(theta: Vec<f64>) -> Result<Self> {
        let alphabet = Alphabet::new(theta.len())?;
        validate_dist(&theta, alphabet.size(), "iid theta")?;
        Ok(Iid { alphabet, theta })
    }

    /// Binary i.i.d. with `P(1) = p`.
    pub fn bernoulli(p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidParameter(format!(
                "bernoulli parameter {p} outside [0, 1]"
            )));
        }
        Iid::new(vec![1.0 - p, p])
    }

    pub fn uniform(alphabet: Alphabet) -> Self {
        Iid {
            alphabet,
            theta: alphabet.uniform(),
        }
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    fn is_uniform(&self) -> bool {
        let u = 1.0 / self.alphabet.size() as f64;
        self.theta.iter().all(|&t| t == u)
    }
}

struct IidStepper<'a>(&'a Iid);

impl Stepper for IidStepper<'_> {
    fn cond(&self) -> Vec<f64> {
        self.0.theta.clone()
    }
    fn advance(&mut self, _symbol: Symbol) {}
    fn box_clone(&self) -> Box<dyn Stepper + '_> {
        Box::new(IidStepper(self.0))
    }
}

impl ProcessMeasure for Iid {
    fn alphabet(&self) -> Alphabet {
        self.alphabet
    }

    fn tag(&self) -> String {
        if self.is_uniform() {
            format!("uniform({})", self.alphabet)
        } else if self.alphabet == Alphabet::BINARY {
            format!("bern({})", self.theta[1])
        } else {
            format!("iid({:?})", self.theta)
        }
    }

    fn stepper(&self) -> Box<dyn Stepper + '_> {
        Box::new(IidStepper(self))
    }

    fn iid_theta(&self) -> Option<Vec<f64>> {
        Some(self.theta.clone())
    }

    fn cond_from_counts(&self, _counts: &[u64]) -> Option<Vec<f64>> {
        Some(self.theta.clone())
    }

    fn spec(&self) -> Option<ModelSpec> {
        Some(if self.is_uniform() {
            ModelSpec::Uniform {}
        } else if self.alphabet == Alphabet::BINARY {
            ModelSpec::Bernoulli { p: self.theta[1] }
        } else {
            ModelSpec::Iid {
                theta: self.theta.clone(),
            }
        })
    }
}

/// First-order Markov chain over the alphabet.
#[derive(Clone, Debug, PartialEq)]
pub struct MarkovChain {
    alphabet: Alphabet,
    initial: Vec<f64>,
    transition: Vec<Vec<f64>>,
}

impl MarkovChain {
    pub fn new(initial: Vec<f64>, transition: Vec<Vec<f64>>) -> Result<Self> {
        let alphabet = Alphabet::new(initial.len())?;
        validate_dist(&initial, alphabet.size(), "markov initial distribution")?;
        if transition.len() != alphabet.size() {
            return Err(Error::InvalidParameter(format!(
                "markov transition needs {} rows, found {}",
                alphabet.size(),
                transition.len()
            )));
        }
        for row in &transition {
            validate_dist(row, alphabet.size(), "markov transition row")?;
        }
        Ok(MarkovChain {
            alphabet,
            initial,
            transition,
        })
    }
}

struct MarkovStepper<'a> {
    chain: &'a MarkovChain,
    last: Option<Symbol>,
}

impl Stepper for MarkovStepper<'_> {
    fn cond(&self) -> Vec<f64> {
        match self.last {
            None => self.chain.initial.clone(),
            Some(s) => self.chain.transition[s as usize].clone(),
        }
    }
    fn advance(&mut self, symbol: Symbol) {
        self.last = Some(symbol);
    }
    fn box_clone(&self) -> Box<dyn Stepper + '_> {
        Box::new(MarkovStepper { ..*self })
    }
}

impl ProcessMeasure for MarkovChain {
    fn alphabet(&self) -> Alphabet {
        self.alphabet
    }

    fn tag(&self) -> String {
        let rows: Vec<String> = self
            .transition
            .iter()
            .map(|r| {
                r.iter()
                    .map(|p| format!("{p:.3}"))
                    .collect::<Vec<_>>()
                    .join(",")
            })
            .collect();
        format!("markov[{}]", rows.join(";"))
    }

    fn stepper(&self) -> Box<dyn Stepper + '_> {
        Box::new(MarkovStepper {
            chain: self,
            last: None,
        })
    }

    fn spec(&self) -> Option<ModelSpec> {
        Some(ModelSpec::Markov {
            initial: self.initial.clone(),
            transition: self.transition.clone(),
        })
    }
}

/// Krichevsky–Trofimov (add-½) estimator: the next symbol `a` after `t`
/// observations has probability `(count_a + ½) / (t + A/2)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Kt {
    alphabet: Alphabet,
}

impl Kt {
    pub fn new(alphabet: Alphabet) -> Self {
        Kt { alphabet }
    }
}

pub(crate) fn kt_cond(counts: &[u64]) -> Vec<f64> {
    let total: u64 = counts.iter().sum();
    let denom = total as f64 + counts.len() as f64 / 2.0;
    counts.iter().map(|&c| (c as f64 + 0.5) / denom).collect()
}

#[derive(Clone)]
struct KtStepper {
    counts: Vec<u64>,
}

impl Stepper for KtStepper {
    fn cond(&self) -> Vec<f64> {
        kt_cond(&self.counts)
    }
    fn advance(&mut self, symbol: Symbol) {
        self.counts[symbol as usize] += 1;
    }
    fn box_clone(&self) -> Box<dyn Stepper + '_> {
        Box::new(self.clone())
    }
}

impl ProcessMeasure for Kt {
    fn alphabet(&self) -> Alphabet {
        self.alphabet
    }

    fn tag(&self) -> String {
        "kt".to_string()
    }

    fn stepper(&self) -> Box<dyn Stepper + '_> {
        Box::new(KtStepper {
            counts: vec![0; self.alphabet.size()],
        })
    }

    fn cond_from_counts(&self, counts: &[u64]) -> Option<Vec<f64>> {
        Some(kt_cond(counts))
    }

    fn spec(&self) -> Option<ModelSpec> {
        Some(ModelSpec::Kt {})
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::{log_prob, parse_seq};

    fn lp(m: &dyn ProcessMeasure, s: &str) -> f64 {
        log_prob(m, &parse_seq(s).unwrap()).unwrap().value()
    }

    #[test]
    fn uniform_binary_costs_one_bit_per_symbol() {
        let u = Iid::uniform(Alphabet::BINARY);
        assert_eq!(lp(&u, "010"), -3.0);
        assert_eq!(lp(&u, ""), 0.0);
    }

    #[test]
    fn dirac_point_mass() {
        let d = Dirac::constant(Alphabet::BINARY, 0).unwrap();
        assert_eq!(lp(&d, "000"), 0.0);
        assert_eq!(lp(&d, "001"), f64::NEG_INFINITY);
        // off-path conditionals are uniform
        assert_eq!(d.cond_dist(&[1]), vec![0.5, 0.5]);
        assert_eq!(d.cond_dist(&[0, 0]), vec![1.0, 0.0]);
    }

    #[test]
    fn dirac_eventually_periodic() {
        let d = Dirac::new(Alphabet::new(3).unwrap(), vec![2], vec![0, 1]).unwrap();
        assert_eq!(d.path(6), vec![2, 0, 1, 0, 1, 0]);
        assert_eq!(lp(&d, "20101"), 0.0);
        assert!(Dirac::new(Alphabet::BINARY, vec![], vec![]).is_err());
        assert!(Dirac::new(Alphabet::BINARY, vec![3], vec![0]).is_err());
    }

    #[test]
    fn kt_recursion() {
        let kt = Kt::new(Alphabet::BINARY);
        assert_eq!(kt.cond_dist(&[]), vec![0.5, 0.5]);
        // 1/2 · 3/4, recomputed from the add-half rule by hand
        let expected = (0.5f64 * ((1.0 + 0.5) / (1.0 + 1.0))).log2();
        assert!((lp(&kt, "11") - expected).abs() < 1e-12);
        assert!((lp(&kt, "11") - (-1.415037)).abs() < 1e-6);
        let kt3 = Kt::new(Alphabet::new(3).unwrap());
        assert_eq!(kt3.cond_dist(&[]), vec![1.0 / 3.0; 3]);
        assert_eq!(kt3.cond_dist(&[2]), vec![0.2, 0.2, 0.6]);
    }

    #[test]
    fn markov_rows_validated() {
        assert!(MarkovChain::new(vec![0.5, 0.5], vec![vec![0.5, 0.6], vec![1.0, 0.0]]).is_err());
        let m = MarkovChain::new(vec![1.0, 0.0], vec![vec![0.9, 0.1], vec![0.2, 0.8]]).unwrap();
        assert!((lp(&m, "011") - (0.1f64 * 0.8).log2()).abs() < 1e-12);
    }

    #[test]
    fn iid_validation() {
        assert!(Iid::new(vec![0.5, 0.6]).is_err());
        assert!(Iid::bernoulli(1.5).is_err());
        assert!(Iid::new(vec![1.0]).is_err());
        let b = Iid::bernoulli(0.75).unwrap();
        assert!((lp(&b, "10") - (0.75f64 * 0.25).log2()).abs() < 1e-15);
    }
}
