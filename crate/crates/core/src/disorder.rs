//! Single-site disorder laws and their products over finite regions.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::Volume;
use crate::model::{DisorderConfig, Symbol};
use crate::rng;

pub const DEFAULT_ENUMERATION_CAP: f64 = (1u64 << 24) as f64;

const NORMALIZATION_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SingleSiteLaw {
    alphabet: Vec<Symbol>,
    probs: Vec<f64>,
}

impl SingleSiteLaw {
    /// Probabilities must be nonnegative and sum to one within 1e-12; they
    /// are then rescaled to sum to one exactly (up to rounding).
    pub fn new(alphabet: Vec<Symbol>, probs: Vec<f64>) -> Result<Self> {
        if alphabet.is_empty() || alphabet.len() != probs.len() {
            return Err(Error::InvalidParameter(format!(
                "law needs one probability per symbol ({} symbols, {} probabilities)",
                alphabet.len(),
                probs.len()
            )));
        }
        if let Some(p) = probs.iter().find(|p| !(p.is_finite() && **p >= 0.0)) {
            return Err(Error::InvalidParameter(format!("invalid probability {p}")));
        }
        for (i, a) in alphabet.iter().enumerate() {
            if alphabet[..i].contains(a) {
                return Err(Error::InvalidParameter(format!("symbol {a} listed twice")));
            }
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::NotNormalized(sum));
        }
        let probs = probs.iter().map(|p| p / sum).collect();
        Ok(SingleSiteLaw { alphabet, probs })
    }

    /// `nu(+1) = p`, `nu(-1) = 1 - p`.
    pub fn bernoulli_pm(p: f64) -> Result<Self> {
        check_unit(p)?;
        Self::new(vec![Symbol::scalar(-1.0), Symbol::scalar(1.0)], vec![1.0 - p, p])
    }

    /// `nu(0) = p0`, `nu(-1) = nu(+1) = (1 - p0) / 2`.
    pub fn three_valued_symmetric(p0: f64) -> Result<Self> {
        Self::three_valued_symmetric_scaled(p0, 1.0)
    }

    /// Values `{-j, 0, j}` with `nu(0) = p0`.
    pub fn three_valued_symmetric_scaled(p0: f64, j: f64) -> Result<Self> {
        check_unit(p0)?;
        if !(j.is_finite() && j > 0.0) {
            return Err(Error::InvalidParameter(format!("scale must be positive, got {j}")));
        }
        let q = (1.0 - p0) / 2.0;
        Self::new(
            vec![Symbol::scalar(-j), Symbol::scalar(0.0), Symbol::scalar(j)],
            vec![q, p0, q],
        )
    }

    /// Occupation law on `{0, 1}` with `nu(1) = p`.
    pub fn occupation(p: f64) -> Result<Self> {
        check_unit(p)?;
        Self::new(vec![Symbol::scalar(0.0), Symbol::scalar(1.0)], vec![1.0 - p, p])
    }

    pub fn degenerate(symbol: Symbol) -> Self {
        SingleSiteLaw { alphabet: vec![symbol], probs: vec![1.0] }
    }

    /// Law of `dim` i.i.d. draws from a scalar law, as tuples (the site law
    /// of a random-coupling model built from a per-bond law).
    pub fn tuple_product(per_bond: &SingleSiteLaw, dim: usize) -> Result<Self> {
        if per_bond.alphabet.iter().any(|s| s.len() != 1) {
            return Err(Error::InvalidParameter("per-bond law must have scalar symbols".into()));
        }
        let mut entries: Vec<(Vec<f64>, f64)> = vec![(Vec::new(), 1.0)];
        for _ in 0..dim {
            entries = entries
                .into_iter()
                .flat_map(|(prefix, w)| {
                    per_bond.alphabet.iter().zip(&per_bond.probs).map(move |(s, p)| {
                        let mut v = prefix.clone();
                        v.push(s.values()[0]);
                        (v, w * p)
                    })
                })
                .collect();
        }
        let (alphabet, probs) = entries.into_iter().map(|(v, p)| (Symbol::tuple(v), p)).unzip();
        Self::new(alphabet, probs)
    }

    pub fn alphabet(&self) -> &[Symbol] {
        &self.alphabet
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.alphabet.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alphabet.is_empty()
    }

    pub fn index_of(&self, s: &Symbol) -> Option<usize> {
        self.alphabet.iter().position(|a| a == s)
    }

    pub fn prob_of(&self, s: &Symbol) -> Result<f64> {
        self.index_of(s)
            .map(|i| self.probs[i])
            .ok_or_else(|| Error::InvalidSymbol(format!("{s} is not in the law's alphabet")))
    }

    /// Symbols with positive probability.
    pub fn support(&self) -> Vec<Symbol> {
        self.alphabet.iter().zip(&self.probs).filter(|(_, p)| **p > 0.0).map(|(s, _)| s.clone()).collect()
    }

    pub fn sample_index<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        for (i, p) in self.probs.iter().enumerate() {
            acc += p;
            if u < acc {
                return i;
            }
        }
        // rounding left a sliver above the last cumulative sum
        self.probs.iter().rposition(|p| *p > 0.0).unwrap_or(0)
    }
}

fn check_unit(p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("probability {p} outside [0, 1]")))
    }
}

/// Parses a probability written as a decimal or as a rational `p/q`.
pub fn parse_probability(text: &str) -> Result<f64> {
    let t = text.trim();
    let bad = || Error::InvalidParameter(format!("cannot read probability `{t}`"));
    let v = match t.split_once('/') {
        Some((num, den)) => {
            let num: f64 = num.trim().parse().map_err(|_| bad())?;
            let den: f64 = den.trim().parse().map_err(|_| bad())?;
            if den == 0.0 {
                return Err(bad());
            }
            num / den
        }
        None => t.parse().map_err(|_| bad())?,
    };
    check_unit(v)?;
    Ok(v)
}

/// The product law over a finite region.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProductLaw {
    region: Volume,
    law: SingleSiteLaw,
}

impl ProductLaw {
    pub fn new(region: Volume, law: SingleSiteLaw) -> Self {
        ProductLaw { region, law }
    }

    pub fn region(&self) -> &Volume {
        &self.region
    }

    pub fn law(&self) -> &SingleSiteLaw {
        &self.law
    }

    /// `prod_x nu(eta_x)` over the region.
    pub fn weight(&self, eta: &DisorderConfig) -> Result<f64> {
        self.region.iter().try_fold(1.0, |acc, x| Ok(acc * self.law.prob_of(eta.require(x)?)?))
    }

    pub fn count(&self) -> f64 {
        (self.law.len() as f64).powi(self.region.len() as i32)
    }

    /// All configurations with their weights, last site varying fastest.
    pub fn enumerate(&self, cap: f64) -> Result<DisorderEnumeration<'_>> {
        let count = self.count();
        if count > cap {
            return Err(Error::Infeasible {
                what: "disorder enumeration",
                count,
                cap,
                advice: "sample the disorder instead",
            });
        }
        Ok(DisorderEnumeration { law: self, digits: Some(vec![0; self.region.len()]) })
    }

    pub fn sample_one(&self, seed: u64, index: u64) -> DisorderConfig {
        let mut rng = rng::stream(seed, index);
        let values = self.region.iter().map(|_| self.law.alphabet[self.law.sample_index(&mut rng)].clone()).collect();
        DisorderConfig::new(self.region.clone(), values).expect("one value per site")
    }

    /// `n` independent draws; draw `i` uses stream `i` of `seed`, so a prefix
    /// of a longer run is identical to a shorter run.
    pub fn sample(&self, seed: u64, n: usize) -> Vec<DisorderConfig> {
        (0..n as u64).map(|i| self.sample_one(seed, i)).collect()
    }

    /// `IE f` by exhaustive summation.
    pub fn expectation<F>(&self, cap: f64, mut f: F) -> Result<f64>
    where
        F: FnMut(&DisorderConfig) -> Result<f64>,
    {
        let mut total = 0.0;
        for (eta, w) in self.enumerate(cap)? {
            total += w * f(&eta)?;
        }
        Ok(total)
    }
}

pub struct DisorderEnumeration<'a> {
    law: &'a ProductLaw,
    digits: Option<Vec<usize>>,
}

impl Iterator for DisorderEnumeration<'_> {
    type Item = (DisorderConfig, f64);

    fn next(&mut self) -> Option<Self::Item> {
        let digits = self.digits.as_mut()?;
        let law = &self.law.law;
        let values: Vec<Symbol> = digits.iter().map(|&d| law.alphabet[d].clone()).collect();
        let weight = digits.iter().map(|&d| law.probs[d]).product();
        let eta = DisorderConfig::new(self.law.region.clone(), values).expect("one value per site");
        let mut pos = digits.len();
        loop {
            if pos == 0 {
                self.digits = None;
                break;
            }
            pos -= 1;
            digits[pos] += 1;
            if digits[pos] < law.len() {
                break;
            }
            digits[pos] = 0;
        }
        Some((eta, weight))
    }
}
