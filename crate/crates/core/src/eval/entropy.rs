//! Randomness diagnostics for fingerprint corpora: random-walk end points
//! against the binomial expectation, a two-state Markov chain over adjacent
//! bits, and two min-entropy proxies (most common value, and the most
//! probable path through the chain).
//!
//! These proxies are conservative stand-ins for a full entropy-assessment
//! suite, which itself tends to underestimate min-entropy.

use statrs::distribution::{ChiSquared, ContinuousCDF};

use super::EvalError;
use crate::security::{binomial, log2_big};

pub const MIN_CORPUS: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct EntropyReport {
    pub bits: usize,
    pub corpus: usize,
    /// `positions[k]` counts fingerprints whose walk ends at `2k − n`,
    /// i.e. that hold `k` one-bits.
    pub random_walk_positions: Vec<u64>,
    pub expected_binomial: Vec<f64>,
    pub chi_square: f64,
    pub chi_square_dof: usize,
    pub chi_square_p: f64,
    /// `P(next = 1 | prev = 0)`; `None` if no bit is followed after a 0.
    pub markov_p01: Option<f64>,
    pub markov_p11: Option<f64>,
    pub ones_fraction: f64,
    pub mcv_min_entropy: f64,
    pub markov_min_entropy: f64,
}

impl EntropyReport {
    /// Walk end position for histogram bin `k`.
    pub fn position(&self, k: usize) -> i64 {
        2 * k as i64 - self.bits as i64
    }
}

pub fn entropy_analysis(corpus: &[Vec<bool>]) -> Result<EntropyReport, EvalError> {
    if corpus.len() < MIN_CORPUS {
        return Err(EvalError::InsufficientCorpus {
            got: corpus.len(),
            need: MIN_CORPUS,
        });
    }
    let n = corpus[0].len();
    if n == 0 || corpus.iter().any(|f| f.len() != n) {
        return Err(EvalError::RaggedCorpus);
    }

    let mut positions = vec![0u64; n + 1];
    let mut ones = 0u64;
    // transitions[prev][next]
    let mut transitions = [[0u64; 2]; 2];
    let mut first = [0u64; 2];
    for f in corpus {
        let k = f.iter().filter(|&&b| b).count();
        positions[k] += 1;
        ones += k as u64;
        first[f[0] as usize] += 1;
        for w in f.windows(2) {
            transitions[w[0] as usize][w[1] as usize] += 1;
        }
    }

    let total = 2f64.powi(n as i32);
    let expected: Vec<f64> = (0..=n)
        .map(|k| corpus.len() as f64 * log2_big(&binomial(n as u64, k as u64)).exp2() / total)
        .collect();
    let (chi_square, dof) = chi_square(&positions, &expected);
    let chi_square_p = if dof == 0 {
        1.0
    } else {
        1.0 - ChiSquared::new(dof as f64).expect("positive dof").cdf(chi_square)
    };

    let row = |prev: usize| {
        let t = transitions[prev][0] + transitions[prev][1];
        (t > 0).then(|| transitions[prev][1] as f64 / t as f64)
    };
    let p01 = row(0);
    let p11 = row(1);

    let total_bits = (corpus.len() * n) as f64;
    let ones_fraction = ones as f64 / total_bits;
    let mcv = -ones_fraction.max(1.0 - ones_fraction).log2();

    // Most probable length-n path: initial state from the first-bit
    // frequencies, unobserved transition rows left uninformative.
    let init = [first[0] as f64 / corpus.len() as f64, first[1] as f64 / corpus.len() as f64];
    let p = |prev: usize, next: usize| {
        let p1 = row(prev).unwrap_or(0.5);
        if next == 1 {
            p1
        } else {
            1.0 - p1
        }
    };
    let mut best = init.map(f64::log2);
    for _ in 1..n {
        best = [0, 1].map(|next| (0..2).map(|prev| best[prev] + p(prev, next).log2()).fold(f64::NEG_INFINITY, f64::max));
    }
    let max_log = best[0].max(best[1]);
    let markov = (0.0 - max_log / n as f64).clamp(0.0, 1.0);

    Ok(EntropyReport {
        bits: n,
        corpus: corpus.len(),
        random_walk_positions: positions,
        expected_binomial: expected,
        chi_square,
        chi_square_dof: dof,
        chi_square_p,
        markov_p01: p01,
        markov_p11: p11,
        ones_fraction,
        mcv_min_entropy: mcv.max(0.0),
        markov_min_entropy: markov,
    })
}

/// Pearson statistic after pooling adjacent bins until each expects at
/// least 5 observations. Returns `(statistic, degrees of freedom)`.
fn chi_square(observed: &[u64], expected: &[f64]) -> (f64, usize) {
    let mut bins: Vec<(f64, f64)> = Vec::new();
    let (mut o, mut e) = (0.0, 0.0);
    for (&ob, &ex) in observed.iter().zip(expected) {
        o += ob as f64;
        e += ex;
        if e >= 5.0 {
            bins.push((o, e));
            o = 0.0;
            e = 0.0;
        }
    }
    if e > 0.0 || o > 0.0 {
        match bins.last_mut() {
            Some(last) => {
                last.0 += o;
                last.1 += e;
            }
            None => bins.push((o, e)),
        }
    }
    let stat = bins.iter().map(|&(o, e)| (o - e).powi(2) / e).sum();
    (stat, bins.len().saturating_sub(1))
}
