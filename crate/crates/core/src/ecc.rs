//! Shamir sharing in its error-correcting form (a Reed-Solomon code).
//!
//! A secret is the constant term of a random polynomial of degree `d − 1`;
//! the codeword is its evaluation at `x = 1..n`. Any `d` correct shares
//! determine the secret, and up to `e = ⌊(n − d)/2⌋` wrong shares are
//! corrected with Gao's decoder (interpolate, then a partial extended
//! Euclid run against `Π (x − xᵢ)` yields the error locator).

use rand::RngCore;
use thiserror::Error;

use crate::field::PrimeField;

#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
pub enum EccError {
    #[error("invalid code parameters n={n}, d={d}")]
    InvalidCode { n: usize, d: usize },
    #[error("expected {expected} shares, got {got}")]
    WrongLength { expected: usize, got: usize },
    #[error("no codeword within the correction radius")]
    DecodeFailure,
}

/// Dense polynomial, coefficients from the constant term up. Kept trimmed:
/// no trailing zeros, the zero polynomial is empty.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Poly<F>(pub Vec<F>);

impl<F: PrimeField> Poly<F> {
    pub fn new(mut c: Vec<F>) -> Self {
        while c.last().is_some_and(|x| x.is_zero()) {
            c.pop();
        }
        Self(c)
    }

    pub fn zero() -> Self {
        Self(Vec::new())
    }

    /// Degree, `None` for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        self.0.len().checked_sub(1)
    }

    pub fn eval(&self, x: F) -> F {
        self.0.iter().rev().fold(F::zero(), |acc, &c| acc * x + c)
    }

    pub fn constant(&self) -> F {
        self.0.first().copied().unwrap_or_else(F::zero)
    }

    pub fn sub(&self, other: &Self) -> Self {
        let len = self.0.len().max(other.0.len());
        let c = (0..len)
            .map(|i| {
                let a = self.0.get(i).copied().unwrap_or_else(F::zero);
                let b = other.0.get(i).copied().unwrap_or_else(F::zero);
                a - b
            })
            .collect();
        Self::new(c)
    }

    pub fn mul(&self, other: &Self) -> Self {
        if self.0.is_empty() || other.0.is_empty() {
            return Self::zero();
        }
        let mut c = vec![F::zero(); self.0.len() + other.0.len() - 1];
        for (i, &a) in self.0.iter().enumerate() {
            for (j, &b) in other.0.iter().enumerate() {
                c[i + j] += a * b;
            }
        }
        Self::new(c)
    }

    /// `(q, r)` with `self = q·div + r`, `deg r < deg div`.
    pub fn div_rem(&self, div: &Self) -> (Self, Self) {
        let dd = div.degree().expect("division by the zero polynomial");
        let lead_inv = div.0[dd].inverse().expect("trimmed leading coefficient is nonzero");
        let mut r = self.0.clone();
        if r.len() <= dd {
            return (Self::zero(), Self::new(r));
        }
        let mut q = vec![F::zero(); r.len() - dd];
        for k in (0..q.len()).rev() {
            let coef = r[k + dd] * lead_inv;
            q[k] = coef;
            if coef.is_zero() {
                continue;
            }
            for (j, &dc) in div.0.iter().enumerate() {
                r[k + j] -= coef * dc;
            }
        }
        r.truncate(dd);
        (Self::new(q), Self::new(r))
    }
}

/// Polynomial of degree `< points.len()` through all `(x, y)` pairs
/// (Newton divided differences).
pub fn interpolate<F: PrimeField>(xs: &[F], ys: &[F]) -> Poly<F> {
    assert_eq!(xs.len(), ys.len());
    let k = xs.len();
    let mut coef = ys.to_vec();
    for j in 1..k {
        let inv = batch_inverse(&(j..k).map(|i| xs[i] - xs[i - j]).collect::<Vec<_>>());
        for i in (j..k).rev() {
            coef[i] = (coef[i] - coef[i - 1]) * inv[i - j];
        }
    }
    // Expand the Newton form into monomial coefficients.
    let mut out = vec![F::zero(); k];
    for i in (0..k).rev() {
        // out = out·(x − xs[i]) + coef[i]
        let mut next = vec![F::zero(); k];
        for j in 0..k {
            if j + 1 < k {
                next[j + 1] += out[j];
            }
            next[j] -= out[j] * xs[i];
        }
        next[0] += coef[i];
        out = next;
    }
    Poly::new(out)
}

/// Interpolates using `g0 = Π (x − xᵢ)`: `Σ yᵢ·wᵢ·g0/(x − xᵢ)` with
/// barycentric weights `wᵢ = 1/Π_{j≠i}(xᵢ − xⱼ)`; one field inversion total.
fn lagrange_through<F: PrimeField>(g0: &Poly<F>, xs: &[F], ys: &[F]) -> Poly<F> {
    let n = xs.len();
    let dens: Vec<F> = (0..n)
        .map(|i| {
            (0..n)
                .filter(|&j| j != i)
                .fold(F::one(), |acc, j| acc * (xs[i] - xs[j]))
        })
        .collect();
    let w = batch_inverse(&dens);
    let mut out = vec![F::zero(); n];
    let mut quot = vec![F::zero(); n];
    for i in 0..n {
        let scale = ys[i] * w[i];
        if scale.is_zero() {
            continue;
        }
        // Synthetic division of g0 by (x − xᵢ).
        let mut carry = F::zero();
        for k in (0..n).rev() {
            carry = g0.0[k + 1] + carry * xs[i];
            quot[k] = carry;
        }
        for k in 0..n {
            out[k] += scale * quot[k];
        }
    }
    Poly::new(out)
}

/// Inverts every element with a single field inversion (Montgomery's trick).
/// Panics on zero, which callers rule out by construction.
pub fn batch_inverse<F: PrimeField>(v: &[F]) -> Vec<F> {
    let mut prefix = Vec::with_capacity(v.len());
    let mut acc = F::one();
    for &x in v {
        prefix.push(acc);
        acc *= x;
    }
    let mut inv = acc.inverse().expect("distinct evaluation points");
    let mut out = vec![F::zero(); v.len()];
    for i in (0..v.len()).rev() {
        out[i] = inv * prefix[i];
        inv *= v[i];
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReedSolomon {
    n: usize,
    d: usize,
}

impl ReedSolomon {
    /// `n` shares, any `d` of which determine the secret.
    pub fn new(n: usize, d: usize) -> Result<Self, EccError> {
        if d == 0 || d > n {
            return Err(EccError::InvalidCode { n, d });
        }
        Ok(Self { n, d })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn max_errors(&self) -> usize {
        (self.n - self.d) / 2
    }

    pub fn points<F: PrimeField>(&self) -> Vec<F> {
        (1..=self.n as u64).map(F::from_u64).collect()
    }

    pub fn encode_poly<F: PrimeField>(&self, poly: &Poly<F>) -> Vec<F> {
        self.points::<F>().into_iter().map(|x| poly.eval(x)).collect()
    }

    /// Random polynomial with constant term `secret`, evaluated at `1..=n`.
    pub fn encode<F: PrimeField, R: RngCore + ?Sized>(&self, secret: F, rng: &mut R) -> Vec<F> {
        let mut c = Vec::with_capacity(self.d);
        c.push(secret);
        c.extend((1..self.d).map(|_| F::random(rng)));
        self.encode_poly(&Poly::new(c))
    }

    /// The unique message polynomial within distance `e` of `shares`.
    pub fn decode_poly<F: PrimeField>(&self, shares: &[F]) -> Result<Poly<F>, EccError> {
        if shares.len() != self.n {
            return Err(EccError::WrongLength {
                expected: self.n,
                got: shares.len(),
            });
        }
        let xs = self.points::<F>();
        let g0 = xs
            .iter()
            .fold(Poly::new(vec![F::one()]), |acc, &x| acc.mul(&Poly::new(vec![-x, F::one()])));
        let g1 = lagrange_through(&g0, &xs, shares);

        // Partial extended Euclid until deg r < (n + d)/2.
        let stop = |p: &Poly<F>| p.degree().is_none_or(|deg| 2 * deg < self.n + self.d);
        let (mut r_prev, mut r) = (g0, g1);
        let (mut v_prev, mut v) = (Poly::zero(), Poly::new(vec![F::one()]));
        while !stop(&r) {
            let (q, rem) = r_prev.div_rem(&r);
            let v_next = v_prev.sub(&q.mul(&v));
            r_prev = std::mem::replace(&mut r, rem);
            v_prev = std::mem::replace(&mut v, v_next);
        }
        let (f, rem) = r.div_rem(&v);
        if rem.degree().is_some() || f.degree().is_some_and(|deg| deg >= self.d) {
            return Err(EccError::DecodeFailure);
        }
        let agree = xs.iter().zip(shares).filter(|(&x, &y)| f.eval(x) == y).count();
        if agree + self.max_errors() < self.n {
            return Err(EccError::DecodeFailure);
        }
        Ok(f)
    }

    pub fn decode<F: PrimeField>(&self, shares: &[F]) -> Result<F, EccError> {
        self.decode_poly(shares).map(|p| p.constant())
    }

    /// Reference decoder: interpolates every `d`-subset and returns the
    /// polynomial agreeing with at least `n − e` shares. Exponential; for
    /// cross-checking at small `n`.
    pub fn brute_force_decode<F: PrimeField>(&self, shares: &[F]) -> Result<Poly<F>, EccError> {
        if shares.len() != self.n {
            return Err(EccError::WrongLength {
                expected: self.n,
                got: shares.len(),
            });
        }
        let xs = self.points::<F>();
        let need = self.n - self.max_errors();
        let mut idx: Vec<usize> = (0..self.d).collect();
        loop {
            let sx: Vec<F> = idx.iter().map(|&i| xs[i]).collect();
            let sy: Vec<F> = idx.iter().map(|&i| shares[i]).collect();
            let p = interpolate(&sx, &sy);
            let agree = xs.iter().zip(shares).filter(|(&x, &y)| p.eval(x) == y).count();
            if agree >= need {
                return Ok(p);
            }
            if !next_combination(&mut idx, self.n) {
                return Err(EccError::DecodeFailure);
            }
        }
    }

    /// Constant terms of every `d`-subset interpolation: the candidate set
    /// an attacker holding `shares` can enumerate.
    pub fn candidate_secrets<F: PrimeField>(&self, shares: &[F]) -> Vec<F> {
        let xs = self.points::<F>();
        let mut idx: Vec<usize> = (0..self.d).collect();
        let mut out = Vec::new();
        loop {
            let sx: Vec<F> = idx.iter().map(|&i| xs[i]).collect();
            let sy: Vec<F> = idx.iter().map(|&i| shares[i]).collect();
            out.push(interpolate(&sx, &sy).constant());
            if !next_combination(&mut idx, self.n) {
                return out;
            }
        }
    }
}

/// Advances `idx` to the next `k`-combination of `0..n` in lexicographic
/// order; `false` after the last one.
fn next_combination(idx: &mut [usize], n: usize) -> bool {
    let k = idx.len();
    let mut i = k;
    while i > 0 {
        i -= 1;
        if idx[i] < n - k + i {
            idx[i] += 1;
            for j in i + 1..k {
                idx[j] = idx[j - 1] + 1;
            }
            return true;
        }
    }
    false
}
