use fastzip::ecc::ReedSolomon;
use fastzip::field::{Fp130, PrimeField, SmallField};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// Largest prime below 2^32: big enough that accidental agreement of a
/// corrupted share is negligible, small enough for exhaustive decoding.
type F32 = SmallField<4_294_967_291>;

/// Gao decoding agrees with exhaustive subset interpolation on every tested
/// error pattern, and recovers the secret whenever the pattern is within
/// the correction budget.
fn check<F: PrimeField>(n_max: usize, patterns: usize) {
    let codes: Vec<(usize, usize)> = (1..=n_max).flat_map(|n| (1..=n).map(move |d| (n, d))).collect();
    codes.par_iter().for_each(|&(n, d)| {
        let rs = ReedSolomon::new(n, d).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64((n * 100 + d) as u64);
        for _ in 0..patterns {
            let s = F::random(&mut rng);
            let mut c = rs.encode(s, &mut rng);
            // Up to two errors past the budget; heavier patterns only add
            // exhaustive-search time.
            let t = rng.gen_range(0..=(rs.max_errors() + 2).min(n));
            for i in sample(&mut rng, n, t) {
                c[i] += F::from_u64(rng.gen_range(1..u32::MAX as u64 - 5));
            }
            let fast = rs.decode_poly(&c);
            assert_eq!(fast, rs.brute_force_decode(&c), "n={n} d={d} t={t}");
            if t <= rs.max_errors() {
                assert_eq!(fast.map(|p| p.constant()), Ok(s), "n={n} d={d} t={t}");
            }
        }
    });
}

#[test]
fn gao_agrees_with_exhaustive_decoder() {
    check::<F32>(14, 1000);
}

#[test]
fn gao_agrees_with_exhaustive_decoder_in_the_protocol_field() {
    check::<Fp130>(8, 100);
}
