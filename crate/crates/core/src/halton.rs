//! Unscrambled Halton sequence.

const PRIMES: [u64; 32] = [
    2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89, 97, 101, 103, 107,
    109, 113, 127, 131,
];

/// The first `n` primes.
pub fn primes(n: usize) -> Vec<u64> {
    if n <= PRIMES.len() {
        return PRIMES[..n].to_vec();
    }
    let mut out = PRIMES.to_vec();
    let mut c = *out.last().unwrap() + 2;
    while out.len() < n {
        if out.iter().take_while(|p| *p * *p <= c).all(|p| c % p != 0) {
            out.push(c);
        }
        c += 2;
    }
    out
}

/// Van der Corput radical inverse of `index` in `base`.
pub fn radical_inverse(mut index: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut r = 0.0;
    while index > 0 {
        r += f * (index % base) as f64;
        index /= base;
        f *= inv;
    }
    r
}

/// Halton point number `index` (should be ≥ 1) in `dims` dimensions.
pub fn halton_point(index: u64, dims: usize) -> Vec<f64> {
    primes(dims).into_iter().map(|b| radical_inverse(index, b)).collect()
}
