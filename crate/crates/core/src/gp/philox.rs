//! Philox4x32-10 counter-based generator and the Box–Muller transform built on it.
//!
//! The variate stream is fully determined by `(root_seed, stream_id)`:
//!
//! * block `k` (a `u64`) is encrypted with counter words
//!   `[k_lo, k_hi, stream_lo, stream_hi]` under key `[root_lo, root_hi]`;
//! * the four output words `x0..x3` form two 64-bit integers
//!   `a = x0 | x1 << 32` and `b = x2 | x3 << 32`;
//! * each integer maps to a uniform in the open interval (0, 1) as
//!   `((v >> 12) + 0.5) * 2^-52` (exact in binary64, so never 0 or 1);
//! * Box–Muller turns `(u1, u2)` into `r cos(2πu2)` and `r sin(2πu2)` with
//!   `r = sqrt(-2 ln u1)`; these are variates `2k` and `2k + 1`.
//!
//! Transcendentals come from `libm` so the stream does not depend on the
//! platform math library.

use std::f64::consts::PI;

const M0: u32 = 0xD251_1F53;
const M1: u32 = 0xCD9E_8D57;
const W0: u32 = 0x9E37_79B9;
const W1: u32 = 0xBB67_AE85;

const ROUNDS: usize = 10;

#[inline]
fn mulhilo(a: u32, b: u32) -> (u32, u32) {
    let p = u64::from(a) * u64::from(b);
    ((p >> 32) as u32, p as u32)
}

/// One Philox4x32 block with 10 rounds.
pub fn philox4x32_10(counter: [u32; 4], key: [u32; 2]) -> [u32; 4] {
    let mut c = counter;
    let mut k = key;
    for round in 0..ROUNDS {
        if round > 0 {
            k[0] = k[0].wrapping_add(W0);
            k[1] = k[1].wrapping_add(W1);
        }
        let (hi0, lo0) = mulhilo(M0, c[0]);
        let (hi1, lo1) = mulhilo(M1, c[2]);
        c = [hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0];
    }
    c
}

#[inline]
fn split(v: u64) -> [u32; 2] {
    [v as u32, (v >> 32) as u32]
}

#[inline]
pub(crate) fn open_unit(v: u64) -> f64 {
    ((v >> 12) as f64 + 0.5) * (1.0 / (1u64 << 52) as f64)
}

/// Raw 64-bit pair for block `index` of the given stream.
pub fn block(root_seed: u64, stream_id: u64, index: u64) -> [u64; 2] {
    let [k0, k1] = split(root_seed);
    let [i0, i1] = split(index);
    let [s0, s1] = split(stream_id);
    let x = philox4x32_10([i0, i1, s0, s1], [k0, k1]);
    [
        u64::from(x[0]) | (u64::from(x[1]) << 32),
        u64::from(x[2]) | (u64::from(x[3]) << 32),
    ]
}

/// Standard normal pair for block `index`.
#[inline]
pub fn normal_pair(root_seed: u64, stream_id: u64, index: u64) -> (f64, f64) {
    let [a, b] = block(root_seed, stream_id, index);
    let u1 = open_unit(a);
    let u2 = open_unit(b);
    let r = (-2.0 * libm::log(u1)).sqrt();
    let theta = 2.0 * PI * u2;
    (r * libm::cos(theta), r * libm::sin(theta))
}

/// Fills `out` with consecutive variates of one stream, starting at variate 0.
pub fn fill_normals(root_seed: u64, stream_id: u64, out: &mut [f64]) {
    let mut chunks = out.chunks_exact_mut(2);
    let mut index = 0u64;
    for pair in &mut chunks {
        let (z0, z1) = normal_pair(root_seed, stream_id, index);
        pair[0] = z0;
        pair[1] = z1;
        index += 1;
    }
    if let [last] = chunks.into_remainder() {
        *last = normal_pair(root_seed, stream_id, index).0;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    // Known-answer vectors published with the Random123 reference implementation.
    #[test]
    fn philox_known_answers() {
        assert_eq!(
            philox4x32_10([0, 0, 0, 0], [0, 0]),
            [0x6627_e8d5, 0xe169_c58d, 0xbc57_ac4c, 0x9b00_dbd8]
        );
        assert_eq!(
            philox4x32_10([u32::MAX; 4], [u32::MAX; 2]),
            [0x408f_276d, 0x41c8_3b0e, 0xa20b_c7c6, 0x6d54_51fd]
        );
        assert_eq!(
            philox4x32_10(
                [0x243f_6a88, 0x85a3_08d3, 0x1319_8a2e, 0x0370_7344],
                [0xa409_3822, 0x299f_31d0]
            ),
            [0xd16c_fe09, 0x94fd_cceb, 0x5001_e420, 0x2412_6ea1]
        );
    }

    #[test]
    fn open_unit_never_hits_endpoints() {
        assert!(open_unit(0) > 0.0);
        assert!(open_unit(u64::MAX) < 1.0);
    }

    #[test]
    fn odd_fill_is_prefix_of_even_fill() {
        let mut odd = [0.0; 7];
        let mut even = [0.0; 8];
        fill_normals(3, 4, &mut odd);
        fill_normals(3, 4, &mut even);
        assert_eq!(odd[..], even[..7]);
    }
}
