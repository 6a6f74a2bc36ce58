use std::f64::consts::{FRAC_PI_4, PI};

use rand::Rng;

use crate::error::{Error, Result};

use super::{Modulation, SYMBOLS};

/// Gray-coded QPSK: 00 → π/4, 01 → 3π/4, 11 → 5π/4, 10 → 7π/4.
fn qpsk_phase(b0: u8, b1: u8) -> f64 {
    match (b0, b1) {
        (0, 0) => FRAC_PI_4,
        (0, 1) => 3.0 * FRAC_PI_4,
        (1, 1) => 5.0 * FRAC_PI_4,
        _ => 7.0 * FRAC_PI_4,
    }
}

/// Base phase of each symbol. BPSK maps 0 → 0 and 1 → π.
///
/// Accepts any non-empty bit sequence whose length is a multiple of the
/// scheme's bits per symbol.
pub fn modulate(bits: &[u8], scheme: Modulation) -> Result<Vec<f64>> {
    let per = scheme.bits_per_symbol();
    if bits.is_empty() || !bits.len().is_multiple_of(per) {
        return Err(Error::input(format!(
            "{scheme:?} needs a non-empty multiple of {per} bits, got {}",
            bits.len()
        )));
    }
    if let Some(b) = bits.iter().find(|&&b| b > 1) {
        return Err(Error::input(format!("bit value {b} is not 0 or 1")));
    }
    Ok(match scheme {
        Modulation::Bpsk => bits.iter().map(|&b| if b == 0 { 0.0 } else { PI }).collect(),
        Modulation::Qpsk => bits.chunks_exact(2).map(|c| qpsk_phase(c[0], c[1])).collect(),
    })
}

/// Uniform random bits for one 16-symbol frame of the given scheme.
pub fn random_bits<R: Rng + ?Sized>(scheme: Modulation, rng: &mut R) -> Vec<u8> {
    (0..SYMBOLS * scheme.bits_per_symbol())
        .map(|_| rng.random_range(0..=1u8))
        .collect()
}
