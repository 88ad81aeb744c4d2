//! Classical reference schemes and their closed-form error rates.
//!
//! Bits are `u8` values in `{0, 1}`. A 4-bit message index `m` maps to data
//! bits `[m>>3 & 1, m>>2 & 1, m>>1 & 1, m & 1]`.

use num_complex::Complex;

use crate::channel::{noise_param, SnrPoint};
use crate::error::Result;
use crate::scalar::Real;

pub type DataBits = [u8; 4];
pub type CodeBits = [u8; 7];

/// Systematic (7,4) Hamming code, `G = [I | P]`, `H = [P^T | I]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Hamming74 {
    pub generator: [[u8; 7]; 4],
    pub parity_check: [[u8; 7]; 3],
    /// Syndrome (as `s0 s1 s2` read MSB first) to flipped position.
    pub syndrome_table: [Option<usize>; 8],
}

const PARITY: [[u8; 3]; 4] = [[1, 1, 0], [1, 0, 1], [0, 1, 1], [1, 1, 1]];

impl Default for Hamming74 {
    fn default() -> Self {
        Self::new()
    }
}

impl Hamming74 {
    pub fn new() -> Self {
        let mut generator = [[0u8; 7]; 4];
        for (i, row) in generator.iter_mut().enumerate() {
            row[i] = 1;
            row[4..].copy_from_slice(&PARITY[i]);
        }
        let mut parity_check = [[0u8; 7]; 3];
        for (r, row) in parity_check.iter_mut().enumerate() {
            for (j, p) in PARITY.iter().enumerate() {
                row[j] = p[r];
            }
            row[4 + r] = 1;
        }
        let mut syndrome_table = [None; 8];
        for pos in 0..7 {
            let s = (0..3).fold(0usize, |acc, r| (acc << 1) | parity_check[r][pos] as usize);
            syndrome_table[s] = Some(pos);
        }
        Self { generator, parity_check, syndrome_table }
    }

    pub fn encode(&self, data: &DataBits) -> CodeBits {
        let mut c = [0u8; 7];
        for (d, row) in data.iter().zip(&self.generator) {
            if *d & 1 == 1 {
                for (cj, gj) in c.iter_mut().zip(row) {
                    *cj ^= gj;
                }
            }
        }
        c
    }

    pub fn syndrome(&self, received: &CodeBits) -> usize {
        self.parity_check.iter().fold(0usize, |acc, row| {
            let bit = row.iter().zip(received).fold(0u8, |s, (h, r)| s ^ (h & r));
            (acc << 1) | bit as usize
        })
    }

    /// Hard-decision decoding: correct at most one flipped bit, then read
    /// the systematic positions.
    pub fn syndrome_decode(&self, received: &CodeBits) -> DataBits {
        let mut r = *received;
        if let Some(pos) = self.syndrome_table[self.syndrome(&r)] {
            r[pos] ^= 1;
        }
        [r[0], r[1], r[2], r[3]]
    }

    /// BPSK images of all 16 codewords, indexed by message.
    pub fn bpsk_codebook<T: Real>(&self) -> Vec<[T; 7]> {
        (0..16)
            .map(|m| {
                let c = self.encode(&message_bits(m));
                c.map(bpsk_map::<T>)
            })
            .collect()
    }

    /// Maximum-likelihood decoding with receiver CSI: the codeword whose
    /// faded BPSK image is closest to `y`. Ties go to the lowest index.
    pub fn soft_mld<T: Real>(&self, y: &[Complex<T>], h: &[Complex<T>]) -> DataBits {
        let book = self.bpsk_codebook::<T>();
        message_bits(soft_mld_index(&book, y, h))
    }
}

fn soft_mld_index<T: Real>(book: &[[T; 7]], y: &[Complex<T>], h: &[Complex<T>]) -> usize {
    let mut best = (0usize, T::infinity());
    for (m, s) in book.iter().enumerate() {
        let d: T = y
            .iter()
            .zip(h)
            .zip(s)
            .map(|((&yl, &hl), &sl)| (yl - hl * sl).norm_sqr())
            .sum();
        if d < best.1 {
            best = (m, d);
        }
    }
    best.0
}

pub fn message_bits(m: usize) -> DataBits {
    [(m >> 3) as u8 & 1, (m >> 2) as u8 & 1, (m >> 1) as u8 & 1, m as u8 & 1]
}

pub fn bits_message(bits: &DataBits) -> usize {
    bits.iter().fold(0, |acc, &b| (acc << 1) | (b & 1) as usize)
}

pub fn hamming_distance(a: &[u8], b: &[u8]) -> usize {
    a.iter().zip(b).filter(|(x, y)| x != y).count()
}

/// Orthogonal signaling: bit 0 -> `[1, 0]`, bit 1 -> `[0, 1]`.
pub fn orth_encode<T: Real>(bit: u8) -> [T; 2] {
    if bit & 1 == 0 {
        [T::one(), T::zero()]
    } else {
        [T::zero(), T::one()]
    }
}

/// Energy detector: 0 iff `|y1| >= |y2|`.
pub fn orth_detect<T: Real>(y: &[Complex<T>; 2]) -> u8 {
    if y[0].norm_sqr() >= y[1].norm_sqr() {
        0
    } else {
        1
    }
}

pub fn bpsk_map<T: Real>(bit: u8) -> T {
    if bit & 1 == 0 {
        T::one()
    } else {
        -T::one()
    }
}

pub fn bpsk_detect<T: Real>(statistic: T) -> u8 {
    if statistic >= T::zero() {
        0
    } else {
        1
    }
}

/// Matched-filter statistic `Re(conj(h) y)`; zero when `h = 0`.
pub fn coherent_combine<T: Real>(y: Complex<T>, h: Complex<T>) -> T {
    (h.conj() * y).re
}

/// Noncoherent orthogonal signaling over Rayleigh fading:
/// `1 / (2 + E_chip / (2 N0))`.
pub fn oracle_orth_noncoherent_bler(snr: SnrPoint, chip_energy: f64) -> Result<f64> {
    let n0 = noise_param(snr)?;
    Ok(1.0 / (2.0 + chip_energy / (2.0 * n0)))
}

/// Coherent BPSK bit error over Rayleigh fading with mean SNR `mean_snr`.
pub fn oracle_coherent_bpsk_ber(mean_snr: f64) -> f64 {
    0.5 * (1.0 - (mean_snr / (1.0 + mean_snr)).sqrt())
}

/// `k` independent coherent BPSK bits at uncoded SNR.
pub fn oracle_uncoded_block(snr_db: f64, k_bits: u32) -> f64 {
    let p = oracle_coherent_bpsk_ber(crate::channel::db_to_linear(snr_db));
    1.0 - (1.0 - p).powi(k_bits as i32)
}

/// Block error when at most one of seven independent bit errors is corrected.
pub fn hamming_block_error(p: f64) -> f64 {
    1.0 - (1.0 - p).powi(7) - 7.0 * p * (1.0 - p).powi(6)
}

/// Hard-decision Hamming(7,4) with coherent BPSK chips at rate 4/7.
pub fn oracle_hamming_hard_block(snr_db: f64) -> f64 {
    let gamma = 4.0 / 7.0 * crate::channel::db_to_linear(snr_db);
    hamming_block_error(oracle_coherent_bpsk_ber(gamma))
}

/// Hard-decision Hamming(7,4) over noncoherent orthogonal chips (unit chip
/// energy, rate-4/7 noise).
pub fn oracle_hamming_hard_no_csi_block(snr_db: f64) -> Result<f64> {
    let p = oracle_orth_noncoherent_bler(SnrPoint::coded(snr_db, 4.0 / 7.0), 1.0)?;
    Ok(hamming_block_error(p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{sample_cscn, sample_fading, FadingSpec, Rng};

    #[test]
    fn code_structure() {
        let code = Hamming74::new();
        for g in &code.generator {
            for h in &code.parity_check {
                let dot = g.iter().zip(h).fold(0u8, |s, (a, b)| s ^ (a & b));
                assert_eq!(dot, 0);
            }
        }
        // all seven columns have distinct non-zero syndromes
        assert_eq!(code.syndrome_table.iter().filter(|s| s.is_some()).count(), 7);
        assert!(code.syndrome_table[0].is_none());
    }

    #[test]
    fn encoding_examples() {
        let code = Hamming74::new();
        assert_eq!(code.encode(&[0, 0, 0, 0]), [0; 7]);
        assert_eq!(code.encode(&[1, 0, 0, 0]), [1, 0, 0, 0, 1, 1, 0]);
        assert_eq!(code.encode(&[1, 0, 0, 0]), code.generator[0]);
    }

    #[test]
    fn minimum_distance_is_three() {
        let code = Hamming74::new();
        let words: Vec<CodeBits> = (0..16).map(|m| code.encode(&message_bits(m))).collect();
        let mut dmin = usize::MAX;
        for i in 0..16 {
            for j in 0..16 {
                if i != j {
                    dmin = dmin.min(hamming_distance(&words[i], &words[j]));
                }
            }
        }
        assert_eq!(dmin, 3);
    }

    #[test]
    fn corrects_every_single_error() {
        let code = Hamming74::new();
        for m in 0..16 {
            let d = message_bits(m);
            let c = code.encode(&d);
            assert_eq!(code.syndrome_decode(&c), d);
            for pos in 0..7 {
                let mut r = c;
                r[pos] ^= 1;
                assert_eq!(code.syndrome_decode(&r), d, "m={m} pos={pos}");
            }
        }
    }

    #[test]
    fn some_double_error_miscorrects() {
        let code = Hamming74::new();
        let c = code.encode(&[0, 0, 0, 0]);
        let found = (0..7).any(|a| {
            (a + 1..7).any(|b| {
                let mut r = c;
                r[a] ^= 1;
                r[b] ^= 1;
                code.syndrome_decode(&r) != [0, 0, 0, 0]
            })
        });
        assert!(found);
    }

    #[test]
    fn orthogonal_signaling() {
        assert_eq!(orth_encode::<f64>(0), [1.0, 0.0]);
        assert_eq!(orth_encode::<f64>(1), [0.0, 1.0]);
        let c = |re, im| Complex::new(re, im);
        assert_eq!(orth_detect(&[c(2.0, 0.0), c(1.0, 0.0)]), 0);
        assert_eq!(orth_detect(&[c(0.0, 0.1), c(-3.0, 0.0)]), 1);
        assert_eq!(orth_detect(&[c(1.0, 0.0), c(1.0, 0.0)]), 0);
    }

    #[test]
    fn bpsk_and_combining() {
        assert_eq!(bpsk_map::<f64>(0), 1.0);
        assert_eq!(bpsk_map::<f64>(1), -1.0);
        assert_eq!(bpsk_detect(0.3), 0);
        assert_eq!(bpsk_detect(-1e-9), 1);
        assert_eq!(bpsk_detect(0.0), 0);
        let h = Complex::new(0.3f64, -1.1);
        assert!((coherent_combine(h, h) - h.norm_sqr()).abs() < 1e-15);
        assert!((coherent_combine(-h, h) + h.norm_sqr()).abs() < 1e-15);
        let j = Complex::new(0.0, 1.0);
        assert_eq!(coherent_combine(j, j), 1.0);
        assert_eq!(coherent_combine(j, Complex::new(0.0, 0.0)), 0.0);
    }

    #[test]
    fn soft_mld_noiseless_recovers_all() {
        let code = Hamming74::new();
        let book = code.bpsk_codebook::<f64>();
        let spec = FadingSpec::rayleigh();
        let mut rng = Rng::new(11, 0);
        for (m, s) in book.iter().enumerate() {
            let h: Vec<Complex<f64>> = (0..7).map(|_| sample_fading(&mut rng, &spec)).collect();
            let y: Vec<Complex<f64>> = h.iter().zip(s).map(|(&h, &s)| h * s).collect();
            assert_eq!(code.soft_mld(&y, &h), message_bits(m));
        }
    }

    /// Independent soft decoder: enumerate data words directly and score by
    /// the expanded metric `sum |h|^2 - 2 s Re(conj(h) y)`.
    fn soft_mld_by_correlation(code: &Hamming74, y: &[Complex<f64>], h: &[Complex<f64>]) -> DataBits {
        let mut best = ([0u8; 4], f64::INFINITY);
        for a in 0..2u8 {
            for b in 0..2u8 {
                for c in 0..2u8 {
                    for d in 0..2u8 {
                        let data = [a, b, c, d];
                        let word = code.encode(&data);
                        let metric: f64 = (0..7)
                            .map(|l| {
                                let s = if word[l] == 0 { 1.0 } else { -1.0 };
                                h[l].norm_sqr() - 2.0 * s * (h[l].conj() * y[l]).re
                            })
                            .sum();
                        if metric < best.1 {
                            best = (data, metric);
                        }
                    }
                }
            }
        }
        best.0
    }

    #[test]
    fn soft_mld_matches_independent_decoder() {
        let code = Hamming74::new();
        let spec = FadingSpec::rayleigh();
        let mut rng = Rng::new(12, 0);
        for _ in 0..1000 {
            let h: Vec<Complex<f64>> = (0..7).map(|_| sample_fading(&mut rng, &spec)).collect();
            let y: Vec<Complex<f64>> =
                (0..7).map(|_| sample_cscn(&mut rng, 4.0).unwrap()).collect();
            assert_eq!(code.soft_mld(&y, &h), soft_mld_by_correlation(&code, &y, &h));
        }
    }

    #[test]
    fn oracle_values() {
        let p = oracle_orth_noncoherent_bler(SnrPoint::uncoded(20.0), 1.0).unwrap();
        assert!((p - 1.0 / 102.0).abs() < 1e-12);
        let p = oracle_orth_noncoherent_bler(SnrPoint::uncoded(-2.0), 1.0).unwrap();
        assert!((p - 0.3801).abs() < 1e-4, "{p}");
        let p = oracle_orth_noncoherent_bler(SnrPoint::uncoded(-200.0), 1.0).unwrap();
        assert!((p - 0.5).abs() < 1e-12);
        assert!((oracle_uncoded_block(20.0, 4) - 0.00988).abs() < 1e-5);
        assert!((oracle_uncoded_block(4.07, 4) - 0.2715).abs() < 1e-3);
        let hh = oracle_hamming_hard_block(20.0);
        // 3.860e-4 exactly; the 3.85e-4 figure is a truncation
        assert!((hh - 3.85e-4).abs() / 3.85e-4 < 0.01, "{hh}");
    }

    #[test]
    fn message_bit_packing() {
        for m in 0..16 {
            assert_eq!(bits_message(&message_bits(m)), m);
        }
        assert_eq!(message_bits(8), [1, 0, 0, 0]);
    }
}
