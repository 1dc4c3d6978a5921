//! Forward error correction for coded transmissions: a binary convolutional
//! code with soft-decision Viterbi decoding, plus a seeded random bit
//! interleaver.
//!
//! The encoder is zero-tailed: every frame appends `constraint − 1` zero
//! bits so the trellis ends in the all-zero state, and the decoder forces
//! those tail transitions. The decoder consumes per-bit log-likelihood
//! ratios `ln P(bit = 0) − ln P(bit = 1)` and maximizes the accumulated
//! path metric `Σ (1 − 2·c)·LLR` over codewords `c`.

use crate::rng::{RngStream, STREAM_INTERLEAVER};
use crate::{Error, Result};

/// Rate-`1/n` binary convolutional code defined by its constraint length and
/// one generator polynomial per output stream.
#[derive(Clone, Debug)]
pub struct ConvolutionalCode {
    constraint: usize,
    generators: Vec<u32>,
}

impl ConvolutionalCode {
    pub fn new(constraint: usize, generators: Vec<u32>) -> Result<Self> {
        if !(2..=16).contains(&constraint) {
            return Err(Error::Argument(format!(
                "constraint length must be in 2..=16, got {constraint}"
            )));
        }
        if generators.is_empty() {
            return Err(Error::Argument("need at least one generator".into()));
        }
        let mask = (1u32 << constraint) - 1;
        for &g in &generators {
            if g == 0 || g & !mask != 0 {
                return Err(Error::Argument(format!(
                    "generator {g:o} (octal) does not fit constraint length {constraint}"
                )));
            }
        }
        Ok(Self {
            constraint,
            generators,
        })
    }

    /// The standard rate-1/2, constraint-length-7 code with generators
    /// 133/171 (octal).
    pub fn rate_half_k7() -> Self {
        Self::new(7, vec![0o133, 0o171]).expect("fixed parameters are valid")
    }

    /// Output bits per input bit.
    pub fn outputs(&self) -> usize {
        self.generators.len()
    }

    /// Zero bits appended to terminate the trellis.
    pub fn tail_bits(&self) -> usize {
        self.constraint - 1
    }

    /// Coded length of a message of `message_len` bits, tail included.
    pub fn encoded_len(&self, message_len: usize) -> usize {
        (message_len + self.tail_bits()) * self.outputs()
    }

    #[inline]
    fn step(&self, state: u32, bit: u32) -> (u32, impl Iterator<Item = u8> + '_) {
        let reg = (bit << (self.constraint - 1)) | state;
        let next = reg >> 1;
        let outputs = self
            .generators
            .iter()
            .map(move |&g| ((reg & g).count_ones() & 1) as u8);
        (next, outputs)
    }

    /// Encodes a message of 0/1 bits, appending the zero tail.
    pub fn encode(&self, bits: &[u8]) -> Result<Vec<u8>> {
        if bits.iter().any(|&b| b > 1) {
            return Err(Error::Argument("message bits must be 0 or 1".into()));
        }
        let mut out = Vec::with_capacity(self.encoded_len(bits.len()));
        let mut state = 0u32;
        for &b in bits.iter().chain(std::iter::repeat(&0).take(self.tail_bits())) {
            let (next, symbols) = self.step(state, b as u32);
            out.extend(symbols);
            state = next;
        }
        Ok(out)
    }

    /// Soft-decision Viterbi decoding of one zero-tailed frame. `llrs` holds
    /// one value per coded bit (positive favors bit 0); the decoded message
    /// is returned without the tail.
    pub fn decode_soft(&self, llrs: &[f64]) -> Result<Vec<u8>> {
        let n_out = self.outputs();
        if llrs.len() % n_out != 0 {
            return Err(Error::Argument(format!(
                "{} channel values are not a whole number of {n_out}-bit branches",
                llrs.len()
            )));
        }
        let steps = llrs.len() / n_out;
        if steps < self.tail_bits() + 1 {
            return Err(Error::Argument(format!(
                "frame of {steps} branches is shorter than one bit plus the tail"
            )));
        }
        let message_len = steps - self.tail_bits();
        let states = 1usize << (self.constraint - 1);

        let mut metric = vec![f64::NEG_INFINITY; states];
        metric[0] = 0.0;
        let mut next_metric = vec![f64::NEG_INFINITY; states];
        // survivor[t][next_state] = (previous state, input bit)
        let mut survivor: Vec<Vec<(u32, u8)>> = Vec::with_capacity(steps);

        for t in 0..steps {
            let branch = &llrs[t * n_out..(t + 1) * n_out];
            let in_tail = t >= message_len;
            next_metric.iter_mut().for_each(|m| *m = f64::NEG_INFINITY);
            let mut choice = vec![(0u32, 0u8); states];
            for state in 0..states as u32 {
                let base = metric[state as usize];
                if base == f64::NEG_INFINITY {
                    continue;
                }
                let bits: &[u32] = if in_tail { &[0] } else { &[0, 1] };
                for &b in bits {
                    let (next, symbols) = self.step(state, b);
                    let mut m = base;
                    for (j, c) in symbols.enumerate() {
                        m += if c == 0 { branch[j] } else { -branch[j] };
                    }
                    let slot = next as usize;
                    if m > next_metric[slot] {
                        next_metric[slot] = m;
                        choice[slot] = (state, b as u8);
                    }
                }
            }
            std::mem::swap(&mut metric, &mut next_metric);
            survivor.push(choice);
        }

        if metric[0] == f64::NEG_INFINITY {
            return Err(Error::Numerical(
                "no surviving path terminates the trellis".into(),
            ));
        }
        let mut state = 0u32;
        let mut decoded = vec![0u8; steps];
        for t in (0..steps).rev() {
            let (prev, bit) = survivor[t][state as usize];
            decoded[t] = bit;
            state = prev;
        }
        decoded.truncate(message_len);
        Ok(decoded)
    }
}

/// Seeded uniform random permutation applied to coded bits (and inverted on
/// the corresponding LLRs before decoding).
#[derive(Clone, Debug)]
pub struct Interleaver {
    /// `output[i] = input[source[i]]`.
    source: Vec<usize>,
}

impl Interleaver {
    /// Draws the permutation from the dedicated interleaver stream of the
    /// given master seed, so it is shared by transmitter and receiver.
    pub fn random(len: usize, master_seed: u64) -> Self {
        use rand::seq::SliceRandom;
        let mut stream = RngStream::new(master_seed, STREAM_INTERLEAVER);
        let mut source: Vec<usize> = (0..len).collect();
        source.shuffle(&mut stream);
        Self { source }
    }

    pub fn len(&self) -> usize {
        self.source.len()
    }

    pub fn is_empty(&self) -> bool {
        self.source.is_empty()
    }

    /// Permutes a full frame.
    pub fn apply<T: Copy>(&self, data: &[T]) -> Result<Vec<T>> {
        if data.len() != self.source.len() {
            return Err(Error::Argument(format!(
                "frame of {} values does not match interleaver length {}",
                data.len(),
                self.source.len()
            )));
        }
        Ok(self.source.iter().map(|&i| data[i]).collect())
    }

    /// Undoes [`Interleaver::apply`].
    pub fn invert<T: Copy + Default>(&self, data: &[T]) -> Result<Vec<T>> {
        if data.len() != self.source.len() {
            return Err(Error::Argument(format!(
                "frame of {} values does not match interleaver length {}",
                data.len(),
                self.source.len()
            )));
        }
        let mut out = vec![T::default(); data.len()];
        for (i, &src) in self.source.iter().enumerate() {
            out[src] = data[i];
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::RngCore;

    fn strong_llrs(bits: &[u8]) -> Vec<f64> {
        bits.iter().map(|&b| if b == 0 { 20.0 } else { -20.0 }).collect()
    }

    #[test]
    fn all_zero_message_encodes_to_all_zeros() {
        let code = ConvolutionalCode::rate_half_k7();
        let coded = code.encode(&[0; 32]).unwrap();
        assert_eq!(coded.len(), (32 + 6) * 2);
        assert!(coded.iter().all(|&b| b == 0));
    }

    #[test]
    fn impulse_response_reads_out_the_generators() {
        // A single 1 followed by the tail shifts through the register, so
        // step t emits bit (constraint−1−t) of each generator.
        let code = ConvolutionalCode::rate_half_k7();
        let coded = code.encode(&[1]).unwrap();
        assert_eq!(coded.len(), 14);
        for t in 0..7 {
            let shift = 6 - t;
            assert_eq!(coded[2 * t], ((0o133 >> shift) & 1) as u8);
            assert_eq!(coded[2 * t + 1], ((0o171 >> shift) & 1) as u8);
        }
    }

    #[test]
    fn encoding_is_linear_over_xor() {
        let code = ConvolutionalCode::rate_half_k7();
        let mut rng = RngStream::new(41, 0);
        let a: Vec<u8> = (0..40).map(|_| (rng.next_u32() & 1) as u8).collect();
        let b: Vec<u8> = (0..40).map(|_| (rng.next_u32() & 1) as u8).collect();
        let xor: Vec<u8> = a.iter().zip(&b).map(|(x, y)| x ^ y).collect();
        let ca = code.encode(&a).unwrap();
        let cb = code.encode(&b).unwrap();
        let cx = code.encode(&xor).unwrap();
        for i in 0..ca.len() {
            assert_eq!(ca[i] ^ cb[i], cx[i]);
        }
    }

    #[test]
    fn clean_loopback_recovers_the_message() {
        let code = ConvolutionalCode::rate_half_k7();
        let mut rng = RngStream::new(42, 0);
        let message: Vec<u8> = (0..128).map(|_| (rng.next_u32() & 1) as u8).collect();
        let coded = code.encode(&message).unwrap();
        let decoded = code.decode_soft(&strong_llrs(&coded)).unwrap();
        assert_eq!(decoded, message);
    }

    #[test]
    fn decoding_survives_moderate_llr_noise() {
        use rand_distr::{Distribution, Normal};
        let code = ConvolutionalCode::rate_half_k7();
        let mut rng = RngStream::new(43, 0);
        let message: Vec<u8> = (0..128).map(|_| (rng.next_u32() & 1) as u8).collect();
        let coded = code.encode(&message).unwrap();
        // BPSK over AWGN at ~2 dB: LLR = 2y/σ² around ±2/σ².
        let sigma2: f64 = 0.63;
        let normal = Normal::new(0.0, sigma2.sqrt()).unwrap();
        let llrs: Vec<f64> = coded
            .iter()
            .map(|&b| {
                let y = (1.0 - 2.0 * b as f64) + normal.sample(&mut rng);
                2.0 * y / sigma2
            })
            .collect();
        let decoded = code.decode_soft(&llrs).unwrap();
        let errors = decoded
            .iter()
            .zip(&message)
            .filter(|(a, b)| a != b)
            .count();
        assert_eq!(errors, 0, "{errors} residual errors after decoding");
    }

    #[test]
    fn single_flipped_llr_is_corrected() {
        let code = ConvolutionalCode::rate_half_k7();
        let message: Vec<u8> = vec![1, 0, 1, 1, 0, 0, 1, 0, 1, 1, 1, 0];
        let coded = code.encode(&message).unwrap();
        for flip in [0usize, 5, 11, coded.len() - 1] {
            let mut llrs = strong_llrs(&coded);
            llrs[flip] = -llrs[flip];
            let decoded = code.decode_soft(&llrs).unwrap();
            assert_eq!(decoded, message, "flip at {flip} not corrected");
        }
    }

    #[test]
    fn frame_length_is_validated() {
        let code = ConvolutionalCode::rate_half_k7();
        assert!(code.decode_soft(&[0.0; 13]).is_err());
        assert!(code.decode_soft(&[0.0; 12]).is_err());
        assert!(code.encode(&[0, 1, 2]).is_err());
        assert!(ConvolutionalCode::new(7, vec![0o400]).is_err());
        assert!(ConvolutionalCode::new(1, vec![0o3]).is_err());
    }

    #[test]
    fn interleaver_round_trips_and_permutes() {
        let il = Interleaver::random(268, 9);
        let data: Vec<f64> = (0..268).map(|i| i as f64).collect();
        let mixed = il.apply(&data).unwrap();
        assert_ne!(mixed, data, "permutation of this length should move bits");
        let back = il.invert(&mixed).unwrap();
        assert_eq!(back, data);
        let mut sorted = mixed.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(sorted, data);
    }

    #[test]
    fn interleaver_is_seed_deterministic() {
        let a = Interleaver::random(100, 5);
        let b = Interleaver::random(100, 5);
        let c = Interleaver::random(100, 6);
        let data: Vec<u32> = (0..100).collect();
        assert_eq!(a.apply(&data).unwrap(), b.apply(&data).unwrap());
        assert_ne!(a.apply(&data).unwrap(), c.apply(&data).unwrap());
    }
}
