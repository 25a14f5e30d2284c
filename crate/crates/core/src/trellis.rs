//! Recursive systematic convolutional (RSC) trellis, random interleaving and
//! rate-1/2 PCCC encoding with alternating parity puncturing.
//!
//! Generator polynomials are given in octal with the most significant bit
//! holding the `D^0` coefficient, so `7 = 1 + D + D^2` and `5 = 1 + D^2`.
//! A state packs the register contents `w[k-1] .. w[k-m]` with `w[k-1]` in the
//! most significant position; for the (7,5) code state `0b10` means the most
//! recent register bit is 1.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, config_err, Error, Result};

/// How the constituent encoders are terminated.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    /// Both encoders are left open.
    None,
    /// Encoder 1 is driven to the zero state with `memory` tail steps;
    /// encoder 2 is left open.
    #[default]
    TerminateFirst,
}

/// Constituent RSC code parameters.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodeSpec {
    /// Recursive (feedback) polynomial, octal.
    #[serde(with = "octal")]
    pub feedback_poly: u32,
    /// Parity (feedforward) polynomial, octal.
    #[serde(with = "octal")]
    pub feedforward_poly: u32,
    /// Constraint length minus one.
    pub memory: usize,
    #[serde(default)]
    pub termination: Termination,
}

impl CodeSpec {
    /// The memory-2 (7,5) code: feedback `1 + D + D^2`, parity `1 + D^2`.
    pub const RSC_7_5: CodeSpec = CodeSpec {
        feedback_poly: 0o7,
        feedforward_poly: 0o5,
        memory: 2,
        termination: Termination::TerminateFirst,
    };

    pub fn validate(&self) -> Result<()> {
        if self.memory == 0 || self.memory > 16 {
            return config_err(format!("memory must be in 1..=16, got {}", self.memory));
        }
        let limit = 1u32 << (self.memory + 1);
        if self.feedback_poly >= limit || self.feedforward_poly >= limit {
            return config_err(format!(
                "polynomials {:o}/{:o} exceed memory {}",
                self.feedback_poly, self.feedforward_poly, self.memory
            ));
        }
        if self.tap(self.feedback_poly, 0) == 0 {
            return config_err(format!(
                "feedback polynomial {:o} has no degree-0 tap",
                self.feedback_poly
            ));
        }
        Ok(())
    }

    /// Coefficient of `D^degree` in `poly`.
    fn tap(&self, poly: u32, degree: usize) -> u8 {
        ((poly >> (self.memory - degree)) & 1) as u8
    }

    /// Number of tail steps appended to encoder 1.
    pub fn tail_len(&self) -> usize {
        match self.termination {
            Termination::None => 0,
            Termination::TerminateFirst => self.memory,
        }
    }
}

/// State-transition tables of an RSC code.
#[derive(Clone, Debug)]
pub struct Trellis {
    pub memory: usize,
    pub num_states: usize,
    /// `next_state[s][u]`
    pub next_state: Vec<[usize; 2]>,
    /// `output_parity[s][u]`
    pub output_parity: Vec<[u8; 2]>,
    /// The two `(prev_state, input)` pairs entering each state.
    pub prev_transitions: Vec<[(usize, u8); 2]>,
    /// Input that drives the register toward zero (feedback cancelled).
    pub tail_input: Vec<u8>,
}

/// Builds the trellis of the RSC encoder `(u, u * G2(D) / G1(D))`.
pub fn build_trellis(spec: &CodeSpec) -> Result<Trellis> {
    spec.validate()?;
    let m = spec.memory;
    let num_states = 1usize << m;
    let mut next_state = vec![[0usize; 2]; num_states];
    let mut output_parity = vec![[0u8; 2]; num_states];
    let mut tail_input = vec![0u8; num_states];
    let mut incoming: Vec<Vec<(usize, u8)>> = vec![Vec::with_capacity(2); num_states];

    for s in 0..num_states {
        let reg = |i: usize| ((s >> (m - i)) & 1) as u8;
        let mut fb = 0u8;
        let mut ff = 0u8;
        for i in 1..=m {
            fb ^= spec.tap(spec.feedback_poly, i) & reg(i);
            ff ^= spec.tap(spec.feedforward_poly, i) & reg(i);
        }
        tail_input[s] = fb;
        for u in 0..2u8 {
            let w = u ^ fb;
            let parity = (spec.tap(spec.feedforward_poly, 0) & w) ^ ff;
            let next = ((w as usize) << (m - 1)) | (s >> 1);
            next_state[s][u as usize] = next;
            output_parity[s][u as usize] = parity;
            incoming[next].push((s, u));
        }
    }

    let mut prev_transitions = Vec::with_capacity(num_states);
    for (state, list) in incoming.into_iter().enumerate() {
        match list.as_slice() {
            [a, b] => prev_transitions.push([*a, *b]),
            _ => {
                return config_err(format!(
                    "state {state} has {} predecessors, expected 2",
                    list.len()
                ))
            }
        }
    }

    Ok(Trellis {
        memory: m,
        num_states,
        next_state,
        output_parity,
        prev_transitions,
        tail_input,
    })
}

/// Output of one constituent encoder.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RscOutput {
    pub parity: Vec<u8>,
    /// Tail systematic bits (empty when not terminated).
    pub tail_systematic: Vec<u8>,
    /// Tail parity bits (empty when not terminated).
    pub tail_parity: Vec<u8>,
    pub end_state: usize,
}

/// Encodes `info` from the zero state, optionally appending the termination tail.
pub fn rsc_encode(trellis: &Trellis, info: &[u8], terminate: bool) -> RscOutput {
    let mut state = 0usize;
    let mut parity = Vec::with_capacity(info.len());
    for &u in info {
        let u = (u & 1) as usize;
        parity.push(trellis.output_parity[state][u]);
        state = trellis.next_state[state][u];
    }
    let mut tail_systematic = Vec::new();
    let mut tail_parity = Vec::new();
    if terminate {
        for _ in 0..trellis.memory {
            let u = trellis.tail_input[state];
            tail_systematic.push(u);
            tail_parity.push(trellis.output_parity[state][u as usize]);
            state = trellis.next_state[state][u as usize];
        }
    }
    RscOutput {
        parity,
        tail_systematic,
        tail_parity,
        end_state: state,
    }
}

/// An interleaver: `interleaved[i] = natural[indices[i]]`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Permutation {
    pub indices: Vec<usize>,
    pub seed: u64,
}

impl Permutation {
    /// Seeded uniformly random permutation (Fisher-Yates over ChaCha8).
    pub fn random(n: usize, seed: u64) -> Result<Self> {
        if n < 2 {
            return config_err(format!("interleaver length must be >= 2, got {n}"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut indices: Vec<usize> = (0..n).collect();
        indices.shuffle(&mut rng);
        Ok(Self { indices, seed })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            indices: (0..n).collect(),
            seed: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn inverse(&self) -> Self {
        let mut inv = vec![0; self.len()];
        for (i, &j) in self.indices.iter().enumerate() {
            inv[j] = i;
        }
        Self {
            indices: inv,
            seed: self.seed,
        }
    }

    pub fn interleave<T: Copy>(&self, natural: &[T]) -> Vec<T> {
        self.indices.iter().map(|&j| natural[j]).collect()
    }

    /// Writes the interleaved `src` into `dst` without allocating.
    pub fn interleave_into<T: Copy>(&self, src: &[T], dst: &mut [T]) {
        for (d, &j) in dst.iter_mut().zip(&self.indices) {
            *d = src[j];
        }
    }

    pub fn deinterleave<T: Copy + Default>(&self, interleaved: &[T]) -> Vec<T> {
        let mut out = vec![T::default(); interleaved.len()];
        self.deinterleave_into(interleaved, &mut out);
        out
    }

    pub fn deinterleave_into<T: Copy>(&self, src: &[T], dst: &mut [T]) {
        for (&v, &j) in src.iter().zip(&self.indices) {
            dst[j] = v;
        }
    }
}

/// Seeded random interleaver of length `n`.
pub fn generate_interleaver(n: usize, seed: u64) -> Result<Permutation> {
    Permutation::random(n, seed)
}

/// Encoder 1 keeps its parity at odd positions, encoder 2 at even positions
/// (0-based), so each information bit carries exactly one parity bit.
#[inline]
fn keeps_first_parity(n: usize) -> bool {
    n % 2 == 1
}

/// A rate-1/2 PCCC codeword.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CodedFrame {
    pub info_bits: Vec<u8>,
    pub systematic: Vec<u8>,
    /// Encoder-1 parity at odd positions.
    pub parity1: Vec<u8>,
    /// Encoder-2 parity at even positions.
    pub parity2: Vec<u8>,
    /// Encoder-1 tail (systematic, parity), transmitted unpunctured.
    pub tail_systematic: Vec<u8>,
    pub tail_parity: Vec<u8>,
}

impl CodedFrame {
    pub fn layout(&self) -> FrameLayout {
        FrameLayout {
            info_len: self.info_bits.len(),
            tail_len: self.tail_systematic.len(),
        }
    }

    /// Serialises the codeword in transmission order: for every position `n`
    /// the systematic bit followed by its surviving parity bit, then the
    /// tail as (systematic, parity) pairs.
    pub fn transmitted_bits(&self) -> Vec<u8> {
        let k = self.info_bits.len();
        let mut out = Vec::with_capacity(self.layout().transmitted_len());
        let (mut p1, mut p2) = (self.parity1.iter(), self.parity2.iter());
        for n in 0..k {
            out.push(self.systematic[n]);
            let p = if keeps_first_parity(n) {
                p1.next()
            } else {
                p2.next()
            };
            out.push(*p.expect("parity streams sized by construction"));
        }
        for (&s, &p) in self.tail_systematic.iter().zip(&self.tail_parity) {
            out.push(s);
            out.push(p);
        }
        out
    }
}

/// Shape of a transmitted frame, enough to undo puncturing.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FrameLayout {
    pub info_len: usize,
    pub tail_len: usize,
}

/// Per-stream channel LLRs after depuncturing. Punctured positions hold 0.
#[derive(Clone, Debug, PartialEq)]
pub struct StreamLlrs {
    pub systematic: Vec<f64>,
    pub parity1: Vec<f64>,
    pub parity2: Vec<f64>,
    pub tail_systematic: Vec<f64>,
    pub tail_parity: Vec<f64>,
}

impl FrameLayout {
    pub fn transmitted_len(&self) -> usize {
        2 * self.info_len + 2 * self.tail_len
    }

    /// Effective code rate including the termination overhead.
    pub fn code_rate(&self) -> f64 {
        self.info_len as f64 / self.transmitted_len() as f64
    }

    /// Splits received LLRs into streams, filling punctured parity with 0.
    pub fn depuncture(&self, channel_llrs: &[f64]) -> Result<StreamLlrs> {
        let expected = self.transmitted_len();
        if channel_llrs.len() != expected {
            return Err(Error::Framing {
                expected,
                actual: channel_llrs.len(),
            });
        }
        let k = self.info_len;
        let mut systematic = vec![0.0; k];
        let mut parity1 = vec![0.0; k];
        let mut parity2 = vec![0.0; k];
        for n in 0..k {
            systematic[n] = channel_llrs[2 * n];
            let p = channel_llrs[2 * n + 1];
            if keeps_first_parity(n) {
                parity1[n] = p;
            } else {
                parity2[n] = p;
            }
        }
        let tail = &channel_llrs[2 * k..];
        let tail_systematic = tail.iter().step_by(2).copied().collect();
        let tail_parity = tail.iter().skip(1).step_by(2).copied().collect();
        Ok(StreamLlrs {
            systematic,
            parity1,
            parity2,
            tail_systematic,
            tail_parity,
        })
    }
}

/// Turbo encoder: two identical RSC encoders joined by an interleaver.
#[derive(Clone, Debug)]
pub struct PcccEncoder {
    spec: CodeSpec,
    trellis: Trellis,
}

impl PcccEncoder {
    pub fn new(spec: CodeSpec) -> Result<Self> {
        let trellis = build_trellis(&spec)?;
        Ok(Self { spec, trellis })
    }

    pub fn spec(&self) -> &CodeSpec {
        &self.spec
    }

    pub fn trellis(&self) -> &Trellis {
        &self.trellis
    }

    pub fn layout(&self, info_len: usize) -> FrameLayout {
        FrameLayout {
            info_len,
            tail_len: self.spec.tail_len(),
        }
    }

    pub fn encode(&self, perm: &Permutation, info: &[u8]) -> Result<CodedFrame> {
        check_len(info.len(), perm.len())?;
        let terminate = self.spec.termination == Termination::TerminateFirst;
        let enc1 = rsc_encode(&self.trellis, info, terminate);
        let enc2 = rsc_encode(&self.trellis, &perm.interleave(info), false);
        let parity1 = (0..info.len())
            .filter(|&n| keeps_first_parity(n))
            .map(|n| enc1.parity[n])
            .collect();
        let parity2 = (0..info.len())
            .filter(|&n| !keeps_first_parity(n))
            .map(|n| enc2.parity[n])
            .collect();
        Ok(CodedFrame {
            info_bits: info.to_vec(),
            systematic: info.to_vec(),
            parity1,
            parity2,
            tail_systematic: enc1.tail_systematic,
            tail_parity: enc1.tail_parity,
        })
    }
}

pub fn pccc_encode(spec: &CodeSpec, perm: &Permutation, info: &[u8]) -> Result<CodedFrame> {
    PcccEncoder::new(*spec)?.encode(perm, info)
}

mod octal {
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &u32, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format!("{v:o}"))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<u32, D::Error> {
        let raw = String::deserialize(d)?;
        let digits = raw.trim_start_matches("0o");
        u32::from_str_radix(digits, 8)
            .map_err(|_| de::Error::custom(format!("`{raw}` is not an octal polynomial")))
    }
}
