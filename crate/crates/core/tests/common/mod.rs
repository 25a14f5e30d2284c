//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub const K: usize = 6;

/// Plain shift-register (7,5) RSC: feedback 1+D+D^2, feedforward 1+D^2.
pub struct Rsc75 {
    s1: u8,
    s2: u8,
}

impl Rsc75 {
    pub fn new() -> Self {
        Self { s1: 0, s2: 0 }
    }

    pub fn step(&mut self, u: u8) -> u8 {
        let w = u ^ self.s1 ^ self.s2;
        let p = w ^ self.s2;
        self.s2 = self.s1;
        self.s1 = w;
        p
    }

    /// Input that drives the feedback to zero.
    pub fn flush_input(&self) -> u8 {
        self.s1 ^ self.s2
    }
}

pub struct Word {
    pub bits: Vec<u8>,
    pub parity: Vec<u8>,
    pub tail_sys: Vec<u8>,
    pub tail_par: Vec<u8>,
}

pub fn encode(bits: &[u8]) -> Word {
    let mut reg = Rsc75::new();
    let parity = bits.iter().map(|&u| reg.step(u)).collect();
    let mut tail_sys = Vec::new();
    let mut tail_par = Vec::new();
    for _ in 0..2 {
        let u = reg.flush_input();
        tail_sys.push(u);
        tail_par.push(reg.step(u));
    }
    assert_eq!((reg.s1, reg.s2), (0, 0));
    Word {
        bits: bits.to_vec(),
        parity,
        tail_sys,
        tail_par,
    }
}

pub fn pm(b: u8) -> f64 {
    1.0 - 2.0 * b as f64
}

pub fn logsumexp(v: &[f64]) -> f64 {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

pub struct Inputs {
    pub sys: Vec<f64>,
    pub par: Vec<f64>,
    pub apriori: Vec<f64>,
    pub tail_sys: Vec<f64>,
    pub tail_par: Vec<f64>,
}

/// Exact a-posteriori LLRs by enumerating all `2^K` information words.
pub fn brute_force_app(x: &Inputs, terminated: bool) -> Vec<f64> {
    let words: Vec<Word> = (0..1u32 << K)
        .map(|m| encode(&(0..K).map(|i| ((m >> i) & 1) as u8).collect::<Vec<_>>()))
        .collect();
    let metric = |w: &Word| {
        let mut s = 0.0;
        for n in 0..K {
            s += 0.5 * pm(w.bits[n]) * (x.sys[n] + x.apriori[n]) + 0.5 * pm(w.parity[n]) * x.par[n];
        }
        if terminated {
            for j in 0..2 {
                s += 0.5 * pm(w.tail_sys[j]) * x.tail_sys[j]
                    + 0.5 * pm(w.tail_par[j]) * x.tail_par[j];
            }
        }
        s
    };
    let metrics: Vec<f64> = words.iter().map(metric).collect();
    (0..K)
        .map(|n| {
            let pick = |b: u8| -> Vec<f64> {
                words
                    .iter()
                    .zip(&metrics)
                    .filter(|(w, _)| w.bits[n] == b)
                    .map(|(_, &m)| m)
                    .collect()
            };
            logsumexp(&pick(0)) - logsumexp(&pick(1))
        })
        .collect()
}

pub fn random_inputs(rng: &mut ChaCha8Rng, scale: f64) -> Inputs {
    let mut v =
        |n: usize| -> Vec<f64> { (0..n).map(|_| rng.random_range(-scale..scale)).collect() };
    Inputs {
        sys: v(K),
        par: v(K),
        apriori: v(K),
        tail_sys: v(2),
        tail_par: v(2),
    }
}
