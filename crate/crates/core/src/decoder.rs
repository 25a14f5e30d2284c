//! Log-MAP (BCJR) constituent decoding and the iterative turbo loop.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{check_len, config_err, Error, Result};
use crate::hard_decisions;
use crate::metrics::IterationObservation;
use crate::rules::{StopReason, StoppingRule};
use crate::trellis::{Permutation, StreamLlrs, Trellis};

/// Extrinsic LLRs are clamped to this magnitude.
pub const LLR_CLAMP: f64 = 50.0;

/// Default correction table spacing.
pub const DEFAULT_LUT_STEP: f64 = 0.0625;
/// Default correction table extent; the correction is 0 beyond it.
pub const DEFAULT_LUT_RANGE: f64 = 8.0;

/// `ln(1 + e^-|x|)`, the Jacobian-logarithm correction term.
#[inline]
pub fn log1p_exp_neg(x: f64) -> f64 {
    (-x.abs()).exp().ln_1p()
}

/// Tabulated `ln(1 + e^-x)` on `[0, range)` with nearest-entry lookup.
#[derive(Clone, Debug, PartialEq)]
pub struct CorrectionLut {
    step: f64,
    range: f64,
    table: Vec<f64>,
}

impl CorrectionLut {
    pub fn new(step: f64, range: f64) -> Result<Self> {
        if !(step > 0.0 && step.is_finite() && range > 0.0 && range.is_finite()) {
            return config_err(format!("invalid LUT step {step} / range {range}"));
        }
        let len = (range / step).ceil() as usize;
        let table = (0..len).map(|i| log1p_exp_neg(i as f64 * step)).collect();
        Ok(Self { step, range, table })
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn range(&self) -> f64 {
        self.range
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }

    /// Looks up the correction for `|x|`; saturates to 0 at and beyond `range`.
    #[inline]
    pub fn lookup(&self, x: f64) -> f64 {
        let x = x.abs();
        if x >= self.range || x.is_nan() {
            return 0.0;
        }
        let idx = ((x / self.step).round() as usize).min(self.table.len() - 1);
        self.table[idx]
    }
}

impl Default for CorrectionLut {
    fn default() -> Self {
        Self::new(DEFAULT_LUT_STEP, DEFAULT_LUT_RANGE).expect("default LUT parameters are valid")
    }
}

pub fn build_correction_lut(step: f64, range: f64) -> Result<CorrectionLut> {
    CorrectionLut::new(step, range)
}

/// Serialisable choice of max* correction.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum MaxStarMode {
    #[default]
    Exact,
    Lut {
        #[serde(default = "default_lut_step")]
        lut_step: f64,
        #[serde(default = "default_lut_range")]
        lut_range: f64,
    },
}

fn default_lut_step() -> f64 {
    DEFAULT_LUT_STEP
}

fn default_lut_range() -> f64 {
    DEFAULT_LUT_RANGE
}

/// The max* operator, ready to evaluate.
#[derive(Clone, Debug, Default, PartialEq)]
pub enum MaxStar {
    #[default]
    Exact,
    Lut(CorrectionLut),
}

impl MaxStar {
    pub fn from_mode(mode: &MaxStarMode) -> Result<Self> {
        Ok(match *mode {
            MaxStarMode::Exact => MaxStar::Exact,
            MaxStarMode::Lut {
                lut_step,
                lut_range,
            } => MaxStar::Lut(CorrectionLut::new(lut_step, lut_range)?),
        })
    }

    /// Correction term `ln(1 + e^-|d|)`, exact or tabulated.
    #[inline]
    pub fn correction(&self, d: f64) -> f64 {
        match self {
            MaxStar::Exact => log1p_exp_neg(d),
            MaxStar::Lut(lut) => lut.lookup(d),
        }
    }

    /// `ln(e^a + e^b)`. Either argument may be `-inf` (an unreachable state).
    #[inline]
    pub fn apply(&self, a: f64, b: f64) -> f64 {
        let (hi, lo) = if a > b { (a, b) } else { (b, a) };
        if lo == f64::NEG_INFINITY {
            return hi;
        }
        hi + self.correction(hi - lo)
    }
}

pub fn max_star(a: f64, b: f64, mode: &MaxStar) -> f64 {
    mode.apply(a, b)
}

/// Output of one constituent decode.
#[derive(Clone, Debug, PartialEq)]
pub struct SisoOutput {
    pub extrinsic: Vec<f64>,
    pub app: Vec<f64>,
}

/// Channel LLRs of the termination tail.
#[derive(Clone, Copy, Debug)]
pub struct Tail<'a> {
    pub systematic: &'a [f64],
    pub parity: &'a [f64],
}

#[inline]
fn antipodal(bit: u8) -> f64 {
    if bit == 0 {
        1.0
    } else {
        -1.0
    }
}

fn ensure_finite(name: &str, v: &[f64]) -> Result<()> {
    match v.iter().position(|x| !x.is_finite()) {
        Some(i) => Err(Error::Numeric(format!("{name}[{i}] = {}", v[i]))),
        None => Ok(()),
    }
}

/// Forward-backward Log-MAP decoding of one RSC constituent code.
///
/// With `tail` present the trellis is forced into the zero state after the
/// tail steps; otherwise the final state is left open (uniform beta).
pub fn bcjr_decode(
    trellis: &Trellis,
    sys: &[f64],
    par: &[f64],
    apriori: &[f64],
    tail: Option<Tail<'_>>,
    max_star: &MaxStar,
) -> Result<SisoOutput> {
    let k = sys.len();
    check_len(par.len(), k)?;
    check_len(apriori.len(), k)?;
    ensure_finite("systematic", sys)?;
    ensure_finite("parity", par)?;
    ensure_finite("apriori", apriori)?;
    let tail_len = match tail {
        Some(t) => {
            check_len(t.systematic.len(), trellis.memory)?;
            check_len(t.parity.len(), trellis.memory)?;
            ensure_finite("tail systematic", t.systematic)?;
            ensure_finite("tail parity", t.parity)?;
            trellis.memory
        }
        None => 0,
    };

    let ns = trellis.num_states;
    let stages = k + tail_len;
    let neg = f64::NEG_INFINITY;

    let gamma_info = |n: usize, s: usize, u: usize| -> f64 {
        let p = trellis.output_parity[s][u];
        0.5 * (antipodal(u as u8) * (apriori[n] + sys[n]) + antipodal(p) * par[n])
    };
    let gamma_tail = |j: usize, s: usize| -> (usize, f64) {
        let t = tail.expect("tail stages only exist with a tail");
        let u = trellis.tail_input[s];
        let p = trellis.output_parity[s][u as usize];
        let g = 0.5 * (antipodal(u) * t.systematic[j] + antipodal(p) * t.parity[j]);
        (u as usize, g)
    };

    let normalize = |v: &mut [f64]| {
        let m = v.iter().copied().fold(neg, f64::max);
        if m.is_finite() {
            v.iter_mut().for_each(|x| *x -= m);
        }
    };

    // alpha[n * ns + s]: log-probability of being in state s before stage n
    let mut alpha = vec![neg; (stages + 1) * ns];
    alpha[0] = 0.0;
    for n in 0..stages {
        let (cur, next) = alpha[n * ns..(n + 2) * ns].split_at_mut(ns);
        for s in 0..ns {
            let a = cur[s];
            if a == neg {
                continue;
            }
            if n < k {
                for u in 0..2 {
                    let to = trellis.next_state[s][u];
                    next[to] = max_star.apply(next[to], a + gamma_info(n, s, u));
                }
            } else {
                let (u, g) = gamma_tail(n - k, s);
                let to = trellis.next_state[s][u];
                next[to] = max_star.apply(next[to], a + g);
            }
        }
        normalize(next);
    }

    let mut beta = vec![neg; (stages + 1) * ns];
    {
        let end = &mut beta[stages * ns..];
        if tail_len > 0 {
            end[0] = 0.0;
        } else {
            end.iter_mut().for_each(|b| *b = 0.0);
        }
    }
    for n in (0..stages).rev() {
        let (cur, next) = beta[n * ns..(n + 2) * ns].split_at_mut(ns);
        for s in 0..ns {
            let mut acc = neg;
            if n < k {
                for u in 0..2 {
                    let to = trellis.next_state[s][u];
                    acc = max_star.apply(acc, next[to] + gamma_info(n, s, u));
                }
            } else {
                let (u, g) = gamma_tail(n - k, s);
                let to = trellis.next_state[s][u];
                acc = max_star.apply(acc, next[to] + g);
            }
            cur[s] = acc;
        }
        normalize(cur);
    }

    let mut app = Vec::with_capacity(k);
    let mut extrinsic = Vec::with_capacity(k);
    for n in 0..k {
        let mut num = [neg; 2];
        for s in 0..ns {
            let a = alpha[n * ns + s];
            if a == neg {
                continue;
            }
            for u in 0..2 {
                let to = trellis.next_state[s][u];
                let metric = a + gamma_info(n, s, u) + beta[(n + 1) * ns + to];
                num[u] = max_star.apply(num[u], metric);
            }
        }
        let l_app = num[0] - num[1];
        let raw_ext = l_app - sys[n] - apriori[n];
        if raw_ext.abs() <= LLR_CLAMP {
            extrinsic.push(raw_ext);
            app.push(l_app);
        } else {
            let ext = raw_ext.clamp(-LLR_CLAMP, LLR_CLAMP);
            extrinsic.push(ext);
            app.push(sys[n] + apriori[n] + ext);
        }
    }
    Ok(SisoOutput { extrinsic, app })
}

/// Channel inputs and working LLR state of one turbo-decoded block.
///
/// Everything is in natural (information) order except `channel_par2`,
/// which holds encoder-2 parity in interleaved order as it was produced.
#[derive(Clone, Debug, PartialEq)]
pub struct LlrFrame {
    pub channel_sys: Vec<f64>,
    pub channel_par1: Vec<f64>,
    pub channel_par2: Vec<f64>,
    pub tail_sys: Vec<f64>,
    pub tail_par: Vec<f64>,
    /// Decoder-1 a-priori input of the latest iteration.
    pub apriori: Vec<f64>,
    pub extrinsic1: Vec<f64>,
    pub extrinsic2: Vec<f64>,
    pub app1: Vec<f64>,
    pub app2: Vec<f64>,
}

impl LlrFrame {
    pub fn new(streams: StreamLlrs) -> Result<Self> {
        let k = streams.systematic.len();
        check_len(streams.parity1.len(), k)?;
        check_len(streams.parity2.len(), k)?;
        check_len(streams.tail_systematic.len(), streams.tail_parity.len())?;
        Ok(Self {
            channel_sys: streams.systematic,
            channel_par1: streams.parity1,
            channel_par2: streams.parity2,
            tail_sys: streams.tail_systematic,
            tail_par: streams.tail_parity,
            apriori: vec![0.0; k],
            extrinsic1: vec![0.0; k],
            extrinsic2: vec![0.0; k],
            app1: vec![0.0; k],
            app2: vec![0.0; k],
        })
    }

    pub fn len(&self) -> usize {
        self.channel_sys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.channel_sys.is_empty()
    }
}

/// Why the turbo loop ended.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecodeStop {
    Rule,
    MaxIters,
}

#[derive(Clone, Debug)]
pub struct DecodeResult {
    pub decisions: Vec<u8>,
    /// Whole iterations, or `t - 0.5` when a rule stopped after decoder 1.
    pub iterations_used: f64,
    pub stop_reason: DecodeStop,
    pub rule_reason: StopReason,
    pub trace: Vec<IterationObservation>,
}

/// Side information attached to every observation.
#[derive(Clone, Debug, Default)]
pub struct ObservationContext {
    pub snr_db: f64,
    /// Transmitted information bits, for the genie rule only.
    pub true_bits: Option<Arc<[u8]>>,
}

/// Iterative decoder for a two-component PCCC.
#[derive(Clone, Debug)]
pub struct TurboDecoder {
    trellis: Trellis,
    perm: Permutation,
    max_iterations: u32,
    max_star: MaxStar,
}

impl TurboDecoder {
    pub fn new(
        trellis: Trellis,
        perm: Permutation,
        max_iterations: u32,
        max_star: MaxStar,
    ) -> Result<Self> {
        if max_iterations == 0 {
            return config_err("max_iterations must be >= 1");
        }
        Ok(Self {
            trellis,
            perm,
            max_iterations,
            max_star,
        })
    }

    pub fn max_iterations(&self) -> u32 {
        self.max_iterations
    }

    pub fn permutation(&self) -> &Permutation {
        &self.perm
    }

    /// Runs full iterations until `rule` fires or the iteration cap is hit.
    ///
    /// Each iteration runs decoder 1 on the deinterleaved decoder-2
    /// extrinsic, then decoder 2 on the interleaved decoder-1 extrinsic, and
    /// offers the resulting observation to `rule`.
    pub fn decode(
        &self,
        frame: &mut LlrFrame,
        rule: &mut dyn StoppingRule,
        ctx: &ObservationContext,
    ) -> Result<DecodeResult> {
        let k = frame.len();
        check_len(k, self.perm.len())?;
        check_len(frame.channel_par1.len(), k)?;
        check_len(frame.channel_par2.len(), k)?;
        let tail = if frame.tail_sys.is_empty() {
            None
        } else {
            Some(Tail {
                systematic: &frame.tail_sys,
                parity: &frame.tail_par,
            })
        };
        if let Some(bits) = &ctx.true_bits {
            check_len(bits.len(), k)?;
        }

        let sys_interleaved = self.perm.interleave(&frame.channel_sys);
        let mut apriori2 = vec![0.0; k];
        let mut ext2_nat = vec![0.0; k];
        let mut app2_nat = vec![0.0; k];
        let mut trace = Vec::with_capacity(self.max_iterations as usize);

        for iter in 1..=self.max_iterations {
            frame.apriori.copy_from_slice(&ext2_nat);
            let dec1 = bcjr_decode(
                &self.trellis,
                &frame.channel_sys,
                &frame.channel_par1,
                &frame.apriori,
                tail,
                &self.max_star,
            )?;
            frame.extrinsic1 = dec1.extrinsic;
            frame.app1 = dec1.app;

            self.perm.interleave_into(&frame.extrinsic1, &mut apriori2);
            let dec2 = bcjr_decode(
                &self.trellis,
                &sys_interleaved,
                &frame.channel_par2,
                &apriori2,
                None,
                &self.max_star,
            )?;
            self.perm.deinterleave_into(&dec2.extrinsic, &mut ext2_nat);
            self.perm.deinterleave_into(&dec2.app, &mut app2_nat);
            frame.extrinsic2.copy_from_slice(&ext2_nat);
            frame.app2.copy_from_slice(&app2_nat);

            let obs = IterationObservation {
                iter,
                app1: frame.app1.clone(),
                ext1: frame.extrinsic1.clone(),
                app2: app2_nat.clone(),
                ext2: ext2_nat.clone(),
                decisions: hard_decisions(&app2_nat),
                snr_db: ctx.snr_db,
                true_bits: ctx.true_bits.clone(),
            };
            let decision = rule.evaluate(&obs)?;
            trace.push(obs);

            if decision.stop || iter == self.max_iterations {
                let last = trace.last().expect("pushed above");
                let (decisions, iterations_used) = if decision.stop && decision.after_first_decoder
                {
                    (hard_decisions(&last.app1), iter as f64 - 0.5)
                } else {
                    (last.decisions.clone(), iter as f64)
                };
                return Ok(DecodeResult {
                    decisions,
                    iterations_used,
                    stop_reason: if decision.stop {
                        DecodeStop::Rule
                    } else {
                        DecodeStop::MaxIters
                    },
                    rule_reason: decision.reason,
                    trace,
                });
            }
        }
        unreachable!("loop returns at max_iterations")
    }
}

/// Free-function form of [`TurboDecoder::decode`].
pub fn turbo_decode(
    frame: &mut LlrFrame,
    perm: &Permutation,
    trellis: &Trellis,
    max_iterations: u32,
    rule: &mut dyn StoppingRule,
    max_star: &MaxStar,
    ctx: &ObservationContext,
) -> Result<DecodeResult> {
    TurboDecoder::new(
        trellis.clone(),
        perm.clone(),
        max_iterations,
        max_star.clone(),
    )?
    .decode(frame, rule, ctx)
}
