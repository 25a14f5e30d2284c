//! Iteration stopping rules.
//!
//! Every rule is evaluated once per full iteration on the observation the
//! turbo loop produces after decoder 2. Rules keep whatever cross-iteration
//! memory they need (previous extrinsics or decisions, first-iteration
//! reference values) and must see iterations `1, 2, 3, ...` in order.

use serde::{Deserialize, Serialize};

use crate::channel::ChannelKind;
use crate::error::{config_err, Error, Result};
use crate::metrics::{cross_entropy, epsilon, sign_changes, CeExponent, IterationObservation};

/// Default cross-entropy ratio threshold.
pub const DEFAULT_CE_RATIO: f64 = 1e-4;
/// Default epsilon-ratio threshold of the ratio-based MI rule.
pub const DEFAULT_MIA_II_RATIO: f64 = 1e-3;
/// Default sign-change ratio. Tuned so SCR averages within 0.1 iteration of
/// HDA for N=2048 on AWGN at 2 and 3 dB; not a published constant.
pub const DEFAULT_SCR_RATIO: f64 = 1e-2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    ThresholdMet,
    DecisionsStable,
    GenieCorrect,
    MaxReached,
    Continue,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Decision {
    pub stop: bool,
    pub reason: StopReason,
    /// The stop applies to decoder 1's output of this iteration, i.e. half
    /// an iteration earlier.
    pub after_first_decoder: bool,
}

impl Decision {
    pub const CONTINUE: Decision = Decision {
        stop: false,
        reason: StopReason::Continue,
        after_first_decoder: false,
    };

    pub fn stop(reason: StopReason) -> Self {
        Self {
            stop: true,
            reason,
            after_first_decoder: false,
        }
    }
}

pub trait StoppingRule: Send {
    /// Short identifier used in reports, e.g. `mia_ii(0.001)`.
    fn label(&self) -> String;

    fn evaluate(&mut self, obs: &IterationObservation) -> Result<Decision>;

    /// Forgets all memory so the rule can drive a new frame.
    fn reset(&mut self);
}

/// Feeds a recorded trace to `rule` and returns the index of the first
/// observation on which it stopped, with its decision.
pub fn replay(
    rule: &mut dyn StoppingRule,
    trace: &[IterationObservation],
) -> Result<Option<(usize, Decision)>> {
    rule.reset();
    for (i, obs) in trace.iter().enumerate() {
        let d = rule.evaluate(obs)?;
        if d.stop {
            return Ok(Some((i, d)));
        }
    }
    Ok(None)
}

/// Checks that iterations arrive as 1, 2, 3, ...
#[derive(Clone, Debug, Default)]
struct IterGuard {
    last: u32,
}

impl IterGuard {
    fn advance(&mut self, obs: &IterationObservation) -> Result<()> {
        if obs.iter != self.last + 1 {
            return Err(Error::Rule(format!(
                "expected iteration {}, got {}",
                self.last + 1,
                obs.iter
            )));
        }
        self.last = obs.iter;
        Ok(())
    }
}

/// Always runs exactly `iterations` iterations.
#[derive(Clone, Debug)]
pub struct FixedIterations {
    iterations: u32,
    guard: IterGuard,
}

impl FixedIterations {
    pub fn new(iterations: u32) -> Result<Self> {
        if iterations == 0 {
            return config_err("fixed rule needs at least one iteration");
        }
        Ok(Self {
            iterations,
            guard: IterGuard::default(),
        })
    }
}

impl StoppingRule for FixedIterations {
    fn label(&self) -> String {
        format!("fixed({})", self.iterations)
    }

    fn evaluate(&mut self, obs: &IterationObservation) -> Result<Decision> {
        self.guard.advance(obs)?;
        Ok(if obs.iter >= self.iterations {
            Decision::stop(StopReason::MaxReached)
        } else {
            Decision::CONTINUE
        })
    }

    fn reset(&mut self) {
        self.guard = IterGuard::default();
    }
}

/// Stops on the first iteration whose decisions equal the transmitted bits.
#[derive(Clone, Debug, Default)]
pub struct Genie {
    guard: IterGuard,
}

impl StoppingRule for Genie {
    fn label(&self) -> String {
        "genie".into()
    }

    fn evaluate(&mut self, obs: &IterationObservation) -> Result<Decision> {
        self.guard.advance(obs)?;
        let truth = obs
            .true_bits
            .as_ref()
            .ok_or_else(|| Error::Config("genie rule requires the transmitted bits".into()))?;
        Ok(if truth[..] == obs.decisions[..] {
            Decision::stop(StopReason::GenieCorrect)
        } else {
            Decision::CONTINUE
        })
    }

    fn reset(&mut self) {
        self.guard = IterGuard::default();
    }
}

/// Cross-entropy rule: stop when `CE(iter) / CE(1)` drops below a threshold.
///
/// `CE(1)` is taken against an all-zero extrinsic before the first iteration.
#[derive(Clone, Debug)]
pub struct CrossEntropyRule {
    ratio_threshold: f64,
    exponent: CeExponent,
    prev_ext: Option<Vec<f64>>,
    reference: Option<f64>,
    guard: IterGuard,
}

impl CrossEntropyRule {
    pub fn new(ratio_threshold: f64, exponent: CeExponent) -> Result<Self> {
        positive("ce ratio_threshold", ratio_threshold)?;
        Ok(Self {
            ratio_threshold,
            exponent,
            prev_ext: None,
            reference: None,
            guard: IterGuard::default(),
        })
    }
}

impl StoppingRule for CrossEntropyRule {
    fn label(&self) -> String {
        match self.exponent {
            CeExponent::Magnitude => format!("ce({})", self.ratio_threshold),
            CeExponent::Signed => format!("ce_signed({})", self.ratio_threshold),
        }
    }

    fn evaluate(&mut self, obs: &IterationObservation) -> Result<Decision> {
        self.guard.advance(obs)?;
        let zeros;
        let prev = match &self.prev_ext {
            Some(p) => p.as_slice(),
            None => {
                zeros = vec![0.0; obs.ext2.len()];
                &zeros
            }
        };
        let ce = cross_entropy(prev, &obs.ext2, &obs.app2, self.exponent)?;
        self.prev_ext = Some(obs.ext2.clone());
        let Some(reference) = self.reference else {
            self.reference = Some(ce);
            return Ok(Decision::CONTINUE);
        };
        Ok(ratio_decision(ce, reference, self.ratio_threshold))
    }

    fn reset(&mut self) {
        self.prev_ext = None;
        self.reference = None;
        self.guard = IterGuard::default();
    }
}

/// `current / reference < threshold`, stopping outright on a zero reference.
fn ratio_decision(current: f64, reference: f64, threshold: f64) -> Decision {
    if reference <= 0.0 || current / reference < threshold {
        Decision::stop(StopReason::ThresholdMet)
    } else {
        Decision::CONTINUE
    }
}

/// Hard-decision-aided rule: stop once decisions repeat between iterations.
#[derive(Clone, Debug, Default)]
pub struct HardDecisionAided {
    prev: Option<Vec<u8>>,
    guard: IterGuard,
}

impl StoppingRule for HardDecisionAided {
    fn label(&self) -> String {
        "hda".into()
    }

    fn evaluate(&mut self, obs: &IterationObservation) -> Result<Decision> {
        self.guard.advance(obs)?;
        let stable = self.prev.as_deref() == Some(obs.decisions.as_slice());
        self.prev = Some(obs.decisions.clone());
        Ok(if stable {
            Decision::stop(StopReason::DecisionsStable)
        } else {
            Decision::CONTINUE
        })
    }

    fn reset(&mut self) {
        self.prev = None;
        self.guard = IterGuard::default();
    }
}

/// Sign-change-ratio rule on decoder-2 extrinsic LLRs.
#[derive(Clone, Debug)]
pub struct SignChangeRatio {
    ratio_threshold: f64,
    prev_ext: Option<Vec<f64>>,
    guard: IterGuard,
}

impl SignChangeRatio {
    pub fn new(ratio_threshold: f64) -> Result<Self> {
        if !(ratio_threshold >= 0.0 && ratio_threshold.is_finite()) {
            return config_err(format!(
                "scr ratio_threshold must be >= 0, got {ratio_threshold}"
            ));
        }
        Ok(Self {
            ratio_threshold,
            prev_ext: None,
            guard: IterGuard::default(),
        })
    }
}

impl StoppingRule for SignChangeRatio {
    fn label(&self) -> String {
        format!("scr({})", self.ratio_threshold)
    }

    fn evaluate(&mut self, obs: &IterationObservation) -> Result<Decision> {
        self.guard.advance(obs)?;
        let decision = match &self.prev_ext {
            Some(prev) => {
                let (_, ratio) = sign_changes(prev, &obs.ext2)?;
                if ratio <= self.ratio_threshold {
                    Decision::stop(StopReason::DecisionsStable)
                } else {
                    Decision::CONTINUE
                }
            }
            None => Decision::CONTINUE,
        };
        self.prev_ext = Some(obs.ext2.clone());
        Ok(decision)
    }

    fn reset(&mut self) {
        self.prev_ext = None;
        self.guard = IterGuard::default();
    }
}

/// Threshold on epsilon of the decoder-2 a-posteriori LLRs. Used both with a
/// fixed threshold and with one picked from an SNR table.
#[derive(Clone, Debug)]
pub struct MiaThreshold {
    threshold: f64,
    check_first_decoder: bool,
    label: String,
    guard: IterGuard,
}

impl MiaThreshold {
    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    /// Also test decoder 1's output, stopping half an iteration early.
    pub fn with_first_decoder_check(mut self, enabled: bool) -> Self {
        self.check_first_decoder = enabled;
        self
    }
}

impl StoppingRule for MiaThreshold {
    fn label(&self) -> String {
        self.label.clone()
    }

    fn evaluate(&mut self, obs: &IterationObservation) -> Result<Decision> {
        self.guard.advance(obs)?;
        if self.check_first_decoder && epsilon(&obs.app1) < self.threshold {
            return Ok(Decision {
                after_first_decoder: true,
                ..Decision::stop(StopReason::ThresholdMet)
            });
        }
        Ok(if epsilon(&obs.app2) < self.threshold {
            Decision::stop(StopReason::ThresholdMet)
        } else {
            Decision::CONTINUE
        })
    }

    fn reset(&mut self) {
        self.guard = IterGuard::default();
    }
}

/// Fixed epsilon threshold.
pub fn mia_i_a(threshold: f64) -> Result<MiaThreshold> {
    positive("mia_i_a threshold", threshold)?;
    Ok(MiaThreshold {
        threshold,
        check_first_decoder: false,
        label: format!("mia_i_a({threshold})"),
        guard: IterGuard::default(),
    })
}

/// Epsilon threshold looked up from `table` at the operating SNR.
pub fn mia_i_b(table: &ThresholdTable, snr_db: f64) -> Result<MiaThreshold> {
    let threshold = table.lookup(snr_db)?;
    Ok(MiaThreshold {
        threshold,
        check_first_decoder: false,
        label: format!("mia_i_b({})", table.name()),
        guard: IterGuard::default(),
    })
}

/// Ratio rule: stop when `eps(iter) / eps(1)` drops below a threshold.
#[derive(Clone, Debug)]
pub struct MiaRatio {
    ratio_threshold: f64,
    reference: Option<f64>,
    guard: IterGuard,
}

impl StoppingRule for MiaRatio {
    fn label(&self) -> String {
        format!("mia_ii({})", self.ratio_threshold)
    }

    fn evaluate(&mut self, obs: &IterationObservation) -> Result<Decision> {
        self.guard.advance(obs)?;
        let eps = epsilon(&obs.app2);
        let Some(reference) = self.reference else {
            self.reference = Some(eps);
            return Ok(Decision::CONTINUE);
        };
        Ok(ratio_decision(eps, reference, self.ratio_threshold))
    }

    fn reset(&mut self) {
        self.reference = None;
        self.guard = IterGuard::default();
    }
}

pub fn mia_ii(ratio_threshold: f64) -> Result<MiaRatio> {
    positive("mia_ii ratio_threshold", ratio_threshold)?;
    Ok(MiaRatio {
        ratio_threshold,
        reference: None,
        guard: IterGuard::default(),
    })
}

pub fn ce_rule(ratio_threshold: f64) -> Result<CrossEntropyRule> {
    CrossEntropyRule::new(ratio_threshold, CeExponent::Magnitude)
}

pub fn scr_rule(ratio_threshold: f64) -> Result<SignChangeRatio> {
    SignChangeRatio::new(ratio_threshold)
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        config_err(format!("{name} must be > 0, got {v}"))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdEntry {
    pub ebno_db: f64,
    pub epsilon: f64,
}

/// Epsilon thresholds per Eb/N0 for one code and channel.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdTable {
    #[serde(default)]
    pub name: Option<String>,
    pub channel: ChannelKind,
    pub entries: Vec<ThresholdEntry>,
}

impl ThresholdTable {
    pub fn new(channel: ChannelKind, entries: &[(f64, f64)]) -> Result<Self> {
        let table = Self {
            name: None,
            channel,
            entries: entries
                .iter()
                .map(|&(ebno_db, epsilon)| ThresholdEntry { ebno_db, epsilon })
                .collect(),
        };
        table.validate()?;
        Ok(table)
    }

    fn named(name: &str, channel: ChannelKind, entries: &[(f64, f64)]) -> Self {
        let mut t = Self::new(channel, entries).expect("built-in tables are valid");
        t.name = Some(name.into());
        t
    }

    /// (7,5) code, interleaver 900, AWGN.
    pub fn awgn_900() -> Self {
        Self::named(
            "awgn_900",
            ChannelKind::Awgn,
            &[(1.0, 1e-2), (2.0, 1e-4), (3.0, 1e-5), (4.0, 1e-6)],
        )
    }

    /// (7,5) code, interleaver 2048, AWGN.
    pub fn awgn_2048() -> Self {
        Self::named(
            "awgn_2048",
            ChannelKind::Awgn,
            &[
                (1.0, 1e-1),
                (2.0, 1e-3),
                (3.0, 1e-5),
                (4.0, 1e-6),
                (5.0, 1e-7),
            ],
        )
    }

    /// (7,5) code, interleaver 2048, fast Rayleigh fading.
    pub fn rayleigh_2048() -> Self {
        Self::named(
            "rayleigh_2048",
            ChannelKind::RayleighFast,
            &[
                (3.0, 2e-2),
                (4.0, 2e-4),
                (5.0, 2e-5),
                (6.0, 5e-6),
                (7.0, 1e-6),
            ],
        )
    }

    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "awgn_900" => Ok(Self::awgn_900()),
            "awgn_2048" => Ok(Self::awgn_2048()),
            "rayleigh_2048" => Ok(Self::rayleigh_2048()),
            other => config_err(format!("unknown threshold table `{other}`")),
        }
    }

    pub fn name(&self) -> &str {
        self.name.as_deref().unwrap_or("custom")
    }

    pub fn validate(&self) -> Result<()> {
        if self.entries.is_empty() {
            return config_err("threshold table is empty");
        }
        if self
            .entries
            .iter()
            .any(|e| !(e.epsilon > 0.0) || !e.ebno_db.is_finite())
        {
            return config_err("threshold table entries must be finite with epsilon > 0");
        }
        if self
            .entries
            .windows(2)
            .any(|w| w[0].ebno_db >= w[1].ebno_db)
        {
            return config_err("threshold table Eb/N0 values must be strictly increasing");
        }
        Ok(())
    }

    /// Nearest entry in dB, clamped at both ends. A tie between two entries
    /// resolves to the higher-SNR (smaller) threshold.
    pub fn lookup(&self, snr_db: f64) -> Result<f64> {
        self.validate()?;
        let mut best = &self.entries[0];
        for e in &self.entries[1..] {
            if (e.ebno_db - snr_db).abs() <= (best.ebno_db - snr_db).abs() {
                best = e;
            }
        }
        Ok(best.epsilon)
    }
}

/// A threshold table given by built-in name or inline.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TableSource {
    Named(String),
    Inline(ThresholdTable),
}

impl TableSource {
    pub fn resolve(&self) -> Result<ThresholdTable> {
        match self {
            TableSource::Named(name) => ThresholdTable::by_name(name),
            TableSource::Inline(t) => {
                t.validate()?;
                Ok(t.clone())
            }
        }
    }
}

fn default_ce_ratio() -> f64 {
    DEFAULT_CE_RATIO
}

fn default_mia_ii_ratio() -> f64 {
    DEFAULT_MIA_II_RATIO
}

fn default_scr_ratio() -> f64 {
    DEFAULT_SCR_RATIO
}

/// Serialisable rule selection, turned into a live rule per operating point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RuleSpec {
    Fixed {
        iterations: u32,
    },
    Genie,
    Ce {
        #[serde(default = "default_ce_ratio")]
        ratio_threshold: f64,
        #[serde(default)]
        exponent: CeExponent,
    },
    Hda,
    Scr {
        #[serde(default = "default_scr_ratio")]
        ratio_threshold: f64,
    },
    #[serde(rename = "mia_i_a")]
    MiaIA {
        threshold: f64,
        #[serde(default)]
        check_first_decoder: bool,
    },
    #[serde(rename = "mia_i_b")]
    MiaIB {
        table: TableSource,
        #[serde(default)]
        check_first_decoder: bool,
    },
    #[serde(rename = "mia_ii")]
    MiaII {
        #[serde(default = "default_mia_ii_ratio")]
        ratio_threshold: f64,
    },
}

impl RuleSpec {
    pub fn build(&self, snr_db: f64) -> Result<Box<dyn StoppingRule>> {
        Ok(match self {
            RuleSpec::Fixed { iterations } => Box::new(FixedIterations::new(*iterations)?),
            RuleSpec::Genie => Box::new(Genie::default()),
            RuleSpec::Ce {
                ratio_threshold,
                exponent,
            } => Box::new(CrossEntropyRule::new(*ratio_threshold, *exponent)?),
            RuleSpec::Hda => Box::new(HardDecisionAided::default()),
            RuleSpec::Scr { ratio_threshold } => Box::new(scr_rule(*ratio_threshold)?),
            RuleSpec::MiaIA {
                threshold,
                check_first_decoder,
            } => Box::new(mia_i_a(*threshold)?.with_first_decoder_check(*check_first_decoder)),
            RuleSpec::MiaIB {
                table,
                check_first_decoder,
            } => Box::new(
                mia_i_b(&table.resolve()?, snr_db)?.with_first_decoder_check(*check_first_decoder),
            ),
            RuleSpec::MiaII { ratio_threshold } => Box::new(mia_ii(*ratio_threshold)?),
        })
    }

    /// Report label; does not depend on the operating point.
    pub fn label(&self) -> Result<String> {
        Ok(self.build(0.0)?.label())
    }

    pub fn needs_truth(&self) -> bool {
        matches!(self, RuleSpec::Genie)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Arc;

    /// Observation with every app2 LLR equal to `llr` (so eps is known).
    fn obs(iter: u32, llr: f64) -> IterationObservation {
        obs_vec(iter, vec![llr; 8], vec![0.0; 8])
    }

    fn obs_vec(iter: u32, app2: Vec<f64>, ext2: Vec<f64>) -> IterationObservation {
        let decisions = crate::hard_decisions(&app2);
        IterationObservation {
            iter,
            app1: app2.clone(),
            ext1: ext2.clone(),
            app2,
            ext2,
            decisions,
            snr_db: 1.0,
            true_bits: None,
        }
    }

    /// LLR magnitude giving a prescribed epsilon for a constant vector.
    fn llr_for_eps(eps: f64) -> f64 {
        // eps = ln(1 + e^-x) / ln 2  =>  x = -ln(e^(eps ln 2) - 1)
        -((eps * std::f64::consts::LN_2).exp_m1()).ln()
    }

    fn stop_iter(rule: &mut dyn StoppingRule, seq: &[IterationObservation]) -> Option<u32> {
        replay(rule, seq).unwrap().map(|(i, _)| seq[i].iter)
    }

    #[test]
    fn fixed_stops_at_count() {
        let mut r = FixedIterations::new(6).unwrap();
        let seq: Vec<_> = (1..=8).map(|i| obs(i, 0.0)).collect();
        assert_eq!(stop_iter(&mut r, &seq), Some(6));
        assert!(FixedIterations::new(0).is_err());
    }

    #[test]
    fn iterations_must_be_consecutive() {
        let mut r = Genie::default();
        assert!(matches!(r.evaluate(&obs(2, 1.0)), Err(Error::Rule(_))));
    }

    #[test]
    fn genie_needs_truth() {
        let mut r = Genie::default();
        assert!(matches!(r.evaluate(&obs(1, 1.0)), Err(Error::Config(_))));
        let mut o = obs(1, 1.0);
        o.true_bits = Some(Arc::from(vec![0u8; 8]));
        r.reset();
        assert_eq!(r.evaluate(&o).unwrap().reason, StopReason::GenieCorrect);
        let mut wrong = obs(2, 1.0);
        wrong.true_bits = Some(Arc::from(vec![1u8; 8]));
        assert!(!r.evaluate(&wrong).unwrap().stop);
    }

    #[test]
    fn hda_needs_repeat() {
        let mut r = HardDecisionAided::default();
        let seq = [obs(1, 1.0), obs(2, 2.0)];
        assert_eq!(stop_iter(&mut r, &seq), Some(2));
        let seq = [obs(1, 1.0), obs(2, -2.0), obs(3, -3.0)];
        assert_eq!(stop_iter(&mut r, &seq), Some(3));
    }

    #[test]
    fn mia_i_a_first_crossing() {
        let seq: Vec<_> = [0.3, 0.02, 3e-5]
            .iter()
            .enumerate()
            .map(|(i, &e)| obs(i as u32 + 1, llr_for_eps(e)))
            .collect();
        let mut r = mia_i_a(1e-4).unwrap();
        assert_eq!(stop_iter(&mut r, &seq), Some(3));
        let zero: Vec<_> = (1..=6).map(|i| obs(i, 0.0)).collect();
        assert_eq!(stop_iter(&mut r, &zero), None);
        assert!(mia_i_a(0.0).is_err());
    }

    #[test]
    fn mia_i_a_half_iteration_variant() {
        let mut o = obs(1, 0.0);
        o.app1 = vec![30.0; 8];
        let mut r = mia_i_a(1e-4).unwrap().with_first_decoder_check(true);
        let d = r.evaluate(&o).unwrap();
        assert!(d.stop && d.after_first_decoder);
    }

    #[test]
    fn table_lookups() {
        assert_eq!(ThresholdTable::awgn_900().lookup(2.0).unwrap(), 1e-4);
        assert_eq!(ThresholdTable::awgn_2048().lookup(3.0).unwrap(), 1e-5);
        assert_eq!(ThresholdTable::rayleigh_2048().lookup(4.0).unwrap(), 2e-4);
        // nearest, clamped, ties to the higher SNR
        assert_eq!(ThresholdTable::awgn_2048().lookup(2.3).unwrap(), 1e-3);
        assert_eq!(ThresholdTable::awgn_2048().lookup(-4.0).unwrap(), 1e-1);
        assert_eq!(ThresholdTable::awgn_2048().lookup(9.0).unwrap(), 1e-7);
        assert_eq!(ThresholdTable::awgn_2048().lookup(1.5).unwrap(), 1e-3);
        assert!(ThresholdTable::new(ChannelKind::Awgn, &[]).is_err());
        assert!(ThresholdTable::new(ChannelKind::Awgn, &[(2.0, 1e-3), (1.0, 1e-2)]).is_err());
        assert!(ThresholdTable::new(ChannelKind::Awgn, &[(1.0, 0.0)]).is_err());
    }

    #[test]
    fn mia_i_b_uses_table_threshold() {
        let r = mia_i_b(&ThresholdTable::awgn_900(), 2.0).unwrap();
        assert_eq!(r.threshold(), 1e-4);
    }

    #[test]
    fn mia_ii_ratio() {
        let eps = [0.2, 0.05, 0.01, 1e-4];
        let seq: Vec<_> = eps
            .iter()
            .enumerate()
            .map(|(i, &e)| obs(i as u32 + 1, llr_for_eps(e)))
            .collect();
        let mut r = mia_ii(DEFAULT_MIA_II_RATIO).unwrap();
        assert_eq!(stop_iter(&mut r, &seq), Some(4));
        let flat: Vec<_> = (1..=6).map(|i| obs(i, 1.5)).collect();
        assert_eq!(stop_iter(&mut r, &flat), None);
    }

    #[test]
    fn mia_ii_zero_reference_stops_at_two() {
        let seq: Vec<_> = (1..=4).map(|i| obs(i, f64::INFINITY)).collect();
        let mut r = mia_ii(1e-3).unwrap();
        let (idx, d) = replay(&mut r, &seq).unwrap().unwrap();
        assert_eq!(seq[idx].iter, 2);
        assert_eq!(d.reason, StopReason::ThresholdMet);
    }

    #[test]
    fn ce_ratio_sequence() {
        // With app2 = 0 the CE is mean(d^2); choose ext2 increments 1, 0.1*..., 1e-5
        let ext = |v: f64| vec![v; 8];
        let seq = [
            obs_vec(1, vec![0.0; 8], ext(1.0)),
            obs_vec(2, vec![0.0; 8], ext(1.0 + 0.1f64.sqrt())),
            obs_vec(3, vec![0.0; 8], ext(1.0 + 0.1f64.sqrt() + 1e-5f64.sqrt())),
        ];
        let mut r = ce_rule(1e-4).unwrap();
        assert_eq!(stop_iter(&mut r, &seq), Some(3));
        let same: Vec<_> = (1..=6)
            .map(|i| obs_vec(i, vec![0.0; 8], ext(i as f64)))
            .collect();
        assert_eq!(stop_iter(&mut r, &same), None);
    }

    #[test]
    fn scr_thresholds() {
        let a = obs_vec(1, vec![1.0; 8], vec![1.0; 8]);
        let b = obs_vec(2, vec![1.0; 8], vec![2.0; 8]);
        let mut r = scr_rule(0.0).unwrap();
        assert_eq!(stop_iter(&mut r, &[a.clone(), b]), Some(2));

        let mut prev = vec![1.0; 900];
        let mut cur = prev.clone();
        for i in 0..9 {
            cur[i] = -1.0;
        }
        prev[899] = 1.0;
        let seq = [
            obs_vec(1, vec![1.0; 900], prev),
            obs_vec(2, vec![1.0; 900], cur),
        ];
        let mut r = scr_rule(0.005).unwrap();
        assert_eq!(stop_iter(&mut r, &seq), None);
    }

    #[test]
    fn previous_iteration_rules_never_stop_at_one() {
        let first = obs(1, 40.0);
        let specs = [
            RuleSpec::Hda,
            RuleSpec::Scr {
                ratio_threshold: 1.0,
            },
            RuleSpec::MiaII {
                ratio_threshold: 1e9,
            },
            RuleSpec::Ce {
                ratio_threshold: 1e9,
                exponent: CeExponent::Magnitude,
            },
        ];
        for spec in specs {
            let mut r = spec.build(1.0).unwrap();
            assert!(!r.evaluate(&first).unwrap().stop, "{spec:?}");
        }
    }

    #[test]
    fn rule_spec_json() {
        let specs: Vec<RuleSpec> = serde_json::from_str(
            r#"[
                {"kind": "fixed", "iterations": 6},
                {"kind": "genie"},
                {"kind": "ce"},
                {"kind": "hda"},
                {"kind": "scr"},
                {"kind": "mia_i_a", "threshold": 1e-3},
                {"kind": "mia_i_b", "table": "awgn_2048"},
                {"kind": "mia_i_b", "table": {"channel": "awgn", "entries": [{"ebno_db": 1, "epsilon": 0.01}]}},
                {"kind": "mia_ii"}
            ]"#,
        )
        .unwrap();
        let labels: Vec<String> = specs.iter().map(|s| s.label().unwrap()).collect();
        assert_eq!(
            labels,
            [
                "fixed(6)",
                "genie",
                "ce(0.0001)",
                "hda",
                "scr(0.01)",
                "mia_i_a(0.001)",
                "mia_i_b(awgn_2048)",
                "mia_i_b(custom)",
                "mia_ii(0.001)"
            ]
        );
        let bad: RuleSpec = serde_json::from_str(r#"{"kind":"mia_i_b","table":"nope"}"#).unwrap();
        assert!(bad.build(1.0).is_err());
    }
}
