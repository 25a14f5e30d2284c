//! Monte-Carlo harness: BER / FER / average-iteration sweeps, MI trajectories
//! and CE-ratio vs epsilon-ratio curves.
//!
//! Every frame draws its randomness from a ChaCha8 stream selected by
//! `(master_seed, frame_index)`, so results do not depend on how frames are
//! scheduled across threads. Within one frame the information bits are drawn
//! first, then the channel samples.
//!
//! A sweep decodes each frame once for the full iteration budget and replays
//! the recorded trace through every configured rule. Rules only decide when
//! to stop, so this matches decoding once per rule with early termination.

use std::borrow::Cow;
use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{bpsk_modulate, channel_llr, transmit, ChannelConfig, ChannelKind};
use crate::decoder::{
    DecodeResult, DecodeStop, LlrFrame, MaxStar, MaxStarMode, ObservationContext, TurboDecoder,
};
use crate::error::{config_err, Error, Result};
use crate::hard_decisions;
use crate::metrics::{
    cross_entropy, epsilon, mutual_info_approx, sign_changes, CeExponent, IterationObservation,
};
use crate::rules::{replay, RuleSpec, StopReason};
use crate::trellis::{CodeSpec, FrameLayout, PcccEncoder, Permutation};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InterleaverConfig {
    pub size: usize,
    pub seed: u64,
    /// Draw a fresh interleaver for every frame instead of one per run.
    #[serde(default)]
    pub per_frame: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelGrid {
    pub kind: ChannelKind,
    pub ebno_db: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecoderConfig {
    pub max_iterations: u32,
    #[serde(default)]
    pub max_star: MaxStarMode,
}

fn one() -> usize {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    /// Frames per SNR point, or per batch when `min_bit_errors` is set.
    pub num_frames: u64,
    pub master_seed: u64,
    #[serde(default = "one")]
    pub max_parallelism: usize,
    /// Keep adding batches of `num_frames` until the first listed rule has
    /// collected this many bit errors (or `max_frames` is reached).
    #[serde(default)]
    pub min_bit_errors: Option<u64>,
    #[serde(default)]
    pub max_frames: Option<u64>,
}

/// Complete description of a simulation run, loadable from JSON.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    #[serde(default = "default_code")]
    pub code: CodeSpec,
    pub interleaver: InterleaverConfig,
    pub channel: ChannelGrid,
    pub decoder: DecoderConfig,
    pub rules: Vec<RuleSpec>,
    pub sim: RunConfig,
}

fn default_code() -> CodeSpec {
    CodeSpec::RSC_7_5
}

impl SimConfig {
    pub fn from_json(json: &str) -> Result<Self> {
        let cfg: SimConfig = serde_json::from_str(json)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        self.code.validate()?;
        if self.interleaver.size < 2 {
            return config_err("interleaver size must be >= 2");
        }
        if self.channel.ebno_db.is_empty() {
            return config_err("SNR grid is empty");
        }
        if let Some(bad) = self.channel.ebno_db.iter().find(|x| !x.is_finite()) {
            return config_err(format!("non-finite Eb/N0 {bad}"));
        }
        if self.decoder.max_iterations == 0 {
            return config_err("max_iterations must be >= 1");
        }
        MaxStar::from_mode(&self.decoder.max_star)?;
        if self.rules.is_empty() {
            return config_err("at least one stopping rule is required");
        }
        for rule in &self.rules {
            for &snr in &self.channel.ebno_db {
                rule.build(snr)?;
            }
        }
        if self.sim.num_frames == 0 {
            return config_err("num_frames must be >= 1");
        }
        if self.sim.max_parallelism == 0 {
            return config_err("max_parallelism must be >= 1");
        }
        Ok(())
    }
}

/// Scalars recorded for one iteration of one frame.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct IterationMetrics {
    pub iter: u32,
    pub epsilon: f64,
    pub i_app: f64,
    pub cross_entropy: f64,
    pub sign_changes: usize,
}

/// Outcome of one frame under one rule.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameResult {
    pub frame_index: u64,
    pub bit_errors: u64,
    pub frame_error: bool,
    pub iterations_used: f64,
    pub stop_reason: DecodeStop,
    pub rule_reason: StopReason,
    pub per_iteration: Vec<IterationMetrics>,
}

/// Accumulated counts for one rule at one SNR.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct RuleTally {
    pub frames: u64,
    pub bit_errors: u64,
    pub frame_errors: u64,
    pub iterations_sum: f64,
}

impl RuleTally {
    fn add(&mut self, r: &FrameResult) {
        self.frames += 1;
        self.bit_errors += r.bit_errors;
        self.frame_errors += u64::from(r.frame_error);
        self.iterations_sum += r.iterations_used;
    }

    pub fn ber(&self, info_len: usize) -> f64 {
        if self.frames == 0 {
            0.0
        } else {
            self.bit_errors as f64 / (self.frames as f64 * info_len as f64)
        }
    }

    pub fn fer(&self) -> f64 {
        if self.frames == 0 {
            0.0
        } else {
            self.frame_errors as f64 / self.frames as f64
        }
    }

    pub fn avg_iterations(&self) -> f64 {
        if self.frames == 0 {
            0.0
        } else {
            self.iterations_sum / self.frames as f64
        }
    }
}

/// Results at one SNR. `frames[f][r]` is frame `f` under rule `r` when
/// per-frame results were kept.
#[derive(Clone, Debug)]
pub struct PointOutcome {
    pub ebno_db: f64,
    pub tallies: Vec<RuleTally>,
    pub frames: Vec<Vec<FrameResult>>,
}

/// One CSV row of a sweep.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub snr_db: f64,
    pub channel: String,
    pub rule: String,
    pub frames: u64,
    pub bit_errors: u64,
    pub ber: f64,
    pub fer: f64,
    pub avg_iterations: f64,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepReport {
    pub info_len: usize,
    pub rows: Vec<SweepRow>,
}

impl SweepReport {
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        write_csv_rows(w, &self.rows)
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(String::from_utf8(buf).expect("csv output is utf-8"))
    }

    pub fn row(&self, snr_db: f64, rule: &str) -> Option<&SweepRow> {
        self.rows
            .iter()
            .find(|r| r.snr_db == snr_db && r.rule == rule)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TrajectoryPoint {
    pub half_iteration: u32,
    pub i_app_dec1: f64,
    pub i_app_dec2: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub points: Vec<TrajectoryPoint>,
    pub iterations_used: f64,
    pub bit_errors: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RatioPoint {
    pub packet: u64,
    pub iteration: u32,
    pub ce_ratio: f64,
    pub epsilon_ratio: f64,
}

pub fn write_csv_rows<W: Write, T: Serialize>(w: W, rows: &[T]) -> Result<()> {
    let mut writer = csv::Writer::from_writer(w);
    for row in rows {
        writer.serialize(row)?;
    }
    writer.flush()?;
    Ok(())
}

/// Operation counts of one metric evaluation over a block.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct OpCounts {
    pub lut_searches: u64,
    pub additions: u64,
    pub multiplications: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct MetricCosts {
    pub epsilon: OpCounts,
    pub cross_entropy: OpCounts,
}

/// Per-iteration cost of epsilon vs. cross-entropy for block length `n`.
pub fn cost_model(n: u64) -> Result<MetricCosts> {
    if n == 0 {
        return config_err("block length must be >= 1");
    }
    Ok(MetricCosts {
        epsilon: OpCounts {
            lut_searches: n,
            additions: n - 1,
            multiplications: 1,
        },
        cross_entropy: OpCounts {
            lut_searches: n,
            additions: 2 * n - 1,
            multiplications: 2 * n + 1,
        },
    })
}

/// Provenance written next to every CSV output.
#[derive(Clone, Debug, Serialize)]
pub struct RunManifest<'a> {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'a str,
    pub master_seed: u64,
    pub interleaver_seed: u64,
    pub info_len: usize,
    pub code_rate: f64,
    pub config: &'a SimConfig,
}

/// The random stream owned by one frame.
pub fn frame_rng(master_seed: u64, frame_index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(frame_index);
    rng
}

/// A ready-to-run simulation.
pub struct Simulator {
    cfg: SimConfig,
    encoder: PcccEncoder,
    layout: FrameLayout,
    decoder: TurboDecoder,
    labels: Vec<String>,
    pool: rayon::ThreadPool,
}

/// Everything needed to decode one frame.
struct PreparedFrame<'a> {
    info: Arc<[u8]>,
    llrs: LlrFrame,
    decoder: Cow<'a, TurboDecoder>,
}

impl Simulator {
    pub fn new(cfg: SimConfig) -> Result<Self> {
        cfg.validate()?;
        let encoder = PcccEncoder::new(cfg.code)?;
        let layout = encoder.layout(cfg.interleaver.size);
        let perm = Permutation::random(cfg.interleaver.size, cfg.interleaver.seed)?;
        let decoder = TurboDecoder::new(
            encoder.trellis().clone(),
            perm,
            cfg.decoder.max_iterations,
            MaxStar::from_mode(&cfg.decoder.max_star)?,
        )?;
        let labels = cfg
            .rules
            .iter()
            .map(RuleSpec::label)
            .collect::<Result<Vec<_>>>()?;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.sim.max_parallelism)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
        Ok(Self {
            cfg,
            encoder,
            layout,
            decoder,
            labels,
            pool,
        })
    }

    pub fn config(&self) -> &SimConfig {
        &self.cfg
    }

    pub fn layout(&self) -> FrameLayout {
        self.layout
    }

    pub fn rule_labels(&self) -> &[String] {
        &self.labels
    }

    pub fn manifest<'a>(&'a self, command: &'a str) -> RunManifest<'a> {
        RunManifest {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command,
            master_seed: self.cfg.sim.master_seed,
            interleaver_seed: self.cfg.interleaver.seed,
            info_len: self.layout.info_len,
            code_rate: self.layout.code_rate(),
            config: &self.cfg,
        }
    }

    fn channel_at(&self, ebno_db: f64) -> Result<ChannelConfig> {
        ChannelConfig::new(self.cfg.channel.kind, ebno_db, self.layout.code_rate())
    }

    fn decoder_for(&self, frame_index: u64) -> Result<Cow<'_, TurboDecoder>> {
        if !self.cfg.interleaver.per_frame {
            return Ok(Cow::Borrowed(&self.decoder));
        }
        let seed = frame_rng(self.cfg.interleaver.seed, frame_index).next_u64();
        let perm = Permutation::random(self.cfg.interleaver.size, seed)?;
        Ok(Cow::Owned(TurboDecoder::new(
            self.encoder.trellis().clone(),
            perm,
            self.cfg.decoder.max_iterations,
            MaxStar::from_mode(&self.cfg.decoder.max_star)?,
        )?))
    }

    fn prepare(&self, ebno_db: f64, frame_index: u64) -> Result<PreparedFrame<'_>> {
        let channel = self.channel_at(ebno_db)?;
        let decoder = self.decoder_for(frame_index)?;
        let mut rng = frame_rng(self.cfg.sim.master_seed, frame_index);
        let info: Vec<u8> = (0..self.layout.info_len)
            .map(|_| u8::from(rng.random::<bool>()))
            .collect();
        let coded = self.encoder.encode(decoder.permutation(), &info)?;
        let rx = transmit(
            &bpsk_modulate(&coded.transmitted_bits()),
            &channel,
            &mut rng,
        );
        let streams = self.layout.depuncture(&channel_llr(&rx))?;
        Ok(PreparedFrame {
            info: Arc::from(info),
            llrs: LlrFrame::new(streams)?,
            decoder,
        })
    }

    fn decode_full(&self, ebno_db: f64, frame_index: u64) -> Result<(Arc<[u8]>, DecodeResult)> {
        let full = RuleSpec::Fixed {
            iterations: self.cfg.decoder.max_iterations,
        };
        self.decode_frame(ebno_db, frame_index, &full)
    }

    /// Transmitted bits and decoder output of one frame under `rule`.
    pub fn decode_frame(
        &self,
        ebno_db: f64,
        frame_index: u64,
        rule: &RuleSpec,
    ) -> Result<(Arc<[u8]>, DecodeResult)> {
        let mut frame = self.prepare(ebno_db, frame_index)?;
        let mut live = rule.build(ebno_db)?;
        let ctx = ObservationContext {
            snr_db: ebno_db,
            true_bits: Some(frame.info.clone()),
        };
        let result = frame.decoder.decode(&mut frame.llrs, live.as_mut(), &ctx)?;
        Ok((frame.info, result))
    }

    /// Simulates one frame under `rule`, stopping the decoder as soon as the
    /// rule fires.
    pub fn run_frame(
        &self,
        ebno_db: f64,
        frame_index: u64,
        rule: &RuleSpec,
    ) -> Result<FrameResult> {
        let (info, result) = self.decode_frame(ebno_db, frame_index, rule)?;
        let metrics = trace_metrics(&result.trace)?;
        Ok(FrameResult {
            frame_index,
            bit_errors: count_errors(&info, &result.decisions),
            frame_error: info[..] != result.decisions[..],
            iterations_used: result.iterations_used,
            stop_reason: result.stop_reason,
            rule_reason: result.rule_reason,
            per_iteration: metrics,
        })
    }

    /// Simulates one frame for every configured rule (in config order).
    pub fn run_frame_all_rules(&self, ebno_db: f64, frame_index: u64) -> Result<Vec<FrameResult>> {
        let (info, result) = self.decode_full(ebno_db, frame_index)?;
        let trace = &result.trace;
        let metrics = trace_metrics(trace)?;
        let mut out = Vec::with_capacity(self.cfg.rules.len());
        for spec in &self.cfg.rules {
            let mut rule = spec.build(ebno_db)?;
            let (decisions, iterations_used, stop_reason, rule_reason, seen) =
                match replay(rule.as_mut(), trace)? {
                    Some((idx, d)) if d.after_first_decoder => (
                        hard_decisions(&trace[idx].app1),
                        idx as f64 + 0.5,
                        DecodeStop::Rule,
                        d.reason,
                        idx + 1,
                    ),
                    Some((idx, d)) => (
                        trace[idx].decisions.clone(),
                        idx as f64 + 1.0,
                        DecodeStop::Rule,
                        d.reason,
                        idx + 1,
                    ),
                    None => (
                        trace
                            .last()
                            .expect("at least one iteration")
                            .decisions
                            .clone(),
                        trace.len() as f64,
                        DecodeStop::MaxIters,
                        StopReason::Continue,
                        trace.len(),
                    ),
                };
            out.push(FrameResult {
                frame_index,
                bit_errors: count_errors(&info, &decisions),
                frame_error: info[..] != decisions[..],
                iterations_used,
                stop_reason,
                rule_reason,
                per_iteration: metrics[..seen].to_vec(),
            });
        }
        Ok(out)
    }

    /// Runs every rule at one SNR.
    pub fn run_point(&self, ebno_db: f64, keep_frames: bool) -> Result<PointOutcome> {
        let batch = self.cfg.sim.num_frames;
        let cap = match self.cfg.sim.min_bit_errors {
            Some(_) => self.cfg.sim.max_frames.unwrap_or(u64::MAX).max(batch),
            None => batch,
        };
        let mut tallies = vec![RuleTally::default(); self.cfg.rules.len()];
        let mut frames = Vec::new();
        let mut start = 0u64;
        loop {
            let end = start.saturating_add(batch).min(cap);
            let results: Vec<Vec<FrameResult>> = self.pool.install(|| {
                (start..end)
                    .into_par_iter()
                    .map(|i| self.run_frame_all_rules(ebno_db, i))
                    .collect::<Result<Vec<_>>>()
            })?;
            for per_rule in results {
                for (t, r) in tallies.iter_mut().zip(&per_rule) {
                    t.add(r);
                }
                if keep_frames {
                    frames.push(per_rule);
                }
            }
            start = end;
            let enough = match self.cfg.sim.min_bit_errors {
                None => true,
                Some(min) => tallies[0].bit_errors >= min,
            };
            if enough || start >= cap {
                break;
            }
        }
        Ok(PointOutcome {
            ebno_db,
            tallies,
            frames,
        })
    }

    /// Full SNR x rule sweep.
    pub fn run_sweep(&self) -> Result<SweepReport> {
        let mut rows = Vec::new();
        for &ebno in &self.cfg.channel.ebno_db {
            let point = self.run_point(ebno, false)?;
            rows.extend(self.rows_for(&point));
        }
        Ok(SweepReport {
            info_len: self.layout.info_len,
            rows,
        })
    }

    pub fn rows_for(&self, point: &PointOutcome) -> Vec<SweepRow> {
        let k = self.layout.info_len;
        point
            .tallies
            .iter()
            .zip(&self.labels)
            .map(|(t, label)| SweepRow {
                snr_db: point.ebno_db,
                channel: self.cfg.channel.kind.as_str().to_string(),
                rule: label.clone(),
                frames: t.frames,
                bit_errors: t.bit_errors,
                ber: t.ber(k),
                fer: t.fer(),
                avg_iterations: t.avg_iterations(),
                seed: self.cfg.sim.master_seed,
            })
            .collect()
    }

    /// Approximate MI of both decoders after every half iteration, decoding
    /// frame `frame_index` under `rule`.
    pub fn record_trajectory(
        &self,
        ebno_db: f64,
        frame_index: u64,
        rule: &RuleSpec,
    ) -> Result<Trajectory> {
        let (info, result) = self.decode_frame(ebno_db, frame_index, rule)?;
        let half_steps = (2.0 * result.iterations_used).round() as usize;
        let mut points = Vec::with_capacity(half_steps);
        let mut i2 = 0.0;
        for obs in &result.trace {
            let i1 = mutual_info_approx(&obs.app1, &MaxStar::Exact);
            points.push(TrajectoryPoint {
                half_iteration: points.len() as u32 + 1,
                i_app_dec1: i1,
                i_app_dec2: i2,
            });
            if points.len() == half_steps {
                break;
            }
            i2 = mutual_info_approx(&obs.app2, &MaxStar::Exact);
            points.push(TrajectoryPoint {
                half_iteration: points.len() as u32 + 1,
                i_app_dec1: i1,
                i_app_dec2: i2,
            });
        }
        Ok(Trajectory {
            points,
            iterations_used: result.iterations_used,
            bit_errors: count_errors(&info, &result.decisions),
        })
    }

    /// `CE(iter)/CE(1)` and `eps(iter)/eps(1)` for packets `0..num_packets`,
    /// each decoded for the full iteration budget.
    pub fn record_ratio_curves(&self, ebno_db: f64, num_packets: u64) -> Result<Vec<RatioPoint>> {
        if num_packets == 0 {
            return config_err("num_packets must be >= 1");
        }
        let per_packet: Vec<Vec<RatioPoint>> = self.pool.install(|| {
            (0..num_packets)
                .into_par_iter()
                .map(|p| {
                    let (_, result) = self.decode_full(ebno_db, p)?;
                    ratio_rows(p, &result.trace)
                })
                .collect::<Result<Vec<_>>>()
        })?;
        Ok(per_packet.into_iter().flatten().collect())
    }
}

fn ratio_rows(packet: u64, trace: &[IterationObservation]) -> Result<Vec<RatioPoint>> {
    let metrics = trace_metrics(trace)?;
    let ce1 = metrics[0].cross_entropy;
    let eps1 = metrics[0].epsilon;
    Ok(metrics
        .iter()
        .map(|m| RatioPoint {
            packet,
            iteration: m.iter,
            ce_ratio: ratio(m.cross_entropy, ce1),
            epsilon_ratio: ratio(m.epsilon, eps1),
        })
        .collect())
}

/// A zero reference means the first iteration was already perfect.
fn ratio(value: f64, reference: f64) -> f64 {
    if reference > 0.0 {
        value / reference
    } else {
        0.0
    }
}

fn count_errors(truth: &[u8], decisions: &[u8]) -> u64 {
    truth.iter().zip(decisions).filter(|(a, b)| a != b).count() as u64
}

/// Metrics for every observation of a trace; CE and sign changes of the
/// first iteration are taken against an all-zero extrinsic.
pub fn trace_metrics(trace: &[IterationObservation]) -> Result<Vec<IterationMetrics>> {
    let mut out = Vec::with_capacity(trace.len());
    let zeros;
    let mut prev: &[f64] = match trace.first() {
        Some(first) => {
            zeros = vec![0.0; first.ext2.len()];
            &zeros
        }
        None => return Ok(out),
    };
    for obs in trace {
        let eps = epsilon(&obs.app2);
        out.push(IterationMetrics {
            iter: obs.iter,
            epsilon: eps,
            i_app: 1.0 - eps,
            cross_entropy: cross_entropy(prev, &obs.ext2, &obs.app2, CeExponent::Magnitude)?,
            sign_changes: sign_changes(prev, &obs.ext2)?.0,
        });
        prev = &obs.ext2;
    }
    Ok(out)
}
