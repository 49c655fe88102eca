//! Detector clicks, time-tag files and the correlation estimators built on
//! them: start-stop histograms, comb-normalized g12, Cauchy-Schwarz R and the
//! heralded anti-correlation parameter α.
//!
//! Coincidences are counted per pair of records falling in the same pulse
//! window. With zero dead time a detector reports every photon (number
//! resolving); a dead time of at least one bin collapses simultaneous photons
//! into one click.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::source::{window_rng, SourceConfig, WindowEmission};

/// Signal 2 (herald and stop).
pub const CH_SIGNAL2: u8 = 1;
/// Signal 1 (trigger); first HBT output when split.
pub const CH_SIGNAL1: u8 = 2;
/// Second HBT output of signal 1.
pub const CH_SIGNAL1_SPLIT: u8 = 3;
/// Second HBT output of signal 2.
pub const CH_SIGNAL2_SPLIT: u8 = 4;

const DETECT_STREAM: u64 = 2;
const CHUNK: usize = 4096;

#[derive(Copy, Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Record {
    pub channel: u8,
    pub t_ns: u64,
}

/// Time-ordered detector clicks of one run.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TimestampStream {
    records: Vec<Record>,
    bin_width_ns: u64,
    pulse_period_ns: u64,
    n_windows: u64,
}

impl TimestampStream {
    /// Sorts `records` by time (then channel).
    pub fn new(mut records: Vec<Record>, bin_width_ns: u64, pulse_period_ns: u64, n_windows: u64) -> Result<Self> {
        if bin_width_ns == 0 {
            return Err(Error::invalid("bin width must be at least 1 ns"));
        }
        if pulse_period_ns == 0 {
            return Err(Error::invalid("pulse period must be positive"));
        }
        records.sort_unstable_by_key(|r| (r.t_ns, r.channel));
        Ok(TimestampStream {
            records,
            bin_width_ns,
            pulse_period_ns,
            n_windows,
        })
    }

    pub fn records(&self) -> &[Record] {
        &self.records
    }

    pub fn bin_width_ns(&self) -> u64 {
        self.bin_width_ns
    }

    pub fn pulse_period_ns(&self) -> u64 {
        self.pulse_period_ns
    }

    pub fn n_windows(&self) -> u64 {
        self.n_windows
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn channel_count(&self, channel: u8) -> u64 {
        self.records.iter().filter(|r| r.channel == channel).count() as u64
    }

    pub fn has_channel(&self, channel: u8) -> bool {
        self.records.iter().any(|r| r.channel == channel)
    }

    /// Per-window click counts on the requested channels, for windows with
    /// at least one click on any of them.
    pub fn window_counts<const N: usize>(&self, channels: [u8; N]) -> BTreeMap<u64, [u64; N]> {
        let mut out: BTreeMap<u64, [u64; N]> = BTreeMap::new();
        for r in &self.records {
            if let Some(k) = channels.iter().position(|&c| c == r.channel) {
                out.entry(r.t_ns / self.pulse_period_ns).or_insert([0; N])[k] += 1;
            }
        }
        out
    }

    pub fn to_text(&self) -> String {
        let mut out = String::with_capacity(16 * self.records.len() + 64);
        writeln!(out, "#bin_width_ns={}", self.bin_width_ns).unwrap();
        writeln!(out, "#pulse_period_ns={}", self.pulse_period_ns).unwrap();
        writeln!(out, "#n_windows={}", self.n_windows).unwrap();
        for r in &self.records {
            writeln!(out, "{},{}", r.channel, r.t_ns).unwrap();
        }
        out
    }

    pub fn from_text(text: &str, origin: &str) -> Result<Self> {
        let mut bin = None;
        let mut period = None;
        let mut windows = None;
        let mut records = Vec::new();
        let mut last = 0u64;
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(header) = line.strip_prefix('#') {
                let (key, value) = header
                    .split_once('=')
                    .ok_or_else(|| Error::parse(origin, line_no, "header must be `#key=value`"))?;
                let v: u64 = value
                    .trim()
                    .parse()
                    .map_err(|e| Error::parse(origin, line_no, format!("bad value for {key}: {e}")))?;
                match key.trim() {
                    "bin_width_ns" => bin = Some(v),
                    "pulse_period_ns" => period = Some(v),
                    "n_windows" => windows = Some(v),
                    other => return Err(Error::parse(origin, line_no, format!("unknown header `{other}`"))),
                }
                continue;
            }
            let (ch, t) = line
                .split_once(',')
                .ok_or_else(|| Error::parse(origin, line_no, "record must be `channel,time_ns`"))?;
            let channel: u8 = ch
                .trim()
                .parse()
                .map_err(|e| Error::parse(origin, line_no, format!("bad channel: {e}")))?;
            let t_ns: u64 = t
                .trim()
                .parse()
                .map_err(|e| Error::parse(origin, line_no, format!("bad time: {e}")))?;
            if t_ns < last {
                return Err(Error::parse(origin, line_no, "records are not sorted by time"));
            }
            last = t_ns;
            records.push(Record { channel, t_ns });
        }
        let missing = |k: &str| Error::parse(origin, 0, format!("missing header `#{k}=`"));
        let bin = bin.ok_or_else(|| missing("bin_width_ns"))?;
        let period = period.ok_or_else(|| missing("pulse_period_ns"))?;
        let windows = windows.ok_or_else(|| missing("n_windows"))?;
        if bin == 0 || period == 0 {
            return Err(Error::parse(origin, 0, "bin width and pulse period must be positive"));
        }
        Ok(TimestampStream {
            records,
            bin_width_ns: bin,
            pulse_period_ns: period,
            n_windows: windows,
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text, &path.display().to_string())
    }
}

/// Detector and time-tagger settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorConfig {
    pub bin_width_ns: u64,
    /// Gaussian timing jitter (standard deviation).
    pub jitter_ns: f64,
    pub dead_time_ns: u64,
    /// Split signal 1 on a 50:50 beamsplitter onto channels 2 and 3.
    pub hbt_signal1: bool,
    /// Split signal 2 onto channels 1 and 4.
    pub hbt_signal2: bool,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        DetectorConfig {
            bin_width_ns: 1,
            jitter_ns: 0.0,
            dead_time_ns: 0,
            hbt_signal1: false,
            hbt_signal2: false,
        }
    }
}

impl DetectorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.bin_width_ns == 0 {
            return Err(Error::Config {
                field: "detector.bin_width_ns".into(),
                msg: "must be at least 1".into(),
            });
        }
        if !(self.jitter_ns >= 0.0) || !self.jitter_ns.is_finite() {
            return Err(Error::Config {
                field: "detector.jitter_ns".into(),
                msg: "must be finite and non-negative".into(),
            });
        }
        Ok(())
    }
}

/// Survival probability of each arm's photons from emission to click.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct Transmissions {
    pub signal1: f64,
    pub signal2: f64,
}

impl Transmissions {
    pub fn from_source(source: &SourceConfig) -> Self {
        Transmissions {
            signal1: source.transmission_signal1,
            signal2: source.transmission_signal2,
        }
    }
}

/// Turns emitted photons into detector clicks. Deterministic in the inputs
/// and `seed`, independent of the thread count.
pub fn detect(
    emissions: &[WindowEmission],
    source: &SourceConfig,
    transmissions: Transmissions,
    detector: &DetectorConfig,
    seed: u64,
) -> Result<TimestampStream> {
    detector.validate()?;
    for (name, v) in [("signal1", transmissions.signal1), ("signal2", transmissions.signal2)] {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::invalid(format!("{name} transmission {v} outside [0, 1]")));
        }
    }
    let jitter = (detector.jitter_ns > 0.0).then(|| Normal::new(0.0, detector.jitter_ns).expect("finite sigma"));
    let period = source.pulse_period_ns;
    let bin = detector.bin_width_ns;

    let parts: Vec<Vec<Record>> = emissions
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut out = Vec::new();
            for e in chunk {
                let mut rng = window_rng(seed, DETECT_STREAM, e.window);
                let base = e.window * period;
                let n1 = e.pairs + e.signal1_only;
                let n2 = e.pairs + e.signal2_only;
                let mut emit = |rng: &mut rand_chacha::ChaCha8Rng, channel: u8, offset: u64| {
                    let mut t = (base + offset) as f64;
                    if let Some(j) = &jitter {
                        t += j.sample(rng);
                    }
                    let t = t.round().max(0.0) as u64;
                    out.push(Record {
                        channel,
                        t_ns: t - t % bin,
                    });
                };
                for _ in 0..n1 {
                    if rng.random_bool(transmissions.signal1) {
                        let ch = if detector.hbt_signal1 && rng.random_bool(0.5) {
                            CH_SIGNAL1_SPLIT
                        } else {
                            CH_SIGNAL1
                        };
                        emit(&mut rng, ch, source.signal1_offset_ns);
                    }
                }
                for _ in 0..n2 {
                    if rng.random_bool(transmissions.signal2) {
                        let ch = if detector.hbt_signal2 && rng.random_bool(0.5) {
                            CH_SIGNAL2_SPLIT
                        } else {
                            CH_SIGNAL2
                        };
                        emit(&mut rng, ch, source.signal2_offset_ns);
                    }
                }
            }
            out
        })
        .collect();

    let mut stream = TimestampStream::new(parts.concat(), bin, period, source.window_count)?;
    if detector.dead_time_ns > 0 {
        let mut last: BTreeMap<u8, u64> = BTreeMap::new();
        stream.records.retain(|r| {
            let keep = last.get(&r.channel).is_none_or(|&t| r.t_ns - t >= detector.dead_time_ns);
            if keep {
                last.insert(r.channel, r.t_ns);
            }
            keep
        });
    }
    Ok(stream)
}

/// Start-stop delay histogram, `delay = t_stop − t_trigger`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CoincidenceHistogram {
    pub trigger: u8,
    pub stop: u8,
    pub bin_width_ns: u64,
    pub pulse_period_ns: u64,
    /// Delay of the first bin.
    pub min_delay_ns: i64,
    pub counts: Vec<u64>,
}

impl CoincidenceHistogram {
    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn delay_of(&self, bin: usize) -> i64 {
        self.min_delay_ns + bin as i64 * self.bin_width_ns as i64
    }

    fn bin_of(&self, delay_ns: i64) -> Option<usize> {
        let off = delay_ns - self.min_delay_ns;
        if off < 0 {
            return None;
        }
        let b = (off as u64 / self.bin_width_ns) as usize;
        (b < self.counts.len()).then_some(b)
    }

    /// Counts with delay in `[lo, hi]`.
    pub fn integrate(&self, lo: i64, hi: i64) -> u64 {
        (0..self.counts.len())
            .filter(|&b| (lo..=hi).contains(&self.delay_of(b)))
            .map(|b| self.counts[b])
            .sum()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        writeln!(out, "#trigger={}", self.trigger).unwrap();
        writeln!(out, "#stop={}", self.stop).unwrap();
        writeln!(out, "#bin_width_ns={}", self.bin_width_ns).unwrap();
        writeln!(out, "#pulse_period_ns={}", self.pulse_period_ns).unwrap();
        out.push_str("delay_ns,count\n");
        for (b, c) in self.counts.iter().enumerate() {
            writeln!(out, "{},{}", self.delay_of(b), c).unwrap();
        }
        out
    }

    pub fn from_csv(text: &str, origin: &str) -> Result<Self> {
        let mut meta: BTreeMap<String, u64> = BTreeMap::new();
        let mut rows: Vec<(i64, u64)> = Vec::new();
        let mut saw_header = false;
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(h) = line.strip_prefix('#') {
                let (k, v) = h
                    .split_once('=')
                    .ok_or_else(|| Error::parse(origin, line_no, "header must be `#key=value`"))?;
                let v = v
                    .trim()
                    .parse()
                    .map_err(|e| Error::parse(origin, line_no, format!("bad value for {k}: {e}")))?;
                meta.insert(k.trim().to_string(), v);
                continue;
            }
            if !saw_header {
                if line != "delay_ns,count" {
                    return Err(Error::parse(origin, line_no, "expected header `delay_ns,count`"));
                }
                saw_header = true;
                continue;
            }
            let (d, c) = line
                .split_once(',')
                .ok_or_else(|| Error::parse(origin, line_no, "row must be `delay_ns,count`"))?;
            let d: i64 = d
                .trim()
                .parse()
                .map_err(|e| Error::parse(origin, line_no, format!("bad delay: {e}")))?;
            let c: u64 = c
                .trim()
                .parse()
                .map_err(|e| Error::parse(origin, line_no, format!("bad count: {e}")))?;
            rows.push((d, c));
        }
        let get = |k: &str| {
            meta.get(k)
                .copied()
                .ok_or_else(|| Error::parse(origin, 0, format!("missing header `#{k}=`")))
        };
        let bin = get("bin_width_ns")?;
        if bin == 0 {
            return Err(Error::parse(origin, 0, "bin width must be positive"));
        }
        let min_delay_ns = rows.first().map_or(0, |r| r.0);
        for (k, (d, _)) in rows.iter().enumerate() {
            if *d != min_delay_ns + k as i64 * bin as i64 {
                return Err(Error::parse(origin, 0, format!("row {k} breaks the uniform delay grid")));
            }
        }
        Ok(CoincidenceHistogram {
            trigger: u8::try_from(get("trigger")?).map_err(|e| Error::parse(origin, 0, e.to_string()))?,
            stop: u8::try_from(get("stop")?).map_err(|e| Error::parse(origin, 0, e.to_string()))?,
            bin_width_ns: bin,
            pulse_period_ns: get("pulse_period_ns")?,
            min_delay_ns,
            counts: rows.into_iter().map(|r| r.1).collect(),
        })
    }
}

/// For every trigger click, counts each stop click with `|t_stop − t_trigger| ≤ span_ns`.
pub fn histogram(stream: &TimestampStream, trigger: u8, stop: u8, span_ns: u64) -> Result<CoincidenceHistogram> {
    for ch in [trigger, stop] {
        if !stream.is_empty() && !stream.has_channel(ch) {
            return Err(Error::invalid(format!("channel {ch} has no records in the stream")));
        }
    }
    let bin = stream.bin_width_ns();
    let span_bins = span_ns.div_ceil(bin) as i64;
    let min_delay_ns = -span_bins * bin as i64;
    let mut hist = CoincidenceHistogram {
        trigger,
        stop,
        bin_width_ns: bin,
        pulse_period_ns: stream.pulse_period_ns(),
        min_delay_ns,
        counts: vec![0; (2 * span_bins + 1) as usize],
    };
    let stops: Vec<u64> = stream.records().iter().filter(|r| r.channel == stop).map(|r| r.t_ns).collect();
    let span = span_ns as i64;
    let mut lo = 0usize;
    for r in stream.records().iter().filter(|r| r.channel == trigger) {
        let t = r.t_ns as i64;
        while lo < stops.len() && (stops[lo] as i64) < t - span {
            lo += 1;
        }
        let mut k = lo;
        while k < stops.len() && (stops[k] as i64) <= t + span {
            let d = stops[k] as i64 - t;
            let b = hist.bin_of(d).expect("delay inside span");
            hist.counts[b] += 1;
            k += 1;
        }
    }
    Ok(hist)
}

/// Ratio estimate with first-order Poisson error.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub std_error: f64,
}

/// First comb peak over the next one, each integrated over `peak_window_ns`.
///
/// `first_peak_ns` fixes the correlated delay; when absent the fullest bin is
/// used, which biases accidental-only data upward.
pub fn g12_comb_normalized(
    hist: &CoincidenceHistogram,
    peak_window_ns: u64,
    first_peak_ns: Option<i64>,
) -> Result<Estimate> {
    let center = match first_peak_ns {
        Some(c) => c,
        None => {
            let (b, _) = hist
                .counts
                .iter()
                .enumerate()
                .max_by_key(|(b, c)| (**c, std::cmp::Reverse(*b)))
                .ok_or_else(|| Error::estimator("empty histogram"))?;
            hist.delay_of(b)
        }
    };
    let period = hist.pulse_period_ns as i64;
    let half = (peak_window_ns / 2) as i64;
    let max_delay = hist.delay_of(hist.counts.len().saturating_sub(1));
    let second = if center + period + half <= max_delay {
        center + period
    } else if center - period - half >= hist.min_delay_ns {
        center - period
    } else {
        return Err(Error::estimator("histogram span holds fewer than two comb peaks"));
    };
    let first = hist.integrate(center - half, center + half) as f64;
    let next = hist.integrate(second - half, second + half) as f64;
    if next == 0.0 {
        return Err(Error::estimator("second comb peak is empty; g12 undefined"));
    }
    let value = first / next;
    let rel = if first > 0.0 { (1.0 / first + 1.0 / next).sqrt() } else { (1.0 / next).sqrt() };
    Ok(Estimate {
        value,
        std_error: if first > 0.0 { value * rel } else { rel / next.sqrt() },
    })
}

/// `g12² / (g11·g22)`; above 1 certifies non-classical correlation.
#[allow(non_snake_case)]
pub fn cauchy_schwarz_R(g12: f64, g11: f64, g22: f64) -> Result<f64> {
    if !(g11 > 0.0) || !(g22 > 0.0) {
        return Err(Error::estimator("auto-correlations must be positive"));
    }
    Ok(g12 * g12 / (g11 * g22))
}

/// [`cauchy_schwarz_R`] with errors propagated to first order.
#[allow(non_snake_case)]
pub fn cauchy_schwarz_R_estimate(g12: Estimate, g11: Estimate, g22: Estimate) -> Result<Estimate> {
    let value = cauchy_schwarz_R(g12.value, g11.value, g22.value)?;
    let rel2 = |e: Estimate| if e.value != 0.0 { (e.std_error / e.value).powi(2) } else { 0.0 };
    let rel = (4.0 * rel2(g12) + rel2(g11) + rel2(g22)).sqrt();
    Ok(Estimate {
        value,
        std_error: value * rel,
    })
}

/// Herald singles, herald-gated twofolds on each HBT output, and threefolds.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Default)]
pub struct HbtCounts {
    pub p1: u64,
    pub p12: u64,
    pub p13: u64,
    pub p123: u64,
}

impl HbtCounts {
    /// Counts from the herald channel and the two outputs of the split arm.
    pub fn from_stream(stream: &TimestampStream, herald: u8, out_a: u8, out_b: u8) -> Self {
        let mut c = HbtCounts::default();
        for [h, a, b] in stream.window_counts([herald, out_a, out_b]).into_values() {
            c.p1 += h;
            c.p12 += h * a;
            c.p13 += h * b;
            c.p123 += h * a * b;
        }
        c
    }

    pub fn scaled(&self, k: u64) -> Self {
        HbtCounts {
            p1: self.p1 * k,
            p12: self.p12 * k,
            p13: self.p13 * k,
            p123: self.p123 * k,
        }
    }
}

/// `P1·P123 / (P12·P13)`: 0 for a single photon, 1/2 for two photons, ≥ 1 for classical light.
pub fn alpha(c: &HbtCounts) -> Result<Estimate> {
    if c.p12 == 0 || c.p13 == 0 {
        return Err(Error::estimator("twofold coincidences are zero; α undefined"));
    }
    let (p1, p12, p13, p123) = (c.p1 as f64, c.p12 as f64, c.p13 as f64, c.p123 as f64);
    let value = p1 * p123 / (p12 * p13);
    // with no threefolds, one count sets the scale of the error
    let std_error = if c.p123 == 0 {
        p1 / (p12 * p13)
    } else {
        value * (1.0 / p1 + 1.0 / p123 + 1.0 / p12 + 1.0 / p13).sqrt()
    };
    Ok(Estimate { value, std_error })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::source::{sample_emissions, PhotonStatistics};
    use proptest::prelude::*;

    fn stream(records: &[(u8, u64)], period: u64, windows: u64) -> TimestampStream {
        TimestampStream::new(
            records.iter().map(|&(channel, t_ns)| Record { channel, t_ns }).collect(),
            1,
            period,
            windows,
        )
        .unwrap()
    }

    #[test]
    fn empty_stream_gives_empty_histogram() {
        let s = stream(&[], 1000, 10);
        let h = histogram(&s, CH_SIGNAL1, CH_SIGNAL2, 500).unwrap();
        assert_eq!(h.total(), 0);
        assert_eq!(h.counts.len(), 1001);
    }

    #[test]
    fn single_pair_lands_at_380() {
        let s = stream(&[(CH_SIGNAL1, 0), (CH_SIGNAL2, 380)], 1000, 1);
        let h = histogram(&s, CH_SIGNAL1, CH_SIGNAL2, 1500).unwrap();
        assert_eq!(h.total(), 1);
        assert_eq!(h.counts[h.bin_of(380).unwrap()], 1);
    }

    #[test]
    fn periodic_pairs_form_a_comb() {
        let mut recs = Vec::new();
        for w in 0..50u64 {
            recs.push((CH_SIGNAL1, w * 1000));
            recs.push((CH_SIGNAL2, w * 1000 + 380));
        }
        let s = stream(&recs, 1000, 50);
        let h = histogram(&s, CH_SIGNAL1, CH_SIGNAL2, 2500).unwrap();
        let peaks: Vec<i64> = (0..h.counts.len()).filter(|&b| h.counts[b] > 0).map(|b| h.delay_of(b)).collect();
        assert_eq!(peaks, vec![-1620, -620, 380, 1380, 2380]);
        assert_eq!(h.counts[h.bin_of(380).unwrap()], 50);
        assert_eq!(h.counts[h.bin_of(1380).unwrap()], 49);
    }

    #[test]
    fn unknown_channel_is_rejected() {
        let s = stream(&[(CH_SIGNAL1, 0)], 1000, 1);
        assert!(histogram(&s, CH_SIGNAL1, 9, 10).is_err());
    }

    fn synthetic(first: u64, second: u64) -> CoincidenceHistogram {
        let mut counts = vec![0u64; 3001];
        counts[1500 + 380] = first;
        counts[1500 + 1380] = second;
        CoincidenceHistogram {
            trigger: CH_SIGNAL1,
            stop: CH_SIGNAL2,
            bin_width_ns: 1,
            pulse_period_ns: 1000,
            min_delay_ns: -1500,
            counts,
        }
    }

    #[test]
    fn comb_ratio_examples() {
        let g = g12_comb_normalized(&synthetic(1200, 100), 200, None).unwrap();
        assert!((g.value - 12.0).abs() < 1e-12);
        let g = g12_comb_normalized(&synthetic(100, 100), 200, Some(380)).unwrap();
        assert!((g.value - 1.0).abs() < 1e-12);
        assert!(matches!(g12_comb_normalized(&synthetic(100, 0), 200, Some(380)), Err(Error::Estimator(_))));
    }

    #[test]
    fn cauchy_schwarz_examples() {
        assert!((cauchy_schwarz_R(12.0, 2.0, 2.0).unwrap() - 36.0).abs() < 1e-12);
        assert!((cauchy_schwarz_R(2.0, 2.0, 2.0).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(cauchy_schwarz_R(0.0, 2.0, 2.0).unwrap(), 0.0);
        assert!(cauchy_schwarz_R(1.0, 0.0, 2.0).is_err());
    }

    #[test]
    fn alpha_examples() {
        let c = HbtCounts {
            p1: 1000,
            p12: 100,
            p13: 100,
            p123: 5,
        };
        assert!((alpha(&c).unwrap().value - 0.5).abs() < 1e-12);
        assert!(alpha(&HbtCounts { p12: 0, ..c }).is_err());
    }

    #[test]
    fn transmission_extremes() {
        let src = SourceConfig {
            pair_rate_per_window: 0.3,
            statistics: PhotonStatistics::Poisson,
            accidental_rate_signal1_per_window: 0.05,
            window_count: 20_000,
            ..SourceConfig::default()
        };
        let em = sample_emissions(&src, 1).unwrap();
        let det = DetectorConfig::default();
        let zero = detect(&em, &src, Transmissions { signal1: 0.0, signal2: 0.0 }, &det, 2).unwrap();
        assert!(zero.is_empty());
        let src_noacc = SourceConfig {
            accidental_rate_signal1_per_window: 0.0,
            ..src.clone()
        };
        let em = sample_emissions(&src_noacc, 1).unwrap();
        let all = detect(&em, &src_noacc, Transmissions { signal1: 1.0, signal2: 1.0 }, &det, 2).unwrap();
        let emitted: u64 = em.iter().map(|e| 2 * e.pairs as u64).sum();
        assert_eq!(all.len() as u64, emitted);
    }

    #[test]
    fn timestamp_text_round_trip() {
        let s = stream(&[(2, 0), (1, 380), (3, 1000), (1, 1380)], 1000, 2);
        let text = s.to_text();
        let back = TimestampStream::from_text(&text, "mem").unwrap();
        assert_eq!(back, s);
        assert_eq!(back.to_text(), text);
    }

    #[test]
    fn timestamp_parse_errors_report_lines() {
        let text = "#bin_width_ns=1\n#pulse_period_ns=1000\n#n_windows=1\n2,10\n1,5\n";
        match TimestampStream::from_text(text, "f.txt") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 5),
            other => panic!("{other:?}"),
        }
        assert!(TimestampStream::from_text("2,10\n", "f").is_err());
    }

    #[test]
    fn histogram_csv_round_trip() {
        let h = synthetic(1200, 100);
        let csv = h.to_csv();
        let back = CoincidenceHistogram::from_csv(&csv, "h.csv").unwrap();
        assert_eq!(back, h);
        assert_eq!(back.to_csv(), csv);
    }

    #[test]
    fn dead_time_collapses_simultaneous_photons() {
        let src = SourceConfig {
            pair_rate_per_window: 1.0,
            statistics: PhotonStatistics::TwoPair,
            window_count: 1000,
            ..SourceConfig::default()
        };
        let em = sample_emissions(&src, 4).unwrap();
        let det = DetectorConfig {
            dead_time_ns: 10,
            ..DetectorConfig::default()
        };
        let s = detect(&em, &src, Transmissions { signal1: 1.0, signal2: 1.0 }, &det, 1).unwrap();
        let per_window = s.window_counts([CH_SIGNAL1]);
        assert!(per_window.values().all(|c| c[0] == 1));
    }

    proptest! {
        #[test]
        fn histogram_total_equals_pairs_within_span(
            times in proptest::collection::vec((1u8..=2, 0u64..5000), 0..60),
            span in 0u64..3000,
        ) {
            let s = stream(&times, 1000, 5);
            let t1: Vec<i64> = s.records().iter().filter(|r| r.channel == 2).map(|r| r.t_ns as i64).collect();
            let t2: Vec<i64> = s.records().iter().filter(|r| r.channel == 1).map(|r| r.t_ns as i64).collect();
            prop_assume!(!t1.is_empty() && !t2.is_empty());
            let h = histogram(&s, 2, 1, span).unwrap();
            let brute = t1.iter().flat_map(|a| t2.iter().map(move |b| b - a)).filter(|d| d.abs() <= span as i64).count();
            prop_assert_eq!(h.total() as usize, brute);
        }

        #[test]
        fn comb_ratio_scale_invariant(first in 1u64..5000, second in 1u64..5000, k in 1u64..50) {
            let a = g12_comb_normalized(&synthetic(first, second), 200, Some(380)).unwrap().value;
            let b = g12_comb_normalized(&synthetic(first * k, second * k), 200, Some(380)).unwrap().value;
            prop_assert!((a - b).abs() <= 1e-12 * a.max(1.0));
        }

        #[test]
        fn alpha_scale_invariant(p1 in 1u64..10_000, p12 in 1u64..1000, p13 in 1u64..1000, p123 in 0u64..100, k in 1u64..100) {
            let c = HbtCounts { p1, p12, p13, p123 };
            let a = alpha(&c).unwrap().value;
            let b = alpha(&c.scaled(k)).unwrap().value;
            prop_assert!((a - b).abs() <= 1e-12 * a.max(1.0));
        }
    }
}
