//! Monte Carlo block-error estimation, SNR sweeps, and codebook analysis.
//!
//! Trial `i` of an estimate draws its message and all channel randomness from
//! `rng.trial(i)`, so results do not depend on batching or scheduling. A sweep
//! gives grid point `k` its own stream `k` under the master seed.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use num_complex::Complex;
use rayon::prelude::*;

use crate::autoencoder::{decoder_features, scaled_matched_filter, Mode, TrainedSystem};
use crate::channel::{noise_param, transmit, transmit_awgn, ChannelMode, SnrPoint};
use crate::classical::{
    bits_message, bpsk_detect, bpsk_map, coherent_combine, message_bits, orth_detect, orth_encode,
    Hamming74, CodeBits,
};
use crate::error::{invalid, Error, Result};
use crate::neural::Matrix;
use crate::numerics::{FadingSpec, Rng};
use crate::scalar::Real;

/// Trials handed to [`Chain::run_many`] at once.
const CHUNK: usize = 4096;

pub const CSV_HEADER: &str = "snr_db,bler,trials,stderr,label";

/// Orthogonality thresholds on `max |<c_i, c_j>| / n`.
pub const ORTHOGONAL_BELOW: f64 = 0.05;
pub const NON_ORTHOGONAL_ABOVE: f64 = 0.8;

pub fn indicator(m: usize, m_hat: usize) -> u8 {
    u8::from(m != m_hat)
}

/// A complete transmit-channel-receive pipeline for one message.
pub trait Chain: Sync {
    fn label(&self) -> String;

    fn messages(&self) -> usize;

    /// Sends `message` at `snr_db` using `rng` for every random draw and
    /// returns the receiver's decision.
    fn run(&self, message: usize, snr_db: f64, rng: &mut Rng) -> Result<usize>;

    /// Runs several independent trials. Implementations may batch, but must
    /// give the same decisions as calling [`Chain::run`] on each pair.
    fn run_many(&self, messages: &[usize], snr_db: f64, rngs: &mut [Rng]) -> Result<Vec<usize>> {
        messages.iter().zip(rngs.iter_mut()).map(|(&m, r)| self.run(m, snr_db, r)).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BlerPoint {
    pub snr_db: f64,
    pub bler: f64,
    pub trials: u64,
    pub stderr: f64,
}

impl BlerPoint {
    pub fn new(snr_db: f64, errors: u64, trials: u64) -> Self {
        let bler = errors as f64 / trials as f64;
        Self { snr_db, bler, trials, stderr: binomial_stderr(bler, trials) }
    }
}

pub fn binomial_stderr(p: f64, trials: u64) -> f64 {
    (p * (1.0 - p) / trials as f64).sqrt()
}

/// Runs trials `range` of `rng`'s stream and returns per-trial `(m, m_hat)`.
fn run_trials(chain: &dyn Chain, snr_db: f64, range: std::ops::Range<u64>, rng: &Rng) -> Result<Vec<(usize, usize)>> {
    let m_count = chain.messages();
    let mut out = Vec::with_capacity((range.end - range.start) as usize);
    let mut start = range.start;
    while start < range.end {
        let end = (start + CHUNK as u64).min(range.end);
        let mut rngs: Vec<Rng> = (start..end).map(|i| rng.trial(i)).collect();
        let messages: Vec<usize> = rngs.iter_mut().map(|r| r.index(m_count)).collect();
        let decisions = chain.run_many(&messages, snr_db, &mut rngs)?;
        if decisions.len() != messages.len() {
            return Err(invalid("chain returned the wrong number of decisions"));
        }
        out.extend(messages.into_iter().zip(decisions));
        start = end;
    }
    Ok(out)
}

/// Counts block errors over trials `range`.
pub fn count_errors(chain: &dyn Chain, snr_db: f64, range: std::ops::Range<u64>, rng: &Rng) -> Result<u64> {
    Ok(run_trials(chain, snr_db, range, rng)?
        .into_iter()
        .map(|(m, m_hat)| u64::from(indicator(m, m_hat)))
        .sum())
}

/// Empirical block error rate with uniformly drawn messages.
pub fn estimate_bler(chain: &dyn Chain, snr_db: f64, trials: u64, rng: &Rng) -> Result<BlerPoint> {
    if trials == 0 {
        return Err(invalid("need at least one trial"));
    }
    let errors = count_errors(chain, snr_db, 0..trials, rng)?;
    Ok(BlerPoint::new(snr_db, errors, trials))
}

/// Fraction of wrong data bits when message `m` carries the `log2(M)` bits
/// of its binary index.
pub fn estimate_bit_error_rate(chain: &dyn Chain, snr_db: f64, trials: u64, rng: &Rng) -> Result<f64> {
    let m = chain.messages();
    if !m.is_power_of_two() || m < 2 {
        return Err(invalid(format!("bit error rate needs a power-of-two message count, got {m}")));
    }
    if trials == 0 {
        return Err(invalid("need at least one trial"));
    }
    let bits = m.trailing_zeros() as u64;
    let wrong: u64 = run_trials(chain, snr_db, 0..trials, rng)?
        .into_iter()
        .map(|(a, b)| u64::from((a ^ b).count_ones()))
        .sum();
    Ok(wrong as f64 / (bits * trials) as f64)
}

/// `count` equispaced points from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..count).map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64).collect(),
    }
}

/// 20 points from -2 dB to 20 dB.
pub fn default_grid() -> Vec<f64> {
    linspace(-2.0, 20.0, 20)
}

#[derive(Clone, Debug, PartialEq)]
pub struct BlerCurve {
    pub label: String,
    pub points: Vec<BlerPoint>,
}

/// Evaluates every grid point; point `k` uses stream `k` of `seed`.
pub fn sweep(chain: &dyn Chain, grid: &[f64], trials: u64, seed: u64) -> Result<BlerCurve> {
    if grid.is_empty() {
        return Err(invalid("empty SNR grid"));
    }
    let points = grid
        .par_iter()
        .enumerate()
        .map(|(k, &snr_db)| estimate_bler(chain, snr_db, trials, &Rng::new(seed, k as u64)))
        .collect::<Result<Vec<_>>>()?;
    Ok(BlerCurve { label: chain.label(), points })
}

fn csv_field(label: &str) -> String {
    if label.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", label.replace('"', "\"\""))
    } else {
        label.to_string()
    }
}

impl BlerCurve {
    pub fn to_csv(&self) -> String {
        let mut s = String::from(CSV_HEADER);
        s.push('\n');
        let label = csv_field(&self.label);
        for p in &self.points {
            let _ = writeln!(s, "{},{},{},{},{}", p.snr_db, p.bler, p.trials, p.stderr, label);
        }
        s
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(self.to_csv().as_bytes())?;
        Ok(())
    }

    /// Parses the output of [`BlerCurve::to_csv`].
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        if lines.next().map(str::trim_end) != Some(CSV_HEADER) {
            return Err(Error::Format(format!("expected CSV header `{CSV_HEADER}`")));
        }
        let mut label = None;
        let mut points = Vec::new();
        for (i, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let bad = |what: &str| Error::Format(format!("CSV row {}: {what}", i + 2));
            let mut parts = line.splitn(5, ',');
            let mut num = |name: &str| -> Result<&str> { parts.next().ok_or_else(|| bad(name)) };
            let snr_db = num("snr_db")?.parse().map_err(|_| bad("snr_db"))?;
            let bler = num("bler")?.parse().map_err(|_| bad("bler"))?;
            let trials = num("trials")?.parse().map_err(|_| bad("trials"))?;
            let stderr = num("stderr")?.parse().map_err(|_| bad("stderr"))?;
            let raw = num("label")?;
            let row_label = match raw.strip_prefix('"') {
                Some(rest) => rest.strip_suffix('"').ok_or_else(|| bad("label"))?.replace("\"\"", "\""),
                None => raw.to_string(),
            };
            if label.get_or_insert_with(|| row_label.clone()) != &row_label {
                return Err(bad("mixed labels"));
            }
            points.push(BlerPoint { snr_db, bler, trials, stderr });
        }
        Ok(Self { label: label.unwrap_or_default(), points })
    }

    /// Point whose SNR is closest to `snr_db`.
    pub fn nearest(&self, snr_db: f64) -> Option<&BlerPoint> {
        self.points
            .iter()
            .min_by(|a, b| (a.snr_db - snr_db).abs().total_cmp(&(b.snr_db - snr_db).abs()))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Orthogonality {
    Orthogonal,
    NonOrthogonal,
    Indeterminate,
}

impl Orthogonality {
    pub fn name(self) -> &'static str {
        match self {
            Self::Orthogonal => "orthogonal",
            Self::NonOrthogonal => "non_orthogonal",
            Self::Indeterminate => "indeterminate",
        }
    }
}

impl std::fmt::Display for Orthogonality {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GramReport {
    pub gram: Matrix<f64>,
    pub energies: Vec<f64>,
    pub max_offdiag_normalized: f64,
    pub classification: Orthogonality,
}

pub fn classify(max_offdiag_normalized: f64) -> Orthogonality {
    if max_offdiag_normalized < ORTHOGONAL_BELOW {
        Orthogonality::Orthogonal
    } else if max_offdiag_normalized > NON_ORTHOGONAL_ABOVE {
        Orthogonality::NonOrthogonal
    } else {
        Orthogonality::Indeterminate
    }
}

/// Gram matrix of the codebook rows, normalized by the block length.
pub fn analyze_codebook<T: Real>(codebook: &Matrix<T>) -> GramReport {
    let (m, n) = codebook.shape();
    let rows: Vec<Vec<f64>> =
        codebook.row_iter().map(|r| r.iter().map(|v| v.as_f64()).collect()).collect();
    let mut gram = Matrix::zeros(m, m);
    for i in 0..m {
        for j in i..m {
            let g: f64 = rows[i].iter().zip(&rows[j]).map(|(a, b)| a * b).sum();
            gram[(i, j)] = g;
            gram[(j, i)] = g;
        }
    }
    let energies = (0..m).map(|i| gram[(i, i)]).collect();
    let mut max_off = 0.0f64;
    if n > 0 {
        for i in 0..m {
            for j in 0..m {
                if i != j {
                    max_off = max_off.max(gram[(i, j)].abs() / n as f64);
                }
            }
        }
    }
    GramReport { gram, energies, max_offdiag_normalized: max_off, classification: classify(max_off) }
}

/// Two-decimal rendering with `-0.00` folded to `0.00`.
pub fn format_entry(v: f64) -> String {
    let s = format!("{v:.2}");
    match s.strip_prefix('-') {
        Some(rest) if rest.chars().all(|c| c == '0' || c == '.') => rest.to_string(),
        _ => s,
    }
}

/// One `[a, b, ...]` line per codeword.
pub fn render_codebook<T: Real>(codebook: &Matrix<T>) -> String {
    let mut s = String::new();
    for row in codebook.row_iter() {
        let cells: Vec<String> = row.iter().map(|v| format_entry(v.as_f64())).collect();
        let _ = writeln!(s, "[{}]", cells.join(", "));
    }
    s
}

pub fn parse_codebook(text: &str) -> Result<Matrix<f64>> {
    let mut rows = Vec::new();
    for line in text.lines().map(str::trim).filter(|l| !l.is_empty()) {
        let inner = line
            .strip_prefix('[')
            .and_then(|l| l.strip_suffix(']'))
            .ok_or_else(|| Error::Format(format!("bad codebook row `{line}`")))?;
        let row = inner
            .split(',')
            .map(|c| c.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::Format(format!("bad codebook entry in `{line}`: {e}")))?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Format("empty codebook".into()));
    }
    Matrix::from_rows(&rows).map_err(|e| Error::Format(e.to_string()))
}

// ---------------------------------------------------------------------------
// Reference chains

/// One bit over two orthogonal unit chips, energy detection, no CSI.
#[derive(Clone, Debug)]
pub struct OrthClassical {
    pub fading: FadingSpec,
}

impl Default for OrthClassical {
    fn default() -> Self {
        Self { fading: FadingSpec::rayleigh() }
    }
}

impl Chain for OrthClassical {
    fn label(&self) -> String {
        "orth_classical".into()
    }

    fn messages(&self) -> usize {
        2
    }

    fn run(&self, message: usize, snr_db: f64, rng: &mut Rng) -> Result<usize> {
        let n0 = noise_param(SnrPoint::uncoded(snr_db))?;
        let c = orth_encode::<f64>(message as u8);
        let out = transmit(&c, &self.fading, n0, rng, ChannelMode::NoCsi);
        Ok(orth_detect(&[out.y[0], out.y[1]]) as usize)
    }
}

fn hamming_chain_bits(code: &Hamming74, message: usize) -> Result<CodeBits> {
    if message >= 16 {
        return Err(invalid(format!("message {message} out of range 0..16")));
    }
    Ok(code.encode(&message_bits(message)))
}

/// Hamming(7,4), each code bit on two orthogonal chips (14 channel uses),
/// energy detection and syndrome decoding.
#[derive(Clone, Debug)]
pub struct HammingHardNoCsi {
    pub fading: FadingSpec,
    code: Hamming74,
}

impl Default for HammingHardNoCsi {
    fn default() -> Self {
        Self { fading: FadingSpec::rayleigh(), code: Hamming74::new() }
    }
}

impl Chain for HammingHardNoCsi {
    fn label(&self) -> String {
        "hamming_hard_nocsi".into()
    }

    fn messages(&self) -> usize {
        16
    }

    fn run(&self, message: usize, snr_db: f64, rng: &mut Rng) -> Result<usize> {
        let n0 = noise_param(SnrPoint::coded(snr_db, 4.0 / 7.0))?;
        let bits = hamming_chain_bits(&self.code, message)?;
        let chips: Vec<f64> = bits.iter().flat_map(|&b| orth_encode::<f64>(b)).collect();
        let out = transmit(&chips, &self.fading, n0, rng, ChannelMode::NoCsi);
        let mut hard = [0u8; 7];
        for (d, pair) in hard.iter_mut().zip(out.y.chunks_exact(2)) {
            *d = orth_detect(&[pair[0], pair[1]]);
        }
        Ok(bits_message(&self.code.syndrome_decode(&hard)))
    }
}

/// Four coherent BPSK symbols with receiver CSI, uncoded SNR.
#[derive(Clone, Debug)]
pub struct UncodedCsir {
    pub fading: FadingSpec,
}

impl Default for UncodedCsir {
    fn default() -> Self {
        Self { fading: FadingSpec::rayleigh() }
    }
}

impl Chain for UncodedCsir {
    fn label(&self) -> String {
        "uncoded_csir".into()
    }

    fn messages(&self) -> usize {
        16
    }

    fn run(&self, message: usize, snr_db: f64, rng: &mut Rng) -> Result<usize> {
        if message >= 16 {
            return Err(invalid(format!("message {message} out of range 0..16")));
        }
        let n0 = noise_param(SnrPoint::uncoded(snr_db))?;
        let bits = message_bits(message);
        let x: Vec<f64> = bits.iter().map(|&b| bpsk_map(b)).collect();
        let out = transmit(&x, &self.fading, n0, rng, ChannelMode::Csir);
        let h = out.h.as_deref().unwrap_or_default();
        let mut hat = [0u8; 4];
        for (d, (&y, &h)) in hat.iter_mut().zip(out.y.iter().zip(h)) {
            *d = bpsk_detect(coherent_combine(y, h));
        }
        Ok(bits_message(&hat))
    }
}

/// Which receiver a coherent Hamming chain uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HammingReceiver {
    /// Per-symbol coherent decisions, then syndrome decoding.
    Hard,
    /// Minimum-distance search over the 16 faded codewords.
    SoftMld,
}

/// Hamming(7,4) on coherent BPSK with receiver CSI, rate-4/7 noise.
#[derive(Clone, Debug)]
pub struct HammingCsir {
    pub fading: FadingSpec,
    pub receiver: HammingReceiver,
    code: Hamming74,
}

impl HammingCsir {
    pub fn hard() -> Self {
        Self { fading: FadingSpec::rayleigh(), receiver: HammingReceiver::Hard, code: Hamming74::new() }
    }

    pub fn soft_mld() -> Self {
        Self { receiver: HammingReceiver::SoftMld, ..Self::hard() }
    }
}

impl Chain for HammingCsir {
    fn label(&self) -> String {
        match self.receiver {
            HammingReceiver::Hard => "hamming_hard_csir".into(),
            HammingReceiver::SoftMld => "hamming_mld_csir".into(),
        }
    }

    fn messages(&self) -> usize {
        16
    }

    fn run(&self, message: usize, snr_db: f64, rng: &mut Rng) -> Result<usize> {
        let n0 = noise_param(SnrPoint::coded(snr_db, 4.0 / 7.0))?;
        let bits = hamming_chain_bits(&self.code, message)?;
        let x: Vec<f64> = bits.iter().map(|&b| bpsk_map(b)).collect();
        let out = transmit(&x, &self.fading, n0, rng, ChannelMode::Csir);
        let h = out.h.as_deref().unwrap_or_default();
        let data = match self.receiver {
            HammingReceiver::Hard => {
                let mut hard = [0u8; 7];
                for (d, (&y, &h)) in hard.iter_mut().zip(out.y.iter().zip(h)) {
                    *d = bpsk_detect(coherent_combine(y, h));
                }
                self.code.syndrome_decode(&hard)
            }
            HammingReceiver::SoftMld => self.code.soft_mld(&out.y, h),
        };
        Ok(bits_message(&data))
    }
}

/// Names accepted by [`baseline`].
pub const BASELINES: [&str; 5] =
    ["orth_classical", "hamming_hard_nocsi", "uncoded_csir", "hamming_hard_csir", "hamming_mld_csir"];

/// Reference chain by name, over `fading`.
pub fn baseline(name: &str, fading: FadingSpec) -> Result<Box<dyn Chain>> {
    Ok(match name {
        "orth_classical" => Box::new(OrthClassical { fading }),
        "hamming_hard_nocsi" => Box::new(HammingHardNoCsi { fading, ..Default::default() }),
        "uncoded_csir" => Box::new(UncodedCsir { fading }),
        "hamming_hard_csir" => Box::new(HammingCsir { fading, ..HammingCsir::hard() }),
        "hamming_mld_csir" => Box::new(HammingCsir { fading, ..HammingCsir::soft_mld() }),
        _ => {
            return Err(invalid(format!(
                "unknown baseline `{name}` (expected one of {})",
                BASELINES.join(", ")
            )))
        }
    })
}

// ---------------------------------------------------------------------------
// Learned chains

/// A trained system evaluated on the channel it was trained for. Noise uses
/// the code rate `log2(M) / n`.
pub struct LearnedChain<T> {
    system: TrainedSystem<T>,
    codebook: Vec<Vec<T>>,
    label: String,
}

impl<T: Real> LearnedChain<T> {
    pub fn new(system: TrainedSystem<T>, label: impl Into<String>) -> Result<Self> {
        let codebook = system.codebook()?.to_rows();
        Ok(Self { system, codebook, label: label.into() })
    }

    pub fn system(&self) -> &TrainedSystem<T> {
        &self.system
    }

    fn features(&self, message: usize, n0: f64, rng: &mut Rng) -> Result<Vec<T>> {
        let c = self
            .codebook
            .get(message)
            .ok_or_else(|| invalid(format!("message {message} out of range")))?;
        let cfg = &self.system.config;
        match cfg.mode {
            Mode::Awgn => Ok(transmit_awgn(c, n0, rng)),
            Mode::NoCsi => {
                let out = transmit(c, &cfg.fading, n0, rng, ChannelMode::NoCsi);
                decoder_features(Mode::NoCsi, &out.y, None)
            }
            Mode::Csir => {
                let out = transmit(c, &cfg.fading, n0, rng, ChannelMode::Csir);
                decoder_features(Mode::Csir, &out.y, out.h.as_deref())
            }
        }
    }
}

impl<T: Real> Chain for LearnedChain<T> {
    fn label(&self) -> String {
        self.label.clone()
    }

    fn messages(&self) -> usize {
        self.system.messages()
    }

    fn run(&self, message: usize, snr_db: f64, rng: &mut Rng) -> Result<usize> {
        let n0 = self.system.config.noise_at(snr_db)?;
        self.system.decode(&self.features(message, n0, rng)?)
    }

    fn run_many(&self, messages: &[usize], snr_db: f64, rngs: &mut [Rng]) -> Result<Vec<usize>> {
        let n0 = self.system.config.noise_at(snr_db)?;
        let dim = self.system.config.feature_dim();
        let mut data = Vec::with_capacity(messages.len() * dim);
        for (&m, r) in messages.iter().zip(rngs.iter_mut()) {
            data.extend(self.features(m, n0, r)?);
        }
        self.system.decode_batch(&Matrix::from_vec(messages.len(), dim, data)?)
    }
}

/// An AWGN-trained system deployed on a fading channel with receiver CSI.
pub struct AwgnTransferChain<T> {
    system: TrainedSystem<T>,
    codebook: Vec<Vec<T>>,
    fading: FadingSpec,
    label: String,
}

impl<T: Real> AwgnTransferChain<T> {
    pub fn new(system: TrainedSystem<T>, fading: FadingSpec, label: impl Into<String>) -> Result<Self> {
        if system.mode() != Mode::Awgn {
            return Err(invalid("transfer evaluation needs an AWGN-trained system"));
        }
        let codebook = system.codebook()?.to_rows();
        Ok(Self { system, codebook, fading, label: label.into() })
    }

    fn features(&self, message: usize, n0: f64, rng: &mut Rng) -> Result<Vec<T>> {
        let c = self
            .codebook
            .get(message)
            .ok_or_else(|| invalid(format!("message {message} out of range")))?;
        let out = transmit(c, &self.fading, n0, rng, ChannelMode::Csir);
        let h: &[Complex<T>] = out.h.as_deref().unwrap_or_default();
        Ok(scaled_matched_filter(&out.y, h))
    }
}

impl<T: Real> Chain for AwgnTransferChain<T> {
    fn label(&self) -> String {
        self.label.clone()
    }

    fn messages(&self) -> usize {
        self.system.messages()
    }

    fn run(&self, message: usize, snr_db: f64, rng: &mut Rng) -> Result<usize> {
        let n0 = self.system.config.noise_at(snr_db)?;
        self.system.decode(&self.features(message, n0, rng)?)
    }

    fn run_many(&self, messages: &[usize], snr_db: f64, rngs: &mut [Rng]) -> Result<Vec<usize>> {
        let n0 = self.system.config.noise_at(snr_db)?;
        let n = self.system.block_len();
        let mut data = Vec::with_capacity(messages.len() * n);
        for (&m, r) in messages.iter().zip(rngs.iter_mut()) {
            data.extend(self.features(m, n0, r)?);
        }
        self.system.decode_batch(&Matrix::from_vec(messages.len(), n, data)?)
    }
}
