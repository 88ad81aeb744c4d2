//! End-to-end learned block codes: encoder, stochastic channel layer,
//! decoder, and the training loop.
//!
//! The encoder maps a one-hot message to `n` reals with squared norm `n`.
//! The channel layer applies fresh fading and noise per symbol; gradients
//! pass through it with `h` and `w` held fixed. The decoder sees
//!
//! * no-CSI: `[y_r ; y_i]` (`2n` features)
//! * CSIR:   `[y_r ; y_i ; h_r ; h_i]` (`4n` features)
//! * AWGN:   `y` (`n` features)

use std::path::{Path, PathBuf};

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::channel::{noise_param, ChannelDraw, SnrPoint};
use crate::error::{invalid, Error, Result};
use crate::neural::{softmax_cross_entropy, AdamConfig, AdamState, Head, Matrix, Network};
use crate::numerics::{normalize_spec, sample_standard_normal, FadingKind, FadingSpec, FreeParams, Rng};
use crate::scalar::Real;

const STREAM_INIT: u64 = 0;
const STREAM_TRAIN: u64 = 1;
const STREAM_PROBE: u64 = 2;

/// Number of trailing steps averaged into the reported final loss.
const LOSS_WINDOW: usize = 100;

/// Channel state available at the receiver during training and decoding.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    NoCsi,
    Csir,
    Awgn,
}

impl Mode {
    pub fn feature_dim(self, block_len: usize) -> usize {
        match self {
            Mode::NoCsi => 2 * block_len,
            Mode::Csir => 4 * block_len,
            Mode::Awgn => block_len,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Mode::NoCsi => "no_csi",
            Mode::Csir => "csir",
            Mode::Awgn => "awgn",
        }
    }
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "no_csi" => Ok(Mode::NoCsi),
            "csir" => Ok(Mode::Csir),
            "awgn" => Ok(Mode::Awgn),
            other => Err(invalid(format!("unknown mode `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AutoencoderConfig {
    pub messages: usize,
    pub block_len: usize,
    pub mode: Mode,
    /// Ignored in AWGN mode.
    pub fading: FadingSpec,
    pub train_snr_db: f64,
    pub steps: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub seed: u64,
    pub encoder_hidden: Vec<usize>,
    pub decoder_hidden: Vec<usize>,
}

impl AutoencoderConfig {
    /// Defaults: Rayleigh fading, 2e4 Adam steps of 256 at lr 1e-3, encoder
    /// widths `[4M]`, decoder widths `[8M, 4M]`.
    pub fn new(messages: usize, block_len: usize, mode: Mode) -> Self {
        Self {
            messages,
            block_len,
            mode,
            fading: FadingSpec::rayleigh(),
            train_snr_db: 7.0,
            steps: 20_000,
            batch_size: 256,
            lr: 1e-3,
            seed: 0,
            encoder_hidden: vec![4 * messages],
            decoder_hidden: vec![8 * messages, 4 * messages],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.messages < 2 {
            return Err(invalid(format!("need at least 2 messages, got {}", self.messages)));
        }
        if self.block_len < 1 {
            return Err(invalid("block length must be at least 1"));
        }
        if self.batch_size < 1 {
            return Err(invalid("batch size must be at least 1"));
        }
        if !(self.lr > 0.0) {
            return Err(invalid(format!("learning rate must be positive, got {}", self.lr)));
        }
        if !self.train_snr_db.is_finite() {
            return Err(invalid("training SNR must be finite"));
        }
        Ok(())
    }

    /// Code rate `log2(M) / n`.
    pub fn rate(&self) -> f64 {
        (self.messages as f64).log2() / self.block_len as f64
    }

    pub fn feature_dim(&self) -> usize {
        self.mode.feature_dim(self.block_len)
    }

    /// Coded noise parameter at `snr_db` for this code's rate.
    pub fn noise_at(&self, snr_db: f64) -> Result<f64> {
        noise_param(SnrPoint::for_code(snr_db, self.messages, self.block_len))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainedSystem<T> {
    pub encoder: Network<T>,
    pub decoder: Network<T>,
    pub config: AutoencoderConfig,
    /// Mean loss over the last training steps (a fresh batch if untrained).
    pub final_loss: f64,
    pub loss_trace: Vec<f64>,
}

/// Decoder input for one received block. `h` must be present exactly in
/// CSIR mode; AWGN mode passes the real parts of `y` through.
pub fn decoder_features<T: Real>(
    mode: Mode,
    y: &[Complex<T>],
    h: Option<&[Complex<T>]>,
) -> Result<Vec<T>> {
    match (mode, h) {
        (Mode::NoCsi, None) => Ok(y.iter().map(|v| v.re).chain(y.iter().map(|v| v.im)).collect()),
        (Mode::Csir, Some(h)) => {
            if h.len() != y.len() {
                return Err(invalid("h and y lengths differ"));
            }
            Ok(y.iter()
                .map(|v| v.re)
                .chain(y.iter().map(|v| v.im))
                .chain(h.iter().map(|v| v.re))
                .chain(h.iter().map(|v| v.im))
                .collect())
        }
        (Mode::Awgn, None) => Ok(y.iter().map(|v| v.re).collect()),
        (Mode::Csir, None) => Err(invalid("CSIR decoding needs the channel coefficients")),
        (_, Some(_)) => Err(invalid(format!("{} decoding takes no channel coefficients", mode.name()))),
    }
}

/// Gradient w.r.t. the transmitted codeword, with `h` and `w` held fixed:
/// `dL/dc = h_r * dL/dy_r + h_i * dL/dy_i`.
pub fn channel_layer_backward<T: Real>(h: &[Complex<T>], dy_re: &[T], dy_im: &[T]) -> Vec<T> {
    h.iter()
        .zip(dy_re.iter().zip(dy_im))
        .map(|(h, (&gr, &gi))| h.re * gr + h.im * gi)
        .collect()
}

/// Index of the largest entry; ties resolve to the lowest index.
pub fn argmax<T: Real>(values: &[T]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Matched-filter statistic `Re(conj(h) y) / |h|` per symbol; 0 on a fade
/// deeper than `1e-12`.
pub fn scaled_matched_filter<T: Real>(y: &[Complex<T>], h: &[Complex<T>]) -> Vec<T> {
    let floor = T::of(1e-12);
    y.iter()
        .zip(h)
        .map(|(&y, &h)| {
            let mag = h.norm();
            if mag < floor {
                T::zero()
            } else {
                (h.conj() * y).re / mag
            }
        })
        .collect()
}

struct Batch<T> {
    labels: Vec<usize>,
    onehot: Matrix<T>,
}

fn sample_batch<T: Real>(messages: usize, size: usize, rng: &mut Rng) -> Result<Batch<T>> {
    let labels: Vec<usize> = (0..size).map(|_| rng.index(messages)).collect();
    let onehot = Matrix::one_hot(&labels, messages)?;
    Ok(Batch { labels, onehot })
}

/// Applies the channel to every codeword row and builds the feature matrix.
/// Returns the fading draws for the backward pass (empty in AWGN mode).
fn channel_forward<T: Real>(
    config: &AutoencoderConfig,
    codewords: &Matrix<T>,
    n0: f64,
    rng: &mut Rng,
) -> Result<(Matrix<T>, Vec<Vec<Complex<T>>>)> {
    let n = config.block_len;
    let mut features = Matrix::zeros(codewords.rows(), config.feature_dim());
    let mut fades = Vec::with_capacity(codewords.rows());
    let sd = T::of(n0.sqrt());
    for r in 0..codewords.rows() {
        let c = codewords.row(r);
        let dst = features.row_mut(r);
        match config.mode {
            Mode::Awgn => {
                for (d, &cl) in dst.iter_mut().zip(c) {
                    *d = cl + sd * sample_standard_normal::<T>(rng);
                }
            }
            Mode::NoCsi | Mode::Csir => {
                let draw = ChannelDraw::sample(n, &config.fading, n0, rng);
                let y = draw.apply(c);
                for l in 0..n {
                    dst[l] = y[l].re;
                    dst[n + l] = y[l].im;
                }
                if config.mode == Mode::Csir {
                    for l in 0..n {
                        dst[2 * n + l] = draw.h[l].re;
                        dst[3 * n + l] = draw.h[l].im;
                    }
                }
                fades.push(draw.h);
            }
        }
    }
    Ok((features, fades))
}

fn channel_backward<T: Real>(
    config: &AutoencoderConfig,
    d_features: &Matrix<T>,
    fades: &[Vec<Complex<T>>],
) -> Result<Matrix<T>> {
    let n = config.block_len;
    if config.mode == Mode::Awgn {
        return Ok(d_features.clone());
    }
    let mut dc = Matrix::zeros(d_features.rows(), n);
    for (r, h) in fades.iter().enumerate() {
        let g = d_features.row(r);
        let row = channel_layer_backward(h, &g[..n], &g[n..2 * n]);
        dc.row_mut(r).copy_from_slice(&row);
    }
    Ok(dc)
}

fn failure(step: usize) -> impl Fn(Error) -> Error {
    move |e| Error::TrainingFailure { step, reason: e.to_string() }
}

/// Loss of the current networks on one batch, without updating them.
fn batch_loss<T: Real>(
    config: &AutoencoderConfig,
    encoder: &Network<T>,
    decoder: &Network<T>,
    n0: f64,
    rng: &mut Rng,
) -> Result<f64> {
    let batch = sample_batch::<T>(config.messages, config.batch_size, rng)?;
    let c = encoder.forward(&batch.onehot)?;
    let (features, _) = channel_forward(config, &c, n0, rng)?;
    let logits = decoder.forward_trace(&features)?.output;
    Ok(softmax_cross_entropy(&logits, &batch.labels)?.loss.as_f64())
}

/// Trains encoder and decoder jointly with Adam on softmax cross-entropy.
///
/// Each step samples `batch_size` uniform messages and fresh channel draws
/// at the training SNR (coded noise, `R = log2(M) / n`). Fully determined by
/// `config.seed`.
pub fn train<T: Real>(config: &AutoencoderConfig) -> Result<TrainedSystem<T>> {
    config.validate()?;
    let m = config.messages;
    let n = config.block_len;
    let mut init = Rng::new(config.seed, STREAM_INIT);
    let mut encoder =
        Network::mlp(m, &config.encoder_hidden, n, Head::EnergyNormalize(T::of_usize(n)), &mut init)?;
    let mut decoder =
        Network::mlp(config.feature_dim(), &config.decoder_hidden, m, Head::Softmax, &mut init)?;
    let adam = AdamConfig { lr: config.lr, ..AdamConfig::default() };
    let mut enc_opt = AdamState::<T>::new(adam, encoder.params().iter().map(|p| p.len()));
    let mut dec_opt = AdamState::<T>::new(adam, decoder.params().iter().map(|p| p.len()));
    let n0 = config.noise_at(config.train_snr_db)?;

    let mut rng = Rng::new(config.seed, STREAM_TRAIN);
    let mut loss_trace = Vec::with_capacity(config.steps);
    for step in 0..config.steps {
        let fail = failure(step);
        let batch = sample_batch::<T>(m, config.batch_size, &mut rng).map_err(&fail)?;
        let enc_trace = encoder.forward_trace(&batch.onehot).map_err(&fail)?;
        let (features, fades) =
            channel_forward(config, &enc_trace.output, n0, &mut rng).map_err(&fail)?;
        let dec_trace = decoder.forward_trace(&features).map_err(&fail)?;
        let sce = softmax_cross_entropy(&dec_trace.output, &batch.labels).map_err(&fail)?;
        let loss = sce.loss.as_f64();
        if !loss.is_finite() {
            return Err(fail(invalid(format!("non-finite loss {loss}"))));
        }
        let (dec_grads, d_features) = decoder.backward(&dec_trace, &sce.dlogits).map_err(&fail)?;
        let dc = channel_backward(config, &d_features, &fades).map_err(&fail)?;
        let (enc_grads, _) = encoder.backward(&enc_trace, &dc).map_err(&fail)?;
        dec_opt.step(decoder.params_mut(), &dec_grads).map_err(&fail)?;
        enc_opt.step(encoder.params_mut(), &enc_grads).map_err(&fail)?;
        loss_trace.push(loss);
    }

    let final_loss = if loss_trace.is_empty() {
        let mut probe = Rng::new(config.seed, STREAM_PROBE);
        batch_loss(config, &encoder, &decoder, n0, &mut probe).map_err(failure(0))?
    } else {
        let tail = &loss_trace[loss_trace.len().saturating_sub(LOSS_WINDOW)..];
        tail.iter().sum::<f64>() / tail.len() as f64
    };
    Ok(TrainedSystem { encoder, decoder, config: config.clone(), final_loss, loss_trace })
}

/// Result of [`train_with_restarts`].
#[derive(Clone, Debug)]
pub struct RestartOutcome<T> {
    pub system: TrainedSystem<T>,
    pub seed: u64,
    pub attempts: usize,
    pub accepted: bool,
}

/// Trains with each seed in turn until `accept` approves a system. If none
/// is approved the last one is returned with `accepted = false`.
pub fn train_with_restarts<T: Real>(
    config: &AutoencoderConfig,
    seeds: &[u64],
    mut accept: impl FnMut(&TrainedSystem<T>) -> bool,
) -> Result<RestartOutcome<T>> {
    if seeds.is_empty() {
        return Err(invalid("restart policy needs at least one seed"));
    }
    let mut last = None;
    for (i, &seed) in seeds.iter().enumerate() {
        let cfg = AutoencoderConfig { seed, ..config.clone() };
        let system = train::<T>(&cfg)?;
        if accept(&system) {
            return Ok(RestartOutcome { system, seed, attempts: i + 1, accepted: true });
        }
        last = Some((system, seed));
    }
    let (system, seed) = last.expect("at least one attempt");
    Ok(RestartOutcome { system, seed, attempts: seeds.len(), accepted: false })
}

impl<T: Real> TrainedSystem<T> {
    pub fn messages(&self) -> usize {
        self.config.messages
    }

    pub fn block_len(&self) -> usize {
        self.config.block_len
    }

    pub fn mode(&self) -> Mode {
        self.config.mode
    }

    /// Codeword for message `m`.
    pub fn encode_message(&self, m: usize) -> Result<Vec<T>> {
        if m >= self.messages() {
            return Err(invalid(format!("message {m} out of range 0..{}", self.messages())));
        }
        Ok(self.encoder.forward(&Matrix::one_hot(&[m], self.messages())?)?.into_vec())
    }

    /// All codewords, one row per message.
    pub fn codebook(&self) -> Result<Matrix<T>> {
        self.encoder.forward(&Matrix::identity(self.messages()))
    }

    /// Decoder output distribution for each feature row.
    pub fn probabilities(&self, features: &Matrix<T>) -> Result<Matrix<T>> {
        self.decoder.forward(features)
    }

    /// Most likely message; ties resolve to the lowest index.
    pub fn decode(&self, features: &[T]) -> Result<usize> {
        let x = Matrix::from_vec(1, features.len(), features.to_vec())?;
        let p = self.probabilities(&x)?;
        Ok(argmax(p.row(0)))
    }

    pub fn decode_batch(&self, features: &Matrix<T>) -> Result<Vec<usize>> {
        let p = self.probabilities(features)?;
        Ok(p.row_iter().map(argmax).collect())
    }

    /// Uses an AWGN-trained decoder on a fading channel with receiver CSI by
    /// feeding it the per-symbol scaled matched-filter outputs.
    pub fn transfer_awgn_to_fading(&self, y: &[Complex<T>], h: &[Complex<T>]) -> Result<usize> {
        if self.mode() != Mode::Awgn {
            return Err(invalid("transfer decoding needs an AWGN-trained system"));
        }
        if y.len() != self.block_len() || h.len() != self.block_len() {
            return Err(invalid("received block length does not match the code"));
        }
        self.decode(&scaled_matched_filter(y, h))
    }

    pub fn metadata(&self) -> SystemMeta {
        let (gamma_shape, gumbel_location) = match self.config.fading {
            FadingSpec::Gamma { shape, .. } => (Some(shape), None),
            FadingSpec::Gumbel { location, .. } => (None, Some(location)),
            _ => (None, None),
        };
        SystemMeta {
            mode: self.config.mode,
            messages: self.config.messages,
            block_len: self.config.block_len,
            fading: self.config.fading.kind(),
            gamma_shape,
            gumbel_location,
            train_snr_db: self.config.train_snr_db,
            seed: self.config.seed,
            steps: self.config.steps,
            batch_size: self.config.batch_size,
            lr: self.config.lr,
            encoder_hidden: self.config.encoder_hidden.clone(),
            decoder_hidden: self.config.decoder_hidden.clone(),
            final_loss: self.final_loss,
        }
    }

    /// Encoder then decoder, each in the network model format.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = self.encoder.to_bytes();
        out.extend(self.decoder.to_bytes());
        out
    }

    /// Writes the model file and its `.meta.toml` sidecar.
    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes())?;
        let meta = toml::to_string(&self.metadata()).map_err(|e| Error::Format(e.to_string()))?;
        std::fs::write(sidecar_path(path), meta)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path)?;
        let meta_text = std::fs::read_to_string(sidecar_path(path))?;
        let meta: SystemMeta =
            toml::from_str(&meta_text).map_err(|e| Error::Format(format!("metadata: {e}")))?;
        Self::from_parts(&bytes, meta)
    }

    pub fn from_parts(bytes: &[u8], meta: SystemMeta) -> Result<Self> {
        let mut cursor = bytes;
        let encoder = Network::read_from(&mut cursor)?;
        let decoder = Network::read_from(&mut cursor)?;
        if !cursor.is_empty() {
            return Err(Error::Format(format!("{} trailing bytes in model", cursor.len())));
        }
        let config = meta.config()?;
        if encoder.input_dim() != config.messages || encoder.output_dim() != config.block_len {
            return Err(Error::Format("encoder shape does not match metadata".into()));
        }
        if decoder.input_dim() != config.feature_dim() || decoder.output_dim() != config.messages {
            return Err(Error::Format("decoder shape does not match metadata".into()));
        }
        Ok(Self { encoder, decoder, config, final_loss: meta.final_loss, loss_trace: Vec::new() })
    }
}

/// `model.fdcn` -> `model.meta.toml`.
pub fn sidecar_path(model: &Path) -> PathBuf {
    model.with_extension("meta.toml")
}

/// Sidecar metadata stored next to a model file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemMeta {
    pub mode: Mode,
    pub messages: usize,
    pub block_len: usize,
    pub fading: FadingKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_shape: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gumbel_location: Option<f64>,
    pub train_snr_db: f64,
    pub seed: u64,
    pub steps: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub encoder_hidden: Vec<usize>,
    pub decoder_hidden: Vec<usize>,
    pub final_loss: f64,
}

impl SystemMeta {
    pub fn config(&self) -> Result<AutoencoderConfig> {
        let defaults = FreeParams::default();
        let free = FreeParams {
            gamma_shape: self.gamma_shape.unwrap_or(defaults.gamma_shape),
            gumbel_location: self.gumbel_location.unwrap_or(defaults.gumbel_location),
        };
        let config = AutoencoderConfig {
            messages: self.messages,
            block_len: self.block_len,
            mode: self.mode,
            fading: normalize_spec(self.fading, free)?,
            train_snr_db: self.train_snr_db,
            steps: self.steps,
            batch_size: self.batch_size,
            lr: self.lr,
            seed: self.seed,
            encoder_hidden: self.encoder_hidden.clone(),
            decoder_hidden: self.decoder_hidden.clone(),
        };
        config.validate()?;
        Ok(config)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::gradcheck::{central_difference, relative_error};

    fn small(mode: Mode) -> AutoencoderConfig {
        AutoencoderConfig { steps: 0, batch_size: 8, ..AutoencoderConfig::new(4, 3, mode) }
    }

    #[test]
    fn feature_layouts() {
        let c = |re, im| Complex::new(re, im);
        let y = [c(1.0, 2.0), c(3.0, -1.0)];
        assert_eq!(decoder_features(Mode::NoCsi, &y, None).unwrap(), vec![1.0, 3.0, 2.0, -1.0]);
        let h = [c(0.5, 0.1), c(-0.2, 0.3)];
        let f = decoder_features(Mode::Csir, &y, Some(&h)).unwrap();
        assert_eq!(f.len(), 8);
        assert_eq!(&f[4..], &[0.5, -0.2, 0.1, 0.3]);
        assert_eq!(decoder_features(Mode::Awgn, &y, None).unwrap(), vec![1.0, 3.0]);
        assert!(decoder_features(Mode::Csir, &y, None).is_err());
        assert!(decoder_features(Mode::NoCsi, &y, Some(&h)).is_err());
        assert!(decoder_features(Mode::Awgn, &y, Some(&h)).is_err());
    }

    #[test]
    fn channel_backward_examples() {
        let ones = vec![Complex::new(1.0, 0.0); 3];
        let gr = [0.3, -1.0, 2.0];
        let gi = [5.0, 5.0, 5.0];
        assert_eq!(channel_layer_backward(&ones, &gr, &gi), gr.to_vec());
        let zeros = vec![Complex::new(0.0, 0.0); 3];
        assert_eq!(channel_layer_backward(&zeros, &gr, &gi), vec![0.0; 3]);
    }

    #[test]
    fn channel_backward_matches_finite_differences() {
        let mut rng = Rng::new(3, 0);
        let n = 4;
        let draw = ChannelDraw::<f64>::sample(n, &FadingSpec::rayleigh(), 0.2, &mut rng);
        let gr: Vec<f64> = (0..n).map(|_| sample_standard_normal(&mut rng)).collect();
        let gi: Vec<f64> = (0..n).map(|_| sample_standard_normal(&mut rng)).collect();
        let c: Vec<f64> = (0..n).map(|_| sample_standard_normal(&mut rng)).collect();
        let numeric = central_difference(&c, 1e-5, |c| {
            let y = draw.apply(c);
            y.iter().zip(gr.iter().zip(&gi)).map(|(y, (a, b))| y.re * a + y.im * b).sum()
        });
        let analytic = channel_layer_backward(&draw.h, &gr, &gi);
        assert!(relative_error(&analytic, &numeric) < 1e-6);
    }

    #[test]
    fn end_to_end_gradient_with_frozen_channel() {
        for mode in [Mode::NoCsi, Mode::Csir, Mode::Awgn] {
            let config = AutoencoderConfig {
                encoder_hidden: vec![6],
                decoder_hidden: vec![7, 5],
                ..small(mode)
            };
            let sys = train::<f64>(&config).unwrap();
            let labels = [0usize, 3, 1, 2, 2];
            let x = Matrix::one_hot(&labels, 4).unwrap();
            let n0 = 0.3;
            let frozen = |c: &Matrix<f64>| {
                channel_forward(&config, c, n0, &mut Rng::new(17, 4)).unwrap()
            };
            let loss_for = |enc: &Network<f64>| {
                let c = enc.forward(&x).unwrap();
                let (f, _) = frozen(&c);
                let logits = sys.decoder.forward_trace(&f).unwrap().output;
                softmax_cross_entropy(&logits, &labels).unwrap().loss
            };
            let et = sys.encoder.forward_trace(&x).unwrap();
            let (f, fades) = frozen(&et.output);
            let dt = sys.decoder.forward_trace(&f).unwrap();
            let sce = softmax_cross_entropy(&dt.output, &labels).unwrap();
            let (_, df) = sys.decoder.backward(&dt, &sce.dlogits).unwrap();
            let dc = channel_backward(&config, &df, &fades).unwrap();
            let (grads, _) = sys.encoder.backward(&et, &dc).unwrap();
            let numeric = central_difference(&sys.encoder.flat_params(), 1e-5, |p| {
                let mut e = sys.encoder.clone();
                e.set_flat_params(p).unwrap();
                loss_for(&e)
            });
            let err = relative_error(&grads.concat(), &numeric);
            assert!(err < 1e-5, "{mode:?}: {err}");
        }
    }

    #[test]
    fn untrained_system() {
        let sys = train::<f64>(&small(Mode::NoCsi)).unwrap();
        assert!(sys.loss_trace.is_empty());
        assert!((sys.final_loss - 4f64.ln()).abs() < 0.5, "{}", sys.final_loss);
        for m in 0..4 {
            let c = sys.encode_message(m).unwrap();
            let e: f64 = c.iter().map(|v| v * v).sum();
            assert!((e - 3.0).abs() < 1e-10);
        }
        assert!(sys.encode_message(4).is_err());
        let again = train::<f64>(&small(Mode::NoCsi)).unwrap();
        assert_eq!(sys.codebook().unwrap(), again.codebook().unwrap());
        assert!(sys.decode(&[0.0; 5]).is_err());
    }

    #[test]
    fn argmax_ties_go_low() {
        assert_eq!(argmax(&[0.25f64, 0.25, 0.25, 0.25]), 0);
        assert_eq!(argmax(&[0.1f64, 0.7, 0.7]), 1);
    }

    #[test]
    fn training_is_reproducible_and_learns() {
        let config = AutoencoderConfig {
            steps: 300,
            batch_size: 64,
            lr: 1e-2,
            train_snr_db: 10.0,
            ..AutoencoderConfig::new(4, 4, Mode::Awgn)
        };
        let a = train::<f64>(&config).unwrap();
        let b = train::<f64>(&config).unwrap();
        assert_eq!(a, b);
        assert!(a.loss_trace.iter().all(|l| l.is_finite()));
        assert!(a.final_loss < 4f64.ln());
    }

    #[test]
    fn transfer_reduces_to_awgn_decoding() {
        let config = AutoencoderConfig { steps: 50, ..small(Mode::Awgn) };
        let sys = train::<f64>(&config).unwrap();
        let y = [Complex::new(0.4, -0.2), Complex::new(-1.0, 0.3), Complex::new(2.0, 0.0)];
        let ones = [Complex::new(1.0, 0.0); 3];
        assert_eq!(
            sys.transfer_awgn_to_fading(&y, &ones).unwrap(),
            sys.decode(&[0.4, -1.0, 2.0]).unwrap()
        );
        let z = scaled_matched_filter(&y, &[Complex::new(0.0, 0.0); 3]);
        assert_eq!(z, vec![0.0; 3]);
        let no_csi = train::<f64>(&small(Mode::NoCsi)).unwrap();
        assert!(no_csi.transfer_awgn_to_fading(&y, &ones).is_err());
    }

    #[test]
    fn save_and_load() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.fdcn");
        let config = AutoencoderConfig {
            steps: 5,
            fading: FadingSpec::normalized(FadingKind::Gamma),
            ..small(Mode::Csir)
        };
        let sys = train::<f64>(&config).unwrap();
        sys.save(&path).unwrap();
        assert!(sidecar_path(&path).exists());
        let back = TrainedSystem::<f64>::load(&path).unwrap();
        assert_eq!(back.encoder, sys.encoder);
        assert_eq!(back.decoder, sys.decoder);
        assert_eq!(back.config, sys.config);

        std::fs::write(&path, &sys.to_bytes()[..10]).unwrap();
        assert!(matches!(TrainedSystem::<f64>::load(&path), Err(Error::Format(_))));
    }

    #[test]
    fn config_validation() {
        assert!(AutoencoderConfig::new(1, 2, Mode::NoCsi).validate().is_err());
        assert!(AutoencoderConfig::new(2, 0, Mode::NoCsi).validate().is_err());
        let c = AutoencoderConfig { batch_size: 0, ..AutoencoderConfig::new(2, 2, Mode::NoCsi) };
        assert!(train::<f64>(&c).is_err());
    }
}
