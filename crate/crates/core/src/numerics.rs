//! Seeded random streams and the fading-coefficient distributions.
//!
//! Every fading law is normalized so that each of the real and imaginary
//! parts has variance 1/2, giving `E|h - E h|^2 = 1`. Means are left alone.

use std::f64::consts::PI;

use num_complex::Complex;
use rand::{Rng as _, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::scalar::Real;

/// Per-component variance every normalized spec is tuned to.
pub const COMPONENT_VARIANCE: f64 = 0.5;

/// Default Gamma shape `k`; the scale is derived from it.
pub const DEFAULT_GAMMA_SHAPE: f64 = 2.0;

/// Number of ChaCha words reserved for one Monte Carlo trial.
const TRIAL_WORD_SHIFT: u32 = 24;

/// Deterministic random stream keyed by `(seed, stream_id)`.
///
/// Backed by ChaCha8, so sequences are identical on every platform. Distinct
/// stream ids select disjoint keystreams for the same seed.
#[derive(Clone, Debug)]
pub struct Rng {
    seed: u64,
    stream_id: u64,
    inner: ChaCha8Rng,
}

impl Rng {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream_id);
        Self { seed, stream_id, inner }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// Generator for trial `index` of this stream.
    ///
    /// Each trial owns a fixed window of the keystream, so the draws of a
    /// trial do not depend on how trials are batched or scheduled.
    pub fn trial(&self, index: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(self.seed);
        inner.set_stream(self.stream_id);
        inner.set_word_pos(u128::from(index) << TRIAL_WORD_SHIFT);
        Self { seed: self.seed, stream_id: self.stream_id, inner }
    }

    /// Uniform index in `0..n`.
    pub fn index(&mut self, n: usize) -> usize {
        self.inner.random_range(0..n)
    }

    /// Uniform `f64` in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.inner.random()
    }
}

impl RngCore for Rng {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}

/// Exact standard normal variate (ziggurat).
pub fn sample_standard_normal<T: Real>(rng: &mut Rng) -> T {
    let z: f64 = StandardNormal.sample(rng);
    T::of(z)
}

/// Circularly symmetric complex normal with `E|w|^2 = total_variance`.
pub fn sample_cscn<T: Real>(rng: &mut Rng, total_variance: f64) -> Result<Complex<T>> {
    if !(total_variance >= 0.0) {
        return Err(invalid(format!("negative variance {total_variance}")));
    }
    let sd = (total_variance / 2.0).sqrt();
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Ok(Complex::new(T::of(sd * re), T::of(sd * im)))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FadingKind {
    Rayleigh,
    Custom,
    Gamma,
    Gumbel,
    FoldedNormal,
    /// Constant `h = 1`; not a fading law, used to test noiseless paths.
    Identity,
}

impl FadingKind {
    pub const ALL: [FadingKind; 5] = [
        FadingKind::Rayleigh,
        FadingKind::Custom,
        FadingKind::Gamma,
        FadingKind::Gumbel,
        FadingKind::FoldedNormal,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FadingKind::Rayleigh => "rayleigh",
            FadingKind::Custom => "custom",
            FadingKind::Gamma => "gamma",
            FadingKind::Gumbel => "gumbel",
            FadingKind::FoldedNormal => "folded_normal",
            FadingKind::Identity => "identity",
        }
    }

    /// True when both components are supported on `[0, inf)` only.
    pub fn nonnegative_support(self) -> bool {
        matches!(self, FadingKind::Gamma | FadingKind::FoldedNormal)
    }
}

impl std::str::FromStr for FadingKind {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "rayleigh" => FadingKind::Rayleigh,
            "custom" => FadingKind::Custom,
            "gamma" => FadingKind::Gamma,
            "gumbel" => FadingKind::Gumbel,
            "folded_normal" => FadingKind::FoldedNormal,
            "identity" => FadingKind::Identity,
            other => return Err(invalid(format!("unknown fading kind `{other}`"))),
        })
    }
}

impl std::fmt::Display for FadingKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Free (non-variance) parameters fixed before normalization.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FreeParams {
    pub gamma_shape: f64,
    pub gumbel_location: f64,
}

impl Default for FreeParams {
    fn default() -> Self {
        Self { gamma_shape: DEFAULT_GAMMA_SHAPE, gumbel_location: 0.0 }
    }
}

/// Distribution of each of `h_r` and `h_i` (i.i.d.).
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum FadingSpec {
    /// Normal(0, sigma^2) components.
    Rayleigh { sigma: f64 },
    /// Laplace components, drawn as the difference of two Exp(lambda).
    Custom { lambda: f64 },
    /// Gamma(k, theta) components.
    Gamma { shape: f64, scale: f64 },
    /// Gumbel components with density `exp(z - exp(z)) / beta`, `z = (x - mu) / beta`.
    Gumbel { location: f64, scale: f64 },
    /// |Normal(mu, sigma^2)| components.
    FoldedNormal { location: f64, sigma: f64 },
    Identity,
}

impl FadingSpec {
    pub fn kind(&self) -> FadingKind {
        match self {
            FadingSpec::Rayleigh { .. } => FadingKind::Rayleigh,
            FadingSpec::Custom { .. } => FadingKind::Custom,
            FadingSpec::Gamma { .. } => FadingKind::Gamma,
            FadingSpec::Gumbel { .. } => FadingKind::Gumbel,
            FadingSpec::FoldedNormal { .. } => FadingKind::FoldedNormal,
            FadingSpec::Identity => FadingKind::Identity,
        }
    }

    /// Normalized spec of `kind` with default free parameters.
    pub fn normalized(kind: FadingKind) -> Self {
        normalize_spec(kind, FreeParams::default()).expect("default free parameters are valid")
    }

    pub fn rayleigh() -> Self {
        Self::normalized(FadingKind::Rayleigh)
    }

    /// Analytic variance of one component.
    pub fn component_variance(&self) -> f64 {
        match *self {
            FadingSpec::Rayleigh { sigma } => sigma * sigma,
            FadingSpec::Custom { lambda } => 2.0 / (lambda * lambda),
            FadingSpec::Gamma { shape, scale } => shape * scale * scale,
            FadingSpec::Gumbel { scale, .. } => PI * PI * scale * scale / 6.0,
            FadingSpec::FoldedNormal { location, sigma } => {
                let mean = folded_normal_mean(location, sigma);
                location * location + sigma * sigma - mean * mean
            }
            FadingSpec::Identity => 0.0,
        }
    }

    /// Analytic mean of one component.
    pub fn component_mean(&self) -> f64 {
        match *self {
            FadingSpec::Rayleigh { .. } | FadingSpec::Custom { .. } => 0.0,
            FadingSpec::Gamma { shape, scale } => shape * scale,
            // min-type Gumbel: mean is mu - gamma_e * beta
            FadingSpec::Gumbel { location, scale } => location - EULER_GAMMA * scale,
            FadingSpec::FoldedNormal { location, sigma } => folded_normal_mean(location, sigma),
            FadingSpec::Identity => 1.0,
        }
    }
}

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

fn folded_normal_mean(mu: f64, sigma: f64) -> f64 {
    let half_normal = sigma * (2.0 / PI).sqrt() * (-mu * mu / (2.0 * sigma * sigma)).exp();
    half_normal + mu * libm::erf(mu / (sigma * std::f64::consts::SQRT_2))
}

/// Picks the variance-setting parameter of `kind` so that each component
/// has variance exactly 1/2.
pub fn normalize_spec(kind: FadingKind, free: FreeParams) -> Result<FadingSpec> {
    Ok(match kind {
        FadingKind::Rayleigh => FadingSpec::Rayleigh { sigma: COMPONENT_VARIANCE.sqrt() },
        FadingKind::Custom => FadingSpec::Custom { lambda: (2.0 / COMPONENT_VARIANCE).sqrt() },
        FadingKind::Gamma => {
            let k = free.gamma_shape;
            if !(k > 0.0) || !k.is_finite() {
                return Err(invalid(format!("gamma shape must be positive, got {k}")));
            }
            FadingSpec::Gamma { shape: k, scale: (COMPONENT_VARIANCE / k).sqrt() }
        }
        FadingKind::Gumbel => {
            if !free.gumbel_location.is_finite() {
                return Err(invalid("gumbel location must be finite"));
            }
            FadingSpec::Gumbel {
                location: free.gumbel_location,
                scale: (6.0 * COMPONENT_VARIANCE).sqrt() / PI,
            }
        }
        FadingKind::FoldedNormal => FadingSpec::FoldedNormal {
            location: 0.0,
            sigma: (COMPONENT_VARIANCE / (1.0 - 2.0 / PI)).sqrt(),
        },
        FadingKind::Identity => FadingSpec::Identity,
    })
}

fn sample_component(rng: &mut Rng, spec: &FadingSpec) -> f64 {
    match *spec {
        FadingSpec::Rayleigh { sigma } => {
            let z: f64 = StandardNormal.sample(rng);
            sigma * z
        }
        FadingSpec::Custom { lambda } => {
            let exp = Exp::new(lambda).expect("normalized lambda is positive");
            exp.sample(rng) - exp.sample(rng)
        }
        FadingSpec::Gamma { shape, scale } => {
            Gamma::new(shape, scale).expect("normalized gamma parameters").sample(rng)
        }
        FadingSpec::Gumbel { location, scale } => {
            // Inverse CDF of the min-type law: F(x) = 1 - exp(-exp(z)).
            let e: f64 = rand_distr::Exp1.sample(rng);
            location + scale * e.ln()
        }
        FadingSpec::FoldedNormal { location, sigma } => {
            let z: f64 = StandardNormal.sample(rng);
            (location + sigma * z).abs()
        }
        FadingSpec::Identity => 1.0,
    }
}

/// One fading coefficient `h = h_r + j h_i`.
pub fn sample_fading<T: Real>(rng: &mut Rng, spec: &FadingSpec) -> Complex<T> {
    if let FadingSpec::Identity = spec {
        return Complex::new(T::one(), T::zero());
    }
    let re = sample_component(rng, spec);
    let im = sample_component(rng, spec);
    Complex::new(T::of(re), T::of(im))
}

/// Density of one component at `x`. The identity hook is a point mass and
/// reports density 0 everywhere.
pub fn pdf(spec: &FadingSpec, x: f64) -> f64 {
    let gauss = |x: f64, mu: f64, sigma: f64| {
        let d = x - mu;
        (-d * d / (2.0 * sigma * sigma)).exp() / (2.0 * PI * sigma * sigma).sqrt()
    };
    match *spec {
        FadingSpec::Rayleigh { sigma } => gauss(x, 0.0, sigma),
        FadingSpec::Custom { lambda } => lambda * (-lambda * x.abs()).exp() / 2.0,
        FadingSpec::Gamma { shape, scale } => {
            if x < 0.0 {
                return 0.0;
            }
            if x == 0.0 {
                return match shape {
                    k if k < 1.0 => f64::INFINITY,
                    k if k == 1.0 => 1.0 / scale,
                    _ => 0.0,
                };
            }
            let log = (shape - 1.0) * x.ln() - x / scale - shape * scale.ln() - libm::lgamma(shape);
            log.exp()
        }
        FadingSpec::Gumbel { location, scale } => {
            let z = (x - location) / scale;
            (z - z.exp()).exp() / scale
        }
        FadingSpec::FoldedNormal { location, sigma } => {
            if x < 0.0 {
                return 0.0;
            }
            gauss(x, location, sigma) + gauss(x, -location, sigma)
        }
        FadingSpec::Identity => 0.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const N: usize = 1_000_000;

    fn moments(xs: impl Iterator<Item = f64>) -> (f64, f64) {
        let (mut n, mut s, mut s2) = (0.0, 0.0, 0.0);
        for x in xs {
            n += 1.0;
            s += x;
            s2 += x * x;
        }
        let mean = s / n;
        (mean, s2 / n - mean * mean)
    }

    #[test]
    fn standard_normal_moments() {
        let mut rng = Rng::new(1, 0);
        let (mean, var) = moments((0..N).map(|_| sample_standard_normal::<f64>(&mut rng)));
        assert!(mean.abs() < 0.004, "mean {mean}");
        assert!((var - 1.0).abs() < 0.005, "var {var}");
    }

    #[test]
    fn fixed_seed_repeats() {
        let draw = || {
            let mut rng = Rng::new(42, 0);
            (0..10).map(|_| sample_standard_normal::<f64>(&mut rng)).collect::<Vec<_>>()
        };
        assert_eq!(draw(), draw());
        let mut other = Rng::new(42, 1);
        let first: f64 = sample_standard_normal(&mut other);
        assert_ne!(first, draw()[0]);
    }

    #[test]
    fn trial_generators_are_position_keyed() {
        let base = Rng::new(9, 3);
        let mut a = base.trial(17);
        let mut b = Rng::new(9, 3).trial(17);
        assert_eq!(a.next_u64(), b.next_u64());
        assert_ne!(base.trial(16).next_u64(), base.trial(17).next_u64());
    }

    #[test]
    fn cscn_moments() {
        let mut rng = Rng::new(2, 0);
        let zero: Complex<f64> = sample_cscn(&mut rng, 0.0).unwrap();
        assert_eq!(zero, Complex::new(0.0, 0.0));
        let (mut power, mut pseudo) = (0.0, Complex::new(0.0, 0.0));
        for _ in 0..N {
            let w: Complex<f64> = sample_cscn(&mut rng, 2.0).unwrap();
            power += w.norm_sqr();
            pseudo += w * w;
        }
        power /= N as f64;
        pseudo /= N as f64;
        assert!((power - 2.0).abs() < 0.02, "E|w|^2 = {power}");
        assert!(pseudo.norm() < 0.01, "E[w^2] = {pseudo}");
        assert!(sample_cscn::<f64>(&mut rng, -1.0).is_err());
    }

    #[test]
    fn normalized_parameters() {
        let custom = FadingSpec::normalized(FadingKind::Custom);
        assert_eq!(custom, FadingSpec::Custom { lambda: 2.0 });
        match FadingSpec::normalized(FadingKind::Gumbel) {
            FadingSpec::Gumbel { scale, .. } => {
                assert!((scale - 3f64.sqrt() / PI).abs() < 1e-15);
                assert!((scale - 0.5513).abs() < 1e-4);
            }
            other => panic!("{other:?}"),
        }
        match FadingSpec::normalized(FadingKind::FoldedNormal) {
            FadingSpec::FoldedNormal { sigma, .. } => assert!((sigma - 1.17302).abs() < 1e-5),
            other => panic!("{other:?}"),
        }
        match FadingSpec::normalized(FadingKind::Gamma) {
            FadingSpec::Gamma { shape, scale } => {
                assert_eq!(shape, 2.0);
                assert!((scale - 0.5).abs() < 1e-15);
            }
            other => panic!("{other:?}"),
        }
        for kind in FadingKind::ALL {
            let v = FadingSpec::normalized(kind).component_variance();
            assert!((v - 0.5).abs() < 1e-12, "{kind}: {v}");
        }
        let bad = FreeParams { gamma_shape: 0.0, ..FreeParams::default() };
        assert!(normalize_spec(FadingKind::Gamma, bad).is_err());
    }

    #[test]
    fn sampled_component_variance_is_half() {
        for (i, kind) in FadingKind::ALL.into_iter().enumerate() {
            let spec = FadingSpec::normalized(kind);
            let mut rng = Rng::new(3, i as u64);
            let hs: Vec<Complex<f64>> = (0..N).map(|_| sample_fading(&mut rng, &spec)).collect();
            let (mr, vr) = moments(hs.iter().map(|h| h.re));
            let (mi, vi) = moments(hs.iter().map(|h| h.im));
            assert!((vr - 0.5).abs() < 0.005, "{kind} re var {vr}");
            assert!((vi - 0.5).abs() < 0.005, "{kind} im var {vi}");
            let mean = spec.component_mean();
            assert!((mr - mean).abs() < 0.005 && (mi - mean).abs() < 0.005, "{kind} mean");
            if kind.nonnegative_support() {
                assert!(hs.iter().all(|h| h.re >= 0.0 && h.im >= 0.0), "{kind}");
            }
        }
    }

    #[test]
    fn rayleigh_power_is_unity() {
        let spec = FadingSpec::rayleigh();
        let mut rng = Rng::new(4, 0);
        let p = (0..N).map(|_| sample_fading::<f64>(&mut rng, &spec).norm_sqr()).sum::<f64>()
            / N as f64;
        assert!((p - 1.0).abs() < 0.01, "{p}");
    }

    #[test]
    fn real_line_support_has_both_signs() {
        for kind in [FadingKind::Rayleigh, FadingKind::Custom, FadingKind::Gumbel] {
            let spec = FadingSpec::normalized(kind);
            let mut rng = Rng::new(5, 0);
            let xs: Vec<f64> = (0..10_000).map(|_| sample_fading::<f64>(&mut rng, &spec).re).collect();
            assert!(xs.iter().any(|&x| x < 0.0) && xs.iter().any(|&x| x > 0.0), "{kind}");
        }
    }

    #[test]
    fn pdf_values() {
        let custom = FadingSpec::normalized(FadingKind::Custom);
        assert!((pdf(&custom, 0.0) - 1.0).abs() < 1e-15);
        let ray = FadingSpec::rayleigh();
        assert!((pdf(&ray, 0.0) - 1.0 / PI.sqrt()).abs() < 1e-12);
        assert_eq!(pdf(&FadingSpec::normalized(FadingKind::Gamma), -0.1), 0.0);
        assert_eq!(pdf(&FadingSpec::normalized(FadingKind::FoldedNormal), -0.1), 0.0);
    }

    #[test]
    fn pdf_integrates_to_one() {
        // Composite trapezoid oracle.
        let trapezoid = |spec: &FadingSpec, lo: f64, hi: f64| {
            let steps = 400_000;
            let h = (hi - lo) / steps as f64;
            let mut acc = 0.5 * (pdf(spec, lo) + pdf(spec, hi));
            for i in 1..steps {
                acc += pdf(spec, lo + i as f64 * h);
            }
            acc * h
        };
        for kind in FadingKind::ALL {
            let spec = FadingSpec::normalized(kind);
            let mass = if kind.nonnegative_support() {
                trapezoid(&spec, 0.0, 30.0)
            } else {
                // Laplace has a kink at 0; keep it on a grid node.
                trapezoid(&spec, -10.0, 10.0)
            };
            assert!((mass - 1.0).abs() < 1e-6, "{kind}: {mass}");
        }
    }

    #[test]
    fn kind_names_round_trip() {
        for kind in FadingKind::ALL {
            assert_eq!(kind.name().parse::<FadingKind>().unwrap(), kind);
        }
        assert!("weibull".parse::<FadingKind>().is_err());
    }
}
