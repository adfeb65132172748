//! Acquisition simulation: marker expression, spectral leakage between
//! adjacent channels, Gaussian PSF blur, and dark-current noise.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::config::SimulationConfig;
use crate::phenotype::PhenotypeState;
use crate::rng::RandomStream;

/// Leakage reaches at most this many channels on either side.
pub const LEAKAGE_REACH: usize = 2;

/// C×H×W intensity volume, channel-major then row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiplexImage {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    /// 1-based marker index of each channel.
    pub channel_order: Vec<usize>,
    pub data: Vec<f64>,
}

impl MultiplexImage {
    pub fn zeros(channels: usize, height: usize, width: usize) -> Self {
        MultiplexImage {
            channels,
            height,
            width,
            channel_order: (1..=channels).collect(),
            data: vec![0.0; channels * height * width],
        }
    }

    pub fn plane_len(&self) -> usize {
        self.height * self.width
    }

    pub fn channel(&self, c: usize) -> &[f64] {
        let n = self.plane_len();
        &self.data[c * n..(c + 1) * n]
    }

    pub fn channel_mut(&mut self, c: usize) -> &mut [f64] {
        let n = self.plane_len();
        &mut self.data[c * n..(c + 1) * n]
    }

    #[inline]
    pub fn at(&self, c: usize, y: usize, x: usize) -> f64 {
        self.data[(c * self.height + y) * self.width + x]
    }

    /// Mean squared intensity over the whole volume.
    pub fn power(&self) -> f64 {
        if self.data.is_empty() {
            return 0.0;
        }
        self.data.iter().map(|v| v * v).sum::<f64>() / self.data.len() as f64
    }

    /// Values after a round trip through `f32`, i.e. what is written to disk.
    pub fn quantized(&self) -> Self {
        let mut out = self.clone();
        for v in &mut out.data {
            *v = *v as f32 as f64;
        }
        out
    }
}

pub fn expression_map(state: &PhenotypeState, cfg: &SimulationConfig) -> MultiplexImage {
    let mut img = MultiplexImage::zeros(cfg.num_markers, state.height(), state.width());
    let labels = state.labels.as_slice();
    for c in 0..cfg.num_markers {
        for (out, &l) in img.channel_mut(c).iter_mut().zip(labels) {
            *out = cfg.marker_expression[l as usize - 1][c];
        }
    }
    img
}

/// Normalized Gaussian taps for offsets `-reach..=reach`.
pub fn gaussian_kernel(sigma: f64, reach: usize) -> Vec<f64> {
    let r = reach as i64;
    let mut k: Vec<f64> = (-r..=r)
        .map(|d| (-(d * d) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = k.iter().sum();
    for v in &mut k {
        *v /= sum;
    }
    k
}

/// Convolve each pixel's channel vector with a truncated Gaussian;
/// signal pushed past either end of the spectrum is lost.
pub fn spectral_leakage(img: &MultiplexImage, sigma: f64) -> MultiplexImage {
    // A kernel wider than the spectrum is cut to it (C=1 gives [1]).
    let reach = LEAKAGE_REACH.min(img.channels.saturating_sub(1));
    let kernel = gaussian_kernel(sigma, reach);
    let r = reach as i64;
    let n = img.plane_len();
    let mut out = MultiplexImage {
        data: vec![0.0; img.data.len()],
        ..img.clone()
    };
    for c in 0..img.channels {
        let dst = &mut out.data[c * n..(c + 1) * n];
        for (t, &w) in kernel.iter().enumerate() {
            let src = c as i64 - (t as i64 - r);
            if src < 0 || src >= img.channels as i64 {
                continue;
            }
            let src = img.channel(src as usize);
            for (d, &s) in dst.iter_mut().zip(src) {
                *d += w * s;
            }
        }
    }
    out
}

/// Half-sample symmetric reflection: `... b a | a b c ... y z | z y ...`.
#[inline]
pub fn reflect(i: i64, n: usize) -> usize {
    let n = n as i64;
    let period = 2 * n;
    let mut m = i.rem_euclid(period);
    if m >= n {
        m = period - 1 - m;
    }
    m as usize
}

/// Separable isotropic Gaussian blur with reflective borders.
pub fn psf_blur(img: &MultiplexImage, sigma: f64) -> MultiplexImage {
    let reach = (3.0 * sigma).ceil() as usize;
    let kernel = gaussian_kernel(sigma, reach);
    let r = reach as i64;
    let (h, w) = (img.height, img.width);
    let mut out = img.clone();
    let mut tmp = vec![0.0; w.max(h)];
    for c in 0..img.channels {
        let plane = out.channel_mut(c);
        for y in 0..h {
            let row = &plane[y * w..(y + 1) * w];
            for x in 0..w {
                let mut acc = 0.0;
                for (t, &k) in kernel.iter().enumerate() {
                    acc += k * row[reflect(x as i64 + t as i64 - r, w)];
                }
                tmp[x] = acc;
            }
            plane[y * w..(y + 1) * w].copy_from_slice(&tmp[..w]);
        }
        for x in 0..w {
            for y in 0..h {
                let mut acc = 0.0;
                for (t, &k) in kernel.iter().enumerate() {
                    acc += k * plane[reflect(y as i64 + t as i64 - r, h) * w + x];
                }
                tmp[y] = acc;
            }
            for y in 0..h {
                plane[y * w + x] = tmp[y];
            }
        }
    }
    out
}

fn std_normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)
}

fn std_normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Expected `(max(mu + n, 0) - mu)²` for `n ~ N(0, sigma²)`.
pub fn clamped_noise_power(mu: f64, sigma: f64) -> f64 {
    if sigma == 0.0 {
        return 0.0;
    }
    let z = mu / sigma;
    // E[n²; n > -mu] + mu²·P(n < -mu)
    let tail = std_normal_cdf(-z);
    sigma * sigma * ((1.0 - tail) - z * std_normal_pdf(z)) + mu * mu * tail
}

/// Noise standard deviation such that, after negative values are clamped to
/// zero, the mean noise power equals `P_sig / 10^(snr_db/10)`.
pub fn calibrated_noise_sigma(img: &MultiplexImage, snr_db: f64) -> f64 {
    let p_sig = img.power();
    if p_sig == 0.0 || snr_db == f64::INFINITY {
        return 0.0;
    }
    let target = p_sig / 10f64.powf(snr_db / 10.0);
    let nominal = target.sqrt();

    // Group identical pixel values; rendered volumes are dominated by a few.
    let mut values: Vec<f64> = img.data.clone();
    values.sort_by(f64::total_cmp);
    let mut groups: Vec<(f64, f64)> = Vec::new();
    for v in values {
        match groups.last_mut() {
            Some((g, n)) if *g == v => *n += 1.0,
            _ => groups.push((v, 1.0)),
        }
    }
    let total = img.data.len() as f64;
    let mean_power = |sigma: f64| {
        groups
            .iter()
            .map(|&(mu, n)| n * clamped_noise_power(mu, sigma))
            .sum::<f64>()
            / total
    };

    // Clamping only removes power, so sigma >= nominal; bracket and bisect.
    let mut lo = nominal;
    let mut hi = nominal;
    while mean_power(hi) < target {
        hi *= 2.0;
    }
    if mean_power(lo) >= target {
        return lo;
    }
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if mean_power(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Add zero-mean Gaussian noise for the requested SNR and clamp at zero.
/// Channel `c` draws from substream `("noise", c)` of `stream`.
pub fn add_dark_noise(img: &MultiplexImage, snr_db: f64, stream: &RandomStream) -> MultiplexImage {
    let sigma = calibrated_noise_sigma(img, snr_db);
    let mut out = img.clone();
    if sigma == 0.0 {
        return out;
    }
    for c in 0..img.channels {
        let mut rng = stream.substream("noise", c as u64);
        for v in out.channel_mut(c) {
            let n: f64 = rng.sample(StandardNormal);
            *v = (*v + sigma * n).max(0.0);
        }
    }
    out
}

/// Intermediate stages of a render, kept for inspection and metrics.
#[derive(Debug, Clone)]
pub struct RenderStages {
    pub expression: MultiplexImage,
    pub leaked: MultiplexImage,
    pub blurred: MultiplexImage,
    pub noisy: MultiplexImage,
}

pub fn render_stages(
    state: &PhenotypeState,
    cfg: &SimulationConfig,
    stream: &RandomStream,
) -> RenderStages {
    let expression = expression_map(state, cfg);
    let leaked = spectral_leakage(&expression, cfg.leakage_sigma);
    let blurred = psf_blur(&leaked, cfg.psf_sigma);
    let noisy = add_dark_noise(&blurred, cfg.snr_db, stream);
    RenderStages {
        expression,
        leaked,
        blurred,
        noisy,
    }
}

/// expression → leakage → PSF → noise.
pub fn render_multiplex(
    state: &PhenotypeState,
    cfg: &SimulationConfig,
    stream: &RandomStream,
) -> MultiplexImage {
    render_stages(state, cfg, stream).noisy
}

/// `10·log10(P_sig / P_noise)` with noise taken as `noisy - clean`.
pub fn measured_snr_db(clean: &MultiplexImage, noisy: &MultiplexImage) -> f64 {
    let noise: f64 = clean
        .data
        .iter()
        .zip(&noisy.data)
        .map(|(a, b)| (b - a).powi(2))
        .sum::<f64>()
        / clean.data.len() as f64;
    10.0 * (clean.power() / noise).log10()
}
