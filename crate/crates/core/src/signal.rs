//! Waveform I/O and the STFT analysis/synthesis pair.
//!
//! Frames are laid out on a zero-padded copy of the signal: `window_length - hop`
//! zeros in front, then the samples, then enough trailing zeros to complete the
//! last frame. Frame `t` covers padded samples `[t * hop, t * hop + window_length)`.
//! The leading pad guarantees every original sample is seen by the same number
//! of windows, so synthesis is exact over the whole signal, edges included.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use ndarray::Array2;
use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};

/// A mono signal with its sample rate.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    samples: Vec<f64>,
    sample_rate: u32,
}

impl Waveform {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::EmptyWaveform);
        }
        if let Some(index) = samples.iter().position(|s| !s.is_finite()) {
            return Err(Error::NonFiniteSample { index });
        }
        if sample_rate == 0 {
            return Err(Error::invalid("sample_rate", "must be positive"));
        }
        Ok(Waveform {
            samples,
            sample_rate,
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WindowKind {
    /// Periodic Hann window, `0.5 - 0.5 cos(2 pi n / N)`.
    Hann,
}

impl WindowKind {
    pub fn coefficients(self, len: usize) -> Vec<f64> {
        match self {
            WindowKind::Hann => (0..len)
                .map(|n| 0.5 - 0.5 * (2.0 * PI * n as f64 / len as f64).cos())
                .collect(),
        }
    }
}

/// Analysis parameters shared by [`stft`] and [`istft`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StftConfig {
    window_length: usize,
    hop: usize,
    window: WindowKind,
}

impl StftConfig {
    /// Hann analysis with an explicit window length and hop, both in samples.
    pub fn new(window_length: usize, hop: usize) -> Result<Self> {
        if window_length < 4 || !window_length.is_multiple_of(2) {
            return Err(Error::invalid(
                "window_length",
                format!("{window_length} must be even and at least 4"),
            ));
        }
        if hop == 0 || hop > window_length {
            return Err(Error::invalid(
                "hop",
                format!("{hop} must lie in 1..={window_length}"),
            ));
        }
        let cfg = StftConfig {
            window_length,
            hop,
            window: WindowKind::Hann,
        };
        // Weighted overlap-add needs the squared-window sum to stay away from zero.
        let w = cfg.window_coefficients();
        let min_sum = (0..hop)
            .map(|n| {
                (n..window_length)
                    .step_by(hop)
                    .map(|i| w[i] * w[i])
                    .sum::<f64>()
            })
            .fold(f64::INFINITY, f64::min);
        if min_sum < 1e-8 {
            return Err(Error::invalid(
                "hop",
                format!("hop {hop} leaves samples uncovered by window {window_length}"),
            ));
        }
        Ok(cfg)
    }

    /// Hann window with 75% overlap whose length is the power of two closest to
    /// `duration_ms` at `sample_rate`. 92 ms at 44.1 kHz gives 4096 samples.
    pub fn from_duration(duration_ms: f64, sample_rate: u32) -> Result<Self> {
        if !(duration_ms > 0.0) || !duration_ms.is_finite() {
            return Err(Error::invalid("window_ms", format!("{duration_ms} must be positive")));
        }
        let samples = duration_ms * 1e-3 * sample_rate as f64;
        let exponent = samples.log2().round().max(2.0);
        let window_length = 2usize.pow(exponent as u32);
        StftConfig::new(window_length, window_length / 4)
    }

    pub fn window_length(&self) -> usize {
        self.window_length
    }

    pub fn hop(&self) -> usize {
        self.hop
    }

    pub fn window(&self) -> WindowKind {
        self.window
    }

    /// Number of stored (nonnegative-frequency) bins.
    pub fn bins(&self) -> usize {
        self.window_length / 2 + 1
    }

    /// Zeros inserted before the first sample.
    pub fn lead_padding(&self) -> usize {
        self.window_length - self.hop
    }

    /// Frame count for a signal of `len` samples.
    pub fn frames(&self, len: usize) -> usize {
        (len.max(1) - 1 + self.lead_padding()) / self.hop + 1
    }

    pub fn window_coefficients(&self) -> Vec<f64> {
        self.window.coefficients(self.window_length)
    }
}

/// STFT of a real signal: `bins() x frames` complex grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexSpectrogram {
    data: Array2<Complex64>,
    config: StftConfig,
    signal_len: usize,
    sample_rate: u32,
}

impl ComplexSpectrogram {
    /// Wraps an existing grid. `signal_len` is the length of the waveform the
    /// grid synthesizes back to.
    pub fn from_parts(
        data: Array2<Complex64>,
        config: StftConfig,
        signal_len: usize,
        sample_rate: u32,
    ) -> Result<Self> {
        let (f, t) = data.dim();
        if f != config.bins() {
            return Err(Error::ShapeMismatch(format!(
                "spectrogram has {f} bins, window {} implies {}",
                config.window_length(),
                config.bins()
            )));
        }
        if signal_len == 0 || t != config.frames(signal_len) {
            return Err(Error::ShapeMismatch(format!(
                "spectrogram has {t} frames, signal length {signal_len} implies {}",
                config.frames(signal_len)
            )));
        }
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::invalid("data", "spectrogram contains non-finite entries"));
        }
        Ok(ComplexSpectrogram {
            data,
            config,
            signal_len,
            sample_rate,
        })
    }

    /// Same geometry, new data.
    pub fn with_data(&self, data: Array2<Complex64>) -> Result<Self> {
        ComplexSpectrogram::from_parts(data, self.config, self.signal_len, self.sample_rate)
    }

    pub fn data(&self) -> &Array2<Complex64> {
        &self.data
    }

    pub fn into_data(self) -> Array2<Complex64> {
        self.data
    }

    pub fn config(&self) -> &StftConfig {
        &self.config
    }

    pub fn signal_len(&self) -> usize {
        self.signal_len
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn bins(&self) -> usize {
        self.data.nrows()
    }

    pub fn frames(&self) -> usize {
        self.data.ncols()
    }

    /// `|X|^2` entrywise.
    pub fn power(&self) -> Array2<f64> {
        self.data.mapv(|z| z.norm_sqr())
    }
}

pub fn stft(w: &Waveform, cfg: &StftConfig) -> ComplexSpectrogram {
    let n = cfg.window_length();
    let hop = cfg.hop();
    let lead = cfg.lead_padding();
    let frames = cfg.frames(w.len());
    let bins = cfg.bins();
    let window = cfg.window_coefficients();
    let fft = FftPlanner::<f64>::new().plan_fft_forward(n);

    let mut data = Array2::<Complex64>::zeros((bins, frames));
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    let samples = w.samples();
    for t in 0..frames {
        for (i, b) in buf.iter_mut().enumerate() {
            // padded index -> original index
            let sample = (t * hop + i)
                .checked_sub(lead)
                .and_then(|k| samples.get(k))
                .copied()
                .unwrap_or(0.0);
            *b = Complex64::new(sample * window[i], 0.0);
        }
        fft.process(&mut buf);
        for f in 0..bins {
            data[[f, t]] = buf[f];
        }
    }
    ComplexSpectrogram {
        data,
        config: *cfg,
        signal_len: w.len(),
        sample_rate: w.sample_rate(),
    }
}

/// Weighted overlap-add inverse of [`stft`]. The negative-frequency half is
/// rebuilt by conjugate symmetry.
pub fn istft(s: &ComplexSpectrogram) -> Result<Waveform> {
    let cfg = s.config();
    let n = cfg.window_length();
    let hop = cfg.hop();
    let bins = cfg.bins();
    if s.bins() != bins {
        return Err(Error::ShapeMismatch(format!(
            "spectrogram has {} bins, window {n} implies {bins}",
            s.bins()
        )));
    }
    let frames = s.frames();
    let window = cfg.window_coefficients();
    let ifft = FftPlanner::<f64>::new().plan_fft_inverse(n);

    let padded_len = (frames - 1) * hop + n;
    let mut out = vec![0.0; padded_len];
    let mut norm = vec![0.0; padded_len];
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    for t in 0..frames {
        for (f, b) in buf.iter_mut().enumerate() {
            *b = if f < bins { s.data[[f, t]] } else { s.data[[n - f, t]].conj() };
        }
        ifft.process(&mut buf);
        let start = t * hop;
        for i in 0..n {
            out[start + i] += buf[i].re / n as f64 * window[i];
            norm[start + i] += window[i] * window[i];
        }
    }
    let lead = cfg.lead_padding();
    let samples = (lead..lead + s.signal_len())
        .map(|i| if norm[i] > 1e-12 { out[i] / norm[i] } else { 0.0 })
        .collect();
    Waveform::new(samples, s.sample_rate())
}

// ---------------------------------------------------------------------------
// WAV (RIFF) I/O

const FORMAT_PCM: u16 = 1;
const FORMAT_IEEE_FLOAT: u16 = 3;
const FORMAT_EXTENSIBLE: u16 = 0xFFFE;

struct FmtChunk {
    format: u16,
    channels: u16,
    sample_rate: u32,
    block_align: u16,
    bits: u16,
}

fn le_u16(b: &[u8]) -> u16 {
    u16::from_le_bytes([b[0], b[1]])
}

fn le_u32(b: &[u8]) -> u32 {
    u32::from_le_bytes([b[0], b[1], b[2], b[3]])
}

/// Reads a PCM (16/24/32-bit integer) or IEEE float (32/64-bit) WAV file,
/// averaging channels down to mono.
pub fn read_wav(path: impl AsRef<Path>) -> Result<Waveform> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let malformed = |detail: &str| Error::MalformedWav {
        path: path.to_path_buf(),
        detail: detail.to_string(),
    };
    if bytes.len() < 12 || &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return Err(malformed("missing RIFF/WAVE header"));
    }

    let mut fmt = None;
    let mut data: Option<&[u8]> = None;
    let mut pos = 12;
    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let size = le_u32(&bytes[pos + 4..pos + 8]) as usize;
        let body_start = pos + 8;
        // Truncated trailing data chunks are common; clamp instead of failing.
        let body_end = (body_start + size).min(bytes.len());
        let body = &bytes[body_start..body_end];
        match id {
            b"fmt " => {
                if body.len() < 16 {
                    return Err(malformed("fmt chunk too short"));
                }
                let mut format = le_u16(&body[0..2]);
                if format == FORMAT_EXTENSIBLE {
                    if body.len() < 26 {
                        return Err(malformed("extensible fmt chunk too short"));
                    }
                    format = le_u16(&body[24..26]);
                }
                fmt = Some(FmtChunk {
                    format,
                    channels: le_u16(&body[2..4]),
                    sample_rate: le_u32(&body[4..8]),
                    block_align: le_u16(&body[12..14]),
                    bits: le_u16(&body[14..16]),
                });
            }
            b"data" => data = Some(body),
            _ => {}
        }
        pos = body_start + size + (size & 1);
    }
    let fmt = fmt.ok_or_else(|| malformed("no fmt chunk"))?;
    let data = data.ok_or_else(|| malformed("no data chunk"))?;
    if fmt.channels == 0 {
        return Err(malformed("zero channels"));
    }

    let unsupported = || Error::UnsupportedEncoding {
        path: path.to_path_buf(),
        detail: format!("format tag {} with {} bits per sample", fmt.format, fmt.bits),
    };
    let decode: fn(&[u8]) -> f64 = match (fmt.format, fmt.bits) {
        (FORMAT_PCM, 16) => |b| i16::from_le_bytes([b[0], b[1]]) as f64 / 32768.0,
        (FORMAT_PCM, 24) => {
            |b| (i32::from_le_bytes([0, b[0], b[1], b[2]]) >> 8) as f64 / 8_388_608.0
        }
        (FORMAT_PCM, 32) => |b| i32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64 / 2_147_483_648.0,
        (FORMAT_IEEE_FLOAT, 32) => |b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
        (FORMAT_IEEE_FLOAT, 64) => {
            |b| f64::from_le_bytes([b[0], b[1], b[2], b[3], b[4], b[5], b[6], b[7]])
        }
        _ => return Err(unsupported()),
    };
    let sample_bytes = fmt.bits as usize / 8;
    let channels = fmt.channels as usize;
    let block = (fmt.block_align as usize).max(sample_bytes * channels);
    let samples: Vec<f64> = data
        .chunks_exact(block)
        .map(|frame| {
            (0..channels)
                .map(|c| decode(&frame[c * sample_bytes..(c + 1) * sample_bytes]))
                .sum::<f64>()
                / channels as f64
        })
        .collect();
    Waveform::new(samples, fmt.sample_rate)
}

/// Sample encoding used when writing WAV files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SampleFormat {
    #[default]
    Float32,
    Float64,
}

impl SampleFormat {
    pub fn bits(self) -> u16 {
        match self {
            SampleFormat::Float32 => 32,
            SampleFormat::Float64 => 64,
        }
    }
}

/// Writes a mono 32-bit IEEE float WAV file.
pub fn write_wav(w: &Waveform, path: impl AsRef<Path>) -> Result<()> {
    write_wav_as(w, path, SampleFormat::Float32)
}

/// Writes a mono IEEE float WAV file with the given sample width.
pub fn write_wav_as(w: &Waveform, path: impl AsRef<Path>, format: SampleFormat) -> Result<()> {
    let path = path.as_ref();
    if let Some(index) = w.samples().iter().position(|s| !s.is_finite()) {
        return Err(Error::NonFiniteSample { index });
    }
    let width = (format.bits() / 8) as u32;
    let data_len = w.len() as u32 * width;
    let mut out = Vec::with_capacity(58 + data_len as usize);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&(4 + 26 + 12 + 8 + data_len).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&18u32.to_le_bytes());
    out.extend_from_slice(&FORMAT_IEEE_FLOAT.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&w.sample_rate().to_le_bytes());
    out.extend_from_slice(&(w.sample_rate() * width).to_le_bytes());
    out.extend_from_slice(&(width as u16).to_le_bytes());
    out.extend_from_slice(&format.bits().to_le_bytes());
    out.extend_from_slice(&0u16.to_le_bytes());
    out.extend_from_slice(b"fact");
    out.extend_from_slice(&4u32.to_le_bytes());
    out.extend_from_slice(&(w.len() as u32).to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&data_len.to_le_bytes());
    for &s in w.samples() {
        match format {
            SampleFormat::Float32 => out.extend_from_slice(&(s as f32).to_le_bytes()),
            SampleFormat::Float64 => out.extend_from_slice(&s.to_le_bytes()),
        }
    }
    fs::write(path, out).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}
