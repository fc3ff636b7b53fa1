//! Compression backend and the ratio measurements used as selection scores.
//!
//! Ratios are `original / compressed`. Low ratios mean the data resists
//! compression, i.e. carries more information per byte, and selection
//! minimizes them.

use std::io::{self, Read, Write};

use flate2::read::DeflateDecoder;
use flate2::write::DeflateEncoder;
use flate2::Compression;
use miniz_oxide::deflate::core::{self as deflate, CompressorOxide, TDEFLFlush, TDEFLStatus};
use miniz_oxide::DataFormat;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Byte placed between concatenated payloads.
pub const SEPARATOR: u8 = b'\n';

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CodecError {
    #[error("empty input")]
    EmptyInput,
    #[error("compression level {level} out of range for {codec} (expected {min}..={max})")]
    BadLevel {
        codec: &'static str,
        level: u32,
        min: u32,
        max: u32,
    },
    #[error("context cap must be >= 1 byte")]
    ZeroContextCap,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Codec {
    /// Raw DEFLATE stream (RFC 1951), no zlib or gzip framing.
    #[default]
    Deflate,
}

impl Codec {
    pub fn name(self) -> &'static str {
        match self {
            Codec::Deflate => "deflate",
        }
    }

    fn level_range(self) -> (u32, u32) {
        match self {
            Codec::Deflate => (0, 9),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CodecConfig {
    pub codec: Codec,
    pub level: u32,
    /// When set, joint scoring only uses the trailing bytes of the context.
    pub context_cap_bytes: Option<usize>,
}

impl Default for CodecConfig {
    fn default() -> Self {
        Self {
            codec: Codec::Deflate,
            level: 6,
            context_cap_bytes: None,
        }
    }
}

impl CodecConfig {
    pub fn new(
        codec: Codec,
        level: u32,
        context_cap_bytes: Option<usize>,
    ) -> Result<Self, CodecError> {
        let cfg = Self {
            codec,
            level,
            context_cap_bytes,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CodecError> {
        let (min, max) = self.codec.level_range();
        if !(min..=max).contains(&self.level) {
            return Err(CodecError::BadLevel {
                codec: self.codec.name(),
                level: self.level,
                min,
                max,
            });
        }
        if self.context_cap_bytes == Some(0) {
            return Err(CodecError::ZeroContextCap);
        }
        Ok(())
    }

    /// Trailing slice of `context` that joint scoring compresses against.
    pub fn context_window<'a>(&self, context: &'a [u8]) -> &'a [u8] {
        match self.context_cap_bytes {
            Some(cap) if context.len() > cap => &context[context.len() - cap..],
            _ => context,
        }
    }
}

pub fn compress(data: &[u8], config: &CodecConfig) -> Result<Vec<u8>, CodecError> {
    if data.is_empty() {
        return Err(CodecError::EmptyInput);
    }
    match config.codec {
        Codec::Deflate => {
            let mut enc = DeflateEncoder::new(Vec::new(), Compression::new(config.level));
            // Writing to an in-memory sink cannot fail.
            enc.write_all(data).expect("in-memory deflate write");
            Ok(enc.finish().expect("in-memory deflate finish"))
        }
    }
}

pub fn decompress(data: &[u8], config: &CodecConfig) -> io::Result<Vec<u8>> {
    let mut out = Vec::new();
    match config.codec {
        Codec::Deflate => {
            DeflateDecoder::new(data).read_to_end(&mut out)?;
        }
    }
    Ok(out)
}

/// Size in bytes of the compressed form of `data`.
pub fn compressed_size(data: &[u8], config: &CodecConfig) -> Result<u64, CodecError> {
    if data.is_empty() {
        return Err(CodecError::EmptyInput);
    }
    let mut stream = SizeStream::new(config);
    stream.feed(data, TDEFLFlush::None);
    stream.feed(&[], TDEFLFlush::Finish);
    Ok(stream.emitted)
}

/// Encoder that discards its output and only counts it. Same engine and
/// parameters as [`compress`], so sizes agree byte for byte.
#[derive(Clone)]
struct SizeStream {
    state: Box<CompressorOxide>,
    emitted: u64,
}

impl SizeStream {
    fn new(config: &CodecConfig) -> Self {
        let mut state: Box<CompressorOxide> = Box::default();
        match config.codec {
            Codec::Deflate => state.set_format_and_level(DataFormat::Raw, config.level as u8),
        }
        Self { state, emitted: 0 }
    }

    fn feed(&mut self, mut input: &[u8], flush: TDEFLFlush) {
        let mut out = [0u8; 16 * 1024];
        loop {
            let (status, consumed, written) = deflate::compress(&mut self.state, input, &mut out, flush);
            self.emitted += written as u64;
            input = &input[consumed..];
            match status {
                TDEFLStatus::Done => return,
                TDEFLStatus::Okay if flush != TDEFLFlush::Finish && input.is_empty() && written < out.len() => return,
                TDEFLStatus::Okay => {}
                // Only reachable with invalid parameters, which validate() excludes.
                other => panic!("deflate stream failed: {other:?}"),
            }
        }
    }
}

/// Encoder state after consuming `context ∥ SEP`. Scoring a candidate clones
/// the state rather than recompressing the context, with identical results to
/// [`joint_ratio`].
#[derive(Clone)]
pub struct PrimedContext {
    stream: SizeStream,
    context_bytes: u64,
    config: CodecConfig,
}

impl PrimedContext {
    /// Primes on the trailing window of `context` that the config allows.
    pub fn new(context: &[u8], config: &CodecConfig) -> Self {
        let window = config.context_window(context);
        let mut stream = SizeStream::new(config);
        let mut context_bytes = 0;
        if !window.is_empty() {
            stream.feed(window, TDEFLFlush::None);
            stream.feed(&[SEPARATOR], TDEFLFlush::None);
            context_bytes = window.len() as u64 + 1;
        }
        Self {
            stream,
            context_bytes,
            config: *config,
        }
    }

    pub fn joint_ratio(&self, candidate: &[u8]) -> Result<RatioScore, CodecError> {
        if candidate.is_empty() {
            return Err(CodecError::EmptyInput);
        }
        let mut stream = self.stream.clone();
        stream.feed(candidate, TDEFLFlush::None);
        stream.feed(&[], TDEFLFlush::Finish);
        Ok(RatioScore::new(
            self.context_bytes + candidate.len() as u64,
            stream.emitted,
        ))
    }

    pub fn config(&self) -> &CodecConfig {
        &self.config
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatioScore {
    pub original_bytes: u64,
    pub compressed_bytes: u64,
    pub ratio: f64,
}

impl RatioScore {
    pub fn new(original_bytes: u64, compressed_bytes: u64) -> Self {
        Self {
            original_bytes,
            compressed_bytes,
            ratio: original_bytes as f64 / compressed_bytes as f64,
        }
    }
}

pub fn ratio_of(data: &[u8], config: &CodecConfig) -> Result<RatioScore, CodecError> {
    let compressed = compressed_size(data, config)?;
    Ok(RatioScore::new(data.len() as u64, compressed))
}

/// Concatenates `context ∥ SEP ∥ candidate`, dropping the separator when the
/// context is empty.
pub fn join_with_separator(context: &[u8], candidate: &[u8]) -> Vec<u8> {
    let mut merged = Vec::with_capacity(context.len() + 1 + candidate.len());
    if !context.is_empty() {
        merged.extend_from_slice(context);
        merged.push(SEPARATOR);
    }
    merged.extend_from_slice(candidate);
    merged
}

/// Ratio of the selected buffer with `candidate` appended. With a context cap
/// only the tail of `buffer` takes part.
pub fn joint_ratio(
    buffer: &[u8],
    candidate: &[u8],
    config: &CodecConfig,
) -> Result<RatioScore, CodecError> {
    if candidate.is_empty() {
        return Err(CodecError::EmptyInput);
    }
    let merged = join_with_separator(config.context_window(buffer), candidate);
    ratio_of(&merged, config)
}
