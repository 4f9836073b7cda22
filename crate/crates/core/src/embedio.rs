//! Embedding sequences, target pools, score sets and their on-disk formats.
//!
//! EMB1 layout (little-endian, no trailer):
//!
//! ```text
//! offset 0   magic  b"EMB1"
//! offset 4   u32    dim
//! offset 8   u32    frame_count
//! offset 12  f32    frame_count * dim values, row-major
//! ```
//!
//! Values are stored as `f32` and widened to `f64` on load. Every loaded
//! frame is finite and has nonzero norm.

use std::cmp::Ordering;
use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, FormatError, OtError, Result};

pub const EMB1_MAGIC: [u8; 4] = *b"EMB1";
pub const EMB1_HEADER_LEN: usize = 12;

/// One recording as an ordered `M x dim` matrix of frame embeddings.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSequence {
    dim: usize,
    data: Vec<f64>,
    pub source_id: String,
    /// Frame hop in milliseconds. Metadata only; not serialized in EMB1.
    pub frame_hop_ms: Option<f64>,
}

impl EmbeddingSequence {
    /// Builds a sequence from row-major data, checking every invariant.
    pub fn new(dim: usize, data: Vec<f64>, source_id: impl Into<String>) -> Result<Self, OtError> {
        if dim == 0 {
            return Err(OtError::InvalidSequence("dim must be at least 1".into()));
        }
        if data.is_empty() {
            return Err(OtError::InvalidSequence("empty sequence".into()));
        }
        if !data.len().is_multiple_of(dim) {
            return Err(OtError::InvalidSequence(format!(
                "data length {} is not a multiple of dim {}",
                data.len(),
                dim
            )));
        }
        for (f, frame) in data.chunks_exact(dim).enumerate() {
            if let Some(c) = frame.iter().position(|v| !v.is_finite()) {
                return Err(OtError::InvalidSequence(format!(
                    "non-finite value in frame {f}, component {c}"
                )));
            }
            if frame.iter().all(|&v| v == 0.0) {
                return Err(OtError::InvalidSequence(format!("frame {f} has zero norm")));
            }
        }
        Ok(EmbeddingSequence {
            dim,
            data,
            source_id: source_id.into(),
            frame_hop_ms: None,
        })
    }

    /// Builds a sequence from a list of equally sized frames.
    pub fn from_frames<I, F>(frames: I, source_id: impl Into<String>) -> Result<Self, OtError>
    where
        I: IntoIterator<Item = F>,
        F: AsRef<[f64]>,
    {
        let mut data = Vec::new();
        let mut dim = None;
        for frame in frames {
            let frame = frame.as_ref();
            match dim {
                None => dim = Some(frame.len()),
                Some(d) if d != frame.len() => {
                    return Err(OtError::InvalidSequence(format!(
                        "ragged frames: {} vs {}",
                        d,
                        frame.len()
                    )))
                }
                _ => {}
            }
            data.extend_from_slice(frame);
        }
        Self::new(dim.unwrap_or(0), data, source_id)
    }

    pub fn with_frame_hop_ms(mut self, hop: f64) -> Self {
        self.frame_hop_ms = Some(hop);
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    /// Always false for a constructed sequence; present for API symmetry.
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn frame(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn frames(&self) -> std::slice::ChunksExact<'_, f64> {
        self.data.chunks_exact(self.dim)
    }

    /// Row-major backing storage.
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.data
    }
}

/// Serializes a sequence to EMB1 bytes. Values are narrowed to `f32`.
pub fn encode_emb1(seq: &EmbeddingSequence) -> Vec<u8> {
    let mut out = Vec::with_capacity(EMB1_HEADER_LEN + seq.data.len() * 4);
    out.extend_from_slice(&EMB1_MAGIC);
    out.extend_from_slice(&(seq.dim as u32).to_le_bytes());
    out.extend_from_slice(&(seq.len() as u32).to_le_bytes());
    for &v in &seq.data {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    out
}

/// Parses EMB1 bytes, rejecting anything that is not an exact, valid file.
pub fn decode_emb1(bytes: &[u8], source_id: &str) -> Result<EmbeddingSequence, FormatError> {
    if bytes.len() >= 4 && bytes[..4] != EMB1_MAGIC {
        let mut found = [0u8; 4];
        found.copy_from_slice(&bytes[..4]);
        return Err(FormatError::BadMagic { found });
    }
    if bytes.len() < EMB1_HEADER_LEN {
        return Err(FormatError::TruncatedHeader { len: bytes.len() });
    }
    let dim = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let count = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    if dim == 0 {
        return Err(FormatError::ZeroDim);
    }
    if count == 0 {
        return Err(FormatError::EmptySequence);
    }
    let expected = dim as u64 * count as u64 * 4;
    let actual = (bytes.len() - EMB1_HEADER_LEN) as u64;
    if expected != actual {
        return Err(FormatError::PayloadLength {
            offset: EMB1_HEADER_LEN as u64 + expected.min(actual),
            expected,
            actual,
        });
    }

    let payload = &bytes[EMB1_HEADER_LEN..];
    let mut data = Vec::with_capacity(dim * count);
    for (frame, chunk) in payload.chunks_exact(dim * 4).enumerate() {
        let frame_offset = (EMB1_HEADER_LEN + frame * dim * 4) as u64;
        let mut nonzero = false;
        for (component, raw) in chunk.chunks_exact(4).enumerate() {
            let value = f32::from_le_bytes(raw.try_into().unwrap());
            if !value.is_finite() {
                return Err(FormatError::NonFinite {
                    frame,
                    component,
                    offset: frame_offset + component as u64 * 4,
                    value,
                });
            }
            nonzero |= value != 0.0;
            data.push(value as f64);
        }
        if !nonzero {
            return Err(FormatError::ZeroNormFrame {
                frame,
                offset: frame_offset,
            });
        }
    }
    Ok(EmbeddingSequence {
        dim,
        data,
        source_id: source_id.to_string(),
        frame_hop_ms: None,
    })
}

/// Reads an EMB1 file. The returned sequence's `source_id` is the path.
pub fn read_embeddings(path: impl AsRef<Path>) -> Result<EmbeddingSequence> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_emb1(&bytes, &path.display().to_string()).map_err(|e| Error::format(path, e))
}

/// Writes an EMB1 file atomically (temp file in the same directory, then rename).
pub fn write_embeddings(seq: &EmbeddingSequence, path: impl AsRef<Path>) -> Result<()> {
    write_atomic(path.as_ref(), &encode_emb1(seq))
}

pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(path, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(path, e))?;
    tmp.as_file().sync_all().map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

/// Concatenation order for [`build_pool`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PoolOrder {
    #[default]
    AsGiven,
    /// Longest utterance first; equal lengths by ascending `source_id`.
    ByDurationDesc,
}

/// Several utterances concatenated into one OT target sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetPool {
    pub sequence: EmbeddingSequence,
    /// `(source_id, frame_count)` in concatenation order.
    pub provenance: Vec<(String, usize)>,
}

impl TargetPool {
    pub fn from_sequence(sequence: EmbeddingSequence) -> Self {
        let provenance = vec![(sequence.source_id.clone(), sequence.len())];
        TargetPool {
            sequence,
            provenance,
        }
    }

    pub fn len(&self) -> usize {
        self.sequence.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sequence.is_empty()
    }
}

pub fn build_pool(
    utterances: &[EmbeddingSequence],
    order: PoolOrder,
) -> Result<TargetPool, OtError> {
    let first = utterances.first().ok_or(OtError::EmptyPool)?;
    let dim = first.dim();
    if let Some(bad) = utterances.iter().find(|u| u.dim() != dim) {
        return Err(OtError::DimMismatch {
            left: dim,
            right: bad.dim(),
        });
    }

    let mut ordered: Vec<&EmbeddingSequence> = utterances.iter().collect();
    if order == PoolOrder::ByDurationDesc {
        ordered.sort_by(|a, b| match b.len().cmp(&a.len()) {
            Ordering::Equal => a.source_id.cmp(&b.source_id),
            o => o,
        });
    }

    let total: usize = ordered.iter().map(|u| u.data.len()).sum();
    let mut data = Vec::with_capacity(total);
    let mut provenance = Vec::with_capacity(ordered.len());
    for u in ordered {
        data.extend_from_slice(&u.data);
        provenance.push((u.source_id.clone(), u.len()));
    }
    let sequence = EmbeddingSequence {
        dim,
        data,
        source_id: "pool".to_string(),
        frame_hop_ms: first.frame_hop_ms,
    };
    Ok(TargetPool {
        sequence,
        provenance,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Label {
    Bonafide,
    Spoof,
}

impl Label {
    pub fn as_str(self) -> &'static str {
        match self {
            Label::Bonafide => "bonafide",
            Label::Spoof => "spoof",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Trial {
    pub label: Label,
    pub score: f64,
    /// 1-based source line, 0 when built in memory.
    pub line: usize,
}

/// Labeled detection scores. Higher score means more bonafide-like.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ScoreSet {
    pub trials: Vec<Trial>,
}

impl ScoreSet {
    pub fn from_pairs(pairs: impl IntoIterator<Item = (Label, f64)>) -> Self {
        ScoreSet {
            trials: pairs
                .into_iter()
                .map(|(label, score)| Trial {
                    label,
                    score,
                    line: 0,
                })
                .collect(),
        }
    }

    pub fn count(&self, label: Label) -> usize {
        self.trials.iter().filter(|t| t.label == label).count()
    }

    pub fn negated(&self) -> ScoreSet {
        ScoreSet {
            trials: self
                .trials
                .iter()
                .map(|t| Trial {
                    score: -t.score,
                    ..*t
                })
                .collect(),
        }
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for t in &self.trials {
            s.push_str(t.label.as_str());
            s.push(' ');
            s.push_str(&format!("{:?}", t.score));
            s.push('\n');
        }
        s
    }
}

/// Parses `<label> <score>` lines. Blank lines and `#` comments are skipped.
pub fn parse_scores(text: &str) -> Result<ScoreSet, FormatError> {
    let mut trials = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let mut parts = trimmed.split_whitespace();
        let (Some(label_tok), Some(score_tok), None) = (parts.next(), parts.next(), parts.next())
        else {
            if let Some(tok) = trimmed.split_whitespace().next() {
                if tok != "bonafide" && tok != "spoof" {
                    return Err(FormatError::UnknownLabel {
                        line,
                        token: tok.to_string(),
                    });
                }
            }
            return Err(FormatError::MalformedLine { line });
        };
        let label = match label_tok {
            "bonafide" => Label::Bonafide,
            "spoof" => Label::Spoof,
            other => {
                return Err(FormatError::UnknownLabel {
                    line,
                    token: other.to_string(),
                })
            }
        };
        let score: f64 = match score_tok.parse() {
            Ok(v) if f64::is_finite(v) => v,
            _ => {
                return Err(FormatError::BadScore {
                    line,
                    token: score_tok.to_string(),
                })
            }
        };
        trials.push(Trial { label, score, line });
    }
    if trials.is_empty() {
        return Err(FormatError::EmptyScores);
    }
    Ok(ScoreSet { trials })
}

pub fn read_scores(path: impl AsRef<Path>) -> Result<ScoreSet> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_scores(&text).map_err(|e| Error::format(path, e))
}
