//! File formats: newline-delimited conversation records, mixture manifests,
//! serialized plans, and content digests.
//!
//! Records are written canonically (fixed field order, one object per
//! line, `\n` terminated) so the SHA-256 of the bytes identifies a mixture.

use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::batching::{Batch, BatchPlan};
use crate::conversation::{Conversation, ImageRef, Modality, Turn};
use crate::error::{Error, Result};
use crate::mixture::MixtureManifest;

/// On-disk shape of one conversation. Field order here is the canonical
/// write order.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Record {
    id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    image: Option<ImageRef>,
    modality: Modality,
    source: String,
    #[serde(alias = "conversations")]
    turns: Vec<Turn>,
}

impl From<&Conversation> for Record {
    fn from(c: &Conversation) -> Self {
        Record {
            id: c.id.clone(),
            image: c.image.clone(),
            modality: c.modality(),
            source: c.source.clone(),
            turns: c.turns.clone(),
        }
    }
}

/// SHA-256 digest of a canonical byte stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ContentHash(pub [u8; 32]);

impl ContentHash {
    pub fn of(bytes: &[u8]) -> Self {
        ContentHash(Sha256::digest(bytes).into())
    }
}

impl fmt::Display for ContentHash {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.iter().try_for_each(|b| write!(f, "{b:02x}"))
    }
}

/// Parses one record line without checking conversation invariants.
pub fn parse_conversation(line: &str) -> std::result::Result<Conversation, String> {
    let rec: Record = serde_json::from_str(line).map_err(|e| e.to_string())?;
    let conv = Conversation { id: rec.id, source: rec.source, image: rec.image, turns: rec.turns };
    if conv.modality() != rec.modality {
        return Err(format!(
            "invalid field `modality`: `{}` does not match image presence",
            rec.modality
        ));
    }
    Ok(conv)
}

/// Reads a JSONL file, returning each non-blank line with its 1-based
/// line number.
pub fn read_lines(path: &Path) -> Result<Vec<(usize, String)>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if !line.trim().is_empty() {
            out.push((i + 1, line));
        }
    }
    Ok(out)
}

/// Reads a JSONL file of arbitrary records.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    read_lines(path)?
        .into_iter()
        .map(|(line, text)| {
            serde_json::from_str(&text).map_err(|e| Error::Record {
                path: path.to_path_buf(),
                line,
                message: e.to_string(),
            })
        })
        .collect()
}

/// Reads and validates a conversation record stream.
pub fn read_records(path: &Path) -> Result<Vec<Conversation>> {
    read_lines(path)?
        .into_iter()
        .map(|(line, text)| {
            let record_err = |message: String| Error::Record { path: path.to_path_buf(), line, message };
            let conv = parse_conversation(&text).map_err(record_err)?;
            conv.validate().map_err(|e| record_err(e.to_string()))?;
            Ok(conv)
        })
        .collect()
}

/// Canonical bytes of a record stream.
pub fn encode_records(convs: &[Conversation]) -> Vec<u8> {
    let mut out = Vec::with_capacity(convs.len() * 256);
    for c in convs {
        serde_json::to_writer(&mut out, &Record::from(c)).expect("records always serialize");
        out.push(b'\n');
    }
    out
}

pub fn hash_records(convs: &[Conversation]) -> ContentHash {
    ContentHash::of(&encode_records(convs))
}

pub fn write_records(convs: &[Conversation], path: &Path) -> Result<ContentHash> {
    let bytes = encode_records(convs);
    fs::write(path, &bytes).map_err(|e| Error::io(path, e))?;
    Ok(ContentHash::of(&bytes))
}

/// Parses a TOML manifest. Unknown or missing fields are reported with
/// their path inside the document.
pub fn parse_manifest(text: &str, path: &Path) -> Result<MixtureManifest> {
    let schema_err = |location: String, message: String| Error::Schema {
        path: path.to_path_buf(),
        location,
        message,
    };
    let de = toml::Deserializer::parse(text)
        .map_err(|e| schema_err("(document)".into(), e.message().to_string()))?;
    let mut manifest: MixtureManifest = serde_path_to_error::deserialize(de).map_err(|e| {
        let location = match e.path().to_string() {
            p if p == "." => "(root)".to_string(),
            p => p,
        };
        schema_err(location, e.inner().message().to_string())
    })?;
    manifest.validate().map_err(|(location, message)| schema_err(location, message))?;
    manifest.base_dir = path.parent().map(Path::to_path_buf);
    Ok(manifest)
}

pub fn read_manifest(path: &Path) -> Result<MixtureManifest> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_manifest(&text, path)
}

/// Writes any plan (tiling, layout, batch) as a pretty JSON document.
pub fn write_plan<T: Serialize>(plan: &T, path: &Path) -> Result<()> {
    let mut text = serde_json::to_string_pretty(plan).expect("plans always serialize");
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_plan<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Record {
        path: path.to_path_buf(),
        line: e.line(),
        message: e.to_string(),
    })
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BatchLine<'a> {
    batch_index: usize,
    #[serde(borrow)]
    ids: Vec<std::borrow::Cow<'a, str>>,
    modality: Modality,
}

/// Writes a batch plan as one `{batch_index, ids, modality}` line per batch.
pub fn write_batch_stream<W: Write>(plan: &BatchPlan, mut out: W) -> std::io::Result<()> {
    for (batch_index, batch) in plan.batches.iter().enumerate() {
        let line = BatchLine {
            batch_index,
            ids: batch.ids.iter().map(|s| s.as_str().into()).collect(),
            modality: batch.modality,
        };
        serde_json::to_writer(&mut out, &line)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_batch_stream(path: &Path) -> Result<Vec<Batch>> {
    read_lines(path)?
        .into_iter()
        .enumerate()
        .map(|(expected, (line, text))| {
            let err = |message: String| Error::Record { path: path.to_path_buf(), line, message };
            let parsed: BatchLine = serde_json::from_str(&text).map_err(|e| err(e.to_string()))?;
            if parsed.batch_index != expected {
                return Err(err(format!("expected batch_index {expected}, got {}", parsed.batch_index)));
            }
            Ok(Batch {
                modality: parsed.modality,
                ids: parsed.ids.into_iter().map(|s| s.into_owned()).collect(),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Vec<Conversation> {
        vec![
            Conversation {
                id: "v1".into(),
                source: "vqa".into(),
                image: Some(ImageRef::new("coco/1.jpg", 640, 480)),
                turns: vec![Turn::human("What?"), Turn::assistant("Cat")],
            },
            Conversation {
                id: "t1".into(),
                source: "chat".into(),
                image: None,
                turns: vec![Turn::human("Hi \"there\""), Turn::assistant("Hello\nworld")],
            },
        ]
    }

    #[test]
    fn empty_file_reads_empty() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("e.jsonl");
        fs::write(&p, "").unwrap();
        assert!(read_records(&p).unwrap().is_empty());
    }

    #[test]
    fn round_trip_and_digest() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.jsonl");
        let h1 = write_records(&sample(), &p).unwrap();
        assert_eq!(read_records(&p).unwrap(), sample());
        let h2 = write_records(&sample(), &p).unwrap();
        assert_eq!(h1, h2);
        let mut changed = sample();
        changed[1].turns[1].text.push('!');
        assert_ne!(hash_records(&changed), h1);
        assert_eq!(h1.to_string().len(), 64);
    }

    #[test]
    fn canonical_field_order() {
        let line = r#"{"turns":[{"text":"q","role":"human"},{"text":"a","role":"assistant"}],"source":"s","modality":"text","id":"x"}"#;
        let conv = parse_conversation(line).unwrap();
        let bytes = encode_records(&[conv]);
        assert_eq!(
            String::from_utf8(bytes).unwrap(),
            "{\"id\":\"x\",\"modality\":\"text\",\"source\":\"s\",\"turns\":[{\"role\":\"human\",\"text\":\"q\"},{\"role\":\"assistant\",\"text\":\"a\"}]}\n"
        );
    }

    #[test]
    fn accepts_conventional_role_names() {
        let line = r#"{"id":"x","source":"s","modality":"text","conversations":[{"from":"human","value":"q"},{"from":"gpt","value":"a"}]}"#;
        let conv = parse_conversation(line).unwrap();
        assert_eq!(conv.turns[1], Turn::assistant("a"));
    }

    #[test]
    fn validation_errors_carry_line_and_field() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.jsonl");
        let good = String::from_utf8(encode_records(&sample()[..1])).unwrap();
        let bad = r#"{"id":"x","source":"s","modality":"text","turns":[{"role":"assistant","text":"a"},{"role":"human","text":"q"}]}"#;
        fs::write(&p, format!("{good}{bad}\n")).unwrap();
        match read_records(&p).unwrap_err() {
            Error::Record { line, message, .. } => {
                assert_eq!(line, 2);
                assert!(message.contains("turns"), "{message}");
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn malformed_json_reports_line() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.jsonl");
        fs::write(&p, "\n{not json}\n").unwrap();
        assert!(matches!(read_records(&p).unwrap_err(), Error::Record { line: 2, .. }));
    }

    #[test]
    fn modality_must_match_image() {
        let line = r#"{"id":"x","source":"s","modality":"visual","turns":[{"role":"human","text":"q"},{"role":"assistant","text":"a"}]}"#;
        assert!(parse_conversation(line).unwrap_err().contains("modality"));
    }
}
