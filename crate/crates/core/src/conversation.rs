//! Training-sample data model shared by the mixture compiler, batch planner
//! and record streams.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::ImageDim;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Role {
    #[serde(rename = "human", alias = "user")]
    Human,
    #[serde(rename = "assistant", alias = "gpt")]
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Turn {
    #[serde(alias = "from")]
    pub role: Role,
    #[serde(alias = "value")]
    pub text: String,
}

impl Turn {
    pub fn human(text: impl Into<String>) -> Self {
        Self { role: Role::Human, text: text.into() }
    }

    pub fn assistant(text: impl Into<String>) -> Self {
        Self { role: Role::Assistant, text: text.into() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modality {
    Visual,
    Text,
}

impl std::fmt::Display for Modality {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Modality::Visual => "visual",
            Modality::Text => "text",
        })
    }
}

/// Reference to an image stored elsewhere, with its pixel size.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImageRef {
    pub height: u32,
    #[serde(rename = "ref")]
    pub reference: String,
    pub width: u32,
}

impl ImageRef {
    pub fn new(reference: impl Into<String>, width: u32, height: u32) -> Self {
        Self { height, reference: reference.into(), width }
    }

    pub fn dim(&self) -> Result<ImageDim> {
        ImageDim::new(self.width, self.height)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Conversation {
    pub id: String,
    pub source: String,
    pub image: Option<ImageRef>,
    pub turns: Vec<Turn>,
}

impl Conversation {
    pub fn modality(&self) -> Modality {
        if self.image.is_some() {
            Modality::Visual
        } else {
            Modality::Text
        }
    }

    /// Number of (human, assistant) rounds.
    pub fn rounds(&self) -> usize {
        self.turns.len() / 2
    }

    /// Checks the structural invariants of a training sample. The error
    /// names the offending field.
    pub fn validate(&self) -> Result<()> {
        if self.id.trim().is_empty() {
            return Err(Error::validation("id", "must be non-empty"));
        }
        if self.source.trim().is_empty() {
            return Err(Error::validation("source", "must be non-empty"));
        }
        if let Some(img) = &self.image {
            if img.width == 0 || img.height == 0 {
                return Err(Error::validation("image", "width and height must be positive"));
            }
            if img.reference.is_empty() {
                return Err(Error::validation("image", "ref must be non-empty"));
            }
        }
        if self.turns.len() < 2 || !self.turns.len().is_multiple_of(2) {
            return Err(Error::validation(
                "turns",
                format!("expected a positive even number of turns, got {}", self.turns.len()),
            ));
        }
        for (i, turn) in self.turns.iter().enumerate() {
            let expected = if i % 2 == 0 { Role::Human } else { Role::Assistant };
            if turn.role != expected {
                return Err(Error::validation(
                    "turns",
                    format!("turn {i} should be {expected:?}, roles must alternate starting with human"),
                ));
            }
            if turn.text.trim().is_empty() {
                return Err(Error::validation("turns", format!("turn {i} has empty text")));
            }
        }
        Ok(())
    }
}

/// Tokenizer contract used for length limits.
pub trait TokenCounter: Sync {
    fn count(&self, text: &str) -> usize;

    fn count_turns(&self, turns: &[Turn]) -> usize {
        turns.iter().map(|t| self.count(&t.text)).sum()
    }
}

/// Counts whitespace-separated words.
#[derive(Debug, Clone, Copy, Default)]
pub struct WhitespaceCounter;

impl TokenCounter for WhitespaceCounter {
    fn count(&self, text: &str) -> usize {
        text.split_whitespace().count()
    }
}
