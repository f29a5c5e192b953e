// SPDX-License-Identifier: MIT OR Apache-2.0

//! Byte-level vocabulary with reserved marker ids.
//!
//! Id 0 is end-of-sequence. Ids 1..=127 are the ASCII bytes. Ids 128 and up
//! are markers that render as whole strings. Bytes outside ASCII encode to
//! id 26, which renders as U+FFFD like every other control or unassigned id.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Result, VassError};

pub const EOS: u32 = 0;
pub const REPLACEMENT_ID: u32 = 26;
pub const FIRST_MARKER_ID: u32 = 128;

/// Refusal markers, in id order from [`FIRST_MARKER_ID`].
pub const REFUSAL_MARKERS: [&str; 12] = [
    "I can't",
    "I cannot",
    "I won't",
    "I'm sorry",
    "Sorry",
    "I am unable",
    "As an AI",
    "Unfortunately",
    "I can't help",
    "I cannot assist",
    "I'm sorry, but",
    "Sorry, I",
];

/// Compliance markers, following the refusal markers.
pub const COMPLIANCE_MARKERS: [&str; 9] = [
    "Sure",
    "Here",
    "Yes",
    "Certainly",
    "Of course",
    "Here is",
    "Sure, here",
    "Yes, here",
    "Certainly, here",
];

/// First id of the sentiment ladder `neg45 … plain … pos45`.
pub const LADDER_BASE_ID: u32 = 160;
pub const LADDER_HALF_WIDTH: i32 = 45;

/// Ladder word for step `n` in `-45..=45`.
pub fn ladder_word(n: i32) -> String {
    match n {
        0 => "plain".to_string(),
        n if n > 0 => format!("pos{n}"),
        n => format!("neg{}", -n),
    }
}

pub fn ladder_id(n: i32) -> u32 {
    (LADDER_BASE_ID as i32 + LADDER_HALF_WIDTH + n) as u32
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vocab {
    size: u32,
    markers: BTreeMap<u32, String>,
}

impl Vocab {
    /// Byte vocabulary with no markers.
    pub fn bytes(size: u32) -> Result<Self> {
        if size < 128 {
            return Err(VassError::InvalidArgument(format!(
                "byte vocabulary needs at least 128 ids, got {size}"
            )));
        }
        Ok(Self {
            size,
            markers: BTreeMap::new(),
        })
    }

    /// The 21 role markers at 128.. and the 91 ladder words at 160..
    pub fn standard(size: u32) -> Result<Self> {
        let mut v = Self::bytes(size)?;
        for (i, m) in REFUSAL_MARKERS.iter().chain(&COMPLIANCE_MARKERS).enumerate() {
            v.insert_marker(FIRST_MARKER_ID + i as u32, m)?;
        }
        for n in -LADDER_HALF_WIDTH..=LADDER_HALF_WIDTH {
            v.insert_marker(ladder_id(n), &ladder_word(n))?;
        }
        Ok(v)
    }

    pub fn insert_marker(&mut self, id: u32, text: &str) -> Result<()> {
        if id < FIRST_MARKER_ID || id >= self.size {
            return Err(VassError::InvalidArgument(format!(
                "marker id {id} outside {FIRST_MARKER_ID}..{}",
                self.size
            )));
        }
        if self.markers.values().any(|m| m == text) {
            return Err(VassError::DuplicateId(text.to_string()));
        }
        self.markers.insert(id, text.to_string());
        Ok(())
    }

    pub fn size(&self) -> u32 {
        self.size
    }

    pub fn markers(&self) -> &BTreeMap<u32, String> {
        &self.markers
    }

    /// Marker string to id, the tokenizer mapping table.
    pub fn marker_map(&self) -> BTreeMap<String, u32> {
        self.markers.iter().map(|(id, s)| (s.clone(), *id)).collect()
    }

    pub fn marker_id(&self, text: &str) -> Option<u32> {
        self.markers
            .iter()
            .find_map(|(id, s)| (s == text).then_some(*id))
    }

    /// Byte-wise encoding; markers are never produced from text.
    pub fn encode(&self, text: &str) -> Vec<u32> {
        text.bytes()
            .map(|b| match b {
                1..=127 => u32::from(b),
                _ => REPLACEMENT_ID,
            })
            .collect()
    }

    pub fn render_token(&self, id: u32) -> String {
        match id {
            EOS => String::new(),
            b @ 32..=126 => char::from(b as u8).to_string(),
            9 | 10 => char::from(id as u8).to_string(),
            _ => self
                .markers
                .get(&id)
                .cloned()
                .unwrap_or_else(|| char::REPLACEMENT_CHARACTER.to_string()),
        }
    }

    pub fn render(&self, tokens: &[u32]) -> String {
        tokens.iter().map(|&t| self.render_token(t)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TokenRole {
    RefusalMarker,
    ComplianceMarker,
    Neutral,
}

impl TokenRole {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::RefusalMarker => "refusal_marker",
            Self::ComplianceMarker => "compliance_marker",
            Self::Neutral => "neutral",
        }
    }
}

/// Disjoint refusal and compliance token sets.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Roles {
    pub refusal: Vec<u32>,
    pub compliance: Vec<u32>,
}

impl Roles {
    pub fn new(refusal: Vec<u32>, compliance: Vec<u32>) -> Result<Self> {
        if refusal.is_empty() || compliance.is_empty() {
            return Err(VassError::InvalidArgument("empty role group".into()));
        }
        if let Some(t) = refusal.iter().find(|t| compliance.contains(t)) {
            return Err(VassError::InvalidArgument(format!(
                "token {t} is both a refusal and a compliance marker"
            )));
        }
        Ok(Self { refusal, compliance })
    }

    /// Resolves marker strings through a `marker_string → token_id` table.
    pub fn from_strings(
        refusal: &[&str],
        compliance: &[&str],
        map: &BTreeMap<String, u32>,
    ) -> Result<Self> {
        let look = |s: &&str| {
            map.get(*s)
                .copied()
                .ok_or_else(|| VassError::NotFound(format!("marker `{s}` in tokenizer map")))
        };
        Self::new(
            refusal.iter().map(look).collect::<Result<_>>()?,
            compliance.iter().map(look).collect::<Result<_>>()?,
        )
    }

    /// The 21 default markers of [`Vocab::standard`].
    pub fn standard() -> Self {
        let r = FIRST_MARKER_ID..FIRST_MARKER_ID + REFUSAL_MARKERS.len() as u32;
        let c = r.end..r.end + COMPLIANCE_MARKERS.len() as u32;
        Self {
            refusal: r.collect(),
            compliance: c.collect(),
        }
    }

    pub fn role(&self, token: u32) -> TokenRole {
        if self.refusal.contains(&token) {
            TokenRole::RefusalMarker
        } else if self.compliance.contains(&token) {
            TokenRole::ComplianceMarker
        } else {
            TokenRole::Neutral
        }
    }

    /// All role tokens, refusal first.
    pub fn all(&self) -> Vec<u32> {
        self.refusal.iter().chain(&self.compliance).copied().collect()
    }
}
