// SPDX-License-Identifier: MIT OR Apache-2.0

//! Text scorers: the built-in lexicon scorer and external processes.

use std::io::{BufRead, BufReader, Write};
use std::process::{Command, Stdio};

use serde::{Deserialize, Serialize};

use super::affect::{AffectScore, LexiconScorer};
use crate::error::{Result, VassError};

/// Maps texts to affect scores, one per input, in order.
pub trait Scorer: Sync {
    fn name(&self) -> &str;
    fn score_batch(&self, texts: &[String]) -> Result<Vec<AffectScore>>;
}

impl Scorer for LexiconScorer {
    fn name(&self) -> &str {
        "lexicon"
    }

    fn score_batch(&self, texts: &[String]) -> Result<Vec<AffectScore>> {
        Ok(texts.iter().map(|t| self.score(t)).collect())
    }
}

#[derive(Serialize)]
struct PipeRequest<'a> {
    text: &'a str,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PipeResponse {
    sentiment: f64,
    valence: f64,
    arousal: f64,
}

/// Runs `program args…` once per batch, writing `{"text": …}` lines to its
/// stdin and reading one `{"sentiment","valence","arousal"}` line per input
/// from its stdout.
#[derive(Debug, Clone)]
pub struct PipeScorer {
    pub program: String,
    pub args: Vec<String>,
}

impl Scorer for PipeScorer {
    fn name(&self) -> &str {
        &self.program
    }

    fn score_batch(&self, texts: &[String]) -> Result<Vec<AffectScore>> {
        let mut child = Command::new(&self.program)
            .args(&self.args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| VassError::Scorer(format!("cannot start `{}`: {e}", self.program)))?;
        let mut stdin = child.stdin.take().expect("piped stdin");
        let payload: Vec<u8> = texts
            .iter()
            .flat_map(|t| {
                let mut line = serde_json::to_vec(&PipeRequest { text: t }).expect("string serializes");
                line.push(b'\n');
                line
            })
            .collect();
        let writer = std::thread::spawn(move || stdin.write_all(&payload));
        let stdout = child.stdout.take().expect("piped stdout");
        let mut out = Vec::with_capacity(texts.len());
        for (i, line) in BufReader::new(stdout).lines().enumerate() {
            let line = line?;
            let r: PipeResponse = serde_json::from_str(&line)
                .map_err(|e| VassError::Scorer(format!("bad reply on line {}: {e}", i + 1)))?;
            let bounded = [r.sentiment, r.valence, r.arousal]
                .iter()
                .all(|v| v.is_finite() && (-1.0..=1.0).contains(v));
            if !bounded {
                return Err(VassError::Scorer(format!("reply on line {} outside [-1, 1]", i + 1)));
            }
            out.push(AffectScore {
                sentiment: r.sentiment,
                valence: r.valence,
                arousal: r.arousal,
            });
        }
        writer
            .join()
            .map_err(|_| VassError::Scorer("stdin writer panicked".into()))?
            .map_err(|e| VassError::Scorer(format!("writing to scorer: {e}")))?;
        let status = child.wait()?;
        if !status.success() {
            return Err(VassError::Scorer(format!("`{}` exited with {status}", self.program)));
        }
        if out.len() != texts.len() {
            return Err(VassError::Scorer(format!(
                "expected {} replies, got {}",
                texts.len(),
                out.len()
            )));
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sh(script: &str) -> PipeScorer {
        PipeScorer {
            program: "sh".into(),
            args: vec!["-c".into(), script.into()],
        }
    }

    #[test]
    fn pipe_round_trip() {
        let s = sh(r#"while read -r l; do echo '{"sentiment":0.5,"valence":0.25,"arousal":-0.5}'; done"#);
        let out = s.score_batch(&["a".into(), "b".into()]).unwrap();
        assert_eq!(out.len(), 2);
        assert_eq!(out[1].arousal, -0.5);
    }

    #[test]
    fn short_or_bad_replies_fail() {
        let short = sh("read -r l; echo '{\"sentiment\":0,\"valence\":0,\"arousal\":0}'");
        assert!(matches!(
            short.score_batch(&["a".into(), "b".into()]),
            Err(VassError::Scorer(_))
        ));
        let bad = sh("cat >/dev/null; echo nope");
        assert!(bad.score_batch(&["a".into()]).is_err());
        let missing = PipeScorer {
            program: "/nonexistent/scorer".into(),
            args: vec![],
        };
        assert!(missing.score_batch(&["a".into()]).is_err());
    }
}
