//! Versioned JSON reports. Reports carry the resolved config (including the
//! master seed) and no timestamps, so re-running the embedded config
//! reproduces them byte for byte.

use std::fmt;
use std::fs;
use std::io::Write;

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::{json, Value};

use crate::IoArgs;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Verdict {
    Pass,
    Fail,
    /// The checked bound is at most 0 and says nothing.
    Inconclusive,
    /// The bound holds but is vacuous.
    Vacuous,
    /// No assertion was requested.
    Measured,
    Computable,
    NotComputable,
    Conditional,
}

impl Verdict {
    pub fn is_failure(self) -> bool {
        self == Verdict::Fail
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let v = serde_json::to_value(self).expect("verdicts serialize");
        f.write_str(v.as_str().expect("unit variant"))
    }
}

/// A finished command: the report plus optional side files.
pub struct Output {
    pub command: &'static str,
    pub config: Value,
    pub result: Value,
    pub verdict: Verdict,
    pub csv: Option<String>,
    pub transcript: Option<String>,
}

impl Output {
    /// `config` must serialize to an object; `command` and `seed` are added.
    pub fn new<C: Serialize, R: Serialize>(
        command: &'static str,
        seed: u64,
        config: &C,
        result: &R,
        verdict: Verdict,
    ) -> Result<Self> {
        let mut cfg = serde_json::to_value(config)?;
        let obj = cfg.as_object_mut().expect("configs are objects");
        obj.insert("command".into(), json!(command));
        obj.insert("seed".into(), json!(seed));
        Ok(Output {
            command,
            config: cfg,
            result: serde_json::to_value(result)?,
            verdict,
            csv: None,
            transcript: None,
        })
    }

    pub fn with_csv(mut self, csv: String) -> Self {
        self.csv = Some(csv);
        self
    }

    pub fn with_transcript(mut self, jsonl: String) -> Self {
        self.transcript = Some(jsonl);
        self
    }

    pub fn render(&self) -> String {
        let report = json!({
            "schema_version": SCHEMA_VERSION,
            "command": self.command,
            "config": self.config,
            "verdict": self.verdict,
            "result": self.result,
        });
        let mut s = serde_json::to_string_pretty(&report).expect("reports serialize");
        s.push('\n');
        s
    }

    pub fn emit(self, io: &IoArgs) -> Result<Verdict> {
        let text = self.render();
        match &io.out {
            Some(path) => fs::write(path, text)
                .with_context(|| format!("cannot write report {}", path.display()))?,
            None => std::io::stdout().write_all(text.as_bytes())?,
        }
        if let Some(path) = &io.csv {
            let csv = self
                .csv
                .as_deref()
                .with_context(|| format!("{} has no CSV export", self.command))?;
            fs::write(path, csv).with_context(|| format!("cannot write {}", path.display()))?;
        }
        if let Some(path) = &io.transcript {
            let t = self
                .transcript
                .as_deref()
                .with_context(|| format!("{} does not record transcripts", self.command))?;
            fs::write(path, t).with_context(|| format!("cannot write {}", path.display()))?;
        }
        Ok(self.verdict)
    }
}
