use std::io::Write;

use serde_json::Value;

/// Human-readable lines by default, one JSON object per line with `--json`.
#[derive(Clone, Copy)]
pub struct Output {
    pub json: bool,
}

impl Output {
    pub fn emit(&self, human: impl AsRef<str>, value: Value) {
        let mut out = std::io::stdout().lock();
        if self.json {
            let _ = writeln!(out, "{value}");
        } else {
            let _ = writeln!(out, "{}", human.as_ref());
        }
        let _ = out.flush();
    }

    /// Lines that only make sense for a human reader.
    pub fn note(&self, human: impl AsRef<str>) {
        if !self.json {
            println!("{}", human.as_ref());
        }
    }
}
