//! Plain-text checkpoint format.
//!
//! ```text
//! aacc-checkpoint v1
//! variant aacc
//! env cartpole
//! net actor 4,64,64,2
//! net critic 7,64,64,1
//! vec log_std 1
//! params 9090
//! 0.0123
//! ...
//! ```
//!
//! Values are written with the shortest representation that parses back to the
//! same bits, so a save/load cycle is exact.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

pub const FORMAT_VERSION: &str = "v1";
const MAGIC: &str = "aacc-checkpoint";

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Entry {
    Net { name: String, widths: Vec<usize> },
    Vector { name: String, len: usize },
}

impl Entry {
    pub fn name(&self) -> &str {
        match self {
            Entry::Net { name, .. } | Entry::Vector { name, .. } => name,
        }
    }

    pub fn param_count(&self) -> usize {
        match self {
            Entry::Net { widths, .. } => widths.windows(2).map(|w| w[0] * w[1] + w[1]).sum(),
            Entry::Vector { len, .. } => *len,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub variant: String,
    pub env: String,
    pub entries: Vec<Entry>,
    pub params: Vec<f64>,
}

impl Checkpoint {
    /// Parameter slice belonging to the named entry.
    pub fn slice(&self, name: &str) -> Option<(&Entry, &[f64])> {
        let mut off = 0;
        for e in &self.entries {
            let n = e.param_count();
            if e.name() == name {
                return Some((e, &self.params[off..off + n]));
            }
            off += n;
        }
        None
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{MAGIC} {FORMAT_VERSION}");
        let _ = writeln!(s, "variant {}", self.variant);
        let _ = writeln!(s, "env {}", self.env);
        for e in &self.entries {
            match e {
                Entry::Net { name, widths } => {
                    let w: Vec<String> = widths.iter().map(usize::to_string).collect();
                    let _ = writeln!(s, "net {name} {}", w.join(","));
                }
                Entry::Vector { name, len } => {
                    let _ = writeln!(s, "vec {name} {len}");
                }
            }
        }
        let _ = writeln!(s, "params {}", self.params.len());
        for v in &self.params {
            let _ = writeln!(s, "{v:?}");
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let bad = |m: String| Error::parse("checkpoint", m);
        let mut lines = text.lines().enumerate();
        let mut next = |expect: &str| {
            lines
                .next()
                .map(|(i, l)| (i + 1, l))
                .ok_or_else(|| bad(format!("unexpected end of file, expected {expect}")))
        };

        let (_, header) = next("header")?;
        if header != format!("{MAGIC} {FORMAT_VERSION}") {
            return Err(bad(format!("unsupported header `{header}`")));
        }
        let field = |line: (usize, &str), key: &str| -> Result<String> {
            line.1
                .strip_prefix(key)
                .and_then(|r| r.strip_prefix(' '))
                .map(str::to_string)
                .ok_or_else(|| bad(format!("line {}: expected `{key} ...`", line.0)))
        };
        let variant = field(next("variant")?, "variant")?;
        let env = field(next("env")?, "env")?;

        let mut entries = Vec::new();
        let count = loop {
            let (no, line) = next("entry or params")?;
            let parts: Vec<&str> = line.split(' ').collect();
            match parts.as_slice() {
                ["net", name, widths] => {
                    let widths = widths
                        .split(',')
                        .map(|w| w.parse::<usize>())
                        .collect::<std::result::Result<Vec<_>, _>>()
                        .map_err(|e| bad(format!("line {no}: {e}")))?;
                    if widths.len() < 2 {
                        return Err(bad(format!("line {no}: net needs at least two widths")));
                    }
                    entries.push(Entry::Net {
                        name: name.to_string(),
                        widths,
                    });
                }
                ["vec", name, len] => entries.push(Entry::Vector {
                    name: name.to_string(),
                    len: len.parse().map_err(|e| bad(format!("line {no}: {e}")))?,
                }),
                ["params", n] => break n.parse::<usize>().map_err(|e| bad(format!("line {no}: {e}")))?,
                _ => return Err(bad(format!("line {no}: unrecognised `{line}`"))),
            }
        };
        let expected: usize = entries.iter().map(Entry::param_count).sum();
        if expected != count {
            return Err(bad(format!(
                "header declares {count} params but entries need {expected}"
            )));
        }
        let mut params = Vec::with_capacity(count);
        for _ in 0..count {
            let (no, line) = next("parameter value")?;
            params.push(
                line.trim()
                    .parse::<f64>()
                    .map_err(|e| bad(format!("line {no}: {e}")))?,
            );
        }
        if let Some((no, extra)) = lines.find(|(_, l)| !l.trim().is_empty()) {
            return Err(bad(format!("line {}: trailing content `{extra}`", no + 1)));
        }
        Ok(Checkpoint {
            variant,
            env,
            entries,
            params,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }
}
