//! Plain-text column dumps with a single header line.
//!
//! ```text
//! # field=u shape=512,64 lengths=10,1 grid=3fa9c1d2e0b4a7f1 seed=7 columns=x,y,u
//! 0.00000000000000000e0 0.00000000000000000e0 1.23e-1
//! ```

use std::fmt::Write as _;
use std::path::Path;

#[derive(Debug, Clone, PartialEq)]
pub struct FieldDump {
    pub name: String,
    pub shape: Vec<usize>,
    pub lengths: Vec<f64>,
    pub grid_hash: String,
    pub seed: Option<u64>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

#[derive(Debug, thiserror::Error)]
pub enum DumpError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}: {msg}")]
    Format { path: String, msg: String },
}

fn join<T: ToString>(v: &[T]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

impl FieldDump {
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }

    pub fn to_text(&self) -> String {
        let seed = self.seed.map(|s| format!(" seed={s}")).unwrap_or_default();
        let mut s = format!(
            "# field={} shape={} lengths={} grid={}{seed} columns={}\n",
            self.name,
            join(&self.shape),
            join(&self.lengths),
            self.grid_hash,
            self.columns.join(",")
        );
        for r in &self.rows {
            let line: Vec<String> = r.iter().map(|v| format!("{v:.17e}")).collect();
            let _ = writeln!(s, "{}", line.join(" "));
        }
        s
    }

    pub fn write(&self, path: &Path) -> Result<(), DumpError> {
        std::fs::write(path, self.to_text()).map_err(|source| DumpError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn read(path: &Path) -> Result<Self, DumpError> {
        let p = path.display().to_string();
        let text = std::fs::read_to_string(path).map_err(|source| DumpError::Io {
            path: p.clone(),
            source,
        })?;
        Self::parse(&text).map_err(|msg| DumpError::Format { path: p, msg })
    }

    pub fn parse(text: &str) -> Result<Self, String> {
        let mut lines = text.lines();
        let header = lines
            .next()
            .and_then(|l| l.strip_prefix('#'))
            .ok_or("missing header line")?;
        let mut d = FieldDump {
            name: String::new(),
            shape: vec![],
            lengths: vec![],
            grid_hash: String::new(),
            seed: None,
            columns: vec![],
            rows: vec![],
        };
        for tok in header.split_whitespace() {
            let (k, v) = tok.split_once('=').ok_or(format!("bad header token '{tok}'"))?;
            match k {
                "field" => d.name = v.to_string(),
                "shape" => {
                    d.shape = v
                        .split(',')
                        .map(|x| x.parse().map_err(|_| format!("bad shape '{v}'")))
                        .collect::<Result<_, _>>()?
                }
                "lengths" => {
                    d.lengths = v
                        .split(',')
                        .map(|x| x.parse().map_err(|_| format!("bad lengths '{v}'")))
                        .collect::<Result<_, _>>()?
                }
                "grid" => d.grid_hash = v.to_string(),
                "seed" => d.seed = Some(v.parse().map_err(|_| format!("bad seed '{v}'"))?),
                "columns" => d.columns = v.split(',').map(str::to_string).collect(),
                _ => {}
            }
        }
        if d.columns.is_empty() {
            return Err("header lists no columns".into());
        }
        for (i, line) in lines.enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let row: Vec<f64> = line
                .split_whitespace()
                .map(|x| x.parse().map_err(|_| format!("line {}: bad number '{x}'", i + 2)))
                .collect::<Result<_, _>>()?;
            if row.len() != d.columns.len() {
                return Err(format!("line {}: expected {} columns", i + 2, d.columns.len()));
            }
            d.rows.push(row);
        }
        Ok(d)
    }
}
