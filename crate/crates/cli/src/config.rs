//! Flat `key=value` configuration with command-line overrides.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use num_complex::Complex64;

/// Keys accepted in a config file, identical to the long flag names.
pub const KEYS: &[&str] = &[
    "a",
    "gamma",
    "delta",
    "roots",
    "m",
    "m-range",
    "eps-hit",
    "escape-radius",
    "out",
    "svg",
    "scatter",
    "tol",
];

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Settings {
    values: BTreeMap<String, String>,
}

impl Settings {
    pub fn parse_file(text: &str) -> Result<Self> {
        let mut s = Settings::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("line {}: expected key=value, got {raw:?}", n + 1))?;
            s.set(k.trim(), v.trim()).with_context(|| format!("line {}", n + 1))?;
        }
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse_file(&text)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        if !KEYS.contains(&key) {
            bail!("unknown key {key:?}");
        }
        self.values.insert(key.to_string(), value.to_string());
        Ok(())
    }

    /// Values from `other` win.
    pub fn overlay(&mut self, other: &Settings) {
        for (k, v) in &other.values {
            self.values.insert(k.clone(), v.clone());
        }
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(|s| s.as_str())
    }

    pub fn complex(&self, key: &str) -> Result<Option<Complex64>> {
        self.raw(key)
            .map(|v| parse_complex(v).with_context(|| format!("--{key}")))
            .transpose()
    }

    pub fn real(&self, key: &str) -> Result<Option<f64>> {
        self.raw(key)
            .map(|v| {
                let x: f64 = v
                    .trim()
                    .parse()
                    .with_context(|| format!("--{key}: not a number: {v:?}"))?;
                if !x.is_finite() {
                    bail!("--{key} must be finite");
                }
                Ok(x)
            })
            .transpose()
    }

    pub fn positive(&self, key: &str) -> Result<Option<f64>> {
        match self.real(key)? {
            Some(x) if x <= 0.0 => bail!("--{key} must be positive, got {x}"),
            v => Ok(v),
        }
    }

    pub fn path(&self, key: &str) -> Option<PathBuf> {
        self.raw(key).map(PathBuf::from)
    }

    pub fn roots(&self) -> Result<Option<Vec<Complex64>>> {
        self.raw("roots")
            .map(|v| {
                v.split([',', ';'])
                    .map(|r| parse_complex(r).context("--roots"))
                    .collect()
            })
            .transpose()
    }

    /// `--m 20`, or `--m-range` as `a:b` (inclusive), `a:b:step`, or a list
    /// `a,b,c`.
    pub fn m_values(&self) -> Result<Vec<usize>> {
        let parse = |s: &str| -> Result<usize> {
            let m: usize = s
                .trim()
                .parse()
                .with_context(|| format!("not a positive integer: {s:?}"))?;
            if m == 0 {
                bail!("m must be at least 1");
            }
            Ok(m)
        };
        let ms = match (self.raw("m"), self.raw("m-range")) {
            (Some(_), Some(_)) => bail!("give either --m or --m-range"),
            (Some(m), None) => vec![parse(m)?],
            (None, Some(r)) if r.contains(':') => {
                let parts: Vec<&str> = r.split(':').collect();
                let (lo, hi) = (parse(parts[0])?, parse(parts[1])?);
                let step = match parts.get(2) {
                    Some(s) => parse(s)?,
                    None => 1,
                };
                if parts.len() > 3 || hi < lo {
                    bail!("bad --m-range {r:?}");
                }
                (lo..=hi).step_by(step).collect()
            }
            (None, Some(r)) => r.split(',').map(parse).collect::<Result<_>>()?,
            (None, None) => bail!("--m or --m-range is required"),
        };
        if ms.windows(2).any(|w| w[1] <= w[0]) {
            bail!("m values must be strictly increasing");
        }
        Ok(ms)
    }
}

/// Parses `x`, `x+yi`, `x - y i`, `yi`, `i`, `-i`, with optional spaces and
/// `j` accepted for `i`.
pub fn parse_complex(text: &str) -> Result<Complex64> {
    let s: String = text.chars().filter(|c| !c.is_whitespace()).collect();
    if s.is_empty() {
        bail!("empty complex number");
    }
    let bad = || anyhow!("not a complex number: {text:?}");
    let imag_unit = s.ends_with('i') || s.ends_with('j');
    if !imag_unit {
        let re: f64 = s.parse().map_err(|_| bad())?;
        return finite(Complex64::new(re, 0.0)).ok_or_else(bad);
    }
    let body = &s[..s.len() - 1];
    // split at the last sign that is not part of an exponent
    let bytes = body.as_bytes();
    let mut split = 0;
    for k in (1..bytes.len()).rev() {
        if (bytes[k] == b'+' || bytes[k] == b'-') && !matches!(bytes[k - 1], b'e' | b'E') {
            split = k;
            break;
        }
    }
    let (re_part, im_part) = body.split_at(split);
    let re = if re_part.is_empty() {
        0.0
    } else {
        re_part.parse().map_err(|_| bad())?
    };
    let im = match im_part {
        "" | "+" => 1.0,
        "-" => -1.0,
        v => v.parse().map_err(|_| bad())?,
    };
    finite(Complex64::new(re, im)).ok_or_else(bad)
}

fn finite(z: Complex64) -> Option<Complex64> {
    z.is_finite().then_some(z)
}
