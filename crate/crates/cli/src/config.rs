//! Flat key-value configuration and the plain-text matrix/table file
//! formats.
//!
//! Config lines are `section.key = value`; `#` starts a comment.
//! Unknown sections or keys are rejected. Complex matrix files hold one
//! row per line with entries written as `re+imi` pairs (e.g. `0.5-0.25i`).

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path;

use num_complex::Complex64;

use seqbell_core::lhv::BehaviorTable;
use seqbell_core::qcore::CMatrix;

/// Errors carry the exit-code class: parse failures exit 2, domain
/// failures 3, a degenerate protocol 4.
#[derive(Debug)]
pub enum CliError {
    Parse(String),
    Domain(String),
    Degenerate(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Parse(_) => 2,
            CliError::Domain(_) => 3,
            CliError::Degenerate(_) => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Parse(msg) => write!(f, "parse error: {msg}"),
            CliError::Domain(msg) => write!(f, "domain error: {msg}"),
            CliError::Degenerate(msg) => write!(f, "degenerate protocol: {msg}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum StateKind {
    Example,
    Optics,
    Matrix,
}

#[derive(Debug, Clone, PartialEq)]
pub enum FilterKind {
    Paper,
    Identity,
    Matrix,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SettingsKind {
    Optimal,
    Explicit,
}

/// Parsed scenario configuration with defaults applied.
#[derive(Debug, Clone)]
pub struct ScenarioConfig {
    pub state_kind: StateKind,
    pub alpha_sq: f64,
    pub p1: f64,
    pub matrix_path: Option<String>,
    pub filter: FilterKind,
    pub filter_matrix_path: Option<String>,
    pub settings: SettingsKind,
    pub bloch_a: Option<[f64; 3]>,
    pub bloch_a_prime: Option<[f64; 3]>,
    pub bloch_b: Option<[f64; 3]>,
    pub bloch_b_prime: Option<[f64; 3]>,
    pub sweep_alpha_sq_min: f64,
    pub sweep_alpha_sq_max: f64,
    pub sweep_p1_min: f64,
    pub sweep_p1_max: f64,
    pub sweep_resolution: usize,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            state_kind: StateKind::Example,
            alpha_sq: 0.8,
            p1: 0.7,
            matrix_path: None,
            filter: FilterKind::Paper,
            filter_matrix_path: None,
            settings: SettingsKind::Optimal,
            bloch_a: None,
            bloch_a_prime: None,
            bloch_b: None,
            bloch_b_prime: None,
            sweep_alpha_sq_min: 0.05,
            sweep_alpha_sq_max: 0.95,
            sweep_p1_min: 0.05,
            sweep_p1_max: 0.95,
            sweep_resolution: 5,
        }
    }
}

fn parse_key_values(text: &str) -> Result<BTreeMap<String, String>, CliError> {
    let mut map = BTreeMap::new();
    for (line_no, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(CliError::Parse(format!(
                "line {}: expected `key = value`, got {raw:?}",
                line_no + 1
            )));
        };
        let key = key.trim().to_string();
        let value = value.trim().to_string();
        if key.is_empty() || value.is_empty() {
            return Err(CliError::Parse(format!("line {}: empty key or value", line_no + 1)));
        }
        if map.insert(key.clone(), value).is_some() {
            return Err(CliError::Parse(format!("duplicate key {key:?}")));
        }
    }
    Ok(map)
}

fn parse_f64(key: &str, value: &str) -> Result<f64, CliError> {
    value
        .parse::<f64>()
        .map_err(|_| CliError::Parse(format!("{key}: {value:?} is not a number")))
}

fn parse_usize(key: &str, value: &str) -> Result<usize, CliError> {
    value
        .parse::<usize>()
        .map_err(|_| CliError::Parse(format!("{key}: {value:?} is not a count")))
}

fn parse_vec3(key: &str, value: &str) -> Result<[f64; 3], CliError> {
    let parts: Vec<&str> = value.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        return Err(CliError::Parse(format!(
            "{key}: expected three comma-separated components, got {value:?}"
        )));
    }
    Ok([
        parse_f64(key, parts[0])?,
        parse_f64(key, parts[1])?,
        parse_f64(key, parts[2])?,
    ])
}

impl ScenarioConfig {
    pub fn from_str(text: &str) -> Result<Self, CliError> {
        let map = parse_key_values(text)?;
        let mut config = Self::default();
        for (key, value) in &map {
            match key.as_str() {
                "state.kind" => {
                    config.state_kind = match value.as_str() {
                        "example" => StateKind::Example,
                        "optics" => StateKind::Optics,
                        "matrix" => StateKind::Matrix,
                        other => {
                            return Err(CliError::Parse(format!(
                                "state.kind: unknown kind {other:?} (expected example|optics|matrix)"
                            )))
                        }
                    }
                }
                "state.alpha_sq" => config.alpha_sq = parse_f64(key, value)?,
                "state.p1" => config.p1 = parse_f64(key, value)?,
                "state.matrix_path" => config.matrix_path = Some(value.clone()),
                "protocol.filter" => {
                    config.filter = match value.as_str() {
                        "paper" => FilterKind::Paper,
                        "identity" => FilterKind::Identity,
                        "matrix" => FilterKind::Matrix,
                        other => {
                            return Err(CliError::Parse(format!(
                                "protocol.filter: unknown filter {other:?} (expected paper|identity|matrix)"
                            )))
                        }
                    }
                }
                "protocol.filter_matrix_path" => {
                    config.filter_matrix_path = Some(value.clone())
                }
                "protocol.settings" => {
                    config.settings = match value.as_str() {
                        "optimal" => SettingsKind::Optimal,
                        "explicit" => SettingsKind::Explicit,
                        other => {
                            return Err(CliError::Parse(format!(
                                "protocol.settings: unknown mode {other:?} (expected optimal|explicit)"
                            )))
                        }
                    }
                }
                "protocol.a" => config.bloch_a = Some(parse_vec3(key, value)?),
                "protocol.a_prime" => config.bloch_a_prime = Some(parse_vec3(key, value)?),
                "protocol.b" => config.bloch_b = Some(parse_vec3(key, value)?),
                "protocol.b_prime" => config.bloch_b_prime = Some(parse_vec3(key, value)?),
                "sweep.alpha_sq_min" => config.sweep_alpha_sq_min = parse_f64(key, value)?,
                "sweep.alpha_sq_max" => config.sweep_alpha_sq_max = parse_f64(key, value)?,
                "sweep.p1_min" => config.sweep_p1_min = parse_f64(key, value)?,
                "sweep.p1_max" => config.sweep_p1_max = parse_f64(key, value)?,
                "sweep.resolution" => config.sweep_resolution = parse_usize(key, value)?,
                other => {
                    return Err(CliError::Parse(format!("unknown key {other:?}")));
                }
            }
        }
        Ok(config)
    }

    pub fn from_path(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Parse(format!("cannot read {}: {e}", path.display())))?;
        Self::from_str(&text)
    }
}

/// Parses one `re+imi` token, e.g. `1.5-0.25i` or `0+1i`.
pub fn parse_complex(token: &str) -> Result<Complex64, CliError> {
    let inner = token
        .strip_suffix('i')
        .ok_or_else(|| CliError::Parse(format!("complex entry {token:?} must end in `i`")))?;
    // Split at the last '+'/'-' that is not a leading sign or part of an
    // exponent.
    let bytes = inner.as_bytes();
    let mut split = None;
    for k in (1..bytes.len()).rev() {
        let c = bytes[k] as char;
        if (c == '+' || c == '-') && !matches!(bytes[k - 1] as char, 'e' | 'E') {
            split = Some(k);
            break;
        }
    }
    let Some(split) = split else {
        return Err(CliError::Parse(format!(
            "complex entry {token:?} needs both a real and an imaginary part"
        )));
    };
    let re: f64 = inner[..split]
        .parse()
        .map_err(|_| CliError::Parse(format!("bad real part in {token:?}")))?;
    let im: f64 = inner[split..]
        .parse()
        .map_err(|_| CliError::Parse(format!("bad imaginary part in {token:?}")))?;
    Ok(Complex64::new(re, im))
}

/// Formats a complex number in the file format accepted by
/// [`parse_complex`].
#[cfg(test)]
pub fn format_complex(z: Complex64) -> String {
    format!("{:+.17e}{:+.17e}i", z.re, z.im)
}

/// Reads a complex matrix file: one row per line, `re+imi` entries.
pub fn read_matrix_file(path: &Path) -> Result<CMatrix, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Parse(format!("cannot read {}: {e}", path.display())))?;
    let mut rows: Vec<Vec<Complex64>> = Vec::new();
    for raw in text.lines() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let row: Result<Vec<Complex64>, CliError> =
            line.split_whitespace().map(parse_complex).collect();
        rows.push(row?);
    }
    if rows.is_empty() {
        return Err(CliError::Parse("matrix file has no rows".into()));
    }
    let cols = rows[0].len();
    if rows.iter().any(|r| r.len() != cols) {
        return Err(CliError::Parse("matrix file rows have unequal lengths".into()));
    }
    CMatrix::from_rows(&rows).map_err(|e| CliError::Parse(e.to_string()))
}

/// Reads a behavior-table file. The first data line holds the four
/// counts `settings_a settings_b outcomes_a outcomes_b` (a literal
/// column-name header naming them is allowed above it); then one line
/// per setting pair (x major, y minor) with the OA·OB probabilities
/// P(a,b|x,y) row-major in (a,b).
pub fn read_behavior_file(path: &Path) -> Result<BehaviorTable, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Parse(format!("cannot read {}: {e}", path.display())))?;
    let mut lines = text
        .lines()
        .map(|raw| raw.split('#').next().unwrap_or("").trim())
        .filter(|l| !l.is_empty());

    let mut header = lines
        .next()
        .ok_or_else(|| CliError::Parse("behavior file is empty".into()))?;
    if header.starts_with("settings_a") {
        header = lines
            .next()
            .ok_or_else(|| CliError::Parse("missing counts line after column header".into()))?;
    }
    let counts: Vec<usize> = header
        .split_whitespace()
        .map(|t| parse_usize("header", t))
        .collect::<Result<_, _>>()?;
    let [sa, sb, oa, ob] = counts.as_slice() else {
        return Err(CliError::Parse(format!(
            "header must hold 4 counts, got {}",
            counts.len()
        )));
    };
    let (sa, sb, oa, ob) = (*sa, *sb, *oa, *ob);
    if sa == 0 || sb == 0 || oa == 0 || ob == 0 {
        return Err(CliError::Parse("all counts must be positive".into()));
    }

    let mut p = Vec::with_capacity(sa * sb * oa * ob);
    for block in 0..sa * sb {
        let line = lines.next().ok_or_else(|| {
            CliError::Parse(format!("missing probability line for setting pair {block}"))
        })?;
        let values: Vec<f64> = line
            .split_whitespace()
            .map(|t| parse_f64("probability", t))
            .collect::<Result<_, _>>()?;
        if values.len() != oa * ob {
            return Err(CliError::Parse(format!(
                "setting pair {block}: expected {} probabilities, got {}",
                oa * ob,
                values.len()
            )));
        }
        p.extend(values);
    }
    if lines.next().is_some() {
        return Err(CliError::Parse("trailing data after the probability lines".into()));
    }

    let outcomes_a = (0..oa).map(|i| i.to_string()).collect();
    let outcomes_b = (0..ob).map(|i| i.to_string()).collect();
    BehaviorTable::new(sa, sb, outcomes_a, outcomes_b, p)
        .map_err(|e| CliError::Domain(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_defaults_and_overrides() {
        let config = ScenarioConfig::from_str("state.alpha_sq = 0.9\nstate.p1 = 0.6\n").unwrap();
        assert_eq!(config.alpha_sq, 0.9);
        assert_eq!(config.p1, 0.6);
        assert_eq!(config.state_kind, StateKind::Example);
    }

    #[test]
    fn config_rejects_unknown_keys() {
        let err = ScenarioConfig::from_str("state.alpha = 0.9\n").unwrap_err();
        assert!(matches!(err, CliError::Parse(_)));
    }

    #[test]
    fn config_rejects_duplicates_and_garbage() {
        assert!(ScenarioConfig::from_str("state.p1 = 0.6\nstate.p1 = 0.7\n").is_err());
        assert!(ScenarioConfig::from_str("not a key value line\n").is_err());
    }

    #[test]
    fn complex_tokens_round_trip() {
        for z in [
            Complex64::new(0.5, -0.25),
            Complex64::new(-1.5e-3, 2.0),
            Complex64::new(0.0, 0.0),
        ] {
            let parsed = parse_complex(&format_complex(z)).unwrap();
            assert_eq!(parsed, z);
        }
        assert!(parse_complex("1.0").is_err());
        assert!(parse_complex("i").is_err());
        assert!(parse_complex("1.0+i").is_err());
    }
}
