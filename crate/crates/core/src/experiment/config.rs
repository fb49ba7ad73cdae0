//! Experiment configuration files.
//!
//! The format is flat `key = value` text grouped under `[section]` headers.
//! Blank lines and lines starting with `#` or `;` are ignored, surrounding
//! whitespace is trimmed, and list values are comma-separated. Every key
//! belongs to a section; keys and sections are case-sensitive.
//!
//! ```text
//! [input]
//! scenario = crt-like        # or: csv = data.csv
//! n = 600                    # scenario only
//! missing_token = NA         # csv only
//! outcome = event            # csv only
//!
//! [design]
//! approaches = 1,2,3
//! k_values = 1,10,50,200
//! folds = 10
//! replicates = 10
//! summary = mean             # or median
//!
//! [imputation]
//! sweeps = 10
//! method = bayesian-linear   # or predictive-mean-matching
//! donors = 5
//!
//! [run]
//! seed = 2024
//! output = results
//! parallelism = 0            # 0: one worker per core
//! full = false
//! ```

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::cv::{Approach, SummaryKind};
use crate::error::{Error, Result};
use crate::impute::ImputationConfig;
use crate::io::DEFAULT_MISSING_TOKEN;

/// Largest K accepted without `full = true`.
pub const DESK_MAX_IMPUTATIONS: usize = 200;
/// Largest simulated n accepted without `full = true`.
pub const DESK_MAX_ROWS: usize = 600;

pub const DESK_K_VALUES: [usize; 4] = [1, 10, 50, 200];
pub const FULL_K_VALUES: [usize; 4] = [1, 10, 100, 1000];

/// One `key = value` entry with its section and source line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Entry {
    pub section: String,
    pub key: String,
    pub value: String,
    pub line: usize,
}

/// Splits sectioned key-value text into entries.
pub fn parse_sections(text: &str) -> Result<Vec<Entry>> {
    let mut section: Option<String> = None;
    let mut entries = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') || trimmed.starts_with(';') {
            continue;
        }
        if let Some(rest) = trimmed.strip_prefix('[') {
            let name = rest.strip_suffix(']').ok_or_else(|| Error::Parse {
                line,
                message: "unterminated section header".into(),
            })?;
            let name = name.trim();
            if name.is_empty() || name.contains(['[', ']']) {
                return Err(Error::Parse {
                    line,
                    message: format!("bad section name `{name}`"),
                });
            }
            section = Some(name.to_owned());
            continue;
        }
        let (key, value) = trimmed.split_once('=').ok_or_else(|| Error::Parse {
            line,
            message: "expected `key = value`".into(),
        })?;
        let key = key.trim();
        if key.is_empty() {
            return Err(Error::Parse {
                line,
                message: "empty key".into(),
            });
        }
        // Trailing comments after a value.
        let value = value.split(" #").next().unwrap_or("").trim();
        let section = section.clone().ok_or_else(|| Error::Parse {
            line,
            message: format!("key `{key}` outside any section"),
        })?;
        entries.push(Entry {
            section,
            key: key.to_owned(),
            value: value.to_owned(),
            line,
        });
    }
    Ok(entries)
}

#[derive(Debug, Clone, PartialEq)]
pub enum InputSource {
    Scenario {
        name: String,
        /// Rows to simulate; defaults to the preset size (capped in desk mode).
        n: Option<usize>,
        /// Data seed; derived from the master seed when absent.
        seed: Option<u64>,
    },
    Csv {
        path: PathBuf,
        missing_token: String,
        outcome: String,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub input: InputSource,
    pub approaches: Vec<Approach>,
    pub k_values: Vec<usize>,
    pub folds: usize,
    pub replicates: usize,
    pub summary: SummaryKind,
    pub imputation: ImputationConfig,
    pub master_seed: u64,
    pub output: PathBuf,
    /// Worker threads; 0 lets the pool pick one per core.
    pub parallelism: usize,
    /// Lifts the desk-scale caps on K and n.
    pub full: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            input: InputSource::Scenario {
                name: crate::sim::CRT_LIKE.into(),
                n: None,
                seed: None,
            },
            approaches: Approach::ALL.to_vec(),
            k_values: DESK_K_VALUES.to_vec(),
            folds: 10,
            replicates: 10,
            summary: SummaryKind::Mean,
            imputation: ImputationConfig::default(),
            master_seed: 0,
            output: PathBuf::from("results"),
            parallelism: 0,
            full: false,
        }
    }
}

fn parse_value<T: std::str::FromStr>(entry: &Entry) -> Result<T> {
    entry.value.parse().map_err(|_| Error::Parse {
        line: entry.line,
        message: format!("bad value `{}` for `{}`", entry.value, entry.key),
    })
}

fn parse_list<T: std::str::FromStr>(entry: &Entry) -> Result<Vec<T>> {
    entry
        .value
        .split(',')
        .map(|item| {
            item.trim().parse().map_err(|_| Error::Parse {
                line: entry.line,
                message: format!("bad list item `{}` for `{}`", item.trim(), entry.key),
            })
        })
        .collect()
}

impl ExperimentConfig {
    /// Parses configuration text. Relative CSV paths are resolved against
    /// `base_dir` when given.
    pub fn parse(text: &str, base_dir: Option<&Path>) -> Result<Self> {
        let mut cfg = ExperimentConfig::default();
        let mut scenario: Option<String> = None;
        let mut csv: Option<PathBuf> = None;
        let mut n = None;
        let mut data_seed = None;
        let mut missing_token = DEFAULT_MISSING_TOKEN.to_owned();
        let mut outcome: Option<String> = None;
        let mut k_values = None;

        for e in parse_sections(text)? {
            match (e.section.as_str(), e.key.as_str()) {
                ("input", "scenario") => scenario = Some(e.value.clone()),
                ("input", "csv") => csv = Some(PathBuf::from(&e.value)),
                ("input", "n") => n = Some(parse_value(&e)?),
                ("input", "seed") => data_seed = Some(parse_value(&e)?),
                ("input", "missing_token") => missing_token = e.value.clone(),
                ("input", "outcome") => outcome = Some(e.value.clone()),
                ("design", "approaches") => {
                    cfg.approaches = parse_list::<u8>(&e)?
                        .into_iter()
                        .map(Approach::from_number)
                        .collect::<Result<_>>()
                        .map_err(|err| Error::Parse {
                            line: e.line,
                            message: err.to_string(),
                        })?;
                }
                ("design", "k_values") => k_values = Some(parse_list(&e)?),
                ("design", "folds") => cfg.folds = parse_value(&e)?,
                ("design", "replicates") => cfg.replicates = parse_value(&e)?,
                ("design", "summary") => cfg.summary = parse_value(&e)?,
                ("imputation", "sweeps") => cfg.imputation.sweeps = parse_value(&e)?,
                ("imputation", "method") => cfg.imputation.continuous_method = parse_value(&e)?,
                ("imputation", "donors") => cfg.imputation.donor_count = parse_value(&e)?,
                ("run", "seed") => cfg.master_seed = parse_value(&e)?,
                ("run", "output") => cfg.output = PathBuf::from(&e.value),
                ("run", "parallelism") => cfg.parallelism = parse_value(&e)?,
                ("run", "full") => cfg.full = parse_value(&e)?,
                (section, key) => {
                    return Err(Error::Parse {
                        line: e.line,
                        message: format!("unknown key `{key}` in section [{section}]"),
                    })
                }
            }
        }

        cfg.input = match (scenario, csv) {
            (Some(_), Some(_)) => {
                return Err(Error::InvalidArgument(
                    "[input] takes either `scenario` or `csv`, not both".into(),
                ))
            }
            (None, Some(path)) => {
                if n.is_some() || data_seed.is_some() {
                    return Err(Error::InvalidArgument(
                        "`n` and `seed` apply to scenario input only".into(),
                    ));
                }
                let path = match base_dir {
                    Some(base) if path.is_relative() => base.join(path),
                    _ => path,
                };
                InputSource::Csv {
                    path,
                    missing_token,
                    outcome: outcome.ok_or_else(|| {
                        Error::InvalidArgument("csv input needs `outcome`".into())
                    })?,
                }
            }
            (name, None) => InputSource::Scenario {
                name: name.unwrap_or_else(|| crate::sim::CRT_LIKE.into()),
                n,
                seed: data_seed,
            },
        };
        cfg.k_values = k_values.unwrap_or_else(|| cfg.default_k_values());
        Ok(cfg)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        ExperimentConfig::parse(&text, path.parent())
    }

    pub fn default_k_values(&self) -> Vec<usize> {
        if self.full {
            FULL_K_VALUES.to_vec()
        } else {
            DESK_K_VALUES.to_vec()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let invalid = |m: String| Err(Error::InvalidArgument(m));
        if self.approaches.is_empty() {
            return invalid("no approaches selected".into());
        }
        if self.k_values.is_empty() || self.k_values.contains(&0) {
            return invalid("k_values must be non-empty and positive".into());
        }
        if self.replicates == 0 {
            return invalid("replicates must be at least 1".into());
        }
        if self.folds < 2 {
            return invalid("folds must be at least 2".into());
        }
        if !self.full {
            if let Some(k) = self.k_values.iter().find(|&&k| k > DESK_MAX_IMPUTATIONS) {
                return invalid(format!(
                    "K = {k} exceeds the desk-scale cap of {DESK_MAX_IMPUTATIONS}; set full = true"
                ));
            }
            if let InputSource::Scenario { n: Some(n), .. } = &self.input {
                if *n > DESK_MAX_ROWS {
                    return invalid(format!(
                        "n = {n} exceeds the desk-scale cap of {DESK_MAX_ROWS}; set full = true"
                    ));
                }
            }
        }
        self.imputation.validate()
    }

    /// Canonical text form, readable by [`ExperimentConfig::parse`].
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let join = |v: &mut dyn Iterator<Item = String>| v.collect::<Vec<_>>().join(",");
        s.push_str("[input]\n");
        match &self.input {
            InputSource::Scenario { name, n, seed } => {
                let _ = writeln!(s, "scenario = {name}");
                if let Some(n) = n {
                    let _ = writeln!(s, "n = {n}");
                }
                if let Some(seed) = seed {
                    let _ = writeln!(s, "seed = {seed}");
                }
            }
            InputSource::Csv {
                path,
                missing_token,
                outcome,
            } => {
                let _ = writeln!(s, "csv = {}", path.display());
                let _ = writeln!(s, "missing_token = {missing_token}");
                let _ = writeln!(s, "outcome = {outcome}");
            }
        }
        let _ = writeln!(s, "\n[design]");
        let _ = writeln!(
            s,
            "approaches = {}",
            join(&mut self.approaches.iter().map(|a| a.number().to_string()))
        );
        let _ = writeln!(
            s,
            "k_values = {}",
            join(&mut self.k_values.iter().map(|k| k.to_string()))
        );
        let _ = writeln!(s, "folds = {}", self.folds);
        let _ = writeln!(s, "replicates = {}", self.replicates);
        let _ = writeln!(s, "summary = {}", self.summary.name());
        let _ = writeln!(s, "\n[imputation]");
        let _ = writeln!(s, "sweeps = {}", self.imputation.sweeps);
        let _ = writeln!(s, "method = {}", self.imputation.continuous_method.name());
        let _ = writeln!(s, "donors = {}", self.imputation.donor_count);
        let _ = writeln!(s, "\n[run]");
        let _ = writeln!(s, "seed = {}", self.master_seed);
        let _ = writeln!(s, "output = {}", self.output.display());
        let _ = writeln!(s, "parallelism = {}", self.parallelism);
        let _ = writeln!(s, "full = {}", self.full);
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::impute::ContinuousMethod;

    #[test]
    fn parses_full_example() {
        let text = "\
# experiment
[input]
scenario = cll-like
n = 300

[design]
approaches = 1, 3
k_values = 1,10
folds = 5
replicates = 2
summary = median   # trailing comment

[imputation]
sweeps = 4
method = pmm
donors = 3

[run]
seed = 77
output = out/dir
parallelism = 2
";
        let cfg = ExperimentConfig::parse(text, None).unwrap();
        assert_eq!(
            cfg.input,
            InputSource::Scenario {
                name: "cll-like".into(),
                n: Some(300),
                seed: None
            }
        );
        assert_eq!(
            cfg.approaches,
            vec![Approach::PredictionPooling, Approach::AveragedImputations]
        );
        assert_eq!(cfg.k_values, vec![1, 10]);
        assert_eq!(cfg.folds, 5);
        assert_eq!(cfg.replicates, 2);
        assert_eq!(cfg.summary, SummaryKind::Median);
        assert_eq!(cfg.imputation.sweeps, 4);
        assert_eq!(cfg.imputation.continuous_method, ContinuousMethod::PredictiveMeanMatching);
        assert_eq!(cfg.imputation.donor_count, 3);
        assert_eq!(cfg.master_seed, 77);
        assert_eq!(cfg.parallelism, 2);
        cfg.validate().unwrap();
        assert_eq!(ExperimentConfig::parse(&cfg.to_text(), None).unwrap(), cfg);
    }

    #[test]
    fn defaults_follow_mode() {
        let desk = ExperimentConfig::parse("", None).unwrap();
        assert_eq!(desk.k_values, DESK_K_VALUES);
        let full = ExperimentConfig::parse("[run]\nfull = true\n", None).unwrap();
        assert_eq!(full.k_values, FULL_K_VALUES);
        full.validate().unwrap();
    }

    #[test]
    fn desk_caps_enforced() {
        let cfg = ExperimentConfig::parse("[design]\nk_values = 1000\n", None).unwrap();
        assert!(cfg.validate().is_err());
        let cfg = ExperimentConfig::parse("[input]\nn = 1053\n", None).unwrap();
        assert!(cfg.validate().is_err());
        let cfg = ExperimentConfig::parse("[input]\nn = 1053\n[run]\nfull = true\n", None).unwrap();
        cfg.validate().unwrap();
    }

    #[test]
    fn csv_input_resolves_relative_path() {
        let text = "[input]\ncsv = data.csv\noutcome = y\n";
        let cfg = ExperimentConfig::parse(text, Some(Path::new("/tmp/exp"))).unwrap();
        assert_eq!(
            cfg.input,
            InputSource::Csv {
                path: PathBuf::from("/tmp/exp/data.csv"),
                missing_token: "NA".into(),
                outcome: "y".into()
            }
        );
        assert!(ExperimentConfig::parse("[input]\ncsv = a.csv\n", None).is_err());
    }

    #[test]
    fn rejects_malformed_text() {
        for bad in [
            "key = 1\n",
            "[design\n",
            "[design]\nnonsense\n",
            "[design]\nfolds = ten\n",
            "[design]\napproaches = 1,4\n",
            "[design]\nwhatever = 1\n",
            "[input]\nscenario = crt-like\ncsv = x.csv\n",
        ] {
            assert!(ExperimentConfig::parse(bad, None).is_err(), "{bad:?}");
        }
    }
}
