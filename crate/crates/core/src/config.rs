//! Experiment configuration.
//!
//! A plain-text format with `[section]` headers and `key = value` lines.
//! Probability lists are whitespace separated. Tables (channels, distortion
//! rows) are written as a key with an empty value followed by one indented
//! line per row. `#` starts a comment.
//!
//! ```text
//! [source]
//! pmf = 0.5 0.5
//!
//! [channel]
//! # rd: solve R(D) at target_distortion and reverse the optimal channel
//! # forward: rows of P(y|x), one per source symbol
//! # test: py plus rows of P(x|y), one per reproduction symbol
//! kind = rd
//! target_distortion = 0.2
//!
//! [distortion]
//! rows =
//!     0 1
//!     1 0
//!
//! [experiment]
//! n_list = 4 6 8
//! rate_list = 0.45
//! trials = 200
//! master_seed = 1
//! output = distortion.csv
//!
//! [rd]
//! slopes = 0.5 1 2
//! distortions = 0.05 0.11 0.2 0.3
//! tol = 1e-9
//! ```
//!
//! `[distortion]` also accepts `measure = hamming` in place of `rows`.

use std::fmt::{self, Write as _};
use std::path::PathBuf;

use crate::finite_prob::{joint_from, reverse_channel, Channel, Pmf};
use crate::rd_solver::{rd_point_at_distortion, DistortionMeasure, RdPoint, DEFAULT_TOL};

/// Tolerance for a `test` channel reproducing the configured source.
const SOURCE_MATCH_TOL: f64 = 1e-9;
const DEFAULT_SLOPES: [f64; 11] = [0.0, 0.5, 1.0, 1.5, 2.0, 3.0, 4.0, 5.0, 6.0, 8.0, 10.0];

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    /// 1-based line of the offending text, when there is one.
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(line) => write!(f, "line {line}: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

fn err<T>(line: Option<usize>, message: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError {
        line,
        message: message.into(),
    })
}

/// Where the encoder's test channel comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum ChannelSpec {
    /// Rate-distortion optimal channel at this target distortion.
    RateDistortion { target: f64 },
    /// Forward channel `P_{Y|X}`.
    Forward(Channel),
    /// Reproduction marginal and test channel `P_{X|Y}` given directly.
    Test { py: Pmf, channel: Channel },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RdSweep {
    pub slopes: Vec<f64>,
    pub distortions: Vec<f64>,
    pub tol: f64,
}

impl Default for RdSweep {
    fn default() -> Self {
        Self {
            slopes: Vec::new(),
            distortions: Vec::new(),
            tol: DEFAULT_TOL,
        }
    }
}

impl RdSweep {
    /// Slopes to evaluate; a fixed grid if neither slopes nor distortions are set.
    pub fn effective_slopes(&self) -> Vec<f64> {
        if self.slopes.is_empty() && self.distortions.is_empty() {
            DEFAULT_SLOPES.to_vec()
        } else {
            self.slopes.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub source: Pmf,
    pub channel: ChannelSpec,
    pub distortion: DistortionMeasure,
    pub n_list: Vec<usize>,
    pub rate_list: Vec<f64>,
    pub trials: usize,
    pub master_seed: u64,
    pub output: Option<PathBuf>,
    pub rd: RdSweep,
}

/// The distributions an experiment actually runs with.
#[derive(Debug, Clone, PartialEq)]
pub struct Setup {
    pub px: Pmf,
    pub py: Pmf,
    /// `P_{X|Y}`.
    pub test_channel: Channel,
    /// Solver output when the channel came from `kind = rd`.
    pub rd_point: Option<RdPoint>,
    /// Reproduction symbols of zero probability (uniform test-channel rows).
    pub degenerate_rows: Vec<usize>,
}

struct Entry {
    line: usize,
    key: String,
    value: String,
    rows: Vec<(usize, String)>,
}

struct Section {
    line: usize,
    name: String,
    entries: Vec<Entry>,
}

fn tokenize(text: &str) -> Result<Vec<Section>, ConfigError> {
    let mut sections: Vec<Section> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("");
        if content.trim().is_empty() {
            continue;
        }
        let indented = content.starts_with([' ', '\t']);
        let trimmed = content.trim();
        if let Some(name) = trimmed.strip_prefix('[') {
            let Some(name) = name.strip_suffix(']') else {
                return err(Some(line), format!("unterminated section header {trimmed:?}"));
            };
            let name = name.trim().to_string();
            if sections.iter().any(|s| s.name == name) {
                return err(Some(line), format!("duplicate section [{name}]"));
            }
            sections.push(Section {
                line,
                name,
                entries: Vec::new(),
            });
            continue;
        }
        let Some(section) = sections.last_mut() else {
            return err(Some(line), "content before the first [section]");
        };
        if indented {
            match section.entries.last_mut() {
                Some(entry) if entry.value.is_empty() => {
                    entry.rows.push((line, trimmed.to_string()));
                    continue;
                }
                _ => return err(Some(line), "indented row does not follow a table key"),
            }
        }
        let Some((key, value)) = trimmed.split_once('=') else {
            return err(Some(line), format!("expected `key = value`, got {trimmed:?}"));
        };
        let key = key.trim().to_string();
        if section.entries.iter().any(|e| e.key == key) {
            return err(Some(line), format!("duplicate key {key:?} in [{}]", section.name));
        }
        section.entries.push(Entry {
            line,
            key,
            value: value.trim().to_string(),
            rows: Vec::new(),
        });
    }
    Ok(sections)
}

struct SectionReader<'a> {
    section: &'a Section,
    used: Vec<bool>,
}

impl<'a> SectionReader<'a> {
    fn new(section: &'a Section) -> Self {
        Self {
            section,
            used: vec![false; section.entries.len()],
        }
    }

    fn take(&mut self, key: &str) -> Option<&'a Entry> {
        let idx = self.section.entries.iter().position(|e| e.key == key)?;
        self.used[idx] = true;
        Some(&self.section.entries[idx])
    }

    fn require(&mut self, key: &str) -> Result<&'a Entry, ConfigError> {
        match self.take(key) {
            Some(e) => Ok(e),
            None => err(
                Some(self.section.line),
                format!("[{}] is missing `{key}`", self.section.name),
            ),
        }
    }

    fn finish(self) -> Result<(), ConfigError> {
        match self.used.iter().position(|u| !u) {
            Some(i) => {
                let e = &self.section.entries[i];
                err(
                    Some(e.line),
                    format!("unknown key {:?} in [{}]", e.key, self.section.name),
                )
            }
            None => Ok(()),
        }
    }
}

fn parse_list<T: std::str::FromStr>(line: usize, text: &str, what: &str) -> Result<Vec<T>, ConfigError> {
    text.split_whitespace()
        .map(|tok| {
            tok.parse::<T>().or_else(|_| {
                err(Some(line), format!("cannot parse {tok:?} as {what}"))
            })
        })
        .collect()
}

fn scalar<T: std::str::FromStr>(entry: &Entry, what: &str) -> Result<T, ConfigError> {
    let items: Vec<T> = parse_list(entry.line, &entry.value, what)?;
    match <[T; 1]>::try_from(items) {
        Ok([v]) => Ok(v),
        Err(_) => err(Some(entry.line), format!("`{}` takes a single {what}", entry.key)),
    }
}

fn pmf(entry: &Entry) -> Result<Pmf, ConfigError> {
    let probs = parse_list(entry.line, &entry.value, "a probability")?;
    Pmf::new(probs).or_else(|e| err(Some(entry.line), format!("`{}`: {e}", entry.key)))
}

fn table(entry: &Entry) -> Result<Vec<Vec<f64>>, ConfigError> {
    if !entry.value.is_empty() {
        return err(Some(entry.line), format!("`{}` rows go on indented lines below the key", entry.key));
    }
    if entry.rows.is_empty() {
        return err(Some(entry.line), format!("`{}` has no rows", entry.key));
    }
    entry
        .rows
        .iter()
        .map(|(line, text)| parse_list(*line, text, "a number"))
        .collect()
}

fn channel(entry: &Entry) -> Result<Channel, ConfigError> {
    let rows = table(entry)?;
    for (i, row) in rows.iter().enumerate() {
        if let Err(e) = Pmf::new(row.clone()) {
            return err(Some(entry.rows[i].0), format!("channel row: {e}"));
        }
    }
    Channel::new(rows).or_else(|e| err(Some(entry.line), e.to_string()))
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let sections = tokenize(text)?;
        let find = |name: &str| sections.iter().find(|s| s.name == name);
        if let Some(s) = sections
            .iter()
            .find(|s| !["source", "channel", "distortion", "experiment", "rd"].contains(&s.name.as_str()))
        {
            return err(Some(s.line), format!("unknown section [{}]", s.name));
        }
        let missing = |name: &str| ConfigError {
            line: None,
            message: format!("missing section [{name}]"),
        };

        let mut src = SectionReader::new(find("source").ok_or_else(|| missing("source"))?);
        let source = pmf(src.require("pmf")?)?;
        src.finish()?;

        let mut ch = SectionReader::new(find("channel").ok_or_else(|| missing("channel"))?);
        let kind = ch.require("kind")?;
        let channel = match kind.value.as_str() {
            "rd" => ChannelSpec::RateDistortion {
                target: scalar(ch.require("target_distortion")?, "a distortion")?,
            },
            "forward" => ChannelSpec::Forward(channel(ch.require("rows")?)?),
            "test" => ChannelSpec::Test {
                py: pmf(ch.require("py")?)?,
                channel: channel(ch.require("rows")?)?,
            },
            other => {
                return err(
                    Some(kind.line),
                    format!("channel kind must be rd, forward or test, got {other:?}"),
                )
            }
        };
        ch.finish()?;

        let mut dist = SectionReader::new(find("distortion").ok_or_else(|| missing("distortion"))?);
        let distortion = match (dist.take("measure"), dist.take("rows")) {
            (Some(m), None) if m.value == "hamming" => DistortionMeasure::hamming(source.alphabet_size()),
            (Some(m), None) => return err(Some(m.line), format!("unknown measure {:?}", m.value)),
            (None, Some(rows)) => DistortionMeasure::new(table(rows)?)
                .or_else(|e| err(Some(rows.line), e.to_string()))?,
            (Some(m), Some(_)) => return err(Some(m.line), "give either `measure` or `rows`, not both"),
            (None, None) => return err(None, "[distortion] needs `measure` or `rows`"),
        };
        dist.finish()?;

        let mut exp = SectionReader::new(find("experiment").ok_or_else(|| missing("experiment"))?);
        let n_entry = exp.require("n_list")?;
        let n_list: Vec<usize> = parse_list(n_entry.line, &n_entry.value, "a blocklength")?;
        if n_list.is_empty() || n_list.contains(&0) {
            return err(Some(n_entry.line), "n_list needs one or more positive blocklengths");
        }
        let r_entry = exp.require("rate_list")?;
        let rate_list: Vec<f64> = parse_list(r_entry.line, &r_entry.value, "a rate")?;
        if rate_list.is_empty() || rate_list.iter().any(|r| *r < 0.0 || !r.is_finite()) {
            return err(Some(r_entry.line), "rate_list needs one or more nonnegative rates");
        }
        let trials = match exp.take("trials") {
            Some(e) => scalar(e, "a trial count")?,
            None => 20,
        };
        let master_seed = match exp.take("master_seed") {
            Some(e) => scalar(e, "a 64-bit seed")?,
            None => 0,
        };
        let output = exp.take("output").map(|e| PathBuf::from(&e.value));
        exp.finish()?;

        let mut rd = RdSweep::default();
        if let Some(section) = find("rd") {
            let mut r = SectionReader::new(section);
            if let Some(e) = r.take("slopes") {
                rd.slopes = parse_list(e.line, &e.value, "a slope")?;
                if rd.slopes.iter().any(|s| *s < 0.0 || !s.is_finite()) {
                    return err(Some(e.line), "slopes must be finite and nonnegative");
                }
            }
            if let Some(e) = r.take("distortions") {
                rd.distortions = parse_list(e.line, &e.value, "a distortion")?;
            }
            if let Some(e) = r.take("tol") {
                rd.tol = scalar(e, "a tolerance")?;
                if rd.tol <= 0.0 || rd.tol.is_nan() {
                    return err(Some(e.line), "tol must be positive");
                }
            }
            r.finish()?;
        }

        let cfg = Self {
            source,
            channel,
            distortion,
            n_list,
            rate_list,
            trials,
            master_seed,
            output,
            rd,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Alphabet consistency between the source, channel and distortion table.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let kx = self.source.alphabet_size();
        let (dx, dy) = (self.distortion.size_x(), self.distortion.size_y());
        if dx != kx {
            return err(None, format!("distortion table has {dx} rows, source has {kx} symbols"));
        }
        if self.trials == 0 {
            return err(None, "trials must be at least 1");
        }
        match &self.channel {
            ChannelSpec::RateDistortion { target } => {
                if !target.is_finite() || *target < 0.0 {
                    return err(None, format!("target_distortion must be nonnegative, got {target}"));
                }
            }
            ChannelSpec::Forward(ch) => {
                if ch.input_size() != kx || ch.output_size() != dy {
                    return err(
                        None,
                        format!(
                            "forward channel is {} x {}, expected {kx} x {dy}",
                            ch.input_size(),
                            ch.output_size()
                        ),
                    );
                }
            }
            ChannelSpec::Test { py, channel } => {
                if py.alphabet_size() != dy || channel.input_size() != dy || channel.output_size() != kx {
                    return err(
                        None,
                        format!(
                            "test channel is {} x {} with py over {}, expected {dy} x {kx} with py over {dy}",
                            channel.input_size(),
                            channel.output_size(),
                            py.alphabet_size()
                        ),
                    );
                }
                for x in 0..kx {
                    let induced: f64 = (0..dy).map(|y| py.get(y) * channel.get(y, x)).sum();
                    if (induced - self.source.get(x)).abs() > SOURCE_MATCH_TOL {
                        return err(
                            None,
                            format!(
                                "test channel induces P(x = {x}) = {induced}, source says {}",
                                self.source.get(x)
                            ),
                        );
                    }
                }
            }
        }
        Ok(())
    }

    /// Resolves the configured channel into `(P_X, P_Y, P_{X|Y})`.
    pub fn setup(&self) -> crate::Result<Setup> {
        let forward = |ch: &Channel, rd_point: Option<RdPoint>| -> crate::Result<Setup> {
            let rev = reverse_channel(&joint_from(&self.source, ch)?);
            Ok(Setup {
                px: self.source.clone(),
                py: rev.py,
                test_channel: rev.channel,
                rd_point,
                degenerate_rows: rev.degenerate_rows,
            })
        };
        match &self.channel {
            ChannelSpec::RateDistortion { target } => {
                let point = rd_point_at_distortion(&self.source, &self.distortion, *target, self.rd.tol)?;
                let ch = point.channel.clone();
                forward(&ch, Some(point))
            }
            ChannelSpec::Forward(ch) => forward(ch, None),
            ChannelSpec::Test { py, channel } => Ok(Setup {
                px: self.source.clone(),
                py: py.clone(),
                test_channel: channel.clone(),
                rd_point: None,
                degenerate_rows: Vec::new(),
            }),
        }
    }

    /// Canonical text form; parses back to an equal config.
    pub fn to_text(&self) -> String {
        fn list<T: fmt::Display>(items: &[T]) -> String {
            items.iter().map(T::to_string).collect::<Vec<_>>().join(" ")
        }
        fn rows(out: &mut String, key: &str, rows: impl Iterator<Item = Vec<f64>>) {
            let _ = writeln!(out, "{key} =");
            for r in rows {
                let _ = writeln!(out, "    {}", list(&r));
            }
        }
        let mut out = String::new();
        let _ = writeln!(out, "[source]\npmf = {}\n", list(self.source.probs()));
        out.push_str("[channel]\n");
        match &self.channel {
            ChannelSpec::RateDistortion { target } => {
                let _ = writeln!(out, "kind = rd\ntarget_distortion = {target}");
            }
            ChannelSpec::Forward(ch) => {
                out.push_str("kind = forward\n");
                rows(&mut out, "rows", ch.rows().iter().map(|r| r.probs().to_vec()));
            }
            ChannelSpec::Test { py, channel } => {
                let _ = writeln!(out, "kind = test\npy = {}", list(py.probs()));
                rows(&mut out, "rows", channel.rows().iter().map(|r| r.probs().to_vec()));
            }
        }
        out.push_str("\n[distortion]\n");
        rows(&mut out, "rows", self.distortion.rows().into_iter());
        let _ = writeln!(
            out,
            "\n[experiment]\nn_list = {}\nrate_list = {}\ntrials = {}\nmaster_seed = {}",
            list(&self.n_list),
            list(&self.rate_list),
            self.trials,
            self.master_seed
        );
        if let Some(p) = &self.output {
            let _ = writeln!(out, "output = {}", p.display());
        }
        out.push_str("\n[rd]\n");
        if !self.rd.slopes.is_empty() {
            let _ = writeln!(out, "slopes = {}", list(&self.rd.slopes));
        }
        if !self.rd.distortions.is_empty() {
            let _ = writeln!(out, "distortions = {}", list(&self.rd.distortions));
        }
        let _ = writeln!(out, "tol = {}", self.rd.tol);
        out
    }
}
