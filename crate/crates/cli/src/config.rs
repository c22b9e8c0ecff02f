//! Run configuration: `key = value` files with command-line overrides.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use lexhmm::inference::HyperPrior;
use lexhmm::{EmissionMode, GoldColumn, Hyper, SamplerConfig, SamplerKind};

/// Corpus file layout.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Format {
    /// CoNLL-X when the first token line has ten tab-separated columns,
    /// vertical otherwise.
    #[default]
    Auto,
    Conllx,
    Vertical,
}

impl FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "auto" => Ok(Format::Auto),
            "conllx" => Ok(Format::Conllx),
            "vertical" => Ok(Format::Vertical),
            _ => Err(format!("unknown format {s:?} (expected auto, conllx or vertical)")),
        }
    }
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Format::Auto => "auto",
            Format::Conllx => "conllx",
            Format::Vertical => "vertical",
        })
    }
}

pub fn parse_gold_column(s: &str) -> Result<GoldColumn, String> {
    match s {
        "cpostag" => Ok(GoldColumn::Cpostag),
        "postag" => Ok(GoldColumn::Postag),
        _ => Err(format!("unknown gold column {s:?} (expected cpostag or postag)")),
    }
}

fn gold_column_name(c: GoldColumn) -> &'static str {
    match c {
        GoldColumn::Cpostag => "cpostag",
        GoldColumn::Postag => "postag",
    }
}

/// Everything a training run needs.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub corpus: Option<PathBuf>,
    pub format: Format,
    pub gold_column: GoldColumn,
    /// Defaults to the number of gold tags.
    pub tags: Option<usize>,
    pub sampler: SamplerKind,
    pub emission: EmissionMode,
    pub particles: usize,
    pub iterations: u64,
    pub seed: u64,
    pub p_geom: f64,
    /// 0 disables hyperparameter resampling.
    pub hyper_every: u64,
    pub resample_threshold: f64,
    pub threads: usize,
    pub exact_weights: bool,
    /// 0 writes a checkpoint only at the end.
    pub checkpoint_every: u64,
    pub out: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        let s = SamplerConfig::default();
        RunConfig {
            corpus: None,
            format: Format::Auto,
            gold_column: GoldColumn::Cpostag,
            tags: None,
            sampler: s.kind,
            emission: s.emission,
            particles: s.particles,
            iterations: s.iterations,
            seed: s.seed,
            p_geom: s.hyper.p_geom,
            hyper_every: s.hyper_every,
            resample_threshold: s.resample_threshold,
            threads: s.threads,
            exact_weights: s.exact_weights,
            checkpoint_every: 0,
            out: PathBuf::from("out"),
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: fmt::Display,
{
    value
        .parse()
        .map_err(|e| anyhow!("invalid value {value:?} for {key}: {e}"))
}

impl RunConfig {
    /// Sets one field by its key. Keys use `-` or `_` interchangeably.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.replace('_', "-");
        match key.as_str() {
            "corpus" => self.corpus = Some(PathBuf::from(value)),
            "format" => self.format = parse(&key, value)?,
            "gold-column" => self.gold_column = parse_gold_column(value).map_err(|e| anyhow!(e))?,
            "tags" => self.tags = Some(parse(&key, value)?),
            "sampler" => self.sampler = parse(&key, value)?,
            "emission" => self.emission = parse(&key, value)?,
            "particles" => self.particles = parse(&key, value)?,
            "iterations" => self.iterations = parse(&key, value)?,
            "seed" => self.seed = parse(&key, value)?,
            "p-geom" => self.p_geom = parse(&key, value)?,
            "hyper-every" => self.hyper_every = parse(&key, value)?,
            "resample-threshold" => self.resample_threshold = parse(&key, value)?,
            "threads" => self.threads = parse(&key, value)?,
            "exact-weights" => self.exact_weights = parse(&key, value)?,
            "checkpoint-every" => self.checkpoint_every = parse(&key, value)?,
            "out" => self.out = PathBuf::from(value),
            _ => bail!("unknown configuration key {key:?}"),
        }
        Ok(())
    }

    /// Applies a `key = value` file. Blank lines and `#` comments are
    /// ignored.
    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
        self.apply_text(&text)
            .with_context(|| format!("in configuration file {}", path.display()))
    }

    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("line {}: expected key = value", i + 1))?;
            self.set(key.trim(), value.trim())
                .with_context(|| format!("line {}", i + 1))?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.corpus.is_none() {
            bail!("no corpus given");
        }
        if self.tags == Some(0) {
            bail!("tags must be positive");
        }
        if self.particles == 0 || self.iterations == 0 || self.threads == 0 {
            bail!("particles, iterations and threads must be positive");
        }
        if !(self.p_geom > 0.0 && self.p_geom <= 1.0) {
            bail!("p-geom must lie in (0, 1]");
        }
        if !(0.0..=1.0).contains(&self.resample_threshold) {
            bail!("resample-threshold must lie in [0, 1]");
        }
        Ok(())
    }

    /// Sampler settings for a tagset of `num_tags` tags.
    pub fn sampler_config(&self, num_tags: usize) -> SamplerConfig {
        SamplerConfig {
            num_tags,
            particles: self.particles,
            iterations: self.iterations,
            seed: self.seed,
            kind: self.sampler,
            emission: self.emission,
            resample_threshold: self.resample_threshold,
            hyper_every: self.hyper_every,
            hyper: Hyper {
                p_geom: self.p_geom,
                ..Hyper::default()
            },
            hyper_prior: HyperPrior::default(),
            threads: self.threads,
            exact_weights: self.exact_weights,
        }
    }
}

/// Reads back with [`RunConfig::apply_text`].
impl fmt::Display for RunConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(c) = &self.corpus {
            writeln!(f, "corpus = {}", c.display())?;
        }
        writeln!(f, "format = {}", self.format)?;
        writeln!(f, "gold-column = {}", gold_column_name(self.gold_column))?;
        if let Some(t) = self.tags {
            writeln!(f, "tags = {t}")?;
        }
        writeln!(f, "sampler = {}", self.sampler)?;
        writeln!(f, "emission = {}", self.emission)?;
        writeln!(f, "particles = {}", self.particles)?;
        writeln!(f, "iterations = {}", self.iterations)?;
        writeln!(f, "seed = {}", self.seed)?;
        writeln!(f, "p-geom = {}", self.p_geom)?;
        writeln!(f, "hyper-every = {}", self.hyper_every)?;
        writeln!(f, "resample-threshold = {}", self.resample_threshold)?;
        writeln!(f, "threads = {}", self.threads)?;
        writeln!(f, "exact-weights = {}", self.exact_weights)?;
        writeln!(f, "checkpoint-every = {}", self.checkpoint_every)?;
        writeln!(f, "out = {}", self.out.display())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_values_and_round_trip() {
        let mut c = RunConfig::default();
        c.apply_text("# run\ncorpus = data/wsj.conll\nsampler=pyp-type  # comment\nhyper_every = 0\n\nexact-weights = false\ntags = 12\n")
            .unwrap();
        assert_eq!(c.corpus.as_deref(), Some(Path::new("data/wsj.conll")));
        assert_eq!(c.sampler, SamplerKind::PypType);
        assert_eq!(c.hyper_every, 0);
        assert!(!c.exact_weights);
        assert_eq!(c.tags, Some(12));
        let mut back = RunConfig::default();
        back.apply_text(&c.to_string()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn bad_lines_are_reported() {
        let mut c = RunConfig::default();
        let e = c.apply_text("seed = 1\nparticles\n").unwrap_err();
        assert!(format!("{e:#}").contains("line 2"), "{e:#}");
        let e = c.apply_text("colour = blue").unwrap_err();
        assert!(format!("{e:#}").contains("unknown configuration key"), "{e:#}");
        assert!(c.apply_text("seed = -1").is_err());
    }

    #[test]
    fn validation_rejects_nonpositive_values() {
        let mut c = RunConfig {
            corpus: Some("x".into()),
            ..RunConfig::default()
        };
        c.validate().unwrap();
        c.particles = 0;
        assert!(c.validate().is_err());
        c.particles = 1;
        c.p_geom = 0.0;
        assert!(c.validate().is_err());
        c.p_geom = 0.5;
        c.tags = Some(0);
        assert!(c.validate().is_err());
        assert!(RunConfig::default().validate().is_err());
    }
}
