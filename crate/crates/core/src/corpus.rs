//! Corpus ingestion: CoNLL-X and two-column vertical readers, word-type and
//! character interning, and per-type occurrence indexes.

use std::fs::File;
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use rustc_hash::FxHashMap;
use thiserror::Error;

/// Induced tag id. Induced tags are dense `0..|T|`; the sentence boundary tag
/// `$` is `|T|`.
pub type Tag = u32;

/// Dense word-type id.
pub type TypeId = u32;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("corpus contains no tokens")]
    Empty,
    #[error("unknown word type id {0}")]
    UnknownType(TypeId),
}

fn parse_err(line: usize, message: impl Into<String>) -> CorpusError {
    CorpusError::Parse {
        line,
        message: message.into(),
    }
}

/// Induced tag inventory plus the boundary tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Tagset {
    size: usize,
}

impl Tagset {
    pub fn new(size: usize) -> Self {
        assert!(size >= 1, "a tagset needs at least one induced tag");
        Tagset { size }
    }

    /// Number of induced tags `|T|` (the boundary is not counted).
    pub fn size(&self) -> usize {
        self.size
    }

    pub fn boundary(&self) -> Tag {
        self.size as Tag
    }

    /// Induced tags, boundary excluded.
    pub fn tags(&self) -> impl Iterator<Item = Tag> {
        0..self.size as Tag
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WordType {
    pub id: TypeId,
    pub surface: String,
    pub frequency: u32,
}

/// One token occurrence: sentence index and 0-based position.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Site {
    pub sentence: u32,
    pub position: u32,
}

/// Closed character inventory for the character language model.
///
/// Symbol ids: `0..n` are characters, `n` is the end-of-word symbol and
/// `n + 1` the unknown-character symbol. Bigram contexts additionally use a
/// start context.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Alphabet {
    chars: Vec<char>,
    index: FxHashMap<char, u32>,
}

impl Alphabet {
    fn intern(&mut self, c: char) -> u32 {
        let next = self.chars.len() as u32;
        *self.index.entry(c).or_insert_with(|| {
            self.chars.push(c);
            next
        })
    }

    pub fn num_chars(&self) -> usize {
        self.chars.len()
    }

    pub fn end(&self) -> u32 {
        self.chars.len() as u32
    }

    pub fn unknown(&self) -> u32 {
        self.chars.len() as u32 + 1
    }

    /// Number of symbols predicted by the uniform terminal: characters plus
    /// the end symbol.
    pub fn support(&self) -> usize {
        self.chars.len() + 1
    }

    pub fn start_context(&self) -> u32 {
        self.chars.len() as u32 + 2
    }

    pub fn num_contexts(&self) -> usize {
        self.chars.len() + 3
    }

    pub fn encode(&self, c: char) -> u32 {
        self.index.get(&c).copied().unwrap_or_else(|| self.unknown())
    }

    pub fn symbol(&self, id: u32) -> Option<char> {
        self.chars.get(id as usize).copied()
    }
}

/// Which CoNLL-X column supplies gold labels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GoldColumn {
    #[default]
    Cpostag,
    Postag,
}

impl GoldColumn {
    fn index(self) -> usize {
        match self {
            GoldColumn::Cpostag => 3,
            GoldColumn::Postag => 4,
        }
    }
}

/// A tokenized training corpus. Immutable once built.
#[derive(Debug, Clone)]
pub struct Corpus {
    types: Vec<WordType>,
    index: FxHashMap<String, TypeId>,
    sentences: Vec<Vec<TypeId>>,
    sites: Vec<Vec<Site>>,
    gold: Option<Vec<Vec<u32>>>,
    gold_tags: Vec<String>,
    alphabet: Alphabet,
    spellings: Vec<Vec<u32>>,
}

impl Corpus {
    pub fn num_types(&self) -> usize {
        self.types.len()
    }

    pub fn num_tokens(&self) -> usize {
        self.sentences.iter().map(Vec::len).sum()
    }

    pub fn num_sentences(&self) -> usize {
        self.sentences.len()
    }

    pub fn types(&self) -> &[WordType] {
        &self.types
    }

    pub fn word_type(&self, id: TypeId) -> &WordType {
        &self.types[id as usize]
    }

    pub fn lookup(&self, surface: &str) -> Option<TypeId> {
        self.index.get(surface).copied()
    }

    pub fn sentences(&self) -> &[Vec<TypeId>] {
        &self.sentences
    }

    pub fn sentence(&self, i: usize) -> &[TypeId] {
        &self.sentences[i]
    }

    pub fn word_at(&self, site: Site) -> TypeId {
        self.sentences[site.sentence as usize][site.position as usize]
    }

    /// Occurrences of a word type in corpus order.
    pub fn sites_of_type(&self, id: TypeId) -> Result<&[Site], CorpusError> {
        self.sites
            .get(id as usize)
            .map(Vec::as_slice)
            .ok_or(CorpusError::UnknownType(id))
    }

    pub fn gold(&self) -> Option<&[Vec<u32>]> {
        self.gold.as_deref()
    }

    /// Gold tag names in first-appearance order; gold label `g` names
    /// `gold_tags()[g]`.
    pub fn gold_tags(&self) -> &[String] {
        &self.gold_tags
    }

    /// Gold labels flattened in corpus order.
    pub fn gold_flat(&self) -> Option<Vec<u32>> {
        self.gold
            .as_ref()
            .map(|g| g.iter().flatten().copied().collect())
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    /// Character symbol ids of a word type (end symbol not included).
    pub fn spelling(&self, id: TypeId) -> &[u32] {
        &self.spellings[id as usize]
    }

    /// Order-sensitive fingerprint of the token stream, used to refuse
    /// resuming a checkpoint against a different corpus.
    pub fn fingerprint(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        let mut feed = |bytes: &[u8]| {
            for b in bytes {
                h ^= u64::from(*b);
                h = h.wrapping_mul(0x0000_0100_0000_01b3);
            }
        };
        for s in &self.sentences {
            for &w in s {
                feed(self.types[w as usize].surface.as_bytes());
                feed(&[0]);
            }
            feed(&[1]);
        }
        h
    }
}

/// Incremental corpus construction; interning is exact string identity.
#[derive(Debug, Default)]
pub struct CorpusBuilder {
    types: Vec<WordType>,
    index: FxHashMap<String, TypeId>,
    sentences: Vec<Vec<TypeId>>,
    gold: Vec<Vec<u32>>,
    gold_index: FxHashMap<String, u32>,
    gold_tags: Vec<String>,
    has_gold: Option<bool>,
}

impl CorpusBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    fn intern_word(&mut self, surface: &str) -> TypeId {
        if let Some(&id) = self.index.get(surface) {
            self.types[id as usize].frequency += 1;
            return id;
        }
        let id = self.types.len() as TypeId;
        self.types.push(WordType {
            id,
            surface: surface.to_string(),
            frequency: 1,
        });
        self.index.insert(surface.to_string(), id);
        id
    }

    fn intern_gold(&mut self, tag: &str) -> u32 {
        if let Some(&g) = self.gold_index.get(tag) {
            return g;
        }
        let g = self.gold_tags.len() as u32;
        self.gold_tags.push(tag.to_string());
        self.gold_index.insert(tag.to_string(), g);
        g
    }

    /// Adds a sentence of `(form, gold)` pairs. Either every token of the
    /// corpus carries gold or none does. Empty sentences are ignored.
    pub fn push_sentence<'a, I>(&mut self, tokens: I) -> Result<(), String>
    where
        I: IntoIterator<Item = (&'a str, Option<&'a str>)>,
    {
        let mut words = Vec::new();
        let mut golds = Vec::new();
        for (form, gold) in tokens {
            if form.is_empty() {
                return Err("empty word form".into());
            }
            match (self.has_gold, gold.is_some()) {
                (None, g) => self.has_gold = Some(g),
                (Some(a), b) if a != b => {
                    return Err("gold labels must be present on every token or none".into())
                }
                _ => {}
            }
            words.push(self.intern_word(form));
            if let Some(g) = gold {
                golds.push(self.intern_gold(g));
            }
        }
        if words.is_empty() {
            return Ok(());
        }
        self.sentences.push(words);
        if self.has_gold == Some(true) {
            self.gold.push(golds);
        }
        Ok(())
    }

    pub fn build(self) -> Result<Corpus, CorpusError> {
        if self.sentences.is_empty() {
            return Err(CorpusError::Empty);
        }
        let mut sites = vec![Vec::new(); self.types.len()];
        for (s, sentence) in self.sentences.iter().enumerate() {
            for (p, &w) in sentence.iter().enumerate() {
                sites[w as usize].push(Site {
                    sentence: s as u32,
                    position: p as u32,
                });
            }
        }
        let mut alphabet = Alphabet::default();
        for t in &self.types {
            for c in t.surface.chars() {
                alphabet.intern(c);
            }
        }
        let spellings = self
            .types
            .iter()
            .map(|t| t.surface.chars().map(|c| alphabet.encode(c)).collect())
            .collect();
        let gold = (self.has_gold == Some(true)).then_some(self.gold);
        Ok(Corpus {
            types: self.types,
            index: self.index,
            sentences: self.sentences,
            sites,
            gold,
            gold_tags: self.gold_tags,
            alphabet,
            spellings,
        })
    }
}

fn open(path: &Path) -> Result<BufReader<File>, CorpusError> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|source| CorpusError::Io {
            path: path.to_path_buf(),
            source,
        })
}

/// Reads a CoNLL-X file. FORM supplies word types, the chosen tag column
/// supplies gold labels.
pub fn read_conllx(path: impl AsRef<Path>, column: GoldColumn) -> Result<Corpus, CorpusError> {
    let path = path.as_ref();
    parse_conllx(open(path)?, column).map_err(|e| with_path(e, path))
}

/// Reads a two-column vertical file (`word TAB tag`, blank line between
/// sentences). With `with_gold == false` the tag column is ignored and may be
/// absent.
pub fn read_vertical(path: impl AsRef<Path>, with_gold: bool) -> Result<Corpus, CorpusError> {
    let path = path.as_ref();
    parse_vertical(open(path)?, with_gold).map_err(|e| with_path(e, path))
}

fn with_path(e: CorpusError, path: &Path) -> CorpusError {
    match e {
        CorpusError::Io { source, .. } => CorpusError::Io {
            path: path.to_path_buf(),
            source,
        },
        other => other,
    }
}

fn io_err(source: io::Error) -> CorpusError {
    CorpusError::Io {
        path: PathBuf::new(),
        source,
    }
}

/// Splits a line-oriented reader into sentences of `(line number, line)`.
fn blocks<R: BufRead>(reader: R) -> Result<Vec<Vec<(usize, String)>>, CorpusError> {
    let mut out = Vec::new();
    let mut current = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(io_err)?;
        let line = line.strip_suffix('\r').unwrap_or(&line).to_string();
        if line.trim().is_empty() {
            if !current.is_empty() {
                out.push(std::mem::take(&mut current));
            }
        } else {
            current.push((i + 1, line));
        }
    }
    if !current.is_empty() {
        out.push(current);
    }
    Ok(out)
}

pub fn parse_conllx<R: BufRead>(reader: R, column: GoldColumn) -> Result<Corpus, CorpusError> {
    let mut builder = CorpusBuilder::new();
    for block in blocks(reader)? {
        let mut tokens = Vec::with_capacity(block.len());
        for (lineno, line) in &block {
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 10 {
                return Err(parse_err(
                    *lineno,
                    format!("expected 10 tab-separated columns, found {}", fields.len()),
                ));
            }
            if fields[0].parse::<u32>().is_err() {
                return Err(parse_err(*lineno, format!("invalid token id {:?}", fields[0])));
            }
            if fields[1].is_empty() {
                return Err(parse_err(*lineno, "empty FORM column"));
            }
            tokens.push((fields[1], Some(fields[column.index()])));
        }
        let line = block[0].0;
        builder
            .push_sentence(tokens)
            .map_err(|m| parse_err(line, m))?;
    }
    builder.build()
}

pub fn parse_vertical<R: BufRead>(reader: R, with_gold: bool) -> Result<Corpus, CorpusError> {
    let mut builder = CorpusBuilder::new();
    for block in blocks(reader)? {
        let mut tokens = Vec::with_capacity(block.len());
        for (lineno, line) in &block {
            let mut fields = line.split('\t');
            let form = fields.next().unwrap_or_default();
            let tag = fields.next();
            if fields.next().is_some() {
                return Err(parse_err(*lineno, "more than two columns"));
            }
            if form.is_empty() {
                return Err(parse_err(*lineno, "empty word column"));
            }
            let gold = if with_gold {
                match tag {
                    Some(t) if !t.is_empty() => Some(t),
                    _ => return Err(parse_err(*lineno, "missing tag column")),
                }
            } else {
                None
            };
            tokens.push((form, gold));
        }
        let line = block[0].0;
        builder
            .push_sentence(tokens)
            .map_err(|m| parse_err(line, m))?;
    }
    builder.build()
}

/// Writes `word TAB label` lines with a blank line after each sentence.
/// `label` receives the sentence index and position.
pub fn write_vertical<W, F>(mut out: W, corpus: &Corpus, mut label: F) -> io::Result<()>
where
    W: Write,
    F: FnMut(usize, usize) -> String,
{
    for (s, sentence) in corpus.sentences().iter().enumerate() {
        for (p, &w) in sentence.iter().enumerate() {
            writeln!(out, "{}\t{}", corpus.word_type(w).surface, label(s, p))?;
        }
        writeln!(out)?;
    }
    out.flush()
}
