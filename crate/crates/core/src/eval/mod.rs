//! Scoring induced taggings against gold labels and analyzing lexicons.

use std::fmt;
use std::io::{self, Write};

use thiserror::Error;

use crate::corpus::{Corpus, Tag, TypeId};
use crate::model::AmbiguityClass;

#[cfg(test)]
mod tests;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EvalError {
    #[error("predicted and gold sequences differ in length ({pred} vs {gold})")]
    LengthMismatch { pred: usize, gold: usize },
    #[error("nothing to evaluate")]
    Empty,
    #[error("label {0} does not fit in an ambiguity class (at most 128 labels)")]
    LabelOutOfRange(u32),
    #[error("corpus has no gold labels")]
    NoGold,
}

/// Token counts of (predicted label, gold label) pairs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContingencyTable {
    /// Row-major, `num_pred` rows of `num_gold` columns.
    counts: Vec<u64>,
    num_pred: usize,
    num_gold: usize,
    total: u64,
}

impl ContingencyTable {
    pub fn new(pred: &[u32], gold: &[u32]) -> Result<Self, EvalError> {
        if pred.len() != gold.len() {
            return Err(EvalError::LengthMismatch {
                pred: pred.len(),
                gold: gold.len(),
            });
        }
        if pred.is_empty() {
            return Err(EvalError::Empty);
        }
        let num_pred = pred.iter().max().map_or(0, |&m| m as usize + 1);
        let num_gold = gold.iter().max().map_or(0, |&m| m as usize + 1);
        let mut counts = vec![0u64; num_pred * num_gold];
        for (&p, &g) in pred.iter().zip(gold) {
            counts[p as usize * num_gold + g as usize] += 1;
        }
        Ok(ContingencyTable {
            counts,
            num_pred,
            num_gold,
            total: pred.len() as u64,
        })
    }

    pub fn count(&self, pred: u32, gold: u32) -> u64 {
        if (pred as usize) < self.num_pred && (gold as usize) < self.num_gold {
            self.counts[pred as usize * self.num_gold + gold as usize]
        } else {
            0
        }
    }

    pub fn num_pred(&self) -> usize {
        self.num_pred
    }

    pub fn num_gold(&self) -> usize {
        self.num_gold
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    fn row(&self, p: usize) -> &[u64] {
        &self.counts[p * self.num_gold..(p + 1) * self.num_gold]
    }

    /// Most frequent gold label of each predicted label, lowest gold id on
    /// ties; `None` for predicted labels that never occur.
    pub fn mapping(&self) -> Vec<Option<u32>> {
        (0..self.num_pred)
            .map(|p| {
                let row = self.row(p);
                let mut best: Option<(u32, u64)> = None;
                for (g, &c) in row.iter().enumerate() {
                    if c > 0 && best.is_none_or(|(_, b)| c > b) {
                        best = Some((g as u32, c));
                    }
                }
                best.map(|(g, _)| g)
            })
            .collect()
    }

    pub fn many_to_one(&self) -> f64 {
        let hits: u64 = (0..self.num_pred)
            .map(|p| self.row(p).iter().copied().max().unwrap_or(0))
            .sum();
        hits as f64 / self.total as f64
    }

    /// `(homogeneity, completeness)`; a component whose reference entropy
    /// is zero is 1.
    pub fn homogeneity_completeness(&self) -> (f64, f64) {
        let n = self.total as f64;
        let plogp = |c: u64, of: f64| {
            if c == 0 {
                0.0
            } else {
                let p = c as f64 / of;
                -(c as f64 / n) * p.ln()
            }
        };
        let pred_totals: Vec<u64> = (0..self.num_pred).map(|p| self.row(p).iter().sum()).collect();
        let gold_totals: Vec<u64> = (0..self.num_gold)
            .map(|g| (0..self.num_pred).map(|p| self.row(p)[g]).sum())
            .collect();
        let h_gold: f64 = gold_totals.iter().map(|&c| plogp(c, n)).sum();
        let h_pred: f64 = pred_totals.iter().map(|&c| plogp(c, n)).sum();
        let mut h_gold_given_pred = 0.0;
        let mut h_pred_given_gold = 0.0;
        for (p, &pt) in pred_totals.iter().enumerate() {
            for (&c, &gt) in self.row(p).iter().zip(&gold_totals) {
                h_gold_given_pred += plogp(c, pt as f64);
                h_pred_given_gold += plogp(c, gt as f64);
            }
        }
        let ratio = |cond: f64, h: f64| if h <= 0.0 { 1.0 } else { (1.0 - cond / h).clamp(0.0, 1.0) };
        (ratio(h_gold_given_pred, h_gold), ratio(h_pred_given_gold, h_pred))
    }

    pub fn v_measure(&self) -> f64 {
        let (h, c) = self.homogeneity_completeness();
        if h + c == 0.0 {
            0.0
        } else {
            2.0 * h * c / (h + c)
        }
    }
}

/// Many-to-one accuracy: every predicted label is mapped to its most
/// frequent gold label.
pub fn many_to_one(pred: &[u32], gold: &[u32]) -> Result<f64, EvalError> {
    Ok(ContingencyTable::new(pred, gold)?.many_to_one())
}

/// Harmonic mean of homogeneity and completeness.
pub fn v_measure(pred: &[u32], gold: &[u32]) -> Result<f64, EvalError> {
    Ok(ContingencyTable::new(pred, gold)?.v_measure())
}

/// Scores for one tagging; formats as `key=value` lines.
#[derive(Debug, Clone, PartialEq)]
pub struct Metrics {
    pub tokens: u64,
    pub predicted_labels: usize,
    pub gold_labels: usize,
    pub many_to_one: f64,
    pub v_measure: f64,
    pub homogeneity: f64,
    pub completeness: f64,
}

impl Metrics {
    pub fn new(pred: &[u32], gold: &[u32]) -> Result<Self, EvalError> {
        let table = ContingencyTable::new(pred, gold)?;
        let (homogeneity, completeness) = table.homogeneity_completeness();
        let distinct = |xs: &[u32], n: usize| {
            let mut seen = vec![false; n];
            xs.iter().for_each(|&x| seen[x as usize] = true);
            seen.iter().filter(|&&s| s).count()
        };
        Ok(Metrics {
            tokens: table.total(),
            predicted_labels: distinct(pred, table.num_pred()),
            gold_labels: distinct(gold, table.num_gold()),
            many_to_one: table.many_to_one(),
            v_measure: table.v_measure(),
            homogeneity,
            completeness,
        })
    }
}

impl fmt::Display for Metrics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "tokens={}", self.tokens)?;
        writeln!(f, "predicted_labels={}", self.predicted_labels)?;
        writeln!(f, "gold_labels={}", self.gold_labels)?;
        writeln!(f, "many_to_one={:.6}", self.many_to_one)?;
        writeln!(f, "v_measure={:.6}", self.v_measure)?;
        writeln!(f, "homogeneity={:.6}", self.homogeneity)?;
        write!(f, "completeness={:.6}", self.completeness)
    }
}

/// Class of every word type: the distinct labels over its occurrences.
/// `assignment` is indexed like the corpus sentences.
pub fn extract_classes(assignment: &[Vec<u32>], corpus: &Corpus) -> Result<Vec<AmbiguityClass>, EvalError> {
    let shape_ok = assignment.len() == corpus.num_sentences()
        && assignment
            .iter()
            .zip(corpus.sentences())
            .all(|(a, s)| a.len() == s.len());
    if !shape_ok {
        return Err(EvalError::LengthMismatch {
            pred: assignment.iter().map(Vec::len).sum(),
            gold: corpus.num_tokens(),
        });
    }
    let mut classes = vec![AmbiguityClass::empty(); corpus.num_types()];
    for (labels, sentence) in assignment.iter().zip(corpus.sentences()) {
        for (&l, &w) in labels.iter().zip(sentence) {
            if l as usize >= AmbiguityClass::MAX_TAGS {
                return Err(EvalError::LabelOutOfRange(l));
            }
            classes[w as usize] = classes[w as usize].with(l);
        }
    }
    Ok(classes)
}

/// Size statistics of a lexicon.
#[derive(Debug, Clone, PartialEq)]
pub struct LexiconSummary {
    pub types: usize,
    pub distinct_classes: usize,
    /// Mean size over distinct classes.
    pub mean_class_size: f64,
    /// Mean size over word types.
    pub mean_type_class_size: f64,
}

impl LexiconSummary {
    pub fn new(classes: &[AmbiguityClass]) -> Self {
        let mut distinct: Vec<AmbiguityClass> = classes.to_vec();
        distinct.sort_unstable();
        distinct.dedup();
        let mean = |xs: &[AmbiguityClass]| {
            if xs.is_empty() {
                0.0
            } else {
                xs.iter().map(|c| c.len()).sum::<usize>() as f64 / xs.len() as f64
            }
        };
        LexiconSummary {
            types: classes.len(),
            distinct_classes: distinct.len(),
            mean_class_size: mean(&distinct),
            mean_type_class_size: mean(classes),
        }
    }
}

impl fmt::Display for LexiconSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "types={}", self.types)?;
        writeln!(f, "distinct_classes={}", self.distinct_classes)?;
        writeln!(f, "mean_class_size={:.6}", self.mean_class_size)?;
        write!(f, "mean_type_class_size={:.6}", self.mean_type_class_size)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ZipfRow {
    /// 1-based.
    pub rank: usize,
    pub class: AmbiguityClass,
    pub types: usize,
}

/// Distinct classes by descending number of word types; ties go to the
/// smaller bitmask so the order is deterministic.
pub fn zipf_table(classes: &[AmbiguityClass]) -> Vec<ZipfRow> {
    let mut sorted = classes.to_vec();
    sorted.sort_unstable();
    let mut rows: Vec<(AmbiguityClass, usize)> = Vec::new();
    for c in sorted {
        match rows.last_mut() {
            Some((last, n)) if *last == c => *n += 1,
            _ => rows.push((c, 1)),
        }
    }
    rows.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    rows.into_iter()
        .enumerate()
        .map(|(i, (class, types))| ZipfRow { rank: i + 1, class, types })
        .collect()
}

/// Least-squares line through `(ln rank, ln types)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerLawFit {
    pub slope: f64,
    pub intercept: f64,
    /// Zero when the type counts do not vary.
    pub r_squared: f64,
}

pub fn power_law_fit(table: &[ZipfRow]) -> PowerLawFit {
    let n = table.len() as f64;
    let xs: Vec<f64> = table.iter().map(|r| (r.rank as f64).ln()).collect();
    let ys: Vec<f64> = table.iter().map(|r| (r.types as f64).ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let flat = table.iter().all(|r| r.types == table[0].types);
    if flat || sxx == 0.0 {
        return PowerLawFit {
            slope: 0.0,
            intercept: if table.is_empty() { 0.0 } else { my },
            r_squared: 0.0,
        };
    }
    let slope = sxy / sxx;
    PowerLawFit {
        slope,
        intercept: my - slope * mx,
        r_squared: sxy * sxy / (sxx * syy),
    }
}

/// Writes `rank TAB types TAB class` rows under a header.
pub fn write_zipf<W: Write>(mut out: W, table: &[ZipfRow], label: impl Fn(Tag) -> String) -> io::Result<()> {
    writeln!(out, "rank\ttypes\tclass")?;
    for r in table {
        writeln!(out, "{}\t{}\t{}", r.rank, r.types, join_labels(r.class.iter().map(&label)))?;
    }
    out.flush()
}

fn join_labels(labels: impl Iterator<Item = String>) -> String {
    labels.collect::<Vec<_>>().join(",")
}

/// How the member tags of the reported classes relate to gold labels.
#[derive(Debug, Clone, Copy)]
pub enum ClassTags<'a> {
    /// Members are gold label ids.
    Gold,
    /// Members are induced tags; `mapping[t]` is the gold label of tag `t`.
    Mapped(&'a [Option<u32>]),
    /// Induced tags with no gold reference; `names[t]` labels tag `t`.
    Named(&'a [String]),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TopWord {
    pub word: TypeId,
    pub surface: String,
    pub frequency: u32,
    /// Fraction of the word's tokens carrying each of the row's gold
    /// labels; empty without gold.
    pub proportions: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassRow {
    pub rank: usize,
    pub class: AmbiguityClass,
    /// Display labels of the class members; gold names when available.
    pub labels: Vec<String>,
    pub types: usize,
    pub top: Vec<TopWord>,
}

/// Per-class table: classes ranked by word-type count, with their most
/// frequent word types.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassReport {
    pub rows: Vec<ClassRow>,
}

impl ClassReport {
    pub fn new(corpus: &Corpus, classes: &[AmbiguityClass], tags: ClassTags<'_>, top_words: usize) -> Self {
        let mut members: rustc_hash::FxHashMap<AmbiguityClass, Vec<TypeId>> = Default::default();
        for (w, &c) in classes.iter().enumerate() {
            members.entry(c).or_default().push(w as TypeId);
        }
        let gold = corpus.gold();
        let gold_names = corpus.gold_tags();
        let rows = zipf_table(classes)
            .into_iter()
            .map(|z| {
                // Gold ids behind the row's labels, in member order, deduplicated.
                let mut gold_ids: Vec<u32> = Vec::new();
                let labels: Vec<String> = match tags {
                    ClassTags::Gold => z
                        .class
                        .iter()
                        .map(|g| {
                            gold_ids.push(g);
                            gold_names.get(g as usize).cloned().unwrap_or_else(|| g.to_string())
                        })
                        .collect(),
                    ClassTags::Mapped(mapping) => {
                        let mut out = Vec::new();
                        for t in z.class.iter() {
                            match mapping.get(t as usize).copied().flatten() {
                                Some(g) if !gold_ids.contains(&g) => {
                                    gold_ids.push(g);
                                    out.push(gold_names.get(g as usize).cloned().unwrap_or_else(|| g.to_string()));
                                }
                                Some(_) => {}
                                None => out.push(format!("#{t}")),
                            }
                        }
                        out
                    }
                    ClassTags::Named(names) => z
                        .class
                        .iter()
                        .map(|t| names.get(t as usize).cloned().unwrap_or_else(|| t.to_string()))
                        .collect(),
                };
                let mut words = members[&z.class].clone();
                words.sort_by(|&a, &b| {
                    corpus
                        .word_type(b)
                        .frequency
                        .cmp(&corpus.word_type(a).frequency)
                        .then(a.cmp(&b))
                });
                words.truncate(top_words);
                let top = words
                    .into_iter()
                    .map(|w| {
                        let wt = corpus.word_type(w);
                        let proportions = match gold {
                            Some(g) if !gold_ids.is_empty() => {
                                let sites = corpus.sites_of_type(w).expect("known type");
                                gold_ids
                                    .iter()
                                    .map(|&gid| {
                                        let hits = sites
                                            .iter()
                                            .filter(|s| g[s.sentence as usize][s.position as usize] == gid)
                                            .count();
                                        hits as f64 / sites.len() as f64
                                    })
                                    .collect()
                            }
                            _ => Vec::new(),
                        };
                        TopWord {
                            word: w,
                            surface: wt.surface.clone(),
                            frequency: wt.frequency,
                            proportions,
                        }
                    })
                    .collect();
                ClassRow {
                    rank: z.rank,
                    class: z.class,
                    labels,
                    types: z.types,
                    top,
                }
            })
            .collect();
        ClassReport { rows }
    }

    /// Writes `rank TAB tags TAB types TAB words` rows under a header.
    /// Tags are comma-separated; words are `surface (p1,p2,...)` joined by
    /// `", "`, with proportions to two decimals and omitted without gold.
    pub fn write_tsv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "rank\ttags\ttypes\twords")?;
        for r in &self.rows {
            let words: Vec<String> = r
                .top
                .iter()
                .map(|t| {
                    if t.proportions.is_empty() {
                        t.surface.clone()
                    } else {
                        let ps: Vec<String> = t.proportions.iter().map(|p| format!("{p:.2}")).collect();
                        format!("{} ({})", t.surface, ps.join(","))
                    }
                })
                .collect();
            writeln!(out, "{}\t{}\t{}\t{}", r.rank, r.labels.join(","), r.types, words.join(", "))?;
        }
        out.flush()
    }
}
