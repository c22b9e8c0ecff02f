use std::fmt::Write as _;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};
use lexhmm::corpus::{read_conllx, read_vertical, write_vertical};
use lexhmm::eval::{write_zipf, ClassReport, ClassTags, ContingencyTable};
use lexhmm::{
    extract_classes, power_law_fit, zipf_table, AmbiguityClass, Checkpoint, Corpus, EmissionMode, GoldColumn,
    LexiconSummary, Metrics, Model, SamplerKind, Trainer,
};

use crate::config::{Format, RunConfig};
use crate::{AnalyzeArgs, EvalArgs, TrainArgs};

pub fn load_corpus(path: &Path, format: Format, column: GoldColumn) -> Result<Corpus> {
    let first_line = || -> Result<Option<String>> {
        let f = File::open(path).with_context(|| format!("cannot read {}", path.display()))?;
        for line in BufReader::new(f).lines() {
            let line = line.with_context(|| format!("cannot read {}", path.display()))?;
            if !line.trim().is_empty() {
                return Ok(Some(line));
            }
        }
        Ok(None)
    };
    let format = match format {
        Format::Auto => match first_line()? {
            Some(l) if l.split('\t').count() == 10 => Format::Conllx,
            _ => Format::Vertical,
        },
        f => f,
    };
    let corpus = match format {
        Format::Conllx => read_conllx(path, column)?,
        _ => {
            let with_gold = first_line()?.is_some_and(|l| l.contains('\t'));
            read_vertical(path, with_gold)?
        }
    };
    Ok(corpus)
}

/// Reads a predicted tagging and checks it covers exactly `corpus`'s tokens.
fn load_tagging(path: &Path, corpus: &Corpus) -> Result<Corpus> {
    let pred = read_vertical(path, true).with_context(|| format!("malformed tagging {}", path.display()))?;
    if pred.fingerprint() != corpus.fingerprint() {
        bail!(
            "tagging {} does not have the same tokens as the corpus ({} vs {} tokens)",
            path.display(),
            pred.num_tokens(),
            corpus.num_tokens()
        );
    }
    Ok(pred)
}

fn prefixed(out: &mut String, prefix: &str, block: &impl std::fmt::Display) {
    for line in block.to_string().lines() {
        let _ = writeln!(out, "{prefix}{line}");
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("cannot write {}", path.display()))?,
    ))
}

fn resolve(args: &TrainArgs) -> Result<RunConfig> {
    let mut c = RunConfig::default();
    if let Some(path) = &args.config {
        c.apply_file(path)?;
    }
    macro_rules! flag {
        ($field:ident) => {
            if let Some(v) = &args.$field {
                c.$field = v.clone().into();
            }
        };
    }
    flag!(corpus);
    flag!(format);
    flag!(gold_column);
    flag!(tags);
    flag!(sampler);
    flag!(emission);
    flag!(particles);
    flag!(iterations);
    flag!(seed);
    flag!(p_geom);
    flag!(hyper_every);
    flag!(resample_threshold);
    flag!(threads);
    flag!(exact_weights);
    flag!(checkpoint_every);
    flag!(out);
    c.validate()?;
    Ok(c)
}

pub fn train(args: TrainArgs) -> Result<()> {
    let mut cfg = resolve(&args)?;
    let corpus_path = cfg.corpus.clone().expect("validated");
    let corpus = load_corpus(&corpus_path, cfg.format, cfg.gold_column)?;
    let num_tags = match (cfg.tags, corpus.gold()) {
        (Some(t), _) => t,
        (None, Some(_)) => corpus.gold_tags().len(),
        (None, None) => bail!("the corpus has no gold tags; set the tag count with --tags"),
    };
    cfg.tags = Some(num_tags);
    if cfg.sampler == SamplerKind::Local && cfg.emission == EmissionMode::CharLm {
        eprintln!("warning: the local sampler mixes poorly with the character emission model");
    }
    fs::create_dir_all(&cfg.out).with_context(|| format!("cannot create {}", cfg.out.display()))?;
    let sampler = cfg.sampler_config(num_tags);

    let mut trainer = match &args.resume {
        Some(path) => {
            let ck = Checkpoint::load(path).with_context(|| format!("cannot load checkpoint {}", path.display()))?;
            Trainer::resume(&corpus, sampler, &ck).context("cannot resume")?
        }
        None => Trainer::new(&corpus, sampler)?,
    };
    fs::write(cfg.out.join("config.txt"), cfg.to_string()).context("cannot write config.txt")?;
    let diag_path = cfg.out.join("diagnostics.log");
    let mut diagnostics = BufWriter::new(
        OpenOptions::new()
            .create(true)
            .write(true)
            .append(args.resume.is_some())
            .truncate(args.resume.is_none())
            .open(&diag_path)
            .with_context(|| format!("cannot write {}", diag_path.display()))?,
    );
    let ck_path = cfg.out.join("checkpoint.bin");
    while trainer.iteration() < cfg.iterations {
        let stats = trainer.step()?;
        writeln!(diagnostics, "{stats}")?;
        diagnostics.flush()?;
        eprintln!("{stats}");
        if cfg.checkpoint_every > 0 && stats.iteration.is_multiple_of(cfg.checkpoint_every) {
            trainer.checkpoint().save(&ck_path)?;
        }
    }
    trainer.checkpoint().save(&ck_path)?;
    let model = trainer.model();

    let tags = model.tags();
    write_vertical(create(&cfg.out.join("tags.txt"))?, &corpus, |s, p| tags[s][p].to_string())?;
    let observed = extract_classes(tags, &corpus)?;
    write_lexicon(&cfg.out.join("lexicon.tsv"), &corpus, model, &observed)?;

    if let Some(gold) = corpus.gold_flat() {
        let pred = model.tags_flat();
        let mut report = Metrics::new(&pred, &gold)?.to_string();
        report.push('\n');
        prefixed(&mut report, "lexicon_", &LexiconSummary::new(model.lexicon().classes()));
        prefixed(&mut report, "observed_", &LexiconSummary::new(&observed));
        let gold_classes = extract_classes(corpus.gold().expect("gold"), &corpus)?;
        prefixed(&mut report, "gold_", &LexiconSummary::new(&gold_classes));
        fs::write(cfg.out.join("metrics.txt"), &report).context("cannot write metrics.txt")?;
        print!("{report}");
    }
    Ok(())
}

/// `word TAB frequency TAB class TAB observed`: the committed class and the
/// tags the word actually carries, both comma-separated.
fn write_lexicon(path: &Path, corpus: &Corpus, model: &Model, observed: &[AmbiguityClass]) -> Result<()> {
    let mut out = create(path)?;
    writeln!(out, "word\tfrequency\tclass\tobserved")?;
    for (w, wt) in corpus.types().iter().enumerate() {
        writeln!(
            out,
            "{}\t{}\t{}\t{}",
            wt.surface,
            wt.frequency,
            model.lexicon().class_of(w as u32),
            observed[w]
        )?;
    }
    out.flush()?;
    Ok(())
}

pub fn eval(args: EvalArgs) -> Result<()> {
    let gold = load_corpus(&args.gold, args.gold_format, args.gold_column)?;
    let Some(gold_labels) = gold.gold() else {
        bail!("{} has no gold tags", args.gold.display());
    };
    let pred = load_tagging(&args.pred, &gold)?;
    let pred_labels = pred.gold().expect("read with tags");
    let flat_pred = pred.gold_flat().expect("read with tags");
    let flat_gold = gold.gold_flat().expect("gold");
    let mut report = Metrics::new(&flat_pred, &flat_gold)?.to_string();
    report.push('\n');
    let pred_classes = extract_classes(pred_labels, &gold)?;
    prefixed(&mut report, "pred_", &LexiconSummary::new(&pred_classes));
    prefixed(&mut report, "gold_", &LexiconSummary::new(&extract_classes(gold_labels, &gold)?));
    print!("{report}");
    if let Some(path) = &args.class_report {
        let mapping = ContingencyTable::new(&flat_pred, &flat_gold)?.mapping();
        ClassReport::new(&gold, &pred_classes, ClassTags::Mapped(&mapping), args.top).write_tsv(create(path)?)?;
    }
    Ok(())
}

pub fn analyze(args: AnalyzeArgs) -> Result<()> {
    let corpus = load_corpus(&args.corpus, args.format, args.gold_column)?;
    let pred = match &args.assignment {
        Some(path) => Some(load_tagging(path, &corpus)?),
        None => None,
    };
    let mapping;
    let (classes, tags, names): (Vec<AmbiguityClass>, ClassTags<'_>, &[String]) = match &pred {
        Some(p) => {
            let classes = extract_classes(p.gold().expect("read with tags"), &corpus)?;
            match corpus.gold_flat() {
                Some(gold) => {
                    mapping = ContingencyTable::new(&p.gold_flat().expect("read with tags"), &gold)?.mapping();
                    (classes, ClassTags::Mapped(&mapping), p.gold_tags())
                }
                None => (classes, ClassTags::Named(p.gold_tags()), p.gold_tags()),
            }
        }
        None => {
            let Some(gold) = corpus.gold() else {
                bail!("{} has no gold tags and no --assignment was given", args.corpus.display());
            };
            (extract_classes(gold, &corpus)?, ClassTags::Gold, corpus.gold_tags())
        }
    };
    fs::create_dir_all(&args.out).with_context(|| format!("cannot create {}", args.out.display()))?;
    ClassReport::new(&corpus, &classes, tags, args.top).write_tsv(create(&args.out.join("class_report.tsv"))?)?;
    let table = zipf_table(&classes);
    let label = |t: u32| names.get(t as usize).cloned().unwrap_or_else(|| t.to_string());
    write_zipf(create(&args.out.join("zipf.tsv"))?, &table, label)?;
    let fit = power_law_fit(&table);
    let mut summary = LexiconSummary::new(&classes).to_string();
    let _ = write!(
        summary,
        "\nzipf_slope={:.6}\nzipf_intercept={:.6}\nzipf_r_squared={:.6}\n",
        fit.slope, fit.intercept, fit.r_squared
    );
    fs::write(args.out.join("summary.txt"), &summary).context("cannot write summary.txt")?;
    print!("{summary}");
    Ok(())
}
