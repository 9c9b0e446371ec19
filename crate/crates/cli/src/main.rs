use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use prc_core::pipeline::report::write_pcsi_csv;
use prc_core::pipeline::{Pipeline, PipelineConfig, Stage};
use prc_core::{Error, Result};

#[derive(Parser)]
#[command(
    name = "prc",
    version,
    about = "Peer-review comment analytics pipeline"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Options shared by every subcommand. Each flag overrides a config key.
#[derive(Args, Clone, Debug)]
struct Common {
    /// Pipeline configuration file (TOML).
    #[arg(short, long, default_value = "prc.toml")]
    config: PathBuf,
    /// Global seed (`seed`).
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (`output_dir`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Articles JSONL (`corpus.articles`).
    #[arg(long)]
    articles: Option<PathBuf>,
    /// Review reports JSONL (`corpus.reviews`).
    #[arg(long)]
    reviews: Option<PathBuf>,
    /// Bibliographic records JSONL (`corpus.bib`).
    #[arg(long)]
    bib: Option<PathBuf>,
    /// Explicit position rule file (`rules.extraction`).
    #[arg(long)]
    rules: Option<PathBuf>,
    /// Arbitrary override, e.g. `--set han.epochs=5`; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Log verbosity: -v info, -vv debug.
    #[arg(short, long, action = clap::ArgAction::Count)]
    verbose: u8,
}

#[derive(Subcommand)]
enum Command {
    /// Load articles and review reports and split comments.
    Ingest(Common),
    /// Label sections from their titles.
    LabelStructures(Common),
    /// Train the section classifier.
    TrainHan {
        #[command(flatten)]
        common: Common,
        /// Training epochs (`han.epochs`).
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Assign unlabeled sections with the trained classifier.
    ClassifyOthers(Common),
    /// Extract position mentions and attribute comments to structures.
    ExtractPositions {
        #[command(flatten)]
        common: Common,
        /// Counting unit: `comment` or `mention` (`rules.unit`).
        #[arg(long)]
        unit: Option<String>,
    },
    /// Structure distribution per year and corpus.
    Distribution(Common),
    /// Feature words per structure.
    FeatureWords {
        #[command(flatten)]
        common: Common,
        /// Top-k cut for both rankings (`features.k`).
        #[arg(long)]
        k: Option<usize>,
        /// Words per structure in the table (`features.top`).
        #[arg(long)]
        top: Option<usize>,
    },
    /// Cluster abstracts into topics over a threshold grid.
    ClusterTopics {
        #[command(flatten)]
        common: Common,
        /// Similarity thresholds as start:stop:step (`clustering.grid`).
        #[arg(long)]
        threshold_grid: Option<String>,
    },
    /// Normalize citations within topic-year groups and write pcsi.csv.
    NormalizeCitations(Common),
    /// Correlation tests and regression models.
    Correlate {
        #[command(flatten)]
        common: Common,
        /// Number of citation partitions (`correlation.partitions`).
        #[arg(long)]
        partitions: Option<usize>,
        /// Partition ranks compared by the two-sample test, e.g. `1,3`
        /// (`correlation.compare`).
        #[arg(long, value_delimiter = ',')]
        compare: Option<Vec<usize>>,
    },
    /// Write report.json, tables and figures.
    Report(Common),
    /// Full pipeline; requires --seed.
    Run(Common),
}

fn quoted(s: &str) -> String {
    format!("{s:?}")
}

fn path_value(p: &std::path::Path) -> String {
    quoted(&p.to_string_lossy())
}

fn load_config(common: &Common, extra: &[(&str, Option<String>)]) -> Result<PipelineConfig> {
    let mut config = PipelineConfig::load(&common.config)?;
    let mut sets: Vec<String> = Vec::new();
    if let Some(s) = common.seed {
        sets.push(format!("seed={s}"));
    }
    for (key, value) in [
        ("output_dir", &common.out),
        ("corpus.articles", &common.articles),
        ("corpus.reviews", &common.reviews),
        ("corpus.bib", &common.bib),
        ("rules.extraction", &common.rules),
    ] {
        if let Some(p) = value {
            sets.push(format!("{key}={}", path_value(p)));
        }
    }
    for (key, value) in extra {
        if let Some(v) = value {
            sets.push(format!("{key}={v}"));
        }
    }
    sets.extend(common.overrides.iter().cloned());
    for s in &sets {
        config.set(s)?;
    }
    Ok(config)
}

fn execute(command: Command) -> Result<()> {
    let (common, stage, extra): (Common, Stage, Vec<(&str, Option<String>)>) = match command {
        Command::Ingest(c) => (c, Stage::Ingest, vec![]),
        Command::LabelStructures(c) => (c, Stage::Label, vec![]),
        Command::TrainHan { common, epochs } => (
            common,
            Stage::Train,
            vec![("han.epochs", epochs.map(|v| v.to_string()))],
        ),
        Command::ClassifyOthers(c) => (c, Stage::Classify, vec![]),
        Command::ExtractPositions { common, unit } => (
            common,
            Stage::Extract,
            vec![("rules.unit", unit.as_deref().map(quoted))],
        ),
        Command::Distribution(c) => (c, Stage::Distribution, vec![]),
        Command::FeatureWords { common, k, top } => (
            common,
            Stage::Features,
            vec![
                ("features.k", k.map(|v| v.to_string())),
                ("features.top", top.map(|v| v.to_string())),
            ],
        ),
        Command::ClusterTopics {
            common,
            threshold_grid,
        } => (
            common,
            Stage::Cluster,
            vec![("clustering.grid", threshold_grid.as_deref().map(quoted))],
        ),
        Command::NormalizeCitations(c) => (c, Stage::Normalize, vec![]),
        Command::Correlate {
            common,
            partitions,
            compare,
        } => {
            if compare.as_ref().is_some_and(|c| c.len() != 2) {
                return Err(Error::Config(
                    "--compare takes two partition ranks, e.g. 1,9".into(),
                ));
            }
            (
                common,
                Stage::Correlate,
                vec![
                    ("correlation.partitions", partitions.map(|v| v.to_string())),
                    ("correlation.compare", compare.map(|v| format!("{v:?}"))),
                ],
            )
        }
        Command::Report(c) => (c, Stage::Report, vec![]),
        Command::Run(c) => {
            if c.seed.is_none() {
                return Err(Error::Config("`run` requires --seed".into()));
            }
            (c, Stage::Report, vec![])
        }
    };
    init_logging(common.verbose);
    let config = load_config(&common, &extra)?;
    if stage == Stage::Report {
        config.require_seed()?;
    }
    let mut p = Pipeline::new(config)?;
    summarize(&mut p, stage)
}

fn summarize(p: &mut Pipeline, stage: Stage) -> Result<()> {
    match stage {
        Stage::Ingest => {
            let v = p.ingest()?;
            let comments: usize = v.reports.iter().map(|r| r.comments.len()).sum();
            println!(
                "articles {}  reports {}  comments {comments}",
                v.articles.len(),
                v.reports.len()
            );
        }
        Stage::Label => {
            let v = p.label()?;
            let [i, m, r, d] = v.counts.counts;
            println!("I {i}  M {m}  R {r}  D {d}  others {}", v.counts.others);
        }
        Stage::Train => {
            let v = p.train()?;
            println!("best epoch {}  split sizes {:?}", v.best_epoch, v.sizes);
            if let Some(m) = &v.test_metrics {
                println!(
                    "test macro-F1 {:.4}  accuracy {:.4}",
                    m.macro_f1, m.accuracy
                );
            }
            println!("model {}", p.output_dir().join("han_model.json").display());
        }
        Stage::Classify => {
            let v = p.classify()?;
            let [i, m, r, d] = v.assigned;
            println!("assigned  I {i}  M {m}  R {r}  D {d}");
        }
        Stage::Extract => {
            let v = p.extract()?;
            let total = v.attribution.comments.len();
            let covered = v
                .attribution
                .comments
                .iter()
                .filter(|c| c.is_covered())
                .count();
            println!(
                "comments {total}  covered {covered}  unresolved mentions {}",
                v.unresolved_mentions
            );
        }
        Stage::Distribution => {
            let v = p.distribution()?;
            println!("year,I,M,R,D,covered,total");
            for y in &v.years {
                let d = &y.distribution;
                let [i, m, r, dd] = d.counts;
                println!(
                    "{},{i},{m},{r},{dd},{},{}",
                    y.year, d.covered_comments, d.total_comments
                );
            }
        }
        Stage::Features => {
            let top = p.config().features.top;
            let v = p.features()?;
            for (label, word, _) in v.table_rows(top) {
                println!("{}\t{word}", label.code());
            }
        }
        Stage::Cluster => {
            let v = p.cluster()?;
            println!("threshold,clusters,dbi");
            for pt in &v.points {
                let dbi = pt.dbi.map_or_else(|| "None".to_string(), |d| d.to_string());
                println!("{},{},{dbi}", pt.threshold, pt.clusters);
            }
            println!(
                "selected threshold {}  clusters {}",
                v.best_threshold,
                v.clusters.len()
            );
        }
        Stage::Normalize => {
            let v = p.normalize()?;
            let dir = p.output_dir().join("tables");
            std::fs::create_dir_all(&dir)?;
            let path = dir.join("pcsi.csv");
            write_pcsi_csv(&path, &v)?;
            println!(
                "articles {}  topic-year groups {}  dropped {}",
                v.citations.len(),
                v.groups,
                v.dropped.len()
            );
            println!("{}", path.display());
        }
        Stage::Correlate => {
            let v = p.correlate()?;
            println!("variable,rho,p,n");
            for s in &v.spearman {
                let f = |x: Option<f64>| x.map_or_else(|| "None".to_string(), |x| x.to_string());
                println!("{},{},{},{}", s.variable, f(s.rho), f(s.p), s.n);
            }
            for note in &v.notes {
                println!("note: {note}");
            }
        }
        Stage::Report => {
            let r = p.report()?;
            for note in &r.notes {
                println!("note: {note}");
            }
            println!("{}", p.output_dir().join("report.json").display());
        }
    }
    Ok(())
}

fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .try_init();
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
