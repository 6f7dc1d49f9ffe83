use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use factforge::bench::{synthesize_benchmark, write_synthesis, GenEndpointConfig, Generator};
use factforge::eval::{read_mcq_jsonl, McqMode};
use factforge::experiment::{
    evaluate_run, make_subsets, novel_facts, obtain_base, regress_sweep, run_seed, run_sweep, train_on_records,
    write_report, ModelEntry, SweepSpec, WorldBase,
};
use factforge::facts::{extract, parse_delta_stream, read_triples_jsonl, write_jsonl, FilterConfig, LabelMap};
use factforge::model::Tokenizer;
use factforge::train::TrainedAdapter;
use factforge::{Error, Result};

#[derive(Parser)]
#[command(name = "factforge", version, about = "Novel-fact benchmarks and prefix capacity sweeps")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Sweep config file plus `key.path=value` overrides.
#[derive(clap::Args)]
struct ConfigArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl ConfigArgs {
    fn load(&self) -> Result<SweepSpec> {
        match &self.config {
            Some(p) => SweepSpec::load(p, &self.overrides),
            None => SweepSpec::from_toml_str("", &self.overrides),
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Choice,
    Completion,
}

#[derive(Subcommand)]
enum Command {
    /// Filter, resolve and deduplicate a delta stream into triples.
    Extract {
        #[arg(long)]
        deltas: PathBuf,
        #[arg(long)]
        labels: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        quarantine: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Sample novel facts of the synthetic world as triples.
    World {
        #[arg(long, default_value_t = 50)]
        count: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Build benchmark records from triples.
    Synthesize {
        #[arg(long)]
        triples: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Completion endpoint; mock generation when absent.
        #[arg(long)]
        endpoint: Option<String>,
        #[arg(long, default_value = "default")]
        model_name: String,
    },
    /// Print the fact subsets used for one k.
    Subsets {
        #[arg(long)]
        facts: usize,
        #[arg(long)]
        k: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Pretrain (or load) the first model of the config and save it.
    Pretrain {
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Train one adapter, using the first model and adapter setting of the config.
    Train {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Fact ids to train on; defaults to the first k=1 subset.
        #[arg(long, value_delimiter = ',')]
        facts: Vec<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate a trained adapter on its facts.
    Evaluate {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        adapter: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        facts: Vec<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a full sweep.
    Sweep {
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Aggregate a finished sweep.
    Report { sweep_dir: PathBuf },
    /// MCQ accuracy of sampled adapters on an external question set.
    Regress {
        sweep_dir: PathBuf,
        #[arg(long)]
        mcq: PathBuf,
        #[arg(long, default_value_t = 5)]
        per_k: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value = "choice")]
        mode: Mode,
    },
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|e| Error::io(path, e))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

fn print_json<T: serde::Serialize>(v: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(v)?;
    writeln!(std::io::stdout().lock(), "{text}").map_err(|e| Error::io("<stdout>", e))
}

fn first_model(spec: &SweepSpec) -> Result<&ModelEntry> {
    spec.models.first().ok_or_else(|| Error::Config("no model configured".into()))
}

fn pick_records(
    spec: &SweepSpec,
    ids: &[String],
) -> Result<(Vec<factforge::bench::FactRecord>, Vec<factforge::bench::FactRecord>)> {
    let all = factforge::bench::read_dataset(&spec.dataset)?;
    let picked = if ids.is_empty() {
        let first = make_subsets(all.len(), 1, spec.seed)?;
        vec![all[first[0][0]].clone()]
    } else {
        ids.iter()
            .map(|id| {
                all.iter()
                    .find(|r| &r.id == id)
                    .cloned()
                    .ok_or_else(|| Error::Config(format!("fact `{id}` is not in {}", spec.dataset.display())))
            })
            .collect::<Result<Vec<_>>>()?
    };
    Ok((all, picked))
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Extract {
            deltas,
            labels,
            out,
            quarantine,
            seed,
        } => {
            let parsed = parse_delta_stream(open(&deltas)?)?;
            let labels = LabelMap::from_jsonl(open(&labels)?)?;
            let ex = extract(&parsed, &labels, &FilterConfig::default(), seed);
            write_jsonl(create(&out)?, &ex.triples)?;
            if let Some(q) = quarantine {
                write_jsonl(create(&q)?, &ex.quarantine)?;
            }
            print_json(&serde_json::json!({
                "triples": ex.triples.len(),
                "quarantined": ex.quarantine.len(),
                "rejected": ex.rejected,
                "duplicates_dropped": ex.duplicates_dropped,
                "diagnostics": parsed.diagnostics,
            }))?;
        }
        Command::World { count, seed, out } => {
            let facts = novel_facts(&WorldBase::default(), count, seed);
            write_jsonl(create(&out)?, &facts)?;
            eprintln!("wrote {} facts to {}", facts.len(), out.display());
        }
        Command::Synthesize {
            triples,
            out,
            seed,
            endpoint,
            model_name,
        } => {
            let triples = read_triples_jsonl(open(&triples)?)?;
            let cfg = match endpoint {
                Some(url) => GenEndpointConfig {
                    model_name,
                    ..GenEndpointConfig::remote(url)
                },
                None => GenEndpointConfig::mock(),
            };
            let syn = synthesize_benchmark(&triples, &Generator::new(cfg, seed)?)?;
            write_synthesis(&out, &syn)?;
            print_json(&syn.summary)?;
        }
        Command::Subsets { facts, k, seed } => {
            let mut out = std::io::stdout().lock();
            for s in make_subsets(facts, k, seed)? {
                writeln!(out, "{}", serde_json::to_string(&s)?).map_err(|e| Error::io("<stdout>", e))?;
            }
        }
        Command::Pretrain { cfg } => {
            let spec = cfg.load()?;
            let (_, path) = obtain_base(first_model(&spec)?, &spec.out_dir.join("bases"))?;
            println!("{}", path.display());
        }
        Command::Train { cfg, facts, out } => {
            let spec = cfg.load()?;
            let entry = first_model(&spec)?;
            let (model, _) = obtain_base(entry, &spec.out_dir.join("bases"))?;
            let (_, records) = pick_records(&spec, &facts)?;
            let setting = spec.settings(&entry.config)?.remove(0);
            let mut train = spec.train.clone();
            train.seed = run_seed(spec.seed, "train");
            let (adapter, trace) = train_on_records(&model, &Tokenizer::bytes(), &setting.spec, &records, &train)?;
            fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
            adapter.save(&out.join("adapter.json"))?;
            serde_json::to_writer_pretty(create(&out.join("trace.json"))?, &trace)?;
            eprintln!(
                "final loss {:.5} after {} epochs; adapter in {}",
                trace.final_loss,
                trace.epochs_run,
                out.display()
            );
        }
        Command::Evaluate {
            cfg,
            adapter,
            facts,
            out,
        } => {
            let spec = cfg.load()?;
            let entry = first_model(&spec)?;
            let (model, base_path) = obtain_base(entry, &spec.out_dir.join("bases"))?;
            let (all, records) = pick_records(&spec, &facts)?;
            let tok = Tokenizer::bytes();
            let baseline = factforge::experiment::evaluate_baseline(&entry.name, &base_path, &model, &tok, &all, &spec)?;
            let baseline: std::collections::HashMap<_, _> = baseline.per_fact_correct.into_iter().collect();
            let trained: TrainedAdapter<f32> = TrainedAdapter::load(&adapter)?;
            let loss = factforge::train::batch_loss(
                &model,
                trained.as_adapter(),
                &records
                    .iter()
                    .map(|r| tok.encode(&r.training_sentence))
                    .collect::<Result<Vec<_>>>()?,
            )?;
            let report = evaluate_run("cli", &model, &tok, &trained, &records, loss, Some(&baseline), &spec)?;
            match out {
                Some(p) => serde_json::to_writer_pretty(create(&p)?, &report)?,
                None => print_json(&report)?,
            }
        }
        Command::Sweep { cfg } => {
            let spec = cfg.load()?;
            let outcome = run_sweep(&spec)?;
            eprintln!(
                "{} runs ok, {} failed; results in {}",
                outcome.rows.len(),
                outcome.failures.len(),
                outcome.out_dir.display()
            );
            for f in &outcome.failures {
                eprintln!("  {}: {}", f.run, f.error);
            }
            if outcome.all_failed() {
                return Ok(ExitCode::FAILURE);
            }
        }
        Command::Report { sweep_dir } => {
            let rows = write_report(&sweep_dir)?;
            eprintln!("{} aggregate rows written to {}", rows.len(), sweep_dir.display());
        }
        Command::Regress {
            sweep_dir,
            mcq,
            per_k,
            seed,
            mode,
        } => {
            let items = read_mcq_jsonl(open(&mcq)?)?;
            let mode = match mode {
                Mode::Choice => McqMode::Choice,
                Mode::Completion => McqMode::Completion,
            };
            for r in regress_sweep(&sweep_dir, &items, mode, per_k, seed)? {
                println!("k={:<4} {:<32} base {:.3} tuned {:.3} delta {:+.3}", r.k, r.run, r.base_acc, r.tuned_acc, r.delta);
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
