use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use thoth_core::learn::{load_samples, train};
use thoth_core::query::{format_errors, parse_query, parse_rule_document, Rule};
use thoth_core::rdf::vocab::{PrefixMap, BASE};
use thoth_core::rdf::{Iri, KnowledgeGraph, StreamStatement, TurtleReader};
use thoth_core::reason::{mot_constraints, stream_set, Engine};
use thoth_mot::io::{read_detections, write_assignments};
use thoth_mot::{deepsort_rules, parse_rules, run_tracker, sort_rules, TrackerConfig};
use thoth_sim::{csv_string, default_query, run_simulation, sweep, ScenarioConfig, Topology};
use thoth_swarm::check_against_centralized;
use thoth_swarm::workload::random_traffic;

#[derive(Parser)]
#[command(name = "thoth", version, about = "Semantic stream reasoning over camera swarms")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a query (`.rq`) or rule document (`.ttl`) and dump its AST.
    Parse { file: PathBuf },
    /// Run a rule program tick by tick over a timed stream document.
    Reason {
        #[arg(long)]
        program: PathBuf,
        #[arg(long)]
        stream: PathBuf,
        /// Evaluates ticks 0..ticks.
        #[arg(long)]
        ticks: u64,
        #[arg(long, default_value_t = 1000)]
        tick_ms: u64,
        /// Static knowledge graph in Turtle-star.
        #[arg(long)]
        graph: Option<PathBuf>,
    },
    /// Track detections with SORT-style rules.
    Track {
        #[arg(long)]
        detections: PathBuf,
        /// Rule file; defaults to the shipped SORT (or DeepSORT) set.
        #[arg(long, conflicts_with = "deepsort")]
        rules: Option<PathBuf>,
        #[arg(long)]
        deepsort: bool,
    },
    /// Learn soft-rule weights from labelled samples.
    Learn {
        #[arg(long)]
        program: PathBuf,
        /// Lines of `<input> <truth> <now> [<static>]`.
        #[arg(long)]
        samples: PathBuf,
        #[arg(long, default_value_t = 0.1)]
        lr: f64,
        #[arg(long, default_value_t = 1000)]
        max_iters: usize,
    },
    /// Compare federated and centralized answers on random traffic.
    FederateCheck {
        #[arg(long)]
        query: PathBuf,
        #[arg(long)]
        scenario: PathBuf,
    },
    /// Run the delay simulation, optionally over a list of camera counts.
    Simulate {
        #[arg(long)]
        scenario: PathBuf,
        /// Comma-separated camera counts; runs both topologies.
        #[arg(long, value_delimiter = ',')]
        sweep: Option<Vec<usize>>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn ssr_stream() -> Iri {
    Iri::new(format!("{BASE}ssr"))
}

fn load_program(path: &Path) -> Result<Vec<Rule>> {
    parse_rule_document(&read(path)?)
        .map_err(|e| anyhow::anyhow!("{}:\n{}", path.display(), format_errors(&e)))
}

fn emit(out: &str) -> Result<()> {
    let mut stdout = std::io::stdout().lock();
    stdout.write_all(out.as_bytes())?;
    stdout.flush()?;
    Ok(())
}

fn parse(file: &Path) -> Result<bool> {
    let text = read(file)?;
    let rule_doc = matches!(file.extension().and_then(|e| e.to_str()), Some("ttl" | "rules"));
    let dumped = if rule_doc {
        parse_rule_document(&text).map(|r| format!("{r:#?}\n"))
    } else {
        parse_query(&text).map(|q| format!("{q:#?}\n"))
    };
    match dumped {
        Ok(s) => {
            emit(&s)?;
            Ok(true)
        }
        Err(errs) => {
            eprintln!("{}", format_errors(&errs).trim_end());
            Ok(false)
        }
    }
}

fn reason(program: &Path, stream: &Path, ticks: u64, tick_ms: u64, graph: Option<&Path>) -> Result<()> {
    let rules = load_program(program)?;
    let reader = TurtleReader::default();
    let stmts = reader
        .parse_timed(&read(stream)?, &ssr_stream())
        .map_err(|e| anyhow::anyhow!("{}: {} at {}", stream.display(), e, e.position()))?;
    let streams = stream_set(&stmts)?;
    let graph: KnowledgeGraph = match graph {
        Some(p) => reader
            .parse(&read(p)?)
            .map_err(|e| anyhow::anyhow!("{}: {} at {}", p.display(), e, e.position()))?
            .into_iter()
            .collect(),
        None => KnowledgeGraph::new(),
    };
    let mut engine = Engine::new(rules).with_tick_ms(tick_ms);
    for now in 0..ticks {
        engine
            .evaluate_tick(&streams, &graph, now)
            .with_context(|| format!("tick {now}"))?;
    }
    let out = Iri::new(format!("{BASE}out"));
    let stmts: Vec<StreamStatement> = engine
        .output()
        .iter()
        .map(|e| StreamStatement {
            stream: out.clone(),
            element: e.clone(),
        })
        .collect();
    emit(&thoth_core::rdf::write_timed(&stmts, &PrefixMap::default()))
}

fn track(detections: &Path, rules: Option<&Path>, deepsort: bool) -> Result<()> {
    let f = std::fs::File::open(detections).with_context(|| format!("opening {}", detections.display()))?;
    let records = read_detections(f)?;
    let program = match rules {
        Some(p) => parse_rules(&read(p)?)?,
        None if deepsort => deepsort_rules(),
        None => sort_rules(),
    };
    let rows = run_tracker(&records, program, TrackerConfig::default())?;
    let mut buf = Vec::new();
    write_assignments(&mut buf, &rows)?;
    emit(std::str::from_utf8(&buf)?)
}

fn learn(program: &Path, samples: &Path, lr: f64, max_iters: usize) -> Result<bool> {
    let rules = load_program(program)?;
    let samples = load_samples(samples, &ssr_stream())?;
    let mut engine = Engine::new(rules).with_constraints(mot_constraints());
    let res = train(&mut engine, &samples, lr, max_iters)?;
    let mut out = String::new();
    for (id, w) in &res.weights {
        out.push_str(&format!("{id} {w:.6}\n"));
    }
    out.push_str(&format!("converged {}\nepochs {}\n", res.converged, res.loss_history.len()));
    let losses: Vec<String> = res.loss_history.iter().map(|l| l.to_string()).collect();
    out.push_str(&format!("loss {}\n", losses.join(" ")));
    emit(&out)?;
    Ok(res.converged)
}

fn federate_check(query: &Path, scenario: &Path) -> Result<bool> {
    let q = parse_query(&read(query)?).map_err(|e| anyhow::anyhow!("{}:\n{}", query.display(), format_errors(&e)))?;
    let cfg = ScenarioConfig::load(scenario)?;
    let edges = match cfg.topology {
        Topology::DC => 0,
        Topology::DEC => cfg.num_edges,
    };
    let sc = random_traffic(cfg.seed, edges, cfg.num_cameras);
    let (plan, run, central) = check_against_centralized(&q, &sc.state, &sc.streams, &sc.graph, sc.now, sc.tick_ms)?;
    let equal = run.result == central;
    let mut out = plan.describe();
    out.push_str(&format!(
        "messages {}\nfederated rows {}\ncentralized rows {}\nequal {equal}\n",
        run.messages,
        run.result.rows.len(),
        central.rows.len()
    ));
    out.push_str(&run.result.to_tsv());
    emit(&out)?;
    Ok(equal)
}

fn simulate(scenario: &Path, ns: Option<&[usize]>, out: Option<&Path>) -> Result<()> {
    let cfg = ScenarioConfig::load(scenario)?;
    let query = default_query();
    let rows = match ns {
        Some(ns) => sweep(&cfg, ns, &query)?,
        None => vec![run_simulation(&cfg, &query)?.summarize()],
    };
    match out {
        Some(p) => thoth_sim::emit_csv(&rows, p)?,
        None => emit(&csv_string(&rows))?,
    }
    Ok(())
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Parse { file } => parse(&file),
        Command::Reason {
            program,
            stream,
            ticks,
            tick_ms,
            graph,
        } => {
            if tick_ms == 0 {
                bail!("--tick-ms must be positive");
            }
            reason(&program, &stream, ticks, tick_ms, graph.as_deref()).map(|_| true)
        }
        Command::Track {
            detections,
            rules,
            deepsort,
        } => track(&detections, rules.as_deref(), deepsort).map(|_| true),
        Command::Learn {
            program,
            samples,
            lr,
            max_iters,
        } => learn(&program, &samples, lr, max_iters),
        Command::FederateCheck { query, scenario } => federate_check(&query, &scenario),
        Command::Simulate { scenario, sweep, out } => {
            simulate(&scenario, sweep.as_deref(), out.as_deref()).map(|_| true)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
