//! Command-line front end: ground, mis, query, rank, explain.
//!
//! Exit codes: 0 success, 1 I/O or internal error, 2 parse error, 3 cap
//! exceeded, 4 unsatisfiable hard constraints.

mod report;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use parakb::config::{load_config, parse_synonyms, ConfigError};
use parakb::grounding::{ground_fixpoint_with_provenance, GroundError, GroundedKB};
use parakb::oracle;
use parakb::parse::{parse_ground_atom, parse_kb, parse_query, ParseError};
use parakb::query::{justify, CompileContext, ScoredSummary, Unifier};
use parakb::worlds::{rank_candidates, rank_candidates_with, RankedAnswer, WorldsError};
use parakb::{Candidate, EngineConfig, KnowledgeBase, Query};
use parakb::config::SimilarityMetric;

#[derive(Parser)]
#[command(name = "parakb", version, about = "Query engine for error-tolerant knowledge bases")]
struct Cli {
    /// Engine configuration file (TOML); command-line flags override it
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Use the brute-force reference implementations (ground, mis, rank)
    #[arg(long, global = true)]
    oracle: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct QueryArgs {
    /// Knowledge-base file
    #[arg(long)]
    kb: PathBuf,
    /// Query file (one rule-shaped line)
    #[arg(long)]
    query: PathBuf,
    /// Synonyms file (`a = b` lines)
    #[arg(long)]
    synonyms: Option<PathBuf>,
    /// Similarity threshold in [0, 1]
    #[arg(long = "theta-r")]
    theta_r: Option<f64>,
    /// Top-k approximate matches per compiled query
    #[arg(long)]
    topk: Option<usize>,
    /// Compile the query and match approximately
    #[arg(long)]
    approx: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Expand a KB to its fixed point; print atoms with their provenance
    Ground {
        #[arg(long)]
        kb: PathBuf,
    },
    /// Print the minimal inconsistent subsets, one per line
    Mis {
        #[arg(long)]
        kb: PathBuf,
    },
    /// Answer a query; print each candidate with its evidence
    Query {
        #[command(flatten)]
        args: QueryArgs,
    },
    /// Rank candidates by possible-world probability
    Rank {
        #[command(flatten)]
        args: QueryArgs,
        /// Exact-enumeration cap on factor-graph atoms
        #[arg(long)]
        cap: Option<usize>,
        /// Also write the report to a file
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Print the full evidence chain for one candidate
    Explain {
        /// The candidate atom, e.g. `answer(tweety)`
        candidate: String,
        #[command(flatten)]
        args: QueryArgs,
        /// Exact-enumeration cap on factor-graph atoms
        #[arg(long)]
        cap: Option<usize>,
    },
}

enum CliError {
    Io(String),
    Parse(String),
    Cap(String),
    Unsatisfiable(String),
    Other(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Io(_) | CliError::Other(_) => 1,
            CliError::Parse(_) => 2,
            CliError::Cap(_) => 3,
            CliError::Unsatisfiable(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Io(m)
            | CliError::Parse(m)
            | CliError::Cap(m)
            | CliError::Unsatisfiable(m)
            | CliError::Other(m) => m,
        }
    }
}

impl From<ParseError> for CliError {
    fn from(e: ParseError) -> Self {
        CliError::Parse(e.to_string())
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Parse(e.to_string())
    }
}

impl From<GroundError> for CliError {
    fn from(e: GroundError) -> Self {
        CliError::Cap(e.to_string())
    }
}

impl From<WorldsError> for CliError {
    fn from(e: WorldsError) -> Self {
        match e {
            WorldsError::CapExceeded { .. } => CliError::Cap(e.to_string()),
            WorldsError::Unsatisfiable => CliError::Unsatisfiable(e.to_string()),
            WorldsError::ScopeMismatch(_) => CliError::Other(e.to_string()),
        }
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.exit_code())
        }
    }
}

fn load_engine_config(cli_config: &Option<PathBuf>) -> Result<EngineConfig, CliError> {
    let Some(path) = cli_config else {
        return Ok(EngineConfig::default());
    };
    let loaded = load_config::<f64>(&read(path)?)?;
    let mut config = loaded.config;
    if let Some(synonyms_file) = loaded.synonyms_file {
        // relative to the config file's directory
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        let synonyms_path = base.join(synonyms_file);
        config.similarity.synonyms = parse_synonyms(&read(&synonyms_path)?)?;
    }
    Ok(config)
}

fn apply_query_flags(config: &mut EngineConfig, args: &QueryArgs) -> Result<(), CliError> {
    if let Some(path) = &args.synonyms {
        config.similarity.synonyms = parse_synonyms(&read(path)?)?;
    }
    if let Some(theta_r) = args.theta_r {
        config.similarity.theta_r = theta_r;
    }
    if let Some(topk) = args.topk {
        config.top_k = topk;
    }
    config.similarity.validate()?;
    Ok(())
}

fn load_grounded(path: &Path, config: &EngineConfig) -> Result<(KnowledgeBase, GroundedKB), CliError> {
    let kb = parse_kb::<f64>(&read(path)?)?;
    let gkb = ground_fixpoint_with_provenance(&kb, &config.grounding())?;
    Ok((kb, gkb))
}

/// Exact path keeps the equivalence similarity (raw hypotheses); the
/// approximate path compiles the query and uses the weighted metric.
fn justification(
    kb: &KnowledgeBase,
    gkb: &GroundedKB,
    config: &EngineConfig,
    query: &Query,
    approx: bool,
) -> BTreeMap<Candidate, Vec<ScoredSummary<f64>>> {
    if approx {
        let ctx = CompileContext::new(kb, gkb, config);
        justify(
            gkb,
            query,
            &Unifier::Approx(&ctx, config.top_k),
            &config.similarity,
            SimilarityMetric::Weighted,
        )
    } else {
        justify(
            gkb,
            query,
            &Unifier::Exact,
            &config.similarity,
            SimilarityMetric::Equivalence,
        )
    }
}

fn oracle_rank(
    justification: &BTreeMap<Candidate, Vec<ScoredSummary<f64>>>,
    gkb: &GroundedKB,
    kb: &KnowledgeBase,
    config: &EngineConfig,
) -> Result<Vec<RankedAnswer<f64>>, CliError> {
    let priors = |fg: &parakb::FactorGraph, worlds: &[parakb::World]| {
        let table = oracle::enumerate_worlds(fg).ok_or(WorldsError::Unsatisfiable)?;
        Ok(worlds
            .iter()
            .map(|w| table[fg.mask_from_world(w) as usize].1)
            .collect())
    };
    rank_candidates_with(justification, gkb, kb, config, &priors).map_err(CliError::from)
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut config = load_engine_config(&cli.config)?;
    match cli.command {
        Command::Ground { kb } => {
            if cli.oracle {
                let parsed = parse_kb::<f64>(&read(&kb)?)?;
                let atoms = oracle::naive_ground(&parsed);
                print!("{}", report::ground_report_atoms_only(atoms.iter()));
            } else {
                let (_, gkb) = load_grounded(&kb, &config)?;
                print!("{}", report::ground_report(&gkb));
            }
        }
        Command::Mis { kb } => {
            if cli.oracle {
                let parsed = parse_kb::<f64>(&read(&kb)?)?;
                let mis = oracle::brute_force_mis(&parsed);
                print!("{}", report::mis_report(&mis));
            } else {
                let (_, gkb) = load_grounded(&kb, &config)?;
                print!("{}", report::mis_report(gkb.minimal_inconsistent_subsets()));
            }
        }
        Command::Query { args } => {
            apply_query_flags(&mut config, &args)?;
            let (kb, gkb) = load_grounded(&args.kb, &config)?;
            let query = parse_query(&read(&args.query)?)?;
            let j = justification(&kb, &gkb, &config, &query, args.approx);
            print!("{}", report::query_report(&query, &j, config.likelihood));
        }
        Command::Rank { args, cap, report: report_path } => {
            apply_query_flags(&mut config, &args)?;
            if let Some(cap) = cap {
                config.enumeration_cap = cap;
            }
            let (kb, gkb) = load_grounded(&args.kb, &config)?;
            let query = parse_query(&read(&args.query)?)?;
            let j = justification(&kb, &gkb, &config, &query, args.approx);
            let ranked = if cli.oracle {
                oracle_rank(&j, &gkb, &kb, &config)?
            } else {
                rank_candidates(&j, &gkb, &kb, &config)?
            };
            let text = report::rank_report(&query, &ranked, &j, config.likelihood);
            if let Some(path) = report_path {
                std::fs::write(&path, &text)
                    .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
            }
            print!("{text}");
        }
        Command::Explain { candidate, args, cap } => {
            apply_query_flags(&mut config, &args)?;
            if let Some(cap) = cap {
                config.enumeration_cap = cap;
            }
            let (kb, gkb) = load_grounded(&args.kb, &config)?;
            let query = parse_query(&read(&args.query)?)?;
            let candidate = Candidate(parse_ground_atom(&candidate)?);
            let j = justification(&kb, &gkb, &config, &query, args.approx);
            let summaries = j.get(&candidate);
            let ranked = if summaries.is_some() {
                let answers = if cli.oracle {
                    oracle_rank(&j, &gkb, &kb, &config)?
                } else {
                    rank_candidates(&j, &gkb, &kb, &config)?
                };
                answers.into_iter().find(|a| a.candidate == candidate)
            } else {
                None
            };
            print!(
                "{}",
                report::explain_report(
                    &query,
                    &candidate,
                    &gkb,
                    summaries,
                    ranked.as_ref(),
                    config.likelihood
                )
            );
        }
    }
    Ok(())
}
