use std::error::Error;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use exchangeable::crp::{crp_sample, crp_validate, ewens_pitman_log_pmf};
use exchangeable::polya::{polya_count_log_pmf, polya_sample, polya_seq_log_pmf};
use exchangeable::rngdist::{replicate, sample_dirichlet_gamma, sample_dirichlet_stick};
use exchangeable::verify::{run_suite, Suite};
use exchangeable::weights::{block_count_prob, gem_sample, ranked_crp_weights, rho_k};
use exchangeable::{CountVector, CrpParams, LabelSequence, Partition, SignedLogValue, UrnParams};

mod output;

use output::{write_csv, write_json, Cell, Rendered};

/// Samplers, exact laws and verification suites for exchangeable random
/// sequences and partitions.
#[derive(Parser)]
#[command(name = "exchangeable", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Master seed. Defaults to 0; the environment is never consulted.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,

    /// Write to this file instead of standard output.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Draw samples.
    #[command(subcommand)]
    Sample(SampleCommand),
    /// Exact probabilities, as log and linear values.
    #[command(subcommand)]
    Pmf(PmfCommand),
    /// Ranked block weights of a CRP partition of n customers.
    Blockweights {
        #[command(flatten)]
        crp: CrpArgs,
        #[arg(long)]
        n: usize,
        #[command(flatten)]
        reps: Reps,
    },
    /// k-correlation function of the ranked weights at a point.
    Rho {
        #[command(flatten)]
        crp: CrpArgs,
        #[arg(long)]
        k: usize,
        #[arg(long, value_delimiter = ',', required = true, allow_negative_numbers = true)]
        x: Vec<f64>,
    },
    /// Expected count of blocks with the given sizes among n elements.
    Blockcount {
        #[command(flatten)]
        crp: CrpArgs,
        #[arg(long)]
        n: u64,
        #[arg(long, value_delimiter = ',', required = true)]
        sizes: Vec<u64>,
    },
    /// Run a verification suite and print one report per check.
    Verify {
        /// One of polya-exact, crp-exact, limits, dirichlet, gem, correlation.
        #[arg(long, value_parser = parse_suite)]
        suite: Suite,
    },
}

#[derive(Subcommand)]
enum SampleCommand {
    /// Label sequence of a Polya urn.
    Polya {
        #[command(flatten)]
        urn: UrnArgs,
        #[arg(long)]
        n: usize,
        #[command(flatten)]
        reps: Reps,
    },
    /// Chinese restaurant process partition.
    Crp {
        #[command(flatten)]
        crp: CrpArgs,
        #[arg(long)]
        n: usize,
        #[command(flatten)]
        reps: Reps,
    },
    /// Stick-breaking weights truncated at a depth, with residual mass.
    Gem {
        #[command(flatten)]
        crp: CrpArgs,
        #[arg(long)]
        depth: usize,
        #[command(flatten)]
        reps: Reps,
    },
    /// Dirichlet vector.
    Dirichlet {
        #[command(flatten)]
        urn: UrnArgs,
        #[arg(long, value_enum, default_value_t = Method::Gamma)]
        method: Method,
        #[command(flatten)]
        reps: Reps,
    },
}

#[derive(Subcommand)]
enum PmfCommand {
    /// Probability of a label sequence (1-based labels).
    PolyaSeq {
        #[command(flatten)]
        urn: UrnArgs,
        #[arg(long, value_delimiter = ',', required = true)]
        seq: Vec<usize>,
    },
    /// Probability of label counts.
    PolyaCounts {
        #[command(flatten)]
        urn: UrnArgs,
        #[arg(long, value_delimiter = ',', required = true)]
        counts: Vec<u64>,
    },
    /// Ewens-Pitman probability of a partition such as "[[1,3],[2]]".
    EwensPitman {
        #[command(flatten)]
        crp: CrpArgs,
        #[arg(long, value_parser = parse_partition)]
        partition: Partition,
    },
}

#[derive(Args)]
struct UrnArgs {
    /// Comma-separated positive weights.
    #[arg(long, value_delimiter = ',', required = true, allow_negative_numbers = true)]
    alphas: Vec<f64>,
}

impl UrnArgs {
    fn params(&self) -> exchangeable::Result<UrnParams> {
        UrnParams::new(self.alphas.clone())
    }
}

#[derive(Args)]
struct CrpArgs {
    #[arg(long, allow_negative_numbers = true)]
    alpha: f64,
    #[arg(long, allow_negative_numbers = true)]
    theta: f64,
}

impl CrpArgs {
    fn params(&self) -> exchangeable::Result<CrpParams> {
        crp_validate(self.alpha, self.theta)
    }
}

#[derive(Args)]
struct Reps {
    /// Independent replicas; replica r uses the stream derived from (seed, r).
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    reps: u64,
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Gamma,
    Stick,
}

fn parse_suite(s: &str) -> Result<Suite, String> {
    s.parse().map_err(|e: exchangeable::Error| e.to_string())
}

fn parse_partition(s: &str) -> Result<Partition, String> {
    serde_json::from_str(s).map_err(|e| e.to_string())
}

type Failure = Box<dyn Error>;

fn probability(value: SignedLogValue) -> Rendered {
    let (log_prob, prob) = (value.ln(), value.to_real());
    let mut r = Rendered::new(vec!["log_prob", "prob"]);
    r.json.push(json!({ "log_prob": log_prob, "prob": prob }));
    r.rows.push(vec![Cell::Float(log_prob), Cell::Float(prob)]);
    r
}

fn sample(cmd: &SampleCommand, seed: u64) -> Result<Rendered, Failure> {
    let out = match cmd {
        SampleCommand::Polya { urn, n, reps } => {
            let params = urn.params()?;
            let draws = replicate(seed, reps.reps as usize, |rng| polya_sample(&params, *n, rng));
            let mut r = Rendered::new(vec!["replica", "position", "label"]);
            for (i, seq) in draws.iter().enumerate() {
                let labels = seq.to_one_based();
                for (pos, &l) in labels.iter().enumerate() {
                    r.rows.push(vec![Cell::Int(i as u64), Cell::Int(pos as u64 + 1), Cell::Int(l as u64)]);
                }
                r.json.push(json!({ "replica": i, "sequence": labels }));
            }
            r
        }
        SampleCommand::Crp { crp, n, reps } => {
            let params = crp.params()?;
            let draws = replicate(seed, reps.reps as usize, |rng| crp_sample(&params, *n, rng));
            let mut r = Rendered::new(vec!["replica", "element", "block"]);
            for (i, pi) in draws.iter().enumerate() {
                for (e, &b) in pi.seating().iter().enumerate() {
                    r.rows.push(vec![Cell::Int(i as u64), Cell::Int(e as u64 + 1), Cell::Int(b as u64 + 1)]);
                }
                r.json.push(json!({ "replica": i, "partition": pi }));
            }
            r
        }
        SampleCommand::Gem { crp, depth, reps } => {
            let params = crp.params()?;
            let draws = replicate(seed, reps.reps as usize, |rng| gem_sample(&params, *depth, rng))
                .into_iter()
                .collect::<exchangeable::Result<Vec<_>>>()?;
            let mut r = Rendered::new(vec!["replica", "index", "weight", "residual"]);
            for (i, w) in draws.iter().enumerate() {
                for (j, &v) in w.weights().iter().enumerate() {
                    r.rows.push(vec![
                        Cell::Int(i as u64),
                        Cell::Int(j as u64 + 1),
                        Cell::Float(v),
                        Cell::Float(w.residual()),
                    ]);
                }
                r.json.push(json!({ "replica": i, "weights": w.weights(), "residual": w.residual() }));
            }
            r
        }
        SampleCommand::Dirichlet { urn, method, reps } => {
            let params = urn.params()?;
            let draws = replicate(seed, reps.reps as usize, |rng| match method {
                Method::Gamma => sample_dirichlet_gamma(params.alphas(), rng),
                Method::Stick => sample_dirichlet_stick(params.alphas(), rng),
            })
            .into_iter()
            .collect::<exchangeable::Result<Vec<_>>>()?;
            let mut r = Rendered::new(vec!["replica", "index", "value"]);
            for (i, x) in draws.iter().enumerate() {
                for (j, &v) in x.as_slice().iter().enumerate() {
                    r.rows.push(vec![Cell::Int(i as u64), Cell::Int(j as u64 + 1), Cell::Float(v)]);
                }
                r.json.push(json!({ "replica": i, "x": x.as_slice() }));
            }
            r
        }
    };
    Ok(out)
}

fn pmf(cmd: &PmfCommand) -> Result<Rendered, Failure> {
    let value = match cmd {
        PmfCommand::PolyaSeq { urn, seq } => {
            polya_seq_log_pmf(&urn.params()?, &LabelSequence::from_one_based(seq)?)?
        }
        PmfCommand::PolyaCounts { urn, counts } => polya_count_log_pmf(&urn.params()?, &CountVector::new(counts.clone()))?,
        PmfCommand::EwensPitman { crp, partition } => ewens_pitman_log_pmf(&crp.params()?, partition),
    };
    Ok(probability(value))
}

/// Returns whether everything that was checked passed.
fn run(cli: &Cli) -> Result<(Rendered, bool), Failure> {
    let rendered = match &cli.command {
        Command::Sample(cmd) => sample(cmd, cli.seed)?,
        Command::Pmf(cmd) => pmf(cmd)?,
        Command::Blockweights { crp, n, reps } => {
            let params = crp.params()?;
            let draws = replicate(cli.seed, reps.reps as usize, |rng| ranked_crp_weights(&params, *n, rng))
                .into_iter()
                .collect::<exchangeable::Result<Vec<_>>>()?;
            let mut r = Rendered::new(vec!["replica", "rank", "weight"]);
            for (i, w) in draws.iter().enumerate() {
                for (j, &v) in w.weights().iter().enumerate() {
                    r.rows.push(vec![Cell::Int(i as u64), Cell::Int(j as u64 + 1), Cell::Float(v)]);
                }
                r.json.push(json!({ "replica": i, "weights": w.weights(), "residual": w.residual() }));
            }
            r
        }
        Command::Rho { crp, k, x } => {
            if *k != x.len() {
                return Err(format!("--k is {k} but --x has {} values", x.len()).into());
            }
            let value = rho_k(&crp.params()?, x)?;
            let mut r = Rendered::new(vec!["k", "rho"]);
            r.json.push(json!({ "k": k, "x": x, "rho": value }));
            r.rows.push(vec![Cell::Int(*k as u64), Cell::Float(value)]);
            r
        }
        Command::Blockcount { crp, n, sizes } => {
            let value = block_count_prob(&crp.params()?, *n, sizes)?;
            let mut r = Rendered::new(vec!["prob", "log_prob"]);
            r.json.push(json!({ "n": n, "sizes": sizes, "prob": value, "log_prob": value.ln() }));
            r.rows.push(vec![Cell::Float(value), Cell::Float(value.ln())]);
            r
        }
        Command::Verify { suite } => {
            let reports = run_suite(suite.name(), cli.seed)?;
            let ok = reports.iter().all(|t| t.passed);
            let mut r = Rendered::new(vec!["name", "statistic", "threshold", "passed", "seed", "control", "details"]);
            for t in &reports {
                r.rows.push(vec![
                    Cell::Text(t.name.clone()),
                    Cell::Float(t.statistic),
                    Cell::Float(t.threshold),
                    Cell::Bool(t.passed),
                    Cell::Int(t.seed),
                    Cell::Bool(t.control),
                    Cell::Text(t.details.clone()),
                ]);
                r.json.push(serde_json::to_value(t)?);
            }
            return Ok((r, ok));
        }
    };
    Ok((rendered, true))
}

fn emit(cli: &Cli, rendered: &Rendered) -> io::Result<()> {
    let mut out: Box<dyn Write> = match &cli.output {
        Some(path) => Box::new(BufWriter::new(File::create(path)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    };
    match cli.format {
        Format::Json => write_json(&mut out, &rendered.json)?,
        Format::Csv => write_csv(&mut out, &rendered.header, &rendered.rows)?,
    }
    out.flush()
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(&cli) {
        Ok((rendered, ok)) => {
            if let Err(e) = emit(&cli, &rendered) {
                eprintln!("error: {e}");
                return ExitCode::from(2);
            }
            if ok {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
