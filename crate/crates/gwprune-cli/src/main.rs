//! `gwprune` — samplers, exact tables, analytic functions, and verification
//! suites for pruned Galton-Watson tree processes.
//!
//! Output is one self-describing JSON header line followed by JSON-lines (or
//! raw tree strings where the payload is a tree per line); `--pretty` swaps
//! in a human-readable rendering. Identical arguments and seed reproduce
//! identical output, independently of `--threads`: sample `i` always draws
//! from the stream derived for replica `i`.
//!
//! Exit codes: 0 success, 1 verification failure, 2 usage or domain error,
//! 3 numeric or budget error.

use clap::{Parser, Subcommand, ValueEnum};
use gwprune::ascension::{
    sample_ascension_time, sample_pre_ascension_tree, simulate_ascension_path, PathOutcome,
};
use gwprune::kesten::{sample_gstar, sample_kesten};
use gwprune::oracle::{enumerate_trees, exact_law_table};
use gwprune::prune::{prune_once, sample_gw, sample_modified_gw, SampleBudget, Sampled};
use gwprune::rng::{parallel_replicas, replica_rng};
use gwprune::verify::{run_suite, suite_names, SuiteOptions, DEFAULT_SEED};
use gwprune::{Error, FiniteTree, OffspringDistribution};
use std::io::{BufRead, Write};

#[derive(Parser)]
#[command(
    name = "gwprune",
    version,
    about = "Pruned Galton-Watson tree processes"
)]
struct Cli {
    /// RNG seed; falls back to $GWPRUNE_SEED, then to a fixed default.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for Monte Carlo generation (any value reproduces the
    /// same output).
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,
    /// Human-readable output instead of JSON lines.
    #[arg(long, global = true, default_value_t = false)]
    pretty: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
enum TreeFormat {
    /// Balanced parentheses, e.g. `(()())`.
    #[default]
    Paren,
    /// Nested JSON arrays, e.g. `[[],[]]`.
    Json,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum AscensionMode {
    /// Exact ascension times by inverse-CDF sampling.
    Time,
    /// Grid simulation of the process with the absorbing infinite state.
    Path,
    /// The tree just before ascension, conditioned on the time `--u`.
    Pretree,
}

#[derive(Subcommand)]
enum Command {
    /// Sample Galton-Watson trees G(u), or modified trees when --alpha and
    /// --beta are given.
    Sample {
        #[arg(long)]
        dist: String,
        #[arg(long, required_unless_present = "alpha")]
        u: Option<f64>,
        /// First generation from the bridge law p_{alpha,beta}.
        #[arg(long, requires = "beta")]
        alpha: Option<f64>,
        #[arg(long, requires = "alpha")]
        beta: Option<f64>,
        #[arg(long, default_value_t = 1)]
        n: usize,
        /// Node budget per tree (required above u = 1).
        #[arg(long)]
        max_nodes: Option<usize>,
        /// Height budget per tree.
        #[arg(long)]
        height: Option<usize>,
        #[arg(long, value_enum, default_value_t)]
        format: TreeFormat,
    },
    /// Prune trees read from stdin, one per line.
    Prune {
        #[arg(long)]
        u: f64,
        #[arg(long, value_enum, default_value_t)]
        format: TreeFormat,
    },
    /// Exact law table of G(u) over trees within a node bound.
    Law {
        #[arg(long)]
        dist: String,
        #[arg(long)]
        u: f64,
        #[arg(long, default_value_t = 9)]
        max_nodes: usize,
    },
    /// Extinction probability F(u).
    Extinction {
        #[arg(long)]
        dist: String,
        #[arg(long)]
        u: f64,
    },
    /// Conjugate parameter û = u F(u).
    Conjugate {
        #[arg(long)]
        dist: String,
        #[arg(long)]
        u: f64,
    },
    /// Ascension-process sampling (times, paths, or pre-ascension trees).
    Ascension {
        #[arg(long)]
        dist: String,
        #[arg(long, value_enum)]
        mode: AscensionMode,
        #[arg(long, default_value_t = 1)]
        n: usize,
        /// Parameter grid `a:b:step` for --mode path.
        #[arg(long)]
        grid: Option<String>,
        /// Conditioning time for --mode pretree.
        #[arg(long)]
        u: Option<f64>,
        /// Node budget per path state.
        #[arg(long, default_value_t = 1_000_000)]
        max_nodes: usize,
    },
    /// Height-restricted Kesten tree (conditioned on non-extinction).
    Kesten {
        #[arg(long)]
        dist: String,
        #[arg(long)]
        height: usize,
        #[arg(long, default_value_t = 1)]
        n: usize,
    },
    /// The pruned conditioned tree G*(u).
    Gstar {
        #[arg(long)]
        dist: String,
        #[arg(long)]
        u: f64,
        #[arg(long, default_value_t = 1)]
        n: usize,
    },
    /// Enumerate all ordered rooted trees within a node bound.
    Enumerate {
        #[arg(long)]
        max_nodes: usize,
        #[arg(long, value_enum, default_value_t)]
        format: TreeFormat,
    },
    /// Run a named verification suite (see `--suite help` for names).
    Verify {
        #[arg(long)]
        suite: String,
        #[arg(long)]
        dist: Option<String>,
    },
}

fn main() {
    let cli = Cli::parse();
    std::process::exit(match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("gwprune: {e}");
            exit_code(&e)
        }
    });
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Domain(_) | Error::Parse(_) => 2,
        Error::Numeric(_) | Error::Resource(_) | Error::Budget(_) => 3,
    }
}

fn resolve_seed(cli: &Cli) -> Result<u64, Error> {
    if let Some(seed) = cli.seed {
        return Ok(seed);
    }
    match std::env::var("GWPRUNE_SEED") {
        Ok(raw) => raw
            .parse::<u64>()
            .map_err(|_| Error::Parse(format!("GWPRUNE_SEED=`{raw}` is not a 64-bit seed"))),
        Err(_) => Ok(DEFAULT_SEED),
    }
}

fn render_tree(t: &FiniteTree, format: TreeFormat) -> String {
    match format {
        TreeFormat::Paren => t.serialize(),
        TreeFormat::Json => t.to_json(),
    }
}

fn parse_tree(line: &str, format: TreeFormat) -> Result<FiniteTree, Error> {
    match format {
        TreeFormat::Paren => FiniteTree::parse(line),
        TreeFormat::Json => FiniteTree::parse_json(line),
    }
}

fn parse_grid(spec: &str) -> Result<Vec<f64>, Error> {
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() != 3 {
        return Err(Error::Parse(format!(
            "grid `{spec}` is not of the form a:b:step"
        )));
    }
    let nums: Vec<f64> = parts
        .iter()
        .map(|p| {
            p.trim()
                .parse::<f64>()
                .map_err(|_| Error::Parse(format!("bad grid number `{p}`")))
        })
        .collect::<Result<_, _>>()?;
    let (a, b, step) = (nums[0], nums[1], nums[2]);
    if step <= 0.0 || b < a {
        return Err(Error::Parse(format!(
            "grid `{spec}` must increase with a positive step"
        )));
    }
    let mut grid = Vec::new();
    let mut i = 0usize;
    loop {
        let x = a + step * i as f64;
        if x > b + 1e-9 {
            break;
        }
        grid.push(x.min(b));
        i += 1;
    }
    Ok(grid)
}

struct Out {
    pretty: bool,
    sink: std::io::BufWriter<std::io::Stdout>,
}

impl Out {
    fn new(pretty: bool) -> Self {
        Out {
            pretty,
            sink: std::io::BufWriter::new(std::io::stdout()),
        }
    }

    fn header(&mut self, command: &str, seed: u64, dist: Option<&str>) {
        if self.pretty {
            let dist = dist.unwrap_or("-");
            let _ = writeln!(
                self.sink,
                "# gwprune {} | {command} | dist {dist} | seed {seed}",
                env!("CARGO_PKG_VERSION"),
            );
        } else {
            let _ = writeln!(
                self.sink,
                "{}",
                serde_json::json!({
                    "tool": "gwprune",
                    "version": env!("CARGO_PKG_VERSION"),
                    "command": command,
                    "dist": dist,
                    "seed": seed,
                })
            );
        }
    }

    fn line(&mut self, s: &str) {
        let _ = writeln!(self.sink, "{s}");
    }
}

fn budget_from(max_nodes: Option<usize>, height: Option<usize>) -> SampleBudget {
    let mut budget = SampleBudget::default();
    if let Some(n) = max_nodes {
        budget = budget.with_node_cap(n);
    }
    if let Some(h) = height {
        budget = budget.with_height_cap(h);
    }
    budget
}

fn run(cli: Cli) -> Result<i32, Error> {
    let seed = resolve_seed(&cli)?;
    let threads = cli.threads.max(1);
    let mut out = Out::new(cli.pretty);
    match &cli.command {
        Command::Sample {
            dist,
            u,
            alpha,
            beta,
            n,
            max_nodes,
            height,
            format,
        } => {
            let d = OffspringDistribution::parse_literal(dist)?;
            let budget = budget_from(*max_nodes, *height);
            out.header("sample", seed, Some(dist));
            let samples: Vec<Result<Sampled, Error>> = match (alpha, beta) {
                (Some(a), Some(b)) => parallel_replicas(seed, *n, threads, |_, rng| {
                    sample_modified_gw(&d, *a, *b, budget, rng)
                }),
                _ => {
                    let u = u.expect("clap requires --u without --alpha");
                    parallel_replicas(seed, *n, threads, |_, rng| sample_gw(&d, u, budget, rng))
                }
            };
            let mut truncated = 0usize;
            for s in samples {
                let s = s?;
                truncated += usize::from(s.is_truncated());
                out.line(&render_tree(s.tree(), *format));
            }
            if truncated > 0 {
                eprintln!("gwprune: {truncated} of {n} samples were budget-truncated");
            }
            Ok(0)
        }
        Command::Prune { u, format } => {
            out.header("prune", seed, None);
            let stdin = std::io::stdin();
            for (i, line) in stdin.lock().lines().enumerate() {
                let line = line.map_err(|e| Error::Parse(format!("stdin: {e}")))?;
                if line.trim().is_empty() {
                    continue;
                }
                let tree = parse_tree(&line, *format)?;
                let mut rng = replica_rng(seed, i as u64);
                let pruned = prune_once(&tree, *u, &mut rng)?;
                out.line(&render_tree(&pruned, *format));
            }
            Ok(0)
        }
        Command::Law { dist, u, max_nodes } => {
            let d = OffspringDistribution::parse_literal(dist)?;
            let table = exact_law_table(&d, *u, *max_nodes)?;
            out.header("law", seed, Some(dist));
            if cli.pretty {
                let width = 2 * max_nodes + 2;
                for (tree, p) in table.sorted_entries() {
                    out.line(&format!("{tree:<width$}  {p:.12}"));
                }
                out.line(&format!(
                    "covered mass {:.12} over {} trees (<= {} nodes)",
                    table.covered_mass(),
                    table.entries().len(),
                    table.bound()
                ));
            } else {
                for line in table.to_json_lines().lines() {
                    out.line(line);
                }
                out.line(&serde_json::json!({ "covered_mass": table.covered_mass() }).to_string());
            }
            Ok(0)
        }
        Command::Extinction { dist, u } => {
            let d = OffspringDistribution::parse_literal(dist)?;
            let f = d.extinction_probability(*u)?;
            out.header("extinction", seed, Some(dist));
            out.line(&format!("{f}"));
            Ok(0)
        }
        Command::Conjugate { dist, u } => {
            let d = OffspringDistribution::parse_literal(dist)?;
            let uhat = d.conjugate(*u)?;
            out.header("conjugate", seed, Some(dist));
            out.line(&format!("{uhat}"));
            Ok(0)
        }
        Command::Ascension {
            dist,
            mode,
            n,
            grid,
            u,
            max_nodes,
        } => {
            let d = OffspringDistribution::parse_literal(dist)?;
            out.header("ascension", seed, Some(dist));
            match mode {
                AscensionMode::Time => {
                    let times: Vec<Result<f64, Error>> =
                        parallel_replicas(seed, *n, threads, |_, rng| {
                            sample_ascension_time(&d, rng)
                        });
                    for t in times {
                        out.line(&format!("{}", t?));
                    }
                    Ok(0)
                }
                AscensionMode::Path => {
                    let grid = parse_grid(grid.as_deref().ok_or_else(|| {
                        Error::Domain("--mode path needs --grid a:b:step".into())
                    })?)?;
                    let budget = SampleBudget::default().with_node_cap(*max_nodes);
                    let outcomes: Vec<Result<PathOutcome, Error>> =
                        parallel_replicas(seed, *n, threads, |_, rng| {
                            simulate_ascension_path(&d, &grid, budget, rng)
                        });
                    let mut exhausted = 0usize;
                    let single = *n == 1;
                    for (i, outcome) in outcomes.into_iter().enumerate() {
                        let outcome = outcome?;
                        exhausted += usize::from(outcome.is_exhausted());
                        let path = outcome.path();
                        if cli.pretty {
                            for (g, state) in path.grid().iter().zip(path.states()) {
                                out.line(&format!("path {i}: u = {g}: {}", state.encode()));
                            }
                        } else if single {
                            // Canonical form: one {u, state} record per grid point.
                            for line in path.to_json_lines().lines() {
                                out.line(line);
                            }
                        } else {
                            for (g, state) in path.grid().iter().zip(path.states()) {
                                out.line(
                                    &serde_json::json!({
                                        "replica": i,
                                        "u": g,
                                        "state": state.encode(),
                                    })
                                    .to_string(),
                                );
                            }
                        }
                    }
                    if exhausted > 0 {
                        eprintln!("gwprune: {exhausted} of {n} paths exhausted their budget");
                        return Err(Error::Budget(format!(
                            "{exhausted} paths were cut short; raise --max-nodes"
                        )));
                    }
                    Ok(0)
                }
                AscensionMode::Pretree => {
                    let a = u.ok_or_else(|| {
                        Error::Domain("--mode pretree needs the conditioning time --u".into())
                    })?;
                    let trees: Vec<Result<FiniteTree, Error>> =
                        parallel_replicas(seed, *n, threads, |_, rng| {
                            sample_pre_ascension_tree(&d, a, rng)
                        });
                    for t in trees {
                        out.line(&t?.serialize());
                    }
                    Ok(0)
                }
            }
        }
        Command::Kesten { dist, height, n } => {
            let d = OffspringDistribution::parse_literal(dist)?;
            out.header("kesten", seed, Some(dist));
            let samples =
                parallel_replicas(seed, *n, threads, |_, rng| sample_kesten(&d, *height, rng));
            for s in samples {
                out.line(&s?.serialize());
            }
            Ok(0)
        }
        Command::Gstar { dist, u, n } => {
            let d = OffspringDistribution::parse_literal(dist)?;
            out.header("gstar", seed, Some(dist));
            let samples = parallel_replicas(seed, *n, threads, |_, rng| sample_gstar(&d, *u, rng));
            for s in samples {
                out.line(&s?.serialize());
            }
            Ok(0)
        }
        Command::Enumerate { max_nodes, format } => {
            out.header("enumerate", seed, None);
            for t in enumerate_trees(*max_nodes, max_nodes.saturating_sub(1).max(1))? {
                out.line(&render_tree(&t, *format));
            }
            Ok(0)
        }
        Command::Verify { suite, dist } => {
            let options = SuiteOptions {
                seed,
                threads,
                dist: dist
                    .as_deref()
                    .map(OffspringDistribution::parse_literal)
                    .transpose()?,
            };
            if suite == "help" {
                out.header("verify", seed, dist.as_deref());
                for name in suite_names() {
                    out.line(name);
                }
                return Ok(0);
            }
            let reports = run_suite(suite, &options)?;
            out.header("verify", seed, dist.as_deref());
            let mut all_pass = true;
            for r in &reports {
                all_pass &= r.pass;
                if cli.pretty {
                    out.line(&format!(
                        "{} {} (statistic {:.6e}, threshold {:.6e}, n {})",
                        if r.pass { "PASS" } else { "FAIL" },
                        r.name,
                        r.statistic,
                        r.threshold,
                        r.n
                    ));
                } else {
                    out.line(&r.to_json());
                }
            }
            Ok(if all_pass { 0 } else { 1 })
        }
    }
}
