use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use paretocat::instance::{load_instance, Instance, LoadOptions};
use paretocat::particle::{
    evolve_coefficients_exact, exact, markov_oracle, run_particle, total_variation, DEFAULT_BUDGET,
};
use paretocat::scale::{epsilon_interleaved, interleaving_distance};
use paretocat::summing::{SummingFunctor, DEFAULT_CAP};
use paretocat::swarm::{assess, run_swarm, SwarmConfig};

#[derive(Parser)]
#[command(name = "pareto-cat", version, about = "Pareto frontiers over finite resource categories")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Largest functor space that may be enumerated.
    #[arg(long, global = true, default_value_t = DEFAULT_CAP)]
    cap: usize,
    /// Add missing composite arrows before validating.
    #[arg(long, global = true)]
    close_hom: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Load and validate an instance.
    Validate { instance: PathBuf },
    /// Exact Pareto frontier.
    Frontier {
        instance: PathBuf,
        #[arg(long, value_enum, default_value = "json")]
        out: Format,
    },
    /// Probability of a strict improvement over one functor.
    Lambda {
        instance: PathBuf,
        /// Comma-separated singleton values, e.g. `1,0`.
        #[arg(long)]
        functor: String,
    },
    /// Run a single particle and compare its coefficients with the jump-chain simulation.
    Particle {
        instance: PathBuf,
        #[arg(long)]
        draws: usize,
        #[arg(long)]
        seed: Option<u64>,
        /// Also compute the coefficients in rational arithmetic.
        #[arg(long)]
        exact: bool,
        #[arg(long, default_value_t = 100_000)]
        trials: usize,
        #[arg(long, default_value_t = DEFAULT_BUDGET)]
        budget: usize,
    },
    /// Run the particle swarm.
    Swarm {
        instance: PathBuf,
        #[arg(long)]
        particles: usize,
        #[arg(long)]
        draws: usize,
        #[arg(long)]
        epsilon: usize,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = DEFAULT_BUDGET)]
        budget: usize,
        /// Report path; a CSV of the flags is written next to it.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Interleaving distance between the scale profiles of two functors.
    Interleave {
        instance: PathBuf,
        #[arg(long)]
        a: String,
        #[arg(long)]
        b: String,
        #[arg(long, default_value_t = 0)]
        objective: usize,
    },
    /// Asymptotic conversion rate between two resources.
    Rate {
        instance: PathBuf,
        #[arg(long)]
        a: usize,
        #[arg(long)]
        b: usize,
        #[arg(long, default_value_t = 16)]
        n_max: usize,
    },
}

struct Failure(String);

impl<E: std::fmt::Display> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure(e.to_string())
    }
}

type Outcome = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    let opts = LoadOptions {
        close_hom: cli.close_hom,
        cap: cli.cap,
    };
    match run(cli.command, opts) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

fn print(v: &impl Serialize) {
    println!("{}", serde_json::to_string_pretty(v).expect("serializable"));
}

fn load(path: &Path, opts: LoadOptions) -> Result<Instance, Failure> {
    Ok(load_instance(path, opts)?)
}

fn seed_or_fresh(seed: Option<u64>) -> u64 {
    seed.unwrap_or_else(|| {
        let nanos = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map_or(0, |d| d.as_nanos() as u64);
        let s = nanos ^ (std::process::id() as u64).rotate_left(32);
        eprintln!("seed: {s}");
        s
    })
}

fn parse_functor(text: &str, inst: &Instance) -> Result<SummingFunctor, Failure> {
    let values = text
        .split(',')
        .map(|t| t.trim().parse::<usize>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| Failure(format!("functor {text:?}: {e}")))?;
    let phi = SummingFunctor::new(values);
    if inst.space.index_of(&phi).is_none() {
        return Err(Failure(format!(
            "functor {text:?} needs {} values below {}",
            inst.system_size,
            inst.category.objects()
        )));
    }
    Ok(phi)
}

fn run(command: Command, opts: LoadOptions) -> Outcome {
    match command {
        Command::Validate { instance } => match load_instance(&instance, opts) {
            Ok(inst) => {
                let land = inst.landscape();
                print(&json!({
                    "valid": true,
                    "name": inst.name,
                    "objects": inst.category.objects(),
                    "system_size": inst.system_size,
                    "functors": inst.space.len(),
                    "admissible": land.admissible_set().len(),
                    "objectives": inst.valuations.len(),
                    "scale": inst.scale.as_ref().map(|s| s.grid_len()),
                }));
                Ok(())
            }
            Err(e) => {
                print(&json!({ "valid": false, "class": e.class(), "issues": e.issues(), "message": e.to_string() }));
                Err(Failure(format!("{} error", e.class())))
            }
        },
        Command::Frontier { instance, out } => {
            let inst = load(&instance, opts)?;
            let land = inst.landscape();
            let frontier = land.pareto_frontier();
            match out {
                Format::Json => {
                    let classes: Vec<Value> = frontier
                        .classes
                        .iter()
                        .map(|c| {
                            json!({
                                "representative": c.representative,
                                "images": land.images(&c.representative).expect("in space"),
                                "members": c.members,
                            })
                        })
                        .collect();
                    print(&json!({ "size": frontier.members.len(), "classes": classes }));
                }
                Format::Csv => {
                    println!("class,functor,images");
                    for (i, c) in frontier.classes.iter().enumerate() {
                        for m in &c.members {
                            println!("{i},{},{}", join(m.values()), join(land.images(m).expect("in space")));
                        }
                    }
                }
            }
            Ok(())
        }
        Command::Lambda { instance, functor } => {
            let inst = load(&instance, opts)?;
            let land = inst.landscape();
            let phi = parse_functor(&functor, &inst)?;
            let lambda = land.lambda(&inst.distribution, &phi)?;
            let better = land.strict_minorization_set(&phi)?;
            print(&json!({
                "functor": phi,
                "images": land.images(&phi)?,
                "lambda": lambda,
                "strict_minorizations": better,
            }));
            Ok(())
        }
        Command::Particle { instance, draws, seed, exact: want_exact, trials, budget } => {
            let inst = load(&instance, opts)?;
            let land = inst.landscape();
            let seed = seed_or_fresh(seed);
            let trace = run_particle(&land, &inst.distribution, draws, seed, budget)?;
            let leading = &trace.lambdas[..draws];
            let empirical = markov_oracle(leading, trials, seed)?;
            let mut report = json!({
                "seed": seed,
                "trace": trace,
                "sum": trace.coeffs.iter().sum::<f64>(),
                "oracle": {
                    "trials": trials,
                    "empirical": empirical,
                    "total_variation": total_variation(&empirical, &trace.coeffs),
                },
            });
            if want_exact {
                let q: Vec<_> = leading.iter().map(|&l| exact(l)).collect();
                let c = evolve_coefficients_exact(&q)?;
                let sum = c.iter().fold(exact(0.0), |s, x| s + x);
                report["exact"] = json!({
                    "coeffs": c.iter().map(|x| x.to_string()).collect::<Vec<_>>(),
                    "sum": sum.to_string(),
                });
            }
            print(&report);
            Ok(())
        }
        Command::Swarm { instance, particles, draws, epsilon, seed, budget, out } => {
            let inst = load(&instance, opts)?;
            let scaled = inst
                .scale
                .as_ref()
                .ok_or_else(|| Failure("the instance has no scale section".into()))?;
            let land = inst.landscape();
            let mut config = SwarmConfig::new(particles, draws, epsilon, seed_or_fresh(seed));
            config.budget = budget;
            let report = run_swarm(&land, &inst.distribution, scaled, config)?;
            let frontier = land.pareto_frontier();
            let quality = assess(&land, scaled, &frontier, &report)?;
            let body = serde_json::to_string_pretty(&json!({ "report": report, "quality": quality }))?;
            match out {
                None => println!("{body}"),
                Some(path) => {
                    fs::write(&path, body + "\n")?;
                    let mut csv = String::from("particle,draw,functor,source,certified,witness\n");
                    for (f, ok) in report.flagged.iter().zip(&quality.certified) {
                        let witness: Vec<String> = f.witness.iter().map(|n| format!("{}:{}", n.particle, n.draw)).collect();
                        csv += &format!(
                            "{},{},{},{},{},{}\n",
                            f.particle,
                            f.draw,
                            join(f.functor.values()),
                            serde_json::to_value(f.source)?.as_str().unwrap_or_default(),
                            ok,
                            witness.join(" "),
                        );
                    }
                    fs::write(path.with_extension("csv"), csv)?;
                }
            }
            Ok(())
        }
        Command::Interleave { instance, a, b, objective } => {
            let inst = load(&instance, opts)?;
            let scaled = inst
                .scale
                .as_ref()
                .ok_or_else(|| Failure("the instance has no scale section".into()))?;
            let target = &inst
                .valuations
                .objectives()
                .get(objective)
                .ok_or_else(|| Failure(format!("objective {objective} does not exist")))?
                .target;
            let (pa, pb) = (parse_functor(&a, &inst)?, parse_functor(&b, &inst)?);
            let (ia, ib) = (inst.space.index_of(&pa).unwrap(), inst.space.index_of(&pb).unwrap());
            let (ya, yb) = (scaled.object(objective, ia), scaled.object(objective, ib));
            let by_eps = (0..scaled.grid_len())
                .map(|e| epsilon_interleaved(target, ya, yb, e))
                .collect::<Result<Vec<_>, _>>()?;
            print(&json!({
                "a": { "functor": pa, "profile": ya },
                "b": { "functor": pb, "profile": yb },
                "objective": objective,
                "distance": interleaving_distance(target, ya, yb)?,
                "interleaved_at": by_eps,
            }));
            Ok(())
        }
        Command::Rate { instance, a, b, n_max } => {
            let inst = load(&instance, opts)?;
            let k = inst.category.objects();
            if a >= k || b >= k {
                return Err(Failure(format!("objects must be below {k}")));
            }
            let rate = inst.category.conversion_rate(a, b, n_max);
            print(&json!({
                "a": a,
                "b": b,
                "n_max": n_max,
                "rate": rate.map(|r| r.to_string()),
                "value": rate.map(|r| *r.numer() as f64 / *r.denom() as f64),
            }));
            Ok(())
        }
    }
}

fn join(v: &[usize]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ")
}
