use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Parser, Subcommand};
use serde_json::json;

use paracalc::correctors::{regularity_gain_report, GainConfig, InputCorpus, OperatorId};
use paracalc::littlewood_paley::{decompose, default_window, estimate_regularity, Cutoff};
use paracalc::pcf::{self, Stored};
use paracalc::qpam_solver::{compare, reference_solver, ProblemSpec, Solver};
use paracalc::reference_data::{build_reference_data, read_store, sample_noise, verify_assumption_a, write_store, NoiseSpec};
use paracalc::torus_fields::{SpaceGrid, TimeGrid};
use paracalc::word_algebra::{generate_alphabet, Alphabet, AlphabetParams};
use paracalc::paraproducts::{Calculus, ProductRule};
use paracalc::{Error, Result};

#[derive(Parser)]
#[command(name = "paracalc", version, about = "Paracontrolled calculus on the periodic torus")]
struct Cli {
    /// Worker threads; all cores when omitted.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Dyadic block sups and L2 norms of a field as CSV.
    Decompose {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        report: PathBuf,
    },
    /// Regularity estimate by block regression, CSV on stdout or --out.
    Estimate {
        #[arg(long = "in")]
        input: PathBuf,
        /// Fit window j0:j1; [1, J-2] by default.
        #[arg(long = "alpha-window")]
        window: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Regularity-gain harness for one operator.
    TestOperator {
        #[arg(long)]
        op: String,
        /// Comma-separated input exponents; the operator's defaults when omitted.
        #[arg(long, allow_hyphen_values = true)]
        exponents: Option<String>,
        #[arg(long, default_value_t = 5)]
        trials: usize,
        #[arg(long)]
        seed: Option<u64>,
        /// log2 of the grid size.
        #[arg(long, default_value_t = 16)]
        log2n: u32,
        #[arg(long)]
        sharp: bool,
        #[arg(long)]
        edge_lacunary: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Truncated alphabet as JSON.
    Alphabet {
        #[arg(long)]
        alpha: f64,
        #[arg(long, default_value_t = 3)]
        order: u8,
        #[arg(long = "chain-cap", allow_hyphen_values = true)]
        chain_cap: i64,
        #[arg(long, default_value_t = 1)]
        axes: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate every letter of an alphabet on a mollified noise sample.
    BuildRefs {
        #[arg(long)]
        alphabet: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 0.125)]
        mol: f64,
        #[arg(long, default_value_t = 1.0)]
        amplitude: f64,
        #[arg(long)]
        time_dependent: bool,
        #[arg(long, default_value_t = 64)]
        n: usize,
        #[arg(long, default_value_t = 0.05)]
        t_end: f64,
        #[arg(long, default_value_t = 50)]
        steps: usize,
        /// Diffusivity of L.
        #[arg(long, default_value_t = 1.0)]
        c0: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Geometric envelope fit of letter norms against chain counts.
    VerifyAssumptionA {
        #[arg(long)]
        refs: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fixed-point solve of the quasilinear equation from a JSON config.
    SolveQpam {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Also run the direct solver and write the comparison.
        #[arg(long)]
        with_reference: bool,
    },
    /// Per-slice sup and L2 distances of two fields.
    Compare {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn seed_or_env(seed: Option<u64>) -> Result<u64> {
    if let Some(s) = seed {
        return Ok(s);
    }
    match std::env::var("PARACALC_SEED") {
        Ok(v) => v.trim().parse().map_err(|_| Error::Config(format!("PARACALC_SEED must be an unsigned integer, got '{v}'"))),
        Err(_) => Ok(0),
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, text)?;
    Ok(())
}

fn pretty(v: &impl serde::Serialize) -> String {
    serde_json::to_string_pretty(v).expect("serialisable report") + "\n"
}

fn parse_window(s: &str) -> Result<(i32, i32)> {
    let bad = || Error::Config(format!("window must look like j0:j1, got '{s}'"));
    let (a, b) = s.split_once(':').ok_or_else(bad)?;
    Ok((a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?))
}

fn parse_list(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|x| x.trim().parse::<f64>().map_err(|_| Error::Config(format!("bad exponent '{x}'"))))
        .collect()
}

/// Run timing and wall-clock data, kept apart from the deterministic outputs.
fn write_metadata(dir: &Path, command: &str, started: Instant) -> Result<()> {
    let now = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let meta = json!({
        "command": command,
        "finished_unix": now,
        "elapsed_seconds": started.elapsed().as_secs_f64(),
        "threads": rayon::current_num_threads(),
    });
    write_text(&dir.join("metadata.json"), &pretty(&meta))
}

fn run(cli: Cli) -> Result<()> {
    let started = Instant::now();
    match cli.command {
        Command::Decompose { input, report } => {
            let f = pcf::read(&input)?.final_slice();
            let d = decompose(&f);
            let mut csv = String::from("j,block_sup,block_l2\n");
            for (i, b) in d.blocks.iter().enumerate() {
                csv.push_str(&format!("{},{:.12e},{:.12e}\n", i as i32 - 1, b.sup_norm(), b.l2_norm()));
            }
            write_text(&report, &csv)
        }
        Command::Estimate { input, window, out } => {
            let f = pcf::read(&input)?.final_slice();
            let (j0, j1) = match window {
                Some(w) => parse_window(&w)?,
                None => default_window(f.grid()),
            };
            let est = estimate_regularity(&f, j0, j1)?;
            let csv = format!("# exponent={:.6} r2={:.6}\n{}", est.exponent, est.r2, est.to_csv());
            match out {
                Some(p) => write_text(&p, &csv),
                None => {
                    print!("{csv}");
                    Ok(())
                }
            }
        }
        Command::TestOperator { op, exponents, trials, seed, log2n, sharp, edge_lacunary, out } => {
            let id: OperatorId = op.parse()?;
            let exps = match exponents {
                Some(e) => parse_list(&e)?,
                None => id.default_exponents(),
            };
            if !(4..=20).contains(&log2n) {
                return Err(Error::Config(format!("log2n must lie in [4, 20], got {log2n}")));
            }
            let mut config = GainConfig { n: 1 << log2n, ..GainConfig::default() };
            config.j_min = config.j_min.min(log2n as i32 - 6).max(1);
            if sharp {
                config.cutoff = Cutoff::Sharp;
            }
            if edge_lacunary {
                config.corpus = InputCorpus::Lacunary;
            }
            let report = regularity_gain_report(id, &exps, seed_or_env(seed)?, trials, &config)?;
            println!("{} {:?} mean={:?} target={:?}", report.operator, report.verdict, report.mean, report.target);
            write_text(&out, &report.to_json())
        }
        Command::Alphabet { alpha, order, chain_cap, axes, out } => {
            let a = generate_alphabet(AlphabetParams { alpha, order, chain_cap, axes })?;
            println!("{} letters, {} excluded by the chain cap", a.len(), a.excluded.len());
            write_text(&out, &a.to_json())
        }
        Command::BuildRefs { alphabet, seed, mol, amplitude, time_dependent, n, t_end, steps, c0, out } => {
            let a = Alphabet::from_json(&fs::read_to_string(&alphabet)?)?;
            let spec = NoiseSpec { seed: seed_or_env(seed)?, mol, amplitude, time_dependent };
            let grid = SpaceGrid::new(a.params.axes, n)?;
            let noise = sample_noise(&spec, grid, TimeGrid::new(t_end, steps)?)?;
            let calc = Calculus::new(c0)?.with_rule(ProductRule::Collocation);
            let refs = build_reference_data(&calc, &a, &noise)?;
            write_store(&out, &spec, c0, &a, &refs)?;
            write_metadata(&out, "build-refs", started)
        }
        Command::VerifyAssumptionA { refs, out } => {
            let (_, _, a, data) = read_store(&refs)?;
            let fit = verify_assumption_a(&a, &data)?;
            println!("k={:.6e} C={:.6} r2={:.4} satisfied={}", fit.k_fit, fit.c_fit, fit.r2, fit.satisfied);
            write_text(&out, &pretty(&fit))
        }
        Command::SolveQpam { config, out, with_reference } => {
            let text = fs::read_to_string(&config)?;
            let spec: ProblemSpec =
                serde_json::from_str(&text).map_err(|e| Error::Config(format!("config {}: {e}", config.display())))?;
            let solver = Solver::new(&spec)?;
            let sol = solver.solve()?;
            fs::create_dir_all(&out)?;
            pcf::write(&out.join("solution.pcf"), &Stored::SpaceTime(sol.u.clone()))?;
            let mut manifest = json!({
                "spec": spec,
                "grid": { "dim": spec.dim, "n": spec.n, "t_end": spec.t_end, "steps": spec.steps },
                "seeds": { "noise": spec.noise.seed, "initial_datum": spec.u0.seed },
                "alphabet": solver.alphabet,
                "words": solver.words.len(),
                "diagnostics": sol.diagnostics,
            });
            if with_reference {
                let run = reference_solver(&spec)?;
                let r = run.solution.as_ref().expect("finest level kept");
                pcf::write(&out.join("reference.pcf"), &Stored::SpaceTime(r.clone()))?;
                manifest["reference"] = json!(run);
                manifest["comparison"] = json!(compare(&sol.u, r)?);
            }
            write_text(&out.join("manifest.json"), &pretty(&manifest))?;
            let d = &sol.diagnostics;
            println!("iterations={} converged={} last_gap={:.3e}", d.iterations, d.converged, d.gaps.last().unwrap_or(&0.0));
            write_metadata(&out, "solve-qpam", started)
        }
        Command::Compare { a, b, out } => {
            let (x, y) = (pcf::read(&a)?, pcf::read(&b)?);
            let report = match (x, y) {
                (Stored::SpaceTime(x), Stored::SpaceTime(y)) => compare(&x, &y)?,
                (x, y) => {
                    let (fx, fy) = (x.final_slice(), y.final_slice());
                    fx.check_grid(&fy)?;
                    let d = fx.max_abs_diff(&fy);
                    paracalc::qpam_solver::CompareReport { sup: vec![d], l2: vec![fx.sub(&fy).l2_norm()], max_sup: d, final_sup: d }
                }
            };
            let text = pretty(&report);
            match out {
                Some(p) => write_text(&p, &text),
                None => {
                    print!("{text}");
                    Ok(())
                }
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(t) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("error: cannot configure {t} threads: {e}");
            return ExitCode::from(2);
        }
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
