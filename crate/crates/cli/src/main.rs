use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use cflow::bdf::{format_rational, stability_condition, verify_identity, BdfScheme};
use cflow::benchmark::FlowProblem;
use cflow::fem::{Mesh, MetricKind};
use cflow::flows::{Flow, FlowConfig, Scheme, Termination};
use cflow::study::{parse_step, run_study, write_csv, StudyConfig};

#[derive(Parser)]
#[command(name = "cflow", version, about = "Constrained BDF gradient-flow experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a step-size sweep described by a config file and write a CSV table.
    Study {
        #[arg(long)]
        config: PathBuf,
        /// Output CSV (overrides `output` in the config).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run one flow on the benchmark and print per-step diagnostics.
    Run {
        /// af-bdf1, af-bdf2, af-bdfk<k> (k = 1..4), gf-bdf1 or gf-bdf2.
        #[arg(long)]
        scheme: String,
        /// Step size; `2^-k` is accepted.
        #[arg(long, value_parser = parse_positive)]
        s: f64,
        #[arg(long, default_value_t = 64)]
        mesh: usize,
        #[arg(long, default_value = "H1")]
        metric: MetricKind,
        #[arg(long, default_value_t = 25.0)]
        alpha: f64,
        #[arg(long, default_value_t = 1e-8)]
        eps: f64,
        #[arg(long, default_value_t = 1e4)]
        t_max: f64,
        /// Disable the violation recurrence check.
        #[arg(long)]
        no_oracle: bool,
        /// Print every n-th step (the final step is always printed).
        #[arg(long, default_value_t = 1)]
        every: usize,
    },
    /// Print the coefficient tables of BDF-k and check the quadratic identity.
    VerifyBdf {
        #[arg(long)]
        k: usize,
        /// Number of random test sequences.
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Also write the coefficient table as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Write the vertex/triangle listing of the uniform mesh.
    Mesh {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn parse_positive(text: &str) -> Result<f64, String> {
    match parse_step(text) {
        Some(v) if v > 0.0 && v.is_finite() => Ok(v),
        _ => Err(format!("'{text}' is not a positive number")),
    }
}

fn study(config: PathBuf, out: Option<PathBuf>) -> Result<()> {
    let text = std::fs::read_to_string(&config)
        .with_context(|| format!("reading {}", config.display()))?;
    let cfg = StudyConfig::parse(&text)?;
    let Some(out) = out.or_else(|| cfg.output.clone()) else {
        bail!("no output path: pass --out or set 'output' in the config");
    };
    let rows = run_study(&cfg)?;
    let file = File::create(&out).with_context(|| format!("creating {}", out.display()))?;
    let mut w = BufWriter::new(file);
    write_csv(&rows, &mut w)?;
    w.flush()?;
    println!(
        "{:<10} {:>10} {:>7} {:>12} {:>6} {:>10} {:>10} {:>10} {:>8}",
        "scheme", "s", "N", "violation", "eoc", "s*sig2", "rho", "energy", "time[s]"
    );
    for r in &rows {
        println!(
            "{:<10} {:>10.4e} {:>7} {:>12.4e} {:>6} {:>10.4} {:>10.4} {:>10.4} {:>8.1}",
            r.scheme.to_string(),
            r.s,
            r.iterations,
            r.violation,
            r.eoc.map(|e| format!("{e:.2}")).unwrap_or_else(|| "-".into()),
            r.s_sigma2,
            r.rho,
            r.energy,
            r.wall_time
        );
    }
    println!("wrote {}", out.display());
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn run(
    scheme: &str,
    s: f64,
    mesh: usize,
    metric: MetricKind,
    alpha: f64,
    eps: f64,
    t_max: f64,
    no_oracle: bool,
    every: usize,
) -> Result<()> {
    let scheme: Scheme = scheme.parse()?;
    let cfg = FlowConfig {
        metric,
        alpha,
        eps,
        t_max,
        oracle: !no_oracle,
        ..FlowConfig::new(scheme, s)
    };
    let problem = FlowProblem::benchmark(mesh)?;
    let mut flow = Flow::new(&problem, cfg.clone())?;
    let stdout = io::stdout();
    let mut out = stdout.lock();
    writeln!(
        out,
        "{:>6} {:>18} {:>12} {:>12} {:>12} {:>10} {:>10} {:>10}",
        "n", "energy", "kinetic", "violation", "residual", "oracle", "tangency", "max|b|"
    )?;
    let every = every.max(1);
    let print = |out: &mut io::StdoutLock, r: &cflow::DiagnosticsRecord| -> io::Result<()> {
        writeln!(
            out,
            "{:>6} {:>18.10e} {:>12.4e} {:>12.4e} {:>12.4e} {:>10} {:>10.2e} {:>10.2e}",
            r.step,
            r.energy,
            r.kinetic,
            r.violation_l1,
            r.stopping_residual,
            r.oracle_mismatch
                .map(|m| format!("{m:.2e}"))
                .unwrap_or_else(|| "-".into()),
            r.tangency,
            r.violation_max
        )
    };
    let termination = loop {
        if flow.history().step() >= cfg.max_steps() {
            break Termination::MaxSteps;
        }
        let report = flow.step()?;
        let done = report.stopping_residual <= cfg.eps;
        if done || report.step % every == 0 {
            print(&mut out, flow.records().last().expect("record per step"))?;
        }
        if done {
            break Termination::Converged;
        }
    };
    writeln!(
        out,
        "{} after {} steps ({:?})",
        scheme,
        flow.history().step(),
        termination
    )?;
    Ok(())
}

fn verify_bdf(k: usize, trials: usize, seed: u64, csv: Option<PathBuf>) -> Result<()> {
    let scheme = BdfScheme::new(k)?;
    let width = 12;
    let row = |name: &str, vals: Vec<String>| {
        let cells: Vec<String> = vals.iter().map(|v| format!("{v:>width$}")).collect();
        println!("{name:<8}{}", cells.join(""));
    };
    println!("BDF-{k} coefficients");
    row("j", (0..=k).map(|j| j.to_string()).collect());
    row("delta", scheme.delta().iter().map(format_rational).collect());
    row("tdelta", scheme.tilde_delta().iter().map(format_rational).collect());
    row("gamma", scheme.gamma().iter().map(format_rational).collect());
    println!("beta (j, l)");
    for ((j, l), v) in scheme.beta() {
        println!("  ({j}, {l}) {:>width$}", format_rational(v));
    }
    if k >= 3 {
        let st = stability_condition(k)?;
        println!(
            "contraction condition value {:.6} -> {}",
            st.value_f64(),
            if st.holds { "holds" } else { "fails" }
        );
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let s = 0.1;
    let mut max_res = 0.0f64;
    let mut sum_res = 0.0;
    for _ in 0..trials {
        let a: Vec<f64> = (0..=k).map(|_| rng.gen_range(-1.0..=1.0)).collect();
        let r = verify_identity(&scheme, &a, s, k);
        max_res = max_res.max(r);
        sum_res += r;
    }
    println!(
        "identity residual over {trials} random sequences (s = {s}): max {max_res:.3e}, mean {:.3e}",
        if trials > 0 { sum_res / trials as f64 } else { 0.0 }
    );

    if let Some(path) = csv {
        let mut w = BufWriter::new(
            File::create(&path).with_context(|| format!("creating {}", path.display()))?,
        );
        writeln!(w, "family,j,l,value")?;
        for (j, v) in scheme.delta().iter().enumerate() {
            writeln!(w, "delta,{j},,{}", format_rational(v))?;
        }
        for (j, v) in scheme.tilde_delta().iter().enumerate() {
            writeln!(w, "tilde_delta,{j},,{}", format_rational(v))?;
        }
        for (j, v) in scheme.gamma().iter().enumerate() {
            writeln!(w, "gamma,{j},,{}", format_rational(v))?;
        }
        for ((j, l), v) in scheme.beta() {
            writeln!(w, "beta,{j},{l},{}", format_rational(v))?;
        }
        w.flush()?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn mesh(n: usize, out: Option<PathBuf>) -> Result<()> {
    let mesh = Mesh::uniform(n)?;
    match out {
        Some(path) => {
            let mut w = BufWriter::new(File::create(&path)?);
            mesh.write_listing(&mut w)?;
            w.flush()?;
        }
        None => mesh.write_listing(io::stdout().lock())?,
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Study { config, out } => study(config, out),
        Command::Run {
            scheme,
            s,
            mesh,
            metric,
            alpha,
            eps,
            t_max,
            no_oracle,
            every,
        } => run(&scheme, s, mesh, metric, alpha, eps, t_max, no_oracle, every),
        Command::VerifyBdf {
            k,
            trials,
            seed,
            csv,
        } => verify_bdf(k, trials, seed, csv),
        Command::Mesh { n, out } => mesh(n, out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
