//! `chernflow` — run Chern-Ricci flows from a config file, verify the
//! built-in property suites, and fit blow-up rates to diagnostics CSVs.
//!
//! Exit codes: 0 completed (or all checks passed, or a confident fit),
//! 2 curvature blow-up, 1 resolution failure or any error.

use std::fmt::Write as _;
use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use chernflow::config::{parse_time_window, RunConfig};
use chernflow::flow::{
    cross_validate, fmt_f64, run_flow, write_checkpoint, write_csv, FlowProblem, Snapshot, Termination,
    TerminationLabel, Trajectory,
};
use chernflow::singularity::{
    default_c_tilde, fit_blowup, maximal_time_proxy, q_diagnostics, singular_locus, sup_scalar_series,
};
use chernflow::verify::{run_suite, Suite, VERIFY_SEED};
use clap::{Parser, Subcommand};

/// Environment variable holding the worker-thread count.
const THREADS_ENV: &str = "CHERNFLOW_THREADS";

#[derive(Parser)]
#[command(
    name = "chernflow",
    version,
    about = "Chern-Ricci flow on Hopf manifolds and complex tori"
)]
struct Cli {
    /// Only report errors.
    #[arg(long, global = true)]
    quiet: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate the flow described by a config file.
    Run {
        config: PathBuf,
        /// Overrides `output.dir`.
        #[arg(long)]
        output_dir: Option<PathBuf>,
        /// Overrides `checkpoint_every`.
        #[arg(long)]
        checkpoint_every: Option<usize>,
    },
    /// Run a property suite: kernel, hopf, equivalence or lemma.
    Verify { suite: String },
    /// Fit `sup_R ~ C (T - t)^-k` to the `t`, `sup_R` columns of a CSV.
    Fit {
        csv: PathBuf,
        /// Fit window `t_lo:t_hi`.
        #[arg(long)]
        window: String,
        /// Also write the report to `<dir>/fit.txt`.
        #[arg(long)]
        output_dir: Option<PathBuf>,
    },
}

fn init_threads() -> Result<()> {
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v
            .trim()
            .parse()
            .with_context(|| format!("{THREADS_ENV} must be a thread count, got `{v}`"))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the thread pool")?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = init_threads().and_then(|()| match cli.command {
        Command::Run {
            config,
            output_dir,
            checkpoint_every,
        } => cmd_run(&config, output_dir, checkpoint_every, cli.quiet),
        Command::Verify { suite } => cmd_verify(&suite, cli.quiet),
        Command::Fit {
            csv,
            window,
            output_dir,
        } => cmd_fit(&csv, &window, output_dir.as_deref(), cli.quiet),
    });
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn exit_code(label: TerminationLabel) -> u8 {
    match label {
        TerminationLabel::Completed => 0,
        TerminationLabel::CurvatureBlowUp => 2,
        TerminationLabel::ResolutionFailure => 1,
    }
}

fn termination_text(t: &Termination) -> String {
    match t {
        Termination::ReachedTEnd => "reached_t_end".into(),
        Termination::PositivityLoss {
            t,
            point,
            min_eigenvalue,
        } => format!(
            "positivity_loss t = {} point = {point} min_eigenvalue = {}",
            fmt_f64(*t),
            fmt_f64(*min_eigenvalue)
        ),
        Termination::StepUnderflow { t, dt } => {
            format!("step_underflow t = {} dt = {}", fmt_f64(*t), fmt_f64(*dt))
        }
    }
}

/// Writes every artifact of one trajectory into `dir`, suffixing file names
/// with `tag` when several formulations share the directory.
fn write_artifacts(cfg: &RunConfig, tr: &Trajectory, dir: &Path, tag: Option<&str>) -> Result<String> {
    let name = |stem: &str, ext: &str| match tag {
        Some(t) => dir.join(format!("{stem}_{t}.{ext}")),
        None => dir.join(format!("{stem}.{ext}")),
    };
    let csv_path = name("diagnostics", "csv");
    let file = fs::File::create(&csv_path).with_context(|| format!("creating {}", csv_path.display()))?;
    write_csv(BufWriter::new(file), &tr.rows)?;

    if let FlowProblem::Grid { .. } = &tr.problem {
        let cp_dir = match tag {
            Some(t) => dir.join(format!("checkpoints_{t}")),
            None => dir.join("checkpoints"),
        };
        fs::create_dir_all(&cp_dir)?;
        for (k, snap) in tr.checkpoints.iter().enumerate() {
            if let Snapshot::Grid(s) = snap {
                write_file(&cp_dir.join(format!("{k:06}.chk")), &write_checkpoint(s))?;
            }
        }
    }

    let mut summary = String::new();
    let _ = writeln!(summary, "termination = {}", termination_text(&tr.termination));
    let _ = writeln!(summary, "label = {}", tr.label.name());
    let _ = writeln!(summary, "final_time = {}", fmt_f64(tr.final_time()));
    let _ = writeln!(summary, "rows = {}", tr.rows.len());
    let _ = writeln!(summary, "sup_abs_R = {}", fmt_f64(tr.sup_abs_scalar()));
    let _ = writeln!(
        summary,
        "determinant_bound_excess = {}",
        fmt_f64(tr.determinant_bound_excess)
    );
    if let FlowProblem::Grid { reference, .. } = &tr.problem {
        let proxy = maximal_time_proxy(&reference.g0, &reference.ric0)?;
        let _ = writeln!(summary, "maximal_time_proxy = {}", fmt_f64(proxy));
    }

    let c_tilde = cfg.q_c_tilde.unwrap_or_else(|| default_c_tilde(tr));
    let q = q_diagnostics(tr, c_tilde, cfg.q_b)?;
    let mut q_csv = String::from("t,q1_min,q1_max,q2_min,q2_max\n");
    for k in 0..q.t.len() {
        let cells = [q.t[k], q.q1_min[k], q.q1_max[k], q.q2_min[k], q.q2_max[k]].map(fmt_f64);
        let _ = writeln!(q_csv, "{}", cells.join(","));
    }
    write_file(&name("q", "csv"), &q_csv)?;
    let (q1_lo, q1_hi) = q.q1_band();
    let _ = writeln!(summary, "q1_band = {} {}", fmt_f64(q1_lo), fmt_f64(q1_hi));

    if tr.label == TerminationLabel::CurvatureBlowUp {
        let series = sup_scalar_series(tr)?;
        let t_final = tr.final_time();
        let window = cfg.fit_window.unwrap_or((0.5 * t_final, t_final));
        let fit_text = match fit_blowup(&series.sup_pairs(), window) {
            Ok(fit) => {
                let _ = writeln!(summary, "t_fit = {}", fmt_f64(fit.t_fit));
                let _ = writeln!(summary, "k = {}", fmt_f64(fit.k));
                fit.to_text()
            }
            Err(e) => format!("error = {e}\n"),
        };
        write_file(&name("fit", "txt"), &fit_text)?;
        let sup0 = tr.rows[0].sup_abs_r();
        let threshold = cfg.locus_threshold.unwrap_or(10.0 * sup0.max(1.0));
        let locus = singular_locus(tr, threshold)?;
        write_file(&name("locus", "txt"), &locus.to_text())?;
        let _ = writeln!(summary, "locus_points = {}", locus.count());
    }
    write_file(&name("summary", "txt"), &summary)?;
    Ok(summary)
}

fn cmd_run(path: &Path, output_dir: Option<PathBuf>, checkpoint_every: Option<usize>, quiet: bool) -> Result<u8> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut cfg = RunConfig::parse(&text)?;
    if let Some(d) = output_dir {
        cfg.output_dir = d;
    }
    if let Some(k) = checkpoint_every {
        cfg.checkpoint_every = k;
    }
    let runs = cfg.flow_configs()?;
    fs::create_dir_all(&cfg.output_dir).with_context(|| format!("creating {}", cfg.output_dir.display()))?;
    let tagged = runs.len() > 1;
    let mut trajectories = Vec::new();
    for (label, fc) in &runs {
        let tr = run_flow(fc)?;
        let summary = write_artifacts(&cfg, &tr, &cfg.output_dir, tagged.then_some(*label))?;
        if !quiet {
            println!("[{label}]");
            print!("{summary}");
        }
        trajectories.push(tr);
    }
    if let [a, b] = trajectories.as_slice() {
        let mut report = String::new();
        match cross_validate(a, b) {
            Ok(r) => {
                let _ = writeln!(report, "sup_deviation = {}", fmt_f64(r.sup_deviation));
                let _ = writeln!(report, "tolerance = {}", fmt_f64(r.tolerance));
                let _ = writeln!(report, "passed = {}", r.passed);
                let _ = writeln!(report, "[deviations]");
                for (t, d) in r.times.iter().zip(&r.deviations) {
                    let _ = writeln!(report, "{} {}", fmt_f64(*t), fmt_f64(*d));
                }
            }
            Err(e) => {
                let _ = writeln!(report, "skipped = {e}");
            }
        }
        write_file(&cfg.output_dir.join("cross_validation.txt"), &report)?;
        if !quiet {
            print!(
                "[cross_validation]\n{}",
                report.lines().take(3).map(|l| format!("{l}\n")).collect::<String>()
            );
        }
    }
    // A resolution failure in any formulation outranks a blow-up.
    let code = trajectories
        .iter()
        .map(|t| exit_code(t.label))
        .fold(0, |acc, c| match (acc, c) {
            (1, _) | (_, 1) => 1,
            (a, c) => a.max(c),
        });
    Ok(code)
}

fn cmd_verify(suite: &str, quiet: bool) -> Result<u8> {
    let suite: Suite = suite.parse()?;
    let checks = run_suite(suite, VERIFY_SEED)?;
    let failing: Vec<&str> = checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
    for c in &checks {
        if !quiet || !c.passed {
            println!("{c}");
        }
    }
    if failing.is_empty() {
        Ok(0)
    } else {
        eprintln!("error: {} check(s) failed: {}", failing.len(), failing.join(", "));
        Ok(1)
    }
}

/// Reads `(t, sup_R)` pairs from a CSV with a header naming both columns.
fn read_series(path: &Path) -> Result<Vec<(f64, f64)>> {
    let mut reader = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    let headers = reader.headers()?.clone();
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .with_context(|| format!("{} has no `{name}` column", path.display()))
    };
    let (ti, ri) = (column("t")?, column("sup_R")?);
    let mut out = Vec::new();
    for (line, rec) in reader.records().enumerate() {
        let rec = rec?;
        let cell = |i: usize| -> Result<f64> {
            let v = rec
                .get(i)
                .with_context(|| format!("row {}: missing column", line + 2))?;
            v.trim()
                .parse()
                .with_context(|| format!("row {}: bad number `{v}`", line + 2))
        };
        out.push((cell(ti)?, cell(ri)?));
    }
    if out.is_empty() {
        bail!("{} has no data rows", path.display());
    }
    Ok(out)
}

fn cmd_fit(path: &Path, window: &str, output_dir: Option<&Path>, quiet: bool) -> Result<u8> {
    let window = parse_time_window(window)?;
    let series = read_series(path)?;
    let fit = fit_blowup(&series, window)?;
    let text = fit.to_text();
    if let Some(dir) = output_dir {
        fs::create_dir_all(dir)?;
        write_file(&dir.join("fit.txt"), &text)?;
    }
    if !quiet {
        print!("{text}");
    }
    if fit.low_confidence {
        eprintln!(
            "error: low-confidence fit (rms {}, converged {})",
            fmt_f64(fit.rms),
            fit.converged
        );
        return Ok(1);
    }
    Ok(0)
}
