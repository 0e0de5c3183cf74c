//! Command-line front end.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use plotters::prelude::*;

use crate::config::{ConfigError, ScenarioConfig, SweepParameter};
use crate::experiments::metrics::{histogram_csv, timing_csv};
use crate::experiments::sweep::SweepTable;
use crate::experiments::{
    ess_histogram, run_sweep, theorem_checks, timing_report, EssHistogram, ExperimentError,
    Scenario, SweepRow, SweepSpec,
};
use crate::valuefn::model_file;

#[derive(Debug, Parser)]
#[command(
    name = "shield-vimpc",
    version,
    about = "Sampling-based MPC with learned barrier functions"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Scenario config (TOML). Defaults to the vehicle preset.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Overrides `experiment.seed` (`training.fit.seed` for `train`).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Overrides `experiment.trials`.
    #[arg(long, global = true)]
    pub trials: Option<usize>,
    /// Worker threads; defaults to all cores.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Also write SVG plots.
    #[arg(long, global = true)]
    pub plots: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Collect data, fit the value barrier and write the model file.
    Train,
    /// Run the configured trials of every variant at the base config.
    Simulate {
        /// Also time the control loop (wall clock, not reproducible).
        #[arg(long)]
        timing: bool,
    },
    /// Sweep the configured parameter.
    Sweep,
    /// Run the statistical and safety property checks.
    Check,
    /// Print the config after presets, file and flags are applied.
    PrintEffectiveConfig,
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Run(#[from] ExperimentError),
    #[error("cannot write {path}: {source}")]
    Write {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{0} check(s) failed")]
    Checks(usize),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Run(ExperimentError::Config(_)) => 2,
            _ => 1,
        }
    }
}

pub fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn effective_config(cli: &Cli) -> Result<ScenarioConfig, ConfigError> {
    let mut cfg = match &cli.common.config {
        Some(path) => ScenarioConfig::load(path)?,
        None => ScenarioConfig::vehicle(),
    };
    if let Some(seed) = cli.common.seed {
        match cli.command {
            Command::Train => cfg.training.fit.seed = seed,
            _ => cfg.experiment.seed = seed,
        }
    }
    if let Some(trials) = cli.common.trials {
        if trials == 0 {
            return Err(ConfigError::Invalid("--trials must be >= 1".into()));
        }
        cfg.experiment.trials = trials;
    }
    if cli.common.threads == Some(0) {
        return Err(ConfigError::Invalid("--threads must be >= 1".into()));
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), CliError> {
    let cfg = effective_config(&cli)?;
    if let Some(threads) = cli.common.threads {
        // only fails if a pool already exists, which is harmless
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global();
    }
    if let Command::PrintEffectiveConfig = cli.command {
        print!("{}", cfg.to_toml());
        return Ok(());
    }
    let out = &cli.common.out;
    fs::create_dir_all(out).map_err(|source| CliError::Write {
        path: out.clone(),
        source,
    })?;
    let scenario = Scenario::new(cfg)?;
    match cli.command {
        Command::Train => train(&scenario, out, cli.common.plots),
        Command::Simulate { timing } => simulate(&scenario, out, timing, cli.common.plots),
        Command::Sweep => sweep(&scenario, out, cli.common.plots),
        Command::Check => check(&scenario, out),
        Command::PrintEffectiveConfig => unreachable!(),
    }
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|source| CliError::Write {
        path: path.to_path_buf(),
        source,
    })
}

fn train(scenario: &Scenario, out: &Path, plots: bool) -> Result<(), CliError> {
    let report = scenario.train_barrier()?;
    let model = out.join("model.bin");
    write(&model, model_file::to_bytes(&report.outcome.net))?;
    write(&out.join("training_curve.csv"), report.outcome.curve_csv())?;
    println!(
        "trained on {} transitions ({} crashed episodes)",
        report.transitions, report.crashes
    );
    println!("final loss {:.6e}", report.outcome.final_loss);
    if let Some(err) = report.oracle_error {
        println!("oracle sup error {err:.6}");
    }
    println!("wrote {}", model.display());
    if plots {
        let curve: Vec<(f64, f64)> = report
            .outcome
            .curve
            .iter()
            .map(|(e, l)| (*e as f64, *l))
            .collect();
        line_plot(
            &out.join("training_curve.svg"),
            "training loss",
            "epoch",
            "loss",
            &[("loss".to_string(), curve)],
        )?;
    }
    Ok(())
}

fn simulate(scenario: &Scenario, out: &Path, timing: bool, plots: bool) -> Result<(), CliError> {
    let cfg = scenario.config();
    let spec = SweepSpec {
        parameter: SweepParameter::Algorithm,
        values: Vec::new(),
        variants: cfg.experiment.variants.clone(),
        trials: cfg.experiment.trials,
        seed: cfg.experiment.seed,
    };
    let table = run_sweep(scenario, &spec)?;
    write(&out.join("summary.csv"), table.summary_csv())?;
    write(&out.join("trials.csv"), table.trials_csv())?;
    print_rows(&table.rows);

    let hists = ess_histogram(
        scenario,
        &cfg.experiment.variants,
        cfg.experiment.episode_steps,
        cfg.experiment.histogram_bins,
        cfg.experiment.seed,
    )?;
    write(&out.join("ess_histogram.csv"), histogram_csv(&hists))?;
    if plots {
        ess_plot(&out.join("ess_histogram.svg"), &hists)?;
    }

    if timing {
        let rows = timing_report(
            scenario,
            &cfg.experiment.variants,
            cfg.experiment.timing_steps,
            cfg.experiment.warmup_steps,
            cfg.experiment.seed,
        )?;
        for r in &rows {
            println!(
                "{:<18} {:>9.1} Hz (p95 {:.1} Hz)",
                r.variant.to_string(),
                r.rate(),
                r.p95_rate()
            );
        }
        write(&out.join("timing.csv"), timing_csv(&rows))?;
    }
    Ok(())
}

fn sweep(scenario: &Scenario, out: &Path, plots: bool) -> Result<(), CliError> {
    let spec = SweepSpec::from_config(scenario.config());
    let table = run_sweep(scenario, &spec)?;
    write(&out.join("sweep_summary.csv"), table.summary_csv())?;
    write(&out.join("sweep_trials.csv"), table.trials_csv())?;
    print_rows(&table.rows);
    if plots {
        sweep_plot(&out.join("sweep.svg"), &spec, &table)?;
    }
    Ok(())
}

fn check(scenario: &Scenario, out: &Path) -> Result<(), CliError> {
    let results = theorem_checks(scenario.config().experiment.seed);
    let mut csv = String::from("check,passed,detail\n");
    for c in &results {
        println!(
            "[{}] {:<20} {}",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.detail
        );
        csv.push_str(&format!(
            "{},{},\"{}\"\n",
            c.name,
            c.passed,
            c.detail.replace('"', "'")
        ));
    }
    write(&out.join("checks.csv"), csv)?;
    let failed = results.iter().filter(|c| !c.passed).count();
    if failed > 0 {
        return Err(CliError::Checks(failed));
    }
    Ok(())
}

fn print_rows(rows: &[SweepRow]) {
    println!(
        "{:<10} {:<18} {:>6} {:>13} {:>13} {:>8}",
        "value", "variant", "trials", "crash", "collision", "v (m/s)"
    );
    for r in rows {
        println!(
            "{:<10} {:<18} {:>6} {:>6.3}±{:<6.3} {:>6.3}±{:<6.3} {:>8.2}",
            r.value,
            r.variant.to_string(),
            r.trials,
            r.crash_rate,
            r.crash_se,
            r.collision_rate,
            r.collision_se,
            r.mean_velocity
        );
    }
}

fn plot_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Write {
        path: path.to_path_buf(),
        source: std::io::Error::other(e.to_string()),
    }
}

fn line_plot(
    path: &Path,
    title: &str,
    x_label: &str,
    y_label: &str,
    series: &[(String, Vec<(f64, f64)>)],
) -> Result<(), CliError> {
    let points = series.iter().flat_map(|(_, s)| s.iter());
    let (mut x0, mut x1, mut y0, mut y1) = (
        f64::INFINITY,
        f64::NEG_INFINITY,
        f64::INFINITY,
        f64::NEG_INFINITY,
    );
    for (x, y) in points {
        x0 = x0.min(*x);
        x1 = x1.max(*x);
        y0 = y0.min(*y);
        y1 = y1.max(*y);
    }
    if !x0.is_finite() {
        return Ok(());
    }
    let pad = |lo: f64, hi: f64| if hi > lo { 0.05 * (hi - lo) } else { 0.5 };
    let (px, py) = (pad(x0, x1), pad(y0, y1));
    let root = SVGBackend::new(path, (720, 480)).into_drawing_area();
    root.fill(&WHITE).map_err(|e| plot_err(path, e))?;
    let mut chart = ChartBuilder::on(&root)
        .caption(title, ("sans-serif", 20))
        .margin(12)
        .x_label_area_size(36)
        .y_label_area_size(56)
        .build_cartesian_2d(x0 - px..x1 + px, y0 - py..y1 + py)
        .map_err(|e| plot_err(path, e))?;
    chart
        .configure_mesh()
        .x_desc(x_label)
        .y_desc(y_label)
        .draw()
        .map_err(|e| plot_err(path, e))?;
    for (i, (name, data)) in series.iter().enumerate() {
        let color = Palette99::pick(i).to_rgba();
        chart
            .draw_series(LineSeries::new(data.iter().copied(), color.stroke_width(2)))
            .map_err(|e| plot_err(path, e))?
            .label(name.clone())
            .legend(move |(x, y)| {
                PathElement::new(vec![(x, y), (x + 16, y)], color.stroke_width(2))
            });
    }
    chart
        .configure_series_labels()
        .background_style(WHITE.mix(0.8))
        .border_style(BLACK)
        .draw()
        .map_err(|e| plot_err(path, e))?;
    root.present().map_err(|e| plot_err(path, e))
}

fn ess_plot(path: &Path, hists: &[EssHistogram]) -> Result<(), CliError> {
    let series: Vec<(String, Vec<(f64, f64)>)> = hists
        .iter()
        .map(|h| {
            let bins = h.mass.len() as f64;
            let pts = h
                .mass
                .iter()
                .enumerate()
                .map(|(i, m)| ((i as f64 + 0.5) / bins, *m))
                .collect();
            (h.variant.to_string(), pts)
        })
        .collect();
    line_plot(
        path,
        "normalized ESS",
        "ESS / N",
        "fraction of updates",
        &series,
    )
}

fn sweep_plot(path: &Path, spec: &SweepSpec, table: &SweepTable) -> Result<(), CliError> {
    let series: Vec<(String, Vec<(f64, f64)>)> = spec
        .variants
        .iter()
        .map(|v| {
            let pts = table
                .rows
                .iter()
                .filter(|r| r.variant == *v)
                .enumerate()
                .map(|(i, r)| (r.value.parse().unwrap_or(i as f64), r.crash_rate))
                .collect();
            (v.to_string(), pts)
        })
        .collect();
    line_plot(
        path,
        "crash rate",
        spec.parameter.label(),
        "crash rate",
        &series,
    )
}
