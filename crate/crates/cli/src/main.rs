// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use gdspray::config::{Model, SprayConfig};
use gdspray::tube::PoleKind;
use gdspray::validation::ValidationReport;

mod format;

use format::{g6, sig17};

/// Inner tube volumes of graph-directed sprays.
#[derive(Debug, Parser)]
#[command(name = "gdspray", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct ConfigArg {
    /// JSON model file
    config: PathBuf,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check the model and list every violation
    Validate(ConfigArg),
    /// Sim-value D and the residual |rho(A(D)) - 1|
    Simvalue(ConfigArg),
    /// Complex dimensions as JSON
    Dims {
        #[command(flatten)]
        cfg: ConfigArg,
        #[arg(long)]
        height: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Tube formula at one eps, with the per-pole contributions
    Tube {
        #[command(flatten)]
        cfg: ConfigArg,
        #[arg(long)]
        eps: f64,
        #[arg(long)]
        height: Option<f64>,
        /// Rows of the contribution table to show (0 = all)
        #[arg(long, default_value_t = 12)]
        rows: usize,
    },
    /// Exact tube volume from the functional equation
    Oracle {
        #[command(flatten)]
        cfg: ConfigArg,
        #[arg(long)]
        eps: f64,
    },
    /// Formula and oracle over an eps grid, as CSV
    Sweep {
        #[command(flatten)]
        cfg: ConfigArg,
        #[arg(long)]
        eps_min: f64,
        #[arg(long)]
        eps_max: f64,
        #[arg(long, default_value_t = 20)]
        points: usize,
        /// Logarithmic spacing
        #[arg(long)]
        log: bool,
        #[arg(long)]
        height: Option<f64>,
        /// CSV destination; stdout if omitted
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Maximum relative formula/oracle error on a log grid below the validity bound
    Compare {
        #[command(flatten)]
        cfg: ConfigArg,
        #[arg(long, default_value_t = 20)]
        points: usize,
        #[arg(long)]
        height: Option<f64>,
    },
}

/// Marks failures that should exit with the validation status.
#[derive(Debug)]
struct Invalid(String);

/// Flag values clap accepted but the command cannot use.
#[derive(Debug)]
struct Usage(String);

impl std::fmt::Display for Invalid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Invalid {}
impl std::error::Error for Usage {}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(3) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<Invalid>().is_some() {
                ExitCode::from(1)
            } else if e.downcast_ref::<Usage>().is_some() {
                ExitCode::from(3)
            } else {
                ExitCode::from(2)
            }
        }
    }
}

fn read_config(path: &Path) -> Result<SprayConfig> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))
        .map_err(|e| Invalid(format!("{e:#}")))?;
    SprayConfig::from_json(&text).map_err(|e| Invalid(format!("{}: {e}", path.display())).into())
}

fn load(cfg: &ConfigArg) -> Result<Model> {
    let config = read_config(&cfg.config)?;
    let report = config.check();
    if !report.is_valid() {
        return Err(Invalid(format!("invalid model:\n{report}")).into());
    }
    Ok(config.build()?)
}

fn run(command: Command) -> Result<()> {
    let mut stdout = std::io::stdout().lock();
    match command {
        Command::Validate(cfg) => {
            let report: ValidationReport = read_config(&cfg.config)?.check();
            writeln!(stdout, "{report}")?;
            if !report.is_valid() {
                return Err(Invalid(format!("{} violation(s)", report.violations.len())).into());
            }
        }
        Command::Simvalue(cfg) => {
            let model = load(&cfg)?;
            let d = gdspray::spectral::sim_value(&model.graph, 1e-13)?;
            writeln!(stdout, "D          {}", sig17(d.dim))?;
            writeln!(stdout, "residual   {}", sig17(d.residual))?;
            writeln!(stdout, "bracket    {}", sig17(d.bracket_width))?;
        }
        Command::Dims { cfg, height, out } => {
            let mut model = load(&cfg)?;
            if let Some(h) = height {
                model.settings.height = h;
            }
            let zs = model.zeta_system()?;
            let dims = zs.dimensions(&model.search_options())?;
            let json = serde_json::to_string_pretty(&dims)?;
            match out {
                Some(path) => fs::write(&path, json + "\n")
                    .with_context(|| format!("writing {}", path.display()))?,
                None => writeln!(stdout, "{json}")?,
            }
        }
        Command::Tube { cfg, eps, height, rows } => {
            let mut model = load(&cfg)?;
            if let Some(h) = height {
                model.settings.height = h;
            }
            check_eps(eps)?;
            let zs = model.zeta_system()?;
            let dims = zs.dimensions(&model.search_options())?;
            let r = zs.tube_volume_formula(&dims, eps, model.settings.height)?;
            writeln!(stdout, "eps                {}", sig17(r.eps))?;
            writeln!(stdout, "value              {}", sig17(r.value))?;
            writeln!(stdout, "height             {}", g6(r.height))?;
            writeln!(stdout, "poles              {}", r.contributions.len())?;
            writeln!(stdout, "validity bound     {}", sig17(zs.validity_bound()))?;
            writeln!(stdout, "within bound       {}", r.within_validity_bound)?;
            writeln!(stdout, "discarded imag     {}", g6(r.discarded_imaginary))?;
            writeln!(stdout)?;
            writeln!(stdout, "{:<9} {:>12} {:>12} {:>13} {:>13}", "kind", "Re pole", "Im pole", "Re residue", "Im residue")?;
            let shown = if rows == 0 { r.contributions.len() } else { rows.min(r.contributions.len()) };
            for c in &r.contributions[..shown] {
                let kind = match c.kind {
                    PoleKind::Integer => "integer",
                    PoleKind::Dimension => "dimension",
                };
                writeln!(
                    stdout,
                    "{:<9} {:>12} {:>12} {:>13} {:>13}",
                    kind,
                    g6(c.pole.re),
                    g6(c.pole.im),
                    g6(c.combined.re),
                    g6(c.combined.im)
                )?;
            }
            if shown < r.contributions.len() {
                writeln!(stdout, "... {} more", r.contributions.len() - shown)?;
            }
        }
        Command::Oracle { cfg, eps } => {
            let model = load(&cfg)?;
            check_eps(eps)?;
            let r = model.oracle()?.evaluate(eps)?;
            writeln!(stdout, "eps              {}", sig17(r.eps))?;
            writeln!(stdout, "volume           {}", sig17(r.total))?;
            for (name, v) in model.graph.vertices().iter().zip(&r.per_vertex) {
                writeln!(stdout, "volume[{name}]{:pad$}{}", "", sig17(*v), pad = 8usize.saturating_sub(name.len()))?;
            }
            writeln!(stdout, "paths expanded   {}", r.paths_expanded)?;
        }
        Command::Sweep { cfg, eps_min, eps_max, points, log, height, out } => {
            let mut model = load(&cfg)?;
            if let Some(h) = height {
                model.settings.height = h;
            }
            let grid = grid(eps_min, eps_max, points, log)?;
            let csv = sweep_csv(&model, &grid)?;
            match out {
                Some(path) => {
                    fs::write(&path, csv).with_context(|| format!("writing {}", path.display()))?
                }
                None => stdout.write_all(csv.as_bytes())?,
            }
        }
        Command::Compare { cfg, points, height } => {
            let mut model = load(&cfg)?;
            if let Some(h) = height {
                model.settings.height = h;
            }
            if points == 0 {
                return Err(usage("--points must be positive"));
            }
            let zs = model.zeta_system()?;
            let bound = zs.validity_bound();
            let lo = 1e-3 * bound;
            let eps: Vec<f64> = (1..=points)
                .map(|k| (lo.ln() + (k as f64 / (points + 1) as f64) * (bound / lo).ln()).exp())
                .collect();
            let dims = zs.dimensions(&model.search_options())?;
            let table = zs.pole_table(&dims, model.settings.height)?;
            let oracle = model.oracle()?;
            writeln!(stdout, "{:>12} {:>14} {:>14} {:>12}", "eps", "formula", "oracle", "rel err")?;
            let mut worst: f64 = 0.0;
            for &e in &eps {
                let f = table.evaluate(e)?.value;
                let o = oracle.evaluate(e)?.total;
                let rel = (f - o).abs() / o.abs();
                worst = worst.max(rel);
                writeln!(stdout, "{:>12} {:>14} {:>14} {:>12}", g6(e), g6(f), g6(o), g6(rel))?;
            }
            writeln!(stdout)?;
            writeln!(stdout, "height                 {}", g6(model.settings.height))?;
            writeln!(stdout, "validity bound         {}", sig17(bound))?;
            writeln!(stdout, "max relative error     {}", sig17(worst))?;
        }
    }
    Ok(())
}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    Usage(msg.into()).into()
}

fn check_eps(eps: f64) -> Result<()> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(usage(format!("--eps must be positive and finite, got {eps}")));
    }
    Ok(())
}

/// `points` values from `lo` to `hi` inclusive, strictly increasing.
fn grid(lo: f64, hi: f64, points: usize, log: bool) -> Result<Vec<f64>> {
    if !(lo > 0.0 && hi.is_finite()) {
        return Err(usage("eps range must be positive and finite"));
    }
    if points == 0 {
        return Err(usage("--points must be positive"));
    }
    if points == 1 {
        return Ok(vec![lo]);
    }
    if !(hi > lo) {
        return Err(usage("--eps-max must exceed --eps-min"));
    }
    let last = (points - 1) as f64;
    let values: Vec<f64> = (0..points)
        .map(|k| {
            let t = k as f64 / last;
            if log {
                (lo.ln() + t * (hi / lo).ln()).exp()
            } else {
                lo + t * (hi - lo)
            }
        })
        .collect();
    if values.windows(2).any(|w| !(w[1] > w[0])) {
        bail!("eps grid too fine to be strictly increasing");
    }
    Ok(values)
}

fn sweep_csv(model: &Model, grid: &[f64]) -> Result<String> {
    let zs = model.zeta_system()?;
    let dims = zs.dimensions(&model.search_options())?;
    let table = zs.pole_table(&dims, model.settings.height)?;
    let oracle = model.oracle()?;
    let mut csv = String::from("eps,v_formula,v_oracle,abs_err,rel_err,within_bound\n");
    for &eps in grid {
        let f = table.evaluate(eps)?;
        let o = oracle.evaluate(eps)?.total;
        let abs = (f.value - o).abs();
        csv.push_str(&format!(
            "{},{},{},{},{},{}\n",
            sig17(eps),
            sig17(f.value),
            sig17(o),
            sig17(abs),
            sig17(abs / o.abs()),
            f.within_validity_bound
        ));
    }
    Ok(csv)
}
