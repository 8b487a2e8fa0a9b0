//! Command-line driver behind the `talbot` binary.

pub mod config;
pub mod output;

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::decoherence::{evaluate_grid, Channel};
use crate::diagnostics::{
    coherence_crossing, detect_momentum_plateaus, diffraction_order_positions, onaxis_profile, revival_correlation,
    OrderSearch, PlateauSearch,
};
use crate::error::{Error, Result};
use crate::flow::{integrate_ensemble, ordering_check, seed_ensemble, StepControl};
use crate::model::units::PER_MM_PER_UM2;
use crate::model::{lattice, SimulationGrid};

use config::{ConfigSource, Diagnostic, Format, Regime, RunConfig};
use output::GridData;

/// Talbot carpets, transverse momentum and probability-flow streamlines for
/// a Gaussian-slit grating with inter-slit decoherence.
#[derive(Debug, Parser)]
#[command(name = "talbot", version)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Configuration file (`section.key = value unit` lines).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Output directory (created if missing).
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,

    /// Override a configuration key, e.g. `--set grid.nx=200`. Repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,

    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Density carpet on the configured grid.
    Carpet,
    /// Relative transverse momentum k_x/k0 on the configured grid.
    Momentum,
    /// Probability-flow streamlines from seeds spread across each slit.
    Streamlines,
    /// Density and momentum with far-field grid and clip defaults.
    Farfield,
    /// Scalar diagnostics with pass/fail against configured thresholds.
    Diagnose,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Carpet => "carpet",
            Command::Momentum => "momentum",
            Command::Streamlines => "streamlines",
            Command::Farfield => "farfield",
            Command::Diagnose => "diagnose",
        }
    }
}

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

/// Parses arguments, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let cfg = match load_config(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("talbot: {e}");
            return EXIT_USAGE;
        }
    };
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(cli.threads.unwrap_or(0)).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("talbot: cannot start worker pool: {e}");
            return EXIT_RUNTIME;
        }
    };
    match pool.install(|| execute(cli.command, &cfg, &cli.out)) {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
            EXIT_OK
        }
        Err(e) => {
            eprintln!("talbot: {e}");
            EXIT_RUNTIME
        }
    }
}

fn load_config(cli: &Cli) -> Result<RunConfig> {
    let mut src = match &cli.config {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| Error::Config(format!("cannot read {}: {e}", p.display())))?;
            ConfigSource::parse(&text)?
        }
        None => ConfigSource::default(),
    };
    for o in &cli.overrides {
        src.apply_override(o)?;
    }
    let regime = if cli.command == Command::Farfield { Regime::FarField } else { Regime::NearField };
    RunConfig::resolve(&src, regime)
}

/// Λ in display units, for file names: `L0e0`, `L1e-3`, ...
pub fn lambda_tag(lambda: f64) -> String {
    format!("L{:e}", lambda / PER_MM_PER_UM2)
}

struct Run<'a> {
    cfg: &'a RunConfig,
    out: &'a Path,
    files: Vec<PathBuf>,
    notes: Vec<String>,
}

impl Run<'_> {
    fn path(&mut self, name: &str) -> PathBuf {
        let p = self.out.join(name);
        self.files.push(p.clone());
        p
    }

    fn emit_grid(
        &mut self,
        stem: &str,
        data: &GridData,
        image: impl Fn(&GridData) -> output::Image,
        gray: bool,
    ) -> Result<()> {
        let formats = self.cfg.formats.clone();
        for f in formats {
            match f {
                Format::Csv => {
                    let p = self.path(&format!("{stem}.csv"));
                    output::write_text(&p, &output::grid_csv(data))?;
                }
                Format::Raw => {
                    let p = self.path(&format!("{stem}.f64"));
                    output::write_raw(&p, data)?;
                    self.notes.push(format!(
                        "{}: little-endian f64, {} rows (z) x {} columns (x)",
                        p.display(),
                        data.nz(),
                        data.nx()
                    ));
                }
                Format::Image => {
                    let img = image(data);
                    let (ext, bytes) = if gray { ("pgm", img.pgm()) } else { ("ppm", img.ppm()) };
                    let p = self.path(&format!("{stem}.{ext}"));
                    output::write_bytes(&p, &bytes)?;
                }
            }
        }
        Ok(())
    }

    fn density(&mut self, prefix: &str, lambda: f64, grid: &SimulationGrid) -> Result<()> {
        let f = evaluate_grid(grid, &self.cfg.model, lambda);
        let data = GridData::new("density", Channel::Density.unit(), lambda, grid, f.channel(Channel::Density));
        let gamma = self.cfg.render.density_gamma;
        self.emit_grid(
            &format!("{prefix}_density_{}", lambda_tag(lambda)),
            &data,
            |d| output::render_density(d, gamma),
            true,
        )
    }

    fn momentum(&mut self, prefix: &str, lambda: f64, grid: &SimulationGrid) -> Result<()> {
        let f = evaluate_grid(grid, &self.cfg.model, lambda);
        let data = GridData::new("kx_over_k0", Channel::KxOverK0.unit(), lambda, grid, f.channel(Channel::KxOverK0));
        let invalid = data.invalid_count();
        self.notes.push(format!(
            "{prefix} momentum {}: {invalid} invalid pixels (sub-floor density) rendered as rgb{:?}",
            lambda_tag(lambda),
            output::INVALID_COLOR
        ));
        let clip = self.cfg.render.momentum_clip;
        self.emit_grid(
            &format!("{prefix}_momentum_{}", lambda_tag(lambda)),
            &data,
            |d| output::render_momentum(d, clip),
            false,
        )
    }

    fn streamlines(&mut self, lambda: f64) -> Result<()> {
        let cfg = self.cfg;
        let e = &cfg.ensemble;
        let model = &cfg.model;
        let seeds = seed_ensemble(model.grating(), e.per_slit)?;
        let mut control = StepControl::with_base_step(model, e.base_step).with_stride(e.sample_stride);
        control.tolerance = 1e-4 * model.period();
        let lines = integrate_ensemble(&seeds, (e.z_min, e.z_max), &control, model, lambda)?;
        let report = ordering_check(&lines)?;
        let early = lines.iter().filter(|l| l.terminated_early).count();
        let tag = lambda_tag(lambda);
        self.notes.push(format!(
            "streamlines {tag}: {} lines, {} crossings{}, {early} terminated early",
            lines.len(),
            report.crossings,
            report.first_crossing_z.map_or(String::new(), |z| format!(" (first at z = {z:e} m)")),
        ));
        if cfg.formats.contains(&Format::Csv) {
            let p = self.path(&format!("streamlines_{tag}.csv"));
            output::write_text(&p, &output::streamlines_csv(&lines, lambda))?;
        }
        if cfg.formats.contains(&Format::Image) {
            let g = &cfg.grid;
            let bg = SimulationGrid::new(g.x_min, g.x_max, e.z_min, e.z_max, g.nx, g.nz)?;
            let f = evaluate_grid(&bg, model, lambda);
            let data = GridData::new("density", "1/m", lambda, &bg, f.channel(Channel::Density));
            let img = output::overlay_streamlines(&data, &lines, cfg.render.density_gamma);
            let p = self.path(&format!("streamlines_{tag}.ppm"));
            output::write_bytes(&p, &img.ppm())?;
        }
        Ok(())
    }
}

/// Runs one command and returns the files written (manifest last).
pub fn execute(command: Command, cfg: &RunConfig, out: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out)?;
    let mut run = Run { cfg, out, files: Vec::new(), notes: Vec::new() };
    for &lambda in &cfg.lambdas {
        match command {
            Command::Carpet => run.density("carpet", lambda, &cfg.grid)?,
            Command::Momentum => run.momentum("carpet", lambda, &cfg.grid)?,
            Command::Farfield => {
                run.density("farfield", lambda, &cfg.grid)?;
                run.momentum("farfield", lambda, &cfg.grid)?;
            }
            Command::Streamlines => run.streamlines(lambda)?,
            Command::Diagnose => {}
        }
    }
    if command == Command::Diagnose {
        let p = run.path("diagnose_report.txt");
        output::write_text(&p, &diagnose_report(cfg)?)?;
    }

    let mut manifest = format!("# talbot {} run\n# resolved configuration (SI units)\n", command.name());
    manifest += &cfg.manifest();
    for n in &run.notes {
        let _ = writeln!(manifest, "# {n}");
    }
    for f in &run.files {
        let _ = writeln!(manifest, "# wrote {}", f.display());
    }
    let mp = out.join(format!("{}_manifest.txt", command.name()));
    output::write_text(&mp, &manifest)?;
    run.files.push(mp);
    Ok(run.files)
}

fn pass(ok: bool) -> &'static str {
    if ok {
        "pass"
    } else {
        "fail"
    }
}

/// Structured `key: value` report of the selected diagnostics, one section
/// per configured decoherence strength.
pub fn diagnose_report(cfg: &RunConfig) -> Result<String> {
    let m = &cfg.model;
    let d = &cfg.diagnose;
    let zt = m.talbot_distance();
    let mut s = String::from("# talbot diagnostics\n");
    let _ = writeln!(s, "talbot_distance: {zt:e} m");
    let _ = writeln!(s, "selected: {}", d.select.iter().map(|x| x.name()).collect::<Vec<_>>().join(", "));
    if d.select.is_empty() {
        return Ok(s);
    }
    for &lambda in &cfg.lambdas {
        let _ = writeln!(s, "\n[decoherence_lambda = {lambda:e} m^-3]");
        for sel in &d.select {
            match sel {
                Diagnostic::Crossing => {
                    if lambda > 0.0 {
                        match coherence_crossing(m, lambda)? {
                            Some(z) => {
                                let _ = writeln!(s, "crossing.z: {z:e} m");
                                let _ = writeln!(s, "crossing.z_over_zT: {:.4}", z / zt);
                            }
                            None => {
                                let _ = writeln!(s, "crossing.z: none in [1e-6, 1e3] z_T");
                            }
                        }
                    } else {
                        let _ = writeln!(s, "crossing.z: none (coherent)");
                    }
                }
                Diagnostic::Revival => {
                    let r = revival_correlation(m, lambda, zt, d.revival_window, 0.0, 1024)?;
                    let _ = writeln!(s, "revival.window_half_width: {:e} m", r.window_half_width);
                    let _ = writeln!(s, "revival.pearson: {:.6}", r.pearson);
                    let _ = writeln!(s, "revival.threshold: {}", d.revival_threshold);
                    let _ = writeln!(s, "revival.result: {}", pass(r.pearson >= d.revival_threshold));
                }
                Diagnostic::Orders => {
                    let search = OrderSearch { presence_floor: d.order_floor, ..OrderSearch::default() };
                    let scan = diffraction_order_positions(m, lambda, d.far_z, d.max_order, &search)?;
                    let _ = writeln!(s, "orders.z: {:e} m", d.far_z);
                    let _ = writeln!(s, "orders.tolerance: {}", d.order_tolerance);
                    for o in &scan.orders {
                        let _ = writeln!(
                            s,
                            "order.{}: peak {:e} m, predicted {:e} m, relative error {:.4e}, strength {:.3e}, {}",
                            o.order,
                            o.peak_x,
                            o.predicted_x,
                            o.relative_error,
                            o.strength,
                            pass(o.relative_error <= d.order_tolerance)
                        );
                    }
                    for (l, why) in &scan.omitted {
                        let _ = writeln!(s, "order.{l}: omitted ({why})");
                    }
                }
                Diagnostic::Plateaus => {
                    let search = PlateauSearch::default().with_cut(d.density_cut);
                    let p = detect_momentum_plateaus(m, lambda, d.far_z, &search)?;
                    let _ = writeln!(s, "plateaus.z: {:e} m", d.far_z);
                    let _ = writeln!(
                        s,
                        "plateaus.settings: density_cut {}, slope_fraction {}, smoothing {}, min_width {}",
                        search.density_cut, search.slope_fraction, search.smoothing, search.min_width
                    );
                    let _ = writeln!(s, "plateaus.count: {}", p.len());
                    for (i, q) in p.iter().enumerate() {
                        let dev = (q.level - q.level.round()).abs();
                        let _ = writeln!(
                            s,
                            "plateau.{i}: level {:.4}, x [{:e}, {:e}] m, nearest integer {}, {}",
                            q.level,
                            q.x_start,
                            q.x_end,
                            q.level.round() + 0.0,
                            pass(dev <= d.plateau_tolerance)
                        );
                    }
                }
                Diagnostic::Onaxis => {
                    let n = d.onaxis_points.max(2);
                    let zs: Vec<f64> = (0..n).map(|i| lattice(0.0, d.onaxis_z_max, n, i)).collect();
                    for (i, (z, rho)) in onaxis_profile(m, lambda, &zs)?.into_iter().enumerate() {
                        let _ = writeln!(s, "onaxis.{i}: z {z:e} m, density {rho:e} 1/m");
                    }
                }
            }
        }
    }
    Ok(s)
}
