//! `hyperghost` command-line front end.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use hyperghost::biphoton::{closed_form_amplitude, quadrature_oracle_amplitude};
use hyperghost::config::{OutputFormat, RunConfig};
use hyperghost::detector::build_ghost_image;
use hyperghost::experiments::{
    background_subtract, ghost_image_map_with, ghost_interference_map, SlitAxis,
};
use hyperghost::io::{save_map, GridData, MapFormat};
use hyperghost::optics::{composite_relay_scale, ghost_magnification, ImagingSystem};
use hyperghost::polarization::{chsh_s, make_bell, BellKind, ChshAngles, VisibilityModel};
use hyperghost::{validation, Exec};

#[derive(Parser, Debug)]
#[command(
    name = "hyperghost",
    version,
    about = "Ghost interference and polarization-sensitive ghost imaging simulator"
)]
struct Cli {
    /// Run configuration (key = value lines).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override one configuration key, e.g. `--set source.sigma=2e-3`.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Monte Carlo seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    format: Option<FormatArg>,
    #[arg(long, global = true)]
    exec: Option<ExecArg>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum FormatArg {
    Matrix,
    Graymap,
    Both,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum ExecArg {
    Parallel,
    Sequential,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum AxisArg {
    X,
    Y,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Coincidence map behind a double slit.
    Interference {
        #[arg(long)]
        axis: Option<AxisArg>,
        /// Slit separation, metres.
        #[arg(long)]
        d: Option<f64>,
        /// Slit opening, metres (0 for ideal slits).
        #[arg(long)]
        slit_width: Option<f64>,
    },
    /// Ghost image of a phase pattern.
    Image {
        #[arg(long, allow_hyphen_values = true)]
        delta1: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        delta2: Option<f64>,
        /// Pattern file (PGM P2 or matrix text).
        #[arg(long)]
        pattern: Option<PathBuf>,
        /// Also compute the uniform background and write the difference.
        #[arg(long)]
        subtract_background: bool,
    },
    /// Stochastic exposure of the ghost image minus background.
    Montecarlo {
        #[arg(long, allow_hyphen_values = true)]
        delta1: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        delta2: Option<f64>,
        #[arg(long)]
        pattern: Option<PathBuf>,
        /// Exposure, seconds.
        #[arg(long)]
        exposure: Option<f64>,
    },
    /// CHSH value of the singlet.
    Chsh {
        #[arg(long, default_value_t = 1.0)]
        visibility: f64,
        /// Analyser angles a, a', b, b' in degrees.
        #[arg(long, num_args = 4, allow_hyphen_values = true, value_names = ["A", "A2", "B", "B2"])]
        angles: Option<Vec<f64>>,
    },
    /// Run the built-in checks; exit status 1 if any fails.
    Validate,
    /// Print the two-photon amplitude along a line of x2.
    Amplitude {
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        x1: f64,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        y1: f64,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        y2: f64,
        #[arg(long, default_value_t = -2e-3, allow_hyphen_values = true)]
        from: f64,
        #[arg(long, default_value_t = 2e-3, allow_hyphen_values = true)]
        to: f64,
        #[arg(long, default_value_t = 41)]
        n: usize,
        /// Add the quadrature oracle as extra columns.
        #[arg(long)]
        oracle: bool,
    },
}

fn resolve_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    for kv in &cli.overrides {
        let (k, v) = kv
            .split_once('=')
            .with_context(|| format!("--set expects KEY=VALUE, got {kv:?}"))?;
        cfg.set(k.trim(), v.trim())
            .map_err(|m| anyhow::anyhow!("--set {}: {m}", k.trim()))?;
    }
    if let Some(s) = cli.seed {
        cfg.detector.seed = s;
    }
    if let Some(o) = &cli.out {
        cfg.output_dir = o.clone();
    }
    if let Some(f) = cli.format {
        cfg.output_format = match f {
            FormatArg::Matrix => OutputFormat::Matrix,
            FormatArg::Graymap => OutputFormat::Graymap,
            FormatArg::Both => OutputFormat::Both,
        };
    }
    if let Some(e) = cli.exec {
        cfg.exec = match e {
            ExecArg::Parallel => Exec::Parallel,
            ExecArg::Sequential => Exec::Sequential,
        };
    }
    // re-check cross-field constraints after overrides
    RunConfig::parse(&cfg.to_text(), "resolved configuration")
        .context("invalid configuration after command-line overrides")
}

fn set_angles(cfg: &mut RunConfig, d1: Option<f64>, d2: Option<f64>, pattern: &Option<PathBuf>) {
    if let Some(d) = d1 {
        cfg.delta1_deg = d;
    }
    if let Some(d) = d2 {
        cfg.delta2_deg = d;
    }
    if let Some(p) = pattern {
        cfg.pattern_file = Some(p.clone());
    }
}

struct Outputs<'a> {
    cfg: &'a RunConfig,
}

impl Outputs<'_> {
    fn prepare(&self) -> Result<()> {
        let dir = &self.cfg.output_dir;
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let echo = dir.join("run.conf");
        std::fs::write(&echo, self.cfg.to_text())
            .with_context(|| format!("writing {}", echo.display()))?;
        Ok(())
    }

    fn write(&self, stem: &str, data: &dyn GridData) -> Result<()> {
        let dir = &self.cfg.output_dir;
        let mut targets = Vec::new();
        if matches!(
            self.cfg.output_format,
            OutputFormat::Matrix | OutputFormat::Both
        ) {
            targets.push((dir.join(format!("{stem}.txt")), MapFormat::MatrixText));
        }
        if matches!(
            self.cfg.output_format,
            OutputFormat::Graymap | OutputFormat::Both
        ) {
            targets.push((dir.join(format!("{stem}.pgm")), MapFormat::Graymap));
        }
        for (path, fmt) in targets {
            save_map(data, &path, fmt)?;
            println!("wrote {}", path.display());
        }
        Ok(())
    }
}

fn run_interference(
    mut cfg: RunConfig,
    axis: Option<AxisArg>,
    d: Option<f64>,
    width: Option<f64>,
) -> Result<()> {
    if let Some(a) = axis {
        cfg.slit_axis = match a {
            AxisArg::X => SlitAxis::X,
            AxisArg::Y => SlitAxis::Y,
        };
    }
    if let Some(d) = d {
        cfg.slit_d = d;
    }
    if let Some(w) = width {
        cfg.slit_width = w;
    }
    let params = cfg.interference_source()?;
    let slit = cfg.slit()?;
    let map = ghost_interference_map(&params, &slit, &cfg.interference_grid()?, cfg.exec)?;
    println!(
        "expected fringe period {:.4} mm",
        slit.fringe_period(&params) * 1e3
    );
    let out = Outputs { cfg: &cfg };
    out.prepare()?;
    out.write("interference", &map)
}

fn run_image(cfg: RunConfig, subtract: bool) -> Result<()> {
    let params = cfg.imaging_source()?;
    let lens = cfg.lens()?;
    let pattern = cfg.pattern()?;
    let grid = cfg.image_grid(&params, &lens, &pattern)?;
    let (d1, d2) = cfg.polarizers()?;
    let m = ghost_magnification(&params, &lens)?;
    println!(
        "ghost magnification {m:.4}; composite relay scale {:.4} for total {}",
        composite_relay_scale(m, cfg.total_magnification),
        cfg.total_magnification
    );
    let sys = ImagingSystem::new(&params, &lens, &cfg.lens_quad())?;
    let map = ghost_image_map_with(&sys, &pattern, d1, d2, &grid, cfg.exec)?;
    let out = Outputs { cfg: &cfg };
    out.prepare()?;
    out.write("image", &map)?;
    if subtract {
        let bg = ghost_image_map_with(
            &sys,
            &cfg.background_pattern(&pattern)?,
            d1,
            d2,
            &grid,
            cfg.exec,
        )?;
        out.write("background", &bg)?;
        out.write("image_minus_background", &background_subtract(&map, &bg)?)?;
    }
    Ok(())
}

fn run_montecarlo(cfg: RunConfig) -> Result<()> {
    let params = cfg.imaging_source()?;
    let lens = cfg.lens()?;
    let pattern = cfg.pattern()?;
    let grid = cfg.image_grid(&params, &lens, &pattern)?;
    let (d1, d2) = cfg.polarizers()?;
    let sys = ImagingSystem::new(&params, &lens, &cfg.lens_quad())?;
    let signal = ghost_image_map_with(&sys, &pattern, d1, d2, &grid, cfg.exec)?;
    let bg = ghost_image_map_with(
        &sys,
        &cfg.background_pattern(&pattern)?,
        d1,
        d2,
        &grid,
        cfg.exec,
    )?;
    let frame = build_ghost_image(&signal, &bg, &cfg.detector, cfg.exec)?;
    println!(
        "gates opened: signal {}, background {}",
        frame.signal.gates_opened, frame.background.gates_opened
    );
    let out = Outputs { cfg: &cfg };
    out.prepare()?;
    out.write("analytic", &signal)?;
    out.write("montecarlo", &frame)
}

fn run_chsh(visibility: f64, angles: Option<Vec<f64>>) -> Result<()> {
    let angles = match angles {
        Some(a) => ChshAngles::from_degrees(a[0], a[1], a[2], a[3])?,
        None => ChshAngles::standard(),
    };
    let s = chsh_s(
        &make_bell(BellKind::PsiMinus),
        &angles,
        VisibilityModel::new(visibility)?,
    );
    println!("{s:.4}");
    Ok(())
}

fn run_validate() -> Result<bool> {
    let results = validation::run_all();
    for r in &results {
        println!("{r}");
    }
    Ok(results.iter().all(|r| r.passed))
}

#[allow(clippy::too_many_arguments)]
fn run_amplitude(
    cfg: &RunConfig,
    x1: f64,
    y1: f64,
    y2: f64,
    from: f64,
    to: f64,
    n: usize,
    oracle: bool,
) -> Result<()> {
    if n < 2 {
        bail!("--n must be at least 2");
    }
    let p = cfg.interference_source()?;
    let quad = cfg.source_quad();
    println!("# x1={x1} y1={y1} y2={y2}");
    println!(
        "# x2 re im abs{}",
        if oracle { " oracle_re oracle_im" } else { "" }
    );
    for i in 0..n {
        let x2 = from + (to - from) * i as f64 / (n - 1) as f64;
        let z = closed_form_amplitude(&p, x1, y1, x2, y2)?.value();
        if oracle {
            let q = quadrature_oracle_amplitude(&p, x1, y1, x2, y2, &quad)?.value();
            println!(
                "{x2:e} {:e} {:e} {:e} {:e} {:e}",
                z.re,
                z.im,
                z.norm(),
                q.re,
                q.im
            );
        } else {
            println!("{x2:e} {:e} {:e} {:e}", z.re, z.im, z.norm());
        }
    }
    Ok(())
}

fn run(cli: Cli) -> Result<bool> {
    let mut cfg = resolve_config(&cli)?;
    match cli.command {
        Command::Interference {
            axis,
            d,
            slit_width,
        } => run_interference(cfg, axis, d, slit_width)?,
        Command::Image {
            delta1,
            delta2,
            pattern,
            subtract_background,
        } => {
            set_angles(&mut cfg, delta1, delta2, &pattern);
            run_image(cfg, subtract_background)?
        }
        Command::Montecarlo {
            delta1,
            delta2,
            pattern,
            exposure,
        } => {
            set_angles(&mut cfg, delta1, delta2, &pattern);
            if let Some(e) = exposure {
                cfg.detector.exposure = e;
            }
            run_montecarlo(cfg)?
        }
        Command::Chsh { visibility, angles } => run_chsh(visibility, angles)?,
        Command::Validate => return run_validate(),
        Command::Amplitude {
            x1,
            y1,
            y2,
            from,
            to,
            n,
            oracle,
        } => run_amplitude(&cfg, x1, y1, y2, from, to, n, oracle)?,
    }
    Ok(true)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
