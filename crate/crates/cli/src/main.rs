use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use expmap_core::components::{
    bifurcation_child, bifurcation_point, boundary_trace, find_components, internal_ray_landing, uniform_angles,
    write_internal_ray_csv, ChildRecord, ComponentRecord, HyperbolicComponent, Window,
};
use expmap_core::dynamics::{classify_singular_orbit, find_periodic_orbit, Complex, OrbitClassification};
use expmap_core::rays::{ray_summary, trace_parameter_ray, trace_with_landing, write_ray_csv};
use expmap_core::render::{overlay_rays, render, write_ppm, Image, RenderSpec};
use expmap_core::symbolic::{kneading_sequence, Address};
use expmap_core::verify::{run_all, run_criterion, VerifyReport, CRITERIA};
use expmap_core::Config;

/// Explore the parameter space of the exponential family e^z + kappa.
#[derive(Parser, Debug)]
#[command(name = "expmap", version)]
struct Cli {
    /// Configuration file of key=value lines (default: $EXPMAP_CONFIG).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override one configuration key, e.g. --set rays.gridFactor=1.05.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Render a period-coloured image of parameter space.
    Render(RenderArgs),
    /// Trace a parameter ray and estimate its landing point.
    TraceRay(TraceRayArgs),
    /// Trace an internal ray of a hyperbolic component to its landing point.
    InternalRay(InternalRayArgs),
    /// Print the kneading sequence of an external address.
    Kneading { address: String },
    /// List the hyperbolic components of one period meeting a window.
    Components(ComponentsArgs),
    /// List the bifurcation children of a component.
    Bifurcations(BifurcationsArgs),
    /// Run the acceptance suite and print a JSON report.
    Verify(VerifyArgs),
}

#[derive(Args, Debug)]
struct RenderArgs {
    /// Window as re_min:re_max:im_min:im_max.
    #[arg(long, default_value = "-6:6:-4:4", allow_hyphen_values = true)]
    window: String,
    /// Image size as WIDTHxHEIGHT.
    #[arg(long, default_value = "800x600")]
    size: String,
    /// Output file; `.png` writes PNG, anything else binary PPM.
    #[arg(long, short, default_value = "expmap.ppm")]
    output: PathBuf,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long)]
    period_cap: Option<usize>,
    #[arg(long)]
    threads: Option<usize>,
    /// Overlay the parameter ray at this address (repeatable).
    #[arg(long = "ray", allow_hyphen_values = true)]
    rays: Vec<String>,
    #[arg(long, default_value_t = 0.05)]
    ray_tmin: f64,
}

#[derive(Args, Debug)]
struct TraceRayArgs {
    address: String,
    #[arg(long, default_value_t = 20.0)]
    tmax: f64,
    #[arg(long, default_value_t = 0.05)]
    tmin: f64,
    /// Write samples here instead of standard output.
    #[arg(long)]
    csv: Option<PathBuf>,
}

/// Selects a component: the period-1 component with the given tag, followed
/// along a path of bifurcations, or the component of an attracting orbit
/// at a seed parameter.
#[derive(Args, Debug)]
struct ComponentArgs {
    /// Branch tag of the period-1 component.
    #[arg(long, default_value_t = 0, allow_hyphen_values = true)]
    tag: i64,
    /// Bifurcations to follow, e.g. 1/2,1/3.
    #[arg(long, default_value = "")]
    path: String,
    /// Seed parameter RE,IM of an attracting orbit instead.
    #[arg(long, allow_hyphen_values = true)]
    seed: Option<String>,
}

#[derive(Args, Debug)]
struct InternalRayArgs {
    #[command(flatten)]
    component: ComponentArgs,
    /// Height h; the ray lands where the multiplier is e^{2 pi i h}.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    height: f64,
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ComponentsArgs {
    #[arg(long)]
    period: usize,
    #[arg(long, default_value = "-6:6:-4:4", allow_hyphen_values = true)]
    window: String,
    #[arg(long, default_value_t = 0.05)]
    grid_step: f64,
    /// Number of boundary samples per component; 0 skips the boundary.
    #[arg(long, default_value_t = 0)]
    boundary: usize,
    /// Largest denominator of listed bifurcation children; 0 lists none.
    #[arg(long, default_value_t = 0)]
    children: i64,
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct BifurcationsArgs {
    #[command(flatten)]
    component: ComponentArgs,
    #[arg(long, default_value_t = 4)]
    max_q: i64,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    /// Run only this criterion.
    #[arg(long)]
    criterion: Option<usize>,
    #[arg(long, short)]
    output: Option<PathBuf>,
}

/// A failure of the computation itself rather than of the invocation.
#[derive(Debug)]
struct Numerical(String);

impl std::fmt::Display for Numerical {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Numerical {}

fn numerical(e: impl std::fmt::Display) -> anyhow::Error {
    Numerical(e.to_string()).into()
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => code,
        // a closed pipe downstream (e.g. `| head`) is not an error
        Err(e) if is_broken_pipe(&e) => ExitCode::SUCCESS,
        Err(e) if e.is::<Numerical>() => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            eprintln!("run `expmap --help` for usage");
            ExitCode::from(1)
        }
    }
}

fn is_broken_pipe(e: &anyhow::Error) -> bool {
    e.chain()
        .any(|c| c.downcast_ref::<io::Error>().is_some_and(|io| io.kind() == io::ErrorKind::BrokenPipe))
}

fn load_config(cli: &Cli) -> Result<Config> {
    let path = cli
        .config
        .clone()
        .or_else(|| std::env::var_os("EXPMAP_CONFIG").map(PathBuf::from));
    let mut config = match path {
        Some(p) => Config::from_file(&p)?,
        None => Config::default(),
    };
    for o in &cli.overrides {
        let (key, value) = o
            .split_once('=')
            .ok_or_else(|| anyhow!("--set expects KEY=VALUE, got {o:?}"))?;
        config.set(key, value)?;
    }
    Ok(config)
}

fn run(cli: Cli) -> Result<ExitCode> {
    let mut config = load_config(&cli)?;
    match cli.command {
        Command::Render(args) => cmd_render(args, &mut config),
        Command::TraceRay(args) => cmd_trace_ray(args, &config),
        Command::InternalRay(args) => cmd_internal_ray(args, &config),
        Command::Kneading { address } => cmd_kneading(&address),
        Command::Components(args) => cmd_components(args, &config),
        Command::Bifurcations(args) => cmd_bifurcations(args, &config),
        Command::Verify(args) => cmd_verify(args, &config),
    }
}

fn parse_window(text: &str) -> Result<Window> {
    let parts: Vec<f64> = text
        .split(':')
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .with_context(|| format!("window {text:?} is not re_min:re_max:im_min:im_max"))?;
    let [a, b, c, d] = parts[..] else {
        bail!("window {text:?} needs four numbers");
    };
    let w = Window::new(a, b, c, d);
    if !w.is_valid() {
        bail!("window {text:?} is empty");
    }
    Ok(w)
}

fn parse_size(text: &str) -> Result<(usize, usize)> {
    let (w, h) = text
        .split_once(['x', 'X'])
        .ok_or_else(|| anyhow!("size {text:?} is not WIDTHxHEIGHT"))?;
    let (w, h): (usize, usize) = (w.parse()?, h.parse()?);
    if w == 0 || h == 0 {
        bail!("size {text:?} must be at least 1x1");
    }
    Ok((w, h))
}

fn parse_complex(text: &str) -> Result<Complex> {
    let (re, im) = text
        .split_once(',')
        .ok_or_else(|| anyhow!("expected RE,IM, got {text:?}"))?;
    Ok(Complex::new(re.trim().parse()?, im.trim().parse()?))
}

fn parse_external(text: &str) -> Result<expmap_core::symbolic::ExternalAddress> {
    match text.parse::<Address>()? {
        Address::External(a) => Ok(a),
        Address::Intermediate(a) => bail!("{a} is an intermediate address; an external address is needed"),
    }
}

/// Writes to the file, or to standard output when `path` is `None`.
fn with_output(path: Option<&Path>, f: impl FnOnce(&mut dyn Write) -> io::Result<()>) -> Result<()> {
    match path {
        Some(p) => {
            let mut out = BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?);
            f(&mut out)?;
            out.flush()?;
        }
        None => {
            let stdout = io::stdout();
            let mut out = stdout.lock();
            f(&mut out)?;
            out.flush()?;
        }
    }
    Ok(())
}

fn write_json(path: Option<&Path>, value: &impl serde::Serialize) -> Result<()> {
    with_output(path, |out| {
        serde_json::to_writer_pretty(&mut *out, value)?;
        writeln!(out)
    })
}

fn write_png(image: &Image, path: &Path) -> Result<()> {
    let file = BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?);
    let mut encoder = png::Encoder::new(file, image.width as u32, image.height as u32);
    encoder.set_color(png::ColorType::Rgb);
    encoder.set_depth(png::BitDepth::Eight);
    let mut writer = encoder.write_header()?;
    writer.write_image_data(&image.bytes())?;
    writer.finish()?;
    Ok(())
}

fn cmd_render(args: RenderArgs, config: &mut Config) -> Result<ExitCode> {
    let window = parse_window(&args.window)?;
    let (width, height) = parse_size(&args.size)?;
    if let Some(m) = args.max_iter {
        config.render.max_iter = m;
    }
    if let Some(p) = args.period_cap {
        config.render.period_cap = p;
    }
    if let Some(t) = args.threads {
        config.render.threads = t;
    }
    let addresses = args
        .rays
        .iter()
        .map(|a| parse_external(a))
        .collect::<Result<Vec<_>>>()?;
    let spec = RenderSpec::new(window, width, height, &config.render, &config.dynamics);
    let mut image = render(&spec, &config.dynamics, config.render.threads).map_err(numerical)?;
    if !addresses.is_empty() {
        let rays = addresses
            .iter()
            .map(|s| trace_parameter_ray(s, 20.0, args.ray_tmin, &config.rays))
            .collect::<Result<Vec<_>, _>>()
            .map_err(numerical)?;
        image = overlay_rays(&image, &spec, &rays, &[]);
    }
    let is_png = args
        .output
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("png"));
    if is_png {
        write_png(&image, &args.output)?;
    } else {
        with_output(Some(&args.output), |out| write_ppm(&image, out))?;
    }
    eprintln!("wrote {}x{} image to {}", width, height, args.output.display());
    Ok(ExitCode::SUCCESS)
}

fn cmd_trace_ray(args: TraceRayArgs, config: &Config) -> Result<ExitCode> {
    let s = parse_external(&args.address)?;
    if !(args.tmax > args.tmin && args.tmin > 0.0) {
        bail!("need tmax > tmin > 0");
    }
    let ray = trace_with_landing(&s, args.tmax, args.tmin, &config.rays).map_err(numerical)?;
    with_output(args.csv.as_deref(), |out| write_ray_csv(&ray, out))?;
    let summary = serde_json::to_string(&ray_summary(&ray, &config.dynamics))?;
    eprintln!("{summary}");
    match ray.landing {
        Some(l) => eprintln!("landing {} +- {:.1e}", l.kappa, l.error_bar),
        None if args.tmin <= 0.05 => return Err(numerical("landing extrapolation did not converge")),
        None => eprintln!("no landing estimate (tmin above 0.05)"),
    }
    Ok(ExitCode::SUCCESS)
}

fn select_component(args: &ComponentArgs, config: &Config) -> Result<HyperbolicComponent> {
    let mut w = match &args.seed {
        Some(text) => {
            let kappa = parse_complex(text)?;
            match classify_singular_orbit(kappa, &config.dynamics) {
                OrbitClassification::Attracting {
                    period, orbit_point, ..
                } => {
                    let orbit = find_periodic_orbit(kappa, period, orbit_point, &config.dynamics).map_err(numerical)?;
                    HyperbolicComponent::from_orbit(kappa, &orbit)
                }
                other => return Err(numerical(format!("{kappa} has no attracting orbit: {other:?}"))),
            }
        }
        None => HyperbolicComponent::period_one(args.tag),
    };
    for step in args.path.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let (p, q) = step
            .split_once('/')
            .ok_or_else(|| anyhow!("bifurcation {step:?} is not p/q"))?;
        let (p, q): (i64, i64) = (p.parse()?, q.parse()?);
        w = bifurcation_child(&w, p, q, &config.components, &config.dynamics).map_err(numerical)?;
    }
    Ok(w)
}

fn cmd_internal_ray(args: InternalRayArgs, config: &Config) -> Result<ExitCode> {
    let w = select_component(&args.component, config)?;
    let (ray, landing) =
        internal_ray_landing(&w, args.height, &config.components, &config.dynamics).map_err(numerical)?;
    with_output(args.csv.as_deref(), |out| write_internal_ray_csv(&ray, out))?;
    eprintln!(
        "period {} height {}: lands at {} with period {} multiplier {}",
        w.period, args.height, landing.kappa, landing.orbit_period, landing.multiplier
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_kneading(text: &str) -> Result<ExitCode> {
    let s = parse_external(text)?;
    println!("{}", kneading_sequence(&s).describe());
    Ok(ExitCode::SUCCESS)
}

fn children_of(w: &HyperbolicComponent, max_q: i64, config: &Config) -> Vec<ChildRecord> {
    let mut out = Vec::new();
    for q in 2..=max_q {
        for p in 1..q {
            if gcd(p, q) != 1 {
                continue;
            }
            if let Ok(c) = bifurcation_child(w, p, q, &config.components, &config.dynamics) {
                out.push(ChildRecord {
                    p,
                    q,
                    period: c.period,
                    seed: c.seed,
                });
            }
        }
    }
    out
}

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a.abs()
    } else {
        gcd(b, a % b)
    }
}

fn cmd_components(args: ComponentsArgs, config: &Config) -> Result<ExitCode> {
    let window = parse_window(&args.window)?;
    if args.period == 0 || !(args.grid_step > 0.0) {
        bail!("period must be positive and grid step > 0");
    }
    let components = find_components(args.period, window, args.grid_step, &config.components, &config.dynamics)
        .map_err(numerical)?;
    let thetas = uniform_angles(args.boundary);
    let records: Vec<ComponentRecord> = components
        .iter()
        .map(|w| {
            let boundary = (args.boundary > 0)
                .then(|| boundary_trace(w, &thetas, &config.components).ok())
                .flatten();
            ComponentRecord::new(w, boundary.as_ref(), children_of(w, args.children, config))
        })
        .collect();
    write_json(args.output.as_deref(), &records)?;
    eprintln!("{} components of period {}", records.len(), args.period);
    Ok(ExitCode::SUCCESS)
}

fn cmd_bifurcations(args: BifurcationsArgs, config: &Config) -> Result<ExitCode> {
    let w = select_component(&args.component, config)?;
    #[derive(serde::Serialize)]
    struct Bifurcation {
        p: i64,
        q: i64,
        root: Option<Complex>,
        child: Option<ChildRecord>,
        error: Option<String>,
    }
    let mut list = Vec::new();
    for q in 2..=args.max_q {
        for p in (1..q).filter(|&p| gcd(p, q) == 1) {
            let root = bifurcation_point(&w, p, q, &config.components).ok().map(|r| r.0);
            let (child, error) = match bifurcation_child(&w, p, q, &config.components, &config.dynamics) {
                Ok(c) => (
                    Some(ChildRecord {
                        p,
                        q,
                        period: c.period,
                        seed: c.seed,
                    }),
                    None,
                ),
                Err(e) => (None, Some(e.to_string())),
            };
            list.push(Bifurcation {
                p,
                q,
                root,
                child,
                error,
            });
        }
    }
    write_json(None, &list)?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_verify(args: VerifyArgs, config: &Config) -> Result<ExitCode> {
    let report = match args.criterion {
        Some(id) if (1..=CRITERIA).contains(&id) => {
            let c = run_criterion(id, config);
            VerifyReport {
                passed: c.passed,
                criteria: vec![c],
            }
        }
        Some(id) => bail!("criteria are numbered 1 to {CRITERIA}, got {id}"),
        None => run_all(config),
    };
    for c in &report.criteria {
        eprintln!("{}", VerifyReport::line(c));
    }
    write_json(args.output.as_deref(), &report)?;
    Ok(if report.passed { ExitCode::SUCCESS } else { ExitCode::from(2) })
}
