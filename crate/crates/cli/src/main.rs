//! `feaslab`: batch front end for the feasibility lab.

use std::net::{IpAddr, Ipv4Addr, SocketAddr};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use feaslab_core::experiments::{with_workers, DEFAULT_MAP_SIZE, DEFAULT_N_LAMBDA, DEFAULT_N_STARTS, DESK_N_STARTS};
use feaslab_core::io::{
    encode_map_pgm, read_constellation, write_constellation, write_sweep_csv, write_trace_csv, Manifest,
};
use feaslab_core::*;

#[derive(Parser)]
#[command(name = "feaslab", version, about = "Projection algorithms on finite point sets in the plane")]
struct Cli {
    /// Worker threads for parallel experiments (default: all cores).
    #[arg(long, global = true, env = "FEASLAB_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a constellation file.
    Generate(GenerateArgs),
    /// Run one orbit and print its outcome.
    Orbit(OrbitArgs),
    /// Success rate over a lambda grid.
    Sweep(SweepArgs),
    /// Iteration-count map as a PGM image.
    Map(MapArgs),
    /// Success rate at one lambda.
    Rates(RatesArgs),
    /// Run the HTTP service.
    Serve(ServeArgs),
}

#[derive(Args)]
struct GenerateArgs {
    /// few-few, few-many, many-few or many-many.
    #[arg(long, conflicts_with_all = ["sets", "circles"])]
    preset: Option<String>,
    #[arg(long, requires = "max_points", conflicts_with = "circles")]
    sets: Option<usize>,
    #[arg(long, requires = "sets")]
    max_points: Option<usize>,
    /// Concentric rings, e.g. "4:8,8:16". Sets are separated by ',', rings
    /// within a set by '+', each ring is radius:count[:phase].
    #[arg(long)]
    circles: Option<String>,
    /// Generator seed. Presets use their reference seed when omitted.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct AlgoArgs {
    #[arg(long)]
    constellation: PathBuf,
    /// cycp, exparp, dr or cycdr.
    #[arg(long)]
    algo: AlgorithmKind,
}

#[derive(Clone, Copy, Debug)]
enum LambdaArg {
    Value(f64),
    Best,
    Default,
}

impl std::str::FromStr for LambdaArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "best" => Ok(LambdaArg::Best),
            "default" => Ok(LambdaArg::Default),
            _ => s
                .parse()
                .map(LambdaArg::Value)
                .map_err(|_| format!("expected a number, 'best' or 'default', got '{s}'")),
        }
    }
}

fn config(kind: AlgorithmKind, lambda: LambdaArg) -> Result<AlgorithmConfig> {
    let lambda = match lambda {
        LambdaArg::Value(l) => l,
        LambdaArg::Best => kind.lambda_best(),
        LambdaArg::Default => kind.lambda_default(),
    };
    Ok(AlgorithmConfig::new(kind, lambda)?)
}

#[derive(Args)]
struct OrbitArgs {
    #[command(flatten)]
    algo: AlgoArgs,
    /// Number, "best" or "default".
    #[arg(long, default_value = "default")]
    lambda: LambdaArg,
    /// Starting point "x,y".
    #[arg(long, allow_hyphen_values = true)]
    start: String,
    #[arg(long)]
    out_csv: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum RegionKind {
    Local,
    Global,
    Custom,
}

#[derive(Args)]
struct RegionArgs {
    #[arg(long, value_enum, default_value = "local")]
    region: RegionKind,
    /// "xmin,xmax,ymin,ymax" for --region custom.
    #[arg(long, allow_hyphen_values = true)]
    bounds: Option<String>,
}

impl RegionArgs {
    fn resolve(&self) -> Result<Region> {
        match (self.region, &self.bounds) {
            (RegionKind::Custom, Some(b)) => {
                let v = parse_numbers(b, 4).context("--bounds")?;
                Ok(Region::new(v[0], v[1], v[2], v[3])?)
            }
            (RegionKind::Custom, None) => bail!("--region custom needs --bounds xmin,xmax,ymin,ymax"),
            (_, Some(_)) => bail!("--bounds only applies to --region custom"),
            (RegionKind::Local, None) => Ok(Region::local()),
            (RegionKind::Global, None) => Ok(Region::global()),
        }
    }
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    algo: AlgoArgs,
    #[command(flatten)]
    region: RegionArgs,
    #[arg(long, default_value_t = DEFAULT_N_LAMBDA)]
    n_lambda: usize,
    #[arg(long, default_value_t = DEFAULT_N_STARTS)]
    n_starts: usize,
    #[arg(long)]
    out_csv: Option<PathBuf>,
}

#[derive(Args)]
struct MapArgs {
    #[command(flatten)]
    algo: AlgoArgs,
    #[arg(long, default_value = "default")]
    lambda: LambdaArg,
    #[command(flatten)]
    region: RegionArgs,
    /// Raster size "WxH".
    #[arg(long, default_value_t = format!("{DEFAULT_MAP_SIZE}x{DEFAULT_MAP_SIZE}"))]
    size: String,
    #[arg(long)]
    out_pgm: PathBuf,
}

#[derive(Args)]
struct RatesArgs {
    #[command(flatten)]
    algo: AlgoArgs,
    #[arg(long, default_value = "default")]
    lambda: LambdaArg,
    #[command(flatten)]
    region: RegionArgs,
    #[arg(long, default_value_t = DESK_N_STARTS)]
    n_starts: usize,
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long, default_value_t = feaslab_service::DEFAULT_PORT)]
    port: u16,
    #[arg(long, default_value_t = IpAddr::V4(Ipv4Addr::LOCALHOST))]
    host: IpAddr,
    /// Directory with the built explorer UI, served at /.
    #[arg(long = "static")]
    static_dir: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let text = e.render().to_string();
            eprintln!("{}", text.lines().next().unwrap_or("invalid arguments"));
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", format!("{e:#}").replace('\n', " "));
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    if cli.threads == Some(0) {
        bail!("--threads must be at least 1");
    }
    let threads = cli.threads;
    match cli.command {
        Command::Generate(a) => generate(a),
        Command::Orbit(a) => orbit(a),
        Command::Sweep(a) => with_workers(threads, || sweep(a))?,
        Command::Map(a) => with_workers(threads, || map(a))?,
        Command::Rates(a) => with_workers(threads, || rates(a))?,
        Command::Serve(a) => serve(a, threads),
    }
}

fn parse_numbers(s: &str, n: usize) -> Result<Vec<f64>> {
    let v = s
        .split(',')
        .map(|t| t.trim().parse::<f64>().with_context(|| format!("'{t}' is not a number")))
        .collect::<Result<Vec<_>>>()?;
    if v.len() != n {
        bail!("expected {n} comma-separated numbers, got '{s}'");
    }
    Ok(v)
}

fn parse_circles(s: &str) -> Result<CircleSpec> {
    let mut sets = Vec::new();
    for set in s.split(',') {
        let mut rings = Vec::new();
        for ring in set.split('+') {
            let parts: Vec<&str> = ring.trim().split(':').collect();
            let bad = || format!("ring '{ring}' should be radius:count[:phase]");
            if parts.len() < 2 || parts.len() > 3 {
                bail!(bad());
            }
            let radius = parts[0].parse().with_context(bad)?;
            let count = parts[1].parse().with_context(bad)?;
            let phase = parts.get(2).map(|p| p.parse()).transpose().with_context(bad)?.unwrap_or(0.0);
            rings.push(Ring { radius, count, phase });
        }
        sets.push(rings);
    }
    Ok(CircleSpec { sets })
}

fn write_file(path: &Path, bytes: impl AsRef<[u8]>) -> Result<()> {
    std::fs::write(path, bytes).with_context(|| format!("cannot write {}", path.display()))
}

/// Writes a CSV and its manifest next to it as `<file>.manifest.json`.
fn write_csv(path: &Path, csv: &str, manifest: &Manifest) -> Result<()> {
    write_file(path, csv)?;
    let mut sidecar = path.as_os_str().to_owned();
    sidecar.push(".manifest.json");
    write_file(Path::new(&sidecar), manifest.to_json())
}

fn load(path: &Path) -> Result<Constellation> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    read_constellation(&text).with_context(|| format!("invalid constellation file {}", path.display()))
}

fn generate(a: GenerateArgs) -> Result<()> {
    let c = if let Some(p) = &a.preset {
        let preset: ConstellationPreset = p.parse()?;
        match a.seed {
            Some(seed) => random_constellation(&preset_spec(preset, seed))?,
            None => preset.reference(),
        }
    } else if let (Some(sets), Some(max_points)) = (a.sets, a.max_points) {
        random_constellation(&RandomSpec::new(a.seed.unwrap_or(0), sets, max_points))?
    } else if let Some(circles) = &a.circles {
        if a.seed.is_some() {
            bail!("--seed does not apply to --circles");
        }
        circles_constellation(&parse_circles(circles)?)?
    } else {
        bail!("one of --preset, --sets/--max-points or --circles is required");
    };
    write_file(&a.out, write_constellation(&c))?;
    let sizes: Vec<String> = c.sets().iter().map(|s| s.len().to_string()).collect();
    println!("{} sets, sizes {} (id {})", c.num_sets(), sizes.join(" "), c.fingerprint());
    Ok(())
}

fn orbit(a: OrbitArgs) -> Result<()> {
    let cfg = config(a.algo.algo, a.lambda)?;
    let c = load(&a.algo.constellation)?;
    let s = parse_numbers(&a.start, 2).context("--start")?;
    let start = Point::new(s[0], s[1]);
    let trace = run_orbit(&cfg, &c, start)?;
    if let Some(path) = &a.out_csv {
        write_csv(path, &write_trace_csv(&trace), &Manifest::for_trace(&trace, &c))?;
    }
    println!("{}", trace.outcome);
    println!("iterations {}", trace.outcome.iterations(cfg.max_iterations));
    Ok(())
}

fn sweep(a: SweepArgs) -> Result<()> {
    let c = load(&a.algo.constellation)?;
    let params = SweepParams::new(a.algo.algo, a.region.resolve()?).with_counts(a.n_lambda, a.n_starts);
    let sweep = feaslab_core::experiments::run_sweep(&c, &params)?;
    if let Some(path) = &a.out_csv {
        write_csv(path, &write_sweep_csv(&sweep), &Manifest::for_sweep(&sweep, &c))?;
    }
    let best = pick_best_lambda(&sweep)?;
    let rate = sweep.rates[sweep.lambdas.iter().position(|&l| l == best).expect("best is a grid value")];
    println!("best lambda {best} rate {rate:.3}");
    Ok(())
}

fn parse_size(s: &str) -> Result<(usize, usize)> {
    let (w, h) = s.split_once(['x', 'X']).with_context(|| format!("--size should be WxH, got '{s}'"))?;
    let w = w.trim().parse().with_context(|| format!("bad width in '{s}'"))?;
    let h = h.trim().parse().with_context(|| format!("bad height in '{s}'"))?;
    Ok((w, h))
}

fn map(a: MapArgs) -> Result<()> {
    let cfg = config(a.algo.algo, a.lambda)?;
    let region = a.region.resolve()?;
    let (w, h) = parse_size(&a.size)?;
    let c = load(&a.algo.constellation)?;
    let map = cartographer(&cfg, &c, region, w, h)?;
    write_file(&a.out_pgm, encode_map_pgm(&map, &Manifest::for_map(&map, Some(&c))))?;
    let s = map.success_summary();
    println!("rate {:.3} ({}/{})", s.rate, s.successes, s.total);
    Ok(())
}

fn rates(a: RatesArgs) -> Result<()> {
    let cfg = config(a.algo.algo, a.lambda)?;
    let region = a.region.resolve()?;
    let c = load(&a.algo.constellation)?;
    let s = success_rate(&cfg, &c, &sample_region(region, a.n_starts, 1))?;
    println!("rate {:.3} ({}/{})", s.rate, s.successes, s.total);
    Ok(())
}

fn serve(a: ServeArgs, threads: Option<usize>) -> Result<()> {
    if let Some(n) = threads {
        // Map jobs and sweeps run on the global rayon pool.
        feaslab_core::experiments::configure_global_pool(n)?;
    }
    let addr = SocketAddr::new(a.host, a.port);
    let rt = tokio::runtime::Runtime::new()?;
    eprintln!("listening on http://{addr}");
    rt.block_on(feaslab_service::serve(addr, a.static_dir)).with_context(|| format!("cannot serve on {addr}"))
}
