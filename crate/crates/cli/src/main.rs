//! `sepr`: command-line front end for the exclusion-process laboratory.
//!
//! Every subcommand builds a network either from a JSON file (`--net`) or
//! from a box specification (`--box 4x4x2` with per-axis `--boundary`
//! kinds), runs one analysis from the core crate, and writes CSV or JSON to
//! stdout or `--out`. All commands are deterministic given their inputs and
//! `--seed`; simulation commands parallelize over trials and honor
//! `RAYON_NUM_THREADS`.
//!
//! Exit codes: 0 success, 1 bad input, 2 a size or event cap was exceeded,
//! 3 the `verify` battery found a failing criterion.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use sepr_core::battery::{run_all, Scale};
use sepr_core::bounds::{mixing_window, theorem1_bounds, tv_mix_lower, tv_mix_upper};
use sepr_core::exact::{exact_mixing_time, Metric, StartRule};
use sepr_core::mcsim::{
    killed_walk_survival, nd_check_mc, run_coupled_ensemble, sample_sst, write_nd_csv,
    write_sst_csv,
};
use sepr_core::network::{build_box, load_network, BoundaryKind, Network};
use sepr_core::spectral::{box_eigenpair, build_laplace, spectrum, survival};
use sepr_core::{linear_grid, log_grid, Error, Result};
use serde_json::json;

#[derive(Parser)]
#[command(
    name = "sepr",
    version,
    about = "Spectral and simulation laboratory for the exclusion process with reservoirs",
    after_help = "Times are in the native rate units of the network. Outputs are \
deterministic given the inputs and --seed; simulations honor RAYON_NUM_THREADS. \
Exit codes: 0 ok, 1 bad input, 2 cap exceeded, 3 verification failure."
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Principal eigenvalue, Perron vector, overlap, and quasi-stationary law
    Gap {
        #[command(flatten)]
        net: NetArgs,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Survival vector z(t) and its squared norm on a time grid
    Survival {
        #[command(flatten)]
        net: NetArgs,
        #[command(flatten)]
        grid: GridArgs,
        #[command(flatten)]
        out: OutArgs,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
    },
    /// Two-sided distance estimates along a time grid
    Bounds {
        #[command(flatten)]
        net: NetArgs,
        #[command(flatten)]
        grid: GridArgs,
        #[command(flatten)]
        out: OutArgs,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
    },
    /// Mixing-time sandwich at precision eps, with exact values on small systems
    Mix {
        #[command(flatten)]
        net: NetArgs,
        /// Target distance in (0, 1)
        #[arg(long, default_value_t = 0.25)]
        eps: f64,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Sweep a box family over sizes and report the mixing-time profile
    Profile {
        /// Comma-separated side lengths, e.g. 2,4,8,16
        #[arg(long, value_delimiter = ',', required = true)]
        sizes: Vec<usize>,
        /// Box dimension: each size n becomes an n x ... x n box
        #[arg(long, default_value_t = 1)]
        dim: usize,
        /// Boundary kinds per axis (single token broadcasts)
        #[arg(long, default_value = "open")]
        boundary: String,
        /// Reservoir density
        #[arg(long, default_value_t = 0.5)]
        rho: f64,
        /// Precision for the upper time; the lower time uses 1 - eps
        #[arg(long, default_value_t = 0.25)]
        eps: f64,
        #[command(flatten)]
        out: OutArgs,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
    },
    /// Monte Carlo experiments on the coupled graphical construction
    Simulate {
        #[command(subcommand)]
        op: SimCmd,
    },
    /// Run the cross-module verification battery
    Verify {
        /// Reduced instance counts and trial budgets (the default)
        #[arg(long)]
        quick: bool,
        /// Full acceptance scale
        #[arg(long, conflicts_with = "quick")]
        full: bool,
        /// Write the JSON result manifest here
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum SimCmd {
    /// Strong stationary time tail: survival estimates on a time grid
    Sst {
        #[command(flatten)]
        net: NetArgs,
        #[command(flatten)]
        grid: GridArgs,
        #[command(flatten)]
        mc: McArgs,
        #[command(flatten)]
        out: OutArgs,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
    },
    /// Pairwise covariance of the surviving dual set at one time
    Nd {
        #[command(flatten)]
        net: NetArgs,
        /// Observation time
        #[arg(long = "t", default_value_t = 1.0)]
        t: f64,
        #[command(flatten)]
        mc: McArgs,
        #[command(flatten)]
        out: OutArgs,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
    },
    /// Survival probability of one killed walker along a time grid
    Killed {
        #[command(flatten)]
        net: NetArgs,
        /// Start vertex of the walker
        #[arg(long, default_value_t = 0)]
        start: usize,
        #[command(flatten)]
        grid: GridArgs,
        #[command(flatten)]
        mc: McArgs,
        #[command(flatten)]
        out: OutArgs,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
    },
    /// Mean occupations of the coupled processes on a time grid
    Coupled {
        #[command(flatten)]
        net: NetArgs,
        /// Initial occupancy as a 0/1 string, e.g. 0110 (default: all ones)
        #[arg(long)]
        x0: Option<String>,
        #[command(flatten)]
        grid: GridArgs,
        #[command(flatten)]
        mc: McArgs,
        #[command(flatten)]
        out: OutArgs,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
    },
}

#[derive(Args)]
struct NetArgs {
    /// Network description file (JSON)
    #[arg(long, value_name = "FILE")]
    net: Option<PathBuf>,
    /// Box side lengths, e.g. 4x4x2
    #[arg(long = "box", value_name = "N1xN2x..", conflicts_with = "net")]
    box_spec: Option<String>,
    /// Boundary kinds per axis, open|semiopen (single token broadcasts)
    #[arg(long, default_value = "open")]
    boundary: String,
    /// Reservoir density; overrides the file value under --net
    #[arg(long)]
    rho: Option<f64>,
}

#[derive(Args)]
struct GridArgs {
    /// Smallest grid time (default 0.02 / lambda)
    #[arg(long)]
    tmin: Option<f64>,
    /// Largest grid time (default 12 / lambda)
    #[arg(long)]
    tmax: Option<f64>,
    /// Number of grid points
    #[arg(long, default_value_t = 40)]
    points: usize,
    /// Space the grid linearly instead of logarithmically
    #[arg(long)]
    linear: bool,
}

#[derive(Args)]
struct McArgs {
    /// Number of independent trials
    #[arg(long, default_value_t = 100_000)]
    trials: usize,
    /// Base seed; trial k uses an independent stream derived from it
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct OutArgs {
    /// Output file (default: stdout)
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Usage errors are input errors (1); --help and --version are not.
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.cmd) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            let code = match e {
                Error::CapExceeded(_) | Error::RuntimeCap(_) => 2u8,
                _ => 1u8,
            };
            ExitCode::from(code)
        }
    }
}

fn run(cmd: Cmd) -> Result<u8> {
    match cmd {
        Cmd::Gap { net, out } => cmd_gap(&net, &out),
        Cmd::Survival { net, grid, out, format } => cmd_survival(&net, &grid, &out, format),
        Cmd::Bounds { net, grid, out, format } => cmd_bounds(&net, &grid, &out, format),
        Cmd::Mix { net, eps, out } => cmd_mix(&net, eps, &out),
        Cmd::Profile { sizes, dim, boundary, rho, eps, out, format } => {
            cmd_profile(&sizes, dim, &boundary, rho, eps, &out, format)
        }
        Cmd::Simulate { op } => match op {
            SimCmd::Sst { net, grid, mc, out, format } => cmd_sst(&net, &grid, &mc, &out, format),
            SimCmd::Nd { net, t, mc, out, format } => cmd_nd(&net, t, &mc, &out, format),
            SimCmd::Killed { net, start, grid, mc, out, format } => {
                cmd_killed(&net, start, &grid, &mc, &out, format)
            }
            SimCmd::Coupled { net, x0, grid, mc, out, format } => {
                cmd_coupled(&net, x0.as_deref(), &grid, &mc, &out, format)
            }
        },
        Cmd::Verify { quick: _, full, out } => cmd_verify(full, &out),
    }
}

/// Builds the network from exactly one of `--net` and `--box`.
fn resolve_network(src: &NetArgs) -> Result<Network> {
    match (&src.net, &src.box_spec) {
        (Some(path), None) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::Parse(format!("cannot read {}: {e}", path.display())))?;
            let net = load_network(&text)?;
            match src.rho {
                Some(rho) => net.with_rho(rho),
                None => Ok(net),
            }
        }
        (None, Some(spec)) => {
            let dims = parse_dims(spec)?;
            let bounds = parse_boundary(&src.boundary, dims.len())?;
            build_box(&dims, &bounds, src.rho.unwrap_or(0.5))
        }
        _ => Err(Error::Parse("exactly one of --net and --box is required".into())),
    }
}

fn parse_dims(spec: &str) -> Result<Vec<usize>> {
    spec.split(['x', 'X'])
        .map(|tok| {
            tok.trim()
                .parse::<usize>()
                .ok()
                .filter(|&n| n >= 1)
                .ok_or_else(|| Error::Parse(format!("bad box side '{tok}' in '{spec}'")))
        })
        .collect()
}

fn parse_boundary(spec: &str, dims: usize) -> Result<Vec<BoundaryKind>> {
    let kinds: Vec<BoundaryKind> =
        spec.split(',').map(|tok| tok.trim().parse()).collect::<Result<_>>()?;
    match kinds.len() {
        1 => Ok(vec![kinds[0]; dims]),
        n if n == dims => Ok(kinds),
        n => Err(Error::Parse(format!("{n} boundary kinds for {dims} box axes"))),
    }
}

/// Time grid; unspecified endpoints are scaled by the relaxation time.
fn build_grid(g: &GridArgs, lambda: f64) -> Result<Vec<f64>> {
    let tmin = g.tmin.unwrap_or(0.02 / lambda);
    let tmax = g.tmax.unwrap_or(12.0 / lambda);
    if g.points < 2 {
        return Err(Error::Parse("--points must be at least 2".into()));
    }
    if !tmin.is_finite() || !tmax.is_finite() || tmax <= tmin {
        return Err(Error::Parse(format!("need finite --tmin < --tmax, got {tmin} and {tmax}")));
    }
    if g.linear {
        if tmin < 0.0 {
            return Err(Error::Parse("times must be nonnegative".into()));
        }
        Ok(linear_grid(tmin, tmax, g.points))
    } else {
        if tmin <= 0.0 {
            return Err(Error::Parse("a log grid needs --tmin > 0; pass --linear for t = 0".into()));
        }
        Ok(log_grid(tmin, tmax, g.points))
    }
}

/// The grid endpoints default relative to the spectral gap, so the spectrum
/// is only solved when an endpoint is actually missing.
fn grid_for(net: &Network, g: &GridArgs) -> Result<Vec<f64>> {
    if g.tmin.is_some() && g.tmax.is_some() {
        build_grid(g, f64::NAN)
    } else {
        let spec = spectrum(&build_laplace(net))?;
        build_grid(g, spec.lambda())
    }
}

fn check_eps(eps: f64) -> Result<()> {
    if eps > 0.0 && eps < 1.0 {
        Ok(())
    } else {
        Err(Error::Parse(format!("--eps must lie in (0, 1), got {eps}")))
    }
}

fn check_trials(mc: &McArgs) -> Result<()> {
    if mc.trials >= 1 {
        Ok(())
    } else {
        Err(Error::Parse("--trials must be at least 1".into()))
    }
}

fn write_output(out: &OutArgs, content: &str) -> Result<()> {
    match &out.out {
        Some(path) => std::fs::write(path, content)?,
        None => print!("{content}"),
    }
    Ok(())
}

fn vec_of<'a, I: IntoIterator<Item = &'a f64>>(v: I) -> Vec<f64> {
    v.into_iter().copied().collect()
}

fn cmd_gap(net_args: &NetArgs, out: &OutArgs) -> Result<u8> {
    let net = resolve_network(net_args)?;
    let spec = spectrum(&build_laplace(&net))?;
    let mut doc = json!({
        "n": net.n(),
        "rho": net.rho(),
        "rho_star": net.rho_star(),
        "lambda": spec.lambda(),
        "overlap": spec.overlap(),
        "psi": vec_of(&spec.psi()),
        "quasi_stationary": vec_of(&spec.quasi_stationary()),
    });
    // Boxes carry product closed forms; report them next to the solver output.
    if let Some(spec_str) = &net_args.box_spec {
        let dims = parse_dims(spec_str)?;
        let bounds = parse_boundary(&net_args.boundary, dims.len())?;
        let (lambda_cf, psi_cf) = box_eigenpair(&dims, &bounds)?;
        doc["closed_form"] = json!({
            "lambda": lambda_cf,
            "psi": vec_of(&psi_cf),
        });
    }
    write_output(out, &format!("{}\n", serde_json::to_string_pretty(&doc).expect("json")))?;
    Ok(0)
}

fn cmd_survival(net_args: &NetArgs, grid: &GridArgs, out: &OutArgs, format: Format) -> Result<u8> {
    let net = resolve_network(net_args)?;
    let spec = spectrum(&build_laplace(&net))?;
    let times = build_grid(grid, spec.lambda())?;
    let curve = survival(&spec, &times);
    let content = match format {
        Format::Csv => {
            let mut buf = Vec::new();
            curve.write_csv(&mut buf)?;
            String::from_utf8(buf).expect("csv is utf-8")
        }
        Format::Json => {
            let doc = json!({
                "times": curve.times,
                "znorm2": curve.znorm2,
                "z": curve.z.iter().map(vec_of).collect::<Vec<_>>(),
            });
            format!("{}\n", serde_json::to_string_pretty(&doc).expect("json"))
        }
    };
    write_output(out, &content)?;
    Ok(0)
}

fn cmd_bounds(net_args: &NetArgs, grid: &GridArgs, out: &OutArgs, format: Format) -> Result<u8> {
    let net = resolve_network(net_args)?;
    let spec = spectrum(&build_laplace(&net))?;
    let times = build_grid(grid, spec.lambda())?;
    let rows: Vec<_> = times.iter().map(|&t| theorem1_bounds(&spec, net.rho(), t)).collect();
    let content = match format {
        Format::Csv => {
            let mut s = String::from(
                "t,tv_lower,l2_upper,sep_lower,sup_upper,znorm2_t,znorm2_half_t\n",
            );
            for r in &rows {
                s.push_str(&format!(
                    "{},{},{},{},{},{},{}\n",
                    r.t, r.tv_lower, r.l2_upper, r.sep_lower, r.sup_upper, r.znorm2_t,
                    r.znorm2_half_t
                ));
            }
            s
        }
        Format::Json => {
            format!("{}\n", serde_json::to_string_pretty(&rows).expect("json"))
        }
    };
    write_output(out, &content)?;
    Ok(0)
}

/// Exact mixing time, downgraded to an omission when the system is over cap.
fn exact_or_skip(net: &Network, eps: f64, rule: StartRule, what: &str) -> Result<Option<f64>> {
    match exact_mixing_time(net, eps, Metric::Tv, rule) {
        Ok(t) => Ok(Some(t)),
        Err(Error::CapExceeded(msg)) => {
            eprintln!("warning: skipping {what} ({msg})");
            Ok(None)
        }
        Err(e) => Err(e),
    }
}

fn cmd_mix(net_args: &NetArgs, eps: f64, out: &OutArgs) -> Result<u8> {
    check_eps(eps)?;
    let net = resolve_network(net_args)?;
    let spec = spectrum(&build_laplace(&net))?;
    let upper = tv_mix_upper(&spec, net.rho(), eps)?;
    let lower = tv_mix_lower(&spec, eps)?;
    // The window pairing needs eps < 1/2; above that only the two times exist.
    let window = if eps < 0.5 {
        Some(mixing_window(&spec, net.rho(), eps)?)
    } else {
        eprintln!("warning: skipping the window bound (--eps {eps} is not below 1/2)");
        None
    };
    let exact_xstar =
        exact_or_skip(&net, eps, StartRule::XStar, "the exact time from the extremal start")?;
    let exact_worst = exact_or_skip(&net, eps, StartRule::Worst, "the exact worst-start time")?;
    let doc = json!({
        "eps": eps,
        "n": net.n(),
        "lambda": spec.lambda(),
        "upper": upper,
        "lower": lower,
        "window": window,
        "exact": {
            "tv_from_x_star": exact_xstar,
            "tv_worst_start": exact_worst,
        },
    });
    write_output(out, &format!("{}\n", serde_json::to_string_pretty(&doc).expect("json")))?;
    Ok(0)
}

fn cmd_profile(
    sizes: &[usize],
    dim: usize,
    boundary: &str,
    rho: f64,
    eps: f64,
    out: &OutArgs,
    format: Format,
) -> Result<u8> {
    check_eps(eps)?;
    if dim == 0 {
        return Err(Error::Parse("--dim must be at least 1".into()));
    }
    if sizes.is_empty() || sizes.contains(&0) {
        return Err(Error::Parse("--sizes needs positive side lengths".into()));
    }
    let bounds = parse_boundary(boundary, dim)?;
    let mut rows = Vec::new();
    for &n in sizes {
        let net = build_box(&vec![n; dim], &bounds, rho)?;
        let spec = spectrum(&build_laplace(&net))?;
        let upper = tv_mix_upper(&spec, rho, eps)?;
        let lower = tv_mix_lower(&spec, 1.0 - eps)?;
        rows.push(json!({
            "n": n,
            "lambda": spec.lambda(),
            "overlap": spec.overlap(),
            "t_upper": upper.bisect,
            "t_lower": lower.bisect,
            "product_value": spec.lambda() * upper.bisect,
        }));
    }
    let content = match format {
        Format::Csv => {
            let mut s = String::from("n,lambda,overlap,t_upper,t_lower,product_value\n");
            for r in &rows {
                s.push_str(&format!(
                    "{},{},{},{},{},{}\n",
                    r["n"], r["lambda"], r["overlap"], r["t_upper"], r["t_lower"],
                    r["product_value"]
                ));
            }
            s
        }
        Format::Json => format!("{}\n", serde_json::to_string_pretty(&rows).expect("json")),
    };
    write_output(out, &content)?;
    Ok(0)
}

fn cmd_sst(
    net_args: &NetArgs,
    grid: &GridArgs,
    mc: &McArgs,
    out: &OutArgs,
    format: Format,
) -> Result<u8> {
    check_trials(mc)?;
    let net = resolve_network(net_args)?;
    let times = grid_for(&net, grid)?;
    let sample = sample_sst(&net, mc.trials, mc.seed)?;
    let content = match format {
        Format::Csv => {
            let mut buf = Vec::new();
            write_sst_csv(&sample, &times, &mut buf)?;
            String::from_utf8(buf).expect("csv is utf-8")
        }
        Format::Json => {
            let (p, se): (Vec<f64>, Vec<f64>) =
                times.iter().map(|&t| sample.survival_at(t)).unzip();
            let doc = json!({
                "trials": sample.trials,
                "times": times,
                "p_hat": p,
                "stderr": se,
            });
            format!("{}\n", serde_json::to_string_pretty(&doc).expect("json"))
        }
    };
    write_output(out, &content)?;
    Ok(0)
}

fn cmd_nd(net_args: &NetArgs, t: f64, mc: &McArgs, out: &OutArgs, format: Format) -> Result<u8> {
    check_trials(mc)?;
    if !t.is_finite() || t < 0.0 {
        return Err(Error::Parse(format!("--t must be a nonnegative time, got {t}")));
    }
    let net = resolve_network(net_args)?;
    let n = net.n();
    let pairs: Vec<(usize, usize)> =
        (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
    if pairs.is_empty() {
        return Err(Error::Parse("covariance checks need at least two vertices".into()));
    }
    let reports = nd_check_mc(&net, t, &pairs, mc.trials, mc.seed)?;
    let content = match format {
        Format::Csv => {
            let mut buf = Vec::new();
            write_nd_csv(&reports, &mut buf)?;
            String::from_utf8(buf).expect("csv is utf-8")
        }
        Format::Json => {
            let rows: Vec<_> = reports
                .iter()
                .map(|r| {
                    json!({
                        "i": r.i, "j": r.j,
                        "cov_hat": r.cov_hat, "radius": r.radius, "flag": r.flag,
                    })
                })
                .collect();
            format!("{}\n", serde_json::to_string_pretty(&rows).expect("json"))
        }
    };
    write_output(out, &content)?;
    Ok(0)
}

fn cmd_killed(
    net_args: &NetArgs,
    start: usize,
    grid: &GridArgs,
    mc: &McArgs,
    out: &OutArgs,
    format: Format,
) -> Result<u8> {
    check_trials(mc)?;
    let net = resolve_network(net_args)?;
    if start >= net.n() {
        return Err(Error::Parse(format!(
            "--start {start} is out of range for {} vertices",
            net.n()
        )));
    }
    let times = grid_for(&net, grid)?;
    // One seed for the whole curve: common random numbers across times.
    let estimates: Vec<_> =
        times.iter().map(|&t| killed_walk_survival(&net, start, t, mc.trials, mc.seed)).collect();
    let content = match format {
        Format::Csv => {
            let mut s = String::from("t,p_hat,stderr\n");
            for (t, e) in times.iter().zip(&estimates) {
                s.push_str(&format!("{},{},{}\n", t, e.value, e.stderr));
            }
            s
        }
        Format::Json => {
            let doc = json!({
                "start": start,
                "trials": mc.trials,
                "times": times,
                "p_hat": estimates.iter().map(|e| e.value).collect::<Vec<_>>(),
                "stderr": estimates.iter().map(|e| e.stderr).collect::<Vec<_>>(),
            });
            format!("{}\n", serde_json::to_string_pretty(&doc).expect("json"))
        }
    };
    write_output(out, &content)?;
    Ok(0)
}

fn parse_x0(spec: Option<&str>, n: usize) -> Result<Vec<u8>> {
    match spec {
        None => Ok(vec![1; n]),
        Some(s) => {
            let bits: Vec<u8> = s
                .chars()
                .map(|c| match c {
                    '0' => Ok(0),
                    '1' => Ok(1),
                    other => Err(Error::Parse(format!("bad occupancy digit '{other}' in --x0"))),
                })
                .collect::<Result<_>>()?;
            if bits.len() != n {
                return Err(Error::Parse(format!(
                    "--x0 has {} digits for {n} vertices",
                    bits.len()
                )));
            }
            Ok(bits)
        }
    }
}

fn cmd_coupled(
    net_args: &NetArgs,
    x0: Option<&str>,
    grid: &GridArgs,
    mc: &McArgs,
    out: &OutArgs,
    format: Format,
) -> Result<u8> {
    check_trials(mc)?;
    let net = resolve_network(net_args)?;
    let x0 = parse_x0(x0, net.n())?;
    let times = grid_for(&net, grid)?;
    let ens = run_coupled_ensemble(&net, &x0, &times, mc.trials, mc.seed)?;
    let content = match format {
        Format::Csv => {
            let n = net.n();
            let mut s = String::from("t,z_total_mean,z_total_stderr");
            for tag in ["xstar", "x", "y", "z"] {
                for i in 0..n {
                    s.push_str(&format!(",{tag}_{i}"));
                }
            }
            s.push('\n');
            for (k, &t) in ens.times.iter().enumerate() {
                s.push_str(&format!("{},{},{}", t, ens.z_total_mean[k], ens.z_total_stderr[k]));
                for block in [&ens.xstar_mean, &ens.x_mean, &ens.y_mean, &ens.z_mean] {
                    for v in &block[k] {
                        s.push_str(&format!(",{v}"));
                    }
                }
                s.push('\n');
            }
            s
        }
        Format::Json => {
            let doc = json!({
                "trials": ens.trials,
                "times": ens.times,
                "xstar_mean": ens.xstar_mean,
                "x_mean": ens.x_mean,
                "y_mean": ens.y_mean,
                "z_mean": ens.z_mean,
                "z_total_mean": ens.z_total_mean,
                "z_total_stderr": ens.z_total_stderr,
            });
            format!("{}\n", serde_json::to_string_pretty(&doc).expect("json"))
        }
    };
    write_output(out, &content)?;
    Ok(0)
}

fn cmd_verify(full: bool, out: &Option<PathBuf>) -> Result<u8> {
    let scale = if full { Scale::Full } else { Scale::Quick };
    let results = run_all(scale);
    for r in &results {
        println!("{}", r.summary());
    }
    let failures: Vec<_> = results.iter().filter(|r| !r.pass).collect();
    let manifest = json!({
        "scale": if full { "full" } else { "quick" },
        "criteria": results.len(),
        "failed": failures.len(),
        "failures": failures,
    });
    let text = format!("{}\n", serde_json::to_string_pretty(&manifest).expect("json"));
    match out {
        Some(path) => std::fs::write(path, &text)?,
        // Without --out the manifest is only worth printing when it carries news.
        None if !failures.is_empty() => print!("{text}"),
        None => {}
    }
    Ok(if failures.is_empty() { 0 } else { 3 })
}
