//! `apmeasure`: build stage measures, verify them, evaluate convolutions and
//! almost-period defects, and run matching and bump-product checks on
//! measure files.
//!
//! Exit codes: 0 when every check passes, 1 when a check fails, 2 on usage
//! or parse errors.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use apmeasure::ap::ap_certificate;
use apmeasure::construction::{
    build_stage_capped, cell_mass_report, support_report, verify_tail_estimate, StageCache,
    DEFAULT_ATOM_CAP,
};
use apmeasure::io::{read_function, read_measure, write_csv, write_json, write_stage};
use apmeasure::pwl::{convolve, PiecewiseLinearFn};
use apmeasure::scalar::{self, int, pow3};
use apmeasure::uniqueness::{
    dm_bound, far_field_check, lump_decompose, match_close, psi_zero_identity, HarnessConfig,
    MatchReport,
};
use apmeasure::{Atom, DiscreteMeasure, Error, Interval, Rational, Result};
use clap::{Args, Parser, Subcommand};
use num_traits::Signed;
use serde_json::{json, Value};

#[derive(Parser, Debug)]
#[command(
    name = "apmeasure",
    version,
    about = "Exact discrete measures on the real line"
)]
struct Cli {
    /// Append k-digit truncated decimals (marked approx) to printed numbers.
    #[arg(long, global = true, value_name = "K")]
    decimal: Option<usize>,
    /// Write the full report as JSON to this path.
    #[arg(long, global = true, value_name = "PATH")]
    report: Option<PathBuf>,
    /// Refuse to build stages with more atoms than this.
    #[arg(
        long,
        global = true,
        env = "APMEASURE_ATOM_CAP",
        default_value_t = DEFAULT_ATOM_CAP,
        value_parser = parse_cap
    )]
    atom_cap: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build stage s and write it with its provenance sidecar.
    Build {
        #[arg(long)]
        stage: u32,
        #[arg(long)]
        out: PathBuf,
        /// Multiply every mass by this factor before writing.
        #[arg(long, value_parser = parse_rational, allow_hyphen_values = true)]
        scale: Option<Rational>,
    },
    /// Support, cell mass, mass decay, tail estimate and stability checks.
    Verify {
        #[arg(long)]
        stage: u32,
        /// Flip the sign of this atom's mass before the support and cell
        /// checks.
        #[arg(long, value_name = "IDX")]
        corrupt_atom: Option<usize>,
    },
    /// Almost-period defects of f⋆μ for τ = p·3^s, |τ| <= range.
    Ap {
        #[arg(long, default_value_t = 2)]
        stage: u32,
        #[arg(long, value_parser = parse_rational)]
        eps: Rational,
        #[arg(long, value_parser = parse_rational)]
        range: Rational,
        /// Test function file; defaults to the triangle on [-1/6, 1/6].
        #[arg(long)]
        f: Option<PathBuf>,
        #[arg(long, default_value = "[-1/2,1/2]", value_parser = parse_interval, allow_hyphen_values = true)]
        window: Interval,
    },
    /// f⋆μ on a window, as CSV rows at its knots.
    Conv {
        #[arg(long, conflicts_with = "limit", required_unless_present = "limit")]
        measure: Option<PathBuf>,
        /// Use the limit measure instead of a file.
        #[arg(long)]
        limit: bool,
        #[arg(long)]
        f: Option<PathBuf>,
        #[arg(long, value_parser = parse_interval, allow_hyphen_values = true)]
        window: Interval,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Match two measures and report residual profiles.
    Match {
        #[arg(long)]
        mu: PathBuf,
        #[arg(long)]
        nu: PathBuf,
        /// Nested windows, innermost first.
        #[arg(long = "window", required = true, value_parser = parse_interval, allow_hyphen_values = true)]
        windows: Vec<Interval>,
        /// Also run the bump-product checks.
        #[arg(long)]
        psi: bool,
        #[command(flatten)]
        harness: HarnessArgs,
    },
    /// Bump-product checks: Ψ(0) and the far-field bound.
    Psi {
        #[arg(long)]
        mu: PathBuf,
        #[arg(long)]
        nu: PathBuf,
        #[command(flatten)]
        harness: HarnessArgs,
    },
    /// Cluster the joint support into lumps.
    Lump {
        #[arg(long)]
        mu: PathBuf,
        #[arg(long)]
        nu: PathBuf,
        #[arg(long, value_parser = parse_rational)]
        v: Rational,
        /// Half-width for the lump-count supremum; defaults to v.
        #[arg(long, value_parser = parse_rational)]
        u: Option<Rational>,
    },
}

#[derive(Args, Debug)]
struct HarnessArgs {
    #[arg(long, value_parser = parse_rational)]
    u: Option<Rational>,
    #[arg(long, value_parser = parse_rational)]
    v: Option<Rational>,
    /// Factor count; defaults to the bound from the sliding count.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, value_parser = parse_rational)]
    eps: Option<Rational>,
    #[arg(long, value_parser = parse_interval, allow_hyphen_values = true)]
    k: Option<Interval>,
    #[arg(long = "sample", value_parser = parse_rational, allow_hyphen_values = true)]
    samples: Vec<Rational>,
}

fn parse_rational(s: &str) -> std::result::Result<Rational, String> {
    scalar::parse(s).map_err(|e| e.to_string())
}

fn parse_interval(s: &str) -> std::result::Result<Interval, String> {
    s.parse::<Interval>().map_err(|e| e.to_string())
}

fn parse_cap(s: &str) -> std::result::Result<usize, String> {
    match s.trim().parse::<usize>() {
        Ok(0) => Err("atom cap must be at least 1".into()),
        Ok(n) => Ok(n),
        Err(e) => Err(e.to_string()),
    }
}

struct Out {
    decimal: Option<usize>,
}

impl Out {
    fn num(&self, r: &Rational) -> String {
        match self.decimal {
            Some(k) => format!("{} [approx {}]", scalar::fmt(r), scalar::to_decimal(r, k)),
            None => scalar::fmt(r),
        }
    }

    fn opt(&self, r: &Option<Rational>) -> String {
        r.as_ref().map_or_else(|| "none".into(), |r| self.num(r))
    }
}

fn verdict(ok: bool) -> &'static str {
    if ok {
        "PASS"
    } else {
        "FAIL"
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let out = Out {
        decimal: cli.decimal,
    };
    let cache = StageCache::new(cli.atom_cap);
    let result = run(&cli.command, &out, &cache).and_then(|(pass, report)| {
        if let Some(path) = &cli.report {
            write_json(path, &report)?;
        }
        Ok(pass)
    });
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Parse(_)
        | Error::Json(_)
        | Error::Io(_)
        | Error::InvalidArgument(_)
        | Error::AtomOutsideWindow { .. }
        | Error::EmptyWindow(..) => 2,
        _ => 1,
    }
}

fn run(cmd: &Command, out: &Out, cache: &StageCache) -> Result<(bool, Value)> {
    match cmd {
        Command::Build {
            stage,
            out: path,
            scale,
        } => cmd_build(*stage, path, scale.as_ref(), out, cache),
        Command::Verify {
            stage,
            corrupt_atom,
        } => cmd_verify(*stage, *corrupt_atom, out, cache),
        Command::Ap {
            stage,
            eps,
            range,
            f,
            window,
        } => cmd_ap(*stage, eps, range, f.as_deref(), window, out, cache),
        Command::Conv {
            measure,
            f,
            window,
            out: path,
            ..
        } => cmd_conv(
            measure.as_deref(),
            f.as_deref(),
            window,
            path.as_deref(),
            out,
            cache,
        ),
        Command::Match {
            mu,
            nu,
            windows,
            psi,
            harness,
        } => cmd_match(mu, nu, windows, psi.then_some(harness), out),
        Command::Psi { mu, nu, harness } => cmd_psi(mu, nu, harness, out),
        Command::Lump { mu, nu, v, u } => cmd_lump(mu, nu, v, u.as_ref(), out),
    }
}

fn test_function(path: Option<&Path>) -> Result<PiecewiseLinearFn> {
    match path {
        Some(p) => read_function(p),
        None => Ok(PiecewiseLinearFn::standard_triangle()),
    }
}

fn cmd_build(
    s: u32,
    path: &Path,
    scale: Option<&Rational>,
    out: &Out,
    cache: &StageCache,
) -> Result<(bool, Value)> {
    let mut stage = build_stage_capped(s, cache.cap())?;
    if let Some(c) = scale {
        stage.measure = stage.measure.scale(c);
    }
    let side = write_stage(path, &stage)?;
    let mass = stage.measure.total_mass();
    println!("atoms={} mass={}", stage.measure.len(), out.num(&mass));
    println!("wrote {} and {}", path.display(), side.display());
    Ok((
        true,
        json!({
            "stage": s,
            "atoms": stage.measure.len(),
            "mass": scalar::fmt(&mass),
            "merges": stage.merges,
            "measure": path,
            "provenance": side,
        }),
    ))
}

fn cmd_verify(
    s: u32,
    corrupt: Option<usize>,
    out: &Out,
    cache: &StageCache,
) -> Result<(bool, Value)> {
    if s == 0 {
        return Err(Error::InvalidArgument("verify needs stage >= 1".into()));
    }
    let stage = cache.stage(s)?;
    let mut measure = stage.measure.clone();
    if let Some(idx) = corrupt {
        let mut atoms: Vec<Atom> = measure.atoms().to_vec();
        let atom = atoms.get_mut(idx).ok_or_else(|| {
            Error::InvalidArgument(format!(
                "stage {s} has {} atoms, no index {idx}",
                measure.len()
            ))
        })?;
        atom.mass = -atom.mass.clone();
        println!(
            "corrupted atom {idx} at {}: mass {}",
            out.num(&atom.position),
            out.num(&atom.mass)
        );
        measure = DiscreteMeasure::from_atoms(atoms, measure.window().clone())?;
    }
    let mut all = true;

    let support = support_report(&measure, s);
    all &= support.holds;
    println!(
        "{} support inside I_{s} = {} ({} atoms outside)",
        verdict(support.holds),
        support.interval,
        support.outside.len()
    );

    let cells = cell_mass_report(&measure, s);
    all &= cells.holds;
    match cells.failures.first() {
        Some(c) => println!(
            "{} cell mass: {} of {} cells differ from 1, first at cell n={} with mass {}",
            verdict(false),
            cells.failures.len(),
            cells.cells_checked,
            c.n,
            out.num(&c.mass)
        ),
        None => println!(
            "{} cell mass: all {} cells carry mass 1, {} stray atoms",
            verdict(cells.holds),
            cells.cells_checked,
            cells.stray_atoms.len()
        ),
    }

    let half = (pow3(s + 1) - int(1)) / int(2);
    let decay = cache.verify_mass_decay(s, &Interval::symmetric_closed(half))?;
    all &= decay.holds;
    println!(
        "{} mass decay on {}: max mass outside I_{s} is {} at {}, bound {}",
        verdict(decay.holds),
        decay.window,
        out.opt(&decay.max_mass_outside),
        out.opt(&decay.witness),
        out.num(&decay.bound)
    );

    let mut tails = Vec::new();
    for n in 2..=12 {
        let t = verify_tail_estimate(n)?;
        all &= t.holds;
        println!(
            "{} tail estimate N={n}: sum_(k>=N) r_k <= {} < {}",
            verdict(t.holds),
            out.num(&t.lhs_upper_bound),
            out.num(&t.rhs)
        );
        tails.push(t);
    }

    let stability = cache.verify_stage_stability(s)?;
    all &= stability.holds;
    println!(
        "{} stage stability: stage {} restricted to I_{s} equals stage {s}{}",
        verdict(stability.holds),
        s + 1,
        stability
            .first_difference
            .as_ref()
            .map(|x| format!(" (first difference at {})", out.num(x)))
            .unwrap_or_default()
    );
    println!(
        "{}",
        if all {
            "all checks passed"
        } else {
            "some checks failed"
        }
    );
    Ok((
        all,
        json!({
            "stage": s,
            "corrupt_atom": corrupt,
            "support": support,
            "cell_mass": cells,
            "mass_decay": decay,
            "tail_estimates": tails,
            "stability": stability,
            "pass": all,
        }),
    ))
}

fn cmd_ap(
    s: u32,
    eps: &Rational,
    range: &Rational,
    f: Option<&Path>,
    window: &Interval,
    out: &Out,
    cache: &StageCache,
) -> Result<(bool, Value)> {
    let f = test_function(f)?;
    let cert = ap_certificate(&f, eps, range, s, window, cache)?;
    println!(
        "window {}  tau in {}Z, |tau| <= {}",
        cert.window, cert.relative_density_gap, cert.range
    );
    println!("{:>12}  {:<28}  witness", "tau", "defect");
    for row in &cert.rows {
        println!(
            "{:>12}  {:<28}  {}",
            scalar::fmt(&row.tau),
            out.num(&row.defect),
            out.num(&row.witness)
        );
    }
    println!("max defect {}", out.num(&cert.max_defect));
    println!("predicted bound {}", out.num(&cert.predicted_bound));
    println!(
        "{} every defect < eps = {}",
        verdict(cert.pass),
        out.num(eps)
    );
    Ok((cert.pass, serde_json::to_value(&cert)?))
}

fn cmd_conv(
    measure: Option<&Path>,
    f: Option<&Path>,
    window: &Interval,
    path: Option<&Path>,
    out: &Out,
    cache: &StageCache,
) -> Result<(bool, Value)> {
    let f = test_function(f)?;
    let mu = match measure {
        Some(p) => read_measure(p)?,
        None => {
            let reach = match f.support() {
                Some(supp) => window.closure().widen(&supp.hi, &-&supp.lo),
                None => window.closure(),
            };
            cache.limit_window(&reach)?
        }
    };
    let g = convolve(&f, &mu, window)?;
    match path {
        Some(p) => {
            let mut file = std::io::BufWriter::new(std::fs::File::create(p)?);
            write_csv(&mut file, &g, window, out.decimal)?;
            file.flush()?;
        }
        None => {
            let stdout = std::io::stdout();
            write_csv(&mut stdout.lock(), &g, window, out.decimal)?;
        }
    }
    Ok((true, serde_json::to_value(&g)?))
}

fn print_match(report: &MatchReport, windows: &[Interval], out: &Out) {
    println!(
        "pairs={} unmatched_mu={} unmatched_nu={}",
        report.pairs.len(),
        report.unmatched_mu.len(),
        report.unmatched_nu.len()
    );
    for shell in &report.shell_profile {
        let name = shell
            .window
            .as_ref()
            .map_or_else(|| "beyond".to_string(), |w| w.to_string());
        println!(
            "shell {name}: pairs={} max|dpos|={} max|dmass|={} unmatched={}",
            shell.pairs,
            out.num(&shell.max_abs_dpos),
            out.num(&shell.max_abs_dmass),
            shell.unmatched
        );
    }
    println!(
        "measures differ: {}",
        if report.coincide { "no" } else { "yes" }
    );
    match (report.come_close, windows.last()) {
        (true, Some(w)) => println!("come close: certified ({w})"),
        _ => println!("come close: not certified"),
    }
    println!("coincide: {}", if report.coincide { "yes" } else { "no" });
}

fn cmd_match(
    mu_path: &Path,
    nu_path: &Path,
    windows: &[Interval],
    harness: Option<&HarnessArgs>,
    out: &Out,
) -> Result<(bool, Value)> {
    let mu = read_measure(mu_path)?;
    let nu = read_measure(nu_path)?;
    let report = match_close(&mu, &nu, windows)?;
    print_match(&report, windows, out);
    let mut pass = report.come_close;
    let mut value = json!({ "matching": report });
    if let Some(h) = harness {
        let (ok, psi) = run_harness(&mu, &nu, h, &report, out)?;
        pass &= ok;
        value["psi"] = psi;
    }
    value["pass"] = json!(pass);
    Ok((pass, value))
}

fn cmd_psi(mu_path: &Path, nu_path: &Path, h: &HarnessArgs, out: &Out) -> Result<(bool, Value)> {
    let mu = read_measure(mu_path)?;
    let nu = read_measure(nu_path)?;
    let k =
        h.k.as_ref()
            .ok_or_else(|| Error::InvalidArgument("--k is required".into()))?;
    let matching = match_close(&mu, &nu, &[k.closure()])?;
    let (pass, mut value) = run_harness(&mu, &nu, h, &matching, out)?;
    value["pass"] = json!(pass);
    Ok((pass, value))
}

fn run_harness(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    h: &HarnessArgs,
    matching: &MatchReport,
    out: &Out,
) -> Result<(bool, Value)> {
    let need = |name: &str| Error::InvalidArgument(format!("--{name} is required for the harness"));
    let u = h.u.clone().ok_or_else(|| need("u"))?;
    let v = h.v.clone().ok_or_else(|| need("v"))?;
    let eps = h.eps.clone().ok_or_else(|| need("eps"))?;
    let k = h.k.clone().ok_or_else(|| need("k"))?;
    if h.samples.is_empty() {
        return Err(need("sample"));
    }
    let n = match h.n {
        Some(n) => n,
        None => {
            let n = dm_bound(mu, nu, &u)?;
            println!("N={n} from the sliding count with u={}", out.num(&u));
            n
        }
    };
    let cfg = HarnessConfig::new(u, v, n, eps, k)?;

    let (zero_ok, zero) = match psi_zero_identity(mu, nu, &cfg) {
        Ok(c) => {
            println!(
                "{} psi(0) = {} = ({})^{}",
                verdict(c.holds),
                out.num(&c.psi0),
                out.num(&c.difference),
                c.n
            );
            (c.holds, serde_json::to_value(&c)?)
        }
        Err(Error::Precondition(msg)) => {
            println!("{} psi(0): {msg}", verdict(false));
            (false, json!({ "error": msg }))
        }
        Err(e) => return Err(e),
    };

    let far = far_field_check(mu, nu, &cfg, &h.samples, matching)?;
    println!(
        "C = {} (phi_{} at {}) on {}",
        out.num(&far.c),
        far.c_index,
        out.num(&far.c_witness),
        far.examined_window
    );
    println!("far-field bound N eps C^(N-1) = {}", out.num(&far.bound));
    for sample in &far.samples {
        println!(
            "{} |psi({})| = {} < bound",
            verdict(sample.holds),
            out.num(&sample.b),
            out.num(&sample.psi.abs())
        );
    }
    println!("far field: {}", verdict(far.holds));
    Ok((
        zero_ok && far.holds,
        json!({ "psi_zero": zero, "far_field": far }),
    ))
}

fn cmd_lump(
    mu_path: &Path,
    nu_path: &Path,
    v: &Rational,
    u: Option<&Rational>,
    out: &Out,
) -> Result<(bool, Value)> {
    let mu = read_measure(mu_path)?;
    let nu = read_measure(nu_path)?;
    let d = lump_decompose(&mu, &nu, v)?;
    let (count, witness) = match u {
        Some(u) => d.lump_count_sup(u)?,
        None => (d.lump_count_sup, d.lump_count_witness.clone()),
    };
    println!("lumps={}", d.lumps.len());
    println!(
        "max lumps meeting one window of half-width {}: {count} at {}",
        out.num(u.unwrap_or(v)),
        out.opt(&witness)
    );
    for lump in &d.lumps {
        println!(
            "[{}, {}] mu_atoms={} nu_atoms={} diameter={} mass_gap={}{}",
            scalar::fmt(&lump.lo),
            scalar::fmt(&lump.hi),
            lump.lambda.len(),
            lump.gamma.len(),
            out.num(&lump.diameter),
            out.num(&lump.mass_gap),
            if lump.fits_neighbourhood {
                ""
            } else {
                " (wider than V)"
            }
        );
    }
    Ok((true, serde_json::to_value(&d)?))
}
