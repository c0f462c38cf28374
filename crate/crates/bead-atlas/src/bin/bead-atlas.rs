//! Command-line interface: count fillings and tilings, draw uniform samples,
//! solve for limit surfaces, and run internal cross-checks.
//!
//! Exit codes: 0 on success, 2 on usage or input errors, 3 when an iterative
//! computation fails to converge within its budget, 1 when a verify check
//! fails.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use bead_atlas::dimer;
use bead_atlas::entropy::{self, Slope};
use bead_atlas::io;
use bead_atlas::shapes::{boundary_from_profile, profile_from_partitions, DiagramProfile};
use bead_atlas::solver::{self, SolveOptions};
use bead_atlas::tableaux;

#[derive(Parser)]
#[command(
    name = "bead-atlas",
    version,
    about = "Exact counting, uniform sampling, and limit-shape solving for bead configurations"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Count standard fillings of a diagram, or tilings of its tall region.
    Count(CountArgs),
    /// Draw uniform random fillings as tableaux or bead configurations.
    Sample(SampleArgs),
    /// Solve for the entropy-maximizing limit surface over a diagram.
    Solve(SolveArgs),
    /// Run internal cross-checks and print one line per check.
    Verify,
}

#[derive(Args)]
struct CountArgs {
    /// Diagram as comma-separated outer parts, optionally /inner: "3,2/1".
    #[arg(long)]
    shape: String,
    /// Dilate the diagram by this factor first.
    #[arg(long, default_value_t = 1)]
    scale: u64,
    /// Count tilings of the tall region with this much extra window height
    /// per thread, instead of standard fillings.
    #[arg(long)]
    tall: Option<u64>,
    /// Output file (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum SampleKind {
    /// Bead heights per thread.
    Beads,
    /// Tableau ranks per thread.
    Tableaux,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum SampleFormat {
    /// One JSON record per line.
    Ndjson,
    /// Scatter plot (bead heights only).
    Svg,
}

#[derive(Args)]
struct SampleArgs {
    /// Diagram as comma-separated outer parts, optionally /inner: "3,2/1".
    #[arg(long)]
    shape: String,
    /// Dilate the diagram by this factor first.
    #[arg(long, default_value_t = 1)]
    scale: u64,
    #[arg(long, default_value_t = 1)]
    samples: u64,
    /// Seed for the sample stream; the same seed reproduces the same bytes.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = SampleKind::Beads)]
    kind: SampleKind,
    #[arg(long, value_enum, default_value_t = SampleFormat::Ndjson)]
    format: SampleFormat,
    /// Output file (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum SolveFormat {
    /// Height field as i,j,x,y,h rows.
    Csv,
    /// Report and field as one JSON document.
    Json,
    /// Heat map with contour lines.
    Svg,
}

#[derive(Args)]
struct SolveArgs {
    /// Diagram as comma-separated outer parts, optionally /inner: "3,2/1".
    #[arg(long)]
    shape: String,
    /// Dilate the diagram by this factor first.
    #[arg(long, default_value_t = 1)]
    scale: u64,
    /// Grid resolution as NX,NY (one number means a square grid).
    #[arg(long, default_value = "64,64")]
    grid: String,
    /// Residual movement per iteration at which to stop.
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    #[arg(long, default_value_t = 50_000)]
    max_iters: usize,
    #[arg(long, value_enum, default_value_t = SolveFormat::Csv)]
    format: SolveFormat,
    /// Contour lines in svg output.
    #[arg(long, default_value_t = 9)]
    contours: usize,
    /// Output file (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Error carrying the process exit code.
struct AppError {
    code: u8,
    msg: String,
}

impl AppError {
    fn usage(msg: impl Into<String>) -> Self {
        AppError {
            code: 2,
            msg: msg.into(),
        }
    }
    fn no_convergence(msg: impl Into<String>) -> Self {
        AppError {
            code: 3,
            msg: msg.into(),
        }
    }
}

fn parse_shape(spec: &str, scale: u64) -> Result<DiagramProfile, AppError> {
    let (outer_str, inner_str) = match spec.split_once('/') {
        Some((o, i)) => (o, i),
        None => (spec, ""),
    };
    let parse_list = |t: &str| -> Result<Vec<u64>, AppError> {
        if t.trim().is_empty() {
            return Ok(Vec::new());
        }
        t.split(',')
            .map(|p| {
                p.trim()
                    .parse::<u64>()
                    .map_err(|e| AppError::usage(format!("bad partition part {p:?}: {e}")))
            })
            .collect()
    };
    let outer = parse_list(outer_str)?;
    let inner = parse_list(inner_str)?;
    profile_from_partitions(&outer, &inner, scale)
        .map_err(|e| AppError::usage(format!("shape {spec:?}: {e}")))
}

fn parse_grid(spec: &str) -> Result<(usize, usize), AppError> {
    let parts: Vec<&str> = spec.split(',').collect();
    let parse_one = |t: &str| -> Result<usize, AppError> {
        let v = t
            .trim()
            .parse::<usize>()
            .map_err(|e| AppError::usage(format!("bad grid size {t:?}: {e}")))?;
        if v < 2 {
            return Err(AppError::usage("grid must be at least 2x2"));
        }
        Ok(v)
    };
    match parts.as_slice() {
        [one] => {
            let n = parse_one(one)?;
            Ok((n, n))
        }
        [a, b] => Ok((parse_one(a)?, parse_one(b)?)),
        _ => Err(AppError::usage(format!(
            "grid must be NX or NX,NY, got {spec:?}"
        ))),
    }
}

fn emit(out: &Option<PathBuf>, content: &str) -> Result<(), AppError> {
    match out {
        Some(path) => io::write_atomic(Path::new(path), content.as_bytes()).map_err(|e| AppError {
            code: 2,
            msg: format!("writing {}: {e}", path.display()),
        }),
        None => {
            print!("{content}");
            if !content.ends_with('\n') {
                println!();
            }
            Ok(())
        }
    }
}

fn run_count(args: &CountArgs) -> Result<(), AppError> {
    let shape = parse_shape(&args.shape, args.scale)?;
    let doc = match args.tall {
        None => {
            let f = tableaux::count_syt(&shape)
                .map_err(|e| AppError::usage(format!("counting fillings: {e}")))?;
            serde_json::json!({
                "shape": args.shape,
                "scale": args.scale,
                "boxes": shape.n_boxes(),
                "count": f.to_string(),
                "log_count": log_of_count(&f),
            })
        }
        Some(extra) => {
            let z = dimer::count_tilings_tall_region(&shape, extra)
                .map_err(|e| AppError::usage(format!("counting tilings: {e}")))?;
            let reg = dimer::TallRegion::new(&shape, extra).expect("region was countable");
            serde_json::json!({
                "shape": args.shape,
                "scale": args.scale,
                "boxes": shape.n_boxes(),
                "extra": extra,
                "height": reg.height2() as f64 / 2.0,
                "count": z.to_string(),
                "log_count": log_of_count(&z),
            })
        }
    };
    emit(&args.out, &format!("{:#}\n", doc))
}

/// Natural log of a big count, or negative infinity for zero.
fn log_of_count(x: &num_bigint::BigUint) -> f64 {
    use num_traits::Zero;
    if x.is_zero() {
        f64::NEG_INFINITY
    } else {
        // Round-trip through the decimal string stays exact well past f64
        // range; parse the leading digits instead of converting the integer.
        let s = x.to_string();
        let lead: f64 = s[..s.len().min(17)].parse().expect("digits");
        lead.ln() + (s.len().saturating_sub(17)) as f64 * std::f64::consts::LN_10
    }
}

fn run_sample(args: &SampleArgs) -> Result<(), AppError> {
    let shape = parse_shape(&args.shape, args.scale)?;
    if args.samples == 0 {
        return Err(AppError::usage("need at least one sample"));
    }
    if args.format == SampleFormat::Svg && args.kind == SampleKind::Tableaux {
        return Err(AppError::usage("svg output renders bead heights; use --kind beads"));
    }
    // Each sample draws from its own seeded stream, so output is identical
    // regardless of thread count. Samplers are per worker; they carry no
    // random state, only shape tables.
    let results: Result<Vec<(tableaux::Tableau, tableaux::BeadConfiguration)>, String> = (0..args
        .samples)
        .into_par_iter()
        .map_init(
            || tableaux::SytSampler::new(&shape),
            |sampler, i| {
                let sampler = sampler.as_mut().map_err(|e| e.to_string())?;
                let mut rng = ChaCha8Rng::seed_from_u64(
                    args.seed.wrapping_add(i.wrapping_mul(0x9E37_79B9_7F4A_7C15)),
                );
                let t = sampler.sample(&mut rng).map_err(|e| e.to_string())?;
                let b = tableaux::tableau_to_beads(&t, &mut rng);
                Ok((t, b))
            },
        )
        .collect();
    let results = results.map_err(|e| AppError::usage(format!("sampling: {e}")))?;
    let content = match args.format {
        SampleFormat::Ndjson => {
            let mut s = String::new();
            for (t, b) in &results {
                let line = match args.kind {
                    SampleKind::Beads => io::beads_to_line(b),
                    SampleKind::Tableaux => io::tableau_to_line(t),
                };
                s.push_str(&line);
                s.push('\n');
            }
            s
        }
        SampleFormat::Svg => {
            let cfgs: Vec<_> = results.into_iter().map(|(_, b)| b).collect();
            io::beads_scatter_svg(&cfgs)
        }
    };
    emit(&args.out, &content)
}

fn run_solve(args: &SolveArgs) -> Result<(), AppError> {
    let shape = parse_shape(&args.shape, args.scale)?;
    let (nx, ny) = parse_grid(&args.grid)?;
    let bc = boundary_from_profile(&shape);
    let opts = SolveOptions {
        max_iters: args.max_iters,
        tol: args.tol,
    };
    let (field, report) = solver::maximize_entropy(&bc, nx, ny, &opts)
        .map_err(|e| AppError::usage(format!("solve setup: {e}")))?;
    let feas = solver::feasibility_residual(&field, &bc);
    eprintln!(
        "objective {:.9}  iterations {}  converged {}  pg_norm {:.3e}  feasibility {:.3e}",
        report.objective, report.iterations, report.converged, report.pg_norm, feas
    );
    let content = match args.format {
        SolveFormat::Csv => io::field_to_csv(&field),
        SolveFormat::Json => {
            let doc = serde_json::json!({ "report": report, "field": field });
            format!("{:#}\n", doc)
        }
        SolveFormat::Svg => io::field_svg(&field, args.contours),
    };
    let converged = report.converged;
    emit(&args.out, &content)?;
    if !converged {
        return Err(AppError::no_convergence(format!(
            "ascent did not converge within {} iterations",
            args.max_iters
        )));
    }
    Ok(())
}

fn run_verify() -> ExitCode {
    let mut failures = 0u32;
    let mut check = |name: &str, r: Result<(), String>| match r {
        Ok(()) => println!("ok - {name}"),
        Err(e) => {
            failures += 1;
            println!("FAIL - {name}: {e}");
        }
    };

    check("surface tension duality", {
        [(0.1, 0.2), (0.0, 0.3), (-0.3, 0.15)]
            .into_iter()
            .try_for_each(|(s, t)| {
                let sigma = entropy::legendre_surface_tension(Slope::new(s, t))
                    .map_err(|e| e.to_string())?;
                let gap = (sigma + entropy::ent(Slope::new(s, t))).abs();
                if gap <= 1e-6 {
                    Ok(())
                } else {
                    Err(format!("gap {gap:.3e} at ({s}, {t})"))
                }
            })
    });

    check("rotation round trip", {
        let mut worst = 0.0f64;
        for i in 0..20 {
            for j in 1..20 {
                let p = Slope::new(-0.49 + 0.98 * i as f64 / 19.0, 3.0 * j as f64 / 19.0);
                let q = entropy::unrotate(entropy::rotate(p));
                worst = worst.max((q.s - p.s).abs() + (q.t - p.t).abs());
            }
        }
        if worst <= 1e-10 {
            Ok(())
        } else {
            Err(format!("worst drift {worst:.3e}"))
        }
    });

    check("filling counts against enumeration", {
        [("4,2", vec![4u64, 2], vec![]), ("3,2/1", vec![3, 2], vec![1u64])]
            .into_iter()
            .try_for_each(|(label, outer, inner)| {
                let p = profile_from_partitions(&outer, &inner, 1).map_err(|e| e.to_string())?;
                let fast = tableaux::count_syt(&p).map_err(|e| e.to_string())?;
                let brute = tableaux::count_syt_brute(&p).map_err(|e| e.to_string())?;
                if fast == brute {
                    Ok(())
                } else {
                    Err(format!("{label}: {fast} vs {brute}"))
                }
            })
    });

    check("torus partition against enumeration", {
        [(2usize, 2usize), (1, 3)].into_iter().try_for_each(|(p, q)| {
            let (a, b, c) = (0.8, 1.2, 0.9);
            let brute = dimer::torus_matching_sum(p, q, a, b, c).map_err(|e| e.to_string())?;
            let lnz = dimer::torus_log_partition(p, q, a, b, c).map_err(|e| e.to_string())?;
            let rel = (lnz.exp() - brute).abs() / brute;
            if rel <= 1e-10 {
                Ok(())
            } else {
                Err(format!("{p}x{q}: rel err {rel:.2e}"))
            }
        })
    });

    check("tall region routes agree", {
        (|| {
            let p = profile_from_partitions(&[3, 2], &[1], 1).map_err(|e| e.to_string())?;
            let transfer =
                dimer::count_tilings_tall_region(&p, 2).map_err(|e| e.to_string())?;
            let brute = dimer::count_tall_by_enumeration(&p, 2, 1_000_000)
                .map_err(|e| e.to_string())?;
            if transfer != brute {
                return Err(format!("transfer {transfer} vs enumeration {brute}"));
            }
            let sq = profile_from_partitions(&[2, 2], &[], 1).map_err(|e| e.to_string())?;
            let z = dimer::count_tilings_tall_region(&sq, 30).map_err(|e| e.to_string())?;
            if z != dimer::boxed_plane_partitions(2, 2, 30) {
                return Err("square count disagrees with closed form".into());
            }
            Ok(())
        })()
    });

    check("sampling bijection round trip", {
        (|| {
            let p = profile_from_partitions(&[3, 2], &[], 1).map_err(|e| e.to_string())?;
            let mut rng = ChaCha8Rng::seed_from_u64(11);
            for _ in 0..200 {
                let t = tableaux::sample_syt(&p, &mut rng).map_err(|e| e.to_string())?;
                let b = tableaux::tableau_to_beads(&t, &mut rng);
                let t2 = tableaux::beads_to_tableau(&b).map_err(|e| e.to_string())?;
                if t.entries() != t2.entries() {
                    return Err("round trip changed the tableau".into());
                }
            }
            Ok(())
        })()
    });

    check("solver feasibility", {
        (|| {
            let p = profile_from_partitions(&[4, 4, 2], &[], 1).map_err(|e| e.to_string())?;
            let bc = boundary_from_profile(&p);
            let (field, report) =
                solver::maximize_entropy(&bc, 12, 12, &SolveOptions::default())
                    .map_err(|e| e.to_string())?;
            let feas = solver::feasibility_residual(&field, &bc);
            if !report.converged {
                return Err("solve did not converge".into());
            }
            if feas > 1e-9 {
                return Err(format!("feasibility {feas:.3e}"));
            }
            Ok(())
        })()
    });

    if failures == 0 {
        println!("all checks passed");
        ExitCode::SUCCESS
    } else {
        println!("{failures} check(s) failed");
        ExitCode::from(1)
    }
}

fn main() -> ExitCode {
    if let Ok(v) = std::env::var("BEAD_ATLAS_THREADS") {
        if let Ok(n) = v.parse::<usize>() {
            if n >= 1 {
                // A failure here means a pool already exists; keep going.
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
        }
    }
    let cli = Cli::parse();
    let result = match &cli.cmd {
        Cmd::Count(args) => run_count(args),
        Cmd::Sample(args) => run_sample(args),
        Cmd::Solve(args) => run_solve(args),
        Cmd::Verify => return run_verify(),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.msg);
            ExitCode::from(e.code)
        }
    }
}
