use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use morrey_core::evolution::Trajectory;
use morrey_core::profile::{greedy_spec, profile_decompose, ProfileConfig};
use morrey_core::spaces::{hat_morrey_norm, morrey_norm, MorreySpec};
use morrey_core::stationary::GridParams;
use morrey_core::GridField;
use morrey_nls::experiments::ground_state_summary;
use morrey_nls::{run, CliError, ExperimentConfig};
use serde_json::json;

#[derive(Parser)]
#[command(name = "morrey-nls", version, about = "Hat-Morrey NLS experiments")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the experiment described by a TOML config.
    Run { config: PathBuf },
    /// Parse and validate a config without running it.
    Validate { config: PathBuf },
    /// Morrey or hat-Morrey norm of a stored field.
    Norms {
        field: PathBuf,
        #[arg(long)]
        p: f64,
        #[arg(long)]
        q: f64,
        #[arg(long)]
        r: f64,
        #[arg(long)]
        hat: bool,
    },
    /// Ground state of `-ΔQ + Q = Q^{2α+1}`.
    GroundState {
        #[arg(long)]
        d: usize,
        #[arg(long)]
        alpha: f64,
        #[arg(long, default_value_t = 1024)]
        n: usize,
        /// Box half-width.
        #[arg(long, default_value_t = 32.0)]
        extent: f64,
        /// Write the field here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Profile decomposition of the fields stored in a directory (a saved
    /// trajectory or a set of `.gfld` files, taken in name order).
    Decompose {
        dir: PathBuf,
        #[arg(long)]
        eps: f64,
        /// Needed when the directory holds no trajectory manifest.
        #[arg(long)]
        alpha: Option<f64>,
        /// Where profiles and the report go; defaults to `<dir>/decomposition`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match dispatch(cli.cmd) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("morrey-nls: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn dispatch(cmd: Cmd) -> Result<u8, CliError> {
    match cmd {
        Cmd::Run { config } => {
            let cfg = ExperimentConfig::load(&config)?;
            let (report, path) = run(&cfg)?;
            for c in &report.checks {
                let tol = c.tolerance.map_or(String::new(), |t| format!(" (tolerance {t:e})"));
                let mark = if c.pass { "ok  " } else { "FAIL" };
                println!("{mark} {} = {:e}{tol}", c.name, c.value);
            }
            for (k, v) in &report.labels {
                println!("     {k}: {v}");
            }
            println!("report: {}", path.display());
            Ok(if report.passed { 0 } else { 3 })
        }
        Cmd::Validate { config } => {
            let cfg = ExperimentConfig::load(&config)?;
            let e = cfg.validate()?;
            println!("{}", serde_json::to_string_pretty(&json!({ "valid": true, "exponents": e, "config_hash": cfg.hash() })).expect("json"));
            Ok(0)
        }
        Cmd::Norms { field, p, q, r, hat } => {
            let f = GridField::load(&field)?;
            let rep = if hat {
                hat_morrey_norm(&f, &MorreySpec::hat(p, q, r)?)?
            } else {
                morrey_norm(&f, &MorreySpec::morrey(p, q, r)?)?
            };
            println!("{}", serde_json::to_string_pretty(&rep).expect("json"));
            Ok(0)
        }
        Cmd::GroundState { d, alpha, n, extent, out } => {
            let (q, s) = ground_state_summary(d, alpha, GridParams { n, extent })?;
            if let Some(p) = out {
                q.field.save(&p)?;
            }
            println!("{}", serde_json::to_string_pretty(&s).expect("json"));
            Ok(0)
        }
        Cmd::Decompose { dir, eps, alpha, out } => decompose(&dir, eps, alpha, out),
    }
}

fn load_sequence(dir: &Path) -> Result<(Vec<GridField>, Option<f64>), CliError> {
    if dir.join("manifest.json").exists() {
        let traj = Trajectory::load(dir)?;
        return Ok((traj.fields, Some(traj.cfg.alpha)));
    }
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| CliError::Config(format!("{}: {e}", dir.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "gfld"))
        .collect();
    files.sort();
    let seq = files.iter().map(GridField::load).collect::<Result<Vec<_>, _>>()?;
    Ok((seq, None))
}

fn decompose(dir: &Path, eps: f64, alpha: Option<f64>, out: Option<PathBuf>) -> Result<u8, CliError> {
    let (seq, stored) = load_sequence(dir)?;
    if seq.len() < 3 {
        return Err(CliError::Usage(format!("{} holds {} fields, need at least 3", dir.display(), seq.len())));
    }
    let alpha = alpha
        .or(stored)
        .ok_or_else(|| CliError::Usage("--alpha is required without a trajectory manifest".into()))?;
    let d = seq[0].dim();
    let spec = greedy_spec(d, alpha)?;
    let dec = profile_decompose(&seq, eps, &spec, alpha, &ProfileConfig::default())?;
    let out = out.unwrap_or_else(|| dir.join("decomposition"));
    std::fs::create_dir_all(&out).map_err(|e| CliError::Io(format!("{}: {e}", out.display())))?;
    let mut profiles = Vec::new();
    for (j, p) in dec.profiles.iter().enumerate() {
        let name = format!("profile_{j:03}.gfld");
        p.profile.save(out.join(&name))?;
        profiles.push(json!({ "family": p.family, "field": name, "deformations": p.deformations }));
    }
    let remainder_norms: Vec<f64> = dec.remainders.iter().map(|r| r.l2_norm()).collect();
    let report = json!({
        "alpha": alpha,
        "eps": eps,
        "greedy_spec": spec,
        "profiles": profiles,
        "decoupling_residual": dec.decoupling_residual,
        "pairwise_divergence": dec.pairwise_divergence,
        "piece_counts": dec.piece_counts,
        "unmatched_pieces": dec.unmatched_pieces,
        "remainder_l2": remainder_norms,
        "remainder_strichartz": dec.remainder_strichartz_values,
        "remainder_strichartz_trend": dec.remainder_strichartz,
        "size_table": dec.size_table,
    });
    let path = out.join("decomposition.json");
    std::fs::write(&path, serde_json::to_string_pretty(&report).expect("json"))
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    println!("{}", path.display());
    Ok(0)
}
