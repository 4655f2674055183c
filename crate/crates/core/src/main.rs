use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use chbiot::config::{apply_overrides, parse_config, smooth_random_field, RunConfig};
use chbiot::diagnostics::{convergence_study, OrderTable, StudyPreset};
use chbiot::mesh::Grid;
use chbiot::oracle::verify_operator_identities;
use chbiot::output::write_outputs;
use chbiot::stepper::run_simulation;
use chbiot::Error;

/// Cahn-Hilliard-Biot simulator on a structured grid.
#[derive(Parser, Debug)]
#[command(version, about)]
struct Cli {
    /// Configuration file (key = value lines).
    #[arg(long)]
    config: PathBuf,

    /// Output directory; overrides output.dir.
    #[arg(long)]
    out: Option<PathBuf>,

    /// KEY=VALUE applied after the file, repeatable.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,

    /// Run the dense operator checks and exit.
    #[arg(long, conflicts_with = "mms")]
    oracle: bool,

    /// Run the convergence studies and exit.
    #[arg(long)]
    mms: bool,
}

fn load(cli: &Cli) -> Result<RunConfig, Error> {
    let text = fs::read_to_string(&cli.config).map_err(|source| Error::Io { path: cli.config.clone(), source })?;
    let mut cfg = parse_config(&text)?;
    apply_overrides(&mut cfg, &cli.overrides)?;
    if let Some(out) = &cli.out {
        cfg.output.dir = out.clone();
    }
    Ok(cfg)
}

fn write(path: PathBuf, text: &str) -> Result<(), Error> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|source| Error::Io { path: dir.to_path_buf(), source })?;
    }
    fs::write(&path, text).map_err(|source| Error::Io { path, source })
}

fn run_oracle(cfg: &RunConfig) -> Result<bool, Error> {
    let grid = Grid::new(8, 8, cfg.grid.lx, cfg.grid.ly, cfg.grid.tags)?;
    let mut csv = String::from("sample,check,value,threshold,result\n");
    let mut ok = true;
    for seed in 0..3u64 {
        let phi = smooth_random_field(&grid, 1.0, seed);
        let report = verify_operator_identities(&grid, &cfg.material, &phi)?;
        println!("sample {seed}\n{report}");
        ok &= report.passed();
        for row in report.csv_rows() {
            csv.push_str(&format!("{seed},{row}\n"));
        }
    }
    write(cfg.output.dir.join("oracle.csv"), &csv)?;
    println!("{}", if ok { "oracle: PASS" } else { "oracle: FAIL" });
    Ok(ok)
}

fn run_mms(cfg: &RunConfig) -> Result<bool, Error> {
    let studies: [(StudyPreset, &[usize], &[f64], f64, f64); 3] = [
        (StudyPreset::HeatSpace, &[9, 17, 33], &[1e-6], 1.8, 2.2),
        (StudyPreset::HeatTime, &[17], &[4e-3, 2e-3, 1e-3], 0.85, 1.15),
        (StudyPreset::ElasticityMms, &[17, 33, 65], &[], 1.8, f64::INFINITY),
    ];
    let mut csv = String::from("preset,size,error\n");
    let mut ok = true;
    for (preset, meshes, dts, lo, hi) in studies {
        let table: OrderTable = convergence_study(preset, meshes, dts)?;
        println!("{table}\n");
        ok &= table.order >= lo && table.order <= hi;
        for r in &table.rows {
            csv.push_str(&format!("{},{:e},{:e}\n", preset.id(), r.size, r.error));
        }
    }
    write(cfg.output.dir.join("mms.csv"), &csv)?;
    println!("{}", if ok { "mms: PASS" } else { "mms: FAIL" });
    Ok(ok)
}

fn run(cli: &Cli) -> Result<bool, Error> {
    let cfg = load(cli)?;
    if cli.oracle {
        return run_oracle(&cfg);
    }
    if cli.mms {
        return run_mms(&cfg);
    }
    let model = cfg.model()?;
    let initial = cfg.initial_state(&model)?;
    let traj = run_simulation(&model, initial, &cfg.stepper, cfg.t_end, &cfg.sources())?;
    let summary = write_outputs(&traj, &cfg, &model.grid, &cfg.output.dir)?;
    println!(
        "{} windows, t = {:e}, {} snapshots in {}",
        traj.reports.len(),
        traj.last().t,
        summary.snapshots.len(),
        cfg.output.dir.display()
    );
    if let Some(f) = &traj.failure {
        eprintln!("error: {f}");
    }
    Ok(traj.complete)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
