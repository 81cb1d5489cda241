//! `gflcoi`: validate cases, run scenarios and sweeps, print equivalents.
//!
//! Exit codes: 0 success, 1 a simulation or sweep point failed (artifacts
//! and a `FAILED` marker are still written), 2 bad input.

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use gfl_coi::analysis::SweepSpec;
use gfl_coi::caseio::{
    self, model_summary, parse_case_str, parse_variant, parse_variant_list, CaseSource, CompareEntry, RunManifest,
    RunReport, SweepEntry, SweepMode,
};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "gflcoi", version, about = "Frequency dynamics of power systems with grid-following converters")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and check a case file, list defaulted and provisional fields.
    Validate {
        /// Path, or `bundled:<name>`.
        case: String,
    },
    /// Simulate the variants of a manifest and write CSVs and metrics.
    Run {
        manifest: PathBuf,
        #[command(flatten)]
        opts: Overrides,
    },
    /// Run only the parameter sweeps of a manifest.
    Sweep {
        manifest: PathBuf,
        #[command(flatten)]
        opts: Overrides,
    },
    /// Print COI, converter and network parameters of a case.
    Equivalents {
        /// Path, or `bundled:<name>`.
        case: String,
    },
}

#[derive(Args, Default)]
struct Overrides {
    /// Output step, s.
    #[arg(long)]
    dt: Option<f64>,
    /// Simulated time, s.
    #[arg(long)]
    duration: Option<f64>,
    /// Comma separated: multigen, proposed, reference, sfr, rotor.
    #[arg(long)]
    variants: Option<String>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Reserved. Recorded in the metrics file; the models are deterministic.
    #[arg(long)]
    seed: Option<u64>,
    /// Integrate the signed error instead of its magnitude.
    #[arg(long)]
    signed_error_index: bool,
    /// Compute error indices between the variants.
    #[arg(long)]
    compare: bool,
    /// Variant used as reference by --compare.
    #[arg(long)]
    reference: Option<String>,
    /// Extra sweep, `path=v1,v2,...`; repeatable.
    #[arg(long)]
    sweep: Vec<String>,
    /// Evaluate the --sweep grids on the whole system instead of the
    /// converter alone.
    #[arg(long)]
    system_sweep: bool,
}

impl Overrides {
    fn apply(&self, m: &mut RunManifest) -> Result<()> {
        if let Some(dt) = self.dt {
            m.sim.dt_s = dt;
        }
        if let Some(d) = self.duration {
            m.sim.duration_s = d;
        }
        if let Some(v) = &self.variants {
            m.variants = parse_variant_list(v)?;
        }
        if let Some(out) = &self.out {
            m.output_dir = out.clone();
        }
        if self.seed.is_some() {
            m.seed = self.seed;
        }
        if self.compare || self.reference.is_some() || self.signed_error_index {
            let c = m.compare.get_or_insert_with(CompareEntry::default);
            if let Some(r) = &self.reference {
                c.reference = Some(parse_variant(r)?);
            }
            if self.signed_error_index {
                c.signed = true;
            }
        }
        let mode = if self.system_sweep { SweepMode::System } else { SweepMode::Equivalent };
        for s in &self.sweep {
            let spec = SweepSpec::parse(s).with_context(|| format!("--sweep {s}"))?;
            m.sweeps.push(SweepEntry { spec, mode, gfl: None });
        }
        Ok(())
    }
}

fn load_manifest(path: &Path, opts: &Overrides) -> Result<RunManifest> {
    let mut m = RunManifest::load(path).with_context(|| format!("reading manifest {}", path.display()))?;
    opts.apply(&mut m)?;
    m.validate()?;
    Ok(m)
}

fn case_text(arg: &str) -> Result<String> {
    Ok(CaseSource::parse(arg, Path::new("")).text()?)
}

fn print_report(r: &RunReport) {
    for a in &r.artifacts {
        println!("wrote {}", a.display());
    }
    for f in &r.failures {
        eprintln!("failed: {f}");
    }
}

fn validate(case: &str) -> Result<i32> {
    let parsed = parse_case_str(&case_text(case)?).with_context(|| format!("case {case}"))?;
    let c = &parsed.case;
    let sys = c.initialize()?;
    println!(
        "{}: {} buses, {} branches, {} loads, {} SGs, {} GFLs, power flow in {} iterations",
        c.system.name,
        c.buses.len(),
        c.branches.len(),
        c.loads.len(),
        c.sgs.len(),
        c.gfls.len(),
        sys.power_flow_iterations
    );
    for d in &parsed.defaulted {
        println!("default  {} = {}", d.field, d.value);
    }
    for p in &c.system.provisional {
        println!("provisional  {p}");
    }
    Ok(0)
}

fn equivalents(case: &str) -> Result<i32> {
    let parsed = parse_case_str(&case_text(case)?).with_context(|| format!("case {case}"))?;
    let sys = parsed.case.initialize()?;
    let names: Vec<String> = parsed.case.gfls.iter().map(|g| g.name.clone()).collect();
    print!("{}", model_summary(&sys, &names)?.render());
    Ok(0)
}

fn dispatch(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Validate { case } => validate(&case),
        Command::Equivalents { case } => equivalents(&case),
        Command::Run { manifest, opts } => {
            let m = load_manifest(&manifest, &opts)?;
            let r = caseio::run(&m)?;
            print_report(&r);
            Ok(r.exit_code())
        }
        Command::Sweep { manifest, opts } => {
            let m = load_manifest(&manifest, &opts)?;
            let r = caseio::run_sweeps(&m)?;
            print_report(&r);
            Ok(r.exit_code())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
