use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use qsysid::pipeline::ReportPayload;
use qsysid::{list_protocols, run_pipeline_text, ResultDocument, RunOverrides};

/// Simulate small quantum devices and identify them from measurement counts.
#[derive(Parser)]
#[command(name = "qsysid", version, about)]
struct Cli {
    /// Path to the run configuration.
    #[arg(long, value_name = "PATH", required_unless_present = "list_protocols")]
    config: Option<PathBuf>,
    /// Directory for result files; overrides the config's output.dir.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Base seed; overrides the config's protocol.seed.
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
    /// Worker pool size; results never depend on it.
    #[arg(long, value_name = "N")]
    threads: Option<usize>,
    /// Also run every estimate on exact expectation values and write
    /// comparison columns.
    #[arg(long)]
    oracle: bool,
    /// Print the protocol table and exit.
    #[arg(long)]
    list_protocols: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.list_protocols {
        print!("{}", list_protocols());
        return ExitCode::SUCCESS;
    }
    if let Some(threads) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global() {
            eprintln!("config error: cannot build a {threads}-thread pool: {e}");
            return ExitCode::from(1);
        }
    }
    let path = cli.config.expect("clap guarantees --config unless --list-protocols");
    let text = match std::fs::read_to_string(&path) {
        Ok(text) => text,
        Err(e) => {
            eprintln!("config error: cannot read {}: {e}", path.display());
            return ExitCode::from(1);
        }
    };
    let overrides = RunOverrides { seed: cli.seed, out_dir: cli.out, oracle: cli.oracle };
    match run_pipeline_text(&text, &overrides) {
        Ok(artifacts) => {
            print!("{}", summarize(&artifacts.document));
            for file in &artifacts.files {
                println!("wrote {}", file.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn summarize(document: &ResultDocument) -> String {
    let mut out = format!(
        "{} with seed {} ({} shots issued)\n",
        document.protocol, document.seed, document.total_shots
    );
    match &document.report {
        ReportPayload::Leakage(r) => {
            out.push_str(&format!(
                "  mean leakage = {:.6} over {} conditioned shots\n",
                r.mean_leak, r.conditioned_shots
            ));
        }
        ReportPayload::Confinement(r) => {
            out.push_str(&format!(
                "  h0 + 2 h1 = {:.6}, peak at omega = {:.6}\n  leakage bound epsilon <= {:.6}\n",
                r.spectral_sum, r.peak_omega, r.bounds.upper
            ));
        }
        ReportPayload::OmegaTheta(r) => {
            out.push_str(&format!(
                "  omega_hat = {:.6}, theta_hat = {:.6}\n",
                r.omega_hat, r.theta_hat
            ));
        }
        ReportPayload::Phi(r) => match r.estimate.phi_hat {
            Some(phi) => out.push_str(&format!("  phi_hat = {phi:.6}\n")),
            None => out.push_str(&format!(
                "  phi unresolved between candidates {:?}\n",
                r.estimate.phi_candidates
            )),
        },
        ReportPayload::ControlFit(r) => {
            out.push_str(&format!(
                "  linear model intercept = {:?}, delta = {:.6}\n",
                r.linear.intercept, r.linear.delta
            ));
            out.push_str(&format!(
                "  best model by adjusted score: {}\n",
                r.comparison.best().spec
            ));
        }
        ReportPayload::Decoherence(r) => {
            out.push_str(&format!("  classification: {}\n", r.classification));
            if let Some(gamma) = r.gamma_hat {
                out.push_str(&format!("  gamma_hat = {gamma:.6}\n"));
            }
            if let Some(omega0) = r.omega0_hat {
                out.push_str(&format!("  omega0_hat = {omega0:.6}\n"));
            }
        }
    }
    out
}
