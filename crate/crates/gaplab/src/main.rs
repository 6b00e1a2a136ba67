//! Command-line front end: instance generation, exact spectra, perturbation
//! reports, randomized-coefficient histograms, single QMC points, and the
//! full pipeline.

use clap::{Parser, Subcommand, ValueEnum};
use gaplab::bits::BitString;
use gaplab::experiment::{self, fmt_sci, parse_s_grid, PipelineConfig};
use gaplab::hamiltonian::FieldCoefficients;
use gaplab::perturbation;
use gaplab::qmc::{self, RunParams};
use gaplab::sat::{self, dimacs, GenerateError};
use gaplab::spectrum;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "gaplab", version, about = "Planted 3SAT adiabatic-gap laboratory")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a certified double-plant instance and write it as DIMACS CNF.
    Gen {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Clause cap before aborting; default 20 n ln n.
        #[arg(long)]
        cap: Option<usize>,
        /// Also pick the crossing-manufacturing plant and attach the penalty.
        #[arg(long)]
        penalize: bool,
        /// Penalty bits (1-based, comma separated); default "1,2,3".
        #[arg(long, value_delimiter = ',', num_args = 3)]
        penalty_bits: Option<Vec<usize>>,
    },
    /// Exact lowest-two spectrum over an s grid (CSV).
    Exact {
        #[arg(long)]
        instance: PathBuf,
        /// "uniform" or a path to a coefficients JSON file.
        #[arg(long, default_value = "uniform")]
        coeffs: String,
        #[arg(long, value_name = "START:STOP:STEP")]
        s_grid: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Perturbation report (JSON): e2/e4 coefficients, d vector, predicted s*.
    Perturb {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long)]
        coeffs: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Histogram of the randomized second-order difference (CSV).
    Hist {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long, default_value_t = 1_000_000)]
        samples: usize,
        #[arg(long, default_value_t = 60)]
        bins: usize,
        #[arg(long, default_value_t = 0)]
        rng_seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// One dual-seedable QMC point (CSV row).
    Qmc {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long)]
        coeffs: Option<PathBuf>,
        #[arg(long)]
        s: f64,
        #[arg(long, value_enum)]
        seed_string: SeedString,
        #[arg(long)]
        beta: f64,
        #[arg(long)]
        sweeps: usize,
        #[arg(long, default_value_t = 5)]
        thin: usize,
        #[arg(long, default_value_t = 2500)]
        equil: usize,
        #[arg(long)]
        rng_seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Full protocol from a config file; artifacts land in --out-dir.
    Pipeline {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "artifacts")]
        out_dir: PathBuf,
        /// Print the stage plan and write only the manifest.
        #[arg(long)]
        dry_run: bool,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum SeedString {
    Zeros,
    Ones,
}

fn load_instance(path: &PathBuf) -> Result<sat::Instance, Box<dyn std::error::Error>> {
    let text = std::fs::read_to_string(path)?;
    Ok(dimacs::from_dimacs(&text)?)
}

fn load_coeffs(
    spec: Option<&PathBuf>,
    n: usize,
) -> Result<FieldCoefficients, Box<dyn std::error::Error>> {
    match spec {
        None => Ok(FieldCoefficients::uniform(n)),
        Some(path) => {
            let text = std::fs::read_to_string(path)?;
            let coeffs: FieldCoefficients = serde_json::from_str(&text)?;
            if coeffs.len() != n {
                return Err(format!("coefficients have {} entries, instance has {n}", coeffs.len()).into());
            }
            Ok(coeffs)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            let mut src = e.source();
            while let Some(s) = src {
                eprintln!("  caused by: {s}");
                src = s.source();
            }
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode, Box<dyn std::error::Error>> {
    match cli.cmd {
        Cmd::Gen { n, seed, out, cap, penalize, penalty_bits } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let cap = cap.unwrap_or_else(|| sat::default_clause_cap(n));
            let base = match sat::generate_double_plant_capped(n, &mut rng, cap) {
                Ok(inst) => inst,
                Err(e @ GenerateError::ClauseCapExceeded { .. }) => {
                    eprintln!("error: {e}");
                    return Ok(ExitCode::from(2));
                }
                Err(e) => return Err(e.into()),
            };
            let instance = if penalize {
                let target = perturbation::select_penalty_target(&base)?;
                let bits = match penalty_bits {
                    Some(v) => {
                        let mut b = [0usize; 3];
                        for (slot, &raw) in b.iter_mut().zip(&v) {
                            if raw == 0 || raw > n {
                                return Err(format!("penalty bit {raw} out of 1..={n}").into());
                            }
                            *slot = raw - 1;
                        }
                        b
                    }
                    None => [0, 1, 2],
                };
                sat::add_penalty_on_bits(&base, target, bits)
            } else {
                base
            };
            std::fs::write(&out, dimacs::to_dimacs(&instance))?;
            println!(
                "certified instance: n={} m={} penalty={}",
                instance.n,
                instance.m(),
                instance.penalty.is_some()
            );
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Exact { instance, coeffs, s_grid, out } => {
            let inst = load_instance(&instance)?;
            let coeffs = if coeffs == "uniform" {
                FieldCoefficients::uniform(inst.n)
            } else {
                load_coeffs(Some(&PathBuf::from(coeffs)), inst.n)?
            };
            let grid = parse_s_grid(&s_grid)?;
            let rows = spectrum::spectrum_scan(&inst, &coeffs, &grid)?;
            let mut csv = String::from("s,E0,E1,gap,W0,W1\n");
            for r in rows {
                csv.push_str(&format!(
                    "{},{},{},{},{},{}\n",
                    fmt_sci(r.s),
                    fmt_sci(r.e0),
                    fmt_sci(r.e1),
                    fmt_sci(r.gap),
                    fmt_sci(r.w0),
                    fmt_sci(r.w1)
                ));
            }
            std::fs::write(&out, csv)?;
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Perturb { instance, coeffs, out } => {
            let inst = load_instance(&instance)?;
            let coeffs = load_coeffs(coeffs.as_ref(), inst.n)?;
            let report = perturbation::perturbation_report(&inst, &coeffs)?;
            std::fs::write(&out, serde_json::to_string_pretty(&report)?)?;
            match report.s_star {
                Some(s) => println!("delta2 = {:.6}, predicted s* = {s:.4}", report.delta2),
                None => println!("delta2 = {:.6}, no crossing predicted", report.delta2),
            }
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Hist { instance, samples, bins, rng_seed, out } => {
            let inst = load_instance(&instance)?;
            let d = perturbation::d_vector(&inst)?;
            let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
            let draws = perturbation::randomized_delta_samples(&d, samples, &mut rng);
            let lo = draws.samples.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = draws.samples.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let width = ((hi - lo) / bins as f64).max(f64::MIN_POSITIVE);
            let mut counts = vec![0usize; bins];
            for &x in &draws.samples {
                let b = (((x - lo) / width) as usize).min(bins - 1);
                counts[b] += 1;
            }
            let mut csv = String::from("bin_lo,bin_hi,count\n");
            for (b, &count) in counts.iter().enumerate() {
                csv.push_str(&format!(
                    "{},{},{count}\n",
                    fmt_sci(lo + b as f64 * width),
                    fmt_sci(lo + (b + 1) as f64 * width)
                ));
            }
            std::fs::write(&out, csv)?;
            println!("mean = {}, variance = {}", draws.mean, draws.variance);
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Qmc {
            instance,
            coeffs,
            s,
            seed_string,
            beta,
            sweeps,
            thin,
            equil,
            rng_seed,
            out,
        } => {
            let inst = load_instance(&instance)?;
            let coeffs = load_coeffs(coeffs.as_ref(), inst.n)?;
            let seed_state = match seed_string {
                SeedString::Zeros => BitString::zeros(inst.n),
                SeedString::Ones => BitString::ones(inst.n),
            };
            let params = RunParams::new(beta, sweeps, thin, equil);
            let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
            let est = qmc::run_point(&inst, &coeffs, s, seed_state, params, &mut rng)?;
            let name = match seed_string {
                SeedString::Zeros => "zeros",
                SeedString::Ones => "ones",
            };
            let mut csv = String::from(
                "s,seed_string,H_mean,H_err,H0_mean,H0_err,V_mean,V_err,W_mean,W_err,m_mean,acc_rate,samples\n",
            );
            csv.push_str(&format!(
                "{},{name},{},{},{},{},{},{},{},{},{},{},{}\n",
                fmt_sci(s),
                fmt_sci(est.h.mean),
                fmt_sci(est.h.err),
                fmt_sci(est.h0.mean),
                fmt_sci(est.h0.err),
                fmt_sci(est.v.mean),
                fmt_sci(est.v.err),
                fmt_sci(est.w.mean),
                fmt_sci(est.w.err),
                fmt_sci(est.m_mean),
                fmt_sci(est.acc_rate),
                est.samples,
            ));
            std::fs::write(&out, csv)?;
            println!(
                "s={s} seed={name}: H = {} +- {}",
                est.h.mean, est.h.err
            );
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Pipeline { config, out_dir, dry_run } => {
            let text = std::fs::read_to_string(&config)?;
            let cfg = PipelineConfig::from_toml(&text)?;
            let manifest = experiment::pipeline(&cfg, &out_dir, dry_run)?;
            for stage in &manifest.stages {
                println!("{:24} {}", stage.name, stage.status);
            }
            if manifest.all_completed() || dry_run {
                Ok(ExitCode::SUCCESS)
            } else {
                Ok(ExitCode::FAILURE)
            }
        }
    }
}
