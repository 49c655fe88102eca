use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use oam_memsim::analysis::{parse_efficiency_samples, ChshCounts, CountTable16, TomographyMethod, TomographyResult, VisibilityScan};
use oam_memsim::config::RunConfig;
use oam_memsim::counts::TimestampStream;
use oam_memsim::hilbert::fidelity;
use oam_memsim::pipeline::run_simulation;
use oam_memsim::report::{
    analyze_chsh, analyze_correlate, analyze_fit_memory, analyze_hbt, analyze_run, analyze_tomo, analyze_visibility,
    format_chsh, format_correlate, format_fit, format_hbt, format_run, format_tomo, format_visibility, AnalysisOptions,
    CorrelateOptions,
};
use oam_memsim::{Error, Result};

/// Simulate and analyse OAM entanglement storage experiments.
#[derive(Parser, Debug)]
#[command(name = "oamsim", version)]
struct Cli {
    /// Run configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed; overrides the configuration, and seeds error-bar resampling.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (simulate) or output file (analyze, report).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Use raw counts even when a background file is given.
    #[arg(long, global = true)]
    no_background_subtraction: bool,
    /// Poisson resamples for error bars (0 disables).
    #[arg(long, global = true, default_value_t = 200)]
    resamples: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run source, memory, projections and detection; write tables, streams and a manifest.
    Simulate,
    /// Run one estimator on one input file.
    #[command(subcommand)]
    Analyze(Analyze),
    /// Summarise a simulate output directory.
    Report {
        /// Run directory; defaults to the configured output directory.
        dir: Option<PathBuf>,
    },
}

#[derive(Args, Debug)]
struct WithBackground {
    input: PathBuf,
    /// Signal-free repeat of the same measurement, subtracted per setting.
    #[arg(long)]
    background: Option<PathBuf>,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum Method {
    Mle,
    Linear,
}

#[derive(Subcommand, Debug)]
enum Analyze {
    /// Two-qubit state reconstruction from a 16-setting table.
    Tomo {
        #[command(flatten)]
        files: WithBackground,
        #[arg(long, value_enum, default_value_t = Method::Mle)]
        method: Method,
        /// Earlier reconstruction; prints the fidelity between the two.
        #[arg(long)]
        reference: Option<PathBuf>,
    },
    /// Correlations and Bell parameter.
    Chsh {
        #[command(flatten)]
        files: WithBackground,
    },
    /// Fringe visibility at fixed θ_A.
    Visibility {
        #[command(flatten)]
        files: WithBackground,
    },
    /// Heralded anti-correlation parameter from a timestamp stream.
    Hbt { input: PathBuf },
    /// Cross- and auto-correlations and the Cauchy-Schwarz parameter.
    Correlate {
        input: PathBuf,
        #[arg(long, default_value_t = 1500)]
        span_ns: u64,
        #[arg(long, default_value_t = 200)]
        peak_window_ns: u64,
        /// Signal-2 minus signal-1 arrival delay.
        #[arg(long, default_value_t = 380)]
        cross_delay_ns: i64,
    },
    /// Exponential fit to `tau_ns,efficiency` samples.
    FitMemory {
        input: PathBuf,
        /// Also express the fit about this time origin.
        #[arg(long)]
        tau0_ns: Option<f64>,
    },
}

fn write(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| Error::Io {
            path: parent.to_path_buf(),
            source: e,
        })?;
    }
    std::fs::write(path, text).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn load_config(cli: &Cli) -> Result<Option<RunConfig>> {
    cli.config.as_deref().map(|p| RunConfig::load(p, cli.seed)).transpose()
}

fn run(cli: Cli) -> Result<()> {
    let opts = AnalysisOptions {
        subtract_background: !cli.no_background_subtraction,
        resamples: cli.resamples,
        seed: cli.seed.unwrap_or(0),
        method: TomographyMethod::Mle,
    };
    match &cli.command {
        Command::Simulate => {
            let mut cfg = match load_config(&cli)? {
                Some(c) => c,
                None => match cli.seed {
                    Some(s) => RunConfig::with_seed(s),
                    None => return Err(Error::InvalidArgument("simulate needs --config or --seed".into())),
                },
            };
            if let Some(out) = &cli.out {
                cfg.output_dir = out.clone();
            }
            let files = run_simulation(&cfg)?;
            println!("wrote {} files to {}", files.len(), cfg.output_dir.display());
            for f in files {
                println!("  {}", f.display());
            }
        }
        Command::Report { dir } => {
            let dir = match (dir, load_config(&cli)?) {
                (Some(d), _) => d.clone(),
                (None, Some(cfg)) => cfg.output_dir,
                (None, None) => PathBuf::from("run"),
            };
            let text = format_run(&analyze_run(&dir, &opts)?)?;
            let out = cli.out.clone().unwrap_or_else(|| dir.join("report.txt"));
            write(&out, &text)?;
            print!("{text}");
        }
        Command::Analyze(a) => analyze(a, &cli, opts)?,
    }
    Ok(())
}

fn analyze(a: &Analyze, cli: &Cli, mut opts: AnalysisOptions) -> Result<()> {
    match a {
        Analyze::Tomo {
            files,
            method,
            reference,
        } => {
            opts.method = match method {
                Method::Mle => TomographyMethod::Mle,
                Method::Linear => TomographyMethod::Linear,
            };
            let table = CountTable16::read(&files.input)?;
            let bg = files.background.as_deref().map(CountTable16::read).transpose()?;
            let r = analyze_tomo(&table, bg.as_ref(), &opts)?;
            print!("{}", format_tomo(&r));
            if let Some(p) = reference {
                let reference = TomographyResult::from_text(&read_text(p)?, &p.display().to_string())?;
                println!("fidelity to reference: {:.4}", fidelity(&r.rho, &reference.rho)?);
            }
            if let Some(out) = &cli.out {
                write(out, &r.to_text())?;
            }
            if !r.converged {
                return Err(Error::NonConvergence {
                    iterations: r.iterations,
                    gradient_norm: r.gradient_norm,
                });
            }
        }
        Analyze::Chsh { files } => {
            let c = ChshCounts::read(&files.input)?;
            let bg = files.background.as_deref().map(ChshCounts::read).transpose()?;
            let r = analyze_chsh(&c, bg.as_ref(), &opts)?;
            print!("{}", format_chsh(&r));
            if let Some(out) = &cli.out {
                let e = r.correlations;
                let std = r.s_std.map_or("nan".into(), |s| format!("{s:?}"));
                write(
                    out,
                    &format!(
                        "e_ab,e_abp,e_apb,e_apbp,s,s_std\n{:?},{:?},{:?},{:?},{:?},{std}\n",
                        e[0], e[1], e[2], e[3], r.s
                    ),
                )?;
            }
        }
        Analyze::Visibility { files } => {
            let origin = files.input.display().to_string();
            let scan = VisibilityScan::from_csv(&read_text(&files.input)?, &origin)?;
            let bg = match &files.background {
                Some(p) => Some(VisibilityScan::from_csv(&read_text(p)?, &p.display().to_string())?),
                None => None,
            };
            let v = analyze_visibility(&scan, bg.as_ref(), &opts)?;
            print!("{}", format_visibility(scan.theta_a_rad, &v));
            if let Some(out) = &cli.out {
                write(
                    out,
                    &format!(
                        "theta_a_rad,visibility,visibility_std,phase_rad,offset\n{:?},{:?},{:?},{:?},{:?}\n",
                        scan.theta_a_rad, v.visibility, v.visibility_std, v.phase, v.offset
                    ),
                )?;
            }
        }
        Analyze::Hbt { input } => {
            let s = TimestampStream::read(input)?;
            let (c, al) = analyze_hbt(&s)?;
            print!("{}", format_hbt(&c, &al));
            if let Some(out) = &cli.out {
                write(
                    out,
                    &format!(
                        "p1,p12,p13,p123,alpha,alpha_std\n{},{},{},{},{:?},{:?}\n",
                        c.p1, c.p12, c.p13, c.p123, al.value, al.std_error
                    ),
                )?;
            }
        }
        Analyze::Correlate {
            input,
            span_ns,
            peak_window_ns,
            cross_delay_ns,
        } => {
            let s = TimestampStream::read(input)?;
            let r = analyze_correlate(
                &s,
                &CorrelateOptions {
                    span_ns: *span_ns,
                    peak_window_ns: *peak_window_ns,
                    cross_delay_ns: *cross_delay_ns,
                },
            )?;
            print!("{}", format_correlate(&r));
            let out = cli.out.clone().unwrap_or_else(|| input.with_file_name("cross_histogram.csv"));
            write(&out, &r.cross.to_csv())?;
            println!("histogram: {}", out.display());
        }
        Analyze::FitMemory { input, tau0_ns } => {
            let samples = parse_efficiency_samples(&read_text(input)?, &input.display().to_string())?;
            let (fit, rebased) = analyze_fit_memory(&samples, *tau0_ns)?;
            print!("{}", format_fit(&fit));
            if let Some(r) = &rebased {
                print!("about tau0: {}", format_fit(r));
            }
            if let Some(out) = &cli.out {
                let f = rebased.unwrap_or(fit).fit;
                write(
                    out,
                    &format!("g0,amplitude,tau0_ns,decay_ns\n{:?},{:?},{:?},{:?}\n", f.g0, f.a, f.tau0_ns, f.decay_ns),
                )?;
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
