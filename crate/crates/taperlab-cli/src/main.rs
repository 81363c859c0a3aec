//! `taperlab` command line: simulate non-anechoic sweeps, correct them
//! with the multitaper pipeline, tune setup parameters, run time-gating
//! baselines, and compare all methods against a reference pattern.
//!
//! Errors are printed to stderr as one JSON object (`{"kind", "error"}`)
//! with a nonzero exit code, so scripted pipelines can branch on them.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use taperlab::config::{GatesConfig, RunConfig};
use taperlab::dpss::{dpss_basis, TaperSpec};
use taperlab::gating::{gated_pattern, GateSpec};
use taperlab::metrics::{aggregate, compare_case, emit_plot_data, CompareCase};
use taperlab::multitaper::correct_pattern;
use taperlab::sweep::{
    load_pattern, load_sweep, save_pattern, save_sweep, FrequencyGrid, Pattern, SweepSet,
};
use taperlab::synth::{synthesize, ChannelSpec};
use taperlab::tuner::{tune, SearchGrid, TunerOptions};
use taperlab::Error;

#[derive(Parser)]
#[command(name = "taperlab", version, about = "Multitaper post-processing for antenna sweeps measured in reflective environments")]
struct Cli {
    /// JSON run configuration (required by `compare`, optional defaults
    /// for `tune`).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Overrides the simulator seed from the channel spec.
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic non-anechoic sweep from a truth pattern.
    Simulate {
        /// Truth pattern CSV (angle_deg,mag_linear).
        #[arg(long)]
        truth: PathBuf,
        /// Centre frequency in Hz.
        #[arg(long)]
        f0: f64,
        /// Bandwidth in Hz.
        #[arg(long)]
        bw: f64,
        /// Number of frequency points.
        #[arg(long, default_value_t = 201)]
        k: usize,
        /// Channel spec JSON (delays, echoes, noise floor, seed).
        #[arg(long)]
        spec: PathBuf,
        /// Output sweep CSV.
        #[arg(long)]
        out: PathBuf,
    },
    /// Correct a sweep with one fixed (n, s) design.
    Correct {
        #[arg(long)]
        sweep: PathBuf,
        /// Centre frequency in Hz; checked against the sweep grid.
        #[arg(long)]
        f0: f64,
        /// Segment length in points.
        #[arg(long)]
        n: usize,
        /// Step length in points.
        #[arg(long)]
        s: usize,
        /// Time-half-bandwidth product.
        #[arg(long, default_value_t = 4.0)]
        thb: f64,
        /// Output pattern CSV.
        #[arg(long)]
        out: PathBuf,
    },
    /// Search (n, s) exhaustively and average the best quantile.
    Tune {
        #[arg(long)]
        sweep: PathBuf,
        /// Reference pattern CSV.
        #[arg(long = "ref")]
        reference: PathBuf,
        #[arg(long)]
        f0: f64,
        #[arg(long, default_value_t = 4.0)]
        thb: f64,
        /// Quantile of locally optimal designs to average.
        #[arg(long, default_value_t = 0.1)]
        sigma: f64,
        /// Output directory (report JSON, corrected pattern CSV,
        /// objective landscape CSV).
        #[arg(long)]
        out: PathBuf,
    },
    /// Apply one time-gating baseline.
    Gate {
        #[arg(long, value_enum)]
        method: GateMethod,
        #[arg(long)]
        sweep: PathBuf,
        #[arg(long)]
        f0: f64,
        /// Antenna separation in metres (rect).
        #[arg(long)]
        distance: Option<f64>,
        /// Gate width in seconds (rect, hann).
        #[arg(long)]
        width: Option<f64>,
        /// Gate centre in seconds (hann; defaults to the per-angle peak).
        #[arg(long)]
        center: Option<f64>,
        /// Upper detection threshold relative to the peak (composite).
        #[arg(long, default_value_t = 0.5)]
        rel_start: f64,
        /// Lower detection threshold relative to the peak (composite).
        #[arg(long, default_value_t = 0.25)]
        rel_stop: f64,
        /// Cosine-edge fraction of the detected interval (composite).
        #[arg(long, default_value_t = 0.25)]
        taper_fraction: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score every method against references for each configured dataset.
    Compare {
        /// Output directory for the report, table, and plot data.
        #[arg(long)]
        out: PathBuf,
    },
    /// Dump a taper family as CSV for inspection.
    Dpss {
        /// Sequence length in points.
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 4.0)]
        thb: f64,
        /// Output CSV; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum GateMethod {
    Rect,
    Hann,
    Composite,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let payload = serde_json::json!({ "kind": err.kind(), "error": err.to_string() });
            eprintln!("{payload}");
            ExitCode::FAILURE
        }
    }
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> Error + '_ {
    move |source| Error::Io { path: path.display().to_string(), source }
}

/// The CLI takes f0 explicitly; make sure it names the loaded sweep's band
/// centre instead of silently correcting at a different frequency.
fn check_f0(sweep: &SweepSet, f0: f64) -> Result<(), Error> {
    let grid_f0 = sweep.freq().f0_hz();
    if (f0 - grid_f0).abs() > 0.5 * sweep.freq().spacing_hz() {
        return Err(Error::Parameter(format!(
            "requested f0 = {f0} Hz but the sweep band centre is {grid_f0} Hz"
        )));
    }
    Ok(())
}

fn load_channel_spec(path: &Path, seed_override: Option<u64>) -> Result<ChannelSpec, Error> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let mut spec: ChannelSpec = serde_json::from_str(&text).map_err(|e| Error::Load {
        context: path.display().to_string(),
        msg: e.to_string(),
    })?;
    if let Some(seed) = seed_override {
        spec.seed = seed;
    }
    Ok(spec)
}

fn run(cli: Cli) -> Result<(), Error> {
    let config = cli.config.as_ref().map(RunConfig::load).transpose()?;
    match cli.command {
        Command::Simulate { truth, f0, bw, k, spec, out } => {
            let truth = load_pattern(&truth, f0)?;
            let freq = FrequencyGrid::new(f0 - bw / 2.0, f0 + bw / 2.0, k)?;
            let spec = load_channel_spec(&spec, cli.seed)?;
            let sweep = synthesize(&truth, &freq, &spec)?;
            save_sweep(&sweep, &out)?;
            println!("wrote {} ({} x {} samples)", out.display(), k, truth.angles().len());
            Ok(())
        }
        Command::Correct { sweep, f0, n, s, thb, out } => {
            let sweep = load_sweep(&sweep)?;
            check_f0(&sweep, f0)?;
            let pattern = correct_pattern(&sweep, n, s, thb)?;
            save_pattern(&pattern, &out)?;
            println!("wrote {}", out.display());
            Ok(())
        }
        Command::Tune { sweep, reference, f0, thb, sigma, out } => {
            let sweep = load_sweep(&sweep)?;
            check_f0(&sweep, f0)?;
            let reference = load_pattern(&reference, f0)?;
            let grid = match config.as_ref().and_then(|c| c.grid.as_ref()) {
                Some(g) => g.to_grid()?,
                None => SearchGrid::default(),
            };
            let opts = TunerOptions {
                t_hb: thb,
                sigma,
                grid,
                objective: config.as_ref().map(|c| c.objective).unwrap_or_default(),
                fit_space: config.as_ref().map(|c| c.fit_space).unwrap_or_default(),
            };
            let report = tune(&sweep, &reference, &opts)?;
            fs::create_dir_all(&out).map_err(io_err(&out))?;

            let report_path = out.join("tune_report.json");
            let json = serde_json::to_string_pretty(&report).map_err(|e| Error::Tune(e.to_string()))?;
            fs::write(&report_path, json).map_err(io_err(&report_path))?;

            save_pattern(&report.result, out.join("rc_star.csv"))?;

            let landscape_path = out.join("u_landscape.csv");
            let mut w = BufWriter::new(File::create(&landscape_path).map_err(io_err(&landscape_path))?);
            writeln!(w, "n,s,u").map_err(io_err(&landscape_path))?;
            for d in &report.designs {
                if let Some(u) = d.u {
                    writeln!(w, "{},{},{:.17e}", d.n, d.s, u).map_err(io_err(&landscape_path))?;
                }
            }
            println!(
                "wrote {} ({} designs, {} locally optimal, {} averaged)",
                out.display(),
                report.designs.len(),
                report.locally_optimal.len(),
                report.selected.len()
            );
            Ok(())
        }
        Command::Gate {
            method,
            sweep,
            f0,
            distance,
            width,
            center,
            rel_start,
            rel_stop,
            taper_fraction,
            out,
        } => {
            let sweep = load_sweep(&sweep)?;
            check_f0(&sweep, f0)?;
            let spec = match method {
                GateMethod::Rect => GateSpec::Rectangular {
                    distance_m: distance.ok_or_else(|| {
                        Error::Parameter("--distance is required for the rect method".into())
                    })?,
                    width_s: width.ok_or_else(|| {
                        Error::Parameter("--width is required for the rect method".into())
                    })?,
                },
                GateMethod::Hann => GateSpec::Hann {
                    center_s: center,
                    width_s: width.ok_or_else(|| {
                        Error::Parameter("--width is required for the hann method".into())
                    })?,
                },
                GateMethod::Composite => {
                    GateSpec::ThresholdComposite { rel_start, rel_stop, taper_fraction }
                }
            };
            let pattern = gated_pattern(&sweep, &spec)?;
            save_pattern(&pattern, &out)?;
            println!("wrote {}", out.display());
            Ok(())
        }
        Command::Compare { out } => {
            let config = config.ok_or_else(|| {
                Error::Parameter("compare needs --config with a datasets list".into())
            })?;
            if config.datasets.is_empty() {
                return Err(Error::Parameter("config lists no datasets".into()));
            }
            let opts = config.tuner_options()?;
            fs::create_dir_all(&out).map_err(io_err(&out))?;

            let mut scores = Vec::new();
            for ds in &config.datasets {
                let sweep = load_sweep(&ds.sweep)?;
                check_f0(&sweep, ds.f0_hz)?;
                let reference = load_pattern(&ds.reference, ds.f0_hz)?;
                let gates_cfg: &GatesConfig = ds.gates.as_ref().unwrap_or(&config.gates);
                let gates = gates_cfg.to_gate_set(sweep.freq().bandwidth_hz());
                let case = CompareCase { sweep, reference: reference.clone(), gates };
                let (case_scores, patterns) = compare_case(&case, &opts)?;

                let mut plot_entries: Vec<(&str, &Pattern)> =
                    vec![("reference", &reference), ("uncorrected", &patterns.uncorrected)];
                if let Some(p) = &patterns.multitaper {
                    plot_entries.push(("multitaper", p));
                }
                if let Some(p) = &patterns.rectangular {
                    plot_entries.push(("rectangular", p));
                }
                if let Some(p) = &patterns.hann {
                    plot_entries.push(("hann", p));
                }
                if let Some(p) = &patterns.composite {
                    plot_entries.push(("composite", p));
                }
                let plot_path = out.join(format!("patterns_{:.0}MHz.csv", ds.f0_hz / 1e6));
                let w = BufWriter::new(File::create(&plot_path).map_err(io_err(&plot_path))?);
                emit_plot_data(&plot_entries, w)?;

                scores.push(case_scores);
            }
            let report = aggregate(scores)?;

            let report_path = out.join("compare_report.json");
            let json =
                serde_json::to_string_pretty(&report).map_err(|e| Error::Tune(e.to_string()))?;
            fs::write(&report_path, json).map_err(io_err(&report_path))?;

            let table_path = out.join("compare_table.csv");
            let mut w = BufWriter::new(File::create(&table_path).map_err(io_err(&table_path))?);
            let fmt = |v: Option<f64>| v.map(|x| format!("{x:.2}")).unwrap_or_default();
            writeln!(w, "f0_hz,uncorrected_db,rectangular_db,hann_db,composite_db,multitaper_db,delta_db")
                .map_err(io_err(&table_path))?;
            for c in &report.per_f0 {
                writeln!(
                    w,
                    "{},{:.2},{},{},{},{},{}",
                    c.f0_hz,
                    c.e_r_uncorrected_db,
                    fmt(c.e_r_rectangular_db),
                    fmt(c.e_r_hann_db),
                    fmt(c.e_r_composite_db),
                    fmt(c.e_r_multitaper_db),
                    fmt(c.delta_db),
                )
                .map_err(io_err(&table_path))?;
            }
            writeln!(
                w,
                "average,{:.2},{},{},{},{},",
                report.averaged.e_r_uncorrected_db,
                fmt(report.averaged.e_r_rectangular_db),
                fmt(report.averaged.e_r_hann_db),
                fmt(report.averaged.e_r_composite_db),
                fmt(report.averaged.e_r_multitaper_db),
            )
            .map_err(io_err(&table_path))?;

            println!("wrote {}", out.display());
            Ok(())
        }
        Command::Dpss { n, thb, out } => {
            // Only the normalized half-bandwidth t_HB / n matters here, so
            // use a unit sample interval.
            let spec = TaperSpec::from_t_hb(n, 1.0, thb)?;
            let basis = dpss_basis(&spec)?;
            let mut rows = String::from("order,lambda,sample,value\n");
            for (order, taper) in basis.tapers().iter().enumerate() {
                let lambda = basis.eigenvalues()[order];
                for (sample, value) in taper.iter().enumerate() {
                    rows.push_str(&format!("{order},{lambda:.17e},{sample},{value:.17e}\n"));
                }
            }
            match out {
                Some(path) => {
                    fs::write(&path, rows).map_err(io_err(&path))?;
                    println!("wrote {} ({} tapers)", path.display(), basis.num_tapers());
                }
                None => print!("{rows}"),
            }
            Ok(())
        }
    }
}
