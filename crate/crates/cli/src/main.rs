//! `magop`: generate hysteresis datasets, train and evaluate surrogates,
//! sweep sampling rates and draw figures.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use magop_core::datagen::{build_dataset, sample_forc_b, sample_minor_b_with_peak, MINOR_PEAK};
use magop_core::io::csv::{
    dataset_to_csv, metrics_csv, parse_samples_csv, rate_sweep_csv, write_report, SAMPLES_FILE,
};
use magop_core::io::density::{read_density, DensityConfig};
use magop_core::io::svg::{dataset_curves, render};
use magop_core::io::{read_checkpoint, read_hysd, write_checkpoint, write_hysd};
use magop_core::operators::KvList;
use magop_core::spotcheck::architecture_suite;
use magop_core::train::{evaluate, rate_sweep, train, TrainConfig};
use magop_core::{Arch, ModelConfig};

/// Hysteresis operator learning toolkit.
#[derive(Parser)]
#[command(name = "magop", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Forc,
    Minor,
}

#[derive(Subcommand)]
enum Command {
    /// Sample B excitations, invert them through the Preisach oracle and
    /// write a HYSD dataset.
    Generate {
        #[arg(long, value_enum)]
        kind: Kind,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 198)]
        t_samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Key/value density description; the default Gaussian oracle otherwise.
        #[arg(long)]
        density_config: Option<PathBuf>,
        /// FORC amplitude range in tesla.
        #[arg(long, default_value_t = 0.1)]
        amp_lo: f64,
        #[arg(long, default_value_t = 1.2)]
        amp_hi: f64,
        #[arg(long)]
        out: PathBuf,
        /// Also export the dataset as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Train an architecture; progress goes to stdout as `epoch,loss`.
    Train {
        #[arg(long)]
        arch: String,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = 10_000)]
        epochs: usize,
        /// Defaults to the architecture's standard rate.
        #[arg(long)]
        lr: Option<f64>,
        /// Mini-batch size; 0 trains full-batch. Defaults per architecture.
        #[arg(long)]
        batch: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 100)]
        log_every: usize,
        /// Key/value overrides of the architecture's hyperparameters.
        #[arg(long)]
        model_config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate a checkpoint on the test partition.
    Eval {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Directory for metrics.csv, samples.csv and timing.csv.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Re-evaluate with the time grid stretched by each rate.
    RateSweep {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "0.01,0.1,10,100")]
        rates: Vec<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Finite-difference checks of every op and architecture.
    Gradcheck {
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Draw a report (or dataset samples) as a three-panel SVG.
    Plot {
        #[arg(long, conflicts_with = "data")]
        report: Option<PathBuf>,
        #[arg(long)]
        data: Option<PathBuf>,
        /// Sample positions to draw.
        #[arg(long, value_delimiter = ',', default_value = "0,1,2")]
        samples: Vec<usize>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn density(path: Option<&Path>) -> Result<DensityConfig> {
    match path {
        Some(p) => read_density(p).with_context(|| format!("{}", p.display())),
        None => Ok(DensityConfig::default()),
    }
}

fn model_config(arch: Arch, t_len: usize, features: usize, overrides: Option<&Path>) -> Result<ModelConfig> {
    let base = ModelConfig::default_for(arch, t_len, features);
    let Some(path) = overrides else {
        return Ok(base);
    };
    let text = fs::read_to_string(path).with_context(|| format!("{}", path.display()))?;
    let extra = KvList::parse(&text)?;
    let mut kv = base.to_kv();
    for (k, v) in extra.0 {
        if k == "arch" && v != arch.name() {
            bail!("model config is for {v}, not {arch}");
        }
        match kv.0.iter_mut().find(|(key, _)| *key == k) {
            Some(slot) => slot.1 = v,
            None => bail!("{arch} has no hyperparameter {k}"),
        }
    }
    let cfg = ModelConfig::from_kv(&kv)?;
    if cfg.t_len() != t_len || cfg.features().is_some_and(|f| f != features) {
        bail!("model config must not change t_len or features");
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<()> {
    let mut stdout = std::io::stdout().lock();
    match cli.command {
        Command::Generate {
            kind,
            n,
            t_samples,
            seed,
            density_config,
            amp_lo,
            amp_hi,
            out,
            csv,
        } => {
            let d = density(density_config.as_deref())?;
            let oracle = d.model()?;
            let curves = match kind {
                Kind::Forc => {
                    if amp_hi > d.b_sat {
                        bail!("amp_hi {amp_hi} exceeds B_sat {}", d.b_sat);
                    }
                    sample_forc_b(n, t_samples, amp_lo, amp_hi, seed)?
                }
                Kind::Minor => sample_minor_b_with_peak(n, t_samples, seed, MINOR_PEAK.min(oracle.reachable_limit()))?,
            };
            let ds = build_dataset(&curves, &oracle, seed)?;
            write_hysd(&out, &ds)?;
            if let Some(p) = csv {
                fs::write(&p, dataset_to_csv(&ds)).with_context(|| format!("{}", p.display()))?;
            }
            writeln!(stdout, "wrote {} samples x {} points to {}", ds.n_samples(), ds.t_len(), out.display())?;
        }
        Command::Train {
            arch,
            data,
            epochs,
            lr,
            batch,
            seed,
            log_every,
            model_config: overrides,
            out,
        } => {
            let arch: Arch = arch.parse()?;
            let ds = read_hysd(&data)?;
            let n_train = ds.split()?.train.len();
            let model = model_config(arch, ds.t_len(), n_train, overrides.as_deref())?;
            let mut cfg = TrainConfig::defaults_for(arch);
            cfg.epochs = epochs;
            cfg.seed = seed;
            cfg.log_every = log_every;
            if let Some(lr) = lr {
                cfg.lr = lr;
            }
            if let Some(b) = batch {
                cfg.batch = (b > 0).then_some(b);
            }
            writeln!(stdout, "epoch,loss")?;
            let ck = train(&cfg, &model, &ds, |e, l| {
                let _ = writeln!(stdout, "{e},{l}");
            })?;
            write_checkpoint(&out, &ck)?;
            eprintln!("final_loss,{}", ck.final_loss);
        }
        Command::Eval { ckpt, data, report } => {
            let ck = read_checkpoint(&ckpt)?;
            let ds = read_hysd(&data)?;
            let r = evaluate(&ck, &ds)?;
            if let Some(dir) = report {
                write_report(&dir, &r)?;
            }
            write!(stdout, "{}", metrics_csv(&r))?;
        }
        Command::RateSweep { ckpt, data, rates, out } => {
            let ck = read_checkpoint(&ckpt)?;
            let ds = read_hysd(&data)?;
            let text = rate_sweep_csv(&rate_sweep(&ck, &ds, &rates)?);
            if let Some(p) = out {
                fs::write(&p, &text).with_context(|| format!("{}", p.display()))?;
            }
            write!(stdout, "{text}")?;
        }
        Command::Gradcheck { seed } => {
            let mut failed = 0;
            writeln!(stdout, "check,rel_error,status")?;
            for c in magop_tensor::gradcheck::op_suite(seed)? {
                let ok = c.rel_error < 1e-5;
                failed += usize::from(!ok);
                writeln!(stdout, "op:{},{:e},{}", c.name, c.rel_error, if ok { "ok" } else { "FAIL" })?;
            }
            for (arch, c) in architecture_suite(5, seed)? {
                let ok = c.rel_error() < 1e-4;
                failed += usize::from(!ok);
                writeln!(
                    stdout,
                    "{arch}:{}[{}],{:e},{}",
                    c.name,
                    c.index,
                    c.rel_error(),
                    if ok { "ok" } else { "FAIL" }
                )?;
            }
            if failed > 0 {
                bail!("{failed} gradient checks failed");
            }
        }
        Command::Plot {
            report,
            data,
            samples,
            out,
        } => {
            let curves = match (report, data) {
                (Some(dir), None) => {
                    let path = dir.join(SAMPLES_FILE);
                    let all = parse_samples_csv(
                        &fs::read_to_string(&path).with_context(|| format!("{}", path.display()))?,
                    )?;
                    samples
                        .iter()
                        .map(|&i| all.get(i).cloned().with_context(|| format!("report has no sample position {i}")))
                        .collect::<Result<Vec<_>>>()?
                }
                (None, Some(path)) => dataset_curves(&read_hysd(&path)?, &samples)?,
                _ => bail!("plot needs --report or --data"),
            };
            let svg = render(&curves)?;
            fs::write(&out, svg).with_context(|| format!("{}", out.display()))?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => e.exit(),
        Err(e) => {
            let msg = e.to_string();
            let line = msg.lines().next().unwrap_or("invalid arguments");
            eprintln!("{}", line.trim());
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = format!("{e:#}").replace('\n', " ");
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}
