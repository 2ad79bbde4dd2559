//! `spikeforge`: convert IDX datasets to spike-train files, validate the
//! generators statistically, and inspect or plot the results.
//!
//! Data goes to stdout as CSV; timing goes to stderr.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use spikeforge::config::{DEFAULT_DELTA_T_MS, DEFAULT_MAX_RATE_HZ, DEFAULT_SIMULATION_TIME_MS};
use spikeforge::evt::{DatasetReader, DenseWriter, EvtWriter};
use spikeforge::stats::{histogram_csv, MIN_GOF_TRIALS};
use spikeforge::{
    histogram, parse_idx_images, parse_idx_labels, poisson_gof, render_raster, summarize,
    trial_counts, Encoder, EncodingConfig, Generator, TrialSummary,
};

#[derive(Parser)]
#[command(
    name = "spikeforge",
    version,
    about = "Poisson spike-train encoding of IDX image datasets"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Encode an IDX image/label pair into EVTD and/or EVTM files
    Convert(ConvertArgs),
    /// Run repeated trials at one rate and report count statistics
    Validate(ValidateArgs),
    /// Write a PBM raster plot of one image from an EVTD/EVTM file
    Raster(RasterArgs),
    /// Print header metadata and totals of an EVTD/EVTM file
    Inspect(InspectArgs),
}

#[derive(Args, Clone)]
struct EncodingArgs {
    /// Simulation window per image, in ms
    #[arg(long = "sim-time", value_name = "MS", default_value_t = DEFAULT_SIMULATION_TIME_MS)]
    sim_time: f64,
    /// Bin width, in ms
    #[arg(long, value_name = "MS", default_value_t = DEFAULT_DELTA_T_MS)]
    dt: f64,
    /// Firing rate of a pixel at intensity 255, in Hz
    #[arg(long = "max-rate", value_name = "HZ", default_value_t = DEFAULT_MAX_RATE_HZ)]
    max_rate: f64,
    /// Spike generator
    #[arg(long, value_enum, default_value_t = GeneratorArg::Bernoulli)]
    generator: GeneratorArg,
    /// Master seed for the keyed random streams
    #[arg(long, value_name = "U64", default_value_t = 0)]
    seed: u64,
}

impl EncodingArgs {
    fn config(&self) -> EncodingConfig {
        EncodingConfig {
            simulation_time_ms: self.sim_time,
            delta_t_ms: self.dt,
            max_rate_hz: self.max_rate,
            generator: self.generator.into(),
            master_seed: self.seed,
        }
    }
}

#[derive(ValueEnum, Clone, Copy)]
enum GeneratorArg {
    /// Per-bin Bernoulli trials with p = rate * dt
    Bernoulli,
    /// Exponential inter-spike intervals, snapped to bins
    Isi,
}

impl From<GeneratorArg> for Generator {
    fn from(g: GeneratorArg) -> Self {
        match g {
            GeneratorArg::Bernoulli => Generator::BernoulliBinning,
            GeneratorArg::Isi => Generator::ExponentialIsi,
        }
    }
}

#[derive(ValueEnum, Clone, Copy, PartialEq, Eq)]
enum Format {
    Evtd,
    Evtm,
    Both,
}

#[derive(Args)]
struct ConvertArgs {
    /// IDX3 image file (uncompressed)
    #[arg(long, value_name = "PATH")]
    images: PathBuf,
    /// IDX1 label file (uncompressed)
    #[arg(long, value_name = "PATH")]
    labels: PathBuf,
    /// Output file; with --format both, written as <stem>.evtd and <stem>.evtm
    #[arg(long, value_name = "PATH")]
    out: PathBuf,
    /// Output container
    #[arg(long, value_enum, default_value_t = Format::Evtd)]
    format: Format,
    #[command(flatten)]
    encoding: EncodingArgs,
    /// Encoder threads; 0 uses every core
    #[arg(
        long,
        value_name = "N",
        env = "SPIKEFORGE_THREADS",
        default_value_t = 0
    )]
    threads: usize,
}

#[derive(Args)]
#[command(group = clap::ArgGroup::new("source").required(true).args(["rate", "pixel"]))]
struct ValidateArgs {
    /// Firing rate to test, in Hz
    #[arg(long, value_name = "HZ")]
    rate: Option<f64>,
    /// Pixel intensity to test; rate = pixel / 255 * max-rate
    #[arg(long, value_name = "0-255")]
    pixel: Option<u8>,
    /// Number of independent trials
    #[arg(long, value_name = "K", default_value_t = 1000)]
    trials: usize,
    /// Also write the trial-count histogram as CSV to this path
    #[arg(long = "histogram-out", value_name = "PATH")]
    histogram_out: Option<PathBuf>,
    /// Histogram bin width, in spikes
    #[arg(long = "bin-width", value_name = "N", default_value_t = 5)]
    bin_width: u64,
    #[command(flatten)]
    encoding: EncodingArgs,
}

#[derive(Args)]
struct RasterArgs {
    /// EVTD or EVTM file
    dataset: PathBuf,
    /// Zero-based image position in the file
    #[arg(long, value_name = "N", default_value_t = 0)]
    index: usize,
    /// PBM output path; stdout when omitted
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct InspectArgs {
    /// EVTD or EVTM file
    dataset: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Convert(a) => convert(a),
        Command::Validate(a) => validate(a),
        Command::Raster(a) => raster(a),
        Command::Inspect(a) => inspect(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("spikeforge: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    let f =
        File::create(path).with_context(|| format!("write: cannot create {}", path.display()))?;
    Ok(BufWriter::with_capacity(1 << 20, f))
}

fn convert(a: ConvertArgs) -> Result<()> {
    let started = Instant::now();
    let read =
        |p: &Path| std::fs::read(p).with_context(|| format!("parse: cannot read {}", p.display()));
    let frames = parse_idx_images(&read(&a.images)?).context("parse: images")?;
    let labels = parse_idx_labels(&read(&a.labels)?).context("parse: labels")?;
    let encoder = Encoder::new(a.encoding.config(), frames.pixels_per_frame()).context("config")?;

    let (dense_path, events_path) = match a.format {
        Format::Evtd => (Some(a.out.clone()), None),
        Format::Evtm => (None, Some(a.out.clone())),
        Format::Both => (
            Some(a.out.with_extension("evtd")),
            Some(a.out.with_extension("evtm")),
        ),
    };
    let mut dense = dense_path
        .as_deref()
        .map(|p| DenseWriter::new(create(p)?).context("write"))
        .transpose()?;
    let mut events = events_path
        .as_deref()
        .map(|p| EvtWriter::new(create(p)?).context("write"))
        .transpose()?;

    let mut total_events = 0usize;
    let images = encoder
        .encode_dataset(&frames, Some(&labels), a.threads, |m| {
            total_events += m.spike_count();
            if let Some(w) = dense.as_mut() {
                w.write_matrix(&m)?;
            }
            if let Some(w) = events.as_mut() {
                w.write_matrix(&m)?;
            }
            Ok::<(), spikeforge::Error>(())
        })
        .map_err(|e| match e {
            spikeforge::Error::Encode(e) => anyhow!("encode: {e}"),
            other => anyhow!("write: {other}"),
        })?;
    if let Some(w) = dense {
        w.finish().context("write")?.flush().context("write")?;
    }
    if let Some(w) = events {
        w.finish().context("write")?.flush().context("write")?;
    }

    let mut out = io::stdout().lock();
    writeln!(out, "file,format,images,pixels,bins,events")?;
    let bins = encoder.bins();
    let pixels = encoder.pixels();
    for (path, kind) in [(dense_path, "evtd"), (events_path, "evtm")] {
        if let Some(path) = path {
            writeln!(
                out,
                "{},{kind},{images},{pixels},{bins},{total_events}",
                path.display()
            )?;
        }
    }
    let secs = started.elapsed().as_secs_f64();
    eprintln!(
        "converted {images} images in {secs:.2} s ({:.0} images/s)",
        images as f64 / secs.max(1e-9)
    );
    Ok(())
}

fn validate(a: ValidateArgs) -> Result<()> {
    let started = Instant::now();
    let config = a.encoding.config();
    config.validate().context("config")?;
    let rate = match (a.rate, a.pixel) {
        (Some(r), _) => r,
        (None, Some(p)) => config.rate_for_pixel(p),
        (None, None) => unreachable!("clap enforces one of --rate/--pixel"),
    };
    let tc = trial_counts(rate, &config, a.trials).context("stats")?;
    let summary = summarize(&tc.counts).context("stats")?;
    let gof = if tc.k() >= MIN_GOF_TRIALS {
        Some(poisson_gof(&tc.counts).context("stats")?)
    } else {
        None
    };

    let mut out = io::stdout().lock();
    writeln!(
        out,
        "generator,rate_hz,{},chi_square,df,p_value",
        TrialSummary::CSV_HEADER
    )?;
    let gof_cols = gof.map_or_else(
        || ",,".to_string(),
        |g| format!("{:.6},{},{:.6}", g.statistic, g.df, g.p_value),
    );
    writeln!(
        out,
        "{},{rate},{},{gof_cols}",
        config.generator,
        summary.csv_row()
    )?;

    if let Some(path) = &a.histogram_out {
        let h = histogram(&tc.counts, a.bin_width).context("stats")?;
        std::fs::write(path, histogram_csv(&h))
            .with_context(|| format!("write: cannot write {}", path.display()))?;
    }
    eprintln!(
        "{} trials in {:.2} s",
        tc.k(),
        started.elapsed().as_secs_f64()
    );
    Ok(())
}

fn open_dataset(path: &Path) -> Result<DatasetReader<BufReader<File>>> {
    let f = File::open(path).with_context(|| format!("read: cannot open {}", path.display()))?;
    DatasetReader::new(BufReader::new(f)).with_context(|| format!("read: {}", path.display()))
}

fn raster(a: RasterArgs) -> Result<()> {
    let mut reader = open_dataset(&a.dataset)?;
    let mut seen = 0usize;
    let mut found = None;
    for m in reader.by_ref() {
        let m = m.context("read")?;
        if seen == a.index {
            found = Some(m);
            break;
        }
        seen += 1;
    }
    let Some(m) = found else {
        bail!(
            "raster: IndexOutOfRange: index {} but the file holds {seen} images",
            a.index
        );
    };
    match &a.out {
        Some(path) => {
            let mut w = create(path)?;
            render_raster(&m, &mut w).context("write")?;
            w.flush().context("write")?;
        }
        None => render_raster(&m, io::stdout().lock()).context("write")?,
    }
    Ok(())
}

fn inspect(a: InspectArgs) -> Result<()> {
    let reader = open_dataset(&a.dataset)?;
    let kind = reader.kind();
    let mut images = 0usize;
    let mut events = 0usize;
    let mut per_label = [0usize; 10];
    let mut unlabeled = 0usize;
    let mut geometry: Option<(usize, usize, u32)> = None;
    let mut mixed = false;
    for m in reader {
        let m = m.context("read")?;
        let g = (m.pixels(), m.bins(), m.delta_t_us());
        mixed |= geometry.is_some_and(|first| first != g);
        geometry.get_or_insert(g);
        images += 1;
        events += m.spike_count();
        match m.label() {
            Some(l) => per_label[usize::from(l)] += 1,
            None => unlabeled += 1,
        }
    }

    let mut out = io::stdout().lock();
    writeln!(out, "field,value")?;
    writeln!(out, "format,{}", String::from_utf8_lossy(&kind.magic()))?;
    writeln!(out, "images,{images}")?;
    match geometry {
        Some(_) if mixed => writeln!(out, "pixels,mixed\nbins,mixed\ndelta_t_us,mixed")?,
        Some((p, b, dt)) => writeln!(out, "pixels,{p}\nbins,{b}\ndelta_t_us,{dt}")?,
        None => writeln!(out, "pixels,\nbins,\ndelta_t_us,")?,
    }
    writeln!(out, "events,{events}")?;
    for (label, n) in per_label.iter().enumerate() {
        writeln!(out, "label_{label},{n}")?;
    }
    writeln!(out, "unlabeled,{unlabeled}")?;
    Ok(())
}
