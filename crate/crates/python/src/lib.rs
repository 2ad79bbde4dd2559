//! Python bindings: encoding configuration, spike matrices, IDX encoding,
//! EVTD/EVTM files and trial statistics.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};

use pyo3::exceptions::{PyIndexError, PyOSError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyBytes;

use spikeforge_core as sf;
use spikeforge_core::evt::{DatasetReader, DenseWriter, EvtWriter};

fn to_py(e: sf::Error) -> PyErr {
    match e {
        sf::Error::Io(e) => PyOSError::new_err(e.to_string()),
        sf::Error::Format(sf::FormatError::Io(e)) => PyOSError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn err<E: Into<sf::Error>>(e: E) -> PyErr {
    to_py(e.into())
}

/// Encoding parameters. Times are in ms, rates in Hz.
#[pyclass(
    frozen,
    skip_from_py_object,
    name = "EncodingConfig",
    module = "spikeforge"
)]
#[derive(Clone)]
struct PyEncodingConfig {
    inner: sf::EncodingConfig,
}

#[pymethods]
impl PyEncodingConfig {
    #[new]
    #[pyo3(signature = (simulation_time_ms=100.0, delta_t_ms=1.0, max_rate_hz=1000.0, generator="bernoulli", master_seed=0))]
    fn new(
        simulation_time_ms: f64,
        delta_t_ms: f64,
        max_rate_hz: f64,
        generator: &str,
        master_seed: u64,
    ) -> PyResult<Self> {
        let generator = generator
            .parse::<sf::Generator>()
            .map_err(|e| PyValueError::new_err(e.to_string()))?;
        Ok(Self {
            inner: sf::EncodingConfig {
                simulation_time_ms,
                delta_t_ms,
                max_rate_hz,
                generator,
                master_seed,
            },
        })
    }

    #[getter]
    fn simulation_time_ms(&self) -> f64 {
        self.inner.simulation_time_ms
    }

    #[getter]
    fn delta_t_ms(&self) -> f64 {
        self.inner.delta_t_ms
    }

    #[getter]
    fn max_rate_hz(&self) -> f64 {
        self.inner.max_rate_hz
    }

    #[getter]
    fn generator(&self) -> String {
        self.inner.generator.to_string()
    }

    #[getter]
    fn master_seed(&self) -> u64 {
        self.inner.master_seed
    }

    /// Number of bins per train; raises ValueError for an invalid config.
    fn bins(&self) -> PyResult<usize> {
        Ok(self.inner.validate().map_err(err)?.bins)
    }

    fn rate_for_pixel(&self, pixel: u8) -> f64 {
        self.inner.rate_for_pixel(pixel)
    }

    fn __repr__(&self) -> String {
        let c = &self.inner;
        format!(
            "EncodingConfig(simulation_time_ms={}, delta_t_ms={}, max_rate_hz={}, generator='{}', master_seed={})",
            c.simulation_time_ms, c.delta_t_ms, c.max_rate_hz, c.generator, c.master_seed
        )
    }
}

/// Pixels x bins boolean spike matrix of one image.
#[pyclass(
    frozen,
    eq,
    skip_from_py_object,
    name = "SpikeMatrix",
    module = "spikeforge"
)]
#[derive(Clone, PartialEq)]
struct PySpikeMatrix {
    inner: sf::SpikeMatrix,
}

impl PySpikeMatrix {
    fn check(&self, pixel: usize, bin: usize) -> PyResult<()> {
        if pixel >= self.inner.pixels() || bin >= self.inner.bins() {
            return Err(PyIndexError::new_err(format!(
                "cell ({pixel}, {bin}) outside {}x{}",
                self.inner.pixels(),
                self.inner.bins()
            )));
        }
        Ok(())
    }
}

#[pymethods]
impl PySpikeMatrix {
    #[getter]
    fn pixels(&self) -> usize {
        self.inner.pixels()
    }

    #[getter]
    fn bins(&self) -> usize {
        self.inner.bins()
    }

    #[getter]
    fn delta_t_us(&self) -> u32 {
        self.inner.delta_t_us()
    }

    #[getter]
    fn image_index(&self) -> u32 {
        self.inner.image_index()
    }

    #[getter]
    fn label(&self) -> Option<u8> {
        self.inner.label()
    }

    fn get(&self, pixel: usize, bin: usize) -> PyResult<bool> {
        self.check(pixel, bin)?;
        Ok(self.inner.get(pixel, bin))
    }

    fn row(&self, pixel: usize) -> PyResult<Vec<bool>> {
        self.check(pixel, 0)?;
        Ok(self.inner.row(pixel).into_inner())
    }

    fn row_spike_count(&self, pixel: usize) -> PyResult<usize> {
        self.check(pixel, 0)?;
        Ok(self.inner.row_spike_count(pixel))
    }

    fn spike_count(&self) -> usize {
        self.inner.spike_count()
    }

    /// Rows as lists of 0/1, one per pixel.
    fn to_rows(&self) -> Vec<Vec<u8>> {
        (0..self.inner.pixels())
            .map(|p| {
                self.inner
                    .row(p)
                    .as_slice()
                    .iter()
                    .map(|&b| u8::from(b))
                    .collect()
            })
            .collect()
    }

    /// Bit-packed cells, LSB first, row-major.
    fn packed<'py>(&self, py: Python<'py>) -> Bound<'py, PyBytes> {
        PyBytes::new(py, self.inner.packed())
    }

    /// Address-event records as (address, timestamp_us), time-ordered.
    fn events(&self) -> PyResult<Vec<(u16, u32)>> {
        let s = sf::matrix_to_events(&self.inner).map_err(err)?;
        Ok(s.records
            .iter()
            .map(|r| (r.address, r.timestamp_us))
            .collect())
    }

    /// PBM (P1) raster plot as text.
    fn raster(&self) -> PyResult<String> {
        let mut buf = Vec::new();
        sf::render_raster(&self.inner, &mut buf).map_err(err)?;
        Ok(String::from_utf8(buf).expect("PBM output is ASCII"))
    }

    fn __repr__(&self) -> String {
        format!(
            "SpikeMatrix(image_index={}, label={:?}, pixels={}, bins={}, spikes={})",
            self.inner.image_index(),
            self.inner.label(),
            self.inner.pixels(),
            self.inner.bins(),
            self.inner.spike_count()
        )
    }
}

#[pyclass(frozen, get_all, name = "TrialSummary", module = "spikeforge")]
struct PyTrialSummary {
    k: usize,
    mean: f64,
    variance: f64,
    lambda_hat: f64,
    fano: f64,
}

#[pymethods]
impl PyTrialSummary {
    fn __repr__(&self) -> String {
        format!(
            "TrialSummary(k={}, mean={}, variance={}, lambda_hat={}, fano={})",
            self.k, self.mean, self.variance, self.lambda_hat, self.fano
        )
    }
}

#[pyclass(frozen, get_all, name = "GofResult", module = "spikeforge")]
struct PyGofResult {
    statistic: f64,
    df: usize,
    p_value: f64,
}

#[pymethods]
impl PyGofResult {
    fn __repr__(&self) -> String {
        format!(
            "GofResult(statistic={}, df={}, p_value={})",
            self.statistic, self.df, self.p_value
        )
    }
}

/// Per-bin spike probability for a pixel intensity.
#[pyfunction]
fn spike_probability(pixel: u8, config: &PyEncodingConfig) -> PyResult<f64> {
    sf::spike_probability(pixel, &config.inner).map_err(err)
}

/// Encodes one frame of raw intensities.
#[pyfunction]
#[pyo3(signature = (frame, config, image_index=0, label=None))]
fn encode_frame(
    frame: &[u8],
    config: &PyEncodingConfig,
    image_index: u32,
    label: Option<u8>,
) -> PyResult<PySpikeMatrix> {
    let encoder = sf::Encoder::new(config.inner.clone(), frame.len()).map_err(err)?;
    let inner = encoder
        .encode_frame(frame, image_index, label)
        .map_err(err)?;
    Ok(PySpikeMatrix { inner })
}

/// Parses an IDX image/label pair and encodes every image.
#[pyfunction]
#[pyo3(signature = (images_path, labels_path, config, threads=0))]
fn encode_idx(
    py: Python<'_>,
    images_path: &str,
    labels_path: &str,
    config: &PyEncodingConfig,
    threads: usize,
) -> PyResult<Vec<PySpikeMatrix>> {
    let config = config.inner.clone();
    let matrices = py
        .detach(|| -> Result<_, sf::Error> {
            let frames = sf::parse_idx_images(&std::fs::read(images_path)?)?;
            let labels = sf::parse_idx_labels(&std::fs::read(labels_path)?)?;
            let encoder = sf::Encoder::new(config, frames.pixels_per_frame())?;
            Ok(encoder.encode_all(&frames, Some(&labels), threads)?)
        })
        .map_err(to_py)?;
    Ok(matrices
        .into_iter()
        .map(|inner| PySpikeMatrix { inner })
        .collect())
}

/// Writes matrices to an EVTD (`format="evtd"`) or EVTM (`"evtm"`) file.
#[pyfunction]
#[pyo3(signature = (path, matrices, format="evtd"))]
fn write_dataset(
    path: &str,
    matrices: Vec<PyRef<'_, PySpikeMatrix>>,
    format: &str,
) -> PyResult<()> {
    let sink = BufWriter::new(File::create(path).map_err(err)?);
    let mut sink = match format {
        "evtd" => {
            let mut w = DenseWriter::new(sink).map_err(err)?;
            for m in &matrices {
                w.write_matrix(&m.inner).map_err(err)?;
            }
            w.finish().map_err(err)?
        }
        "evtm" => {
            let mut w = EvtWriter::new(sink).map_err(err)?;
            for m in &matrices {
                w.write_matrix(&m.inner).map_err(err)?;
            }
            w.finish().map_err(err)?
        }
        other => {
            return Err(PyValueError::new_err(format!(
                "unknown format {other:?}, expected evtd or evtm"
            )))
        }
    };
    sink.flush().map_err(err)
}

/// Reads every matrix from an EVTD or EVTM file.
#[pyfunction]
fn read_dataset(py: Python<'_>, path: &str) -> PyResult<Vec<PySpikeMatrix>> {
    let matrices = py
        .detach(|| -> Result<Vec<sf::SpikeMatrix>, sf::Error> {
            let reader = DatasetReader::new(BufReader::new(File::open(path)?))?;
            Ok(reader.collect::<Result<_, _>>()?)
        })
        .map_err(to_py)?;
    Ok(matrices
        .into_iter()
        .map(|inner| PySpikeMatrix { inner })
        .collect())
}

/// Spike counts of `k` independent trials at `rate_hz`.
#[pyfunction]
fn trial_counts(
    py: Python<'_>,
    rate_hz: f64,
    config: &PyEncodingConfig,
    k: usize,
) -> PyResult<Vec<u64>> {
    let config = config.inner.clone();
    let tc = py
        .detach(|| sf::trial_counts(rate_hz, &config, k))
        .map_err(err)?;
    Ok(tc.counts)
}

#[pyfunction]
fn summarize(counts: Vec<u64>) -> PyResult<PyTrialSummary> {
    let s = sf::summarize(&counts).map_err(err)?;
    Ok(PyTrialSummary {
        k: s.k,
        mean: s.mean,
        variance: s.variance,
        lambda_hat: s.lambda_hat,
        fano: s.fano,
    })
}

/// Chi-square fit of the counts to a Poisson law with estimated rate.
#[pyfunction]
fn poisson_gof(counts: Vec<u64>) -> PyResult<PyGofResult> {
    let g = sf::poisson_gof(&counts).map_err(err)?;
    Ok(PyGofResult {
        statistic: g.statistic,
        df: g.df,
        p_value: g.p_value,
    })
}

/// Histogram as (lower_edge, frequency) pairs.
#[pyfunction]
#[pyo3(signature = (counts, bin_width=5))]
fn histogram(counts: Vec<u64>, bin_width: u64) -> PyResult<Vec<(u64, usize)>> {
    let h = sf::histogram(&counts, bin_width).map_err(err)?;
    Ok(h.iter().map(|b| (b.lower, b.frequency)).collect())
}

#[pymodule]
fn spikeforge(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyEncodingConfig>()?;
    m.add_class::<PySpikeMatrix>()?;
    m.add_class::<PyTrialSummary>()?;
    m.add_class::<PyGofResult>()?;
    m.add_function(wrap_pyfunction!(spike_probability, m)?)?;
    m.add_function(wrap_pyfunction!(encode_frame, m)?)?;
    m.add_function(wrap_pyfunction!(encode_idx, m)?)?;
    m.add_function(wrap_pyfunction!(write_dataset, m)?)?;
    m.add_function(wrap_pyfunction!(read_dataset, m)?)?;
    m.add_function(wrap_pyfunction!(trial_counts, m)?)?;
    m.add_function(wrap_pyfunction!(summarize, m)?)?;
    m.add_function(wrap_pyfunction!(poisson_gof, m)?)?;
    m.add_function(wrap_pyfunction!(histogram, m)?)?;
    Ok(())
}
