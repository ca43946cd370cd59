//! Python bindings: templates, matching, reconstruction, and the
//! distance statistics.

use pyo3::exceptions::{PyOSError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use seeded_ising::analysis::{self, DistanceSample};
use seeded_ising::io;
use seeded_ising::oracle;
use seeded_ising::reconstruct::{self as recon, SeedSpec};
use seeded_ising::rng::stream_rng;
use seeded_ising::sampler::{self, IsingParams, RecordingSchedule};
use seeded_ising::{Error, FullTemplate, LatticeGeometry, Seed, SeedFraction, TemplatePart};

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Io { .. } | Error::WouldOverwrite(_) => PyOSError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn params(j_v: f64, j_h: f64) -> PyResult<IsingParams> {
    IsingParams::new(j_v, j_h).map_err(to_py)
}

/// Row-major 0/1 list -> part.
fn part_from_rows(geometry: LatticeGeometry, bits: &[u8]) -> PyResult<TemplatePart> {
    if bits.len() != geometry.len() {
        return Err(PyValueError::new_err(format!(
            "expected {} bits, got {}",
            geometry.len(),
            bits.len()
        )));
    }
    let mut column_major = vec![false; geometry.len()];
    for (i, &b) in bits.iter().enumerate() {
        if b > 1 {
            return Err(PyValueError::new_err(format!("bit {b} is not 0 or 1")));
        }
        column_major[geometry.index(i / geometry.cols(), i % geometry.cols())] = b == 1;
    }
    TemplatePart::from_bits(geometry, &column_major).map_err(to_py)
}

fn part_to_rows(part: &TemplatePart) -> Vec<u8> {
    let g = part.geometry();
    (0..g.rows())
        .flat_map(|r| (0..g.cols()).map(move |c| (r, c)))
        .map(|(r, c)| u8::from(part.at(r, c) > 0))
        .collect()
}

/// Iris template: real and imaginary bit planes of shape `rows x cols`.
#[pyclass(name = "Template", module = "seeded_ising", frozen, eq, from_py_object)]
#[derive(Clone, PartialEq)]
struct PyTemplate {
    inner: FullTemplate,
}

#[pymethods]
impl PyTemplate {
    /// Bits are given row by row as flat lists of 0/1.
    #[new]
    fn new(rows: usize, cols: usize, real: Vec<u8>, imag: Vec<u8>) -> PyResult<Self> {
        let g = LatticeGeometry::new(rows, cols).map_err(to_py)?;
        let inner = FullTemplate::new(part_from_rows(g, &real)?, part_from_rows(g, &imag)?)
            .map_err(to_py)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn read(path: &str) -> PyResult<Self> {
        Ok(Self {
            inner: io::read_template(path).map_err(to_py)?,
        })
    }

    #[staticmethod]
    fn parse(text: &str) -> PyResult<Self> {
        Ok(Self {
            inner: io::parse_template(text, "<string>").map_err(to_py)?,
        })
    }

    /// Draws both parts from the unseeded model.
    #[staticmethod]
    #[pyo3(signature = (rows=8, cols=128, j_v=0.2, j_h=0.3, steps=102_400, rng_seed=0, stream=0))]
    fn synthesize(
        rows: usize,
        cols: usize,
        j_v: f64,
        j_h: f64,
        steps: u64,
        rng_seed: u64,
        stream: u64,
    ) -> PyResult<Self> {
        let g = LatticeGeometry::new(rows, cols).map_err(to_py)?;
        let p = params(j_v, j_h)?;
        let mut rng = stream_rng(rng_seed, stream);
        let real = sampler::sample_unseeded(g, p, steps, &mut rng).map_err(to_py)?;
        let imag = sampler::sample_unseeded(g, p, steps, &mut rng).map_err(to_py)?;
        Ok(Self {
            inner: FullTemplate::new(real, imag).map_err(to_py)?,
        })
    }

    #[pyo3(signature = (path, overwrite=false))]
    fn write(&self, path: &str, overwrite: bool) -> PyResult<()> {
        io::write_template(&self.inner, path, overwrite).map_err(to_py)
    }

    fn to_text(&self) -> String {
        io::format_template(&self.inner)
    }

    #[getter]
    fn rows(&self) -> usize {
        self.inner.geometry().rows()
    }

    #[getter]
    fn cols(&self) -> usize {
        self.inner.geometry().cols()
    }

    #[getter]
    fn real(&self) -> Vec<u8> {
        part_to_rows(self.inner.real())
    }

    #[getter]
    fn imag(&self) -> Vec<u8> {
        part_to_rows(self.inner.imag())
    }

    fn rotate(&self, shift: isize) -> Self {
        Self {
            inner: self.inner.rotate_columns(shift),
        }
    }

    fn negated(&self) -> Self {
        Self {
            inner: self.inner.negated(),
        }
    }

    /// `((d_v, d_h) real, (d_v, d_h) imag)`.
    fn disagreement_counts(&self) -> ((usize, usize), (usize, usize)) {
        let r = self.inner.real().disagreement_counts();
        let i = self.inner.imag().disagreement_counts();
        ((r.vertical, r.horizontal), (i.vertical, i.horizontal))
    }

    fn __repr__(&self) -> String {
        format!("Template({})", self.inner.geometry())
    }
}

#[pyfunction]
fn hamming_distance(a: &PyTemplate, b: &PyTemplate) -> PyResult<f64> {
    seeded_ising::hamming_distance(&a.inner, &b.inner).map_err(to_py)
}

/// `(distance, shift)` minimised over column shifts up to `max_shift`.
#[pyfunction]
#[pyo3(signature = (a, b, max_shift=8))]
fn hamming_distance_min_rotation(a: &PyTemplate, b: &PyTemplate, max_shift: usize) -> PyResult<(f64, isize)> {
    let m = seeded_ising::hamming_distance_min_rotation(&a.inner, &b.inner, max_shift)
        .map_err(to_py)?;
    Ok((m.distance, m.shift))
}

/// Reconstructs `template` from a random seed. Returns a dict with the
/// initial and reconstructed templates, their distances to the original and
/// the seed size in bits.
#[pyfunction]
#[pyo3(signature = (template, seed_fraction="1/4", j_v=0.2, j_h=0.3, schedule="10000x100", rng_seed=0, stream=0, shared_index_set=true))]
#[allow(clippy::too_many_arguments)]
fn reconstruct<'py>(
    py: Python<'py>,
    template: &PyTemplate,
    seed_fraction: &str,
    j_v: f64,
    j_h: f64,
    schedule: &str,
    rng_seed: u64,
    stream: u64,
    shared_index_set: bool,
) -> PyResult<Bound<'py, PyDict>> {
    let fraction: SeedFraction = seed_fraction.parse().map_err(to_py)?;
    let schedule: RecordingSchedule = schedule.parse().map_err(to_py)?;
    let spec = SeedSpec {
        shared_index_set,
        ..SeedSpec::fraction(fraction)
    };
    let p = params(j_v, j_h)?;
    let original = template.inner.clone();
    let r = py
        .detach(|| {
            let mut rng = stream_rng(rng_seed, stream);
            recon::reconstruct_full(&original, &spec, p, &schedule, &mut rng)
        })
        .map_err(to_py)?;
    let dict = PyDict::new(py);
    dict.set_item(
        "initial_distance",
        seeded_ising::hamming_distance(&original, &r.initial).map_err(to_py)?,
    )?;
    dict.set_item(
        "reconstructed_distance",
        seeded_ising::hamming_distance(&original, &r.reconstructed).map_err(to_py)?,
    )?;
    dict.set_item("seed_bits", r.seed_real.len() + r.seed_imag.len())?;
    dict.set_item("initial", PyTemplate { inner: r.initial })?;
    dict.set_item("reconstructed", PyTemplate { inner: r.reconstructed })?;
    Ok(dict)
}

/// Majority vote over lists of spins (`-1`/`+1`) of equal length; zero sums
/// give `+1`.
#[pyfunction]
fn aggregate(snapshots: Vec<Vec<i8>>) -> PyResult<Vec<i8>> {
    let len = snapshots.first().map(Vec::len).unwrap_or(0);
    let g = LatticeGeometry::new(1, len.max(3)).map_err(to_py)?;
    if len < 3 {
        return Err(PyValueError::new_err("need at least 3 spins per snapshot"));
    }
    let parts = snapshots
        .into_iter()
        .map(|s| TemplatePart::from_spins(g, s))
        .collect::<Result<Vec<_>, _>>()
        .map_err(to_py)?;
    Ok(recon::aggregate(&parts).map_err(to_py)?.spins().to_vec())
}

/// `(p, n_dof, sample_mean, sample_var)` by the method of moments.
#[pyfunction]
fn binomial_fit(values: Vec<f64>) -> PyResult<(f64, u64, f64, f64)> {
    let sample = DistanceSample::new("values", values).map_err(to_py)?;
    let f = analysis::binomial_fit(&sample).map_err(to_py)?;
    Ok((f.p, f.n_dof, f.sample_mean, f.sample_var))
}

#[pyfunction]
fn match_rate(values: Vec<f64>, threshold: f64) -> PyResult<f64> {
    let sample = DistanceSample::new("values", values).map_err(to_py)?;
    analysis::match_rate(&sample, threshold).map_err(to_py)
}

#[pyfunction]
fn match_rate_curve(values: Vec<f64>, thresholds: Vec<f64>) -> PyResult<Vec<(f64, f64)>> {
    let sample = DistanceSample::new("values", values).map_err(to_py)?;
    analysis::match_rate_curve(&sample, &thresholds).map_err(to_py)
}

/// `(mean, sample standard deviation)`.
#[pyfunction]
fn summarize(values: Vec<f64>) -> PyResult<(f64, f64)> {
    let s = analysis::summarize_values(&values).map_err(to_py)?;
    Ok((s.mean, s.std))
}

#[pyfunction]
#[pyo3(signature = (seed_fraction, total_bits=2048))]
fn effective_dof(seed_fraction: &str, total_bits: usize) -> PyResult<usize> {
    let f: SeedFraction = seed_fraction.parse().map_err(to_py)?;
    analysis::effective_dof(f, total_bits).map_err(to_py)
}

/// Exact law over completions of a seed on a small lattice. `seed` is a
/// list of `(index, spin)` with column-major indices. Returns
/// `(free_indices, probabilities, log_z)`; probabilities are indexed by the
/// packed free-bit assignment.
#[pyfunction]
fn exact_distribution(
    rows: usize,
    cols: usize,
    seed: Vec<(usize, i8)>,
    j_v: f64,
    j_h: f64,
) -> PyResult<(Vec<usize>, Vec<f64>, f64)> {
    let g = LatticeGeometry::new(rows, cols).map_err(to_py)?;
    let seed = Seed::new(g, seed).map_err(to_py)?;
    let exact = oracle::exact_distribution(&seed, params(j_v, j_h)?).map_err(to_py)?;
    Ok((
        exact.free_indices().to_vec(),
        exact.probabilities().to_vec(),
        exact.log_z(),
    ))
}

/// Chain state frequencies, indexed like `exact_distribution`.
#[pyfunction]
#[pyo3(signature = (rows, cols, seed, j_v, j_h, burn_in=10_000, samples=100_000, thin=1, rng_seed=0))]
#[allow(clippy::too_many_arguments)]
fn empirical_distribution(
    py: Python<'_>,
    rows: usize,
    cols: usize,
    seed: Vec<(usize, i8)>,
    j_v: f64,
    j_h: f64,
    burn_in: u64,
    samples: u64,
    thin: u64,
    rng_seed: u64,
) -> PyResult<Vec<f64>> {
    let g = LatticeGeometry::new(rows, cols).map_err(to_py)?;
    let seed = Seed::new(g, seed).map_err(to_py)?;
    let p = params(j_v, j_h)?;
    py.detach(|| {
        oracle::empirical_distribution(&seed, p, burn_in, samples, thin, stream_rng(rng_seed, 0))
    })
    .map_err(to_py)
}

#[pymodule]
#[pyo3(name = "seeded_ising")]
fn seeded_ising_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyTemplate>()?;
    m.add_function(wrap_pyfunction!(hamming_distance, m)?)?;
    m.add_function(wrap_pyfunction!(hamming_distance_min_rotation, m)?)?;
    m.add_function(wrap_pyfunction!(reconstruct, m)?)?;
    m.add_function(wrap_pyfunction!(aggregate, m)?)?;
    m.add_function(wrap_pyfunction!(binomial_fit, m)?)?;
    m.add_function(wrap_pyfunction!(match_rate, m)?)?;
    m.add_function(wrap_pyfunction!(match_rate_curve, m)?)?;
    m.add_function(wrap_pyfunction!(summarize, m)?)?;
    m.add_function(wrap_pyfunction!(effective_dof, m)?)?;
    m.add_function(wrap_pyfunction!(exact_distribution, m)?)?;
    m.add_function(wrap_pyfunction!(empirical_distribution, m)?)?;
    Ok(())
}
