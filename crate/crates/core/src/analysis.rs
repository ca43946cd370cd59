//! Statistics over collections of matching distances.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Binomial, Discrete};

use crate::error::{Error, Result};
use crate::lattice::{hamming_distance, FullTemplate};
use crate::reconstruct::{reconstruct_full, SeedFraction, SeedSpec};
use crate::rng::stream_rng;
use crate::sampler::{IsingParams, RecordingSchedule};

/// Histogram bin width used for exported distance histograms.
pub const DEFAULT_BIN_WIDTH: f64 = 0.01;

/// A labelled collection of distances in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceSample {
    pub label: String,
    values: Vec<f64>,
}

impl DistanceSample {
    pub fn new(label: impl Into<String>, values: Vec<f64>) -> Result<Self> {
        if let Some(&bad) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::InvalidFraction(format!("distance {bad} outside [0, 1]")));
        }
        Ok(Self {
            label: label.into(),
            values,
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Fraction of distances `<= threshold`.
pub fn match_rate(sample: &DistanceSample, threshold: f64) -> Result<f64> {
    if sample.is_empty() {
        return Err(Error::Empty("distance sample"));
    }
    let hits = sample.values.iter().filter(|&&d| d <= threshold).count();
    Ok(hits as f64 / sample.len() as f64)
}

/// Match rate at each threshold of an ascending grid.
pub fn match_rate_curve(sample: &DistanceSample, thresholds: &[f64]) -> Result<Vec<(f64, f64)>> {
    if sample.is_empty() {
        return Err(Error::Empty("distance sample"));
    }
    if thresholds.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::InvalidFraction("thresholds must be ascending".into()));
    }
    let mut sorted = sample.values.clone();
    sorted.sort_by(f64::total_cmp);
    let m = sorted.len() as f64;
    Ok(thresholds
        .iter()
        .map(|&d| (d, sorted.partition_point(|&v| v <= d) as f64 / m))
        .collect())
}

/// `n + 1` evenly spaced thresholds from 0 to 1.
pub fn threshold_grid(steps: usize) -> Vec<f64> {
    (0..=steps).map(|i| i as f64 / steps as f64).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    /// Sample standard deviation (denominator `M - 1`).
    pub std: f64,
    pub count: usize,
}

fn mean_and_variance(values: &[f64]) -> (f64, f64) {
    let m = values.len() as f64;
    let mean = values.iter().sum::<f64>() / m;
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    (mean, ss / (m - 1.0))
}

pub fn summarize(sample: &DistanceSample) -> Result<Summary> {
    summarize_values(&sample.values)
}

pub fn summarize_values(values: &[f64]) -> Result<Summary> {
    if values.len() < 2 {
        return Err(Error::TooFewValues {
            needed: 2,
            got: values.len(),
        });
    }
    let (mean, var) = mean_and_variance(values);
    Ok(Summary {
        mean,
        std: var.sqrt(),
        count: values.len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitMethod {
    /// `p = mean`, `N = p (1 - p) / variance`.
    Moments,
    /// `p = mean`, `N` chosen to minimise the squared error between the
    /// histogram density and the binomial density on the same bins.
    HistogramLeastSquares,
}

/// Binomial approximation of a distance distribution: distances behave like
/// `k / N` with `k ~ Binomial(N, p)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinomialFit {
    pub p: f64,
    pub n_dof: u64,
    pub sample_mean: f64,
    pub sample_var: f64,
}

impl BinomialFit {
    /// Binomial probability mass falling in each bin, divided by the bin
    /// width. Bins are left-closed; the last one also holds `1.0`.
    pub fn density_on_bins(&self, bin_width: f64) -> Vec<f64> {
        let bins = bin_count(bin_width);
        let mut mass = vec![0.0; bins];
        let dist = Binomial::new(self.p, self.n_dof).expect("p in (0,1)");
        for k in 0..=self.n_dof {
            let x = k as f64 / self.n_dof as f64;
            mass[bin_of(x, bin_width, bins)] += dist.pmf(k);
        }
        mass.into_iter().map(|m| m / bin_width).collect()
    }
}

fn validate_moments(values: &[f64]) -> Result<(f64, f64)> {
    if values.len() < 2 {
        return Err(Error::TooFewValues {
            needed: 2,
            got: values.len(),
        });
    }
    let (mean, var) = mean_and_variance(values);
    if var <= 0.0 || values.iter().all(|&v| v == values[0]) {
        return Err(Error::ZeroVariance);
    }
    if !(mean > 0.0 && mean < 1.0) {
        return Err(Error::MeanOutOfRange(mean));
    }
    Ok((mean, var))
}

/// Method-of-moments binomial fit.
pub fn binomial_fit(sample: &DistanceSample) -> Result<BinomialFit> {
    let (mean, var) = validate_moments(&sample.values)?;
    let n = (mean * (1.0 - mean) / var).round().max(1.0) as u64;
    Ok(BinomialFit {
        p: mean,
        n_dof: n,
        sample_mean: mean,
        sample_var: var,
    })
}

pub fn binomial_fit_with(sample: &DistanceSample, method: FitMethod, bin_width: f64) -> Result<BinomialFit> {
    match method {
        FitMethod::Moments => binomial_fit(sample),
        FitMethod::HistogramLeastSquares => binomial_fit_histogram(sample, bin_width),
    }
}

/// Least-squares fit of `N` against the histogram, with `p` fixed at the
/// sample mean. Searches `N` up to four times the moment estimate.
pub fn binomial_fit_histogram(sample: &DistanceSample, bin_width: f64) -> Result<BinomialFit> {
    let moments = binomial_fit(sample)?;
    let hist = Histogram::new(sample.values(), bin_width)?;
    let empirical = hist.density();
    let upper = (4 * moments.n_dof).max(16);
    let sse = |n: u64| {
        let fit = BinomialFit {
            n_dof: n,
            ..moments
        };
        fit.density_on_bins(bin_width)
            .iter()
            .zip(&empirical)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
    };
    let best = (1..=upper)
        .into_par_iter()
        .map(|n| (sse(n), n))
        .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
        .map(|(_, n)| n)
        .expect("nonempty range");
    Ok(BinomialFit {
        n_dof: best,
        ..moments
    })
}

fn bin_count(bin_width: f64) -> usize {
    (1.0 / bin_width).round() as usize
}

fn bin_of(x: f64, bin_width: f64, bins: usize) -> usize {
    ((x / bin_width + 1e-9).floor() as usize).min(bins - 1)
}

/// Histogram of distances over `[0, 1]` with left-closed bins; the last bin
/// is closed on both sides.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub bin_width: f64,
    pub counts: Vec<u64>,
}

impl Histogram {
    pub fn new(values: &[f64], bin_width: f64) -> Result<Self> {
        if !(bin_width > 0.0 && bin_width <= 1.0) {
            return Err(Error::InvalidFraction(format!("bin width {bin_width}")));
        }
        if values.is_empty() {
            return Err(Error::Empty("histogram input"));
        }
        let bins = bin_count(bin_width);
        let mut counts = vec![0; bins];
        for &v in values {
            counts[bin_of(v, bin_width, bins)] += 1;
        }
        Ok(Self { bin_width, counts })
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn bin_edges(&self, bin: usize) -> (f64, f64) {
        (
            bin as f64 / self.counts.len() as f64,
            (bin + 1) as f64 / self.counts.len() as f64,
        )
    }

    /// Normalised so that the density integrates to one.
    pub fn density(&self) -> Vec<f64> {
        let total = self.total() as f64;
        self.counts
            .iter()
            .map(|&c| c as f64 / total / self.bin_width)
            .collect()
    }
}

/// Seed bits over a two-part template of `total_bits` bits, rounding each
/// part up.
pub fn effective_dof(fraction: SeedFraction, total_bits: usize) -> Result<usize> {
    if total_bits == 0 || !total_bits.is_multiple_of(2) {
        return Err(Error::InvalidFraction(format!(
            "total bit count {total_bits} must be positive and even"
        )));
    }
    Ok(2 * fraction.ceil_of(total_bits / 2))
}

/// Sample autocorrelation of `series` at `lag`.
pub fn autocorrelation(series: &[f64], lag: usize) -> Result<f64> {
    if series.len() <= lag + 1 {
        return Err(Error::TooFewValues {
            needed: lag + 2,
            got: series.len(),
        });
    }
    let n = series.len() as f64;
    let mean = series.iter().sum::<f64>() / n;
    let var: f64 = series.iter().map(|x| (x - mean) * (x - mean)).sum();
    if var == 0.0 {
        return Err(Error::ZeroVariance);
    }
    let cov: f64 = series
        .iter()
        .zip(&series[lag..])
        .map(|(a, b)| (a - mean) * (b - mean))
        .sum();
    Ok(cov / var)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridEntry {
    pub params: IsingParams,
    pub mean: f64,
    pub std: f64,
    pub trials: usize,
    /// Per-trial distances, in trial order.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub distances: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    pub entries: Vec<GridEntry>,
    pub argmin: IsingParams,
}

impl GridResult {
    /// Builds a result; the argmin is the entry with the smallest mean, ties
    /// broken by the smaller `(j_v, j_h)`.
    pub fn from_entries(entries: Vec<GridEntry>) -> Result<Self> {
        let best = entries
            .iter()
            .min_by(|a, b| {
                a.mean
                    .total_cmp(&b.mean)
                    .then(a.params.j_v.total_cmp(&b.params.j_v))
                    .then(a.params.j_h.total_cmp(&b.params.j_h))
            })
            .ok_or(Error::Empty("parameter grid"))?;
        Ok(Self {
            argmin: best.params,
            entries,
        })
    }

    pub fn best(&self) -> &GridEntry {
        self.entries
            .iter()
            .find(|e| e.params == self.argmin)
            .expect("argmin is an entry")
    }
}

/// `{(i / 10, j / 10) : 1 <= i, j <= 10}`.
pub fn iris_coupling_grid() -> Vec<IsingParams> {
    let mut grid = Vec::with_capacity(100);
    for i in 1..=10 {
        for j in 1..=10 {
            grid.push(IsingParams {
                j_v: i as f64 / 10.0,
                j_h: j as f64 / 10.0,
            });
        }
    }
    grid
}

/// Mean and spread of reconstruction distance for every coupling pair.
///
/// Cell `(point, trial)` draws from stream `point * trials + trial` of
/// `rng_seed`, with a fresh seed index set per trial.
pub fn grid_search_j(
    original: &FullTemplate,
    grid: &[IsingParams],
    spec: &SeedSpec,
    trials: usize,
    schedule: &RecordingSchedule,
    rng_seed: u64,
) -> Result<GridResult> {
    if grid.is_empty() {
        return Err(Error::Empty("parameter grid"));
    }
    if trials == 0 {
        return Err(Error::Empty("trials"));
    }
    let cells: Vec<(usize, usize)> = (0..grid.len())
        .flat_map(|p| (0..trials).map(move |t| (p, t)))
        .collect();
    let distances: Vec<f64> = cells
        .par_iter()
        .map(|&(p, t)| {
            let mut rng = stream_rng(rng_seed, (p * trials + t) as u64);
            let r = reconstruct_full(original, spec, grid[p], schedule, &mut rng)?;
            hamming_distance(original, &r.reconstructed)
        })
        .collect::<Result<_>>()?;
    let entries = grid
        .iter()
        .zip(distances.chunks(trials))
        .map(|(&params, d)| {
            let (mean, std) = if d.len() >= 2 {
                let s = summarize_values(d)?;
                (s.mean, s.std)
            } else {
                (d[0], 0.0)
            };
            Ok(GridEntry {
                params,
                mean,
                std,
                trials,
                distances: d.to_vec(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    GridResult::from_entries(entries)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{LatticeGeometry, Seed};
    use crate::sampler::initial_template;
    use rand::SeedableRng;
    use rand_distr::Distribution;

    fn sample(values: &[f64]) -> DistanceSample {
        DistanceSample::new("test", values.to_vec()).unwrap()
    }

    #[test]
    fn rejects_out_of_range_distances() {
        assert!(DistanceSample::new("x", vec![0.5, 1.2]).is_err());
    }

    #[test]
    fn match_rate_counts() {
        let s = sample(&[0.1, 0.2, 0.3]);
        assert_eq!(match_rate(&s, 0.05).unwrap(), 0.0);
        assert_eq!(match_rate(&s, 0.3).unwrap(), 1.0);
        assert!((match_rate(&s, 0.2).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert!(match_rate(&sample(&[]), 0.2).is_err());
    }

    #[test]
    fn match_rate_curve_is_cdf() {
        let s = sample(&[0.42, 0.1, 0.33, 0.33, 0.9]);
        let curve = match_rate_curve(&s, &threshold_grid(100)).unwrap();
        assert!(curve.windows(2).all(|w| w[0].1 <= w[1].1));
        assert_eq!(curve.last().unwrap(), &(1.0, 1.0));
        for &(d, m) in &curve {
            assert_eq!(m, match_rate(&s, d).unwrap());
        }
        assert!(match_rate_curve(&s, &[0.5, 0.2]).is_err());
    }

    #[test]
    fn summarize_two_point_and_constant() {
        let s = summarize(&sample(&[0.0, 1.0])).unwrap();
        assert_eq!(s.mean, 0.5);
        assert!((s.std - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
        assert_eq!(summarize(&sample(&[0.3, 0.3, 0.3])).unwrap().std, 0.0);
        assert!(summarize(&sample(&[0.3])).is_err());
    }

    #[test]
    fn binomial_fit_errors() {
        assert!(matches!(
            binomial_fit(&sample(&[0.4, 0.4, 0.4])),
            Err(Error::ZeroVariance)
        ));
        assert!(matches!(
            binomial_fit(&sample(&[0.0, 0.0, 0.0, 0.0])),
            Err(Error::ZeroVariance)
        ));
        assert!(binomial_fit(&sample(&[0.5])).is_err());
    }

    fn synthetic(n: u64, p: f64, m: usize, seed: u64) -> DistanceSample {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let dist = rand_distr::Binomial::new(n, p).unwrap();
        let values = (0..m).map(|_| dist.sample(&mut rng) as f64 / n as f64).collect();
        DistanceSample::new("synthetic", values).unwrap()
    }

    #[test]
    fn moment_fit_recovers_parameters() {
        for &n in &[100u64, 352, 1000] {
            for &p in &[0.3, 0.4947] {
                let fit = binomial_fit(&synthetic(n, p, 100_000, n ^ 7)).unwrap();
                assert!((fit.p - p).abs() <= 0.005 * p, "p {} vs {p}", fit.p);
                let rel = (fit.n_dof as f64 - n as f64).abs() / n as f64;
                assert!(rel <= 0.02, "N {} vs {n}", fit.n_dof);
            }
        }
    }

    #[test]
    fn histogram_fit_is_close_to_moments() {
        let s = synthetic(352, 0.4947, 100_000, 1);
        let hist = binomial_fit_histogram(&s, DEFAULT_BIN_WIDTH).unwrap();
        let moments = binomial_fit(&s).unwrap();
        assert_eq!(hist.p, moments.p);
        let rel = (hist.n_dof as f64 - 352.0).abs() / 352.0;
        assert!(rel < 0.1, "histogram fit N = {}", hist.n_dof);
    }

    #[test]
    fn fitted_density_integrates_to_one() {
        let fit = BinomialFit {
            p: 0.4947,
            n_dof: 352,
            sample_mean: 0.4947,
            sample_var: 0.0,
        };
        let total: f64 = fit.density_on_bins(DEFAULT_BIN_WIDTH).iter().sum::<f64>() * DEFAULT_BIN_WIDTH;
        assert!((total - 1.0).abs() < 1e-9);
    }

    #[test]
    fn histogram_bins() {
        let h = Histogram::new(&[0.0, 0.005, 0.01, 0.999, 1.0], 0.01).unwrap();
        assert_eq!(h.counts.len(), 100);
        assert_eq!(h.counts[0], 2);
        assert_eq!(h.counts[1], 1);
        assert_eq!(h.counts[99], 2);
        assert_eq!(h.bin_edges(1), (0.01, 0.02));
    }

    #[test]
    fn effective_dof_values() {
        let f = |s: &str| s.parse::<SeedFraction>().unwrap();
        assert_eq!(effective_dof(f("1/6"), 2048).unwrap(), 342);
        assert_eq!(effective_dof(f("1/1"), 2048).unwrap(), 2048);
        assert_eq!(effective_dof(f("1/5"), 2048).unwrap(), 410);
        assert!(effective_dof(f("1/5"), 2047).is_err());
    }

    #[test]
    fn autocorrelation_basics() {
        let alternating: Vec<f64> = (0..100).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        assert!((autocorrelation(&alternating, 0).unwrap() - 1.0).abs() < 1e-12);
        assert!(autocorrelation(&alternating, 1).unwrap() < -0.9);
        assert!(autocorrelation(&[1.0, 1.0, 1.0], 1).is_err());
    }

    #[test]
    fn grid_argmin_ignores_order() {
        let entry = |j_v, j_h, mean| GridEntry {
            params: IsingParams { j_v, j_h },
            mean,
            std: 0.0,
            trials: 1,
            distances: vec![],
        };
        let entries = vec![entry(0.1, 0.1, 0.3), entry(0.2, 0.3, 0.28), entry(0.3, 0.2, 0.28)];
        let a = GridResult::from_entries(entries.clone()).unwrap();
        let mut reversed = entries;
        reversed.reverse();
        let b = GridResult::from_entries(reversed).unwrap();
        assert_eq!(a.argmin, b.argmin);
        assert_eq!(a.argmin, IsingParams { j_v: 0.2, j_h: 0.3 });
    }

    #[test]
    fn small_grid_search() {
        let g = LatticeGeometry::new(4, 8).unwrap();
        let mut rng = stream_rng(1, 0);
        let original = FullTemplate::new(
            initial_template(&Seed::empty(g), &mut rng),
            initial_template(&Seed::empty(g), &mut rng),
        )
        .unwrap();
        let grid: Vec<IsingParams> = [(0.1, 0.1), (0.1, 0.5), (0.5, 0.1), (0.5, 0.5)]
            .iter()
            .map(|&(v, h)| IsingParams::new(v, h).unwrap())
            .collect();
        let spec = SeedSpec::fraction("1/4".parse().unwrap());
        let schedule = RecordingSchedule::evenly_spaced(20, 5).unwrap();
        let result = grid_search_j(&original, &grid, &spec, 2, &schedule, 11).unwrap();
        assert_eq!(result.entries.len(), 4);
        for e in &result.entries {
            assert_eq!(e.trials, 2);
            let s = summarize_values(&e.distances).unwrap();
            assert_eq!((s.mean, s.std), (e.mean, e.std));
        }
        let again = grid_search_j(&original, &grid, &spec, 2, &schedule, 11).unwrap();
        assert_eq!(result, again);

        let single = grid_search_j(&original, &grid[..1], &spec, 1, &schedule, 11).unwrap();
        assert_eq!(single.argmin, grid[0]);
    }

    #[test]
    fn coupling_grid_has_exact_decimals() {
        let grid = iris_coupling_grid();
        assert_eq!(grid.len(), 100);
        assert!(grid.contains(&IsingParams { j_v: 0.2, j_h: 0.3 }));
        assert_eq!(grid[99], IsingParams { j_v: 1.0, j_h: 1.0 });
    }
}
