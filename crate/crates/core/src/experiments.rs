//! Experiment recipes behind the `seeded-ising` command line tool.
//!
//! Each recipe reads its settings from an [`ExperimentConfig`], writes CSV
//! (and template) files into the output directory, and embeds the full config
//! as the first comment line of every CSV so that a run can be replayed from
//! any of its outputs. Randomness comes from [`stream_rng`] streams keyed by
//! work item, so outputs do not depend on thread count.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{
    binomial_fit_with, grid_search_j, iris_coupling_grid, match_rate_curve, summarize_values,
    threshold_grid, BinomialFit, DistanceSample, FitMethod, GridEntry, GridResult, Histogram,
};
use crate::error::{Error, Result};
use crate::io::{embedded_config, read_template, write_template, CsvTable, CONFIG_PREFIX};
use crate::lattice::{
    hamming_distance, hamming_distance_min_rotation, FullTemplate, LatticeGeometry, Seed,
};
use crate::oracle::{empirical_distribution, exact_distribution};
use crate::reconstruct::{reconstruct_full, sample_indices, SeedFraction, SeedSize, SeedSpec};
use crate::rng::stream_rng;
use crate::sampler::{initial_template, sample_unseeded, IsingParams, RecordingSchedule};

/// Stream ids above this offset are reserved for setup draws (seed
/// placement in `oracle-check`), keeping them apart from per-item streams.
const SETUP_STREAM: u64 = 1 << 62;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub rows: usize,
    pub cols: usize,
    pub j_v: f64,
    pub j_h: f64,
    pub seed_fraction: SeedFraction,
    /// Overrides `seed_fraction` when set.
    pub seed_count: Option<usize>,
    pub shared_index_set: bool,
    pub schedule: RecordingSchedule,
    pub trials: usize,
    pub rotation: bool,
    pub max_shift: usize,
    pub rng_seed: u64,
    pub out: PathBuf,
    pub overwrite: bool,

    /// Input template files (reconstruct, sweep-j, match).
    pub inputs: Vec<PathBuf>,
    /// Second template collection for `match`; empty means all pairs of
    /// `inputs`.
    pub inputs_b: Vec<PathBuf>,
    /// Match `inputs[i]` against `inputs_b[i]` only.
    pub paired: bool,

    /// Number of templates for `synthesize`.
    pub synth_count: usize,
    /// Metropolis iterations per synthesized part.
    pub synth_steps: u64,

    /// Coupling grid for `sweep-j`; empty means the 10x10 grid of tenths.
    pub grid: Vec<IsingParams>,

    /// Distance CSV and column for `dof`.
    pub distances: Option<PathBuf>,
    pub column: String,
    pub fit_method: FitMethod,
    pub bin_width: f64,

    pub oracle_rows: usize,
    pub oracle_cols: usize,
    pub oracle_seeded: usize,
    pub burn_in: u64,
    pub samples: u64,
    pub thin: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            rows: 8,
            cols: 128,
            j_v: 0.2,
            j_h: 0.3,
            seed_fraction: SeedFraction::new(1, 4).expect("valid"),
            seed_count: None,
            shared_index_set: true,
            schedule: RecordingSchedule::iris_default(),
            trials: 100,
            rotation: false,
            max_shift: 8,
            rng_seed: 0,
            out: PathBuf::from("out"),
            overwrite: false,
            inputs: Vec::new(),
            inputs_b: Vec::new(),
            paired: false,
            synth_count: 10,
            synth_steps: 100 * 1024,
            grid: Vec::new(),
            distances: None,
            column: "distance".into(),
            fit_method: FitMethod::Moments,
            bin_width: crate::analysis::DEFAULT_BIN_WIDTH,
            oracle_rows: 3,
            oracle_cols: 4,
            oracle_seeded: 5,
            burn_in: 100_000,
            samples: 2_000_000,
            thin: 1,
        }
    }
}

impl ExperimentConfig {
    pub fn geometry(&self) -> Result<LatticeGeometry> {
        LatticeGeometry::new(self.rows, self.cols)
    }

    pub fn params(&self) -> Result<IsingParams> {
        IsingParams::new(self.j_v, self.j_h)
    }

    pub fn seed_spec(&self) -> SeedSpec {
        SeedSpec {
            size: match self.seed_count {
                Some(c) => SeedSize::Count(c),
                None => SeedSize::Fraction(self.seed_fraction),
            },
            shared_index_set: self.shared_index_set,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    /// Loads a config from a JSON file or from the `# config:` line of any
    /// CSV written by a previous run.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let json = embedded_config(&text).unwrap_or(&text);
        Ok(serde_json::from_str(json)?)
    }

    fn table(&self, header: &[&str]) -> CsvTable {
        let mut t = CsvTable::new(header);
        t.comment(format!(
            "{}{}",
            CONFIG_PREFIX.trim_start_matches("# "),
            self.to_json()
        ));
        t
    }

    fn out_path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }
}

/// Shortest round-trip decimal; exponent form outside `[1e-6, 1e16)`.
pub fn fmt_f64(x: f64) -> String {
    let a = x.abs();
    if a == 0.0 || (1e-6..1e16).contains(&a) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

fn file_label(path: &Path) -> String {
    path.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

/// Subject id from a `<subject>_<image>.tpl` file name.
pub fn subject_id(path: &Path) -> Option<String> {
    let stem = path.file_stem()?.to_str()?;
    let (subject, image) = stem.rsplit_once('_')?;
    (!subject.is_empty() && !image.is_empty()).then(|| subject.to_string())
}

#[derive(Debug, Clone)]
pub struct SynthesizeReport {
    pub files: Vec<PathBuf>,
    pub manifest: PathBuf,
}

/// Draws `synth_count` templates from the unseeded model. Template `i` uses
/// stream `i`; both of its parts come from that stream.
pub fn synthesize(config: &ExperimentConfig) -> Result<SynthesizeReport> {
    let geometry = config.geometry()?;
    let params = config.params()?;
    let templates: Vec<FullTemplate> = (0..config.synth_count)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(config.rng_seed, i as u64);
            let real = sample_unseeded(geometry, params, config.synth_steps, &mut rng)?;
            let imag = sample_unseeded(geometry, params, config.synth_steps, &mut rng)?;
            FullTemplate::new(real, imag)
        })
        .collect::<Result<_>>()?;

    let mut manifest = config.table(&[
        "file",
        "subject",
        "stream",
        "mean_spin",
        "d_v_real",
        "d_h_real",
        "d_v_imag",
        "d_h_imag",
    ]);
    let mut files = Vec::with_capacity(templates.len());
    for (i, t) in templates.iter().enumerate() {
        let name = format!("s{i:04}_00.tpl");
        let path = config.out_path(&name);
        write_template(t, &path, config.overwrite)?;
        let spins = t.real().spins().iter().chain(t.imag().spins());
        let mean = spins.map(|&s| s as f64).sum::<f64>() / t.bit_count() as f64;
        let (r, m) = (t.real().disagreement_counts(), t.imag().disagreement_counts());
        manifest.push(vec![
            name,
            format!("s{i:04}"),
            i.to_string(),
            fmt_f64(mean),
            r.vertical.to_string(),
            r.horizontal.to_string(),
            m.vertical.to_string(),
            m.horizontal.to_string(),
        ]);
        files.push(path);
    }
    let manifest_path = config.out_path("synthesize.csv");
    manifest.write(&manifest_path, config.overwrite)?;
    Ok(SynthesizeReport {
        files,
        manifest: manifest_path,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialDistances {
    pub initial: f64,
    pub reconstructed: f64,
}

#[derive(Debug, Clone)]
pub struct ReconstructReport {
    pub seed_bits: usize,
    /// Indexed `[template][trial]`.
    pub trials: Vec<Vec<TrialDistances>>,
    pub initial_mean: f64,
    pub initial_std: f64,
    pub reconstructed_mean: f64,
    pub reconstructed_std: f64,
}

/// Runs `trials` reconstructions of every template in `originals`.
/// Trial `t` of template `i` uses stream `i * trials + t`, with a fresh seed
/// index set per trial.
pub fn reconstruct_trials(
    originals: &[FullTemplate],
    config: &ExperimentConfig,
) -> Result<Vec<Vec<TrialDistances>>> {
    let params = config.params()?;
    let spec = config.seed_spec();
    let trials = config.trials;
    if trials == 0 {
        return Err(Error::Empty("trials"));
    }
    let cells: Vec<(usize, usize)> = (0..originals.len())
        .flat_map(|i| (0..trials).map(move |t| (i, t)))
        .collect();
    let flat: Vec<TrialDistances> = cells
        .par_iter()
        .map(|&(i, t)| {
            let mut rng = stream_rng(config.rng_seed, (i * trials + t) as u64);
            let original = &originals[i];
            let r = reconstruct_full(original, &spec, params, &config.schedule, &mut rng)?;
            Ok(TrialDistances {
                initial: hamming_distance(original, &r.initial)?,
                reconstructed: hamming_distance(original, &r.reconstructed)?,
            })
        })
        .collect::<Result<_>>()?;
    Ok(flat.chunks(trials).map(<[_]>::to_vec).collect())
}

/// Reconstruction experiment over the configured input templates. Writes
/// `reconstruct.csv` (one row per trial), `reconstruct_summary.csv` (mean and
/// standard deviation of initial and reconstructed distances) and
/// `reconstruct_match_rate.csv`.
pub fn reconstruct(config: &ExperimentConfig) -> Result<ReconstructReport> {
    if config.inputs.is_empty() {
        return Err(Error::Empty("input templates"));
    }
    let originals: Vec<FullTemplate> =
        config.inputs.iter().map(read_template).collect::<Result<_>>()?;
    let cells = originals[0].geometry().len();
    let seed_bits = 2 * config.seed_spec().resolve(cells)?;
    let trials = reconstruct_trials(&originals, config)?;

    let mut rows = config.table(&[
        "template",
        "trial",
        "stream",
        "initial_distance",
        "reconstructed_distance",
    ]);
    let mut initial = Vec::new();
    let mut rebuilt = Vec::new();
    for (i, per_template) in trials.iter().enumerate() {
        for (t, d) in per_template.iter().enumerate() {
            rows.push(vec![
                file_label(&config.inputs[i]),
                t.to_string(),
                (i * config.trials + t).to_string(),
                fmt_f64(d.initial),
                fmt_f64(d.reconstructed),
            ]);
            initial.push(d.initial);
            rebuilt.push(d.reconstructed);
        }
    }
    rows.write(config.out_path("reconstruct.csv"), config.overwrite)?;

    let (initial_mean, initial_std) = mean_std(&initial)?;
    let (reconstructed_mean, reconstructed_std) = mean_std(&rebuilt)?;
    let size = match config.seed_count {
        Some(c) => c.to_string(),
        None => config.seed_fraction.to_string(),
    };
    let mut summary = config.table(&[
        "seed_size",
        "seed_bits",
        "count",
        "initial_mean",
        "initial_std",
        "reconstructed_mean",
        "reconstructed_std",
    ]);
    summary.push(vec![
        size,
        seed_bits.to_string(),
        initial.len().to_string(),
        fmt_f64(initial_mean),
        fmt_f64(initial_std),
        fmt_f64(reconstructed_mean),
        fmt_f64(reconstructed_std),
    ]);
    summary.write(config.out_path("reconstruct_summary.csv"), config.overwrite)?;

    let grid = threshold_grid(1000);
    let initial_curve = match_rate_curve(&DistanceSample::new("initial", initial)?, &grid)?;
    let rebuilt_curve = match_rate_curve(&DistanceSample::new("reconstructed", rebuilt)?, &grid)?;
    let mut curve = config.table(&["threshold", "initial", "reconstructed"]);
    for (a, b) in initial_curve.iter().zip(&rebuilt_curve) {
        curve.push(vec![fmt_f64(a.0), fmt_f64(a.1), fmt_f64(b.1)]);
    }
    curve.write(config.out_path("reconstruct_match_rate.csv"), config.overwrite)?;

    Ok(ReconstructReport {
        seed_bits,
        trials,
        initial_mean,
        initial_std,
        reconstructed_mean,
        reconstructed_std,
    })
}

/// Mean and sample standard deviation; a single value has spread 0.
fn mean_std(values: &[f64]) -> Result<(f64, f64)> {
    match values {
        [] => Err(Error::Empty("distances")),
        [only] => Ok((*only, 0.0)),
        _ => {
            let s = summarize_values(values)?;
            Ok((s.mean, s.std))
        }
    }
}

/// Coupling grid search on the first input template. Writes `sweep_j.csv`
/// with an `argmin` trailer comment and `sweep_j_trials.csv` with every
/// per-trial distance.
pub fn sweep_j(config: &ExperimentConfig) -> Result<GridResult> {
    let input = config.inputs.first().ok_or(Error::Empty("input templates"))?;
    let original = read_template(input)?;
    let grid = if config.grid.is_empty() {
        iris_coupling_grid()
    } else {
        config.grid.clone()
    };
    let result = grid_search_j(
        &original,
        &grid,
        &config.seed_spec(),
        config.trials,
        &config.schedule,
        config.rng_seed,
    )?;
    sweep_table(config, &result).write(config.out_path("sweep_j.csv"), config.overwrite)?;

    let mut trials = config.table(&["j_v", "j_h", "trial", "distance"]);
    for e in &result.entries {
        for (t, d) in e.distances.iter().enumerate() {
            trials.push(vec![
                fmt_f64(e.params.j_v),
                fmt_f64(e.params.j_h),
                t.to_string(),
                fmt_f64(*d),
            ]);
        }
    }
    trials.write(config.out_path("sweep_j_trials.csv"), config.overwrite)?;
    Ok(result)
}

fn sweep_table(config: &ExperimentConfig, result: &GridResult) -> CsvTable {
    let mut table = config.table(&["j_v", "j_h", "mean", "std", "trials"]);
    for e in &result.entries {
        table.push(vec![
            fmt_f64(e.params.j_v),
            fmt_f64(e.params.j_h),
            fmt_f64(e.mean),
            fmt_f64(e.std),
            e.trials.to_string(),
        ]);
    }
    let best = result.best();
    table.comment(format!(
        "argmin j_v={} j_h={} mean={}",
        best.params.j_v, best.params.j_h, best.mean
    ));
    table
}

/// Reads a `sweep_j.csv` back into a [`GridResult`] (without per-trial
/// distances).
pub fn parse_sweep_csv(text: &str) -> Result<GridResult> {
    let table = CsvTable::parse(text)?;
    let j_v = table.f64_column("j_v")?;
    let j_h = table.f64_column("j_h")?;
    let mean = table.f64_column("mean")?;
    let std = table.f64_column("std")?;
    let trials = table.f64_column("trials")?;
    let entries = (0..j_v.len())
        .map(|i| GridEntry {
            params: IsingParams {
                j_v: j_v[i],
                j_h: j_h[i],
            },
            mean: mean[i],
            std: std[i],
            trials: trials[i] as usize,
            distances: Vec::new(),
        })
        .collect();
    GridResult::from_entries(entries)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchRow {
    pub a: String,
    pub b: String,
    /// `genuine`, `impostor`, or `unknown` when a name carries no subject id.
    pub label: String,
    pub distance: f64,
    pub shift: isize,
}

/// Pairwise Hamming distances. With `inputs_b` empty, all unordered pairs of
/// `inputs`; with `paired`, `inputs[i]` against `inputs_b[i]`; otherwise the
/// full cross product. Writes `match.csv` and `match_rate.csv`.
pub fn match_templates(config: &ExperimentConfig) -> Result<Vec<MatchRow>> {
    if config.inputs.is_empty() {
        return Err(Error::Empty("input templates"));
    }
    let load = |paths: &[PathBuf]| -> Result<Vec<FullTemplate>> {
        paths.iter().map(read_template).collect()
    };
    let a = load(&config.inputs)?;
    let (b, b_paths) = if config.inputs_b.is_empty() {
        (a.clone(), &config.inputs)
    } else {
        (load(&config.inputs_b)?, &config.inputs_b)
    };
    let pairs: Vec<(usize, usize)> = if config.inputs_b.is_empty() {
        (0..a.len())
            .flat_map(|i| (i + 1..a.len()).map(move |j| (i, j)))
            .collect()
    } else if config.paired {
        if a.len() != b.len() {
            return Err(Error::LengthMismatch {
                expected: a.len(),
                actual: b.len(),
            });
        }
        (0..a.len()).map(|i| (i, i)).collect()
    } else {
        (0..a.len())
            .flat_map(|i| (0..b.len()).map(move |j| (i, j)))
            .collect()
    };
    let rows: Vec<MatchRow> = pairs
        .par_iter()
        .map(|&(i, j)| {
            let (distance, shift) = if config.rotation {
                let m = hamming_distance_min_rotation(&a[i], &b[j], config.max_shift)?;
                (m.distance, m.shift)
            } else {
                (hamming_distance(&a[i], &b[j])?, 0)
            };
            let label = match (subject_id(&config.inputs[i]), subject_id(&b_paths[j])) {
                (Some(x), Some(y)) if x == y => "genuine",
                (Some(_), Some(_)) => "impostor",
                _ => "unknown",
            };
            Ok(MatchRow {
                a: file_label(&config.inputs[i]),
                b: file_label(&b_paths[j]),
                label: label.to_string(),
                distance,
                shift,
            })
        })
        .collect::<Result<_>>()?;

    let mut table = config.table(&["a", "b", "label", "distance", "shift"]);
    table.comment(format!(
        "rotation={} max_shift={}",
        config.rotation, config.max_shift
    ));
    for r in &rows {
        table.push(vec![
            r.a.clone(),
            r.b.clone(),
            r.label.clone(),
            fmt_f64(r.distance),
            r.shift.to_string(),
        ]);
    }
    table.write(config.out_path("match.csv"), config.overwrite)?;

    let grid = threshold_grid(1000);
    let labels = ["genuine", "impostor", "all"];
    let curves: Vec<Option<Vec<(f64, f64)>>> = labels
        .iter()
        .map(|&label| {
            let values: Vec<f64> = rows
                .iter()
                .filter(|r| label == "all" || r.label == label)
                .map(|r| r.distance)
                .collect();
            if values.is_empty() {
                Ok(None)
            } else {
                match_rate_curve(&DistanceSample::new(label, values)?, &grid).map(Some)
            }
        })
        .collect::<Result<_>>()?;
    let mut curve_table = config.table(&["threshold", "genuine", "impostor", "all"]);
    for (k, &d) in grid.iter().enumerate() {
        let mut row = vec![fmt_f64(d)];
        for c in &curves {
            row.push(c.as_ref().map(|c| fmt_f64(c[k].1)).unwrap_or_default());
        }
        curve_table.push(row);
    }
    curve_table.write(config.out_path("match_rate.csv"), config.overwrite)?;
    Ok(rows)
}

/// Binomial degrees-of-freedom fit of a distance column. Writes `dof.csv`:
/// the fit parameters as comments, then the histogram and the fitted
/// binomial density on the same bins.
pub fn dof(config: &ExperimentConfig) -> Result<BinomialFit> {
    let path = config
        .distances
        .as_ref()
        .ok_or(Error::Empty("distance CSV path"))?;
    let table = CsvTable::read(path)?;
    let values = table.f64_column(&config.column)?;
    let sample = DistanceSample::new(config.column.clone(), values)?;
    let fit = binomial_fit_with(&sample, config.fit_method, config.bin_width)?;
    let hist = Histogram::new(sample.values(), config.bin_width)?;
    let empirical = hist.density();
    let fitted = fit.density_on_bins(config.bin_width);

    let mut out = config.table(&[
        "bin_lo",
        "bin_hi",
        "count",
        "empirical_density",
        "fitted_density",
    ]);
    out.comment(format!(
        "fit p={} n_dof={} sample_mean={} sample_var={} count={}",
        fit.p,
        fit.n_dof,
        fit.sample_mean,
        fit.sample_var,
        sample.len()
    ));
    for bin in 0..hist.counts.len() {
        let (lo, hi) = hist.bin_edges(bin);
        out.push(vec![
            fmt_f64(lo),
            fmt_f64(hi),
            hist.counts[bin].to_string(),
            fmt_f64(empirical[bin]),
            fmt_f64(fitted[bin]),
        ]);
    }
    out.write(config.out_path("dof.csv"), config.overwrite)?;
    Ok(fit)
}

#[derive(Debug, Clone)]
pub struct OracleCheck {
    pub total_variation: f64,
    pub detailed_balance_error: f64,
    pub free_bits: usize,
}

/// Compares a long chain with exact enumeration on a small lattice. The
/// seed pins `oracle_seeded` random cells of a random template. Writes
/// `oracle_check.csv` with exact and empirical probabilities per state.
pub fn oracle_check(config: &ExperimentConfig) -> Result<OracleCheck> {
    let geometry = LatticeGeometry::new(config.oracle_rows, config.oracle_cols)?;
    let params = config.params()?;
    let mut setup = stream_rng(config.rng_seed, SETUP_STREAM);
    let base = initial_template(&Seed::empty(geometry), &mut setup);
    let indices = sample_indices(geometry.len(), config.oracle_seeded, &mut setup)?;
    let seed = Seed::from_part(&base, &indices)?;
    let exact = exact_distribution(&seed, params)?;
    let empirical = empirical_distribution(
        &seed,
        params,
        config.burn_in,
        config.samples,
        config.thin,
        stream_rng(config.rng_seed, 0),
    )?;
    let total_variation = exact.total_variation(&empirical);
    let detailed_balance_error = if exact.free_indices().len() <= 12 {
        exact.detailed_balance_error(params)
    } else {
        f64::NAN
    };

    let mut table = config.table(&["state", "exact", "empirical"]);
    table.comment(format!(
        "free_bits={} total_variation={} detailed_balance_error={}",
        exact.free_indices().len(),
        total_variation,
        detailed_balance_error
    ));
    for (state, (p, q)) in exact.probabilities().iter().zip(&empirical).enumerate() {
        table.push(vec![state.to_string(), fmt_f64(*p), fmt_f64(*q)]);
    }
    table.write(config.out_path("oracle_check.csv"), config.overwrite)?;
    Ok(OracleCheck {
        total_variation,
        detailed_balance_error,
        free_bits: exact.free_indices().len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn subject_ids() {
        assert_eq!(subject_id(Path::new("dir/0042_03.tpl")).as_deref(), Some("0042"));
        assert_eq!(subject_id(Path::new("a_b_1.tpl")).as_deref(), Some("a_b"));
        assert_eq!(subject_id(Path::new("plain.tpl")), None);
    }

    #[test]
    fn config_json_round_trip() {
        let c = ExperimentConfig {
            seed_fraction: "1/6".parse().unwrap(),
            grid: vec![IsingParams { j_v: 0.2, j_h: 0.3 }],
            ..Default::default()
        };
        let back: ExperimentConfig = serde_json::from_str(&c.to_json()).unwrap();
        assert_eq!(back, c);
        let partial: ExperimentConfig = serde_json::from_str(r#"{"trials": 3}"#).unwrap();
        assert_eq!(partial.trials, 3);
        assert_eq!(partial.rows, 8);
    }
}
