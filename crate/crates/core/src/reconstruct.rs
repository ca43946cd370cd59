//! Seed extraction and majority-vote reconstruction of templates.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{FullTemplate, Seed, Spin, TemplatePart};
use crate::sampler::{run_chain_with_initial, IsingParams, RecordingSchedule};

/// A rational number in `(0, 1]`, written `p/q`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct SeedFraction {
    num: u64,
    den: u64,
}

impl SeedFraction {
    pub fn new(num: u64, den: u64) -> Result<Self> {
        if num == 0 || den == 0 || num > den {
            return Err(Error::InvalidFraction(format!("{num}/{den} is not in (0, 1]")));
        }
        Ok(Self { num, den })
    }

    pub fn num(&self) -> u64 {
        self.num
    }

    pub fn den(&self) -> u64 {
        self.den
    }

    pub fn value(&self) -> f64 {
        self.num as f64 / self.den as f64
    }

    /// `ceil(total * num / den)`, computed exactly.
    pub fn ceil_of(&self, total: usize) -> usize {
        (total as u64 * self.num).div_ceil(self.den) as usize
    }
}

impl FromStr for SeedFraction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidFraction(s.to_string());
        let (num, den) = match s.split_once('/') {
            Some((n, d)) => (n.trim(), d.trim()),
            None => (s.trim(), "1"),
        };
        let num = num.parse().map_err(|_| bad())?;
        let den = den.parse().map_err(|_| bad())?;
        Self::new(num, den)
    }
}

impl fmt::Display for SeedFraction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}

impl TryFrom<String> for SeedFraction {
    type Error = Error;

    fn try_from(value: String) -> Result<Self> {
        value.parse()
    }
}

impl From<SeedFraction> for String {
    fn from(value: SeedFraction) -> Self {
        value.to_string()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeedSize {
    /// Fraction of each part's cells, rounded up.
    Fraction(SeedFraction),
    Count(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedSpec {
    pub size: SeedSize,
    /// Use one index set for both real and imaginary parts. Independent
    /// index sets are an extension.
    pub shared_index_set: bool,
}

impl SeedSpec {
    pub fn fraction(fraction: SeedFraction) -> Self {
        Self {
            size: SeedSize::Fraction(fraction),
            shared_index_set: true,
        }
    }

    pub fn count(count: usize) -> Self {
        Self {
            size: SeedSize::Count(count),
            shared_index_set: true,
        }
    }

    /// Number of seed cells per part of `cells` cells.
    pub fn resolve(&self, cells: usize) -> Result<usize> {
        let count = match self.size {
            SeedSize::Fraction(f) => f.ceil_of(cells),
            SeedSize::Count(c) => c,
        };
        if count == 0 {
            return Err(Error::InvalidSeedSpec("seed must hold at least one cell".into()));
        }
        if count > cells {
            return Err(Error::SeedTooLarge {
                requested: count,
                available: cells,
            });
        }
        Ok(count)
    }
}

/// Uniformly random `count`-subset of `0..cells`, ascending.
pub fn sample_indices<R: Rng + ?Sized>(cells: usize, count: usize, rng: &mut R) -> Result<Vec<usize>> {
    if count > cells {
        return Err(Error::SeedTooLarge {
            requested: count,
            available: cells,
        });
    }
    let mut all: Vec<usize> = (0..cells).collect();
    let (chosen, _) = all.partial_shuffle(rng, count);
    let mut chosen = chosen.to_vec();
    chosen.sort_unstable();
    Ok(chosen)
}

/// Copies the values of `part` on a random index set of the size given by
/// `spec`.
pub fn extract_seed<R: Rng + ?Sized>(part: &TemplatePart, spec: &SeedSpec, rng: &mut R) -> Result<Seed> {
    let cells = part.geometry().len();
    let indices = sample_indices(cells, spec.resolve(cells)?, rng)?;
    Seed::from_part(part, &indices)
}

/// Per-cell majority vote over the snapshots; a zero vote sum yields `+1`.
pub fn aggregate(snapshots: &[TemplatePart]) -> Result<TemplatePart> {
    let first = snapshots.first().ok_or(Error::Empty("no snapshots to aggregate"))?;
    let geometry = first.geometry();
    let mut votes = vec![0i64; geometry.len()];
    for snapshot in snapshots {
        geometry.ensure_same(&snapshot.geometry())?;
        for (v, &s) in votes.iter_mut().zip(snapshot.spins()) {
            *v += s as i64;
        }
    }
    let spins: Vec<Spin> = votes.into_iter().map(|v| if v >= 0 { 1 } else { -1 }).collect();
    Ok(TemplatePart::from_raw(geometry, spins))
}

#[derive(Debug, Clone)]
pub struct PartReconstruction {
    /// Random completion of the seed the chain started from.
    pub initial: TemplatePart,
    pub reconstructed: TemplatePart,
}

/// Runs one chain from the seed and aggregates its snapshots.
pub fn reconstruct_part<R: Rng>(
    seed: &Seed,
    params: IsingParams,
    schedule: &RecordingSchedule,
    rng: R,
) -> Result<TemplatePart> {
    Ok(reconstruct_part_with_initial(seed, params, schedule, rng)?.reconstructed)
}

pub fn reconstruct_part_with_initial<R: Rng>(
    seed: &Seed,
    params: IsingParams,
    schedule: &RecordingSchedule,
    rng: R,
) -> Result<PartReconstruction> {
    if seed.free_count() == 0 {
        // Nothing to sample: every snapshot would be the seed itself.
        let spins = seed.entries().iter().map(|&(_, s)| s).collect();
        let part = TemplatePart::from_spins(seed.geometry(), spins)?;
        return Ok(PartReconstruction {
            initial: part.clone(),
            reconstructed: part,
        });
    }
    let run = run_chain_with_initial(seed, params, schedule, rng)?;
    Ok(PartReconstruction {
        reconstructed: aggregate(&run.snapshots)?,
        initial: run.initial,
    })
}

#[derive(Debug, Clone)]
pub struct FullReconstruction {
    pub initial: FullTemplate,
    pub reconstructed: FullTemplate,
    pub seed_real: Seed,
    pub seed_imag: Seed,
}

/// Extracts seeds from both parts of `original` and reconstructs each part
/// from its own chain.
pub fn reconstruct_full<R: Rng>(
    original: &FullTemplate,
    spec: &SeedSpec,
    params: IsingParams,
    schedule: &RecordingSchedule,
    rng: &mut R,
) -> Result<FullReconstruction> {
    let cells = original.geometry().len();
    let count = spec.resolve(cells)?;
    let real_indices = sample_indices(cells, count, rng)?;
    let imag_indices = if spec.shared_index_set {
        real_indices.clone()
    } else {
        sample_indices(cells, count, rng)?
    };
    let seed_real = Seed::from_part(original.real(), &real_indices)?;
    let seed_imag = Seed::from_part(original.imag(), &imag_indices)?;
    let real = reconstruct_part_with_initial(&seed_real, params, schedule, &mut *rng)?;
    let imag = reconstruct_part_with_initial(&seed_imag, params, schedule, &mut *rng)?;
    Ok(FullReconstruction {
        initial: FullTemplate::new(real.initial, imag.initial)?,
        reconstructed: FullTemplate::new(real.reconstructed, imag.reconstructed)?,
        seed_real,
        seed_imag,
    })
}
