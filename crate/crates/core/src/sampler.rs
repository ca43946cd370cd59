//! Seeded Ising model and its Metropolis sampler.
//!
//! The model is the Gibbs law `P(x) ~ exp(J_v * S_v(x) + J_h * S_h(x))` over
//! templates that agree with a seed, where `S_v`/`S_h` sum `x_i * x_j` over
//! vertical/horizontal edges. Up to a constant it equals
//! `pi(x) = exp(-2 J_v d_v - 2 J_h d_h)` with `d_v`/`d_h` the numbers of
//! disagreeing edges, which is the form the sampler works with.

use std::fmt;
use std::str::FromStr;

use rand::distr::Open01;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{DisagreementCounts, LatticeGeometry, Seed, Spin, TemplatePart};

/// Coupling pair `(J_v, J_h)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IsingParams {
    pub j_v: f64,
    pub j_h: f64,
}

impl IsingParams {
    /// Couplings that minimised reconstruction error in the original grid
    /// search over iris templates.
    pub const IRIS: IsingParams = IsingParams { j_v: 0.2, j_h: 0.3 };

    pub fn new(j_v: f64, j_h: f64) -> Result<Self> {
        if !j_v.is_finite() || !j_h.is_finite() {
            return Err(Error::InvalidSeedSpec(format!(
                "couplings must be finite, got ({j_v}, {j_h})"
            )));
        }
        Ok(Self { j_v, j_h })
    }
}

/// `log pi(x) = -2 J_v d_v - 2 J_h d_h`.
pub fn unnormalized_log_prob(part: &TemplatePart, params: IsingParams) -> f64 {
    log_prob_from_counts(part.disagreement_counts(), params)
}

pub fn log_prob_from_counts(counts: DisagreementCounts, params: IsingParams) -> f64 {
    -2.0 * params.j_v * counts.vertical as f64 - 2.0 * params.j_h * counts.horizontal as f64
}

/// `min(1, exp(log_ratio))`.
#[inline]
pub fn acceptance_probability(log_ratio: f64) -> f64 {
    if log_ratio >= 0.0 {
        1.0
    } else {
        log_ratio.exp()
    }
}

/// Increasing iteration counts at which the chain state is recorded.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RecordingSchedule {
    checkpoints: Vec<u64>,
}

impl RecordingSchedule {
    pub fn new(checkpoints: Vec<u64>) -> Result<Self> {
        if checkpoints.is_empty() {
            return Err(Error::InvalidSchedule("no checkpoints".into()));
        }
        if let Some(w) = checkpoints.windows(2).find(|w| w[0] >= w[1]) {
            return Err(Error::InvalidSchedule(format!(
                "checkpoints must increase strictly ({} then {})",
                w[0], w[1]
            )));
        }
        Ok(Self { checkpoints })
    }

    /// `spacing * (1, 2, ..., count)`.
    pub fn evenly_spaced(spacing: u64, count: usize) -> Result<Self> {
        if spacing == 0 {
            return Err(Error::InvalidSchedule("spacing must be positive".into()));
        }
        Self::new((1..=count as u64).map(|i| i * spacing).collect())
    }

    /// 100 snapshots spaced 10^4 iterations apart.
    pub fn iris_default() -> Self {
        Self::evenly_spaced(10_000, 100).expect("valid schedule")
    }

    pub fn checkpoints(&self) -> &[u64] {
        &self.checkpoints
    }

    pub fn len(&self) -> usize {
        self.checkpoints.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn last(&self) -> u64 {
        *self.checkpoints.last().expect("nonempty")
    }
}

/// Serialized as its string form; a plain list of checkpoints is also
/// accepted when reading.
impl Serialize for RecordingSchedule {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for RecordingSchedule {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Text(String),
            List(Vec<u64>),
        }
        match Repr::deserialize(deserializer)? {
            Repr::Text(s) => s.parse(),
            Repr::List(v) => Self::new(v),
        }
        .map_err(serde::de::Error::custom)
    }
}

/// Accepts either `SPACINGxCOUNT` (e.g. `10000x100`) or a comma list.
impl FromStr for RecordingSchedule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = |_| Error::InvalidSchedule(format!("cannot parse {s:?}"));
        if let Some((spacing, count)) = s.split_once('x') {
            let spacing = spacing.trim().parse::<u64>().map_err(bad)?;
            let count = count.trim().parse::<usize>().map_err(bad)?;
            return Self::evenly_spaced(spacing, count);
        }
        let checkpoints = s
            .split(',')
            .map(|p| p.trim().parse::<u64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(bad)?;
        Self::new(checkpoints)
    }
}

impl fmt::Display for RecordingSchedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let first = self.checkpoints[0];
        let even = first > 0
            && self
                .checkpoints
                .iter()
                .enumerate()
                .all(|(i, &c)| c == first * (i as u64 + 1));
        if even {
            write!(f, "{}x{}", first, self.checkpoints.len())
        } else {
            let parts: Vec<String> = self.checkpoints.iter().map(u64::to_string).collect();
            write!(f, "{}", parts.join(","))
        }
    }
}

/// Edge tallies around one cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LocalCounts {
    pub disagree_v: u8,
    pub agree_v: u8,
    pub disagree_h: u8,
    pub agree_h: u8,
}

impl LocalCounts {
    /// `2 J_v (d_v - a_v) + 2 J_h (d_h - a_h)`: change of `log pi` when the
    /// cell is flipped.
    #[inline]
    pub fn flip_log_ratio(&self, params: IsingParams) -> f64 {
        2.0 * params.j_v * (self.disagree_v as f64 - self.agree_v as f64)
            + 2.0 * params.j_h * (self.disagree_h as f64 - self.agree_h as f64)
    }
}

fn local_counts(lattice: &TemplatePart, k: usize) -> LocalCounts {
    let geometry = lattice.geometry();
    let s = lattice.get(k);
    let (vertical, horizontal) = geometry.neighbor_indices(k);
    let mut c = LocalCounts {
        disagree_v: 0,
        agree_v: 0,
        disagree_h: 0,
        agree_h: 0,
    };
    for v in vertical.into_iter().flatten() {
        if lattice.get(v) == s {
            c.agree_v += 1;
        } else {
            c.disagree_v += 1;
        }
    }
    for h in horizontal {
        if lattice.get(h) == s {
            c.agree_h += 1;
        } else {
            c.disagree_h += 1;
        }
    }
    c
}

/// Random completion of a seed: pinned cells take the seed value, the rest
/// are independent fair coin flips.
pub fn initial_template<R: Rng + ?Sized>(seed: &Seed, rng: &mut R) -> TemplatePart {
    let spins = seed
        .mask()
        .into_iter()
        .map(|pin| pin.unwrap_or_else(|| if rng.random::<bool>() { 1 } else { -1 }))
        .collect();
    TemplatePart::from_raw(seed.geometry(), spins)
}

/// Mutable state of one Metropolis chain over the seed-consistent templates.
#[derive(Debug, Clone)]
pub struct Chain<R> {
    lattice: TemplatePart,
    pinned: Vec<bool>,
    free: Vec<usize>,
    params: IsingParams,
    counts: DisagreementCounts,
    iteration: u64,
    accepted: u64,
    /// Acceptance probability indexed by `[vertical degree][d_v][d_h]`.
    accept_table: [[[f64; 3]; 3]; 3],
    rng: R,
}

impl<R: Rng> Chain<R> {
    /// Starts from a random completion of `seed`.
    pub fn new(seed: &Seed, params: IsingParams, mut rng: R) -> Self {
        let lattice = initial_template(seed, &mut rng);
        Self::build(lattice, seed, params, rng)
    }

    /// Starts from a given template, which must agree with the seed.
    pub fn from_template(
        lattice: TemplatePart,
        seed: &Seed,
        params: IsingParams,
        rng: R,
    ) -> Result<Self> {
        seed.geometry().ensure_same(&lattice.geometry())?;
        if let Some(&(k, _)) = seed.entries().iter().find(|&&(k, s)| lattice.get(k) != s) {
            return Err(Error::SeededIndex(k));
        }
        Ok(Self::build(lattice, seed, params, rng))
    }

    fn build(lattice: TemplatePart, seed: &Seed, params: IsingParams, rng: R) -> Self {
        let mut pinned = vec![false; lattice.geometry().len()];
        for k in seed.indices() {
            pinned[k] = true;
        }
        let mut accept_table = [[[0.0; 3]; 3]; 3];
        for (degree, by_dv) in accept_table.iter_mut().enumerate() {
            for (dv, by_dh) in by_dv.iter_mut().enumerate() {
                for (dh, p) in by_dh.iter_mut().enumerate() {
                    if dv <= degree {
                        let local = LocalCounts {
                            disagree_v: dv as u8,
                            agree_v: (degree - dv) as u8,
                            disagree_h: dh as u8,
                            agree_h: (2 - dh) as u8,
                        };
                        *p = acceptance_probability(local.flip_log_ratio(params));
                    }
                }
            }
        }
        Self {
            counts: lattice.disagreement_counts(),
            free: seed.free_indices(),
            lattice,
            pinned,
            params,
            iteration: 0,
            accepted: 0,
            accept_table,
            rng,
        }
    }

    pub fn lattice(&self) -> &TemplatePart {
        &self.lattice
    }

    pub fn params(&self) -> IsingParams {
        self.params
    }

    /// Incrementally maintained disagreement counts of the current lattice.
    pub fn counts(&self) -> DisagreementCounts {
        self.counts
    }

    pub fn iteration(&self) -> u64 {
        self.iteration
    }

    pub fn accepted(&self) -> u64 {
        self.accepted
    }

    pub fn free_indices(&self) -> &[usize] {
        &self.free
    }

    pub fn log_prob(&self) -> f64 {
        log_prob_from_counts(self.counts, self.params)
    }

    /// Sum of spins divided by the number of cells.
    pub fn magnetization(&self) -> f64 {
        let total: i64 = self.lattice.spins().iter().map(|&s| s as i64).sum();
        total as f64 / self.lattice.spins().len() as f64
    }

    pub fn local_counts(&self, k: usize) -> Result<LocalCounts> {
        self.lattice.geometry().check_index(k)?;
        Ok(local_counts(&self.lattice, k))
    }

    /// Log acceptance ratio `log pi(x') - log pi(x)` for flipping cell `k`.
    pub fn flip_log_ratio(&self, k: usize) -> Result<f64> {
        self.lattice.geometry().check_index(k)?;
        if self.pinned[k] {
            return Err(Error::SeededIndex(k));
        }
        Ok(local_counts(&self.lattice, k).flip_log_ratio(self.params))
    }

    /// One proposal at a uniformly chosen free cell. Returns whether the
    /// flip was accepted; the iteration counter advances either way.
    pub fn step(&mut self) -> Result<bool> {
        Ok(self.step_flip()?.is_some())
    }

    /// Like [`Chain::step`], but reports the flipped cell on acceptance.
    pub fn step_flip(&mut self) -> Result<Option<usize>> {
        if self.free.is_empty() {
            return Err(Error::NoFreeSites);
        }
        let k = self.free[self.rng.random_range(0..self.free.len())];
        let local = local_counts(&self.lattice, k);
        let degree = (local.disagree_v + local.agree_v) as usize;
        let threshold =
            self.accept_table[degree][local.disagree_v as usize][local.disagree_h as usize];
        let u: f64 = self.rng.sample(Open01);
        self.iteration += 1;
        if u < threshold {
            self.lattice.flip(k);
            // Flipping swaps the agreeing and disagreeing edges at k.
            self.counts.vertical =
                self.counts.vertical + local.agree_v as usize - local.disagree_v as usize;
            self.counts.horizontal =
                self.counts.horizontal + local.agree_h as usize - local.disagree_h as usize;
            self.accepted += 1;
            Ok(Some(k))
        } else {
            Ok(None)
        }
    }

    pub fn run(&mut self, steps: u64) -> Result<()> {
        for _ in 0..steps {
            self.step()?;
        }
        Ok(())
    }

    /// Advances the chain through `schedule`, cloning the lattice at each
    /// checkpoint. Checkpoints are absolute iteration counts and must not lie
    /// behind the current iteration.
    pub fn record(&mut self, schedule: &RecordingSchedule) -> Result<Vec<TemplatePart>> {
        let mut snapshots = Vec::with_capacity(schedule.len());
        for &checkpoint in schedule.checkpoints() {
            if checkpoint < self.iteration {
                return Err(Error::InvalidSchedule(format!(
                    "checkpoint {checkpoint} is behind iteration {}",
                    self.iteration
                )));
            }
            self.run(checkpoint - self.iteration)?;
            snapshots.push(self.lattice.clone());
        }
        Ok(snapshots)
    }

    pub fn into_lattice(self) -> TemplatePart {
        self.lattice
    }
}

/// Snapshots of one chain at the schedule's checkpoints, together with the
/// initial template it started from.
#[derive(Debug, Clone)]
pub struct ChainRun {
    pub initial: TemplatePart,
    pub snapshots: Vec<TemplatePart>,
}

/// Runs one chain from a random completion of `seed` and records it at every
/// checkpoint.
pub fn run_chain<R: Rng>(
    seed: &Seed,
    params: IsingParams,
    schedule: &RecordingSchedule,
    rng: R,
) -> Result<Vec<TemplatePart>> {
    Ok(run_chain_with_initial(seed, params, schedule, rng)?.snapshots)
}

pub fn run_chain_with_initial<R: Rng>(
    seed: &Seed,
    params: IsingParams,
    schedule: &RecordingSchedule,
    rng: R,
) -> Result<ChainRun> {
    let mut chain = Chain::new(seed, params, rng);
    let initial = chain.lattice().clone();
    let snapshots = chain.record(schedule)?;
    Ok(ChainRun { initial, snapshots })
}

/// Extension, not the default sampling scheme: one fresh chain per
/// checkpoint, each run from its own random start for `n_j` iterations.
pub fn run_independent_chains<R: Rng>(
    seed: &Seed,
    params: IsingParams,
    schedule: &RecordingSchedule,
    rng: &mut R,
) -> Result<Vec<TemplatePart>> {
    schedule
        .checkpoints()
        .iter()
        .map(|&n| {
            let mut chain = Chain::new(seed, params, &mut *rng);
            chain.run(n)?;
            Ok(chain.into_lattice())
        })
        .collect()
}

/// Draws a template from the unseeded model by running `steps` iterations
/// from a uniformly random start.
pub fn sample_unseeded<R: Rng>(
    geometry: LatticeGeometry,
    params: IsingParams,
    steps: u64,
    rng: R,
) -> Result<TemplatePart> {
    let mut chain = Chain::new(&Seed::empty(geometry), params, rng);
    chain.run(steps)?;
    Ok(chain.into_lattice())
}

/// Pins every cell of `part`.
pub fn full_seed(part: &TemplatePart) -> Seed {
    let entries: Vec<(usize, Spin)> = part.spins().iter().copied().enumerate().collect();
    Seed::new(part.geometry(), entries).expect("indices are distinct and in range")
}
