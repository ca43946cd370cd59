//! Brute-force reference for small lattices.
//!
//! Enumerates every completion of a seed, weights it with
//! `exp(J_v * S_v + J_h * S_h)` computed straight from edge products, and
//! normalises. Nothing here goes through the sampler's disagreement
//! bookkeeping, so the two can be checked against each other.
//!
//! Free-bit assignments are packed into a `usize`: bit `i` is set when the
//! cell `free_indices[i]` holds `+1`.

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::lattice::{LatticeGeometry, Seed, Spin, TemplatePart};
use crate::rng::stream_rng;
use crate::sampler::{acceptance_probability, Chain, IsingParams};

pub const MAX_FREE_BITS: usize = 20;

#[derive(Debug, Clone)]
pub struct ExactDistribution {
    geometry: LatticeGeometry,
    seed: Seed,
    free_indices: Vec<usize>,
    probabilities: Vec<f64>,
    log_z: f64,
}

/// Direct edge sums `(S_v, S_h)` of a template given as a spin slice.
fn edge_sums(geometry: LatticeGeometry, spins: &[Spin]) -> (i64, i64) {
    let (rows, cols) = (geometry.rows(), geometry.cols());
    let at = |r: usize, c: usize| spins[r + c * rows] as i64;
    let mut vertical = 0;
    let mut horizontal = 0;
    for c in 0..cols {
        for r in 0..rows {
            if r + 1 < rows {
                vertical += at(r, c) * at(r + 1, c);
            }
            horizontal += at(r, c) * at(r, (c + 1) % cols);
        }
    }
    (vertical, horizontal)
}

fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = values.iter().map(|v| (v - max).exp()).sum();
    max + sum.ln()
}

fn fill(base: &mut [Spin], free: &[usize], assignment: usize) {
    for (bit, &k) in free.iter().enumerate() {
        base[k] = if assignment >> bit & 1 == 1 { 1 } else { -1 };
    }
}

/// Packs the free cells of `part` into an assignment key.
pub fn pack_assignment(part: &TemplatePart, free_indices: &[usize]) -> usize {
    free_indices
        .iter()
        .enumerate()
        .filter(|&(_, &k)| part.get(k) > 0)
        .fold(0, |acc, (bit, _)| acc | 1 << bit)
}

/// Exact Gibbs law over all completions of `seed`.
pub fn exact_distribution(seed: &Seed, params: IsingParams) -> Result<ExactDistribution> {
    let geometry = seed.geometry();
    let free_indices = seed.free_indices();
    let free = free_indices.len();
    if free > MAX_FREE_BITS {
        return Err(Error::TooManyFreeBits {
            free,
            max: MAX_FREE_BITS,
        });
    }
    let base: Vec<Spin> = seed.mask().into_iter().map(|p| p.unwrap_or(1)).collect();
    let log_weights: Vec<f64> = (0..1usize << free)
        .into_par_iter()
        .map_init(
            || base.clone(),
            |spins, assignment| {
                fill(spins, &free_indices, assignment);
                let (sv, sh) = edge_sums(geometry, spins);
                params.j_v * sv as f64 + params.j_h * sh as f64
            },
        )
        .collect();
    let log_z = log_sum_exp(&log_weights);
    let probabilities = log_weights.iter().map(|w| (w - log_z).exp()).collect();
    Ok(ExactDistribution {
        geometry,
        seed: seed.clone(),
        free_indices,
        probabilities,
        log_z,
    })
}

impl ExactDistribution {
    pub fn free_indices(&self) -> &[usize] {
        &self.free_indices
    }

    /// Probabilities indexed by packed assignment.
    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn probability(&self, assignment: usize) -> f64 {
        self.probabilities[assignment]
    }

    pub fn log_z(&self) -> f64 {
        self.log_z
    }

    pub fn state_count(&self) -> usize {
        self.probabilities.len()
    }

    pub fn template(&self, assignment: usize) -> TemplatePart {
        let mut spins: Vec<Spin> = self.seed.mask().into_iter().map(|p| p.unwrap_or(1)).collect();
        fill(&mut spins, &self.free_indices, assignment);
        TemplatePart::from_spins(self.geometry, spins).expect("spins are +-1")
    }

    /// Probability that free cell `free_indices[bit]` is `+1`.
    pub fn marginal_up(&self, bit: usize) -> f64 {
        self.probabilities
            .iter()
            .enumerate()
            .filter(|(a, _)| a >> bit & 1 == 1)
            .map(|(_, p)| p)
            .sum()
    }

    pub fn total_variation(&self, frequencies: &[f64]) -> f64 {
        0.5 * self
            .probabilities
            .iter()
            .zip(frequencies)
            .map(|(p, q)| (p - q).abs())
            .sum::<f64>()
    }

    /// Largest relative violation of `P(x) Q A(x -> x') = P(x') Q A(x' -> x)`
    /// over all single-flip pairs, with `A` taken from the sampler's own
    /// acceptance rule and `Q = 1 / free_count` on both sides.
    pub fn detailed_balance_error(&self, params: IsingParams) -> f64 {
        let free = self.free_indices.len();
        if free == 0 {
            return 0.0;
        }
        let q = 1.0 / free as f64;
        let mut worst: f64 = 0.0;
        for x in 0..self.state_count() {
            let template = self.template(x);
            let chain = Chain::from_template(template, &self.seed, params, stream_rng(0, 0))
                .expect("enumerated templates satisfy the seed");
            for (bit, &k) in self.free_indices.iter().enumerate() {
                let y = x ^ (1 << bit);
                let forward = acceptance_probability(chain.flip_log_ratio(k).expect("free cell"));
                let mut flipped = chain.lattice().clone();
                flipped.flip(k);
                let back_chain = Chain::from_template(flipped, &self.seed, params, stream_rng(0, 0))
                    .expect("flip keeps the seed");
                let backward = acceptance_probability(back_chain.flip_log_ratio(k).expect("free cell"));
                let lhs = self.probabilities[x] * q * forward;
                let rhs = self.probabilities[y] * q * backward;
                let scale = lhs.abs().max(rhs.abs());
                if scale > 0.0 {
                    worst = worst.max((lhs - rhs).abs() / scale);
                }
            }
        }
        worst
    }
}

/// Frequencies of a Metropolis chain's states, indexed like
/// [`ExactDistribution::probabilities`]. After `burn_in` steps, the state is
/// recorded `samples` times with `thin` steps between records.
pub fn empirical_distribution<R: Rng>(
    seed: &Seed,
    params: IsingParams,
    burn_in: u64,
    samples: u64,
    thin: u64,
    rng: R,
) -> Result<Vec<f64>> {
    let free_indices = seed.free_indices();
    if free_indices.len() > MAX_FREE_BITS {
        return Err(Error::TooManyFreeBits {
            free: free_indices.len(),
            max: MAX_FREE_BITS,
        });
    }
    if samples == 0 || thin == 0 {
        return Err(Error::Empty("samples and thinning must be positive"));
    }
    let mut chain = Chain::new(seed, params, rng);
    chain.run(burn_in)?;
    let mut counts = vec![0u64; 1 << free_indices.len()];
    let mut key = pack_assignment(chain.lattice(), &free_indices);
    let mut bit_of = vec![usize::MAX; seed.geometry().len()];
    for (bit, &k) in free_indices.iter().enumerate() {
        bit_of[k] = bit;
    }
    for i in 0..samples {
        if i > 0 {
            for _ in 0..thin {
                if let Some(k) = chain.step_flip()? {
                    key ^= 1 << bit_of[k];
                }
            }
        }
        counts[key] += 1;
    }
    Ok(counts
        .into_iter()
        .map(|c| c as f64 / samples as f64)
        .collect())
}
