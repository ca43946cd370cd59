//! Lattice geometry, template and seed types, edge accounting and
//! Hamming-distance matching.
//!
//! Cells of an `rows x cols` lattice are addressed by a single 0-based index
//! in column-major order: `(row, col) -> row + col * rows`. Vertical edges
//! join cells directly above/below each other and do not wrap. Horizontal
//! edges join neighbouring columns of a row and wrap, so the last column is
//! adjacent to the first.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Spin value of a lattice site: `-1` or `+1`.
pub type Spin = i8;

/// Maps a stored template bit (`0`/`1`) to a spin.
#[inline]
pub fn spin_from_bit(bit: bool) -> Spin {
    if bit {
        1
    } else {
        -1
    }
}

#[inline]
pub fn bit_from_spin(spin: Spin) -> bool {
    spin > 0
}

fn check_spin(value: i64) -> Result<Spin> {
    match value {
        -1 | 1 => Ok(value as Spin),
        other => Err(Error::InvalidSpin(other)),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LatticeGeometry {
    rows: usize,
    cols: usize,
}

impl LatticeGeometry {
    /// Real or imaginary half of a standard 8x256 iris code.
    pub const IRIS_PART: LatticeGeometry = LatticeGeometry { rows: 8, cols: 128 };

    pub fn new(rows: usize, cols: usize) -> Result<Self> {
        // With two columns the wrap edge would repeat the inner edge.
        if rows == 0 || cols < 3 {
            return Err(Error::InvalidGeometry { rows, cols });
        }
        Ok(Self { rows, cols })
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Number of cells, `rows * cols`.
    #[inline]
    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn vertical_edge_count(&self) -> usize {
        (self.rows - 1) * self.cols
    }

    pub fn horizontal_edge_count(&self) -> usize {
        self.rows * self.cols
    }

    /// Column-major index of `(row, col)`; both 0-based.
    #[inline]
    pub fn index(&self, row: usize, col: usize) -> usize {
        debug_assert!(row < self.rows && col < self.cols);
        row + col * self.rows
    }

    #[inline]
    pub fn position(&self, index: usize) -> (usize, usize) {
        (index % self.rows, index / self.rows)
    }

    pub fn check_index(&self, index: usize) -> Result<()> {
        if index < self.len() {
            Ok(())
        } else {
            Err(Error::IndexOutOfRange {
                index,
                len: self.len(),
            })
        }
    }

    /// Neighbours of `index` with their edge direction.
    ///
    /// Every cell has two horizontal neighbours (left, right with wrap) and
    /// one or two vertical ones depending on whether it sits on the top or
    /// bottom row.
    pub fn neighbors(&self, index: usize) -> Result<Vec<Neighbor>> {
        self.check_index(index)?;
        let mut out = Vec::with_capacity(4);
        let (vertical, horizontal) = self.neighbor_indices(index);
        for v in vertical.into_iter().flatten() {
            out.push(Neighbor {
                index: v,
                direction: Direction::Vertical,
            });
        }
        for h in horizontal {
            out.push(Neighbor {
                index: h,
                direction: Direction::Horizontal,
            });
        }
        Ok(out)
    }

    /// `([above, below], [left, right])`, unchecked.
    #[inline]
    pub(crate) fn neighbor_indices(&self, index: usize) -> ([Option<usize>; 2], [usize; 2]) {
        let len = self.len();
        let row = index % self.rows;
        let above = (row > 0).then(|| index - 1);
        let below = (row + 1 < self.rows).then(|| index + 1);
        let left = (index + len - self.rows) % len;
        let right = (index + self.rows) % len;
        ([above, below], [left, right])
    }

    pub(crate) fn ensure_same(&self, other: &LatticeGeometry) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::GeometryMismatch {
                left: self.to_string(),
                right: other.to_string(),
            })
        }
    }
}

impl fmt::Display for LatticeGeometry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.rows, self.cols)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Direction {
    Vertical,
    Horizontal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Neighbor {
    pub index: usize,
    pub direction: Direction,
}

/// Numbers of disagreeing (`x_i * x_j = -1`) vertical and horizontal edges.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DisagreementCounts {
    pub vertical: usize,
    pub horizontal: usize,
}

/// One `rows x cols` half (real or imaginary) of a template.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TemplatePart {
    geometry: LatticeGeometry,
    spins: Vec<Spin>,
}

impl TemplatePart {
    pub fn from_spins(geometry: LatticeGeometry, spins: Vec<Spin>) -> Result<Self> {
        if spins.len() != geometry.len() {
            return Err(Error::LengthMismatch {
                expected: geometry.len(),
                actual: spins.len(),
            });
        }
        for &s in &spins {
            check_spin(s as i64)?;
        }
        Ok(Self { geometry, spins })
    }

    /// Builds a part from stored bits in column-major order (`false -> -1`).
    pub fn from_bits(geometry: LatticeGeometry, bits: &[bool]) -> Result<Self> {
        if bits.len() != geometry.len() {
            return Err(Error::LengthMismatch {
                expected: geometry.len(),
                actual: bits.len(),
            });
        }
        Ok(Self {
            geometry,
            spins: bits.iter().map(|&b| spin_from_bit(b)).collect(),
        })
    }

    pub fn uniform(geometry: LatticeGeometry, spin: Spin) -> Result<Self> {
        let spin = check_spin(spin as i64)?;
        Ok(Self {
            geometry,
            spins: vec![spin; geometry.len()],
        })
    }

    /// Caller guarantees every entry is `+-1` and the length matches.
    pub(crate) fn from_raw(geometry: LatticeGeometry, spins: Vec<Spin>) -> Self {
        debug_assert_eq!(spins.len(), geometry.len());
        Self { geometry, spins }
    }

    #[inline]
    pub fn geometry(&self) -> LatticeGeometry {
        self.geometry
    }

    #[inline]
    pub fn spins(&self) -> &[Spin] {
        &self.spins
    }

    #[inline]
    pub fn get(&self, index: usize) -> Spin {
        self.spins[index]
    }

    #[inline]
    pub fn at(&self, row: usize, col: usize) -> Spin {
        self.spins[self.geometry.index(row, col)]
    }

    #[inline]
    pub(crate) fn flip(&mut self, index: usize) {
        self.spins[index] = -self.spins[index];
    }

    pub fn bits(&self) -> impl Iterator<Item = bool> + '_ {
        self.spins.iter().map(|&s| bit_from_spin(s))
    }

    pub fn negated(&self) -> Self {
        Self {
            geometry: self.geometry,
            spins: self.spins.iter().map(|&s| -s).collect(),
        }
    }

    /// Circularly shifts the columns right by `shift` (negative shifts go
    /// left): column `c` of the input becomes column `c + shift` (mod cols).
    pub fn rotate_columns(&self, shift: isize) -> Self {
        let cols = self.geometry.cols as isize;
        let amount = shift.rem_euclid(cols) as usize * self.geometry.rows;
        let mut spins = self.spins.clone();
        spins.rotate_right(amount);
        Self {
            geometry: self.geometry,
            spins,
        }
    }

    pub fn disagreement_counts(&self) -> DisagreementCounts {
        let rows = self.geometry.rows;
        let len = self.spins.len();
        let mut counts = DisagreementCounts::default();
        for k in 0..len {
            let s = self.spins[k];
            if k % rows + 1 < rows && s != self.spins[k + 1] {
                counts.vertical += 1;
            }
            if s != self.spins[(k + rows) % len] {
                counts.horizontal += 1;
            }
        }
        counts
    }

    /// Number of positions at which the two parts differ.
    pub fn differing_bits(&self, other: &TemplatePart) -> Result<usize> {
        self.geometry.ensure_same(&other.geometry)?;
        Ok(self
            .spins
            .iter()
            .zip(&other.spins)
            .filter(|(a, b)| a != b)
            .count())
    }
}

/// Free function form of [`TemplatePart::disagreement_counts`].
pub fn disagreement_counts(part: &TemplatePart) -> DisagreementCounts {
    part.disagreement_counts()
}

/// A full template: real and imaginary parts over one geometry.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FullTemplate {
    real: TemplatePart,
    imag: TemplatePart,
}

impl FullTemplate {
    pub fn new(real: TemplatePart, imag: TemplatePart) -> Result<Self> {
        real.geometry.ensure_same(&imag.geometry)?;
        Ok(Self { real, imag })
    }

    pub fn real(&self) -> &TemplatePart {
        &self.real
    }

    pub fn imag(&self) -> &TemplatePart {
        &self.imag
    }

    pub fn into_parts(self) -> (TemplatePart, TemplatePart) {
        (self.real, self.imag)
    }

    pub fn geometry(&self) -> LatticeGeometry {
        self.real.geometry
    }

    pub fn bit_count(&self) -> usize {
        2 * self.real.geometry.len()
    }

    pub fn negated(&self) -> Self {
        Self {
            real: self.real.negated(),
            imag: self.imag.negated(),
        }
    }

    /// Rotates both parts by the same column shift.
    pub fn rotate_columns(&self, shift: isize) -> Self {
        Self {
            real: self.real.rotate_columns(shift),
            imag: self.imag.rotate_columns(shift),
        }
    }

    pub fn differing_bits(&self, other: &FullTemplate) -> Result<usize> {
        Ok(self.real.differing_bits(&other.real)? + self.imag.differing_bits(&other.imag)?)
    }
}

/// Fraction of the `2 * rows * cols` bits at which `a` and `b` differ.
pub fn hamming_distance(a: &FullTemplate, b: &FullTemplate) -> Result<f64> {
    let diff = a.differing_bits(b)?;
    Ok(diff as f64 / a.bit_count() as f64)
}

/// Result of rotation-tolerant matching.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotationMatch {
    pub distance: f64,
    /// Column shift `s` for which `b` best matches `a.rotate_columns(s)`.
    pub shift: isize,
    pub max_shift: usize,
}

/// Minimum Hamming distance over column shifts in `-max_shift..=max_shift`.
///
/// The reported shift is the rotation that carries `a` onto `b`, so for
/// `b = a.rotate_columns(3)` the result is `(0.0, 3)`. Ties go to the smallest
/// `|shift|`, then to the negative shift.
pub fn hamming_distance_min_rotation(
    a: &FullTemplate,
    b: &FullTemplate,
    max_shift: usize,
) -> Result<RotationMatch> {
    let geometry = a.geometry();
    geometry.ensure_same(&b.geometry())?;
    if max_shift >= geometry.cols() {
        return Err(Error::RotationRange {
            max_shift,
            cols: geometry.cols(),
        });
    }
    let bits = a.bit_count() as f64;
    let mut best: Option<(usize, isize)> = None;
    // Visit shifts in tie-break order: 0, -1, +1, -2, +2, ...
    let order = std::iter::once(0isize).chain(
        (1..=max_shift as isize).flat_map(|s| [-s, s]),
    );
    for shift in order {
        let diff = a.rotate_columns(shift).differing_bits(b)?;
        if best.is_none_or(|(d, _)| diff < d) {
            best = Some((diff, shift));
        }
    }
    let (diff, shift) = best.expect("shift range is never empty");
    Ok(RotationMatch {
        distance: diff as f64 / bits,
        shift,
        max_shift,
    })
}

/// Partial template data: pinned spin values on an index subset.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Seed {
    geometry: LatticeGeometry,
    /// Sorted by index.
    entries: Vec<(usize, Spin)>,
}

impl Seed {
    pub fn new(
        geometry: LatticeGeometry,
        entries: impl IntoIterator<Item = (usize, Spin)>,
    ) -> Result<Self> {
        let mut entries: Vec<(usize, Spin)> = entries.into_iter().collect();
        for &(k, s) in &entries {
            geometry.check_index(k)?;
            check_spin(s as i64)?;
        }
        entries.sort_unstable_by_key(|&(k, _)| k);
        if let Some(w) = entries.windows(2).find(|w| w[0].0 == w[1].0) {
            return Err(Error::DuplicateSeedIndex(w[0].0));
        }
        Ok(Self { geometry, entries })
    }

    pub fn empty(geometry: LatticeGeometry) -> Self {
        Self {
            geometry,
            entries: Vec::new(),
        }
    }

    /// Copies the values of `part` at `indices`.
    pub fn from_part(part: &TemplatePart, indices: &[usize]) -> Result<Self> {
        Self::new(
            part.geometry(),
            indices.iter().map(|&k| (k, part.get(k))),
        )
    }

    pub fn geometry(&self) -> LatticeGeometry {
        self.geometry
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[(usize, Spin)] {
        &self.entries
    }

    pub fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.entries.iter().map(|&(k, _)| k)
    }

    pub fn get(&self, index: usize) -> Option<Spin> {
        self.entries
            .binary_search_by_key(&index, |&(k, _)| k)
            .ok()
            .map(|i| self.entries[i].1)
    }

    /// Per-cell pin values, `None` for free cells.
    pub fn mask(&self) -> Vec<Option<Spin>> {
        let mut mask = vec![None; self.geometry.len()];
        for &(k, s) in &self.entries {
            mask[k] = Some(s);
        }
        mask
    }

    /// Indices not pinned by the seed, ascending.
    pub fn free_indices(&self) -> Vec<usize> {
        let mut pinned = self.entries.iter().map(|&(k, _)| k).peekable();
        (0..self.geometry.len())
            .filter(|&k| {
                if pinned.peek() == Some(&k) {
                    pinned.next();
                    false
                } else {
                    true
                }
            })
            .collect()
    }

    pub fn free_count(&self) -> usize {
        self.geometry.len() - self.entries.len()
    }

    pub fn negated(&self) -> Self {
        Self {
            geometry: self.geometry,
            entries: self.entries.iter().map(|&(k, s)| (k, -s)).collect(),
        }
    }

    /// Whether `part` lies in the seed's consistent set.
    pub fn is_satisfied_by(&self, part: &TemplatePart) -> bool {
        part.geometry() == self.geometry && self.entries.iter().all(|&(k, s)| part.get(k) == s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn iris() -> LatticeGeometry {
        LatticeGeometry::IRIS_PART
    }

    fn random_part(geometry: LatticeGeometry, state: &mut u64) -> TemplatePart {
        let spins = (0..geometry.len())
            .map(|_| {
                *state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                if (*state >> 33) & 1 == 1 {
                    1
                } else {
                    -1
                }
            })
            .collect();
        TemplatePart::from_spins(geometry, spins).unwrap()
    }

    #[test]
    fn rejects_degenerate_geometry() {
        assert!(LatticeGeometry::new(0, 10).is_err());
        assert!(LatticeGeometry::new(4, 2).is_err());
        assert!(LatticeGeometry::new(1, 3).is_ok());
    }

    #[test]
    fn edge_counts() {
        let g = iris();
        assert_eq!(g.vertical_edge_count(), 8 * 128 - 128);
        assert_eq!(g.horizontal_edge_count(), 8 * 128);
    }

    #[test]
    fn interior_cell_has_four_neighbors() {
        let g = iris();
        let n = g.neighbors(g.index(3, 9)).unwrap();
        assert_eq!(n.len(), 4);
        assert_eq!(n.iter().filter(|x| x.direction == Direction::Vertical).count(), 2);
    }

    #[test]
    fn top_row_cell_has_one_vertical_neighbor() {
        let g = iris();
        let n = g.neighbors(g.index(0, 9)).unwrap();
        assert_eq!(n.len(), 3);
        let vertical: Vec<_> = n.iter().filter(|x| x.direction == Direction::Vertical).collect();
        assert_eq!(vertical.len(), 1);
        assert_eq!(g.position(vertical[0].index), (1, 9));
    }

    #[test]
    fn last_column_wraps_to_first() {
        let g = iris();
        let n = g.neighbors(g.index(2, 127)).unwrap();
        let mut cols: Vec<usize> = n
            .iter()
            .filter(|x| x.direction == Direction::Horizontal)
            .map(|x| g.position(x.index).1)
            .collect();
        cols.sort();
        assert_eq!(cols, vec![0, 126]);
    }

    #[test]
    fn neighbors_out_of_range() {
        assert!(matches!(
            iris().neighbors(1024),
            Err(Error::IndexOutOfRange { .. })
        ));
    }

    #[test]
    fn neighbor_relation_is_symmetric_and_degree_sums_match() {
        for (rows, cols) in [(1, 3), (2, 5), (3, 4), (8, 128)] {
            let g = LatticeGeometry::new(rows, cols).unwrap();
            let mut h_total = 0;
            let mut v_total = 0;
            for k in 0..g.len() {
                for nb in g.neighbors(k).unwrap() {
                    match nb.direction {
                        Direction::Vertical => v_total += 1,
                        Direction::Horizontal => h_total += 1,
                    }
                    assert!(g
                        .neighbors(nb.index)
                        .unwrap()
                        .contains(&Neighbor { index: k, direction: nb.direction }));
                }
            }
            assert_eq!(h_total, 2 * g.len());
            assert_eq!(v_total, 2 * (g.len() - cols));
        }
    }

    #[test]
    fn uniform_part_has_no_disagreements() {
        let part = TemplatePart::uniform(iris(), 1).unwrap();
        assert_eq!(part.disagreement_counts(), DisagreementCounts::default());
    }

    #[test]
    fn alternating_row_counts_wrap_edge() {
        let g = LatticeGeometry::new(1, 4).unwrap();
        let part = TemplatePart::from_spins(g, vec![1, -1, 1, -1]).unwrap();
        assert_eq!(
            part.disagreement_counts(),
            DisagreementCounts { vertical: 0, horizontal: 4 }
        );
    }

    #[test]
    fn energy_identity_against_direct_edge_sums() {
        let mut state = 7u64;
        let g = iris();
        for _ in 0..20 {
            let part = random_part(g, &mut state);
            let (mut sum_v, mut sum_h) = (0i64, 0i64);
            for r in 0..g.rows() {
                for c in 0..g.cols() {
                    let s = part.at(r, c) as i64;
                    if r + 1 < g.rows() {
                        sum_v += s * part.at(r + 1, c) as i64;
                    }
                    sum_h += s * part.at(r, (c + 1) % g.cols()) as i64;
                }
            }
            let d = part.disagreement_counts();
            let mn = g.len() as i64;
            assert_eq!(sum_v, mn - g.cols() as i64 - 2 * d.vertical as i64);
            assert_eq!(sum_h, mn - 2 * d.horizontal as i64);
        }
    }

    #[test]
    fn rejects_bad_spins() {
        let g = LatticeGeometry::new(1, 3).unwrap();
        assert!(TemplatePart::from_spins(g, vec![1, 0, -1]).is_err());
        assert!(TemplatePart::from_spins(g, vec![1, 1]).is_err());
    }

    #[test]
    fn hamming_basics() {
        let mut state = 3u64;
        let a = FullTemplate::new(random_part(iris(), &mut state), random_part(iris(), &mut state))
            .unwrap();
        assert_eq!(hamming_distance(&a, &a).unwrap(), 0.0);
        assert_eq!(hamming_distance(&a, &a.negated()).unwrap(), 1.0);
        let mut imag = a.imag().clone();
        imag.flip(17);
        let b = FullTemplate::new(a.real().clone(), imag).unwrap();
        assert_eq!(hamming_distance(&a, &b).unwrap(), 1.0 / 2048.0);
    }

    #[test]
    fn hamming_rejects_geometry_mismatch() {
        let a = FullTemplate::new(
            TemplatePart::uniform(iris(), 1).unwrap(),
            TemplatePart::uniform(iris(), 1).unwrap(),
        )
        .unwrap();
        let g = LatticeGeometry::new(8, 64).unwrap();
        let b = FullTemplate::new(
            TemplatePart::uniform(g, 1).unwrap(),
            TemplatePart::uniform(g, 1).unwrap(),
        )
        .unwrap();
        assert!(matches!(
            hamming_distance(&a, &b),
            Err(Error::GeometryMismatch { .. })
        ));
    }

    #[test]
    fn rotation_recovers_shift() {
        let mut state = 11u64;
        let a = FullTemplate::new(random_part(iris(), &mut state), random_part(iris(), &mut state))
            .unwrap();
        let b = a.rotate_columns(3);
        let m = hamming_distance_min_rotation(&a, &b, 8).unwrap();
        assert_eq!((m.distance, m.shift), (0.0, 3));
        let back = hamming_distance_min_rotation(&b, &a, 8).unwrap();
        assert_eq!((back.distance, back.shift), (0.0, -3));
        let zero = hamming_distance_min_rotation(&a, &b, 0).unwrap();
        assert_eq!(zero.distance, hamming_distance(&a, &b).unwrap());
        assert_eq!(zero.shift, 0);
        assert!(hamming_distance_min_rotation(&a, &b, 128).is_err());
    }

    #[test]
    fn rotation_tie_prefers_negative() {
        // A single column pattern that repeats with period 2 matches at
        // shifts -1 and +1 equally well.
        let g = LatticeGeometry::new(1, 4).unwrap();
        let a = FullTemplate::new(
            TemplatePart::from_spins(g, vec![1, -1, 1, -1]).unwrap(),
            TemplatePart::from_spins(g, vec![1, 1, 1, 1]).unwrap(),
        )
        .unwrap();
        let b = a.rotate_columns(1);
        let m = hamming_distance_min_rotation(&a, &b, 1).unwrap();
        assert_eq!((m.distance, m.shift), (0.0, -1));
    }

    #[test]
    fn rotate_columns_moves_columns_right() {
        let g = LatticeGeometry::new(2, 3).unwrap();
        // column-major: col0 = (1,1), col1 = (-1,-1), col2 = (1,-1)
        let part = TemplatePart::from_spins(g, vec![1, 1, -1, -1, 1, -1]).unwrap();
        let r = part.rotate_columns(1);
        assert_eq!(r.at(0, 1), 1);
        assert_eq!(r.at(1, 0), -1);
        assert_eq!(r.at(0, 2), -1);
        assert_eq!(part.rotate_columns(-1).rotate_columns(1), part);
        assert_eq!(part.rotate_columns(3), part);
    }

    #[test]
    fn seed_validation_and_free_indices() {
        let g = LatticeGeometry::new(2, 3).unwrap();
        assert!(matches!(
            Seed::new(g, [(1, 1), (1, -1)]),
            Err(Error::DuplicateSeedIndex(1))
        ));
        assert!(Seed::new(g, [(6, 1)]).is_err());
        assert!(Seed::new(g, [(0, 2)]).is_err());
        let seed = Seed::new(g, [(4, -1), (1, 1)]).unwrap();
        assert_eq!(seed.free_indices(), vec![0, 2, 3, 5]);
        assert_eq!(seed.get(4), Some(-1));
        assert_eq!(seed.get(0), None);
        assert_eq!(seed.free_count(), 4);
    }
}
