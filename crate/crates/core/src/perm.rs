//! Permutations, partial injections and dyadic labelings of `{0..n-1}`.
//!
//! Points are dense 0-based integers. A permutation stores `images[x]`, the
//! image of point `x`; composition applies the right operand first, so
//! `a.compose(&b)` is the map `x -> a(b(x))`. The matrix `u` with
//! `u[x][y] = 1` iff `x = images[y]` acts on column vectors; that matrix is
//! the transpose of the row-indexed table stored here.

use std::fmt;

use num_rational::Ratio;
use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};

/// Exact non-negative rationals used for traces, defects and masses.
pub type Rational = Ratio<u64>;

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Permutation {
    images: Vec<usize>,
}

impl fmt::Debug for Permutation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Permutation{:?}", self.images)
    }
}

impl Permutation {
    /// Validates that `images` is a bijection of `{0..images.len()-1}`.
    pub fn new(images: Vec<usize>) -> Result<Self> {
        let n = images.len();
        let mut seen = vec![false; n];
        for (x, &y) in images.iter().enumerate() {
            if y >= n {
                return Err(Error::PointOutOfRange { point: y, n });
            }
            if seen[y] {
                return Err(Error::NotBijective(format!(
                    "image {y} repeated (at point {x})"
                )));
            }
            seen[y] = true;
        }
        Ok(Permutation { images })
    }

    pub(crate) fn from_vec_unchecked(images: Vec<usize>) -> Self {
        debug_assert!(Permutation::new(images.clone()).is_ok());
        Permutation { images }
    }

    pub fn identity(n: usize) -> Self {
        Permutation { images: (0..n).collect() }
    }

    /// The shift `x -> x + 1 mod n`.
    pub fn cycle(n: usize) -> Self {
        Permutation { images: (0..n).map(|x| (x + 1) % n.max(1)).collect() }
    }

    /// Builds a permutation from disjoint cycles; points not mentioned are fixed.
    pub fn from_cycles(n: usize, cycles: &[Vec<usize>]) -> Result<Self> {
        let mut images: Vec<usize> = (0..n).collect();
        let mut touched = vec![false; n];
        for c in cycles {
            for (i, &x) in c.iter().enumerate() {
                if x >= n {
                    return Err(Error::PointOutOfRange { point: x, n });
                }
                if touched[x] {
                    return Err(Error::NotBijective(format!("point {x} in two cycles")));
                }
                touched[x] = true;
                images[x] = c[(i + 1) % c.len()];
            }
        }
        Ok(Permutation { images })
    }

    pub fn random<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        let mut images: Vec<usize> = (0..n).collect();
        images.shuffle(rng);
        Permutation { images }
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    pub fn images(&self) -> &[usize] {
        &self.images
    }

    pub fn into_images(self) -> Vec<usize> {
        self.images
    }

    #[inline]
    pub fn apply(&self, x: usize) -> usize {
        self.images[x]
    }

    pub fn is_identity(&self) -> bool {
        self.images.iter().enumerate().all(|(x, &y)| x == y)
    }

    /// `self ∘ other`: apply `other` first.
    pub fn compose(&self, other: &Permutation) -> Result<Permutation> {
        self.check_size(other)?;
        Ok(Permutation {
            images: other.images.iter().map(|&y| self.images[y]).collect(),
        })
    }

    pub fn inverse(&self) -> Permutation {
        let mut inv = vec![0; self.len()];
        for (x, &y) in self.images.iter().enumerate() {
            inv[y] = x;
        }
        Permutation { images: inv }
    }

    pub fn pow(&self, k: i64) -> Permutation {
        let base = if k < 0 { self.inverse() } else { self.clone() };
        let mut e = k.unsigned_abs();
        let mut acc = Permutation::identity(self.len());
        let mut sq = base;
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.compose(&sq).expect("same size");
            }
            sq = sq.compose(&sq).expect("same size");
            e >>= 1;
        }
        acc
    }

    /// `by ∘ self ∘ by⁻¹`.
    pub fn conjugate_by(&self, by: &Permutation) -> Result<Permutation> {
        self.check_size(by)?;
        let mut out = vec![0; self.len()];
        for x in 0..self.len() {
            out[by.images[x]] = by.images[self.images[x]];
        }
        Ok(Permutation { images: out })
    }

    pub fn fixed_points(&self) -> usize {
        self.images.iter().enumerate().filter(|&(x, &y)| x == y).count()
    }

    /// `card{x : a[x] = x} / n`, the normalized trace of the permutation matrix.
    pub fn fixed_fraction(&self) -> Rational {
        ratio(self.fixed_points(), self.len())
    }

    pub fn disagreements(&self, other: &Permutation) -> Result<usize> {
        self.check_size(other)?;
        Ok(self
            .images
            .iter()
            .zip(&other.images)
            .filter(|(a, b)| a != b)
            .count())
    }

    /// `card{x : a[x] ≠ b[x]} / n`. For permutation matrices this is half of
    /// the squared normalized 2-norm distance.
    pub fn normalized_hamming(&self, other: &Permutation) -> Result<Rational> {
        Ok(ratio(self.disagreements(other)?, self.len()))
    }

    /// Disjoint cycles, each starting at its smallest point, ordered by that point.
    pub fn cycles(&self) -> Vec<Vec<usize>> {
        let n = self.len();
        let mut seen = vec![false; n];
        let mut out = Vec::new();
        for start in 0..n {
            if seen[start] {
                continue;
            }
            let mut c = Vec::new();
            let mut x = start;
            while !seen[x] {
                seen[x] = true;
                c.push(x);
                x = self.images[x];
            }
            out.push(c);
        }
        out
    }

    fn check_size(&self, other: &Permutation) -> Result<()> {
        if self.len() != other.len() {
            return Err(Error::SizeMismatch { expected: self.len(), got: other.len() });
        }
        Ok(())
    }
}

pub(crate) fn ratio(num: usize, den: usize) -> Rational {
    if den == 0 {
        // empty point set: every statement is vacuous
        return Rational::from_integer(if num == 0 { 1 } else { 0 });
    }
    Rational::new(num as u64, den as u64)
}

/// Reduced `num/den` from wide accumulators; errors if it does not fit in 64 bits.
pub(crate) fn ratio_wide(num: u128, den: u128) -> Result<Rational> {
    if den == 0 {
        return Ok(Rational::from_integer(if num == 0 { 1 } else { 0 }));
    }
    let g = gcd_u128(num, den);
    let (a, b) = (num / g, den / g);
    match (u64::try_from(a), u64::try_from(b)) {
        (Ok(a), Ok(b)) => Ok(Rational::new_raw(a, b)),
        _ => Err(Error::BudgetExceeded(format!("fraction {a}/{b} does not fit in 64 bits"))),
    }
}

fn gcd_u128(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a.max(1)
}

/// Injective partial map of `{0..n-1}`: the finite "piece of permutation".
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct PartialInjection {
    map: Vec<Option<usize>>,
}

impl fmt::Debug for PartialInjection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_map().entries(self.pairs()).finish()
    }
}

impl PartialInjection {
    pub fn new(map: Vec<Option<usize>>) -> Result<Self> {
        let n = map.len();
        let mut seen = vec![false; n];
        for (x, y) in map.iter().enumerate() {
            if let Some(y) = *y {
                if y >= n {
                    return Err(Error::PointOutOfRange { point: y, n });
                }
                if seen[y] {
                    return Err(Error::NotInjective(format!("image {y} repeated (at point {x})")));
                }
                seen[y] = true;
            }
        }
        Ok(PartialInjection { map })
    }

    pub fn from_pairs(n: usize, pairs: &[(usize, usize)]) -> Result<Self> {
        let mut map = vec![None; n];
        for &(x, y) in pairs {
            if x >= n {
                return Err(Error::PointOutOfRange { point: x, n });
            }
            if map[x].is_some() {
                return Err(Error::NotInjective(format!("point {x} mapped twice")));
            }
            map[x] = Some(y);
        }
        PartialInjection::new(map)
    }

    pub fn empty(n: usize) -> Self {
        PartialInjection { map: vec![None; n] }
    }

    pub fn identity_on(n: usize, set: &[usize]) -> Result<Self> {
        let pairs: Vec<_> = set.iter().map(|&x| (x, x)).collect();
        PartialInjection::from_pairs(n, &pairs)
    }

    /// Restriction `e·p` of a permutation to a point subset.
    pub fn restrict(perm: &Permutation, set: &[usize]) -> Result<Self> {
        let n = perm.len();
        let mut map = vec![None; n];
        for &x in set {
            if x >= n {
                return Err(Error::PointOutOfRange { point: x, n });
            }
            map[x] = Some(perm.apply(x));
        }
        Ok(PartialInjection { map })
    }

    pub fn from_permutation(perm: &Permutation) -> Self {
        PartialInjection { map: perm.images().iter().map(|&y| Some(y)).collect() }
    }

    pub fn n(&self) -> usize {
        self.map.len()
    }

    #[inline]
    pub fn get(&self, x: usize) -> Option<usize> {
        self.map.get(x).copied().flatten()
    }

    pub fn domain_size(&self) -> usize {
        self.map.iter().filter(|y| y.is_some()).count()
    }

    pub fn domain(&self) -> Vec<usize> {
        self.pairs().map(|(x, _)| x).collect()
    }

    /// Image points in increasing order.
    pub fn image(&self) -> Vec<usize> {
        let mut im: Vec<usize> = self.map.iter().flatten().copied().collect();
        im.sort_unstable();
        im
    }

    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.map.iter().enumerate().filter_map(|(x, y)| y.map(|y| (x, y)))
    }

    pub fn as_slice(&self) -> &[Option<usize>] {
        &self.map
    }

    /// `self ∘ b`: defined on `{x ∈ dom(b) : b(x) ∈ dom(self)}`.
    pub fn compose(&self, b: &PartialInjection) -> Result<PartialInjection> {
        if self.n() != b.n() {
            return Err(Error::SizeMismatch { expected: self.n(), got: b.n() });
        }
        Ok(PartialInjection {
            map: b.map.iter().map(|y| y.and_then(|y| self.map[y])).collect(),
        })
    }

    pub fn inverse(&self) -> PartialInjection {
        let mut inv = vec![None; self.n()];
        for (x, y) in self.pairs() {
            inv[y] = Some(x);
        }
        PartialInjection { map: inv }
    }

    pub fn is_total(&self) -> bool {
        self.map.iter().all(Option::is_some)
    }

    pub fn to_permutation(&self) -> Option<Permutation> {
        if !self.is_total() {
            return None;
        }
        Some(Permutation::from_vec_unchecked(self.map.iter().map(|y| y.unwrap()).collect()))
    }

    /// Disjoint union with another partial injection on the same points.
    pub fn union(&self, other: &PartialInjection) -> Result<PartialInjection> {
        if self.n() != other.n() {
            return Err(Error::SizeMismatch { expected: self.n(), got: other.n() });
        }
        let mut map = self.map.clone();
        for (x, y) in other.pairs() {
            match map[x] {
                Some(z) if z != y => {
                    return Err(Error::NotInjective(format!("point {x} mapped to {z} and {y}")))
                }
                _ => map[x] = Some(y),
            }
        }
        PartialInjection::new(map)
    }

    /// Points `x` in the domain with `φ(x) = x`.
    pub fn fixed_points(&self) -> usize {
        self.pairs().filter(|(x, y)| x == y).count()
    }
}

/// Per-point labels realizing a dyadic basic sequence of projections.
///
/// Only the deepest level is stored; the level-`j` label of `x` is
/// `⌈labels[x] / 2^(depth-j)⌉`, so level-`(j-1)` cell `i` is the disjoint
/// union of level-`j` cells `2i-1` and `2i` by construction.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct DyadicLabeling {
    depth: u32,
    labels: Vec<u32>,
}

impl fmt::Debug for DyadicLabeling {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "DyadicLabeling(depth={}, {:?})", self.depth, self.labels)
    }
}

pub const MAX_LABEL_DEPTH: u32 = 30;

impl DyadicLabeling {
    /// Labels are 1-based, in `1..=2^depth`. Balance is not required here;
    /// see [`DyadicLabeling::is_balanced`] and [`DyadicLabeling::trace_deviation`].
    pub fn new(depth: u32, labels: Vec<u32>) -> Result<Self> {
        if depth > MAX_LABEL_DEPTH {
            return Err(Error::InvalidLabeling(format!("depth {depth} exceeds {MAX_LABEL_DEPTH}")));
        }
        let top = 1u32 << depth;
        if let Some((x, &l)) = labels.iter().enumerate().find(|(_, &l)| l == 0 || l > top) {
            return Err(Error::InvalidLabeling(format!(
                "label {l} at point {x} outside 1..={top}"
            )));
        }
        Ok(DyadicLabeling { depth, labels })
    }

    /// Contiguous cells: point `x` gets label `⌊x·2^depth / n⌋ + 1`. Cell sizes
    /// differ by at most one.
    pub fn balanced(n: usize, depth: u32) -> Result<Self> {
        if depth > MAX_LABEL_DEPTH {
            return Err(Error::InvalidLabeling(format!("depth {depth} exceeds {MAX_LABEL_DEPTH}")));
        }
        let cells = 1u128 << depth;
        let labels = (0..n)
            .map(|x| ((x as u128 * cells) / n as u128) as u32 + 1)
            .collect();
        Ok(DyadicLabeling { depth, labels })
    }

    /// A balanced labeling with cells assigned to points in random order.
    pub fn random_balanced<R: Rng + ?Sized>(n: usize, depth: u32, rng: &mut R) -> Result<Self> {
        let base = DyadicLabeling::balanced(n, depth)?;
        let mut labels = base.labels;
        labels.shuffle(rng);
        Ok(DyadicLabeling { depth, labels })
    }

    pub fn trivial(n: usize) -> Self {
        DyadicLabeling { depth: 0, labels: vec![1; n] }
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    #[inline]
    pub fn label(&self, x: usize) -> u32 {
        self.labels[x]
    }

    /// Level-`level` label of `x`, `⌈labels[x] / 2^(depth-level)⌉`.
    #[inline]
    pub fn label_at(&self, x: usize, level: u32) -> u32 {
        debug_assert!(level <= self.depth);
        ((self.labels[x] - 1) >> (self.depth - level)) + 1
    }

    /// Point sets of the `2^level` cells at `level`, each in increasing order.
    pub fn cells(&self, level: u32) -> Vec<Vec<usize>> {
        let mut cells = vec![Vec::new(); 1usize << level];
        for x in 0..self.n() {
            cells[(self.label_at(x, level) - 1) as usize].push(x);
        }
        cells
    }

    pub fn cell_sizes(&self, level: u32) -> Vec<usize> {
        let mut sizes = vec![0; 1usize << level];
        for x in 0..self.n() {
            sizes[(self.label_at(x, level) - 1) as usize] += 1;
        }
        sizes
    }

    /// Deepest-level cell sizes differ by at most one.
    pub fn is_balanced(&self) -> bool {
        let sizes = self.cell_sizes(self.depth);
        let lo = sizes.iter().min().copied().unwrap_or(0);
        let hi = sizes.iter().max().copied().unwrap_or(0);
        hi - lo <= 1
    }

    /// `max_i |card(cell_i)/n − 2^{−depth}|` over the deepest cells.
    pub fn trace_deviation(&self) -> Rational {
        let n = self.n() as u64;
        if n == 0 {
            return Rational::from_integer(0);
        }
        let cells = 1u64 << self.depth;
        let worst = self
            .cell_sizes(self.depth)
            .into_iter()
            .map(|c| (c as u64 * cells).abs_diff(n))
            .max()
            .unwrap_or(0);
        Rational::new(worst, n * cells)
    }

    /// Same partition at a coarser depth.
    pub fn truncate(&self, depth: u32) -> Result<Self> {
        if depth > self.depth {
            return Err(Error::InvalidLabeling(format!(
                "cannot refine depth {} to {depth}",
                self.depth
            )));
        }
        Ok(DyadicLabeling {
            depth,
            labels: (0..self.n()).map(|x| self.label_at(x, depth)).collect(),
        })
    }

    /// Lift to `n·r` points indexed `x·r + j`, with `(x, j)` labelled as `x`.
    pub fn lift(&self, r: usize) -> Self {
        let labels = self
            .labels
            .iter()
            .flat_map(|&l| std::iter::repeat_n(l, r))
            .collect();
        DyadicLabeling { depth: self.depth, labels }
    }

    /// Transport along `u`: the result labels `u(x)` with the label of `x`.
    pub fn transport(&self, u: &Permutation) -> Result<Self> {
        if u.len() != self.n() {
            return Err(Error::SizeMismatch { expected: self.n(), got: u.len() });
        }
        let mut labels = vec![0; self.n()];
        for x in 0..self.n() {
            labels[u.apply(x)] = self.labels[x];
        }
        Ok(DyadicLabeling { depth: self.depth, labels })
    }

    /// Relabel cells at the deepest level by `cell_map` (0-based cell indices).
    pub fn relabel_cells(&self, cell_map: &Permutation) -> Result<Self> {
        if cell_map.len() != 1usize << self.depth {
            return Err(Error::SizeMismatch { expected: 1 << self.depth, got: cell_map.len() });
        }
        Ok(DyadicLabeling {
            depth: self.depth,
            labels: self
                .labels
                .iter()
                .map(|&l| cell_map.apply((l - 1) as usize) as u32 + 1)
                .collect(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(v: &[usize]) -> Permutation {
        Permutation::new(v.to_vec()).unwrap()
    }

    #[test]
    fn compose_examples() {
        assert_eq!(p(&[1, 0, 2]).compose(&p(&[2, 1, 0])).unwrap(), p(&[2, 0, 1]));
        assert_eq!(Permutation::identity(3).compose(&p(&[2, 1, 0])).unwrap(), p(&[2, 1, 0]));
        assert!(p(&[1, 2, 0]).compose(&p(&[2, 0, 1])).unwrap().is_identity());
        assert!(matches!(
            p(&[1, 0]).compose(&p(&[0, 1, 2])),
            Err(Error::SizeMismatch { .. })
        ));
    }

    #[test]
    fn inverse_examples() {
        assert_eq!(p(&[1, 2, 0]).inverse(), p(&[2, 0, 1]));
        assert_eq!(Permutation::identity(4).inverse(), Permutation::identity(4));
        let t = p(&[0, 3, 2, 1]);
        assert_eq!(t.inverse(), t);
    }

    #[test]
    fn hamming_examples() {
        assert_eq!(p(&[1, 0, 2]).normalized_hamming(&p(&[0, 1, 2])).unwrap(), Rational::new(2, 3));
        let a = p(&[2, 0, 1]);
        assert_eq!(a.normalized_hamming(&a).unwrap(), Rational::from_integer(0));
        assert_eq!(
            Permutation::identity(4).normalized_hamming(&p(&[1, 2, 3, 0])).unwrap(),
            Rational::from_integer(1)
        );
    }

    #[test]
    fn fixed_fraction_examples() {
        assert_eq!(Permutation::identity(5).fixed_fraction(), Rational::from_integer(1));
        assert_eq!(Permutation::cycle(5).fixed_fraction(), Rational::from_integer(0));
        assert_eq!(p(&[1, 0, 2]).fixed_fraction(), Rational::new(1, 3));
    }

    #[test]
    fn rejects_non_bijections() {
        assert!(Permutation::new(vec![0, 0, 1]).is_err());
        assert!(Permutation::new(vec![0, 3, 1]).is_err());
        assert!(PartialInjection::from_pairs(3, &[(0, 1), (2, 1)]).is_err());
        assert!(PartialInjection::from_pairs(3, &[(0, 1), (0, 2)]).is_err());
    }

    #[test]
    fn pinj_compose_examples() {
        let a = PartialInjection::from_pairs(4, &[(0, 3), (2, 1)]).unwrap();
        let b = PartialInjection::from_pairs(4, &[(1, 0)]).unwrap();
        assert_eq!(a.compose(&b).unwrap(), PartialInjection::from_pairs(4, &[(1, 3)]).unwrap());

        let perm = p(&[2, 0, 3, 1]);
        let total = PartialInjection::from_permutation(&perm);
        let back = PartialInjection::restrict(&perm.inverse(), &[0]).unwrap();
        assert_eq!(total.compose(&back).unwrap(), PartialInjection::identity_on(4, &[0]).unwrap());

        let c = PartialInjection::from_pairs(4, &[(0, 1)]).unwrap();
        let d = PartialInjection::from_pairs(4, &[(3, 2)]).unwrap();
        assert_eq!(c.compose(&d).unwrap(), PartialInjection::empty(4));
    }

    #[test]
    fn pow_and_conjugate() {
        let c = Permutation::cycle(5);
        assert!(c.pow(5).is_identity());
        assert_eq!(c.pow(-1), c.inverse());
        assert_eq!(c.pow(7), c.pow(2));
        let u = p(&[4, 3, 2, 1, 0]);
        let conj = c.conjugate_by(&u).unwrap();
        let expect = u.compose(&c).unwrap().compose(&u.inverse()).unwrap();
        assert_eq!(conj, expect);
    }

    #[test]
    fn labeling_levels() {
        let l = DyadicLabeling::new(2, vec![1, 2, 3, 4, 4, 1]).unwrap();
        assert_eq!(l.label_at(2, 1), 2);
        assert_eq!(l.label_at(1, 1), 1);
        assert_eq!(l.cells(1), vec![vec![0, 1, 5], vec![2, 3, 4]]);
        assert_eq!(l.label_at(0, 0), 1);
        assert!(DyadicLabeling::new(1, vec![1, 3]).is_err());
        assert!(DyadicLabeling::new(1, vec![0]).is_err());
    }

    #[test]
    fn balanced_labeling_deviation() {
        let l = DyadicLabeling::balanced(8, 2).unwrap();
        assert_eq!(l.labels(), &[1, 1, 2, 2, 3, 3, 4, 4]);
        assert_eq!(l.trace_deviation(), Rational::from_integer(0));
        let odd = DyadicLabeling::balanced(6, 2).unwrap();
        assert!(odd.is_balanced());
        // sizes 2,1,2,1: |2/6 - 1/4| = 1/12
        assert_eq!(odd.cell_sizes(2), vec![2, 1, 2, 1]);
        assert_eq!(odd.trace_deviation(), Rational::new(1, 12));
    }

    #[test]
    fn labeling_refinement_identity() {
        let l = DyadicLabeling::balanced(37, 4).unwrap();
        for j in 1..=4 {
            let fine = l.cells(j);
            let coarse = l.cells(j - 1);
            for (i, cell) in coarse.iter().enumerate() {
                let mut merged = fine[2 * i].clone();
                merged.extend(&fine[2 * i + 1]);
                merged.sort_unstable();
                assert_eq!(&merged, cell);
            }
            let total: usize = fine.iter().map(Vec::len).sum();
            assert_eq!(total, 37);
        }
    }

    #[test]
    fn cycles_roundtrip() {
        let a = p(&[3, 0, 4, 1, 2, 5]);
        let cyc = a.cycles();
        assert_eq!(cyc, vec![vec![0, 3, 1], vec![2, 4], vec![5]]);
        assert_eq!(Permutation::from_cycles(6, &cyc).unwrap(), a);
    }
}
