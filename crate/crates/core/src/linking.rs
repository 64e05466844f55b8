//! Constructive linking: summing pieces of permutations, rounding
//! near-permutations, and conjugating subsets, partitions, labelings and
//! matrix-unit systems onto each other.
//!
//! Every operation here is a pure function of its inputs. Where a choice is
//! free the rule is fixed (ascending order on both sides), so outputs are
//! reproducible bit for bit.

use crate::error::{Error, Result};
use crate::perm::{ratio, DyadicLabeling, PartialInjection, Permutation, Rational};

/// A total, not necessarily injective, map `{0..n-1} -> {0..n-1}`: a 0/1
/// matrix with exactly one entry of 1 on each line.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct RowFunction {
    images: Vec<usize>,
}

impl RowFunction {
    pub fn new(images: Vec<usize>) -> Result<Self> {
        let n = images.len();
        if let Some(&y) = images.iter().find(|&&y| y >= n) {
            return Err(Error::PointOutOfRange { point: y, n });
        }
        Ok(RowFunction { images })
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

    #[inline]
    pub fn apply(&self, x: usize) -> usize {
        self.images[x]
    }

    /// Number of values in `{0..n-1}` not hit by the map (empty columns).
    pub fn missed_count(&self) -> usize {
        let mut hit = vec![false; self.len()];
        for &y in &self.images {
            hit[y] = true;
        }
        hit.iter().filter(|h| !**h).count()
    }
}

/// `f(x) = perms[i](x)` for `x ∈ partition[i]`.
pub fn sum_of_pieces(partition: &[Vec<usize>], perms: &[Permutation]) -> Result<RowFunction> {
    if partition.len() != perms.len() {
        return Err(Error::InvalidArgument(format!(
            "{} blocks but {} permutations",
            partition.len(),
            perms.len()
        )));
    }
    let n = match perms.first() {
        Some(p) => p.len(),
        None => 0,
    };
    let mut images = vec![usize::MAX; n];
    for (block, perm) in partition.iter().zip(perms) {
        if perm.len() != n {
            return Err(Error::SizeMismatch { expected: n, got: perm.len() });
        }
        for &x in block {
            if x >= n {
                return Err(Error::PointOutOfRange { point: x, n });
            }
            if images[x] != usize::MAX {
                return Err(Error::InvalidPartition(format!("point {x} in two blocks")));
            }
            images[x] = perm.apply(x);
        }
    }
    if let Some(x) = images.iter().position(|&y| y == usize::MAX) {
        return Err(Error::InvalidPartition(format!("point {x} not covered")));
    }
    Ok(RowFunction { images })
}

/// Moves the surplus entries of `v` onto its empty columns.
///
/// The smallest point sharing an image keeps it; evicted points, in increasing
/// order, take the missed values in increasing order. Returns the permutation
/// and `r`, the number of missed values; the result disagrees with `v` on
/// exactly `r` points, so `‖v − w‖₂² = 2r/n`.
pub fn round_to_permutation(v: &RowFunction) -> (Permutation, usize) {
    let n = v.len();
    let mut taken = vec![false; n];
    let mut evicted = Vec::new();
    let mut images = v.images.clone();
    for x in 0..n {
        let y = v.images[x];
        if taken[y] {
            evicted.push(x);
        } else {
            taken[y] = true;
        }
    }
    let missed: Vec<usize> = (0..n).filter(|&y| !taken[y]).collect();
    debug_assert_eq!(missed.len(), evicted.len());
    for (&x, &y) in evicted.iter().zip(&missed) {
        images[x] = y;
    }
    (Permutation::from_vec_unchecked(images), missed.len())
}

fn sorted_set(set: &[usize], n: usize) -> Result<Vec<usize>> {
    let mut s = set.to_vec();
    s.sort_unstable();
    if let Some(w) = s.windows(2).find(|w| w[0] == w[1]) {
        return Err(Error::InvalidArgument(format!("point {} repeated in set", w[0])));
    }
    if let Some(&x) = s.last().filter(|&&x| x >= n) {
        return Err(Error::PointOutOfRange { point: x, n });
    }
    Ok(s)
}

fn complement(sorted: &[usize], n: usize) -> Vec<usize> {
    let mut inside = vec![false; n];
    for &x in sorted {
        inside[x] = true;
    }
    (0..n).filter(|&x| !inside[x]).collect()
}

/// A permutation `u` with `u(e) = f`: the i-th smallest point of `e` goes to the
/// i-th smallest point of `f`, and likewise for the complements.
pub fn conjugate_subsets(e: &[usize], f: &[usize], n: usize) -> Result<Permutation> {
    let e = sorted_set(e, n)?;
    let f = sorted_set(f, n)?;
    if e.len() != f.len() {
        return Err(Error::CardinalityMismatch(format!(
            "|e| = {} but |f| = {}",
            e.len(),
            f.len()
        )));
    }
    let mut images = vec![0; n];
    for (&x, &y) in e.iter().zip(&f) {
        images[x] = y;
    }
    for (x, y) in complement(&e, n).into_iter().zip(complement(&f, n)) {
        images[x] = y;
    }
    Ok(Permutation::from_vec_unchecked(images))
}

fn check_partition(blocks: &[Vec<usize>], n: usize) -> Result<()> {
    let mut seen = vec![false; n];
    for block in blocks {
        for &x in block {
            if x >= n {
                return Err(Error::PointOutOfRange { point: x, n });
            }
            if seen[x] {
                return Err(Error::InvalidPartition(format!("point {x} in two blocks")));
            }
            seen[x] = true;
        }
    }
    if let Some(x) = seen.iter().position(|s| !s) {
        return Err(Error::InvalidPartition(format!("point {x} not covered")));
    }
    Ok(())
}

/// A permutation `u` with `u(es[i]) = fs[i]` for every block, assembled as the
/// sum of the per-block subset conjugators and rounded.
pub fn conjugate_partitions(es: &[Vec<usize>], fs: &[Vec<usize>], n: usize) -> Result<Permutation> {
    if es.len() != fs.len() {
        return Err(Error::InvalidPartition(format!(
            "{} blocks vs {} blocks",
            es.len(),
            fs.len()
        )));
    }
    check_partition(es, n)?;
    check_partition(fs, n)?;
    if es.is_empty() {
        return Ok(Permutation::identity(n));
    }
    let mut pieces = Vec::with_capacity(es.len());
    for (i, (e, f)) in es.iter().zip(fs).enumerate() {
        if e.len() != f.len() {
            return Err(Error::CardinalityMismatch(format!(
                "block {i}: {} points vs {}",
                e.len(),
                f.len()
            )));
        }
        pieces.push(conjugate_subsets(e, f, n)?);
    }
    let v = sum_of_pieces(es, &pieces)?;
    let (u, moved) = round_to_permutation(&v);
    assert_eq!(moved, 0, "disjoint pieces with disjoint images must already be a permutation");
    Ok(u)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AlignMode {
    /// Refuse unequal deepest-level cell sizes.
    Exact,
    /// Match as many points as possible within equal cells and report the rest.
    Approximate,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Alignment {
    pub permutation: Permutation,
    /// Fraction of points `x` whose target label differs: `L2(u(x)) ≠ L1(x)`.
    pub residual: Rational,
}

/// `u` with `L2(u(x)) = L1(x)` for every point, at the deepest level (hence at
/// every coarser level).
pub fn align_labelings(l1: &DyadicLabeling, l2: &DyadicLabeling) -> Result<Permutation> {
    align_labelings_with(l1, l2, AlignMode::Exact).map(|a| a.permutation)
}

pub fn align_labelings_with(
    l1: &DyadicLabeling,
    l2: &DyadicLabeling,
    mode: AlignMode,
) -> Result<Alignment> {
    if l1.n() != l2.n() {
        return Err(Error::SizeMismatch { expected: l1.n(), got: l2.n() });
    }
    if l1.depth() != l2.depth() {
        return Err(Error::InvalidLabeling(format!(
            "depth {} vs depth {}",
            l1.depth(),
            l2.depth()
        )));
    }
    let n = l1.n();
    let depth = l1.depth();
    let c1 = l1.cells(depth);
    let c2 = l2.cells(depth);
    match mode {
        AlignMode::Exact => {
            if let Some(i) = (0..c1.len()).find(|&i| c1[i].len() != c2[i].len()) {
                return Err(Error::CardinalityMismatch(format!(
                    "cell {} has {} points vs {}; amplify first",
                    i + 1,
                    c1[i].len(),
                    c2[i].len()
                )));
            }
            let u = conjugate_partitions(&c1, &c2, n)?;
            Ok(Alignment { permutation: u, residual: Rational::from_integer(0) })
        }
        AlignMode::Approximate => {
            let mut images = vec![usize::MAX; n];
            let mut rest_from = Vec::new();
            let mut rest_to = Vec::new();
            for (a, b) in c1.iter().zip(&c2) {
                let k = a.len().min(b.len());
                for (&x, &y) in a[..k].iter().zip(&b[..k]) {
                    images[x] = y;
                }
                rest_from.extend_from_slice(&a[k..]);
                rest_to.extend_from_slice(&b[k..]);
            }
            let mismatched = rest_from.len();
            for (x, y) in rest_from.into_iter().zip(rest_to) {
                images[x] = y;
            }
            let (u, moved) = round_to_permutation(&RowFunction::new(images)?);
            debug_assert_eq!(moved, 0);
            Ok(Alignment { permutation: u, residual: ratio(mismatched, n) })
        }
    }
}

/// A finite system of matrix units on `n` points, block-diagonal over
/// `t` blocks.
///
/// Block `v` of size `s_v` is stored as a frame: `frame[j][k]` is the image of
/// the `k`-th point of the first support under `e_{j1;v}` (0-based `j`). The
/// first support is kept in increasing order, and `e_{ij;v}` sends
/// `frame[j][k]` to `frame[i][k]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MatrixUnitSystem {
    n: usize,
    blocks: Vec<Vec<Vec<usize>>>,
}

impl MatrixUnitSystem {
    /// Validates that the supports are equal-sized within each block and
    /// partition `{0..n-1}`.
    pub fn from_frames(n: usize, blocks: Vec<Vec<Vec<usize>>>) -> Result<Self> {
        let mut seen = vec![false; n];
        let mut canonical = Vec::with_capacity(blocks.len());
        for (v, frame) in blocks.into_iter().enumerate() {
            if frame.is_empty() {
                return Err(Error::InvalidMatrixUnits(format!("block {v} has size 0")));
            }
            let m = frame[0].len();
            if let Some(j) = frame.iter().position(|row| row.len() != m) {
                return Err(Error::InvalidMatrixUnits(format!(
                    "block {v}: support {j} has {} points, support 0 has {m}",
                    frame[j].len()
                )));
            }
            for row in &frame {
                for &x in row {
                    if x >= n {
                        return Err(Error::PointOutOfRange { point: x, n });
                    }
                    if seen[x] {
                        return Err(Error::InvalidMatrixUnits(format!(
                            "point {x} lies in two supports"
                        )));
                    }
                    seen[x] = true;
                }
            }
            let mut order: Vec<usize> = (0..m).collect();
            order.sort_by_key(|&k| frame[0][k]);
            canonical.push(
                frame
                    .iter()
                    .map(|row| order.iter().map(|&k| row[k]).collect())
                    .collect(),
            );
        }
        if let Some(x) = seen.iter().position(|s| !s) {
            return Err(Error::InvalidMatrixUnits(format!("point {x} in no support")));
        }
        Ok(MatrixUnitSystem { n, blocks: canonical })
    }

    /// Builds the system from the chain units `e_{j,j+1;v}` of each block
    /// (maps from support `j+1` onto support `j`). A block of size one is given
    /// by a single identity map on its support.
    pub fn from_chain(n: usize, chains: &[Vec<PartialInjection>]) -> Result<Self> {
        let mut frames = Vec::with_capacity(chains.len());
        for (v, chain) in chains.iter().enumerate() {
            if chain.is_empty() {
                return Err(Error::InvalidMatrixUnits(format!("block {v}: no units given")));
            }
            if let Some(u) = chain.iter().find(|u| u.n() != n) {
                return Err(Error::SizeMismatch { expected: n, got: u.n() });
            }
            if chain.len() == 1 && chain[0].pairs().all(|(x, y)| x == y) {
                // size-one block: the single map is e_{11}
                frames.push(vec![chain[0].domain()]);
                continue;
            }
            let base = chain[0].image();
            let mut frame = vec![base.clone()];
            let mut current = base;
            for (j, unit) in chain.iter().enumerate() {
                // unit = e_{j,j+1}: support j+1 -> support j
                let down = unit.inverse();
                let image = unit.image();
                let mut expected = current.clone();
                expected.sort_unstable();
                if image != expected {
                    return Err(Error::InvalidMatrixUnits(format!(
                        "block {v}: unit {} does not map onto support {}",
                        j + 1,
                        j + 1
                    )));
                }
                let next: Vec<usize> = current
                    .iter()
                    .map(|&x| down.get(x).expect("image checked above"))
                    .collect();
                frame.push(next.clone());
                current = next;
            }
            frames.push(frame);
        }
        MatrixUnitSystem::from_frames(n, frames)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn block_count(&self) -> usize {
        self.blocks.len()
    }

    pub fn block_size(&self, v: usize) -> usize {
        self.blocks[v].len()
    }

    pub fn frame(&self, v: usize) -> &[Vec<usize>] {
        &self.blocks[v]
    }

    /// Support of `e_{jj;v}` in increasing order.
    pub fn support(&self, v: usize, j: usize) -> Vec<usize> {
        let mut s = self.blocks[v][j].clone();
        s.sort_unstable();
        s
    }

    /// All diagonal supports, block by block.
    pub fn diagonal_partition(&self) -> Vec<Vec<usize>> {
        (0..self.block_count())
            .flat_map(|v| (0..self.block_size(v)).map(move |j| (v, j)))
            .map(|(v, j)| self.support(v, j))
            .collect()
    }

    /// The unit `e_{ij;v}` (0-based `i`, `j`), mapping support `j` onto support `i`.
    pub fn unit(&self, v: usize, i: usize, j: usize) -> PartialInjection {
        let frame = &self.blocks[v];
        let pairs: Vec<(usize, usize)> =
            frame[j].iter().zip(&frame[i]).map(|(&x, &y)| (x, y)).collect();
        PartialInjection::from_pairs(self.n, &pairs).expect("frames are disjoint")
    }

    /// The chain `e_{j,j+1;v}` used by the text format; `[e_{11}]` for size-one blocks.
    pub fn chain(&self, v: usize) -> Vec<PartialInjection> {
        let s = self.block_size(v);
        if s == 1 {
            return vec![self.unit(v, 0, 0)];
        }
        (0..s - 1).map(|j| self.unit(v, j, j + 1)).collect()
    }

    /// The system conjugated by `u`: every unit `e` becomes `u ∘ e ∘ u⁻¹`.
    pub fn conjugate_by(&self, u: &Permutation) -> Result<Self> {
        if u.len() != self.n {
            return Err(Error::SizeMismatch { expected: self.n, got: u.len() });
        }
        let blocks = self
            .blocks
            .iter()
            .map(|f| f.iter().map(|row| row.iter().map(|&x| u.apply(x)).collect()).collect())
            .collect();
        MatrixUnitSystem::from_frames(self.n, blocks)
    }
}

/// `p = Σ_v Σ_j e^{S2}_{j1;v} ∘ e^{S1}_{1j;v}`, which conjugates every unit of
/// `s1` onto the corresponding unit of `s2`. Requires identical block
/// structure and identical diagonal supports.
pub fn link_matrix_units(s1: &MatrixUnitSystem, s2: &MatrixUnitSystem) -> Result<Permutation> {
    if s1.n != s2.n {
        return Err(Error::SizeMismatch { expected: s1.n, got: s2.n });
    }
    if s1.block_count() != s2.block_count() {
        return Err(Error::InvalidMatrixUnits(format!(
            "{} blocks vs {}",
            s1.block_count(),
            s2.block_count()
        )));
    }
    let n = s1.n;
    let mut pieces_domain = Vec::new();
    let mut piece_maps = Vec::new();
    for v in 0..s1.block_count() {
        if s1.block_size(v) != s2.block_size(v) {
            return Err(Error::InvalidMatrixUnits(format!(
                "block {v}: size {} vs {}",
                s1.block_size(v),
                s2.block_size(v)
            )));
        }
        for j in 0..s1.block_size(v) {
            if s1.support(v, j) != s2.support(v, j) {
                return Err(Error::InvalidMatrixUnits(format!(
                    "block {v}: support {j} differs; align the diagonals first"
                )));
            }
            let piece = s2.unit(v, j, 0).compose(&s1.unit(v, 0, j))?;
            pieces_domain.push(piece.domain());
            piece_maps.push(piece);
        }
    }
    let mut images = vec![usize::MAX; n];
    for piece in &piece_maps {
        for (x, y) in piece.pairs() {
            images[x] = y;
        }
    }
    debug_assert!(images.iter().all(|&y| y != usize::MAX));
    let (p, moved) = round_to_permutation(&RowFunction::new(images)?);
    assert_eq!(moved, 0, "linking pieces must sum to a permutation");
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(v: &[usize]) -> Permutation {
        Permutation::new(v.to_vec()).unwrap()
    }

    #[test]
    fn sum_of_pieces_examples() {
        let f = sum_of_pieces(&[vec![0, 1], vec![2]], &[Permutation::identity(3), p(&[1, 2, 0])])
            .unwrap();
        assert_eq!(f.images(), &[0, 1, 0]);
        let single = sum_of_pieces(&[vec![0, 1, 2]], &[p(&[2, 0, 1])]).unwrap();
        assert_eq!(single.images(), &[2, 0, 1]);
        let inj = sum_of_pieces(&[vec![0], vec![1]], &[p(&[1, 0]), p(&[1, 0])]).unwrap();
        assert_eq!(inj.images(), &[1, 0]);
    }

    #[test]
    fn sum_of_pieces_errors() {
        let id = Permutation::identity(3);
        assert!(matches!(
            sum_of_pieces(&[vec![0, 1], vec![1, 2]], &[id.clone(), id.clone()]),
            Err(Error::InvalidPartition(_))
        ));
        assert!(matches!(
            sum_of_pieces(&[vec![0], vec![1]], &[id.clone(), id.clone()]),
            Err(Error::InvalidPartition(_))
        ));
        assert!(matches!(
            sum_of_pieces(&[vec![0], vec![1]], &[id.clone(), Permutation::identity(2)]),
            Err(Error::SizeMismatch { .. })
        ));
    }

    #[test]
    fn round_examples() {
        let (w, r) = round_to_permutation(&RowFunction::new(vec![0, 1, 0]).unwrap());
        assert_eq!((w, r), (p(&[0, 1, 2]), 1));

        let (w, r) = round_to_permutation(&RowFunction::new(vec![2, 0, 1]).unwrap());
        assert_eq!((w, r), (p(&[2, 0, 1]), 0));

        let v = RowFunction::new(vec![0; 4]).unwrap();
        let (w, r) = round_to_permutation(&v);
        assert_eq!(r, 3);
        assert_eq!(w, p(&[0, 1, 2, 3]));
        let agree = (0..4).filter(|&x| w.apply(x) == v.apply(x)).count();
        assert_eq!(agree, 1);
    }

    #[test]
    fn subset_conjugation_examples() {
        assert_eq!(conjugate_subsets(&[0, 1], &[1, 2], 3).unwrap(), p(&[1, 2, 0]));
        assert!(conjugate_subsets(&[2, 0], &[0, 2], 3).unwrap().is_identity());
        assert!(conjugate_subsets(&[], &[], 4).unwrap().is_identity());
        assert!(matches!(
            conjugate_subsets(&[0], &[1, 2], 3),
            Err(Error::CardinalityMismatch(_))
        ));
    }

    #[test]
    fn partition_conjugation_examples() {
        let u = conjugate_partitions(&[vec![0], vec![1, 2]], &[vec![2], vec![0, 1]], 3).unwrap();
        assert_eq!(u, p(&[2, 0, 1]));
        let same = conjugate_partitions(&[vec![0, 3], vec![1, 2]], &[vec![0, 3], vec![1, 2]], 4)
            .unwrap();
        assert!(same.is_identity());
        let singletons =
            conjugate_partitions(&[vec![0], vec![1], vec![2]], &[vec![1], vec![2], vec![0]], 3)
                .unwrap();
        assert_eq!(singletons, p(&[1, 2, 0]));
        assert!(matches!(
            conjugate_partitions(&[vec![0], vec![1, 2]], &[vec![0, 1], vec![2]], 3),
            Err(Error::CardinalityMismatch(_))
        ));
        assert!(matches!(
            conjugate_partitions(&[vec![0], vec![1]], &[vec![0], vec![1, 2]], 3),
            Err(Error::InvalidPartition(_))
        ));
    }

    #[test]
    fn align_examples() {
        let l1 = DyadicLabeling::new(1, vec![1, 1, 2, 2]).unwrap();
        let l2 = DyadicLabeling::new(1, vec![2, 1, 2, 1]).unwrap();
        let u = align_labelings(&l1, &l2).unwrap();
        assert_eq!(u, p(&[1, 3, 0, 2]));
        for x in 0..4 {
            assert_eq!(l2.label(u.apply(x)), l1.label(x));
        }
        assert!(align_labelings(&l1, &l1).unwrap().is_identity());
        let flat = DyadicLabeling::trivial(5);
        assert!(align_labelings(&flat, &flat).unwrap().is_identity());
    }

    #[test]
    fn align_refuses_unequal_cells_unless_approximate() {
        let l1 = DyadicLabeling::new(1, vec![1, 1, 1, 2]).unwrap();
        let l2 = DyadicLabeling::new(1, vec![1, 2, 2, 1]).unwrap();
        assert!(matches!(align_labelings(&l1, &l2), Err(Error::CardinalityMismatch(_))));
        let a = align_labelings_with(&l1, &l2, AlignMode::Approximate).unwrap();
        assert_eq!(a.residual, Rational::new(1, 4));
        let bad = (0..4).filter(|&x| l2.label(a.permutation.apply(x)) != l1.label(x)).count();
        assert_eq!(bad, 1);
    }

    #[test]
    fn link_example() {
        let s1 = MatrixUnitSystem::from_chain(
            4,
            &[vec![PartialInjection::from_pairs(4, &[(2, 0), (3, 1)]).unwrap()]],
        )
        .unwrap();
        let s2 = MatrixUnitSystem::from_chain(
            4,
            &[vec![PartialInjection::from_pairs(4, &[(3, 0), (2, 1)]).unwrap()]],
        )
        .unwrap();
        // e_{21} of s1 is {0→2, 1→3}
        assert_eq!(s1.unit(0, 1, 0), PartialInjection::from_pairs(4, &[(0, 2), (1, 3)]).unwrap());
        let link = link_matrix_units(&s1, &s2).unwrap();
        assert_eq!(link, p(&[0, 1, 3, 2]));
        let lhs = PartialInjection::from_permutation(&link)
            .compose(&s1.unit(0, 1, 0))
            .unwrap()
            .compose(&PartialInjection::from_permutation(&link.inverse()))
            .unwrap();
        assert_eq!(lhs, s2.unit(0, 1, 0));

        assert!(link_matrix_units(&s1, &s1).unwrap().is_identity());

        let diag = MatrixUnitSystem::from_chain(
            3,
            &[
                vec![PartialInjection::identity_on(3, &[0, 2]).unwrap()],
                vec![PartialInjection::identity_on(3, &[1]).unwrap()],
            ],
        )
        .unwrap();
        assert_eq!(diag.block_count(), 2);
        assert!(link_matrix_units(&diag, &diag).unwrap().is_identity());
    }

    #[test]
    fn link_rejects_mismatched_supports() {
        let s1 = MatrixUnitSystem::from_frames(4, vec![vec![vec![0, 1], vec![2, 3]]]).unwrap();
        let s2 = MatrixUnitSystem::from_frames(4, vec![vec![vec![0, 2], vec![1, 3]]]).unwrap();
        assert!(matches!(link_matrix_units(&s1, &s2), Err(Error::InvalidMatrixUnits(_))));
        let s3 = MatrixUnitSystem::from_frames(4, vec![vec![vec![0]], vec![vec![1], vec![2]], vec![vec![3]]])
            .unwrap();
        assert!(link_matrix_units(&s1, &s3).is_err());
    }

    #[test]
    fn chain_roundtrip() {
        let s = MatrixUnitSystem::from_frames(
            7,
            vec![vec![vec![5, 0], vec![3, 6], vec![1, 2]], vec![vec![4]]],
        )
        .unwrap();
        let chains: Vec<_> = (0..s.block_count()).map(|v| s.chain(v)).collect();
        assert_eq!(MatrixUnitSystem::from_chain(7, &chains).unwrap(), s);
        // composition law e_{ij} e_{jk} = e_{ik}
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    assert_eq!(s.unit(0, i, j).compose(&s.unit(0, j, k)).unwrap(), s.unit(0, i, k));
                }
            }
        }
    }
}
