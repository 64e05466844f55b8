//! Sofic approximations of finitely generated groups: generator permutations
//! on `n` points, word evaluation, defect/trace tables, amplification and
//! tensor products.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::perm::{Permutation, Rational};
use crate::sampling::seeded_rng;
use crate::word::{reduced_words, Letter, Word};

/// The group being approximated.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum GroupKind {
    /// `Z/m` with one generator.
    Cyclic { order: usize },
    /// A finite group from its multiplication table (`table[a][b] = a·b`) and
    /// a list of generating elements.
    FiniteTable { table: Vec<Vec<usize>>, generators: Vec<usize> },
    Free { rank: usize },
    Integer,
    /// `Z^d`, approximated by translations of a box with wrap-around.
    FolnerBox { dims: Vec<usize> },
    /// Generators and relators only; triviality is decided by the caller.
    Presented { rank: usize },
}

/// Canonical form of a group element, where the word problem is solvable.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum GroupElement {
    Finite(usize),
    Lattice(Vec<i64>),
    Free(Vec<i64>),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GroupSpec {
    kind: GroupKind,
    extra_relators: Vec<Word>,
    nontrivial: Vec<Word>,
}

impl GroupSpec {
    pub fn cyclic(order: usize) -> Result<Self> {
        if order == 0 {
            return Err(Error::InvalidGroup("cyclic group of order 0".into()));
        }
        Ok(Self::from_kind(GroupKind::Cyclic { order }))
    }

    pub fn integer() -> Self {
        Self::from_kind(GroupKind::Integer)
    }

    pub fn free(rank: usize) -> Self {
        Self::from_kind(GroupKind::Free { rank })
    }

    pub fn folner_box(dims: Vec<usize>) -> Result<Self> {
        if dims.is_empty() || dims.contains(&0) {
            return Err(Error::InvalidGroup(format!("bad box dimensions {dims:?}")));
        }
        Ok(Self::from_kind(GroupKind::FolnerBox { dims }))
    }

    /// Validates the table (Latin square with identity, associative) and the
    /// generator list.
    pub fn table(table: Vec<Vec<usize>>, generators: Vec<usize>) -> Result<Self> {
        validate_table(&table)?;
        if let Some(&g) = generators.iter().find(|&&g| g >= table.len()) {
            return Err(Error::InvalidGroup(format!("generator {g} is not a group element")));
        }
        Ok(Self::from_kind(GroupKind::FiniteTable { table, generators }))
    }

    pub fn presented(rank: usize, relators: Vec<Word>) -> Result<Self> {
        let spec = Self::from_kind(GroupKind::Presented { rank });
        spec.with_relators(relators)
    }

    fn from_kind(kind: GroupKind) -> Self {
        GroupSpec { kind, extra_relators: Vec::new(), nontrivial: Vec::new() }
    }

    pub fn with_relators(mut self, relators: Vec<Word>) -> Result<Self> {
        for r in &relators {
            self.check_word(r)?;
        }
        self.extra_relators.extend(relators);
        Ok(self)
    }

    /// Words the caller asserts are nontrivial (needed for presented groups).
    pub fn with_nontrivial(mut self, words: Vec<Word>) -> Result<Self> {
        for w in &words {
            self.check_word(w)?;
        }
        self.nontrivial.extend(words);
        Ok(self)
    }

    pub fn kind(&self) -> &GroupKind {
        &self.kind
    }

    pub fn extra_relators(&self) -> &[Word] {
        &self.extra_relators
    }

    pub fn nontrivial_words(&self) -> &[Word] {
        &self.nontrivial
    }

    pub fn generator_count(&self) -> usize {
        match &self.kind {
            GroupKind::Cyclic { .. } | GroupKind::Integer => 1,
            GroupKind::FiniteTable { generators, .. } => generators.len(),
            GroupKind::Free { rank } | GroupKind::Presented { rank } => *rank,
            GroupKind::FolnerBox { dims } => dims.len(),
        }
    }

    pub fn order(&self) -> Option<usize> {
        match &self.kind {
            GroupKind::Cyclic { order } => Some(*order),
            GroupKind::FiniteTable { table, .. } => Some(table.len()),
            GroupKind::Free { rank: 0 } => Some(1),
            _ => None,
        }
    }

    pub fn check_word(&self, w: &Word) -> Result<()> {
        let k = self.generator_count();
        match w.max_generator() {
            Some(g) if g >= k => Err(Error::GeneratorOutOfRange { index: g, count: k }),
            _ => Ok(()),
        }
    }

    /// Built-in relators of the kind followed by caller-supplied ones.
    pub fn relators(&self) -> Vec<Word> {
        let mut out = Vec::new();
        match &self.kind {
            GroupKind::Cyclic { order } => out.push(Word::power(0, *order as i64)),
            GroupKind::FiniteTable { table, generators } => {
                for (i, &g) in generators.iter().enumerate() {
                    out.push(Word::power(i, element_order(table, g) as i64));
                }
            }
            GroupKind::FolnerBox { dims } => {
                for i in 0..dims.len() {
                    for j in i + 1..dims.len() {
                        out.push(Word::new([
                            Letter::new(i, false),
                            Letter::new(j, false),
                            Letter::new(i, true),
                            Letter::new(j, true),
                        ]));
                    }
                }
            }
            GroupKind::Free { .. } | GroupKind::Integer | GroupKind::Presented { .. } => {}
        }
        for r in &self.extra_relators {
            if !out.contains(r) {
                out.push(r.clone());
            }
        }
        out
    }

    /// Canonical form of `w`, or `None` for presented groups.
    pub fn element(&self, w: &Word) -> Option<GroupElement> {
        match &self.kind {
            GroupKind::Cyclic { order } => {
                let s = w.exponent_vector(1)[0];
                Some(GroupElement::Finite(s.rem_euclid(*order as i64) as usize))
            }
            GroupKind::FiniteTable { table, generators } => {
                let id = table_identity(table);
                let mut acc = id;
                for l in w.letters() {
                    let g = generators[l.gen];
                    let g = if l.inv { table_inverse(table, g) } else { g };
                    acc = table[acc][g];
                }
                Some(GroupElement::Finite(acc))
            }
            GroupKind::Free { .. } => Some(GroupElement::Free(w.to_signed())),
            GroupKind::Integer => Some(GroupElement::Lattice(w.exponent_vector(1))),
            GroupKind::FolnerBox { dims } => Some(GroupElement::Lattice(w.exponent_vector(dims.len()))),
            GroupKind::Presented { .. } => None,
        }
    }

    /// Whether `w` is the identity; `None` when undecided (presented groups
    /// with a word outside the caller's lists).
    pub fn is_trivial(&self, w: &Word) -> Option<bool> {
        if w.is_empty() {
            return Some(true);
        }
        if let GroupKind::Presented { .. } = self.kind {
            if self.nontrivial.contains(w) {
                return Some(false);
            }
            let rel = self.relators();
            if rel.iter().any(|r| r == w || &r.inverse() == w) {
                return Some(true);
            }
            return None;
        }
        let e = self.element(&Word::empty());
        Some(self.element(w) == e)
    }

    pub fn is_abelian(&self) -> bool {
        match &self.kind {
            GroupKind::Cyclic { .. } | GroupKind::Integer | GroupKind::FolnerBox { .. } => true,
            GroupKind::FiniteTable { table, generators } => generators
                .iter()
                .all(|&a| generators.iter().all(|&b| table[a][b] == table[b][a])),
            GroupKind::Free { rank } | GroupKind::Presented { rank } => *rank <= 1,
        }
    }

    /// The first `count` distinct group elements in shortlex order of
    /// representative words, starting at the identity.
    pub fn enumerate_elements(&self, count: usize) -> Result<Vec<Word>> {
        let k = self.generator_count();
        let mut seen = std::collections::HashSet::new();
        let mut out = Vec::new();
        let mut len = 0usize;
        let mut stale = 0usize;
        while out.len() < count {
            let before = out.len();
            for w in reduced_words(k, len).into_iter().filter(|w| w.len() == len) {
                let e = self.element(&w).ok_or_else(|| {
                    Error::Unsupported("element enumeration needs a solvable word problem".into())
                })?;
                if seen.insert(e) {
                    out.push(w);
                    if out.len() == count {
                        break;
                    }
                }
            }
            if out.len() == before {
                stale += 1;
                if stale > 1 || k == 0 {
                    return Err(Error::InvalidArgument(format!(
                        "group has only {} elements, {count} requested",
                        out.len()
                    )));
                }
            } else {
                stale = 0;
            }
            len += 1;
        }
        Ok(out)
    }
}

fn validate_table(table: &[Vec<usize>]) -> Result<()> {
    let m = table.len();
    if m == 0 {
        return Err(Error::InvalidGroup("empty multiplication table".into()));
    }
    if m > 512 {
        return Err(Error::InvalidGroup(format!("table of order {m} too large")));
    }
    for (a, row) in table.iter().enumerate() {
        if row.len() != m {
            return Err(Error::InvalidGroup(format!("row {a} has {} entries", row.len())));
        }
        let mut seen = vec![false; m];
        for &c in row {
            if c >= m || seen[c] {
                return Err(Error::InvalidGroup(format!("row {a} is not a permutation")));
            }
            seen[c] = true;
        }
    }
    for b in 0..m {
        let mut seen = vec![false; m];
        for row in table {
            if seen[row[b]] {
                return Err(Error::InvalidGroup(format!("column {b} is not a permutation")));
            }
            seen[row[b]] = true;
        }
    }
    let id = (0..m)
        .find(|&e| (0..m).all(|x| table[e][x] == x && table[x][e] == x))
        .ok_or_else(|| Error::InvalidGroup("no identity element".into()))?;
    let _ = id;
    for a in 0..m {
        for b in 0..m {
            for c in 0..m {
                if table[table[a][b]][c] != table[a][table[b][c]] {
                    return Err(Error::InvalidGroup(format!("not associative at ({a},{b},{c})")));
                }
            }
        }
    }
    Ok(())
}

fn table_identity(table: &[Vec<usize>]) -> usize {
    (0..table.len())
        .find(|&e| (0..table.len()).all(|x| table[e][x] == x))
        .expect("validated table has an identity")
}

fn table_inverse(table: &[Vec<usize>], g: usize) -> usize {
    let id = table_identity(table);
    (0..table.len()).find(|&x| table[g][x] == id).expect("group element has an inverse")
}

fn element_order(table: &[Vec<usize>], g: usize) -> usize {
    let id = table_identity(table);
    let mut acc = g;
    let mut k = 1;
    while acc != id {
        acc = table[acc][g];
        k += 1;
    }
    k
}

/// Generator permutations on `n` points for a [`GroupSpec`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SoficApproximation {
    spec: GroupSpec,
    gens: Vec<Permutation>,
    inverses: Vec<Permutation>,
    n: usize,
    seed: Option<u64>,
}

impl SoficApproximation {
    pub fn new(spec: GroupSpec, gens: Vec<Permutation>, seed: Option<u64>) -> Result<Self> {
        let k = spec.generator_count();
        if gens.len() != k {
            return Err(Error::GeneratorCountMismatch { left: k, right: gens.len() });
        }
        let n = gens.first().map_or(0, Permutation::len);
        if let Some(g) = gens.iter().find(|g| g.len() != n) {
            return Err(Error::SizeMismatch { expected: n, got: g.len() });
        }
        Self::assemble(spec, gens, n, seed)
    }

    /// As [`SoficApproximation::new`] but with an explicit point count, for
    /// groups without generators.
    pub fn with_points(spec: GroupSpec, gens: Vec<Permutation>, n: usize, seed: Option<u64>) -> Result<Self> {
        let k = spec.generator_count();
        if gens.len() != k {
            return Err(Error::GeneratorCountMismatch { left: k, right: gens.len() });
        }
        if let Some(g) = gens.iter().find(|g| g.len() != n) {
            return Err(Error::SizeMismatch { expected: n, got: g.len() });
        }
        Self::assemble(spec, gens, n, seed)
    }

    fn assemble(spec: GroupSpec, gens: Vec<Permutation>, n: usize, seed: Option<u64>) -> Result<Self> {
        let inverses = gens.iter().map(Permutation::inverse).collect();
        Ok(SoficApproximation { spec, gens, inverses, n, seed })
    }

    pub fn spec(&self) -> &GroupSpec {
        &self.spec
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn generator_count(&self) -> usize {
        self.gens.len()
    }

    pub fn generators(&self) -> &[Permutation] {
        &self.gens
    }

    pub fn generator(&self, i: usize) -> &Permutation {
        &self.gens[i]
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn with_spec(&self, spec: GroupSpec) -> Result<Self> {
        Self::with_points(spec, self.gens.clone(), self.n, self.seed)
    }

    #[inline]
    pub fn apply_letter(&self, l: Letter, x: usize) -> usize {
        if l.inv {
            self.inverses[l.gen].apply(x)
        } else {
            self.gens[l.gen].apply(x)
        }
    }

    /// Image of `x` under the word: the last letter acts first.
    #[inline]
    pub fn apply_word(&self, w: &Word, x: usize) -> usize {
        w.letters().iter().rev().fold(x, |y, &l| self.apply_letter(l, y))
    }

    /// `u_{i1} u_{i2} … u_{is}` for `w = γ_{i1} … γ_{is}`.
    pub fn evaluate_word(&self, w: &Word) -> Result<Permutation> {
        if let Some(g) = w.max_generator() {
            if g >= self.generator_count() {
                return Err(Error::GeneratorOutOfRange { index: g, count: self.generator_count() });
            }
        }
        let images = (0..self.n).map(|x| self.apply_word(w, x)).collect();
        Ok(Permutation::from_vec_unchecked(images))
    }

    /// Fraction of points fixed by the evaluated word.
    pub fn word_trace(&self, w: &Word) -> Result<Rational> {
        Ok(self.evaluate_word(w)?.fixed_fraction())
    }

    /// `Θ ⊗ 1_r`: point `(x, j)`, stored at `x·r + j`, goes to `(g(x), j)`.
    pub fn amplify(&self, r: usize) -> Result<Self> {
        if r == 0 {
            return Err(Error::InvalidArgument("amplification factor must be ≥ 1".into()));
        }
        if r == 1 {
            return Ok(self.clone());
        }
        let gens = self
            .gens
            .iter()
            .map(|g| {
                let images = (0..self.n * r).map(|p| g.apply(p / r) * r + p % r).collect();
                Permutation::from_vec_unchecked(images)
            })
            .collect();
        Self::with_points(self.spec.clone(), gens, self.n * r, self.seed)
    }

    /// Generator `g` acts on `(x, y)`, stored at `x·b.n + y`, as `(g_a x, g_b y)`.
    pub fn tensor_pair(&self, other: &SoficApproximation) -> Result<Self> {
        if self.generator_count() != other.generator_count() {
            return Err(Error::GeneratorCountMismatch {
                left: self.generator_count(),
                right: other.generator_count(),
            });
        }
        let m = other.n;
        let gens = self
            .gens
            .iter()
            .zip(&other.gens)
            .map(|(ga, gb)| {
                let images =
                    (0..self.n * m).map(|p| ga.apply(p / m) * m + gb.apply(p % m)).collect();
                Permutation::from_vec_unchecked(images)
            })
            .collect();
        Self::with_points(self.spec.clone(), gens, self.n * m, self.seed)
    }

    /// Relator defects and the fixed-fraction table of nontrivial words in the
    /// ball of radius `r`.
    pub fn defect_report(&self, r: usize) -> Result<DefectReport> {
        if r == 0 {
            return Err(Error::InvalidArgument("radius must be ≥ 1".into()));
        }
        let relators = self.spec.relators();
        let relator_defects: Vec<WordValue> = relators
            .par_iter()
            .map(|w| {
                let p = self.evaluate_word(w)?;
                Ok(WordValue {
                    word: w.clone(),
                    value: p.normalized_hamming(&Permutation::identity(self.n))?,
                })
            })
            .collect::<Result<_>>()?;
        let words: Vec<Word> = reduced_words(self.generator_count(), r)
            .into_iter()
            .filter(|w| self.spec.is_trivial(w) == Some(false))
            .collect();
        let word_traces: Vec<WordValue> = words
            .par_iter()
            .map(|w| Ok(WordValue { word: w.clone(), value: self.word_trace(w)? }))
            .collect::<Result<_>>()?;
        Ok(DefectReport::new(r, relator_defects, word_traces))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WordValue {
    pub word: Word,
    pub value: Rational,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DefectReport {
    pub radius: usize,
    /// `normalized_hamming(evaluate(ρ), id)` per relator.
    pub relator_defects: Vec<WordValue>,
    /// `fixed_fraction(evaluate(w))` per nontrivial word, in enumeration order.
    pub word_traces: Vec<WordValue>,
    pub max_relator_defect: Rational,
    pub max_trace: Rational,
    pub mean_trace: f64,
}

impl DefectReport {
    fn new(radius: usize, relator_defects: Vec<WordValue>, word_traces: Vec<WordValue>) -> Self {
        let zero = Rational::from_integer(0);
        let max_relator_defect = relator_defects.iter().map(|v| v.value).max().unwrap_or(zero);
        let max_trace = word_traces.iter().map(|v| v.value).max().unwrap_or(zero);
        let mean_trace = if word_traces.is_empty() {
            0.0
        } else {
            word_traces.iter().map(|v| to_f64(v.value)).sum::<f64>() / word_traces.len() as f64
        };
        DefectReport { radius, relator_defects, word_traces, max_relator_defect, max_trace, mean_trace }
    }

    pub fn trace_of(&self, w: &Word) -> Option<Rational> {
        self.word_traces.iter().find(|v| &v.word == w).map(|v| v.value)
    }
}

pub fn to_f64(r: Rational) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

/// Base approximations for the built-in group kinds.
///
/// Cyclic and table groups give copies of the regular representation (so `n`
/// must be a multiple of the order); integers give the `n`-cycle; free groups
/// give independent uniform permutations drawn from `seed`; a box `Z^d`
/// gives coordinate translations with wrap-around on `n = ∏ dims` points.
pub fn make_base(spec: &GroupSpec, n: usize, seed: u64) -> Result<SoficApproximation> {
    let spec = spec.clone();
    match spec.kind().clone() {
        GroupKind::Cyclic { order } => {
            if n == 0 || n % order != 0 {
                return Err(Error::IncompatibleSize(format!("n = {n} is not a multiple of {order}")));
            }
            let images = (0..n).map(|x| (x / order) * order + (x % order + 1) % order).collect();
            SoficApproximation::new(spec, vec![Permutation::from_vec_unchecked(images)], None)
        }
        GroupKind::FiniteTable { table, generators } => {
            let m = table.len();
            if n == 0 || n % m != 0 {
                return Err(Error::IncompatibleSize(format!("n = {n} is not a multiple of {m}")));
            }
            let gens = generators
                .iter()
                .map(|&s| {
                    let images = (0..n).map(|x| (x / m) * m + table[s][x % m]).collect();
                    Permutation::from_vec_unchecked(images)
                })
                .collect();
            SoficApproximation::with_points(spec, gens, n, None)
        }
        GroupKind::Free { rank } => {
            let mut rng = seeded_rng(seed);
            let gens = (0..rank).map(|_| Permutation::random(n, &mut rng)).collect();
            SoficApproximation::with_points(spec, gens, n, Some(seed))
        }
        GroupKind::Integer => {
            if n == 0 {
                return Err(Error::IncompatibleSize("n must be ≥ 1".into()));
            }
            SoficApproximation::new(spec, vec![Permutation::cycle(n)], None)
        }
        GroupKind::FolnerBox { dims } => {
            let volume: usize = dims.iter().product();
            if n != volume {
                return Err(Error::IncompatibleSize(format!("n = {n} but the box has volume {volume}")));
            }
            // row-major: the last coordinate varies fastest
            let mut strides = vec![1usize; dims.len()];
            for i in (0..dims.len().saturating_sub(1)).rev() {
                strides[i] = strides[i + 1] * dims[i + 1];
            }
            let gens = (0..dims.len())
                .map(|i| {
                    let images = (0..n)
                        .map(|x| {
                            let c = (x / strides[i]) % dims[i];
                            x - c * strides[i] + ((c + 1) % dims[i]) * strides[i]
                        })
                        .collect();
                    Permutation::from_vec_unchecked(images)
                })
                .collect();
            SoficApproximation::new(spec, gens, None)
        }
        GroupKind::Presented { .. } => Err(Error::Unsupported(
            "no generic base approximation for presented groups; supply permutations".into(),
        )),
    }
}
