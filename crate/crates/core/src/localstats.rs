//! Local statistics of labeled actions: word balls, rooted labeled
//! neighborhoods encoded as quotients of the ball, their distributions,
//! distances, the analytic Bernoulli oracle and the verification report.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;

use crate::approx::{to_f64, GroupSpec, SoficApproximation};
use crate::constructions::{ActionApproximation, BernoulliApproximation, BernoulliMode, LabelPlan, TreeingFamily};
use crate::error::{Error, Result};
use crate::perm::{ratio_wide, DyadicLabeling, Rational};
use crate::sampling::{binomial_half_width, chunked};
use crate::word::{reduced_words, Letter, Word};

/// Reduced words of length `≤ r` in the first `r` generators, in the fixed
/// enumeration order (length, then `γ_1 < γ_1⁻¹ < γ_2 < …`).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WordBall {
    radius: usize,
    words: Vec<Word>,
    /// For `i > 0`: the first letter of word `i` and the index of the rest.
    steps: Vec<(Letter, usize)>,
}

pub fn enumerate_words(r: usize) -> WordBall {
    let words = reduced_words(r, r);
    let index: HashMap<&Word, usize> = words.iter().enumerate().map(|(i, w)| (w, i)).collect();
    let steps = words
        .iter()
        .map(|w| match w.letters().split_first() {
            Some((&l, rest)) => (l, index[&Word::new(rest.iter().copied())]),
            None => (Letter::new(0, false), 0),
        })
        .collect();
    WordBall { radius: r, words, steps }
}

impl WordBall {
    pub fn radius(&self) -> usize {
        self.radius
    }

    pub fn words(&self) -> &[Word] {
        &self.words
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    /// Images of `x` under every word, filled in enumeration order.
    fn images(&self, x: usize, step: impl Fn(Letter, usize) -> Option<usize>) -> Vec<Option<usize>> {
        let mut out: Vec<Option<usize>> = Vec::with_capacity(self.words.len());
        out.push(Some(x));
        for &(l, rest) in &self.steps[1..] {
            let y = out[rest].and_then(|y| step(l, y));
            out.push(y);
        }
        out
    }
}

/// A (possibly partial) action by generators on `{0..n-1}`.
pub trait LocalAction: Sync {
    fn n(&self) -> usize;
    fn generator_count(&self) -> usize;
    fn step(&self, l: Letter, x: usize) -> Option<usize>;
}

impl LocalAction for SoficApproximation {
    fn n(&self) -> usize {
        SoficApproximation::n(self)
    }

    fn generator_count(&self) -> usize {
        SoficApproximation::generator_count(self)
    }

    fn step(&self, l: Letter, x: usize) -> Option<usize> {
        Some(self.apply_letter(l, x))
    }
}

impl LocalAction for TreeingFamily {
    fn n(&self) -> usize {
        TreeingFamily::n(self)
    }

    fn generator_count(&self) -> usize {
        self.maps().len()
    }

    fn step(&self, l: Letter, x: usize) -> Option<usize> {
        TreeingFamily::step(self, l, x)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct NeighborhoodSpec {
    pub radius: usize,
    /// Label level read at each vertex; defaults to the radius.
    pub label_level: u32,
    /// Treat generators the action lacks as the identity.
    pub pad: bool,
}

impl NeighborhoodSpec {
    pub fn new(radius: usize) -> Self {
        NeighborhoodSpec { radius, label_level: radius as u32, pad: false }
    }

    pub fn with_label_level(self, label_level: u32) -> Self {
        NeighborhoodSpec { label_level, ..self }
    }

    pub fn padded(self) -> Self {
        NeighborhoodSpec { pad: true, ..self }
    }

    fn check(&self, generators: usize, depth: u32) -> Result<()> {
        if generators < self.radius && !self.pad {
            return Err(Error::InvalidArgument(format!(
                "radius {} needs {} generators, action has {generators} (pad explicitly)",
                self.radius, self.radius
            )));
        }
        if depth < self.label_level {
            return Err(Error::InvalidLabeling(format!(
                "label depth {depth} below the requested level {}",
                self.label_level
            )));
        }
        Ok(())
    }
}

/// Canonical form of an r-labeled r-neighborhood: for every word of the ball,
/// the smallest word index with the same image (`None` where the image is
/// undefined), and one label per class in order of first occurrence.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NeighborhoodClass {
    radius: usize,
    classes: Vec<Option<u32>>,
    labels: Vec<u32>,
}

impl NeighborhoodClass {
    pub fn radius(&self) -> usize {
        self.radius
    }

    pub fn classes(&self) -> &[Option<u32>] {
        &self.classes
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    /// Label of the vertex reached by word `i`.
    pub fn label_of_word(&self, i: usize) -> Option<u32> {
        let c = self.classes[i]?;
        let pos = self.classes[..=c as usize]
            .iter()
            .enumerate()
            .filter(|(j, k)| **k == Some(*j as u32))
            .count();
        Some(self.labels[pos - 1])
    }

    pub fn vertex_count(&self) -> usize {
        self.labels.len()
    }

    fn from_images(radius: usize, images: &[Option<usize>], label: impl Fn(usize) -> u32) -> Self {
        let mut classes = Vec::with_capacity(images.len());
        let mut labels = Vec::new();
        let mut first: HashMap<usize, u32> = HashMap::new();
        for (i, y) in images.iter().enumerate() {
            match y {
                None => classes.push(None),
                Some(y) => {
                    let c = *first.entry(*y).or_insert_with(|| {
                        labels.push(label(*y));
                        i as u32
                    });
                    classes.push(Some(c));
                }
            }
        }
        NeighborhoodClass { radius, classes, labels }
    }

    pub fn encoding(&self) -> String {
        self.to_string()
    }
}

/// `r;class-vector;label-vector`, with `_` for undefined images.
impl fmt::Display for NeighborhoodClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let cls: Vec<String> = self
            .classes
            .iter()
            .map(|c| c.map_or_else(|| "_".to_string(), |c| c.to_string()))
            .collect();
        let lab: Vec<String> = self.labels.iter().map(u32::to_string).collect();
        write!(f, "{};{};{}", self.radius, cls.join(","), lab.join(","))
    }
}

/// Number of reduced words of length ≤ r in r generators.
fn ball_size(r: usize) -> usize {
    let mut total = 1;
    let mut sphere = 2 * r;
    for _ in 0..r {
        total += sphere;
        sphere *= (2 * r).saturating_sub(1);
    }
    total
}

impl FromStr for NeighborhoodClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = |m: &str| Error::InvalidArgument(format!("bad neighborhood encoding {s:?}: {m}"));
        let mut parts = s.trim().split(';');
        let (Some(r), Some(c), Some(l), None) = (parts.next(), parts.next(), parts.next(), parts.next()) else {
            return Err(bad("expected three ';'-separated fields"));
        };
        let radius: usize = r.parse().map_err(|_| bad("radius"))?;
        if radius > 8 {
            return Err(bad("radius too large"));
        }
        let size = ball_size(radius);
        let mut classes = Vec::new();
        for tok in c.split(',') {
            classes.push(match tok {
                "_" => None,
                t => Some(t.parse::<u32>().map_err(|_| bad("class entry"))?),
            });
        }
        if classes.len() != size {
            return Err(bad("class vector length does not match the word ball"));
        }
        let labels: Vec<u32> = if l.is_empty() {
            Vec::new()
        } else {
            l.split(',').map(|t| t.parse().map_err(|_| bad("label"))).collect::<Result<_>>()?
        };
        let mut reps = 0;
        for (i, c) in classes.iter().enumerate() {
            if let Some(c) = *c {
                let c = c as usize;
                if c > i || classes[c] != Some(c as u32) {
                    return Err(bad("class entries must be idempotent representatives"));
                }
                if c == i {
                    reps += 1;
                }
            }
        }
        if reps != labels.len() || labels.contains(&0) {
            return Err(bad("one positive label per class required"));
        }
        Ok(NeighborhoodClass { radius, classes, labels })
    }
}

fn step_padded<A: LocalAction + ?Sized>(a: &A, l: Letter, x: usize) -> Option<usize> {
    if l.gen >= a.generator_count() {
        Some(x)
    } else {
        a.step(l, x)
    }
}

fn neighborhood_of<A: LocalAction + ?Sized>(
    a: &A,
    labeling: &DyadicLabeling,
    ball: &WordBall,
    spec: &NeighborhoodSpec,
    x: usize,
) -> NeighborhoodClass {
    let images = ball.images(x, |l, y| step_padded(a, l, y));
    NeighborhoodClass::from_images(spec.radius, &images, |y| labeling.label_at(y, spec.label_level))
}

pub fn neighborhood(action: &ActionApproximation, x: usize, spec: &NeighborhoodSpec) -> Result<NeighborhoodClass> {
    spec.check(action.approx.generator_count(), action.labeling.depth())?;
    if x >= action.n() {
        return Err(Error::PointOutOfRange { point: x, n: action.n() });
    }
    Ok(neighborhood_of(&action.approx, &action.labeling, &enumerate_words(spec.radius), spec, x))
}

#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct StatsMeta {
    /// `exact`, `sampled` or `oracle`.
    pub mode: String,
    pub n: Option<u64>,
    pub samples: Option<u64>,
    pub seed: Option<u64>,
}

/// Distribution over neighborhood classes, stored as integer weights over a
/// common total so exact statistics stay exact.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LocalStats {
    pub radius: usize,
    pub label_level: u32,
    pub counts: BTreeMap<String, u64>,
    pub total: u64,
    pub meta: StatsMeta,
}

impl LocalStats {
    pub fn new(radius: usize, label_level: u32, counts: BTreeMap<String, u64>, meta: StatsMeta) -> Result<Self> {
        let total = counts
            .values()
            .try_fold(0u64, |acc, &c| acc.checked_add(c))
            .ok_or_else(|| Error::BudgetExceeded("class weights overflow".into()))?;
        if total == 0 {
            return Err(Error::InvalidArgument("statistics with no mass".into()));
        }
        Ok(LocalStats { radius, label_level, counts, total, meta })
    }

    fn from_classes(
        spec: &NeighborhoodSpec,
        counts: HashMap<NeighborhoodClass, u64>,
        meta: StatsMeta,
    ) -> Result<Self> {
        let counts = counts.into_iter().map(|(k, v)| (k.encoding(), v)).collect();
        LocalStats::new(spec.radius, spec.label_level, counts, meta)
    }

    pub fn class_count(&self) -> usize {
        self.counts.len()
    }

    pub fn mass(&self, encoding: &str) -> Rational {
        Rational::new(self.counts.get(encoding).copied().unwrap_or(0), self.total)
    }

    pub fn masses(&self) -> impl Iterator<Item = (&str, Rational)> {
        self.counts.iter().map(|(k, &c)| (k.as_str(), Rational::new(c, self.total)))
    }

    pub fn is_sampled(&self) -> bool {
        self.meta.mode == "sampled"
    }

    /// 99% half-width of a class mass; zero for exact statistics.
    pub fn half_width(&self, encoding: &str) -> f64 {
        if !self.is_sampled() {
            return 0.0;
        }
        let p = to_f64(self.mass(encoding));
        binomial_half_width(p, self.meta.samples.unwrap_or(self.total))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StatsMode {
    Exact,
    Sampled { samples: u64, seed: u64 },
}

fn merge(mut a: HashMap<NeighborhoodClass, u64>, b: HashMap<NeighborhoodClass, u64>) -> HashMap<NeighborhoodClass, u64> {
    for (k, v) in b {
        *a.entry(k).or_insert(0) += v;
    }
    a
}

fn stats_of<A: LocalAction + ?Sized>(
    a: &A,
    labeling: &DyadicLabeling,
    spec: &NeighborhoodSpec,
    mode: StatsMode,
) -> Result<LocalStats> {
    spec.check(a.generator_count(), labeling.depth())?;
    let n = a.n();
    if n == 0 {
        return Err(Error::InvalidArgument("empty point set".into()));
    }
    let ball = enumerate_words(spec.radius);
    match mode {
        StatsMode::Exact => {
            let counts = (0..n)
                .into_par_iter()
                .fold(HashMap::new, |mut acc, x| {
                    *acc.entry(neighborhood_of(a, labeling, &ball, spec, x)).or_insert(0) += 1;
                    acc
                })
                .reduce(HashMap::new, merge);
            let meta = StatsMeta { mode: "exact".into(), n: Some(n as u64), samples: None, seed: None };
            LocalStats::from_classes(spec, counts, meta)
        }
        StatsMode::Sampled { samples, seed } => {
            let parts = chunked(samples, seed, |rng, count| {
                let mut acc = HashMap::new();
                for _ in 0..count {
                    let x = rng.random_range(0..n);
                    *acc.entry(neighborhood_of(a, labeling, &ball, spec, x)).or_insert(0) += 1;
                }
                acc
            });
            let counts = parts.into_iter().fold(HashMap::new(), merge);
            let meta = StatsMeta { mode: "sampled".into(), n: Some(n as u64), samples: Some(samples), seed: Some(seed) };
            LocalStats::from_classes(spec, counts, meta)
        }
    }
}

pub fn local_stats(action: &ActionApproximation, spec: &NeighborhoodSpec, mode: StatsMode) -> Result<LocalStats> {
    stats_of(&action.approx, &action.labeling, spec, mode)
}

/// Statistics of a partial action; words leaving a domain are undefined.
pub fn treeing_local_stats(family: &TreeingFamily, spec: &NeighborhoodSpec, mode: StatsMode) -> Result<LocalStats> {
    stats_of(family, family.labeling(), spec, mode)
}

/// Largest number of label-bearing positions enumerated per base point.
const MAX_ENUMERATED_POSITIONS: u32 = 24;

/// Statistics of a Bernoulli extension with its canonical labeling, exact
/// (enumerating `η` on the positions that matter, per `ξ`) or sampled
/// (drawing `η` lazily) according to the extension's mode.
pub fn bernoulli_local_stats(b: &BernoulliApproximation, spec: &NeighborhoodSpec) -> Result<LocalStats> {
    let base = b.base();
    spec.check(base.generator_count(), spec.label_level)?;
    let plan = b.label_plan(spec.label_level)?;
    let ball = enumerate_words(spec.radius);
    let n = base.n();
    let a = b.alphabet() as u64;
    // per ξ: neighborhood skeleton and, per class, the positions its label reads
    let skeleton = |xi: usize| -> (NeighborhoodClass, Vec<Vec<usize>>, Vec<usize>) {
        let images = ball.images(xi, |l, y| step_padded(base, l, y));
        let class = NeighborhoodClass::from_images(spec.radius, &images, |_| 0);
        let mut slots: Vec<usize> = Vec::new();
        let reads: Vec<Vec<usize>> = images
            .iter()
            .enumerate()
            .filter(|(i, _)| class.classes[*i] == Some(*i as u32))
            .map(|(_, y)| {
                plan.positions(base, y.expect("total action"))
                    .map(|p| match slots.iter().position(|&s| s == p) {
                        Some(k) => k,
                        None => {
                            slots.push(p);
                            slots.len() - 1
                        }
                    })
                    .collect()
            })
            .collect();
        (class, reads, slots)
    };
    let labelled = |class: &NeighborhoodClass, reads: &[Vec<usize>], symbols: &[u32]| -> NeighborhoodClass {
        let labels = reads.iter().map(|r| plan.label_from_symbols(r.iter().map(|&k| symbols[k]))).collect();
        NeighborhoodClass { labels, ..class.clone() }
    };
    match b.mode() {
        BernoulliMode::Exact => {
            let skeletons: Vec<_> = (0..n).into_par_iter().map(skeleton).collect();
            let widest = skeletons.iter().map(|s| s.2.len() as u32).max().unwrap_or(0);
            if widest > MAX_ENUMERATED_POSITIONS || (a as u128).checked_pow(widest).is_none() {
                return Err(Error::BudgetExceeded(format!("{widest} label positions per point")));
            }
            let scale = a.checked_pow(widest).ok_or_else(|| Error::BudgetExceeded("weights overflow".into()))?;
            if scale.checked_mul(n as u64).is_none() {
                return Err(Error::BudgetExceeded("weights overflow".into()));
            }
            let counts = skeletons
                .par_iter()
                .fold(HashMap::new, |mut acc, (class, reads, slots)| {
                    let d = slots.len() as u32;
                    let weight = scale / a.pow(d);
                    let mut symbols = vec![0u32; slots.len()];
                    for code in 0..a.pow(d) {
                        let mut c = code;
                        for s in symbols.iter_mut() {
                            *s = (c % a) as u32;
                            c /= a;
                        }
                        *acc.entry(labelled(class, reads, &symbols)).or_insert(0) += weight;
                    }
                    acc
                })
                .reduce(HashMap::new, merge);
            let meta = StatsMeta { mode: "exact".into(), n: Some(n as u64), samples: None, seed: None };
            LocalStats::from_classes(spec, counts, meta)
        }
        BernoulliMode::Sampled { samples, seed } => {
            let parts = chunked(samples, seed, |rng, count| {
                let mut acc = HashMap::new();
                for _ in 0..count {
                    let xi = rng.random_range(0..n);
                    let (class, reads, slots) = skeleton(xi);
                    let symbols: Vec<u32> = slots.iter().map(|_| rng.random_range(0..a as u32)).collect();
                    *acc.entry(labelled(&class, &reads, &symbols)).or_insert(0) += 1;
                }
                acc
            });
            let counts = parts.into_iter().fold(HashMap::new(), merge);
            let meta = StatsMeta { mode: "sampled".into(), n: Some(n as u64), samples: Some(samples), seed: Some(seed) };
            LocalStats::from_classes(spec, counts, meta)
        }
    }
}

/// Default cap on the number of coordinates the oracle enumerates.
pub const DEFAULT_ORACLE_BUDGET: usize = 24;

/// Exact neighborhood statistics of the Bernoulli shift of `group` over an
/// alphabet of size `alphabet`, with the canonical cylinder labeling.
///
/// Generators beyond those of the group act as the identity. Infinite groups
/// act essentially freely, so classes are the fibres of the ball in the group
/// and only the label coordinates are enumerated; for finite groups the whole
/// configuration space `A^G` is enumerated.
pub fn bernoulli_oracle(group: &GroupSpec, alphabet: u32, spec: &NeighborhoodSpec, budget: usize) -> Result<LocalStats> {
    let plan = LabelPlan::new(group, alphabet, spec.label_level)?;
    let ball = enumerate_words(spec.radius);
    let k = group.generator_count();
    let strip = |w: &Word| Word::new(w.letters().iter().copied().filter(|l| l.gen < k));
    let element = |w: &Word| {
        group
            .element(&strip(w))
            .ok_or_else(|| Error::Unsupported("the oracle needs a group with solvable word problem".into()))
    };
    let hs: Vec<Word> = plan.lookups.iter().map(Word::inverse).collect();
    let a = alphabet as u64;
    let mut counts: HashMap<NeighborhoodClass, u64> = HashMap::new();
    match group.order() {
        None => {
            let elems: Vec<_> = ball.words.iter().map(&element).collect::<Result<_>>()?;
            let mut first: HashMap<_, u32> = HashMap::new();
            let classes: Vec<Option<u32>> =
                elems.iter().enumerate().map(|(i, e)| Some(*first.entry(e.clone()).or_insert(i as u32))).collect();
            let mut coords = Vec::new();
            let mut reads = Vec::new();
            for (i, w) in ball.words.iter().enumerate() {
                if classes[i] != Some(i as u32) {
                    continue;
                }
                let mut r = Vec::new();
                for h in &hs {
                    let e = element(&strip(w).inverse().concat(h))?;
                    let slot = coords.iter().position(|c| *c == e).unwrap_or_else(|| {
                        coords.push(e);
                        coords.len() - 1
                    });
                    r.push(slot);
                }
                reads.push(r);
            }
            check_oracle_budget(coords.len(), a, budget)?;
            let mut symbols = vec![0u32; coords.len()];
            for code in 0..a.pow(coords.len() as u32) {
                fill_digits(&mut symbols, code, a);
                let labels =
                    reads.iter().map(|r| plan.label_from_symbols(r.iter().map(|&s| symbols[s]))).collect();
                let c = NeighborhoodClass { radius: spec.radius, classes: classes.clone(), labels };
                *counts.entry(c).or_insert(0) += 1;
            }
        }
        Some(order) => {
            let reps = group.enumerate_elements(order)?;
            let elems: Vec<_> = reps.iter().map(&element).collect::<Result<_>>()?;
            let index_of = |e| elems.iter().position(|x| *x == e).expect("enumeration covers the group");
            // shift[i][x] = index of g_i⁻¹ · x for ball word i and element x
            let shift: Vec<Vec<usize>> = ball
                .words
                .iter()
                .map(|w| {
                    reps.iter()
                        .map(|x| Ok(index_of(element(&strip(w).inverse().concat(x))?)))
                        .collect::<Result<Vec<_>>>()
                })
                .collect::<Result<_>>()?;
            let label_at: Vec<usize> = hs.iter().map(|h| element(h).map(index_of)).collect::<Result<_>>()?;
            check_oracle_budget(order, a, budget)?;
            let mut f = vec![0u32; order];
            for code in 0..a.pow(order as u32) {
                fill_digits(&mut f, code, a);
                // the point g_i·f is the configuration x ↦ f(g_i⁻¹ x)
                let points: Vec<Vec<u32>> = shift.iter().map(|s| s.iter().map(|&y| f[y]).collect()).collect();
                let images: Vec<Option<usize>> = {
                    let mut seen: Vec<&Vec<u32>> = Vec::new();
                    points
                        .iter()
                        .map(|p| {
                            Some(seen.iter().position(|q| *q == p).unwrap_or_else(|| {
                                seen.push(p);
                                seen.len() - 1
                            }))
                        })
                        .collect()
                };
                let c = NeighborhoodClass::from_images(spec.radius, &images, |slot| {
                    let rep = images.iter().position(|y| *y == Some(slot)).expect("slot is used");
                    plan.label_from_symbols(label_at.iter().map(|&h| points[rep][h]))
                });
                *counts.entry(c).or_insert(0) += 1;
            }
        }
    }
    let meta = StatsMeta { mode: "oracle".into(), n: None, samples: None, seed: None };
    LocalStats::from_classes(spec, counts, meta)
}

fn check_oracle_budget(coords: usize, a: u64, budget: usize) -> Result<()> {
    if coords > budget || (a as u128).checked_pow(coords as u32).is_none_or(|v| v > u64::MAX as u128) {
        return Err(Error::BudgetExceeded(format!("{coords} coordinates exceed the oracle budget {budget}")));
    }
    Ok(())
}

fn fill_digits(out: &mut [u32], mut code: u64, a: u64) {
    for s in out.iter_mut() {
        *s = (code % a) as u32;
        code /= a;
    }
}

/// Sup-norm and total-variation distance over the union of classes.
pub fn stats_distance(s1: &LocalStats, s2: &LocalStats) -> Result<(Rational, Rational)> {
    if s1.radius != s2.radius {
        return Err(Error::RadiusMismatch(s1.radius, s2.radius));
    }
    if s1.label_level != s2.label_level {
        return Err(Error::InvalidArgument(format!(
            "label level {} vs {}",
            s1.label_level, s2.label_level
        )));
    }
    let (t1, t2) = (s1.total as u128, s2.total as u128);
    let mut sup = 0u128;
    let mut sum = 0u128;
    for key in s1.counts.keys().chain(s2.counts.keys().filter(|k| !s1.counts.contains_key(*k))) {
        let c1 = s1.counts.get(key).copied().unwrap_or(0) as u128;
        let c2 = s2.counts.get(key).copied().unwrap_or(0) as u128;
        let d = (c1 * t2).abs_diff(c2 * t1);
        sup = sup.max(d);
        sum += d;
    }
    Ok((ratio_wide(sup, t1 * t2)?, ratio_wide(sum, 2 * t1 * t2)?))
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClassDefect {
    pub encoding: String,
    /// Nearest target class, if the target has any.
    pub matched: Option<String>,
    pub mass: f64,
    /// Words whose vertex label differs from the matched class.
    pub label_violations: usize,
    /// Word pairs identified in the matched class but not here.
    pub collision_violations: usize,
    /// Word pairs separated in the matched class but identified here.
    pub separation_violations: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct VerifyReport {
    pub pass: bool,
    pub epsilon: f64,
    pub sup: Rational,
    pub tv: Rational,
    /// Class whose mass difference is largest, with that difference.
    pub worst_class: Option<(String, f64)>,
    /// Candidate mass in classes with label, collision or separation
    /// violations against their matched target class.
    pub e1: f64,
    pub e2: f64,
    pub e4: f64,
    /// Same as `sup`, as a float.
    pub e3: f64,
    /// Classes realized by either side.
    pub realized_classes: usize,
    pub ball_size: usize,
    /// `ε / (2|U|(|W| + 2|W|²))`.
    pub epsilon1: f64,
    pub within_budget: bool,
    pub classes: Vec<ClassDefect>,
}

fn violations(c: &NeighborhoodClass, g: &NeighborhoodClass) -> (usize, usize, usize) {
    let w = c.classes.len().min(g.classes.len());
    let mut label = 0;
    for i in 0..w {
        if c.label_of_word(i) != g.label_of_word(i) {
            label += 1;
        }
    }
    let (mut collide, mut separate) = (0, 0);
    for i in 0..w {
        for j in i + 1..w {
            let same_c = c.classes[i].is_some() && c.classes[i] == c.classes[j];
            let same_g = g.classes[i].is_some() && g.classes[i] == g.classes[j];
            match (same_g, same_c) {
                (true, false) => collide += 1,
                (false, true) => separate += 1,
                _ => {}
            }
        }
    }
    (label, collide, separate)
}

/// Target classes searched when a candidate class is absent from the target.
const NEAREST_SEARCH_CAP: usize = 4096;

/// PASS iff every class mass differs from the target by less than `ε` plus
/// the sampling half-widths of both sides.
pub fn el_verify(candidate: &LocalStats, target: &LocalStats, epsilon: f64) -> Result<VerifyReport> {
    let (sup, tv) = stats_distance(candidate, target)?;
    let mut pass = true;
    let mut worst: Option<(String, f64)> = None;
    let keys: Vec<&String> = candidate
        .counts
        .keys()
        .chain(target.counts.keys().filter(|k| !candidate.counts.contains_key(*k)))
        .collect();
    for key in &keys {
        let d = (to_f64(candidate.mass(key)) - to_f64(target.mass(key))).abs();
        if d >= epsilon + candidate.half_width(key) + target.half_width(key) {
            pass = false;
        }
        if worst.as_ref().is_none_or(|w| d > w.1) {
            worst = Some(((*key).clone(), d));
        }
    }

    let mut by_mass: Vec<(&String, u64)> = target.counts.iter().map(|(k, &v)| (k, v)).collect();
    by_mass.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
    let parsed_targets: Vec<(String, NeighborhoodClass)> = by_mass
        .iter()
        .take(NEAREST_SEARCH_CAP)
        .map(|(k, _)| Ok(((*k).clone(), k.parse()?)))
        .collect::<Result<_>>()?;
    let mut classes = Vec::with_capacity(candidate.counts.len());
    let (mut e1, mut e2, mut e4) = (0.0, 0.0, 0.0);
    for key in candidate.counts.keys() {
        let mass = to_f64(candidate.mass(key));
        let (matched, (lv, cv, sv)) = if target.counts.contains_key(key) {
            (Some(key.clone()), (0, 0, 0))
        } else {
            let c: NeighborhoodClass = key.parse()?;
            let best = parsed_targets
                .iter()
                .map(|(k, g)| (k, violations(&c, g)))
                .min_by_key(|(k, v)| (v.0 + v.1 + v.2, (*k).clone()));
            match best {
                Some((k, v)) => (Some(k.clone()), v),
                None => (None, (0, 0, 0)),
            }
        };
        if lv > 0 {
            e1 += mass;
        }
        if cv > 0 {
            e2 += mass;
        }
        if sv > 0 {
            e4 += mass;
        }
        classes.push(ClassDefect {
            encoding: key.clone(),
            matched,
            mass,
            label_violations: lv,
            collision_violations: cv,
            separation_violations: sv,
        });
    }
    let ball_size = reduced_words(candidate.radius, candidate.radius).len();
    let realized = keys.len();
    let w = ball_size as f64;
    let epsilon1 = epsilon / (2.0 * realized.max(1) as f64 * (w + 2.0 * w * w));
    let within_budget = e1.max(e2).max(e4) < epsilon1;
    Ok(VerifyReport {
        pass,
        epsilon,
        e3: to_f64(sup),
        sup,
        tv,
        worst_class: worst,
        e1,
        e2,
        e4,
        realized_classes: realized,
        ball_size,
        epsilon1,
        within_budget,
        classes,
    })
}

/// Statistics of `candidate` in `mode`, checked against `target`.
pub fn el_verify_action(
    candidate: &ActionApproximation,
    target: &LocalStats,
    epsilon: f64,
    mode: StatsMode,
) -> Result<VerifyReport> {
    let spec = NeighborhoodSpec::new(target.radius).with_label_level(target.label_level);
    let spec = if candidate.approx.generator_count() < spec.radius { spec.padded() } else { spec };
    el_verify(&local_stats(candidate, &spec, mode)?, target, epsilon)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::approx::make_base;
    use crate::perm::Permutation;

    fn cycle_action(n: usize, labels: Vec<u32>, depth: u32) -> ActionApproximation {
        let a = make_base(&GroupSpec::integer(), n, 0).unwrap();
        ActionApproximation::new(a, DyadicLabeling::new(depth, labels).unwrap()).unwrap()
    }

    #[test]
    fn ball_size_counts_reduced_words() {
        for r in 0..5 {
            assert_eq!(ball_size(r), reduced_words(r, r).len());
        }
    }

    #[test]
    fn ball_sizes() {
        assert_eq!(enumerate_words(0).len(), 1);
        assert_eq!(enumerate_words(1).len(), 3);
        assert_eq!(enumerate_words(2).len(), 17);
        assert!(enumerate_words(2).words()[0].is_empty());
    }

    #[test]
    fn neighborhood_examples() {
        let a = cycle_action(4, vec![1, 1, 2, 2], 1);
        let c = neighborhood(&a, 0, &NeighborhoodSpec::new(1)).unwrap();
        assert_eq!(c.encoding(), "1;0,1,2;1,1,2");
        let id = ActionApproximation::new(
            SoficApproximation::new(GroupSpec::integer(), vec![Permutation::identity(3)], None).unwrap(),
            DyadicLabeling::new(1, vec![2, 1, 1]).unwrap(),
        )
        .unwrap();
        let c = neighborhood(&id, 0, &NeighborhoodSpec::new(1)).unwrap();
        assert_eq!(c.encoding(), "1;0,0,0;2");
        assert!(neighborhood(&a, 0, &NeighborhoodSpec::new(2)).is_err());
        assert!(neighborhood(&a, 0, &NeighborhoodSpec::new(2).padded()).is_err(), "depth 1 < level 2");
    }

    #[test]
    fn stats_examples() {
        let a = cycle_action(4, vec![1, 1, 2, 2], 1);
        let s = local_stats(&a, &NeighborhoodSpec::new(1), StatsMode::Exact).unwrap();
        assert_eq!(s.class_count(), 4);
        assert!(s.masses().all(|(_, p)| p == Rational::new(1, 4)));
        let (sup, tv) = stats_distance(&s, &s).unwrap();
        assert_eq!((sup, tv), (Rational::from_integer(0), Rational::from_integer(0)));
        let big = local_stats(&a.amplify(5).unwrap(), &NeighborhoodSpec::new(1), StatsMode::Exact).unwrap();
        assert_eq!(stats_distance(&s, &big).unwrap().0, Rational::from_integer(0));
        assert_eq!(s.counts.values().sum::<u64>(), s.total);
    }

    #[test]
    fn encoding_round_trip() {
        for enc in ["1;0,1,2;1,1,2", "1;0,0,0;2", "0;0;1", "1;0,_,2;1,1"] {
            let c: NeighborhoodClass = enc.parse().unwrap();
            assert_eq!(c.encoding(), enc);
        }
        for bad in ["1;0,1;1", "1;0,2,1;1,1,1", "1;0,1,2;1,1", "x;0;1", "1;1,1,2;1,1"] {
            assert!(bad.parse::<NeighborhoodClass>().is_err(), "{bad}");
        }
    }

    #[test]
    fn oracle_examples() {
        let s = bernoulli_oracle(&GroupSpec::integer(), 2, &NeighborhoodSpec::new(1), DEFAULT_ORACLE_BUDGET).unwrap();
        assert_eq!(s.class_count(), 8);
        assert!(s.masses().all(|(_, p)| p == Rational::new(1, 8)));
        let trivial = GroupSpec::table(vec![vec![0]], vec![]).unwrap();
        let t = bernoulli_oracle(&trivial, 2, &NeighborhoodSpec::new(1), DEFAULT_ORACLE_BUDGET).unwrap();
        assert_eq!(t.class_count(), 2);
        assert!(t.masses().all(|(_, p)| p == Rational::new(1, 2)));
        let r2 = bernoulli_oracle(&GroupSpec::integer(), 2, &NeighborhoodSpec::new(2), DEFAULT_ORACLE_BUDGET).unwrap();
        assert_eq!(r2.total, 64);
        assert!(bernoulli_oracle(&GroupSpec::integer(), 2, &NeighborhoodSpec::new(2), 5).is_err());
    }

    #[test]
    fn verify_examples() {
        let a = cycle_action(8, vec![1, 1, 2, 2, 3, 3, 4, 4], 2);
        let spec = NeighborhoodSpec::new(1);
        let s = local_stats(&a, &spec, StatsMode::Exact).unwrap();
        let rep = el_verify(&s, &s, 1e-9).unwrap();
        assert!(rep.pass);
        assert_eq!((rep.e1, rep.e2, rep.e4, rep.e3), (0.0, 0.0, 0.0, 0.0));
        // relabel the cell {0, 1} (mass 1/4) under the identity action
        let id = |labels: Vec<u32>| {
            ActionApproximation::new(
                SoficApproximation::new(GroupSpec::integer(), vec![Permutation::identity(8)], None).unwrap(),
                DyadicLabeling::new(2, labels).unwrap(),
            )
            .unwrap()
        };
        let s = local_stats(&id(vec![1, 1, 2, 2, 3, 3, 4, 4]), &spec, StatsMode::Exact).unwrap();
        let t = local_stats(&id(vec![3, 3, 2, 2, 3, 3, 4, 4]), &spec, StatsMode::Exact).unwrap();
        let rep = el_verify(&t, &s, 0.1).unwrap();
        assert!(!rep.pass);
        assert!(to_f64(rep.sup) >= 0.25);
    }
}
