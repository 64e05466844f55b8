//! Derived approximations: Bernoulli extensions, wreath products, amalgamated
//! gluings, product actions, integer actions and treeing restrictions.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::approx::{GroupSpec, SoficApproximation};
use crate::error::{Error, Result};
use crate::linking::{align_labelings, align_labelings_with, AlignMode};
use crate::perm::{ratio, ratio_wide, DyadicLabeling, PartialInjection, Permutation, Rational};
use crate::sampling::{chunked, seeded_rng};
use crate::word::{reduced_words, Letter, Word};

/// A generator approximation together with the X-set structure on its points.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ActionApproximation {
    pub approx: SoficApproximation,
    pub labeling: DyadicLabeling,
}

impl ActionApproximation {
    pub fn new(approx: SoficApproximation, labeling: DyadicLabeling) -> Result<Self> {
        if labeling.n() != approx.n() {
            return Err(Error::SizeMismatch { expected: approx.n(), got: labeling.n() });
        }
        Ok(ActionApproximation { approx, labeling })
    }

    pub fn n(&self) -> usize {
        self.approx.n()
    }

    pub fn amplify(&self, r: usize) -> Result<Self> {
        Ok(ActionApproximation { approx: self.approx.amplify(r)?, labeling: self.labeling.lift(r) })
    }
}

/// The cylinder `{f : f(g_j) = i_j for all j}`.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct CylinderSpec {
    elements: Vec<Word>,
    symbols: Vec<u32>,
}

impl CylinderSpec {
    /// Rejects unequal lengths and repeated words; distinctness of the
    /// evaluated points is a property of the base and shows up in the
    /// injectivity fraction instead.
    pub fn new(elements: Vec<Word>, symbols: Vec<u32>) -> Result<Self> {
        if elements.len() != symbols.len() {
            return Err(Error::MalformedCylinder(format!(
                "{} elements but {} symbols",
                elements.len(),
                symbols.len()
            )));
        }
        for (i, w) in elements.iter().enumerate() {
            if elements[..i].contains(w) {
                return Err(Error::MalformedCylinder(format!("element {w} listed twice")));
            }
        }
        Ok(CylinderSpec { elements, symbols })
    }

    pub fn empty() -> Self {
        CylinderSpec::default()
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn elements(&self) -> &[Word] {
        &self.elements
    }

    pub fn symbols(&self) -> &[u32] {
        &self.symbols
    }

    fn check(&self, b: &BernoulliApproximation) -> Result<()> {
        for w in &self.elements {
            b.base.spec().check_word(w).map_err(|e| Error::MalformedCylinder(e.to_string()))?;
        }
        if let Some(&s) = self.symbols.iter().find(|&&s| s >= b.alphabet) {
            return Err(Error::MalformedCylinder(format!(
                "symbol {s} outside alphabet of size {}",
                b.alphabet
            )));
        }
        Ok(())
    }
}

/// Text form: `word=symbol` entries separated by `;`, e.g. `e=1; 1 -2=0`.
impl fmt::Display for CylinderSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> =
            self.elements.iter().zip(&self.symbols).map(|(w, s)| format!("{w}={s}")).collect();
        write!(f, "{}", parts.join("; "))
    }
}

impl FromStr for CylinderSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut elements = Vec::new();
        let mut symbols = Vec::new();
        for part in s.split(';').map(str::trim).filter(|p| !p.is_empty()) {
            let (w, sym) = part
                .split_once('=')
                .ok_or_else(|| Error::MalformedCylinder(format!("expected word=symbol, got {part:?}")))?;
            elements.push(w.parse().map_err(|e: Error| Error::MalformedCylinder(e.to_string()))?);
            symbols.push(
                sym.trim()
                    .parse()
                    .map_err(|_| Error::MalformedCylinder(format!("bad symbol {sym:?}")))?,
            );
        }
        CylinderSpec::new(elements, symbols)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BernoulliMode {
    Exact,
    Sampled { samples: u64, seed: u64 },
}

/// Default cap on `n·a^n` for exact mode (16 points over a binary alphabet).
pub const DEFAULT_EXACT_BUDGET: u128 = 1 << 20;

/// The extension of a base approximation `σ` on `Y = {0..n-1}` to
/// `Y × A^Y`, with the group acting by `(ξ, η) ↦ (σ_g ξ, η)`.
///
/// The extended space is virtual: exact queries enumerate or use per-`ξ`
/// closed forms, sampled queries draw `η` lazily.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BernoulliApproximation {
    base: SoficApproximation,
    alphabet: u32,
    mode: BernoulliMode,
}

pub fn bernoulli_extend(base: &SoficApproximation, alphabet: u32, mode: BernoulliMode) -> Result<BernoulliApproximation> {
    bernoulli_extend_with_budget(base, alphabet, mode, DEFAULT_EXACT_BUDGET)
}

pub fn bernoulli_extend_with_budget(
    base: &SoficApproximation,
    alphabet: u32,
    mode: BernoulliMode,
    budget: u128,
) -> Result<BernoulliApproximation> {
    if alphabet == 0 {
        return Err(Error::InvalidArgument("alphabet must be non-empty".into()));
    }
    let b = BernoulliApproximation { base: base.clone(), alphabet, mode };
    if mode == BernoulliMode::Exact {
        match b.point_count() {
            Some(size) if size <= budget => {}
            size => {
                return Err(Error::BudgetExceeded(format!(
                    "extended space of {} points exceeds the exact-mode budget {budget}",
                    size.map_or("more than 2^128".to_string(), |s| s.to_string())
                )))
            }
        }
    }
    Ok(b)
}

/// Bernoulli extension over the alphabet `{0,1}^multiplicity`.
pub fn generalized_bernoulli(
    base: &SoficApproximation,
    multiplicity: u32,
    mode: BernoulliMode,
) -> Result<BernoulliApproximation> {
    if multiplicity == 0 || multiplicity > 31 {
        return Err(Error::InvalidArgument(format!("multiplicity {multiplicity} outside 1..=31")));
    }
    bernoulli_extend(base, 1 << multiplicity, mode)
}

#[derive(Clone, Debug, PartialEq)]
pub struct CylinderTrace {
    /// Measure of the cylinder set: exact, or the sampled frequency.
    pub trace: Rational,
    /// Fraction of `ξ` at which the points `σ_{g_j}⁻¹ξ` are pairwise distinct.
    pub injective_fraction: Rational,
    /// 99% half-width of the sampled estimate.
    pub half_width: Option<f64>,
}

/// The symbol constraints `(position, symbol)` are satisfiable; returns the
/// number of distinct positions.
fn distinct_if_consistent(cons: &mut [(usize, u32)]) -> Option<u32> {
    cons.sort_unstable();
    let mut distinct = 0;
    for i in 0..cons.len() {
        if i > 0 && cons[i].0 == cons[i - 1].0 {
            if cons[i].1 != cons[i - 1].1 {
                return None;
            }
        } else {
            distinct += 1;
        }
    }
    Some(distinct)
}

fn checked_pow(a: u32, e: u32) -> Result<u128> {
    (a as u128)
        .checked_pow(e)
        .ok_or_else(|| Error::BudgetExceeded(format!("{a}^{e} overflows")))
}

impl BernoulliApproximation {
    pub fn base(&self) -> &SoficApproximation {
        &self.base
    }

    pub fn alphabet(&self) -> u32 {
        self.alphabet
    }

    pub fn mode(&self) -> BernoulliMode {
        self.mode
    }

    pub fn is_exact(&self) -> bool {
        self.mode == BernoulliMode::Exact
    }

    pub fn with_mode(&self, mode: BernoulliMode) -> Self {
        BernoulliApproximation { mode, ..self.clone() }
    }

    /// `n·a^n`, if it fits.
    pub fn point_count(&self) -> Option<u128> {
        let n = self.base.n() as u32;
        (self.alphabet as u128).checked_pow(n)?.checked_mul(n as u128)
    }

    /// `σ_g⁻¹ ξ` for each cylinder element.
    fn cylinder_positions(&self, c: &CylinderSpec) -> Vec<Word> {
        c.elements.iter().map(Word::inverse).collect()
    }

    pub fn cylinder_trace(&self, c: &CylinderSpec) -> Result<CylinderTrace> {
        c.check(self)?;
        let n = self.base.n();
        let lookups = self.cylinder_positions(c);
        let m = c.len() as u32;
        let mut injective = 0usize;
        let mut hits: u128 = 0;
        let scale = checked_pow(self.alphabet, m)?;
        let mut cons = Vec::with_capacity(c.len());
        for xi in 0..n {
            cons.clear();
            cons.extend(lookups.iter().zip(&c.symbols).map(|(w, &s)| (self.base.apply_word(w, xi), s)));
            let mut pos: Vec<usize> = cons.iter().map(|p| p.0).collect();
            pos.sort_unstable();
            pos.dedup();
            if pos.len() == cons.len() {
                injective += 1;
            }
            if let Some(d) = distinct_if_consistent(&mut cons) {
                hits += scale / checked_pow(self.alphabet, d)?;
            }
        }
        let injective_fraction = ratio(injective, n);
        match self.mode {
            BernoulliMode::Exact => Ok(CylinderTrace {
                trace: ratio_wide(hits, n as u128 * scale)?,
                injective_fraction,
                half_width: None,
            }),
            BernoulliMode::Sampled { samples, seed } => {
                let a = self.alphabet;
                let counts = chunked(samples, seed, |rng, count| {
                    let mut hit = 0u64;
                    let mut drawn: Vec<(usize, u32)> = Vec::new();
                    for _ in 0..count {
                        let xi = rng.random_range(0..n);
                        drawn.clear();
                        let mut ok = true;
                        for (w, &s) in lookups.iter().zip(&c.symbols) {
                            let p = self.base.apply_word(w, xi);
                            let v = match drawn.iter().find(|d| d.0 == p) {
                                Some(d) => d.1,
                                None => {
                                    let v = rng.random_range(0..a);
                                    drawn.push((p, v));
                                    v
                                }
                            };
                            ok &= v == s;
                        }
                        hit += ok as u64;
                    }
                    hit
                });
                let hit: u64 = counts.into_iter().sum();
                let trace = ratio(hit as usize, samples as usize);
                let p = hit as f64 / samples.max(1) as f64;
                Ok(CylinderTrace {
                    trace,
                    injective_fraction,
                    half_width: Some(crate::sampling::binomial_half_width(p, samples)),
                })
            }
        }
    }

    /// Normalized measure of `T Δ S`, where `T` is the cylinder conjugated by
    /// the action of `g` and `S` is the cylinder at the shifted elements
    /// `g·g_j`. Computed per `ξ` in closed form in either mode.
    pub fn equivariance_defect(&self, g: &Word, c: &CylinderSpec) -> Result<Rational> {
        c.check(self)?;
        self.base.spec().check_word(g)?;
        let n = self.base.n();
        let g_inv = g.inverse();
        let t_look: Vec<Word> = c.elements.iter().map(|gj| gj.inverse().concat(&g_inv)).collect();
        let s_look: Vec<Word> = c.elements.iter().map(|gj| g.concat(gj).inverse()).collect();
        let m = c.len() as u32;
        let scale = checked_pow(self.alphabet, 2 * m)?;
        let weight = |cons: &mut Vec<(usize, u32)>| -> Result<u128> {
            match distinct_if_consistent(cons) {
                Some(d) => Ok(scale / checked_pow(self.alphabet, d)?),
                None => Ok(0),
            }
        };
        let mut total: u128 = 0;
        for xi in 0..n {
            // T: η(σ_{g_j}⁻¹ σ_g⁻¹ ξ) = i_j; S: η(σ_{g g_j}⁻¹ ξ) = i_j
            let mut t: Vec<(usize, u32)> =
                t_look.iter().zip(&c.symbols).map(|(w, &s)| (self.base.apply_word(w, xi), s)).collect();
            let mut s: Vec<(usize, u32)> =
                s_look.iter().zip(&c.symbols).map(|(w, &s)| (self.base.apply_word(w, xi), s)).collect();
            let mut both: Vec<(usize, u32)> = t.iter().chain(&s).copied().collect();
            let pt = weight(&mut t)?;
            let ps = weight(&mut s)?;
            let pb = weight(&mut both)?;
            total += pt + ps - 2 * pb;
        }
        ratio_wide(total, n as u128 * scale)
    }

    /// Label plan for the canonical X-set structure: the level-`depth` label of
    /// `(y, η)` is read off the bits of `η` at `σ_{h_j}⁻¹ y`, where `h_1 = e,
    /// h_2, …` enumerate the base group.
    pub fn label_plan(&self, depth: u32) -> Result<LabelPlan> {
        LabelPlan::new(self.base.spec(), self.alphabet, depth)
    }

    /// Materialize the extended action on `n·a^n` points indexed
    /// `ξ·a^n + code`, where digit `y` (base `a`) of `code` is `η(y)`.
    pub fn materialize(&self, depth: u32) -> Result<ActionApproximation> {
        let plan = self.label_plan(depth)?;
        let (n, fibre) = self.fibre_size()?;
        let a = self.alphabet as usize;
        let total = n * fibre;
        let gens = self
            .base
            .generators()
            .iter()
            .map(|g| {
                let images = (0..total).map(|p| g.apply(p / fibre) * fibre + p % fibre).collect();
                Permutation::from_vec_unchecked(images)
            })
            .collect();
        let mut labels = Vec::with_capacity(total);
        for xi in 0..n {
            for code in 0..fibre {
                labels.push(plan.label(&self.base, xi, |y| digit(code, y, a)));
            }
        }
        let approx = SoficApproximation::with_points(self.base.spec().clone(), gens, total, self.base.seed())?;
        ActionApproximation::new(approx, DyadicLabeling::new(depth, labels)?)
    }

    fn fibre_size(&self) -> Result<(usize, usize)> {
        let n = self.base.n();
        let fibre = (self.alphabet as usize)
            .checked_pow(n as u32)
            .filter(|f| f.checked_mul(n.max(1)).is_some())
            .ok_or_else(|| Error::BudgetExceeded("extended space does not fit in memory".into()))?;
        Ok((n, fibre))
    }
}

#[inline]
fn digit(code: usize, y: usize, a: usize) -> u32 {
    ((code / a.pow(y as u32)) % a) as u32
}

/// Where to read label bits for a Bernoulli-type X-set structure.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabelPlan {
    pub depth: u32,
    /// Bits carried by one symbol (`alphabet = 2^bits`).
    pub bits: u32,
    /// `h_j⁻¹` for the enumerated elements whose symbols are read.
    pub lookups: Vec<Word>,
}

impl LabelPlan {
    pub fn new(spec: &GroupSpec, alphabet: u32, depth: u32) -> Result<Self> {
        if !alphabet.is_power_of_two() || alphabet < 2 {
            return Err(Error::InvalidArgument(format!(
                "labels need an alphabet that is a power of two ≥ 2, got {alphabet}"
            )));
        }
        let bits = alphabet.trailing_zeros();
        let symbols = depth.div_ceil(bits) as usize;
        let lookups = spec.enumerate_elements(symbols)?.iter().map(Word::inverse).collect();
        Ok(LabelPlan { depth, bits, lookups })
    }

    pub fn symbols(&self) -> usize {
        self.lookups.len()
    }

    /// Points whose symbols determine the label of `y`.
    pub fn positions<'a>(&'a self, base: &'a SoficApproximation, y: usize) -> impl Iterator<Item = usize> + 'a {
        self.lookups.iter().map(move |w| base.apply_word(w, y))
    }

    /// Label from the symbols read in order, most significant bit first.
    pub fn label_from_symbols(&self, symbols: impl IntoIterator<Item = u32>) -> u32 {
        if self.depth == 0 {
            return 1;
        }
        let mut value: u64 = 0;
        let mut count = 0u32;
        for s in symbols {
            value = (value << self.bits) | s as u64;
            count += 1;
        }
        debug_assert_eq!(count as usize, self.symbols());
        (value >> (count * self.bits - self.depth)) as u32 + 1
    }

    pub fn label(&self, base: &SoficApproximation, y: usize, symbol: impl Fn(usize) -> u32) -> u32 {
        self.label_from_symbols(self.positions(base, y).map(symbol))
    }
}

fn nontrivial_words(spec: &GroupSpec, radius: usize) -> Vec<Word> {
    reduced_words(spec.generator_count(), radius)
        .into_iter()
        .filter(|w| spec.is_trivial(w) == Some(false))
        .collect()
}

/// `x y x⁻¹ y⁻¹`.
fn commutator(x: &Word, y: &Word) -> Word {
    x.concat(y).concat(&x.inverse()).concat(&y.inverse())
}

const WREATH_RELATOR_RADIUS: usize = 2;

/// `Z/2 ≀ G` on `2·n·2^n` points, point `((ξ, η), j)` at `(ξ·2^n + code)·2 + j`.
///
/// Generators: the base generators acting on `ξ`, then the lamp `f_e` flipping
/// `j` on the cylinder `{η(ξ) = 1}`.
pub fn wreath_z2(b: &BernoulliApproximation) -> Result<SoficApproximation> {
    let lamp = SoficApproximation::new(GroupSpec::cyclic(2)?, vec![Permutation::new(vec![1, 0])?], None)?;
    wreath_general(b, &lamp)
}

/// `Φ(f_g)` for the `Z/2` lamp: flip the added bit where `η(σ_g⁻¹ξ) = 1`.
pub fn lamp_z2(b: &BernoulliApproximation, g: &Word) -> Result<Permutation> {
    let flip = Permutation::new(vec![1, 0])?;
    lamp_general(b, &flip, g)
}

/// `H ≀ G` on `n·2^n·m` points, point `((ξ, η), y)` at `(ξ·2^n + code)·m + y`.
///
/// Generators: the base generators `u_i`, then `f_e^{h_i}` for each generator
/// `h_i` of `H`, acting as `Λ(h_i)` on `y` over `{η(ξ) = 1}` and trivially
/// elsewhere.
pub fn wreath_general(b: &BernoulliApproximation, h: &SoficApproximation) -> Result<SoficApproximation> {
    if !b.is_exact() {
        return Err(Error::Unsupported("wreath products need an exact-mode Bernoulli extension".into()));
    }
    if b.alphabet != 2 {
        return Err(Error::Unsupported("wreath products use the binary alphabet".into()));
    }
    if !h.spec().is_abelian() {
        return Err(Error::InvalidGroup("lamp group must be abelian".into()));
    }
    let (n, fibre) = b.fibre_size()?;
    let m = h.n();
    let total = n
        .checked_mul(fibre)
        .and_then(|t| t.checked_mul(m))
        .ok_or_else(|| Error::BudgetExceeded("wreath space too large".into()))?;
    let mut gens: Vec<Permutation> = b
        .base
        .generators()
        .iter()
        .map(|g| {
            let images = (0..total)
                .map(|p| {
                    let (ext, y) = (p / m, p % m);
                    (g.apply(ext / fibre) * fibre + ext % fibre) * m + y
                })
                .collect();
            Permutation::from_vec_unchecked(images)
        })
        .collect();
    for lam in h.generators() {
        gens.push(lamp_general(b, lam, &Word::empty())?);
    }
    let spec = wreath_spec(b.base.spec(), h.spec())?;
    SoficApproximation::with_points(spec, gens, total, b.base.seed())
}

/// `Φ(f_g^h) = c_g⁰ ⊗ 1 + c_g¹ ⊗ Λ(h)` for a lamp permutation `Λ(h)`.
pub fn lamp_general(b: &BernoulliApproximation, lamp: &Permutation, g: &Word) -> Result<Permutation> {
    if !b.is_exact() || b.alphabet != 2 {
        return Err(Error::Unsupported("lamps need an exact binary Bernoulli extension".into()));
    }
    b.base.spec().check_word(g)?;
    let (n, fibre) = b.fibre_size()?;
    let m = lamp.len();
    let g_inv = g.inverse();
    let mut images = Vec::with_capacity(n * fibre * m);
    for xi in 0..n {
        let at = b.base.apply_word(&g_inv, xi);
        for code in 0..fibre {
            let on = (code >> at) & 1 == 1;
            let ext = xi * fibre + code;
            for y in 0..m {
                images.push(ext * m + if on { lamp.apply(y) } else { y });
            }
        }
    }
    Ok(Permutation::from_vec_unchecked(images))
}

/// Presentation of `H ≀ G` restricted to short words: relators of `G`, of `H`
/// on the lamp generators, and commutation of lamps at `e` with lamps at
/// nontrivial `w` of length `≤ 2`.
fn wreath_spec(g: &GroupSpec, h: &GroupSpec) -> Result<GroupSpec> {
    let k = g.generator_count();
    let t = h.generator_count();
    let mut relators = g.relators();
    relators.extend(h.relators().iter().map(|r| r.shifted(k)));
    let lamps: Vec<Word> = (0..t).map(|i| Word::power(k + i, 1)).collect();
    for i in 0..t {
        for j in i + 1..t {
            relators.push(commutator(&lamps[i], &lamps[j]));
        }
    }
    let shifts = nontrivial_words(g, WREATH_RELATOR_RADIUS);
    for w in &shifts {
        for x in &lamps {
            for y in &lamps {
                let moved = w.concat(y).concat(&w.inverse());
                relators.push(commutator(x, &moved));
            }
        }
    }
    relators.retain(|r| !r.is_empty());
    let mut nontrivial = shifts;
    for (i, l) in lamps.iter().enumerate() {
        if h.is_trivial(&Word::power(i, 1)) == Some(false) {
            nontrivial.push(l.clone());
        }
    }
    GroupSpec::presented(k + t, relators)?.with_nontrivial(nontrivial)
}

/// Result of gluing two actions along common subgroup generators.
#[derive(Clone, Debug, PartialEq)]
pub struct AmalgamResult {
    pub action: ActionApproximation,
    /// Per `H`-generator: `normalized_hamming` between its left and right images.
    pub h_residuals: Vec<Rational>,
    /// Fraction of points whose right-hand label disagrees with the left one.
    pub label_residual: Rational,
    /// The permutation by which the (amplified) right factor was conjugated.
    pub conjugator: Permutation,
}

/// Roots tried per orbit when computing canonical rooted forms.
const ORBIT_ROOT_CAP: usize = 4096;

/// Glue `left` (of `G₁`) and `right` (of `G₂`) along `H`, where `h_left[i]`
/// and `h_right[i]` name the same generator of `H`.
///
/// Both sides are amplified to the lcm of their sizes, the right labeling is
/// aligned to the left one, and then the right factor is conjugated so that
/// `H`-orbits are matched by rooted labeled form, then by unlabeled form,
/// then best-effort. Output generators: left ones, then right ones.
pub fn amalgam_glue(
    left: &ActionApproximation,
    right: &ActionApproximation,
    h_left: &[Word],
    h_right: &[Word],
) -> Result<AmalgamResult> {
    if h_left.len() != h_right.len() {
        return Err(Error::InvalidArgument(format!(
            "{} left and {} right subgroup generators",
            h_left.len(),
            h_right.len()
        )));
    }
    let (gl, gr) = (left.approx.spec(), right.approx.spec());
    for (a, b) in h_left.iter().zip(h_right) {
        gl.check_word(a)?;
        gr.check_word(b)?;
        if let (Some(x), Some(y)) = (gl.is_trivial(a), gr.is_trivial(b)) {
            if x != y {
                return Err(Error::InvalidGroup(format!("subgroup generators {a} and {b} disagree on triviality")));
            }
        }
    }
    if left.labeling.depth() != right.labeling.depth() {
        return Err(Error::InvalidLabeling("left and right labelings have different depths".into()));
    }
    let l = lcm(left.n(), right.n());
    let left = left.amplify(l / left.n().max(1))?;
    let right = right.amplify(l / right.n().max(1))?;
    let n = l;

    let conjugator = if h_left.is_empty() {
        Permutation::identity(n)
    } else {
        let u = align_labelings_with(&right.labeling, &left.labeling, AlignMode::Approximate)?.permutation;
        let hl: Vec<Permutation> = h_left.iter().map(|w| left.approx.evaluate_word(w)).collect::<Result<_>>()?;
        let hr: Vec<Permutation> = h_right
            .iter()
            .map(|w| right.approx.evaluate_word(w)?.conjugate_by(&u))
            .collect::<Result<_>>()?;
        let moved_labels = right.labeling.transport(&u)?;
        let q = match_orbits(&hl, &hr, left.labeling.labels(), moved_labels.labels());
        q.compose(&u)?
    };

    let k1 = gl.generator_count();
    let mut gens = left.approx.generators().to_vec();
    for g in right.approx.generators() {
        gens.push(g.conjugate_by(&conjugator)?);
    }
    let mut relators = gl.relators();
    relators.extend(gr.relators().iter().map(|r| r.shifted(k1)));
    for (a, b) in h_left.iter().zip(h_right) {
        let r = a.concat(&b.shifted(k1).inverse());
        if !r.is_empty() {
            relators.push(r);
        }
    }
    let mut nontrivial = nontrivial_words(gl, 2);
    nontrivial.extend(nontrivial_words(gr, 2).iter().map(|w| w.shifted(k1)));
    let spec = GroupSpec::presented(k1 + gr.generator_count(), relators)?.with_nontrivial(nontrivial)?;
    let approx = SoficApproximation::with_points(spec, gens, n, left.approx.seed())?;

    let mut h_residuals = Vec::with_capacity(h_left.len());
    for (a, b) in h_left.iter().zip(h_right) {
        let pa = approx.evaluate_word(a)?;
        let pb = approx.evaluate_word(&b.shifted(k1))?;
        h_residuals.push(pa.normalized_hamming(&pb)?);
    }
    let moved = right.labeling.transport(&conjugator)?;
    let mismatched = (0..n).filter(|&x| moved.label(x) != left.labeling.label(x)).count();
    let action = ActionApproximation::new(approx, left.labeling.clone())?;
    Ok(AmalgamResult { action, h_residuals, label_residual: ratio(mismatched, n), conjugator })
}

fn lcm(a: usize, b: usize) -> usize {
    if a == 0 || b == 0 {
        return a.max(b);
    }
    let (mut x, mut y) = (a, b);
    while y != 0 {
        (x, y) = (y, x % y);
    }
    a / x * b
}

struct OrbitAction<'a> {
    perms: &'a [Permutation],
    inverses: Vec<Permutation>,
    labels: &'a [u32],
}

impl OrbitAction<'_> {
    fn step(&self, key: usize, x: usize) -> usize {
        if key % 2 == 0 {
            self.perms[key / 2].apply(x)
        } else {
            self.inverses[key / 2].apply(x)
        }
    }

    fn orbits(&self, n: usize) -> Vec<Vec<usize>> {
        let mut seen = vec![false; n];
        let mut out = Vec::new();
        for start in 0..n {
            if seen[start] {
                continue;
            }
            seen[start] = true;
            let mut orbit = vec![start];
            let mut i = 0;
            while i < orbit.len() {
                let x = orbit[i];
                for key in 0..2 * self.perms.len() {
                    let y = self.step(key, x);
                    if !seen[y] {
                        seen[y] = true;
                        orbit.push(y);
                    }
                }
                i += 1;
            }
            out.push(orbit);
        }
        out
    }

    /// BFS from `root`: the discovery order and an encoding of the rooted
    /// orbit (labels optional) that is equal for isomorphic rooted orbits.
    fn rooted(&self, root: usize, with_labels: bool, index: &mut HashMap<usize, u32>) -> (Vec<u32>, Vec<usize>) {
        index.clear();
        let mut order = vec![root];
        index.insert(root, 0);
        let mut code = Vec::new();
        let mut i = 0;
        while i < order.len() {
            let x = order[i];
            if with_labels {
                code.push(self.labels[x]);
            }
            for key in 0..2 * self.perms.len() {
                let y = self.step(key, x);
                let next = order.len() as u32;
                let id = *index.entry(y).or_insert_with(|| {
                    order.push(y);
                    next
                });
                code.push(id);
            }
            i += 1;
        }
        (code, order)
    }

    fn canonical(&self, orbit: &[usize], with_labels: bool) -> (Vec<u32>, Vec<usize>) {
        let mut index = HashMap::new();
        let mut best: Option<(Vec<u32>, Vec<usize>)> = None;
        for &root in orbit.iter().take(ORBIT_ROOT_CAP) {
            let cand = self.rooted(root, with_labels, &mut index);
            if best.as_ref().is_none_or(|b| cand.0 < b.0) {
                best = Some(cand);
            }
        }
        best.unwrap_or_default()
    }
}

/// `q` with `q∘hr∘q⁻¹ = hl` on every matched orbit.
fn match_orbits(hl: &[Permutation], hr: &[Permutation], ll: &[u32], lr: &[u32]) -> Permutation {
    let n = ll.len();
    let left = OrbitAction { perms: hl, inverses: hl.iter().map(Permutation::inverse).collect(), labels: ll };
    let right = OrbitAction { perms: hr, inverses: hr.iter().map(Permutation::inverse).collect(), labels: lr };
    let lo = left.orbits(n);
    let ro = right.orbits(n);
    let mut images = vec![usize::MAX; n];
    let mut l_done = vec![false; lo.len()];
    let mut r_done = vec![false; ro.len()];

    // orbits on which the two actions already coincide stay put
    let r_by_min: HashMap<usize, usize> = ro.iter().enumerate().map(|(i, o)| (o[0], i)).collect();
    for (i, o) in lo.iter().enumerate() {
        if let Some(&j) = r_by_min.get(&o[0]) {
            let mut a = o.clone();
            let mut b = ro[j].clone();
            a.sort_unstable();
            b.sort_unstable();
            let same = a == b
                && a.iter().all(|&x| ll[x] == lr[x] && hl.iter().zip(hr).all(|(p, q)| p.apply(x) == q.apply(x)));
            if same {
                for &x in o {
                    images[x] = x;
                }
                l_done[i] = true;
                r_done[j] = true;
            }
        }
    }

    for with_labels in [true, false] {
        let mut pool: HashMap<Vec<u32>, Vec<(usize, Vec<usize>)>> = HashMap::new();
        for (j, o) in ro.iter().enumerate().rev() {
            if !r_done[j] {
                let (code, order) = right.canonical(o, with_labels);
                pool.entry(code).or_default().push((j, order));
            }
        }
        for (i, o) in lo.iter().enumerate() {
            if l_done[i] {
                continue;
            }
            let (code, order) = left.canonical(o, with_labels);
            if let Some((j, r_order)) = pool.get_mut(&code).and_then(Vec::pop) {
                for (&x, &y) in r_order.iter().zip(&order) {
                    images[x] = y;
                }
                l_done[i] = true;
                r_done[j] = true;
            }
        }
    }

    // best effort: pair the leftovers in BFS order, larger orbits first
    let mut l_rest: Vec<&Vec<usize>> = lo.iter().zip(&l_done).filter(|p| !p.1).map(|p| p.0).collect();
    let mut r_rest: Vec<&Vec<usize>> = ro.iter().zip(&r_done).filter(|p| !p.1).map(|p| p.0).collect();
    l_rest.sort_by_key(|o| std::cmp::Reverse(o.len()));
    r_rest.sort_by_key(|o| std::cmp::Reverse(o.len()));
    let from: Vec<usize> = r_rest.into_iter().flatten().copied().collect();
    let to: Vec<usize> = l_rest.into_iter().flatten().copied().collect();
    for (x, y) in from.into_iter().zip(to) {
        images[x] = y;
    }
    Permutation::from_vec_unchecked(images)
}

/// `g(x, y) = (g x, g y)` with labels read from the first factor only.
pub fn product_action(a: &ActionApproximation, free_part: &SoficApproximation) -> Result<ActionApproximation> {
    let approx = a.approx.tensor_pair(free_part)?;
    ActionApproximation::new(approx, a.labeling.lift(free_part.n()))
}

/// The dyadic odometer on the `2^depth` cells (0-based), adding one at the
/// coarsest digit with carry towards finer levels.
pub fn dyadic_odometer(depth: u32) -> Permutation {
    let size = 1usize << depth;
    let rev = |c: usize| -> usize {
        if depth == 0 {
            0
        } else {
            c.reverse_bits() >> (usize::BITS - depth)
        }
    };
    let images = (0..size).map(|c| rev((rev(c) + 1) % size)).collect();
    Permutation::from_vec_unchecked(images)
}

/// A `Z`-action on `n·p` points implementing a cell automorphism.
///
/// On the balanced depth-`depth` labeling of `n` points, `u` carries cell `i`
/// onto cell `cell_map(i)` (sorting rule), and the result is tensored with a
/// `p`-cycle so that `u^m` is fixed-point free for `0 < |m| < p`.
pub fn integer_action_approx(depth: u32, cell_map: &Permutation, n: usize, p: usize) -> Result<ActionApproximation> {
    if depth as usize >= usize::BITS as usize || n % (1usize << depth) != 0 {
        return Err(Error::IncompatibleSize(format!("2^{depth} does not divide n = {n}")));
    }
    if cell_map.len() != 1usize << depth {
        return Err(Error::InvalidArgument(format!(
            "cell map acts on {} cells, expected {}",
            cell_map.len(),
            1usize << depth
        )));
    }
    if p == 0 {
        return Err(Error::InvalidArgument("cycle length must be ≥ 1".into()));
    }
    let labeling = DyadicLabeling::balanced(n, depth)?;
    let target = labeling.relabel_cells(cell_map)?;
    let u = align_labelings(&target, &labeling)?;
    let base = SoficApproximation::new(GroupSpec::integer(), vec![u], None)?;
    let cycle = SoficApproximation::new(GroupSpec::integer(), vec![Permutation::cycle(p)], None)?;
    ActionApproximation::new(base.tensor_pair(&cycle)?, labeling.lift(p))
}

/// Restrictions `φ_i` of the first generators to given supports; words in the
/// `φ_i^{±1}` compose as partial injections.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TreeingFamily {
    maps: Vec<PartialInjection>,
    inverses: Vec<PartialInjection>,
    labeling: DyadicLabeling,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GroupoidWordStat {
    pub word: Word,
    /// Fraction of points in the domain of the evaluated word.
    pub domain: Rational,
    /// Fraction of points fixed by it.
    pub fixed: Rational,
}

pub fn treeing_restrict(a: &ActionApproximation, supports: &[Vec<usize>]) -> Result<TreeingFamily> {
    let k = a.approx.generator_count();
    if supports.len() > k {
        return Err(Error::GeneratorOutOfRange { index: supports.len() - 1, count: k });
    }
    let maps = supports
        .iter()
        .enumerate()
        .map(|(i, s)| PartialInjection::restrict(a.approx.generator(i), s))
        .collect::<Result<Vec<_>>>()?;
    TreeingFamily::new(maps, a.labeling.clone())
}

impl TreeingFamily {
    pub fn new(maps: Vec<PartialInjection>, labeling: DyadicLabeling) -> Result<Self> {
        let n = labeling.n();
        if let Some(m) = maps.iter().find(|m| m.n() != n) {
            return Err(Error::SizeMismatch { expected: n, got: m.n() });
        }
        let inverses = maps.iter().map(PartialInjection::inverse).collect();
        Ok(TreeingFamily { maps, inverses, labeling })
    }

    pub fn n(&self) -> usize {
        self.labeling.n()
    }

    pub fn maps(&self) -> &[PartialInjection] {
        &self.maps
    }

    pub fn labeling(&self) -> &DyadicLabeling {
        &self.labeling
    }

    #[inline]
    pub fn step(&self, l: Letter, x: usize) -> Option<usize> {
        if l.inv {
            self.inverses[l.gen].get(x)
        } else {
            self.maps[l.gen].get(x)
        }
    }

    /// The partial injection of a groupoid word, last letter applied first.
    pub fn evaluate(&self, w: &Word) -> Result<PartialInjection> {
        if let Some(g) = w.max_generator() {
            if g >= self.maps.len() {
                return Err(Error::GeneratorOutOfRange { index: g, count: self.maps.len() });
            }
        }
        let mut acc = PartialInjection::identity_on(self.n(), &(0..self.n()).collect::<Vec<_>>())?;
        for &l in w.letters().iter().rev() {
            let f = if l.inv { &self.inverses[l.gen] } else { &self.maps[l.gen] };
            acc = f.compose(&acc)?;
        }
        Ok(acc)
    }

    pub fn word_stats(&self, radius: usize) -> Result<Vec<GroupoidWordStat>> {
        let n = self.n();
        reduced_words(self.maps.len(), radius)
            .into_iter()
            .map(|w| {
                let f = self.evaluate(&w)?;
                Ok(GroupoidWordStat {
                    domain: ratio(f.domain_size(), n),
                    fixed: ratio(f.fixed_points(), n),
                    word: w,
                })
            })
            .collect()
    }
}

/// `k`-th root of `c` on each group of `k` cycles of equal length: for
/// cycles `C_0..C_{k-1}` and offsets `s_t`, `x^{(t)}_i ↦ x^{(t+1)}_{i+s_t}`
/// and the last cycle returns with the complementary offset.
fn grouped_root<R: Rng + ?Sized>(cycles: &[Vec<usize>], k: usize, n: usize, rng: &mut R) -> Result<Permutation> {
    let mut images = vec![usize::MAX; n];
    let mut order: Vec<usize> = (0..cycles.len()).collect();
    order.shuffle(rng);
    let groups = order.len() / k;
    for g in 0..=groups {
        let members: Vec<&Vec<usize>> = order[g * k..((g + 1) * k).min(order.len())].iter().map(|&i| &cycles[i]).collect();
        if members.is_empty() {
            continue;
        }
        let len = members[0].len();
        if members.len() < k {
            // leftover cycles take the power root, which needs gcd(k, len) = 1
            let e = (1..=len).find(|e| (e * k) % len == 1 % len).ok_or_else(|| {
                Error::IncompatibleSize(format!("no {k}-th root of a leftover {len}-cycle"))
            })?;
            for c in members {
                for i in 0..len {
                    images[c[i]] = c[(i + e) % len];
                }
            }
            continue;
        }
        let offsets: Vec<usize> = (0..k - 1).map(|_| rng.random_range(0..len)).collect();
        let total: usize = offsets.iter().sum();
        for t in 0..k {
            let shift = if t + 1 < k { offsets[t] } else { (1 + len * k - total % len) % len };
            let next = members[(t + 1) % k];
            for i in 0..len {
                images[members[t][i]] = next[(i + shift) % len];
            }
        }
    }
    Ok(Permutation::from_vec_unchecked(images))
}

/// A common approximation `c` of `Z` on `cycles·length` points (that many
/// cycles of that length on randomly chosen point sets) with a random
/// `p`-th root and a random `q`-th root of it, built by grouping cycles.
///
/// Returns `(c, a, b)` with `a^p = c = b^q`.
pub fn common_root_base(cycles: usize, length: usize, p: usize, q: usize, seed: u64) -> Result<(Permutation, Permutation, Permutation)> {
    if cycles == 0 || length == 0 || p == 0 || q == 0 {
        return Err(Error::InvalidArgument("cycle count, length and root orders must be ≥ 1".into()));
    }
    let n = cycles * length;
    let mut rng = seeded_rng(seed);
    let mut points: Vec<usize> = (0..n).collect();
    points.shuffle(&mut rng);
    let cyc: Vec<Vec<usize>> = points.chunks(length).map(<[usize]>::to_vec).collect();
    let c = Permutation::from_cycles(n, &cyc)?;
    let a = grouped_root(&cyc, p, n, &mut rng)?;
    let b = grouped_root(&cyc, q, n, &mut rng)?;
    debug_assert_eq!(a.pow(p as i64), c);
    debug_assert_eq!(b.pow(q as i64), c);
    Ok((c, a, b))
}

/// The `Z ∗_{2Z=3Z} Z` example on `2^log2_n` points.
///
/// A common approximation `c` of the shared `Z`, made of cycles of length
/// `2^⌊log2_n/2⌋`, receives a square root `a` and a cube root `b`
/// ([`common_root_base`]). Both factors carry the balanced labeling of depth
/// `depth` and are glued along `a² = b³`.
pub fn root_amalgam(log2_n: u32, depth: u32, seed: u64) -> Result<AmalgamResult> {
    if log2_n < 2 || log2_n >= usize::BITS - 1 {
        return Err(Error::InvalidArgument(format!("log2_n = {log2_n} must lie in 2..{}", usize::BITS - 1)));
    }
    let n = 1usize << log2_n;
    let length = 1usize << (log2_n / 2);
    let (_, a, b) = common_root_base(n / length, length, 2, 3, seed)?;
    let labeling = DyadicLabeling::balanced(n, depth)?;
    let left = ActionApproximation::new(SoficApproximation::new(GroupSpec::integer(), vec![a], Some(seed))?, labeling.clone())?;
    let right = ActionApproximation::new(SoficApproximation::new(GroupSpec::integer(), vec![b], Some(seed))?, labeling)?;
    amalgam_glue(&left, &right, &[Word::power(0, 2)], &[Word::power(0, 3)])
}
