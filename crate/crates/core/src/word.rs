//! Reduced words over generators `γ_1, γ_2, …` and their inverses.
//!
//! Text form: signed 1-based generator indices separated by whitespace, so
//! `1 -2 1` is `γ_1 γ_2⁻¹ γ_1`; the empty word is written `e`.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Letter {
    /// 0-based generator index.
    pub gen: usize,
    pub inv: bool,
}

impl Letter {
    pub fn new(gen: usize, inv: bool) -> Self {
        Letter { gen, inv }
    }

    pub fn inverse(self) -> Self {
        Letter { gen: self.gen, inv: !self.inv }
    }

    /// Ordering key `γ_1 < γ_1⁻¹ < γ_2 < γ_2⁻¹ < …`.
    pub fn key(self) -> usize {
        2 * self.gen + self.inv as usize
    }

    pub fn from_key(key: usize) -> Self {
        Letter { gen: key / 2, inv: key % 2 == 1 }
    }
}

/// A freely reduced word; construction always reduces.
#[derive(Clone, Default, PartialEq, Eq, Hash)]
pub struct Word(Vec<Letter>);

impl Word {
    pub fn empty() -> Self {
        Word(Vec::new())
    }

    pub fn new(letters: impl IntoIterator<Item = Letter>) -> Self {
        let mut out: Vec<Letter> = Vec::new();
        for l in letters {
            if out.last() == Some(&l.inverse()) {
                out.pop();
            } else {
                out.push(l);
            }
        }
        Word(out)
    }

    /// From signed 1-based indices: `k > 0` is `γ_k`, `k < 0` is `γ_{|k|}⁻¹`.
    pub fn from_signed(indices: &[i64]) -> Result<Self> {
        let mut letters = Vec::with_capacity(indices.len());
        for &k in indices {
            if k == 0 {
                return Err(Error::InvalidArgument("generator index 0 (indices are 1-based)".into()));
            }
            letters.push(Letter::new(k.unsigned_abs() as usize - 1, k < 0));
        }
        Ok(Word::new(letters))
    }

    /// `γ_{gen}^k`.
    pub fn power(gen: usize, k: i64) -> Self {
        Word(vec![Letter::new(gen, k < 0); k.unsigned_abs() as usize])
    }

    pub fn letters(&self) -> &[Letter] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn inverse(&self) -> Word {
        Word(self.0.iter().rev().map(|l| l.inverse()).collect())
    }

    /// Reduced concatenation `self · other`.
    pub fn concat(&self, other: &Word) -> Word {
        Word::new(self.0.iter().chain(&other.0).copied())
    }

    pub fn max_generator(&self) -> Option<usize> {
        self.0.iter().map(|l| l.gen).max()
    }

    /// Sum of exponents per generator (the image in `Z^k`).
    pub fn exponent_vector(&self, k: usize) -> Vec<i64> {
        let mut v = vec![0i64; k];
        for l in &self.0 {
            if l.gen < k {
                v[l.gen] += if l.inv { -1 } else { 1 };
            }
        }
        v
    }

    /// Shift every generator index by `offset` (used when concatenating generator sets).
    pub fn shifted(&self, offset: usize) -> Word {
        Word(self.0.iter().map(|l| Letter::new(l.gen + offset, l.inv)).collect())
    }

    pub fn to_signed(&self) -> Vec<i64> {
        self.0
            .iter()
            .map(|l| {
                let k = l.gen as i64 + 1;
                if l.inv {
                    -k
                } else {
                    k
                }
            })
            .collect()
    }

    /// Shortlex comparison using [`Letter::key`].
    pub fn shortlex_cmp(&self, other: &Word) -> Ordering {
        self.len().cmp(&other.len()).then_with(|| {
            self.0.iter().map(|l| l.key()).cmp(other.0.iter().map(|l| l.key()))
        })
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return write!(f, "e");
        }
        let parts: Vec<String> = self.to_signed().iter().map(i64::to_string).collect();
        write!(f, "{}", parts.join(" "))
    }
}

impl fmt::Debug for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Word({self})")
    }
}

impl FromStr for Word {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.is_empty() || s == "e" {
            return Ok(Word::empty());
        }
        let mut idx = Vec::new();
        for tok in s.split(|c: char| c.is_whitespace() || c == ',') {
            if tok.is_empty() {
                continue;
            }
            let k: i64 = tok
                .parse()
                .map_err(|_| Error::InvalidArgument(format!("bad generator token {tok:?}")))?;
            idx.push(k);
        }
        Word::from_signed(&idx)
    }
}

/// All reduced words of length `≤ max_len` in `gens` generators, ordered by
/// length and then lexicographically with `γ_1 < γ_1⁻¹ < γ_2 < …`.
pub fn reduced_words(gens: usize, max_len: usize) -> Vec<Word> {
    let mut out = vec![Word::empty()];
    if gens == 0 {
        return out;
    }
    let mut layer = vec![Word::empty()];
    for _ in 0..max_len {
        let mut next = Vec::with_capacity(layer.len() * (2 * gens).saturating_sub(1).max(1));
        for w in &layer {
            for key in 0..2 * gens {
                let l = Letter::from_key(key);
                if w.0.last() == Some(&l.inverse()) {
                    continue;
                }
                let mut v = w.0.clone();
                v.push(l);
                next.push(Word(v));
            }
        }
        out.extend(next.iter().cloned());
        layer = next;
    }
    out
}

/// Number of reduced words of length `≤ len` in `gens` generators.
pub fn ball_size(gens: usize, len: usize) -> usize {
    if gens == 0 {
        return 1;
    }
    let mut total = 1usize;
    let mut layer = 1usize;
    for step in 0..len {
        layer = if step == 0 { 2 * gens } else { layer * (2 * gens - 1) };
        total += layer;
    }
    total
}
