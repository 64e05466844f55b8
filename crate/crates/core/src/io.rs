//! Text formats. Parse errors carry 1-based line numbers.
//!
//! * permutation / row function: one line of `n` 0-based images;
//! * partial injection: a line `n`, then one `x y` line per mapped pair;
//! * labeling: a line `n depth`, then `n` labels;
//! * matrix units: a line `n t`, then per block a line `s_v` followed by the
//!   chain units `e_{j,j+1;v}` as partial-injection sections (a size-one block
//!   carries the identity on its support);
//! * approximation: `soficapx 1`, optional `derived …`, `n k`, `k` image
//!   lines, then optional `labels` and `spec` sections;
//! * statistics: JSON (see [`write_stats`]).
//!
//! Blank lines and lines starting with `#` are ignored everywhere except in
//! the JSON statistics.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::approx::{GroupKind, GroupSpec, SoficApproximation};
use crate::error::{Error, Result};
use crate::linking::{MatrixUnitSystem, RowFunction};
use crate::localstats::{LocalStats, NeighborhoodClass, StatsMeta};
use crate::perm::{DyadicLabeling, PartialInjection, Permutation};
use crate::word::Word;

/// Largest point count accepted from text, to keep hostile inputs bounded.
pub const MAX_POINTS: usize = 1 << 24;

struct Lines<'a> {
    lines: Vec<(usize, &'a str)>,
    pos: usize,
}

impl<'a> Lines<'a> {
    fn new(text: &'a str) -> Self {
        let lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
            .collect();
        Lines { lines, pos: 0 }
    }

    fn peek(&self) -> Option<(usize, &'a str)> {
        self.lines.get(self.pos).copied()
    }

    fn next(&mut self) -> Option<(usize, &'a str)> {
        let l = self.peek();
        self.pos += l.is_some() as usize;
        l
    }

    fn last_line(&self) -> usize {
        self.lines.last().map_or(1, |l| l.0)
    }

    fn expect(&mut self, what: &str) -> Result<(usize, &'a str)> {
        let line = self.last_line();
        self.next().ok_or_else(|| Error::parse(line, format!("unexpected end of input, expected {what}")))
    }

    fn finish(&self) -> Result<()> {
        match self.peek() {
            Some((line, l)) => Err(Error::parse(line, format!("unexpected trailing content {l:?}"))),
            None => Ok(()),
        }
    }
}

fn numbers(line: usize, text: &str) -> Result<Vec<usize>> {
    text.split_whitespace()
        .map(|t| t.parse::<usize>().map_err(|_| Error::parse(line, format!("expected a non-negative integer, got {t:?}"))))
        .collect()
}

fn count(line: usize, value: usize, what: &str) -> Result<usize> {
    if value > MAX_POINTS {
        return Err(Error::parse(line, format!("{what} {value} exceeds the limit {MAX_POINTS}")));
    }
    Ok(value)
}

fn at_line<T>(line: usize, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        Error::Parse { .. } => e,
        other => Error::parse(line, other.to_string()),
    })
}

fn images_line(lines: &mut Lines, n: Option<usize>) -> Result<(usize, Vec<usize>)> {
    let (line, text) = lines.expect("a line of images")?;
    let images = numbers(line, text)?;
    if let Some(n) = n {
        if images.len() != n {
            return Err(Error::parse(line, format!("expected {n} images, got {}", images.len())));
        }
    }
    count(line, images.len(), "point count")?;
    Ok((line, images))
}

pub fn parse_permutation(text: &str) -> Result<Permutation> {
    let mut lines = Lines::new(text);
    if lines.peek().is_none() {
        return Ok(Permutation::identity(0));
    }
    let (line, images) = images_line(&mut lines, None)?;
    lines.finish()?;
    at_line(line, Permutation::new(images))
}

pub fn write_permutation(p: &Permutation) -> String {
    join_line(p.images())
}

fn join_line(values: &[usize]) -> String {
    let mut s = values.iter().map(usize::to_string).collect::<Vec<_>>().join(" ");
    s.push('\n');
    s
}

pub fn parse_row_function(text: &str) -> Result<RowFunction> {
    let mut lines = Lines::new(text);
    if lines.peek().is_none() {
        return RowFunction::new(Vec::new());
    }
    let (line, images) = images_line(&mut lines, None)?;
    lines.finish()?;
    at_line(line, RowFunction::new(images))
}

pub fn write_row_function(v: &RowFunction) -> String {
    join_line(v.images())
}

fn single_number(text: &str) -> Option<usize> {
    let mut it = text.split_whitespace();
    let v = it.next()?.parse().ok()?;
    it.next().is_none().then_some(v)
}

/// One partial-injection section; stops at the next single-number line.
fn pinj_section(lines: &mut Lines, expected_n: Option<usize>) -> Result<PartialInjection> {
    let (line, text) = lines.expect("a point count")?;
    let n = single_number(text).ok_or_else(|| Error::parse(line, "expected a single point count"))?;
    let n = count(line, n, "point count")?;
    if let Some(e) = expected_n {
        if e != n {
            return Err(Error::parse(line, format!("section has {n} points, expected {e}")));
        }
    }
    let mut map = vec![None; n];
    while let Some((l, t)) = lines.peek() {
        let nums = numbers(l, t)?;
        if nums.len() == 1 {
            break;
        }
        lines.next();
        let [x, y] = nums[..] else {
            return Err(Error::parse(l, format!("expected a pair \"x y\", got {t:?}")));
        };
        if x >= n || y >= n {
            return Err(Error::parse(l, format!("pair ({x}, {y}) out of range for n = {n}")));
        }
        if map[x].is_some() {
            return Err(Error::parse(l, format!("point {x} mapped twice")));
        }
        map[x] = Some(y);
    }
    at_line(line, PartialInjection::new(map))
}

pub fn parse_partial_injection(text: &str) -> Result<PartialInjection> {
    let mut lines = Lines::new(text);
    let p = pinj_section(&mut lines, None)?;
    lines.finish()?;
    Ok(p)
}

pub fn write_partial_injection(p: &PartialInjection) -> String {
    let mut s = format!("{}\n", p.n());
    for (x, y) in p.pairs() {
        let _ = writeln!(s, "{x} {y}");
    }
    s
}

fn labeling_section(lines: &mut Lines, expected_n: Option<usize>) -> Result<DyadicLabeling> {
    let (line, text) = lines.expect("\"n depth\"")?;
    let [n, depth] = numbers(line, text)?[..] else {
        return Err(Error::parse(line, "expected \"n depth\""));
    };
    let n = count(line, n, "point count")?;
    if let Some(e) = expected_n {
        if e != n {
            return Err(Error::parse(line, format!("labeling has {n} points, expected {e}")));
        }
    }
    let depth = u32::try_from(depth).map_err(|_| Error::parse(line, "depth too large"))?;
    let mut labels = Vec::with_capacity(n);
    while labels.len() < n {
        let (l, t) = lines.expect("labels")?;
        for tok in t.split_whitespace() {
            let v: u32 = tok.parse().map_err(|_| Error::parse(l, format!("bad label {tok:?}")))?;
            labels.push(v);
        }
        if labels.len() > n {
            return Err(Error::parse(l, format!("more than {n} labels")));
        }
    }
    at_line(line, DyadicLabeling::new(depth, labels))
}

pub fn parse_labeling(text: &str) -> Result<DyadicLabeling> {
    let mut lines = Lines::new(text);
    let l = labeling_section(&mut lines, None)?;
    lines.finish()?;
    Ok(l)
}

pub fn write_labeling(l: &DyadicLabeling) -> String {
    let mut s = format!("{} {}\n", l.n(), l.depth());
    s.push_str(&l.labels().iter().map(u32::to_string).collect::<Vec<_>>().join(" "));
    s.push('\n');
    s
}

pub fn parse_matrix_units(text: &str) -> Result<MatrixUnitSystem> {
    let mut lines = Lines::new(text);
    let (line, head) = lines.expect("\"n t\"")?;
    let [n, t] = numbers(line, head)?[..] else {
        return Err(Error::parse(line, "expected \"n t\""));
    };
    let n = count(line, n, "point count")?;
    let t = count(line, t, "block count")?;
    let mut chains = Vec::with_capacity(t.min(1024));
    for _ in 0..t {
        let (l, s) = lines.expect("a block size")?;
        let s = single_number(s).ok_or_else(|| Error::parse(l, "expected a block size"))?;
        let s = count(l, s, "block size")?;
        if s == 0 {
            return Err(Error::parse(l, "block size must be ≥ 1"));
        }
        let units = if s == 1 { 1 } else { s - 1 };
        let mut chain = Vec::with_capacity(units.min(1024));
        for _ in 0..units {
            chain.push(pinj_section(&mut lines, Some(n))?);
        }
        if s == 1 && chain[0].pairs().any(|(x, y)| x != y) {
            return Err(Error::parse(l, "a size-one block needs the identity on its support"));
        }
        chains.push(chain);
    }
    lines.finish()?;
    at_line(line, MatrixUnitSystem::from_chain(n, &chains))
}

pub fn write_matrix_units(s: &MatrixUnitSystem) -> String {
    let mut out = format!("{} {}\n", s.n(), s.block_count());
    for v in 0..s.block_count() {
        let _ = writeln!(out, "{}", s.block_size(v));
        for unit in s.chain(v) {
            out.push_str(&write_partial_injection(&unit));
        }
    }
    out
}

/// Contents of an approximation file.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ApproxFile {
    pub approx: SoficApproximation,
    pub labeling: Option<DyadicLabeling>,
    /// Free-text provenance of derived approximations.
    pub derived: Option<String>,
}

pub const APPROX_HEADER: &str = "soficapx 1";

pub fn parse_approximation(text: &str) -> Result<ApproxFile> {
    let mut lines = Lines::new(text);
    let (line, head) = lines.expect(APPROX_HEADER)?;
    if head.split_whitespace().collect::<Vec<_>>() != ["soficapx", "1"] {
        return Err(Error::parse(line, format!("expected header {APPROX_HEADER:?}")));
    }
    let mut derived = None;
    if let Some((_, t)) = lines.peek() {
        if let Some(rest) = t.strip_prefix("derived") {
            derived = Some(rest.trim().to_string());
            lines.next();
        }
    }
    let (line, nk) = lines.expect("\"n k\"")?;
    let [n, k] = numbers(line, nk)?[..] else {
        return Err(Error::parse(line, "expected \"n k\""));
    };
    let n = count(line, n, "point count")?;
    let k = count(line, k, "generator count")?;
    if n.saturating_mul(k) > MAX_POINTS {
        return Err(Error::parse(line, "approximation too large"));
    }
    let mut gens = Vec::with_capacity(k);
    for _ in 0..k {
        let (l, images) = images_line(&mut lines, Some(n))?;
        gens.push(at_line(l, Permutation::new(images))?);
    }
    let mut labeling = None;
    let mut spec = None;
    while let Some((l, t)) = lines.next() {
        match t {
            "labels" if labeling.is_none() => labeling = Some(labeling_section(&mut lines, Some(n))?),
            "spec" if spec.is_none() => spec = Some(spec_section(&mut lines, l)?),
            _ => return Err(Error::parse(l, format!("unexpected line {t:?}, expected a section"))),
        }
    }
    let spec = match spec {
        Some(s) => s,
        None => GroupSpec::presented(k, Vec::new())?,
    };
    let approx = at_line(line, SoficApproximation::with_points(spec, gens, n, None))?;
    Ok(ApproxFile { approx, labeling, derived })
}

fn word_after(line: usize, text: &str) -> Result<Word> {
    text.parse().map_err(|e: Error| Error::parse(line, e.to_string()))
}

fn spec_section(lines: &mut Lines, start: usize) -> Result<GroupSpec> {
    let (line, kind_line) = lines.expect("\"kind …\"")?;
    let mut toks = kind_line.split_whitespace();
    if toks.next() != Some("kind") {
        return Err(Error::parse(line, "spec section must start with \"kind\""));
    }
    let name = toks.next().ok_or_else(|| Error::parse(line, "missing group kind"))?;
    let args = numbers(line, &toks.collect::<Vec<_>>().join(" "))?;
    let one = |what: &str| -> Result<usize> {
        match args[..] {
            [v] => Ok(v),
            _ => Err(Error::parse(line, format!("kind {name} takes one argument ({what})"))),
        }
    };
    let spec = match name {
        "cyclic" => at_line(line, GroupSpec::cyclic(one("order")?))?,
        "integer" if args.is_empty() => GroupSpec::integer(),
        "free" => GroupSpec::free(count(line, one("rank")?, "rank")?),
        "folner" => at_line(line, GroupSpec::folner_box(args.clone()))?,
        "presented" => at_line(line, GroupSpec::presented(count(line, one("rank")?, "rank")?, Vec::new()))?,
        "table" => {
            let m = one("order")?;
            if m > 512 {
                return Err(Error::parse(line, "table too large"));
            }
            let (gl, gtext) = lines.expect("\"generators …\"")?;
            let gens = gtext
                .strip_prefix("generators")
                .ok_or_else(|| Error::parse(gl, "expected \"generators …\""))?;
            let gens = numbers(gl, gens)?;
            let mut rows = Vec::with_capacity(m);
            for _ in 0..m {
                let (rl, rtext) = lines.expect("\"row …\"")?;
                let row = rtext.strip_prefix("row").ok_or_else(|| Error::parse(rl, "expected \"row …\""))?;
                rows.push(numbers(rl, row)?);
            }
            at_line(line, GroupSpec::table(rows, gens))?
        }
        _ => return Err(Error::parse(line, format!("unknown group kind {name:?}"))),
    };
    let mut relators = Vec::new();
    let mut nontrivial = Vec::new();
    while let Some((l, t)) = lines.peek() {
        if let Some(rest) = t.strip_prefix("relator ") {
            relators.push(word_after(l, rest)?);
        } else if let Some(rest) = t.strip_prefix("nontrivial ") {
            nontrivial.push(word_after(l, rest)?);
        } else {
            break;
        }
        lines.next();
    }
    let spec = at_line(start, spec.with_relators(relators))?;
    at_line(start, spec.with_nontrivial(nontrivial))
}

fn write_spec(spec: &GroupSpec, out: &mut String) {
    out.push_str("spec\n");
    match spec.kind() {
        GroupKind::Cyclic { order } => {
            let _ = writeln!(out, "kind cyclic {order}");
        }
        GroupKind::Integer => out.push_str("kind integer\n"),
        GroupKind::Free { rank } => {
            let _ = writeln!(out, "kind free {rank}");
        }
        GroupKind::FolnerBox { dims } => {
            let d: Vec<String> = dims.iter().map(usize::to_string).collect();
            let _ = writeln!(out, "kind folner {}", d.join(" "));
        }
        GroupKind::Presented { rank } => {
            let _ = writeln!(out, "kind presented {rank}");
        }
        GroupKind::FiniteTable { table, generators } => {
            let _ = writeln!(out, "kind table {}", table.len());
            let g: Vec<String> = generators.iter().map(usize::to_string).collect();
            let _ = writeln!(out, "generators {}", g.join(" "));
            for row in table {
                let r: Vec<String> = row.iter().map(usize::to_string).collect();
                let _ = writeln!(out, "row {}", r.join(" "));
            }
        }
    }
    for r in spec.extra_relators() {
        let _ = writeln!(out, "relator {r}");
    }
    for w in spec.nontrivial_words() {
        let _ = writeln!(out, "nontrivial {w}");
    }
}

pub fn write_approximation(file: &ApproxFile) -> String {
    let mut out = format!("{APPROX_HEADER}\n");
    if let Some(d) = &file.derived {
        let _ = writeln!(out, "derived {}", d.replace('\n', " "));
    }
    let a = &file.approx;
    let _ = writeln!(out, "{} {}", a.n(), a.generator_count());
    for g in a.generators() {
        out.push_str(&write_permutation(g));
    }
    if let Some(l) = &file.labeling {
        out.push_str("labels\n");
        out.push_str(&write_labeling(l));
    }
    write_spec(a.spec(), &mut out);
    out
}

pub const STATS_FORMAT: &str = "soficstats 1";

#[derive(Serialize, Deserialize)]
struct StatsFile {
    format: String,
    radius: usize,
    label_level: u32,
    total: u64,
    classes: Vec<ClassEntry>,
    metadata: MetaEntry,
}

#[derive(Serialize, Deserialize)]
struct ClassEntry {
    encoding: String,
    count: u64,
    p: f64,
}

#[derive(Serialize, Deserialize)]
struct MetaEntry {
    mode: String,
    n: Option<u64>,
    samples: Option<u64>,
    seed: Option<u64>,
}

/// JSON with `radius`, `label_level`, `total`, `classes[] = {encoding, count,
/// p}` (sorted by encoding) and `metadata = {mode, n, samples, seed}`. The
/// integer counts are authoritative; `p` is informational.
pub fn write_stats(s: &LocalStats) -> String {
    let file = StatsFile {
        format: STATS_FORMAT.into(),
        radius: s.radius,
        label_level: s.label_level,
        total: s.total,
        classes: s
            .counts
            .iter()
            .map(|(k, &c)| ClassEntry { encoding: k.clone(), count: c, p: c as f64 / s.total as f64 })
            .collect(),
        metadata: MetaEntry {
            mode: s.meta.mode.clone(),
            n: s.meta.n,
            samples: s.meta.samples,
            seed: s.meta.seed,
        },
    };
    let mut out = serde_json::to_string_pretty(&file).expect("stats serialize");
    out.push('\n');
    out
}

pub fn parse_stats(text: &str) -> Result<LocalStats> {
    let file: StatsFile = serde_json::from_str(text).map_err(|e| Error::parse(e.line(), e.to_string()))?;
    if file.format != STATS_FORMAT {
        return Err(Error::parse(1, format!("expected format {STATS_FORMAT:?}, got {:?}", file.format)));
    }
    let mut counts = BTreeMap::new();
    for c in file.classes {
        let class: NeighborhoodClass = c.encoding.parse().map_err(|e: Error| Error::parse(1, e.to_string()))?;
        if class.radius() != file.radius {
            return Err(Error::parse(1, format!("class {} has the wrong radius", c.encoding)));
        }
        if counts.insert(c.encoding.clone(), c.count).is_some() {
            return Err(Error::parse(1, format!("class {} listed twice", c.encoding)));
        }
    }
    let meta = StatsMeta { mode: file.metadata.mode, n: file.metadata.n, samples: file.metadata.samples, seed: file.metadata.seed };
    let stats = LocalStats::new(file.radius, file.label_level, counts, meta).map_err(|e| Error::parse(1, e.to_string()))?;
    if stats.total != file.total {
        return Err(Error::parse(1, format!("total {} does not match the class counts ({})", file.total, stats.total)));
    }
    Ok(stats)
}
