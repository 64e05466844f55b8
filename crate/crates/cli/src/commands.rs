use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::json;
use soficlab::approx::to_f64;
use soficlab::io::{self, ApproxFile};
use soficlab::localstats::DEFAULT_ORACLE_BUDGET;
use soficlab::{
    bernoulli_extend, bernoulli_oracle, dyadic_odometer, el_verify, integer_action_approx, link_matrix_units,
    local_stats, make_base, product_action, root_amalgam, round_to_permutation, stats_distance, treeing_local_stats,
    treeing_restrict, wreath_z2, ActionApproximation, BernoulliMode, CylinderSpec, DyadicLabeling, GroupSpec,
    NeighborhoodSpec, StatsMode,
};

use crate::error::{CliError, CliResult};
use crate::files;
use crate::pipeline::{self, Mode};
use crate::reports;

/// Finite-scale sofic approximations: build, transform, measure, verify.
///
/// Exit status: 0 success, 1 a verification gate failed, 2 invalid input,
/// 3 I/O failure. SOFICLAB_THREADS caps the worker threads.
#[derive(Debug, Parser)]
#[command(name = "soficlab", version)]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Input file.
    #[arg(long = "in", global = true, value_name = "PATH")]
    pub input: Option<PathBuf>,
    /// Output file (a directory for `run`); stdout when omitted.
    #[arg(long, global = true, value_name = "PATH")]
    pub out: Option<PathBuf>,
    /// Seed for randomized steps.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Exact enumeration or seeded sampling.
    #[arg(long, global = true, value_enum)]
    pub mode: Option<Mode>,
    /// Sample count in sampled mode.
    #[arg(long, global = true)]
    pub samples: Option<u64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Base approximation of a built-in group.
    Gen {
        /// integer, cyclic[:m], free[:k] or folner:a,b,…
        #[arg(long)]
        group: String,
        /// Number of points (ignored for Følner boxes, whose volume is fixed).
        #[arg(long)]
        size: usize,
        /// Attach a balanced labeling of this depth.
        #[arg(long)]
        labels: Option<u32>,
    },
    /// Bernoulli extension of the approximation in --in: cylinder traces with
    /// --cylinder, otherwise the materialized action (exact mode only).
    Bernoulli {
        #[arg(long, default_value_t = 2)]
        alphabet: u32,
        /// Cylinder `word=symbol; …`; repeatable.
        #[arg(long)]
        cylinder: Vec<String>,
        /// Label depth of the materialized action.
        #[arg(long, default_value_t = 0)]
        depth: u32,
    },
    /// `Z/2 ≀ G` over the exact binary Bernoulli extension of --in.
    Wreath,
    /// `Z ∗_{2Z=3Z} Z` glued from common roots; prints the residual report.
    Amalgam {
        #[arg(long, default_value_t = 8)]
        log2_n: u32,
        #[arg(long, default_value_t = 2)]
        depth: u32,
    },
    /// Diagonal product of the action in --in with random permutations.
    Product {
        /// Points of the random factor.
        #[arg(long)]
        size: usize,
    },
    /// Integer action: cell automorphism tensored with a cycle.
    Zaction {
        #[arg(long)]
        depth: u32,
        /// Points carrying the labels.
        #[arg(long)]
        size: usize,
        /// Length of the cycle factor.
        #[arg(long)]
        cycle: usize,
        /// Permutation file acting on the 2^depth cells; the odometer by default.
        #[arg(long)]
        cells: Option<PathBuf>,
    },
    /// Restrict the generators of --in to label cells and measure the result.
    Treeing {
        #[arg(long)]
        level: u32,
        /// Kept labels per generator, e.g. `1,2;3,4`.
        #[arg(long)]
        cells: String,
        #[arg(long, default_value_t = 1)]
        radius: usize,
    },
    /// Local statistics of the labeled action in --in.
    Stats {
        #[arg(long, default_value_t = 1)]
        radius: usize,
        /// Label level read at each vertex; the radius by default.
        #[arg(long)]
        label_level: Option<u32>,
        /// Treat missing generators as the identity.
        #[arg(long)]
        pad: bool,
    },
    /// Sup and total-variation distance between two statistics files.
    Compare {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
    },
    /// Check the statistics in --in against --target or a Bernoulli shift oracle.
    Verify {
        #[arg(long, conflicts_with = "oracle", required_unless_present = "oracle")]
        target: Option<PathBuf>,
        /// Group descriptor whose Bernoulli shift is the target.
        #[arg(long)]
        oracle: Option<String>,
        #[arg(long, default_value_t = 2)]
        alphabet: u32,
        #[arg(long)]
        epsilon: f64,
        #[arg(long, default_value_t = DEFAULT_ORACLE_BUDGET)]
        budget: usize,
    },
    /// Round the row function in --in to a permutation.
    Round,
    /// Permutation conjugating the matrix units of --a onto those of --b.
    Link {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
    },
    /// Run a pipeline configuration (--in), a preset, or a manifest into --out.
    Run {
        #[arg(long, conflicts_with_all = ["manifest", "list"])]
        preset: Option<String>,
        /// Re-run the configuration recorded in a manifest.
        #[arg(long, conflicts_with = "list")]
        manifest: Option<PathBuf>,
        /// Print the preset names.
        #[arg(long)]
        list: bool,
        /// Print a preset's configuration instead of running it.
        #[arg(long, requires = "preset")]
        show: bool,
    },
}

impl Common {
    fn input(&self) -> CliResult<&Path> {
        self.input.as_deref().ok_or_else(|| CliError::Invalid("--in is required".into()))
    }

    fn seed(&self, what: &str) -> CliResult<u64> {
        self.seed.ok_or_else(|| CliError::Invalid(format!("{what} is randomized; pass --seed")))
    }

    fn sampling(&self) -> CliResult<Option<(u64, u64)>> {
        match self.mode.unwrap_or_default() {
            Mode::Exact => Ok(None),
            Mode::Sampled => {
                let samples =
                    self.samples.ok_or_else(|| CliError::Invalid("sampled mode needs --samples".into()))?;
                Ok(Some((samples, self.seed("sampled mode")?)))
            }
        }
    }

    fn stats_mode(&self) -> CliResult<StatsMode> {
        Ok(match self.sampling()? {
            None => StatsMode::Exact,
            Some((samples, seed)) => StatsMode::Sampled { samples, seed },
        })
    }

    fn emit(&self, text: &str) -> CliResult<()> {
        files::emit(self.out.as_deref(), text)
    }

    fn action(&self) -> CliResult<ActionApproximation> {
        files::action(files::approx(self.input()?)?)
    }
}

fn describe(input: &Path, step: &str) -> String {
    format!("{step} of {}", input.display())
}

pub fn execute(cli: Cli) -> CliResult<()> {
    let c = &cli.common;
    match cli.command {
        Command::Gen { group, size, labels } => {
            let spec = files::group(&group, size)?;
            let seed = match spec.kind() {
                soficlab::GroupKind::Free { .. } => c.seed("gen --group free")?,
                _ => c.seed.unwrap_or(0),
            };
            let approx = make_base(&spec, size, seed)?;
            let labeling = labels.map(|d| DyadicLabeling::balanced(approx.n(), d)).transpose()?;
            let mut derived = format!("gen {group} size {size}");
            if matches!(spec.kind(), soficlab::GroupKind::Free { .. }) {
                derived.push_str(&format!(" seed {seed}"));
            }
            c.emit(&io::write_approximation(&ApproxFile { approx, labeling, derived: Some(derived) }))
        }
        Command::Bernoulli { alphabet, cylinder, depth } => {
            let input = c.input()?;
            let base = files::approx(input)?.approx;
            let mode = match c.sampling()? {
                None => BernoulliMode::Exact,
                Some((samples, seed)) => BernoulliMode::Sampled { samples, seed },
            };
            let b = bernoulli_extend(&base, alphabet, mode)?;
            if cylinder.is_empty() {
                let a = b.materialize(depth)?;
                return c.emit(&files::action_file(&a, describe(input, &format!("bernoulli alphabet {alphabet}"))));
            }
            let mut rows = Vec::new();
            for text in &cylinder {
                let spec: CylinderSpec = text.parse()?;
                let t = b.cylinder_trace(&spec)?;
                rows.push(json!({
                    "cylinder": spec.to_string(),
                    "trace": t.trace.to_string(),
                    "trace_value": to_f64(t.trace),
                    "injective_fraction": t.injective_fraction.to_string(),
                    "half_width": t.half_width,
                }));
            }
            c.emit(&reports::to_text(&json!({ "cylinders": rows })))
        }
        Command::Wreath => {
            let input = c.input()?;
            let base = files::approx(input)?.approx;
            let w = wreath_z2(&bernoulli_extend(&base, 2, BernoulliMode::Exact)?)?;
            let derived = describe(input, "wreath z2");
            c.emit(&io::write_approximation(&ApproxFile { approx: w, labeling: None, derived: Some(derived) }))
        }
        Command::Amalgam { log2_n, depth } => {
            let seed = c.seed("amalgam")?;
            let glued = root_amalgam(log2_n, depth, seed)?;
            let derived = format!("amalgam log2_n {log2_n} depth {depth} seed {seed}");
            if let Some(out) = &c.out {
                files::write(out, &files::action_file(&glued.action, derived))?;
            }
            files::emit(None, &reports::to_text(&reports::amalgam(&glued)))
        }
        Command::Product { size } => {
            let input = c.input()?;
            let a = c.action()?;
            let seed = c.seed("product")?;
            let free = make_base(&GroupSpec::free(a.approx.generator_count()), size, seed)?;
            let p = product_action(&a, &free)?;
            c.emit(&files::action_file(&p, describe(input, &format!("product size {size} seed {seed}"))))
        }
        Command::Zaction { depth, size, cycle, cells } => {
            let cell_map = match &cells {
                Some(p) => files::parsed(p, io::parse_permutation)?,
                None => dyadic_odometer(depth),
            };
            let a = integer_action_approx(depth, &cell_map, size, cycle)?;
            c.emit(&files::action_file(&a, format!("zaction depth {depth} size {size} cycle {cycle}")))
        }
        Command::Treeing { level, cells, radius } => {
            let a = c.action()?;
            let kept = parse_cells(&cells)?;
            if level > a.labeling.depth() {
                return Err(CliError::Invalid(format!(
                    "level {level} exceeds the labeling depth {}",
                    a.labeling.depth()
                )));
            }
            let supports: Vec<Vec<usize>> = kept
                .iter()
                .map(|keep| (0..a.n()).filter(|&x| keep.contains(&a.labeling.label_at(x, level))).collect())
                .collect();
            let t = treeing_restrict(&a, &supports)?;
            let mut spec = NeighborhoodSpec::new(radius).with_label_level(level.min(radius as u32));
            if t.maps().len() < radius {
                spec = spec.padded();
            }
            c.emit(&io::write_stats(&treeing_local_stats(&t, &spec, c.stats_mode()?)?))
        }
        Command::Stats { radius, label_level, pad } => {
            let a = c.action()?;
            let mut spec = NeighborhoodSpec::new(radius).with_label_level(label_level.unwrap_or(radius as u32));
            if pad {
                spec = spec.padded();
            }
            c.emit(&io::write_stats(&local_stats(&a, &spec, c.stats_mode()?)?))
        }
        Command::Compare { a, b } => {
            let (sup, tv) = stats_distance(&files::stats(&a)?, &files::stats(&b)?)?;
            c.emit(&format!("sup: {sup} ({})\ntv: {tv} ({})\n", to_f64(sup), to_f64(tv)))
        }
        Command::Verify { target, oracle, alphabet, epsilon, budget } => {
            let candidate = files::stats(c.input()?)?;
            let target = match (target, oracle) {
                (Some(path), _) => files::stats(&path)?,
                (None, Some(desc)) => {
                    let group = files::group(&desc, 0)?;
                    let mut spec = NeighborhoodSpec::new(candidate.radius).with_label_level(candidate.label_level);
                    if group.generator_count() < candidate.radius {
                        spec = spec.padded();
                    }
                    bernoulli_oracle(&group, alphabet, &spec, budget)?
                }
                (None, None) => unreachable!("clap requires one of them"),
            };
            let report = el_verify(&candidate, &target, epsilon)?;
            c.emit(&reports::to_text(&reports::verify(&report)))?;
            let line = format!("{}: sup {} at epsilon {epsilon}", if report.pass { "PASS" } else { "FAIL" }, to_f64(report.sup));
            eprintln!("{line}");
            if report.pass {
                Ok(())
            } else {
                Err(CliError::Gate(line))
            }
        }
        Command::Round => {
            let v = files::parsed(c.input()?, io::parse_row_function)?;
            let (w, moved) = round_to_permutation(&v);
            match &c.out {
                Some(out) => files::write(out, &io::write_permutation(&w))?,
                None => files::emit(None, &io::write_permutation(&w))?,
            }
            println!("moved: {moved}");
            Ok(())
        }
        Command::Link { a, b } => {
            let s1 = files::parsed(&a, io::parse_matrix_units)?;
            let s2 = files::parsed(&b, io::parse_matrix_units)?;
            c.emit(&io::write_permutation(&link_matrix_units(&s1, &s2)?))
        }
        Command::Run { preset, manifest, list, show } => {
            if list {
                return files::emit(None, &(pipeline::PRESETS.join("\n") + "\n"));
            }
            let out = || c.out.as_deref().ok_or_else(|| CliError::Invalid("run needs --out DIR".into()));
            let m = match (preset, manifest) {
                (Some(name), _) => {
                    let text = pipeline::preset(&name)?;
                    if show {
                        return files::emit(None, text);
                    }
                    pipeline::run(text, out()?)?
                }
                (None, Some(path)) => pipeline::rerun(&path, out()?)?,
                (None, None) => pipeline::run(&files::read(c.input()?)?, out()?)?,
            };
            files::emit(None, &pipeline::summary(&m))
        }
    }
}

/// `1,2;3` → `[[1,2],[3]]`; an empty group keeps nothing.
fn parse_cells(text: &str) -> CliResult<Vec<Vec<u32>>> {
    text.split(';')
        .map(|group| {
            group
                .split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(|s| s.parse().map_err(|_| CliError::Invalid(format!("--cells: {s:?} is not a label"))))
                .collect()
        })
        .collect()
}
