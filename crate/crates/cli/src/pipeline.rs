//! TOML-configured construction chains with gated verification.

use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::json;
use soficlab::approx::to_f64;
use soficlab::localstats::DEFAULT_ORACLE_BUDGET;
use soficlab::{
    bernoulli_extend, bernoulli_local_stats, bernoulli_oracle, dyadic_odometer, el_verify, integer_action_approx,
    local_stats, make_base, product_action, root_amalgam, treeing_local_stats, treeing_restrict, wreath_z2,
    ActionApproximation, BernoulliApproximation, BernoulliMode, DyadicLabeling, GroupSpec, LocalStats,
    NeighborhoodSpec, Permutation, StatsMode, TreeingFamily,
};

use crate::error::{CliError, CliResult};
use crate::files;
use crate::reports;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base: Option<BaseConfig>,
    #[serde(default, rename = "stage", skip_serializing_if = "Vec::is_empty")]
    pub stages: Vec<Stage>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub defects: Option<DefectConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stats: Option<StatsConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verify: Option<VerifyConfig>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaseConfig {
    /// Group descriptor, see [`files::group`].
    pub group: String,
    pub size: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Depth of a balanced labeling to attach.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<u32>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[default]
    Exact,
    Sampled,
}

fn binary() -> u32 {
    2
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Stage {
    Bernoulli {
        #[serde(default = "binary")]
        alphabet: u32,
        #[serde(default)]
        mode: Mode,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        samples: Option<u64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        seed: Option<u64>,
    },
    /// Exact Bernoulli extension to an explicit labeled action.
    Materialize { depth: u32 },
    /// `Z/2 ≀ G` from an exact binary Bernoulli extension.
    Wreath,
    Amplify { factor: usize },
    /// Diagonal product with seeded random permutations on `size` points.
    Product { size: usize, seed: u64 },
    /// Source stage: cell automorphism (odometer by default) tensored with a cycle.
    IntegerAction {
        depth: u32,
        size: usize,
        cycle: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        cells: Option<Vec<usize>>,
    },
    /// Source stage: the `Z ∗_{2Z=3Z} Z` gluing on `2^log2_n` points.
    RootAmalgam { log2_n: u32, depth: u32, seed: u64 },
    /// Restrict generator `i` to the points whose level-`level` label is in `cells[i]`.
    Treeing { level: u32, cells: Vec<Vec<u32>> },
}

impl Stage {
    fn name(&self) -> &'static str {
        match self {
            Stage::Bernoulli { .. } => "bernoulli",
            Stage::Materialize { .. } => "materialize",
            Stage::Wreath => "wreath",
            Stage::Amplify { .. } => "amplify",
            Stage::Product { .. } => "product",
            Stage::IntegerAction { .. } => "integer-action",
            Stage::RootAmalgam { .. } => "root-amalgam",
            Stage::Treeing { .. } => "treeing",
        }
    }

    fn input(&self) -> Option<Kind> {
        match self {
            Stage::Bernoulli { .. } | Stage::Amplify { .. } | Stage::Product { .. } | Stage::Treeing { .. } => {
                Some(Kind::Action)
            }
            Stage::Materialize { .. } | Stage::Wreath => Some(Kind::Bernoulli),
            Stage::IntegerAction { .. } | Stage::RootAmalgam { .. } => None,
        }
    }

    fn output(&self) -> Kind {
        match self {
            Stage::Bernoulli { .. } => Kind::Bernoulli,
            Stage::Treeing { .. } => Kind::Treeing,
            _ => Kind::Action,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Kind {
    Action,
    Bernoulli,
    Treeing,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DefectConfig {
    pub radius: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_relator_defect: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_h_residual: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StatsConfig {
    pub radius: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label_level: Option<u32>,
    /// Sampling for explicit actions; Bernoulli extensions use their own mode.
    #[serde(default)]
    pub mode: Mode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyConfig {
    /// `oracle` (the Bernoulli shift of the base group) or a statistics file.
    pub target: String,
    pub epsilon: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle_budget: Option<usize>,
}

pub const PRESETS: [&str; 3] = ["bernoulli-Z-r1", "wreath-z2-smoke", "amalgam-z23"];

pub fn preset(name: &str) -> CliResult<&'static str> {
    match name {
        "bernoulli-Z-r1" => Ok(BERNOULLI_Z_R1),
        "wreath-z2-smoke" => Ok(WREATH_Z2_SMOKE),
        "amalgam-z23" => Ok(AMALGAM_Z23),
        _ => Err(CliError::Invalid(format!("unknown preset {name:?}; available: {}", PRESETS.join(", ")))),
    }
}

const BERNOULLI_Z_R1: &str = r#"name = "bernoulli-Z-r1"

[base]
group = "integer"
size = 1024

[[stage]]
kind = "bernoulli"
alphabet = 2
mode = "sampled"
samples = 100000
seed = 7

[stats]
radius = 1

[verify]
target = "oracle"
epsilon = 0.02
"#;

const WREATH_Z2_SMOKE: &str = r#"name = "wreath-z2-smoke"

[base]
group = "integer"
size = 4

[[stage]]
kind = "bernoulli"
mode = "exact"

[[stage]]
kind = "wreath"

[defects]
radius = 2
max_relator_defect = 0.0
"#;

const AMALGAM_Z23: &str = r#"name = "amalgam-z23"

[[stage]]
kind = "root-amalgam"
log2_n = 8
depth = 2
seed = 2024

[defects]
radius = 3
max_h_residual = 0.0
"#;

impl PipelineConfig {
    pub fn parse(text: &str) -> CliResult<Self> {
        let config: PipelineConfig = toml::from_str(text).map_err(|e| {
            let line = e.span().map(|s| text[..s.start].lines().count().max(1));
            match line {
                Some(l) => CliError::Invalid(format!("config line {l}: {}", e.message())),
                None => CliError::Invalid(format!("config: {}", e.message())),
            }
        })?;
        config.validate()?;
        Ok(config)
    }

    /// Type-checks the chain and checks that every randomized step names a seed.
    pub fn validate(&self) -> CliResult<()> {
        let invalid = |m: String| Err(CliError::Invalid(m));
        let mut current = match &self.base {
            Some(b) => {
                let spec = files::group(&b.group, b.size)?;
                if matches!(spec.kind(), soficlab::GroupKind::Free { .. }) && b.seed.is_none() {
                    return invalid("base: free groups use random permutations; name a seed".into());
                }
                Some(Kind::Action)
            }
            None => None,
        };
        for (i, stage) in self.stages.iter().enumerate() {
            let expected = stage.input();
            if expected != current {
                let show = |k: Option<Kind>| k.map_or("nothing".to_string(), |k| format!("{k:?}").to_lowercase());
                return invalid(format!(
                    "stage {} ({}) takes {} but receives {}",
                    i + 1,
                    stage.name(),
                    show(expected),
                    show(current)
                ));
            }
            if let Stage::Bernoulli { mode: Mode::Sampled, samples, seed, .. } = stage {
                if samples.is_none() || seed.is_none() {
                    return invalid(format!("stage {}: sampled mode needs samples and seed", i + 1));
                }
            }
            current = Some(stage.output());
        }
        if current.is_none() {
            return invalid("nothing to build: give a base or a source stage".into());
        }
        if let Some(s) = &self.stats {
            if s.mode == Mode::Sampled && (s.samples.is_none() || s.seed.is_none()) {
                return invalid("stats: sampled mode needs samples and seed".into());
            }
        }
        if let Some(v) = &self.verify {
            if self.stats.is_none() {
                return invalid("verify needs a [stats] section".into());
            }
            if !(v.epsilon > 0.0) {
                return invalid("verify: epsilon must be positive".into());
            }
            if v.target == "oracle" && self.base.is_none() {
                return invalid("verify: the oracle target needs a base group".into());
            }
        }
        if let Some(d) = &self.defects {
            if d.radius == 0 {
                return invalid("defects: radius must be ≥ 1".into());
            }
        }
        Ok(())
    }

    fn seeds(&self) -> Vec<u64> {
        let mut seeds: Vec<u64> = self.base.iter().filter_map(|b| b.seed).collect();
        for s in &self.stages {
            match s {
                Stage::Bernoulli { seed: Some(seed), .. } | Stage::Product { seed, .. } | Stage::RootAmalgam { seed, .. } => {
                    seeds.push(*seed)
                }
                _ => {}
            }
        }
        seeds.extend(self.stats.iter().filter_map(|s| s.seed));
        seeds
    }
}

enum Artifact {
    Action(ActionApproximation),
    Bernoulli(BernoulliApproximation),
    Treeing(TreeingFamily),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub name: String,
    /// The configuration, verbatim; re-running it reproduces every artifact.
    pub config: String,
    pub seeds: Vec<u64>,
    pub threads: usize,
    pub steps: Vec<StepRecord>,
    pub outputs: Vec<String>,
    pub gates: Vec<GateRecord>,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: String,
    pub seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GateRecord {
    pub gate: String,
    pub pass: bool,
    pub detail: String,
}

pub const MANIFEST_FILE: &str = "manifest.json";

struct Run<'a> {
    dir: &'a Path,
    manifest: Manifest,
}

impl Run<'_> {
    fn output(&mut self, file: &str, text: &str) -> CliResult<()> {
        files::write(&self.dir.join(file), text)?;
        self.manifest.outputs.push(file.to_string());
        Ok(())
    }

    fn timed<T>(&mut self, step: String, f: impl FnOnce() -> CliResult<T>) -> CliResult<T> {
        let start = Instant::now();
        let out = f()?;
        self.manifest.steps.push(StepRecord { step, seconds: start.elapsed().as_secs_f64() });
        Ok(out)
    }

    fn gate(&mut self, gate: &str, pass: bool, detail: String) {
        self.manifest.gates.push(GateRecord { gate: gate.into(), pass, detail });
    }
}

/// Runs `text` (a pipeline configuration) into `dir`. Artifacts and the
/// manifest are written even when a gate fails; the error then carries the
/// failed gates.
pub fn run(text: &str, dir: &Path) -> CliResult<Manifest> {
    let config = PipelineConfig::parse(text)?;
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let mut run = Run {
        dir,
        manifest: Manifest {
            tool: "soficlab".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            name: config.name.clone(),
            config: text.to_string(),
            seeds: config.seeds(),
            threads: rayon::current_num_threads(),
            steps: Vec::new(),
            outputs: Vec::new(),
            gates: Vec::new(),
            pass: true,
        },
    };
    let mut base_group: Option<GroupSpec> = None;
    let mut alphabet = 2;
    let mut artifact = None;
    if let Some(b) = &config.base {
        let action = run.timed("base".into(), || {
            let spec = files::group(&b.group, b.size)?;
            let approx = make_base(&spec, b.size, b.seed.unwrap_or(0))?;
            let labeling = match b.labels {
                Some(d) => DyadicLabeling::balanced(b.size, d)?,
                None => DyadicLabeling::trivial(b.size),
            };
            Ok(ActionApproximation::new(approx, labeling)?)
        })?;
        run.output("base.txt", &files::action_file(&action, format!("base {} on {} points", b.group, b.size)))?;
        base_group = Some(action.approx.spec().clone());
        artifact = Some(Artifact::Action(action));
    }
    let mut h_residual = None;
    for (i, stage) in config.stages.iter().enumerate() {
        let label = format!("stage {} {}", i + 1, stage.name());
        let input = artifact.take();
        let next = run.timed(label.clone(), || apply(stage, input))?;
        let next = match next {
            Applied::Plain(a) => a,
            Applied::Glued(a, residuals) => {
                run.output("amalgam.json", &reports::to_text(&residuals.1))?;
                h_residual = Some(residuals.0);
                a
            }
        };
        if let Stage::Bernoulli { alphabet: a, .. } = stage {
            alphabet = *a;
        }
        if let Artifact::Action(a) = &next {
            let file = format!("stage{}-{}.txt", i + 1, stage.name());
            run.output(&file, &files::action_file(a, label))?;
        }
        artifact = Some(next);
    }
    let artifact = artifact.expect("validated configs build something");

    if let Artifact::Action(a) = &artifact {
        run.output("traces.json", &reports::to_text(&reports::generator_traces(&a.approx)))?;
    }
    if let Some(d) = &config.defects {
        if let Artifact::Action(a) = &artifact {
            let report = run.timed("defects".into(), || Ok(a.approx.defect_report(d.radius)?))?;
            run.output("defects.json", &reports::to_text(&reports::defects(&report)))?;
            if let Some(max) = d.max_relator_defect {
                let v = to_f64(report.max_relator_defect);
                run.gate("max_relator_defect", v <= max, format!("{} (limit {max})", report.max_relator_defect));
            }
        }
        if let (Some(max), Some(r)) = (d.max_h_residual, h_residual) {
            run.gate("max_h_residual", r <= max, format!("{r} (limit {max})"));
        }
    }
    if let Some(s) = &config.stats {
        let level = s.label_level.unwrap_or(s.radius as u32);
        let stats = run.timed("stats".into(), || stats_of(&artifact, s, level))?;
        run.output("stats.json", &soficlab::io::write_stats(&stats))?;
        if let Some(v) = &config.verify {
            let target = if v.target == "oracle" {
                let group = base_group.clone().expect("validated");
                let spec = pad_to(NeighborhoodSpec::new(s.radius).with_label_level(level), group.generator_count());
                let budget = v.oracle_budget.unwrap_or(DEFAULT_ORACLE_BUDGET);
                let t = run.timed("oracle".into(), || Ok(bernoulli_oracle(&group, alphabet, &spec, budget)?))?;
                run.output("target.json", &soficlab::io::write_stats(&t))?;
                t
            } else {
                files::stats(Path::new(&v.target))?
            };
            let report = el_verify(&stats, &target, v.epsilon)?;
            run.output("verify.json", &reports::to_text(&reports::verify(&report)))?;
            run.gate("el_verify", report.pass, format!("sup {} at epsilon {}", to_f64(report.sup), v.epsilon));
        }
    }
    run.manifest.pass = run.manifest.gates.iter().all(|g| g.pass);
    let manifest_text = serde_json::to_string_pretty(&run.manifest).expect("manifest serializes") + "\n";
    files::write(&dir.join(MANIFEST_FILE), &manifest_text)?;
    if !run.manifest.pass {
        let failed: Vec<String> = run.manifest.gates.iter().filter(|g| !g.pass).map(|g| format!("{} ({})", g.gate, g.detail)).collect();
        return Err(CliError::Gate(failed.join("; ")));
    }
    Ok(run.manifest)
}

/// Re-runs the configuration recorded in a manifest.
pub fn rerun(manifest: &Path, dir: &Path) -> CliResult<Manifest> {
    let text = files::read(manifest)?;
    let m: Manifest = serde_json::from_str(&text).map_err(|e| {
        CliError::Invalid(format!("{}: line {}: {e}", manifest.display(), e.line()))
    })?;
    run(&m.config, dir)
}

fn pad_to(spec: NeighborhoodSpec, generators: usize) -> NeighborhoodSpec {
    if generators < spec.radius {
        spec.padded()
    } else {
        spec
    }
}

fn stats_of(artifact: &Artifact, s: &StatsConfig, level: u32) -> CliResult<LocalStats> {
    let mode = match s.mode {
        Mode::Exact => StatsMode::Exact,
        Mode::Sampled => StatsMode::Sampled { samples: s.samples.unwrap_or(0), seed: s.seed.unwrap_or(0) },
    };
    let spec = NeighborhoodSpec::new(s.radius).with_label_level(level);
    Ok(match artifact {
        Artifact::Action(a) => local_stats(a, &pad_to(spec, a.approx.generator_count()), mode)?,
        Artifact::Bernoulli(b) => bernoulli_local_stats(b, &pad_to(spec, b.base().generator_count()))?,
        Artifact::Treeing(t) => treeing_local_stats(t, &pad_to(spec, t.maps().len()), mode)?,
    })
}

enum Applied {
    Plain(Artifact),
    /// An amalgam with its largest `H`-residual and its report.
    Glued(Artifact, (f64, serde_json::Value)),
}

fn apply(stage: &Stage, input: Option<Artifact>) -> CliResult<Applied> {
    let action = |a: Option<Artifact>| match a {
        Some(Artifact::Action(a)) => a,
        _ => unreachable!("validated"),
    };
    let bernoulli = |a: Option<Artifact>| match a {
        Some(Artifact::Bernoulli(b)) => b,
        _ => unreachable!("validated"),
    };
    Ok(Applied::Plain(match stage {
        Stage::Bernoulli { alphabet, mode, samples, seed } => {
            let mode = match mode {
                Mode::Exact => BernoulliMode::Exact,
                Mode::Sampled => BernoulliMode::Sampled { samples: samples.unwrap_or(0), seed: seed.unwrap_or(0) },
            };
            Artifact::Bernoulli(bernoulli_extend(&action(input).approx, *alphabet, mode)?)
        }
        Stage::Materialize { depth } => Artifact::Action(bernoulli(input).materialize(*depth)?),
        Stage::Wreath => {
            let w = wreath_z2(&bernoulli(input))?;
            let n = w.n();
            Artifact::Action(ActionApproximation::new(w, DyadicLabeling::trivial(n))?)
        }
        Stage::Amplify { factor } => Artifact::Action(action(input).amplify(*factor)?),
        Stage::Product { size, seed } => {
            let a = action(input);
            let free = make_base(&GroupSpec::free(a.approx.generator_count()), *size, *seed)?;
            Artifact::Action(product_action(&a, &free)?)
        }
        Stage::IntegerAction { depth, size, cycle, cells } => {
            let cell_map = match cells {
                Some(c) => Permutation::new(c.clone())?,
                None => dyadic_odometer(*depth),
            };
            Artifact::Action(integer_action_approx(*depth, &cell_map, *size, *cycle)?)
        }
        Stage::RootAmalgam { log2_n, depth, seed } => {
            let glued = root_amalgam(*log2_n, *depth, *seed)?;
            let worst = glued.h_residuals.iter().map(|r| to_f64(*r)).fold(0.0, f64::max);
            let report = reports::amalgam(&glued);
            return Ok(Applied::Glued(Artifact::Action(glued.action), (worst, report)));
        }
        Stage::Treeing { level, cells } => {
            let a = action(input);
            if *level > a.labeling.depth() {
                return Err(CliError::Invalid(format!(
                    "treeing: level {level} exceeds the labeling depth {}",
                    a.labeling.depth()
                )));
            }
            let supports: Vec<Vec<usize>> = cells
                .iter()
                .map(|keep| (0..a.n()).filter(|&x| keep.contains(&a.labeling.label_at(x, *level))).collect())
                .collect();
            Artifact::Treeing(treeing_restrict(&a, &supports)?)
        }
    }))
}

/// Human summary of a finished run.
pub fn summary(m: &Manifest) -> String {
    let gates: Vec<String> = m.gates.iter().map(|g| format!("{}: {}", g.gate, if g.pass { "PASS" } else { "FAIL" })).collect();
    let v = json!({ "name": m.name, "outputs": m.outputs, "gates": gates, "pass": m.pass });
    reports::to_text(&v)
}
