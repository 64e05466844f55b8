//! File plumbing shared by the subcommands and the pipeline runner.

use std::fs;
use std::io::Write;
use std::path::Path;

use soficlab::io::{self, ApproxFile};
use soficlab::{ActionApproximation, DyadicLabeling, GroupSpec, LocalStats};

use crate::error::{CliError, CliResult};

pub fn read(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

pub fn parsed<T>(path: &Path, parse: impl Fn(&str) -> soficlab::Result<T>) -> CliResult<T> {
    parse(&read(path)?).map_err(|source| CliError::Input { path: path.to_path_buf(), source })
}

pub fn write(path: &Path, text: &str) -> CliResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

/// Writes to `path`, or to stdout when no path is given.
pub fn emit(path: Option<&Path>, text: &str) -> CliResult<()> {
    match path {
        Some(p) => write(p, text),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| CliError::io(Path::new("<stdout>"), e)),
    }
}

pub fn approx(path: &Path) -> CliResult<ApproxFile> {
    parsed(path, io::parse_approximation)
}

pub fn stats(path: &Path) -> CliResult<LocalStats> {
    parsed(path, io::parse_stats)
}

/// The approximation with its labels, or the depth-0 labeling when it has none.
pub fn action(file: ApproxFile) -> CliResult<ActionApproximation> {
    let n = file.approx.n();
    let labeling = file.labeling.unwrap_or_else(|| DyadicLabeling::trivial(n));
    Ok(ActionApproximation::new(file.approx, labeling)?)
}

pub fn action_file(a: &ActionApproximation, derived: String) -> String {
    io::write_approximation(&ApproxFile { approx: a.approx.clone(), labeling: Some(a.labeling.clone()), derived: Some(derived) })
}

/// Group descriptors: `integer`, `cyclic[:m]`, `free[:k]`, `folner:a,b,…`.
/// A cyclic group without an order takes `size` as its order.
pub fn group(desc: &str, size: usize) -> CliResult<GroupSpec> {
    let (name, arg) = match desc.split_once(':') {
        Some((n, a)) => (n.trim(), Some(a.trim())),
        None => (desc.trim(), None),
    };
    let number = |a: &str| -> CliResult<usize> {
        a.parse().map_err(|_| CliError::Invalid(format!("group {desc:?}: {a:?} is not a number")))
    };
    Ok(match (name, arg) {
        ("integer", None) => GroupSpec::integer(),
        ("cyclic", None) => GroupSpec::cyclic(size)?,
        ("cyclic", Some(m)) => GroupSpec::cyclic(number(m)?)?,
        ("free", None) => GroupSpec::free(2),
        ("free", Some(k)) => GroupSpec::free(number(k)?),
        ("folner", Some(dims)) => GroupSpec::folner_box(dims.split(',').map(number).collect::<CliResult<_>>()?)?,
        _ => {
            return Err(CliError::Invalid(format!(
                "unknown group {desc:?}; expected integer, cyclic[:m], free[:k] or folner:a,b,…"
            )))
        }
    })
}
