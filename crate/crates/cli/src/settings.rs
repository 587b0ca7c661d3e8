//! Flat `key = value` configuration with `[section]` headers.
//!
//! ```text
//! [params]
//! alpha = 0.5
//! p = 0.25
//! [pathsim]
//! paths = 1000
//! ```
//!
//! Command-line flags are applied after the file, as if appended to it.

use std::fmt;
use std::path::Path;

use rbessel::harness::ExperimentConfig;
use rbessel::{Params, TestFunction};

use crate::output::fmt17;

/// A rejected configuration entry, pointing at where it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    /// `file:line` or the flag name.
    pub origin: String,
    pub key: String,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.key.is_empty() {
            write!(f, "{}: {}", self.origin, self.message)
        } else {
            write!(f, "{}: key `{}`: {}", self.origin, self.key, self.message)
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub section: String,
    pub key: String,
    pub value: String,
    pub origin: String,
}

impl Entry {
    pub fn flag(name: &str, section: &str, key: &str, value: impl ToString) -> Self {
        Entry {
            section: section.into(),
            key: key.into(),
            value: value.to_string(),
            origin: format!("--{name}"),
        }
    }

    fn name(&self) -> String {
        format!("{}.{}", self.section, self.key)
    }

    fn error(&self, message: impl Into<String>) -> ConfigError {
        ConfigError {
            origin: self.origin.clone(),
            key: self.name(),
            message: message.into(),
        }
    }
}

/// Everything a subcommand needs: the experiment plus run-level knobs.
#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    pub experiment: ExperimentConfig,
    pub threads: usize,
    pub first_order: String,
    pub second_order: String,
}

const SECTIONS: &[(&str, &[&str])] = &[
    ("run", &["threads"]),
    ("params", &["alpha", "p"]),
    (
        "pathsim",
        &["paths", "steps", "refine_fraction", "seed", "stream"],
    ),
    (
        "localtime",
        &[
            "eps_exponent",
            "bandwidth",
            "surface_levels",
            "small_levels",
            "occupation_interval",
            "occupation_cells",
        ],
    ),
    (
        "harness",
        &["times", "batches", "n_list", "first_order", "second_order"],
    ),
    (
        "ssmp",
        &[
            "points",
            "n_xi",
            "laplace_r",
            "coupled_paths",
            "coupled_steps",
            "coupled_levels",
            "coupled_points",
            "xi_second_moment_tol",
            "xi_tail_rel",
            "level_step",
        ],
    ),
    (
        "tolerance",
        &[
            "se_multiplier",
            "gated_moment_order",
            "moment_bias",
            "route_bias",
            "ibp_sup_rel",
            "ibp_plus_min_gap",
            "bridge_bias",
            "variance_bias",
            "surface_bias",
            "occupation_residual",
            "ks_min_p",
            "exponent_tol",
            "coupled_rel_tol",
        ],
    ),
];

pub fn parse_text(text: &str, source: &str) -> Result<Vec<Entry>, ConfigError> {
    let mut section: Option<String> = None;
    let mut out: Vec<Entry> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let origin = format!("{source}:{}", i + 1);
        let line = match raw.find('#') {
            Some(k) => &raw[..k],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        let err = |key: &str, message: String| ConfigError {
            origin: origin.clone(),
            key: key.into(),
            message,
        };
        if let Some(rest) = line.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or_else(|| err("", format!("unterminated section header `{line}`")))?
                .trim();
            if !SECTIONS.iter().any(|(s, _)| *s == name) {
                return Err(err("", format!("unknown section `[{name}]`")));
            }
            section = Some(name.to_string());
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| err("", format!("expected `key = value`, got `{line}`")))?;
        let key = key.trim();
        let sec = section
            .as_deref()
            .ok_or_else(|| err(key, "entry before any [section] header".into()))?;
        let known = SECTIONS
            .iter()
            .find(|(s, _)| *s == sec)
            .is_some_and(|(_, keys)| keys.contains(&key));
        if !known {
            return Err(err(&format!("{sec}.{key}"), "unknown key".into()));
        }
        if let Some(prev) = out.iter().find(|e| e.section == sec && e.key == key) {
            return Err(err(
                &format!("{sec}.{key}"),
                format!("duplicate key, first set at {}", prev.origin),
            ));
        }
        out.push(Entry {
            section: sec.into(),
            key: key.into(),
            value: value.trim().into(),
            origin,
        });
    }
    Ok(out)
}

pub fn read_file(path: &Path) -> Result<Vec<Entry>, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError {
        origin: path.display().to_string(),
        key: String::new(),
        message: e.to_string(),
    })?;
    parse_text(&text, &path.display().to_string())
}

fn float(e: &Entry) -> Result<f64, ConfigError> {
    e.value
        .parse::<f64>()
        .ok()
        .filter(|x| x.is_finite())
        .ok_or_else(|| e.error(format!("expected a number, got `{}`", e.value)))
}

fn int<T: std::str::FromStr>(e: &Entry) -> Result<T, ConfigError> {
    e.value
        .parse::<T>()
        .map_err(|_| e.error(format!("expected a nonnegative integer, got `{}`", e.value)))
}

fn list(e: &Entry) -> Result<Vec<f64>, ConfigError> {
    let v: Option<Vec<f64>> = e
        .value
        .split(',')
        .map(|s| s.trim().parse::<f64>().ok().filter(|x| x.is_finite()))
        .collect();
    match v {
        Some(v) if !v.is_empty() => Ok(v),
        _ => Err(e.error(format!(
            "expected a comma-separated list of numbers, got `{}`",
            e.value
        ))),
    }
}

/// `indicator A B`, `signed_bump` or `min CAP`.
pub fn test_function(text: &str, alpha: f64) -> Result<TestFunction, String> {
    let words: Vec<&str> = text.split_whitespace().collect();
    let num = |s: &str| {
        s.parse::<f64>()
            .map_err(|_| format!("`{s}` is not a number"))
    };
    match words.as_slice() {
        ["signed_bump"] => Ok(TestFunction::signed_bump(alpha)),
        ["indicator", a, b] => TestFunction::indicator(num(a)?, num(b)?).map_err(|e| e.to_string()),
        ["min", c] => TestFunction::min_with(num(c)?).map_err(|e| e.to_string()),
        _ => Err(format!(
            "expected `indicator A B`, `signed_bump` or `min CAP`, got `{text}`"
        )),
    }
}

fn last<'a>(entries: &'a [Entry], section: &str, key: &str) -> Option<&'a Entry> {
    entries
        .iter()
        .rev()
        .find(|e| e.section == section && e.key == key)
}

/// Builds the settings from defaults and `entries`, later entries winning.
pub fn resolve(entries: &[Entry]) -> Result<Settings, ConfigError> {
    let alpha = last(entries, "params", "alpha")
        .map(float)
        .transpose()?
        .unwrap_or(0.5);
    let p = last(entries, "params", "p")
        .map(float)
        .transpose()?
        .unwrap_or(0.0);
    let params = Params::new(alpha, p).map_err(|err| {
        let e = last(entries, "params", "alpha")
            .or_else(|| last(entries, "params", "p"))
            .cloned()
            .unwrap_or_else(|| Entry::flag("alpha", "params", "alpha", alpha));
        e.error(err.to_string())
    })?;
    let mut s = Settings {
        experiment: ExperimentConfig::new(params),
        threads: 1,
        first_order: "indicator 0 1".into(),
        second_order: "signed_bump".into(),
    };
    for e in entries {
        apply(&mut s, e)?;
    }
    let c = &mut s.experiment;
    c.scaling.first_order = test_function(&s.first_order, alpha).map_err(|m| {
        last(entries, "harness", "first_order")
            .map(|e| e.error(m.clone()))
            .unwrap_or_else(|| Entry::flag("config", "harness", "first_order", "").error(m))
    })?;
    c.scaling.second_order = test_function(&s.second_order, alpha).map_err(|m| {
        last(entries, "harness", "second_order")
            .map(|e| e.error(m.clone()))
            .unwrap_or_else(|| Entry::flag("config", "harness", "second_order", "").error(m))
    })?;
    if s.threads == 0 {
        let e = last(entries, "run", "threads").expect("threads was set");
        return Err(e.error("must be at least 1"));
    }
    c.validate().map_err(|err| ConfigError {
        origin: "configuration".into(),
        key: String::new(),
        message: err.to_string(),
    })?;
    Ok(s)
}

fn apply(s: &mut Settings, e: &Entry) -> Result<(), ConfigError> {
    let c = &mut s.experiment;
    let t = &mut c.tolerance;
    match (e.section.as_str(), e.key.as_str()) {
        ("params", _) => {}
        ("run", "threads") => s.threads = int(e)?,
        ("pathsim", "paths") => c.n_paths = int(e)?,
        ("pathsim", "steps") => c.grid.n_steps = int(e)?,
        ("pathsim", "refine_fraction") => c.grid.refine_fraction = float(e)?,
        ("pathsim", "seed") => c.seed.master_seed = int(e)?,
        ("pathsim", "stream") => c.seed.stream_index = int(e)?,
        ("localtime", "eps_exponent") => c.estimator.eps_exponent = float(e)?,
        ("localtime", "bandwidth") => c.estimator.bandwidth = float(e)?,
        ("localtime", "surface_levels") => c.estimator.surface_levels = list(e)?,
        ("localtime", "small_levels") => c.estimator.small_levels = list(e)?,
        ("localtime", "occupation_interval") => match list(e)?.as_slice() {
            &[a, b] => c.estimator.occupation_interval = (a, b),
            _ => return Err(e.error("expected two numbers `a, b`")),
        },
        ("localtime", "occupation_cells") => c.estimator.occupation_cells = int(e)?,
        ("harness", "times") => c.times = list(e)?,
        ("harness", "batches") => c.batches = int(e)?,
        ("harness", "n_list") => c.scaling.n_list = list(e)?,
        ("harness", "first_order") => s.first_order = e.value.clone(),
        ("harness", "second_order") => s.second_order = e.value.clone(),
        ("ssmp", "points") => c.ssmp.n_points = int(e)?,
        ("ssmp", "n_xi") => c.ssmp.n_xi = int(e)?,
        ("ssmp", "laplace_r") => c.ssmp.laplace_r = list(e)?,
        ("ssmp", "coupled_paths") => c.ssmp.coupled_paths = int(e)?,
        ("ssmp", "coupled_steps") => c.ssmp.coupled_steps = int(e)?,
        ("ssmp", "coupled_levels") => c.ssmp.coupled_levels = int(e)?,
        ("ssmp", "coupled_points") => c.ssmp.coupled_points = int(e)?,
        ("ssmp", "xi_second_moment_tol") => c.estimator.xi_second_moment_tol = float(e)?,
        ("ssmp", "xi_tail_rel") => c.estimator.xi_tail_rel = float(e)?,
        ("ssmp", "level_step") => c.estimator.level_step = float(e)?,
        ("tolerance", "se_multiplier") => t.se_multiplier = float(e)?,
        ("tolerance", "gated_moment_order") => t.gated_moment_order = int(e)?,
        ("tolerance", "moment_bias") => t.moment_bias = float(e)?,
        ("tolerance", "route_bias") => t.route_bias = float(e)?,
        ("tolerance", "ibp_sup_rel") => t.ibp_sup_rel = float(e)?,
        ("tolerance", "ibp_plus_min_gap") => t.ibp_plus_min_gap = float(e)?,
        ("tolerance", "bridge_bias") => t.bridge_bias = float(e)?,
        ("tolerance", "variance_bias") => t.variance_bias = float(e)?,
        ("tolerance", "surface_bias") => t.surface_bias = float(e)?,
        ("tolerance", "occupation_residual") => t.occupation_residual = float(e)?,
        ("tolerance", "ks_min_p") => t.ks_min_p = float(e)?,
        ("tolerance", "exponent_tol") => t.exponent_tol = float(e)?,
        ("tolerance", "coupled_rel_tol") => t.coupled_rel_tol = float(e)?,
        _ => return Err(e.error("unknown key")),
    }
    Ok(())
}

fn join(xs: &[f64]) -> String {
    xs.iter().map(|&x| fmt17(x)).collect::<Vec<_>>().join(", ")
}

/// The complete resolved configuration in the file format; reading it back
/// gives the same settings.
pub fn to_text(s: &Settings) -> String {
    let c = &s.experiment;
    let e = &c.estimator;
    let t = &c.tolerance;
    let f = fmt17;
    let sections: Vec<(&str, Vec<(&str, String)>)> = vec![
        ("run", vec![("threads", s.threads.to_string())]),
        (
            "params",
            vec![("alpha", f(c.params.alpha())), ("p", f(c.params.p()))],
        ),
        (
            "pathsim",
            vec![
                ("paths", c.n_paths.to_string()),
                ("steps", c.grid.n_steps.to_string()),
                ("refine_fraction", f(c.grid.refine_fraction)),
                ("seed", c.seed.master_seed.to_string()),
                ("stream", c.seed.stream_index.to_string()),
            ],
        ),
        (
            "localtime",
            vec![
                ("eps_exponent", f(e.eps_exponent)),
                ("bandwidth", f(e.bandwidth)),
                ("surface_levels", join(&e.surface_levels)),
                ("small_levels", join(&e.small_levels)),
                (
                    "occupation_interval",
                    join(&[e.occupation_interval.0, e.occupation_interval.1]),
                ),
                ("occupation_cells", e.occupation_cells.to_string()),
            ],
        ),
        (
            "harness",
            vec![
                ("times", join(&c.times)),
                ("batches", c.batches.to_string()),
                ("n_list", join(&c.scaling.n_list)),
                ("first_order", s.first_order.clone()),
                ("second_order", s.second_order.clone()),
            ],
        ),
        (
            "ssmp",
            vec![
                ("points", c.ssmp.n_points.to_string()),
                ("n_xi", c.ssmp.n_xi.to_string()),
                ("laplace_r", join(&c.ssmp.laplace_r)),
                ("coupled_paths", c.ssmp.coupled_paths.to_string()),
                ("coupled_steps", c.ssmp.coupled_steps.to_string()),
                ("coupled_levels", c.ssmp.coupled_levels.to_string()),
                ("coupled_points", c.ssmp.coupled_points.to_string()),
                ("xi_second_moment_tol", f(e.xi_second_moment_tol)),
                ("xi_tail_rel", f(e.xi_tail_rel)),
                ("level_step", f(e.level_step)),
            ],
        ),
        (
            "tolerance",
            vec![
                ("se_multiplier", f(t.se_multiplier)),
                ("gated_moment_order", t.gated_moment_order.to_string()),
                ("moment_bias", f(t.moment_bias)),
                ("route_bias", f(t.route_bias)),
                ("ibp_sup_rel", f(t.ibp_sup_rel)),
                ("ibp_plus_min_gap", f(t.ibp_plus_min_gap)),
                ("bridge_bias", f(t.bridge_bias)),
                ("variance_bias", f(t.variance_bias)),
                ("surface_bias", f(t.surface_bias)),
                ("occupation_residual", f(t.occupation_residual)),
                ("ks_min_p", f(t.ks_min_p)),
                ("exponent_tol", f(t.exponent_tol)),
                ("coupled_rel_tol", f(t.coupled_rel_tol)),
            ],
        ),
    ];
    let mut out = String::new();
    for (name, keys) in sections {
        out.push_str(&format!("[{name}]\n"));
        for (k, v) in keys {
            out.push_str(&format!("{k} = {v}\n"));
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let s = resolve(&[]).unwrap();
        let text = to_text(&s);
        let back = resolve(&parse_text(&text, "x").unwrap()).unwrap();
        assert_eq!(back, s);
        assert_eq!(to_text(&back), text);
    }

    #[test]
    fn every_listed_key_is_applied() {
        let s = resolve(&[]).unwrap();
        for e in parse_text(&to_text(&s), "x").unwrap() {
            let mut t = s.clone();
            apply(&mut t, &e).unwrap();
        }
    }

    #[test]
    fn later_entries_win() {
        let mut es = parse_text("[params]\nalpha = 0.3\n[pathsim]\npaths = 10\n", "f").unwrap();
        es.push(Entry::flag("paths", "pathsim", "paths", 20));
        let s = resolve(&es).unwrap();
        assert_eq!(s.experiment.n_paths, 20);
        assert_eq!(s.experiment.params.alpha(), 0.3);
        assert_eq!(
            s.experiment.scaling.second_order,
            TestFunction::signed_bump(0.3)
        );
    }

    #[test]
    fn diagnostics_name_line_and_key() {
        let e = parse_text("[pathsim]\n\npaths = ten\n", "c.ini")
            .and_then(|es| resolve(&es))
            .unwrap_err();
        assert_eq!(e.origin, "c.ini:3");
        assert_eq!(e.key, "pathsim.paths");
        let e = parse_text("[pathsim]\nwidth = 1\n", "c.ini").unwrap_err();
        assert_eq!(
            (e.origin.as_str(), e.key.as_str()),
            ("c.ini:2", "pathsim.width")
        );
        let e = parse_text("paths = 1\n", "c.ini").unwrap_err();
        assert!(e.message.contains("section"), "{e}");
        let e = parse_text("[nope]\n", "c.ini").unwrap_err();
        assert!(e.message.contains("unknown section"));
        let e = parse_text("[run]\nthreads = 1\nthreads = 2\n", "c.ini").unwrap_err();
        assert!(e.message.contains("c.ini:2"), "{e}");
        let e = parse_text("[harness]\nfirst_order = cos\n", "c.ini")
            .and_then(|es| resolve(&es))
            .unwrap_err();
        assert_eq!(e.key, "harness.first_order");
        let e = resolve(&[Entry::flag("p", "params", "p", 0.7)]).unwrap_err();
        assert_eq!(e.origin, "--p");
    }

    #[test]
    fn invalid_experiment_is_a_config_error() {
        let e = resolve(&[Entry::flag("steps", "pathsim", "steps", 3)]).unwrap_err();
        assert!(e.message.contains("n_steps"), "{e}");
    }
}
