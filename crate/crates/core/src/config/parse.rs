use std::collections::BTreeMap;

use toml::Value;

use super::{
    Assertions, Caps, CheckConfig, ConfigError, Format, OutputConfig, PolicyConfig, PolicyName, RunConfig, SeedSpec,
    SweepConfig, Task, WalkConfig,
};
use crate::queue::{MixedProfile, ModelParams, PenaltySchedule, State, ThresholdStep};
use crate::rational::{format_rational, parse_rational, rational_from_f64, Rational};

/// Every accepted key, in the order used when writing a configuration back.
pub const KNOWN_KEYS: &[&str] = &[
    "task",
    "model.players",
    "model.period",
    "model.allow_short_period",
    "model.initial_counts",
    "penalty.kind",
    "penalty.value",
    "penalty.slope",
    "penalty.intercept",
    "penalty.table",
    "policy.kind",
    "policy.eta",
    "policy.profile",
    "policy.grid_resolution",
    "policy.refine_rounds",
    "policy.refine_window",
    "run.horizon",
    "run.seeds",
    "output.path",
    "output.format",
    "caps.exact_profiles",
    "caps.grid_tuples",
    "caps.max_runs",
    "assert.enabled",
    "assert.max_k",
    "assert.linear_growth",
    "assert.non_divergence",
    "assert.lemma_bounds",
    "assert.regimes",
    "sweep.players",
    "sweep.period",
    "sweep.eta",
    "certify.epsilon",
    "walk.scale",
    "walk.eta",
    "walk.divisor",
    "walk.d",
    "walk.max_jump",
    "walk.z0",
    "walk.start",
    "walk.sup_limit",
    "walk.sweep_to",
    "check.max_total",
    "check.max_period",
    "check.periods",
    "check.cases",
    "check.seed",
];

fn flatten(prefix: &str, table: &toml::Table, out: &mut BTreeMap<String, Value>) {
    for (key, value) in table {
        let path = if prefix.is_empty() {
            key.clone()
        } else {
            format!("{prefix}.{key}")
        };
        match value {
            Value::Table(inner) => flatten(&path, inner, out),
            other => {
                out.insert(path, other.clone());
            }
        }
    }
}

/// Typed access to the flattened document; problems accumulate in `errors`.
struct Reader {
    map: BTreeMap<String, Value>,
    errors: Vec<String>,
}

impl Reader {
    fn get(&self, key: &str) -> Option<&Value> {
        self.map.get(key)
    }

    fn type_error(&mut self, key: &str, expected: &str, found: &Value) {
        self.errors
            .push(format!("{key}: expected {expected}, found {}", found.type_str()));
    }

    fn missing(&mut self, key: &str) {
        self.errors.push(format!("{key}: required key is missing"));
    }

    fn uint(&mut self, key: &str) -> Option<u64> {
        match self.get(key)?.clone() {
            Value::Integer(i) if i >= 0 => Some(i as u64),
            Value::Integer(i) => {
                self.errors.push(format!("{key}: must be nonnegative, got {i}"));
                None
            }
            other => {
                self.type_error(key, "a nonnegative integer", &other);
                None
            }
        }
    }

    fn required_uint(&mut self, key: &str) -> Option<u64> {
        if self.get(key).is_none() {
            self.missing(key);
            return None;
        }
        self.uint(key)
    }

    fn float(&mut self, key: &str) -> Option<f64> {
        match self.get(key)?.clone() {
            Value::Float(f) => Some(f),
            Value::Integer(i) => Some(i as f64),
            other => {
                self.type_error(key, "a number", &other);
                None
            }
        }
    }

    fn boolean(&mut self, key: &str) -> Option<bool> {
        match self.get(key)?.clone() {
            Value::Boolean(b) => Some(b),
            other => {
                self.type_error(key, "a boolean", &other);
                None
            }
        }
    }

    fn string(&mut self, key: &str) -> Option<String> {
        match self.get(key)?.clone() {
            Value::String(s) => Some(s),
            other => {
                self.type_error(key, "a string", &other);
                None
            }
        }
    }

    fn rational_value(&mut self, key: &str, value: &Value) -> Option<Rational> {
        let parsed = match value {
            Value::Integer(i) => Ok(Rational::from_integer(*i)),
            Value::Float(f) => rational_from_f64(*f),
            Value::String(s) => parse_rational(s),
            other => {
                self.type_error(key, "a rational number (integer, decimal or \"p/q\")", other);
                return None;
            }
        };
        match parsed {
            Ok(r) => Some(r),
            Err(e) => {
                self.errors.push(format!("{key}: {e}"));
                None
            }
        }
    }

    fn rational(&mut self, key: &str) -> Option<Rational> {
        let value = self.get(key)?.clone();
        self.rational_value(key, &value)
    }

    fn array(&mut self, key: &str) -> Option<Vec<Value>> {
        match self.get(key)?.clone() {
            Value::Array(a) => Some(a),
            other => {
                self.type_error(key, "an array", &other);
                None
            }
        }
    }

    fn uint_list(&mut self, key: &str) -> Option<Vec<u64>> {
        let items = self.array(key)?;
        let mut out = Vec::with_capacity(items.len());
        for item in items {
            match item {
                Value::Integer(i) if i >= 0 => out.push(i as u64),
                other => {
                    self.type_error(key, "an array of nonnegative integers", &other);
                    return None;
                }
            }
        }
        Some(out)
    }

    fn float_list(&mut self, key: &str) -> Option<Vec<f64>> {
        let items = self.array(key)?;
        let mut out = Vec::with_capacity(items.len());
        for item in items {
            match item {
                Value::Float(f) => out.push(f),
                Value::Integer(i) => out.push(i as f64),
                other => {
                    self.type_error(key, "an array of numbers", &other);
                    return None;
                }
            }
        }
        Some(out)
    }

    fn matrix(&mut self, key: &str) -> Option<Vec<Vec<f64>>> {
        let rows = self.array(key)?;
        let mut out = Vec::with_capacity(rows.len());
        for row in rows {
            let Value::Array(items) = row else {
                self.type_error(key, "an array of arrays of numbers", &row);
                return None;
            };
            let mut parsed = Vec::with_capacity(items.len());
            for item in items {
                match item {
                    Value::Float(f) => parsed.push(f),
                    Value::Integer(i) => parsed.push(i as f64),
                    other => {
                        self.type_error(key, "an array of arrays of numbers", &other);
                        return None;
                    }
                }
            }
            out.push(parsed);
        }
        Some(out)
    }

    fn choice<T: Copy>(&mut self, key: &str, options: &[(&str, T)]) -> Option<T> {
        let text = self.string(key)?;
        match options.iter().find(|(name, _)| *name == text) {
            Some((_, v)) => Some(*v),
            None => {
                let names: Vec<&str> = options.iter().map(|(n, _)| *n).collect();
                self.errors.push(format!(
                    "{key}: unknown value \"{text}\" (expected one of {})",
                    names.join(", ")
                ));
                None
            }
        }
    }
}

fn parse_seeds(reader: &mut Reader) -> Option<SeedSpec> {
    let key = "run.seeds";
    match reader.get(key)?.clone() {
        Value::Integer(i) if i >= 0 => Some(SeedSpec::List(vec![i as u64])),
        Value::Array(_) => reader.uint_list(key).map(SeedSpec::List),
        Value::String(s) => {
            let (parts, inclusive) = match s.split_once("..=") {
                Some(p) => (Some(p), true),
                None => (s.split_once(".."), false),
            };
            let parsed = parts.and_then(|(a, b)| Some((a.trim().parse::<u64>().ok()?, b.trim().parse::<u64>().ok()?)));
            match parsed {
                Some((start, end)) => Some(SeedSpec::Range { start, end, inclusive }),
                None => {
                    reader
                        .errors
                        .push(format!("{key}: \"{s}\" is not a range like \"1..21\" or \"1..=20\""));
                    None
                }
            }
        }
        other => {
            reader.type_error(key, "a seed, an array of seeds or a range string", &other);
            None
        }
    }
}

fn parse_penalty(reader: &mut Reader) -> Option<PenaltySchedule> {
    if reader.get("penalty.kind").is_none() {
        reader.missing("penalty.kind");
        return None;
    }
    let kind = reader.choice("penalty.kind", &[("constant", 0), ("linear", 1), ("threshold", 2)])?;
    let schedule = match kind {
        0 => {
            let Some(value) = reader.get("penalty.value").cloned() else {
                reader.missing("penalty.value");
                return None;
            };
            PenaltySchedule::constant(reader.rational_value("penalty.value", &value)?)
        }
        1 => {
            let slope = reader.rational("penalty.slope");
            let intercept = reader.rational("penalty.intercept");
            if reader.get("penalty.slope").is_none() {
                reader.missing("penalty.slope");
            }
            PenaltySchedule::linear(slope?, intercept.unwrap_or_else(|| Rational::from_integer(0)))
        }
        _ => {
            let Some(rows) = reader.array("penalty.table") else {
                if reader.get("penalty.table").is_none() {
                    reader.missing("penalty.table");
                }
                return None;
            };
            let mut steps = Vec::with_capacity(rows.len());
            for row in rows {
                match row {
                    Value::Array(pair) if pair.len() == 2 => {
                        let from = match pair[0] {
                            Value::Integer(i) if i >= 0 => i as u64,
                            ref other => {
                                reader.type_error("penalty.table", "[from, value] pairs with integer from", other);
                                return None;
                            }
                        };
                        let value = reader.rational_value("penalty.table", &pair[1])?;
                        steps.push(ThresholdStep { from, value });
                    }
                    other => {
                        reader.type_error("penalty.table", "[from, value] pairs", &other);
                        return None;
                    }
                }
            }
            PenaltySchedule::Threshold { steps }
        }
    };
    match schedule.validate() {
        Ok(()) => Some(schedule),
        Err(e) => {
            reader.errors.push(format!("penalty: {e}"));
            None
        }
    }
}

/// Parses and validates a configuration document, reporting every violation.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let table: toml::Table = toml::from_str(text).map_err(|e| ConfigError::Invalid(vec![e.to_string()]))?;
    let mut map = BTreeMap::new();
    flatten("", &table, &mut map);
    let mut reader = Reader {
        map,
        errors: Vec::new(),
    };

    let unknown: Vec<String> = reader
        .map
        .keys()
        .filter(|k| !KNOWN_KEYS.contains(&k.as_str()))
        .map(|k| format!("{k}: unknown key"))
        .collect();
    reader.errors.extend(unknown);

    let task = if reader.get("task").is_some() {
        let options: Vec<(&str, Task)> = Task::ALL.iter().map(|t| (t.name(), *t)).collect();
        reader.choice("task", &options)
    } else {
        Some(Task::Run)
    };
    let needs_model = task.is_some_and(|t| !t.is_standalone() && t != Task::CheapestAction);
    let needs_penalty = task.is_some_and(|t| !t.is_standalone());

    let (players, period) = if !needs_model {
        (
            reader.uint("model.players").unwrap_or(3) as usize,
            reader.uint("model.period").unwrap_or(3) as usize,
        )
    } else {
        (
            reader.required_uint("model.players").unwrap_or(0) as usize,
            reader.required_uint("model.period").unwrap_or(0) as usize,
        )
    };
    let allow_short_period = reader.boolean("model.allow_short_period").unwrap_or(false);
    let initial_counts = reader.uint_list("model.initial_counts");
    let penalty = if !needs_penalty && reader.get("penalty.kind").is_none() {
        Some(PenaltySchedule::constant(Rational::from_integer(0)))
    } else {
        parse_penalty(&mut reader)
    };

    let policy_kind = if reader.get("policy.kind").is_some() {
        let options: Vec<(&str, PolicyName)> = PolicyName::ALL.iter().map(|p| (p.name(), *p)).collect();
        reader.choice("policy.kind", &options)
    } else {
        if task == Some(Task::Run) {
            reader.missing("policy.kind");
        }
        Some(PolicyName::AllZero)
    };
    let policy = PolicyConfig {
        kind: policy_kind.unwrap_or(PolicyName::AllZero),
        eta: reader.float("policy.eta").unwrap_or(0.1),
        profile: reader.matrix("policy.profile"),
        grid_resolution: reader.uint("policy.grid_resolution").unwrap_or(10) as u32,
        refine_rounds: reader.uint("policy.refine_rounds").unwrap_or(4) as u32,
        refine_window: reader.uint("policy.refine_window").unwrap_or(2) as u32,
    };

    let needs_runs = matches!(task, Some(Task::Run) | Some(Task::Walk));
    let horizon = if needs_runs {
        reader.required_uint("run.horizon").unwrap_or(0)
    } else {
        reader.uint("run.horizon").unwrap_or(1)
    };
    let seeds = if reader.get("run.seeds").is_some() {
        parse_seeds(&mut reader)
    } else {
        if needs_runs {
            reader.missing("run.seeds");
        }
        Some(SeedSpec::List(Vec::new()))
    };

    let output = OutputConfig {
        path: reader.string("output.path"),
        format: if reader.get("output.format").is_some() {
            reader
                .choice("output.format", &[("csv", Format::Csv), ("json", Format::Json)])
                .unwrap_or(Format::Csv)
        } else {
            Format::Csv
        },
    };
    let defaults = Caps::default();
    let caps = Caps {
        exact_profiles: reader.uint("caps.exact_profiles").unwrap_or(defaults.exact_profiles),
        grid_tuples: reader.uint("caps.grid_tuples").unwrap_or(defaults.grid_tuples),
        max_runs: reader.uint("caps.max_runs").unwrap_or(defaults.max_runs),
    };
    let assertions = Assertions {
        enabled: reader.boolean("assert.enabled").unwrap_or(true),
        max_k: reader.uint("assert.max_k"),
        linear_growth: reader.boolean("assert.linear_growth").unwrap_or(false),
        non_divergence: reader.float("assert.non_divergence"),
        lemma_bounds: reader.boolean("assert.lemma_bounds").unwrap_or(false),
        regimes: reader.boolean("assert.regimes").unwrap_or(false),
    };
    let sweep = SweepConfig {
        players: reader
            .uint_list("sweep.players")
            .map(|v| v.into_iter().map(|x| x as usize).collect())
            .unwrap_or_default(),
        period: reader
            .uint_list("sweep.period")
            .map(|v| v.into_iter().map(|x| x as usize).collect())
            .unwrap_or_default(),
        eta: reader.float_list("sweep.eta").unwrap_or_default(),
    };
    let certify_epsilon = reader.float("certify.epsilon").unwrap_or(1e-9);
    let wd = WalkConfig::default();
    let walk = WalkConfig {
        scale: reader.float("walk.scale").unwrap_or(wd.scale),
        eta: reader.float("walk.eta").unwrap_or(wd.eta),
        divisor: reader.uint("walk.divisor").unwrap_or(wd.divisor),
        d: reader.float("walk.d").unwrap_or(wd.d),
        max_jump: reader.uint("walk.max_jump").unwrap_or(wd.max_jump),
        z0: reader.uint("walk.z0").unwrap_or(wd.z0),
        start: reader.uint("walk.start").unwrap_or(wd.start),
        sup_limit: reader.uint("walk.sup_limit").unwrap_or(wd.sup_limit),
        sweep_to: reader.uint("walk.sweep_to").unwrap_or(wd.sweep_to),
    };

    let cd = CheckConfig::default();
    let check = CheckConfig {
        max_total: reader.uint("check.max_total").unwrap_or(cd.max_total),
        max_period: reader
            .uint("check.max_period")
            .map(|v| v as usize)
            .unwrap_or(cd.max_period),
        periods: reader
            .uint_list("check.periods")
            .map(|v| v.into_iter().map(|x| x as usize).collect())
            .unwrap_or(cd.periods),
        cases: reader.uint("check.cases").unwrap_or(cd.cases),
        seed: reader.uint("check.seed").unwrap_or(cd.seed),
    };

    let mut errors = reader.errors;
    let (Some(task), Some(penalty), Some(seeds)) = (task, penalty, seeds) else {
        return Err(ConfigError::Invalid(errors));
    };
    let config = RunConfig {
        task,
        players,
        period,
        allow_short_period,
        initial_counts,
        penalty,
        policy,
        horizon,
        seeds,
        output,
        caps,
        assertions,
        sweep,
        certify_epsilon,
        walk,
        check,
    };
    if players > 0 && period > 0 {
        validate(&config, &mut errors);
    }
    if errors.is_empty() {
        Ok(config)
    } else {
        Err(ConfigError::Invalid(errors))
    }
}

fn validate(config: &RunConfig, errors: &mut Vec<String>) {
    let mut push = |msg: String| errors.push(msg);
    if matches!(config.task, Task::Run | Task::Walk) {
        if config.horizon == 0 {
            push("run.horizon: must be at least 1".into());
        }
        if config.seeds.is_empty() {
            push("run.seeds: at least one seed is required".into());
        }
    }
    let runs = config.run_count();
    if runs > config.caps.max_runs {
        push(format!(
            "caps.max_runs: the configuration expands to {runs} runs, above the cap of {}",
            config.caps.max_runs
        ));
    }
    let eta_ok = |eta: f64| eta.is_finite() && eta > 0.0;
    if !eta_ok(config.policy.eta) || config.sweep.eta.iter().any(|&e| !eta_ok(e)) {
        push("policy.eta: learning rates must be positive and finite".into());
    }
    if config.policy.grid_resolution == 0 {
        push("policy.grid_resolution: must be positive".into());
    }
    if let Some(f) = config.assertions.non_divergence {
        if !(0.0..=1.0).contains(&f) {
            push(format!("assert.non_divergence: fraction must lie in [0, 1], got {f}"));
        }
    }
    if !(config.certify_epsilon.is_finite() && config.certify_epsilon >= 0.0) {
        push("certify.epsilon: must be nonnegative".into());
    }

    if config.task == Task::Walk {
        let w = &config.walk;
        if !(w.d.is_finite() && w.d > 1.0) {
            push(format!("walk.d: must exceed 1, got {}", w.d));
        }
        if w.max_jump == 0 {
            push("walk.max_jump: must be positive".into());
        }
        if w.divisor == 0 {
            push("walk.divisor: must be positive".into());
        }
        if !(w.eta.is_finite() && w.eta > 0.0) || !(w.scale.is_finite() && w.scale >= 0.0) {
            push("walk.scale, walk.eta: need scale >= 0 and eta > 0".into());
        }
        if w.sweep_to < w.z0 + w.max_jump + 1 {
            push(format!(
                "walk.sweep_to: must be at least z0 + M + 1 = {}",
                w.z0 + w.max_jump + 1
            ));
        }
        return;
    }
    if config.task.is_suite() {
        let c = &config.check;
        if config.task == Task::TieOracle && !(3..=8).contains(&c.max_total) {
            push(format!("check.max_total: must lie in 3..=8, got {}", c.max_total));
        }
        if config.task == Task::TieOracle && !(1..=8).contains(&c.max_period) {
            push(format!("check.max_period: must lie in 1..=8, got {}", c.max_period));
        }
        if config.task != Task::TieOracle {
            if c.periods.is_empty() || c.periods.iter().any(|&t| t == 0 || t > 8) {
                push("check.periods: need a nonempty list of periods in 1..=8".into());
            }
            if c.cases == 0 {
                push("check.cases: must be positive".into());
            }
        }
        return;
    }

    for (players, period, _) in config.combinations() {
        let params = match ModelParams::build(players, period, config.penalty.clone(), config.allow_short_period) {
            Ok(p) => p,
            Err(e) => {
                let hint = if matches!(e, crate::queue::QueueError::PeriodShorterThanPlayers { .. }) {
                    " (model.allow_short_period)"
                } else {
                    ""
                };
                push(format!("model (N = {players}, T = {period}): {e}{hint}"));
                continue;
            }
        };
        let state = match &config.initial_counts {
            Some(counts) => {
                if counts.len() != players {
                    push(format!(
                        "model.initial_counts: expected {players} entries, found {}",
                        counts.len()
                    ));
                    continue;
                }
                if counts.contains(&0) {
                    push("model.initial_counts: every player starts with at least one job".into());
                    continue;
                }
                State::new(counts.clone()).expect("nonempty")
            }
            None => State::unit(players),
        };
        let k = state.total();
        let c = params.penalty_at(k);
        match config.task {
            Task::Run if config.policy.kind == PolicyName::FixedMixed => match &config.policy.profile {
                None => push("policy.profile: required for the fixed_mixed policy".into()),
                Some(rows) => match MixedProfile::new(rows.clone()).and_then(|m| params.check_mixed(&m)) {
                    Ok(()) => {}
                    Err(e) => push(format!("policy.profile: {e}")),
                },
            },
            Task::Run if config.policy.kind == PolicyName::Myopic => {
                let (threshold, regime) = if k > period as u64 {
                    (k * k * period as u64, "k > T")
                } else {
                    (k * k, "k <= T")
                };
                if c <= Rational::from_integer(threshold as i64) {
                    push(format!(
                        "penalty: the myopic policy needs C_k > {threshold} at the initial state ({regime}, k = {k}), got {}",
                        format_rational(&c)
                    ));
                }
            }
            Task::CertifyNash => {
                if k > period as u64 {
                    push(format!(
                        "task: certify_nash needs k <= T at the initial state, got k = {k}"
                    ));
                } else if c <= Rational::from_integer((k * k) as i64) {
                    push(format!(
                        "penalty: certify_nash needs C_k > k^2 = {}, got {}",
                        k * k,
                        format_rational(&c)
                    ));
                }
            }
            Task::CertifyCce => {
                if k <= period as u64 {
                    push(format!(
                        "task: certify_cce needs k > T at the initial state, got k = {k}"
                    ));
                }
                let profiles = (period as u64).checked_pow(players as u32).unwrap_or(u64::MAX);
                if profiles > config.caps.exact_profiles {
                    push(format!(
                        "caps.exact_profiles: certify_cce enumerates {profiles} profiles, above the cap of {}",
                        config.caps.exact_profiles
                    ));
                }
            }
            _ => {}
        }
    }
}

/// Applies `key=value` overrides to a document and returns the merged text.
///
/// Values are read as TOML; anything that does not parse is taken as a string.
pub fn apply_overrides(text: &str, overrides: &[String]) -> Result<String, ConfigError> {
    if overrides.is_empty() {
        return Ok(text.to_owned());
    }
    let table: toml::Table = toml::from_str(text).map_err(|e| ConfigError::Invalid(vec![e.to_string()]))?;
    let mut map = BTreeMap::new();
    flatten("", &table, &mut map);
    let mut errors = Vec::new();
    for item in overrides {
        let Some((key, raw)) = item.split_once('=') else {
            errors.push(format!("override \"{item}\": expected key=value"));
            continue;
        };
        let key = key.trim();
        let raw = raw.trim();
        let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
            .ok()
            .and_then(|mut t| t.remove("v"))
            .unwrap_or_else(|| Value::String(raw.to_owned()));
        map.insert(key.to_owned(), value);
    }
    if !errors.is_empty() {
        return Err(ConfigError::Invalid(errors));
    }
    let mut merged = String::new();
    for (key, value) in map {
        merged.push_str(&format!("{key} = {value}\n"));
    }
    Ok(merged)
}

fn rational_value(r: &Rational) -> Value {
    Value::String(format_rational(r))
}

fn ints<T: Copy + Into<u64>>(values: &[T]) -> Value {
    Value::Array(values.iter().map(|&v| Value::Integer(v.into() as i64)).collect())
}

fn floats(values: &[f64]) -> Value {
    Value::Array(values.iter().map(|&v| Value::Float(v)).collect())
}

/// Writes the configuration as `key = value` lines that parse back to an equal value.
pub fn serialize_config(config: &RunConfig) -> String {
    let mut entries: Vec<(&str, Value)> = Vec::new();
    let mut put = |key: &'static str, value: Value| entries.push((key, value));
    put("task", Value::String(config.task.name().into()));
    put("model.players", Value::Integer(config.players as i64));
    put("model.period", Value::Integer(config.period as i64));
    put("model.allow_short_period", Value::Boolean(config.allow_short_period));
    if let Some(c) = &config.initial_counts {
        put("model.initial_counts", ints(c));
    }
    match &config.penalty {
        PenaltySchedule::Constant { value } => {
            put("penalty.kind", Value::String("constant".into()));
            put("penalty.value", rational_value(value));
        }
        PenaltySchedule::Linear { slope, intercept } => {
            put("penalty.kind", Value::String("linear".into()));
            put("penalty.slope", rational_value(slope));
            put("penalty.intercept", rational_value(intercept));
        }
        PenaltySchedule::Threshold { steps } => {
            put("penalty.kind", Value::String("threshold".into()));
            put(
                "penalty.table",
                Value::Array(
                    steps
                        .iter()
                        .map(|s| Value::Array(vec![Value::Integer(s.from as i64), rational_value(&s.value)]))
                        .collect(),
                ),
            );
        }
    }
    put("policy.kind", Value::String(config.policy.kind.name().into()));
    put("policy.eta", Value::Float(config.policy.eta));
    if let Some(rows) = &config.policy.profile {
        put("policy.profile", Value::Array(rows.iter().map(|r| floats(r)).collect()));
    }
    put(
        "policy.grid_resolution",
        Value::Integer(config.policy.grid_resolution as i64),
    );
    put(
        "policy.refine_rounds",
        Value::Integer(config.policy.refine_rounds as i64),
    );
    put(
        "policy.refine_window",
        Value::Integer(config.policy.refine_window as i64),
    );
    put("run.horizon", Value::Integer(config.horizon as i64));
    put(
        "run.seeds",
        match &config.seeds {
            SeedSpec::List(v) => ints(v),
            SeedSpec::Range { start, end, inclusive } => {
                Value::String(format!("{start}..{}{end}", if *inclusive { "=" } else { "" }))
            }
        },
    );
    if let Some(path) = &config.output.path {
        put("output.path", Value::String(path.clone()));
    }
    put("output.format", Value::String(config.output.format.extension().into()));
    put("caps.exact_profiles", Value::Integer(config.caps.exact_profiles as i64));
    put("caps.grid_tuples", Value::Integer(config.caps.grid_tuples as i64));
    put("caps.max_runs", Value::Integer(config.caps.max_runs as i64));
    let a = &config.assertions;
    put("assert.enabled", Value::Boolean(a.enabled));
    if let Some(m) = a.max_k {
        put("assert.max_k", Value::Integer(m as i64));
    }
    put("assert.linear_growth", Value::Boolean(a.linear_growth));
    if let Some(f) = a.non_divergence {
        put("assert.non_divergence", Value::Float(f));
    }
    put("assert.lemma_bounds", Value::Boolean(a.lemma_bounds));
    put("assert.regimes", Value::Boolean(a.regimes));
    if !config.sweep.players.is_empty() {
        put(
            "sweep.players",
            ints(&config.sweep.players.iter().map(|&x| x as u64).collect::<Vec<_>>()),
        );
    }
    if !config.sweep.period.is_empty() {
        put(
            "sweep.period",
            ints(&config.sweep.period.iter().map(|&x| x as u64).collect::<Vec<_>>()),
        );
    }
    if !config.sweep.eta.is_empty() {
        put("sweep.eta", floats(&config.sweep.eta));
    }
    put("certify.epsilon", Value::Float(config.certify_epsilon));
    let w = &config.walk;
    put("walk.scale", Value::Float(w.scale));
    put("walk.eta", Value::Float(w.eta));
    put("walk.divisor", Value::Integer(w.divisor as i64));
    put("walk.d", Value::Float(w.d));
    put("walk.max_jump", Value::Integer(w.max_jump as i64));
    put("walk.z0", Value::Integer(w.z0 as i64));
    put("walk.start", Value::Integer(w.start as i64));
    put("walk.sup_limit", Value::Integer(w.sup_limit as i64));
    put("walk.sweep_to", Value::Integer(w.sweep_to as i64));
    let c = &config.check;
    put("check.max_total", Value::Integer(c.max_total as i64));
    put("check.max_period", Value::Integer(c.max_period as i64));
    put(
        "check.periods",
        ints(&c.periods.iter().map(|&x| x as u64).collect::<Vec<_>>()),
    );
    put("check.cases", Value::Integer(c.cases as i64));
    put("check.seed", Value::Integer(c.seed as i64));

    let mut text = String::new();
    for (key, value) in entries {
        text.push_str(key);
        text.push_str(" = ");
        text.push_str(&value.to_string());
        text.push('\n');
    }
    text
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
model.players = 3
model.period = 5
penalty.kind = "constant"
penalty.value = 321
policy.kind = "myopic"
run.horizon = 10000
run.seeds = 1
"#;

    #[test]
    fn minimal_config_is_accepted() {
        let c = parse_config(MINIMAL).unwrap();
        assert_eq!(c.players, 3);
        assert_eq!(c.period, 5);
        assert_eq!(c.penalty, PenaltySchedule::constant(Rational::from_integer(321)));
        assert_eq!(c.policy.kind, PolicyName::Myopic);
        assert_eq!(c.seeds.seeds(), vec![1]);
        assert_eq!(c.task, Task::Run);
    }

    #[test]
    fn nested_tables_flatten_to_the_same_keys() {
        let nested = r#"
[model]
players = 3
period = 5
[penalty]
kind = "constant"
value = 321
[policy]
kind = "myopic"
[run]
horizon = 10000
seeds = 1
"#;
        assert_eq!(parse_config(nested).unwrap(), parse_config(MINIMAL).unwrap());
    }

    #[test]
    fn short_period_needs_override() {
        let text = MINIMAL.replace("model.period = 5", "model.period = 2");
        let Err(ConfigError::Invalid(errors)) = parse_config(&text) else {
            panic!("expected rejection");
        };
        assert!(
            errors.iter().any(|e| e.contains("shorter than the number of players")),
            "{errors:?}"
        );
    }

    #[test]
    fn negative_slope_is_rejected() {
        let text = MINIMAL
            .replace("penalty.kind = \"constant\"", "penalty.kind = \"linear\"")
            .replace("penalty.value = 321", "penalty.slope = -1\npenalty.intercept = 400");
        let Err(ConfigError::Invalid(errors)) = parse_config(&text) else {
            panic!("expected rejection");
        };
        assert!(errors.iter().any(|e| e.starts_with("penalty")), "{errors:?}");
    }

    #[test]
    fn all_problems_are_reported() {
        let text = r#"
model.players = "three"
model.period = 5
penalty.kind = "constant"
penalty.value = 321
policy.kind = "telepathy"
run.horizon = 0
run.seeds = [1]
colour = "blue"
"#;
        let Err(ConfigError::Invalid(errors)) = parse_config(text) else {
            panic!("expected rejection");
        };
        assert!(errors.iter().any(|e| e.starts_with("colour: unknown key")));
        assert!(errors.iter().any(|e| e.starts_with("model.players: expected")));
        assert!(errors.iter().any(|e| e.starts_with("policy.kind: unknown value")));
        assert_eq!(errors.len(), 3, "{errors:?}");
    }

    #[test]
    fn overrides_replace_and_add_keys() {
        let merged = apply_overrides(
            MINIMAL,
            &[
                "run.horizon=50".into(),
                "output.format = json".into(),
                "run.seeds=[4, 5]".into(),
            ],
        )
        .unwrap();
        let c = parse_config(&merged).unwrap();
        assert_eq!(c.horizon, 50);
        assert_eq!(c.output.format, Format::Json);
        assert_eq!(c.seeds.seeds(), vec![4, 5]);
        assert!(apply_overrides(MINIMAL, &["nonsense".into()]).is_err());
    }

    #[test]
    fn seed_ranges() {
        let c = parse_config(&MINIMAL.replace("run.seeds = 1", "run.seeds = \"1..=20\"")).unwrap();
        assert_eq!(c.seeds.seeds(), (1..=20).collect::<Vec<_>>());
        let c = parse_config(&MINIMAL.replace("run.seeds = 1", "run.seeds = \"5..8\"")).unwrap();
        assert_eq!(c.seeds.seeds(), vec![5, 6, 7]);
        assert!(parse_config(&MINIMAL.replace("run.seeds = 1", "run.seeds = \"five\"")).is_err());
    }

    #[test]
    fn serialization_round_trips() {
        let text = r#"
model.players = 3
model.period = 5
model.initial_counts = [2, 1, 1]
penalty.kind = "threshold"
penalty.table = [[0, "1/2"], [4, 1000]]
policy.kind = "fixed_mixed"
policy.profile = [[0.1, 0.2, 0.3, 0.4, 0.0], [1.0, 0.0, 0.0, 0.0, 0.0], [0.0, 0.0, 0.0, 0.0, 1.0]]
run.horizon = 50
run.seeds = "3..=9"
output.format = "json"
sweep.eta = [0.05, 0.1]
assert.non_divergence = 0.9
walk.d = 2.5
"#;
        let c = parse_config(text).unwrap();
        let again = parse_config(&serialize_config(&c)).unwrap();
        assert_eq!(again, c);
        assert_eq!(serialize_config(&again), serialize_config(&c));
    }
}
