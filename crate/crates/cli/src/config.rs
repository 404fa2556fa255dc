//! TOML scenario configs, validated in full before anything runs.

use std::f64::consts::PI;
use std::fmt;
use std::path::{Path, PathBuf};

use everett::automaton::{TrialMode, DEFAULT_TRIAL_CAP, MAX_RECORD_LEN};
use everett::hilbert::ELSEWHERE;
use everett::histories::{DEFAULT_BRANCHING_TOL, DEFAULT_CONSISTENCY_TOL, MAX_TREE_NODES};
use everett::quasiclassical::{Grid, PotentialSpec, Slit, SlitTimes, TwoSlitGeometry};
use serde::Serialize;
use toml::{Table, Value};

use crate::error::CliError;

/// Prefix of the environment variables mirroring the command-line flags.
pub const ENV_PREFIX: &str = "EVERETT_";

/// Largest automaton run whose history space is built and checked.
pub const SPACE_CHECK_MAX_TRIALS: usize = 3;

/// Largest Hilbert dimension accepted for a custom history space.
pub const CUSTOM_MAX_DIM: usize = 64;

/// Most split-step steps an Ehrenfest run may take.
pub const MAX_GRID_STEPS: usize = 10_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    Automaton,
    TwoSlit,
    Ehrenfest,
    CustomHistorySpace,
}

impl Scenario {
    pub const ALL: [Scenario; 4] = [
        Scenario::Automaton,
        Scenario::TwoSlit,
        Scenario::Ehrenfest,
        Scenario::CustomHistorySpace,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::Automaton => "automaton",
            Scenario::TwoSlit => "two_slit",
            Scenario::Ehrenfest => "ehrenfest",
            Scenario::CustomHistorySpace => "custom_history_space",
        }
    }

    pub fn summary(self) -> &'static str {
        match self {
            Scenario::Automaton => "repeated spin measurements: frequency table, deviation envelope, branch tree",
            Scenario::TwoSlit => "two-slit history space on a grid: decoherence matrix and sum-rule check",
            Scenario::Ehrenfest => "packet mean against the classical orbit in a static potential",
            Scenario::CustomHistorySpace => "user-defined or seeded random history space: consistency and branching",
        }
    }

    fn parse(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|s| s.name() == name)
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Tolerances {
    pub consistency: f64,
    pub branching: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            consistency: DEFAULT_CONSISTENCY_TOL,
            branching: DEFAULT_BRANCHING_TOL,
        }
    }
}

/// Command-line or environment values that win over the file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub tol_consistency: Option<f64>,
    pub tol_branching: Option<f64>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
}

#[derive(Clone, Debug)]
pub struct AutomatonParams {
    pub p: f64,
    pub trials: usize,
    pub mode: TrialMode,
    /// Smallest frequency deviation in the envelope sweep.
    pub epsilon: f64,
    pub epsilon_max: f64,
    pub sweep_points: usize,
    pub tree_cutoff: f64,
    pub space_check: bool,
}

/// What the two-slit or custom run should find.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Expectation {
    Any,
    Consistent,
    Inconsistent,
    Branching,
}

#[derive(Clone, Debug)]
pub struct TwoSlitParams {
    pub geometry: TwoSlitGeometry,
    pub times: SlitTimes,
    pub expect: Expectation,
}

#[derive(Clone, Debug)]
pub struct EhrenfestParams {
    pub grid: Grid,
    pub potential: PotentialSpec,
    pub x0: f64,
    pub p0: f64,
    pub sigma: f64,
    pub dt: f64,
    pub steps: usize,
    pub sample_every: usize,
    /// Assert the largest deviation stays below this, when set.
    pub max_deviation: Option<f64>,
}

/// Rows of a complex matrix or a complex vector, real and imaginary parts
/// given separately.
#[derive(Clone, Debug, Default)]
pub struct ComplexRows {
    pub re: Vec<Vec<f64>>,
    pub im: Vec<Vec<f64>>,
}

#[derive(Clone, Debug)]
pub struct CellSpec {
    pub label: String,
    pub indices: Vec<usize>,
}

#[derive(Clone, Debug)]
pub enum CustomSource {
    Explicit {
        hamiltonian: ComplexRows,
        initial: (Vec<f64>, Vec<f64>),
        families: Vec<Vec<CellSpec>>,
    },
    Random {
        parts: usize,
        scale: f64,
    },
}

#[derive(Clone, Debug)]
pub struct CustomParams {
    pub dim: usize,
    pub times: Vec<f64>,
    pub source: CustomSource,
    pub expect: Expectation,
    pub tree_cutoff: f64,
}

#[derive(Clone, Debug)]
pub enum Parameters {
    Automaton(AutomatonParams),
    TwoSlit(Box<TwoSlitParams>),
    Ehrenfest(EhrenfestParams),
    Custom(CustomParams),
}

#[derive(Clone, Debug)]
pub struct ScenarioConfig {
    pub scenario: Scenario,
    pub parameters: Parameters,
    pub tolerances: Tolerances,
    pub output_dir: PathBuf,
    pub seed: u64,
}

impl ScenarioConfig {
    pub fn load(path: &Path, overrides: &Overrides) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text, overrides)
    }

    pub fn parse(text: &str, overrides: &Overrides) -> Result<Self, CliError> {
        let table: Table = text
            .parse()
            .map_err(|e: toml::de::Error| CliError::Config(vec![format!("parse error: {}", e.message())]))?;
        let mut errors = Vec::new();
        let cfg = from_table(&table, overrides, &mut errors);
        match cfg {
            Some(c) if errors.is_empty() => Ok(c),
            _ => Err(CliError::Config(errors)),
        }
    }
}

fn type_name(v: &Value) -> &'static str {
    match v {
        Value::String(_) => "a string",
        Value::Integer(_) => "an integer",
        Value::Float(_) => "a float",
        Value::Boolean(_) => "a boolean",
        Value::Datetime(_) => "a datetime",
        Value::Array(_) => "an array",
        Value::Table(_) => "a table",
    }
}

fn as_f64(v: &Value) -> Option<f64> {
    match v {
        Value::Float(f) => Some(*f),
        Value::Integer(i) => Some(*i as f64),
        _ => None,
    }
}

/// Pulls typed keys out of one table, remembering which it saw and every
/// problem it met.
struct Reader<'a> {
    path: String,
    table: Option<&'a Table>,
    seen: Vec<String>,
    errors: Vec<String>,
}

impl<'a> Reader<'a> {
    fn new(path: &str, table: Option<&'a Table>) -> Self {
        Self {
            path: path.to_string(),
            table,
            seen: Vec::new(),
            errors: Vec::new(),
        }
    }

    fn key(&self, key: &str) -> String {
        if self.path.is_empty() {
            key.to_string()
        } else {
            format!("{}.{key}", self.path)
        }
    }

    fn error(&mut self, key: &str, msg: impl fmt::Display) {
        let k = self.key(key);
        self.errors.push(format!("{k}: {msg}"));
    }

    fn check(&mut self, ok: bool, key: &str, msg: impl fmt::Display) -> bool {
        if !ok {
            self.error(key, msg);
        }
        ok
    }

    fn has(&self, key: &str) -> bool {
        self.table.is_some_and(|t| t.contains_key(key))
    }

    fn raw(&mut self, key: &str) -> Option<&'a Value> {
        self.seen.push(key.to_string());
        self.table.and_then(|t| t.get(key))
    }

    fn typed<T>(&mut self, key: &str, want: &str, conv: impl Fn(&'a Value) -> Option<T>) -> Option<T> {
        let v = self.raw(key)?;
        let out = conv(v);
        if out.is_none() {
            let got = type_name(v);
            self.error(key, format!("expected {want}, got {got}"));
        }
        out
    }

    fn opt_f64(&mut self, key: &str) -> Option<f64> {
        self.typed(key, "a number", as_f64)
    }

    fn f64(&mut self, key: &str, default: f64) -> f64 {
        self.opt_f64(key).unwrap_or(default)
    }

    fn opt_usize(&mut self, key: &str) -> Option<usize> {
        let v = self.typed(key, "an integer", |v| v.as_integer())?;
        match usize::try_from(v) {
            Ok(n) => Some(n),
            Err(_) => {
                self.error(key, format!("must be ≥ 0, got {v}"));
                None
            }
        }
    }

    fn usize(&mut self, key: &str, default: usize) -> usize {
        self.opt_usize(key).unwrap_or(default)
    }

    fn opt_u64(&mut self, key: &str) -> Option<u64> {
        let v = self.typed(key, "an integer", |v| v.as_integer())?;
        match u64::try_from(v) {
            Ok(n) => Some(n),
            Err(_) => {
                self.error(key, format!("must be ≥ 0, got {v}"));
                None
            }
        }
    }

    fn opt_bool(&mut self, key: &str) -> Option<bool> {
        self.typed(key, "a boolean", |v| v.as_bool())
    }

    fn opt_str(&mut self, key: &str) -> Option<&'a str> {
        let v = self.raw(key)?;
        match v.as_str() {
            Some(s) => Some(s),
            None => {
                let got = type_name(v);
                self.error(key, format!("expected a string, got {got}"));
                None
            }
        }
    }

    fn choice<T: Copy>(&mut self, key: &str, options: &[(&str, T)], default: T) -> T {
        let Some(s) = self.opt_str(key) else {
            return default;
        };
        match options.iter().find(|(name, _)| *name == s) {
            Some((_, v)) => *v,
            None => {
                let names: Vec<&str> = options.iter().map(|(n, _)| *n).collect();
                self.error(key, format!("`{s}` is not one of {}", names.join(", ")));
                default
            }
        }
    }

    fn opt_array(&mut self, key: &str) -> Option<&'a Vec<Value>> {
        self.typed(key, "an array", |v| v.as_array())
    }

    fn f64_list(&mut self, key: &str) -> Option<Vec<f64>> {
        let arr = self.opt_array(key)?;
        let out: Option<Vec<f64>> = arr.iter().map(as_f64).collect();
        if out.is_none() {
            self.error(key, "expected an array of numbers");
        }
        out
    }

    fn f64_rows(&mut self, key: &str) -> Option<Vec<Vec<f64>>> {
        let arr = self.opt_array(key)?;
        let out: Option<Vec<Vec<f64>>> = arr
            .iter()
            .map(|row| row.as_array().and_then(|r| r.iter().map(as_f64).collect()))
            .collect();
        if out.is_none() {
            self.error(key, "expected an array of number arrays");
        }
        out
    }

    /// A sub-table; absent tables read as empty so defaults apply.
    fn table(&mut self, key: &str) -> Reader<'a> {
        let path = self.key(key);
        let t = self.typed(key, "a table", |v| v.as_table());
        Reader::new(&path, t)
    }

    /// Merge a finished sub-reader's problems.
    fn absorb(&mut self, child: Reader<'_>) {
        let errs = child.finish();
        self.errors.extend(errs);
    }

    fn finish(mut self) -> Vec<String> {
        if let Some(t) = self.table {
            let unknown: Vec<String> = t.keys().filter(|k| !self.seen.contains(k)).cloned().collect();
            for k in unknown {
                self.error(&k, "unknown key");
            }
        }
        self.errors
    }
}

fn positive(v: f64) -> bool {
    v > 0.0 && v.is_finite()
}

fn from_table(table: &Table, overrides: &Overrides, errors: &mut Vec<String>) -> Option<ScenarioConfig> {
    let mut top = Reader::new("", Some(table));
    let scenario = match top.opt_str("scenario") {
        None if !top.has("scenario") => {
            let names: Vec<&str> = Scenario::ALL.iter().map(|s| s.name()).collect();
            top.error("scenario", format!("missing; choose one of {}", names.join(", ")));
            None
        }
        None => None,
        Some(name) => {
            let s = Scenario::parse(name);
            if s.is_none() {
                top.error("scenario", format!("unknown scenario `{name}`"));
            }
            s
        }
    };

    let mut tol = top.table("tolerances");
    let mut tolerances = Tolerances {
        consistency: tol.f64("consistency", Tolerances::default().consistency),
        branching: tol.f64("branching", Tolerances::default().branching),
    };
    if let Some(v) = overrides.tol_consistency {
        tolerances.consistency = v;
    }
    if let Some(v) = overrides.tol_branching {
        tolerances.branching = v;
    }
    tol.check(positive(tolerances.consistency), "consistency", format!("must be > 0, got {}", tolerances.consistency));
    tol.check(positive(tolerances.branching), "branching", format!("must be > 0, got {}", tolerances.branching));
    top.absorb(tol);

    let output_dir = top.opt_str("output_dir").map(PathBuf::from);
    let output_dir = overrides
        .out
        .clone()
        .or(output_dir)
        .unwrap_or_else(|| PathBuf::from(format!("everett-out/{}", scenario.map_or("run", |s| s.name()))));
    let seed = overrides.seed.or_else(|| top.opt_u64("seed")).unwrap_or(0);
    if overrides.seed.is_some() {
        top.seen.push("seed".into());
    }

    let mut params = top.table("parameters");
    let parameters = scenario.map(|s| match s {
        Scenario::Automaton => Parameters::Automaton(automaton(&mut params)),
        Scenario::TwoSlit => Parameters::TwoSlit(Box::new(two_slit(&mut params))),
        Scenario::Ehrenfest => Parameters::Ehrenfest(ehrenfest(&mut params)),
        Scenario::CustomHistorySpace => Parameters::Custom(custom(&mut params)),
    });
    if scenario.is_none() {
        // Without a scenario the parameter keys cannot be checked; skip
        // reporting them all as unknown.
        params.seen.extend(params.table.into_iter().flat_map(|t| t.keys().cloned()));
    }
    top.absorb(params);
    errors.extend(top.finish());

    Some(ScenarioConfig {
        scenario: scenario?,
        parameters: parameters?,
        tolerances,
        output_dir,
        seed,
    })
}

/// Nodes of a fresh-systems branch tree kept at `cutoff`.
fn tree_nodes(p: f64, trials: usize, cutoff: f64) -> f64 {
    let (lp, lq) = (p.ln(), (1.0 - p).ln());
    let mut nodes = 1.0;
    for depth in 1..=trials {
        let mut binom = 1.0;
        for k in 0..=depth {
            if k > 0 {
                binom *= (depth - k + 1) as f64 / k as f64;
            }
            if (k as f64 * lp + (depth - k) as f64 * lq).exp() > cutoff {
                nodes += binom;
            }
        }
    }
    nodes
}

fn automaton(r: &mut Reader<'_>) -> AutomatonParams {
    let p = r.f64("p", 0.5);
    r.check(p > 0.0 && p < 1.0, "p", format!("must lie in (0, 1), got {p}"));
    let trials = r.usize("trials", 20);
    let mode = r.choice(
        "mode",
        &[("fresh_systems", TrialMode::FreshSystems), ("same_system", TrialMode::SameSystem)],
        TrialMode::FreshSystems,
    );
    if r.check(trials >= 1, "trials", "N must be ≥ 1") {
        match mode {
            TrialMode::FreshSystems => {
                r.check(
                    trials <= DEFAULT_TRIAL_CAP,
                    "trials",
                    format!(
                        "N = {trials} exceeds the enumeration cap of {DEFAULT_TRIAL_CAP} trials for fresh_systems \
                         (2^N branches)"
                    ),
                );
            }
            TrialMode::SameSystem => {
                r.check(
                    trials <= MAX_RECORD_LEN,
                    "trials",
                    format!("N = {trials} exceeds the record length limit of {MAX_RECORD_LEN}"),
                );
            }
        }
    }
    let epsilon = r.f64("epsilon", 0.1);
    r.check(positive(epsilon), "epsilon", format!("ε must be > 0, got {epsilon}"));
    let epsilon_max = r.f64("epsilon_max", epsilon.max(0.3));
    r.check(
        epsilon_max >= epsilon && epsilon_max < 1.0,
        "epsilon_max",
        format!("must lie in [ε, 1), got {epsilon_max}"),
    );
    let sweep_points = r.usize("sweep_points", 21);
    r.check(sweep_points >= 1, "sweep_points", "must be ≥ 1");
    let tree_cutoff = r.f64("tree_cutoff", 1e-3);
    let cutoff_ok = r.check(
        (0.0..1.0).contains(&tree_cutoff),
        "tree_cutoff",
        format!("must lie in [0, 1), got {tree_cutoff}"),
    );
    if cutoff_ok && mode == TrialMode::FreshSystems && p > 0.0 && p < 1.0 && trials <= DEFAULT_TRIAL_CAP {
        let nodes = tree_nodes(p, trials, tree_cutoff);
        r.check(
            nodes <= MAX_TREE_NODES as f64,
            "tree_cutoff",
            format!("keeps {nodes} tree nodes, over the limit of {MAX_TREE_NODES}; raise it"),
        );
    }
    let space_check = r.opt_bool("space_check").unwrap_or(trials <= SPACE_CHECK_MAX_TRIALS);
    r.check(
        !space_check || trials <= SPACE_CHECK_MAX_TRIALS,
        "space_check",
        format!("the history space is only built for N ≤ {SPACE_CHECK_MAX_TRIALS}"),
    );
    AutomatonParams {
        p,
        trials,
        mode,
        epsilon,
        epsilon_max,
        sweep_points,
        tree_cutoff,
        space_check,
    }
}

fn expectation(r: &mut Reader<'_>, default: Expectation, allowed: &[(&str, Expectation)]) -> Expectation {
    r.choice("expect", allowed, default)
}

fn grid(r: &mut Reader<'_>, key: &str, default: Grid) -> Grid {
    let mut g = r.table(key);
    let out = Grid {
        x_min: g.f64("x_min", default.x_min),
        x_max: g.f64("x_max", default.x_max),
        n_points: g.usize("n_points", default.n_points),
        mass: g.f64("mass", default.mass),
        hbar: g.f64("hbar", default.hbar),
    };
    if let Err(e) = out.validated() {
        g.errors.push(format!("{}: {}", g.path, strip_kind(&e.to_string())));
    }
    r.absorb(g);
    out
}

/// Drop the `configuration error: ` prefix of a core error.
fn strip_kind(msg: &str) -> &str {
    msg.strip_prefix("configuration error: ").unwrap_or(msg)
}

fn two_slit(r: &mut Reader<'_>) -> TwoSlitParams {
    let d = TwoSlitGeometry::default();
    let mut g = r.table("geometry");
    let grid = grid(&mut g, "grid", d.grid);
    let blocked = g.choice(
        "blocked",
        &[("none", None), ("plus", Some(Slit::Plus)), ("minus", Some(Slit::Minus))],
        None,
    );
    let geometry = TwoSlitGeometry {
        grid,
        omega: g.f64("omega", d.omega),
        momentum: g.f64("momentum", d.momentum),
        sigma: g.f64("sigma", d.sigma),
        separation: g.f64("separation", d.separation),
        aperture: g.f64("aperture", d.aperture),
        slit_edge: g.f64("slit_edge", d.slit_edge),
        screen_center: g.f64("screen_center", d.screen_center),
        screen_half_width: g.f64("screen_half_width", d.screen_half_width),
        blocked,
        wall_edge: g.f64("wall_edge", d.wall_edge),
        wall_ramp: g.f64("wall_ramp", d.wall_ramp),
        wall_height: g.f64("wall_height", d.wall_height),
        which_path: g.opt_bool("which_path").unwrap_or(d.which_path),
        max_step: g.f64("max_step", d.max_step),
    };
    r.absorb(g);

    let lens = SlitTimes::for_lens(if positive(geometry.omega) { geometry.omega } else { 1.0 });
    let mut t = r.table("times");
    let times = SlitTimes {
        aperture: t.f64("aperture", lens.aperture),
        slits: t.f64("slits", lens.slits),
        screen: t.f64("screen", lens.screen),
    };
    r.absorb(t);
    if geometry.grid.validated().is_ok() {
        for p in geometry.problems(&times) {
            r.errors.push(format!("parameters: {}", strip_kind(&p)));
        }
    }

    let open = geometry.blocked.is_none() && !geometry.which_path;
    let default = if open { Expectation::Inconsistent } else { Expectation::Consistent };
    let expect = expectation(
        r,
        default,
        &[
            ("any", Expectation::Any),
            ("consistent", Expectation::Consistent),
            ("inconsistent", Expectation::Inconsistent),
        ],
    );
    TwoSlitParams {
        geometry,
        times,
        expect,
    }
}

fn potential(r: &mut Reader<'_>) -> PotentialSpec {
    let mut v = r.table("potential");
    let kind = v.opt_str("kind").unwrap_or("harmonic");
    let spec = match kind {
        "free" => PotentialSpec::Free,
        "harmonic" => PotentialSpec::Harmonic {
            omega: v.f64("omega", 1.0),
        },
        "quartic" => PotentialSpec::Quartic {
            lambda: v.f64("lambda", 0.1),
        },
        "barrier" => PotentialSpec::Barrier {
            height: v.f64("height", 1.0),
            width: v.f64("width", 1.0),
        },
        other => {
            v.error("kind", format!("`{other}` is not one of free, harmonic, quartic, barrier"));
            PotentialSpec::Free
        }
    };
    if let Err(e) = spec.check() {
        v.errors.push(format!("{}: {}", v.path, strip_kind(&e.to_string())));
    }
    r.absorb(v);
    spec
}

fn ehrenfest(r: &mut Reader<'_>) -> EhrenfestParams {
    let grid = grid(
        r,
        "grid",
        Grid {
            x_min: -20.0,
            x_max: 20.0,
            n_points: 2048,
            mass: 1.0,
            hbar: 1.0,
        },
    );
    let potential = potential(r);
    let period = match potential {
        PotentialSpec::Harmonic { omega } if positive(omega) => Some(2.0 * PI / omega),
        _ => None,
    };
    let x0 = r.f64("x0", 2.0);
    let p0 = r.f64("p0", 0.0);
    let sigma = r.f64("sigma", 0.5);
    let dt = r.f64("dt", period.map_or(1e-3, |t| t / 6000.0));
    let duration = r.f64("duration", period.map_or(10.0, |t| 3.0 * t));
    let sample_every = r.usize("sample_every", 100);
    let quadratic = matches!(potential, PotentialSpec::Free | PotentialSpec::Harmonic { .. });
    let max_deviation = r.opt_f64("max_deviation").or(quadratic.then_some(1e-5));

    r.check(positive(sigma), "sigma", format!("must be > 0, got {sigma}"));
    r.check(p0.is_finite(), "p0", "must be finite");
    r.check(sample_every >= 1, "sample_every", "must be ≥ 1");
    if let Some(m) = max_deviation {
        r.check(positive(m), "max_deviation", format!("must be > 0, got {m}"));
    }
    let mut steps = 0;
    if r.check(positive(dt), "dt", format!("must be > 0, got {dt}"))
        && r.check(positive(duration), "duration", format!("must be > 0, got {duration}"))
    {
        let n = (duration / dt).round();
        if r.check(
            n >= 1.0 && n <= MAX_GRID_STEPS as f64,
            "duration",
            format!("needs {n} steps of dt; allowed 1 to {MAX_GRID_STEPS}"),
        ) {
            steps = n as usize;
        }
    }
    if grid.validated().is_ok() {
        r.check(
            x0 > grid.x_min && x0 < grid.x_max,
            "x0",
            format!("{x0} lies outside the grid [{}, {})", grid.x_min, grid.x_max),
        );
        if positive(sigma) {
            r.check(
                sigma >= 2.0 * grid.dx(),
                "sigma",
                format!("{sigma} is not resolved by grid spacing {}", grid.dx()),
            );
        }
        let k_max = PI / grid.dx();
        r.check(
            p0.abs() / grid.hbar < 0.5 * k_max,
            "p0",
            format!("momentum {p0} needs a finer grid (k_max = {k_max})"),
        );
    }
    EhrenfestParams {
        grid,
        potential,
        x0,
        p0,
        sigma,
        dt,
        steps,
        sample_every,
        max_deviation,
    }
}

fn custom(r: &mut Reader<'_>) -> CustomParams {
    let dim = r.usize("dim", 4);
    let dim_ok = r.check(
        (2..=CUSTOM_MAX_DIM).contains(&dim),
        "dim",
        format!("must lie in 2..={CUSTOM_MAX_DIM}, got {dim}"),
    );
    let times = r.f64_list("times").unwrap_or_else(|| vec![1.0, 2.0]);
    r.check(
        !times.is_empty() && times.len() <= 6,
        "times",
        format!("need 1 to 6 times, got {}", times.len()),
    );
    r.check(
        times.first().is_some_and(|&t| t > 0.0) && times.windows(2).all(|w| w[0] < w[1]),
        "times",
        "must be positive and strictly increasing",
    );
    let random = r.opt_bool("random").unwrap_or(false);
    let source = if random {
        for key in ["hamiltonian", "initial", "families"] {
            if r.has(key) {
                r.raw(key);
                r.error(key, "not allowed when random = true");
            }
        }
        let parts = r.usize("parts", 2);
        let scale = r.f64("scale", 1.0);
        r.check(
            parts >= 1 && (!dim_ok || parts <= dim),
            "parts",
            format!("must lie in 1..=dim, got {parts}"),
        );
        r.check(positive(scale), "scale", format!("must be > 0, got {scale}"));
        CustomSource::Random { parts, scale }
    } else {
        for key in ["parts", "scale"] {
            if r.has(key) {
                r.raw(key);
                r.error(key, "only used when random = true");
            }
        }
        explicit(r, dim, times.len())
    };
    let expect = expectation(
        r,
        Expectation::Any,
        &[
            ("any", Expectation::Any),
            ("consistent", Expectation::Consistent),
            ("inconsistent", Expectation::Inconsistent),
            ("branching", Expectation::Branching),
        ],
    );
    let tree_cutoff = r.f64("tree_cutoff", 1e-6);
    r.check(
        (0.0..1.0).contains(&tree_cutoff),
        "tree_cutoff",
        format!("must lie in [0, 1), got {tree_cutoff}"),
    );
    CustomParams {
        dim,
        times,
        source,
        expect,
        tree_cutoff,
    }
}

fn explicit(r: &mut Reader<'_>, dim: usize, n_times: usize) -> CustomSource {
    let mut h = r.table("hamiltonian");
    if h.table.is_none() {
        h.errors.push(format!("{}: required unless random = true", h.path));
    }
    let re = h.f64_rows("re").unwrap_or_default();
    let im = h.f64_rows("im").unwrap_or_else(|| vec![vec![0.0; dim]; dim]);
    let square = |m: &Vec<Vec<f64>>| m.len() == dim && m.iter().all(|row| row.len() == dim);
    if h.table.is_some() {
        let shapes = h.check(square(&re) && square(&im), "re", format!("re and im must be {dim}×{dim}"));
        if shapes {
            let mut defect: f64 = 0.0;
            for i in 0..dim {
                for j in 0..dim {
                    defect = defect.max((re[i][j] - re[j][i]).abs()).max((im[i][j] + im[j][i]).abs());
                }
            }
            h.check(defect <= 1e-12, "re", format!("matrix is not hermitian (defect {defect:e})"));
            let finite = re.iter().chain(&im).flatten().all(|v| v.is_finite());
            h.check(finite, "re", "entries must be finite");
        }
    }
    r.absorb(h);

    let mut s = r.table("initial");
    if s.table.is_none() {
        s.errors.push(format!("{}: required unless random = true", s.path));
    }
    let sre = s.f64_list("re").unwrap_or_default();
    let sim = s.f64_list("im").unwrap_or_else(|| vec![0.0; dim]);
    if s.table.is_some() && s.check(sre.len() == dim && sim.len() == dim, "re", format!("re and im need {dim} entries")) {
        let norm: f64 = sre.iter().chain(&sim).map(|v| v * v).sum();
        s.check(norm > 0.0 && norm.is_finite(), "re", "state must be non-zero and finite");
    }
    r.absorb(s);

    let mut families = Vec::new();
    match r.opt_array("families") {
        None => r.error("families", "required unless random = true: one table per time"),
        Some(arr) => {
            if arr.len() != n_times {
                r.error("families", format!("need one family per time: {n_times}, got {}", arr.len()));
            }
            for (k, v) in arr.iter().enumerate() {
                let path = format!("{}.families[{k}]", r.path);
                let Some(t) = v.as_table() else {
                    r.errors.push(format!("{path}: expected a table"));
                    continue;
                };
                let mut f = Reader::new(&path, Some(t));
                families.push(family(&mut f, dim, k));
                r.absorb(f);
            }
        }
    }
    CustomSource::Explicit {
        hamiltonian: ComplexRows { re, im },
        initial: (sre, sim),
        families,
    }
}

fn family(f: &mut Reader<'_>, dim: usize, k: usize) -> Vec<CellSpec> {
    let Some(cells) = f.opt_array("cells") else {
        f.error("cells", "required: arrays of basis indices");
        return Vec::new();
    };
    let labels: Vec<String> = match f.opt_array("labels") {
        Some(ls) => ls.iter().map(|l| l.as_str().unwrap_or_default().to_string()).collect(),
        None => (0..cells.len()).map(|c| format!("t{k}c{c}")).collect(),
    };
    f.check(labels.len() == cells.len(), "labels", "need one label per cell");
    f.check(labels.iter().all(|l| !l.is_empty()), "labels", "labels must be non-empty strings");
    let mut sorted = labels.clone();
    sorted.sort();
    f.check(sorted.windows(2).all(|w| w[0] != w[1]), "labels", "labels must be distinct");
    f.check(
        !labels.iter().any(|l| l == ELSEWHERE),
        "labels",
        format!("`{ELSEWHERE}` is reserved for the uncovered remainder"),
    );
    let mut covered = vec![false; dim];
    let mut out = Vec::new();
    for (c, cell) in cells.iter().enumerate() {
        let idx: Option<Vec<usize>> = cell
            .as_array()
            .and_then(|a| a.iter().map(|i| i.as_integer().and_then(|i| usize::try_from(i).ok())).collect());
        let Some(idx) = idx else {
            f.error("cells", format!("cell {c} must be an array of non-negative integers"));
            continue;
        };
        if idx.is_empty() {
            f.error("cells", format!("cell {c} is empty"));
        }
        for &i in &idx {
            if i >= dim {
                f.error("cells", format!("cell {c}: index {i} outside 0..{dim}"));
            } else if std::mem::replace(&mut covered[i], true) {
                f.error("cells", format!("cell {c}: index {i} already used by an earlier cell"));
            }
        }
        out.push(CellSpec {
            label: labels.get(c).cloned().unwrap_or_default(),
            indices: idx,
        });
    }
    out
}
