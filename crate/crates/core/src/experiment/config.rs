//! Experiment configuration: a UTF-8 `key = value` file with sections.
//!
//! ```ini
//! [lattice]
//! d = 2
//! n = 64
//!
//! [rates]              ; defaults to the symmetric bistable example
//! a_plus = 32
//! b_plus = 0
//! c_plus = 3
//! a_minus = 0
//! b_minus = -16
//! c_minus = 19
//! n1 = 1,0
//! n2 = 0,1
//!
//! [dynamics]
//! k = 8                ; fixed K, or
//! scaling = log        ; K(N) = min(k_max, delta sqrt(log N))
//! k_max = 4
//! delta = 1.0
//! sandwich_c = 1.0     ; sandwich runs require K <= sandwich_c N^(2/3)
//!
//! [front]
//! shape = circle       ; or stripe
//! center = 0.5,0.5
//! radius = 0.3
//! lower = 0.25         ; stripe occupies lower < v_1 < upper
//! upper = 0.75
//! d0 = 0.1
//!
//! [time]
//! t_end = 0.02
//! outputs = 10
//! dt = 1e-6            ; optional, defaults to the stability bound
//!
//! [ensemble]
//! runs = 400
//! seed = 1
//! epsilon = 0.05
//!
//! [envelope]
//! a = 0.75
//! m2 = 1.0             ; m2, m3 omitted: calibrated
//! m3 = 0.01
//! beta = 0
//!
//! [wave]
//! deltas = 0,0.05,-0.05
//!
//! [mmc]
//! k_values = 4,8,16
//!
//! [output]
//! dir = out
//! raw = false
//! ```
//!
//! Every section is optional; unknown sections and keys are rejected.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use ini::Ini;

use crate::experiment::ExperimentError;
use crate::interface::distance::DEFAULT_D0;
use crate::rates::RateSpec;

/// How `K` is chosen.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum KRule {
    Fixed(f64),
    /// `K(N) = min(k_max, delta sqrt(log N))`.
    Log {
        k_max: f64,
        delta: f64,
    },
}

/// Initial interface.
#[derive(Clone, Debug, PartialEq)]
pub enum Front {
    /// Sphere `|v - center| = radius`, with `alpha_1` inside.
    Circle { center: Vec<f64>, radius: f64 },
    /// Slab `lower < v_1 < upper`, with `alpha_1` inside.
    Stripe { lower: f64, upper: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnvelopeConfig {
    pub a: f64,
    pub m2: Option<f64>,
    pub m3: Option<f64>,
    pub beta: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub d: usize,
    pub n: usize,
    pub spec: RateSpec,
    pub k_rule: KRule,
    pub sandwich_c: f64,
    pub front: Front,
    pub d0: f64,
    pub t_end: f64,
    pub outputs: usize,
    pub dt: Option<f64>,
    pub runs: usize,
    pub seed: u64,
    pub epsilon: f64,
    pub envelope: EnvelopeConfig,
    pub wave_deltas: Vec<f64>,
    pub mmc_k_values: Vec<f64>,
    pub out_dir: PathBuf,
    pub raw: bool,
}

const KEYS: &[(&str, &[&str])] = &[
    ("lattice", &["d", "n"]),
    (
        "rates",
        &[
            "a_plus", "b_plus", "c_plus", "a_minus", "b_minus", "c_minus", "n1", "n2",
        ],
    ),
    ("dynamics", &["k", "scaling", "k_max", "delta", "sandwich_c"]),
    ("front", &["shape", "center", "radius", "lower", "upper", "d0"]),
    ("time", &["t_end", "outputs", "dt"]),
    ("ensemble", &["runs", "seed", "epsilon"]),
    ("envelope", &["a", "m2", "m3", "beta"]),
    ("wave", &["deltas"]),
    ("mmc", &["k_values"]),
    ("output", &["dir", "raw"]),
];

struct Reader<'a> {
    ini: &'a Ini,
}

impl Reader<'_> {
    fn raw(&self, section: &str, key: &str) -> Option<&str> {
        self.ini.section(Some(section)).and_then(|s| s.get(key)).map(str::trim)
    }

    fn parse<T: FromStr>(&self, section: &str, key: &str) -> Result<Option<T>, ExperimentError> {
        self.raw(section, key)
            .map(|v| {
                v.parse::<T>()
                    .map_err(|_| ExperimentError::Config(format!("[{section}] {key} = {v:?} is not a valid value")))
            })
            .transpose()
    }

    fn or<T: FromStr>(&self, section: &str, key: &str, default: T) -> Result<T, ExperimentError> {
        Ok(self.parse(section, key)?.unwrap_or(default))
    }

    fn list<T: FromStr>(&self, section: &str, key: &str) -> Result<Option<Vec<T>>, ExperimentError> {
        self.raw(section, key)
            .map(|v| {
                parse_list(v).map_err(|_| ExperimentError::Config(format!("[{section}] {key} = {v:?} is not a list")))
            })
            .transpose()
    }
}

/// Parses `a,b,c` into a vector.
pub fn parse_list<T: FromStr>(s: &str) -> Result<Vec<T>, T::Err> {
    s.split(',').map(|p| p.trim().parse()).collect()
}

impl ExperimentConfig {
    /// Defaults in dimension `d`: the bistable example, a circle of radius
    /// 0.3 (a stripe in `d = 1`), `K = 8`.
    pub fn default_for(d: usize) -> Self {
        let front = if d == 1 {
            Front::Stripe {
                lower: 0.25,
                upper: 0.75,
            }
        } else {
            Front::Circle {
                center: vec![0.5; d],
                radius: 0.3,
            }
        };
        Self {
            d,
            n: 64,
            spec: RateSpec::bistable_example(d),
            k_rule: KRule::Fixed(8.0),
            sandwich_c: 1.0,
            front,
            d0: DEFAULT_D0,
            t_end: 0.02,
            outputs: 10,
            dt: None,
            runs: 100,
            seed: 1,
            epsilon: 0.05,
            envelope: EnvelopeConfig {
                a: 0.75,
                m2: None,
                m3: None,
                beta: 0.0,
            },
            wave_deltas: vec![0.0],
            mmc_k_values: vec![4.0, 8.0, 16.0],
            out_dir: PathBuf::from("out"),
            raw: false,
        }
    }

    pub fn from_file(path: &Path) -> Result<Self, ExperimentError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ExperimentError::Config(format!("cannot read {}: {e}", path.display())))?;
        text.parse()
    }

    /// `K` on this lattice.
    pub fn k(&self) -> f64 {
        match self.k_rule {
            KRule::Fixed(k) => k,
            KRule::Log { k_max, delta } => k_max.min(delta * (self.n as f64).ln().sqrt()),
        }
    }

    /// `t_end * i / outputs` for `i = 1..=outputs`.
    pub fn output_times(&self) -> Vec<f64> {
        (1..=self.outputs)
            .map(|i| self.t_end * i as f64 / self.outputs as f64)
            .collect()
    }

    /// `0` followed by [`Self::output_times`].
    pub fn time_grid(&self) -> Vec<f64> {
        std::iter::once(0.0).chain(self.output_times()).collect()
    }

    /// Structural checks, including the rate conditions, before any compute.
    pub fn validate(&self) -> Result<(), ExperimentError> {
        let bad = |m: String| Err(ExperimentError::Config(m));
        if self.d == 0 || self.n < 2 {
            return bad(format!("lattice d = {}, n = {} is degenerate", self.d, self.n));
        }
        if self.spec.n1.len() != self.d || self.spec.n2.len() != self.d {
            return bad("offsets n1, n2 must have d components".into());
        }
        self.spec
            .validate()
            .map_err(|e| ExperimentError::Config(e.to_string()))?;
        let k = self.k();
        if !(k.is_finite() && k >= 1.0) {
            return bad(format!("K = {k} must be at least 1"));
        }
        if let KRule::Log { delta, .. } = self.k_rule {
            let cap = delta * (self.n as f64).ln().sqrt();
            if k > cap * (1.0 + 1e-12) {
                return bad(format!("K = {k} exceeds delta sqrt(log N) = {cap}"));
            }
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) || self.outputs == 0 {
            return bad("need t_end > 0 and outputs >= 1".into());
        }
        if let Some(dt) = self.dt {
            if !(dt > 0.0) {
                return bad(format!("dt = {dt} must be positive"));
            }
        }
        if !(self.d0 > 0.0) {
            return bad(format!("d0 = {} must be positive", self.d0));
        }
        match &self.front {
            Front::Circle { center, radius } => {
                if center.len() != self.d {
                    return bad(format!(
                        "circle center has {} coordinates, d = {}",
                        center.len(),
                        self.d
                    ));
                }
                if !(*radius > 0.0) {
                    return bad(format!("radius = {radius} must be positive"));
                }
            }
            Front::Stripe { lower, upper } => {
                if !(0.0 <= *lower && lower < upper && *upper <= 1.0) {
                    return bad(format!("stripe needs 0 <= lower < upper <= 1, got {lower}, {upper}"));
                }
            }
        }
        if self.runs == 0 {
            return bad("runs must be at least 1".into());
        }
        if !(self.envelope.a > 0.5) {
            return bad(format!("envelope a = {} must exceed 1/2", self.envelope.a));
        }
        if self.mmc_k_values.iter().any(|k| !(*k >= 1.0)) {
            return bad("mmc k_values must be at least 1".into());
        }
        Ok(())
    }

    /// The sandwich regime `K <= C N^{2/3}`.
    pub fn validate_sandwich(&self) -> Result<(), ExperimentError> {
        self.validate()?;
        let cap = self.sandwich_c * (self.n as f64).powf(2.0 / 3.0);
        if self.k() > cap {
            return Err(ExperimentError::Config(format!(
                "K = {} exceeds C N^(2/3) = {cap}",
                self.k()
            )));
        }
        match &self.front {
            Front::Circle { .. } => Ok(()),
            Front::Stripe { .. } => Err(ExperimentError::Config("sandwich runs need a circle front".into())),
        }
    }
}

impl FromStr for ExperimentConfig {
    type Err = ExperimentError;

    fn from_str(text: &str) -> Result<Self, Self::Err> {
        let ini = Ini::load_from_str(text).map_err(|e| ExperimentError::Config(e.to_string()))?;
        for (section, props) in ini.iter() {
            let Some(name) = section else {
                if props.iter().next().is_some() {
                    return Err(ExperimentError::Config("keys outside any section".into()));
                }
                continue;
            };
            let Some((_, keys)) = KEYS.iter().find(|(s, _)| *s == name) else {
                return Err(ExperimentError::Config(format!("unknown section [{name}]")));
            };
            if let Some((k, _)) = props.iter().find(|(k, _)| !keys.contains(k)) {
                return Err(ExperimentError::Config(format!("unknown key {k:?} in [{name}]")));
            }
        }
        let r = Reader { ini: &ini };
        let d: usize = r.or("lattice", "d", 2)?;
        let mut c = Self::default_for(d);
        c.n = r.or("lattice", "n", c.n)?;

        let s = &mut c.spec;
        s.a_plus = r.or("rates", "a_plus", s.a_plus)?;
        s.b_plus = r.or("rates", "b_plus", s.b_plus)?;
        s.c_plus = r.or("rates", "c_plus", s.c_plus)?;
        s.a_minus = r.or("rates", "a_minus", s.a_minus)?;
        s.b_minus = r.or("rates", "b_minus", s.b_minus)?;
        s.c_minus = r.or("rates", "c_minus", s.c_minus)?;
        if let Some(v) = r.list("rates", "n1")? {
            s.n1 = v;
        }
        if let Some(v) = r.list("rates", "n2")? {
            s.n2 = v;
        }

        let scaling = r.raw("dynamics", "scaling").unwrap_or("fixed");
        c.k_rule = match scaling {
            "fixed" => KRule::Fixed(r.or("dynamics", "k", 8.0)?),
            "log" => KRule::Log {
                k_max: r.or("dynamics", "k_max", f64::INFINITY)?,
                delta: r.or("dynamics", "delta", 1.0)?,
            },
            other => return Err(ExperimentError::Config(format!("unknown scaling {other:?}"))),
        };
        c.sandwich_c = r.or("dynamics", "sandwich_c", c.sandwich_c)?;

        match r.raw("front", "shape") {
            None => {}
            Some("circle") => {
                c.front = Front::Circle {
                    center: r.list("front", "center")?.unwrap_or_else(|| vec![0.5; d]),
                    radius: r.or("front", "radius", 0.3)?,
                }
            }
            Some("stripe") => {
                c.front = Front::Stripe {
                    lower: r.or("front", "lower", 0.25)?,
                    upper: r.or("front", "upper", 0.75)?,
                }
            }
            Some(other) => return Err(ExperimentError::Config(format!("unknown front shape {other:?}"))),
        }
        c.d0 = r.or("front", "d0", c.d0)?;

        c.t_end = r.or("time", "t_end", c.t_end)?;
        c.outputs = r.or("time", "outputs", c.outputs)?;
        c.dt = r.parse("time", "dt")?;

        c.runs = r.or("ensemble", "runs", c.runs)?;
        c.seed = r.or("ensemble", "seed", c.seed)?;
        c.epsilon = r.or("ensemble", "epsilon", c.epsilon)?;

        c.envelope = EnvelopeConfig {
            a: r.or("envelope", "a", c.envelope.a)?,
            m2: r.parse("envelope", "m2")?,
            m3: r.parse("envelope", "m3")?,
            beta: r.or("envelope", "beta", c.envelope.beta)?,
        };
        if let Some(v) = r.list("wave", "deltas")? {
            c.wave_deltas = v;
        }
        if let Some(v) = r.list("mmc", "k_values")? {
            c.mmc_k_values = v;
        }
        if let Some(v) = r.raw("output", "dir") {
            c.out_dir = PathBuf::from(v);
        }
        c.raw = r.or("output", "raw", c.raw)?;
        Ok(c)
    }
}
