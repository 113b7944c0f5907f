//! Sectioned `key = value` run configuration and experiment orchestration.
//!
//! ```text
//! experiment = run-flow
//! output = out/ellipsoid
//!
//! [ambient]
//! kind = euclidean
//!
//! [surface]
//! shape = ellipsoid
//! sigma = 5
//! axes = 1, 1, 1.2
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::ambient::{adm_energy, decay_report, AmbientKind, InitialDataSet, Vec3, R_MIN};
use crate::error::{Error, Result};
use crate::flow::{decay_fit, evolution_identity_check, evolve, speed_field, FlowConfig, FlowState, RoundnessSettings};
use crate::mass::{drift_study, gauss_bonnet_check, hawking_mass, DriftSettings};
use crate::spectral::{axis_alignment, laplace_eigs, refined_eigen_check, stability_form};
use crate::stcurv::{evaluate, phi_calculus, reminder_check};
use crate::surface::{geometry, GraphSurface, SphericalGrid};

pub const SCHEMA_VERSION: u32 = 1;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;
pub const EXIT_NON_CONVERGENCE: i32 = 4;

const KNOWN: [(&str, &[&str]); 10] = [
    ("", &["experiment", "output"]),
    (
        "ambient",
        &["kind", "mass", "a", "exponent", "momentum", "seed", "amplitude", "delta", "cbar", "energy_radius"],
    ),
    ("grid", &["n_theta", "n_phi"]),
    ("surface", &["shape", "sigma", "center", "axes", "perturb_l", "perturb_m", "perturb_amp"]),
    (
        "flow",
        &["q", "cfl", "t_max", "stop_tol", "report_every", "recentering", "max_steps", "pre_flow", "snapshots"],
    ),
    ("roundness", &["sigma", "eta", "b1", "b2"]),
    ("spectral", &["k", "samples", "seed"]),
    ("foliate", &["sigmas", "n_theta"]),
    ("check", &["radii", "slope_tol"]),
    ("identity", &["dt"]),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    RunFlow,
    CheckAmbient,
    SpectralReport,
    Foliate,
    IdentitySuite,
}

impl Experiment {
    pub const NAMES: [&'static str; 5] = ["run-flow", "check-ambient", "spectral-report", "foliate", "identity-suite"];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::RunFlow => "run-flow",
            Experiment::CheckAmbient => "check-ambient",
            Experiment::SpectralReport => "spectral-report",
            Experiment::Foliate => "foliate",
            Experiment::IdentitySuite => "identity-suite",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "run-flow" => Experiment::RunFlow,
            "check-ambient" => Experiment::CheckAmbient,
            "spectral-report" => Experiment::SpectralReport,
            "foliate" => Experiment::Foliate,
            "identity-suite" => Experiment::IdentitySuite,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum Shape {
    Sphere,
    /// Semi-axes relative to `σ`.
    Ellipsoid { axes: Vec3 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SurfaceSpec {
    pub shape: Shape,
    pub sigma: f64,
    pub center: Vec3,
    /// `(ℓ, m, amplitude)`
    pub perturbation: Option<(usize, i64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub experiment: Experiment,
    pub output: PathBuf,
    pub ambient: InitialDataSet,
    pub energy_radius: f64,
    pub n_theta: usize,
    pub n_phi: usize,
    pub surface: SurfaceSpec,
    pub flow: FlowConfig,
    pub pre_flow: bool,
    pub spectral_k: usize,
    pub spectral_samples: usize,
    pub spectral_seed: u64,
    pub foliate_sigmas: Vec<f64>,
    pub foliate_n_theta: usize,
    pub check_radii: Vec<f64>,
    pub slope_tol: f64,
    /// Evolution-identity step; `2·10⁻³ σ²` when absent.
    pub identity_dt: Option<f64>,
}

struct Entry {
    value: String,
    line: usize,
}

struct Reader {
    entries: BTreeMap<(String, String), Entry>,
    problems: Vec<String>,
}

fn key_name(section: &str, key: &str) -> String {
    if section.is_empty() {
        key.to_string()
    } else {
        format!("{section}.{key}")
    }
}

impl Reader {
    fn parse(text: &str) -> Self {
        let mut r = Reader {
            entries: BTreeMap::new(),
            problems: Vec::new(),
        };
        let mut section = String::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                let name = name.trim();
                if KNOWN.iter().any(|(s, _)| *s == name && !name.is_empty()) {
                    section = name.to_string();
                } else {
                    r.problems.push(format!("line {}: unknown section [{name}]", i + 1));
                    section = format!("?{name}");
                }
                continue;
            }
            match line.split_once('=') {
                Some((k, v)) => r.insert(&section, k.trim(), v.trim(), i + 1),
                None => r.problems.push(format!("line {}: expected `key = value`, got `{line}`", i + 1)),
            }
        }
        r
    }

    fn insert(&mut self, section: &str, key: &str, value: &str, line: usize) {
        if section.starts_with('?') {
            return;
        }
        let known = KNOWN
            .iter()
            .find(|(s, _)| *s == section)
            .is_some_and(|(_, keys)| keys.contains(&key));
        if !known {
            let at = if line > 0 { format!("line {line}: ") } else { String::new() };
            self.problems.push(format!("{at}unknown key `{}`", key_name(section, key)));
            return;
        }
        let slot = (section.to_string(), key.to_string());
        if line > 0 {
            if let Some(prev) = self.entries.get(&slot) {
                self.problems.push(format!(
                    "line {line}: duplicate key `{}` (first set on line {})",
                    key_name(section, key),
                    prev.line
                ));
                return;
            }
        }
        self.entries.insert(
            slot,
            Entry {
                value: value.to_string(),
                line,
            },
        );
    }

    fn apply_override(&mut self, spec: &str) {
        let Some((path, value)) = spec.split_once('=') else {
            self.problems.push(format!("override `{spec}`: expected key=value"));
            return;
        };
        let path = path.trim();
        let (section, key) = path.rsplit_once('.').unwrap_or(("", path));
        self.insert(section, key, value.trim(), 0);
    }

    fn raw(&self, section: &str, key: &str) -> Option<&str> {
        self.entries
            .get(&(section.to_string(), key.to_string()))
            .map(|e| e.value.as_str())
    }

    fn has(&self, section: &str, key: &str) -> bool {
        self.raw(section, key).is_some()
    }

    fn parsed<T: std::str::FromStr>(&mut self, section: &str, key: &str, what: &str) -> Option<T> {
        let v = self.raw(section, key)?.to_string();
        match v.parse::<T>() {
            Ok(x) => Some(x),
            Err(_) => {
                self.problems
                    .push(format!("{} = {v}: not {what}", key_name(section, key)));
                None
            }
        }
    }

    fn f64_or(&mut self, section: &str, key: &str, default: f64) -> f64 {
        match self.parsed::<f64>(section, key, "a number") {
            Some(x) if x.is_finite() => x,
            Some(x) => {
                self.problems
                    .push(format!("{} = {x}: must be finite", key_name(section, key)));
                default
            }
            None => default,
        }
    }

    fn usize_or(&mut self, section: &str, key: &str, default: usize) -> usize {
        self.parsed(section, key, "a non-negative integer").unwrap_or(default)
    }

    fn bool_or(&mut self, section: &str, key: &str, default: bool) -> bool {
        match self.raw(section, key) {
            None => default,
            Some("true" | "on" | "yes" | "1") => true,
            Some("false" | "off" | "no" | "0") => false,
            Some(v) => {
                let v = v.to_string();
                self.problems
                    .push(format!("{} = {v}: expected true/false", key_name(section, key)));
                default
            }
        }
    }

    fn list_or(&mut self, section: &str, key: &str, default: &[f64]) -> Vec<f64> {
        let Some(v) = self.raw(section, key).map(str::to_string) else {
            return default.to_vec();
        };
        let items: std::result::Result<Vec<f64>, _> = v.split(',').map(|s| s.trim().parse::<f64>()).collect();
        match items {
            Ok(x) if x.iter().all(|v| v.is_finite()) => x,
            _ => {
                self.problems
                    .push(format!("{} = {v}: expected a comma-separated list of numbers", key_name(section, key)));
                default.to_vec()
            }
        }
    }

    fn vec3_or(&mut self, section: &str, key: &str, default: Vec3) -> Vec3 {
        let had = self.has(section, key);
        let v = self.list_or(section, key, &default);
        if v.len() == 3 {
            [v[0], v[1], v[2]]
        } else {
            if had {
                self.problems
                    .push(format!("{}: expected 3 components, got {}", key_name(section, key), v.len()));
            }
            default
        }
    }

    fn reject_unless(&mut self, section: &str, keys: &[&str], allowed: bool, context: &str) {
        if allowed {
            return;
        }
        for k in keys {
            if self.has(section, k) {
                self.problems
                    .push(format!("{} does not apply to {context}", key_name(section, k)));
            }
        }
    }
}

fn ambient_from(r: &mut Reader) -> Option<InitialDataSet> {
    let delta = r.f64_or("ambient", "delta", 0.5);
    let cbar = r.f64_or("ambient", "cbar", 10.0);
    let kind_name = match r.raw("ambient", "kind") {
        Some(k) => k.to_string(),
        None => {
            r.problems.push(format!(
                "missing ambient.kind; valid kinds: {}",
                AmbientKind::NAMES.join(", ")
            ));
            return None;
        }
    };
    let schw = matches!(kind_name.as_str(), "schwarzschild" | "schwarzschild_with_K");
    let with_k = kind_name == "schwarzschild_with_K";
    let pert = kind_name == "perturbed";
    r.reject_unless("ambient", &["mass"], schw, &format!("ambient kind {kind_name}"));
    r.reject_unless("ambient", &["a", "exponent", "momentum"], with_k, &format!("ambient kind {kind_name}"));
    r.reject_unless("ambient", &["seed", "amplitude"], pert, &format!("ambient kind {kind_name}"));
    let kind = match kind_name.as_str() {
        "euclidean" => AmbientKind::Euclidean,
        "schwarzschild" => AmbientKind::Schwarzschild {
            mass: r.f64_or("ambient", "mass", 1.0),
        },
        "schwarzschild_with_K" => AmbientKind::SchwarzschildWithK {
            mass: r.f64_or("ambient", "mass", 1.0),
            a: r.f64_or("ambient", "a", 0.05),
            exponent: r.f64_or("ambient", "exponent", 1.5 + delta),
            momentum: r.vec3_or("ambient", "momentum", [0.0; 3]),
        },
        "perturbed" => AmbientKind::Perturbed {
            seed: r.parsed("ambient", "seed", "a non-negative integer").unwrap_or(1),
            amplitude: r.f64_or("ambient", "amplitude", 0.01),
        },
        other => {
            r.problems.push(format!(
                "ambient.kind = {other}: unknown kind; valid kinds: {}",
                AmbientKind::NAMES.join(", ")
            ));
            return None;
        }
    };
    match InitialDataSet::new(kind, delta, cbar) {
        Ok(ids) => Some(ids),
        Err(Error::Config(p)) => {
            r.problems.extend(p.into_iter().map(|m| format!("ambient: {m}")));
            None
        }
        Err(e) => {
            r.problems.push(format!("ambient: {e}"));
            None
        }
    }
}

/// Parses a configuration, reporting every violation at once.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    parse_config_with_overrides(text, &[])
}

pub fn parse_config_with_overrides(text: &str, overrides: &[String]) -> Result<RunConfig> {
    let mut r = Reader::parse(text);
    for o in overrides {
        r.apply_override(o);
    }

    let experiment = match r.raw("", "experiment").map(str::to_string) {
        Some(e) => Experiment::parse(&e).or_else(|| {
            r.problems.push(format!(
                "experiment = {e}: unknown experiment; valid: {}",
                Experiment::NAMES.join(", ")
            ));
            None
        }),
        None => {
            r.problems.push(format!("missing experiment; valid: {}", Experiment::NAMES.join(", ")));
            None
        }
    };
    let output = PathBuf::from(r.raw("", "output").unwrap_or("out"));
    let ambient = ambient_from(&mut r);
    let energy_radius = r.f64_or("ambient", "energy_radius", 400.0);
    if !(energy_radius >= 2.0 * R_MIN) {
        r.problems.push(format!(
            "ambient.energy_radius = {energy_radius}: R ≥ {} required",
            2.0 * R_MIN
        ));
    }

    let n_theta = r.usize_or("grid", "n_theta", 16);
    let n_phi = r.usize_or("grid", "n_phi", 2 * n_theta);
    if let Err(Error::Config(p)) = SphericalGrid::new(n_theta, n_phi) {
        r.problems.extend(p.into_iter().map(|m| format!("grid: {m}")));
    }

    let sigma = r.f64_or("surface", "sigma", 10.0);
    if !(sigma > 0.0) {
        r.problems.push(format!("surface.sigma = {sigma}: σ > 0 required"));
    }
    let center = r.vec3_or("surface", "center", [0.0; 3]);
    let shape = match r.raw("surface", "shape").unwrap_or("sphere").to_string().as_str() {
        "sphere" => {
            r.reject_unless("surface", &["axes"], false, "shape sphere");
            Shape::Sphere
        }
        "ellipsoid" => {
            let axes = r.vec3_or("surface", "axes", [1.0, 1.0, 1.0]);
            if axes.iter().any(|a| !(*a > 0.0)) {
                r.problems.push("surface.axes: all semi-axes must be positive".into());
            }
            Shape::Ellipsoid { axes }
        }
        other => {
            r.problems
                .push(format!("surface.shape = {other}: valid shapes: sphere, ellipsoid"));
            Shape::Sphere
        }
    };
    let amp = r.f64_or("surface", "perturb_amp", 0.0);
    let l = r.usize_or("surface", "perturb_l", 2);
    let m: i64 = r.parsed("surface", "perturb_m", "an integer").unwrap_or(0);
    let perturbation = if amp != 0.0 {
        if l >= n_theta || m.unsigned_abs() as usize > l {
            r.problems.push(format!(
                "surface.perturb_l = {l}, perturb_m = {m}: |m| ≤ ℓ ≤ n_theta − 1 required"
            ));
        }
        Some((l, m, amp))
    } else {
        None
    };
    let surface = SurfaceSpec {
        shape,
        sigma,
        center,
        perturbation,
    };

    let mut flow = FlowConfig::new(r.f64_or("flow", "q", 2.0));
    flow.cfl = r.f64_or("flow", "cfl", flow.cfl);
    flow.t_max = r.f64_or("flow", "t_max", flow.t_max);
    flow.stop_tol = r.f64_or("flow", "stop_tol", flow.stop_tol);
    flow.report_every = r.usize_or("flow", "report_every", flow.report_every);
    flow.recentering = r.bool_or("flow", "recentering", flow.recentering);
    flow.max_steps = r.usize_or("flow", "max_steps", flow.max_steps);
    flow.keep_snapshots = r.bool_or("flow", "snapshots", false);
    let pre_flow = r.bool_or("flow", "pre_flow", false);
    let rs = RoundnessSettings::default();
    flow.roundness = RoundnessSettings {
        sigma: r.has("roundness", "sigma").then(|| r.f64_or("roundness", "sigma", 1.0)),
        eta: r.f64_or("roundness", "eta", rs.eta),
        b1: r.f64_or("roundness", "b1", rs.b1),
        b2: r.f64_or("roundness", "b2", rs.b2),
    };
    r.problems.extend(flow.problems().into_iter().map(|m| format!("flow: {m}")));

    let spectral_k = r.usize_or("spectral", "k", 12);
    if spectral_k < 5 || spectral_k > n_theta * n_phi / 4 {
        r.problems.push(format!(
            "spectral.k = {spectral_k}: 5 ≤ k ≤ {} required",
            n_theta * n_phi / 4
        ));
    }
    let spectral_samples = r.usize_or("spectral", "samples", 50);
    let spectral_seed = r.parsed("spectral", "seed", "a non-negative integer").unwrap_or(1);

    let foliate_sigmas = r.list_or("foliate", "sigmas", &[20.0, 40.0, 80.0]);
    if foliate_sigmas.len() < 3 || foliate_sigmas.windows(2).any(|w| !(w[1] > w[0])) || foliate_sigmas[0] <= 0.0 {
        r.problems
            .push("foliate.sigmas: at least 3 strictly increasing positive values required".into());
    }
    let foliate_n_theta = r.usize_or("foliate", "n_theta", 12);
    if let Err(Error::Config(p)) = SphericalGrid::new(foliate_n_theta, 2 * foliate_n_theta) {
        r.problems.extend(p.into_iter().map(|m| format!("foliate: {m}")));
    }

    let check_radii = r.list_or("check", "radii", &[20.0, 40.0, 80.0, 160.0]);
    if check_radii.len() < 3 || check_radii.windows(2).any(|w| !(w[1] > w[0])) || check_radii[0] < R_MIN {
        r.problems.push(format!(
            "check.radii: at least 3 strictly increasing radii ≥ {R_MIN} required"
        ));
    }
    let slope_tol = r.f64_or("check", "slope_tol", 0.05);
    if !(slope_tol >= 0.0) {
        r.problems.push(format!("check.slope_tol = {slope_tol}: must be ≥ 0"));
    }
    let identity_dt = r.has("identity", "dt").then(|| r.f64_or("identity", "dt", 1e-3));
    if let Some(dt) = identity_dt {
        if !(dt > 0.0) {
            r.problems.push(format!("identity.dt = {dt}: dt > 0 required"));
        }
    }

    let config = match (experiment, ambient) {
        (Some(experiment), Some(ambient)) if r.problems.is_empty() => RunConfig {
            experiment,
            output,
            ambient,
            energy_radius,
            n_theta,
            n_phi,
            surface,
            flow,
            pre_flow,
            spectral_k,
            spectral_samples,
            spectral_seed,
            foliate_sigmas,
            foliate_n_theta,
            check_radii,
            slope_tol,
            identity_dt,
        },
        _ => return Err(Error::Config(r.problems)),
    };
    if let Err(e) = config.initial_surface() {
        return Err(Error::Config(vec![format!("surface: {e}")]));
    }
    Ok(config)
}

fn fmt_list(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x}")).collect::<Vec<_>>().join(", ")
}

impl RunConfig {
    pub fn grid(&self) -> Result<SphericalGrid> {
        SphericalGrid::new(self.n_theta, self.n_phi)
    }

    pub fn initial_surface(&self) -> Result<GraphSurface> {
        let grid = self.grid()?;
        let s = &self.surface;
        let base = match &s.shape {
            Shape::Sphere => GraphSurface::sphere(&grid, s.center, s.sigma)?,
            Shape::Ellipsoid { axes } => GraphSurface::ellipsoid(
                &grid,
                s.center,
                [axes[0] * s.sigma, axes[1] * s.sigma, axes[2] * s.sigma],
            )?,
        };
        match s.perturbation {
            Some((l, m, amp)) => base.perturbed(l, m, amp),
            None => Ok(base),
        }
    }

    /// Canonical text with every default filled in; parsing it yields the same config.
    pub fn echo(&self) -> String {
        let mut out = String::new();
        let mut line = |s: String| {
            out.push_str(&s);
            out.push('\n');
        };
        line(format!("experiment = {}", self.experiment.name()));
        line(format!("output = {}", self.output.display()));
        line(String::new());
        line("[ambient]".into());
        line(format!("kind = {}", self.ambient.kind.name()));
        match &self.ambient.kind {
            AmbientKind::Euclidean => {}
            AmbientKind::Schwarzschild { mass } => line(format!("mass = {mass}")),
            AmbientKind::SchwarzschildWithK {
                mass,
                a,
                exponent,
                momentum,
            } => {
                line(format!("mass = {mass}"));
                line(format!("a = {a}"));
                line(format!("exponent = {exponent}"));
                line(format!("momentum = {}", fmt_list(momentum)));
            }
            AmbientKind::Perturbed { seed, amplitude } => {
                line(format!("seed = {seed}"));
                line(format!("amplitude = {amplitude}"));
            }
        }
        line(format!("delta = {}", self.ambient.delta));
        line(format!("cbar = {}", self.ambient.cbar));
        line(format!("energy_radius = {}", self.energy_radius));
        line(String::new());
        line("[grid]".into());
        line(format!("n_theta = {}", self.n_theta));
        line(format!("n_phi = {}", self.n_phi));
        line(String::new());
        line("[surface]".into());
        match &self.surface.shape {
            Shape::Sphere => line("shape = sphere".into()),
            Shape::Ellipsoid { axes } => {
                line("shape = ellipsoid".into());
                line(format!("axes = {}", fmt_list(axes)));
            }
        }
        line(format!("sigma = {}", self.surface.sigma));
        line(format!("center = {}", fmt_list(&self.surface.center)));
        if let Some((l, m, amp)) = self.surface.perturbation {
            line(format!("perturb_l = {l}"));
            line(format!("perturb_m = {m}"));
            line(format!("perturb_amp = {amp}"));
        }
        line(String::new());
        let f = &self.flow;
        line("[flow]".into());
        line(format!("q = {}", f.q));
        line(format!("cfl = {}", f.cfl));
        line(format!("t_max = {}", f.t_max));
        line(format!("stop_tol = {}", f.stop_tol));
        line(format!("report_every = {}", f.report_every));
        line(format!("recentering = {}", f.recentering));
        line(format!("max_steps = {}", f.max_steps));
        line(format!("pre_flow = {}", self.pre_flow));
        line(format!("snapshots = {}", f.keep_snapshots));
        line(String::new());
        line("[roundness]".into());
        if let Some(s) = f.roundness.sigma {
            line(format!("sigma = {s}"));
        }
        line(format!("eta = {}", f.roundness.eta));
        line(format!("b1 = {}", f.roundness.b1));
        line(format!("b2 = {}", f.roundness.b2));
        line(String::new());
        line("[spectral]".into());
        line(format!("k = {}", self.spectral_k));
        line(format!("samples = {}", self.spectral_samples));
        line(format!("seed = {}", self.spectral_seed));
        line(String::new());
        line("[foliate]".into());
        line(format!("sigmas = {}", fmt_list(&self.foliate_sigmas)));
        line(format!("n_theta = {}", self.foliate_n_theta));
        line(String::new());
        line("[check]".into());
        line(format!("radii = {}", fmt_list(&self.check_radii)));
        line(format!("slope_tol = {}", self.slope_tol));
        if let Some(dt) = self.identity_dt {
            line(String::new());
            line("[identity]".into());
            line(format!("dt = {dt}"));
        }
        out
    }

    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.echo().as_bytes()))
    }
}

/// Process exit code for an error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) => EXIT_CONFIG,
        Error::NonConvergence(_) => EXIT_NON_CONVERGENCE,
        _ => EXIT_NUMERIC,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub code: i32,
    pub files: Vec<PathBuf>,
    pub message: Option<String>,
}

struct Artifacts {
    dir: PathBuf,
    files: Vec<PathBuf>,
}

impl Artifacts {
    fn write(&mut self, name: &str, content: &str) -> Result<()> {
        let path = self.dir.join(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(&path, content)?;
        self.files.push(PathBuf::from(name));
        Ok(())
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write(name, &text)
    }
}

/// Runs the configured experiment and writes its artifacts under `config.output`.
pub fn execute(config: &RunConfig) -> Result<Outcome> {
    fs::create_dir_all(&config.output)?;
    let failed = config.output.join("FAILED");
    if failed.exists() {
        fs::remove_file(&failed)?;
    }
    let mut art = Artifacts {
        dir: config.output.clone(),
        files: Vec::new(),
    };
    art.write("config.txt", &config.echo())?;
    let result = match config.experiment {
        Experiment::RunFlow => run_flow(config, &mut art),
        Experiment::CheckAmbient => check_ambient(config, &mut art),
        Experiment::SpectralReport => spectral_report(config, &mut art),
        Experiment::Foliate => foliate(config, &mut art),
        Experiment::IdentitySuite => identity_suite(config, &mut art),
    };
    let (code, message) = match result {
        Ok((code, msg)) => (code, msg),
        Err(e) => (exit_code(&e), Some(e.to_string())),
    };
    if code != EXIT_OK {
        fs::write(&failed, format!("{}\n", message.as_deref().unwrap_or("failed")))?;
    }
    let created = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let files: Vec<String> = art.files.iter().map(|p| p.display().to_string()).collect();
    art.json(
        "manifest.json",
        &json!({
            "schema_version": SCHEMA_VERSION,
            "experiment": config.experiment.name(),
            "code_version": env!("CARGO_PKG_VERSION"),
            "config_sha256": config.hash(),
            "created_unix": created,
            "exit_code": code,
            "message": message,
            "files": files,
        }),
    )?;
    Ok(Outcome {
        code,
        files: art.files,
        message,
    })
}

type Status = Result<(i32, Option<String>)>;

fn run_flow(config: &RunConfig, art: &mut Artifacts) -> Status {
    let ids = &config.ambient;
    let mut surface = config.initial_surface()?;
    let mut pre = None;
    if config.pre_flow {
        let mut pc = config.flow;
        pc.q = 2.0;
        pc.keep_snapshots = false;
        let t = evolve(FlowState::new(surface.clone()), &ids.without_extrinsic(), &pc)?;
        pre = Some(json!({
            "converged": t.converged,
            "steps": t.final_state.step,
            "t_final": t.final_state.t,
            "error": t.error,
        }));
        if let Some(e) = t.error {
            return Ok((EXIT_NUMERIC, Some(format!("pre-flow: {e}"))));
        }
        if !t.converged {
            return Ok((EXIT_NON_CONVERGENCE, Some("pre-flow did not converge".into())));
        }
        surface = t.final_state.surface;
    }
    let trace = evolve(FlowState::new(surface), ids, &config.flow)?;
    art.write("trace.csv", &trace.to_csv())?;
    for (step, s) in &trace.snapshots {
        art.write(&format!("snapshots/step_{step:08}.json"), &s.to_json()?)?;
    }
    let energy = adm_energy(ids, config.energy_radius, &SphericalGrid::new(16, 32)?)?;
    let sigma = trace.rows.first().map(|r| r.sigma).unwrap_or(config.surface.sigma);
    let fit = decay_fit(&trace.rows, energy.energy, sigma);
    let first = trace.rows.first();
    let last = trace.rows.last();
    let volume_drift = match (first, last) {
        (Some(a), Some(b)) => Some((b.volume - a.volume) / a.volume),
        _ => None,
    };
    art.json(
        "summary.json",
        &json!({
            "schema_version": SCHEMA_VERSION,
            "converged": trace.converged,
            "cstmc": trace.converged,
            "t_final": trace.final_state.t,
            "steps": trace.final_state.step,
            "recenterings": trace.recenterings,
            "error": trace.error,
            "pre_flow": pre,
            "residuals": {
                "limit_residual": last.map(|r| r.limit_residual),
                "rel_dev_inf": last.map(|r| r.dev_inf / r.hbar),
                "dev_l2": last.map(|r| r.dev_l2),
                "volume_drift": volume_drift,
            },
            "adm_energy": energy,
            "decay_fit": fit.as_ref().ok(),
            "decay_fit_error": fit.as_ref().err().map(|e| e.to_string()),
        }),
    )?;
    Ok(match (&trace.error, trace.converged) {
        (Some(e), _) => (EXIT_NUMERIC, Some(e.clone())),
        (None, false) => (EXIT_NON_CONVERGENCE, Some("stop_tol not reached".into())),
        (None, true) => (EXIT_OK, None),
    })
}

fn check_ambient(config: &RunConfig, art: &mut Artifacts) -> Status {
    let ids = &config.ambient;
    let report = decay_report(ids, &config.check_radii)?;
    let grid = SphericalGrid::new(16, 32)?;
    let mut energies = Vec::new();
    for &r in config.check_radii.iter().chain([config.energy_radius].iter()) {
        if r >= 2.0 * R_MIN {
            energies.push(json!({"radius": r, "estimate": adm_energy(ids, r, &grid)?}));
        }
    }
    let ok = report.all_within(config.slope_tol);
    art.json(
        "ambient.json",
        &json!({
            "schema_version": SCHEMA_VERSION,
            "kind": ids.kind.name(),
            "delta": ids.delta,
            "slope_tol": config.slope_tol,
            "all_within": ok,
            "decay": report,
            "adm_energy": energies,
        }),
    )?;
    Ok(if ok {
        (EXIT_OK, None)
    } else {
        (EXIT_NUMERIC, Some("decay slopes outside tolerance".into()))
    })
}

fn random_fields(config: &RunConfig, grid: &SphericalGrid) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.spectral_seed);
    (0..config.spectral_samples)
        .map(|_| {
            let c: Vec<f64> = (0..grid.n_coeffs()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            grid.synthesize(&c)
        })
        .collect()
}

fn spectral_report(config: &RunConfig, art: &mut Artifacts) -> Status {
    let ids = &config.ambient;
    let surface = config.initial_surface()?;
    let geo = geometry(&surface, ids)?;
    let eigs = laplace_eigs(&geo, config.spectral_k)?;
    let m_h = hawking_mass(&geo);
    let energy = adm_energy(ids, config.energy_radius, &SphericalGrid::new(16, 32)?)?;
    let refined = refined_eigen_check(&geo, &eigs, m_h)?;
    let axes = axis_alignment(&geo, &eigs)?;
    let mut checks = Vec::new();
    for w in random_fields(config, surface.grid()) {
        checks.push(stability_form(&geo, &eigs, energy.energy, &w)?);
    }
    let sigma = (geo.area / (4.0 * std::f64::consts::PI)).sqrt();
    art.json(
        "spectral.json",
        &json!({
            "schema_version": SCHEMA_VERSION,
            "sigma": sigma,
            "lambdas": eigs.values,
            "orthonormality": eigs.orthonormality,
            "asymmetry": eigs.asymmetry,
            "count_below_5_over_sigma2": eigs.count_below(5.0 / (sigma * sigma)),
            "hawking_mass": m_h,
            "adm_energy": energy,
            "residuals": refined,
            "axis_alignment": axes,
            "form_checks": {
                "all_satisfied": checks.iter().all(|c| c.satisfied),
                "samples": checks,
            },
        }),
    )?;
    Ok((EXIT_OK, None))
}

fn foliate(config: &RunConfig, art: &mut Artifacts) -> Status {
    let mut settings = DriftSettings::new(config.flow.q);
    settings.n_theta = config.foliate_n_theta;
    settings.flow = config.flow;
    settings.flow.keep_snapshots = false;
    settings.pre_flow = config.flow;
    settings.pre_flow.q = 2.0;
    settings.pre_flow.keep_snapshots = false;
    let study = drift_study(&config.ambient, config.flow.q, &config.foliate_sigmas, &settings)?;
    let mut csv = String::from("sigma,z_start_x,z_start_y,z_start_z,z_final_x,z_final_y,z_final_z,drift,steps,well_centered\n");
    for i in 0..study.sigmas.len() {
        let (a, b) = (study.z_start[i], study.z_final[i]);
        csv.push_str(&format!(
            "{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{},{}\n",
            study.sigmas[i],
            a[0],
            a[1],
            a[2],
            b[0],
            b[1],
            b[2],
            study.drift[i],
            study.steps[i],
            u8::from(study.well_centered[i])
        ));
    }
    art.write("foliate.csv", &csv)?;
    art.json(
        "foliate.json",
        &json!({"schema_version": SCHEMA_VERSION, "study": study}),
    )?;
    Ok(match &study.aborted {
        Some(a) if a.non_convergence => (EXIT_NON_CONVERGENCE, Some(a.message.clone())),
        Some(a) => (EXIT_NUMERIC, Some(a.message.clone())),
        None => (EXIT_OK, None),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteCheck {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    pub passed: bool,
}

fn check(name: &str, value: f64, threshold: f64) -> SuiteCheck {
    SuiteCheck {
        name: name.to_string(),
        value,
        threshold,
        passed: value.is_finite() && value <= threshold,
    }
}

/// Invariant checks on the configured ambient and initial surface.
pub fn identity_checks(config: &RunConfig) -> Result<Vec<SuiteCheck>> {
    let ids = &config.ambient;
    let q = config.flow.q;
    let surface = config.initial_surface()?;
    let grid = surface.grid().clone();
    let geo = geometry(&surface, ids)?;
    let st = evaluate(&geo, q)?;
    let mut out = Vec::new();

    let sigma = config.surface.sigma;
    for (name, amb) in [
        ("stationarity_euclidean_sphere", InitialDataSet::euclidean()),
        ("stationarity_schwarzschild_sphere", InitialDataSet::schwarzschild(1.0)),
    ] {
        let radius = sigma.max(4.0 * R_MIN);
        let s = GraphSurface::sphere(&grid, [0.0; 3], radius)?;
        let sp = speed_field(&s, &amb, q)?;
        out.push(check(name, sp.f.iter().fold(0.0f64, |a, v| a.max(v.abs())), 1e-9));
    }

    let pc = phi_calculus(&geo, &st)?;
    out.push(check(
        "gradient_identity",
        pc.identity_residual / pc.identity_scale.max(f64::MIN_POSITIVE),
        1e-7,
    ));
    let rc = reminder_check(&geo, &st)?;
    out.push(check("reminder_tensor_identity", rc.residual / rc.scale.max(f64::MIN_POSITIVE), 1e-6));
    out.push(check("gauss_bonnet", gauss_bonnet_check(&geo), 1e-6));

    let eigs = laplace_eigs(&geo, config.spectral_k)?;
    out.push(check("laplacian_orthonormality", eigs.orthonormality, 1e-8));
    out.push(check("laplacian_constant_mode", eigs.constant_error, 1e-8));
    out.push(check("laplacian_lambda0", eigs.values[0].abs() * sigma * sigma, 1e-8));

    let sigma_s = (geo.area / (4.0 * std::f64::consts::PI)).sqrt();
    let dt = config.identity_dt.unwrap_or(2e-3 * sigma_s * sigma_s);
    let a = evolution_identity_check(&surface, ids, q, dt)?;
    let b = evolution_identity_check(&surface, ids, q, 0.5 * dt)?;
    let stationary = st.deviation().iter().all(|f| f.abs() < 1e-12 * st.hbar);
    for (name, x, y) in [
        ("evolution_metric_order", a.metric, b.metric),
        ("evolution_measure_order", a.measure, b.measure),
        ("evolution_mean_curvature_order", a.mean_curvature, b.mean_curvature),
    ] {
        if stationary {
            out.push(check(name, 0.0, 0.5));
        } else {
            out.push(check(name, (x / y - 4.0).abs(), 0.5));
        }
    }
    Ok(out)
}

fn identity_suite(config: &RunConfig, art: &mut Artifacts) -> Status {
    let checks = identity_checks(config)?;
    let all = checks.iter().all(|c| c.passed);
    art.json(
        "identities.json",
        &json!({"schema_version": SCHEMA_VERSION, "all_passed": all, "checks": checks}),
    )?;
    Ok(if all {
        (EXIT_OK, None)
    } else {
        let failed: Vec<&str> = checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
        (EXIT_NUMERIC, Some(format!("failed checks: {}", failed.join(", "))))
    })
}

/// Entry point behind the binary: `stmcflow <config> [--override key=value]...`.
pub fn main_with_args(args: &[String]) -> i32 {
    let usage = "usage: stmcflow <config-path> [--override key=value]...";
    let mut path: Option<&Path> = None;
    let mut overrides = Vec::new();
    let mut it = args.iter();
    while let Some(a) = it.next() {
        if a == "--override" || a == "-o" {
            match it.next() {
                Some(v) => overrides.push(v.clone()),
                None => {
                    eprintln!("--override needs key=value\n{usage}");
                    return EXIT_CONFIG;
                }
            }
        } else if let Some(v) = a.strip_prefix("--override=") {
            overrides.push(v.to_string());
        } else if a == "-h" || a == "--help" {
            println!("{usage}");
            return EXIT_OK;
        } else if path.is_none() {
            path = Some(Path::new(a));
        } else {
            eprintln!("unexpected argument `{a}`\n{usage}");
            return EXIT_CONFIG;
        }
    }
    let Some(path) = path else {
        eprintln!("{usage}");
        return EXIT_CONFIG;
    };
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("cannot read {}: {e}", path.display());
            return EXIT_CONFIG;
        }
    };
    let config = match parse_config_with_overrides(&text, &overrides) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{e}");
            return exit_code(&e);
        }
    };
    print!("{}", config.echo());
    match execute(&config) {
        Ok(out) => {
            if let Some(m) = &out.message {
                eprintln!("{}: {m}", config.experiment.name());
            }
            out.code
        }
        Err(e) => {
            eprintln!("{e}");
            exit_code(&e)
        }
    }
}
