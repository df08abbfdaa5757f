//! JSON scenario documents with unit-suffixed keys.
//!
//! Every physical quantity is written as `<name>_<unit>`; the reader converts
//! to SI, rejects unknown keys and reports all problems at once.

use std::collections::BTreeSet;
use std::f64::consts::PI;
use std::path::PathBuf;

use serde::Serialize;
use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::model::{
    units, validate_regime, ParticleParams, PhysicalConstants, QuantumInit, RotationInit,
    DEFAULT_SEPARATION, DIAMOND_DENSITY,
};
use crate::rotational::RotationSolver;
use crate::translational::Scheme;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FieldSettings {
    /// T
    pub b0: f64,
    /// T
    pub b1: f64,
    /// T/m
    pub eta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProtocolSettings {
    /// s
    pub taus: [f64; 4],
    /// Solve τ₃, τ₄ for closure starting from `taus`.
    pub close: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IntegratorSettings {
    pub solver: RotationSolver,
    pub field_sign_strict: bool,
    /// θ̄ samples per smooth piece for the area route.
    pub theta_bar_points: usize,
    /// Trajectory samples over [0, τ₄].
    pub samples: usize,
    pub coupling_iterations: usize,
}

impl Default for IntegratorSettings {
    fn default() -> Self {
        Self {
            solver: RotationSolver::default(),
            field_sign_strict: false,
            theta_bar_points: 2000,
            samples: 2001,
            coupling_iterations: 5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StaticSettings {
    /// Length of the window before τ₄ searched for contrast peaks (s).
    pub peak_window: f64,
    pub peak_samples: usize,
    pub peak_threshold: f64,
}

impl Default for StaticSettings {
    fn default() -> Self {
        Self {
            peak_window: 6e-3,
            peak_samples: 6000,
            peak_threshold: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutputSettings {
    pub trajectory_csv: Option<PathBuf>,
    pub report_json: Option<PathBuf>,
    pub stride: usize,
}

impl Default for OutputSettings {
    fn default() -> Self {
        Self {
            trajectory_csv: None,
            report_json: None,
            stride: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioConfig {
    pub name: Option<String>,
    pub scheme: Scheme,
    pub constants: PhysicalConstants,
    pub particle: ParticleParams,
    pub field: FieldSettings,
    pub protocol: ProtocolSettings,
    /// Unused by the static scheme.
    pub rotation: RotationInit,
    pub quantum: QuantumInit,
    pub integrator: IntegratorSettings,
    pub static_scheme: StaticSettings,
    pub outputs: OutputSettings,
    /// Regime and consistency warnings found while parsing.
    pub warnings: Vec<String>,
    /// sha256 of the canonical form of the source document.
    pub source_sha256: String,
}

type Units = &'static [(&'static str, f64)];

const KG: Units = &[("kg", 1.0)];
const DENSITY: Units = &[("kg_per_m3", 1.0)];
const INERTIA: Units = &[("kg_m2", 1.0)];
const LENGTH: Units = &[
    ("nm", units::NANOMETER),
    ("um", units::MICROMETER),
    ("m", 1.0),
];
const ANGLE: Units = &[("rad", 1.0), ("deg", units::DEGREE)];
const FIELD: Units = &[("gauss", units::GAUSS), ("tesla", 1.0)];
const GRADIENT: Units = &[("gauss_per_um", units::GAUSS_PER_UM), ("tesla_per_m", 1.0)];
const SECONDS: Units = &[("s", 1.0), ("ms", 1e-3)];
const ANGULAR: Units = &[("hz", 2.0 * PI), ("rad_s", 1.0)];

struct Section<'a> {
    path: String,
    map: &'a Map<String, Value>,
    known: BTreeSet<String>,
}

impl<'a> Section<'a> {
    fn new(path: &str, map: &'a Map<String, Value>) -> Self {
        Self {
            path: path.to_string(),
            map,
            known: BTreeSet::new(),
        }
    }

    fn key(&self, k: &str) -> String {
        if self.path.is_empty() {
            k.to_string()
        } else {
            format!("{}.{k}", self.path)
        }
    }

    fn quantity(
        &mut self,
        base: &str,
        units: Units,
        required: bool,
        errors: &mut Vec<String>,
    ) -> Option<f64> {
        self.known.insert(base.to_string());
        let mut found = Vec::new();
        for (suffix, factor) in units {
            let k = format!("{base}_{suffix}");
            self.known.insert(k.clone());
            if let Some(v) = self.map.get(&k) {
                match v.as_f64() {
                    Some(x) if x.is_finite() => found.push((k, x * factor)),
                    _ => errors.push(format!("`{}` must be a finite number", self.key(&k))),
                }
            }
        }
        let options = || {
            units
                .iter()
                .map(|(s, _)| format!("{base}_{s}"))
                .collect::<Vec<_>>()
                .join(", ")
        };
        if self.map.contains_key(base) {
            errors.push(format!(
                "`{}` is missing a unit suffix; use one of {}",
                self.key(base),
                options()
            ));
            return None;
        }
        match found.len() {
            0 if required => {
                errors.push(format!(
                    "missing `{}` (one of {})",
                    self.key(base),
                    options()
                ));
                None
            }
            0 => None,
            1 => Some(found[0].1),
            _ => {
                let keys: Vec<_> = found.iter().map(|(k, _)| self.key(k)).collect();
                errors.push(format!("conflicting keys {}", keys.join(" and ")));
                None
            }
        }
    }

    fn number(&mut self, k: &str, errors: &mut Vec<String>) -> Option<f64> {
        self.known.insert(k.to_string());
        let v = self.map.get(k)?;
        match v.as_f64() {
            Some(x) if x.is_finite() => Some(x),
            _ => {
                errors.push(format!("`{}` must be a finite number", self.key(k)));
                None
            }
        }
    }

    fn count(&mut self, k: &str, min: u64, errors: &mut Vec<String>) -> Option<usize> {
        self.known.insert(k.to_string());
        let v = self.map.get(k)?;
        match v.as_u64() {
            Some(x) if x >= min => Some(x as usize),
            _ => {
                errors.push(format!("`{}` must be an integer >= {min}", self.key(k)));
                None
            }
        }
    }

    fn flag(&mut self, k: &str, errors: &mut Vec<String>) -> Option<bool> {
        self.known.insert(k.to_string());
        let v = self.map.get(k)?;
        v.as_bool().or_else(|| {
            errors.push(format!("`{}` must be true or false", self.key(k)));
            None
        })
    }

    fn string(&mut self, k: &str, errors: &mut Vec<String>) -> Option<String> {
        self.known.insert(k.to_string());
        let v = self.map.get(k)?;
        v.as_str().map(str::to_string).or_else(|| {
            errors.push(format!("`{}` must be a string", self.key(k)));
            None
        })
    }

    fn section(&mut self, k: &str, errors: &mut Vec<String>) -> Option<&'a Map<String, Value>> {
        self.known.insert(k.to_string());
        let v = self.map.get(k)?;
        v.as_object().or_else(|| {
            errors.push(format!("`{}` must be an object", self.key(k)));
            None
        })
    }

    fn finish(self, errors: &mut Vec<String>) {
        for k in self.map.keys() {
            if !self.known.contains(k) {
                errors.push(format!("unknown key `{}`", self.key(k)));
            }
        }
    }
}

fn push<T>(errors: &mut Vec<String>, r: Result<T>) -> Option<T> {
    r.map_err(|e| errors.push(e.to_string())).ok()
}

/// Parses and validates a scenario document.
pub fn parse_config(document: &str) -> Result<ScenarioConfig> {
    let value: Value = serde_json::from_str(document)
        .map_err(|e| Error::Config(vec![format!("invalid JSON: {e}")]))?;
    from_value(&value)
}

pub fn from_value(value: &Value) -> Result<ScenarioConfig> {
    let empty = Map::new();
    let mut errors = Vec::new();
    let root_map = match value.as_object() {
        Some(m) => m,
        None => {
            return Err(Error::Config(vec!["document must be a JSON object".into()]));
        }
    };
    let mut root = Section::new("", root_map);
    let name = root.string("name", &mut errors);
    root.string("description", &mut errors);

    let scheme = match root.string("scheme", &mut errors).as_deref() {
        Some("gyroscopic_pm1") => Some(Scheme::GyroscopicPm1),
        Some("static_0m1") => Some(Scheme::Static0m1),
        Some(other) => {
            errors.push(format!(
                "unknown scheme `{other}`; use gyroscopic_pm1 or static_0m1"
            ));
            None
        }
        None => {
            if !root_map.contains_key("scheme") {
                errors.push("missing `scheme` (gyroscopic_pm1 or static_0m1)".into());
            }
            None
        }
    };

    // particle
    let particle = {
        let map = root.section("particle", &mut errors);
        if map.is_none() && !root_map.contains_key("particle") {
            errors.push("missing section `particle`".into());
        }
        let mut s = Section::new("particle", map.unwrap_or(&empty));
        let mass = s.quantity("mass", KG, map.is_some(), &mut errors);
        let density = s
            .quantity("density", DENSITY, false, &mut errors)
            .unwrap_or(DIAMOND_DENSITY);
        let inertia = s.quantity("inertia", INERTIA, false, &mut errors);
        let d = s
            .quantity("nv_offset", LENGTH, false, &mut errors)
            .unwrap_or(0.0);
        let alpha = s
            .quantity("nv_angle", ANGLE, false, &mut errors)
            .unwrap_or(0.0);
        s.finish(&mut errors);
        mass.and_then(|m| {
            let p = push(&mut errors, ParticleParams::sphere_with_density(m, density))?;
            let p = match inertia {
                Some(i) => push(&mut errors, p.with_inertia(i))?,
                None => p,
            };
            push(&mut errors, p.with_nv(d, alpha))
        })
    };

    // field
    let field = {
        let map = root.section("field", &mut errors);
        if map.is_none() && !root_map.contains_key("field") {
            errors.push("missing section `field`".into());
        }
        let mut s = Section::new("field", map.unwrap_or(&empty));
        let req = map.is_some();
        let b0 = s.quantity("b0", FIELD, req, &mut errors);
        let b1 = s.quantity("b1", FIELD, req, &mut errors);
        let eta = s.quantity("eta", GRADIENT, req, &mut errors);
        s.finish(&mut errors);
        match (b0, b1, eta) {
            (Some(b0), Some(b1), Some(eta)) => Some(FieldSettings { b0, b1, eta }),
            _ => None,
        }
    };

    // protocol
    root.known.insert("protocol".into());
    let auto = |sc: Scheme| ProtocolSettings {
        taus: sc.reference_taus(),
        close: true,
    };
    let protocol = match root_map.get("protocol") {
        None => scheme.map(auto),
        Some(Value::String(s)) if s == "auto" => scheme.map(auto),
        Some(Value::Object(map)) => {
            let mut s = Section::new("protocol", map);
            let taus: Vec<_> = ["tau1", "tau2", "tau3", "tau4"]
                .iter()
                .map(|k| s.quantity(k, SECONDS, true, &mut errors))
                .collect();
            let close = s.flag("close", &mut errors).unwrap_or(false);
            s.finish(&mut errors);
            match taus[..] {
                [Some(t1), Some(t2), Some(t3), Some(t4)] => Some(ProtocolSettings {
                    taus: [t1, t2, t3, t4],
                    close,
                }),
                _ => None,
            }
        }
        Some(other) => {
            errors.push(format!(
                "`protocol` must be \"auto\" or an object of stage times, got {other}"
            ));
            None
        }
    };

    // rotation
    let rotation = {
        let map = root.section("rotation", &mut errors);
        let mut s = Section::new("rotation", map.unwrap_or(&empty));
        let gyro = scheme == Some(Scheme::GyroscopicPm1);
        if gyro && map.is_none() && !root_map.contains_key("rotation") {
            errors.push("missing section `rotation` (required by gyroscopic_pm1)".into());
        }
        let omega0 = s.quantity("omega0", ANGULAR, gyro && map.is_some(), &mut errors);
        let theta0 = s.quantity("theta0", ANGLE, gyro && map.is_some(), &mut errors);
        s.finish(&mut errors);
        match (omega0, theta0) {
            (Some(w), Some(t)) => push(&mut errors, RotationInit::new(w, t)),
            (None, None) if !gyro => Some(RotationInit {
                omega0: 0.0,
                theta0: 0.0,
            }),
            (w, t) if !gyro => push(
                &mut errors,
                RotationInit::new(w.unwrap_or(0.0), t.unwrap_or(0.0)),
            ),
            _ => None,
        }
    };
    if scheme == Some(Scheme::GyroscopicPm1) && rotation.is_some_and(|r| r.omega0 == 0.0) {
        errors.push("omega0 = 0 has no gyroscopic stabilization; use scheme static_0m1 for a non-rotating particle".into());
    }

    // quantum
    let quantum = {
        let map = root.section("quantum", &mut errors);
        let mut s = Section::new("quantum", map.unwrap_or(&empty));
        let hbar = PhysicalConstants::default().hbar;
        let hbar_units: Units = &[("hbar", 1.0), ("js", 1.0)];
        // ħ multiples are scaled after reading
        let width = |s: &mut Section, base: &str, errors: &mut Vec<String>| {
            let in_hbar = s.map.contains_key(&format!("{base}_hbar"));
            s.quantity(base, hbar_units, false, errors)
                .map(|v| if in_hbar { v * hbar } else { v })
        };
        let dp_psi = width(&mut s, "dp_psi", &mut errors).unwrap_or(hbar);
        let dp_phi = width(&mut s, "dp_phi", &mut errors);
        let n = s.number("occupation_n", &mut errors).unwrap_or(0.0);
        s.finish(&mut errors);
        let theta0 = rotation.map_or(0.0, |r| r.theta0);
        push(&mut errors, QuantumInit::new(dp_psi, theta0, n)).and_then(|q| match dp_phi {
            Some(v) => push(&mut errors, q.with_dp_phi(v)),
            None => Some(q),
        })
    };

    // integrator
    let integrator = {
        let map = root.section("integrator", &mut errors);
        let mut s = Section::new("integrator", map.unwrap_or(&empty));
        let mut out = IntegratorSettings::default();
        if let Some(v) = s.number("rtol", &mut errors) {
            out.solver.rtol = v;
        }
        if let Some(v) = s.number("atol", &mut errors) {
            out.solver.atol = v;
        }
        if let Some(v) = s.number("steps_per_period", &mut errors) {
            out.solver.steps_per_period = v;
        }
        if let Some(v) = s.flag("field_sign_strict", &mut errors) {
            out.field_sign_strict = v;
        }
        if let Some(v) = s.count("theta_bar_points", 2, &mut errors) {
            out.theta_bar_points = v;
        }
        if let Some(v) = s.count("samples", 2, &mut errors) {
            out.samples = v;
        }
        if let Some(v) = s.count("coupling_iterations", 0, &mut errors) {
            out.coupling_iterations = v;
        }
        s.finish(&mut errors);
        for (k, v) in [
            ("rtol", out.solver.rtol),
            ("atol", out.solver.atol),
            ("steps_per_period", out.solver.steps_per_period),
        ] {
            if v.is_nan() || v <= 0.0 {
                errors.push(format!("`integrator.{k}` must be positive"));
            }
        }
        out
    };

    let static_scheme = {
        let map = root.section("static", &mut errors);
        let mut s = Section::new("static", map.unwrap_or(&empty));
        let mut out = StaticSettings::default();
        if let Some(v) = s.quantity("peak_window", SECONDS, false, &mut errors) {
            out.peak_window = v;
        }
        if let Some(v) = s.count("peak_samples", 2, &mut errors) {
            out.peak_samples = v;
        }
        if let Some(v) = s.number("peak_threshold", &mut errors) {
            out.peak_threshold = v;
        }
        s.finish(&mut errors);
        if out.peak_window.is_nan() || out.peak_window <= 0.0 {
            errors.push("`static.peak_window` must be positive".into());
        }
        if !(0.0..=1.0).contains(&out.peak_threshold) {
            errors.push("`static.peak_threshold` must lie in [0, 1]".into());
        }
        out
    };

    let outputs = {
        let map = root.section("outputs", &mut errors);
        let mut s = Section::new("outputs", map.unwrap_or(&empty));
        let out = OutputSettings {
            trajectory_csv: s.string("trajectory_csv", &mut errors).map(PathBuf::from),
            report_json: s.string("report_json", &mut errors).map(PathBuf::from),
            stride: s.count("stride", 1, &mut errors).unwrap_or(1),
        };
        s.finish(&mut errors);
        out
    };
    root.finish(&mut errors);

    if let (Some(f), Some(p)) = (field, protocol) {
        push(
            &mut errors,
            crate::field::FieldProtocol::new(f.b0, f.b1, f.eta, p.taus).map(|_| ()),
        );
    }

    if !errors.is_empty() {
        return Err(Error::Config(errors));
    }
    let (scheme, particle, field, protocol, rotation, quantum) = (
        scheme.unwrap(),
        particle.unwrap(),
        field.unwrap(),
        protocol.unwrap(),
        rotation.unwrap(),
        quantum.unwrap(),
    );

    let constants = PhysicalConstants::default();
    let mut warnings = Vec::new();
    if scheme == Scheme::GyroscopicPm1 {
        warnings.extend(
            validate_regime(
                &constants,
                &particle,
                &rotation,
                field.b0,
                DEFAULT_SEPARATION,
            )
            .warnings,
        );
    } else if rotation.omega0 > 0.0 {
        warnings.push("static_0m1 ignores the rotation section".into());
    }

    Ok(ScenarioConfig {
        name,
        scheme,
        constants,
        particle,
        field,
        protocol,
        rotation,
        quantum,
        integrator,
        static_scheme,
        outputs,
        warnings,
        source_sha256: canonical_sha256(value),
    })
}

/// sha256 of the compact JSON with sorted keys.
pub fn canonical_sha256(value: &Value) -> String {
    let text = serde_json::to_string(value).unwrap_or_default();
    hex::encode(Sha256::digest(text.as_bytes()))
}

impl ScenarioConfig {
    /// Equivalent document in SI-suffixed keys.
    pub fn to_document(&self) -> Value {
        let mut doc = json!({
            "scheme": match self.scheme {
                Scheme::GyroscopicPm1 => "gyroscopic_pm1",
                Scheme::Static0m1 => "static_0m1",
            },
            "particle": {
                "mass_kg": self.particle.mass,
                "density_kg_per_m3": self.particle.density,
                "inertia_kg_m2": self.particle.inertia,
                "nv_offset_m": self.particle.nv_offset,
                "nv_angle_rad": self.particle.nv_angle,
            },
            "field": {
                "b0_tesla": self.field.b0,
                "b1_tesla": self.field.b1,
                "eta_tesla_per_m": self.field.eta,
            },
            "protocol": {
                "tau1_s": self.protocol.taus[0],
                "tau2_s": self.protocol.taus[1],
                "tau3_s": self.protocol.taus[2],
                "tau4_s": self.protocol.taus[3],
                "close": self.protocol.close,
            },
            "quantum": {
                "dp_psi_js": self.quantum.dp_psi,
                "dp_phi_js": self.quantum.dp_phi,
                "occupation_n": self.quantum.occupation_n,
            },
            "integrator": {
                "rtol": self.integrator.solver.rtol,
                "atol": self.integrator.solver.atol,
                "steps_per_period": self.integrator.solver.steps_per_period,
                "field_sign_strict": self.integrator.field_sign_strict,
                "theta_bar_points": self.integrator.theta_bar_points,
                "samples": self.integrator.samples,
                "coupling_iterations": self.integrator.coupling_iterations,
            },
            "static": {
                "peak_window_s": self.static_scheme.peak_window,
                "peak_samples": self.static_scheme.peak_samples,
                "peak_threshold": self.static_scheme.peak_threshold,
            },
            "outputs": { "stride": self.outputs.stride },
        });
        if self.scheme == Scheme::GyroscopicPm1
            || self.rotation.omega0 > 0.0
            || self.rotation.theta0 > 0.0
        {
            doc["rotation"] = json!({
                "omega0_rad_s": self.rotation.omega0,
                "theta0_rad": self.rotation.theta0,
            });
        }
        if let Some(n) = &self.name {
            doc["name"] = json!(n);
        }
        if let Some(p) = &self.outputs.trajectory_csv {
            doc["outputs"]["trajectory_csv"] = json!(p.to_string_lossy());
        }
        if let Some(p) = &self.outputs.report_json {
            doc["outputs"]["report_json"] = json!(p.to_string_lossy());
        }
        doc
    }
}
