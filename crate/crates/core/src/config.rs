//! Problem configuration: a flat sectioned `key = value` format.
//!
//! ```text
//! # comment
//! [geometry]
//! xmin = 0
//! inlet = "x < 1e-9"
//! ```
//!
//! Expressions and enumerations are quoted, numbers and booleans are bare.
//! Every key is required unless it has a default below; unknown keys are
//! errors.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;

use crate::adjoint::{AdjointConvection, AdjointOptions, ObjectiveWeights};
use crate::driver::Problem;
use crate::error::{Error, Result};
use crate::expr::{Expr, Vars};
use crate::fem::ScalarField;
use crate::linsolve::NewtonSettings;
use crate::mesh::{build_structured_rect, BBox, BoundaryTag, EdgeLabel, Mesh};
use crate::phasefield::{OptimParams, VolumeForcing};
use crate::sensitivity::{Projection, SensitivityVariant};
use crate::state::{BoundaryData, PhysicsParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObjectiveMode {
    Dissipation,
    Mixing,
    MixingElectro,
    Multi,
}

impl ObjectiveMode {
    pub fn name(self) -> &'static str {
        match self {
            ObjectiveMode::Dissipation => "dissipation",
            ObjectiveMode::Mixing => "mixing",
            ObjectiveMode::MixingElectro => "mixing_electro",
            ObjectiveMode::Multi => "multi",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        [Self::Dissipation, Self::Mixing, Self::MixingElectro, Self::Multi].into_iter().find(|m| m.name() == s)
    }

    pub fn electrokinetics(self) -> bool {
        self == ObjectiveMode::MixingElectro
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Geometry {
    pub bbox: BBox,
    pub nx: usize,
    pub ny: usize,
    /// Edge-midpoint predicates; the remaining edges are walls.
    pub inlet: Expr,
    pub outlet: Expr,
    /// Segment label of an edge, evaluated at its midpoint and floored.
    pub segment: Expr,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProblemConfig {
    pub geometry: Geometry,
    pub physics: PhysicsParams,
    pub optim: OptimParams,
    pub weights: ObjectiveWeights,
    pub mode: ObjectiveMode,
    pub newton: NewtonSettings,
    pub supg: bool,
    pub strict_clamp: bool,
    pub sensitivity: SensitivityVariant,
    pub adjoint_convection: AdjointConvection,
    pub bdata: BoundaryData,
    pub initial_phi: Expr,
    /// Nodes where this is nonzero are held fluid.
    pub fixed_fluid: Option<Expr>,
    pub output_dir: PathBuf,
    pub snapshot_stride: usize,
}

struct Key {
    section: &'static str,
    name: &'static str,
    default: Option<&'static str>,
}

const fn key(section: &'static str, name: &'static str, default: Option<&'static str>) -> Key {
    Key { section, name, default }
}

/// Every accepted key in canonical order.
const KEYS: &[Key] = &[
    key("geometry", "xmin", None),
    key("geometry", "xmax", None),
    key("geometry", "ymin", None),
    key("geometry", "ymax", None),
    key("geometry", "nx", None),
    key("geometry", "ny", None),
    key("geometry", "inlet", None),
    key("geometry", "outlet", None),
    key("geometry", "segment", Some("0")),
    key("physics", "re", None),
    key("physics", "pe", None),
    key("physics", "alpha0", None),
    key("physics", "eps0", Some("3.6")),
    key("physics", "eps_m", Some("0.01")),
    key("physics", "rho0", Some("0")),
    key("optim", "objective_mode", None),
    key("optim", "beta1", None),
    key("optim", "beta2", None),
    key("optim", "beta3", None),
    key("optim", "v0", None),
    key("optim", "kappa", None),
    key("optim", "tau", None),
    key("optim", "eta", None),
    key("optim", "iterations", None),
    key("optim", "substeps", None),
    key("optim", "volume_forcing", Some("bounded")),
    key("optim", "sensitivity", Some("consistent")),
    key("optim", "adjoint_convection", Some("transpose")),
    key("optim", "supg", Some("false")),
    key("optim", "strict_clamp", Some("false")),
    key("optim", "newton_rel_tol", Some("1e-8")),
    key("optim", "newton_abs_tol", Some("1e-11")),
    key("optim", "newton_max_iters", Some("25")),
    key("boundary", "u0x", None),
    key("boundary", "u0y", Some("0")),
    key("boundary", "psi_inlet", Some("0")),
    key("boundary", "psi_wall", Some("0")),
    key("boundary", "c0", Some("0")),
    key("boundary", "cd", Some("0")),
    key("boundary", "initial_phi", None),
    key("boundary", "fixed_fluid", Some("")),
    key("output", "dir", Some("out")),
    key("output", "stride", Some("10")),
];

const SECTIONS: &[&str] = &["geometry", "physics", "optim", "boundary", "output"];

/// Raw `section.key -> (value, line)` map after syntax checks.
fn tokenize(text: &str) -> Result<BTreeMap<(String, String), (String, usize)>> {
    let mut out = BTreeMap::new();
    let mut section: Option<String> = None;
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let err = |m: String| Error::Parse { line: line_no, message: m };
        let line = strip_comment(raw).trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('[') {
            let name = rest.strip_suffix(']').ok_or_else(|| err("unterminated section header".into()))?.trim();
            if !SECTIONS.contains(&name) {
                return Err(err(format!("unknown section [{name}]")));
            }
            section = Some(name.to_string());
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| err(format!("expected `key = value`, found `{line}`")))?;
        let sec = section.clone().ok_or_else(|| err("key outside of any section".into()))?;
        let k = k.trim();
        if !KEYS.iter().any(|d| d.section == sec && d.name == k) {
            return Err(err(format!("unknown key `{k}` in [{sec}]")));
        }
        let v = v.trim();
        let value = if let Some(q) = v.strip_prefix('"') {
            let inner = q.strip_suffix('"').ok_or_else(|| err("unterminated string".into()))?;
            if inner.contains('"') {
                return Err(err("stray quote inside string".into()));
            }
            inner.to_string()
        } else {
            if v.is_empty() {
                return Err(err(format!("missing value for `{k}`")));
            }
            v.to_string()
        };
        if out.insert((sec.clone(), k.to_string()), (value, line_no)).is_some() {
            return Err(err(format!("duplicate key `{k}` in [{sec}]")));
        }
    }
    Ok(out)
}

fn strip_comment(line: &str) -> &str {
    let mut in_str = false;
    for (i, c) in line.char_indices() {
        match c {
            '"' => in_str = !in_str,
            '#' if !in_str => return &line[..i],
            _ => {}
        }
    }
    line
}

struct Values {
    map: BTreeMap<(String, String), (String, usize)>,
}

impl Values {
    fn raw(&self, section: &str, name: &str) -> (String, usize) {
        if let Some(v) = self.map.get(&(section.to_string(), name.to_string())) {
            return v.clone();
        }
        let d = KEYS.iter().find(|d| d.section == section && d.name == name).expect("declared key");
        (d.default.expect("checked for missing keys").to_string(), 0)
    }

    fn num(&self, section: &str, name: &str) -> Result<f64> {
        let (v, line) = self.raw(section, name);
        v.parse::<f64>()
            .ok()
            .filter(|x| x.is_finite())
            .ok_or_else(|| Error::Parse { line, message: format!("{section}.{name}: expected a number, found `{v}`") })
    }

    fn int(&self, section: &str, name: &str) -> Result<usize> {
        let (v, line) = self.raw(section, name);
        v.parse::<usize>().map_err(|_| Error::Parse {
            line,
            message: format!("{section}.{name}: expected a non-negative integer, found `{v}`"),
        })
    }

    fn boolean(&self, section: &str, name: &str) -> Result<bool> {
        let (v, line) = self.raw(section, name);
        match v.as_str() {
            "true" => Ok(true),
            "false" => Ok(false),
            _ => Err(Error::Parse { line, message: format!("{section}.{name}: expected true or false, found `{v}`") }),
        }
    }

    fn string(&self, section: &str, name: &str) -> String {
        self.raw(section, name).0
    }

    fn expr(&self, section: &str, name: &str) -> Result<Expr> {
        let (v, line) = self.raw(section, name);
        Expr::parse(&v).map_err(|e| Error::Parse { line, message: format!("{section}.{name}: {e}") })
    }

    fn choice<T>(&self, section: &str, name: &str, parse: impl Fn(&str) -> Option<T>, allowed: &str) -> Result<T> {
        let (v, line) = self.raw(section, name);
        parse(&v).ok_or_else(|| Error::Parse {
            line,
            message: format!("{section}.{name}: expected one of {allowed}, found `{v}`"),
        })
    }
}

/// Parses and validates a configuration document.
pub fn parse_config(text: &str) -> Result<ProblemConfig> {
    let map = tokenize(text)?;
    let missing: Vec<String> = KEYS
        .iter()
        .filter(|d| d.default.is_none() && !map.contains_key(&(d.section.to_string(), d.name.to_string())))
        .map(|d| format!("{}.{}", d.section, d.name))
        .collect();
    if !missing.is_empty() {
        return Err(Error::Config(format!("missing required keys: {}", missing.join(", "))));
    }
    let v = Values { map };
    let mode = v.choice("optim", "objective_mode", ObjectiveMode::parse, "dissipation, mixing, mixing_electro, multi")?;
    let beta3 = v.num("optim", "beta3")?;
    let fixed = v.string("boundary", "fixed_fluid");
    let cfg = ProblemConfig {
        geometry: Geometry {
            bbox: BBox::new(v.num("geometry", "xmin")?, v.num("geometry", "xmax")?, v.num("geometry", "ymin")?, v.num("geometry", "ymax")?),
            nx: v.int("geometry", "nx")?,
            ny: v.int("geometry", "ny")?,
            inlet: v.expr("geometry", "inlet")?,
            outlet: v.expr("geometry", "outlet")?,
            segment: v.expr("geometry", "segment")?,
        },
        physics: PhysicsParams {
            re: v.num("physics", "re")?,
            pe: v.num("physics", "pe")?,
            alpha0: v.num("physics", "alpha0")?,
            eps0: v.num("physics", "eps0")?,
            eps_m: v.num("physics", "eps_m")?,
            rho0: v.num("physics", "rho0")?,
            electrokinetics: mode.electrokinetics(),
        },
        optim: OptimParams {
            kappa: v.num("optim", "kappa")?,
            tau: v.num("optim", "tau")?,
            eta: v.num("optim", "eta")?,
            beta3,
            v0: v.num("optim", "v0")?,
            iterations: v.int("optim", "iterations")?,
            substeps: v.int("optim", "substeps")?,
            volume_forcing: v.choice(
                "optim",
                "volume_forcing",
                |s| [VolumeForcing::Bounded, VolumeForcing::Uniform].into_iter().find(|f| f.name() == s),
                "bounded, uniform",
            )?,
        },
        weights: ObjectiveWeights { beta1: v.num("optim", "beta1")?, beta2: v.num("optim", "beta2")?, beta3 },
        mode,
        newton: NewtonSettings {
            rel_tol: v.num("optim", "newton_rel_tol")?,
            abs_tol: v.num("optim", "newton_abs_tol")?,
            max_iters: v.int("optim", "newton_max_iters")?,
            ..NewtonSettings::default()
        },
        supg: v.boolean("optim", "supg")?,
        strict_clamp: v.boolean("optim", "strict_clamp")?,
        sensitivity: v.choice("optim", "sensitivity", parse_variant, "consistent, as_printed")?,
        adjoint_convection: v.choice("optim", "adjoint_convection", parse_convection, "transpose, as_printed")?,
        bdata: BoundaryData {
            u0: [v.expr("boundary", "u0x")?, v.expr("boundary", "u0y")?],
            psi_inlet: v.expr("boundary", "psi_inlet")?,
            psi_wall: v.expr("boundary", "psi_wall")?,
            c0: v.expr("boundary", "c0")?,
            cd: v.num("boundary", "cd")?,
        },
        initial_phi: v.expr("boundary", "initial_phi")?,
        fixed_fluid: if fixed.trim().is_empty() { None } else { Some(v.expr("boundary", "fixed_fluid")?) },
        output_dir: PathBuf::from(v.string("output", "dir")),
        snapshot_stride: v.int("output", "stride")?,
    };
    cfg.validate()?;
    Ok(cfg)
}

fn parse_variant(s: &str) -> Option<SensitivityVariant> {
    match s {
        "consistent" => Some(SensitivityVariant::Consistent),
        "as_printed" => Some(SensitivityVariant::AsPrinted),
        _ => None,
    }
}

fn variant_name(v: SensitivityVariant) -> &'static str {
    match v {
        SensitivityVariant::Consistent => "consistent",
        SensitivityVariant::AsPrinted => "as_printed",
    }
}

fn parse_convection(s: &str) -> Option<AdjointConvection> {
    match s {
        "transpose" => Some(AdjointConvection::Transpose),
        "as_printed" => Some(AdjointConvection::AsPrinted),
        _ => None,
    }
}

fn convection_name(c: AdjointConvection) -> &'static str {
    match c {
        AdjointConvection::Transpose => "transpose",
        AdjointConvection::AsPrinted => "as_printed",
    }
}

fn num(x: f64) -> String {
    // Display prints the shortest string that parses back exactly.
    format!("{x}")
}

impl ProblemConfig {
    pub fn validate(&self) -> Result<()> {
        let g = &self.geometry;
        if g.nx == 0 || g.ny == 0 {
            return Err(Error::Config(format!("geometry.nx and geometry.ny must be positive, got {} x {}", g.nx, g.ny)));
        }
        if !(g.bbox.xmax > g.bbox.xmin && g.bbox.ymax > g.bbox.ymin) {
            return Err(Error::Config("geometry: xmax > xmin and ymax > ymin required".into()));
        }
        self.physics.validate()?;
        self.weights.validate()?;
        self.optim.validate(g.bbox.area())?;
        self.newton.validate()?;
        let (b1, b2) = (self.weights.beta1, self.weights.beta2);
        let consistent = match self.mode {
            ObjectiveMode::Dissipation => b1 > 0.0 && b2 == 0.0,
            ObjectiveMode::Mixing | ObjectiveMode::MixingElectro => b1 == 0.0 && b2 > 0.0,
            ObjectiveMode::Multi => b1 > 0.0 && b2 > 0.0,
        };
        if !consistent {
            return Err(Error::Config(format!(
                "optim.objective_mode = {} does not match beta1 = {b1}, beta2 = {b2}",
                self.mode.name()
            )));
        }
        if self.snapshot_stride == 0 {
            return Err(Error::Config("output.stride must be at least 1".into()));
        }
        if !(self.bdata.cd.is_finite()) {
            return Err(Error::Config("boundary.cd must be finite".into()));
        }
        // every expression must evaluate at a few probe points
        let b = g.bbox;
        let probes = [(0.5, 0.5), (0.0, 0.0), (1.0, 1.0), (0.25, 0.75), (0.9, 0.1)];
        let named: Vec<(&str, &Expr)> = vec![
            ("geometry.inlet", &g.inlet),
            ("geometry.outlet", &g.outlet),
            ("geometry.segment", &g.segment),
            ("boundary.u0x", &self.bdata.u0[0]),
            ("boundary.u0y", &self.bdata.u0[1]),
            ("boundary.psi_inlet", &self.bdata.psi_inlet),
            ("boundary.psi_wall", &self.bdata.psi_wall),
            ("boundary.c0", &self.bdata.c0),
            ("boundary.initial_phi", &self.initial_phi),
        ];
        let fixed = self.fixed_fluid.as_ref().map(|e| ("boundary.fixed_fluid", e));
        for (name, e) in named.into_iter().chain(fixed) {
            for (s, t) in probes {
                let vars = Vars { x: b.xmin + s * (b.xmax - b.xmin), y: b.ymin + t * (b.ymax - b.ymin), seg: 0.0 };
                e.eval_checked(vars).map_err(|err| Error::Config(format!("{name}: {err}")))?;
            }
        }
        Ok(())
    }

    /// Canonical document: every key, in declaration order.
    pub fn to_document(&self) -> String {
        let g = &self.geometry;
        let p = &self.physics;
        let o = &self.optim;
        let q = |e: &Expr| format!("\"{}\"", e.source());
        let values: Vec<(&str, &str, String)> = vec![
            ("geometry", "xmin", num(g.bbox.xmin)),
            ("geometry", "xmax", num(g.bbox.xmax)),
            ("geometry", "ymin", num(g.bbox.ymin)),
            ("geometry", "ymax", num(g.bbox.ymax)),
            ("geometry", "nx", g.nx.to_string()),
            ("geometry", "ny", g.ny.to_string()),
            ("geometry", "inlet", q(&g.inlet)),
            ("geometry", "outlet", q(&g.outlet)),
            ("geometry", "segment", q(&g.segment)),
            ("physics", "re", num(p.re)),
            ("physics", "pe", num(p.pe)),
            ("physics", "alpha0", num(p.alpha0)),
            ("physics", "eps0", num(p.eps0)),
            ("physics", "eps_m", num(p.eps_m)),
            ("physics", "rho0", num(p.rho0)),
            ("optim", "objective_mode", format!("\"{}\"", self.mode.name())),
            ("optim", "beta1", num(self.weights.beta1)),
            ("optim", "beta2", num(self.weights.beta2)),
            ("optim", "beta3", num(o.beta3)),
            ("optim", "v0", num(o.v0)),
            ("optim", "kappa", num(o.kappa)),
            ("optim", "tau", num(o.tau)),
            ("optim", "eta", num(o.eta)),
            ("optim", "iterations", o.iterations.to_string()),
            ("optim", "substeps", o.substeps.to_string()),
            ("optim", "volume_forcing", format!("\"{}\"", o.volume_forcing.name())),
            ("optim", "sensitivity", format!("\"{}\"", variant_name(self.sensitivity))),
            ("optim", "adjoint_convection", format!("\"{}\"", convection_name(self.adjoint_convection))),
            ("optim", "supg", self.supg.to_string()),
            ("optim", "strict_clamp", self.strict_clamp.to_string()),
            ("optim", "newton_rel_tol", num(self.newton.rel_tol)),
            ("optim", "newton_abs_tol", num(self.newton.abs_tol)),
            ("optim", "newton_max_iters", self.newton.max_iters.to_string()),
            ("boundary", "u0x", q(&self.bdata.u0[0])),
            ("boundary", "u0y", q(&self.bdata.u0[1])),
            ("boundary", "psi_inlet", q(&self.bdata.psi_inlet)),
            ("boundary", "psi_wall", q(&self.bdata.psi_wall)),
            ("boundary", "c0", q(&self.bdata.c0)),
            ("boundary", "cd", num(self.bdata.cd)),
            ("boundary", "initial_phi", q(&self.initial_phi)),
            ("boundary", "fixed_fluid", format!("\"{}\"", self.fixed_fluid.as_ref().map_or("", |e| e.source()))),
            ("output", "dir", format!("\"{}\"", self.output_dir.display())),
            ("output", "stride", self.snapshot_stride.to_string()),
        ];
        debug_assert_eq!(values.len(), KEYS.len());
        let mut s = String::new();
        let mut current = "";
        for (sec, k, v) in values {
            if sec != current {
                if !current.is_empty() {
                    s.push('\n');
                }
                let _ = writeln!(s, "[{sec}]");
                current = sec;
            }
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }

    /// Copy with a different mesh resolution.
    pub fn with_mesh(&self, nx: usize, ny: usize) -> Self {
        let mut c = self.clone();
        c.geometry.nx = nx;
        c.geometry.ny = ny;
        c
    }

    pub fn build_mesh(&self) -> Result<Mesh> {
        let g = &self.geometry;
        let b = g.bbox;
        let tol = 1e-9 * (b.xmax - b.xmin).max(b.ymax - b.ymin);
        let tagger = |p: [f64; 2]| -> Result<Option<EdgeLabel>> {
            let vars = Vars::at(p[0], p[1]);
            let segment = g.segment.eval_checked(vars)?.floor() as i32;
            let tag = if g.inlet.eval_checked(vars)? != 0.0 {
                BoundaryTag::Inlet
            } else if g.outlet.eval_checked(vars)? != 0.0 {
                BoundaryTag::Outlet
            } else if (p[1] - b.ymax).abs() <= tol {
                BoundaryTag::WallUp
            } else {
                // bottom wall and wall parts of the vertical sides
                BoundaryTag::WallDown
            };
            Ok(Some(EdgeLabel { tag, segment }))
        };
        build_structured_rect(b, g.nx, g.ny, &ExprTagger(tagger))
    }

    /// Initial phase field, clamped to `[0, 1]` and set to 1 on fixed nodes.
    pub fn initial_field(&self, mesh: &Mesh) -> Result<ScalarField> {
        let mut values = Vec::with_capacity(mesh.num_nodes());
        for p in &mesh.nodes {
            values.push(self.initial_phi.eval_checked(Vars::at(p[0], p[1]))?.clamp(0.0, 1.0));
        }
        for i in self.fixed_nodes(mesh)? {
            values[i] = 1.0;
        }
        Ok(ScalarField { values })
    }

    pub fn fixed_nodes(&self, mesh: &Mesh) -> Result<Vec<usize>> {
        let Some(e) = &self.fixed_fluid else { return Ok(Vec::new()) };
        let mut out = Vec::new();
        for (i, p) in mesh.nodes.iter().enumerate() {
            if e.eval_checked(Vars::at(p[0], p[1]))? != 0.0 {
                out.push(i);
            }
        }
        Ok(out)
    }

    /// Mesh, solver settings and initial field for this configuration.
    pub fn build(&self) -> Result<(Problem, ScalarField)> {
        let mesh = self.build_mesh()?;
        if mesh.edges_with_tag(BoundaryTag::Inlet).next().is_none() {
            return Err(Error::Config("geometry.inlet selects no boundary edge".into()));
        }
        let phi = self.initial_field(&mesh)?;
        let fixed_fluid = self.fixed_nodes(&mesh)?;
        let problem = Problem {
            mesh,
            bdata: self.bdata.clone(),
            params: self.physics,
            weights: self.weights,
            optim: self.optim,
            newton: self.newton,
            supg: self.supg,
            adjoint: AdjointOptions { convection: self.adjoint_convection, supg: self.supg },
            variant: self.sensitivity,
            projection: Projection::ConsistentMass,
            fixed_fluid,
            strict_clamp: self.strict_clamp,
        };
        Ok((problem, phi))
    }
}

struct ExprTagger<F>(F);

impl<F> crate::mesh::Tagger for ExprTagger<F>
where
    F: Fn([f64; 2]) -> Result<Option<EdgeLabel>>,
{
    fn classify(&self, midpoint: [f64; 2]) -> Result<Option<EdgeLabel>> {
        (self.0)(midpoint)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SMALL: &str = r#"
[geometry]
xmin = 0
xmax = 2
ymin = 0
ymax = 1
nx = 4
ny = 2
inlet = "x < 1e-9"   # whole left side
outlet = "x > 2 - 1e-9"

[physics]
re = 1
pe = 10
alpha0 = 100

[optim]
objective_mode = "dissipation"
beta1 = 1
beta2 = 0
beta3 = 10
v0 = 0.5
kappa = 0.001
tau = 0.001
eta = 1
iterations = 2
substeps = 1

[boundary]
u0x = "4*y*(1 - y)"
initial_phi = "1"
"#;

    #[test]
    fn parses_and_round_trips() {
        let cfg = parse_config(SMALL).unwrap();
        assert_eq!(cfg.geometry.nx, 4);
        assert_eq!(cfg.physics.eps_m, 0.01);
        assert!(!cfg.physics.electrokinetics);
        let doc = cfg.to_document();
        let again = parse_config(&doc).unwrap();
        assert_eq!(cfg, again);
        assert_eq!(doc, again.to_document());
    }

    #[test]
    fn empty_document_lists_missing_keys() {
        let msg = parse_config("").unwrap_err().to_string();
        for k in ["geometry.xmin", "geometry.inlet", "physics.re", "optim.tau", "boundary.u0x", "boundary.initial_phi"] {
            assert!(msg.contains(k), "{k} not in {msg}");
        }
        assert!(!msg.contains("physics.eps0"));
    }

    #[test]
    fn unknown_key_reports_line() {
        let doc = SMALL.replace("alpha0 = 100", "alpha0 = 100\nalpah = 3");
        match parse_config(&doc) {
            Err(Error::Parse { line, message }) => {
                assert!(message.contains("alpah"));
                assert_eq!(doc.lines().nth(line - 1).unwrap().trim(), "alpah = 3");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn validation_names_the_field() {
        let doc = SMALL.replace("re = 1", "re = -1");
        let msg = parse_config(&doc).unwrap_err().to_string();
        assert!(msg.contains("physics.re"), "{msg}");
        let doc = SMALL.replace("beta2 = 0", "beta2 = 1");
        assert!(parse_config(&doc).unwrap_err().to_string().contains("objective_mode"));
        let doc = SMALL.replace("u0x = \"4*y*(1 - y)\"", "u0x = \"4*y*(1 - \"");
        assert!(matches!(parse_config(&doc), Err(Error::Parse { .. })));
    }

    #[test]
    fn builds_problem() {
        let cfg = parse_config(SMALL).unwrap();
        let (problem, phi) = cfg.build().unwrap();
        assert_eq!(problem.mesh.num_nodes(), 15);
        assert!(phi.values.iter().all(|&v| v == 1.0));
        assert_eq!(problem.mesh.edges_with_tag(BoundaryTag::Inlet).count(), 2);
        assert_eq!(problem.mesh.edges_with_tag(BoundaryTag::WallUp).count(), 4);
    }
}
