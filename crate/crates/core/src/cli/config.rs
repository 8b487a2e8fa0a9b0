//! Flat `section.key = value [unit]` run configuration.
//!
//! Dimensional values carry a mandatory unit suffix. Lengths accept
//! `pm nm um µm mm cm m`, plus `zT` (Talbot distance of the configured
//! grating) and `d` (grating period); decoherence strengths accept `m^-3`
//! and `mm^-1um^-2`. Lists are comma separated with one trailing unit.
//! Lines starting with `#` are comments.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::model::units::{CM, M, MM, NM, PER_MM_PER_UM2, PM, UM};
use crate::model::{BeamParams, GratingSpec, Model, SimulationGrid};

fn err<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Config(msg.into()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    Length,
    Strength,
    Count,
    Real,
    Word,
}

/// Every accepted key with its kind and whether it takes a list.
const SCHEMA: &[(&str, Kind, bool)] = &[
    ("beam.lambda", Kind::Length, false),
    ("grating.period", Kind::Length, false),
    ("grating.slit_width", Kind::Length, false),
    ("grating.slits", Kind::Count, false),
    ("grating.sigma0", Kind::Length, false),
    ("decoherence.lambda", Kind::Strength, true),
    ("grid.x_min", Kind::Length, false),
    ("grid.x_max", Kind::Length, false),
    ("grid.z_min", Kind::Length, false),
    ("grid.z_max", Kind::Length, false),
    ("grid.nx", Kind::Count, false),
    ("grid.nz", Kind::Count, false),
    ("ensemble.per_slit", Kind::Count, false),
    ("ensemble.z_min", Kind::Length, false),
    ("ensemble.z_max", Kind::Length, false),
    ("ensemble.base_step", Kind::Length, false),
    ("ensemble.sample_stride", Kind::Count, false),
    ("output.formats", Kind::Word, true),
    ("render.colormap", Kind::Word, false),
    ("render.momentum_clip", Kind::Real, false),
    ("render.density_gamma", Kind::Real, false),
    ("diagnose.select", Kind::Word, true),
    ("diagnose.far_z", Kind::Length, false),
    ("diagnose.max_order", Kind::Count, false),
    ("diagnose.order_floor", Kind::Real, false),
    ("diagnose.order_tolerance", Kind::Real, false),
    ("diagnose.density_cut", Kind::Real, false),
    ("diagnose.plateau_tolerance", Kind::Real, false),
    ("diagnose.revival_threshold", Kind::Real, false),
    ("diagnose.revival_window", Kind::Length, false),
    ("diagnose.onaxis_z_max", Kind::Length, false),
    ("diagnose.onaxis_points", Kind::Count, false),
];

fn kind_of(key: &str) -> Option<(Kind, bool)> {
    SCHEMA.iter().find(|(k, _, _)| *k == key).map(|&(_, kind, list)| (kind, list))
}

/// Unparsed `key = values unit` entry.
#[derive(Debug, Clone, PartialEq)]
struct Entry {
    values: Vec<String>,
    unit: Option<String>,
}

fn parse_entry(key: &str, raw: &str) -> Result<Entry> {
    let Some((kind, list)) = kind_of(key) else {
        return err(format!("unknown key `{key}`"));
    };
    let raw = raw.trim();
    let (body, unit) = match kind {
        Kind::Length | Kind::Strength => match raw.rsplit_once(char::is_whitespace) {
            Some((b, u)) if u.parse::<f64>().is_err() => (b.trim(), Some(u.to_string())),
            _ => return err(format!("`{key}` needs a unit suffix (got `{raw}`)")),
        },
        _ => (raw, None),
    };
    let values: Vec<String> =
        if body.is_empty() { Vec::new() } else { body.split(',').map(|s| s.trim().to_string()).collect() };
    if !list && values.len() != 1 {
        return err(format!("`{key}` takes exactly one value (got `{raw}`)"));
    }
    if values.iter().any(|v| v.is_empty()) {
        return err(format!("empty list element in `{key}`"));
    }
    Ok(Entry { values, unit })
}

/// Raw key/value pairs, later entries overriding earlier ones.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigSource {
    entries: BTreeMap<String, Entry>,
}

impl ConfigSource {
    pub fn parse(text: &str) -> Result<Self> {
        let mut src = Self::default();
        for (no, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return err(format!("line {}: expected `key = value`", no + 1));
            };
            src.set(k.trim(), v).map_err(|e| Error::Config(format!("line {}: {}", no + 1, strip(e))))?;
        }
        Ok(src)
    }

    /// Applies one `key=value` override.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let entry = parse_entry(key, value)?;
        self.entries.insert(key.to_string(), entry);
        Ok(())
    }

    pub fn apply_override(&mut self, assignment: &str) -> Result<()> {
        match assignment.split_once('=') {
            Some((k, v)) => self.set(k.trim(), v),
            None => err(format!("override `{assignment}` is not `key=value`")),
        }
    }
}

fn strip(e: Error) -> String {
    match e {
        Error::Config(m) => m,
        other => other.to_string(),
    }
}

fn number(key: &str, s: &str) -> Result<f64> {
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => err(format!("`{key}`: `{s}` is not a finite number")),
    }
}

fn length_unit(key: &str, unit: &str, zt: Option<f64>, d: Option<f64>) -> Result<f64> {
    Ok(match unit {
        "pm" => PM,
        "nm" => NM,
        "um" | "µm" => UM,
        "mm" => MM,
        "cm" => CM,
        "m" => M,
        "zT" => match zt {
            Some(v) => v,
            None => return err(format!("`{key}` cannot be expressed in zT")),
        },
        "d" => match d {
            Some(v) => v,
            None => return err(format!("`{key}` cannot be expressed in d")),
        },
        other => return err(format!("`{key}`: unknown length unit `{other}`")),
    })
}

fn strength_unit(key: &str, unit: &str) -> Result<f64> {
    match unit {
        "m^-3" => Ok(1.0),
        "mm^-1um^-2" | "mm^-1µm^-2" => Ok(PER_MM_PER_UM2),
        other => err(format!("`{key}`: unknown decoherence unit `{other}` (use m^-3 or mm^-1um^-2)")),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Raw,
    Image,
}

impl Format {
    fn parse(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Format::Csv),
            "raw" => Ok(Format::Raw),
            "image" => Ok(Format::Image),
            other => err(format!("unknown output format `{other}` (csv, raw, image)")),
        }
    }

    fn name(&self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Raw => "raw",
            Format::Image => "image",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Diagnostic {
    Crossing,
    Revival,
    Orders,
    Plateaus,
    Onaxis,
}

impl Diagnostic {
    pub const ALL: [Diagnostic; 5] =
        [Diagnostic::Crossing, Diagnostic::Revival, Diagnostic::Orders, Diagnostic::Plateaus, Diagnostic::Onaxis];

    fn parse(s: &str) -> Result<Self> {
        Self::ALL.into_iter().find(|d| d.name() == s).map_or_else(|| err(format!("unknown diagnostic `{s}`")), Ok)
    }

    pub fn name(&self) -> &'static str {
        match self {
            Diagnostic::Crossing => "crossing",
            Diagnostic::Revival => "revival",
            Diagnostic::Orders => "orders",
            Diagnostic::Plateaus => "plateaus",
            Diagnostic::Onaxis => "onaxis",
        }
    }
}

/// Which default set fills unspecified grid and render keys.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    NearField,
    FarField,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleConfig {
    pub per_slit: usize,
    pub z_min: f64,
    pub z_max: f64,
    pub base_step: f64,
    pub sample_stride: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RenderConfig {
    pub colormap: String,
    pub momentum_clip: f64,
    pub density_gamma: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiagnoseConfig {
    pub select: Vec<Diagnostic>,
    pub far_z: f64,
    pub max_order: u32,
    pub order_floor: f64,
    pub order_tolerance: f64,
    pub density_cut: f64,
    pub plateau_tolerance: f64,
    pub revival_threshold: f64,
    pub revival_window: f64,
    pub onaxis_z_max: f64,
    pub onaxis_points: usize,
}

/// Fully resolved configuration in SI units.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub model: Model,
    pub lambdas: Vec<f64>,
    pub grid: SimulationGrid,
    pub ensemble: EnsembleConfig,
    pub formats: Vec<Format>,
    pub render: RenderConfig,
    pub diagnose: DiagnoseConfig,
}

struct Resolver<'a> {
    src: &'a ConfigSource,
    zt: Option<f64>,
    d: Option<f64>,
}

impl Resolver<'_> {
    fn entry(&self, key: &str) -> Option<&Entry> {
        self.src.entries.get(key)
    }

    fn length(&self, key: &str, default: f64) -> Result<f64> {
        Ok(self.lengths(key)?.map_or(default, |v| v[0]))
    }

    fn lengths(&self, key: &str) -> Result<Option<Vec<f64>>> {
        let Some(e) = self.entry(key) else { return Ok(None) };
        let scale = length_unit(key, e.unit.as_deref().unwrap_or(""), self.zt, self.d)?;
        e.values.iter().map(|v| Ok(number(key, v)? * scale)).collect::<Result<_>>().map(Some)
    }

    fn count(&self, key: &str, default: usize) -> Result<usize> {
        let Some(e) = self.entry(key) else { return Ok(default) };
        e.values[0]
            .parse::<usize>()
            .or_else(|_| err(format!("`{key}`: `{}` is not a non-negative integer", e.values[0])))
    }

    fn real(&self, key: &str, default: f64) -> Result<f64> {
        self.entry(key).map_or(Ok(default), |e| number(key, &e.values[0]))
    }

    fn words(&self, key: &str, default: &[&str]) -> Vec<String> {
        self.entry(key).map_or_else(|| default.iter().map(|s| s.to_string()).collect(), |e| e.values.clone())
    }
}

impl RunConfig {
    pub fn resolve(src: &ConfigSource, regime: Regime) -> Result<Self> {
        let mut r = Resolver { src, zt: None, d: None };
        let lambda_db = r.length("beam.lambda", 16.0 * PM)?;
        let beam = BeamParams::new(lambda_db).map_err(|e| Error::Config(e.to_string()))?;
        let period = r.length("grating.period", 0.4 * UM)?;
        r.d = Some(period);
        let width = r.length("grating.slit_width", 0.2 * UM)?;
        let n = r.count("grating.slits", 50)?;
        let sigma0 = r.length("grating.sigma0", width / 4.0)?;
        let grating = GratingSpec::new(period, width, n, sigma0).map_err(|e| Error::Config(e.to_string()))?;
        let model = Model::new(beam, grating);
        let zt = model.talbot_distance();
        r.zt = Some(zt);

        let lambdas = match r.entry("decoherence.lambda") {
            None => vec![0.0],
            Some(e) => {
                let scale = strength_unit("decoherence.lambda", e.unit.as_deref().unwrap_or(""))?;
                let v = e
                    .values
                    .iter()
                    .map(|s| Ok(number("decoherence.lambda", s)? * scale))
                    .collect::<Result<Vec<f64>>>()?;
                if v.is_empty() {
                    return err("`decoherence.lambda` needs at least one value");
                }
                if let Some(bad) = v.iter().find(|l| **l < 0.0) {
                    return err(format!("decoherence strength must be non-negative, got {bad:e}"));
                }
                v
            }
        };

        let (xr, zr, clip) = match regime {
            Regime::NearField => (12.0 * UM, 8.0 * zt, 0.5),
            Regime::FarField => (120.0 * UM, 50.0 * zt, 4.0),
        };
        let grid = SimulationGrid::new(
            r.length("grid.x_min", -xr)?,
            r.length("grid.x_max", xr)?,
            r.length("grid.z_min", 0.0)?,
            r.length("grid.z_max", zr)?,
            r.count("grid.nx", 400)?,
            r.count("grid.nz", 400)?,
        )
        .map_err(|e| Error::Config(e.to_string()))?;

        let ensemble = EnsembleConfig {
            per_slit: r.count("ensemble.per_slit", 11)?,
            z_min: r.length("ensemble.z_min", 0.0)?,
            z_max: r.length("ensemble.z_max", 8.0 * zt)?,
            base_step: r.length("ensemble.base_step", zt / 2000.0)?,
            sample_stride: r.count("ensemble.sample_stride", 20)?,
        };
        if ensemble.per_slit == 0 || ensemble.sample_stride == 0 {
            return err("`ensemble.per_slit` and `ensemble.sample_stride` must be at least 1");
        }
        if !(ensemble.z_min >= 0.0 && ensemble.z_max > ensemble.z_min && ensemble.base_step > 0.0) {
            return err("ensemble needs 0 <= z_min < z_max and a positive base step");
        }

        let formats = r
            .words("output.formats", &["csv", "image"])
            .iter()
            .map(|s| Format::parse(s))
            .collect::<Result<Vec<_>>>()?;

        let render = RenderConfig {
            colormap: r.words("render.colormap", &["blue-white-red"]).remove(0),
            momentum_clip: r.real("render.momentum_clip", clip)?,
            density_gamma: r.real("render.density_gamma", 1.0)?,
        };
        if render.colormap != "blue-white-red" {
            return err(format!("unsupported colormap `{}` (blue-white-red)", render.colormap));
        }
        if !(render.momentum_clip > 0.0 && render.density_gamma > 0.0) {
            return err("render clip and gamma must be positive");
        }

        let select = r
            .words("diagnose.select", &["crossing", "revival", "orders", "plateaus", "onaxis"])
            .iter()
            .filter(|s| s.as_str() != "none")
            .map(|s| Diagnostic::parse(s))
            .collect::<Result<Vec<_>>>()?;
        let diagnose = DiagnoseConfig {
            select,
            far_z: r.length("diagnose.far_z", 1.0)?,
            max_order: r.count("diagnose.max_order", 2)? as u32,
            order_floor: r.real("diagnose.order_floor", 1e-3)?,
            order_tolerance: r.real("diagnose.order_tolerance", 0.05)?,
            density_cut: r.real("diagnose.density_cut", 3e-3)?,
            plateau_tolerance: r.real("diagnose.plateau_tolerance", 0.1)?,
            revival_threshold: r.real("diagnose.revival_threshold", 0.9)?,
            revival_window: r.length("diagnose.revival_window", 5.0 * period)?,
            onaxis_z_max: r.length("diagnose.onaxis_z_max", 50.0 * zt)?,
            onaxis_points: r.count("diagnose.onaxis_points", 101)?,
        };

        Ok(Self { model, lambdas, grid, ensemble, formats, render, diagnose })
    }

    /// The resolved configuration as config text in SI units; parsing it back
    /// reproduces this configuration exactly.
    pub fn manifest(&self) -> String {
        let m = &self.model;
        let g = &self.grid;
        let e = &self.ensemble;
        let dg = &self.diagnose;
        let list = |v: &[f64]| v.iter().map(|x| format!("{x:e}")).collect::<Vec<_>>().join(", ");
        let mut s = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        put("beam.lambda", format!("{:e} m", m.lambda_db()));
        put("grating.period", format!("{:e} m", m.period()));
        put("grating.slit_width", format!("{:e} m", m.grating().slit_width()));
        put("grating.slits", m.n_slits().to_string());
        put("grating.sigma0", format!("{:e} m", m.sigma0()));
        put("decoherence.lambda", format!("{} m^-3", list(&self.lambdas)));
        put("grid.x_min", format!("{:e} m", g.x_min));
        put("grid.x_max", format!("{:e} m", g.x_max));
        put("grid.z_min", format!("{:e} m", g.z_min));
        put("grid.z_max", format!("{:e} m", g.z_max));
        put("grid.nx", g.nx.to_string());
        put("grid.nz", g.nz.to_string());
        put("ensemble.per_slit", e.per_slit.to_string());
        put("ensemble.z_min", format!("{:e} m", e.z_min));
        put("ensemble.z_max", format!("{:e} m", e.z_max));
        put("ensemble.base_step", format!("{:e} m", e.base_step));
        put("ensemble.sample_stride", e.sample_stride.to_string());
        put("output.formats", self.formats.iter().map(|f| f.name()).collect::<Vec<_>>().join(", "));
        put("render.colormap", self.render.colormap.clone());
        put("render.momentum_clip", format!("{:e}", self.render.momentum_clip));
        put("render.density_gamma", format!("{:e}", self.render.density_gamma));
        let sel = if dg.select.is_empty() {
            "none".to_string()
        } else {
            dg.select.iter().map(|d| d.name()).collect::<Vec<_>>().join(", ")
        };
        put("diagnose.select", sel);
        put("diagnose.far_z", format!("{:e} m", dg.far_z));
        put("diagnose.max_order", dg.max_order.to_string());
        put("diagnose.order_floor", format!("{:e}", dg.order_floor));
        put("diagnose.order_tolerance", format!("{:e}", dg.order_tolerance));
        put("diagnose.density_cut", format!("{:e}", dg.density_cut));
        put("diagnose.plateau_tolerance", format!("{:e}", dg.plateau_tolerance));
        put("diagnose.revival_threshold", format!("{:e}", dg.revival_threshold));
        put("diagnose.revival_window", format!("{:e} m", dg.revival_window));
        put("diagnose.onaxis_z_max", format!("{:e} m", dg.onaxis_z_max));
        put("diagnose.onaxis_points", dg.onaxis_points.to_string());
        s
    }
}
