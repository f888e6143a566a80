//! Scene file parsing and serialization.
//!
//! A scene file is a sequence of `[section]` headers and `key = value`
//! lines. `#` starts a comment. Dimensional values must carry a unit
//! suffix (`0.25 cm`, `23 kN/m3`, `19.8 deg`); everything is converted to SI
//! at load time. Vector and polygon values list their numbers first and a
//! single unit at the end: `polygon = 0 0, 50 0, 50 15, 0 15 cm`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{ConfigError, Error, Result};
use crate::Vec2;

/// Physical dimension of a configuration value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dimension {
    None,
    Length,
    Pressure,
    UnitWeight,
    Angle,
    Time,
    Acceleration,
    Rate,
}

impl Dimension {
    fn si_unit(self) -> &'static str {
        match self {
            Dimension::None => "",
            Dimension::Length => "m",
            Dimension::Pressure => "Pa",
            Dimension::UnitWeight => "N/m3",
            Dimension::Angle => "rad",
            Dimension::Time => "s",
            Dimension::Acceleration => "m/s2",
            Dimension::Rate => "1/s",
        }
    }

    fn scale(self, unit: &str) -> Option<f64> {
        let s = match (self, unit) {
            (Dimension::None, "") => 1.0,
            (Dimension::Length, "m") => 1.0,
            (Dimension::Length, "cm") => 1e-2,
            (Dimension::Length, "mm") => 1e-3,
            (Dimension::Pressure, "Pa") => 1.0,
            (Dimension::Pressure, "kPa") => 1e3,
            (Dimension::Pressure, "MPa") => 1e6,
            (Dimension::Pressure, "GPa") => 1e9,
            (Dimension::UnitWeight, "N/m3") => 1.0,
            (Dimension::UnitWeight, "kN/m3") => 1e3,
            (Dimension::Angle, "rad") => 1.0,
            (Dimension::Angle, "deg") => std::f64::consts::PI / 180.0,
            (Dimension::Time, "s") => 1.0,
            (Dimension::Time, "ms") => 1e-3,
            (Dimension::Acceleration, "m/s2") => 1.0,
            (Dimension::Rate, "1/s") => 1.0,
            _ => return None,
        };
        Some(s)
    }
}

/// Raw `section.key → (line, value)` table.
#[derive(Debug, Clone, Default)]
pub struct RawScene {
    entries: BTreeMap<String, (usize, String)>,
}

impl RawScene {
    pub fn parse(text: &str) -> std::result::Result<Self, ConfigError> {
        let mut entries = BTreeMap::new();
        let mut section = String::new();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| ConfigError::at(line_no, format!("malformed section header `{line}`")))?
                    .trim();
                if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
                    return Err(ConfigError::at(line_no, format!("bad section name `{name}`")));
                }
                section = name.to_string();
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| ConfigError::at(line_no, format!("expected `key = value`, got `{line}`")))?;
            let key = key.trim();
            if key.is_empty() {
                return Err(ConfigError::at(line_no, "empty key"));
            }
            if section.is_empty() {
                return Err(ConfigError::at(line_no, format!("key `{key}` appears before any section")));
            }
            let full = format!("{section}.{key}");
            if let Some((prev, _)) = entries.get(&full) {
                return Err(ConfigError::at(
                    line_no,
                    format!("duplicate key `{full}` (first set on line {prev})"),
                ));
            }
            entries.insert(full, (line_no, value.trim().to_string()));
        }
        Ok(Self { entries })
    }
}

/// Pulls typed values out of a [`RawScene`], tracking which keys were used.
struct Reader {
    raw: RawScene,
    used: Vec<String>,
}

fn split_unit(value: &str) -> (&str, &str) {
    let value = value.trim();
    match value.rfind(|c: char| c.is_whitespace() || c == ',') {
        Some(pos) => {
            let last = value[pos + 1..].trim();
            if !last.is_empty() && last.parse::<f64>().is_err() {
                (value[..pos].trim(), last)
            } else {
                (value, "")
            }
        }
        None => {
            if value.parse::<f64>().is_ok() {
                (value, "")
            } else {
                // a bare unit with no number
                ("", value)
            }
        }
    }
}

impl Reader {
    fn lookup(&mut self, key: &str) -> Option<(usize, String)> {
        let found = self.raw.entries.get(key).cloned();
        if found.is_some() {
            self.used.push(key.to_string());
        }
        found
    }

    fn numbers(&mut self, key: &str, dim: Dimension) -> std::result::Result<Option<(usize, Vec<f64>)>, ConfigError> {
        let Some((line, value)) = self.lookup(key) else {
            return Ok(None);
        };
        let (nums, unit) = split_unit(&value);
        let scale = dim.scale(unit).ok_or_else(|| {
            if unit.is_empty() {
                ConfigError::at(line, format!("`{key}` needs a unit (e.g. {})", dim.si_unit()))
            } else {
                ConfigError::at(line, format!("`{key}`: unit `{unit}` is not valid here"))
            }
        })?;
        let mut out = Vec::new();
        for tok in nums.split(|c: char| c.is_whitespace() || c == ',').filter(|t| !t.is_empty()) {
            let v: f64 = tok
                .parse()
                .map_err(|_| ConfigError::at(line, format!("`{key}`: `{tok}` is not a number")))?;
            if !v.is_finite() {
                return Err(ConfigError::at(line, format!("`{key}`: value must be finite")));
            }
            out.push(v * scale);
        }
        if out.is_empty() {
            return Err(ConfigError::at(line, format!("`{key}` has no value")));
        }
        Ok(Some((line, out)))
    }

    fn opt_scalar(&mut self, key: &str, dim: Dimension) -> std::result::Result<Option<(usize, f64)>, ConfigError> {
        match self.numbers(key, dim)? {
            None => Ok(None),
            Some((line, v)) if v.len() == 1 => Ok(Some((line, v[0]))),
            Some((line, _)) => Err(ConfigError::at(line, format!("`{key}` takes a single value"))),
        }
    }

    fn scalar(&mut self, key: &str, dim: Dimension) -> std::result::Result<(usize, f64), ConfigError> {
        self.opt_scalar(key, dim)?
            .ok_or_else(|| ConfigError::general(format!("missing key `{key}`")))
    }

    fn scalar_or(&mut self, key: &str, dim: Dimension, default: f64) -> std::result::Result<(usize, f64), ConfigError> {
        Ok(self.opt_scalar(key, dim)?.unwrap_or((0, default)))
    }

    fn vector(&mut self, key: &str, dim: Dimension) -> std::result::Result<Option<(usize, Vec2)>, ConfigError> {
        match self.numbers(key, dim)? {
            None => Ok(None),
            Some((line, v)) if v.len() == 2 => Ok(Some((line, Vec2::new(v[0], v[1])))),
            Some((line, _)) => Err(ConfigError::at(line, format!("`{key}` takes two values"))),
        }
    }

    fn count(&mut self, key: &str) -> std::result::Result<(usize, usize), ConfigError> {
        let (line, v) = self.scalar(key, Dimension::None)?;
        if v < 0.0 || v.fract() != 0.0 {
            return Err(ConfigError::at(line, format!("`{key}` must be a non-negative integer")));
        }
        Ok((line, v as usize))
    }

    fn boolean(&mut self, key: &str, default: bool) -> std::result::Result<bool, ConfigError> {
        match self.lookup(key) {
            None => Ok(default),
            Some((line, v)) => match v.as_str() {
                "true" | "yes" | "on" => Ok(true),
                "false" | "no" | "off" => Ok(false),
                _ => Err(ConfigError::at(line, format!("`{key}` must be true or false"))),
            },
        }
    }

    fn unused(&self) -> Option<(usize, String)> {
        self.raw
            .entries
            .iter()
            .find(|(k, _)| !self.used.contains(k))
            .map(|(k, (line, _))| (*line, k.clone()))
    }
}

/// Soil description.
#[derive(Debug, Clone, PartialEq)]
pub struct SoilConfig {
    pub polygon: Vec<Vec2>,
    pub spacing: f64,
    /// `h / Δp`
    pub smoothing_ratio: f64,
    pub young_modulus: f64,
    pub poisson_ratio: f64,
    pub cohesion: f64,
    pub friction_angle: f64,
    pub dilatancy_angle: f64,
    pub unit_weight: f64,
}

/// Block template and stack placement.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockConfig {
    pub width: f64,
    pub height: f64,
    pub unit_weight: f64,
    pub young_modulus: f64,
    pub poisson_ratio: f64,
    pub placement: Placement,
    /// Boundary particle spacing on the bottom and side edges.
    pub particle_spacing: f64,
    /// Boundary particle spacing on the top edge.
    pub top_spacing: f64,
    /// Contact smoothing length of the boundary particles.
    pub smoothing: f64,
}

/// Where the blocks go. Block No. 1 is the first one listed (the bottom
/// course of a stack).
#[derive(Debug, Clone, PartialEq)]
pub enum Placement {
    /// One block per course starting with its lower-left corner at
    /// `origin`; each course sits on the previous one and is set back
    /// toward the soil (−x) by `width − overlap`.
    Stack {
        origin: Vec2,
        courses: usize,
        overlap: f64,
    },
    /// Explicit lower-left corners.
    List(Vec<Vec2>),
}

/// Base and lateral walls.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryConfig {
    /// Right end of the base row.
    pub base_length: f64,
    pub base_spacing: f64,
    pub young_modulus: f64,
    pub poisson_ratio: f64,
    pub left_wall: bool,
    pub right_wall: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StopperConfig {
    pub x: f64,
    pub y_min: f64,
    pub y_max: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilizationConfig {
    pub viscosity_alpha: f64,
    pub viscosity_beta: f64,
    pub artificial_stress_eps: f64,
    pub artificial_stress_exponent: f64,
}

/// Full scenario description, SI units throughout.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneConfig {
    pub name: String,
    pub gravity: Vec2,
    /// Reserved; the physics is deterministic.
    pub seed: u64,
    pub soil: SoilConfig,
    pub blocks: Option<BlockConfig>,
    pub boundary: BoundaryConfig,
    pub friction: crate::contact::FrictionMap,
    pub stabilization: StabilizationConfig,
    pub controls: crate::solver::SolverControls,
    pub stopper: Option<StopperConfig>,
    /// Pin the blocks in place while the soil settles; otherwise only the
    /// stopper restrains them.
    pub hold_blocks: bool,
    pub contact_audit: bool,
}

fn read_placement(r: &mut Reader, width: f64) -> std::result::Result<Placement, ConfigError> {
    use Dimension as D;
    if let Some((line, v)) = r.numbers("blocks.positions", D::Length)? {
        require(
            v.len() % 2 == 0,
            line,
            "`blocks.positions` needs x y pairs",
        )?;
        for key in ["blocks.origin", "blocks.courses", "blocks.overlap"] {
            if let Some((l, _)) = r.lookup(key) {
                return Err(ConfigError::at(l, format!("`{key}` conflicts with `blocks.positions`")));
            }
        }
        return Ok(Placement::List(v.chunks(2).map(|c| Vec2::new(c[0], c[1])).collect()));
    }
    let origin = r
        .vector("blocks.origin", D::Length)?
        .ok_or_else(|| ConfigError::general("missing key `blocks.origin`"))?
        .1;
    let courses = r.count("blocks.courses")?.1;
    let (o_line, overlap) = r.scalar("blocks.overlap", D::Length)?;
    require(
        overlap > 0.0 && overlap <= width,
        o_line,
        "`blocks.overlap` must be in (0, width]",
    )?;
    Ok(Placement::Stack {
        origin,
        courses,
        overlap,
    })
}

fn param(line: usize, e: Error) -> ConfigError {
    let msg = match e {
        Error::Parameter(m) | Error::InvalidInput(m) => m,
        other => other.to_string(),
    };
    if line > 0 {
        ConfigError::at(line, msg)
    } else {
        ConfigError::general(msg)
    }
}

fn require(ok: bool, line: usize, msg: impl Into<String>) -> std::result::Result<(), ConfigError> {
    if ok {
        Ok(())
    } else if line > 0 {
        Err(ConfigError::at(line, msg))
    } else {
        Err(ConfigError::general(msg))
    }
}

impl SceneConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(Self::parse(&text)?)
    }

    pub fn parse(text: &str) -> std::result::Result<Self, ConfigError> {
        let raw = RawScene::parse(text)?;
        let mut r = Reader { raw, used: Vec::new() };
        use Dimension as D;

        let name = r.lookup("scene.name").map(|(_, v)| v).unwrap_or_else(|| "scene".into());
        let gravity = r
            .vector("scene.gravity", D::Acceleration)?
            .map(|(_, v)| v)
            .unwrap_or(Vec2::new(0.0, -9.81));
        let (seed_line, seed) = r.scalar_or("scene.seed", D::None, 0.0)?;
        require(seed >= 0.0 && seed.fract() == 0.0, seed_line, "`scene.seed` must be a non-negative integer")?;

        let (poly_line, poly) = r
            .numbers("soil.polygon", D::Length)?
            .ok_or_else(|| ConfigError::general("missing key `soil.polygon`"))?;
        require(
            poly.len() % 2 == 0 && poly.len() >= 6,
            poly_line,
            "`soil.polygon` needs at least three x y pairs",
        )?;
        let polygon: Vec<Vec2> = poly.chunks(2).map(|c| Vec2::new(c[0], c[1])).collect();
        let (sp_line, spacing) = r.scalar("soil.spacing", D::Length)?;
        require(spacing > 0.0, sp_line, "`soil.spacing` must be positive")?;
        let (sr_line, smoothing_ratio) = r.scalar_or("soil.smoothing_ratio", D::None, 1.2)?;
        require(smoothing_ratio > 0.0, sr_line, "`soil.smoothing_ratio` must be positive")?;
        let soil = SoilConfig {
            polygon,
            spacing,
            smoothing_ratio,
            young_modulus: r.scalar("soil.young_modulus", D::Pressure)?.1,
            poisson_ratio: r.scalar("soil.poisson_ratio", D::None)?.1,
            cohesion: r.scalar("soil.cohesion", D::Pressure)?.1,
            friction_angle: r.scalar("soil.friction_angle", D::Angle)?.1,
            dilatancy_angle: r.scalar("soil.dilatancy_angle", D::Angle)?.1,
            unit_weight: r.scalar("soil.unit_weight", D::UnitWeight)?.1,
        };

        let blocks = if r.raw.entries.keys().any(|k| k.starts_with("blocks.")) {
            let (w_line, width) = r.scalar("blocks.width", D::Length)?;
            let (h_line, height) = r.scalar("blocks.height", D::Length)?;
            require(width > 0.0, w_line, "`blocks.width` must be positive")?;
            require(height > 0.0, h_line, "`blocks.height` must be positive")?;
            let (uw_line, unit_weight) = r.scalar("blocks.unit_weight", D::UnitWeight)?;
            require(unit_weight > 0.0, uw_line, "`blocks.unit_weight` must be positive")?;
            let particle_spacing = r.scalar_or("blocks.particle_spacing", D::Length, 0.5 * spacing)?.1;
            Some(BlockConfig {
                width,
                height,
                unit_weight,
                young_modulus: r.scalar("blocks.young_modulus", D::Pressure)?.1,
                poisson_ratio: r.scalar("blocks.poisson_ratio", D::None)?.1,
                placement: read_placement(&mut r, width)?,
                particle_spacing,
                top_spacing: r.scalar_or("blocks.top_spacing", D::Length, 0.4 * spacing)?.1,
                smoothing: r
                    .scalar_or("blocks.smoothing", D::Length, 0.5 * smoothing_ratio * spacing)?
                    .1,
            })
        } else {
            None
        };

        let (bl_line, base_length) = r.scalar("boundary.base_length", D::Length)?;
        let boundary = BoundaryConfig {
            base_length,
            base_spacing: r.scalar_or("boundary.base_spacing", D::Length, 0.4 * spacing)?.1,
            young_modulus: r.scalar("boundary.young_modulus", D::Pressure)?.1,
            poisson_ratio: r.scalar("boundary.poisson_ratio", D::None)?.1,
            left_wall: r.boolean("boundary.left_wall", true)?,
            right_wall: r.boolean("boundary.right_wall", false)?,
        };
        require(base_length > 0.0, bl_line, "`boundary.base_length` must be positive")?;

        let friction = crate::contact::FrictionMap {
            block_block: r.scalar("friction.block_block", D::None)?.1,
            block_base: r.scalar("friction.block_base", D::None)?.1,
            block_soil: r.scalar("friction.block_soil", D::None)?.1,
        };
        friction.validate().map_err(|e| param(0, e))?;

        let stabilization = StabilizationConfig {
            viscosity_alpha: r.scalar_or("stabilization.viscosity_alpha", D::None, 0.1)?.1,
            viscosity_beta: r.scalar_or("stabilization.viscosity_beta", D::None, 0.1)?.1,
            artificial_stress_eps: r.scalar_or("stabilization.artificial_stress_eps", D::None, 0.3)?.1,
            artificial_stress_exponent: r
                .scalar_or("stabilization.artificial_stress_exponent", D::None, 2.55)?
                .1,
        };

        let defaults = crate::solver::SolverControls::default();
        let controls = crate::solver::SolverControls {
            cfl_factor: r.scalar_or("solver.cfl_factor", D::None, defaults.cfl_factor)?.1,
            dt_max: r.scalar_or("solver.dt_max", D::Time, defaults.dt_max)?.1,
            t_end: r.scalar("solver.t_end", D::Time)?.1,
            snapshot_interval: r
                .scalar_or("solver.snapshot_interval", D::Time, defaults.snapshot_interval)?
                .1,
            damping_phase_duration: r
                .scalar_or("solver.settling_duration", D::Time, defaults.damping_phase_duration)?
                .1,
            damping_coefficient: r
                .scalar_or("solver.settling_damping", D::Rate, defaults.damping_coefficient)?
                .1,
        };
        controls.validate().map_err(|e| param(0, e))?;

        let stopper = match r.opt_scalar("stopper.x", D::Length)? {
            None => None,
            Some((_, x)) => {
                let (l0, y_min) = r.scalar("stopper.y_min", D::Length)?;
                let (_, y_max) = r.scalar("stopper.y_max", D::Length)?;
                require(y_max > y_min, l0, "`stopper.y_max` must exceed `stopper.y_min`")?;
                Some(StopperConfig { x, y_min, y_max })
            }
        };
        let hold_blocks = r.boolean("solver.hold_blocks", false)?;
        let contact_audit = r.boolean("output.contact_audit", false)?;

        if let Some((line, key)) = r.unused() {
            return Err(ConfigError::at(line, format!("unknown key `{key}`")));
        }

        let cfg = SceneConfig {
            name,
            gravity,
            seed: seed as u64,
            soil,
            blocks,
            boundary,
            friction,
            stabilization,
            controls,
            stopper,
            hold_blocks,
            contact_audit,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Cross-field checks.
    pub fn validate(&self) -> std::result::Result<(), ConfigError> {
        crate::constitutive::MaterialParams::new(
            self.soil.young_modulus,
            self.soil.poisson_ratio,
            self.soil.cohesion,
            self.soil.friction_angle,
            self.soil.dilatancy_angle,
            self.soil.unit_weight,
        )
        .map_err(|e| param(0, e))?;
        crate::particles::Polygon::new(self.soil.polygon.clone()).map_err(|e| param(0, e))?;
        if let Some(b) = &self.blocks {
            let count = match &b.placement {
                Placement::Stack { courses, .. } => *courses,
                Placement::List(v) => v.len(),
            };
            require(count > 0, 0, "the scene needs at least one block")?;
            for (name, v) in [
                ("blocks.particle_spacing", b.particle_spacing),
                ("blocks.top_spacing", b.top_spacing),
                ("blocks.smoothing", b.smoothing),
                ("blocks.young_modulus", b.young_modulus),
            ] {
                require(v > 0.0, 0, format!("`{name}` must be positive"))?;
            }
            require(
                (0.0..0.5).contains(&b.poisson_ratio),
                0,
                "`blocks.poisson_ratio` must be in [0, 0.5)",
            )?;
            let rects = self.block_rectangles();
            for i in 0..rects.len() {
                for j in i + 1..rects.len() {
                    let (a, c) = (rects[i], rects[j]);
                    let ox = a.1.x.min(c.1.x) - a.0.x.max(c.0.x);
                    let oy = a.1.y.min(c.1.y) - a.0.y.max(c.0.y);
                    if ox > 1e-9 && oy > 1e-9 {
                        return Err(ConfigError::general(format!(
                            "blocks {} and {} overlap",
                            i + 1,
                            j + 1
                        )));
                    }
                }
            }
        }
        require(self.boundary.base_spacing > 0.0, 0, "`boundary.base_spacing` must be positive")?;
        require(
            self.boundary.young_modulus > 0.0,
            0,
            "`boundary.young_modulus` must be positive",
        )?;
        require(
            (0.0..0.5).contains(&self.boundary.poisson_ratio),
            0,
            "`boundary.poisson_ratio` must be in [0, 0.5)",
        )?;
        Ok(())
    }

    /// `(min, max)` corners of every block at its initial position, bottom
    /// course first.
    pub fn block_rectangles(&self) -> Vec<(Vec2, Vec2)> {
        let Some(b) = &self.blocks else {
            return Vec::new();
        };
        let size = Vec2::new(b.width, b.height);
        match &b.placement {
            Placement::Stack {
                origin,
                courses,
                overlap,
            } => (0..*courses)
                .map(|k| {
                    let k = k as f64;
                    let min = origin + Vec2::new(-k * (b.width - overlap), k * b.height);
                    (min, min + size)
                })
                .collect(),
            Placement::List(v) => v.iter().map(|&p| (p, p + size)).collect(),
        }
    }

    /// Writes the scene back in file form with SI units.
    pub fn serialize(&self) -> String {
        let mut s = String::new();
        let num = |v: f64| format!("{v:?}");
        let _ = writeln!(s, "[scene]");
        let _ = writeln!(s, "name = {}", self.name);
        let _ = writeln!(s, "gravity = {} {} m/s2", num(self.gravity.x), num(self.gravity.y));
        let _ = writeln!(s, "seed = {}", self.seed);

        let soil = &self.soil;
        let _ = writeln!(s, "\n[soil]");
        let pts: Vec<String> = soil
            .polygon
            .iter()
            .map(|p| format!("{} {}", num(p.x), num(p.y)))
            .collect();
        let _ = writeln!(s, "polygon = {} m", pts.join(", "));
        let _ = writeln!(s, "spacing = {} m", num(soil.spacing));
        let _ = writeln!(s, "smoothing_ratio = {}", num(soil.smoothing_ratio));
        let _ = writeln!(s, "young_modulus = {} Pa", num(soil.young_modulus));
        let _ = writeln!(s, "poisson_ratio = {}", num(soil.poisson_ratio));
        let _ = writeln!(s, "cohesion = {} Pa", num(soil.cohesion));
        let _ = writeln!(s, "friction_angle = {} rad", num(soil.friction_angle));
        let _ = writeln!(s, "dilatancy_angle = {} rad", num(soil.dilatancy_angle));
        let _ = writeln!(s, "unit_weight = {} N/m3", num(soil.unit_weight));

        if let Some(b) = &self.blocks {
            let _ = writeln!(s, "\n[blocks]");
            let _ = writeln!(s, "width = {} m", num(b.width));
            let _ = writeln!(s, "height = {} m", num(b.height));
            let _ = writeln!(s, "unit_weight = {} N/m3", num(b.unit_weight));
            let _ = writeln!(s, "young_modulus = {} Pa", num(b.young_modulus));
            let _ = writeln!(s, "poisson_ratio = {}", num(b.poisson_ratio));
            match &b.placement {
                Placement::Stack {
                    origin,
                    courses,
                    overlap,
                } => {
                    let _ = writeln!(s, "origin = {} {} m", num(origin.x), num(origin.y));
                    let _ = writeln!(s, "courses = {courses}");
                    let _ = writeln!(s, "overlap = {} m", num(*overlap));
                }
                Placement::List(v) => {
                    let pts: Vec<String> =
                        v.iter().map(|p| format!("{} {}", num(p.x), num(p.y))).collect();
                    let _ = writeln!(s, "positions = {} m", pts.join(", "));
                }
            }
            let _ = writeln!(s, "particle_spacing = {} m", num(b.particle_spacing));
            let _ = writeln!(s, "top_spacing = {} m", num(b.top_spacing));
            let _ = writeln!(s, "smoothing = {} m", num(b.smoothing));
        }

        let bd = &self.boundary;
        let _ = writeln!(s, "\n[boundary]");
        let _ = writeln!(s, "base_length = {} m", num(bd.base_length));
        let _ = writeln!(s, "base_spacing = {} m", num(bd.base_spacing));
        let _ = writeln!(s, "young_modulus = {} Pa", num(bd.young_modulus));
        let _ = writeln!(s, "poisson_ratio = {}", num(bd.poisson_ratio));
        let _ = writeln!(s, "left_wall = {}", bd.left_wall);
        let _ = writeln!(s, "right_wall = {}", bd.right_wall);

        let f = &self.friction;
        let _ = writeln!(s, "\n[friction]");
        let _ = writeln!(s, "block_block = {}", num(f.block_block));
        let _ = writeln!(s, "block_base = {}", num(f.block_base));
        let _ = writeln!(s, "block_soil = {}", num(f.block_soil));

        let st = &self.stabilization;
        let _ = writeln!(s, "\n[stabilization]");
        let _ = writeln!(s, "viscosity_alpha = {}", num(st.viscosity_alpha));
        let _ = writeln!(s, "viscosity_beta = {}", num(st.viscosity_beta));
        let _ = writeln!(s, "artificial_stress_eps = {}", num(st.artificial_stress_eps));
        let _ = writeln!(s, "artificial_stress_exponent = {}", num(st.artificial_stress_exponent));

        let c = &self.controls;
        let _ = writeln!(s, "\n[solver]");
        let _ = writeln!(s, "cfl_factor = {}", num(c.cfl_factor));
        let _ = writeln!(s, "dt_max = {} s", num(c.dt_max));
        let _ = writeln!(s, "t_end = {} s", num(c.t_end));
        let _ = writeln!(s, "snapshot_interval = {} s", num(c.snapshot_interval));
        let _ = writeln!(s, "settling_duration = {} s", num(c.damping_phase_duration));
        let _ = writeln!(s, "settling_damping = {} 1/s", num(c.damping_coefficient));
        let _ = writeln!(s, "hold_blocks = {}", self.hold_blocks);

        if let Some(st) = &self.stopper {
            let _ = writeln!(s, "\n[stopper]");
            let _ = writeln!(s, "x = {} m", num(st.x));
            let _ = writeln!(s, "y_min = {} m", num(st.y_min));
            let _ = writeln!(s, "y_max = {} m", num(st.y_max));
        }
        let _ = writeln!(s, "\n[output]");
        let _ = writeln!(s, "contact_audit = {}", self.contact_audit);
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const MINIMAL: &str = "
[soil]
polygon = 0 0, 10 0, 10 10, 0 10 cm
spacing = 0.5 cm
young_modulus = 1.5 MPa
poisson_ratio = 0.3
cohesion = 0 kPa
friction_angle = 19.8 deg
dilatancy_angle = 0 deg
unit_weight = 23 kN/m3

[boundary]
base_length = 20 cm
young_modulus = 69 GPa
poisson_ratio = 0.33

[friction]
block_block = 0.62
block_base = 0.60
block_soil = 0.56

[solver]
t_end = 0.1 s
";

    #[test]
    fn units_are_converted() {
        let c = SceneConfig::parse(MINIMAL).unwrap();
        assert_eq!(c.soil.spacing, 0.005);
        assert_eq!(c.soil.young_modulus, 1.5e6);
        assert_eq!(c.soil.unit_weight, 23e3);
        assert!((c.soil.friction_angle - 19.8f64.to_radians()).abs() < 1e-15);
        assert_eq!(c.soil.polygon[2], Vec2::new(0.1, 0.1));
        assert_eq!(c.gravity, Vec2::new(0.0, -9.81));
        assert!(c.blocks.is_none());
    }

    #[test]
    fn empty_file_names_first_missing_key() {
        let e = SceneConfig::parse("").unwrap_err();
        assert!(e.message.contains("soil.polygon"), "{e}");
    }

    #[test]
    fn missing_unit_is_line_anchored() {
        let text = MINIMAL.replace("spacing = 0.5 cm", "spacing = 0.5");
        let e = SceneConfig::parse(&text).unwrap_err();
        assert_eq!(e.line, Some(4));
        assert!(e.message.contains("needs a unit"));
    }

    #[test]
    fn wrong_unit_rejected() {
        let text = MINIMAL.replace("23 kN/m3", "23 kPa");
        let e = SceneConfig::parse(&text).unwrap_err();
        assert!(e.message.contains("kPa"), "{e}");
    }

    #[test]
    fn unknown_and_duplicate_keys() {
        let e = SceneConfig::parse(&format!("{MINIMAL}\n[solver]\ncfl = 0.1\n")).unwrap_err();
        assert!(e.message.contains("unknown key `solver.cfl`"), "{e}");
        let e = SceneConfig::parse(&format!("{MINIMAL}\n[solver]\nt_end = 1 s\n")).unwrap_err();
        assert!(e.message.contains("duplicate"), "{e}");
    }

    const BLOCKS: &str = "
[blocks]
width = 3.2 cm
height = 2.5 cm
unit_weight = 26.5 kN/m3
young_modulus = 69 GPa
poisson_ratio = 0.33
origin = 10 0 cm
courses = 2
overlap = 1.9 cm
";

    #[test]
    fn stack_setback_per_course() {
        let c = SceneConfig::parse(&format!("{MINIMAL}{BLOCKS}")).unwrap();
        let r = c.block_rectangles();
        assert_eq!(r.len(), 2);
        assert!((r[1].0.x - (0.1 - 0.013)).abs() < 1e-12);
        assert!((r[1].0.y - 0.025).abs() < 1e-12);
        // overlap between consecutive courses is the configured 1.9 cm
        assert!(((r[0].1.x.min(r[1].1.x) - r[0].0.x.max(r[1].0.x)) - 0.019).abs() < 1e-12);
    }

    #[test]
    fn overlapping_blocks_rejected() {
        let list = BLOCKS
            .replace("origin = 10 0 cm\ncourses = 2\noverlap = 1.9 cm", "positions = 10 0, 12 1 cm");
        let e = SceneConfig::parse(&format!("{MINIMAL}{list}")).unwrap_err();
        assert!(e.message.contains("overlap"), "{e}");
        let ok = list.replace("12 1 cm", "13.2 0 cm");
        assert!(SceneConfig::parse(&format!("{MINIMAL}{ok}")).is_ok());
    }

    #[test]
    fn round_trip_with_blocks() {
        let c = SceneConfig::parse(&format!("{MINIMAL}{BLOCKS}")).unwrap();
        assert_eq!(c, SceneConfig::parse(&c.serialize()).unwrap());
    }

    #[test]
    fn round_trip() {
        let c = SceneConfig::parse(MINIMAL).unwrap();
        let again = SceneConfig::parse(&c.serialize()).unwrap();
        assert_eq!(c, again);
    }
}
