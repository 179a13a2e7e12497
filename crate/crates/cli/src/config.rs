//! Sectioned `key = value` experiment files.
//!
//! ```text
//! [experiment]
//! method = perfectmem
//!
//! [world]
//! seed = 42
//!
//! [perfectmem]
//! frequencies = 1, 2, 4, 20
//! ```
//!
//! Unknown sections and keys are rejected so typos surface as errors.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use antnav_core::imgcore::PreprocessConfig;
use antnav_core::mlpnav::{Activation, CornerBoost, MlpConfig, SearchSpace, Solver};
use antnav_core::world::{
    default_l_polyline, default_route_polyline, rounded_polyline, WorldSpec, DEFAULT_PITCH,
    DEFAULT_RADIUS, DEFAULT_SPACING,
};

use crate::CliError;

#[derive(Clone, Debug, PartialEq)]
struct Entry {
    key: String,
    value: String,
    line: usize,
}

#[derive(Clone, Debug, PartialEq)]
struct Section {
    name: String,
    line: usize,
    entries: Vec<Entry>,
}

fn parse_sections(text: &str) -> Result<Vec<Section>, CliError> {
    let mut sections: Vec<Section> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let s = raw.split_once('#').map_or(raw, |(a, _)| a).trim();
        if s.is_empty() {
            continue;
        }
        if let Some(name) = s.strip_prefix('[') {
            let name = name
                .strip_suffix(']')
                .ok_or_else(|| CliError::config_at(line, "unterminated section header"))?
                .trim();
            if sections.iter().any(|sec| sec.name == name) {
                return Err(CliError::config_at(
                    line,
                    format!("duplicate section [{name}]"),
                ));
            }
            sections.push(Section {
                name: name.to_string(),
                line,
                entries: Vec::new(),
            });
            continue;
        }
        let (key, value) = s
            .split_once('=')
            .ok_or_else(|| CliError::config_at(line, format!("expected key = value, got {s:?}")))?;
        let section = sections
            .last_mut()
            .ok_or_else(|| CliError::config_at(line, "key outside of any [section]"))?;
        let key = key.trim().to_string();
        if section.entries.iter().any(|e| e.key == key) {
            return Err(CliError::config_at(line, format!("duplicate key {key}")));
        }
        section.entries.push(Entry {
            key,
            value: value.trim().to_string(),
            line,
        });
    }
    Ok(sections)
}

/// Typed access to one section that remembers which keys were read.
struct Reader<'a> {
    section: Option<&'a Section>,
    used: BTreeSet<&'a str>,
}

impl<'a> Reader<'a> {
    fn new(sections: &'a [Section], name: &str) -> Self {
        Self {
            section: sections.iter().find(|s| s.name == name),
            used: BTreeSet::new(),
        }
    }

    fn entry(&mut self, key: &'static str) -> Option<&'a Entry> {
        let e = self.section?.entries.iter().find(|e| e.key == key)?;
        self.used.insert(key);
        Some(e)
    }

    fn get<T: std::str::FromStr>(&mut self, key: &'static str) -> Result<Option<T>, CliError> {
        match self.entry(key) {
            None => Ok(None),
            Some(e) => e.value.parse().map(Some).map_err(|_| {
                CliError::config_at(e.line, format!("invalid value {:?} for {key}", e.value))
            }),
        }
    }

    fn or<T: std::str::FromStr>(&mut self, key: &'static str, default: T) -> Result<T, CliError> {
        Ok(self.get(key)?.unwrap_or(default))
    }

    /// Comma-separated list.
    fn list<T: std::str::FromStr>(
        &mut self,
        key: &'static str,
    ) -> Result<Option<Vec<T>>, CliError> {
        self.list_sep(key, ',')
    }

    fn list_sep<T: std::str::FromStr>(
        &mut self,
        key: &'static str,
        sep: char,
    ) -> Result<Option<Vec<T>>, CliError> {
        let Some(e) = self.entry(key) else {
            return Ok(None);
        };
        let items = e
            .value
            .split(sep)
            .map(|s| s.trim())
            .filter(|s| !s.is_empty())
            .map(|s| {
                s.parse().map_err(|_| {
                    CliError::config_at(e.line, format!("invalid list item {s:?} for {key}"))
                })
            })
            .collect::<Result<Vec<T>, _>>()?;
        if items.is_empty() {
            return Err(CliError::config_at(
                e.line,
                format!("{key} must not be empty"),
            ));
        }
        Ok(Some(items))
    }

    fn line_of(&self, key: &str) -> usize {
        self.section
            .and_then(|s| s.entries.iter().find(|e| e.key == key))
            .map_or_else(|| self.section.map_or(0, |s| s.line), |e| e.line)
    }

    fn finish(self) -> Result<(), CliError> {
        if let Some(s) = self.section {
            if let Some(e) = s
                .entries
                .iter()
                .find(|e| !self.used.contains(e.key.as_str()))
            {
                return Err(CliError::config_at(
                    e.line,
                    format!("unknown key {} in [{}]", e.key, s.name),
                ));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    Compass,
    PerfectMemory,
    Mlp,
}

impl Method {
    fn section(self) -> &'static str {
        match self {
            Method::Compass => "compass",
            Method::PerfectMemory => "perfectmem",
            Method::Mlp => "mlp",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum WorldSource {
    /// Generate from a spec.
    Spec(WorldSpec),
    /// Load a database written by `gen-world`.
    Database(PathBuf),
}

#[derive(Clone, Debug, PartialEq)]
pub struct CompassBlock {
    /// Route index of the goal snapshot.
    pub snapshot: usize,
    pub max_distance: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PerfectMemoryBlock {
    pub frequency: usize,
    pub frequencies: Vec<usize>,
    pub factors: Vec<usize>,
    pub sigmas: Vec<f64>,
}

/// Scan arc: full circle, or `len` degrees centred on the route direction.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ArcSpec {
    Full,
    Forward(f64),
}

impl ArcSpec {
    pub fn len_deg(&self) -> f64 {
        match self {
            ArcSpec::Full => 360.0,
            ArcSpec::Forward(l) => *l,
        }
    }
}

impl std::str::FromStr for ArcSpec {
    type Err = ();
    fn from_str(s: &str) -> Result<Self, ()> {
        let len: f64 = s.parse().map_err(|_| ())?;
        if len >= 360.0 {
            Ok(ArcSpec::Full)
        } else if len > 0.0 {
            Ok(ArcSpec::Forward(len))
        } else {
            Err(())
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MlpBlock {
    pub config: MlpConfig,
    pub frequency: usize,
    /// Train on only the first this-many retained snapshots.
    pub snapshot_limit: Option<usize>,
    pub negative_angle: f64,
    pub corner: CornerBoost,
    pub arcs: Vec<ArcSpec>,
    pub folds: usize,
    pub space: SearchSpace,
    pub model: Option<PathBuf>,
    /// Route indices whose confidence curves `mlp-confidence` plots.
    pub confidence_snapshots: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub method: Option<Method>,
    pub out: Option<PathBuf>,
    pub world: WorldSource,
    pub polyline: Vec<(f64, f64)>,
    pub spacing: f64,
    pub grid_radius: f64,
    pub grid_pitch: f64,
    pub preprocess: PreprocessConfig,
    pub compass: CompassBlock,
    pub perfectmem: PerfectMemoryBlock,
    pub mlp: MlpBlock,
}

const SECTIONS: [&str; 8] = [
    "experiment",
    "world",
    "route",
    "grid",
    "preprocess",
    "compass",
    "perfectmem",
    "mlp",
];

/// `20` or `20x10` for two hidden layers.
fn parse_hidden(s: &str) -> Option<Vec<usize>> {
    let widths: Option<Vec<usize>> = s.split('x').map(|w| w.trim().parse().ok()).collect();
    widths.filter(|w| !w.is_empty() && w.iter().all(|&n| n > 0))
}

fn parse_polyline(value: &str, line: usize) -> Result<Vec<(f64, f64)>, CliError> {
    match value {
        "default" => return Ok(default_route_polyline()),
        "l" | "L" => return Ok(default_l_polyline()),
        _ => {}
    }
    value
        .split(';')
        .map(|pt| {
            let (x, y) = pt
                .split_once(',')
                .ok_or_else(|| CliError::config_at(line, format!("point {pt:?} is not x,y")))?;
            let p = |s: &str| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|_| CliError::config_at(line, format!("bad coordinate {s:?}")))
            };
            Ok((p(x)?, p(y)?))
        })
        .collect()
}

fn resolve(base: &Path, p: &str) -> PathBuf {
    let p = PathBuf::from(p);
    if p.is_absolute() {
        p
    } else {
        base.join(p)
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base)
    }

    /// Relative paths resolve against `base`.
    pub fn parse(text: &str, base: &Path) -> Result<Self, CliError> {
        let sections = parse_sections(text)?;
        if let Some(s) = sections
            .iter()
            .find(|s| !SECTIONS.contains(&s.name.as_str()))
        {
            return Err(CliError::config_at(
                s.line,
                format!("unknown section [{}]", s.name),
            ));
        }

        let mut r = Reader::new(&sections, "experiment");
        let method = match r.entry("method") {
            None => None,
            Some(e) => Some(match e.value.as_str() {
                "compass" => Method::Compass,
                "perfectmem" => Method::PerfectMemory,
                "mlp" => Method::Mlp,
                other => {
                    return Err(CliError::config_at(
                        e.line,
                        format!("unknown method {other:?}"),
                    ))
                }
            }),
        };
        let out = r.get::<String>("out")?.map(|p| resolve(base, &p));
        r.finish()?;
        // only the selected method's block may appear
        for m in [Method::Compass, Method::PerfectMemory, Method::Mlp] {
            if Some(m) != method {
                if let Some(s) = sections.iter().find(|s| s.name == m.section()) {
                    return Err(CliError::config_at(
                        s.line,
                        format!("[{}] block present but method is not {}", s.name, s.name),
                    ));
                }
            }
        }

        let mut r = Reader::new(&sections, "world");
        let world = if let Some(e) = r.entry("database") {
            let p = resolve(base, &e.value);
            if !p.is_dir() {
                return Err(CliError::config_at(
                    e.line,
                    format!("database {} not found", p.display()),
                ));
            }
            WorldSource::Database(p)
        } else {
            let mut spec = match r.entry("spec") {
                Some(e) => {
                    let p = resolve(base, &e.value);
                    let text = std::fs::read_to_string(&p).map_err(|err| {
                        CliError::config_at(
                            e.line,
                            format!("cannot read spec {}: {err}", p.display()),
                        )
                    })?;
                    WorldSpec::from_kv_text(&text).map_err(|msg| {
                        CliError::config_at(e.line, format!("{}: {msg}", p.display()))
                    })?
                }
                None => WorldSpec::default(),
            };
            spec.seed = r.or("seed", spec.seed)?;
            spec.objects = r.or("objects", spec.objects)?;
            spec.extent = r.or("extent_mm", spec.extent)?;
            spec.panorama_width = r.or("panorama_width", spec.panorama_width)?;
            spec.panorama_height = r.or("panorama_height", spec.panorama_height)?;
            spec.eye_height = r.or("eye_height_mm", spec.eye_height)?;
            spec.validate()
                .map_err(|e| CliError::config_at(r.line_of("seed"), e.to_string()))?;
            WorldSource::Spec(spec)
        };
        r.finish()?;

        let mut r = Reader::new(&sections, "route");
        let polyline = match r.entry("polyline") {
            None => default_route_polyline(),
            Some(e) => parse_polyline(&e.value, e.line)?,
        };
        let fillet: f64 = r.or("fillet_mm", 0.0)?;
        let polyline = if fillet > 0.0 {
            rounded_polyline(&polyline, fillet)
        } else {
            polyline
        };
        let spacing = r.or("spacing_mm", DEFAULT_SPACING)?;
        if !(spacing > 0.0) {
            return Err(CliError::config_at(
                r.line_of("spacing_mm"),
                "spacing_mm must be positive",
            ));
        }
        r.finish()?;

        let mut r = Reader::new(&sections, "grid");
        let grid_radius = r.or("radius_mm", DEFAULT_RADIUS)?;
        let grid_pitch = r.or("pitch_mm", DEFAULT_PITCH)?;
        if !(grid_radius > 0.0 && grid_pitch > 0.0) {
            return Err(CliError::config_at(
                r.line_of("radius_mm"),
                "grid radius and pitch must be positive",
            ));
        }
        r.finish()?;

        let mut r = Reader::new(&sections, "preprocess");
        let preprocess = PreprocessConfig::new(r.or("sigma", 1.0)?, r.or("factor", 4)?);
        preprocess
            .validate()
            .map_err(|e| CliError::config_at(r.line_of("factor"), e.to_string()))?;
        r.finish()?;

        let mut r = Reader::new(&sections, "compass");
        let compass = CompassBlock {
            snapshot: r.or("snapshot", 40)?,
            max_distance: r.or("max_distance_mm", 500.0)?,
        };
        r.finish()?;

        let mut r = Reader::new(&sections, "perfectmem");
        let perfectmem = PerfectMemoryBlock {
            frequency: r.or("frequency", 1)?,
            frequencies: r
                .list("frequencies")?
                .unwrap_or_else(|| vec![1, 2, 4, 6, 10, 20]),
            factors: r
                .list("factors")?
                .unwrap_or_else(|| vec![2, 3, 4, 6, 10, 20, 45, 90]),
            sigmas: r.list("sigmas")?.unwrap_or_else(|| vec![0.0, 1.0]),
        };
        if perfectmem.frequency == 0 || perfectmem.frequencies.contains(&0) {
            return Err(CliError::config_at(
                r.line_of("frequency"),
                "frequencies must be >= 1",
            ));
        }
        r.finish()?;

        let mlp = Self::parse_mlp(&sections, base)?;
        Ok(Self {
            method,
            out,
            world,
            polyline,
            spacing,
            grid_radius,
            grid_pitch,
            preprocess,
            compass,
            perfectmem,
            mlp,
        })
    }

    fn parse_mlp(sections: &[Section], base: &Path) -> Result<MlpBlock, CliError> {
        let mut r = Reader::new(sections, "mlp");
        let hidden_line = r.line_of("hidden");
        let hidden = match r.get::<String>("hidden")? {
            None => vec![20],
            Some(s) => parse_hidden(&s).ok_or_else(|| {
                CliError::config_at(hidden_line, format!("invalid hidden layers {s:?}"))
            })?,
        };
        let act_line = r.line_of("activation");
        let config = MlpConfig {
            hidden_layers: hidden,
            activation: r
                .or("activation", "tanh".to_string())?
                .parse()
                .map_err(|e: String| CliError::config_at(act_line, e))?,
            solver: r
                .or("solver", "adam".to_string())?
                .parse()
                .map_err(|e: String| CliError::config_at(r.line_of("solver"), e))?,
            learning_rate: r.or("learning_rate", 1e-3)?,
            tol: r.or("tol", 0.0)?,
            max_iter: r.or("max_iter", 1000)?,
            seed: r.or("seed", 1)?,
            batch: r.or("batch", 200)?,
        };
        config
            .validate()
            .map_err(|e| CliError::config_at(r.line_of("learning_rate"), e.to_string()))?;
        let line = r.line_of("search_hidden");
        let search_hidden = match r.list_sep::<String>("search_hidden", ';')? {
            None => vec![vec![10], vec![20], vec![20, 20]],
            Some(items) => items
                .iter()
                .map(|s| parse_hidden(s))
                .collect::<Option<Vec<_>>>()
                .ok_or_else(|| CliError::config_at(line, "invalid search_hidden entry"))?,
        };
        let line = r.line_of("search_activation");
        let search_activation = r
            .list::<String>("search_activation")?
            .unwrap_or_else(|| vec!["tanh".into(), "relu".into()])
            .iter()
            .map(|s| s.parse::<Activation>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| CliError::config_at(line, e))?;
        let line = r.line_of("search_solver");
        let search_solver = r
            .list::<String>("search_solver")?
            .unwrap_or_else(|| vec!["adam".into()])
            .iter()
            .map(|s| s.parse::<Solver>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| CliError::config_at(line, e))?;
        let space = SearchSpace {
            hidden_layers: search_hidden,
            activation: search_activation,
            solver: search_solver,
            tol: r.list("search_tol")?.unwrap_or_else(|| vec![0.0]),
            learning_rate: r
                .list("search_learning_rate")?
                .unwrap_or_else(|| vec![1e-2, 1e-3]),
            base: config.clone(),
        };
        let model = match r.entry("model") {
            None => None,
            Some(e) => {
                let p = resolve(base, &e.value);
                if !p.is_file() {
                    return Err(CliError::config_at(
                        e.line,
                        format!("model {} not found", p.display()),
                    ));
                }
                Some(p)
            }
        };
        let arcs_line = r.line_of("arcs");
        let block = MlpBlock {
            frequency: r.or("frequency", 2)?,
            snapshot_limit: r.get("snapshot_limit")?,
            negative_angle: r.or("negative_angle", 60.0)?,
            corner: CornerBoost {
                threshold_deg: r.or("corner_threshold", 15.0)?,
                frequency: r.or("corner_frequency", 3)?,
            },
            arcs: r
                .list::<String>("arcs")?
                .unwrap_or_else(|| vec!["360".into(), "180".into(), "90".into()])
                .iter()
                .map(|s| s.parse::<ArcSpec>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|_| CliError::config_at(arcs_line, "arcs must be lengths in (0, 360]"))?,
            folds: r.or("folds", 3)?,
            space,
            model,
            confidence_snapshots: r.list("confidence_snapshots")?.unwrap_or_else(|| vec![0]),
            config,
        };
        if block.frequency == 0 || block.corner.frequency == 0 {
            return Err(CliError::config_at(
                r.line_of("frequency"),
                "frequencies must be >= 1",
            ));
        }
        if !(block.negative_angle > 0.0 && block.negative_angle < 180.0) {
            return Err(CliError::config_at(
                r.line_of("negative_angle"),
                "negative_angle must lie in (0, 180)",
            ));
        }
        if block.folds < 2 {
            return Err(CliError::config_at(
                r.line_of("folds"),
                "folds must be >= 2",
            ));
        }
        r.finish()?;
        Ok(block)
    }

    /// Applies a `--seed` override to a generated world.
    pub fn with_seed(mut self, seed: u64) -> Result<Self, CliError> {
        match &mut self.world {
            WorldSource::Spec(spec) => spec.seed = seed,
            WorldSource::Database(_) => {
                return Err(CliError::Config(
                    "--seed cannot override a world loaded from a database".into(),
                ))
            }
        }
        Ok(self)
    }
}
