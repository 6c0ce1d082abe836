//! Line-based `key = value` configuration with `[section]` headers and `#` comments.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use crate::error::{FsiError, Result};
use crate::mesh::GeometryParams;
use crate::online_rom::{MonoSizes, PartSizes};
use crate::params::{NewmarkForm, PhysicalParams, TimeParamsMono, TimeParamsPart};
use crate::reduction::PodSelect;

pub const SECTIONS: [&str; 8] = ["geometry", "physics", "time_monolithic", "time_partitioned", "fem", "pod", "online", "io"];

#[derive(Debug, Clone, PartialEq)]
pub struct FemConfig {
    pub pressure_order: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PodConfig {
    /// Truncation applied by `reduce`; `online` sizes truncate further.
    pub select: PodSelect,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OnlineConfig {
    pub mono: MonoSizes,
    pub part: PartSizes,
    /// Offline step the reduced run restarts from.
    pub start_step: usize,
    pub n_steps: usize,
    pub newton_tol: f64,
    pub eps: f64,
    /// Abort once the reduced pressure norm exceeds this multiple of the offline maximum.
    pub pressure_limit_factor: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IoConfig {
    /// Coefficient CSV and reconstructed fields are written every this many steps.
    pub write_every: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub path: PathBuf,
    pub geometry: GeometryParams,
    pub physics: PhysicalParams,
    pub time_monolithic: TimeParamsMono,
    pub time_partitioned: TimeParamsPart,
    pub fem: FemConfig,
    pub pod: PodConfig,
    pub online: OnlineConfig,
    pub io: IoConfig,
    /// Sections that appeared in the file.
    pub present: BTreeSet<String>,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            path: PathBuf::new(),
            geometry: GeometryParams::default(),
            physics: PhysicalParams::benchmark(),
            time_monolithic: TimeParamsMono::default(),
            time_partitioned: TimeParamsPart::default(),
            fem: FemConfig { pressure_order: 1 },
            pod: PodConfig { select: PodSelect::All },
            online: OnlineConfig {
                mono: MonoSizes::default(),
                part: PartSizes::default(),
                start_step: 0,
                n_steps: 100,
                newton_tol: 6e-6,
                eps: 1e-5,
                pressure_limit_factor: None,
            },
            io: IoConfig { write_every: 1 },
            present: BTreeSet::new(),
        }
    }
}

/// One `key = value` entry with its line number.
#[derive(Debug, Clone)]
struct Entry {
    line: usize,
    value: String,
}

struct Reader<'a> {
    path: &'a Path,
    section: &'a str,
    entries: BTreeMap<String, Entry>,
}

impl Reader<'_> {
    fn err(&self, line: usize, msg: String) -> FsiError {
        FsiError::Parse { path: self.path.to_path_buf(), line, msg }
    }

    fn get<T: std::str::FromStr>(&mut self, key: &str, kind: &str, out: &mut T) -> Result<()> {
        if let Some(e) = self.entries.remove(key) {
            *out = e
                .value
                .parse()
                .map_err(|_| self.err(e.line, format!("[{}] {key}: expected {kind}, got '{}'", self.section, e.value)))?;
        }
        Ok(())
    }

    fn f64(&mut self, key: &str, out: &mut f64) -> Result<()> {
        self.get(key, "a number", out)
    }

    fn usize(&mut self, key: &str, out: &mut usize) -> Result<()> {
        self.get(key, "a non-negative integer", out)
    }

    fn line_of(&self, key: &str) -> Option<usize> {
        self.entries.get(key).map(|e| e.line)
    }

    /// Rejects whatever was not consumed.
    fn finish(self) -> Result<()> {
        match self.entries.iter().min_by_key(|(_, e)| e.line) {
            Some((k, e)) => Err(self.err(e.line, format!("unknown key '{k}' in [{}]", self.section))),
            None => Ok(()),
        }
    }
}

/// Parses `text`; `path` only labels errors. Omitted keys keep the benchmark defaults;
/// physical values are given in table units and converted to SI.
pub fn parse_config_str(text: &str, path: &Path) -> Result<Config> {
    let perr = |line: usize, msg: String| FsiError::Parse { path: path.to_path_buf(), line, msg };
    let mut sections: BTreeMap<String, (usize, BTreeMap<String, Entry>)> = BTreeMap::new();
    let mut current: Option<String> = None;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let s = raw.split('#').next().unwrap_or("").trim();
        if s.is_empty() {
            continue;
        }
        if let Some(name) = s.strip_prefix('[') {
            let name = name.strip_suffix(']').ok_or_else(|| perr(line, format!("malformed section header '{s}'")))?.trim();
            if !SECTIONS.contains(&name) {
                return Err(perr(line, format!("unknown section [{name}]")));
            }
            if sections.insert(name.to_string(), (line, BTreeMap::new())).is_some() {
                return Err(perr(line, format!("duplicate section [{name}]")));
            }
            current = Some(name.to_string());
            continue;
        }
        let (k, v) = s.split_once('=').ok_or_else(|| perr(line, format!("expected 'key = value', got '{s}'")))?;
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() {
            return Err(perr(line, "empty key".into()));
        }
        let sec = current.as_ref().ok_or_else(|| perr(line, format!("key '{k}' outside any section")))?;
        let entries = &mut sections.get_mut(sec).expect("current section exists").1;
        if entries.insert(k.to_string(), Entry { line, value: v.to_string() }).is_some() {
            return Err(perr(line, format!("duplicate key '{k}' in [{sec}]")));
        }
    }

    let mut cfg = Config { path: path.to_path_buf(), present: sections.keys().cloned().collect(), ..Config::default() };
    let mut take = |name: &'static str| -> (usize, Reader<'_>) {
        let (line, entries) = sections.remove(name).unwrap_or_default();
        (line, Reader { path, section: name, entries })
    };

    let (_, mut r) = take("geometry");
    let g = &mut cfg.geometry;
    r.usize("resolution", &mut g.resolution)?;
    r.f64("channel_length", &mut g.channel_length)?;
    r.f64("channel_height", &mut g.channel_height)?;
    r.f64("cylinder_x", &mut g.cylinder_center[0])?;
    r.f64("cylinder_y", &mut g.cylinder_center[1])?;
    r.f64("cylinder_radius", &mut g.cylinder_radius)?;
    r.f64("bar_length", &mut g.bar_length)?;
    r.f64("bar_thickness", &mut g.bar_thickness)?;
    r.finish()?;

    let (line, mut r) = take("physics");
    let mut t = [1.0, 1.0, 1.0, 0.0, 0.0, 1.0, 0.5, 2.0, 0.0, 0.0];
    for (k, key) in ["rho_f", "nu_f", "u_bar", "b_f_x", "b_f_y", "rho_s", "mu_s", "lambda_s", "b_s_x", "b_s_y"].iter().enumerate() {
        r.f64(key, &mut t[k])?;
    }
    r.finish()?;
    cfg.physics = PhysicalParams::from_table_units(t[0], t[1], t[2], [t[3], t[4]], t[5], t[6], t[7], [t[8], t[9]]);
    cfg.physics.validate().map_err(|e| perr(line, e.to_string()))?;

    let (line, mut r) = take("time_monolithic");
    let tm = &mut cfg.time_monolithic;
    let form_line = r.line_of("newmark_form");
    let mut form = String::from("standard");
    r.get("newmark_form", "single-dt|standard", &mut form)?;
    tm.newmark_form = form.parse::<NewmarkForm>().map_err(|e| perr(form_line.unwrap_or(line), e.to_string()))?;
    r.f64("dt", &mut tm.dt)?;
    r.usize("n_steps", &mut tm.n_steps)?;
    r.f64("gamma", &mut tm.gamma)?;
    r.f64("beta", &mut tm.beta)?;
    r.f64("newton_tol", &mut tm.newton_tol)?;
    r.usize("max_newton_iters", &mut tm.max_newton_iters)?;
    r.finish()?;
    tm.validate().map_err(|e| perr(line, e.to_string()))?;

    let (line, mut r) = take("time_partitioned");
    let tp = &mut cfg.time_partitioned;
    r.f64("dt", &mut tp.dt)?;
    r.usize("n_steps", &mut tp.n_steps)?;
    r.f64("eps", &mut tp.eps)?;
    r.usize("max_fp_iters", &mut tp.max_fp_iters)?;
    r.f64("newton_tol", &mut tp.newton_tol)?;
    r.usize("max_newton_iters", &mut tp.max_newton_iters)?;
    r.finish()?;
    tp.validate().map_err(|e| perr(line, e.to_string()))?;

    let (line, mut r) = take("fem");
    r.usize("pressure_order", &mut cfg.fem.pressure_order)?;
    r.finish()?;
    if !(1..=2).contains(&cfg.fem.pressure_order) {
        return Err(perr(line, format!("pressure_order must be 1 or 2, got {}", cfg.fem.pressure_order)));
    }

    let (line, mut r) = take("pod");
    let (n_line, e_line) = (r.line_of("modes"), r.line_of("energy"));
    let mut modes = usize::MAX;
    let mut energy = f64::NAN;
    r.usize("modes", &mut modes)?;
    r.f64("energy", &mut energy)?;
    r.finish()?;
    cfg.pod.select = match (n_line, e_line) {
        (Some(_), Some(l)) => return Err(perr(l, "give either 'modes' or 'energy', not both".into())),
        (Some(_), None) => PodSelect::Count(modes),
        (None, Some(l)) if !(energy > 0.0 && energy <= 1.0) => {
            return Err(perr(l, format!("energy must lie in (0, 1], got {energy}")));
        }
        (None, Some(_)) => PodSelect::Energy(energy),
        (None, None) => PodSelect::All,
    };
    let _ = line;

    let (line, mut r) = take("online");
    let o = &mut cfg.online;
    let mut n = usize::MAX;
    let uniform = r.line_of("n").is_some();
    r.usize("n", &mut n)?;
    if uniform {
        o.mono = MonoSizes { n_lu: o.mono.n_lu, n_ld: o.mono.n_ld, ..MonoSizes::uniform(n, 0) };
        o.part = PartSizes::uniform(n);
    }
    let mut n_lambda = o.mono.n_lu;
    r.usize("n_lambda", &mut n_lambda)?;
    o.mono.n_lu = n_lambda;
    o.mono.n_ld = n_lambda;
    let mut supremizers = true;
    r.get("supremizers", "true|false", &mut supremizers)?;
    for (key, slot) in [
        ("n_u", &mut o.mono.n_u),
        ("n_sup", &mut o.mono.n_sup),
        ("n_p", &mut o.mono.n_p),
        ("n_df", &mut o.mono.n_df),
        ("n_ds", &mut o.mono.n_ds),
        ("n_lambda_u", &mut o.mono.n_lu),
        ("n_lambda_d", &mut o.mono.n_ld),
        ("n_z", &mut o.part.n_z),
        ("n_p0", &mut o.part.n_p),
        ("n_ds_part", &mut o.part.n_ds),
        ("start_step", &mut o.start_step),
        ("n_steps", &mut o.n_steps),
    ] {
        r.usize(key, slot)?;
    }
    if !supremizers {
        o.mono = o.mono.without_supremizers();
    }
    r.f64("newton_tol", &mut o.newton_tol)?;
    r.f64("eps", &mut o.eps)?;
    let mut factor = f64::NAN;
    r.f64("pressure_limit_factor", &mut factor)?;
    o.pressure_limit_factor = (!factor.is_nan()).then_some(factor);
    r.finish()?;
    if !(o.eps > 0.0) || !(o.newton_tol > 0.0) || o.pressure_limit_factor.is_some_and(|f| !(f > 0.0)) {
        return Err(perr(line, "online tolerances and pressure_limit_factor must be positive".into()));
    }

    let (line, mut r) = take("io");
    r.usize("write_every", &mut cfg.io.write_every)?;
    r.finish()?;
    if cfg.io.write_every == 0 {
        return Err(perr(line, "write_every must be at least 1".into()));
    }
    Ok(cfg)
}

pub fn parse_config(path: impl AsRef<Path>) -> Result<Config> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| FsiError::io(path, e))?;
    parse_config_str(&text, path)
}

impl Config {
    /// Fails unless every named section appeared in the file.
    pub fn require(&self, sections: &[&str]) -> Result<()> {
        for s in sections {
            if !self.present.contains(*s) {
                return Err(FsiError::Parse {
                    path: self.path.clone(),
                    line: 0,
                    msg: format!("missing required section [{s}]"),
                });
            }
        }
        Ok(())
    }
}
