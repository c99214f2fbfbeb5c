//! Flat `key = value` run configuration.
//!
//! One statement per line; `#` starts a comment; `include <path>` splices
//! another file relative to the current one (bounded depth). Unknown keys
//! are rejected — a typo should stop the run, not silently fall back to a
//! default. Later assignments win, so an including file can override what
//! it includes.
//!
//! Recognized keys:
//!
//! | key                     | meaning                                  | default |
//! |-------------------------|------------------------------------------|---------|
//! | `model`                 | catalog preset name (`-` ≡ `_`)          | —       |
//! | `model_file`            | path to a generator description          | —       |
//! | `d`                     | dimension (1 or 2)                       | 1       |
//! | `box`                   | torus side length                        | 10      |
//! | `grid`                  | solver resolution per dimension          | 64      |
//! | `eps`                   | comma-separated scaling parameters       | 1       |
//! | `times`                 | comma-separated snapshot times           | 1       |
//! | `replicas`              | independent runs per ε                   | 200     |
//! | `seed`                  | base RNG seed                            | 42      |
//! | `rho0`                  | `<number>` or `cosine:<base>:<amp>`      | 1       |
//! | `dt`                    | solver time step                         | 1e-3    |
//! | `g2_bins`               | pair-correlation distance bins           | 25      |
//! | `max_particles`         | hard population cap (0 = automatic)      | 0       |
//! | `threads`               | worker threads (0 = one per core)        | 0       |
//! | `binary`                | snapshot output in binary form           | false   |
//! | `out`                   | output path                              | —       |
//! | `param.<name>`          | override a declared constant             | —       |
//! | `kernel.<name>.amplitude` | override a kernel amplitude            | —       |

use std::path::{Path, PathBuf};

use vlaskit_core::catalog;
use vlaskit_core::dsl::Generator;
use vlaskit_core::kernel::Kernel;
use vlaskit_core::sim::InitialProfile;
use vlaskit_core::{Error, Result};

const MAX_INCLUDE_DEPTH: usize = 8;

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub model: Option<String>,
    pub model_file: Option<PathBuf>,
    pub d: usize,
    pub box_l: f64,
    pub grid: usize,
    pub eps: Vec<f64>,
    pub times: Vec<f64>,
    pub replicas: usize,
    pub seed: u64,
    pub rho0: InitialProfile,
    pub dt: f64,
    pub g2_bins: usize,
    pub max_particles: usize,
    pub threads: usize,
    pub binary: bool,
    pub out: Option<PathBuf>,
    pub params: Vec<(String, f64)>,
    pub kernel_amps: Vec<(String, f64)>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            model: None,
            model_file: None,
            d: 1,
            box_l: 10.0,
            grid: 64,
            eps: vec![1.0],
            times: vec![1.0],
            replicas: 200,
            seed: 42,
            rho0: InitialProfile::Constant(1.0),
            dt: 1e-3,
            g2_bins: 25,
            max_particles: 0,
            threads: 0,
            binary: false,
            out: None,
            params: Vec::new(),
            kernel_amps: Vec::new(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig> {
        let mut cfg = RunConfig::default();
        cfg.merge_file(path, 0)?;
        Ok(cfg)
    }

    fn merge_file(&mut self, path: &Path, depth: usize) -> Result<()> {
        if depth > MAX_INCLUDE_DEPTH {
            return Err(Error::Config(format!(
                "include depth exceeds {MAX_INCLUDE_DEPTH} at {}",
                path.display()
            )));
        }
        let text = std::fs::read_to_string(path).map_err(|e| {
            Error::Config(format!("cannot read config {}: {e}", path.display()))
        })?;
        let dir = path.parent().map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from("."));
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix("include") {
                let rest = rest.trim();
                if rest.is_empty() {
                    return Err(self.line_err(path, idx, "include needs a path"));
                }
                self.merge_file(&dir.join(rest), depth + 1)?;
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(self.line_err(path, idx, "expected `key = value`"));
            };
            self.set(key.trim(), value.trim())
                .map_err(|e| self.line_err(path, idx, &e.to_string()))?;
        }
        Ok(())
    }

    fn line_err(&self, path: &Path, idx: usize, msg: &str) -> Error {
        Error::Config(format!("{}:{}: {msg}", path.display(), idx + 1))
    }

    /// Apply one assignment. Shared by the file loader and CLI overrides.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "model" => self.model = Some(value.to_string()),
            "model_file" => self.model_file = Some(PathBuf::from(value)),
            "d" => self.d = parse_num::<usize>(key, value)?,
            "box" => self.box_l = parse_num::<f64>(key, value)?,
            "grid" => self.grid = parse_num::<usize>(key, value)?,
            "eps" => self.eps = parse_list(key, value)?,
            "times" => self.times = parse_list(key, value)?,
            "replicas" => self.replicas = parse_num::<usize>(key, value)?,
            "seed" => self.seed = parse_num::<u64>(key, value)?,
            "rho0" => self.rho0 = parse_profile(value)?,
            "dt" => self.dt = parse_num::<f64>(key, value)?,
            "g2_bins" => self.g2_bins = parse_num::<usize>(key, value)?,
            "max_particles" => self.max_particles = parse_num::<usize>(key, value)?,
            "threads" => self.threads = parse_num::<usize>(key, value)?,
            "binary" => {
                self.binary = match value {
                    "true" => true,
                    "false" => false,
                    _ => {
                        return Err(Error::Config(format!(
                            "`binary` must be true or false, got `{value}`"
                        )))
                    }
                }
            }
            "out" => self.out = Some(PathBuf::from(value)),
            _ => {
                if let Some(name) = key.strip_prefix("param.") {
                    let v = parse_num::<f64>(key, value)?;
                    self.params.push((name.to_string(), v));
                } else if let Some(rest) = key.strip_prefix("kernel.") {
                    let Some(name) = rest.strip_suffix(".amplitude") else {
                        return Err(Error::Config(format!(
                            "unknown kernel setting `{key}`; only `kernel.<name>.amplitude` \
                             can be overridden"
                        )));
                    };
                    let v = parse_num::<f64>(key, value)?;
                    self.kernel_amps.push((name.to_string(), v));
                } else {
                    return Err(Error::Config(format!("unknown configuration key `{key}`")));
                }
            }
        }
        Ok(())
    }

    /// Resolve the generator this configuration names, with overrides
    /// applied, plus a short display name.
    pub fn build_generator(&self) -> Result<(String, Generator)> {
        let (name, gen) = match (&self.model_file, &self.model) {
            (Some(path), _) => {
                let src = std::fs::read_to_string(path).map_err(|e| {
                    Error::Config(format!("cannot read model file {}: {e}", path.display()))
                })?;
                let stem = path
                    .file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_else(|| "model".to_string());
                (stem, Generator::from_source(&src)?)
            }
            (None, Some(m)) => (m.replace('-', "_"), catalog::generator(m)?),
            (None, None) => {
                return Err(Error::Config(
                    "no model selected: set `model` (catalog preset) or `model_file`".into(),
                ))
            }
        };
        if self.params.is_empty() && self.kernel_amps.is_empty() {
            return Ok((name, gen));
        }
        let mut spec = gen.spec().clone();
        for (pname, v) in &self.params {
            let decl = spec.consts.get_mut(pname).ok_or_else(|| {
                Error::Config(format!(
                    "param override `{pname}` does not name a declared constant of `{name}`"
                ))
            })?;
            decl.value = *v;
        }
        for (kname, v) in &self.kernel_amps {
            let kern = spec.kernels.get_mut(kname).ok_or_else(|| {
                Error::Config(format!(
                    "kernel override `{kname}` does not name a declared kernel of `{name}`"
                ))
            })?;
            *kern = Kernel::new(&kern.name, kern.profile.clone(), *v, kern.scaling)?;
        }
        Ok((name, Generator::from_spec(spec)?))
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse::<T>()
        .map_err(|_| Error::Config(format!("`{key}` cannot parse `{value}` as a number")))
}

fn parse_list(key: &str, value: &str) -> Result<Vec<f64>> {
    let items: Result<Vec<f64>> = value
        .split(',')
        .map(|s| parse_num::<f64>(key, s.trim()))
        .collect();
    let items = items?;
    if items.is_empty() {
        return Err(Error::Config(format!("`{key}` needs at least one value")));
    }
    Ok(items)
}

fn parse_profile(value: &str) -> Result<InitialProfile> {
    if let Some(rest) = value.strip_prefix("cosine:") {
        let parts: Vec<&str> = rest.split(':').collect();
        if parts.len() != 2 {
            return Err(Error::Config(format!(
                "`rho0` cosine profile must be `cosine:<base>:<amp>`, got `{value}`"
            )));
        }
        let base = parse_num::<f64>("rho0", parts[0])?;
        let amp = parse_num::<f64>("rho0", parts[1])?;
        Ok(InitialProfile::Cosine { base, amp })
    } else {
        Ok(InitialProfile::Constant(parse_num::<f64>("rho0", value)?))
    }
}
