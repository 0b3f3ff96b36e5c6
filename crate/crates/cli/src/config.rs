use std::path::Path;

use anyhow::Context;
use serde::Deserialize;
use tangency::renorm::GeneralCoeffsSpec;

use crate::parse::NList;

/// Contents of a `--config` file. Every key is optional; flags take
/// precedence over the file and the file over built-in defaults.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    #[serde(default)]
    pub params: ParamsSection,
    #[serde(default)]
    pub region: RegionSection,
    #[serde(default)]
    pub run: RunSection,
    #[serde(default)]
    pub sweep: SweepSection,
    #[serde(default)]
    pub manifold: ManifoldSection,
    #[serde(default)]
    pub basin: BasinSection,
    #[serde(default)]
    pub attractor: AttractorSection,
    #[serde(default)]
    pub output: OutputSection,
    pub general: Option<GeneralCoeffsSpec>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsSection {
    pub lambda: Option<f64>,
    pub sigma: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionSection {
    pub r1_half_extents: Option<[f64; 2]>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub n: Option<u32>,
    pub n_list: Option<NList>,
    pub mu: Option<f64>,
    pub nu: Option<f64>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub k: Option<f64>,
    pub grid: Option<usize>,
    pub general: Option<String>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifoldSection {
    pub length: Option<f64>,
    pub max_gap: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BasinSection {
    pub nx: Option<usize>,
    pub ny: Option<usize>,
    pub delta: Option<f64>,
    pub bounds: Option<[f64; 4]>,
    pub trap_radius: Option<f64>,
    pub max_iterations: Option<usize>,
    pub confirmations: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttractorSection {
    pub map: Option<String>,
    pub samples: Option<usize>,
    pub transient: Option<usize>,
    pub tail: Option<usize>,
    pub epsilon: Option<f64>,
    pub domain: Option<[[f64; 2]; 2]>,
    pub probes: Option<usize>,
    pub horizon: Option<usize>,
    pub eps_out: Option<f64>,
    pub delta_in: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: Option<String>,
    pub format: Option<String>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> anyhow::Result<FileConfig> {
        let Some(path) = path else {
            return Ok(FileConfig::default());
        };
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("cannot parse config {}", path.display()))
    }
}

/// First present value among flag and file, else the default.
pub fn pick<T>(flag: Option<T>, file: Option<T>, default: T) -> T {
    flag.or(file).unwrap_or(default)
}
