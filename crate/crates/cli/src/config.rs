//! Run configuration: JSON schema, loading and validation.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use waveguide_imaging::{
    enumerate_modes, voxelize, EvanescentPolicy, ForwardModel, Imager, Inclusion, Lattice, LatticeAxis,
    MeasurementGrid, ModeBasis, Scene, WaveguideSpec, Wavenumber,
};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub waveguide: WaveguideConfig,
    pub k: f64,
    pub measurement: MeasurementConfig,
    pub scene: SceneConfig,
    #[serde(default = "default_model")]
    pub model: ForwardModel,
    #[serde(default)]
    pub noise: NoiseConfig,
    pub imaging: ImagingConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WaveguideConfig {
    pub a: f64,
    pub b: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasurementConfig {
    pub r: f64,
    pub n1: usize,
    pub n2: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneConfig {
    #[serde(default = "default_scene_id")]
    pub id: String,
    /// Voxel edge length.
    pub pitch: f64,
    pub inclusions: Vec<Inclusion>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    pub level: f64,
    pub seed: u64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self { level: 0.0, seed: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisRange {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImagingConfig {
    pub x1: AxisRange,
    pub x2: AxisRange,
    pub x3: AxisRange,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum VolumeFormat {
    #[default]
    Csv,
    Vtk,
}

impl VolumeFormat {
    pub fn extension(self) -> &'static str {
        match self {
            VolumeFormat::Csv => "csv",
            VolumeFormat::Vtk => "vtk",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_output_dir")]
    pub dir: PathBuf,
    #[serde(default)]
    pub volume_format: VolumeFormat,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: default_output_dir(),
            volume_format: VolumeFormat::Csv,
        }
    }
}

fn default_model() -> ForwardModel {
    ForwardModel::Born
}

fn default_scene_id() -> String {
    "scene".into()
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

/// A validated configuration with the derived objects every subcommand needs.
#[derive(Debug, Clone)]
pub struct Setup {
    pub config: RunConfig,
    pub spec: WaveguideSpec,
    pub k: Wavenumber,
    /// Propagating modes only.
    pub basis: ModeBasis,
    pub grid: MeasurementGrid,
    pub scene: Scene,
    pub lattice: Lattice,
}

impl RunConfig {
    /// Parses JSON; syntax and type errors carry line and column.
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })
    }

    /// Checks every constraint the pipeline relies on. `source` is the JSON
    /// text the config came from, used to point at the offending line.
    pub fn validate(self, source: Option<&str>) -> Result<Setup, CliError> {
        let fail = |path: &str, err: waveguide_imaging::Error| CliError::Validation {
            path: path.to_string(),
            line: source.and_then(|s| locate(s, path)),
            kind: err.kind().to_string(),
            message: err.to_string(),
        };
        let invalid = |path: &str, msg: String| fail(path, waveguide_imaging::Error::InvalidParameter(msg));

        let spec = WaveguideSpec::new(self.waveguide.a, self.waveguide.b).map_err(|e| fail("waveguide", e))?;
        let k = Wavenumber::new(self.k).map_err(|e| fail("k", e))?;
        let basis = enumerate_modes(spec, k, EvanescentPolicy::PropagatingOnly).map_err(|e| fail("k", e))?;
        if basis.m() + basis.n() == 0 {
            return Err(invalid("k", format!("no propagating modes at k = {}", self.k)));
        }
        let m = self.measurement;
        let grid = MeasurementGrid::for_basis(&basis, m.r, m.n1, m.n2).map_err(|e| fail("measurement", e))?;

        let sc = &self.scene;
        if sc.inclusions.is_empty() {
            return Err(invalid("scene.inclusions", "scene has no inclusions".into()));
        }
        for (i, inc) in sc.inclusions.iter().enumerate() {
            let path = format!("scene.inclusions[{i}]");
            let part = voxelize(sc.id.clone(), std::slice::from_ref(inc), sc.pitch).map_err(|e| fail(&path, e))?;
            part.validate(&spec, k, m.r).map_err(|e| fail(&path, e))?;
        }
        let scene = voxelize(sc.id.clone(), &sc.inclusions, sc.pitch).map_err(|e| fail("scene", e))?;

        if let ForwardModel::Ls { tol, max_iter } = self.model {
            if !(tol > 0.0 && tol.is_finite()) {
                return Err(invalid("model.tol", format!("tolerance must be positive, got {tol}")));
            }
            if max_iter == 0 {
                return Err(invalid("model.max_iter", "max_iter must be at least 1".into()));
            }
        }
        if !(self.noise.level >= 0.0 && self.noise.level.is_finite()) {
            return Err(invalid(
                "noise.level",
                format!("noise level must be >= 0, got {}", self.noise.level),
            ));
        }

        let axis = |name: &str, r: AxisRange| {
            LatticeAxis::from_range(r.start, r.stop, r.step).map_err(|e| fail(&format!("imaging.{name}"), e))
        };
        let lattice = Lattice::new(
            axis("x1", self.imaging.x1)?,
            axis("x2", self.imaging.x2)?,
            axis("x3", self.imaging.x3)?,
        );
        Imager::from_basis(&basis)
            .check_lattice(&lattice, Some(m.r))
            .map_err(|e| fail("imaging", e))?;

        Ok(Setup {
            config: self,
            spec,
            k,
            basis,
            grid,
            scene,
            lattice,
        })
    }
}

pub fn load_config(path: &Path) -> Result<Setup, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    RunConfig::from_json(&text)?.validate(Some(&text))
}

/// Best-effort line number of a dotted field path such as
/// `scene.inclusions[1].shape` in the JSON source.
pub fn locate(source: &str, path: &str) -> Option<usize> {
    let mut pos = 0;
    for seg in path.split('.') {
        let (key, index) = match seg.split_once('[') {
            Some((k, rest)) => (k, rest.trim_end_matches(']').parse::<usize>().ok()),
            None => (seg, None),
        };
        let needle = format!("\"{key}\"");
        pos += source[pos..].find(&needle)? + needle.len();
        if let Some(i) = index {
            let open = pos + source[pos..].find('[')?;
            pos = nth_element(source, open, i)?;
        }
    }
    Some(source[..pos].matches('\n').count() + 1)
}

/// Byte offset of element `n` of the array whose `[` is at `open`.
fn nth_element(source: &str, open: usize, n: usize) -> Option<usize> {
    let bytes = source.as_bytes();
    let (mut depth, mut count, mut in_str, mut esc) = (0usize, 0usize, false, false);
    let mut start = None;
    for (i, &c) in bytes.iter().enumerate().skip(open) {
        if in_str {
            match c {
                _ if esc => esc = false,
                b'\\' => esc = true,
                b'"' => in_str = false,
                _ => {}
            }
            continue;
        }
        match c {
            b'"' => {
                in_str = true;
                if depth == 1 && count == n {
                    start = Some(i);
                }
            }
            b'[' | b'{' => {
                depth += 1;
                if depth == 2 && start.is_none() && count == n {
                    start = Some(i);
                }
            }
            b']' | b'}' => {
                if depth == 1 {
                    return None;
                }
                depth -= 1;
            }
            b',' if depth == 1 => count += 1,
            b' ' | b'\t' | b'\r' | b'\n' => {}
            _ if depth == 1 && count == n && start.is_none() => start = Some(i),
            _ => {}
        }
        if let Some(s) = start {
            return Some(s);
        }
    }
    None
}
