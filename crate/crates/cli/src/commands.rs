//! Subcommand implementations. Each returns the text printed on stdout.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use waveguide_imaging::format::{
    load_data_matrix, load_volume_csv, load_volume_vtk, save_data_matrix, save_point_source_data, save_scene,
    save_volume_csv, save_volume_vtk,
};
use waveguide_imaging::{
    add_noise, enumerate_modes, ComplexVec3, DataMatrixU, EvanescentPolicy, FieldKind, ForwardModel, GreenEvaluator,
    ImageVolume, Imager, ModeFamily, OperatorSet, Point3, PointSourceData,
};

use crate::config::{Setup, VolumeFormat};
use crate::error::{io_err, CliError};

pub const POINT_SOURCE_FILE: &str = "point_source.wgus";
pub const DATA_MATRIX_FILE: &str = "data.wgum";
pub const SCENE_FILE: &str = "scene.json";
pub const VERIFY_FILE: &str = "verify.json";

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))
}

fn write_volume(vol: &ImageVolume, dir: &Path, stem: &str, format: VolumeFormat) -> Result<PathBuf, CliError> {
    ensure_dir(dir)?;
    let path = dir.join(format!("{stem}.{}", format.extension()));
    match format {
        VolumeFormat::Csv => save_volume_csv(&path, vol)?,
        VolumeFormat::Vtk => save_volume_vtk(&path, vol)?,
    }
    Ok(path)
}

/// Mode table over the basis the synthesis uses: propagating modes and the
/// evanescent modes kept for the scene's distance to the plane.
pub fn modes(setup: &Setup) -> Result<String, CliError> {
    let gap = setup
        .scene
        .min_separation_from(setup.grid.r)
        .expect("validated scene is non-empty");
    let basis = enumerate_modes(setup.spec, setup.k, EvanescentPolicy::decay(gap))?;
    let mut out = String::new();
    writeln!(
        out,
        "{:>5} {:>6} {:>4} {:>4} {:>12} {:>24} {:>11}",
        "index", "family", "p1", "p2", "cutoff", "axial", "propagating"
    )
    .unwrap();
    for m in basis.te_modes().iter().chain(basis.tm_modes()) {
        let family = match m.family {
            ModeFamily::Te => "TE",
            ModeFamily::Tm => "TM",
        };
        let axial = format!("{:.6}{:+.6}i", m.axial.re, m.axial.im);
        writeln!(
            out,
            "{:>5} {:>6} {:>4} {:>4} {:>12.6} {:>24} {:>11}",
            m.linear,
            family,
            m.p1,
            m.p2,
            m.cutoff,
            axial,
            if m.propagating { "yes" } else { "no" }
        )
        .unwrap();
    }
    let (te, tm) = (setup.basis.m(), setup.basis.n());
    writeln!(out, "M={te} N={tm} total propagating={}", te + tm).unwrap();
    Ok(out)
}

pub struct Synthesis {
    pub data: PointSourceData,
    pub u: DataMatrixU,
}

/// Forward data and the clean modal matrix, in memory.
pub fn synthesize_in_memory(setup: &Setup, model: ForwardModel) -> Result<Synthesis, CliError> {
    let ops = OperatorSet::new(setup.k, setup.scene.clone(), setup.grid, model)?;
    let data = ops.synthesize()?;
    let u = Imager::from_basis(&setup.basis)
        .assemble_u(&data)?
        .with_scene_id(setup.scene.id.clone());
    Ok(Synthesis { data, u })
}

pub fn synthesize(setup: &Setup, model: ForwardModel, dir: &Path) -> Result<String, CliError> {
    let s = synthesize_in_memory(setup, model)?;
    ensure_dir(dir)?;
    save_point_source_data(dir.join(POINT_SOURCE_FILE), &s.data)?;
    save_data_matrix(dir.join(DATA_MATRIX_FILE), &s.u)?;
    save_scene(dir.join(SCENE_FILE), &setup.scene)?;
    Ok(format!(
        "synthesized {} voxels, {}x{} grid, U {}x{} ({} TE + {} TM), written to {}\n",
        setup.scene.len(),
        setup.grid.n1,
        setup.grid.n2,
        s.u.dim(),
        s.u.dim(),
        s.u.te,
        s.u.tm,
        dir.display()
    ))
}

/// Noisy U per the config, from a clean U.
pub fn noisy(setup: &Setup, clean: &DataMatrixU, seed: u64) -> Result<DataMatrixU, CliError> {
    Ok(add_noise(clean, setup.config.noise.level, seed)?)
}

pub fn image_from_u(setup: &Setup, u: &DataMatrixU) -> Result<ImageVolume, CliError> {
    let same_setup = u.grid == setup.grid && u.k == setup.k.value();
    if !same_setup {
        return Err(CliError::Usage(format!(
            "data matrix was synthesized for k={} and a {}x{} grid at r={}, config has k={} and a {}x{} grid at r={}",
            u.k,
            u.grid.n1,
            u.grid.n2,
            u.grid.r,
            setup.k.value(),
            setup.grid.n1,
            setup.grid.n2,
            setup.grid.r
        )));
    }
    Ok(Imager::from_basis(&setup.basis).image_volume(u, &setup.lattice)?)
}

pub fn image(setup: &Setup, input: Option<&Path>, seed: u64, dir: &Path) -> Result<String, CliError> {
    let default = dir.join(DATA_MATRIX_FILE);
    let input = input.unwrap_or(&default);
    if !input.exists() {
        return Err(CliError::Io {
            path: input.to_path_buf(),
            message: "data matrix not found; run `synthesize` first or pass --input".into(),
        });
    }
    let clean = load_data_matrix(input)?;
    let u = noisy(setup, &clean, seed)?;
    let vol = image_from_u(setup, &u)?;
    let path = write_volume(&vol, dir, "image", setup.config.output.volume_format)?;
    let mut out = format!(
        "imaged {} nodes at noise level {} (seed {seed}), written to {}\n",
        vol.values.len(),
        setup.config.noise.level,
        path.display()
    );
    let [_, _, n3] = vol.lattice.dims();
    for i3 in 0..n3 {
        for (p, v) in vol.slice_local_maxima(i3, 0.2) {
            writeln!(out, "local maximum {v:.4} at ({}, {}, {})", p.x1, p.x2, p.x3).unwrap();
        }
    }
    Ok(out)
}

pub fn parse_point(s: &str) -> Result<Point3, CliError> {
    let v: Vec<f64> = s
        .split(',')
        .map(|t| t.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| CliError::Usage(format!("expected x1,x2,x3, got {s:?}")))?;
    match v[..] {
        [a, b, c] => Ok(Point3::new(a, b, c)),
        _ => Err(CliError::Usage(format!("expected three coordinates, got {s:?}"))),
    }
}

pub fn psf(setup: &Setup, x_star: Point3, dir: &Path) -> Result<String, CliError> {
    let vol = Imager::from_basis(&setup.basis).psf_volume(x_star, &setup.lattice)?;
    let path = write_volume(&vol, dir, "psf", setup.config.output.volume_format)?;
    let (_, peak) = vol.argmax().ok_or(waveguide_imaging::Error::EmptyLattice)?;
    Ok(format!(
        "psf for x*=({}, {}, {}) written to {}\nargmax at ({}, {}, {})\n",
        x_star.x1,
        x_star.x2,
        x_star.x3,
        path.display(),
        peak.x1,
        peak.x2,
        peak.x3
    ))
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub residual: f64,
    pub threshold: f64,
    pub pass: bool,
}

impl Check {
    fn new(name: &str, residual: f64, threshold: f64) -> Self {
        Self {
            name: name.into(),
            residual,
            threshold,
            pass: residual < threshold,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub checks: Vec<Check>,
    pub pass: bool,
}

fn random_c(r: &mut ChaCha8Rng) -> Complex64 {
    Complex64::new(r.random_range(-1.0..1.0), r.random_range(-1.0..1.0))
}

/// Operator identities on the configured scene and grid.
pub fn verify_report(setup: &Setup, model: ForwardModel, seed: u64) -> Result<VerifyReport, CliError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ops = OperatorSet::new(setup.k, setup.scene.clone(), setup.grid, model)?;
    let nodes = setup.grid.len();
    let density = |r: &mut ChaCha8Rng| -> Vec<ComplexVec3> {
        (0..nodes)
            .map(|_| ComplexVec3::new(random_c(r), random_c(r), Complex64::new(0.0, 0.0)))
            .collect()
    };
    let mut checks = Vec::new();

    let data = ops.synthesize()?;
    let mut fact = 0.0f64;
    for _ in 0..10 {
        fact = fact.max(ops.factorization_residual_with(&data, &density(&mut rng))?);
    }
    let fact_threshold = match model {
        ForwardModel::Born => 1e-8,
        ForwardModel::Ls { tol, .. } => 10.0 * tol,
    };
    checks.push(Check::new("factorization", fact, fact_threshold));

    let mut adj = 0.0f64;
    for _ in 0..20 {
        let g = density(&mut rng);
        let v: Vec<ComplexVec3> = (0..setup.scene.len())
            .map(|_| ComplexVec3::new(random_c(&mut rng), random_c(&mut rng), random_c(&mut rng)))
            .collect();
        let lhs = ops.inner_scene(&v, &ops.herglotz_on_scene(&g)?);
        let rhs = ops.inner_plane(&ops.adjoint_field(&v)?, &g);
        adj = adj.max((lhs - rhs).norm() / lhs.norm());
    }
    checks.push(Check::new("adjointness", adj, 1e-8));

    let imager = Imager::from_basis(&setup.basis);
    let ev = GreenEvaluator::with_basis(setup.basis.clone(), 1e-3)?;
    let (a, b) = (setup.spec.a(), setup.spec.b());
    let r = setup.grid.r;
    let point = |rng: &mut ChaCha8Rng| {
        Point3::new(
            rng.random_range(0.02..0.98) * a,
            rng.random_range(0.02..0.98) * b,
            rng.random_range(0.9 * r..0.05 * r),
        )
    };
    let mut identity = 0.0f64;
    let mut n = 0;
    while n < 20 {
        let (x, z) = (point(&mut rng), point(&mut rng));
        if (x.x3 - z.x3).abs() < 1e-3 {
            continue;
        }
        n += 1;
        for j in 0..3 {
            let h = imager.h_psi_modal(x, z, j)?;
            let d = ev.re_dgreen_propagating(x, z, j)?;
            identity = identity.max((h - d).norm() / d.norm());
        }
    }
    checks.push(Check::new("h_psi identity", identity, 1e-10));

    checks.push(Check::new("orthogonality", orthogonality_residual(setup), 1e-10));
    let pass = checks.iter().all(|c| c.pass);
    Ok(VerifyReport { checks, pass })
}

/// Largest normalized deviation of the quadrature Gram matrix of the
/// propagating `M` (TE) and `P` (TM) fields from its diagonal.
fn orthogonality_residual(setup: &Setup) -> f64 {
    let basis = &setup.basis;
    let k = setup.k.value();
    let modes: Vec<_> = basis.te_modes().iter().chain(basis.tm_modes()).collect();
    let expect: Vec<f64> = modes
        .iter()
        .map(|m| match m.family {
            ModeFamily::Te => m.cutoff_sq(),
            ModeFamily::Tm => m.cutoff_sq() * m.axial.re.powi(2) / (k * k),
        })
        .collect();
    let dim = modes.len();
    let w = setup.grid.weight();
    let mut gram = vec![Complex64::new(0.0, 0.0); dim * dim];
    for y in setup.grid.nodes() {
        let v: Vec<ComplexVec3> = modes
            .iter()
            .map(|m| {
                let kind = if m.family == ModeFamily::Te {
                    FieldKind::M
                } else {
                    FieldKind::P
                };
                basis.eval_mode_field(m, y, kind).expect("field kind matches family")
            })
            .collect();
        for i in 0..dim {
            for j in 0..dim {
                gram[i * dim + j] += v[j].dotc(&v[i]) * w;
            }
        }
    }
    let mut worst = 0.0f64;
    for i in 0..dim {
        for j in 0..dim {
            let target = if i == j { expect[i] } else { 0.0 };
            worst = worst.max((gram[i * dim + j] - target).norm() / (expect[i] * expect[j]).sqrt());
        }
    }
    worst
}

pub fn verify(setup: &Setup, model: ForwardModel, seed: u64, dir: &Path) -> Result<String, CliError> {
    let report = verify_report(setup, model, seed)?;
    let text = serde_json::to_string_pretty(&report).expect("report serializes");
    ensure_dir(dir)?;
    let path = dir.join(VERIFY_FILE);
    std::fs::write(&path, &text).map_err(io_err(&path))?;
    if report.pass {
        Ok(text + "\n")
    } else {
        let failed: Vec<String> = report
            .checks
            .iter()
            .filter(|c| !c.pass)
            .map(|c| format!("{} residual {:e} >= {:e}", c.name, c.residual, c.threshold))
            .collect();
        Err(CliError::VerificationFailed(failed.join("; ")))
    }
}

fn volume_format_of(path: &Path) -> Result<VolumeFormat, CliError> {
    match path
        .extension()
        .and_then(|e| e.to_str())
        .map(str::to_ascii_lowercase)
        .as_deref()
    {
        Some("csv") => Ok(VolumeFormat::Csv),
        Some("vtk") => Ok(VolumeFormat::Vtk),
        _ => Err(CliError::Usage(format!(
            "{}: extension must be .csv or .vtk",
            path.display()
        ))),
    }
}

pub fn export(input: &Path, output: &Path) -> Result<String, CliError> {
    let vol = match volume_format_of(input)? {
        VolumeFormat::Csv => load_volume_csv(input)?,
        VolumeFormat::Vtk => load_volume_vtk(input)?,
    };
    match volume_format_of(output)? {
        VolumeFormat::Csv => save_volume_csv(output, &vol)?,
        VolumeFormat::Vtk => save_volume_vtk(output, &vol)?,
    }
    Ok(format!("converted {} -> {}\n", input.display(), output.display()))
}
