//! Scene model, the Herglotz-type operator `H`, its adjoint `H*`, the contrast
//! operator `T`, forward synthesis of point-source data and the factorization
//! check `(N g) × ν = conj(H* conj(T H g))`.
//!
//! Scattered fields are computed from the volume-integral representation
//!
//! ```text
//! w^s(x) = k² Σ_v vol_v G(x; v) (ε_v − 1) (w^i + w^s)(v)
//! ```
//!
//! either at Born level (`w^s` dropped on the right) or by fixed-point
//! iteration. The self-voxel term and pairs of voxels sharing an axial plane
//! are excluded from the coupling because the modal series is not summable
//! there.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{ComplexVec3, DyadicField, Point3};
use crate::green::GreenEvaluator;
use crate::modes::{ModeBasis, WaveguideSpec, Wavenumber};

/// Unit normal of the measurement plane.
pub const NU: [f64; 3] = [0.0, 0.0, -1.0];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Voxel {
    pub center: Point3,
    pub volume: f64,
    pub epsilon: Complex64,
}

impl Voxel {
    pub fn new(center: Point3, volume: f64, epsilon: Complex64) -> Self {
        Self {
            center,
            volume,
            epsilon,
        }
    }

    pub fn contrast(&self) -> Complex64 {
        self.epsilon - 1.0
    }

    /// Edge length of the cube with this voxel's volume.
    pub fn pitch(&self) -> f64 {
        self.volume.cbrt()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub id: String,
    pub voxels: Vec<Voxel>,
}

impl Scene {
    pub fn new(id: impl Into<String>, voxels: Vec<Voxel>) -> Self {
        Self { id: id.into(), voxels }
    }

    pub fn len(&self) -> usize {
        self.voxels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.voxels.is_empty()
    }

    pub fn centers(&self) -> Vec<Point3> {
        self.voxels.iter().map(|v| v.center).collect()
    }

    /// Checks the voxels against the guide, the wavenumber and the plane `x3 = r`.
    pub fn validate(&self, spec: &WaveguideSpec, k: Wavenumber, r: f64) -> Result<()> {
        let wavelength = k.wavelength();
        for (i, v) in self.voxels.iter().enumerate() {
            let c = v.center;
            let fail = |msg: String| Err(Error::InvalidScene(format!("voxel {i} at {c}: {msg}")));
            if !(v.volume.is_finite() && v.volume > 0.0) {
                return fail(format!("volume must be positive, got {}", v.volume));
            }
            if !(v.epsilon.re > 0.0) || !v.epsilon.im.is_finite() {
                return fail(format!("Re(epsilon) must be positive, got {}", v.epsilon));
            }
            if !(c.x1 > 0.0 && c.x1 < spec.a() && c.x2 > 0.0 && c.x2 < spec.b()) {
                return fail("center is not strictly inside the cross-section".into());
            }
            let half = 0.5 * v.pitch();
            if c.x3 + half >= 0.0 {
                return fail("voxel touches the terminating plate".into());
            }
            if c.x3 - half - r < wavelength * (1.0 - 1e-12) {
                return Err(Error::SeparationViolated(format!(
                    "voxel {i} at {c}: 
must lie above the measurement plane x3={r} by at least one wavelength ({wavelength:.6})"
                )));
            }
        }
        Ok(())
    }

    /// Smallest axial distance between a voxel center and the plane `x3 = r`.
    pub fn min_separation_from(&self, r: f64) -> Option<f64> {
        self.voxels
            .iter()
            .map(|v| (v.center.x3 - r).abs())
            .min_by(f64::total_cmp)
    }

    /// Smallest nonzero axial distance between two voxel centers.
    pub fn min_internal_gap(&self) -> Option<f64> {
        let mut z: Vec<f64> = self.voxels.iter().map(|v| v.center.x3).collect();
        z.sort_by(f64::total_cmp);
        let scale = z.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
        z.windows(2)
            .map(|w| w[1] - w[0])
            .filter(|d| *d > 1e-9 * scale)
            .min_by(f64::total_cmp)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// Uniform midpoint lattice on `Σ × {r}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasurementGrid {
    pub spec: WaveguideSpec,
    pub r: f64,
    pub n1: usize,
    pub n2: usize,
}

impl MeasurementGrid {
    pub fn new(spec: WaveguideSpec, r: f64, n1: usize, n2: usize) -> Result<Self> {
        if !(r.is_finite() && r < 0.0) {
            return Err(Error::InvalidGrid(format!(
                "plane coordinate r must be negative, got {r}"
            )));
        }
        if n1 == 0 || n2 == 0 {
            return Err(Error::InvalidGrid(format!(
                "node counts must be positive, got {n1}x{n2}"
            )));
        }
        Ok(Self { spec, r, n1, n2 })
    }

    /// Like [`new`](Self::new), additionally enforcing the sampling condition
    /// for projections onto the propagating modes of `basis`.
    pub fn for_basis(basis: &ModeBasis, r: f64, n1: usize, n2: usize) -> Result<Self> {
        let grid = Self::new(*basis.spec(), r, n1, n2)?;
        grid.check_nyquist(basis)?;
        Ok(grid)
    }

    /// `n_i ≥ 2·max index + 2` in each direction, over the propagating modes.
    pub fn check_nyquist(&self, basis: &ModeBasis) -> Result<()> {
        let (p1, p2) = basis.max_propagating_index();
        let (need1, need2) = (2 * p1 as usize + 2, 2 * p2 as usize + 2);
        if self.n1 < need1 || self.n2 < need2 {
            return Err(Error::InvalidGrid(format!(
                "{}x{} nodes cannot resolve mode indices up to ({p1},{p2}); need at least {need1}x{need2}",
                self.n1, self.n2
            )));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.n1 * self.n2
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn weight(&self) -> f64 {
        self.spec.area() / (self.n1 * self.n2) as f64
    }

    /// Node `i1·n2 + i2` sits at `((i1+½)a/n1, (i2+½)b/n2, r)`.
    pub fn node(&self, index: usize) -> Point3 {
        let (i1, i2) = (index / self.n2, index % self.n2);
        Point3::new(
            (i1 as f64 + 0.5) * self.spec.a() / self.n1 as f64,
            (i2 as f64 + 0.5) * self.spec.b() / self.n2 as f64,
            self.r,
        )
    }

    pub fn nodes(&self) -> Vec<Point3> {
        (0..self.len()).map(|i| self.node(i)).collect()
    }
}

/// Scattered-field blocks `U^s(x;y)` for every ordered node pair; the columns
/// of a block are the fields for the polarizations `e_1, e_2, e_3`.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSourceData {
    pub grid: MeasurementGrid,
    pub k: f64,
    /// Row-major over `(receiver, source)`.
    pub blocks: Vec<DyadicField>,
}

impl PointSourceData {
    pub fn zeros(grid: MeasurementGrid, k: f64) -> Self {
        Self {
            grid,
            k,
            blocks: vec![DyadicField::zeros(); grid.len() * grid.len()],
        }
    }

    pub fn block(&self, receiver: usize, source: usize) -> &DyadicField {
        &self.blocks[receiver * self.grid.len() + source]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum ForwardModel {
    Born,
    Ls { tol: f64, max_iter: usize },
}

impl ForwardModel {
    pub const DEFAULT_LS_TOL: f64 = 1e-10;
    pub const DEFAULT_LS_MAX_ITER: usize = 200;

    pub fn ls_default() -> Self {
        ForwardModel::Ls {
            tol: Self::DEFAULT_LS_TOL,
            max_iter: Self::DEFAULT_LS_MAX_ITER,
        }
    }
}

/// Result of a total-field solve.
#[derive(Debug, Clone, PartialEq)]
pub struct TotalField {
    pub field: Vec<ComplexVec3>,
    /// Relative residual of the fixed-point equation (0 for Born).
    pub residual: f64,
    pub iterations: usize,
}

/// `k² vol_v' (ε_v' − 1) G(v; v')` for every coupled voxel pair.
#[derive(Debug, Clone)]
struct Coupling {
    n: usize,
    blocks: Vec<Option<DyadicField>>,
}

impl Coupling {
    fn apply(&self, w: &[ComplexVec3]) -> Vec<ComplexVec3> {
        (0..self.n)
            .map(|v| {
                let mut acc = ComplexVec3::zeros();
                for (vp, wv) in w.iter().enumerate() {
                    if let Some(b) = &self.blocks[v * self.n + vp] {
                        acc += b * wv;
                    }
                }
                acc
            })
            .collect()
    }
}

/// The operators of one (scene, grid, forward model) configuration, with the
/// plane-to-voxel Green table precomputed.
#[derive(Debug, Clone)]
pub struct OperatorSet {
    k: f64,
    scene: Scene,
    grid: MeasurementGrid,
    model: ForwardModel,
    green: GreenEvaluator,
    /// `G(node; voxel)`, row-major over `(node, voxel)`.
    table: Vec<DyadicField>,
    coupling: Option<Coupling>,
}

impl OperatorSet {
    pub fn new(k: Wavenumber, scene: Scene, grid: MeasurementGrid, model: ForwardModel) -> Result<Self> {
        scene.validate(&grid.spec, k, grid.r)?;
        let gap = scene.min_separation_from(grid.r).unwrap_or_else(|| k.wavelength());
        let green = GreenEvaluator::new(grid.spec, k, gap)?;
        Self::with_green(green, scene, grid, model)
    }

    /// Uses a caller-supplied evaluator for the plane-to-voxel Green function.
    pub fn with_green(green: GreenEvaluator, scene: Scene, grid: MeasurementGrid, model: ForwardModel) -> Result<Self> {
        let k = green.basis().wavenumber();
        scene.validate(&grid.spec, k, grid.r)?;
        let nodes = grid.nodes();
        let centers = scene.centers();
        let table = nodes
            .par_iter()
            .map(|&x| {
                centers
                    .iter()
                    .map(|&v| green.green_half(x, v))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .flatten()
            .collect();
        let coupling = match model {
            ForwardModel::Born => None,
            ForwardModel::Ls { tol, max_iter } => {
                if !(tol > 0.0) || max_iter == 0 {
                    return Err(Error::InvalidScene(format!(
                        "LS model needs tol > 0 and max_iter > 0, got {tol}, {max_iter}"
                    )));
                }
                Some(build_coupling(&scene, &green)?)
            }
        };
        Ok(Self {
            k: k.value(),
            scene,
            grid,
            model,
            green,
            table,
            coupling,
        })
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn scene(&self) -> &Scene {
        &self.scene
    }

    pub fn grid(&self) -> &MeasurementGrid {
        &self.grid
    }

    pub fn model(&self) -> ForwardModel {
        self.model
    }

    pub fn green(&self) -> &GreenEvaluator {
        &self.green
    }

    fn nv(&self) -> usize {
        self.scene.len()
    }

    /// `G(node; voxel)`.
    pub fn plane_to_voxel(&self, node: usize, voxel: usize) -> &DyadicField {
        &self.table[node * self.nv() + voxel]
    }

    /// `w^i(x) = Σ_nodes weight · G(x; y) g(y)` at arbitrary targets.
    pub fn herglotz_field(&self, g: &[ComplexVec3], targets: &[Point3]) -> Result<Vec<ComplexVec3>> {
        self.check_density(g)?;
        let gap = self.green.min_axial_gap();
        for t in targets {
            if (t.x3 - self.grid.r).abs() < gap * (1.0 - 1e-12) {
                return Err(Error::SeparationViolated(format!(
                    "target {t} is closer than {gap} to the measurement plane"
                )));
            }
        }
        let w = self.grid.weight();
        let nodes = self.grid.nodes();
        targets
            .par_iter()
            .map(|&x| {
                let mut acc = ComplexVec3::zeros();
                for (y, gy) in nodes.iter().zip(g) {
                    acc += self.green.green_half(x, *y)? * gy;
                }
                Ok(acc * Complex64::from(w))
            })
            .collect()
    }

    /// `H g` on the voxel centers, from the precomputed table.
    pub fn herglotz_on_scene(&self, g: &[ComplexVec3]) -> Result<Vec<ComplexVec3>> {
        self.check_density(g)?;
        let w = Complex64::from(self.grid.weight());
        Ok((0..self.nv())
            .map(|v| {
                let mut acc = ComplexVec3::zeros();
                for (y, gy) in g.iter().enumerate() {
                    // G(v; y) = G(y; v)ᵀ
                    acc += self.plane_to_voxel(y, v).tr_mul(gy);
                }
                acc * w
            })
            .collect())
    }

    /// `(H* v)(x) = (ν × Σ_v vol conj(G(x; v)) v(v)) × ν` on the grid nodes.
    pub fn adjoint_field(&self, v: &[ComplexVec3]) -> Result<Vec<ComplexVec3>> {
        if v.len() != self.nv() {
            return Err(Error::DimensionMismatch {
                expected: self.nv(),
                found: v.len(),
            });
        }
        Ok((0..self.grid.len())
            .map(|x| {
                let mut acc = ComplexVec3::zeros();
                for (i, (vox, vv)) in self.scene.voxels.iter().zip(v).enumerate() {
                    acc += self.plane_to_voxel(x, i).map(|c| c.conj()) * vv * Complex64::from(vox.volume);
                }
                tangential(&acc)
            })
            .collect())
    }

    /// Total field on the voxels for the given incident field.
    pub fn total_field(&self, incident: &[ComplexVec3]) -> Result<TotalField> {
        if incident.len() != self.nv() {
            return Err(Error::DimensionMismatch {
                expected: self.nv(),
                found: incident.len(),
            });
        }
        match (self.model, &self.coupling) {
            (ForwardModel::Ls { tol, max_iter }, Some(c)) => ls_solve(c, incident, tol, max_iter),
            _ => Ok(TotalField {
                field: incident.to_vec(),
                residual: 0.0,
                iterations: 0,
            }),
        }
    }

    /// `T w^i = k²(ε − 1)(w^i + w^s)` per voxel.
    pub fn apply_t(&self, incident: &[ComplexVec3]) -> Result<Vec<ComplexVec3>> {
        let total = self.total_field(incident)?;
        Ok(self.currents(&total.field))
    }

    fn currents(&self, total: &[ComplexVec3]) -> Vec<ComplexVec3> {
        let k2 = self.k * self.k;
        self.scene
            .voxels
            .iter()
            .zip(total)
            .map(|(v, w)| w * (k2 * v.contrast()))
            .collect()
    }

    /// Scattered fields at every receiver node for every source node and
    /// polarization. Sources are processed in parallel; each block is computed
    /// by the same sequential reduction regardless of scheduling.
    pub fn synthesize(&self) -> Result<PointSourceData> {
        let nn = self.grid.len();
        let nv = self.nv();
        let vols: Vec<f64> = self.scene.voxels.iter().map(|v| v.volume).collect();
        let per_source = (0..nn)
            .into_par_iter()
            .map(|y| {
                // columns: volume-weighted contrast currents for e_1, e_2, e_3
                let mut cur = vec![DyadicField::zeros(); nv];
                for l in 0..3 {
                    let incident: Vec<ComplexVec3> =
                        (0..nv).map(|v| self.plane_to_voxel(y, v).row(l).transpose()).collect();
                    let total = self.total_field(&incident)?;
                    for (v, j) in self.currents(&total.field).into_iter().enumerate() {
                        cur[v].set_column(l, &(j * Complex64::from(vols[v])));
                    }
                }
                Ok((0..nn)
                    .map(|x| {
                        let mut acc = DyadicField::zeros();
                        for (v, c) in cur.iter().enumerate() {
                            acc += self.plane_to_voxel(x, v) * c;
                        }
                        acc
                    })
                    .collect::<Vec<_>>())
            })
            .collect::<Result<Vec<_>>>()?;
        let mut data = PointSourceData::zeros(self.grid, self.k);
        for (y, col) in per_source.into_iter().enumerate() {
            for (x, b) in col.into_iter().enumerate() {
                data.blocks[x * nn + y] = b;
            }
        }
        Ok(data)
    }

    /// `(N g) × ν` on the grid nodes from point-source data.
    pub fn data_operator_cross_nu(&self, data: &PointSourceData, g: &[ComplexVec3]) -> Result<Vec<ComplexVec3>> {
        self.check_density(g)?;
        let nn = self.grid.len();
        if data.blocks.len() != nn * nn {
            return Err(Error::DimensionMismatch {
                expected: nn * nn,
                found: data.blocks.len(),
            });
        }
        let w = Complex64::from(self.grid.weight());
        let nu = nu_vec();
        Ok((0..nn)
            .map(|x| {
                let mut acc = ComplexVec3::zeros();
                for (y, gy) in g.iter().enumerate() {
                    acc += data.block(x, y) * gy;
                }
                nu.cross(&(acc * w)).cross(&nu)
            })
            .collect())
    }

    /// `conj(H* conj(T H g))` on the grid nodes.
    pub fn factored_operator(&self, g: &[ComplexVec3]) -> Result<Vec<ComplexVec3>> {
        let hg = self.herglotz_on_scene(g)?;
        let thg: Vec<ComplexVec3> = self.apply_t(&hg)?.iter().map(conj3).collect();
        Ok(self.adjoint_field(&thg)?.iter().map(conj3).collect())
    }

    /// Relative mismatch between `(N g) × ν` and `conj(H* conj(T H g))`.
    pub fn factorization_residual(&self, g: &[ComplexVec3]) -> Result<f64> {
        let data = self.synthesize()?;
        self.factorization_residual_with(&data, g)
    }

    pub fn factorization_residual_with(&self, data: &PointSourceData, g: &[ComplexVec3]) -> Result<f64> {
        let lhs = self.data_operator_cross_nu(data, g)?;
        let rhs = self.factored_operator(g)?;
        let norm: f64 = lhs.iter().map(|v| v.norm_squared()).sum::<f64>().sqrt();
        if norm == 0.0 {
            let other: f64 = rhs.iter().map(|v| v.norm_squared()).sum::<f64>().sqrt();
            return Ok(if other == 0.0 { 0.0 } else { f64::INFINITY });
        }
        let diff: f64 = lhs
            .iter()
            .zip(&rhs)
            .map(|(a, b)| (a - b).norm_squared())
            .sum::<f64>()
            .sqrt();
        Ok(diff / norm)
    }

    /// `⟨a, b⟩_D = Σ_v vol_v a(v)·conj(b(v))`.
    pub fn inner_scene(&self, a: &[ComplexVec3], b: &[ComplexVec3]) -> Complex64 {
        self.scene
            .voxels
            .iter()
            .zip(a.iter().zip(b))
            .map(|(v, (x, y))| x.dotc(y).conj() * v.volume)
            .sum()
    }

    /// `⟨a, b⟩_{Σ_r} = Σ_nodes weight · a(x)·conj(b(x))`.
    pub fn inner_plane(&self, a: &[ComplexVec3], b: &[ComplexVec3]) -> Complex64 {
        let w = self.grid.weight();
        a.iter().zip(b).map(|(x, y)| x.dotc(y).conj() * w).sum()
    }

    fn check_density(&self, g: &[ComplexVec3]) -> Result<()> {
        if g.len() != self.grid.len() {
            return Err(Error::DimensionMismatch {
                expected: self.grid.len(),
                found: g.len(),
            });
        }
        Ok(())
    }
}

fn nu_vec() -> ComplexVec3 {
    ComplexVec3::new(NU[0].into(), NU[1].into(), NU[2].into())
}

/// `(ν × w) × ν`
fn tangential(w: &ComplexVec3) -> ComplexVec3 {
    let nu = nu_vec();
    nu.cross(w).cross(&nu)
}

fn conj3(v: &ComplexVec3) -> ComplexVec3 {
    v.map(|c| c.conj())
}

fn build_coupling(scene: &Scene, plane_green: &GreenEvaluator) -> Result<Coupling> {
    let n = scene.len();
    let Some(gap) = scene.min_internal_gap() else {
        return Ok(Coupling {
            n,
            blocks: vec![None; n * n],
        });
    };
    let basis = plane_green.basis();
    let green = GreenEvaluator::new(*basis.spec(), basis.wavenumber(), gap)?;
    let k2 = basis.k() * basis.k();
    let vox = &scene.voxels;
    let blocks = (0..n * n)
        .into_par_iter()
        .map(|idx| {
            let (v, vp) = (idx / n, idx % n);
            let (a, b) = (vox[v].center, vox[vp].center);
            if v == vp || (a.x3 - b.x3).abs() < gap * (1.0 - 1e-9) {
                return Ok(None);
            }
            let g = green.green_half(a, b)?;
            Ok(Some(g * (k2 * vox[vp].volume * vox[vp].contrast())))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Coupling { n, blocks })
}

fn ls_solve(c: &Coupling, incident: &[ComplexVec3], tol: f64, max_iter: usize) -> Result<TotalField> {
    let norm = |v: &[ComplexVec3]| v.iter().map(|x| x.norm_squared()).sum::<f64>().sqrt();
    let mut w = incident.to_vec();
    let mut iterations = 0;
    loop {
        let kw = c.apply(&w);
        let next: Vec<ComplexVec3> = incident.iter().zip(&kw).map(|(a, b)| a + b).collect();
        let wn = norm(&w);
        let diff: f64 = next
            .iter()
            .zip(&w)
            .map(|(a, b)| (a - b).norm_squared())
            .sum::<f64>()
            .sqrt();
        let residual = if wn == 0.0 { 0.0 } else { diff / wn };
        if !residual.is_finite() {
            return Err(Error::LsDiverged { iterations, residual });
        }
        if residual < tol {
            return Ok(TotalField {
                field: w,
                residual,
                iterations,
            });
        }
        if iterations >= max_iter {
            return Err(Error::LsDiverged { iterations, residual });
        }
        w = next;
        iterations += 1;
    }
}
