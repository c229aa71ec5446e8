//! The test function `Ψ`, the modal data matrix `U`, the projection vectors
//! `g^ℓ` and the imaging function `I(z) = Σ_ℓ |(g^ℓ)ᵀ U g^ℓ|`.
//!
//! Everything here runs over the propagating modes only. Row and column `j`
//! of `U` refer to TE mode `j` for `j < M` and TM mode `j − M` otherwise; the
//! first index is the source-side (`y`) projection, the second the
//! receiver-side (`x`) projection. Both projections evaluate the mode vectors
//! at the mirrored points `y⁻`, `x⁻`.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{ComplexVec3, DyadicField, Point3, RealVec3};
use crate::modes::{
    enumerate_modes, mode_field, EvanescentPolicy, FieldKind, ModeBasis, ModeIndex, TransverseTrig, WaveguideSpec,
    Wavenumber,
};
use crate::operators::{MeasurementGrid, PointSourceData};

/// How [`Imager::g_vector`] evaluates its surface integrals.
#[derive(Debug, Clone, Copy)]
pub enum GVectorMode<'a> {
    /// Closed form from mode orthogonality on the measurement plane.
    Analytic,
    /// Midpoint quadrature of the defining integrals on the given grid.
    Quadrature(&'a MeasurementGrid),
}

/// Modal data matrix with provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrixU {
    pub te: usize,
    pub tm: usize,
    pub k: f64,
    pub grid: MeasurementGrid,
    pub scene_id: String,
    pub noise_level: f64,
    pub seed: u64,
    values: Vec<Complex64>,
}

impl DataMatrixU {
    pub fn zeros(te: usize, tm: usize, k: f64, grid: MeasurementGrid) -> Self {
        let dim = te + tm;
        Self {
            te,
            tm,
            k,
            grid,
            scene_id: String::new(),
            noise_level: 0.0,
            seed: 0,
            values: vec![Complex64::new(0.0, 0.0); dim * dim],
        }
    }

    pub fn from_values(te: usize, tm: usize, k: f64, grid: MeasurementGrid, values: Vec<Complex64>) -> Result<Self> {
        let dim = te + tm;
        if values.len() != dim * dim {
            return Err(Error::DimensionMismatch {
                expected: dim * dim,
                found: values.len(),
            });
        }
        Ok(Self {
            values,
            ..Self::zeros(te, tm, k, grid)
        })
    }

    pub fn dim(&self) -> usize {
        self.te + self.tm
    }

    /// Entry `U_{jj'}` (source-side `j`, receiver-side `j'`).
    pub fn get(&self, j: usize, jp: usize) -> Complex64 {
        self.values[j * self.dim() + jp]
    }

    pub fn set(&mut self, j: usize, jp: usize, v: Complex64) {
        let d = self.dim();
        self.values[j * d + jp] = v;
    }

    /// Row-major entries.
    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.values.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn scaled(&self, c: Complex64) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= c);
        out
    }

    pub fn with_scene_id(mut self, id: impl Into<String>) -> Self {
        self.scene_id = id.into();
        self
    }

    /// `(g)ᵀ U g` with plain transposes.
    pub fn quadratic_form(&self, g: &[Complex64]) -> Complex64 {
        let d = self.dim();
        (0..d)
            .map(|j| {
                let row = &self.values[j * d..(j + 1) * d];
                let s: Complex64 = row.iter().zip(g).map(|(u, gp)| u * gp).sum();
                g[j] * s
            })
            .sum()
    }
}

/// `U + level·‖U‖_F/√(2·dim²)·(G1 + i·G2)` with standard Gaussians drawn from
/// a ChaCha8 stream seeded by `seed`, two draws per entry in row-major order.
pub fn add_noise(u: &DataMatrixU, level: f64, seed: u64) -> Result<DataMatrixU> {
    if !(level.is_finite() && level >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "noise level must be finite and non-negative, got {level}"
        )));
    }
    let mut out = u.clone();
    out.noise_level = level;
    out.seed = seed;
    if level == 0.0 || u.dim() == 0 {
        return Ok(out);
    }
    let sigma = level * u.frobenius_norm() / (2.0 * (u.dim() * u.dim()) as f64).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for v in out.values.iter_mut() {
        let g1: f64 = StandardNormal.sample(&mut rng);
        let g2: f64 = StandardNormal.sample(&mut rng);
        *v += Complex64::new(g1, g2) * sigma;
    }
    Ok(out)
}

/// Uniformly spaced coordinates `start + i·step`, `i < count`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatticeAxis {
    pub start: f64,
    pub step: f64,
    pub count: usize,
}

impl LatticeAxis {
    pub fn new(start: f64, step: f64, count: usize) -> Self {
        Self { start, step, count }
    }

    pub fn single(value: f64) -> Self {
        Self::new(value, 1.0, 1)
    }

    /// Nodes from `start` to `stop` inclusive (up to rounding) with spacing `step`.
    pub fn from_range(start: f64, stop: f64, step: f64) -> Result<Self> {
        if !(step > 0.0 && start.is_finite() && stop.is_finite()) || stop < start {
            return Err(Error::InvalidParameter(format!(
                "lattice axis needs start <= stop and step > 0, got {start}..{stop} step {step}"
            )));
        }
        let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
        Ok(Self::new(start, step, count))
    }

    pub fn value(&self, i: usize) -> f64 {
        self.start + i as f64 * self.step
    }

    /// Index of the node closest to `v`.
    pub fn nearest(&self, v: f64) -> usize {
        if self.count <= 1 {
            return 0;
        }
        let i = ((v - self.start) / self.step).round();
        i.clamp(0.0, (self.count - 1) as f64) as usize
    }
}

/// Tensor-product sampling lattice; `x1` varies fastest.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Lattice {
    pub x1: LatticeAxis,
    pub x2: LatticeAxis,
    pub x3: LatticeAxis,
}

impl Lattice {
    pub fn new(x1: LatticeAxis, x2: LatticeAxis, x3: LatticeAxis) -> Self {
        Self { x1, x2, x3 }
    }

    pub fn dims(&self) -> [usize; 3] {
        [self.x1.count, self.x2.count, self.x3.count]
    }

    pub fn len(&self) -> usize {
        self.x1.count * self.x2.count * self.x3.count
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, i1: usize, i2: usize, i3: usize) -> usize {
        i1 + self.x1.count * (i2 + self.x2.count * i3)
    }

    pub fn split(&self, idx: usize) -> [usize; 3] {
        let (n1, n2) = (self.x1.count, self.x2.count);
        [idx % n1, (idx / n1) % n2, idx / (n1 * n2)]
    }

    pub fn point(&self, idx: usize) -> Point3 {
        let [i1, i2, i3] = self.split(idx);
        Point3::new(self.x1.value(i1), self.x2.value(i2), self.x3.value(i3))
    }

    pub fn points(&self) -> Vec<Point3> {
        (0..self.len()).map(|i| self.point(i)).collect()
    }
}

/// Sampled image: raw values and their normalized counterparts.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageVolume {
    pub lattice: Lattice,
    /// Unnormalized values (`I(z)` for images).
    pub raw: Vec<f64>,
    /// Plotted values scaled so that the maximum is 1 (`I²/max I²` for images).
    pub values: Vec<f64>,
}

impl ImageVolume {
    /// Squares `raw` and normalizes.
    pub fn from_image(lattice: Lattice, raw: Vec<f64>) -> Self {
        let sq: Vec<f64> = raw.iter().map(|v| v * v).collect();
        Self {
            lattice,
            values: normalize(&sq),
            raw,
        }
    }

    /// Normalizes `raw` without squaring.
    pub fn from_intensity(lattice: Lattice, raw: Vec<f64>) -> Self {
        Self {
            lattice,
            values: normalize(&raw),
            raw,
        }
    }

    pub fn argmax(&self) -> Option<(usize, Point3)> {
        let i = self.values.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1))?.0;
        Some((i, self.lattice.point(i)))
    }

    pub fn value(&self, i1: usize, i2: usize, i3: usize) -> f64 {
        self.values[self.lattice.index(i1, i2, i3)]
    }

    /// Strict local maxima above `threshold` of the normalized values in the
    /// `x1x2` slice `i3`, using the 8-neighbourhood. Ties on a plateau are
    /// resolved in favour of the node that comes first in storage order.
    pub fn slice_local_maxima(&self, i3: usize, threshold: f64) -> Vec<(Point3, f64)> {
        let [n1, n2, _] = self.lattice.dims();
        let mut out = Vec::new();
        for i2 in 0..n2 {
            for i1 in 0..n1 {
                let v = self.value(i1, i2, i3);
                if v <= threshold {
                    continue;
                }
                let mut is_max = true;
                'nb: for d2 in -1i64..=1 {
                    for d1 in -1i64..=1 {
                        if d1 == 0 && d2 == 0 {
                            continue;
                        }
                        let (j1, j2) = (i1 as i64 + d1, i2 as i64 + d2);
                        if j1 < 0 || j2 < 0 || j1 >= n1 as i64 || j2 >= n2 as i64 {
                            continue;
                        }
                        let w = self.value(j1 as usize, j2 as usize, i3);
                        let earlier = (d2, d1) < (0, 0);
                        if w > v || (earlier && w == v) {
                            is_max = false;
                            break 'nb;
                        }
                    }
                }
                if is_max {
                    out.push((self.lattice.point(self.lattice.index(i1, i2, i3)), v));
                }
            }
        }
        out
    }
}

fn normalize(v: &[f64]) -> Vec<f64> {
    let max = v.iter().cloned().fold(0.0, f64::max);
    if max > 0.0 {
        v.iter().map(|x| x / max).collect()
    } else {
        vec![0.0; v.len()]
    }
}

fn axial_phase(axial: Complex64, x3: f64) -> Complex64 {
    (Complex64::i() * axial * x3).exp()
}

/// `M(x) − M(x⁻)`.
fn te_image_diff(trig: &TransverseTrig, m: &ModeIndex, k: f64, x3: f64) -> ComplexVec3 {
    mode_field(trig, m, k, axial_phase(m.axial, x3), FieldKind::M)
        - mode_field(trig, m, k, axial_phase(m.axial, -x3), FieldKind::M)
}

/// `[P(x) − P(x⁻)] + [Q(x) + Q(x⁻)]`.
fn tm_image_sum(trig: &TransverseTrig, m: &ModeIndex, k: f64, x3: f64) -> ComplexVec3 {
    let (e1, e2) = (axial_phase(m.axial, x3), axial_phase(m.axial, -x3));
    mode_field(trig, m, k, e1, FieldKind::P) - mode_field(trig, m, k, e2, FieldKind::P)
        + mode_field(trig, m, k, e1, FieldKind::Q)
        + mode_field(trig, m, k, e2, FieldKind::Q)
}

fn conj3(v: ComplexVec3) -> ComplexVec3 {
    v.map(|c| c.conj())
}

/// Evaluates the imaging quantities for one guide and wavenumber.
#[derive(Debug, Clone)]
pub struct Imager {
    basis: ModeBasis,
}

impl Imager {
    pub fn new(spec: WaveguideSpec, k: Wavenumber) -> Result<Self> {
        let basis = enumerate_modes(spec, k, EvanescentPolicy::PropagatingOnly)?;
        Ok(Self { basis })
    }

    /// Uses the propagating part of an existing basis.
    pub fn from_basis(basis: &ModeBasis) -> Self {
        Self {
            basis: basis.propagating_only(),
        }
    }

    pub fn basis(&self) -> &ModeBasis {
        &self.basis
    }

    /// `M + N`.
    pub fn dim(&self) -> usize {
        self.basis.m() + self.basis.n()
    }

    fn k(&self) -> f64 {
        self.basis.k()
    }

    fn te(&self) -> &[ModeIndex] {
        self.basis.propagating_te()
    }

    fn tm(&self) -> &[ModeIndex] {
        self.basis.propagating_tm()
    }

    fn check_inside(&self, p: Point3) -> Result<()> {
        if self.basis.spec().contains_closure(p) {
            Ok(())
        } else {
            Err(Error::PointOutsideHalfGuide(p))
        }
    }

    /// Source-side vectors: `conj(M_j)(y⁻)` for TE and `conj(P_j)(y⁻)` for TM.
    fn psi_source_factors(&self, y: Point3) -> (Vec<ComplexVec3>, Vec<ComplexVec3>) {
        let k = self.k();
        let trig = self.basis.trig(y.x1, y.x2);
        let te = self
            .te()
            .iter()
            .map(|m| conj3(mode_field(&trig, m, k, axial_phase(m.axial, -y.x3), FieldKind::M)))
            .collect();
        let tm = self
            .tm()
            .iter()
            .map(|m| conj3(mode_field(&trig, m, k, axial_phase(m.axial, -y.x3), FieldKind::P)))
            .collect();
        (te, tm)
    }

    /// `conj(M(z) − M(z⁻))` for TE and the conjugated TM image sum.
    fn psi_target_factors(&self, z: Point3) -> (Vec<ComplexVec3>, Vec<ComplexVec3>) {
        let k = self.k();
        let trig = self.basis.trig(z.x1, z.x2);
        let te = self
            .te()
            .iter()
            .map(|m| conj3(te_image_diff(&trig, m, k, z.x3)))
            .collect();
        let tm = self
            .tm()
            .iter()
            .map(|m| conj3(tm_image_sum(&trig, m, k, z.x3)))
            .collect();
        (te, tm)
    }

    /// Test function `Ψ(y; z)` as a finite sum over the propagating modes.
    pub fn psi_matrix(&self, y: Point3, z: Point3) -> Result<DyadicField> {
        self.check_inside(y)?;
        self.check_inside(z)?;
        if z.x3 == y.x3 {
            return Err(Error::SeparationViolated(format!(
                "test point {z} lies on the plane of {y}"
            )));
        }
        let k = self.k();
        let i = Complex64::i();
        let (ys_te, ys_tm) = self.psi_source_factors(y);
        let (zs_te, zs_tm) = self.psi_target_factors(z);
        let mut psi = DyadicField::zeros();
        for ((m, a), b) in self.te().iter().zip(&ys_te).zip(&zs_te) {
            let c = -i * m.axial / (2.0 * m.cutoff_sq());
            psi += a * b.transpose() * c;
        }
        for ((m, a), b) in self.tm().iter().zip(&ys_tm).zip(&zs_tm) {
            let c = i * (k * k) / (2.0 * m.cutoff_sq() * m.axial);
            psi += a * b.transpose() * c;
        }
        Ok(psi)
    }

    /// `HΨ(x; z) e_j` from the modal sum, evaluated term by term in complex
    /// arithmetic. The result is real up to rounding.
    pub fn h_psi_modal_complex(&self, x: Point3, z: Point3, j: usize) -> Result<ComplexVec3> {
        self.check_inside(x)?;
        self.check_inside(z)?;
        let j = axis(j)?;
        let k = self.k();
        let i = Complex64::i();
        let (tx, tz) = (self.basis.trig(x.x1, x.x2), self.basis.trig(z.x1, z.x2));
        let mut out = ComplexVec3::zeros();
        for m in self.te() {
            let c = i / (2.0 * m.axial * m.cutoff_sq());
            let coef = -i * c * m.axial / 2.0;
            let zx = te_image_diff(&tz, m, k, z.x3)[j].conj();
            out += te_image_diff(&tx, m, k, x.x3) * (coef * zx);
        }
        for m in self.tm() {
            let d = -i / (2.0 * m.axial * m.cutoff_sq());
            let coef = i * d * m.axial / 2.0;
            let zx = tm_image_sum(&tz, m, k, z.x3)[j].conj();
            out += tm_image_sum(&tx, m, k, x.x3) * (coef * zx);
        }
        Ok(out)
    }

    /// Real part of [`h_psi_modal_complex`](Self::h_psi_modal_complex); the
    /// point-spread function of the method.
    pub fn h_psi_modal(&self, x: Point3, z: Point3, j: usize) -> Result<RealVec3> {
        Ok(self.h_psi_modal_complex(x, z, j)?.map(|c| c.re))
    }

    /// `Σ_j |HΨ(x; z) e_j|²`.
    pub fn psf_intensity(&self, x: Point3, z: Point3) -> Result<f64> {
        let mut s = 0.0;
        for j in 0..3 {
            s += self.h_psi_modal(x, z, j)?.norm_squared();
        }
        Ok(s)
    }

    /// `g^ℓ(z)` of length `M + N`.
    pub fn g_vector(&self, z: Point3, l: usize, mode: GVectorMode<'_>) -> Result<Vec<Complex64>> {
        self.check_inside(z)?;
        let l = axis(l)?;
        match mode {
            GVectorMode::Analytic => Ok(self.g_vectors_analytic(z)[l].clone()),
            GVectorMode::Quadrature(grid) => self.g_vector_quadrature(z, l, grid),
        }
    }

    /// All three `g^ℓ(z)` in closed form.
    fn g_vectors_analytic(&self, z: Point3) -> [Vec<Complex64>; 3] {
        let i = Complex64::i();
        let (zs_te, zs_tm) = self.psi_target_factors(z);
        let mut g: [Vec<Complex64>; 3] = Default::default();
        for (l, gl) in g.iter_mut().enumerate() {
            gl.reserve(self.dim());
            for (m, a) in self.te().iter().zip(&zs_te) {
                gl.push(-i * m.axial / 2.0 * a[l]);
            }
            for (m, b) in self.tm().iter().zip(&zs_tm) {
                gl.push(i * m.axial / 2.0 * b[l]);
            }
        }
        g
    }

    fn g_vector_quadrature(&self, z: Point3, l: usize, grid: &MeasurementGrid) -> Result<Vec<Complex64>> {
        if grid.spec != *self.basis.spec() {
            return Err(Error::InvalidGrid("grid belongs to a different waveguide".into()));
        }
        let mut g = vec![Complex64::new(0.0, 0.0); self.dim()];
        let w = grid.weight();
        for y in grid.nodes() {
            let col = self.psi_matrix(y, z)?.column(l).into_owned();
            for (gj, phi) in g.iter_mut().zip(self.mode_vectors_mirrored(y)) {
                *gj += phi.dot(&col) * w;
            }
        }
        Ok(g)
    }

    /// `M_j(y⁻)` for TE and `(P_j − Q_j)(y⁻)` for TM, in `U` index order.
    fn mode_vectors_mirrored(&self, y: Point3) -> Vec<ComplexVec3> {
        let k = self.k();
        let trig = self.basis.trig(y.x1, y.x2);
        let te = self
            .te()
            .iter()
            .map(|m| mode_field(&trig, m, k, axial_phase(m.axial, -y.x3), FieldKind::M));
        let tm = self.tm().iter().map(|m| {
            let e = axial_phase(m.axial, -y.x3);
            mode_field(&trig, m, k, e, FieldKind::P) - mode_field(&trig, m, k, e, FieldKind::Q)
        });
        te.chain(tm).collect()
    }

    /// Projection vectors of `U`: conjugated mirrored mode vectors divided by
    /// the squared cutoff.
    fn projection_vectors(&self, y: Point3) -> Vec<ComplexVec3> {
        let cut: Vec<f64> = self.te().iter().chain(self.tm()).map(|m| m.cutoff_sq()).collect();
        self.mode_vectors_mirrored(y)
            .into_iter()
            .zip(cut)
            .map(|(v, c)| conj3(v) / Complex64::from(c))
            .collect()
    }

    /// Projects point-source data onto the propagating modes in two stages:
    /// first over sources, then over receivers.
    pub fn assemble_u(&self, data: &PointSourceData) -> Result<DataMatrixU> {
        let grid = data.grid;
        if grid.spec != *self.basis.spec() || data.k != self.k() {
            return Err(Error::InvalidGrid(
                "data were synthesized for a different waveguide or wavenumber".into(),
            ));
        }
        grid.check_nyquist(&self.basis)?;
        let nn = grid.len();
        if data.blocks.len() != nn * nn {
            return Err(Error::DimensionMismatch {
                expected: nn * nn,
                found: data.blocks.len(),
            });
        }
        let dim = self.dim();
        let w = Complex64::from(grid.weight());
        let phi: Vec<Vec<ComplexVec3>> = grid.nodes().par_iter().map(|&y| self.projection_vectors(y)).collect();

        // stage 1: V[x][j] = Σ_y w U^s(x;y) φ_j(y)
        let stage1: Vec<Vec<ComplexVec3>> = (0..nn)
            .into_par_iter()
            .map(|x| {
                let mut acc = vec![ComplexVec3::zeros(); dim];
                for (y, phy) in phi.iter().enumerate() {
                    let b = data.block(x, y);
                    for (a, p) in acc.iter_mut().zip(phy) {
                        *a += b * p;
                    }
                }
                acc.iter_mut().for_each(|a| *a *= w);
                acc
            })
            .collect();

        // stage 2: U_{jj'} = Σ_x w φ_{j'}(x)ᵀ V[x][j]
        let rows: Vec<Vec<Complex64>> = (0..dim)
            .into_par_iter()
            .map(|j| {
                let mut row = vec![Complex64::new(0.0, 0.0); dim];
                for (phx, vx) in phi.iter().zip(&stage1) {
                    let v = vx[j];
                    for (r, p) in row.iter_mut().zip(phx) {
                        *r += p.dot(&v);
                    }
                }
                row.iter_mut().for_each(|r| *r *= w);
                row
            })
            .collect();
        DataMatrixU::from_values(
            self.basis.m(),
            self.basis.n(),
            self.k(),
            grid,
            rows.into_iter().flatten().collect(),
        )
    }

    fn check_u(&self, u: &DataMatrixU) -> Result<()> {
        if u.te != self.basis.m() || u.tm != self.basis.n() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: u.dim(),
            });
        }
        Ok(())
    }

    /// `I(z) = Σ_ℓ |(g^ℓ)ᵀ U g^ℓ|`.
    pub fn imaging_value(&self, u: &DataMatrixU, z: Point3) -> Result<f64> {
        self.check_u(u)?;
        self.check_inside(z)?;
        Ok(self.imaging_value_unchecked(u, z))
    }

    fn imaging_value_unchecked(&self, u: &DataMatrixU, z: Point3) -> f64 {
        self.g_vectors_analytic(z)
            .iter()
            .map(|g| u.quadratic_form(g).norm())
            .sum()
    }

    /// Rejects empty lattices, lattices leaving the half-guide and, given the
    /// plane position `r`, lattices reaching down to the plane.
    pub fn check_lattice(&self, lattice: &Lattice, r: Option<f64>) -> Result<()> {
        if lattice.is_empty() {
            return Err(Error::EmptyLattice);
        }
        let axes = [lattice.x1, lattice.x2, lattice.x3];
        let lo = Point3::new(axes[0].start, axes[1].start, axes[2].start);
        let hi = Point3::new(
            axes[0].value(axes[0].count - 1),
            axes[1].value(axes[1].count - 1),
            axes[2].value(axes[2].count - 1),
        );
        self.check_inside(lo)?;
        self.check_inside(hi)?;
        if let Some(r) = r {
            if lo.x3 <= r {
                return Err(Error::SeparationViolated(format!(
                    "lattice reaches x3={} at or below the measurement plane x3={r}",
                    lo.x3
                )));
            }
        }
        Ok(())
    }

    /// `I(z)` on every lattice node, squared and normalized.
    pub fn image_volume(&self, u: &DataMatrixU, lattice: &Lattice) -> Result<ImageVolume> {
        self.check_u(u)?;
        self.check_lattice(lattice, Some(u.grid.r))?;
        let raw = (0..lattice.len())
            .into_par_iter()
            .map(|i| self.imaging_value_unchecked(u, lattice.point(i)))
            .collect();
        Ok(ImageVolume::from_image(*lattice, raw))
    }

    /// `Σ_j |HΨ(x_star; z) e_j|²` on every lattice node, normalized.
    pub fn psf_volume(&self, x_star: Point3, lattice: &Lattice) -> Result<ImageVolume> {
        self.check_inside(x_star)?;
        self.check_lattice(lattice, None)?;
        let raw = (0..lattice.len())
            .into_par_iter()
            .map(|i| self.psf_intensity(x_star, lattice.point(i)))
            .collect::<Result<Vec<_>>>()?;
        Ok(ImageVolume::from_intensity(*lattice, raw))
    }
}

fn axis(j: usize) -> Result<usize> {
    if j < 3 {
        Ok(j)
    } else {
        Err(Error::InvalidParameter(format!(
            "axis index must be 0, 1 or 2, got {j}"
        )))
    }
}
