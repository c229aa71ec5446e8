//! Waveguide cross-section, TE/TM mode enumeration and mode fields.
//!
//! The cross-section is `Σ = (0,a)×(0,b)` and the guide occupies `Σ×(−∞,0)`.
//! Transverse eigenfunctions are normalized to unit L² norm on `Σ`:
//!
//! ```text
//! û_m = cos(m1 π x1/a) cos(m2 π x2/b) / √κ_m      (TE family, λ_m² = (m1π/a)² + (m2π/b)²)
//! v̂_n = sin(n1 π x1/a) sin(n2 π x2/b) / √κ_n      (TM family, μ_n² = (n1π/a)² + (n2π/b)²)
//! ```
//!
//! and the vector mode fields are
//!
//! ```text
//! M_m(x) = (∂2û_m, −∂1û_m, 0) e^{i h_m x3}
//! P_n(x) = (i g_n ∂1v̂_n, i g_n ∂2v̂_n, 0) e^{i g_n x3} / k
//! Q_n(x) = (0, 0, μ_n² v̂_n) e^{i g_n x3} / k
//! ```
//!
//! with `h_m = √(k²−λ_m²)`, `g_n = √(k²−μ_n²)` taken on the branch `Im ≥ 0`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{czero, ComplexVec3, Point3};

/// Hard cap on the number of retained modes per family.
pub const MAX_MODES_PER_FAMILY: usize = 5000;

/// Default decay threshold for evanescent truncation.
pub const DEFAULT_DECAY_THRESHOLD: f64 = 1e-12;

const RESONANCE_RTOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WaveguideSpec {
    a: f64,
    b: f64,
}

impl WaveguideSpec {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !(a.is_finite() && a > 0.0) || !(b.is_finite() && b > 0.0) {
            return Err(Error::InvalidGeometry(format!(
                "cross-section extents must be positive and finite, got a={a}, b={b}"
            )));
        }
        Ok(Self { a, b })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn area(&self) -> f64 {
        self.a * self.b
    }

    /// True when `p` lies in the closure of the half-guide.
    pub fn contains_closure(&self, p: Point3) -> bool {
        let tol = 1e-12 * self.a.max(self.b);
        p.x1 >= -tol && p.x1 <= self.a + tol && p.x2 >= -tol && p.x2 <= self.b + tol && p.x3 <= tol
    }
}

#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct Wavenumber(f64);

impl Wavenumber {
    pub fn new(k: f64) -> Result<Self> {
        if !(k.is_finite() && k > 0.0) {
            return Err(Error::InvalidWavenumber(k));
        }
        Ok(Self(k))
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn wavelength(self) -> f64 {
        2.0 * PI / self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModeFamily {
    /// `M`-type modes built from the cosine eigenfunctions.
    Te,
    /// `P`/`Q`-type modes built from the sine eigenfunctions.
    Tm,
}

/// Which vector field of a mode to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldKind {
    M,
    P,
    Q,
}

impl FieldKind {
    fn name(self) -> &'static str {
        match self {
            FieldKind::M => "M",
            FieldKind::P => "P",
            FieldKind::Q => "Q",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModeIndex {
    pub family: ModeFamily,
    pub p1: u32,
    pub p2: u32,
    /// Ordinal within its family after sorting by cutoff.
    pub linear: usize,
    /// `λ_m` (TE) or `μ_n` (TM).
    pub cutoff: f64,
    /// `h_m` (TE) or `g_n` (TM), branch `Im ≥ 0`.
    pub axial: Complex64,
    pub propagating: bool,
    pub(crate) kx: f64,
    pub(crate) ky: f64,
    /// `1/√κ` for the unnormalized trigonometric product.
    pub(crate) inv_sqrt_norm: f64,
}

impl ModeIndex {
    fn new(spec: &WaveguideSpec, k: f64, family: ModeFamily, p1: u32, p2: u32) -> Result<Self> {
        let kx = p1 as f64 * PI / spec.a;
        let ky = p2 as f64 * PI / spec.b;
        let cutoff = PI * (lattice_key(spec, p1, p2)).sqrt() / (spec.a * spec.b);
        let axial = axial_wavenumber(k, cutoff).map_err(|_| Error::CutoffResonance {
            family,
            p1,
            p2,
            cutoff,
            k,
        })?;
        let kappa = normalizer(spec, p1, p2);
        Ok(Self {
            family,
            p1,
            p2,
            linear: 0,
            cutoff,
            axial,
            propagating: cutoff < k,
            kx,
            ky,
            inv_sqrt_norm: 1.0 / kappa.sqrt(),
        })
    }

    pub fn cutoff_sq(&self) -> f64 {
        self.cutoff * self.cutoff
    }
}

/// `(p1·b)² + (p2·a)²`, proportional to the squared cutoff and exact for
/// integer-valued extents, so that geometric ties compare equal.
fn lattice_key(spec: &WaveguideSpec, p1: u32, p2: u32) -> f64 {
    let (u, v) = (p1 as f64 * spec.b, p2 as f64 * spec.a);
    u * u + v * v
}

/// `√(k² − cutoff²)` on the branch `Im ≥ 0`.
pub fn axial_wavenumber(k: f64, cutoff: f64) -> Result<Complex64> {
    if (k - cutoff).abs() <= RESONANCE_RTOL * k.max(1.0) {
        return Err(Error::CutoffResonance {
            family: ModeFamily::Te,
            p1: 0,
            p2: 0,
            cutoff,
            k,
        });
    }
    let d = (k - cutoff) * (k + cutoff);
    Ok(if d > 0.0 {
        Complex64::new(d.sqrt(), 0.0)
    } else {
        Complex64::new(0.0, (-d).sqrt())
    })
}

/// `(x1, x2, x3) -> (x1, x2, −x3)`.
pub fn mirror_point(p: Point3) -> Point3 {
    p.mirrored()
}

fn normalizer(spec: &WaveguideSpec, p1: u32, p2: u32) -> f64 {
    let g = |p: u32| if p == 0 { 1.0 } else { 0.5 };
    spec.a * spec.b * g(p1) * g(p2)
}

/// L²(Σ) norm squared of the unnormalized transverse eigenfunction of `mode`.
pub fn transverse_normalizer(mode: &ModeIndex, spec: &WaveguideSpec) -> f64 {
    normalizer(spec, mode.p1, mode.p2)
}

/// How many evanescent modes the basis keeps beyond the propagating ones.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum EvanescentPolicy {
    PropagatingOnly,
    /// Keep evanescent modes while `exp(−|Im axial|·min_axial_gap) ≥ threshold`.
    Decay {
        min_axial_gap: f64,
        threshold: f64,
    },
    /// Keep a fixed number of the lowest evanescent modes per family.
    Count(usize),
}

impl EvanescentPolicy {
    pub fn decay(min_axial_gap: f64) -> Self {
        EvanescentPolicy::Decay {
            min_axial_gap,
            threshold: DEFAULT_DECAY_THRESHOLD,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ModeBasis {
    spec: WaveguideSpec,
    k: Wavenumber,
    te: Vec<ModeIndex>,
    tm: Vec<ModeIndex>,
    m_prop: usize,
    n_prop: usize,
    policy: EvanescentPolicy,
    max_p1: u32,
    max_p2: u32,
}

/// Enumerates the TE and TM modes of the guide, sorted by cutoff with ties
/// broken lexicographically on the index pair.
pub fn enumerate_modes(spec: WaveguideSpec, k: Wavenumber, policy: EvanescentPolicy) -> Result<ModeBasis> {
    let kv = k.value();
    let base_radius = match policy {
        EvanescentPolicy::PropagatingOnly | EvanescentPolicy::Count(_) => kv,
        EvanescentPolicy::Decay {
            min_axial_gap,
            threshold,
        } => {
            if !(min_axial_gap > 0.0) || !(threshold > 0.0 && threshold < 1.0) {
                return Err(Error::InvalidGeometry(format!(
                    "decay policy needs a positive gap and a threshold in (0,1), got {min_axial_gap}, {threshold}"
                )));
            }
            let decay = -threshold.ln() / min_axial_gap;
            (kv * kv + decay * decay).sqrt()
        }
    };
    // Resonance is checked for every lattice pair near k, even if the policy
    // would not retain it.
    let check_radius = kv * (1.0 + 2.0 * RESONANCE_RTOL) + RESONANCE_RTOL;

    let (te, tm, m_prop, n_prop) = match policy {
        EvanescentPolicy::Count(extra) => {
            let mut radius = check_radius;
            loop {
                let te = lattice_modes(&spec, kv, ModeFamily::Te, radius)?;
                let tm = lattice_modes(&spec, kv, ModeFamily::Tm, radius)?;
                let enough = |v: &[ModeIndex]| {
                    let prop = v.iter().filter(|m| m.propagating).count();
                    v.len() >= (prop + extra).min(MAX_MODES_PER_FAMILY.max(prop))
                };
                if enough(&te) && enough(&tm) {
                    let (te, m) = truncate_family(te, extra);
                    let (tm, n) = truncate_family(tm, extra);
                    break (te, tm, m, n);
                }
                radius *= 1.5;
            }
        }
        _ => {
            // Never enumerate far beyond what the per-family cap can retain.
            let cap_radius = (4.0 * PI * MAX_MODES_PER_FAMILY as f64 / spec.area()).sqrt() * 1.1
                + 2.0 * PI * (1.0 / spec.a + 1.0 / spec.b);
            let mut radius = base_radius.min(cap_radius).max(check_radius);
            let keep_all = |mut v: Vec<ModeIndex>| {
                v.retain(|m| m.propagating || m.cutoff <= base_radius);
                let extra = match policy {
                    EvanescentPolicy::PropagatingOnly => 0,
                    _ => v.len(),
                };
                truncate_family(v, extra)
            };
            loop {
                let te = lattice_modes(&spec, kv, ModeFamily::Te, radius)?;
                let tm = lattice_modes(&spec, kv, ModeFamily::Tm, radius)?;
                let short = te.len().min(tm.len()) < MAX_MODES_PER_FAMILY;
                if radius >= base_radius || !short {
                    let (te, m) = keep_all(te);
                    let (tm, n) = keep_all(tm);
                    break (te, tm, m, n);
                }
                radius = (radius * 1.3).min(base_radius);
            }
        }
    };

    let max_p1 = te.iter().chain(tm.iter()).map(|m| m.p1).max().unwrap_or(0);
    let max_p2 = te.iter().chain(tm.iter()).map(|m| m.p2).max().unwrap_or(0);

    Ok(ModeBasis {
        spec,
        k,
        te,
        tm,
        m_prop,
        n_prop,
        policy,
        max_p1,
        max_p2,
    })
}

fn truncate_family(mut modes: Vec<ModeIndex>, extra: usize) -> (Vec<ModeIndex>, usize) {
    let prop = modes.iter().filter(|m| m.propagating).count();
    modes.truncate((prop + extra).min(MAX_MODES_PER_FAMILY.max(prop)));
    for (i, m) in modes.iter_mut().enumerate() {
        m.linear = i;
    }
    (modes, prop)
}

fn lattice_modes(spec: &WaveguideSpec, k: f64, family: ModeFamily, radius: f64) -> Result<Vec<ModeIndex>> {
    let first = match family {
        ModeFamily::Te => 0,
        ModeFamily::Tm => 1,
    };
    let p1_max = (radius * spec.a / PI).floor() as u32;
    let p2_max = (radius * spec.b / PI).floor() as u32;
    let r2 = radius * radius;
    let mut out = Vec::new();
    for p1 in first..=p1_max {
        let kx = p1 as f64 * PI / spec.a;
        for p2 in first..=p2_max {
            if p1 == 0 && p2 == 0 {
                continue;
            }
            let ky = p2 as f64 * PI / spec.b;
            if kx * kx + ky * ky > r2 {
                break;
            }
            out.push(ModeIndex::new(spec, k, family, p1, p2)?);
        }
    }
    out.sort_by(|l, r| {
        lattice_key(spec, l.p1, l.p2)
            .total_cmp(&lattice_key(spec, r.p1, r.p2))
            .then((l.p1, l.p2).cmp(&(r.p1, r.p2)))
    });
    Ok(out)
}

/// Cosine/sine tables of one transverse position for all indices up to the
/// basis maxima.
#[derive(Debug, Clone)]
pub(crate) struct TransverseTrig {
    pub cx: Vec<f64>,
    pub sx: Vec<f64>,
    pub cy: Vec<f64>,
    pub sy: Vec<f64>,
}

impl TransverseTrig {
    pub fn new(spec: &WaveguideSpec, max_p1: u32, max_p2: u32, x1: f64, x2: f64) -> Self {
        let table = |n: u32, t: f64, len: f64| {
            let (mut c, mut s) = (Vec::with_capacity(n as usize + 1), Vec::with_capacity(n as usize + 1));
            for p in 0..=n {
                let (sp, cp) = (p as f64 * PI * t / len).sin_cos();
                c.push(cp);
                s.push(sp);
            }
            (c, s)
        };
        let (cx, sx) = table(max_p1, x1, spec.a);
        let (cy, sy) = table(max_p2, x2, spec.b);
        Self { cx, sx, cy, sy }
    }

    /// Transverse part of `M_m`: `(∂2û, −∂1û)`.
    #[inline]
    pub fn te(&self, m: &ModeIndex) -> [f64; 2] {
        let (i, j) = (m.p1 as usize, m.p2 as usize);
        let n = m.inv_sqrt_norm;
        [-n * m.ky * self.cx[i] * self.sy[j], n * m.kx * self.sx[i] * self.cy[j]]
    }

    /// `(∇v̂, v̂)` of a TM mode.
    #[inline]
    pub fn tm(&self, m: &ModeIndex) -> ([f64; 2], f64) {
        let (i, j) = (m.p1 as usize, m.p2 as usize);
        let n = m.inv_sqrt_norm;
        (
            [n * m.kx * self.cx[i] * self.sy[j], n * m.ky * self.sx[i] * self.cy[j]],
            n * self.sx[i] * self.sy[j],
        )
    }
}

impl ModeBasis {
    pub fn spec(&self) -> &WaveguideSpec {
        &self.spec
    }

    pub fn wavenumber(&self) -> Wavenumber {
        self.k
    }

    pub fn k(&self) -> f64 {
        self.k.value()
    }

    pub fn te_modes(&self) -> &[ModeIndex] {
        &self.te
    }

    pub fn tm_modes(&self) -> &[ModeIndex] {
        &self.tm
    }

    /// Number of propagating TE modes (`M`).
    pub fn m(&self) -> usize {
        self.m_prop
    }

    /// Number of propagating TM modes (`N`).
    pub fn n(&self) -> usize {
        self.n_prop
    }

    pub fn propagating_te(&self) -> &[ModeIndex] {
        &self.te[..self.m_prop]
    }

    pub fn propagating_tm(&self) -> &[ModeIndex] {
        &self.tm[..self.n_prop]
    }

    pub fn policy(&self) -> EvanescentPolicy {
        self.policy
    }

    /// A copy restricted to the propagating modes.
    pub fn propagating_only(&self) -> ModeBasis {
        let te = self.propagating_te().to_vec();
        let tm = self.propagating_tm().to_vec();
        let max_p1 = te.iter().chain(tm.iter()).map(|m| m.p1).max().unwrap_or(0);
        let max_p2 = te.iter().chain(tm.iter()).map(|m| m.p2).max().unwrap_or(0);
        ModeBasis {
            spec: self.spec,
            k: self.k,
            te,
            tm,
            m_prop: self.m_prop,
            n_prop: self.n_prop,
            policy: EvanescentPolicy::PropagatingOnly,
            max_p1,
            max_p2,
        }
    }

    /// Largest transverse indices `(p1, p2)` among the propagating modes.
    pub fn max_propagating_index(&self) -> (u32, u32) {
        let modes = self.propagating_te().iter().chain(self.propagating_tm());
        modes.fold((0, 0), |(a, b), m| (a.max(m.p1), b.max(m.p2)))
    }

    pub(crate) fn trig(&self, x1: f64, x2: f64) -> TransverseTrig {
        TransverseTrig::new(&self.spec, self.max_p1, self.max_p2, x1, x2)
    }

    /// Evaluates `M`, `P` or `Q` of `mode` at `point`, including the axial
    /// factor `e^{i·axial·x3}`.
    pub fn eval_mode_field(&self, mode: &ModeIndex, point: Point3, which: FieldKind) -> Result<ComplexVec3> {
        let compatible = matches!(
            (mode.family, which),
            (ModeFamily::Te, FieldKind::M) | (ModeFamily::Tm, FieldKind::P | FieldKind::Q)
        );
        if !compatible {
            return Err(Error::FamilyMismatch {
                family: mode.family,
                which: which.name(),
            });
        }
        let trig = TransverseTrig::new(&self.spec, mode.p1, mode.p2, point.x1, point.x2);
        let phase = (Complex64::i() * mode.axial * point.x3).exp();
        Ok(mode_field(&trig, mode, self.k(), phase, which))
    }
}

/// Mode field from a precomputed trig table and axial phase factor.
#[inline]
pub(crate) fn mode_field(
    trig: &TransverseTrig,
    mode: &ModeIndex,
    k: f64,
    phase: Complex64,
    which: FieldKind,
) -> ComplexVec3 {
    match which {
        FieldKind::M => {
            let t = trig.te(mode);
            ComplexVec3::new(phase * t[0], phase * t[1], czero())
        }
        FieldKind::P => {
            let (g, _) = trig.tm(mode);
            let f = Complex64::i() * mode.axial / k * phase;
            ComplexVec3::new(f * g[0], f * g[1], czero())
        }
        FieldKind::Q => {
            let (_, v) = trig.tm(mode);
            ComplexVec3::new(czero(), czero(), phase * (mode.cutoff_sq() / k * v))
        }
    }
}
