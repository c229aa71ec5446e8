//! Modal dyadic Green functions of the full and the terminating waveguide.
//!
//! For an observer above the source (`x3 > y3`) the terminating-guide series is
//!
//! ```text
//! G(x;y) = Σ_m c_m [M_m(x) − M_m(x⁻)] M_m(y⁻)ᵀ
//!        + Σ_n d_n ([P_n(x) − P_n(x⁻)] + [Q_n(x) + Q_n(x⁻)]) [P_n(y⁻) − Q_n(y⁻)]ᵀ
//! ```
//!
//! with `c_m = i/(2 h_m λ_m²)` and `d_n = −i/(2 g_n μ_n²)`; the other branch is
//! its transpose with the arguments exchanged. Every term factors into a real
//! transverse outer product times the axial exponentials
//! `E1 = e^{i·axial·(x3−y3)}` and `E2 = e^{−i·axial·(x3+y3)}`, which is how the
//! series is summed here. The full-guide series keeps only the `E1` part.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::geometry::{DyadicField, Point3, RealVec3};
use crate::modes::{enumerate_modes, EvanescentPolicy, ModeBasis, TransverseTrig, WaveguideSpec, Wavenumber};

/// Variable of an axial derivative of `G(x;y)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AxialVariable {
    /// `∂/∂x3`
    Observer,
    /// `∂/∂y3`
    Source,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Deriv {
    None,
    First,
    Second,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Series {
    Full,
    Half,
}

#[derive(Debug, Clone)]
pub struct GreenEvaluator {
    basis: ModeBasis,
    min_axial_gap: f64,
    te_coef: Vec<Complex64>,
    tm_coef: Vec<Complex64>,
}

impl GreenEvaluator {
    /// Builds the evaluator with evanescent modes retained down to the default
    /// decay threshold at `min_axial_gap`.
    pub fn new(spec: WaveguideSpec, k: Wavenumber, min_axial_gap: f64) -> Result<Self> {
        let basis = enumerate_modes(spec, k, EvanescentPolicy::decay(min_axial_gap))?;
        Self::with_basis(basis, min_axial_gap)
    }

    pub fn with_basis(basis: ModeBasis, min_axial_gap: f64) -> Result<Self> {
        if !(min_axial_gap >= 0.0) {
            return Err(Error::InvalidGeometry(format!(
                "minimum axial gap must be non-negative, got {min_axial_gap}"
            )));
        }
        let i = Complex64::i();
        let te_coef = basis
            .te_modes()
            .iter()
            .map(|m| i / (2.0 * m.axial * m.cutoff_sq()))
            .collect();
        let tm_coef = basis
            .tm_modes()
            .iter()
            .map(|m| -i / (2.0 * m.axial * m.cutoff_sq()))
            .collect();
        Ok(Self {
            basis,
            min_axial_gap,
            te_coef,
            tm_coef,
        })
    }

    pub fn basis(&self) -> &ModeBasis {
        &self.basis
    }

    pub fn min_axial_gap(&self) -> f64 {
        self.min_axial_gap
    }

    /// `c_m` for every TE mode of the basis.
    pub fn te_coefficients(&self) -> &[Complex64] {
        &self.te_coef
    }

    /// `d_n` for every TM mode of the basis.
    pub fn tm_coefficients(&self) -> &[Complex64] {
        &self.tm_coef
    }

    fn check_gap(&self, x: Point3, y: Point3) -> Result<()> {
        let sep = (x.x3 - y.x3).abs();
        if sep == 0.0 || sep < self.min_axial_gap * (1.0 - 1e-12) {
            return Err(Error::CoincidentAxialPlanes {
                separation: sep,
                min_gap: self.min_axial_gap,
            });
        }
        Ok(())
    }

    fn check_inside(&self, p: Point3) -> Result<()> {
        if !self.basis.spec().contains_closure(p) {
            return Err(Error::PointOutsideHalfGuide(p));
        }
        Ok(())
    }

    fn check_half(&self, x: Point3, y: Point3) -> Result<()> {
        self.check_inside(x)?;
        self.check_inside(y)?;
        self.check_gap(x, y)
    }

    /// Dyadic Green function of the infinite guide `Σ×ℝ`.
    pub fn green_full(&self, x: Point3, y: Point3) -> Result<DyadicField> {
        self.check_gap(x, y)?;
        Ok(self.oriented(x, y, Series::Full, Deriv::None, false))
    }

    /// Dyadic Green function of the terminating guide `Σ×(−∞,0)`.
    pub fn green_half(&self, x: Point3, y: Point3) -> Result<DyadicField> {
        self.check_half(x, y)?;
        Ok(self.oriented(x, y, Series::Half, Deriv::None, false))
    }

    /// Term-wise axial derivative of [`green_half`](Self::green_half).
    pub fn green_dx3(&self, x: Point3, y: Point3, with_respect_to: AxialVariable) -> Result<DyadicField> {
        self.check_half(x, y)?;
        let d = match with_respect_to {
            AxialVariable::Observer => Deriv::First,
            AxialVariable::Source => Deriv::Second,
        };
        Ok(self.oriented(x, y, Series::Half, d, false))
    }

    /// Same as [`green_dx3`](Self::green_dx3) but summed over the propagating
    /// modes only.
    pub fn green_dx3_propagating(&self, x: Point3, y: Point3, with_respect_to: AxialVariable) -> Result<DyadicField> {
        self.check_half(x, y)?;
        let d = match with_respect_to {
            AxialVariable::Observer => Deriv::First,
            AxialVariable::Source => Deriv::Second,
        };
        Ok(self.oriented(x, y, Series::Half, d, true))
    }

    /// Propagating part of `Re[∂G(x*;z)]·e_j`, the derivative taken in `x*3`
    /// when `x*3 < z3` and in `z3` otherwise.
    pub fn re_dgreen_propagating(&self, x_star: Point3, z: Point3, j: usize) -> Result<RealVec3> {
        let wrt = if x_star.x3 < z.x3 {
            AxialVariable::Observer
        } else {
            AxialVariable::Source
        };
        let g = self.green_dx3_propagating(x_star, z, wrt)?;
        let col = g.column(j);
        Ok(RealVec3::new(col[0].re, col[1].re, col[2].re))
    }

    /// Dispatches on the sign of `x3 − y3`; the lower branch is the transpose
    /// of the upper one with the points exchanged.
    fn oriented(&self, x: Point3, y: Point3, series: Series, d: Deriv, prop: bool) -> DyadicField {
        if x.x3 > y.x3 {
            self.upper(x, y, series, d, prop)
        } else {
            let swapped = match d {
                Deriv::None => Deriv::None,
                Deriv::First => Deriv::Second,
                Deriv::Second => Deriv::First,
            };
            self.upper(y, x, series, swapped, prop).transpose()
        }
    }

    /// Series for `x3 > y3`.
    fn upper(&self, x: Point3, y: Point3, series: Series, d: Deriv, prop: bool) -> DyadicField {
        let k = self.basis.k();
        let k2 = k * k;
        let tx = self.basis.trig(x.x1, x.x2);
        let ty = self.basis.trig(y.x1, y.x2);
        let i = Complex64::i();
        let dz = x.x3 - y.x3;
        let sz = x.x3 + y.x3;
        let half = series == Series::Half;

        // returns (s1·E1, s2·E2)
        let factors = |axial: Complex64| {
            let e1 = (i * axial * dz).exp();
            let e2 = if half {
                (-i * axial * sz).exp()
            } else {
                Complex64::new(0.0, 0.0)
            };
            match d {
                Deriv::None => (e1, e2),
                Deriv::First => (i * axial * e1, -i * axial * e2),
                Deriv::Second => (-i * axial * e1, -i * axial * e2),
            }
        };

        let mut acc = [[Complex64::new(0.0, 0.0); 3]; 3];

        let te = self.basis.te_modes();
        let te_count = if prop { self.basis.m() } else { te.len() };
        for (mode, c) in te[..te_count].iter().zip(&self.te_coef) {
            let (f1, f2) = factors(mode.axial);
            let w = c * (f1 - f2);
            add_te(&mut acc, w, &tx, &ty, mode);
        }

        let tm = self.basis.tm_modes();
        let tm_count = if prop { self.basis.n() } else { tm.len() };
        for (mode, dn) in tm[..tm_count].iter().zip(&self.tm_coef) {
            let (f1, f2) = factors(mode.axial);
            let g = mode.axial;
            let mu2 = mode.cutoff_sq();
            let (gx, vx) = tx.tm(mode);
            let (gy, vy) = ty.tm(mode);
            let minus = dn * (f1 - f2);
            let plus = dn * (f1 + f2);
            let tt = minus * (-(g * g) / k2);
            let ta = minus * (-i * g * mu2 / k2);
            let at = plus * (i * g * mu2 / k2);
            let aa = plus * (-(mu2 * mu2) / k2);
            for r in 0..2 {
                for s in 0..2 {
                    acc[r][s] += tt * (gx[r] * gy[s]);
                }
                acc[r][2] += ta * (gx[r] * vy);
                acc[2][r] += at * (vx * gy[r]);
            }
            acc[2][2] += aa * (vx * vy);
        }

        DyadicField::from_fn(|r, s| acc[r][s])
    }
}

#[inline]
fn add_te(
    acc: &mut [[Complex64; 3]; 3],
    w: Complex64,
    tx: &TransverseTrig,
    ty: &TransverseTrig,
    mode: &crate::modes::ModeIndex,
) {
    let mx = tx.te(mode);
    let my = ty.te(mode);
    for r in 0..2 {
        for s in 0..2 {
            acc[r][s] += w * (mx[r] * my[s]);
        }
    }
}
