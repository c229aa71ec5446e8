mod common;

use std::f64::consts::PI;

use common::{guide, interior_point, rng, wavenumber};
use num_complex::Complex64;
use proptest::prelude::*;
use rand::Rng;
use waveguide_imaging::{
    enumerate_modes, ComplexVec3, Error, EvanescentPolicy, FieldKind, ModeBasis, ModeFamily, ModeIndex, Point3,
    WaveguideSpec, Wavenumber,
};

fn propagating(k: f64) -> ModeBasis {
    enumerate_modes(guide(), wavenumber(k), EvanescentPolicy::PropagatingOnly).unwrap()
}

/// Field of a mode as a function of position: `M` for TE, `P + Q` for TM.
fn mode_vector(basis: &ModeBasis, m: &ModeIndex, x: Point3) -> ComplexVec3 {
    match m.family {
        ModeFamily::Te => basis.eval_mode_field(m, x, FieldKind::M).unwrap(),
        ModeFamily::Tm => {
            basis.eval_mode_field(m, x, FieldKind::P).unwrap() + basis.eval_mode_field(m, x, FieldKind::Q).unwrap()
        }
    }
}

#[test]
fn propagating_counts_match_lattice_count() {
    let mut r = rng(11);
    for _ in 0..50 {
        let a = r.random_range(1.0..12.0);
        let b = r.random_range(1.0..12.0);
        let k = r.random_range(0.2..6.0);
        let spec = WaveguideSpec::new(a, b).unwrap();
        let basis = match enumerate_modes(spec, Wavenumber::new(k).unwrap(), EvanescentPolicy::PropagatingOnly) {
            Ok(b) => b,
            Err(Error::CutoffResonance { .. }) => continue,
            Err(e) => panic!("{e}"),
        };
        let (mut te, mut tm) = (0, 0);
        for p1 in 0..200u32 {
            for p2 in 0..200u32 {
                let c2 = (p1 as f64 * PI / a).powi(2) + (p2 as f64 * PI / b).powi(2);
                if c2 < k * k {
                    if p1 + p2 > 0 {
                        te += 1;
                    }
                    if p1 > 0 && p2 > 0 {
                        tm += 1;
                    }
                }
            }
        }
        assert_eq!((basis.m(), basis.n()), (te, tm), "a={a} b={b} k={k}");
    }
}

#[test]
fn mode_fields_solve_the_vector_helmholtz_equation() {
    let k = 3.0;
    let basis = enumerate_modes(guide(), wavenumber(k), EvanescentPolicy::Count(6)).unwrap();
    let mut r = rng(5);
    let modes: Vec<_> = basis.te_modes().iter().chain(basis.tm_modes()).collect();
    for m in modes.iter().step_by(7) {
        let x = interior_point(&mut r, basis.spec(), -8.0, -1.0);
        let f = |p: Point3| mode_vector(&basis, m, p);
        let e = f(x);
        let cc = common::curl_curl_fd(&f, x, 1e-3);
        let res = (cc - e * Complex64::from(k * k)).norm() / (k * k * e.norm());
        assert!(res < 1e-5, "{:?} ({},{}) residual {res:e}", m.family, m.p1, m.p2);
    }
}

#[test]
fn tangential_components_vanish_on_side_walls() {
    let basis = propagating(3.0);
    let mut r = rng(9);
    for m in basis.te_modes().iter().chain(basis.tm_modes()) {
        let t = r.random_range(0.1..9.9);
        let z = r.random_range(-9.0..-0.5);
        // wall x1 = const: tangential components are 2 and 3
        for x1 in [0.0, 10.0] {
            let v = mode_vector(&basis, m, Point3::new(x1, t, z));
            assert!(v[1].norm() < 1e-13 && v[2].norm() < 1e-13);
        }
        for x2 in [0.0, 10.0] {
            let v = mode_vector(&basis, m, Point3::new(t, x2, z));
            assert!(v[0].norm() < 1e-13 && v[2].norm() < 1e-13);
        }
    }
}

#[test]
fn midpoint_rule_is_orthogonal_on_the_measurement_plane() {
    let basis = propagating(3.0);
    let (p1, p2) = basis.max_propagating_index();
    let (n1, n2) = (2 * p1 as usize + 2, 2 * p2 as usize + 2);
    let (a, b, r) = (10.0, 10.0, -10.0);
    let w = a * b / (n1 * n2) as f64;
    // TE: M; TM: P − Q, the vectors used by the modal projections
    let vecs = |y: Point3| -> Vec<ComplexVec3> {
        let te = basis
            .te_modes()
            .iter()
            .map(|m| basis.eval_mode_field(m, y, FieldKind::M).unwrap());
        let tm = basis.tm_modes().iter().map(|m| {
            basis.eval_mode_field(m, y, FieldKind::P).unwrap() - basis.eval_mode_field(m, y, FieldKind::Q).unwrap()
        });
        te.chain(tm).collect()
    };
    let cut: Vec<f64> = basis
        .te_modes()
        .iter()
        .chain(basis.tm_modes())
        .map(|m| m.cutoff_sq())
        .collect();
    let dim = cut.len();
    let mut gram = vec![Complex64::new(0.0, 0.0); dim * dim];
    for i1 in 0..n1 {
        for i2 in 0..n2 {
            let y = Point3::new((i1 as f64 + 0.5) * a / n1 as f64, (i2 as f64 + 0.5) * b / n2 as f64, r);
            let v = vecs(y);
            for i in 0..dim {
                for j in 0..dim {
                    gram[i * dim + j] += v[i].dotc(&v[j]).conj() * w;
                }
            }
        }
    }
    for i in 0..dim {
        for j in 0..dim {
            let expect = if i == j { cut[i] } else { 0.0 };
            assert!(
                (gram[i * dim + j] - expect).norm() < 1e-10 * cut[i].max(1.0),
                "entry ({i},{j}) = {}",
                gram[i * dim + j]
            );
        }
    }
}

#[test]
fn every_propagating_mode_precedes_every_evanescent_mode() {
    let basis = enumerate_modes(guide(), wavenumber(3.0), EvanescentPolicy::decay(2.0)).unwrap();
    for family in [basis.te_modes(), basis.tm_modes()] {
        let first_evanescent = family.iter().position(|m| !m.propagating).unwrap();
        assert!(family[first_evanescent..].iter().all(|m| !m.propagating));
        assert!(family.windows(2).all(|w| w[0].cutoff <= w[1].cutoff));
        assert!(family.iter().enumerate().all(|(i, m)| m.linear == i));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn axial_wavenumbers_lie_on_the_upper_branch(k in 0.3f64..6.0) {
        let basis = match enumerate_modes(guide(), wavenumber(k), EvanescentPolicy::Count(20)) {
            Ok(b) => b,
            Err(Error::CutoffResonance { .. }) => return Ok(()),
            Err(e) => panic!("{e}"),
        };
        for m in basis.te_modes().iter().chain(basis.tm_modes()) {
            prop_assert!(m.axial.im >= 0.0);
            let sq = m.axial * m.axial;
            prop_assert!((sq.re - (k * k - m.cutoff_sq())).abs() < 1e-9 * (k * k + m.cutoff_sq()));
            prop_assert_eq!(m.propagating, m.axial.im == 0.0 && m.axial.re > 0.0);
        }
    }
}
