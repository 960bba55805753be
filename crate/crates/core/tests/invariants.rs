use std::f64::consts::PI;

use proptest::prelude::*;

use llghom::cellsolve::{solve_cells, CellSettings};
use llghom::correctors::{build_m1, M0Jet};
use llghom::grid::{dot, Grid, Vec3, VectorField};
use llghom::harness::fit_rate;
use llghom::llg::{step, LlgProblem, MagnetizationField};
use llghom::material::{CoefficientFamily, ExchangeTensor, HarmonicMode, MaterialModel};
use llghom::solver::CgSettings;
use llghom::strayfield::{stray_field, DemagKernel, Weight};
use llghom::Error;

fn unit_field(c: [f64; 4]) -> impl Fn(Vec3) -> Vec3 {
    move |x: Vec3| {
        let th = 0.7 + c[0] * (2.0 * PI * x[0]).sin() + c[1] * (PI * x[1]).cos();
        let ph = c[2] + c[3] * (x[0] - 0.4 * x[1]);
        [th.sin() * ph.cos(), th.sin() * ph.sin(), th.cos()]
    }
}

fn harmonic(mean: f64, amp: f64, k: [i32; 3]) -> CoefficientFamily {
    CoefficientFamily::SingleHarmonic { mean, mode: HarmonicMode { amp, k, phase: 0.0 } }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn step_keeps_unit_length(c in prop::array::uniform4(-0.8f64..0.8), alpha in 0.1f64..2.0, tau in 1e-4f64..1e-3) {
        let g = Grid::new(2, 12).unwrap();
        let model = MaterialModel::new(
            ExchangeTensor::isotropic(2, harmonic(2.0, 0.8, [1, 0, 0])),
            CoefficientFamily::Constant(0.5),
            CoefficientFamily::Constant(1.0),
            [0.0, 0.6, 0.8],
            alpha,
            0.0,
            [0.3, 0.0, -0.2],
        ).unwrap();
        let p = LlgProblem::epsilon(&model, 0.5, g, None).unwrap();
        let m = MagnetizationField::new(VectorField::from_fn(g, unit_field(c)), 0.0).unwrap();
        match step(&p, &m, tau, CgSettings::default()) {
            Ok((next, _)) => {
                prop_assert!(next.m.max_norm_deviation() < 1e-12);
                prop_assert!((next.t - tau).abs() < 1e-15);
            }
            Err(e) => prop_assert!(matches!(e, Error::RenormalizationDefectTooLarge { .. }), "{e}"),
        }
    }

    #[test]
    fn stray_field_energy_is_bounded(seed in prop::array::uniform8(-1.0f64..1.0)) {
        let g = Grid::new(2, 10).unwrap();
        let kernel = DemagKernel::build(g).unwrap();
        let m = VectorField::from_fn(g, |x| {
            let s = (2.0 * PI * (x[0] + seed[6] * x[1])).sin();
            let t = (2.0 * PI * (x[1] - seed[7] * x[0])).cos();
            [seed[0] * s + seed[1] * t, seed[2] * s + seed[3] * t, seed[4] * s + seed[5] * t]
        });
        let h = stray_field(&m, Weight::Constant(1.0), &kernel).unwrap();
        let e = -m.inner(&h);
        prop_assert!(e >= -1e-14 * m.inner(&m));
        prop_assert!(h.inner(&h) <= (1.0 + 1e-12) * m.inner(&m));
    }

    #[test]
    fn one_dimensional_a0_is_harmonic_mean(mean in 1.5f64..4.0, frac in 0.0f64..0.9) {
        let amp = frac * (mean - 0.5);
        let model = MaterialModel::new(
            ExchangeTensor::isotropic(1, harmonic(mean, amp, [1, 0, 0])),
            CoefficientFamily::Constant(0.0),
            CoefficientFamily::Constant(1.0),
            [0.0, 0.0, 1.0],
            1.0,
            0.0,
            [0.0; 3],
        ).unwrap();
        let (_, hom) = solve_cells(&model, CellSettings::new(128)).unwrap();
        let exact = (mean * mean - amp * amp).sqrt();
        prop_assert!((hom.a0[0][0] - exact).abs() < 1e-8 * exact);
    }

    #[test]
    fn first_corrector_is_tangent(c in prop::array::uniform4(-0.8f64..0.8), eps in 0.05f64..0.5) {
        let model = MaterialModel::new(
            ExchangeTensor::isotropic(2, harmonic(2.0, 1.0, [1, 1, 0])),
            CoefficientFamily::Constant(0.0),
            CoefficientFamily::Constant(1.0),
            [0.0, 0.0, 1.0],
            1.0,
            0.0,
            [0.0; 3],
        ).unwrap();
        let (cells, _) = solve_cells(&model, CellSettings::new(16)).unwrap();
        let g = Grid::new(2, 20).unwrap();
        let jet = M0Jet::from_fn(unit_field(c), g);
        let m1 = build_m1(&jet, &cells, eps).unwrap();
        for k in 0..g.len() {
            prop_assert!(dot(jet.m.get(k), m1.get(k)).abs() < 1e-12);
        }
    }

    #[test]
    fn power_laws_are_recovered(p in 0.2f64..2.5, c in 1e-3f64..1e3) {
        let eps = [0.25, 0.125, 0.0625, 0.03125];
        let err: Vec<f64> = eps.iter().map(|e: &f64| c * e.powf(p)).collect();
        let f = fit_rate(&eps, &err).unwrap();
        prop_assert!((f.slope - p).abs() < 1e-10);
        prop_assert!(f.pairwise.iter().all(|q| (q - p).abs() < 1e-10));
    }
}
