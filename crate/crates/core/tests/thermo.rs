use std::collections::BTreeMap;

use inner_media::thermo::*;
use inner_media::{LinOperator, SplitSpace};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn spec(kind: &str, n: usize, m: usize, coeffs: &[(&str, &[f64])]) -> ModelSpec {
    ModelSpec {
        kind: kind.into(),
        n,
        m,
        coeffs: coeffs
            .iter()
            .map(|(k, v)| (k.to_string(), v.to_vec()))
            .collect::<BTreeMap<_, _>>(),
        energy_convention: EnergyConvention::Derived,
        g_f: None,
        g_b: None,
    }
}

fn model(kind: &str, n: usize, m: usize, coeffs: &[(&str, &[f64])]) -> FreeEnergyModel {
    FreeEnergyModel::from_spec(&spec(kind, n, m, coeffs)).unwrap()
}

fn point(theta: f64, n: usize, entries: &[f64]) -> ThermoPoint {
    ThermoPoint::new(theta, LinOperator::from_row_slice(n, entries).unwrap()).unwrap()
}

fn random_point(rng: &mut ChaCha8Rng, space: &SplitSpace) -> ThermoPoint {
    let theta = rng.random_range(0.5..2.0);
    ThermoPoint::new(theta, space.random_operator(rng)).unwrap()
}

/// Central finite differences of `h` in every coordinate Δ_ij (oracle).
fn fd_gradient(model: &FreeEnergyModel, p: &ThermoPoint, step: f64) -> DMatrix<f64> {
    let n = p.delta.dim();
    DMatrix::from_fn(n, n, |i, j| {
        let e = LinOperator::unit(n, i, j).scale(step);
        let hp = model
            .helmholtz(&ThermoPoint::new(p.theta, &p.delta + &e).unwrap())
            .unwrap();
        let hm = model
            .helmholtz(&ThermoPoint::new(p.theta, &p.delta - &e).unwrap())
            .unwrap();
        (hp - hm) / (2.0 * step)
    })
}

fn raw(space: &SplitSpace, sigma: &LinOperator) -> DMatrix<f64> {
    space.metric() * sigma.matrix() * space.metric_inverse()
}

fn curved_split_spec(kind: &str, coeffs: &[(&str, &[f64])]) -> ModelSpec {
    let mut s = spec(kind, 2, 1, coeffs);
    s.g_f = Some(vec![vec![1.7]]);
    s.g_b = Some(vec![vec![1.2, 0.3], vec![0.3, 0.8]]);
    s
}

const PLAIN: &[(&str, &[f64])] = &[
    ("a", &[0.7, 0.1]),
    ("b", &[-1.3, 0.2]),
    ("c", &[0.4]),
    ("d", &[-2.0, 0.5]),
    ("h0", &[0.0, 0.0, -0.8]),
];

const SPLIT: &[(&str, &[f64])] = &[
    ("a1", &[0.7, 0.1]),
    ("a2", &[-1.3, 0.2]),
    ("a3", &[0.4]),
    ("a4", &[0.3, -0.1]),
    ("a5", &[-0.6]),
    ("a6", &[0.9, 0.05]),
    ("b1", &[-2.0, 0.5]),
    ("b2", &[0.25]),
    ("h0", &[0.0, 0.0, -0.8]),
];

#[test]
fn zero_rate_gives_pressure_only() {
    let m = model("hookean_plain", 3, 0, PLAIN);
    let p = point(1.5, 3, &[0.0; 9]);
    let sigma = m.stress(&p).unwrap();
    let d = -2.0 + 0.5 * 1.5;
    assert!((sigma - LinOperator::identity(3).scale(d)).norm() < 1e-15);
}

#[test]
fn symmetric_rate_has_two_viscosities() {
    let m = model("hookean_plain", 2, 0, PLAIN);
    let theta = 1.2;
    let p = point(theta, 2, &[0.3, -0.4, -0.4, 1.1]);
    let (a, b, c, d) = (0.7 + 0.1 * theta, -1.3 + 0.2 * theta, 0.4, -2.0 + 0.5 * theta);
    let expect = &p.delta.scale(a + b) + &LinOperator::identity(2).scale(c * p.delta.trace() + d);
    assert!((m.stress(&p).unwrap() - expect).norm() < 1e-14);
}

#[test]
fn closed_form_stress_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for s in [
        curved_split_spec("hookean_split", SPLIT),
        {
            let mut s = spec("hookean_plain", 3, 0, PLAIN);
            s.g_b = Some(vec![vec![2.0, 0.1, 0.0], vec![0.1, 1.0, 0.2], vec![0.0, 0.2, 0.5]]);
            s
        },
    ] {
        let m = FreeEnergyModel::from_spec(&s).unwrap();
        for _ in 0..50 {
            let p = random_point(&mut rng, m.space());
            let analytic = raw(m.space(), &m.stress(&p).unwrap());
            let fd = fd_gradient(&m, &p, 1e-6);
            let err = (&analytic - &fd).amax() / (1.0 + analytic.amax());
            assert!(err < 1e-6, "{} err {err}", s.kind);
        }
    }
}

#[test]
fn generic_words_reproduce_hookean_laws() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let plain = model("hookean_plain", 3, 0, PLAIN);
    let plain_words = model(
        "generic",
        3,
        0,
        &[
            ("A A", &[0.35, 0.05]),
            ("A Astar", &[-0.65, 0.1]),
            ("A | A", &[0.2]),
            ("A", &[-2.0, 0.5]),
            ("h0", &[0.0, 0.0, -0.8]),
        ],
    );
    let split = FreeEnergyModel::from_spec(&curved_split_spec("hookean_split", SPLIT)).unwrap();
    let split_words = FreeEnergyModel::from_spec(&curved_split_spec(
        "generic",
        &[
            ("A A", &[0.35, 0.05]),
            ("A Astar", &[-0.65, 0.1]),
            ("A | A", &[0.2]),
            ("A PiV | A PiV", &[0.15, -0.05]),
            ("Astar A PiV", &[-0.3]),
            ("A Astar PiV", &[0.45, 0.025]),
            ("A", &[-2.0, 0.5]),
            ("A PiV", &[0.25]),
            ("h0", &[0.0, 0.0, -0.8]),
        ],
    ))
    .unwrap();
    for (closed, words) in [(&plain, &plain_words), (&split, &split_words)] {
        for _ in 0..20 {
            let p = random_point(&mut rng, closed.space());
            let a = closed.energy_entropy(&p).unwrap();
            let b = words.energy_entropy(&p).unwrap();
            assert!((a.sigma.clone() - b.sigma.clone()).norm() < 1e-12 * (1.0 + a.sigma.norm()));
            assert!((a.epsilon - b.epsilon).abs() < 1e-12 * (1.0 + a.epsilon.abs()));
            let ka = closed.kappa_matrix(&p).unwrap();
            let kb = words.kappa_matrix(&p).unwrap();
            assert!((&ka - &kb).amax() < 1e-11 * (1.0 + ka.amax()));
        }
    }
}

#[test]
fn energy_entropy_conventions() {
    // h independent of θ
    let m = model("hookean_plain", 2, 0, &[("a", &[1.0]), ("d", &[0.5])]);
    let p = point(1.3, 2, &[0.2, 0.1, -0.3, 0.4]);
    for conv in [EnergyConvention::Derived, EnergyConvention::Paper] {
        let r = m.clone().with_convention(conv).energy_entropy(&p).unwrap();
        assert_eq!(r.entropy, 0.0);
        assert_eq!(r.epsilon, r.helmholtz);
    }
    // h = −d₀ θ TrΔ
    let d0 = 0.7;
    let m = model("hookean_plain", 2, 0, &[("d", &[0.0, -d0])]);
    let r = m.energy_entropy(&p).unwrap();
    assert!((r.entropy - d0 * p.delta.trace()).abs() < 1e-15);
    assert!(r.epsilon.abs() < 1e-15);
    // defining identity for both conventions
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let m = model("hookean_plain", 3, 0, PLAIN);
    for conv in [EnergyConvention::Derived, EnergyConvention::Paper] {
        let m = m.clone().with_convention(conv);
        for _ in 0..20 {
            let p = random_point(&mut rng, m.space());
            let r = m.energy_entropy(&p).unwrap();
            assert!((r.epsilon - p.theta * r.entropy - r.helmholtz).abs() < 1e-12);
        }
    }
    // the two conventions differ by 2θh_θ
    let p = random_point(&mut rng, m.space());
    let der = m.clone().with_convention(EnergyConvention::Derived).energy_entropy(&p).unwrap();
    let pap = m.clone().with_convention(EnergyConvention::Paper).energy_entropy(&p).unwrap();
    assert!((pap.epsilon - der.epsilon - 2.0 * p.theta * pap.entropy).abs() < 1e-12);
}

#[test]
fn kappa_for_constant_coefficients() {
    let m = model(
        "hookean_plain",
        2,
        0,
        &[("a", &[0.3]), ("b", &[-1.0]), ("c", &[0.2]), ("d", &[0.5])],
    );
    let theta = 2.0;
    let p = point(theta, 2, &[0.1, 0.4, -0.2, 0.3]);
    let k = m.kappa_matrix(&p).unwrap();
    assert_eq!(k.nrows(), 5);
    assert_eq!(k[(0, 0)], 0.0);
    // cross block θ⁻² h_Δ (identity metric: raw gradient = σ)
    let sigma = m.stress(&p).unwrap().to_row_vec();
    for ij in 0..4 {
        assert!((k[(0, 1 + ij)] - sigma[ij] / (theta * theta)).abs() < 1e-15);
    }
    // ΔΔ block θ⁻¹ × Hessian of ½(a TrΔ² + b TrΔΔᵀ + c Tr²Δ): hand-derived
    let (a, b, c) = (0.3, -1.0, 0.2);
    for ij in 0..4 {
        for kl in 0..4 {
            let (i, j, kk, l) = (ij / 2, ij % 2, kl / 2, kl % 2);
            let mut h = 0.0;
            if j == kk && i == l {
                h += a;
            }
            if ij == kl {
                h += b;
            }
            if i == j && kk == l {
                h += c;
            }
            assert!((k[(1 + ij, 1 + kl)] - h / theta).abs() < 1e-15, "{ij} {kl}");
        }
    }
    assert_eq!(k, k.transpose());
}

#[test]
fn kappa_split_reduces_to_plain() {
    let plain = model("hookean_plain", 3, 0, PLAIN);
    let split = model(
        "hookean_split",
        3,
        0,
        &[
            ("a1", &[0.7, 0.1]),
            ("a2", &[-1.3, 0.2]),
            ("a3", &[0.4]),
            ("b1", &[-2.0, 0.5]),
            ("h0", &[0.0, 0.0, -0.8]),
        ],
    );
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..20 {
        let p = random_point(&mut rng, plain.space());
        let diff = (plain.kappa_matrix(&p).unwrap() - split.kappa_matrix(&p).unwrap()).amax();
        assert!(diff <= 1e-12, "{diff}");
    }
}

fn stable_model(sign: f64) -> FreeEnergyModel {
    model(
        "hookean_plain",
        2,
        0,
        &[("b", &[-sign]), ("a", &[0.2 * sign]), ("h0", &[0.0, 0.0, -sign])],
    )
}

#[test]
fn classification_examples() {
    let p = point(1.0, 2, &[0.0; 4]);
    let stable = stable_model(1.0).classify(&p).unwrap();
    // eigenvalue oracle: κ = diag(−6, b ± a ...) / θ, all negative
    assert!(stable.kappa_eigenvalues.iter().all(|&l| l < 0.0));
    assert_eq!(stable.classification, Classification::StablePhase);
    let flipped = stable_model(-1.0).classify(&p).unwrap();
    for (x, y) in stable.kappa_eigenvalues.iter().zip(flipped.kappa_eigenvalues.iter().rev()) {
        assert!((x + y).abs() < 1e-14);
    }
    assert_eq!(flipped.classification, Classification::Unstable);
    let zero = model("hookean_plain", 2, 0, &[]).classify(&p).unwrap();
    assert!(zero.kappa_eigenvalues.iter().all(|&l| l == 0.0));
    assert_eq!(zero.classification, Classification::Degenerate);
}

#[test]
fn classification_invariant_under_group() {
    let m = FreeEnergyModel::from_spec(&curved_split_spec("hookean_split", SPLIT)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..20 {
        let p = random_point(&mut rng, m.space());
        let q = m.space().random_group_element_with(&mut rng);
        let pq = ThermoPoint::new(p.theta, m.space().conjugate(&q, &p.delta).unwrap()).unwrap();
        let a = m.classify(&p).unwrap().classification;
        assert_eq!(a, m.classify(&pq).unwrap().classification);
    }
    // identity metric: the spectra themselves coincide
    let m = model("hookean_plain", 3, 0, PLAIN);
    for _ in 0..20 {
        let p = random_point(&mut rng, m.space());
        let q = m.space().random_group_element_with(&mut rng);
        let pq = ThermoPoint::new(p.theta, m.space().conjugate(&q, &p.delta).unwrap()).unwrap();
        let a = m.classify(&p).unwrap().kappa_eigenvalues;
        let b = m.classify(&pq).unwrap().kappa_eigenvalues;
        let scale = a.iter().fold(1.0_f64, |s, l| s.max(l.abs()));
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() <= 1e-9 * scale);
        }
    }
}

#[test]
fn stress_is_equivariant_and_h_invariant() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let words = spec(
        "generic",
        2,
        1,
        &[("A A Astar PiV", &[0.3]), ("A PiV Astar", &[1.0, 1.0]), ("A | A Astar", &[0.2])],
    );
    for s in [
        curved_split_spec("hookean_split", SPLIT),
        spec("hookean_plain", 3, 0, PLAIN),
        words,
    ] {
        let m = FreeEnergyModel::from_spec(&s).unwrap();
        let space = m.space();
        for _ in 0..20 {
            let p = random_point(&mut rng, space);
            let q = space.random_group_element_with(&mut rng);
            let pq = ThermoPoint::new(p.theta, space.conjugate(&q, &p.delta).unwrap()).unwrap();
            let lhs = m.stress(&pq).unwrap();
            let rhs = space.conjugate(&q, &m.stress(&p).unwrap()).unwrap();
            assert!((lhs - rhs).norm() <= 1e-9 * (1.0 + m.stress(&p).unwrap().norm()));
            let h = m.helmholtz(&p).unwrap();
            assert!((m.helmholtz(&pq).unwrap() - h).abs() <= 1e-10 * (1.0 + h.abs()));
        }
    }
}

#[test]
fn phase_boundary_at_known_temperature() {
    // ΔΔ-block at Δ = 0 is b(θ)/θ · I with b(θ) = −1.5 + θ, so κ degenerates at θ* = 1.5.
    let m = model("hookean_plain", 2, 0, &[("b", &[-1.5, 1.0]), ("h0", &[0.0, 0.0, -1.0])]);
    let path = |t: f64| point(t, 2, &[0.0; 4]);
    let roots = m.phase_boundary_locate(path, 0.5, 3.0).unwrap();
    assert_eq!(roots.len(), 1);
    assert!((roots[0] - 1.5).abs() < 1e-8, "{roots:?}");
    // within one stable domain
    assert!(m.phase_boundary_locate(path, 0.5, 1.4).unwrap().is_empty());
    // crossing exactly at the start of the interval
    let roots = m.phase_boundary_locate(path, 1.5, 2.0).unwrap();
    assert_eq!(roots, vec![1.5]);
}

#[test]
fn bracket_basics() {
    let space = SplitSpace::euclidean(2, 0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let x = PhaseCoords {
        theta: 1.7,
        epsilon: 0.3,
        sigma: space.random_operator(&mut rng),
        delta: space.random_operator(&mut rng),
    };
    let th = Coordinate::THETA;
    assert_eq!(poisson_bracket(&th, &th, &x, &space).unwrap(), 0.0);
    let f = Explicit {
        value: |v: &[f64]| v[0] * v[3] + v[7].sin(),
        gradient: |v: &[f64]| {
            let mut g = vec![0.0; v.len()];
            g[0] = v[3];
            g[3] = v[0];
            g[7] = v[7].cos();
            g
        },
    };
    let g = Explicit {
        value: |v: &[f64]| v[1] * v[1] + v[8] * v[2],
        gradient: |v: &[f64]| {
            let mut g = vec![0.0; v.len()];
            g[1] = 2.0 * v[1];
            g[8] = v[2];
            g[2] = v[8];
            g
        },
    };
    let fg = poisson_bracket(&f, &g, &x, &space).unwrap();
    let gf = poisson_bracket(&g, &f, &x, &space).unwrap();
    assert!((fg + gf).abs() < 1e-13);
    assert!(poisson_bracket(&f, &f, &x, &space).unwrap().abs() < 1e-13);

    // σ = 0: {ε, θ} = θ²
    let x0 = PhaseCoords { sigma: LinOperator::zeros(2), ..x.clone() };
    let b = poisson_bracket(&Coordinate::EPSILON, &th, &x0, &space).unwrap();
    assert!((b - 1.7 * 1.7).abs() < 1e-13);

    let bad = PhaseCoords { theta: 0.0, ..x };
    assert!(matches!(
        poisson_bracket(&th, &th, &bad, &space),
        Err(inner_media::Error::SingularForm)
    ));
}

#[test]
fn state_equations_are_in_involution() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for s in [
        spec("hookean_plain", 3, 0, PLAIN),
        curved_split_spec("hookean_split", SPLIT),
        spec("generic", 2, 1, &[("A A Astar PiV", &[0.3, 0.1]), ("A", &[1.0, -1.0]), ("h0", &[0.0, 0.0, -1.0])]),
    ] {
        let m = FreeEnergyModel::from_spec(&s).unwrap();
        let samples: Vec<ThermoPoint> = (0..20).map(|_| random_point(&mut rng, m.space())).collect();
        let on = m.involutivity_check(&samples).unwrap();
        assert!(on <= 1e-8, "{} on-manifold residual {on}", s.kind);
        let off = m.involutivity_residual(&samples, 0.1).unwrap();
        assert!(off > 1e-4, "{} off-manifold residual {off}", s.kind);
    }
    let scalar = model("hookean_plain", 1, 0, PLAIN);
    let samples: Vec<ThermoPoint> = (0..20).map(|_| random_point(&mut rng, scalar.space())).collect();
    assert!(scalar.involutivity_check(&samples).unwrap() <= 1e-10);
}

#[test]
fn printed_energy_relation_is_not_lagrangian() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let m = model("hookean_plain", 2, 0, PLAIN).with_convention(EnergyConvention::Paper);
    let samples: Vec<ThermoPoint> = (0..5).map(|_| random_point(&mut rng, m.space())).collect();
    assert!(m.involutivity_check(&samples).unwrap() > 1e-6);
}

#[test]
fn registry_and_spec_errors() {
    let reg = ModelRegistry::with_builtins();
    assert_eq!(reg.names().collect::<Vec<_>>(), vec!["generic", "hookean_plain", "hookean_split"]);
    assert!(matches!(
        reg.build(&spec("viscoplastic", 2, 0, &[])),
        Err(inner_media::Error::Unknown { .. })
    ));
    assert!(reg.build(&spec("hookean_plain", 2, 0, &[("a1", &[1.0])])).is_err());
    assert!(reg.build(&spec("generic", 2, 0, &[])).is_err());
    assert!(reg.build(&spec("HOOKEAN_SPLIT", 2, 1, &[("a5", &[1.0])])).is_ok());
    let json = r#"{"kind":"HOOKEAN_PLAIN","n":2,"m":0,"coeffs":{"a":[1.0,0.5]},"energy_convention":"PAPER"}"#;
    let s = ModelSpec::from_json(json).unwrap();
    assert_eq!(s.energy_convention, EnergyConvention::Paper);
    assert!(ThermoPoint::new(-1.0, LinOperator::identity(2)).is_err());
}
