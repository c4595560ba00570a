use hodgelab::fiber::*;
use hodgelab::small::SMat;
use hodgelab::C64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;
use std::sync::Arc;

fn ops_for(fm: FiberModel) -> OperatorSet {
    OperatorSet::new(Arc::new(fm)).unwrap()
}

fn rel(a: C64, b: C64) -> f64 {
    (a - b).norm() / a.norm().max(b.norm()).max(1e-300)
}

#[test]
fn dbar_adjoint_is_exact() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for (d, kahler) in [(-1, KahlerChoice::FromWeight), (2, KahlerChoice::FromWeight), (0, KahlerChoice::ModelFlat)] {
        let tau = C64::new(0.2, 1.1);
        let ops = ops_for(FiberModel::elliptic(tau, 16, d, kahler).unwrap());
        let fm = &ops.fiber;
        for p in 0..=1 {
            let u = Form::random_smooth(fm, p, 0, 3, &mut rng);
            let v = Form::random_smooth(fm, p, 1, 3, &mut rng);
            let lhs = inner(fm, &ops.dbar(&u).unwrap(), &v).unwrap();
            let rhs = inner(fm, &u, &ops.dbar_adj(&v).unwrap()).unwrap();
            assert!(rel(lhs, rhs) < 1e-12, "d={d} p={p}: {lhs} vs {rhs}");
        }
        for q in 0..=1 {
            let u = Form::random_smooth(fm, 0, q, 3, &mut rng);
            let v = Form::random_smooth(fm, 1, q, 3, &mut rng);
            let lhs = inner(fm, &ops.del_phi(&u).unwrap(), &v).unwrap();
            let rhs = inner(fm, &u, &ops.del_phi_adj(&v).unwrap()).unwrap();
            assert!(rel(lhs, rhs) < 1e-12, "d={d} q={q}: {lhs} vs {rhs}");
        }
    }
}

#[test]
fn surface_dbar_squares_to_zero_and_adjoint_holds() {
    let tau = SMat::from_rows(&[
        &[C64::new(0.1, 1.0), C64::new(0.25, 0.1)],
        &[C64::new(0.25, 0.1), C64::new(0.3, 1.2)],
    ]);
    let fm = FiberModel::new(tau, 8, vec![0, 0], vec![0.0; 64 * 64], KahlerChoice::ModelFlat).unwrap();
    let ops = ops_for(fm);
    let fm = &ops.fiber;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let u = Form::random_smooth(fm, 1, 0, 2, &mut rng);
    let dd = ops.dbar(&ops.dbar(&u).unwrap()).unwrap();
    assert!(dd.max_abs() < 1e-10 * u.max_abs());
    let v = Form::random_smooth(fm, 1, 1, 2, &mut rng);
    let lhs = inner(fm, &ops.dbar(&u).unwrap(), &v).unwrap();
    let rhs = inner(fm, &u, &ops.dbar_adj(&v).unwrap()).unwrap();
    assert!(rel(lhs, rhs) < 1e-12);
    let w = Form::random_smooth(fm, 1, 1, 2, &mut rng);
    let lhs = inner(fm, &ops.del_phi(&w).unwrap(), &Form::random_smooth(fm, 2, 1, 2, &mut rng)).unwrap();
    assert!(lhs.norm().is_finite());
}

#[test]
fn link_flux_equals_two_pi_degree() {
    for d in [-3, -1, 1, 2] {
        let ops = ops_for(FiberModel::elliptic(C64::new(0.0, 1.0), 16, d, KahlerChoice::FromWeight).unwrap());
        let flux = ops.link_phases.flux(&ops.fiber, 0);
        assert!((flux - 2.0 * PI * d as f64).abs() < 1e-10, "d={d}: {flux}");
    }
}

#[test]
fn riemann_roch_counts() {
    for d in [-3, -2, -1, 1, 2, 3] {
        let ops = ops_for(FiberModel::elliptic(C64::new(0.15, 1.0), 16, d, KahlerChoice::FromWeight).unwrap());
        let cache = SpectralCache::new(&ops);
        for q in 0..=1 {
            let s = cache.spectrum(0, q).unwrap();
            assert_eq!(s.harmonic_dim, ops.fiber.predicted_harmonic_dim(0, q), "d={d} q={q}");
            if s.harmonic_dim > 0 {
                assert!(s.gap_ratio >= 1e3, "d={d} q={q}: gap {}", s.gap_ratio);
            }
        }
    }
}

#[test]
fn flat_torus_first_eigenvalue() {
    // τ = 2i, model flat metric: λ(k,l) = 2π²|τk − l|²/τ₂ on functions
    let tau = C64::new(0.0, 2.0);
    let ops = ops_for(FiberModel::elliptic(tau, 16, 0, KahlerChoice::ModelFlat).unwrap());
    let cache = SpectralCache::new(&ops);
    let s = cache.spectrum(0, 0).unwrap();
    assert_eq!(s.harmonic_dim, 1);
    let mut oracle = Vec::new();
    for k in -3i32..=3 {
        for l in -3i32..=3 {
            if (k, l) != (0, 0) {
                oracle.push(2.0 * PI * PI * (tau * k as f64 - l as f64).norm_sqr() / tau.im);
            }
        }
    }
    oracle.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let first = s.first_nonharmonic().unwrap();
    assert!((first - PI * PI).abs() < 1e-9, "{first}");
    assert!((first - oracle[0]).abs() < 1e-9);
}

#[test]
fn laplacians_agree_on_top_degree_forms() {
    // [iΘ, Λ] vanishes on (1,0) and (0,1) forms of a curve
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for d in [-2, 1] {
        let ops = ops_for(FiberModel::elliptic(C64::new(0.3, 0.9), 16, d, KahlerChoice::FromWeight).unwrap());
        let fm = &ops.fiber;
        for (p, q) in [(1, 0), (0, 1)] {
            let u = Form::random_smooth(fm, p, q, 2, &mut rng);
            let a = ops.box_dbar(&u).unwrap();
            let b = ops.box_del(&u).unwrap();
            let err = norm2(fm, &a.sub(&b)).sqrt() / norm2(fm, &a).sqrt();
            assert!(err < 1e-8, "d={d} ({p},{q}): {err}");
        }
    }
}

#[test]
fn harmonic_forms_are_del_closed_on_negative_bundle() {
    let ops = ops_for(FiberModel::elliptic(C64::new(0.0, 1.0), 16, -2, KahlerChoice::FromWeight).unwrap());
    let cache = SpectralCache::new(&ops);
    let fm = &ops.fiber;
    for k in 0..2 {
        let e = cache.eigenform(0, 1, k).unwrap();
        assert!(norm2(fm, &ops.dbar_adj(&e).unwrap()) < 1e-16);
        let lhs = norm2(fm, &ops.del_phi(&e).unwrap());
        assert!(lhs < 1e-16, "{lhs}");
    }
}

#[test]
fn model_flat_dzbar_norm() {
    let fm = FiberModel::elliptic(C64::new(0.0, 1.0), 8, 0, KahlerChoice::ModelFlat).unwrap();
    let u = Form::scalar(&fm, 0, 1, vec![C64::new(1.0, 0.0); fm.len()]).unwrap();
    assert!((norm2(&fm, &u) - 2.0).abs() < 1e-12);
}

#[test]
fn top_pairing_matches_inner_on_primitive_forms() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let fm = FiberModel::elliptic(C64::new(0.1, 1.3), 8, 0, KahlerChoice::ModelFlat).unwrap();
    for (p, q) in [(1, 0), (0, 1)] {
        let u = Form::random_smooth(&fm, p, q, 2, &mut rng);
        let a = top_pairing(&fm, &u, &u).unwrap();
        let b = inner(&fm, &u, &u).unwrap();
        assert!(rel(a, b) < 1e-12, "({p},{q}): {a} vs {b}");
    }
}

#[test]
fn green_shift_inverts_box() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let ops = ops_for(FiberModel::elliptic(C64::new(0.2, 1.0), 16, -1, KahlerChoice::FromWeight).unwrap());
    let cache = SpectralCache::new(&ops);
    let fm = &ops.fiber;
    let u = Form::random_smooth(fm, 0, 1, 3, &mut rng);
    let g = green_shift(&u, 1.0, &ops, &cache).unwrap();
    let back = ops.box_dbar(&g).unwrap().add(&g);
    let err = norm2(fm, &back.sub(&u)).sqrt() / norm2(fm, &u).sqrt();
    assert!(err < 1e-8, "{err}");
    let h = harmonic_project(&u, &ops, &cache).unwrap();
    let resid = norm2(fm, &ops.box_dbar(&h).unwrap()).sqrt() / norm2(fm, &h).sqrt();
    assert!(resid < 1e-6, "{resid}");
}

#[test]
fn green_identity_negative_and_flat() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let ops = ops_for(FiberModel::elliptic(C64::new(0.1, 1.0), 16, -1, KahlerChoice::FromWeight).unwrap());
    let cache = SpectralCache::new(&ops);
    let pb = PairBuilder::new(&ops).unwrap();
    for _ in 0..3 {
        let (g, f) = pb.pair(3, &mut rng).unwrap();
        let c = green_identity(&ops, &cache, &g, &f).unwrap();
        assert!(c.residual < 1e-6, "{c:?}");
        assert!(c.residual_minus.is_some_and(|r| r < 1e-6), "{c:?}");
    }
    let ops = ops_for(FiberModel::elliptic(C64::new(0.1, 1.0), 16, 0, KahlerChoice::ModelFlat).unwrap());
    let cache = SpectralCache::new(&ops);
    let pb = PairBuilder::new(&ops).unwrap();
    let (g, f) = pb.pair(3, &mut rng).unwrap();
    let c = green_identity(&ops, &cache, &g, &f).unwrap();
    assert!(c.residual < 1e-8, "{c:?}");
    let ops = ops_for(FiberModel::elliptic(C64::new(0.1, 1.0), 16, 1, KahlerChoice::FromWeight).unwrap());
    let cache = SpectralCache::new(&ops);
    let pb = PairBuilder::new(&ops).unwrap();
    let (g, f) = pb.pair(3, &mut rng).unwrap();
    let c = green_identity(&ops, &cache, &g, &f).unwrap();
    assert!(c.residual < 1e-6, "{c:?}");
}

#[test]
fn exact_forms_project_to_zero_and_eigenforms_shift() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let ops = ops_for(FiberModel::elliptic(C64::new(0.1, 1.2), 16, -2, KahlerChoice::FromWeight).unwrap());
    let cache = SpectralCache::new(&ops);
    let fm = &ops.fiber;
    let f = Form::random_smooth(fm, 0, 0, 3, &mut rng);
    let df = ops.dbar(&f).unwrap();
    let h = harmonic_project(&df, &ops, &cache).unwrap();
    assert!(norm2(fm, &h).sqrt() < 1e-10 * norm2(fm, &df).sqrt());
    let s = cache.spectrum(0, 1).unwrap();
    for k in [0, 2, 5] {
        let e = cache.eigenform(0, 1, k).unwrap();
        let x = green_shift(&e, 1.0, &ops, &cache).unwrap();
        let want = e.scale(C64::new(1.0 / (s.values[k] + 1.0), 0.0));
        assert!(norm2(fm, &x.sub(&want)).sqrt() < 1e-10, "k={k}");
        // projection residual is orthogonal to the projection
        let u = Form::random_smooth(fm, 0, 1, 3, &mut rng);
        let uh = harmonic_project(&u, &ops, &cache).unwrap();
        assert!(inner(fm, &u.sub(&uh), &uh).unwrap().norm() < 1e-10 * norm2(fm, &u));
    }
}

#[test]
fn shifted_inverse_rejects_low_modes() {
    let ops = ops_for(FiberModel::elliptic(C64::new(0.0, 1.0), 16, -1, KahlerChoice::FromWeight).unwrap());
    let cache = SpectralCache::new(&ops);
    let e = cache.eigenform(0, 1, 0).unwrap();
    match green_shift(&e, -1.0, &ops, &cache) {
        Err(hodgelab::Error::IllPosed { .. }) => {}
        other => panic!("expected ill-posed, got {other:?}"),
    }
    assert!(green_shift(&e, 0.0, &ops, &cache).is_err());
}

#[test]
fn harmonic_dimension_stable_under_refinement() {
    for n in [12, 24] {
        let ops = ops_for(FiberModel::elliptic(C64::new(0.2, 1.1), n, -2, KahlerChoice::FromWeight).unwrap());
        let cache = SpectralCache::new(&ops);
        assert_eq!(cache.spectrum(0, 1).unwrap().harmonic_dim, 2);
    }
}

fn surface() -> OperatorSet {
    let tau = SMat::from_rows(&[
        &[C64::new(0.0, 1.0), C64::new(0.25, 0.0)],
        &[C64::new(0.25, 0.0), C64::new(0.5, 1.2)],
    ]);
    ops_for(FiberModel::new(tau, 8, vec![0, 0], vec![0.0; 4096], KahlerChoice::ModelFlat).unwrap())
}

#[test]
fn surface_primitive_parts() {
    let ops = surface();
    let fm = &ops.fiber;
    let cache = SpectralCache::new(&ops);
    let om = omega_form(fm);
    assert!(primitive_test(&om, &ops).unwrap() > 0.1);
    let (prim, mult) = lefschetz_decompose(&om, &ops, &cache).unwrap();
    assert!(norm2(fm, &prim).sqrt() < 1e-12);
    assert!(norm2(fm, &mult.sub(&om)).sqrt() < 1e-12);

    // constant (1,1)-form: the oracle subtracts the ω-component with the
    // trace g^{jk̄} u_{jk̄} computed from the period matrix directly
    let coef = [C64::new(0.3, 0.1), C64::new(-0.2, 0.4), C64::new(0.5, 0.0), C64::new(0.1, -0.7)];
    let u = Form::from_fn(fm, 1, 1, |k, _, _| coef[k]);
    let (prim, _) = lefschetz_decompose(&u, &ops, &cache).unwrap();
    assert!(primitive_test(&prim, &ops).unwrap() < 1e-9);
    let g = fm.im_tau.inverse().unwrap().scale(C64::new(0.5, 0.0));
    let gi = g.inverse().unwrap();
    let tr = |c: &[C64]| {
        let mut s = C64::new(0.0, 0.0);
        for j in 0..2 {
            for k in 0..2 {
                s += gi.get(k, j) * c[2 * j + k];
            }
        }
        s
    };
    let om_c: Vec<C64> = (0..4).map(|k| C64::new(0.0, 1.0) * g.get(k / 2, k % 2)).collect();
    let lam = tr(&coef) / tr(&om_c);
    for k in 0..4 {
        let want = coef[k] - lam * om_c[k];
        assert!((prim.comps[k][0] - want).norm() < 1e-12, "k={k}");
    }
}

#[test]
fn surface_harmonic_counts() {
    let ops = surface();
    let cache = SpectralCache::new(&ops);
    for (p, q, want) in [(0, 0, 1), (1, 0, 2), (1, 1, 4), (2, 1, 2), (2, 2, 1)] {
        assert_eq!(cache.spectrum(p, q).unwrap().harmonic_dim, want);
    }
    let fm = &ops.fiber;
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    for (p, q) in [(1, 0), (0, 1), (1, 1)] {
        let u = Form::random_smooth(fm, p, q, 2, &mut rng);
        let v = Form::random_smooth(fm, p, q, 2, &mut rng);
        let a = inner(fm, &ops.box_dbar(&u).unwrap(), &v).unwrap();
        let b = inner(fm, &u, &ops.box_dbar(&v).unwrap()).unwrap();
        assert!(rel(a, b) < 1e-12);
        let c = inner(fm, &ops.box_del(&u).unwrap(), &v).unwrap();
        assert!(rel(a, c) < 1e-10, "flat □' = □'' on ({p},{q})");
    }
}
