use hodgelab::expr::parse_weight_expression;
use hodgelab::family::*;
use hodgelab::fiber::*;
use hodgelab::small::SMat;
use hodgelab::C64;
use std::f64::consts::PI;

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Weight of elliptic-neg-d1 written out independently of the library.
fn phi_neg(z: C64, t: C64) -> f64 {
    let (y, t2) = (z.im, t.im);
    -2.0 * PI * (y - t2 / 2.0).powi(2) / t2 - 0.5 * t.norm_sqr() + 0.05 * (2.0 * PI * y / t2).cos() * t.re
}

/// ∂²f/∂a∂b̄ for complex arguments a, b by central differences.
fn mixed(f: &dyn Fn(C64, C64) -> f64, z: C64, t: C64, a_is_t: bool, b_is_t: bool) -> C64 {
    let h = 1e-4;
    let shift = |dz: C64, dt: C64| f(z + dz, t + dt);
    let dir = |is_t: bool, d: C64| if is_t { (c(0.0, 0.0), d) } else { (d, c(0.0, 0.0)) };
    let second = |u: C64, v: C64| {
        let (az, at) = dir(a_is_t, u);
        let (bz, bt) = dir(b_is_t, v);
        (shift(az + bz, at + bt) - shift(az - bz, at - bt) - shift(-az + bz, -at + bt) + shift(-az - bz, -at - bt)) / (4.0 * h * h)
    };
    // ∂_a ∂_b̄ = ¼(∂_x − i∂_y)_a (∂_x + i∂_y)_b
    let (r, i) = (c(h, 0.0), c(0.0, h));
    0.25 * (c(second(r, r), 0.0) + c(0.0, 1.0) * second(r, i) - c(0.0, 1.0) * second(i, r) + c(second(i, i), 0.0))
}

fn point_z(fm: &FiberModel, idx: usize) -> C64 {
    let (x, y) = fm.grid.point(idx);
    c(x[0], 0.0) + fm.tau.a[0] * y[0]
}

#[test]
fn lift_matches_pointwise_division() {
    let scn = FamilyScenario::from_catalog("elliptic-neg-d1", 16).unwrap();
    let t = scn.t0;
    let fm = scn.fiber_at(t).unwrap();
    let lift = horizontal_lift(&scn, &fm, t).unwrap();
    assert!(lift.residual < 1e-12, "{}", lift.residual);
    assert!(lift.solver_gap < 1e-10, "{}", lift.solver_gap);
    for idx in (0..fm.len()).step_by(17) {
        let z = point_z(&fm, idx);
        let w = -mixed(&phi_neg, z, t, true, false) / mixed(&phi_neg, z, t, false, false);
        assert!((lift.components[0][idx] - w).norm() < 1e-6 * (1.0 + w.norm()), "{idx}: {} vs {w}", lift.components[0][idx]);
    }
}

#[test]
fn product_family_lift_is_trivial() {
    let scn = FamilyScenario::from_catalog("isotrivial-flat", 16).unwrap();
    let fm = scn.fiber_at(scn.t0).unwrap();
    let lift = horizontal_lift(&scn, &fm, scn.t0).unwrap();
    assert!(lift.components[0].iter().all(|w| w.norm() < 1e-14));
    let cg = geodesic_curvature(&scn, &fm, scn.t0).unwrap();
    assert!(cg.iter().all(|v| (v - 1.0).abs() < 1e-13));
    let ks = kodaira_spencer(&scn, &fm, &lift);
    assert!(ks.max_abs() < 1e-14);
}

#[test]
fn geodesic_curvature_vanishes_for_t_independent_weight() {
    let mut scn = FamilyScenario::from_catalog("elliptic-neg-d1", 16).unwrap();
    scn.period = PeriodMap::Linear { tau0: SMat::scalar(c(0.15, 1.0)), tau1: SMat::scalar(c(0.0, 0.0)) };
    scn.extra = parse_weight_expression("0").unwrap();
    let fm = scn.fiber_at(scn.t0).unwrap();
    let cg = geodesic_curvature(&scn, &fm, scn.t0).unwrap();
    assert!(cg.iter().all(|v| v.abs() < 1e-12), "{:?}", &cg[..4]);
}

#[test]
fn geodesic_curvature_matches_hand_expansion() {
    // φ = model(d=−1) − a|t|² + b(t z̄ + t̄ z), τ constant:
    // c(Ω) = a − b² Im τ / π
    let (a, b) = (0.7, 0.3);
    let tau = c(0.2, 1.3);
    let mut scn = FamilyScenario::from_catalog("elliptic-neg-d1", 16).unwrap();
    scn.period = PeriodMap::Linear { tau0: SMat::scalar(tau), tau1: SMat::scalar(c(0.0, 0.0)) };
    scn.extra = parse_weight_expression(&format!("-{a}*abs2(t) + {b}*(t*zbar + tbar*z)")).unwrap();
    let fm = FiberModel::elliptic(tau, 16, -1, KahlerChoice::FromWeight).unwrap();
    let cg = geodesic_curvature(&scn, &fm, scn.t0).unwrap();
    let expect = a - b * b * tau.im / PI;
    assert!(cg.iter().all(|v| (v - expect).abs() < 1e-6), "{} vs {expect}", cg[0]);
}

#[test]
fn geodesic_curvature_is_a_schur_complement() {
    for id in ["elliptic-neg-d1", "elliptic-pos-d1", "abelian-surface-flat", "elliptic-cy"] {
        let scn = FamilyScenario::from_catalog(id, 8).unwrap();
        let fm = scn.fiber_at(scn.t0).unwrap();
        let cg = geodesic_curvature(&scn, &fm, scn.t0).unwrap();
        let n = fm.n;
        for idx in (0..fm.len()).step_by(29) {
            let h = omega_adapted(&scn, &fm, idx, scn.t0);
            let mut ff = SMat::zeros(n);
            for i in 0..n {
                for j in 0..n {
                    ff.set(i, j, h.get(i, j));
                }
            }
            let inv = ff.inverse().unwrap();
            let mut s = h.get(n, n);
            for i in 0..n {
                for j in 0..n {
                    s -= h.get(n, i) * inv.get(i, j) * h.get(j, n);
                }
            }
            assert!((cg[idx] - s.re).abs() < 1e-10 * (1.0 + s.norm()), "{id} {idx}: {} vs {s}", cg[idx]);
        }
    }
}

#[test]
fn kodaira_spencer_pairs_to_period_derivative() {
    for id in ["elliptic-cy", "elliptic-neg-d1"] {
        let scn = FamilyScenario::from_catalog(id, 16).unwrap();
        let t = scn.t0;
        let fm = scn.fiber_at(t).unwrap();
        let lift = horizontal_lift(&scn, &fm, t).unwrap();
        let ks = kodaira_spencer(&scn, &fm, &lift);
        // ∫ (κ∪dz)∧dz with dz̄∧dz = 2i dA and dA = Im τ dx dy
        let t2 = fm.tau.a[0].im;
        let integral: C64 = ks.kappa[0][0].iter().sum::<C64>() * c(0.0, 2.0 * t2) / fm.len() as f64;
        // periods of dz are 1 and τ(t)
        let h = 1e-4;
        let dtau = (scn.tau(t + h).a[0] - scn.tau(t - h).a[0]) / (2.0 * h);
        assert!((integral + dtau).norm() < 1e-4, "{id}: {integral} vs {}", -dtau);
    }
}

#[test]
fn kodaira_spencer_is_dbar_closed_on_surfaces() {
    let scn = FamilyScenario::from_catalog("abelian-surface-flat", 8).unwrap();
    let fm = scn.fiber_at(scn.t0).unwrap();
    let lift = horizontal_lift(&scn, &fm, scn.t0).unwrap();
    assert!(lift.solver_gap < 1e-10);
    let ks = kodaira_spencer(&scn, &fm, &lift);
    assert!(ks.max_abs() > 1e-3);
    assert!(ks.dbar_residual(&fm) < 1e-8);
}

#[test]
fn cup_products_on_elliptic_fibers() {
    let scn = FamilyScenario::from_catalog("elliptic-neg-d1", 16).unwrap();
    let fm = scn.fiber_at(scn.t0).unwrap();
    let lift = horizontal_lift(&scn, &fm, scn.t0).unwrap();
    let ks = kodaira_spencer(&scn, &fm, &lift);
    let ones = vec![c(1.0, 0.0); fm.len()];
    let dz = Form::scalar(&fm, 1, 0, ones.clone()).unwrap();
    let dzb = Form::scalar(&fm, 0, 1, ones).unwrap();
    let a = cup_product(&fm, &ks, &dz, false).unwrap();
    assert_eq!((a.p, a.q), (0, 1));
    for i in 0..fm.len() {
        assert!((a.comps[0][i] - ks.kappa[0][0][i]).norm() < 1e-15);
    }
    let b = cup_product(&fm, &ks, &dzb, false).unwrap();
    assert_eq!((b.p, b.q), (0, 1));
    assert_eq!(b.max_abs(), 0.0);
    let cb = cup_product(&fm, &ks, &dzb, true).unwrap();
    assert_eq!((cb.p, cb.q), (1, 0));
    for i in 0..fm.len() {
        assert!((cb.comps[0][i] - ks.kappa[0][0][i].conj()).norm() < 1e-15);
    }
    let zero = KodairaSpencerForm::zeros(1, fm.len());
    assert_eq!(cup_product(&fm, &zero, &dz, false).unwrap().max_abs(), 0.0);
}

#[test]
fn vertical_projection_properties() {
    let scn = FamilyScenario::from_catalog("elliptic-neg-d1", 8).unwrap();
    let fm = scn.fiber_at(scn.t0).unwrap();
    let lift = horizontal_lift(&scn, &fm, scn.t0).unwrap();
    let g = Gens { n: 1 };
    let len = fm.len();
    let f = |k: f64| -> Vec<C64> { (0..len).map(|i| c((i as f64 * k).sin(), (i as f64 * 0.3 * k).cos())).collect() };
    let mut theta = TotalForm::zeros(1, len);
    theta.add_term(1 << g.theta_bar(0), c(1.0, 0.0), &f(1.0));
    theta.add_term(1 << g.dt(), c(1.0, 0.0), &f(2.0));
    theta.add_term(1 << g.dtb(), c(1.0, 0.0), &f(3.0));
    let pv = vertical_projection(&theta, &lift.adapted).unwrap();
    let pv2 = vertical_projection(&pv, &lift.adapted).unwrap();
    assert!(pv.max_diff(&pv2) < 1e-14);
    assert!(pv.combine(1.0, &theta, -1.0).vertical_part().max_abs() < 1e-14);
    // a dt-only form projects to zero
    let mut dt_only = TotalForm::zeros(1, len);
    dt_only.add_term(1 << g.dt(), c(1.0, 0.0), &f(2.0));
    assert!(vertical_projection(&dt_only, &lift.adapted).unwrap().max_abs() < 1e-14);
    // product family: dropping the base components
    let zero = vec![vec![c(0.0, 0.0); len]];
    let p0 = vertical_projection(&theta, &zero).unwrap();
    assert!(p0.max_diff(&theta.vertical_part()) < 1e-15);
}

/// Harmonic representatives on the stencil: projections of the center basis.
fn harmonic_family(st: &FamilyStencil, p: usize, q: usize) -> PointSet<Form> {
    let c0 = &st.points.center;
    let u0 = c0.cache.eigenform(p, q, 0).unwrap();
    st.points.try_map(|pt| harmonic_project(&pt.adopt(&u0)?, &pt.ops, &pt.cache)).unwrap()
}

#[test]
fn isotrivial_decomposition_vanishes() {
    let scn = FamilyScenario::from_catalog("isotrivial-flat", 8).unwrap();
    let st = FamilyStencil::new(&scn, 1e-2).unwrap();
    for (p, q) in [(1, 0), (0, 1)] {
        let d = deform_decompose(&st, &harmonic_family(&st, p, q)).unwrap();
        let fm = &st.center().ops.fiber;
        for f in [Some(&d.nu), Some(&d.mu), d.eta.as_ref(), d.xi.as_ref()].into_iter().flatten() {
            assert!(norm2(fm, f).sqrt() < 1e-12);
        }
    }
}

fn rel_diff(fm: &FiberModel, a: &Form, b: &Form) -> f64 {
    norm2(fm, &a.sub(b)).sqrt() / norm2(fm, a).sqrt().max(norm2(fm, b).sqrt()).max(1e-300)
}

#[test]
fn eta_and_xi_are_kodaira_spencer_cups() {
    for (id, p, q) in [("elliptic-cy", 1, 0), ("elliptic-cy", 0, 1), ("elliptic-neg-d1", 0, 1), ("elliptic-pos-d1", 1, 0)] {
        let scn = FamilyScenario::from_catalog(id, 16).unwrap();
        let st = FamilyStencil::new(&scn, 1e-2).unwrap();
        let fam = harmonic_family(&st, p, q);
        let d = deform_decompose(&st, &fam).unwrap();
        let pt = st.center();
        let fm = &pt.ops.fiber;
        let ks = pt.kodaira_spencer(&scn);
        if let Some(eta) = &d.eta {
            let cup = cup_product(fm, &ks, &fam.center, false).unwrap();
            let a = harmonic_project(eta, &pt.ops, &pt.cache).unwrap();
            let b = harmonic_project(&cup, &pt.ops, &pt.cache).unwrap();
            if fm.predicted_harmonic_dim(p - 1, q + 1) > 0 {
                assert!(norm2(fm, &b).sqrt() > 1e-3 * norm2(fm, &fam.center).sqrt(), "{id}: trivial η");
            }
            assert!(rel_diff(fm, &a, &b) < 5e-3, "{id} ({p},{q}) η: {}", rel_diff(fm, &a, &b));
        }
        if let Some(xi) = &d.xi {
            let cup = cup_product(fm, &ks, &fam.center, true).unwrap();
            let a = harmonic_project(xi, &pt.ops, &pt.cache).unwrap();
            let b = harmonic_project(&cup, &pt.ops, &pt.cache).unwrap();
            assert!(rel_diff(fm, &a, &b) < 5e-3, "{id} ({p},{q}) ξ: {}", rel_diff(fm, &a, &b));
        }
        // ∂^φη = −∂̄μ and ∂^φν = −∂̄ξ
        let scale = norm2(fm, &fam.center).sqrt();
        if let Some(eta) = &d.eta {
            let r = pt.ops.del_phi(eta).unwrap().add(&pt.ops.dbar(&d.mu).unwrap());
            assert!(norm2(fm, &r).sqrt() < 1e-4 * scale, "{id}: ∂η+∂̄μ = {}", norm2(fm, &r).sqrt());
        }
        if let Some(xi) = &d.xi {
            let r = pt.ops.del_phi(&d.nu).unwrap().add(&pt.ops.dbar(xi).unwrap());
            assert!(norm2(fm, &r).sqrt() < 1e-4 * scale, "{id}: ∂ν+∂̄ξ = {}", norm2(fm, &r).sqrt());
        }
    }
}
