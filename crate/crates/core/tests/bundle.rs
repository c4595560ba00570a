use hodgelab::bundle::*;
use hodgelab::error::Error;
use hodgelab::family::*;
use hodgelab::fiber::*;
use hodgelab::linalg::Small;
use hodgelab::C64;
use std::sync::Arc;

const N: usize = 16;
const H: f64 = 1e-2;

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

fn stencil(id: &str, n: usize, h: f64) -> Arc<FamilyStencil> {
    let scn = FamilyScenario::from_catalog(id, n).unwrap();
    Arc::new(FamilyStencil::new(&scn, h).unwrap())
}

fn max_abs(m: &Small) -> f64 {
    m.iter().flatten().map(|v| v.norm()).fold(0.0, f64::max)
}

#[test]
fn frame_ranks() {
    // trivial bundle, (1,0): one frame vector, a constant multiple of dz
    let fr = build_frame(stencil("elliptic-cy", N, H), 1, 0, false).unwrap();
    assert_eq!(fr.rank, 1);
    let u = &fr.center()[0].comps[0];
    let spread = u.iter().map(|v| (v - u[0]).norm()).fold(0.0, f64::max);
    assert!(spread < 1e-10 * u[0].norm(), "{spread}");

    // Riemann–Roch: h^0(L) − h^1(L) = d on an elliptic curve, h^0 = 0 for d < 0
    let fr = build_frame(stencil("elliptic-neg-d1", N, H), 0, 1, false).unwrap();
    assert_eq!(fr.rank, 1);
    assert!(matches!(build_frame(stencil("elliptic-neg-d1", N, H), 1, 0, false), Err(Error::Precondition(_))));

    // constant (1,1)-forms a_{jk} dz_j∧dz̄_k are primitive iff Σ g^{kj} a_{jk} = 0,
    // one nonzero linear condition on a 4-dimensional space
    let st = stencil("abelian-surface-flat", 8, H);
    let fm = &st.center().ops.fiber;
    let g = fm.metric_at(0);
    let ginv = g.inverse().unwrap();
    let functional: Vec<C64> = (0..2).flat_map(|j| (0..2).map(move |k| (j, k))).map(|(j, k)| ginv.get(k, j)).collect();
    let oracle = 4 - usize::from(functional.iter().any(|v| v.norm() > 1e-12));
    let fr = build_frame(st, 1, 1, true).unwrap();
    assert_eq!(fr.rank, oracle);
}

#[test]
fn center_frames_are_orthonormal() {
    for (id, p, q, prim, n) in [("elliptic-neg-d1", 0, 1, false, N), ("abelian-surface-flat", 1, 1, true, 8)] {
        let fr = build_frame(stencil(id, n, H), p, q, prim).unwrap();
        let g = gram_matrix(&fr).unwrap();
        for a in 0..fr.rank {
            for b in 0..fr.rank {
                let want = if a == b { 1.0 } else { 0.0 };
                assert!((g.center[a][b] - want).norm() < 1e-10, "{id} {a}{b}: {}", g.center[a][b]);
            }
        }
        for s in g.iter() {
            for a in 0..fr.rank {
                for b in 0..fr.rank {
                    assert!((s[a][b] - s[b][a].conj()).norm() < 1e-12);
                }
            }
        }
    }
}

#[test]
fn constant_form_gram_matches_flat_torus_integral() {
    // ω = (i/2)(Im τ)^{-1} dz∧dz̄ with unit volume gives |dz̄|² = 2 Im τ
    let st = stencil("elliptic-cy", N, H);
    let fm = &st.center().ops.fiber;
    let seed = Form::scalar(fm, 0, 1, vec![c(1.0, 0.0); fm.len()]).unwrap();
    let fr = HodgeFrame::from_seeds(st.clone(), vec![seed], false).unwrap();
    let g = gram_matrix(&fr).unwrap();
    for (pt, s) in st.points.iter().zip(g.iter()) {
        let want = 2.0 * pt.t.im;
        assert!((s[0][0].re - want).abs() < 1e-12, "{} vs {want}", s[0][0].re);
    }
}

#[test]
fn vanishing_projection_is_a_rank_jump() {
    let st = stencil("elliptic-neg-d1", N, H);
    let center = st.center();
    let dim = center.cache.spectrum(0, 1).unwrap().harmonic_dim;
    let seed = center.cache.eigenform(0, 1, dim).unwrap();
    assert!(matches!(HodgeFrame::from_seeds(st, vec![seed], false), Err(Error::RankJump(_))));
}

#[test]
fn isotrivial_connection_and_curvature_vanish() {
    let fr = build_frame(stencil("isotrivial-flat", N, H), 0, 1, false).unwrap();
    let decs = fr.decompose().unwrap();
    let conn = connection(&fr, &decs).unwrap();
    assert!(max_abs(&conn.dbar) < 1e-12 && max_abs(&conn.del) < 1e-12);
    let r = curvature_flat(&fr, c(1.0, 0.0)).unwrap();
    assert!(r.analytic_total.abs() < 1e-8 && r.fd_total.abs() < 1e-8, "{} {}", r.analytic_total, r.fd_total);
    // C(φ)‖u‖² is the only term that can survive
    assert_eq!(r.term_eta, 0.0);
    assert_eq!(r.term_xi, 0.0);
}

#[test]
fn connection_is_metric_compatible() {
    // ∂_t‖u‖² = ⟨D'u,u⟩ + ⟨u,D''u⟩, so del + conj(dbar) = ∂_t log ‖u‖² in rank one
    for (id, p, q) in [("elliptic-neg-d1", 0, 1), ("elliptic-pos-d1", 1, 0), ("elliptic-cy", 0, 1)] {
        let st = stencil(id, N, H);
        let fr = build_frame(st.clone(), p, q, false).unwrap();
        let decs = fr.decompose().unwrap();
        let conn = connection(&fr, &decs).unwrap();
        let g = gram_matrix(&fr).unwrap();
        let d = |s: &[Small], k: f64| ((s[0][0][0] - s[1][0][0]) - c(0.0, 1.0) * (s[2][0][0] - s[3][0][0])) / (4.0 * k);
        let dt = (4.0 * d(&g.fine, H / 2.0) - d(&g.coarse, H)) / 3.0;
        let lhs = conn.del[0][0] + conn.dbar[0][0].conj();
        let rhs = dt / g.center[0][0];
        assert!((lhs - rhs).norm() < 1e-5 * (1.0 + rhs.norm()), "{id}: {lhs} vs {rhs}");
    }
}

#[test]
fn kodaira_spencer_cups_of_holomorphic_sections_are_holomorphic() {
    // s = (1 − A δ̄) e is holomorphic to first order at the center; the
    // harmonic parts of κ∪s then form a D''-flat section of H^{0,1}
    let st = stencil("elliptic-cy", N, H);
    let scn = st.scn.clone();
    let fr = build_frame(st.clone(), 1, 0, false).unwrap();
    let conn = connection(&fr, &fr.decompose().unwrap()).unwrap();
    let a = conn.dbar[0][0];
    let t0 = st.center().t;
    let cups = st.points.zip(&fr.vectors).try_map(|(pt, e)| {
        let s = e[0].scale(c(1.0, 0.0) - a * (pt.t - t0).conj());
        let ks = pt.kodaira_spencer(&scn);
        let w = cup_product(&pt.ops.fiber, &ks, &s, false)?;
        Ok(vec![harmonic_project(&w, &pt.ops, &pt.cache)?])
    });
    let cup_frame = HodgeFrame::from_vectors(st.clone(), cups.unwrap()).unwrap();
    let cconn = connection(&cup_frame, &cup_frame.decompose().unwrap()).unwrap();
    let plain = build_frame(st, 0, 1, false).unwrap();
    let pconn = connection(&plain, &plain.decompose().unwrap()).unwrap();
    assert!(pconn.dbar[0][0].norm() > 0.1, "reference frame should not be holomorphic");
    assert!(cconn.dbar[0][0].norm() <= 5e-3, "{}", cconn.dbar[0][0]);
}

#[test]
fn negative_curvature_matches_oracle() {
    let fr = build_frame(stencil("elliptic-neg-d1", N, H), 0, 1, false).unwrap();
    let r = curvature_negative(&fr, c(1.0, 0.0)).unwrap();
    assert!(r.residual_rel <= 1e-2, "{}", r.residual_rel);
    // η has bidegree (−1,2)
    assert_eq!(r.term_eta, 0.0);
    assert!(r.analytic_total <= 1e-6);
    assert!(r.hermitian_defect <= 1e-10);
    let exact = r.term_mu + r.term_xi + r.term_eta + r.term_nu + r.term_comega;
    assert_eq!(r.analytic_total, exact);
    let v = &r.vectors[0];
    assert!((v.term_mu_alt.unwrap() - v.term_mu).abs() <= 1e-6);
    // Θ(v, v̄) = |v|² Θ(∂_t, ∂_t̄)
    for k in 0..9 {
        let dir = C64::from_polar(0.5 + 0.1 * k as f64, 2.0 * std::f64::consts::PI * k as f64 / 9.0);
        let rk = curvature_negative(&fr, dir).unwrap();
        assert!((rk.analytic_total - dir.norm_sqr() * r.analytic_total).abs() < 1e-12);
        assert!(rk.analytic_total <= 1e-6);
    }
    let pos = build_frame(stencil("elliptic-pos-d1", N, H), 1, 0, false).unwrap();
    assert!(matches!(curvature_negative(&pos, c(1.0, 0.0)), Err(Error::UnsupportedRegime(_))));
}

#[test]
fn second_derivative_of_gram_accounts_for_every_term() {
    // ∂_t∂_t̄‖s‖² = ‖μ‖² + ‖ξ‖² − ‖ν‖² − ‖η‖² + (−1)^q c_n ∫ c(Ω) s∧s̄ e^{-φ}
    // for the holomorphically corrected frame s, whose ν is ν⊥ of the frame
    let fr = build_frame(stencil("elliptic-neg-d1", N, H), 0, 1, false).unwrap();
    let pt = fr.stencil.center();
    let fm = &pt.ops.fiber;
    let decs = fr.decompose().unwrap();
    let conn = connection(&fr, &decs).unwrap();
    let fd = curvature_fd_oracle(&fr, &conn).unwrap();
    let terms = terms_negative(&fr, &decs).unwrap();
    let d = &decs[0];
    let nu_perp = d.nu.sub(&harmonic_project(&d.nu, &pt.ops, &pt.cache).unwrap());
    let xi2 = d.xi.as_ref().map_or(0.0, |x| norm2(fm, x));
    let eta2 = d.eta.as_ref().map_or(0.0, |x| norm2(fm, x));
    let want = norm2(fm, &d.mu) + xi2 - norm2(fm, &nu_perp) - eta2 - terms.comega[0][0].re;
    let got = fd.gram_ddbar[0][0].re;
    assert!((got - want).abs() < 1e-3 * want.abs().max(1.0), "{got} vs {want}");
}

#[test]
fn positive_curvature_and_serre_duality() {
    let fr = build_frame(stencil("elliptic-pos-d1", N, H), 1, 0, false).unwrap();
    let r = curvature_positive(&fr, c(1.0, 0.0)).unwrap();
    assert!(r.residual_rel <= 1e-2, "{}", r.residual_rel);
    // (n,0): ξ vanishes for bidegree reasons and ν for holomorphic sections
    assert_eq!(r.term_xi, 0.0);
    assert!(r.term_nu.abs() < 1e-10);
    assert!(r.analytic_total > 0.0);

    let neg = FamilyScenario::from_catalog("elliptic-neg-d1", N).unwrap();
    let pos = FamilyScenario::from_catalog("elliptic-pos-d1", N).unwrap();
    let s = serre_duality_check(&neg, &pos, H).unwrap();
    assert!(s.residual_rel <= 1e-3, "{s:?}");
    assert!(s.fd_residual_rel <= 1e-3, "{s:?}");
    assert!((s.pairing_ratio - 1.0).abs() < 1e-8, "{s:?}");
}

#[test]
fn flat_curvature_on_the_calabi_yau_family() {
    let fr = build_frame(stencil("elliptic-cy", N, H), 0, 1, false).unwrap();
    let r = curvature_flat(&fr, c(1.0, 0.0)).unwrap();
    assert!(r.residual_rel <= 1e-2, "{}", r.residual_rel);
    // φ = log(2 Im t): C(φ) = −1/(4 (Im t)²)
    let t = fr.stencil.center().t;
    let want = -1.0 / (4.0 * t.im * t.im) * r.vectors[0].norm2;
    assert!((r.term_comega - want).abs() < 1e-6, "{} vs {want}", r.term_comega);
}

#[test]
fn griffiths_formula_on_the_abelian_surface() {
    let st = stencil("abelian-surface-flat", 8, H);
    let fr = build_frame(st.clone(), 1, 1, true).unwrap();
    let r = curvature_flat(&fr, c(1.0, 0.0)).unwrap();
    assert!(r.residual_rel <= 1e-2, "{}", r.residual_rel);
    assert_eq!(r.term_comega, 0.0);
    assert!(r.term_eta > 1e-2 && r.term_xi < -1e-2);
    assert!(r.hermitian_defect <= 1e-10);
    let full = build_frame(st, 1, 1, false).unwrap();
    assert!(matches!(curvature_flat(&full, c(1.0, 0.0)), Err(Error::Precondition(_))));
}

#[test]
fn oracle_residual_is_second_order_in_the_step() {
    let res: Vec<f64> = [2e-2, 1e-2]
        .iter()
        .map(|&h| {
            let fr = build_frame(stencil("elliptic-neg-d1", N, h), 0, 1, false).unwrap();
            curvature_negative(&fr, c(1.0, 0.0)).unwrap().residual_abs
        })
        .collect();
    assert!(res[0] / res[1] >= 3.0, "{res:?}");
}
