use super::scenario::FamilyScenario;
use crate::error::{Error, Result};
use crate::fiber::{plain_dzb, Field, FiberModel, Form, Regime};
use crate::jet::Jet;
use crate::linalg;
use crate::par;
use crate::small::SMat;
use num_complex::Complex64 as C64;

fn zero() -> C64 {
    C64::new(0.0, 0.0)
}

/// Ω = i Σ H_ab dw_a∧dw̄_b at one fiber point, w = (z_1..z_n, t).
pub fn omega_coords(scn: &FamilyScenario, z: &[C64], t: C64) -> SMat {
    let n = scn.n();
    let nv = 2 * n + 2;
    let zj: Vec<Jet> = (0..n).map(|k| Jet::complex_var(nv, 2 * k, z[k])).collect();
    let tj = Jet::complex_var(nv, 2 * n, t);
    let mut h = SMat::zeros(n + 1);
    match scn.regime {
        Regime::Flat => {
            // i∂∂̄(Im zᵀ Y(t)^{-1} Im z) + i dt∧dt̄
            let tau = scn.period.jet(&tj);
            let y: Vec<Jet> = tau.iter().map(|e| e.im()).collect();
            let yinv = jet_inverse(&y, n);
            let im: Vec<Jet> = zj.iter().map(|e| e.im()).collect();
            let mut psi = Jet::real(nv, 0.0);
            for a in 0..n {
                for b in 0..n {
                    psi = psi + im[a] * yinv[a * n + b] * im[b];
                }
            }
            for a in 0..=n {
                for b in 0..=n {
                    h.set(a, b, psi.d_holo_anti(2 * a, 2 * b));
                }
            }
            h.set(n, n, h.get(n, n) + 1.0);
        }
        Regime::Negative | Regime::Positive => {
            let phi = scn.phi_jet(zj[0], tj);
            let s = if scn.regime == Regime::Negative { -1.0 } else { 1.0 };
            for a in 0..2 {
                for b in 0..2 {
                    h.set(a, b, s * phi.d_holo_anti(2 * a, 2 * b));
                }
            }
        }
    }
    h
}

fn jet_inverse(m: &[Jet], n: usize) -> Vec<Jet> {
    match n {
        1 => vec![m[0].recip()],
        2 => {
            let det = m[0] * m[3] - m[1] * m[2];
            let r = det.recip();
            vec![m[3] * r, -(m[1] * r), -(m[2] * r), m[0] * r]
        }
        _ => unreachable!("fiber dimension is 1 or 2"),
    }
}

/// Change of frame dw = M e, e = (θ, dt), θ = dz − τ'y dt.
fn frame_matrix(tau_p: &SMat, y: &[f64]) -> SMat {
    let n = tau_p.n;
    let mut m = SMat::identity(n + 1);
    for j in 0..n {
        let s: C64 = (0..n).map(|k| tau_p.get(j, k) * y[k]).sum();
        m.set(j, n, s);
    }
    m
}

/// Ω in the adapted coframe (θ_1..θ_n, dt): H' = Mᵀ H M̄.
pub fn omega_adapted(scn: &FamilyScenario, fm: &FiberModel, idx: usize, t: C64) -> SMat {
    let (x, y) = fm.grid.point(idx);
    let z: Vec<C64> = (0..fm.n)
        .map(|j| C64::new(x[j], 0.0) + (0..fm.n).map(|k| fm.tau.get(j, k) * y[k]).sum::<C64>())
        .collect();
    let h = omega_coords(scn, &z, t);
    let m = frame_matrix(&scn.period.derivative(t), &y);
    m.transpose().mul(&h).mul(&m.conj())
}

/// Horizontal lift of ∂/∂t on one fiber.
#[derive(Clone, Debug)]
pub struct FiberVectorField {
    pub t: C64,
    /// coefficients of ∂/∂z_k in the coordinates (z, t): V = ∂/∂t + Σ w_k ∂/∂z_k
    pub components: Vec<Field>,
    /// the same field in the adapted frame: V = E_t + Σ v_k ∂/∂z_k, periodic
    pub adapted: Vec<Field>,
    /// max over the grid of |Ω(V, ∂̄_k)| / |Ω|
    pub residual: f64,
    /// max difference between the direct and least-squares solves
    pub solver_gap: f64,
}

fn solve_direct(a: &SMat, b: &[C64], idx: usize) -> Result<Vec<C64>> {
    let scale = a.max_abs();
    let det = a.det();
    if !(det.norm() > 1e-12 * scale.powi(a.n as i32)) {
        return Err(Error::DegenerateMetric { index: idx, detail: format!("fiberwise Ω is singular (det {det:.3e})") });
    }
    let inv = a.inverse().ok_or_else(|| Error::DegenerateMetric {
        index: idx,
        detail: "fiberwise Ω is singular".into(),
    })?;
    Ok(inv.mul_vec(b))
}

/// Solve Σ_j V^j Ω_{jk̄} = −Ω_{tk̄} for the vertical part V^j of the lift.
fn lift_system(h: &SMat) -> (SMat, Vec<C64>) {
    let n = h.n - 1;
    let mut a = SMat::zeros(n);
    let mut b = vec![zero(); n];
    for k in 0..n {
        for j in 0..n {
            a.set(k, j, h.get(j, k));
        }
        b[k] = -h.get(n, k);
    }
    (a, b)
}

pub fn horizontal_lift(scn: &FamilyScenario, fm: &FiberModel, t: C64) -> Result<FiberVectorField> {
    let n = fm.n;
    let tau_p = scn.period.derivative(t);
    let rows = par::map_range(fm.len(), |idx| -> Result<(Vec<C64>, Vec<C64>, f64, f64)> {
        let (x, y) = fm.grid.point(idx);
        let z: Vec<C64> = (0..n)
            .map(|j| C64::new(x[j], 0.0) + (0..n).map(|k| fm.tau.get(j, k) * y[k]).sum::<C64>())
            .collect();
        let h = omega_coords(scn, &z, t);
        let (a, b) = lift_system(&h);
        let w = solve_direct(&a, &b, idx)?;
        // independent path: least squares in the adapted frame
        let m = frame_matrix(&tau_p, &y);
        let hp = m.transpose().mul(&h).mul(&m.conj());
        let (ap, bp) = lift_system(&hp);
        let rows: Vec<Vec<C64>> = (0..n).map(|k| (0..n).map(|j| ap.get(k, j)).collect()).collect();
        let v = linalg::lstsq(&rows, &bp)?;
        let shift: Vec<C64> = (0..n).map(|j| (0..n).map(|k| tau_p.get(j, k) * y[k]).sum()).collect();
        let mut gap = 0.0f64;
        let scale = 1.0 + w.iter().map(|c| c.norm()).fold(0.0, f64::max);
        for j in 0..n {
            gap = gap.max((w[j] - shift[j] - v[j]).norm() / scale);
        }
        let mut res = 0.0f64;
        for k in 0..n {
            let mut s = h.get(n, k);
            for j in 0..n {
                s += w[j] * h.get(j, k);
            }
            res = res.max(s.norm() / h.max_abs());
        }
        let adapted = (0..n).map(|j| w[j] - shift[j]).collect();
        Ok((w, adapted, res, gap))
    });
    let mut components = vec![Vec::with_capacity(fm.len()); n];
    let mut adapted = vec![Vec::with_capacity(fm.len()); n];
    let (mut residual, mut solver_gap) = (0.0f64, 0.0f64);
    for r in rows {
        let (w, v, res, gap) = r?;
        for j in 0..n {
            components[j].push(w[j]);
            adapted[j].push(v[j]);
        }
        residual = residual.max(res);
        solver_gap = solver_gap.max(gap);
    }
    Ok(FiberVectorField { t, components, adapted, residual, solver_gap })
}

/// Top-degree coefficient bookkeeping for c(Ω).
fn wedge_dense(a: &[C64], b: &[C64]) -> Vec<C64> {
    let mut out = vec![zero(); a.len()];
    for (ma, &ca) in a.iter().enumerate() {
        if ca == zero() {
            continue;
        }
        for (mb, &cb) in b.iter().enumerate() {
            if cb == zero() {
                continue;
            }
            let s = crate::fiber::wedge_sign(ma as u32, mb as u32);
            if s != 0.0 {
                out[ma | mb] += s * ca * cb;
            }
        }
    }
    out
}

/// c(Ω) = (Ω^{n+1}/(n+1)!) / (Ω^n/n! ∧ i dt∧dt̄) from the Hermitian matrix of Ω
/// in any frame whose last element is dt.
pub fn geodesic_curvature_at(h: &SMat) -> Option<f64> {
    let m = h.n;
    let size = 1usize << (2 * m);
    let mut om = vec![zero(); size];
    for a in 0..m {
        for b in 0..m {
            om[(1 << a) | (1 << (m + b))] += C64::i() * h.get(a, b);
        }
    }
    let mut pow = vec![zero(); size];
    pow[0] = C64::new(1.0, 0.0);
    for _ in 1..m {
        pow = wedge_dense(&pow, &om);
    }
    let fact: f64 = (1..m).map(|k| k as f64).product();
    let num = wedge_dense(&pow, &om)[size - 1] / (fact * m as f64);
    let mut dtdtb = vec![zero(); size];
    dtdtb[(1 << (m - 1)) | (1 << (2 * m - 1))] = C64::i();
    let den = wedge_dense(&pow, &dtdtb)[size - 1] / fact;
    if !(den.norm() > 1e-13 * h.max_abs().powi(m as i32 - 1)) {
        return None;
    }
    Some((num / den).re)
}

pub fn geodesic_curvature(scn: &FamilyScenario, fm: &FiberModel, t: C64) -> Result<Vec<f64>> {
    let vals = par::map_range(fm.len(), |idx| {
        let h = omega_adapted(scn, fm, idx, t);
        geodesic_curvature_at(&h).ok_or_else(|| Error::DegenerateMetric {
            index: idx,
            detail: "fiber volume form Ω^n vanishes".into(),
        })
    });
    vals.into_iter().collect()
}

/// κ = ∂̄V restricted to the fiber: kappa[j][k] is the coefficient of
/// dz̄_k ⊗ ∂/∂z_j.
#[derive(Clone, Debug)]
pub struct KodairaSpencerForm {
    pub n: usize,
    pub kappa: Vec<Vec<Field>>,
}

impl KodairaSpencerForm {
    pub fn zeros(n: usize, len: usize) -> Self {
        KodairaSpencerForm { n, kappa: vec![vec![vec![zero(); len]; n]; n] }
    }

    pub fn max_abs(&self) -> f64 {
        self.kappa.iter().flatten().flatten().fold(0.0, |a, c| a.max(c.norm()))
    }

    /// max |∂κ_{jk̄}/∂z̄_l − ∂κ_{jl̄}/∂z̄_k|
    pub fn dbar_residual(&self, fm: &FiberModel) -> f64 {
        let n = self.n;
        let mut worst = 0.0f64;
        for j in 0..n {
            let d: Vec<Vec<Field>> =
                (0..n).map(|k| (0..n).map(|l| plain_dzb(&fm.grid, &fm.tau, &fm.c, l, &self.kappa[j][k])).collect()).collect();
            for k in 0..n {
                for l in 0..k {
                    for (a, b) in d[k][l].iter().zip(&d[l][k]) {
                        worst = worst.max((a - b).norm());
                    }
                }
            }
        }
        worst
    }
}

/// κ_{jk̄} = ∂v_j/∂z̄_k − (τ' (2i Im τ)^{-1})_{jk}: the second term is ∂̄ of the
/// non-periodic part τ'y of the coordinate components.
pub fn kodaira_spencer(scn: &FamilyScenario, fm: &FiberModel, lift: &FiberVectorField) -> KodairaSpencerForm {
    let n = fm.n;
    let tc = scn.period.derivative(lift.t).mul(&fm.c);
    let mut ks = KodairaSpencerForm::zeros(n, fm.len());
    for j in 0..n {
        for k in 0..n {
            let mut f = plain_dzb(&fm.grid, &fm.tau, &fm.c, k, &lift.adapted[j]);
            let s = tc.get(j, k);
            f.iter_mut().for_each(|v| *v -= s);
            ks.kappa[j][k] = f;
        }
    }
    ks
}

/// Remove generator bit g from a sorted product, with the sign of moving it to
/// the front.
fn contract(mask: u32, g: u32) -> Option<(f64, u32)> {
    if mask & (1 << g) == 0 {
        return None;
    }
    let below = (mask & ((1u32 << g) - 1)).count_ones();
    Some((if below % 2 == 0 { 1.0 } else { -1.0 }, mask & !(1 << g)))
}

/// κ∪u (contract the vector part, then wedge the form part in front) or,
/// with `conjugate`, κ̄∪u.
pub fn cup_product(fm: &FiberModel, ks: &KodairaSpencerForm, u: &Form, conjugate: bool) -> Result<Form> {
    let n = fm.n;
    let (p, q) = if conjugate { (u.p as i64 + 1, u.q as i64 - 1) } else { (u.p as i64 - 1, u.q as i64 + 1) };
    if p < 0 || q < 0 {
        // nothing to contract
        return Ok(Form::zeros(fm, u.p, u.q));
    }
    if p > n as i64 || q > n as i64 {
        return Err(Error::Shape(format!("cup product leaves the bidegree range: ({p},{q})")));
    }
    let (p, q) = (p as usize, q as usize);
    let mut out = Form::zeros(fm, p, q);
    let dst: Vec<u32> = fm.components(p, q).iter().map(|(i, j)| crate::fiber::form_mask(n, i, j)).collect();
    for (a, (ia, ja)) in fm.components(u.p, u.q).iter().enumerate() {
        let ma = crate::fiber::form_mask(n, ia, ja);
        for j in 0..n {
            // vector ∂_j (holomorphic bit j) or ∂̄_j (bit n+j)
            let g = if conjugate { n + j } else { j } as u32;
            let Some((s1, rest)) = contract(ma, g) else { continue };
            for k in 0..n {
                let f = if conjugate { k } else { n + k } as u32;
                let s2 = crate::fiber::wedge_sign(1 << f, rest);
                if s2 == 0.0 {
                    continue;
                }
                let dm = rest | (1 << f);
                let c = dst.iter().position(|&m| m == dm).expect("bidegree matches");
                let kf = &ks.kappa[j][k];
                for ((o, x), kv) in out.comps[c].iter_mut().zip(&u.comps[a]).zip(kf) {
                    let kv = if conjugate { kv.conj() } else { *kv };
                    *o += s1 * s2 * kv * x;
                }
            }
        }
    }
    Ok(out)
}
