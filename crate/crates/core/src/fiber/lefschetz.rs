use super::form::norm2;
use super::spectral::harmonic_project;
use super::{FiberModel, Form, OperatorSet, SpectralCache};
use crate::error::{Error, Result};
use num_complex::Complex64 as C64;

/// Bitmask of dz_I ∧ dz̄_J: holomorphic generators in bits 0..n, antiholomorphic in n..2n.
pub(crate) fn mask(n: usize, i: &[usize], j: &[usize]) -> u32 {
    i.iter().map(|&a| 1u32 << a).sum::<u32>() + j.iter().map(|&b| 1u32 << (n + b)).sum::<u32>()
}

/// Sign of e_A ∧ e_B relative to the sorted product, zero when they overlap.
pub(crate) fn wedge_sign(a: u32, b: u32) -> f64 {
    if a & b != 0 {
        return 0.0;
    }
    let mut inv = 0;
    let mut bb = b;
    while bb != 0 {
        let lowest = bb.trailing_zeros();
        inv += (a >> (lowest + 1)).count_ones();
        bb &= bb - 1;
    }
    if inv % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Pointwise wedge product of fiber forms.
pub fn wedge_forms(fm: &FiberModel, f: &Form, g: &Form) -> Result<Form> {
    let (p, q) = (f.p + g.p, f.q + g.q);
    let n = fm.n;
    if p > n || q > n {
        return Err(Error::Shape(format!("wedge product has bidegree ({p},{q}) beyond the fiber dimension")));
    }
    let mut out = Form::zeros(fm, p, q);
    let dst: Vec<u32> = fm.components(p, q).iter().map(|(i, j)| mask(n, i, j)).collect();
    for (a, (ia, ja)) in fm.components(f.p, f.q).iter().enumerate() {
        let ma = mask(n, ia, ja);
        for (b, (ib, jb)) in fm.components(g.p, g.q).iter().enumerate() {
            let mb = mask(n, ib, jb);
            let s = wedge_sign(ma, mb);
            if s == 0.0 {
                continue;
            }
            let k = dst.iter().position(|&m| m == ma | mb).unwrap();
            for (o, (x, y)) in out.comps[k].iter_mut().zip(f.comps[a].iter().zip(&g.comps[b])) {
                *o += s * x * y;
            }
        }
    }
    Ok(out)
}

/// The Kähler form ω = i Σ g_{jk̄} dz_j ∧ dz̄_k as a (1,1)-form.
pub fn omega_form(fm: &FiberModel) -> Form {
    let mut out = Form::zeros(fm, 1, 1);
    for (k, (i, j)) in fm.components(1, 1).iter().enumerate() {
        for idx in 0..fm.len() {
            out.comps[k][idx] = C64::new(0.0, 1.0) * fm.metric_at(idx).get(i[0], j[0]);
        }
    }
    out
}

/// (−1)^q c_n ∫ f ∧ ḡ for forms of total degree n, with c_n = i^{n²}. The
/// top-degree coefficient is converted to a density through ω^n/n!.
pub fn top_pairing(fm: &FiberModel, f: &Form, g: &Form) -> Result<C64> {
    f.same_shape(g)?;
    let n = fm.n;
    if f.p + f.q != n {
        return Err(Error::Shape("top pairing needs total degree n".into()));
    }
    let top = wedge_forms(fm, f, &g.conj())?;
    let om = omega_form(fm);
    let mut omn = om.clone();
    for _ in 1..n {
        omn = wedge_forms(fm, &omn, &om)?;
    }
    let fact: f64 = (1..=n).map(|k| k as f64).product();
    let cn = C64::new(0.0, 1.0).powu((n * n) as u32);
    let sign = if f.q % 2 == 0 { 1.0 } else { -1.0 };
    let mut total = C64::new(0.0, 0.0);
    for i in 0..fm.len() {
        let vol = omn.comps[0][i] / fact;
        total += sign * cn * top.comps[0][i] / vol * fm.dv[i];
    }
    Ok(total)
}

/// ‖ω∧u‖ / max(‖u‖, ε).
pub fn primitive_test(u: &Form, ops: &OperatorSet) -> Result<f64> {
    let fm = &ops.fiber;
    if u.p + u.q > fm.n {
        return Err(Error::Shape("primitive test needs p+q ≤ n".into()));
    }
    if u.p + 1 > fm.n || u.q + 1 > fm.n {
        return Ok(0.0);
    }
    let w = wedge_forms(fm, &omega_form(fm), u)?;
    Ok(norm2(fm, &w).sqrt() / norm2(fm, u).sqrt().max(1e-300))
}

/// Harmonic part of u split as primitive part + ω∧(lower form).
pub fn lefschetz_decompose(u: &Form, ops: &OperatorSet, cache: &SpectralCache) -> Result<(Form, Form)> {
    let fm = &ops.fiber;
    if !fm.is_fiber_flat() {
        return Err(Error::UnsupportedRegime("Lefschetz decomposition needs a fiberwise flat weight".into()));
    }
    if u.p + u.q != fm.n {
        return Err(Error::Precondition("Lefschetz decomposition is applied to forms of total degree n".into()));
    }
    let uh = harmonic_project(u, ops, cache)?;
    if u.p == 0 || u.q == 0 {
        let z = Form::zeros(fm, u.p, u.q);
        return Ok((uh, z));
    }
    // n = 2, (1,1): subtract the pointwise ω-component
    let om = omega_form(fm);
    let w = fm.weight(1, 1);
    let k = om.comps.len();
    let mut mult = Form::zeros(fm, 1, 1);
    for i in 0..fm.len() {
        let mut num = C64::new(0.0, 0.0);
        let mut den = C64::new(0.0, 0.0);
        for a in 0..k {
            for b in 0..k {
                num += uh.comps[a][i] * w.mat.get(a, b) * om.comps[b][i].conj();
                den += om.comps[a][i] * w.mat.get(a, b) * om.comps[b][i].conj();
            }
        }
        let c = num / den;
        for a in 0..k {
            mult.comps[a][i] = c * om.comps[a][i];
        }
    }
    Ok((uh.sub(&mult), mult))
}
