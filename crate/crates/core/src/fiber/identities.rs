use super::form::{inner, norm2};
use super::spectral::green_shift;
use super::{Form, OperatorSet, SpectralCache};
use crate::error::{Error, Result};
use crate::linalg::{self, HermEig};
use num_complex::Complex64 as C64;
use rand::Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Regime {
    Negative,
    Positive,
    Flat,
}

impl Regime {
    pub fn of(ops: &OperatorSet) -> Regime {
        let d = ops.fiber.degree[0];
        if d < 0 {
            Regime::Negative
        } else if d > 0 {
            Regime::Positive
        } else {
            Regime::Flat
        }
    }
}

/// Builds pairs (g, f) of bidegree (0,1), (1,0) on an elliptic fiber with
/// ∂^φ g = ∂̄ f and the orthogonality conditions of the Green identities.
///
/// Negative and flat: f is random (orthogonal to harmonic forms in the flat
/// case), g = ∂^φ* (□')^{-1} ∂̄ f on (1,1)-forms.
/// Positive: g is random, f = ∂̄* (□'')^{-1} ∂^φ g.
/// The top-degree Laplacian is diagonalized densely once and pseudo-inverted,
/// independent of the spectral cache.
pub struct PairBuilder {
    ops: OperatorSet,
    regime: Regime,
    eig: HermEig,
    sqrt_w: Vec<f64>,
}

impl PairBuilder {
    pub fn new(ops: &OperatorSet) -> Result<Self> {
        if ops.fiber.n != 1 {
            return Err(Error::UnsupportedRegime("Green-identity pairs are built on elliptic fibers".into()));
        }
        let regime = Regime::of(ops);
        let m = match regime {
            Regime::Positive => ops.dense_weighted(1, 1, &|u| ops.box_dbar(u))?,
            _ => ops.dense_weighted(1, 1, &|u| ops.box_del(u))?,
        };
        let eig = linalg::herm_eig(&m)?;
        let sqrt_w = ops.fiber.weight(1, 1).field.iter().map(|v| v.sqrt()).collect();
        Ok(PairBuilder { ops: ops.clone(), regime, eig, sqrt_w })
    }

    fn pseudo_solve(&self, rhs: &Form) -> Form {
        let fm = &self.ops.fiber;
        let b: Vec<C64> = rhs.comps[0].iter().zip(&self.sqrt_w).map(|(v, s)| v * s).collect();
        let lmax = self.eig.values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let v = &self.eig.vectors;
        let n = b.len();
        let mut x = vec![C64::new(0.0, 0.0); n];
        for (k, &l) in self.eig.values.iter().enumerate() {
            if l.abs() <= 1e-9 * lmax {
                continue;
            }
            let mut c = C64::new(0.0, 0.0);
            for i in 0..n {
                c += v[(i, k)].conj() * b[i];
            }
            c /= l;
            for i in 0..n {
                x[i] += c * v[(i, k)];
            }
        }
        let field = x.iter().zip(&self.sqrt_w).map(|(v, s)| v / s).collect();
        Form::scalar(fm, 1, 1, field).expect("shape fixed")
    }

    /// One admissible pair (g, f) from a random smooth seed.
    pub fn pair<R: Rng>(&self, band: i64, rng: &mut R) -> Result<(Form, Form)> {
        let ops = &self.ops;
        let fm = &ops.fiber;
        let (g, f) = match self.regime {
            Regime::Positive => {
                let g = Form::random_smooth(fm, 0, 1, band, rng);
                let x = self.pseudo_solve(&ops.del_phi(&g)?);
                (g, ops.dbar_adj(&x)?)
            }
            _ => {
                let mut f = Form::random_smooth(fm, 1, 0, band, rng);
                if self.regime == Regime::Flat {
                    // harmonic (1,0)-forms are the constants; they would satisfy the
                    // hypotheses with g = 0 and break the equality
                    let m = fm.grid.mean(&f.comps[0]);
                    f.comps[0].iter_mut().for_each(|v| *v -= m);
                }
                let x = self.pseudo_solve(&ops.dbar(&f)?);
                (ops.del_phi_adj(&x)?, f)
            }
        };
        let lhs = ops.del_phi(&g)?;
        let rhs = ops.dbar(&f)?;
        let err = norm2(fm, &lhs.sub(&rhs)).sqrt() / norm2(fm, &rhs).sqrt().max(1e-300);
        if err > 1e-8 {
            return Err(Error::Precondition(format!("∂^φ g = ∂̄ f holds only to {err:.3e}")));
        }
        Ok((g, f))
    }
}

#[derive(Clone, Debug)]
pub struct GreenCheck {
    pub regime: Regime,
    pub f_norm2: f64,
    pub g_norm2: f64,
    /// ⟨(□''+1)^{-1}f,f⟩ (negative), ⟨(□''+1)^{-1}g,g⟩ (positive), 0 (flat)
    pub green_plus: f64,
    /// ⟨(□''−1)^{-1}g,g⟩ in the negative regime, when the gap condition verifies
    pub green_minus: Option<f64>,
    pub green_minus_error: Option<String>,
    /// |identity defect| / (‖f‖² + ‖g‖²)
    pub residual: f64,
    pub residual_minus: Option<f64>,
}

/// Evaluate the Green-operator identity (negative/positive) or the norm
/// equality (flat) for an admissible pair.
pub fn green_identity(ops: &OperatorSet, cache: &SpectralCache, g: &Form, f: &Form) -> Result<GreenCheck> {
    let fm = &ops.fiber;
    let regime = Regime::of(ops);
    let (nf, ng) = (norm2(fm, f), norm2(fm, g));
    let scale = (nf + ng).max(1e-300);
    let mut out = GreenCheck {
        regime,
        f_norm2: nf,
        g_norm2: ng,
        green_plus: 0.0,
        green_minus: None,
        green_minus_error: None,
        residual: 0.0,
        residual_minus: None,
    };
    match regime {
        Regime::Negative => {
            let gp = inner(fm, &green_shift(f, 1.0, ops, cache)?, f)?.re;
            out.green_plus = gp;
            out.residual = ((nf - ng) - gp).abs() / scale;
            match green_shift(g, -1.0, ops, cache) {
                Ok(x) => {
                    let gm = inner(fm, &x, g)?.re;
                    out.green_minus = Some(gm);
                    out.residual_minus = Some(((nf - ng) - gm).abs() / scale);
                }
                Err(e) => out.green_minus_error = Some(e.to_string()),
            }
        }
        Regime::Positive => {
            let gp = inner(fm, &green_shift(g, 1.0, ops, cache)?, g)?.re;
            out.green_plus = gp;
            out.residual = ((ng - nf) - gp).abs() / scale;
        }
        Regime::Flat => {
            out.residual = (nf - ng).abs() / scale;
        }
    }
    Ok(out)
}
