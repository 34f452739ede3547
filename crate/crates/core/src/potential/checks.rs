//! Classical subharmonicity, directionality, translation perturbations and
//! the bad-test-jet search.

use std::sync::Arc;

use rayon::prelude::*;

use super::classical::{Affinely, Classical, QuadraticFunction, SumFunction};
use super::grid::{BoxDomain, GridFunction};
use crate::duality::SubequationOracle;
use crate::jet::{vnorm, vsub, DirectionalCone, Jet, SymMatrix};
use crate::report::Report;
use crate::tolerances::tol_fd;
use crate::{Classification, Error, Result};

/// `J^2_x phi` classifies not Outside (Inside when `strict`) at every
/// interior lattice point. Points where `phi = -inf` are skipped.
pub fn classical_subharmonic_check(phi: &dyn Classical, f: &SubequationOracle, dom: &BoxDomain, strict: bool) -> Result<Report> {
    if phi.dim() != f.dim() || dom.dim() != f.dim() {
        return Err(Error::DimensionMismatch { expected: f.dim(), got: phi.dim().min(dom.dim()) });
    }
    let interior = dom.interior_indices();
    let verdicts: Vec<Option<(Jet, Classification)>> = interior
        .par_iter()
        .map(|&i| {
            let x = dom.point(i);
            phi.jet(&x).map(|j| {
                let c = f.classify(&x, &j);
                (j, c)
            })
        })
        .collect();
    let mut rep = Report::new(format!("classical_subharmonic {}{}", f.name(), if strict { " strict" } else { "" }));
    for (&i, v) in interior.iter().zip(verdicts) {
        let Some((j, c)) = v else { continue };
        rep.samples += 1;
        let bad = if strict { !c.is_inside() } else { c.is_outside() };
        if bad {
            rep.fail(&dom.point(i), Some(&j), format!("2-jet classified {c}"));
        }
    }
    Ok(rep)
}

/// Smallest integer step along `g` on the lattice, if `g` is lattice aligned.
fn lattice_step(dom: &BoxDomain, g: &[f64]) -> Option<Vec<isize>> {
    let v: Vec<f64> = (0..dom.dim()).map(|a| g[a] / dom.spacing(a)).collect();
    let top = v.iter().fold(0.0f64, |m, c| m.max(c.abs()));
    if top == 0.0 {
        return None;
    }
    (1..=16).find_map(|k| {
        let w: Vec<f64> = v.iter().map(|c| c / top * k as f64).collect();
        w.iter().all(|c| (c - c.round()).abs() < 1e-9).then(|| w.iter().map(|c| c.round() as isize).collect())
    })
}

/// For lattice pairs with `x - x0` a positive lattice multiple of a
/// generator of the polar cone, `u(x) >= u(x0) - tol_fd`.
pub fn directionality_check(u: &GridFunction, d: &DirectionalCone) -> Result<Report> {
    let dom = &u.domain;
    let n = dom.dim();
    if d.dim() != n {
        return Err(Error::DimensionMismatch { expected: n, got: d.dim() });
    }
    let mut rep = Report::new("directionality");
    let h = dom.h_max();
    for g in d.polar_generators() {
        let Some(step) = lattice_step(dom, g) else {
            rep.note(format!("polar generator {g:?} is not lattice aligned; skipped"));
            continue;
        };
        let found: Vec<(usize, Vec<f64>, f64, f64)> = (0..dom.len())
            .into_par_iter()
            .flat_map_iter(|idx| {
                let m0 = dom.multi_index(idx);
                let u0 = u.values[idx];
                let mut out = Vec::new();
                let mut k = 1isize;
                loop {
                    let m: Option<Vec<usize>> = (0..n)
                        .map(|a| {
                            let c = m0[a] as isize + k * step[a];
                            (c >= 0 && c < dom.counts()[a] as isize).then_some(c as usize)
                        })
                        .collect();
                    let Some(m) = m else { break };
                    let v = u.get(&m);
                    if u0.is_finite() && v < u0 - tol_fd(h, u0.abs().max(v.abs())) {
                        out.push((idx, dom.point_of(&m), u0, v));
                    }
                    k += 1;
                }
                out
            })
            .collect();
        rep.samples += dom.len();
        for (idx, x, u0, v) in found {
            let x0 = dom.point(idx);
            rep.violation(crate::report::Violation {
                x: x0,
                y: Some(x),
                jet: None,
                detail: format!("u decreases from {u0} to {v} along the polar generator {g:?}"),
            });
        }
    }
    Ok(rep)
}

/// `Omega_delta = {x : dist(x, boundary) > delta}` as a sub-lattice.
pub fn inner_domain(dom: &BoxDomain, delta: f64) -> Result<BoxDomain> {
    let n = dom.dim();
    let mut lower = Vec::with_capacity(n);
    let mut upper = Vec::with_capacity(n);
    let mut counts = Vec::with_capacity(n);
    for a in 0..n {
        let h = dom.spacing(a);
        let skip = (delta / h).floor() as usize + 1;
        let c = dom.counts()[a];
        if c < 2 * skip + 2 {
            return Err(Error::InvalidParameter(format!("delta = {delta} leaves fewer than two lattice points on axis {a}")));
        }
        lower.push(dom.lower()[a] + skip as f64 * h);
        upper.push(dom.lower()[a] + (c - 1 - skip) as f64 * h);
        counts.push(c - 2 * skip);
    }
    BoxDomain::new(lower, upper, counts)
}

/// `u(x - y) + theta psi(x)` on `Omega_delta`, with `u(x - y)` read by
/// multilinear interpolation.
pub fn translate_perturb(u: &GridFunction, y: &[f64], theta: f64, psi: &dyn Classical, delta: f64) -> Result<GridFunction> {
    let dom = &u.domain;
    if y.len() != dom.dim() || psi.dim() != dom.dim() {
        return Err(Error::DimensionMismatch { expected: dom.dim(), got: y.len().min(psi.dim()) });
    }
    if !(vnorm(y) < delta) {
        return Err(Error::Precondition(format!("|y| = {} must be below delta = {delta}", vnorm(y))));
    }
    if !(theta > 0.0) {
        return Err(Error::InvalidParameter(format!("theta = {theta} must be positive")));
    }
    let inner = inner_domain(dom, delta)?;
    let mut values = Vec::with_capacity(inner.len());
    for i in 0..inner.len() {
        let x = inner.point(i);
        let shifted = vsub(&x, y);
        let base = u
            .interpolate(&shifted)
            .ok_or_else(|| Error::Precondition(format!("u is not finite near {shifted:?}")))?;
        values.push(base + theta * psi.value(&x));
    }
    GridFunction::new(inner, values, None)
}

/// Classical counterpart of [`translate_perturb`]: `phi(. - y) + theta psi`.
pub fn translate_perturb_classical(phi: Arc<dyn Classical>, y: &[f64], theta: f64, psi: Arc<dyn Classical>) -> SumFunction {
    let n = phi.dim();
    let moved = Affinely { base: phi, shift: y.to_vec(), scale: 1.0, offset: 0.0 };
    let bump = Affinely { base: psi, shift: vec![0.0; n], scale: theta, offset: 0.0 };
    SumFunction(vec![Arc::new(moved), Arc::new(bump)])
}

/// Lattice points within two cells of `idx` (excluding `idx`).
fn neighbourhood(dom: &BoxDomain, idx: usize) -> Vec<Vec<usize>> {
    let m = dom.multi_index(idx);
    let n = dom.dim();
    let mut out = Vec::new();
    let mut off = vec![-2isize; n];
    loop {
        if off.iter().any(|o| *o != 0) {
            let cand: Option<Vec<usize>> = (0..n)
                .map(|a| {
                    let k = m[a] as isize + off[a];
                    (k >= 0 && k < dom.counts()[a] as isize).then_some(k as usize)
                })
                .collect();
            if let Some(c) = cand {
                out.push(c);
            }
        }
        let mut a = 0;
        loop {
            if a == n {
                return out;
            }
            off[a] += 1;
            if off[a] <= 2 {
                break;
            }
            off[a] = -2;
            a += 1;
        }
    }
}

/// Second-difference Hessian and central/one-sided gradients at `m`.
fn fd_derivatives(u: &GridFunction, m: &[usize]) -> Option<(Vec<Vec<f64>>, SymMatrix)> {
    let dom = &u.domain;
    let n = dom.dim();
    let at = |off: &[(usize, isize)]| -> Option<f64> {
        let mut k = m.to_vec();
        for (a, s) in off {
            let c = k[*a] as isize + s;
            if c < 0 || c >= dom.counts()[*a] as isize {
                return None;
            }
            k[*a] = c as usize;
        }
        let v = u.get(&k);
        v.is_finite().then_some(v)
    };
    let c = at(&[])?;
    let mut hess = SymMatrix::zeros(n).ok()?;
    let mut fwd = vec![0.0; n];
    let mut bwd = vec![0.0; n];
    for a in 0..n {
        let h = dom.spacing(a);
        let (f, b) = (at(&[(a, 1)])?, at(&[(a, -1)])?);
        fwd[a] = (f - c) / h;
        bwd[a] = (c - b) / h;
        hess.set(a, a, (f + b - 2.0 * c) / (h * h));
        for k in a + 1..n {
            let hk = dom.spacing(k);
            let pp = at(&[(a, 1), (k, 1)])?;
            let pm = at(&[(a, 1), (k, -1)])?;
            let mp = at(&[(a, -1), (k, 1)])?;
            let mm = at(&[(a, -1), (k, -1)])?;
            hess.set(a, k, (pp - pm - mp + mm) / (4.0 * h * hk));
        }
    }
    let central: Vec<f64> = (0..n).map(|a| 0.5 * (fwd[a] + bwd[a])).collect();
    let mut grads = vec![central];
    if n <= 3 {
        for mask in 0..1usize << n {
            grads.push((0..n).map(|a| if mask >> a & 1 == 1 { fwd[a] } else { bwd[a] }).collect());
        }
    }
    Some((grads, hess))
}

/// Searches quadratics `phi_J` touching `u` from above at the lattice point
/// `idx` with `u(y) - phi_J(y) <= -eps |y - x|^2` on the two-cell
/// neighbourhood, `eps > 0`, and `J` Outside `F_x`. Returns `(J, eps)`.
pub fn find_bad_test_jet(u: &GridFunction, f: &SubequationOracle, idx: usize) -> Option<(Jet, f64)> {
    let dom = &u.domain;
    let m = dom.multi_index(idx);
    let x = dom.point(idx);
    let ux = u.values[idx];
    if !ux.is_finite() {
        return None;
    }
    let (grads, hess) = fd_derivatives(u, &m)?;
    let scale = 1.0 + hess.max_abs();
    let hood: Vec<(Vec<f64>, f64)> = neighbourhood(dom, idx)
        .into_iter()
        .map(|k| (dom.point_of(&k), u.get(&k)))
        .collect();
    for slack in [1e-6, 1e-4, 1e-3, 1e-2, 0.1, 1.0, 10.0] {
        let a = hess.shift(slack * scale);
        for p in &grads {
            let j = Jet { r: ux, p: p.clone(), a: a.clone() };
            if !f.classify(&x, &j).is_outside() {
                continue;
            }
            let phi = QuadraticFunction::from_jet(&j, &x);
            let eps = hood
                .iter()
                .map(|(y, uy)| {
                    let d2: f64 = vsub(y, &x).iter().map(|c| c * c).sum();
                    (phi.value(y) - uy) / d2
                })
                .fold(f64::INFINITY, f64::min);
            if eps > 0.0 {
                return Some((j, eps));
            }
        }
    }
    None
}
