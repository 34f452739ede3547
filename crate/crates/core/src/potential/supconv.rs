//! Sup-convolution and quasi-convexity on lattices.

use rayon::prelude::*;

use super::grid::GridFunction;
use crate::report::Report;
use crate::tolerances::tol_fd;
use crate::{Error, Result};

/// Lattice offsets (in index units) with Euclidean length at most `radius`.
fn ball_offsets(u: &GridFunction, radius: f64) -> Vec<(Vec<isize>, f64)> {
    let d = &u.domain;
    let n = d.dim();
    let reach: Vec<isize> = (0..n).map(|a| ((radius / d.spacing(a)).floor() as isize).min(d.counts()[a] as isize - 1)).collect();
    let mut out = Vec::new();
    let mut cur: Vec<isize> = reach.iter().map(|r| -r).collect();
    loop {
        let dist2: f64 = (0..n).map(|a| (cur[a] as f64 * d.spacing(a)).powi(2)).sum();
        if dist2 <= radius * radius * (1.0 + 1e-12) {
            out.push((cur.clone(), dist2));
        }
        let mut a = 0;
        loop {
            if a == n {
                return out;
            }
            cur[a] += 1;
            if cur[a] <= reach[a] {
                break;
            }
            cur[a] = -reach[a];
            a += 1;
        }
    }
}

fn convolve(u: &GridFunction, eps: f64, offsets: &[(Vec<isize>, f64)]) -> Result<GridFunction> {
    let d = &u.domain;
    let counts: Vec<isize> = d.counts().iter().map(|c| *c as isize).collect();
    let values: Vec<f64> = (0..d.len())
        .into_par_iter()
        .map(|idx| {
            let m = d.multi_index(idx);
            let mut best = f64::NEG_INFINITY;
            let mut target = vec![0usize; m.len()];
            'offsets: for (off, dist2) in offsets {
                for a in 0..m.len() {
                    let k = m[a] as isize + off[a];
                    if k < 0 || k >= counts[a] {
                        continue 'offsets;
                    }
                    target[a] = k as usize;
                }
                let v = u.get(&target);
                if v == f64::NEG_INFINITY {
                    continue;
                }
                best = best.max(v - dist2 / (2.0 * eps));
            }
            best
        })
        .collect();
    GridFunction::new(d.clone(), values, u.blowup)
}

/// `u^eps(x) = max { u(y) - |y - x|^2 / (2 eps) }` over lattice points `y`
/// with `|y - x| <= 2 sqrt(eps M) + h`, `M = sup |u|`; `-inf` values are skipped.
pub fn sup_convolution(u: &GridFunction, eps: f64) -> Result<GridFunction> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::InvalidParameter(format!("eps = {eps} must be positive")));
    }
    let radius = 2.0 * (eps * u.sup_abs()).sqrt() + u.domain.h_max();
    convolve(u, eps, &ball_offsets(u, radius))
}

/// Sup-convolution maximizing over the whole lattice.
pub fn sup_convolution_global(u: &GridFunction, eps: f64) -> Result<GridFunction> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::InvalidParameter(format!("eps = {eps} must be positive")));
    }
    convolve(u, eps, &ball_offsets(u, u.domain.diameter()))
}

/// Lattice directions: the axes and the diagonals `e_i ± e_j`.
pub fn lattice_directions(n: usize) -> Vec<Vec<isize>> {
    let mut dirs = Vec::new();
    for i in 0..n {
        let mut e = vec![0; n];
        e[i] = 1;
        dirs.push(e);
    }
    for i in 0..n {
        for j in i + 1..n {
            for s in [1, -1] {
                let mut e = vec![0; n];
                e[i] = 1;
                e[j] = s;
                dirs.push(e);
            }
        }
    }
    dirs
}

/// `u + lambda |x|^2 / 2` has second differences `>= -tol_fd` along every
/// axis and diagonal lattice direction.
pub fn quasi_convexity_check(u: &GridFunction, lambda: f64) -> Result<Report> {
    if !(lambda >= 0.0) {
        return Err(Error::InvalidParameter(format!("lambda = {lambda} must be nonnegative")));
    }
    let d = &u.domain;
    let n = d.dim();
    let dirs = lattice_directions(n);
    let v = |m: &[usize]| {
        let x = d.point_of(m);
        let uv = u.get(m);
        (uv + 0.5 * lambda * x.iter().map(|c| c * c).sum::<f64>(), uv)
    };
    let found: Vec<(usize, String)> = (0..d.len())
        .into_par_iter()
        .flat_map_iter(|idx| {
            let m = d.multi_index(idx);
            let mut out = Vec::new();
            for dir in &dirs {
                let shift = |s: isize| -> Option<Vec<usize>> {
                    (0..n)
                        .map(|a| {
                            let k = m[a] as isize + s * dir[a];
                            (k >= 0 && k < d.counts()[a] as isize).then_some(k as usize)
                        })
                        .collect()
                };
                let (Some(fwd), Some(bwd)) = (shift(1), shift(-1)) else { continue };
                let ((c, uc), (f, uf), (b, ub)) = (v(&m), v(&fwd), v(&bwd));
                if !(c.is_finite() && f.is_finite() && b.is_finite()) {
                    continue;
                }
                let h2: f64 = (0..n).map(|a| (dir[a] as f64 * d.spacing(a)).powi(2)).sum();
                let scale = uc.abs().max(uf.abs()).max(ub.abs());
                let second = f + b - 2.0 * c;
                if second < -tol_fd(h2.sqrt(), scale) {
                    out.push((idx, format!("second difference {second} along {dir:?}")));
                }
            }
            out
        })
        .collect();
    let mut rep = Report::new(format!("quasi_convexity lambda={lambda}"));
    rep.samples = d.len() * dirs.len();
    for (idx, detail) in found {
        rep.fail(&d.point(idx), None, detail);
    }
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::BoxDomain;

    #[test]
    fn constants_are_fixed() {
        let d = BoxDomain::unit_cube(2, 21).unwrap();
        let u = GridFunction::from_fn(&d, |_| 3.0).unwrap();
        let ue = sup_convolution(&u, 0.1).unwrap();
        assert!(ue.values.iter().all(|v| *v == 3.0));
    }

    #[test]
    fn offsets_ball_is_symmetric() {
        let d = BoxDomain::unit_cube(2, 11).unwrap();
        let u = GridFunction::from_fn(&d, |_| 0.0).unwrap();
        let o = ball_offsets(&u, 0.25);
        assert!(o.iter().all(|(v, _)| o.iter().any(|(w, _)| w[0] == -v[0] && w[1] == -v[1])));
        assert!(o.iter().any(|(v, _)| v == &vec![2, 0]) && !o.iter().any(|(v, _)| v == &vec![2, 2]));
    }

    #[test]
    fn kink_fails_quasi_convexity() {
        let d = BoxDomain::new(vec![-1.0], vec![1.0], vec![201]).unwrap();
        let u = GridFunction::from_fn(&d, |x| -x[0].abs()).unwrap();
        let r = quasi_convexity_check(&u, 10.0).unwrap();
        assert!(!r.pass);
        assert_eq!(r.violation_count, 1);
        assert!(r.violations[0].x[0].abs() < 1e-12);
    }

    #[test]
    fn affine_is_convex() {
        let d = BoxDomain::unit_cube(3, 9).unwrap();
        let u = GridFunction::from_fn(&d, |x| 2.0 * x[0] - x[1] + 0.3 * x[2]).unwrap();
        assert!(quasi_convexity_check(&u, 0.0).unwrap().pass);
    }
}
