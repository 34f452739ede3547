//! Real-rootedness of small univariate polynomials via Aberth iteration.

use num_complex::Complex64;

/// Coefficients in ascending order: `c[0] + c[1] t + ... + c[m] t^m`.
pub type Poly = Vec<f64>;

pub fn eval(c: &[f64], t: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, v| acc * t + v)
}

fn eval_c(c: &[f64], z: Complex64) -> Complex64 {
    c.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, v| acc * z + v)
}

pub fn derivative(c: &[f64]) -> Poly {
    c.iter().enumerate().skip(1).map(|(k, v)| k as f64 * v).collect()
}

/// `sum |c_k| |t|^k`, the natural scale of a polynomial value at `t`.
fn magnitude(c: &[f64], t: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, v| acc * t.abs() + v.abs())
}

pub fn mul(a: &[f64], b: &[f64]) -> Poly {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

/// All complex roots by Aberth-Ehrlich iteration.
pub fn aberth(c: &[f64]) -> Vec<Complex64> {
    let m = c.len() - 1;
    let lead = c[m];
    let monic: Vec<f64> = c.iter().map(|v| v / lead).collect();
    let dmonic = derivative(&monic);
    let bound = 1.0 + monic[..m].iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    let mut z: Vec<Complex64> = (0..m)
        .map(|k| Complex64::from_polar(0.5 * bound, 2.0 * std::f64::consts::PI * (k as f64 + 0.25) / m as f64))
        .collect();
    for _ in 0..500 {
        let mut moved = 0.0_f64;
        for k in 0..m {
            let pk = eval_c(&monic, z[k]);
            let dk = eval_c(&dmonic, z[k]);
            if pk.norm() == 0.0 {
                continue;
            }
            let ratio = pk / dk;
            let sum: Complex64 = (0..m).filter(|&j| j != k).map(|j| 1.0 / (z[k] - z[j])).sum();
            let step = ratio / (1.0 - ratio * sum);
            if step.is_finite() {
                z[k] -= step;
                moved = moved.max(step.norm() / (1.0 + z[k].norm()));
            }
        }
        let residual_ok = z.iter().all(|zk| {
            eval_c(&monic, *zk).norm() <= 1e-12 * magnitude(&monic, zk.norm()).max(1.0)
        });
        if residual_ok && moved < 1e-15 {
            break;
        }
    }
    z
}

#[derive(Debug, Clone, PartialEq)]
pub enum RealRoots {
    Real(Vec<f64>),
    /// A root with imaginary part beyond tolerance.
    Complex(Complex64),
}

fn newton(d: &[f64], dd: &[f64], mut t: f64) -> f64 {
    for _ in 0..60 {
        let slope = eval(dd, t);
        if slope == 0.0 {
            break;
        }
        let step = eval(d, t) / slope;
        t -= step;
        if step.abs() <= 1e-16 * (1.0 + t.abs()) {
            break;
        }
    }
    t
}

/// Real roots (with multiplicity, ascending) of a polynomial expected to be
/// real-rooted. Isolated roots pass when `|Im| <= 1e-8 (1 + |Re|)`. Roots
/// that cluster (multiple roots, where Aberth is only linearly convergent)
/// are merged: a cluster of size `k` is accepted when the `(k-1)`-th
/// derivative has a real root near the cluster at which all lower
/// derivatives vanish to relative precision `1e-13`.
pub fn real_roots(c: &[f64]) -> RealRoots {
    let m = c.len() - 1;
    if m == 0 {
        return RealRoots::Real(vec![]);
    }
    if m == 1 {
        return RealRoots::Real(vec![-c[0] / c[1]]);
    }
    let z = aberth(c);
    let tol = |r: f64| 1e-8 * (1.0 + r.abs());
    if z.iter().all(|zk| zk.im.abs() <= tol(zk.re)) {
        let mut r: Vec<f64> = z.iter().map(|zk| zk.re).collect();
        r.sort_by(f64::total_cmp);
        return RealRoots::Real(r);
    }
    // cluster by proximity
    let mut used = vec![false; m];
    let mut out = Vec::with_capacity(m);
    for i in 0..m {
        if used[i] {
            continue;
        }
        let mut members = vec![i];
        used[i] = true;
        for j in i + 1..m {
            if !used[j] && (z[i] - z[j]).norm() <= 1e-3 * (1.0 + z[i].norm()) {
                used[j] = true;
                members.push(j);
            }
        }
        let k = members.len();
        let mean: Complex64 = members.iter().map(|&j| z[j]).sum::<Complex64>() / k as f64;
        if k == 1 {
            if z[i].im.abs() > tol(z[i].re) {
                return RealRoots::Complex(z[i]);
            }
            out.push(z[i].re);
            continue;
        }
        let worst = || members.iter().map(|&j| z[j]).max_by(|a, b| a.im.abs().total_cmp(&b.im.abs())).expect("cluster");
        let mut derivs: Vec<Poly> = vec![c.to_vec()];
        for _ in 0..k {
            let next = derivative(derivs.last().expect("nonempty"));
            derivs.push(next);
        }
        // a real k-fold root is a simple root of the (k-1)-th derivative
        let centre = newton(&derivs[k - 1], &derivs[k], mean.re);
        let vanishes = derivs[..k - 1]
            .iter()
            .all(|d| eval(d, centre).abs() <= 1e-13 * magnitude(d, centre));
        if !vanishes {
            return RealRoots::Complex(worst());
        }
        out.extend(std::iter::repeat_n(centre, k));
    }
    out.sort_by(f64::total_cmp);
    RealRoots::Real(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cubic_with_distinct_roots() {
        // (t - 1)(t + 2)(t - 3)
        let c = mul(&mul(&[-1.0, 1.0], &[2.0, 1.0]), &[-3.0, 1.0]);
        match real_roots(&c) {
            RealRoots::Real(r) => {
                for (a, b) in r.iter().zip([-2.0, 1.0, 3.0]) {
                    assert!((a - b).abs() < 1e-10);
                }
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn quadruple_root() {
        // (t + 1)^4
        let c = [1.0, 4.0, 6.0, 4.0, 1.0];
        match real_roots(&c) {
            RealRoots::Real(r) => assert!(r.iter().all(|v| (v + 1.0).abs() < 1e-12), "{r:?}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn complex_pair_detected() {
        // (t^2 + 1)(t - 2)
        let c = mul(&[1.0, 0.0, 1.0], &[-2.0, 1.0]);
        assert!(matches!(real_roots(&c), RealRoots::Complex(_)));
    }

    #[test]
    fn near_double_complex_pair_detected() {
        // (t^2 + 1e-4)(t + 3)(t - 1): roots +-0.01 i
        let c = mul(&mul(&[1e-4, 0.0, 1.0], &[3.0, 1.0]), &[-1.0, 1.0]);
        assert!(matches!(real_roots(&c), RealRoots::Complex(_)));
    }

    #[test]
    fn tight_complex_pair_not_mistaken_for_double_root() {
        // ((t - 5)^2 + 1e-8)(t + 1)
        let c = mul(&[25.0 + 1e-8, -10.0, 1.0], &[1.0, 1.0]);
        assert!(matches!(real_roots(&c), RealRoots::Complex(_)));
    }

    #[test]
    fn double_root_next_to_simple_root() {
        // (t - 2)^2 (t + 1)
        let c = mul(&[4.0, -4.0, 1.0], &[1.0, 1.0]);
        match real_roots(&c) {
            RealRoots::Real(r) => {
                for (a, b) in r.iter().zip([-1.0, 2.0, 2.0]) {
                    assert!((a - b).abs() < 1e-7, "{r:?}");
                }
            }
            other => panic!("{other:?}"),
        }
    }
}
