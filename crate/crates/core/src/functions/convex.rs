//! Directional derivatives and exact subdifferentials on the convex
//! fragment of the function language.

use super::expr::ExtFunction;
use super::subdiff::{ConeAxis, SubdifferentialSet};
use crate::error::{Error, Result};
use crate::ext::LimitValue;
use crate::geometry::{dist, dot, norm, Region};

use ExtFunction as F;

/// Values within this of the maximum count as active in a `max`.
const ACTIVE_TOL: f64 = 1e-12;

fn check_point(f: &ExtFunction, x: &[f64]) -> Result<()> {
    f.check_dim(x.len())?;
    if !f.in_domain(x) {
        return Err(Error::NotInDomain);
    }
    Ok(())
}

/// One-sided derivative `f'(x; d)` of a convex function.
pub fn directional_derivative(f: &ExtFunction, x: &[f64], d: &[f64]) -> Result<LimitValue> {
    if !f.is_convex() {
        return Err(Error::NonConvex("directional derivative needs a convex function".into()));
    }
    if d.len() != x.len() {
        return Err(Error::Dimension {
            expected: x.len(),
            got: d.len(),
        });
    }
    check_point(f, x)?;
    Ok(LimitValue::new(dd(f, x, d)?).expect("no NaN"))
}

fn dd(f: &ExtFunction, x: &[f64], d: &[f64]) -> Result<f64> {
    Ok(match f {
        F::Const(_) => 0.0,
        F::Affine { a, .. } => dot(a, d),
        F::Quad { .. } => dot(&f.gradient(x).expect("quadratic is smooth"), d),
        F::Abs(i) => {
            if x[*i] == 0.0 {
                d[*i].abs()
            } else {
                x[*i].signum() * d[*i]
            }
        }
        F::Norm2 => {
            let nx = norm(x);
            if nx == 0.0 {
                norm(d)
            } else {
                dot(x, d) / nx
            }
        }
        F::NormInf => {
            let m = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if m == 0.0 {
                d.iter().fold(0.0f64, |m, v| m.max(v.abs()))
            } else {
                (0..x.len())
                    .filter(|i| x[*i].abs() == m)
                    .map(|i| x[i].signum() * d[i])
                    .fold(f64::NEG_INFINITY, f64::max)
            }
        }
        F::Distance { center, weight } => {
            let r: Vec<f64> = x.iter().zip(center).map(|(a, b)| a - b).collect();
            weight * dd(&F::Norm2, &r, d)?
        }
        F::Max(ch) => {
            let vals: Vec<f64> = ch.iter().map(|c| c.eval(x).value()).collect();
            let m = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut best = f64::NEG_INFINITY;
            for (c, v) in ch.iter().zip(&vals) {
                if *v >= m - ACTIVE_TOL * (1.0 + m.abs()) {
                    best = best.max(dd(c, x, d)?);
                }
            }
            best
        }
        F::Sum(ch) => {
            let mut s = 0.0;
            for c in ch {
                s += dd(c, x, d)?;
            }
            s
        }
        F::Scale(l, c) => {
            let v = dd(c, x, d)?;
            if *l == 0.0 {
                0.0
            } else {
                l * v
            }
        }
        F::Indicator(r) => {
            if tangent(r, x, d) {
                0.0
            } else {
                f64::INFINITY
            }
        }
        F::IndicatorSublevel(cs) => {
            // affine constraints only (convexity was checked)
            let mut ok = true;
            for c in cs {
                let g = c.value(x).expect("no reciprocal terms");
                if g >= 0.0 && dot(&c.lin, d) > 0.0 {
                    ok = false;
                }
            }
            if ok {
                0.0
            } else {
                f64::INFINITY
            }
        }
        F::Recip { .. } | F::Blackbox(_) => {
            return Err(Error::ExactnessUnavailable(
                "no closed-form directional derivative".into(),
            ))
        }
    })
}

/// Whether `d` points into the region from `x` (tangent cone membership).
fn tangent(r: &Region, x: &[f64], d: &[f64]) -> bool {
    match r {
        Region::WholeSpace { .. } => true,
        Region::Box { lo, hi } => (0..x.len()).all(|i| {
            let at_lo = x[i] <= lo[i];
            let at_hi = x[i] >= hi[i];
            !(at_lo && d[i] < 0.0) && !(at_hi && d[i] > 0.0)
        }),
        Region::Ball { center, radius } => {
            if dist(x, center) < *radius {
                true
            } else {
                let w: Vec<f64> = x.iter().zip(center).map(|(a, b)| a - b).collect();
                dot(&w, d) <= 0.0
            }
        }
    }
}

/// Exact convex subdifferential `∂f(x)`.
pub fn exact_subdifferential(f: &ExtFunction, x: &[f64]) -> Result<SubdifferentialSet> {
    if !f.is_convex() {
        return Err(Error::NonConvex("exact subdifferential needs a convex function".into()));
    }
    check_point(f, x)?;
    sd(f, x)
}

fn unit(n: usize, i: usize, s: f64) -> Vec<f64> {
    let mut e = vec![0.0; n];
    e[i] = s;
    e
}

fn sd(f: &ExtFunction, x: &[f64]) -> Result<SubdifferentialSet> {
    let n = x.len();
    Ok(match f {
        F::Const(_) => SubdifferentialSet::zero(n),
        F::Affine { a, .. } => SubdifferentialSet::point(a.clone()),
        F::Quad { .. } => SubdifferentialSet::point(f.gradient(x).expect("smooth")),
        F::Abs(i) => {
            if x[*i] == 0.0 {
                SubdifferentialSet::Box {
                    lo: unit(n, *i, -1.0),
                    hi: unit(n, *i, 1.0),
                }
            } else {
                SubdifferentialSet::point(unit(n, *i, x[*i].signum()))
            }
        }
        F::Norm2 => match f.gradient(x) {
            Some(g) => SubdifferentialSet::point(g),
            None => SubdifferentialSet::Ball {
                center: vec![0.0; n],
                radius: 1.0,
            },
        },
        F::NormInf => {
            let m = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let vertices: Vec<Vec<f64>> = if m == 0.0 {
                (0..n).flat_map(|i| [unit(n, i, 1.0), unit(n, i, -1.0)]).collect()
            } else {
                (0..n)
                    .filter(|i| x[*i].abs() == m)
                    .map(|i| unit(n, i, x[i].signum()))
                    .collect()
            };
            polytope_or_point(vertices)
        }
        F::Distance { center, weight } => {
            let r: Vec<f64> = x.iter().zip(center).map(|(a, b)| a - b).collect();
            sd(&F::Norm2, &r)?.scale(*weight)
        }
        F::Scale(l, c) => sd(c, x)?.scale(*l),
        F::Sum(ch) => {
            let rough = ch.iter().filter(|c| !c.continuous_at(x)).count();
            if rough > 1 {
                return Err(Error::ExactnessUnavailable(
                    "sum rule needs all but one term continuous at the point".into(),
                ));
            }
            let parts = ch.iter().map(|c| sd(c, x)).collect::<Result<Vec<_>>>()?;
            SubdifferentialSet::Sum { parts }
        }
        F::Max(ch) => {
            let vals: Vec<f64> = ch.iter().map(|c| c.eval(x).value()).collect();
            let m = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let active: Vec<&ExtFunction> = ch
                .iter()
                .zip(&vals)
                .filter(|(_, v)| **v >= m - ACTIVE_TOL * (1.0 + m.abs()))
                .map(|(c, _)| c)
                .collect();
            if active.len() == 1 {
                sd(active[0], x)?
            } else {
                let grads = active
                    .iter()
                    .map(|c| c.gradient(x))
                    .collect::<Option<Vec<_>>>()
                    .ok_or_else(|| {
                        Error::ExactnessUnavailable(
                            "max with several nonsmooth active terms".into(),
                        )
                    })?;
                polytope_or_point(grads)
            }
        }
        F::Indicator(r) => normal_cone(r, x)?,
        F::IndicatorSublevel(cs) => {
            let active: Vec<&Vec<f64>> = cs
                .iter()
                .filter(|c| c.value(x).is_some_and(|g| g >= 0.0))
                .map(|c| &c.lin)
                .collect();
            match active.len() {
                0 => SubdifferentialSet::zero(n),
                1 => axis_ray(active[0]).ok_or_else(|| {
                    Error::ExactnessUnavailable("normal cone of a slanted half-space".into())
                })?,
                _ => {
                    return Err(Error::ExactnessUnavailable(
                        "normal cone with several active constraints".into(),
                    ))
                }
            }
        }
        F::Recip { .. } | F::Blackbox(_) => {
            return Err(Error::ExactnessUnavailable("atom has no exact subdifferential".into()))
        }
    })
}

fn polytope_or_point(mut vertices: Vec<Vec<f64>>) -> SubdifferentialSet {
    vertices.dedup();
    if vertices.len() == 1 {
        SubdifferentialSet::point(vertices.pop().expect("one vertex"))
    } else {
        SubdifferentialSet::Polytope { vertices }
    }
}

/// The ray `{t v : t ≥ 0}` when `v` is a multiple of a unit vector.
fn axis_ray(v: &[f64]) -> Option<SubdifferentialSet> {
    let nz: Vec<usize> = (0..v.len()).filter(|i| v[*i] != 0.0).collect();
    if nz.len() != 1 {
        return None;
    }
    let axes = (0..v.len())
        .map(|i| {
            if i != nz[0] {
                ConeAxis::Zero
            } else if v[i] > 0.0 {
                ConeAxis::NonNegative
            } else {
                ConeAxis::NonPositive
            }
        })
        .collect();
    Some(SubdifferentialSet::AxisCone { axes })
}

fn normal_cone(r: &Region, x: &[f64]) -> Result<SubdifferentialSet> {
    match r {
        Region::WholeSpace { .. } => Ok(SubdifferentialSet::zero(x.len())),
        Region::Box { lo, hi } => {
            let axes = (0..x.len())
                .map(|i| match (x[i] <= lo[i], x[i] >= hi[i]) {
                    (true, true) => ConeAxis::Free,
                    (true, false) => ConeAxis::NonPositive,
                    (false, true) => ConeAxis::NonNegative,
                    (false, false) => ConeAxis::Zero,
                })
                .collect();
            Ok(SubdifferentialSet::AxisCone { axes })
        }
        Region::Ball { center, radius } => {
            if dist(x, center) < *radius {
                return Ok(SubdifferentialSet::zero(x.len()));
            }
            let w: Vec<f64> = x.iter().zip(center).map(|(a, b)| a - b).collect();
            axis_ray(&w).ok_or_else(|| {
                Error::ExactnessUnavailable("normal cone of a ball off the axes".into())
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn abs_shift(s: f64) -> ExtFunction {
        F::Distance {
            center: vec![s],
            weight: 1.0,
        }
    }

    #[test]
    fn abs_at_origin_derivative() {
        assert_eq!(directional_derivative(&F::Abs(0), &[0.0], &[1.0]).unwrap().value(), 1.0);
    }

    #[test]
    fn affine_derivative_is_linear() {
        let f = F::Affine {
            a: vec![1.0, -3.0],
            b: 2.0,
        };
        let v = directional_derivative(&f, &[4.0, 1.0], &[0.5, 2.0]).unwrap();
        assert_eq!(v.value(), 0.5 - 6.0);
    }

    #[test]
    fn max_of_x_and_minus_x_matches_quotients() {
        let f = F::Max(vec![
            F::Affine {
                a: vec![1.0],
                b: 0.0,
            },
            F::Affine {
                a: vec![-1.0],
                b: 0.0,
            },
        ]);
        let exact = directional_derivative(&f, &[0.0], &[-2.0]).unwrap().value();
        // oracle: difference quotients with shrinking steps
        for k in 1..8 {
            let t = 10f64.powi(-k);
            let q = (f.eval(&[-2.0 * t]).value() - f.eval(&[0.0]).value()) / t;
            assert!((q - 2.0).abs() < 1e-9);
        }
        assert_eq!(exact, 2.0);
    }

    #[test]
    fn abs_subdifferential_at_origin() {
        let s = exact_subdifferential(&F::Abs(0), &[0.0]).unwrap();
        assert_eq!(s.axis_intervals().unwrap(), vec![(-1.0, 1.0)]);
    }

    #[test]
    fn abs_sum_subdifferential_matches_directional_derivatives() {
        let f = F::Sum(vec![F::Abs(0), abs_shift(1.0)]);
        let s = exact_subdifferential(&f, &[0.0]).unwrap();
        assert_eq!(s.axis_intervals().unwrap(), vec![(-2.0, 0.0)]);
        // oracle: g ∈ ∂f iff g·d ≤ f'(0; d) on a direction grid
        for i in 0..=80 {
            let g = -3.0 + 0.05 * i as f64;
            let member = [1.0, -1.0].iter().all(|d| {
                g * d <= directional_derivative(&f, &[0.0], &[*d]).unwrap().value() + 1e-12
            });
            assert_eq!(member, s.contains(&[g], 1e-12), "g = {g}");
        }
    }

    #[test]
    fn box_indicator_cone_at_right_endpoint() {
        let f = F::Indicator(Region::interval(0.0, 1.0));
        let s = exact_subdifferential(&f, &[1.0]).unwrap();
        assert_eq!(
            s,
            SubdifferentialSet::AxisCone {
                axes: vec![ConeAxis::NonNegative]
            }
        );
        assert!(s.contains(&[5.0], 0.0));
        assert!(!s.contains(&[-0.1], 1e-3));
    }

    #[test]
    fn nonconvex_input_is_rejected() {
        let f = F::Recip {
            index: 0,
            positive: true,
        };
        assert!(matches!(
            directional_derivative(&f, &[1.0], &[1.0]),
            Err(Error::NonConvex(_))
        ));
    }

    fn convex_samples() -> Vec<(ExtFunction, Vec<f64>)> {
        vec![
            (F::Sum(vec![F::Abs(0), F::Abs(1)]), vec![0.0, 0.3]),
            (F::Norm2, vec![0.0, 0.0]),
            (F::NormInf, vec![1.0, -1.0]),
            (
                F::Max(vec![
                    F::Affine {
                        a: vec![1.0, 0.0],
                        b: 0.0,
                    },
                    F::Affine {
                        a: vec![0.0, 1.0],
                        b: 0.0,
                    },
                    F::Const(0.0),
                ]),
                vec![0.0, 0.0],
            ),
            (
                F::Sum(vec![
                    F::Quad {
                        q: vec![vec![1.0, 0.0], vec![0.0, 2.0]],
                        a: vec![0.0, 0.0],
                        b: 0.0,
                    },
                    F::Distance {
                        center: vec![0.5, 0.0],
                        weight: 0.5,
                    },
                ]),
                vec![0.5, 0.0],
            ),
        ]
    }

    #[test]
    fn support_function_matches_directional_derivative() {
        for (f, x) in convex_samples() {
            let s = exact_subdifferential(&f, &x).unwrap();
            for k in 0..64 {
                let th = std::f64::consts::TAU * k as f64 / 64.0;
                let d = [th.cos(), th.sin()];
                let h = s.support(&d);
                let fd = directional_derivative(&f, &x, &d).unwrap().value();
                assert!((h - fd).abs() < 1e-9, "{f:?} at {x:?}, d={d:?}: {h} vs {fd}");
            }
        }
    }
}
