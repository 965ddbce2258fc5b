//! Comparing autoparallels as unparametrised curves.

use super::{autoparallel_system, rk4_step};
use crate::error::{GeomError, Result};
use crate::manifold::Connection;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathOptions {
    /// Arc length of the compared segment.
    pub length: f64,
    pub h: f64,
    /// Give up if the path has not reached `length` by this parameter time.
    pub max_time: f64,
    pub resample: usize,
}

impl Default for PathOptions {
    fn default() -> Self {
        PathOptions {
            length: 1.0,
            h: 1e-4,
            max_time: 100.0,
            resample: 1001,
        }
    }
}

/// Positions along the autoparallel from `(x0, v0)` with their cumulative
/// chord length, stopping once the length reaches `opts.length`.
fn trace(c: &Connection, x0: &[f64], v0: &[f64], opts: &PathOptions) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
    let n = c.dim();
    let sys = autoparallel_system(c);
    let mut y: Vec<f64> = x0.iter().chain(v0).copied().collect();
    let mut xs = vec![x0.to_vec()];
    let mut s = vec![0.0];
    let mut t = 0.0;
    while *s.last().expect("non-empty") < opts.length {
        if t > opts.max_time {
            return Err(GeomError::InvalidArgument(format!(
                "autoparallel covered only {} of length {} by t = {}",
                s.last().unwrap(),
                opts.length,
                opts.max_time
            )));
        }
        y = rk4_step(&sys, &y, opts.h)?;
        t += opts.h;
        if y.iter().any(|v| !v.is_finite()) {
            return Err(GeomError::NonFiniteState(t));
        }
        let x = y[..n].to_vec();
        let prev = xs.last().expect("non-empty");
        let ds = x.iter().zip(prev).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        s.push(s.last().unwrap() + ds);
        xs.push(x);
    }
    Ok((xs, s))
}

/// Linear interpolation of a polyline at the given arc lengths.
pub fn arc_length_resample(xs: &[Vec<f64>], s: &[f64], at: &[f64]) -> Vec<Vec<f64>> {
    let mut k = 0;
    at.iter()
        .map(|&q| {
            while k + 2 < s.len() && s[k + 1] < q {
                k += 1;
            }
            let span = s[k + 1] - s[k];
            let w = if span > 0.0 {
                ((q - s[k]) / span).clamp(0.0, 1.0)
            } else {
                0.0
            };
            xs[k].iter().zip(&xs[k + 1]).map(|(a, b)| a + w * (b - a)).collect()
        })
        .collect()
}

/// Maximum distance between the two autoparallels through `(x0, v0)`
/// after both are parametrised by arc length on `[0, length]`.
pub fn projective_path_equivalence(
    a: &Connection,
    b: &Connection,
    x0: &[f64],
    v0: &[f64],
    opts: &PathOptions,
) -> Result<f64> {
    if a.dim() != b.dim() || x0.len() != a.dim() || v0.len() != a.dim() {
        return Err(GeomError::ChartMismatch(a.dim(), x0.len()));
    }
    if opts.resample < 2 {
        return Err(GeomError::InvalidArgument("resample needs at least two points".into()));
    }
    let (xa, sa) = trace(a, x0, v0, opts)?;
    let (xb, sb) = trace(b, x0, v0, opts)?;
    let at: Vec<f64> = (0..opts.resample)
        .map(|i| opts.length * i as f64 / (opts.resample - 1) as f64)
        .collect();
    let pa = arc_length_resample(&xa, &sa, &at);
    let pb = arc_length_resample(&xb, &sb, &at);
    Ok(pa
        .iter()
        .zip(&pb)
        .map(|(p, q)| p.iter().zip(q).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt())
        .fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reparametrised_lines_coincide() {
        // Γ^k_ij = δ^k_i θ_j + δ^k_j θ_i with constant θ only reparametrises
        // straight lines.
        let theta = [0.3, -0.2];
        let mut exprs = vec![String::from("0"); 8];
        for k in 0..2 {
            for i in 0..2 {
                for j in 0..2 {
                    let mut v = 0.0;
                    if k == i {
                        v += theta[j];
                    }
                    if k == j {
                        v += theta[i];
                    }
                    exprs[(k * 2 + i) * 2 + j] = format!("{v}");
                }
            }
        }
        let c = Connection::from_exprs(2, &exprs, true).unwrap();
        let d = projective_path_equivalence(
            &Connection::flat(2),
            &c,
            &[0.0, 0.0],
            &[1.0, 0.5],
            &PathOptions::default(),
        )
        .unwrap();
        assert!(d < 1e-9, "{d}");
    }

    #[test]
    fn resample_endpoints() {
        let xs = vec![vec![0.0], vec![1.0], vec![3.0]];
        let s = vec![0.0, 1.0, 3.0];
        let out = arc_length_resample(&xs, &s, &[0.0, 0.5, 2.0, 3.0]);
        assert_eq!(out, vec![vec![0.0], vec![0.5], vec![2.0], vec![3.0]]);
    }
}
