//! Autoparallel flows and numerical evidence about first integrals and
//! compatible metrics.

mod fit;
mod metric_fit;
mod projective;

pub use fit::{fit_first_integral, IntegralFit, MonomialBasis};
pub use metric_fit::{metric_ansatz_fit, FitMethod, MetricAnsatz, MetricFit};
pub use projective::{arc_length_resample, projective_path_equivalence, PathOptions};

use std::fmt;
use std::io::{self, Write};
use std::sync::Arc;

use crate::error::{GeomError, Result};
use crate::expr::CompiledExpr;
use crate::manifold::Connection;

type Rhs = dyn Fn(&[f64]) -> Result<Vec<f64>> + Send + Sync;

/// An autonomous system `ẏ = f(y)`.
#[derive(Clone)]
pub struct OdeSystem {
    name: String,
    dim: usize,
    /// For second-order systems written in `(x, v)` form, the position count.
    positions: Option<usize>,
    rhs: Arc<Rhs>,
}

impl fmt::Debug for OdeSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("OdeSystem")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .finish_non_exhaustive()
    }
}

impl OdeSystem {
    pub fn new(
        name: impl Into<String>,
        dim: usize,
        rhs: impl Fn(&[f64]) -> Result<Vec<f64>> + Send + Sync + 'static,
    ) -> Self {
        OdeSystem {
            name: name.into(),
            dim,
            positions: None,
            rhs: Arc::new(rhs),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `Some(n)` when the state is `(x1..xn, v1..vn)`.
    pub fn positions(&self) -> Option<usize> {
        self.positions
    }

    pub fn rhs(&self, y: &[f64]) -> Result<Vec<f64>> {
        if y.len() != self.dim {
            return Err(GeomError::ChartMismatch(self.dim, y.len()));
        }
        (self.rhs)(y)
    }

    /// Column names for CSV output, without the time column.
    pub fn state_names(&self) -> Vec<String> {
        match self.positions {
            Some(n) => (1..=n)
                .map(|i| format!("x{i}"))
                .chain((1..=n).map(|i| format!("v{i}")))
                .collect(),
            None => (1..=self.dim).map(|i| format!("x{i}")).collect(),
        }
    }
}

/// `ẋ = v`, `v̇^k = -Γ^k_ij(x) v^i v^j`.
pub fn autoparallel_system(c: &Connection) -> OdeSystem {
    let n = c.dim();
    let c = c.clone();
    let mut sys = OdeSystem::new("autoparallel", 2 * n, move |y| {
        let (x, v) = y.split_at(n);
        let gamma = c.coefficients(x)?;
        let mut out = v.to_vec();
        for k in 0..n {
            let mut acc = 0.0;
            for i in 0..n {
                for j in 0..n {
                    acc += gamma[(k, i, j)] * v[i] * v[j];
                }
            }
            out.push(-acc);
        }
        Ok(out)
    });
    sys.positions = Some(n);
    sys
}

/// The symmetric connection with `Γ^1_12 = Γ^1_21 = x2 / (2(1 + x2²))`.
pub fn bates_connection() -> Connection {
    let mut exprs = vec!["0"; 8];
    exprs[1] = "x2/(2*(1 + x2^2))";
    exprs[2] = "x2/(2*(1 + x2^2))";
    Connection::from_exprs(2, &exprs, true).expect("valid expressions")
}

/// The constant symmetric connection whose autoparallels are the Halphen
/// system in the velocities.
pub fn halphen_connection() -> Connection {
    // (k, i, j) with i < j; mirrored by the symmetric constructor.
    let entries = [
        (0, 1, 2, -0.5),
        (0, 0, 2, 0.5),
        (0, 0, 1, 0.5),
        (1, 0, 2, -0.5),
        (1, 0, 1, 0.5),
        (1, 1, 2, 0.5),
        (2, 0, 1, -0.5),
        (2, 1, 2, 0.5),
        (2, 0, 2, 0.5),
    ];
    let mut exprs = vec!["0".to_string(); 27];
    for (k, i, j, v) in entries {
        exprs[(k * 3 + i) * 3 + j] = format!("{v}");
    }
    Connection::from_exprs(3, &exprs, true).expect("valid expressions")
}

/// `ẋ1 = x2x3 - x3x1 - x1x2` and cyclic.
pub fn halphen_system() -> OdeSystem {
    OdeSystem::new("halphen", 3, |x| {
        Ok(vec![
            x[1] * x[2] - x[2] * x[0] - x[0] * x[1],
            x[2] * x[0] - x[0] * x[1] - x[1] * x[2],
            x[0] * x[1] - x[1] * x[2] - x[2] * x[0],
        ])
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub h: f64,
    pub integrator: &'static str,
}

impl Trajectory {
    pub fn last(&self) -> &[f64] {
        self.states.last().expect("non-empty")
    }

    /// CSV with header `t,<names>` and 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut w: W, names: &[String]) -> io::Result<()> {
        writeln!(w, "t,{}", names.join(","))?;
        for (t, y) in self.times.iter().zip(&self.states) {
            write!(w, "{t:.16e}")?;
            for v in y {
                write!(w, ",{v:.16e}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

pub fn rk4_step(sys: &OdeSystem, y: &[f64], h: f64) -> Result<Vec<f64>> {
    let axpy = |a: &[f64], s: f64, b: &[f64]| -> Vec<f64> { a.iter().zip(b).map(|(x, d)| x + s * d).collect() };
    let k1 = sys.rhs(y)?;
    let k2 = sys.rhs(&axpy(y, 0.5 * h, &k1))?;
    let k3 = sys.rhs(&axpy(y, 0.5 * h, &k2))?;
    let k4 = sys.rhs(&axpy(y, h, &k3))?;
    Ok((0..y.len())
        .map(|i| y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect())
}

/// Classical RK4 from `t0` to exactly `t1`; the last step is shortened if
/// `h` does not divide the interval.
pub fn rk4_integrate(sys: &OdeSystem, y0: &[f64], t0: f64, t1: f64, h: f64) -> Result<Trajectory> {
    if !(h > 0.0) || !(t1 > t0) {
        return Err(GeomError::InvalidArgument(format!(
            "need h > 0 and t1 > t0, got h = {h}, [{t0}, {t1}]"
        )));
    }
    if y0.len() != sys.dim() {
        return Err(GeomError::ChartMismatch(sys.dim(), y0.len()));
    }
    let span = t1 - t0;
    let mut steps = (span / h).ceil() as usize;
    // Absorb a sliver left by rounding into the last full step.
    if steps > 1 && t0 + (steps - 1) as f64 * h >= t1 - 1e-9 * h {
        steps -= 1;
    }
    let mut times = Vec::with_capacity(steps + 1);
    let mut states = Vec::with_capacity(steps + 1);
    times.push(t0);
    states.push(y0.to_vec());
    let mut y = y0.to_vec();
    for i in 1..=steps {
        let t_prev = times[i - 1];
        let t_next = if i == steps { t1 } else { t0 + i as f64 * h };
        y = rk4_step(sys, &y, t_next - t_prev)?;
        if y.iter().any(|v| !v.is_finite()) {
            return Err(GeomError::NonFiniteState(t_next));
        }
        times.push(t_next);
        states.push(y.clone());
    }
    Ok(Trajectory {
        times,
        states,
        h,
        integrator: "rk4",
    })
}

/// `max_t |F(y(t)) - F(y(0))|`.
pub fn first_integral_drift(traj: &Trajectory, f: &CompiledExpr) -> Result<f64> {
    let dim = traj.states[0].len();
    if f.slots() != dim {
        return Err(GeomError::ChartMismatch(dim, f.slots()));
    }
    let f0 = f.eval(&traj.states[0])?;
    traj.states
        .iter()
        .try_fold(0.0f64, |m, y| Ok(m.max((f.eval(y)? - f0).abs())))
}
