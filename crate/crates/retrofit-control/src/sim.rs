//! Closed-loop assembly of plant, environment, and controller, plus
//! fixed-step time-domain integration for demonstrations and stability
//! spot checks.
//!
//! The loop carries additive perturbation inputs on every signal,
//!
//! ```text
//! y = C x + d_y,   w = Gamma x + d_w,   v = Gbar w + d_v,   u = K y + d_u,
//! ```
//!
//! so internal stability of the interconnection is the Hurwitz property of
//! the stacked state matrix.

use std::io::Write;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::geometry::Plant;
use crate::statespace::Realization;

/// Signal widths of a closed loop, in the order the channels are stacked.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SignalDims {
    pub u: usize,
    pub y: usize,
    pub v: usize,
    pub w: usize,
}

/// Stacked realization of plant + environment + controller with
/// perturbation inputs `(d_u, d_y, d_v, d_w)` and outputs `(u, y, v, w)`.
#[derive(Debug, Clone)]
pub struct ClosedLoop {
    pub realization: Realization,
    pub n_plant: usize,
    pub n_env: usize,
    pub n_ctrl: usize,
    pub dims: SignalDims,
}

/// Input signal for time-domain simulation.
pub enum InputSignal {
    /// Identically zero perturbations.
    Zero,
    /// Samples held constant over each step (zero-order hold).
    Hold(Vec<DVector<f64>>),
    /// Arbitrary function of time, evaluated at the integration stages.
    Func(Box<dyn Fn(f64) -> DVector<f64>>),
}

/// Sampled closed-loop trajectory on a uniform grid.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<DVector<f64>>,
    pub outputs: Vec<DVector<f64>>,
    pub inputs: Vec<DVector<f64>>,
}

/// Stacks plant, environment, and controller into one realization.
///
/// The plant channels carry no feedthrough, so the interconnection has no
/// algebraic loop and is well-posed for any proper environment and
/// controller.
pub fn close_loop(plant: &Plant, env: &Realization, controller: &Realization) -> Result<ClosedLoop> {
    let (n, m, q, p, wd) = (
        plant.n(),
        plant.v_dim(),
        plant.u_dim(),
        plant.y_dim(),
        plant.w_dim(),
    );
    if env.input_dim() != wd || env.output_dim() != m {
        return Err(Error::DimensionMismatch(format!(
            "environment must map {wd} interconnection outputs to {m} inputs, got {}x{}",
            env.output_dim(),
            env.input_dim()
        )));
    }
    if controller.input_dim() != p || controller.output_dim() != q {
        return Err(Error::DimensionMismatch(format!(
            "controller must map {p} measurements to {q} actuators, got {}x{}",
            controller.output_dim(),
            controller.input_dim()
        )));
    }
    let (ne, nk) = (env.state_dim(), controller.state_dim());
    let total = n + ne + nk;
    let d_in = q + p + m + wd;

    // state equations
    let mut a = DMatrix::zeros(total, total);
    let coupling = plant.a()
        + plant.l() * env.d() * plant.gamma()
        + plant.b() * controller.d() * plant.c();
    a.view_mut((0, 0), (n, n)).copy_from(&coupling);
    a.view_mut((0, n), (n, ne)).copy_from(&(plant.l() * env.c()));
    a.view_mut((0, n + ne), (n, nk))
        .copy_from(&(plant.b() * controller.c()));
    a.view_mut((n, 0), (ne, n)).copy_from(&(env.b() * plant.gamma()));
    a.view_mut((n, n), (ne, ne)).copy_from(env.a());
    a.view_mut((n + ne, 0), (nk, n))
        .copy_from(&(controller.b() * plant.c()));
    a.view_mut((n + ne, n + ne), (nk, nk)).copy_from(controller.a());

    // perturbation inputs, stacked (d_u, d_y, d_v, d_w)
    let mut b = DMatrix::zeros(total, d_in);
    b.view_mut((0, 0), (n, q)).copy_from(plant.b());
    b.view_mut((0, q), (n, p))
        .copy_from(&(plant.b() * controller.d()));
    b.view_mut((0, q + p), (n, m)).copy_from(plant.l());
    b.view_mut((0, q + p + m), (n, wd))
        .copy_from(&(plant.l() * env.d()));
    b.view_mut((n, q + p + m), (ne, wd)).copy_from(env.b());
    b.view_mut((n + ne, q), (nk, p)).copy_from(controller.b());

    // signal outputs, stacked (u, y, v, w)
    let d_out = q + p + m + wd;
    let mut c = DMatrix::zeros(d_out, total);
    c.view_mut((0, 0), (q, n))
        .copy_from(&(controller.d() * plant.c()));
    c.view_mut((0, n + ne), (q, nk)).copy_from(controller.c());
    c.view_mut((q, 0), (p, n)).copy_from(plant.c());
    c.view_mut((q + p, 0), (m, n))
        .copy_from(&(env.d() * plant.gamma()));
    c.view_mut((q + p, n), (m, ne)).copy_from(env.c());
    c.view_mut((q + p + m, 0), (wd, n)).copy_from(plant.gamma());

    let mut d = DMatrix::zeros(d_out, d_in);
    d.view_mut((0, 0), (q, q)).copy_from(&DMatrix::identity(q, q));
    d.view_mut((0, q), (q, p)).copy_from(controller.d());
    d.view_mut((q, q), (p, p)).copy_from(&DMatrix::identity(p, p));
    d.view_mut((q + p, q + p), (m, m))
        .copy_from(&DMatrix::identity(m, m));
    d.view_mut((q + p, q + p + m), (m, wd)).copy_from(env.d());
    d.view_mut((q + p + m, q + p + m), (wd, wd))
        .copy_from(&DMatrix::identity(wd, wd));

    Ok(ClosedLoop {
        realization: Realization::new(a, b, c, d)?,
        n_plant: n,
        n_env: ne,
        n_ctrl: nk,
        dims: SignalDims {
            u: q,
            y: p,
            v: m,
            w: wd,
        },
    })
}

impl InputSignal {
    fn eval(&self, step: usize, t: f64, width: usize) -> DVector<f64> {
        match self {
            InputSignal::Zero => DVector::zeros(width),
            InputSignal::Hold(samples) => samples
                .get(step.min(samples.len().saturating_sub(1)))
                .cloned()
                .unwrap_or_else(|| DVector::zeros(width)),
            InputSignal::Func(f) => f(t),
        }
    }

    /// Held inputs stay constant across the stage evaluations of a step.
    fn is_held(&self) -> bool {
        !matches!(self, InputSignal::Func(_))
    }
}

/// Classical fixed-step fourth-order Runge-Kutta integration of
/// `x' = A x + B d(t)` with outputs `y = C x + D d`.
pub fn simulate(
    cl: &ClosedLoop,
    x0: &DVector<f64>,
    input: &InputSignal,
    dt: f64,
    t_final: f64,
) -> Result<Trajectory> {
    if dt <= 0.0 || t_final <= 0.0 {
        return Err(Error::DimensionMismatch(
            "time step and horizon must be positive".into(),
        ));
    }
    let g = &cl.realization;
    let n = g.state_dim();
    if x0.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "initial state has length {}, loop has {n} states",
            x0.len()
        )));
    }
    let steps = (t_final / dt).round() as usize;
    let width = g.input_dim();
    let mut x = x0.clone();
    let mut times = Vec::with_capacity(steps + 1);
    let mut states = Vec::with_capacity(steps + 1);
    let mut outputs = Vec::with_capacity(steps + 1);
    let mut inputs = Vec::with_capacity(steps + 1);

    let deriv = |x: &DVector<f64>, d: &DVector<f64>| g.a() * x + g.b() * d;
    for step in 0..=steps {
        let t = step as f64 * dt;
        let d_now = input.eval(step, t, width);
        if !x.iter().all(|v| v.is_finite()) {
            return Err(Error::Divergence { time: t });
        }
        times.push(t);
        states.push(x.clone());
        outputs.push(g.c() * &x + g.d() * &d_now);
        inputs.push(d_now.clone());
        if step == steps {
            break;
        }
        let (d_mid, d_end) = if input.is_held() {
            (d_now.clone(), d_now.clone())
        } else {
            (
                input.eval(step, t + 0.5 * dt, width),
                input.eval(step, t + dt, width),
            )
        };
        let k1 = deriv(&x, &d_now);
        let k2 = deriv(&(&x + 0.5 * dt * &k1), &d_mid);
        let k3 = deriv(&(&x + 0.5 * dt * &k2), &d_mid);
        let k4 = deriv(&(&x + dt * &k3), &d_end);
        x += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    Ok(Trajectory {
        times,
        states,
        outputs,
        inputs,
    })
}

/// Matrix exponential `exp(A t)` by scaling and squaring with a Taylor
/// series on the scaled matrix; the independent reference for integrator
/// accuracy checks.
pub fn matrix_exponential(a: &DMatrix<f64>, t: f64) -> DMatrix<f64> {
    let n = a.nrows();
    if n == 0 {
        return DMatrix::zeros(0, 0);
    }
    let at = a * t;
    let norm = at.norm();
    let squarings = if norm > 0.5 {
        (norm / 0.5).log2().ceil() as u32
    } else {
        0
    };
    let scaled = &at / 2.0_f64.powi(squarings as i32);
    let mut result = DMatrix::<f64>::identity(n, n);
    let mut term = DMatrix::<f64>::identity(n, n);
    for k in 1..=24 {
        term = &term * &scaled / k as f64;
        result += &term;
        if term.norm() < 1e-18 * result.norm() {
            break;
        }
    }
    for _ in 0..squarings {
        result = &result * &result;
    }
    result
}

/// Writes the trajectory as CSV with one column per state and signal,
/// partitioned into plant, environment, and controller states.
pub fn write_csv<W: Write>(traj: &Trajectory, cl: &ClosedLoop, out: &mut W) -> Result<()> {
    let mut header = vec!["t".to_string()];
    header.extend((0..cl.n_plant).map(|i| format!("x_plant_{i}")));
    header.extend((0..cl.n_env).map(|i| format!("x_env_{i}")));
    header.extend((0..cl.n_ctrl).map(|i| format!("x_ctrl_{i}")));
    header.extend((0..cl.dims.u).map(|i| format!("u_{i}")));
    header.extend((0..cl.dims.y).map(|i| format!("y_{i}")));
    header.extend((0..cl.dims.v).map(|i| format!("v_{i}")));
    header.extend((0..cl.dims.w).map(|i| format!("w_{i}")));
    writeln!(out, "{}", header.join(","))?;
    for k in 0..traj.times.len() {
        let mut row = Vec::with_capacity(header.len());
        row.push(format!("{}", traj.times[k]));
        row.extend(traj.states[k].iter().map(|v| format!("{v}")));
        row.extend(traj.outputs[k].iter().map(|v| format!("{v}")));
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}
