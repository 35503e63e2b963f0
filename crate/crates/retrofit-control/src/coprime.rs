//! Doubly coprime factorization, Youla parameterization of stabilizing
//! controllers, stabilizing-gain synthesis, and sampling of admissible
//! environments.
//!
//! A factorization of `G` is eight stable systems satisfying
//!
//! ```text
//! [ V_l  -U_l ] [ M_r  U_r ]
//! [ -N_l  M_l ] [ N_r  V_r ] = I,      G = N_r M_r^{-1} = M_l^{-1} N_l,
//! ```
//!
//! built from a state-feedback gain `F` (with `A + BF` Hurwitz) and an
//! output-injection gain `H` (with `A + HC` Hurwitz). Every controller that
//! internally stabilizes `G` is `(U_r + M_r Q)(V_r + N_r Q)^{-1}` for a
//! stable parameter `Q`, which is also how the set of environments keeping
//! an interconnection stable is sampled.

use nalgebra::{stack, DMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::{self, C64};
use crate::statespace::{closed_loop_state_matrix, sample_points, Realization, Sign};

/// Closed-loop decay margin requested from synthesized gains, in 1/seconds.
pub const DEFAULT_MARGIN: f64 = 0.1;

/// Eight stable factors of a subject system plus the gains that generated
/// them.
#[derive(Debug, Clone)]
pub struct CoprimeFactors {
    pub n_r: Realization,
    pub m_r: Realization,
    pub u_r: Realization,
    pub v_r: Realization,
    pub n_l: Realization,
    pub m_l: Realization,
    pub u_l: Realization,
    pub v_l: Realization,
    /// State-feedback gain, `A + B F` Hurwitz.
    pub f: DMatrix<f64>,
    /// Output-injection gain, `A + H C` Hurwitz.
    pub h: DMatrix<f64>,
    /// The factored system.
    pub subject: Realization,
}

/// A randomly drawn admissible environment: a stable free parameter and the
/// environment realization it induces.
#[derive(Debug, Clone)]
pub struct EnvironmentSample {
    pub qbar: Realization,
    pub gbar: Realization,
    pub seed: u64,
}

/// Eigenvalue, if any, with real part at least `re_threshold` that fails
/// the rank test `rank [A - lambda I, B] = n`.
fn uncontrollable_mode(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    re_threshold: f64,
) -> Result<Option<C64>> {
    let n = a.nrows();
    if n == 0 {
        return Ok(None);
    }
    let eigs = linalg::eigenvalues(a)?;
    for lambda in eigs {
        if lambda.re < re_threshold {
            continue;
        }
        let mut m = DMatrix::zeros(n, n + b.ncols());
        m.view_mut((0, 0), (n, n)).copy_from(a);
        m.view_mut((0, n), (n, b.ncols())).copy_from(b);
        let mut mc = linalg::to_complex(&m);
        for i in 0..n {
            mc[(i, i)] -= lambda;
        }
        let (smin, smax) = linalg::complex_singular_extrema(&mc);
        if smax <= 0.0 || smin <= 1e-8 * smax {
            return Ok(Some(lambda));
        }
    }
    Ok(None)
}

/// Rank test on the modes with nonnegative real part: can every unstable
/// mode be moved through `b`?
pub fn is_stabilizable(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<bool> {
    Ok(uncontrollable_mode(a, b, -1e-9)?.is_none())
}

/// Dual rank test: is every unstable mode visible through `c`?
pub fn is_detectable(a: &DMatrix<f64>, c: &DMatrix<f64>) -> Result<bool> {
    Ok(uncontrollable_mode(&a.transpose(), &c.transpose(), -1e-9)?.is_none())
}

/// Quantitative stabilizability: the smallest singular value of
/// `[A - lambda I, B]` over eigenvalues with real part at least `-0.15`,
/// normalized by the magnitude of `A`. Infinite when no such eigenvalues
/// exist; near zero when an almost-uncontrollable mode sits near or right
/// of the axis, which makes gain synthesis ill-conditioned.
pub fn stabilizability_margin(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<f64> {
    let n = a.nrows();
    if n == 0 {
        return Ok(f64::INFINITY);
    }
    let scale = a.norm().max(1.0);
    let mut worst = f64::INFINITY;
    for lambda in linalg::eigenvalues(a)? {
        if lambda.re < -0.15 {
            continue;
        }
        let mut m = DMatrix::zeros(n, n + b.ncols());
        m.view_mut((0, 0), (n, n)).copy_from(a);
        m.view_mut((0, n), (n, b.ncols())).copy_from(b);
        let mut mc = linalg::to_complex(&m);
        for i in 0..n {
            mc[(i, i)] -= lambda;
        }
        let (smin, _) = linalg::complex_singular_extrema(&mc);
        worst = worst.min(smin / scale);
    }
    Ok(worst)
}

/// Solves `A^T X + X A - X B B^T X + I = 0` for the stabilizing `X` via the
/// matrix sign function of the Hamiltonian, i.e. its stable invariant
/// subspace, with a Newton-Kleinman refinement pass when the residual
/// exceeds 1e-9.
#[allow(clippy::toplevel_ref_arg)] // nalgebra's stack! expands to a ref pattern
fn solve_care(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    if n == 0 {
        return Ok(DMatrix::zeros(0, 0));
    }
    let s = b * b.transpose();
    let eye = DMatrix::<f64>::identity(n, n);
    let h = stack![a, -&s; -&eye, -a.transpose()];

    // sign(H) by Newton iteration with Frobenius-norm scaling
    let mut z = h.clone();
    let mut converged = false;
    for _ in 0..100 {
        let z_inv = linalg::try_inverse(&z).ok_or_else(|| {
            Error::NumericalDegeneracy("sign iteration hit a singular iterate".into())
        })?;
        let c = (z_inv.norm() / z.norm()).sqrt();
        let next = 0.5 * (c * &z + &z_inv / c);
        let delta = (&next - &z).norm() / z.norm().max(1e-300);
        z = next;
        if delta < 1e-13 {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NumericalDegeneracy(
            "sign iteration for the Riccati Hamiltonian did not converge".into(),
        ));
    }

    // range of (I - sign(H)) / 2 spans the stable invariant subspace
    let w = 0.5 * (DMatrix::identity(2 * n, 2 * n) - &z);
    let u = linalg::image_basis(&w, 1e-10);
    if u.ncols() != n {
        return Err(Error::NumericalDegeneracy(format!(
            "stable invariant subspace of the Hamiltonian has dimension {} instead of {n}",
            u.ncols()
        )));
    }
    let u1 = u.view((0, 0), (n, n)).into_owned();
    let u2 = u.view((n, 0), (n, n)).into_owned();
    let xt = u1
        .transpose()
        .lu()
        .solve(&u2.transpose())
        .ok_or_else(|| Error::NumericalDegeneracy("invariant subspace basis is singular".into()))?;
    let mut x = 0.5 * (&xt + xt.transpose());

    let mut residual = care_residual(a, &s, &x);
    if residual > 1e-9 {
        for _ in 0..25 {
            let a_k = a - &s * &x;
            let rhs = -(&eye + &x * &s * &x);
            let Some(next) = solve_lyapunov(&a_k, &rhs) else {
                break;
            };
            let next = 0.5 * (&next + next.transpose());
            let next_residual = care_residual(a, &s, &next);
            if !next_residual.is_finite() || next_residual >= residual {
                break;
            }
            x = next;
            residual = next_residual;
            if residual < 1e-12 {
                break;
            }
        }
    }
    Ok(x)
}

fn care_residual(a: &DMatrix<f64>, s: &DMatrix<f64>, x: &DMatrix<f64>) -> f64 {
    let n = a.nrows();
    let r = a.transpose() * x + x * a - x * s * x + DMatrix::<f64>::identity(n, n);
    r.norm() / x.norm().max(1.0)
}

/// Solves `A^T P + P A = RHS` through the Kronecker-product linear system.
fn solve_lyapunov(a: &DMatrix<f64>, rhs: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let n = a.nrows();
    let eye = DMatrix::<f64>::identity(n, n);
    let at = a.transpose();
    let m = eye.kronecker(&at) + at.kronecker(&eye);
    let vec_rhs = DMatrix::from_column_slice(n * n, 1, rhs.as_slice());
    let sol = m.lu().solve(&vec_rhs)?;
    Some(DMatrix::from_column_slice(n, n, sol.as_slice()))
}

/// Synthesizes a state-feedback gain `F` such that `A + B F` is Hurwitz,
/// targeting a spectral abscissa of at most `-margin`.
///
/// The primary solve is the Riccati equation with unit weights; when the
/// resulting decay falls short of the margin and the modes right of
/// `-margin` are controllable, the equation is re-solved on the shifted
/// state matrix `A + margin I` to push the closed-loop spectrum past the
/// margin.
pub fn stabilizing_gain(a: &DMatrix<f64>, b: &DMatrix<f64>, margin: f64) -> Result<DMatrix<f64>> {
    if a.nrows() != a.ncols() || b.nrows() != a.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "stabilizing gain: A {}x{}, B {}x{}",
            a.nrows(),
            a.ncols(),
            b.nrows(),
            b.ncols()
        )));
    }
    if let Some(lambda) = uncontrollable_mode(a, b, -1e-9)? {
        return Err(Error::Unstabilizable(lambda));
    }
    let x = solve_care(a, b)?;
    let f = -b.transpose() * &x;
    let abscissa = linalg::spectral_abscissa(&linalg::eigenvalues(&(a + b * &f))?);
    if abscissa > -margin && uncontrollable_mode(a, b, -margin - 1e-9)?.is_none() {
        let shifted = a + margin * DMatrix::<f64>::identity(a.nrows(), a.ncols());
        if let Ok(x2) = solve_care(&shifted, b) {
            let f2 = -b.transpose() * &x2;
            let abscissa2 = linalg::spectral_abscissa(&linalg::eigenvalues(&(a + b * &f2))?);
            if abscissa2 < abscissa {
                return Ok(f2);
            }
        }
    }
    if abscissa >= 0.0 {
        return Err(Error::NumericalDegeneracy(format!(
            "synthesized gain left spectral abscissa at {abscissa:.3e}"
        )));
    }
    Ok(f)
}

impl CoprimeFactors {
    /// Doubly coprime factorization from Riccati-synthesized gains.
    ///
    /// Requires `(A, B)` stabilizable and `(C, A)` detectable.
    pub fn doubly_coprime(subject: &Realization, margin: f64) -> Result<Self> {
        let (a, b, c, d) = (subject.a(), subject.b(), subject.c(), subject.d());
        let f = stabilizing_gain(a, b, margin)?;
        let h = stabilizing_gain(&a.transpose(), &c.transpose(), margin)
            .map_err(|e| match e {
                Error::Unstabilizable(l) => Error::Undetectable(l),
                other => other,
            })?
            .transpose();
        let q = subject.input_dim();
        let p = subject.output_dim();
        let a_f = a + b * &f;
        let a_h = a + &h * c;
        let cdf = c + d * &f;
        let bhd = b + &h * d;

        let m_r = Realization::new(a_f.clone(), b.clone(), f.clone(), DMatrix::identity(q, q))?;
        let n_r = Realization::new(a_f.clone(), b.clone(), cdf.clone(), d.clone())?;
        let u_r = Realization::new(a_f.clone(), -&h, f.clone(), DMatrix::zeros(q, p))?;
        let v_r = Realization::new(a_f, -&h, cdf, DMatrix::identity(p, p))?;
        let m_l = Realization::new(a_h.clone(), h.clone(), c.clone(), DMatrix::identity(p, p))?;
        let n_l = Realization::new(a_h.clone(), bhd.clone(), c.clone(), d.clone())?;
        let u_l = Realization::new(a_h.clone(), -&h, f.clone(), DMatrix::zeros(q, p))?;
        let v_l = Realization::new(a_h, -bhd, f.clone(), DMatrix::identity(q, q))?;

        Ok(Self {
            n_r,
            m_r,
            u_r,
            v_r,
            n_l,
            m_l,
            u_l,
            v_l,
            f,
            h,
            subject: subject.clone(),
        })
    }

    /// The factorization available for a stable subject: `N = G`, `M = I`,
    /// `U = 0`, `V = I` on both sides.
    pub fn trivial(subject: &Realization) -> Result<Self> {
        let verdict = subject.is_hurwitz()?;
        if !verdict.is_hurwitz {
            return Err(Error::AssumptionViolation(format!(
                "trivial factorization requires a stable subject (abscissa {:.3e})",
                verdict.spectral_abscissa
            )));
        }
        let q = subject.input_dim();
        let p = subject.output_dim();
        let n = subject.state_dim();
        Ok(Self {
            n_r: subject.clone(),
            m_r: Realization::identity_gain(q),
            u_r: Realization::zero(q, p),
            v_r: Realization::identity_gain(p),
            n_l: subject.clone(),
            m_l: Realization::identity_gain(p),
            u_l: Realization::zero(q, p),
            v_l: Realization::identity_gain(q),
            f: DMatrix::zeros(q, n),
            h: DMatrix::zeros(n, p),
            subject: subject.clone(),
        })
    }

    /// Largest deviation of the stacked 2x2 block product from the identity
    /// over 32 sampled regular frequencies.
    #[allow(clippy::toplevel_ref_arg)] // nalgebra's stack! expands to a ref pattern
    pub fn verify_bezout(&self) -> Result<f64> {
        let all: [&Realization; 8] = [
            &self.n_r, &self.m_r, &self.u_r, &self.v_r, &self.n_l, &self.m_l, &self.u_l, &self.v_l,
        ];
        let points = sample_points(&all, 32)?;
        let q = self.subject.input_dim();
        let p = self.subject.output_dim();
        let mut worst: f64 = 0.0;
        for &s in &points {
            let vl = self.v_l.freq_eval(s)?;
            let ul = self.u_l.freq_eval(s)?;
            let nl = self.n_l.freq_eval(s)?;
            let ml = self.m_l.freq_eval(s)?;
            let mr = self.m_r.freq_eval(s)?;
            let ur = self.u_r.freq_eval(s)?;
            let nr = self.n_r.freq_eval(s)?;
            let vr = self.v_r.freq_eval(s)?;
            let left = stack![vl, -&ul; -&nl, ml];
            let right = stack![mr, ur; nr, vr];
            let mut prod = left * right;
            for i in 0..(q + p) {
                prod[(i, i)] -= C64::new(1.0, 0.0);
            }
            worst = worst.max(prod.norm());
        }
        Ok(worst)
    }

    /// The stabilizing controller indexed by the stable parameter `Q`,
    /// realized in observer form: the central observer-based controller
    /// with `Q` acting on the innovation. The transfer matrix equals
    /// `(U_r + M_r Q)(V_r + N_r Q)^{-1}`, and the closed loop with the
    /// subject is internally stable at the state-matrix level because its
    /// modes split into the spectra of `A + BF`, `A + HC`, and `A_Q`.
    pub fn youla_controller(&self, q_param: &Realization) -> Result<Realization> {
        let g = &self.subject;
        let q_dim = g.input_dim();
        let p_dim = g.output_dim();
        if q_param.output_dim() != q_dim || q_param.input_dim() != p_dim {
            return Err(Error::DimensionMismatch(format!(
                "Youla parameter must be {}x{}, got {}x{}",
                q_dim,
                p_dim,
                q_param.output_dim(),
                q_param.input_dim()
            )));
        }
        let verdict = q_param.is_hurwitz()?;
        if !verdict.is_hurwitz {
            return Err(Error::AssumptionViolation(format!(
                "Youla parameter must be stable (abscissa {:.3e})",
                verdict.spectral_abscissa
            )));
        }
        let (a, b, c, d) = (g.a(), g.b(), g.c(), g.d());
        let (aq, bq, cq, dq) = (q_param.a(), q_param.b(), q_param.c(), q_param.d());
        let n = g.state_dim();
        let nq = q_param.state_dim();

        let instantaneous = DMatrix::identity(q_dim, q_dim) + dq * d;
        let rc = linalg::rcond(&instantaneous);
        if rc < crate::statespace::WELL_POSED_RCOND {
            return Err(Error::IllPosedLoop {
                rcond: rc,
                limit: crate::statespace::WELL_POSED_RCOND,
            });
        }
        let w = linalg::try_inverse(&instantaneous).ok_or(Error::IllPosedLoop {
            rcond: rc,
            limit: crate::statespace::WELL_POSED_RCOND,
        })?;

        // u = W (F - Dq C) xhat + W Cq xq + W Dq y,  innovation r = y - C xhat - D u
        let ex = &self.f - dq * c;
        let wex = &w * &ex;
        let wcq = &w * cq;
        let wdq = &w * dq;
        let r_x = -c - d * &wex;
        let r_q = -(d * &wcq);
        let r_y = DMatrix::identity(p_dim, p_dim) - d * &wdq;

        let mut a_k = DMatrix::zeros(n + nq, n + nq);
        a_k.view_mut((0, 0), (n, n))
            .copy_from(&(a + b * &wex - &self.h * &r_x));
        a_k.view_mut((0, n), (n, nq))
            .copy_from(&(b * &wcq - &self.h * &r_q));
        a_k.view_mut((n, 0), (nq, n)).copy_from(&(bq * &r_x));
        a_k.view_mut((n, n), (nq, nq)).copy_from(&(aq + bq * &r_q));

        let mut b_k = DMatrix::zeros(n + nq, p_dim);
        b_k.view_mut((0, 0), (n, p_dim))
            .copy_from(&(b * &wdq - &self.h * &r_y));
        b_k.view_mut((n, 0), (nq, p_dim)).copy_from(&(bq * &r_y));

        let mut c_k = DMatrix::zeros(q_dim, n + nq);
        c_k.view_mut((0, 0), (q_dim, n)).copy_from(&wex);
        c_k.view_mut((0, n), (q_dim, nq)).copy_from(&wcq);

        Realization::new(a_k, b_k, c_k, wdq)
    }

    /// Draws a stable random parameter of the given state order and returns
    /// the admissible environment it induces for the subject, re-verified
    /// by a closed-loop eigenvalue check.
    ///
    /// Deterministic for a fixed `(order, seed)` pair.
    pub fn sample_environment(&self, order: usize, seed: u64) -> Result<EnvironmentSample> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut last_err = None;
        for _ in 0..10 {
            let qbar = random_stable_parameter(
                &mut rng,
                order,
                self.subject.input_dim(),
                self.subject.output_dim(),
            )?;
            let gbar = match self.youla_controller(&qbar) {
                Ok(g) => g,
                Err(e) => {
                    last_err = Some(e);
                    continue;
                }
            };
            let a_cl = closed_loop_state_matrix(&self.subject, &gbar)?;
            let abscissa = linalg::spectral_abscissa(&linalg::eigenvalues(&a_cl)?);
            if abscissa < 0.0 {
                return Ok(EnvironmentSample { qbar, gbar, seed });
            }
            last_err = Some(Error::NumericalDegeneracy(format!(
                "sampled environment left closed-loop abscissa at {abscissa:.3e}"
            )));
        }
        Err(last_err.unwrap_or_else(|| {
            Error::NumericalDegeneracy("environment sampling failed".into())
        }))
    }

    /// Realization of `U_r M_l + M_r Qbar M_l`, the closed-loop transfer
    /// between the interconnection signals induced by the environment with
    /// parameter `Qbar`; stable whenever `Qbar` is.
    pub fn mfrak(&self, qbar: &Realization) -> Result<Realization> {
        let first = self.u_r.series(&self.m_l)?;
        let second = self.m_r.series(&qbar.series(&self.m_l)?)?;
        first.parallel_sum(&second, Sign::Plus)
    }
}

/// Random strictly stable parameter: the state matrix is shifted left past
/// its spectral abscissa by a 0.5 margin; input, output, and feedthrough
/// entries are unit normal.
fn random_stable_parameter(
    rng: &mut ChaCha8Rng,
    order: usize,
    rows: usize,
    cols: usize,
) -> Result<Realization> {
    let mut a = DMatrix::from_fn(order, order, |_, _| rng.sample::<f64, _>(StandardNormal));
    if order > 0 {
        let abscissa = linalg::spectral_abscissa(&linalg::eigenvalues(&a)?);
        for i in 0..order {
            a[(i, i)] -= abscissa + 0.5;
        }
    }
    let b = DMatrix::from_fn(order, cols, |_, _| rng.sample::<f64, _>(StandardNormal));
    let c = DMatrix::from_fn(rows, order, |_, _| rng.sample::<f64, _>(StandardNormal));
    let d = DMatrix::from_fn(rows, cols, |_, _| rng.sample::<f64, _>(StandardNormal));
    Realization::new(a, b, c, d)
}
