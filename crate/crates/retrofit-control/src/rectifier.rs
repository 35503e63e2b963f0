//! Construction of the measurement rectifier: the proper cross-channel
//! model `Ghat_yv`, the annihilator `Xi`, and the reduced design model
//! `Ghat_yu`.
//!
//! The rectified measurement is `Xi y = P y - Ghat_yv Pbar y`: the first
//! `m` (reordered) outputs reconstruct the interconnection input through
//! the derivative coordinates, and their effect is subtracted from the
//! remaining outputs. Improper operators never appear as realizations:
//! polynomial input blocks are folded into proper state-space data with the
//! shift rule `C (sI - A)^{-1} b s = C b + C (sI - A)^{-1} A b`, and the
//! left inverse of the measurement channel exists only as a pointwise
//! evaluation.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::geometry::{build_coords, relative_degree, NormalFormCoords, Plant, RelativeDegreeProfile};
use crate::linalg::{self, C64};
use crate::statespace::{sample_points, Realization, DEFAULT_RANK_TOL};

/// Everything the controller assembly needs from the geometric analysis.
#[derive(Debug, Clone)]
pub struct RectifiedModel {
    pub profile: RelativeDegreeProfile,
    pub coords: NormalFormCoords,
    /// Proper model of the first-m-outputs' influence on the rest,
    /// `(p - m) x m`.
    pub ghat_yv: Realization,
    /// The annihilator `Xi = P - Ghat_yv Pbar`, `(p - m) x p`, acting on the
    /// reordered measurement.
    pub xi: Realization,
    /// Reduced design model of the control channel, `(p - m) x q`.
    pub ghat_yu: Realization,
    /// Agreement between the cascade and explicit constructions of
    /// `ghat_yu` at sampled frequencies.
    pub ghat_yu_agreement: f64,
    /// Residual of the zero test on `Xi * G_yv`.
    pub annihilation_residual: f64,
}

/// Measurement channel of the plant with the reordering transform applied.
pub fn g_yv_reordered(plant: &Plant, profile: &RelativeDegreeProfile) -> Realization {
    let c_t = &profile.t * plant.c();
    Realization::new(
        plant.a().clone(),
        plant.l().clone(),
        c_t,
        DMatrix::zeros(plant.y_dim(), plant.v_dim()),
    )
    .expect("consistent by construction")
}

/// Control channel of the plant with the reordering transform applied.
pub fn g_yu_reordered(plant: &Plant, profile: &RelativeDegreeProfile) -> Realization {
    let c_t = &profile.t * plant.c();
    Realization::new(
        plant.a().clone(),
        plant.b().clone(),
        c_t,
        DMatrix::zeros(plant.y_dim(), plant.u_dim()),
    )
    .expect("consistent by construction")
}

/// Realizes `C (sI - A)^{-1} (N_0 + N_1 s + ... )` as a proper system
/// `C (sI - A)^{-1} B_eq + D_eq` via the shift rule, returning the largest
/// norm over the coefficients of positive powers of `s`, which must vanish
/// for the result to be proper.
fn realize_poly_input(
    a: &DMatrix<f64>,
    c: &DMatrix<f64>,
    coeffs: &[DMatrix<f64>],
) -> (DMatrix<f64>, DMatrix<f64>, f64) {
    let n = a.nrows();
    let inputs = coeffs.first().map_or(0, |m| m.ncols());
    let outputs = c.nrows();
    let mut b_eq = DMatrix::zeros(n, inputs);
    let mut a_pow = DMatrix::<f64>::identity(n, n);
    for coeff in coeffs {
        b_eq += &a_pow * coeff;
        a_pow = a * &a_pow;
    }
    let mut d_eq = DMatrix::zeros(outputs, inputs);
    let mut residual: f64 = 0.0;
    for level in 0..coeffs.len().saturating_sub(1) {
        // s^level coefficient of the polynomial part:
        // sum_{k >= level+1} C A^{k-1-level} N_k
        let mut term = DMatrix::zeros(outputs, inputs);
        let mut a_pow = DMatrix::<f64>::identity(n, n);
        for coeff in coeffs.iter().skip(level + 1) {
            term += c * &a_pow * coeff;
            a_pow = a * &a_pow;
        }
        if level == 0 {
            d_eq = term;
        } else {
            residual = residual.max(term.norm());
        }
    }
    (b_eq, d_eq, residual)
}

/// Builds the proper model of the rectifying outputs' influence on the
/// remaining outputs.
///
/// The derivative stack enters through the polynomial input matrix
/// `(Sbar A S_dag) diag([1, s, ..., s^{r_i - 1}]^T)`; the shift rule folds
/// it into state-space data, and the coefficients of positive powers of
/// `s` are asserted to vanish. A violation signals measurement rows whose
/// degree structure is degenerate, in which case no proper model exists.
pub fn build_ghat_yv(
    plant: &Plant,
    profile: &RelativeDegreeProfile,
    coords: &NormalFormCoords,
) -> Result<Realization> {
    let m = coords.m();
    let c_t = &profile.t * plant.c();
    let a_hat = &coords.sbar * plant.a() * &coords.sbar_dag;
    let mixing = &coords.sbar * plant.a() * &coords.s_dag; // (n - sigma) x sigma
    let c_hat = &coords.p_sel * &c_t * &coords.sbar_dag;

    let max_r = profile.r.iter().take(m).copied().max().unwrap_or(0);
    let z_dim = coords.sbar.nrows();
    let mut coeffs = vec![DMatrix::zeros(z_dim, m); max_r.max(1)];
    let mut col = 0;
    for i in 0..m {
        for coeff in coeffs.iter_mut().take(profile.r[i]) {
            for row in 0..z_dim {
                coeff[(row, i)] = mixing[(row, col)];
            }
            col += 1;
        }
    }

    let (b_hat, d_hat, residual) = realize_poly_input(&a_hat, &c_hat, &coeffs);
    let scale = (a_hat.norm() + mixing.norm() + c_hat.norm()).max(1.0);
    if residual > 1e-8 * scale {
        return Err(Error::NumericalDegeneracy(format!(
            "cross-channel model is improper: residual polynomial coefficient {residual:.3e} \
             exceeds tolerance (degenerate degree structure)"
        )));
    }
    Realization::new(a_hat, b_hat, c_hat, d_hat)
}

/// Assembles the annihilator `Xi = P - Ghat_yv Pbar` as a single
/// realization on the states of `Ghat_yv`.
pub fn build_xi(ghat_yv: &Realization, coords: &NormalFormCoords) -> Result<Realization> {
    let b = ghat_yv.b() * &coords.pbar_sel;
    let c = -ghat_yv.c();
    let d = &coords.p_sel - ghat_yv.d() * &coords.pbar_sel;
    Realization::new(ghat_yv.a().clone(), b, c, d)
}

/// Pointwise value of the left inverse `(Pbar G_yv)^{-1} Pbar` of the
/// reordered measurement channel; generally improper, so it exists only as
/// an evaluation and satisfies `left_inverse(s) * G_yv(s) = I`.
pub fn left_inverse_eval(
    plant: &Plant,
    profile: &RelativeDegreeProfile,
    coords: &NormalFormCoords,
    s: C64,
) -> Result<DMatrix<C64>> {
    let g_yv = g_yv_reordered(plant, profile);
    let g_s = g_yv.freq_eval(s)?;
    let pbar = linalg::to_complex(&coords.pbar_sel);
    let block = &pbar * &g_s;
    let inv = linalg::solve_complex(&block, &pbar).ok_or(Error::EvaluationAtPole(s))?;
    Ok(inv)
}

/// Builds the reduced design model `Ghat_yu`.
///
/// The returned realization is the explicit construction on the residual
/// coordinates, so it shares its state space (and output map) with the
/// cross-channel model: an internal controller that stabilizes this
/// realization then also renders the cross-channel loop stable, because
/// both loops close around the same dynamics. The cascade `Xi * G_yu`
/// (proper by construction) is reduced alongside and the two must agree at
/// sampled frequencies; disagreement flags upstream numerical degradation.
pub fn build_ghat_yu(
    plant: &Plant,
    profile: &RelativeDegreeProfile,
    coords: &NormalFormCoords,
    xi: &Realization,
) -> Result<(Realization, f64)> {
    let explicit = explicit_ghat_yu(plant, profile, coords)?;
    let cascade = xi.series(&g_yu_reordered(plant, profile))?;
    let (reduced, _) = cascade.minimal_reduce(DEFAULT_RANK_TOL);

    let points = sample_points(&[&reduced, &explicit], 32)?;
    let agreement = crate::statespace::freq_agreement(&reduced, &explicit, &points);
    if !agreement.is_finite() || agreement >= 1e-8 {
        return Err(Error::NumericalDegeneracy(format!(
            "explicit control-channel model disagrees with the reduced cascade \
             ({agreement:.3e} relative at sampled frequencies)"
        )));
    }
    Ok((explicit, agreement))
}

/// Explicit realization of the reduced design model: input matrix
/// `Sbar (B - A S_dag col(Z_i Dhat_i))` folded through the shift rule.
fn explicit_ghat_yu(
    plant: &Plant,
    profile: &RelativeDegreeProfile,
    coords: &NormalFormCoords,
) -> Result<Realization> {
    let m = coords.m();
    let q = plant.u_dim();
    let sigma = coords.sigma();
    let c_t = &profile.t * plant.c();
    let a_hat = &coords.sbar * plant.a() * &coords.sbar_dag;
    let c_hat = &coords.p_sel * &c_t * &coords.sbar_dag;

    // polynomial matrix col(Z_i Dhat_i): its row (i, j) carries
    // sum_{l=1}^{j-1} c_i A^{j-1-l} B s^{l-1}, a polynomial of degree j - 2
    let max_r = profile.r.iter().take(m).copied().max().unwrap_or(1);
    let mut z_poly = vec![DMatrix::zeros(sigma, q); max_r.saturating_sub(1).max(1)];
    let mut row_base = 0;
    for i in 0..m {
        let c_row = c_t.rows(i, 1).into_owned();
        // markov[j] = c_i A^j B
        let mut markov = Vec::with_capacity(profile.r[i]);
        let mut row = c_row;
        for _ in 0..profile.r[i] {
            markov.push(&row * plant.b());
            row *= plant.a();
        }
        for j in 0..profile.r[i] {
            for k in 0..j {
                // coefficient of s^k in row (i, j): c_i A^{j-1-k} B
                let term = &markov[j - 1 - k];
                for col in 0..q {
                    z_poly[k][(row_base + j, col)] = term[(0, col)];
                }
            }
        }
        row_base += profile.r[i];
    }

    let mixing = plant.a() * &coords.s_dag; // n x sigma
    let sbar_b = &coords.sbar * plant.b();
    let mut coeffs: Vec<DMatrix<f64>> = Vec::with_capacity(z_poly.len());
    for (k, zk) in z_poly.iter().enumerate() {
        let term = -(&coords.sbar * &mixing * zk);
        if k == 0 {
            coeffs.push(&sbar_b + term);
        } else {
            coeffs.push(term);
        }
    }

    let (b_eq, d_eq, residual) = realize_poly_input(&a_hat, &c_hat, &coeffs);
    let scale = (a_hat.norm() + c_hat.norm() + plant.b().norm()).max(1.0);
    if residual > 1e-8 * scale {
        return Err(Error::NumericalDegeneracy(format!(
            "explicit control-channel model is improper (residual {residual:.3e})"
        )));
    }
    Realization::new(a_hat, b_eq, c_hat, d_eq)
}

/// Runs the full geometric pipeline: relative degrees, coordinates, the
/// cross-channel model, the annihilator, and the reduced design model,
/// with the annihilation property verified before returning.
pub fn rectify(plant: &Plant, tol: f64) -> Result<RectifiedModel> {
    if plant.v_dim() >= plant.y_dim() {
        return Err(Error::AssumptionViolation(format!(
            "rectifier synthesis requires m < p (got m = {}, p = {}): with as many \
             interconnection inputs as measurements only the zero controller rectifies",
            plant.v_dim(),
            plant.y_dim()
        )));
    }
    let profile = relative_degree(plant, tol)?;
    let coords = build_coords(plant, &profile)?;
    let ghat_yv = build_ghat_yv(plant, &profile, &coords)?;
    let xi = build_xi(&ghat_yv, &coords)?;

    let annihilated = xi.series(&g_yv_reordered(plant, &profile))?;
    let check = annihilated.is_zero_system(1e-8)?;
    if !check.is_zero {
        return Err(Error::NumericalDegeneracy(format!(
            "annihilation failed: |Xi G_yv| = {:.3e} relative; the degree structure \
             does not support a proper rectifier",
            check.residual
        )));
    }
    let (dxi_min, _) = linalg::singular_extrema(xi.d());
    if dxi_min <= 0.0 {
        return Err(Error::NumericalDegeneracy(
            "rectifier feedthrough lost row rank".into(),
        ));
    }

    let (ghat_yu, ghat_yu_agreement) = build_ghat_yu(plant, &profile, &coords, &xi)?;
    Ok(RectifiedModel {
        profile,
        coords,
        ghat_yv,
        xi,
        ghat_yu,
        ghat_yu_agreement,
        annihilation_residual: check.residual,
    })
}

impl RectifiedModel {
    /// Pointwise left inverse of the reordered measurement channel.
    pub fn left_inverse_eval(&self, plant: &Plant, s: C64) -> Result<DMatrix<C64>> {
        left_inverse_eval(plant, &self.profile, &self.coords, s)
    }
}
