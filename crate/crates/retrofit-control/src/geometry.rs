//! Relative-degree analysis of the interconnection-to-measurement channel,
//! output reordering, and the normal-form coordinates that isolate the
//! interconnection-driven dynamics.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg;
use crate::statespace::Realization;

/// The subsystem of interest with its four signal channels:
///
/// ```text
/// x' = A x + L v + B u,    w = Gamma x,    y = C x
/// ```
///
/// `v, w` are the interconnection input/output exchanged with the unknown
/// environment; `u, y` are the control input and the measurement.
#[derive(Debug, Clone, PartialEq)]
pub struct Plant {
    a: DMatrix<f64>,
    l: DMatrix<f64>,
    b: DMatrix<f64>,
    gamma: DMatrix<f64>,
    c: DMatrix<f64>,
}

impl Plant {
    pub fn new(
        a: DMatrix<f64>,
        l: DMatrix<f64>,
        b: DMatrix<f64>,
        gamma: DMatrix<f64>,
        c: DMatrix<f64>,
    ) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::DimensionMismatch("state matrix must be square".into()));
        }
        let n = a.nrows();
        if l.nrows() != n || b.nrows() != n || gamma.ncols() != n || c.ncols() != n {
            return Err(Error::DimensionMismatch(format!(
                "plant: A {}x{}, L {}x{}, B {}x{}, Gamma {}x{}, C {}x{}",
                a.nrows(),
                a.ncols(),
                l.nrows(),
                l.ncols(),
                b.nrows(),
                b.ncols(),
                gamma.nrows(),
                gamma.ncols(),
                c.nrows(),
                c.ncols()
            )));
        }
        Ok(Self { a, l, b, gamma, c })
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn l(&self) -> &DMatrix<f64> {
        &self.l
    }

    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }

    pub fn gamma(&self) -> &DMatrix<f64> {
        &self.gamma
    }

    pub fn c(&self) -> &DMatrix<f64> {
        &self.c
    }

    /// State dimension.
    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    /// Interconnection input dimension (m).
    pub fn v_dim(&self) -> usize {
        self.l.ncols()
    }

    /// Interconnection output dimension.
    pub fn w_dim(&self) -> usize {
        self.gamma.nrows()
    }

    /// Control input dimension (q).
    pub fn u_dim(&self) -> usize {
        self.b.ncols()
    }

    /// Measurement dimension (p).
    pub fn y_dim(&self) -> usize {
        self.c.nrows()
    }

    /// Transfer channel v -> y.
    pub fn g_yv(&self) -> Realization {
        Realization::new(
            self.a.clone(),
            self.l.clone(),
            self.c.clone(),
            DMatrix::zeros(self.y_dim(), self.v_dim()),
        )
        .expect("consistent by construction")
    }

    /// Transfer channel u -> y.
    pub fn g_yu(&self) -> Realization {
        Realization::new(
            self.a.clone(),
            self.b.clone(),
            self.c.clone(),
            DMatrix::zeros(self.y_dim(), self.u_dim()),
        )
        .expect("consistent by construction")
    }

    /// Transfer channel v -> w.
    pub fn g_wv(&self) -> Realization {
        Realization::new(
            self.a.clone(),
            self.l.clone(),
            self.gamma.clone(),
            DMatrix::zeros(self.w_dim(), self.v_dim()),
        )
        .expect("consistent by construction")
    }

    /// Transfer channel u -> w.
    pub fn g_wu(&self) -> Realization {
        Realization::new(
            self.a.clone(),
            self.b.clone(),
            self.gamma.clone(),
            DMatrix::zeros(self.w_dim(), self.u_dim()),
        )
        .expect("consistent by construction")
    }
}

/// Relative degrees of the (reordered) measurement rows with respect to the
/// interconnection input, plus the output transform that produced the
/// ordering.
#[derive(Debug, Clone)]
pub struct RelativeDegreeProfile {
    /// Relative degree per transformed output; meaningful only where
    /// `capped` is false.
    pub r: Vec<usize>,
    /// True for outputs with no nonzero Markov parameter within `n` powers:
    /// such outputs are unaffected by the interconnection input and sort
    /// last with conceptually infinite degree.
    pub capped: Vec<bool>,
    /// Stacked rows `c_i A^{r_i - 1} L` for the first `m` transformed
    /// outputs; injective when the profile is valid.
    pub decoupling_rows: DMatrix<f64>,
    /// Output transform; identity when no reorder was needed.
    pub t: DMatrix<f64>,
}

impl RelativeDegreeProfile {
    /// Sum of the first `m` relative degrees: the dimension of the
    /// derivative coordinates.
    pub fn derivative_dim(&self) -> usize {
        let m = self.decoupling_rows.ncols();
        self.r.iter().take(m).sum()
    }
}

/// Normal-form coordinate change `x -> (z, xi)` with `xi = S x`,
/// `z = Sbar x`, `Sbar L = 0`, together with the inverse blocks and the
/// output selectors that split the measurement into the rectifying block
/// and the rest.
#[derive(Debug, Clone)]
pub struct NormalFormCoords {
    /// Derivative coordinates map, `sigma x n`.
    pub s: DMatrix<f64>,
    /// Residual coordinates map annihilating `L`, `(n - sigma) x n`.
    pub sbar: DMatrix<f64>,
    /// Right-inverse block: `S s_dag = I`, `Sbar s_dag = 0`.
    pub s_dag: DMatrix<f64>,
    /// Right-inverse block: `Sbar sbar_dag = I`, `S sbar_dag = 0`.
    pub sbar_dag: DMatrix<f64>,
    /// Selector `[0 I]` keeping the last `p - m` transformed outputs.
    pub p_sel: DMatrix<f64>,
    /// Selector `[I 0]` keeping the first `m` transformed outputs.
    pub pbar_sel: DMatrix<f64>,
    /// Condition number of the stacked coordinate change `[S; Sbar]`.
    pub cond: f64,
}

impl NormalFormCoords {
    /// Dimension of the derivative coordinates.
    pub fn sigma(&self) -> usize {
        self.s.nrows()
    }

    /// Number of rectified outputs (m).
    pub fn m(&self) -> usize {
        self.pbar_sel.nrows()
    }
}

/// Relative degree of a single output row: the smallest `k + 1` such that
/// `c A^k L` is nonzero against a growth-aware tolerance.
fn row_degree(
    a: &DMatrix<f64>,
    l: &DMatrix<f64>,
    c_row: &DMatrix<f64>,
    a_norm: f64,
    tol: f64,
) -> Option<usize> {
    let n = a.nrows();
    let base = c_row.norm() * l.norm();
    let mut row = c_row.clone();
    let mut growth = 1.0_f64;
    for k in 0..n.max(1) {
        let markov = &row * l;
        if markov.norm() > tol * base * growth.max(1.0) {
            return Some(k + 1);
        }
        row *= a;
        growth *= a_norm;
    }
    None
}

/// Relative degrees of each output of `T C` in its current order.
fn raw_degrees(plant: &Plant, c_t: &DMatrix<f64>, tol: f64) -> Vec<Option<usize>> {
    let (_, a_norm) = linalg::singular_extrema(&plant.a().clone());
    (0..c_t.nrows())
        .map(|i| {
            let row = c_t.rows(i, 1).into_owned();
            row_degree(plant.a(), plant.l(), &row, a_norm, tol)
        })
        .collect()
}

/// Stacked Markov rows `c_i A^{r_i - 1} L` for the given output indices.
fn markov_rows(
    plant: &Plant,
    c_t: &DMatrix<f64>,
    degrees: &[Option<usize>],
    range: std::ops::Range<usize>,
) -> DMatrix<f64> {
    let m = plant.v_dim();
    let mut out = DMatrix::zeros(range.len(), m);
    for (row_idx, i) in range.enumerate() {
        if let Some(r) = degrees[i] {
            let mut row = c_t.rows(i, 1).into_owned();
            for _ in 0..r - 1 {
                row *= plant.a();
            }
            out.view_mut((row_idx, 0), (1, m)).copy_from(&(&row * plant.l()));
        }
    }
    out
}

/// Analyzes the measurement channel: computes per-output relative degrees,
/// the output transform that sorts them ascending with a strict gap after
/// position `m`, and the decoupling rows of the first `m` outputs.
///
/// Ties that straddle position `m` are resolved by an orthogonal transform
/// of the tied block built from the singular vectors of its stacked Markov
/// rows; outputs pushed to higher degree by that transform are re-analyzed
/// until the ordering stabilizes.
pub fn relative_degree(plant: &Plant, tol: f64) -> Result<RelativeDegreeProfile> {
    if tol <= 0.0 {
        return Err(Error::AssumptionViolation("tolerance must be positive".into()));
    }
    let p = plant.y_dim();
    let m = plant.v_dim();
    let mut t_total = DMatrix::<f64>::identity(p, p);

    let max_iter = 2 * p * plant.n().max(1) + 4;
    for _ in 0..max_iter {
        let c_t = &t_total * plant.c();
        let degrees = raw_degrees(plant, &c_t, tol);

        // sort ascending, capped outputs last, stable on ties
        let mut order: Vec<usize> = (0..p).collect();
        order.sort_by_key(|&i| degrees[i].unwrap_or(usize::MAX));
        if order.iter().enumerate().any(|(k, &i)| k != i) {
            let mut perm = DMatrix::zeros(p, p);
            for (new_row, &old_row) in order.iter().enumerate() {
                perm[(new_row, old_row)] = 1.0;
            }
            t_total = perm * t_total;
            continue;
        }

        if m > p {
            // more interconnection inputs than outputs: the decoupling rows
            // cannot be injective
            return Err(Error::AssumptionViolation(format!(
                "interconnection input dimension {m} exceeds measurement dimension {p}"
            )));
        }
        if degrees[..m].iter().any(Option::is_none) {
            return Err(Error::AssumptionViolation(
                "an output required for rectification is unaffected by the interconnection input"
                    .into(),
            ));
        }

        let r_m = degrees[m - 1].expect("checked finite");
        let tie_needs_fix = m < p && degrees[m].map(|d| d == r_m).unwrap_or(false);
        if !tie_needs_fix {
            let decoupling = markov_rows(plant, &c_t, &degrees, 0..m);
            let (smin, smax) = linalg::singular_extrema(&decoupling);
            if smax <= 0.0 || smin <= tol * smax {
                return Err(Error::AssumptionViolation(format!(
                    "decoupling rows are not injective (singular values {smin:.3e} .. {smax:.3e})"
                )));
            }
            let r = degrees.iter().map(|d| d.unwrap_or(plant.n())).collect();
            let capped = degrees.iter().map(Option::is_none).collect();
            return Ok(RelativeDegreeProfile {
                r,
                capped,
                decoupling_rows: decoupling,
                t: t_total,
            });
        }

        // tie block straddling position m
        let lo = (0..p)
            .find(|&i| degrees[i] == Some(r_m))
            .expect("tie value present");
        let hi = (lo..p)
            .take_while(|&i| degrees[i] == Some(r_m))
            .last()
            .unwrap()
            + 1;
        let keep = m - lo; // rows of the tie block that must stay at degree r_m
        let w = markov_rows(plant, &c_t, &degrees, lo..hi);
        if linalg::rank(&w, tol) > keep {
            return Err(Error::AssumptionViolation(format!(
                "tie of relative degree {r_m} across position {m} cannot be resolved: \
                 the tied Markov rows have rank {} but only {keep} may remain",
                linalg::rank(&w, tol)
            )));
        }
        // orthogonal transform from the left singular basis of the tied
        // Markov rows: rows beyond the rank are annihilated and their
        // outputs move to higher relative degree
        let (basis, complement) = linalg::image_and_complement(&w, tol);
        let tau = hi - lo;
        let mut t_hat = DMatrix::zeros(tau, tau);
        t_hat
            .view_mut((0, 0), (tau, basis.ncols()))
            .copy_from(&basis);
        t_hat
            .view_mut((0, basis.ncols()), (tau, complement.ncols()))
            .copy_from(&complement);
        let t_hat = t_hat.transpose();
        let mut step = DMatrix::<f64>::identity(p, p);
        step.view_mut((lo, lo), (tau, tau)).copy_from(&t_hat);
        t_total = step * t_total;
    }
    Err(Error::AssumptionViolation(
        "output reordering did not converge".into(),
    ))
}

/// The output transform alone; identity when the measurement rows already
/// satisfy the ordering assumptions.
pub fn reorder_transform(plant: &Plant, tol: f64) -> Result<DMatrix<f64>> {
    Ok(relative_degree(plant, tol)?.t)
}

/// Relative degrees of the measurement rows in their original order
/// (`None` for outputs unaffected by the interconnection input).
pub fn output_degrees(plant: &Plant, tol: f64) -> Vec<Option<usize>> {
    raw_degrees(plant, plant.c(), tol)
}

/// Builds the normal-form coordinates for a valid profile.
///
/// `S` stacks the derivative rows `c_i A^{j-1}` of the first `m`
/// transformed outputs; `Sbar` is an orthonormal basis of the part of
/// `ker L^T` transversal to the row span of `S`, so that `[S; Sbar]` is
/// invertible and `Sbar L = 0`.
pub fn build_coords(plant: &Plant, profile: &RelativeDegreeProfile) -> Result<NormalFormCoords> {
    let n = plant.n();
    let m = plant.v_dim();
    let p = plant.y_dim();
    let c_t = &profile.t * plant.c();
    let sigma = profile.derivative_dim();

    let mut s = DMatrix::zeros(sigma, n);
    let mut row_idx = 0;
    for i in 0..m {
        let mut row = c_t.rows(i, 1).into_owned();
        for _ in 0..profile.r[i] {
            s.view_mut((row_idx, 0), (1, n)).copy_from(&row);
            row *= plant.a();
            row_idx += 1;
        }
    }

    // rows annihilating L, transversal to the row span of S
    let tol = 1e-12;
    let w_basis = linalg::kernel_basis(&plant.l().transpose(), tol); // n x (n - rank L)
    let v_basis = linalg::image_basis(&s.transpose(), tol); // column span of S^T
    let proj_off_v = DMatrix::identity(n, n) - &v_basis * v_basis.transpose();
    let overlap = &proj_off_v * &w_basis;
    let y_ker = linalg::kernel_basis(&overlap, 1e-9); // directions of W inside V
    let y_co = linalg::image_and_complement(&y_ker, tol).1;
    let sbar = (&w_basis * &y_co).transpose();

    if sigma + sbar.nrows() != n {
        return Err(Error::NumericalDegeneracy(format!(
            "coordinate change is rank deficient: {} derivative rows plus {} residual rows \
             do not span dimension {n}",
            sigma,
            sbar.nrows()
        )));
    }

    let mut t_mat = DMatrix::zeros(n, n);
    t_mat.view_mut((0, 0), (sigma, n)).copy_from(&s);
    t_mat.view_mut((sigma, 0), (n - sigma, n)).copy_from(&sbar);
    let (smin, smax) = linalg::singular_extrema(&t_mat);
    let cond = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    let inv = linalg::try_inverse(&t_mat).filter(|_| smin > 1e-12 * smax).ok_or_else(|| {
        Error::NumericalDegeneracy(format!(
            "coordinate change is numerically singular (condition number {cond:.3e})"
        ))
    })?;
    let s_dag = inv.columns(0, sigma).into_owned();
    let sbar_dag = inv.columns(sigma, n - sigma).into_owned();

    let residual = (&sbar * plant.l()).norm();
    if residual > 1e-10 * plant.l().norm().max(1.0) {
        return Err(Error::NumericalDegeneracy(format!(
            "residual coordinates do not annihilate the interconnection input (|Sbar L| = {residual:.3e})"
        )));
    }
    let sl = &s * plant.l();
    let (sl_min, sl_max) = linalg::singular_extrema(&sl);
    if sl_max <= 0.0 || sl_min <= 1e-10 * sl_max {
        return Err(Error::NumericalDegeneracy(
            "derivative coordinates lose rank on the interconnection input".into(),
        ));
    }

    let mut p_sel = DMatrix::zeros(p - m, p);
    for i in 0..p - m {
        p_sel[(i, m + i)] = 1.0;
    }
    let mut pbar_sel = DMatrix::zeros(m, p);
    for i in 0..m {
        pbar_sel[(i, i)] = 1.0;
    }

    Ok(NormalFormCoords {
        s,
        sbar,
        s_dag,
        sbar_dag,
        p_sel,
        pbar_sel,
        cond,
    })
}
