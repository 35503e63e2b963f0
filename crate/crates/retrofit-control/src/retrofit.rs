//! Retrofit controller assembly and verification.
//!
//! A retrofit controller keeps the whole interconnection internally stable
//! for every environment that keeps the controller-free system stable. The
//! algebraic characterization works with the free parameter of the
//! controller taken for the modified channel
//! `Gtilde_yu = G_yu + G_yv U_r M_l G_wu` (built from a factorization of
//! the interconnection channel `G_wv`): the controller is retrofit exactly
//! when `Qtilde = (I - K Gtilde_yu)^{-1} K` is stable and
//! `G_wu Qtilde G_yv = 0`.
//!
//! The constructive subclass enforces `K G_yv = 0` structurally: the
//! assembled controller is an internal stabilizer of the reduced design
//! model acting behind the rectifier, `K = Khat Xi T`.

use nalgebra::DMatrix;

use crate::coprime::{stabilizing_gain, CoprimeFactors};
use crate::error::{Error, Result};
use crate::geometry::Plant;
use crate::linalg;
use crate::rectifier::{rectify, RectifiedModel};
use crate::sim::close_loop;
use crate::statespace::{
    freq_agreement, sample_points, Realization, Sign, StabilityVerdict, DEFAULT_RANK_TOL,
};

/// Default tolerance for the zero tests and residual comparisons.
pub const DEFAULT_TOL: f64 = 1e-8;

/// An assembled retrofit controller with its verification data.
#[derive(Debug, Clone)]
pub struct RetrofitController {
    /// Internal controller, a stabilizer of the reduced design model.
    pub khat: Realization,
    /// Geometric data the assembly was built from.
    pub rect: RectifiedModel,
    /// The assembled controller `Khat * Xi * T`, mapping the original
    /// measurement to the control input.
    pub k: Realization,
    /// `(I - Khat Ghat_yu)^{-1} Khat`, stable by construction.
    pub qhat: Realization,
    /// `(I - K G_yu)^{-1} K`, the controller's free parameter.
    pub q: Realization,
    /// Zero-test residual of `K * G_yv`.
    pub kg_yv_residual: f64,
    /// Spectral abscissa of the reduced `qhat`.
    pub qhat_abscissa: f64,
    /// Spectral abscissa of the reduced `qhat * Ghat_yv`.
    pub qhat_ghat_yv_abscissa: f64,
    /// Frequency residual of `Q = (Qhat P - Qhat Ghat_yv Pbar) T`.
    pub q_identity_residual: f64,
}

/// Verdict of the definitional test for the constructive subclass.
#[derive(Debug, Clone)]
pub struct OutputRectifyingVerdict {
    pub kg_yv_residual: f64,
    pub q_stability: StabilityVerdict,
    pub pass: bool,
}

/// A destabilizing static environment found by the gain sweep.
#[derive(Debug, Clone, Copy)]
pub struct SweepHit {
    /// Gain value applied to the elementary direction `(row, col)`.
    pub gain: f64,
    pub row: usize,
    pub col: usize,
    /// Spectral abscissa of the destabilized loop.
    pub abscissa: f64,
}

/// Verdict of the full retrofit check: the algebraic constraint, the
/// stability of the free parameter, the invariance of the interconnection
/// channel, and Monte Carlo closed loops over sampled environments.
#[derive(Debug, Clone)]
pub struct RetrofitVerdict {
    /// Zero-test residual of `G_wu Qtilde G_yv`.
    pub constraint_residual: f64,
    pub qtilde_stable: StabilityVerdict,
    /// Frequency deviation of the closed interconnection channel from the
    /// open one.
    pub mwv_invariance_residual: f64,
    /// `(environment seed, closed-loop spectral abscissa)` per trial;
    /// ill-posed trials record `+inf`.
    pub monte_carlo: Vec<(u64, f64)>,
    /// Destabilizing static environment, searched for when the constraint
    /// is violated.
    pub sweep_counterexample: Option<SweepHit>,
    pub overall: bool,
}

impl RetrofitVerdict {
    /// Worst closed-loop abscissa over the Monte Carlo trials.
    pub fn worst_abscissa(&self) -> f64 {
        self.monte_carlo
            .iter()
            .map(|&(_, a)| a)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// The modified control channel `G_yu + G_yv U_r M_l G_wu` induced by a
/// factorization of the interconnection channel.
pub fn build_gtilde_yu(plant: &Plant, f_wv: &CoprimeFactors) -> Result<Realization> {
    let chain = plant
        .g_yv()
        .series(&f_wv.u_r.series(&f_wv.m_l.series(&plant.g_wu())?)?)?;
    plant.g_yu().parallel_sum(&chain, Sign::Plus)
}

/// Definitional test for the constructive subclass: `K G_yv = 0` and the
/// free parameter `(I - K G_yu)^{-1} K` stable after minimal reduction.
pub fn check_output_rectifying(
    k: &Realization,
    plant: &Plant,
    tol: f64,
) -> Result<OutputRectifyingVerdict> {
    let zero = k.series(&plant.g_yv())?.is_zero_system(tol)?;
    let q = plant.g_yu().feedback(k)?;
    let (q_red, _) = q.minimal_reduce(DEFAULT_RANK_TOL);
    let q_stability = q_red.is_hurwitz()?;
    Ok(OutputRectifyingVerdict {
        kg_yv_residual: zero.residual,
        pass: zero.is_zero && q_stability.is_hurwitz,
        q_stability,
    })
}

/// Full retrofit check of a controller against a plant.
///
/// Verifies the algebraic constraint (`G_wu Qtilde G_yv` is the zero
/// system with `Qtilde` stable after minimal reduction), measures the
/// invariance of the interconnection channel, and closes `n_trials` Monte
/// Carlo loops over sampled environments of state orders 0 through 4,
/// judging each by the eigenvalues of the stacked state matrix. When the
/// constraint is violated, a bounded search over static environment gains
/// looks for an explicit destabilizing counterexample.
pub fn check_retrofit(
    k: &Realization,
    plant: &Plant,
    f_wv: &CoprimeFactors,
    tol: f64,
    n_trials: usize,
    seed: u64,
) -> Result<RetrofitVerdict> {
    let gtilde = build_gtilde_yu(plant, f_wv)?;
    let qtilde = gtilde.feedback(k)?;
    let (qtilde_red, _) = qtilde.minimal_reduce(DEFAULT_RANK_TOL);
    let qtilde_stable = qtilde_red.is_hurwitz()?;

    let constraint_chain = plant.g_wu().series(&qtilde.series(&plant.g_yv())?)?;
    let constraint = constraint_chain.is_zero_system(tol)?;

    // closed interconnection channel must match the open one
    let mwv = plant.g_wv().parallel_sum(&constraint_chain, Sign::Plus)?;
    let g_wv = plant.g_wv();
    let points = sample_points(&[&mwv, &g_wv], 32)?;
    let mwv_invariance_residual = freq_agreement(&mwv, &g_wv, &points);

    let monte_carlo = monte_carlo_abscissas(k, plant, f_wv, n_trials, seed)?;

    let sweep_counterexample = if constraint.residual >= tol {
        static_gain_sweep(k, plant)?
    } else {
        None
    };

    let overall = constraint.residual < tol
        && qtilde_stable.is_hurwitz
        && monte_carlo.iter().all(|&(_, a)| a < 0.0);
    Ok(RetrofitVerdict {
        constraint_residual: constraint.residual,
        qtilde_stable,
        mwv_invariance_residual,
        monte_carlo,
        sweep_counterexample,
        overall,
    })
}

/// Monte Carlo closed-loop abscissas over sampled environments, trials fan
/// out to worker threads and merge deterministically by trial index.
fn monte_carlo_abscissas(
    k: &Realization,
    plant: &Plant,
    f_wv: &CoprimeFactors,
    n_trials: usize,
    seed: u64,
) -> Result<Vec<(u64, f64)>> {
    let workers = std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1)
        .clamp(1, 8);
    let mut results = vec![(0u64, f64::INFINITY); n_trials];
    let chunk = n_trials.div_ceil(workers).max(1);
    std::thread::scope(|scope| {
        for (w, slot) in results.chunks_mut(chunk).enumerate() {
            scope.spawn(move || {
                for (off, out) in slot.iter_mut().enumerate() {
                    let trial = w * chunk + off;
                    let env_seed = seed.wrapping_add(trial as u64);
                    let order = trial % 5;
                    let abscissa = f_wv
                        .sample_environment(order, env_seed)
                        .and_then(|env| close_loop(plant, &env.gbar, k))
                        .and_then(|cl| cl.realization.is_hurwitz())
                        .map(|v| v.spectral_abscissa)
                        .unwrap_or(f64::INFINITY);
                    *out = (env_seed, abscissa);
                }
            });
        }
    });
    Ok(results)
}

/// Sweeps static environment gains `g * E(row, col)` for `g` in
/// `[-10, 10]` with step 0.01, restricted to admissible gains (the
/// controller-free interconnection stays Hurwitz), and returns the first
/// that destabilizes the closed loop with the controller attached.
fn static_gain_sweep(k: &Realization, plant: &Plant) -> Result<Option<SweepHit>> {
    let m = plant.v_dim();
    let wd = plant.w_dim();
    for row in 0..m {
        for col in 0..wd {
            let mut gain = -10.0_f64;
            while gain <= 10.0 {
                if gain.abs() > 1e-12 {
                    let mut d = DMatrix::zeros(m, wd);
                    d[(row, col)] = gain;
                    let a_env = plant.a() + plant.l() * &d * plant.gamma();
                    let env_abscissa = linalg::spectral_abscissa(&linalg::eigenvalues(&a_env)?);
                    if env_abscissa < 0.0 {
                        let env = Realization::static_gain(d);
                        if let Ok(cl) = close_loop(plant, &env, k) {
                            let verdict = cl.realization.is_hurwitz()?;
                            if verdict.spectral_abscissa > 0.0 {
                                return Ok(Some(SweepHit {
                                    gain,
                                    row,
                                    col,
                                    abscissa: verdict.spectral_abscissa,
                                }));
                            }
                        }
                    }
                }
                gain += 0.01;
            }
        }
    }
    Ok(None)
}

/// Synthesizes an observer-based internal controller for the reduced
/// design model: state feedback and output injection both come from the
/// Riccati solve, so the loop `(Ghat_yu, Khat)` is internally stable with
/// margin by the separation of the two spectra.
///
/// The gains are designed on the given realization as-is. The design model
/// from the geometric pipeline shares its state coordinates with the
/// cross-channel model, and a controller built on those exact coordinates
/// is what makes the cross-channel loop provably stable; reducing first
/// could silently drop weakly coupled unstable modes that the controller
/// must know about.
pub fn synthesize_internal(ghat_yu: &Realization, margin: f64) -> Result<Realization> {
    let (a, b, c, d) = (ghat_yu.a(), ghat_yu.b(), ghat_yu.c(), ghat_yu.d());
    let f = stabilizing_gain(a, b, margin)?;
    let h = stabilizing_gain(&a.transpose(), &c.transpose(), margin)
        .map_err(|e| match e {
            Error::Unstabilizable(l) => Error::Undetectable(l),
            other => other,
        })?
        .transpose();
    let a_k = a + b * &f + &h * c + &h * d * &f;
    let khat = Realization::new(
        a_k,
        -h,
        f,
        DMatrix::zeros(ghat_yu.input_dim(), ghat_yu.output_dim()),
    )?;
    let a_cl = crate::statespace::closed_loop_state_matrix(ghat_yu, &khat)?;
    let abscissa = linalg::spectral_abscissa(&linalg::eigenvalues(&a_cl)?);
    if abscissa >= 0.0 {
        return Err(Error::NumericalDegeneracy(format!(
            "internal loop failed to stabilize (abscissa {abscissa:.3e})"
        )));
    }
    Ok(khat)
}

/// Realization of `Qhat * Ghat_yv` built on the loop shared by the design
/// and cross-channel models: the internal controller closed around
/// `x' = Ahat x + Lhat eta + Bhat u`, `y = Chat x + ...`, read from the
/// cross input `eta` to `u`. On these coordinates the state matrix is the
/// internal loop's own, so stability is inherited structurally instead of
/// resting on numerical pole-zero cancellation between duplicated states.
pub fn cross_channel_parameter(khat: &Realization, rect: &RectifiedModel) -> Result<Realization> {
    let g_yu = &rect.ghat_yu;
    let g_yv = &rect.ghat_yv;
    if g_yu.a() != g_yv.a() || g_yu.c() != g_yv.c() {
        return Err(Error::DimensionMismatch(
            "design and cross-channel models must share state coordinates".into(),
        ));
    }
    if khat.d().norm() != 0.0 {
        // the observer-based controller is strictly proper; a feedthrough
        // would create an algebraic loop through the model feedthroughs
        return Err(Error::DimensionMismatch(
            "internal controller must be strictly proper".into(),
        ));
    }
    let n = g_yu.state_dim();
    let nk = khat.state_dim();
    let m = g_yv.input_dim();
    let q = g_yu.input_dim();
    let mut a = DMatrix::zeros(n + nk, n + nk);
    a.view_mut((0, 0), (n, n)).copy_from(g_yu.a());
    a.view_mut((0, n), (n, nk)).copy_from(&(g_yu.b() * khat.c()));
    a.view_mut((n, 0), (nk, n)).copy_from(&(khat.b() * g_yu.c()));
    a.view_mut((n, n), (nk, nk))
        .copy_from(&(khat.a() + khat.b() * g_yu.d() * khat.c()));
    let mut b = DMatrix::zeros(n + nk, m);
    b.view_mut((0, 0), (n, m)).copy_from(g_yv.b());
    b.view_mut((n, 0), (nk, m)).copy_from(&(khat.b() * g_yv.d()));
    let mut c = DMatrix::zeros(q, n + nk);
    c.view_mut((0, n), (q, nk)).copy_from(khat.c());
    Realization::new(a, b, c, DMatrix::zeros(q, m))
}

/// Assembles the retrofit controller `K = Khat Xi T` and establishes its
/// invariants: the measurement channel is annihilated, both `Qhat` and
/// `Qhat Ghat_yv` are stable after minimal reduction, and the free
/// parameter satisfies `Q = (Qhat P - Qhat Ghat_yv Pbar) T` at sampled
/// frequencies.
pub fn assemble(khat: &Realization, rect: &RectifiedModel, plant: &Plant, tol: f64) -> Result<RetrofitController> {
    let p_m = rect.xi.output_dim();
    if khat.input_dim() != p_m || khat.output_dim() != plant.u_dim() {
        return Err(Error::DimensionMismatch(format!(
            "internal controller must map {p_m} rectified outputs to {} actuators, got {}x{}",
            plant.u_dim(),
            khat.output_dim(),
            khat.input_dim()
        )));
    }
    let t_gain = Realization::static_gain(rect.profile.t.clone());
    let k = khat.series(&rect.xi)?.series(&t_gain)?;

    // annihilation of the measurement channel, on the original plant
    let kg_yv = k.series(&plant.g_yv())?.is_zero_system(tol)?;
    if !kg_yv.is_zero {
        return Err(Error::NumericalDegeneracy(format!(
            "assembled controller does not annihilate the measurement channel \
             (residual {:.3e})",
            kg_yv.residual
        )));
    }

    let qhat = rect.ghat_yu.feedback(khat)?;
    let (qhat_red, _) = qhat.minimal_reduce(DEFAULT_RANK_TOL);
    let qhat_verdict = qhat_red.is_hurwitz()?;
    let qhat_ghat_yv = cross_channel_parameter(khat, rect)?;
    let (qgv_red, _) = qhat_ghat_yv.minimal_reduce(DEFAULT_RANK_TOL);
    let qgv_verdict = qgv_red.is_hurwitz()?;
    if !qhat_verdict.is_hurwitz || !qgv_verdict.is_hurwitz {
        return Err(Error::NumericalDegeneracy(format!(
            "internal loop left unstable free parameters (abscissas {:.3e}, {:.3e})",
            qhat_verdict.spectral_abscissa, qgv_verdict.spectral_abscissa
        )));
    }

    // Q = (Qhat P - Qhat Ghat_yv Pbar) T at sampled frequencies
    let q = plant.g_yu().feedback(&k)?;
    let p_gain = Realization::static_gain(rect.coords.p_sel.clone());
    let pbar_gain = Realization::static_gain(rect.coords.pbar_sel.clone());
    let lhs = qhat.series(&p_gain)?;
    let rhs_term = qhat_ghat_yv.series(&pbar_gain)?;
    let q_expected = lhs.parallel_sum(&rhs_term, Sign::Minus)?.series(&t_gain)?;
    let points = sample_points(&[&q, &q_expected], 32)?;
    let q_identity_residual = freq_agreement(&q, &q_expected, &points);
    if !q_identity_residual.is_finite() || q_identity_residual >= 1e-8 {
        return Err(Error::NumericalDegeneracy(format!(
            "free-parameter identity failed ({q_identity_residual:.3e} at sampled frequencies)"
        )));
    }

    Ok(RetrofitController {
        khat: khat.clone(),
        rect: rect.clone(),
        k,
        qhat,
        q,
        kg_yv_residual: kg_yv.residual,
        qhat_abscissa: qhat_verdict.spectral_abscissa,
        qhat_ghat_yv_abscissa: qgv_verdict.spectral_abscissa,
        q_identity_residual,
    })
}

/// Full synthesis pipeline: geometric analysis, internal stabilizer,
/// assembly.
pub fn synthesize(plant: &Plant, tol: f64, margin: f64) -> Result<RetrofitController> {
    let rect = rectify(plant, tol)?;
    let khat = synthesize_internal(&rect.ghat_yu, margin)?;
    assemble(&khat, &rect, plant, tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coprime::DEFAULT_MARGIN;
    use crate::fixtures;
    use crate::rectifier::g_yu_reordered;
    use crate::statespace::closed_loop_state_matrix;
    use nalgebra::Complex;

    #[test]
    fn zero_controller_is_output_rectifying() {
        let plant = fixtures::stable4();
        let k = Realization::zero(1, 2);
        let verdict = check_output_rectifying(&k, &plant, DEFAULT_TOL).unwrap();
        assert!(verdict.pass);
        assert!(verdict.kg_yv_residual < 1e-15);
    }

    #[test]
    fn zero_controller_passes_retrofit_check() {
        let plant = fixtures::stable4();
        let k = Realization::zero(1, 2);
        let f_wv = CoprimeFactors::doubly_coprime(&plant.g_wv(), DEFAULT_MARGIN).unwrap();
        let verdict = check_retrofit(&k, &plant, &f_wv, DEFAULT_TOL, 20, 3).unwrap();
        assert!(verdict.overall);
        assert!(verdict.constraint_residual < 1e-15);
        assert!(verdict.mwv_invariance_residual < 1e-12);
        assert!(verdict.sweep_counterexample.is_none());
    }

    #[test]
    fn gtilde_reduces_to_gyu_for_trivial_factors() {
        let plant = fixtures::stable4();
        let trivial = CoprimeFactors::trivial(&plant.g_wv()).unwrap();
        let gtilde = build_gtilde_yu(&plant, &trivial).unwrap();
        let g_yu = plant.g_yu();
        let pts = sample_points(&[&gtilde, &g_yu], 16).unwrap();
        assert!(freq_agreement(&gtilde, &g_yu, &pts) < 1e-12);
    }

    #[test]
    fn gtilde_reduces_to_gyu_without_interconnection_output_coupling() {
        // a zero interconnection output map makes G_wu = 0, so the
        // correction term vanishes identically while G_yu stays nontrivial
        let base = fixtures::stable4();
        let plant = crate::geometry::Plant::new(
            base.a().clone(),
            base.l().clone(),
            base.b().clone(),
            DMatrix::zeros(1, 4),
            base.c().clone(),
        )
        .unwrap();
        let f_wv = CoprimeFactors::doubly_coprime(&plant.g_wv(), DEFAULT_MARGIN).unwrap();
        let gtilde = build_gtilde_yu(&plant, &f_wv).unwrap();
        let g_yu = plant.g_yu();
        let pts = sample_points(&[&gtilde, &g_yu], 16).unwrap();
        assert!(freq_agreement(&gtilde, &g_yu, &pts) < 1e-12);
    }

    #[test]
    fn gtilde_differs_for_nontrivial_factors() {
        let plant = fixtures::unstable4();
        let f_wv = CoprimeFactors::doubly_coprime(&plant.g_wv(), DEFAULT_MARGIN).unwrap();
        let gtilde = build_gtilde_yu(&plant, &f_wv).unwrap();
        let g_yu = plant.g_yu();
        let s = Complex::new(1.0, 0.0);
        let diff = (gtilde.freq_eval(s).unwrap() - g_yu.freq_eval(s).unwrap()).norm();
        assert!(diff > 1e-6, "expected a genuine correction, got {diff:.3e}");
    }

    #[test]
    fn internal_stabilizer_for_scalar_unstable_model() {
        // design model 1/(s - 1)
        let g = Realization::new(
            DMatrix::from_element(1, 1, 1.0),
            DMatrix::from_element(1, 1, 1.0),
            DMatrix::from_element(1, 1, 1.0),
            DMatrix::zeros(1, 1),
        )
        .unwrap();
        let khat = synthesize_internal(&g, DEFAULT_MARGIN).unwrap();
        let a_cl = closed_loop_state_matrix(&g, &khat).unwrap();
        let eigs = crate::linalg::eigenvalues(&a_cl).unwrap();
        let abscissa = crate::linalg::spectral_abscissa(&eigs);
        assert!(abscissa < -DEFAULT_MARGIN + 1e-9, "abscissa {abscissa}");
        // the free parameter is stable
        let qhat = g.feedback(&khat).unwrap();
        let (q_red, _) = qhat.minimal_reduce(DEFAULT_RANK_TOL);
        assert!(q_red.is_hurwitz().unwrap().is_hurwitz);
    }

    #[test]
    fn end_to_end_on_stable_plant() {
        let plant = fixtures::stable4();
        let ctrl = synthesize(&plant, DEFAULT_TOL, DEFAULT_MARGIN).unwrap();
        assert!(ctrl.kg_yv_residual < 1e-7);
        assert!(ctrl.qhat_abscissa < 0.0);
        assert!(ctrl.qhat_ghat_yv_abscissa < 0.0);
        assert!(ctrl.q_identity_residual < 1e-8);

        let rectifying = check_output_rectifying(&ctrl.k, &plant, DEFAULT_TOL).unwrap();
        assert!(rectifying.pass);

        let f_wv = CoprimeFactors::doubly_coprime(&plant.g_wv(), DEFAULT_MARGIN).unwrap();
        let verdict = check_retrofit(&ctrl.k, &plant, &f_wv, 1e-7, 40, 7).unwrap();
        assert!(verdict.overall, "residual {:.3e}, worst {:.3e}", verdict.constraint_residual, verdict.worst_abscissa());
        assert!(verdict.mwv_invariance_residual < 1e-7);
    }

    #[test]
    fn end_to_end_on_unstable_plant() {
        let plant = fixtures::unstable4();
        let ctrl = synthesize(&plant, DEFAULT_TOL, DEFAULT_MARGIN).unwrap();
        assert!(ctrl.kg_yv_residual < 1e-7);

        let rectifying = check_output_rectifying(&ctrl.k, &plant, DEFAULT_TOL).unwrap();
        assert!(rectifying.pass, "Q abscissa {:.3e}", rectifying.q_stability.spectral_abscissa);

        let f_wv = CoprimeFactors::doubly_coprime(&plant.g_wv(), DEFAULT_MARGIN).unwrap();
        let verdict = check_retrofit(&ctrl.k, &plant, &f_wv, 1e-7, 40, 11).unwrap();
        assert!(verdict.overall, "residual {:.3e}, worst {:.3e}", verdict.constraint_residual, verdict.worst_abscissa());
        assert!(verdict.mwv_invariance_residual < 1e-7);
    }

    #[test]
    fn q_equals_qtilde_for_trivial_factors() {
        // with a stable interconnection channel and trivial factors, the
        // modified channel is the plain one and the two free parameters
        // coincide
        let plant = fixtures::stable4();
        let ctrl = synthesize(&plant, DEFAULT_TOL, DEFAULT_MARGIN).unwrap();
        let trivial = CoprimeFactors::trivial(&plant.g_wv()).unwrap();
        let gtilde = build_gtilde_yu(&plant, &trivial).unwrap();
        let qtilde = gtilde.feedback(&ctrl.k).unwrap();
        let pts = sample_points(&[&qtilde, &ctrl.q], 16).unwrap();
        assert!(freq_agreement(&qtilde, &ctrl.q, &pts) < 1e-9);
    }

    #[test]
    fn monte_carlo_verdict_is_deterministic_across_runs() {
        // trials fan out to worker threads; results must merge by trial
        // index regardless of scheduling
        let plant = fixtures::stable4();
        let k = Realization::zero(1, 2);
        let f_wv = CoprimeFactors::doubly_coprime(&plant.g_wv(), DEFAULT_MARGIN).unwrap();
        let v1 = check_retrofit(&k, &plant, &f_wv, DEFAULT_TOL, 24, 9).unwrap();
        let v2 = check_retrofit(&k, &plant, &f_wv, DEFAULT_TOL, 24, 9).unwrap();
        assert_eq!(v1.monte_carlo, v2.monte_carlo);
        assert_eq!(v1.constraint_residual, v2.constraint_residual);
    }

    #[test]
    fn naive_controller_fails_with_counterexample() {
        let plant = fixtures::cex2();
        let k = fixtures::cex2_naive_controller();
        let f_wv = CoprimeFactors::doubly_coprime(&plant.g_wv(), DEFAULT_MARGIN).unwrap();
        let verdict = check_retrofit(&k, &plant, &f_wv, DEFAULT_TOL, 20, 5).unwrap();
        assert!(!verdict.overall);
        assert!(
            verdict.constraint_residual > 1e-2,
            "constraint residual {:.3e}",
            verdict.constraint_residual
        );
        let hit = verdict.sweep_counterexample.expect("sweep must find a counterexample");
        assert!(hit.abscissa > 0.0);
        // the recorded fixture gain lies in the destabilizing region found
        let mut d = DMatrix::zeros(1, 1);
        d[(0, 0)] = fixtures::cex2_counterexample_gain();
        let env = Realization::static_gain(d);
        let cl = close_loop(&plant, &env, &k).unwrap();
        assert!(cl.realization.is_hurwitz().unwrap().spectral_abscissa > 0.0);
        // definitional check also fails
        let rectifying = check_output_rectifying(&k, &plant, DEFAULT_TOL).unwrap();
        assert!(!rectifying.pass);
        assert!(rectifying.kg_yv_residual > 1e-2);
    }

    #[test]
    fn zero_internal_controller_assembles_to_zero() {
        let plant = fixtures::stable4();
        let rect = rectify(&plant, 1e-9).unwrap();
        let khat = Realization::zero(1, 1);
        let ctrl = assemble(&khat, &rect, &plant, DEFAULT_TOL).unwrap();
        assert!(ctrl.k.is_zero_system(1e-12).unwrap().is_zero);
        let verdict = check_output_rectifying(&ctrl.k, &plant, DEFAULT_TOL).unwrap();
        assert!(verdict.pass);
    }

    #[test]
    fn prop_style_internal_loops_over_random_models() {
        let mut done = 0;
        let mut seed = 0u64;
        while done < 12 {
            seed += 1;
            let plant = fixtures::random_assumption3_plant(seed);
            let Ok(rect) = rectify(&plant, 1e-9) else {
                continue;
            };
            let Ok(khat) = synthesize_internal(&rect.ghat_yu, DEFAULT_MARGIN) else {
                continue;
            };
            let qhat = rect.ghat_yu.feedback(&khat).unwrap();
            let (q_red, _) = qhat.minimal_reduce(DEFAULT_RANK_TOL);
            assert!(
                q_red.is_hurwitz().unwrap().spectral_abscissa < -1e-6,
                "seed {seed}"
            );
            let qgv = cross_channel_parameter(&khat, &rect).unwrap();
            let (qgv_red, _) = qgv.minimal_reduce(DEFAULT_RANK_TOL);
            assert!(
                qgv_red.is_hurwitz().unwrap().spectral_abscissa < -1e-6,
                "seed {seed}"
            );
            // the loop-form realization carries the same transfer as the
            // plain composition
            let series_form = qhat.series(&rect.ghat_yv).unwrap();
            let pts = sample_points(&[&qgv, &series_form], 16).unwrap();
            assert!(
                freq_agreement(&qgv, &series_form, &pts) < 1e-8,
                "seed {seed}: loop-form transfer mismatch"
            );
            done += 1;
        }
    }

    #[test]
    fn assembled_k_matches_pointwise_product() {
        let plant = fixtures::unstable4();
        let ctrl = synthesize(&plant, DEFAULT_TOL, DEFAULT_MARGIN).unwrap();
        let g_yu_t = g_yu_reordered(&plant, &ctrl.rect.profile);
        let pts = sample_points(&[&ctrl.k, &ctrl.khat, &ctrl.rect.xi, &g_yu_t], 16).unwrap();
        let t = crate::linalg::to_complex(&ctrl.rect.profile.t);
        for s in pts {
            let k_s = ctrl.k.freq_eval(s).unwrap();
            let prod = ctrl.khat.freq_eval(s).unwrap() * ctrl.rect.xi.freq_eval(s).unwrap() * &t;
            assert!((&k_s - &prod).norm() < 1e-9 * prod.norm().max(1.0));
        }
    }
}
