//! Acceptance suite: one test per criterion, each printing a pass/fail
//! line (visible with `cargo test --test acceptance -- --nocapture`).

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use retrofit_control::coprime::{CoprimeFactors, DEFAULT_MARGIN};
use retrofit_control::error::Error;
use retrofit_control::fixtures;
use retrofit_control::geometry::Plant;
use retrofit_control::rectifier::{g_yv_reordered, rectify, RectifiedModel};
use retrofit_control::retrofit::{
    build_gtilde_yu, check_output_rectifying, check_retrofit, cross_channel_parameter, synthesize,
    synthesize_internal,
};
use retrofit_control::sim::{close_loop, matrix_exponential, simulate, InputSignal};
use retrofit_control::statespace::{
    freq_agreement, sample_points, Realization, DEFAULT_RANK_TOL,
};

/// First 50 seeds whose generated plant passes the full geometric pipeline.
fn fifty_rectified_plants() -> Vec<(u64, Plant, RectifiedModel)> {
    let mut out = Vec::new();
    let mut seed = 0u64;
    while out.len() < 50 {
        let plant = fixtures::random_assumption3_plant(seed);
        if plant.n() <= 8 {
            if let Ok(model) = rectify(&plant, 1e-9) {
                out.push((seed, plant, model));
            }
        }
        seed += 1;
        assert!(seed < 500, "plant generator starved");
    }
    out
}

#[test]
fn criterion_1_bezout_suite() {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for seed in 0..100u64 {
        let g = fixtures::random_stabilizable_system(seed, 10);
        let factors = CoprimeFactors::doubly_coprime(&g, DEFAULT_MARGIN)
            .unwrap_or_else(|e| panic!("seed {seed}: {e}"));
        let residual = factors.verify_bezout().unwrap();
        worst = worst.max(residual);
        assert!(residual < 1e-8, "seed {seed}: residual {residual:.3e}");
        for fac in [
            &factors.n_r, &factors.m_r, &factors.u_r, &factors.v_r, &factors.n_l, &factors.m_l,
            &factors.u_l, &factors.v_l,
        ] {
            assert!(fac.is_hurwitz().unwrap().is_hurwitz, "seed {seed}");
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    assert!(elapsed < 10.0, "runtime {elapsed:.1} s exceeds 10 s");
    println!(
        "criterion 1 (Bezout suite): PASS — 100 systems, worst residual {worst:.3e}, {elapsed:.2} s"
    );
}

#[test]
fn criterion_2_annihilation_suite() {
    let mut worst_zero: f64 = 0.0;
    let mut worst_pointwise: f64 = 0.0;
    for (seed, plant, model) in fifty_rectified_plants() {
        // zero test on the annihilated channel
        let g_yv = g_yv_reordered(&plant, &model.profile);
        let chain = model.xi.series(&g_yv).unwrap();
        let check = chain.is_zero_system(1e-8).unwrap();
        assert!(check.is_zero, "seed {seed}: residual {:.3e}", check.residual);
        worst_zero = worst_zero.max(check.residual);

        // pointwise identity Xi(s) = P (I - G_yv(s) G_yv^+(s)) at 32 points
        let p = plant.y_dim();
        let candidates = sample_points(&[&g_yv, &model.xi], 40).unwrap();
        let p_c = model.coords.p_sel.map(|x| nalgebra::Complex::new(x, 0.0));
        let eye = DMatrix::<nalgebra::Complex<f64>>::identity(p, p);
        let mut checked = 0;
        for &s in &candidates {
            if checked >= 32 {
                break;
            }
            let Ok(linv) = model.left_inverse_eval(&plant, s) else {
                continue;
            };
            let g_s = g_yv.freq_eval(s).unwrap();
            let xi_s = model.xi.freq_eval(s).unwrap();
            let expected = &p_c * (&eye - &g_s * &linv);
            let rel = (&xi_s - &expected).norm() / expected.norm().max(1.0);
            assert!(rel < 1e-8, "seed {seed} at {s}: deviation {rel:.3e}");
            worst_pointwise = worst_pointwise.max(rel);
            checked += 1;
        }
        assert!(checked >= 32, "seed {seed}: only {checked} regular points");
    }
    println!(
        "criterion 2 (annihilation suite): PASS — 50 plants, worst zero-test {worst_zero:.3e}, \
         worst pointwise {worst_pointwise:.3e}"
    );
}

#[test]
fn criterion_3_design_model_two_paths() {
    let mut worst: f64 = 0.0;
    for (seed, _, model) in fifty_rectified_plants() {
        assert!(
            model.ghat_yu_agreement < 1e-8,
            "seed {seed}: {:.3e}",
            model.ghat_yu_agreement
        );
        worst = worst.max(model.ghat_yu_agreement);
    }
    println!(
        "criterion 3 (design-model two-path agreement): PASS — 50 plants, worst {worst:.3e}"
    );
}

#[test]
fn criterion_4_end_to_end_with_monte_carlo() {
    let start = Instant::now();
    let mut lines = Vec::new();
    for (name, plant) in [("stable", fixtures::stable4()), ("unstable", fixtures::unstable4())] {
        let ctrl = synthesize(&plant, 1e-8, DEFAULT_MARGIN).unwrap();
        let rectifying = check_output_rectifying(&ctrl.k, &plant, 1e-7).unwrap();
        assert!(
            rectifying.pass && rectifying.kg_yv_residual < 1e-7,
            "{name}: residual {:.3e}",
            rectifying.kg_yv_residual
        );
        let f_wv = CoprimeFactors::doubly_coprime(&plant.g_wv(), DEFAULT_MARGIN).unwrap();
        let verdict = check_retrofit(&ctrl.k, &plant, &f_wv, 1e-7, 200, 7).unwrap();
        assert!(verdict.overall, "{name}: verdict failed");
        assert_eq!(verdict.monte_carlo.len(), 200);
        let worst = verdict.worst_abscissa();
        assert!(worst < 0.0, "{name}: worst abscissa {worst:.3e}");
        lines.push(format!("{name} worst abscissa {worst:.3e}"));
    }
    let elapsed = start.elapsed().as_secs_f64();
    assert!(elapsed < 60.0, "runtime {elapsed:.1} s exceeds 60 s");
    println!(
        "criterion 4 (end-to-end with 200-trial Monte Carlo): PASS — {}, {elapsed:.2} s",
        lines.join("; ")
    );
}

#[test]
fn criterion_5_interconnection_invariance() {
    let mut worst: f64 = 0.0;
    for (name, plant) in [("stable", fixtures::stable4()), ("unstable", fixtures::unstable4())] {
        let ctrl = synthesize(&plant, 1e-8, DEFAULT_MARGIN).unwrap();
        let f_wv = CoprimeFactors::doubly_coprime(&plant.g_wv(), DEFAULT_MARGIN).unwrap();
        let verdict = check_retrofit(&ctrl.k, &plant, &f_wv, 1e-7, 0, 7).unwrap();
        assert!(
            verdict.mwv_invariance_residual < 1e-7,
            "{name}: invariance residual {:.3e}",
            verdict.mwv_invariance_residual
        );
        worst = worst.max(verdict.mwv_invariance_residual);
    }
    println!(
        "criterion 5 (interconnection invariance): PASS — worst residual {worst:.3e}"
    );
}

#[test]
fn criterion_6_internal_stabilizer_suite() {
    let mut done = 0;
    let mut seed = 0u64;
    let mut worst: f64 = f64::NEG_INFINITY;
    while done < 50 {
        seed += 1;
        assert!(seed < 500, "model generator starved");
        let plant = fixtures::random_assumption3_plant(seed);
        let Ok(rect) = rectify(&plant, 1e-9) else {
            continue;
        };
        let khat = match synthesize_internal(&rect.ghat_yu, DEFAULT_MARGIN) {
            Ok(k) => k,
            Err(Error::Unstabilizable(_)) | Err(Error::Undetectable(_)) => continue,
            Err(e) => panic!("seed {seed}: {e}"),
        };
        let qhat = rect.ghat_yu.feedback(&khat).unwrap();
        let (q_red, _) = qhat.minimal_reduce(DEFAULT_RANK_TOL);
        let a1 = q_red.is_hurwitz().unwrap().spectral_abscissa;
        assert!(a1 < -1e-6, "seed {seed}: qhat abscissa {a1:.3e}");
        let qgv = cross_channel_parameter(&khat, &rect).unwrap();
        let (qgv_red, _) = qgv.minimal_reduce(DEFAULT_RANK_TOL);
        let a2 = qgv_red.is_hurwitz().unwrap().spectral_abscissa;
        assert!(a2 < -1e-6, "seed {seed}: cross-loop abscissa {a2:.3e}");
        worst = worst.max(a1).max(a2);
        done += 1;
    }
    println!(
        "criterion 6 (internal stabilizer suite): PASS — 50 models, worst abscissa {worst:.3e}"
    );
}

#[test]
fn criterion_7_negative_control() {
    let plant = fixtures::cex2();
    let k = fixtures::cex2_naive_controller();
    let f_wv = CoprimeFactors::doubly_coprime(&plant.g_wv(), DEFAULT_MARGIN).unwrap();
    let verdict = check_retrofit(&k, &plant, &f_wv, 1e-8, 50, 5).unwrap();
    assert!(!verdict.overall);
    assert!(
        verdict.constraint_residual > 1e-2,
        "constraint residual {:.3e}",
        verdict.constraint_residual
    );
    let hit = verdict
        .sweep_counterexample
        .expect("gain sweep must find a destabilizing environment");
    assert!(hit.abscissa > 0.0);

    // brute-force oracle, directly on the plant matrices: environment
    // v = g w and controller u = k0 y give A + g L Gamma + k0 B C
    let k0 = k.d()[(0, 0)];
    let mut oracle_hit = None;
    let mut g = -10.0_f64;
    while g <= 10.0 {
        let a_env = plant.a() + g * plant.l() * plant.gamma();
        let env_ok = a_env.complex_eigenvalues().iter().all(|e| e.re < 0.0);
        if env_ok {
            let a_cl = &a_env + k0 * plant.b() * plant.c();
            let abscissa = a_cl
                .complex_eigenvalues()
                .iter()
                .map(|e| e.re)
                .fold(f64::NEG_INFINITY, f64::max);
            if abscissa > 0.0 {
                oracle_hit = Some((g, abscissa));
                break;
            }
        }
        g += 0.01;
    }
    let (oracle_gain, oracle_abscissa) = oracle_hit.expect("oracle sweep must find instability");
    // the recorded fixture gain lies in the region the oracle found
    let frozen = fixtures::cex2_counterexample_gain();
    let a_frozen = plant.a()
        + frozen * plant.l() * plant.gamma()
        + k0 * plant.b() * plant.c();
    let frozen_abscissa = a_frozen
        .complex_eigenvalues()
        .iter()
        .map(|e| e.re)
        .fold(f64::NEG_INFINITY, f64::max);
    assert!(frozen_abscissa > 0.0);
    println!(
        "criterion 7 (negative control): PASS — constraint residual {:.3e}, sweep gain {:.2} \
         (abscissa {:.3e}), oracle gain {oracle_gain:.2} (abscissa {oracle_abscissa:.3e})",
        verdict.constraint_residual, hit.gain, hit.abscissa
    );
}

#[test]
fn criterion_8_integrator_exactness() {
    let plant = fixtures::stable4();
    let env = Realization::static_gain(DMatrix::zeros(1, 1));
    let k = Realization::zero(1, 2);
    let cl = close_loop(&plant, &env, &k).unwrap();
    assert_eq!(cl.realization.state_dim(), 4);
    let x0 = DVector::from_column_slice(&[1.0, -0.5, 0.25, 0.75]);
    let reference = matrix_exponential(cl.realization.a(), 1.0) * &x0;

    let fine = simulate(&cl, &x0, &InputSignal::Zero, 1e-3, 1.0).unwrap();
    let err_fine = (fine.states.last().unwrap() - &reference).norm();
    assert!(err_fine < 1e-6, "endpoint error {err_fine:.3e}");

    let coarse = simulate(&cl, &x0, &InputSignal::Zero, 2e-3, 1.0).unwrap();
    let err_coarse = (coarse.states.last().unwrap() - &reference).norm();
    let ratio = err_coarse / err_fine;
    assert!(
        (12.0..=20.0).contains(&ratio),
        "halving ratio {ratio:.2} outside [12, 20]"
    );
    println!(
        "criterion 8 (integrator exactness): PASS — endpoint error {err_fine:.3e}, \
         halving ratio {ratio:.2}"
    );
}

#[test]
fn criterion_9_stable_subsystem_degeneration() {
    let plant = fixtures::stable4();
    let ctrl = synthesize(&plant, 1e-8, DEFAULT_MARGIN).unwrap();
    let trivial = CoprimeFactors::trivial(&plant.g_wv()).unwrap();
    let gtilde = build_gtilde_yu(&plant, &trivial).unwrap();
    let qtilde = gtilde.feedback(&ctrl.k).unwrap();
    let points = sample_points(&[&qtilde, &ctrl.q], 32).unwrap();
    let agreement = freq_agreement(&qtilde, &ctrl.q, &points);
    assert!(agreement < 1e-9, "agreement {agreement:.3e}");
    println!(
        "criterion 9 (stable-subsystem degeneration): PASS — free parameters agree to {agreement:.3e}"
    );
}
