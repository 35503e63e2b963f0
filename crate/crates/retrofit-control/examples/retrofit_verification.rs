//! Verifying retrofit controllers: the algebraic constraint, the
//! invariance of the interconnection channel, Monte Carlo stability over
//! sampled environments, and a negative control where a naive stabilizer
//! is caught by an explicit counterexample environment.
//!
//! ```bash
//! cargo run -p retrofit-control --example retrofit_verification
//! ```

use retrofit_control::coprime::{CoprimeFactors, DEFAULT_MARGIN};
use retrofit_control::fixtures;
use retrofit_control::retrofit::{check_retrofit, synthesize, DEFAULT_TOL};

fn main() {
    // a synthesized controller passes with margin
    let plant = fixtures::unstable4();
    let ctrl = synthesize(&plant, DEFAULT_TOL, DEFAULT_MARGIN).unwrap();
    let f_wv = CoprimeFactors::doubly_coprime(&plant.g_wv(), DEFAULT_MARGIN).unwrap();
    let verdict = check_retrofit(&ctrl.k, &plant, &f_wv, 1e-7, 100, 7).unwrap();
    println!("synthesized controller on the unstable reference plant:");
    println!("  constraint residual:      {:.3e}", verdict.constraint_residual);
    println!("  modified parameter:       abscissa {:.4}", verdict.qtilde_stable.spectral_abscissa);
    println!("  invariance residual:      {:.3e}", verdict.mwv_invariance_residual);
    println!(
        "  Monte Carlo:              {} trials, worst abscissa {:.4}",
        verdict.monte_carlo.len(),
        verdict.worst_abscissa()
    );
    println!("  overall: {}", if verdict.overall { "PASS" } else { "FAIL" });

    // the naive stabilizer ignores the interconnection and is refuted both
    // algebraically and by an explicit destabilizing environment
    let plant = fixtures::cex2();
    let naive = fixtures::cex2_naive_controller();
    let f_wv = CoprimeFactors::doubly_coprime(&plant.g_wv(), DEFAULT_MARGIN).unwrap();
    let verdict = check_retrofit(&naive, &plant, &f_wv, DEFAULT_TOL, 50, 5).unwrap();
    println!("\nnaive output gain on the counterexample plant:");
    println!("  constraint residual: {:.3e} (violated)", verdict.constraint_residual);
    match verdict.sweep_counterexample {
        Some(hit) => println!(
            "  static environment gain {:.2} destabilizes the loop (abscissa {:.4})",
            hit.gain, hit.abscissa
        ),
        None => println!("  no static counterexample found"),
    }
    println!("  overall: {}", if verdict.overall { "PASS" } else { "FAIL" });
}
