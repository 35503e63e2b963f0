//! End-to-end retrofit controller synthesis on the stable and unstable
//! reference plants.
//!
//! ```bash
//! cargo run -p retrofit-control --example retrofit_synthesis
//! ```

use retrofit_control::coprime::DEFAULT_MARGIN;
use retrofit_control::fixtures;
use retrofit_control::retrofit::{check_output_rectifying, synthesize, DEFAULT_TOL};

fn main() {
    for (name, plant) in [
        ("stable reference plant", fixtures::stable4()),
        ("unstable reference plant", fixtures::unstable4()),
    ] {
        println!("{name}:");
        let ctrl = synthesize(&plant, DEFAULT_TOL, DEFAULT_MARGIN).unwrap();
        println!("  internal controller: {} states", ctrl.khat.state_dim());
        println!("  assembled controller: {} states", ctrl.k.state_dim());
        println!("  measurement annihilation residual: {:.3e}", ctrl.kg_yv_residual);
        println!("  internal free parameter abscissa:  {:.4}", ctrl.qhat_abscissa);
        println!("  cross-channel loop abscissa:       {:.4}", ctrl.qhat_ghat_yv_abscissa);
        println!("  free-parameter identity residual:  {:.3e}", ctrl.q_identity_residual);

        let verdict = check_output_rectifying(&ctrl.k, &plant, DEFAULT_TOL).unwrap();
        println!(
            "  definitional check: {} (residual {:.3e}, free parameter abscissa {:.4})",
            if verdict.pass { "pass" } else { "fail" },
            verdict.kg_yv_residual,
            verdict.q_stability.spectral_abscissa
        );
        println!();
    }
}
