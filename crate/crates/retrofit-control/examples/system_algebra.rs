//! Core state-space algebra: interconnection, frequency evaluation,
//! stability verdicts, and minimal reduction.
//!
//! ```bash
//! cargo run -p retrofit-control --example system_algebra
//! ```

use nalgebra::{Complex, DMatrix};
use retrofit_control::statespace::{Realization, Sign, DEFAULT_RANK_TOL};

fn first_order(pole: f64) -> Realization {
    Realization::new(
        DMatrix::from_element(1, 1, pole),
        DMatrix::from_element(1, 1, 1.0),
        DMatrix::from_element(1, 1, 1.0),
        DMatrix::zeros(1, 1),
    )
    .unwrap()
}

fn main() {
    // two lags in series: 1/(s+1) * 1/(s+2)
    let g1 = first_order(-1.0);
    let g2 = first_order(-2.0);
    let cascade = g1.series(&g2).unwrap();
    let at_zero = cascade.freq_eval(Complex::new(0.0, 0.0)).unwrap()[(0, 0)];
    println!("dc gain of 1/(s+1) * 1/(s+2): {:.3} (expected 0.5)", at_zero.re);

    // parallel sum evaluated on the imaginary axis
    let sum = g1.parallel_sum(&g2, Sign::Plus).unwrap();
    let at_j = sum.freq_eval(Complex::new(0.0, 1.0)).unwrap()[(0, 0)];
    println!("(1/(s+1) + 1/(s+2)) at s = j: {:.3} + {:.3}j", at_j.re, at_j.im);

    // a positive feedback loop picking up an integrator: (1 - G)^{-1} at
    // unit controller gain has a pole at the origin
    let unit = Realization::identity_gain(1);
    let loop_tf = g1.feedback(&unit).unwrap();
    let verdict = loop_tf.is_hurwitz().unwrap();
    println!(
        "unit feedback around 1/(s+1): spectral abscissa {:.3} (marginal integrator)",
        verdict.spectral_abscissa
    );

    // pole-zero cancellation spotted by minimal reduction
    let blocking = Realization::new(
        DMatrix::from_element(1, 1, -2.0),
        DMatrix::from_element(1, 1, 1.0),
        DMatrix::from_element(1, 1, -1.0),
        DMatrix::from_element(1, 1, 1.0),
    )
    .unwrap(); // (s+1)/(s+2)
    let chained = g1.series(&blocking).unwrap();
    let (reduced, fidelity) = chained.minimal_reduce(DEFAULT_RANK_TOL);
    println!(
        "1/(s+1) * (s+1)/(s+2): {} states reduce to {} (response deviation {:.1e})",
        chained.state_dim(),
        reduced.state_dim(),
        fidelity
    );

    // zero testing through sampled evaluations
    let diff = g1.parallel_sum(&g1, Sign::Minus).unwrap();
    let check = diff.is_zero_system(1e-9).unwrap();
    println!(
        "G - G is the zero system: {} (residual {:.1e})",
        check.is_zero, check.residual
    );
}
