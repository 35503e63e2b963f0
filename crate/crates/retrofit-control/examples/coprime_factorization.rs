//! Doubly coprime factorization of an unstable system and the
//! parameterization of its stabilizing controllers.
//!
//! ```bash
//! cargo run -p retrofit-control --example coprime_factorization
//! ```

use nalgebra::{Complex, DMatrix};
use retrofit_control::coprime::{CoprimeFactors, DEFAULT_MARGIN};
use retrofit_control::statespace::{closed_loop_state_matrix, Realization};

fn main() {
    // unstable scalar subject 1/(s - 1)
    let g = Realization::new(
        DMatrix::from_element(1, 1, 1.0),
        DMatrix::from_element(1, 1, 1.0),
        DMatrix::from_element(1, 1, 1.0),
        DMatrix::zeros(1, 1),
    )
    .unwrap();

    let factors = CoprimeFactors::doubly_coprime(&g, DEFAULT_MARGIN).unwrap();
    println!("factored 1/(s-1):");
    println!("  state feedback gain  F = {:.4}", factors.f[(0, 0)]);
    println!("  output injection     H = {:.4}", factors.h[(0, 0)]);
    println!("  Bezout residual over 32 frequencies: {:.3e}", factors.verify_bezout().unwrap());

    // the denominator factor carries the unstable pole as a zero
    let m_r_at_pole = factors.m_r.freq_eval(Complex::new(1.0, 0.0)).unwrap()[(0, 0)];
    println!("  M_r evaluated at the plant pole: {:.2e} (a transmission zero)", m_r_at_pole.norm());

    // every stable parameter indexes a stabilizing controller; the loop's
    // state matrix splits into the design spectra
    for (label, q) in [
        ("Q = 0 (central controller)", Realization::zero(1, 1)),
        ("Q = 3 (static)", Realization::static_gain(DMatrix::from_element(1, 1, 3.0))),
        (
            "Q = 1/(s+2)",
            Realization::new(
                DMatrix::from_element(1, 1, -2.0),
                DMatrix::from_element(1, 1, 1.0),
                DMatrix::from_element(1, 1, 1.0),
                DMatrix::zeros(1, 1),
            )
            .unwrap(),
        ),
    ] {
        let k = factors.youla_controller(&q).unwrap();
        let a_cl = closed_loop_state_matrix(&g, &k).unwrap();
        let abscissa = a_cl
            .complex_eigenvalues()
            .iter()
            .map(|e| e.re)
            .fold(f64::NEG_INFINITY, f64::max);
        println!("  {label}: controller order {}, closed-loop abscissa {:.4}", k.state_dim(), abscissa);
    }
}
