//! Sampling admissible environments: every environment that keeps the
//! controller-free interconnection stable is indexed by a stable free
//! parameter of the interconnection channel.
//!
//! ```bash
//! cargo run -p retrofit-control --example environment_sampling
//! ```

use retrofit_control::coprime::{CoprimeFactors, DEFAULT_MARGIN};
use retrofit_control::fixtures;
use retrofit_control::sim::close_loop;
use retrofit_control::statespace::Realization;

fn main() {
    let plant = fixtures::unstable4();
    println!(
        "plant: {} states, interconnection abscissa {:.3} (unstable on its own)",
        plant.n(),
        plant
            .g_wv()
            .is_hurwitz()
            .unwrap()
            .spectral_abscissa
    );

    let factors = CoprimeFactors::doubly_coprime(&plant.g_wv(), DEFAULT_MARGIN).unwrap();
    let k_off = Realization::zero(plant.u_dim(), plant.y_dim());

    println!("sampled environments (controller disconnected):");
    for seed in 0..8u64 {
        let order = (seed % 5) as usize;
        let env = factors.sample_environment(order, seed).unwrap();
        let cl = close_loop(&plant, &env.gbar, &k_off).unwrap();
        let verdict = cl.realization.is_hurwitz().unwrap();
        println!(
            "  seed {seed}: parameter order {order}, environment order {:>2}, \
             closed-loop abscissa {:.4}",
            env.gbar.state_dim(),
            verdict.spectral_abscissa
        );
    }

    // the loop transfer between the interconnection signals stays stable
    let env = factors.sample_environment(3, 42).unwrap();
    let m = factors.mfrak(&env.qbar).unwrap();
    let (m_red, _) = m.minimal_reduce(retrofit_control::statespace::DEFAULT_RANK_TOL);
    println!(
        "interconnection-loop transfer for seed 42: order {} after reduction, abscissa {:.4}",
        m_red.state_dim(),
        m_red.is_hurwitz().unwrap().spectral_abscissa
    );
}
