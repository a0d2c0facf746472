//! One fine Brownian lattice per trajectory, coarsened to every grid size.
//!
//! cargo run --example noise_coupling

use relaxsim::{generate_lattice, uniform_stream, ActionUniforms, BrownianLattice};

fn main() -> relaxsim::Result<()> {
    let (seed, index) = (20_240_601, 3);
    let lattice = generate_lattice(seed, index, 1000, 5.0, 1)?;

    println!("W(t) at shared nodes, from three coarsenings of the same lattice:");
    let paths: Vec<Vec<f64>> = [50, 100, 1000]
        .iter()
        .map(|&n| lattice.coarsen(n).map(|inc| inc.path()))
        .collect::<relaxsim::Result<_>>()?;
    for j in 0..=5 {
        let t = j as f64;
        println!(
            "  t={t}  N=50: {:+.12}  N=100: {:+.12}  N=1000: {:+.12}",
            paths[0][10 * j],
            paths[1][20 * j],
            paths[2][200 * j]
        );
    }

    let uniforms = ActionUniforms::generate(seed, index, 5, 1);
    println!("\naction uniforms, bulk vs random access:");
    for m in 0..5 {
        println!(
            "  step {m}: {:.15} {:.15}",
            uniforms.step(m)[0],
            uniform_stream(seed, index, m as u64)
        );
    }

    let mut bytes = Vec::new();
    lattice.write_to(&mut bytes)?;
    let back = BrownianLattice::read_from(bytes.as_slice())?;
    println!(
        "\ndump: {} bytes, round trip identical: {}",
        bytes.len(),
        back == lattice
    );
    Ok(())
}
