//! Oracle-vs-closed-form sweep.

use common_entropy::oracle::g_oracle_grid;
use common_entropy::prob::{sbes, JointPmf};
use common_entropy::solver::g_closed_form_2x2;
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use std::time::Instant;

fn unit(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

fn main() {
    let t = Instant::now();
    let s = sbes(0.9).unwrap();
    let rep = g_oracle_grid(&s, 64).unwrap();
    println!(
        "oracle sbes(0.9): {:.9} (closed 0.568995594) families={} {:?}",
        rep.upper_bits,
        rep.families_scanned,
        t.elapsed()
    );

    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst = 0.0f64;
    let t = Instant::now();
    let n = 200;
    for i in 0..n {
        let m: Vec<Vec<f64>> = (0..2)
            .map(|_| (0..2).map(|_| unit(&mut rng).max(1e-3)).collect())
            .collect();
        let j = JointPmf::validate_normalizing(
            m,
            vec!["0".into(), "1".into()],
            vec!["0".into(), "1".into()],
        )
        .unwrap()
        .pmf;
        let closed = g_closed_form_2x2(&j).unwrap();
        let oracle = g_oracle_grid(&j, 64).unwrap();
        let gap = (oracle.upper_bits - closed.g_bits).abs();
        if gap > worst {
            worst = gap;
            println!(
                "  i={i} gap={gap:.3e} closed={:.9} oracle={:.9}",
                closed.g_bits, oracle.upper_bits
            );
        }
    }
    println!(
        "oracle vs closed 2x2 x{n}: worst gap = {worst:.3e}, {:?}",
        t.elapsed()
    );
}
