//! Scratch harness for solver quality/runtime measurements.

use common_entropy::prob::{sbes, JointPmf};
use common_entropy::solver::{g_closed_form_2x2, g_general, SolveConfig};
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use std::time::Instant;

fn unit(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

fn main() {
    let which = std::env::args().nth(1).unwrap_or_else(|| "all".into());

    if which == "two_letter" || which == "all" {
        let j = JointPmf::from_matrix(vec![
            vec![1.0 / 3.0, 1.0 / 3.0],
            vec![1.0 / 3.0, 0.0],
        ])
        .unwrap();
        let p2 = j.product_source(2).unwrap();
        let t = Instant::now();
        let rep = g_general(&p2, &SolveConfig::default()).unwrap();
        println!(
            "two-letter: g2 = {:.9} (target 1.752715279), {:?}, restarts ok: {}",
            rep.g_bits,
            t.elapsed(),
            rep.per_restart.iter().flatten().count()
        );
        let mut hs: Vec<f64> = rep.per_restart.iter().flatten().cloned().collect();
        hs.sort_by(f64::total_cmp);
        println!("  best restart values: {:?}", &hs[..hs.len().min(8)]);
    }

    if which == "sbes2" || which == "all" {
        let s = sbes(0.9).unwrap();
        let p2 = s.product_source(2).unwrap();
        let t = Instant::now();
        let rep = g_general(&p2, &SolveConfig::default()).unwrap();
        println!(
            "sbes(0.9)^2: g2 = {:.9} (2*G = 1.137991187, J-limit 0.937991), {:?}",
            rep.g_bits,
            t.elapsed()
        );
    }

    if which == "random2x2" || which == "all" {
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
            let gen = g_general(&j, &SolveConfig::default()).unwrap();
            let gap = (gen.g_bits - closed.g_bits).abs();
            if gap > worst {
                worst = gap;
                println!("  i={i} gap={gap:.3e} closed={:.9} gen={:.9}", closed.g_bits, gen.g_bits);
            }
        }
        println!("random 2x2 x{n}: worst |gen-closed| = {worst:.3e}, {:?}", t.elapsed());
    }
}
