//! Simulation codes: a prefix-free code for the common random variable plus
//! the two stochastic decoders, with an analytic exact-generation check and a
//! reproducible sampling harness.
//!
//! The sampler draws from a ChaCha8 stream seeded with `seed_from_u64`; each
//! sample consumes exactly three 53-bit uniforms (W, then X, then Y), so
//! sequences are bit-reproducible given `(seed, draw index)`.

use std::collections::BTreeMap;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::factorization::MarkovFactorization;
use crate::prob::{Dist, JointPmf};
use crate::solver::{solve_best, SolveConfig, SolveReport};
use crate::{Error, Result};

/// A prefix-free binary code over the W alphabet, codeword `i` for symbol `i`,
/// with the expected length under the weights it was built for.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrefixCode {
    codewords: Vec<String>,
    expected_length: f64,
}

impl PrefixCode {
    fn for_weights(codewords: Vec<String>, p_w: &Dist) -> Self {
        let expected_length = p_w
            .weights()
            .iter()
            .zip(&codewords)
            .map(|(&p, c)| p * c.len() as f64)
            .sum();
        Self {
            codewords,
            expected_length,
        }
    }

    pub fn codewords(&self) -> &[String] {
        &self.codewords
    }

    pub fn len(&self, w: usize) -> usize {
        self.codewords[w].len()
    }

    pub fn is_empty(&self) -> bool {
        self.codewords.is_empty()
    }

    /// `E[L]` in bits under the weights the code was built for.
    pub fn expected_length(&self) -> f64 {
        self.expected_length
    }

    /// `Σ 2^{-len}`; at most 1 for any prefix-free code.
    pub fn kraft_sum(&self) -> f64 {
        self.codewords
            .iter()
            .map(|c| 2f64.powi(-(c.len() as i32)))
            .sum()
    }

    /// True when no codeword is a prefix of another.
    pub fn is_prefix_free(&self) -> bool {
        for (i, a) in self.codewords.iter().enumerate() {
            for (j, b) in self.codewords.iter().enumerate() {
                if i != j && b.starts_with(a.as_str()) {
                    return false;
                }
            }
        }
        true
    }
}

/// Optimal prefix-free code for `p_w` by pairwise merging, always combining
/// the two lowest-(weight, index) nodes, so ties resolve to the lowest index
/// and the output is deterministic. A one-symbol alphabet gets the empty
/// codeword: a constant needs no common randomness.
pub fn build_prefix_code(p_w: &Dist) -> PrefixCode {
    let n = p_w.len();
    if n == 1 {
        return PrefixCode::for_weights(vec![String::new()], p_w);
    }
    #[derive(Debug)]
    struct Node {
        weight: f64,
        children: Option<(usize, usize)>,
    }
    let mut nodes: Vec<Node> = p_w
        .weights()
        .iter()
        .map(|&w| Node {
            weight: w,
            children: None,
        })
        .collect();
    let mut active: Vec<usize> = (0..n).collect();
    while active.len() > 1 {
        active.sort_by(|&a, &b| {
            nodes[a]
                .weight
                .total_cmp(&nodes[b].weight)
                .then(a.cmp(&b))
        });
        let first = active[0];
        let second = active[1];
        let merged = Node {
            weight: nodes[first].weight + nodes[second].weight,
            children: Some((first, second)),
        };
        nodes.push(merged);
        let id = nodes.len() - 1;
        active.drain(0..2);
        active.push(id);
    }
    let mut codewords = vec![String::new(); n];
    let mut stack = vec![(active[0], String::new())];
    while let Some((id, prefix)) = stack.pop() {
        match nodes[id].children {
            Some((a, b)) => {
                stack.push((a, format!("{prefix}0")));
                stack.push((b, format!("{prefix}1")));
            }
            None => codewords[id] = prefix,
        }
    }
    PrefixCode::for_weights(codewords, p_w)
}

/// A factorization together with a prefix-free code for its W: the operational
/// artifact for exact one-shot generation.
///
/// JSON shape: the factorization fields plus `{"codewords": {"0": "10", ...}}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimulationCode {
    #[serde(flatten)]
    pub factorization: MarkovFactorization,
    #[serde(with = "codeword_map")]
    pub codewords: Vec<String>,
}

mod codeword_map {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(words: &[String], s: S) -> std::result::Result<S::Ok, S::Error> {
        let map: BTreeMap<String, &String> = words
            .iter()
            .enumerate()
            .map(|(i, w)| (i.to_string(), w))
            .collect();
        serde::Serialize::serialize(&map, s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(
        d: D,
    ) -> std::result::Result<Vec<String>, D::Error> {
        let map: BTreeMap<String, String> = serde::Deserialize::deserialize(d)?;
        let mut words = vec![String::new(); map.len()];
        for (k, v) in map {
            let i: usize = k.parse().map_err(serde::de::Error::custom)?;
            if i >= words.len() {
                return Err(serde::de::Error::custom("codeword index out of range"));
            }
            words[i] = v;
        }
        Ok(words)
    }
}

impl SimulationCode {
    pub fn code(&self) -> PrefixCode {
        PrefixCode::for_weights(self.codewords.clone(), &self.factorization.weight_dist())
    }

    /// Expected codeword length in bits.
    pub fn rate(&self) -> f64 {
        self.code().expected_length()
    }

    /// The one-shot bracket `[H(W), E[L])` this code realizes.
    pub fn rate_bracket(&self) -> (f64, f64) {
        (self.factorization.weight_entropy(), self.rate())
    }
}

/// Builds a simulation code for the target: best available G computation,
/// then a prefix code on the certificate weights.
pub fn build_simulation_code(
    j: &JointPmf,
    cfg: &SolveConfig,
) -> Result<(SimulationCode, SolveReport)> {
    let report = solve_best(j, cfg)?;
    let code = build_prefix_code(&report.certificate.weight_dist());
    Ok((
        SimulationCode {
            factorization: report.certificate.clone(),
            codewords: code.codewords().to_vec(),
        },
        report,
    ))
}

#[derive(Debug, Clone, Serialize)]
pub struct GenerationReport {
    pub total_variation: f64,
    pub ok: bool,
}

/// Analytic exact-generation check: total variation between the code's
/// induced joint and the target; exact when below 1e-10.
pub fn exact_generation_check(s: &SimulationCode, target: &JointPmf) -> Result<GenerationReport> {
    let f = &s.factorization;
    if f.nx() != target.nx() || f.ny() != target.ny() {
        return Err(Error::AlphabetMismatch(format!(
            "code generates {}x{}, target is {}x{}",
            f.nx(),
            f.ny(),
            target.nx(),
            target.ny()
        )));
    }
    let tv = f
        .induced_matrix()
        .iter()
        .zip(target.matrix())
        .map(|(a, b)| (a - b).abs())
        .sum::<f64>()
        / 2.0;
    Ok(GenerationReport {
        total_variation: tv,
        ok: tv <= 1e-10,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct SampleReport {
    /// Drawn `(x, y)` index pairs.
    pub samples: Vec<(usize, usize)>,
    pub empirical_tv: f64,
    pub mean_code_length: f64,
}

fn unit_f64(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

fn draw(weights: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    for (i, &w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return i;
        }
    }
    weights.len() - 1
}

/// Draws `n` pairs through the code: W from its weights, then X and Y
/// independently from the component's decoders. Reports empirical total
/// variation against `target` and the average drawn codeword length.
pub fn sample_pairs(
    s: &SimulationCode,
    n: usize,
    seed: u64,
    target: &JointPmf,
) -> Result<SampleReport> {
    let f = &s.factorization;
    if f.nx() != target.nx() || f.ny() != target.ny() {
        return Err(Error::AlphabetMismatch(
            "sampling target shape differs from the code".into(),
        ));
    }
    if n == 0 {
        return Err(Error::Empty("sample request"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut samples = Vec::with_capacity(n);
    let mut counts = vec![0u64; f.nx() * f.ny()];
    let mut total_len = 0usize;
    for _ in 0..n {
        let w = draw(f.weights(), unit_f64(&mut rng));
        let x = draw(f.x_col(w), unit_f64(&mut rng));
        let y = draw(f.y_col(w), unit_f64(&mut rng));
        counts[x * f.ny() + y] += 1;
        total_len += s.codewords[w].len();
        samples.push((x, y));
    }
    let empirical_tv = counts
        .iter()
        .zip(target.matrix())
        .map(|(&c, &p)| (c as f64 / n as f64 - p).abs())
        .sum::<f64>()
        / 2.0;
    Ok(SampleReport {
        samples,
        empirical_tv,
        mean_code_length: total_len as f64 / n as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prob::sbes;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn huffman_textbook() {
        let d = Dist::new(vec![0.5, 0.25, 0.25]).unwrap();
        let code = build_prefix_code(&d);
        let lens: Vec<usize> = (0..3).map(|w| code.len(w)).collect();
        assert_eq!(lens, vec![1, 2, 2]);
        assert!(close(code.expected_length(), 1.5, 1e-15));
        assert!(code.is_prefix_free());
        assert!(close(code.kraft_sum(), 1.0, 1e-15));
    }

    #[test]
    fn huffman_degenerate_and_sbes() {
        let one = Dist::new(vec![1.0]).unwrap();
        let code = build_prefix_code(&one);
        assert_eq!(code.codewords(), &[String::new()]);
        assert!(close(code.expected_length(), 0.0, 0.0));

        // Canonical order of the SBES certificate weights is [0.9, 0.05, 0.05].
        let d = Dist::new(vec![0.9, 0.05, 0.05]).unwrap();
        let code = build_prefix_code(&d);
        assert_eq!(code.len(0), 1);
        assert_eq!(code.len(1), 2);
        assert_eq!(code.len(2), 2);
        assert!(close(code.expected_length(), 1.1, 1e-15));
        let h = d.entropy();
        assert!(h <= 1.1 && 1.1 < h + 1.0);
    }

    #[test]
    fn huffman_bracket_on_random_weights() {
        let d = Dist::new(vec![0.4, 0.3, 0.2, 0.05, 0.05]).unwrap();
        let code = build_prefix_code(&d);
        let el = code.expected_length();
        assert!(d.entropy() <= el + 1e-12 && el < d.entropy() + 1.0);
        assert!(code.is_prefix_free());
    }

    #[test]
    fn simulation_code_for_sbes() {
        let s = sbes(0.9).unwrap();
        let (code, report) = build_simulation_code(&s, &SolveConfig::default()).unwrap();
        let (g, el) = code.rate_bracket();
        assert!(close(g, 0.5689955935892812, 1e-9));
        assert!(close(el, 1.1, 1e-9));
        assert!(g <= el && el < g + 1.0);
        assert!(exact_generation_check(&code, &s).unwrap().ok);
        assert_eq!(report.certificate.card(), 3);
    }

    #[test]
    fn sampler_is_reproducible_and_concentrates() {
        let s = sbes(0.9).unwrap();
        let (code, _) = build_simulation_code(&s, &SolveConfig::default()).unwrap();
        let a = sample_pairs(&code, 100_000, 0, &s).unwrap();
        let b = sample_pairs(&code, 100_000, 0, &s).unwrap();
        assert_eq!(a.samples, b.samples);
        assert!(a.empirical_tv < 0.01, "tv {}", a.empirical_tv);
        assert!(close(a.mean_code_length, 1.1, 0.01));

        let single = sample_pairs(&code, 1, 7, &s).unwrap();
        let (x, y) = single.samples[0];
        assert!(s.get(x, y) > 0.0, "sample must land in the support");
    }

    #[test]
    fn corrupted_decoder_is_detected() {
        let s = sbes(0.9).unwrap();
        let (mut code, _) = build_simulation_code(&s, &SolveConfig::default()).unwrap();
        // Rebuild the factorization with a corrupted weight vector.
        let f = &code.factorization;
        let mut w = f.weights().to_vec();
        w[0] -= 0.2;
        w[1] += 0.2;
        code.factorization = MarkovFactorization::new(
            w,
            (0..f.card()).map(|i| f.x_col(i).to_vec()).collect(),
            (0..f.card()).map(|i| f.y_col(i).to_vec()).collect(),
        )
        .unwrap();
        let check = exact_generation_check(&code, &s).unwrap();
        assert!(!check.ok && check.total_variation > 0.05);
        let sampled = sample_pairs(&code, 50_000, 3, &s).unwrap();
        assert!(sampled.empirical_tv > 0.05);
    }

    #[test]
    fn simulation_code_json_round_trip() {
        let s = sbes(0.9).unwrap();
        let (code, _) = build_simulation_code(&s, &SolveConfig::default()).unwrap();
        let text = serde_json::to_string(&code).unwrap();
        assert!(text.contains("codewords") && text.contains("p_w"));
        let back: SimulationCode = serde_json::from_str(&text).unwrap();
        assert_eq!(back.codewords, code.codewords);
        assert_eq!(back.factorization, code.factorization);
    }
}
