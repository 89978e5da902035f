use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::energy::{EnergyBuilder, EnergyFunction};
use crate::error::{Error, Result};

/// Instance families. All are deterministic given the seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum GeneratorSpec {
    /// 4-connected grid, Potts coupling `λ`, unaries from a noisy blocky label field.
    GridPotts {
        width: usize,
        height: usize,
        labels: usize,
        lambda: f64,
        /// Probability that an observed pixel is replaced by a random label.
        noise: f64,
        /// Uniform jitter added to unaries to break ties.
        #[serde(default = "default_jitter")]
        jitter: f64,
    },
    /// 4-connected grid, unaries `(ℓ − obs)²`, pairwise `λ·min((a − b)², trunc)`.
    DenoiseTruncL2 {
        width: usize,
        height: usize,
        labels: usize,
        lambda: f64,
        trunc: f64,
        /// Standard deviation of the Gaussian observation noise, in label units.
        noise: f64,
    },
    /// Binary energy with i.i.d. uniform terms on an Erdős–Rényi graph.
    RandomBinary { nodes: usize, edge_prob: f64, submodular: bool },
    /// Like `random-binary`, with at least one non-submodular edge.
    RandomNonsubmodular { nodes: usize, edge_prob: f64 },
    /// Multilabel energy with i.i.d. uniform terms.
    RandomMultilabel { nodes: usize, labels: usize, edge_prob: f64 },
}

fn default_jitter() -> f64 {
    0.05
}

impl GeneratorSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            GeneratorSpec::GridPotts { .. } => "grid-potts",
            GeneratorSpec::DenoiseTruncL2 { .. } => "denoise-trunc-l2",
            GeneratorSpec::RandomBinary { .. } => "random-binary",
            GeneratorSpec::RandomNonsubmodular { .. } => "random-nonsubmodular",
            GeneratorSpec::RandomMultilabel { .. } => "random-multilabel",
        }
    }
}

fn check(ok: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::Config(msg()))
    }
}

fn check_grid(width: usize, height: usize, labels: usize) -> Result<()> {
    check(width > 0 && height > 0, || format!("grid dimensions must be positive, got {width}x{height}"))?;
    check(labels > 0, || "label count must be positive".into())
}

fn check_unit(name: &str, p: f64) -> Result<()> {
    check((0.0..=1.0).contains(&p), || format!("{name} must lie in [0, 1], got {p}"))
}

fn check_nonneg(name: &str, v: f64) -> Result<()> {
    check(v >= 0.0 && v.is_finite(), || format!("{name} must be finite and >= 0, got {v}"))
}

fn grid_edges(width: usize, height: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..height).flat_map(move |y| {
        (0..width).flat_map(move |x| {
            let i = y * width + x;
            let right = (x + 1 < width).then_some((i, i + 1));
            let down = (y + 1 < height).then_some((i, i + width));
            right.into_iter().chain(down)
        })
    })
}

/// Piecewise-constant field of square blocks; block `(bx, by)` gets
/// `value(bx, by)`.
fn block_field(width: usize, height: usize, mut value: impl FnMut(usize, usize) -> usize) -> Vec<usize> {
    let side = (width.max(height) / 4).max(4);
    let (bw, bh) = (width.div_ceil(side), height.div_ceil(side));
    let blocks: Vec<usize> = (0..bw * bh).map(|k| value(k % bw, k / bw)).collect();
    (0..width * height).map(|i| blocks[(i / width / side) * bw + (i % width) / side]).collect()
}

fn uniform_table(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
    (0..len).map(|_| rng.gen_range(-2.0..2.0)).collect()
}

pub fn generate(spec: &GeneratorSpec, seed: u64) -> Result<EnergyFunction> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match *spec {
        GeneratorSpec::GridPotts { width, height, labels, lambda, noise, jitter } => {
            check_grid(width, height, labels)?;
            check_unit("noise", noise)?;
            check_nonneg("lambda", lambda)?;
            check_nonneg("jitter", jitter)?;
            let clean = block_field(width, height, |bx, by| (bx + by) % labels);
            let mut b = EnergyBuilder::new(vec![labels; width * height]);
            for (i, &c) in clean.iter().enumerate() {
                let obs = if rng.gen_bool(noise) { rng.gen_range(0..labels) } else { c };
                let u: Vec<f64> = (0..labels)
                    .map(|l| f64::from(u8::from(l != obs)) + jitter * rng.gen::<f64>())
                    .collect();
                b.set_unary(i, &u)?;
            }
            let potts: Vec<f64> =
                (0..labels * labels).map(|k| if k / labels == k % labels { 0.0 } else { lambda }).collect();
            for (u, v) in grid_edges(width, height) {
                b.add_edge(u, v, &potts)?;
            }
            b.build()
        }
        GeneratorSpec::DenoiseTruncL2 { width, height, labels, lambda, trunc, noise } => {
            check_grid(width, height, labels)?;
            check_nonneg("lambda", lambda)?;
            check_nonneg("trunc", trunc)?;
            check_nonneg("noise", noise)?;
            let clean = block_field(width, height, |_, _| rng.gen_range(0..labels));
            let gauss = Normal::new(0.0, noise).map_err(|err| Error::Config(err.to_string()))?;
            let mut b = EnergyBuilder::new(vec![labels; width * height]);
            for (i, &c) in clean.iter().enumerate() {
                let obs = c as f64 + gauss.sample(&mut rng);
                let u: Vec<f64> = (0..labels).map(|l| (l as f64 - obs).powi(2)).collect();
                b.set_unary(i, &u)?;
            }
            let table: Vec<f64> = (0..labels * labels)
                .map(|k| {
                    let d = (k / labels) as f64 - (k % labels) as f64;
                    lambda * (d * d).min(trunc)
                })
                .collect();
            for (u, v) in grid_edges(width, height) {
                b.add_edge(u, v, &table)?;
            }
            b.build()
        }
        GeneratorSpec::RandomBinary { nodes, edge_prob, submodular } => {
            check_unit("edge_prob", edge_prob)?;
            random_binary(&mut rng, nodes, edge_prob, submodular, false)
        }
        GeneratorSpec::RandomNonsubmodular { nodes, edge_prob } => {
            check(nodes >= 2, || "a non-submodular instance needs at least 2 nodes".into())?;
            check_unit("edge_prob", edge_prob)?;
            random_binary(&mut rng, nodes, edge_prob, false, true)
        }
        GeneratorSpec::RandomMultilabel { nodes, labels, edge_prob } => {
            check(labels > 0, || "label count must be positive".into())?;
            check_unit("edge_prob", edge_prob)?;
            let mut b = EnergyBuilder::new(vec![labels; nodes]);
            for i in 0..nodes {
                b.set_unary(i, &uniform_table(&mut rng, labels))?;
            }
            for u in 0..nodes {
                for v in u + 1..nodes {
                    if rng.gen_bool(edge_prob) {
                        b.add_edge(u, v, &uniform_table(&mut rng, labels * labels))?;
                    }
                }
            }
            b.build()
        }
    }
}

/// `A + D − B − C` for a 2×2 table.
fn excess(t: &[f64]) -> f64 {
    t[0] + t[3] - t[1] - t[2]
}

fn random_binary(
    rng: &mut ChaCha8Rng,
    nodes: usize,
    edge_prob: f64,
    submodular: bool,
    force_frustrated: bool,
) -> Result<EnergyFunction> {
    let mut b = EnergyBuilder::new(vec![2; nodes]);
    for i in 0..nodes {
        b.set_unary(i, &uniform_table(rng, 2))?;
    }
    let mut frustrated = false;
    for u in 0..nodes {
        for v in u + 1..nodes {
            let first = u == 0 && v == 1;
            if !(rng.gen_bool(edge_prob) || (force_frustrated && first)) {
                continue;
            }
            let mut t = uniform_table(rng, 4);
            let flip = if submodular {
                excess(&t) > 0.0
            } else {
                force_frustrated && first && excess(&t) <= 0.0
            };
            if flip {
                // swapping the columns negates the excess
                t.swap(0, 1);
                t.swap(2, 3);
            }
            if force_frustrated && first && excess(&t) < 0.5 {
                t[0] += 1.0;
            }
            frustrated |= excess(&t) > 0.0;
            b.add_edge(u, v, &t)?;
        }
    }
    debug_assert!(!force_frustrated || frustrated);
    b.build()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::io::energy_to_json;
    use crate::DEFAULT_TOL;
    use proptest::prelude::*;

    fn potts(w: usize, h: usize, noise: f64) -> GeneratorSpec {
        GeneratorSpec::GridPotts { width: w, height: h, labels: 2, lambda: 1.0, noise, jitter: 0.0 }
    }

    #[test]
    fn smallest_potts_grid_is_a_two_node_chain() {
        let e = generate(&potts(2, 1, 0.0), 1).unwrap();
        assert_eq!(e.num_nodes(), 2);
        assert_eq!(e.edges(), &[(0, 1)]);
        assert_eq!(e.unary(0), &[0.0, 1.0]);
        assert_eq!(e.unary(1), &[0.0, 1.0]);
        assert_eq!(e.table(0), &[0.0, 1.0, 1.0, 0.0]);
    }

    #[test]
    fn grid_shape() {
        let e = generate(&potts(5, 3, 0.2), 4).unwrap();
        assert_eq!(e.num_nodes(), 15);
        assert_eq!(e.num_edges(), 4 * 3 + 5 * 2);
        assert!(e.degree(7) == 4 && e.degree(0) == 2);
    }

    #[test]
    fn denoise_terms() {
        let spec = GeneratorSpec::DenoiseTruncL2 { width: 4, height: 4, labels: 5, lambda: 2.0, trunc: 4.0, noise: 0.0 };
        let e = generate(&spec, 9).unwrap();
        let t = e.table(0);
        assert_eq!(t[0], 0.0);
        assert_eq!(t[1], 2.0);
        assert_eq!(t[4], 8.0);
        for i in 0..e.num_nodes() {
            let u = e.unary(i);
            let m = u.iter().copied().fold(f64::INFINITY, f64::min);
            assert_eq!(m, 0.0);
        }
    }

    #[test]
    fn invalid_parameters() {
        assert!(matches!(generate(&potts(0, 3, 0.1), 0), Err(Error::Config(_))));
        assert!(generate(&potts(2, 2, 1.5), 0).is_err());
        assert!(generate(&GeneratorSpec::RandomNonsubmodular { nodes: 1, edge_prob: 0.5 }, 0).is_err());
        let spec = GeneratorSpec::DenoiseTruncL2 { width: 2, height: 2, labels: 3, lambda: 1.0, trunc: 1.0, noise: -1.0 };
        assert!(generate(&spec, 0).is_err());
    }

    #[test]
    fn spec_json_uses_kind_tags() {
        let s = r#"{"kind": "random-binary", "nodes": 5, "edge_prob": 0.3, "submodular": true}"#;
        let g: GeneratorSpec = serde_json::from_str(s).unwrap();
        assert_eq!(g.kind(), "random-binary");
        let p: GeneratorSpec = serde_json::from_str(r#"{"kind":"grid-potts","width":3,"height":3,"labels":3,"lambda":1,"noise":0.1}"#).unwrap();
        assert!(matches!(p, GeneratorSpec::GridPotts { jitter, .. } if jitter == 0.05));
    }

    proptest! {
        #[test]
        fn same_seed_same_bytes(seed in any::<u64>()) {
            for spec in [
                potts(4, 3, 0.3),
                GeneratorSpec::DenoiseTruncL2 { width: 4, height: 3, labels: 4, lambda: 1.0, trunc: 2.0, noise: 1.0 },
                GeneratorSpec::RandomBinary { nodes: 6, edge_prob: 0.4, submodular: false },
                GeneratorSpec::RandomMultilabel { nodes: 5, labels: 3, edge_prob: 0.4 },
            ] {
                prop_assert_eq!(energy_to_json(&generate(&spec, seed).unwrap()), energy_to_json(&generate(&spec, seed).unwrap()));
            }
        }

        #[test]
        fn nonsubmodular_kind_is_never_submodular(seed in any::<u64>(), n in 2usize..10, p in 0.0f64..1.0) {
            let e = generate(&GeneratorSpec::RandomNonsubmodular { nodes: n, edge_prob: p }, seed).unwrap();
            prop_assert!(!e.is_submodular(DEFAULT_TOL).unwrap());
        }

        #[test]
        fn submodular_flag_is_honored(seed in any::<u64>(), n in 1usize..10) {
            let e = generate(&GeneratorSpec::RandomBinary { nodes: n, edge_prob: 0.5, submodular: true }, seed).unwrap();
            prop_assert!(e.is_submodular(DEFAULT_TOL).unwrap());
        }
    }
}
