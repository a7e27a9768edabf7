use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::Result;
use crate::rng::derive_rng;
use crate::tensor::{ParameterSet, Tensor};

use super::names;
use super::{ModelConfig, Variant};

fn xavier(shape: &[usize], fan_in: usize, fan_out: usize, rng: &mut impl Rng) -> Tensor {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    Tensor::from_fn(shape, |_| rng.random_range(-limit..limit))
}

/// Fresh parameters: Glorot-uniform projections and attention vectors,
/// `N(0, 1/sqrt(D))` node features, zero position offsets.
pub fn init_params(
    config: &ModelConfig,
    num_nodes: usize,
    num_snapshots: usize,
    seed: u64,
) -> Result<ParameterSet> {
    config.validate()?;
    let mut rng = derive_rng(seed, "init", 0);
    let mut params = ParameterSet::new();
    let heads = config.heads;
    let d_in = config.feature_dim(num_nodes);

    if !config.one_hot {
        let std = 1.0 / (d_in as f64).sqrt();
        let normal = Normal::new(0.0, std).expect("positive std");
        params.insert(
            names::EMBED,
            Tensor::from_fn(&[num_nodes, d_in], |_| normal.sample(&mut rng)),
        );
    }

    if config.variant == Variant::NoLocal {
        params.insert(
            names::LOCAL_PROJ,
            xavier(&[d_in, config.local_dim], d_in, config.local_dim, &mut rng),
        );
    } else {
        let dh = config.local_dim / heads;
        for h in 0..heads {
            params.insert(names::local_w(h), xavier(&[d_in, dh], d_in, dh, &mut rng));
            params.insert(names::local_a(h), xavier(&[2 * dh], 2 * dh, 1, &mut rng));
        }
    }

    if config.variant != Variant::NoGlobal {
        let dh = config.global_dim / heads;
        for h in 0..heads {
            for which in ["wq", "wk", "wv"] {
                params.insert(
                    names::global(h, which),
                    xavier(&[config.local_dim, dh], config.local_dim, dh, &mut rng),
                );
            }
        }
    }

    if config.variant != Variant::NoTemporal {
        let f_in = config.effective_global_dim();
        let dh = config.embed_dim / heads;
        for h in 0..heads {
            for which in ["wq", "wk", "wv"] {
                params.insert(names::temporal(h, which), xavier(&[f_in, dh], f_in, dh, &mut rng));
            }
        }
        if config.use_position_embedding {
            params.insert(names::POSITION, Tensor::zeros(&[num_snapshots, f_in]));
        }
    }
    Ok(params)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shapes_follow_config() {
        let cfg = ModelConfig::with_dim(8, 2);
        let p = init_params(&cfg, 5, 3, 1).unwrap();
        assert_eq!(p.get("embed").unwrap().shape(), &[5, 8]);
        assert_eq!(p.get("local.01.w").unwrap().shape(), &[8, 4]);
        assert_eq!(p.get("local.01.a").unwrap().shape(), &[8]);
        assert_eq!(p.get("global.00.wq").unwrap().shape(), &[8, 4]);
        assert_eq!(p.get("temporal.01.wv").unwrap().shape(), &[8, 4]);
        assert_eq!(p.get("temporal.pos").unwrap().shape(), &[3, 8]);
        assert!(p.is_finite());
    }

    #[test]
    fn deterministic_under_seed() {
        let cfg = ModelConfig::with_dim(8, 2);
        let a = init_params(&cfg, 5, 3, 9).unwrap();
        let b = init_params(&cfg, 5, 3, 9).unwrap();
        let c = init_params(&cfg, 5, 3, 10).unwrap();
        assert!(a.bit_identical(&b));
        assert!(!a.bit_identical(&c));
    }

    #[test]
    fn variants_drop_their_block() {
        let mut cfg = ModelConfig::with_dim(8, 2);
        cfg.variant = Variant::NoLocal;
        let p = init_params(&cfg, 4, 2, 0).unwrap();
        assert!(p.contains("local.proj") && !p.contains("local.00.w"));
        cfg.variant = Variant::NoGlobal;
        let p = init_params(&cfg, 4, 2, 0).unwrap();
        assert!(!p.iter().any(|(n, _)| n.starts_with("global")));
        cfg.variant = Variant::NoTemporal;
        let p = init_params(&cfg, 4, 2, 0).unwrap();
        assert!(!p.iter().any(|(n, _)| n.starts_with("temporal")));
        cfg.variant = Variant::Full;
        cfg.one_hot = true;
        let p = init_params(&cfg, 4, 2, 0).unwrap();
        assert!(!p.contains("embed"));
        assert_eq!(p.get("local.00.w").unwrap().shape(), &[4, 4]);
    }
}
