use std::path::Path;

use gmc::loss::{LossVariant, Temperature};
use gmc::model::{Activation, GmcModel, ModelConfig};
use gmc::Tensor;
use gmc_cli::checkpoint;
use gmc_cli::config::RunConfig;
use gmc_cli::io::{fmt_f64, read_matrix, write_matrix};
use proptest::prelude::*;

proptest! {
    #[test]
    fn float_text_round_trips(x in any::<f64>().prop_filter("finite", |x| x.is_finite())) {
        let back: f64 = fmt_f64(x).parse().unwrap();
        prop_assert_eq!(back.to_bits(), x.to_bits());
    }

    #[test]
    fn matrix_files_round_trip(
        rows in 1usize..6,
        cols in 1usize..5,
        seed in proptest::collection::vec(-1e6f64..1e6, 30),
    ) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.csv");
        let t = Tensor::new(vec![rows, cols], seed[..rows * cols].to_vec()).unwrap();
        write_matrix(&path, "z", &t).unwrap();
        let back = read_matrix(&path, "z").unwrap();
        prop_assert_eq!(back.shape(), t.shape());
        prop_assert_eq!(back.data(), t.data());
    }

    #[test]
    fn checkpoints_round_trip(
        dims in proptest::collection::vec(1usize..6, 2..4),
        hidden in proptest::collection::vec(1usize..5, 0..3),
        width in 1usize..5,
        swish in any::<bool>(),
        seed in any::<u64>(),
    ) {
        let config = ModelConfig {
            intermediate_dim: width,
            latent_dim: width + 1,
            encoder_hidden: hidden.clone(),
            head_hidden: hidden,
            activation: if swish { Activation::Swish } else { Activation::Relu },
        };
        let model = GmcModel::new(&dims, &config, seed).unwrap();
        let bytes = checkpoint::to_bytes(&model);
        let back = checkpoint::from_bytes(&bytes, Path::new("mem")).unwrap();
        prop_assert_eq!(checkpoint::to_bytes(&back), bytes);
    }

    #[test]
    fn grid_size_is_product_of_lists(
        taus in proptest::collection::btree_set(1u32..100, 0..3),
        dims in proptest::collection::btree_set(1usize..9, 0..3),
        both_losses in any::<bool>(),
    ) {
        let mut cfg = RunConfig::default();
        cfg.sweep.tau = taus.iter().map(|&t| Temperature::new(f64::from(t) / 100.0).unwrap()).collect();
        cfg.sweep.latent_dim = dims.iter().copied().collect();
        if both_losses {
            cfg.sweep.loss_variant = vec![LossVariant::Full, LossVariant::Ablated];
        }
        let expected = taus.len().max(1) * dims.len().max(1) * if both_losses { 2 } else { 1 };
        let grid = cfg.grid();
        prop_assert_eq!(grid.len(), expected);
        for (i, point) in grid.iter().enumerate() {
            let at = cfg.at(point);
            prop_assert!(at.sweep.tau.is_empty());
            prop_assert_eq!(at.model.latent_dim, point.latent_dim);
            prop_assert_eq!(at.train.tau, point.tau);
            if expected > 1 {
                for other in &grid[..i] {
                    prop_assert_ne!(cfg.label(other), cfg.label(point));
                }
            }
        }
    }
}
