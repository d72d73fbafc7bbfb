use nbv::harness::{benchmark_scene_seed, run_episode, EpisodeConfig, Models, Policy};
use nbv::mpc::MpcParams;
use nbv::scene::{DomainRandomizationConfig, Range};
use nbv::score::{
    generate_training_data, read_pairs_jsonl, train_surrogate, training_scene_seed, write_pairs_jsonl, DataGenConfig,
    FeatureSpec, ScoreKind, Split, SurrogateHyper,
};
use nbv::vpformer::{collect_expert_data, train_bc, BcHyper, ExpertDataset, VpConfig};

fn small_scenes() -> DomainRandomizationConfig {
    DomainRandomizationConfig {
        dx: Range::new(0.5, 0.6),
        dy: Range::new(1.1, 1.2),
        dz: Range::new(0.3, 0.4),
        object_count: (3, 4),
        resolution: 0.05,
        ..DomainRandomizationConfig::default()
    }
}

fn data_config(len: usize) -> DataGenConfig {
    DataGenConfig {
        scenes: small_scenes(),
        features: FeatureSpec { blocks: [2, 2, 2] },
        sequence_length: len,
        ..DataGenConfig::default()
    }
}

#[test]
fn one_sequence_yields_one_pair_per_step() {
    let pairs = generate_training_data(1, 1, 9, &data_config(3)).unwrap();
    assert_eq!(pairs.len(), 3);
    for p in &pairs {
        assert!((0.0..=1.0).contains(&p.label));
        assert_eq!(p.features.len(), 24);
        assert!(p.scene_seed >> 63 == 1);
    }
    let mut buf = Vec::new();
    write_pairs_jsonl(&mut buf, &pairs).unwrap();
    assert_eq!(read_pairs_jsonl(&buf[..]).unwrap(), pairs);
    assert_eq!(generate_training_data(1, 1, 9, &data_config(3)).unwrap(), pairs);
}

#[test]
fn generated_pairs_train_a_surrogate() {
    let pairs = generate_training_data(3, 2, 1, &data_config(3)).unwrap();
    assert_eq!(pairs.len(), 18);
    assert!(pairs.iter().any(|p| p.split == Split::Eval));
    let hyper = SurrogateHyper {
        epochs: 20,
        batch: 8,
        lr: 1e-3,
        seed: 0,
    };
    let (_, report) = train_surrogate(&pairs, FeatureSpec { blocks: [2, 2, 2] }, &hyper).unwrap();
    assert!(report.best_eval() <= report.eval_loss[0]);
    assert_eq!(report.train_loss.len(), 21);
}

#[test]
fn seed_spaces_do_not_overlap() {
    for i in 0..100 {
        assert_eq!(training_scene_seed(3, i) >> 63, 1);
        assert_eq!(benchmark_scene_seed(3, i) >> 63, 0);
    }
}

#[test]
fn expert_rollouts_feed_behavior_cloning() {
    let cfg = EpisodeConfig {
        score: ScoreKind::Heuristic,
        mpc: MpcParams::default().scaled(20),
        ..EpisodeConfig::default()
    };
    let data = collect_expert_data(4, 2, &cfg, &small_scenes(), &Models::default()).unwrap();
    assert_eq!(data.len(), 4);
    for t in &data.trajectories {
        assert!(t.sequence.len() >= 2);
        assert_eq!(t.sequence.tokens[0].coverage, 0.0);
    }
    let mut buf = Vec::new();
    data.write_jsonl(&mut buf).unwrap();
    assert_eq!(ExpertDataset::read_jsonl(&buf[..]).unwrap(), data);

    let vp = VpConfig {
        c_dim: 4,
        s_dim: 8,
        v_dim: 4,
        heads: 2,
        ffn: 16,
        features: FeatureSpec::default(),
        ..VpConfig::default()
    };
    let hyper = BcHyper {
        epochs: 3,
        batch: 2,
        ..BcHyper::default()
    };
    let (model, report) = train_bc(&data, vp, &hyper).unwrap();
    assert!(report.best_eval() <= report.eval_loss[0]);
    let ep = EpisodeConfig {
        policy: Policy::Vpformer,
        ..cfg
    };
    let spec = nbv::scene::generate_scene(&small_scenes(), 11).unwrap();
    let models = Models {
        surrogate: None,
        vpformer: Some(&model),
    };
    let log = run_episode(&spec, &ep, &models).unwrap();
    assert!(log.viewpoints() >= 1, "{:?} {:?}", log.status, log.error);
    log.check_invariants(ep.t_max).unwrap();
}
