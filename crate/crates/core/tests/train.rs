use std::fs;
use std::sync::Arc;

use maple_core::game::{GameKind, GameSpec};
use maple_core::nn::{NetConfig, Network, EMBED_DIM};
use maple_core::sampler::{derive_constraints, enumerate_consistent};
use maple_core::search::{SamplerKind, SearchConfig};
use maple_core::train::{
    build_triplet, run_training, selfplay_game, NetShape, ReplayBuffer, TrainConfig, METRICS_FILE,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn search_cfg() -> SearchConfig {
    SearchConfig { simulations: 8, k: 3, m: 6, sampler: SamplerKind::Siamese, ..SearchConfig::default() }
}

fn net(spec: &GameSpec) -> Arc<Network> {
    Arc::new(Network::new_random(NetConfig::for_game(spec, 1, 4, EMBED_DIM), &mut ChaCha8Rng::seed_from_u64(1)))
}

fn train_cfg(iterations: u32) -> TrainConfig {
    TrainConfig {
        game: GameSpec::dark_hex(3),
        net: NetShape { blocks: 1, filters: 4, embed_dim: 8 },
        search: search_cfg(),
        iterations,
        games_per_iter: 4,
        steps_per_iter: 3,
        batch: 16,
        lr: 0.02,
        momentum: 0.9,
        weight_decay: 1e-4,
        buffer_games: 6,
        seed: 5,
        workers: 2,
    }
}

#[test]
fn selfplay_records_are_well_formed() {
    for spec in [GameSpec::dark_hex(3), GameSpec::phantom_go(3)] {
        let net = net(&spec);
        for id in 0..4 {
            let g = selfplay_game(&net, spec, &search_cfg(), id, 100 + id).unwrap();
            assert!(!g.forfeited);
            if spec.kind == GameKind::DarkHex {
                assert!(g.moves <= 9);
            }
            assert!(!g.records.is_empty());
            for r in &g.records {
                let s: f32 = r.pi.iter().sum();
                assert!((s - 1.0).abs() < 1e-6);
                for (p, l) in r.pi.iter().zip(&r.legal) {
                    assert!(*l || *p == 0.0);
                }
                assert_eq!(r.z as f64, maple_core::game::outcome_value(&g.outcome, r.viewer));
            }
            let zs: Vec<(maple_core::game::PlayerId, f32)> = g.records.iter().map(|r| (r.viewer, r.z)).collect();
            for a in &zs {
                for b in &zs {
                    if a.0 != b.0 && g.outcome.winner().is_some() {
                        assert_eq!(a.1, -b.1);
                    }
                }
            }
            assert_eq!(maple_core::train::materialize(&g.stored).unwrap().len(), g.records.len());
        }
    }
}

#[test]
fn triplets_respect_information_sets() {
    for spec in [GameSpec::dark_hex(3), GameSpec::phantom_go(3)] {
        let net = net(&spec);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut skipped = 0;
        let mut singletons = 0;
        let mut built = 0;
        for id in 0..6 {
            let g = selfplay_game(&net, spec, &search_cfg(), id, id).unwrap();
            for r in &g.records {
                let singleton = enumerate_consistent(&derive_constraints(&r.history), 1 << 20).unwrap().len() == 1;
                singletons += singleton as usize;
                for _ in 0..40 {
                    match build_triplet(r, &mut rng) {
                        None => {
                            assert!(singleton);
                            skipped += 1;
                            break;
                        }
                        Some(t) => {
                            assert!(!singleton);
                            assert_ne!(t.positive, t.negative);
                            assert_eq!(t.anchor.channels, if spec.kind == GameKind::PhantomGo { 34 } else { 18 });
                            built += 1;
                        }
                    }
                }
            }
        }
        assert_eq!(skipped, singletons);
        assert!(built > 0);
    }
}

#[test]
fn buffer_is_fifo_and_batches_mix_games() {
    let spec = GameSpec::dark_hex(3);
    let net = net(&spec);
    let mut buffer = ReplayBuffer::new(5);
    for id in 0..8 {
        buffer.push(selfplay_game(&net, spec, &search_cfg(), id, id).unwrap());
    }
    assert_eq!(buffer.len(), 5);
    assert_eq!(buffer.game_ids(), vec![3, 4, 5, 6, 7]);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for _ in 0..20 {
        let batch = buffer.sample(32, &mut rng);
        let mut ids: Vec<u64> = batch.iter().map(|b| b.0).collect();
        ids.sort_unstable();
        ids.dedup();
        assert!(ids.len() >= 2);
        assert!(ids.iter().all(|id| (3..8).contains(id)));
    }
}

#[test]
fn metrics_and_resume_are_deterministic() {
    let dirs: Vec<tempfile::TempDir> = (0..3).map(|_| tempfile::tempdir().unwrap()).collect();
    let cfg = train_cfg(3);
    let summary = run_training(&cfg, dirs[0].path(), &mut |_| {}).unwrap();
    assert_eq!(summary.metrics.len(), 3);
    assert_eq!(summary.steps, 9);
    run_training(&cfg, dirs[1].path(), &mut |_| {}).unwrap();
    run_training(&train_cfg(2), dirs[2].path(), &mut |_| {}).unwrap();
    let resumed = run_training(&cfg, dirs[2].path(), &mut |_| {}).unwrap();
    assert_eq!(resumed.metrics.len(), 1);

    let text: Vec<String> = dirs.iter().map(|d| fs::read_to_string(d.path().join(METRICS_FILE)).unwrap()).collect();
    assert_eq!(text[0].lines().count(), 3);
    assert_eq!(text[0], text[1]);
    assert_eq!(text[0], text[2]);
    for d in &dirs {
        assert!(d.path().join("ckpt_0.maplenet").exists());
        assert!(d.path().join("ckpt_9.maplenet").exists());
    }
    for m in &summary.metrics {
        let l = m.loss;
        assert!((l.total - (l.value + l.policy + l.triplet + l.l2)).abs() < 1e-6);
        assert_eq!(m.forfeits, 0);
        assert!(m.buffer_games <= cfg.buffer_games);
    }
    for line in text[0].lines() {
        let field = |k: &str| -> f64 {
            line.split_whitespace().find_map(|t| t.strip_prefix(&format!("{k}="))).unwrap().parse().unwrap()
        };
        let sum = field("v_loss") + field("p_loss") + field("tri_loss") + field("l2");
        assert!((field("loss") - sum).abs() < 1e-6, "{line}");
    }
}

#[test]
fn invalid_training_config_is_rejected() {
    let mut cfg = train_cfg(1);
    cfg.search.k = 0;
    let dir = tempfile::tempdir().unwrap();
    assert!(matches!(run_training(&cfg, dir.path(), &mut |_| {}), Err(maple_core::train::TrainError::Config(_))));
}
