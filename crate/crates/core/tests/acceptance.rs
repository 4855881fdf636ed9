//! Acceptance gate: one PASS/FAIL line per criterion.
//!
//! Set `ACCEPTANCE_ONLY=<substring>` to run a subset.

use std::collections::{HashMap, HashSet, VecDeque};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use maple_core::agent::{random_action, Agent};
use maple_core::encode::{encode_board4, encode_history, encode_state};
use maple_core::eval::{
    ablation_grid, elo_fit, run_match, triplet_success, AblationSpec, Axis, MatchSpec, PairResult,
};
use maple_core::game::{
    Action, CellSet, GameOutcome, GameResult, GameSession, GameSpec, GoWorld, HexWorld, MoveFeedback,
    ObservationHistory, PlayerId,
};
use maple_core::nn::gradcheck::check_gradients;
use maple_core::nn::params::cast;
use maple_core::nn::{checkpoint, loss_and_gradients, NetConfig, Network, TrainingSample, Triplet, EMBED_DIM};
use maple_core::sampler::{derive_constraints, enumerate_consistent, sample_random};
use maple_core::search::{
    aggregate_policy, aggregate_value, alphazero_tree, maple_search, pimc_search, puct_scores, puct_select,
    renormalize, root_exclusions, Algorithm, LeafEval, SamplerKind, SearchConfig,
};
use maple_core::train::{checkpoint_name, make_batch, run_training, selfplay_game, NetShape, TrainConfig, TrainingRecord, METRICS_FILE};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

// ---------------------------------------------------------------------------
// Aggregation oracle

fn oracle_policy(policies: &[Option<(Vec<f64>, Vec<bool>)>], width: usize) -> Vec<Option<f64>> {
    (0..width)
        .map(|j| {
            let vals: Vec<f64> =
                policies.iter().flatten().filter(|(_, legal)| legal[j]).map(|(p, _)| p[j]).collect();
            if vals.is_empty() {
                None
            } else {
                Some(vals.iter().rev().fold(0.0, |a, b| a + b) / vals.len() as f64)
            }
        })
        .collect()
}

fn aggregation_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst = 0.0f64;
    for case in 0..10_000 {
        let worlds = rng.random_range(1..=10);
        let width = rng.random_range(1..=26);
        let mut evals = Vec::new();
        let mut raw = Vec::new();
        for _ in 0..worlds {
            if rng.random_bool(0.15) {
                let v = [-1.0, 0.0, 1.0][rng.random_range(0..3)];
                evals.push(LeafEval::Terminal { value: v });
                raw.push((None, v));
                continue;
            }
            let legal: Vec<bool> = (0..width).map(|_| rng.random_bool(0.7)).collect();
            let mut p: Vec<f64> = legal.iter().map(|&l| if l { rng.random::<f64>() } else { 0.0 }).collect();
            let s: f64 = p.iter().sum();
            if s > 0.0 {
                p.iter_mut().for_each(|x| *x /= s);
            }
            let v = rng.random_range(-1.0..1.0);
            evals.push(LeafEval::Evaluated { policy: p.clone(), legal: legal.clone(), value: v });
            raw.push((Some((p, legal)), v));
        }
        let policies: Vec<Option<(Vec<f64>, Vec<bool>)>> = raw.iter().map(|r| r.0.clone()).collect();
        let expected_p = oracle_policy(&policies, width);
        let expected_v = raw.iter().map(|r| r.1).rev().fold(0.0, |a, b| a + b) / raw.len() as f64;
        let got_p = aggregate_policy(&evals);
        let got_v = aggregate_value(&evals);
        let any_evaluated = policies.iter().any(Option::is_some);
        if any_evaluated {
            ensure(got_p.len() == width, || format!("case {case}: width {}", got_p.len()))?;
            for (j, (g, e)) in got_p.iter().zip(&expected_p).enumerate() {
                match (g, e) {
                    (None, None) => {}
                    (Some(g), Some(e)) => worst = worst.max((g - e).abs()),
                    _ => return Err(format!("case {case}: action {j} defined mismatch")),
                }
            }
        }
        worst = worst.max((got_v - expected_v).abs());
    }
    ensure(worst <= 1e-12, || format!("max deviation {worst:e}"))?;
    Ok(format!("10000 cases, max deviation {worst:.1e}"))
}

// ---------------------------------------------------------------------------
// PUCT

fn puct_unit() -> Outcome {
    let s = puct_scores(&[0.5, 0.2], &[0.3, 0.7], &[3, 1], 1.25);
    ensure((s[0] - 0.6875).abs() < 1e-12 && (s[1] - 1.075).abs() < 1e-12, || format!("scores {s:?}"))?;
    ensure(puct_select(&[0.5, 0.2], &[0.3, 0.7], &[3, 1], 1.25) == 1, || "argmax".into())?;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for case in 0..1000 {
        let n = rng.random_range(1..12);
        let raw: Vec<Option<f64>> = (0..n).map(|_| Some(rng.random::<f64>() + 1e-3)).collect();
        let p: Vec<f64> = renormalize(&raw).into_iter().map(|x| x.1).collect();
        let scale = rng.random_range(0.01..100.0);
        let scaled: Vec<Option<f64>> = raw.iter().map(|x| x.map(|v| v * scale)).collect();
        let p2: Vec<f64> = renormalize(&scaled).into_iter().map(|x| x.1).collect();
        let q: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let visits: Vec<u32> = (0..n).map(|_| rng.random_range(0..20)).collect();
        ensure(puct_select(&q, &p, &visits, 1.25) == puct_select(&q, &p2, &visits, 1.25), || {
            format!("case {case}: argmax changed under rescaling")
        })?;
    }
    Ok("hand example [0.6875, 1.075] and 1000 rescaling cases".into())
}

// ---------------------------------------------------------------------------
// Positions

fn random_history(spec: GameSpec, seed: u64, max_moves: usize) -> ObservationHistory {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let mut s = GameSession::new(spec, seed).unwrap();
        let moves = rng.random_range(0..=max_moves);
        while !s.is_over() && (s.world().move_number() as usize) < moves {
            let p = s.to_play();
            let a = random_action(s.history(p), &mut rng);
            s.attempt(p, a).unwrap();
        }
        if !s.is_over() {
            return s.history(s.to_play()).clone();
        }
    }
}

fn tiny_net(spec: &GameSpec, seed: u64) -> Network {
    Network::new_random(NetConfig::for_game(spec, 1, 4, 8), &mut ChaCha8Rng::seed_from_u64(seed))
}

fn budget_accounting() -> Outcome {
    let spec = GameSpec::dark_hex(5);
    let net = tiny_net(&spec, 1);
    let cfg = SearchConfig { simulations: 16, k: 5, m: 10, sampler: SamplerKind::Random, ..Default::default() };
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let (mut pimc_exact, mut maple_equal, mut maple_below) = (0, 0, 0);
    for i in 0..100 {
        let h = random_history(spec, 1000 + i, 20);
        let m = maple_search(&h, &net, &cfg, &mut rng).map_err(|e| e.to_string())?;
        let b = &m.budget;
        let bound = (m.worlds_sampled * cfg.simulations as usize) as u64;
        ensure(b.policy_value_evals <= bound, || format!("search {i}: MAPLE {} > {bound}", b.policy_value_evals))?;
        let clean = b.discards == 0 && b.terminal_hits == 0 && b.empty_worldsets == 0;
        ensure((b.policy_value_evals == bound) == clean, || format!("search {i}: equality/event mismatch {b:?}"))?;
        if clean {
            maple_equal += 1;
        } else {
            maple_below += 1;
        }
        let p = pimc_search(&h, &net, &cfg, &mut rng).map_err(|e| e.to_string())?;
        let bound = (p.worlds_sampled * cfg.simulations as usize) as u64;
        if p.budget.terminal_hits == 0 {
            ensure(p.budget.policy_value_evals == bound, || {
                format!("search {i}: PIMC {} != {bound}", p.budget.policy_value_evals)
            })?;
            pimc_exact += 1;
        } else {
            ensure(p.budget.policy_value_evals + p.budget.terminal_hits == bound, || format!("search {i}: PIMC terminal accounting"))?;
        }
    }
    Ok(format!("PIMC exact in {pimc_exact}/100, MAPLE equal {maple_equal} / below-with-events {maple_below}"))
}

fn k1_degeneracy() -> Outcome {
    let mut fixtures = 0;
    for (spec, seeds) in [(GameSpec::dark_hex(4), 0..10u64), (GameSpec::phantom_go(4), 10..20)] {
        let net = tiny_net(&spec, 3);
        let cfg = SearchConfig { simulations: 32, k: 1, m: 1, sampler: SamplerKind::Random, ..Default::default() };
        for seed in seeds {
            let h = random_history(spec, 500 + seed, 8);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let maple = maple_search(&h, &net, &cfg, &mut rng).map_err(|e| e.to_string())?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let world = sample_random(&derive_constraints(&h), 1, &mut rng).worlds.remove(0);
            let (children, _) = alphazero_tree(&world, &root_exclusions(&h), &net, &cfg, &mut rng);
            let total: u32 = children.iter().map(|c| c.2).sum();
            let mut pi = vec![0.0; spec.num_actions()];
            for (a, _, n) in children {
                pi[a] = n as f64 / total as f64;
            }
            ensure(maple.pi == pi, || format!("fixture {seed}: visit distributions differ"))?;
            fixtures += 1;
        }
    }
    Ok(format!("{fixtures} fixtures bit-identical"))
}

// ---------------------------------------------------------------------------
// Sampler

fn sampler_oracle() -> Outcome {
    let spec = GameSpec::dark_hex(3);
    let k = 3;
    let histories = 200;
    let draws_per_history = 500;
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut statistic = 0.0;
    let mut dof = 0usize;
    let mut used = 0;
    for h in 0..histories {
        let history = random_history(spec, 7000 + h, 6);
        let c = derive_constraints(&history);
        let all = enumerate_consistent(&c, 1 << 20).map_err(|e| e.to_string())?.worlds;
        let index: HashMap<_, usize> = all.iter().enumerate().map(|(i, w)| (w.board_key(), i)).collect();
        let n = all.len();
        let mut counts = vec![0u64; n];
        for _ in 0..draws_per_history {
            let set = sample_random(&c, k, &mut rng).worlds;
            ensure(set.len() == k.min(n), || format!("history {h}: got {} of {n}", set.len()))?;
            let mut seen = HashSet::new();
            for w in &set {
                let i = *index.get(&w.board_key()).ok_or_else(|| format!("history {h}: sample outside the information set"))?;
                ensure(&all[i] == w, || format!("history {h}: sampled world differs from enumeration"))?;
                ensure(seen.insert(i), || format!("history {h}: duplicate world in one sample"))?;
                counts[i] += 1;
            }
        }
        if n <= k {
            continue;
        }
        // Inclusion indicators of a k-of-n draw without replacement are
        // equicorrelated; this scaling makes the sum χ² with n − 1 dof.
        let p = k as f64 / n as f64;
        let d = draws_per_history as f64;
        let e = d * p;
        let s: f64 = counts.iter().map(|&o| (o as f64 - e).powi(2)).sum();
        statistic += s * (n as f64 - 1.0) / (d * p * (1.0 - p) * n as f64);
        dof += n - 1;
        used += 1;
    }
    let chi = ChiSquared::new(dof as f64).map_err(|e| e.to_string())?;
    let p_value = 1.0 - chi.cdf(statistic);
    ensure(p_value > 0.01, || format!("χ² = {statistic:.1} on {dof} dof, p = {p_value:.4}"))?;
    Ok(format!(
        "{histories} histories, {} draws, subset holds; pooled χ² = {statistic:.1} on {dof} dof ({used} histories with n > k), p = {p_value:.3}",
        histories as usize * draws_per_history
    ))
}

// ---------------------------------------------------------------------------
// Rules

fn oracle_hex_neighbors(cell: usize, size: usize) -> Vec<usize> {
    let (r, c) = ((cell / size) as i64, (cell % size) as i64);
    let n = size as i64;
    [(r - 1, c), (r - 1, c + 1), (r, c - 1), (r, c + 1), (r + 1, c - 1), (r + 1, c)]
        .into_iter()
        .filter(|&(a, b)| a >= 0 && a < n && b >= 0 && b < n)
        .map(|(a, b)| (a * n + b) as usize)
        .collect()
}

/// First joins the top and bottom rows, Second the left and right columns.
fn oracle_hex_winner(size: usize, owner: &[Option<PlayerId>]) -> Option<PlayerId> {
    for p in PlayerId::BOTH {
        let start: Vec<usize> = (0..size).map(|i| if p == PlayerId::First { i } else { i * size }).collect();
        let goal = |c: usize| if p == PlayerId::First { c / size == size - 1 } else { c % size == size - 1 };
        let mut seen = vec![false; size * size];
        let mut queue: VecDeque<usize> = start.into_iter().filter(|&c| owner[c] == Some(p)).collect();
        queue.iter().for_each(|&c| seen[c] = true);
        while let Some(c) = queue.pop_front() {
            if goal(c) {
                return Some(p);
            }
            for nb in oracle_hex_neighbors(c, size) {
                if !seen[nb] && owner[nb] == Some(p) {
                    seen[nb] = true;
                    queue.push_back(nb);
                }
            }
        }
    }
    None
}

fn rules_suites() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for case in 0..1000 {
        let size = rng.random_range(2..=11);
        let area = size * size;
        let mut order: Vec<usize> = (0..area).collect();
        for i in (1..area).rev() {
            order.swap(i, rng.random_range(0..=i));
        }
        let fill = rng.random_range(0..=area);
        let mut owner = vec![None; area];
        let mut world = HexWorld::new(size);
        for (i, &cell) in order.iter().take(fill).enumerate() {
            let p = if i % 2 == 0 { PlayerId::First } else { PlayerId::Second };
            owner[cell] = Some(p);
            world = world.with_stone(cell, p);
        }
        let expected = oracle_hex_winner(size, &owner);
        ensure(world.winner() == expected, || format!("fill-out {case}: {:?} vs oracle {expected:?}", world.winner()))?;
        if fill == area {
            ensure(expected.is_some(), || format!("fill-out {case}: full board without a winner"))?;
        }
    }

    let b = PlayerId::First;
    let w = PlayerId::Second;
    let set = |cells: &[usize]| -> CellSet { cells.iter().copied().collect() };
    let go = |black: &[usize], white: &[usize], to_play: PlayerId| {
        GoWorld::from_stones(3, 1.0, set(black), set(white), to_play, 4, 0, [0; 2], [CellSet::default(); 2])
    };
    // Capture.
    let (fb, next) = go(&[1], &[0], b).attempt(Action::Place(3));
    ensure(fb == MoveFeedback::Legal { captured: vec![0] }, || format!("capture: {fb:?}"))?;
    ensure(next.unwrap().stones(w).is_empty(), || "capture left the stone".into())?;
    // Suicide, single stone and group.
    ensure(go(&[1, 3], &[8], w).placement(0) == MoveFeedback::IllegalSuicide, || "single-stone suicide".into())?;
    ensure(go(&[2, 4, 6], &[0, 1], w).placement(3) == MoveFeedback::IllegalSuicide, || "group suicide".into())?;
    ensure(go(&[2, 3, 4], &[1], b).placement(0) == MoveFeedback::Legal { captured: vec![1] }, || {
        "capture beats suicide".into()
    })?;
    // Simple ko on 4×4.
    let ko = GoWorld::from_stones(4, 1.0, set(&[1, 4, 9]), set(&[2, 5, 7, 10]), b, 7, 0, [0; 2], [CellSet::default(); 2]);
    let (fb, next) = ko.attempt(Action::Place(6));
    ensure(fb == MoveFeedback::Legal { captured: vec![5] }, || format!("ko capture: {fb:?}"))?;
    let next = next.unwrap();
    ensure(next.placement(5) == MoveFeedback::IllegalKo, || "immediate ko recapture allowed".into())?;
    let later = next.attempt(Action::Place(15)).1.unwrap().attempt(Action::Place(14)).1.unwrap();
    ensure(later.placement(5) == MoveFeedback::Legal { captured: vec![6] }, || "ko never released".into())?;
    // Passes and scoring.
    let mut s = GameSession::new(GameSpec::phantom_go(5), 0).unwrap();
    s.attempt(b, Action::Pass).unwrap();
    ensure(!s.is_over(), || "one pass ended the game".into())?;
    s.attempt(w, Action::Pass).unwrap();
    let out = s.outcome().ok_or("two passes did not end the game")?;
    ensure(out == GameOutcome { result: GameResult::Win(w), score_margin: Some(-1.0) }, || format!("empty board: {out:?}"))?;
    let full = GoWorld::from_stones(5, 1.0, CellSet::full(25), CellSet::default(), b, 25, 2, [0; 2], [CellSet::default(); 2]);
    ensure(full.score_area() == 24.0, || format!("all-black board scores {}", full.score_area()))?;
    let walls_b: CellSet = (0..25).filter(|c| c % 5 == 1).collect();
    let walls_w: CellSet = (0..25).filter(|c| c % 5 == 3).collect();
    let walls = GoWorld::from_stones(5, 1.0, walls_b, walls_w, b, 10, 2, [0; 2], [CellSet::default(); 2]);
    ensure(walls.score_area() == -1.0, || format!("walls score {}", walls.score_area()))?;
    Ok("1000 Hex fill-outs match BFS; Go capture/suicide/ko/pass/scoring fixtures exact (empty 5x5 margin -1)".into())
}

// ---------------------------------------------------------------------------
// Gradient check

fn gradient_sample(spec: GameSpec, rng: &mut ChaCha8Rng) -> TrainingSample {
    let mut s = GameSession::new(spec, 0).unwrap();
    let moves = rng.random_range(1..=spec.area() / 2);
    while !s.is_over() && (s.world().move_number() as usize) < moves {
        let p = s.to_play();
        let a = *s.world().legal_actions().choose(rng).unwrap();
        s.attempt(p, a).unwrap();
    }
    let viewer = s.to_play();
    let w = s.world().clone();
    let legal = w.legal_mask();
    let mut pi: Vec<f32> = legal.iter().map(|&l| if l { rng.random::<f32>() + 0.05 } else { 0.0 }).collect();
    let sum: f32 = pi.iter().sum();
    pi.iter_mut().for_each(|p| *p /= sum);
    let positive = encode_board4(&w, viewer);
    let mut negative = positive.clone();
    let area = spec.area();
    let (own, opp) = negative.data.split_at_mut(area);
    own.swap_with_slice(&mut opp[..area]);
    TrainingSample {
        state: encode_state(&w, viewer),
        legal,
        pi,
        z: rng.random_range(-1.0..1.0),
        triplet: Some(Triplet { anchor: encode_history(s.history(viewer)), positive, negative }),
    }
}

fn gradient_check() -> Outcome {
    let mut worst = 0.0f64;
    let mut tensors = 0;
    let (mut active, mut inactive) = (0, 0);
    for (spec, seed) in [(GameSpec::dark_hex(3), 1u64), (GameSpec::phantom_go(3), 2)] {
        let cfg = NetConfig::for_game(&spec, 1, 3, 4);
        for scale in [1.0, 40.0] {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let net = Network::new_random(cfg, &mut rng);
            let mut params: Vec<Vec<f64>> = cast(net.params());
            for (p, s) in params.iter_mut().zip(&net.layout().specs) {
                if s.name.ends_with("/b") {
                    p.iter_mut().for_each(|x| *x = rng.random_range(-0.2..0.2));
                }
                if s.name.starts_with("state/fc") {
                    p.iter_mut().for_each(|x| *x *= scale);
                }
            }
            let batch: Vec<TrainingSample> = (0..3).map(|_| gradient_sample(spec, &mut rng)).collect();
            let f32_params: Vec<Vec<f32>> = cast(&params);
            for s in &batch {
                let d = maple_core::nn::triplet_distances(&cfg, net.layout(), &f32_params, s.triplet.as_ref().unwrap());
                if 1.0 + d.d_ap - d.d_an > 0.0 {
                    active += 1;
                } else {
                    inactive += 1;
                }
            }
            for t in check_gradients(&cfg, &params, &batch, 1e-4, 1e-4) {
                tensors += 1;
                ensure(t.relative_error < 1e-4, || format!("{} relative error {:.2e}", t.name, t.relative_error))?;
                worst = worst.max(t.relative_error);
            }
        }
    }
    ensure(active > 0 && inactive > 0, || format!("hinge cases: {active} active, {inactive} inactive"))?;
    Ok(format!("{tensors} tensor checks, worst relative error {worst:.2e}; hinge active {active}, inactive {inactive}"))
}

// ---------------------------------------------------------------------------
// Training smoke, Siamese property, ablation shape, determinism

fn smoke_config(seed: u64) -> TrainConfig {
    TrainConfig {
        game: GameSpec::dark_hex(3),
        net: NetShape { blocks: 1, filters: 16, embed_dim: EMBED_DIM },
        search: SearchConfig {
            algorithm: Algorithm::Maple,
            sampler: SamplerKind::Siamese,
            simulations: 16,
            k: 3,
            m: 10,
            ..Default::default()
        },
        iterations: 20,
        games_per_iter: 50,
        steps_per_iter: 50,
        batch: 64,
        lr: 0.02,
        momentum: 0.9,
        weight_decay: 1e-4,
        buffer_games: 500,
        seed,
        workers: std::thread::available_parallelism().map_or(1, |n| n.get()),
    }
}

fn eval_search(k: usize) -> SearchConfig {
    SearchConfig {
        algorithm: Algorithm::Maple,
        sampler: SamplerKind::Siamese,
        simulations: 100,
        k,
        m: 10,
        noise_eps: 0.0,
        ..Default::default()
    }
}

struct Smoke {
    dir: tempfile::TempDir,
    final_ckpt: std::path::PathBuf,
    steps_per_iter: u64,
}

fn load(path: &Path) -> Arc<Network> {
    Arc::new(checkpoint::load(path).unwrap_or_else(|e| panic!("{}: {e}", path.display())).network)
}

fn lower_bound(m: &maple_core::eval::MatchResult) -> (f64, f64, f64) {
    let (rate, ci) = m.rate_ci().unwrap();
    (rate, ci, rate - ci)
}

fn training_smoke(smoke: &Smoke) -> Outcome {
    let game = GameSpec::dark_hex(3);
    let trained = Agent::Search { net: load(&smoke.final_ckpt), config: eval_search(3) };
    let initial = Agent::Search { net: load(&smoke.dir.path().join(checkpoint_name(0))), config: eval_search(3) };
    let mut lines = Vec::new();
    let mut ok = true;
    for (name, opp, seed) in [("random", Agent::Random, 31), ("ckpt_0", initial, 32)] {
        let m = run_match(&MatchSpec { game, a: trained.clone(), b: opp, games_total: 200, seed })
            .map_err(|e| e.to_string())?;
        let (rate, ci, lo) = lower_bound(&m);
        ok &= lo >= 0.65;
        lines.push(format!("vs {name} {rate:.3} ± {ci:.3} (W{} D{} L{})", m.wins, m.draws, m.losses));
    }
    // Value loss on a fixed probe batch of held-out positions.
    let records = held_out_records(&load(&smoke.final_ckpt), 8_000_000, 20);
    let refs: Vec<&TrainingRecord> = records.iter().collect();
    let probe = make_batch(&refs, &mut ChaCha8Rng::seed_from_u64(3));
    let value_loss = |path: &Path| {
        let net = load(path);
        loss_and_gradients(net.config(), net.layout(), net.params(), &probe, 0.0).0.value
    };
    let before = value_loss(&smoke.dir.path().join(checkpoint_name(0)));
    let after = value_loss(&smoke.final_ckpt);
    ok &= after < before;
    lines.push(format!("probe value loss {before:.4} -> {after:.4}"));
    let text = lines.join("; ");
    ensure(ok, || format!("lower 95% bound below 0.65 or probe value loss did not fall: {text}"))?;
    Ok(text)
}

fn held_out_records(net: &Arc<Network>, seed: u64, games: u64) -> Vec<TrainingRecord> {
    let cfg = smoke_config(0).search;
    (0..games)
        .flat_map(|g| selfplay_game(net, GameSpec::dark_hex(3), &cfg, g, seed + g).unwrap().records)
        .collect()
}

fn siamese_property(smoke: &Smoke) -> Outcome {
    let trained = load(&smoke.final_ckpt);
    let initial = load(&smoke.dir.path().join(checkpoint_name(0)));
    // Held-out positions come from fresh games with unseen seeds.
    let records = held_out_records(&trained, 9_000_000, 200);
    let (ok, total) = triplet_success(&trained, &records, 1, &mut ChaCha8Rng::seed_from_u64(1));
    let (ok0, total0) = triplet_success(&initial, &records, 1, &mut ChaCha8Rng::seed_from_u64(1));
    let frac = ok as f64 / total as f64;
    let base = ok0 as f64 / total0 as f64;
    let se = (0.25 / total0 as f64).sqrt();
    ensure(frac >= 0.7, || format!("trained fraction {frac:.3} < 0.7 ({total} triplets); untrained {base:.3}"))?;
    ensure((base - 0.5).abs() <= 4.0 * se, || format!("untrained fraction {base:.3} not within 0.5 ± {:.3}", 4.0 * se))?;
    Ok(format!("trained {frac:.3} over {total} held-out triplets; untrained {base:.3} (0.5 ± {:.3})", 4.0 * se))
}

fn desk_pool(smoke: &Smoke) -> Vec<Agent> {
    let mid = checkpoint_name(10 * smoke.steps_per_iter);
    vec![
        Agent::Random,
        Agent::Rollout { simulations: 50 },
        Agent::Rollout { simulations: 400 },
        Agent::Search { net: load(&smoke.dir.path().join(checkpoint_name(0))), config: eval_search(3) },
        Agent::Search { net: load(&smoke.dir.path().join(mid)), config: eval_search(3) },
    ]
}

fn ablation_shape(smoke: &Smoke) -> Outcome {
    let spec = AblationSpec {
        game: GameSpec::dark_hex(3),
        axis: Axis::K,
        trained: vec![(3, load(&smoke.final_ckpt))],
        eval_values: vec![1, 3],
        base: eval_search(3),
        opponents: desk_pool(smoke),
        games_per_opponent: 200,
        seed: 41,
    };
    let grid = ablation_grid(&spec).map_err(|e| e.to_string())?;
    let a = grid.cell(3, 1).unwrap();
    let b = grid.cell(3, 3).unwrap();
    let se = |c: &maple_core::eval::GridCell| c.ci / 1.96;
    let margin = b.rate - a.rate;
    let half = 1.96 * (se(a).powi(2) + se(b).powi(2)).sqrt();
    let text = format!(
        "k_E=1 {:.3} (n={}), k_E=3 {:.3} (n={}), margin {margin:+.3} ± {half:.3}",
        a.rate,
        a.n(),
        b.rate,
        b.n()
    );
    ensure(margin - half > 0.0, || format!("interval includes zero: {text}"))?;
    Ok(text)
}

fn elo_fit_check() -> Outcome {
    let names = vec!["a".to_string(), "b".to_string()];
    let t = elo_fit(&names, &[PairResult { a: 0, b: 1, wins_a: 75.0, wins_b: 25.0, draws: 0.0 }], 1000.0)
        .map_err(|e| e.to_string())?;
    let gap = t.ratings[0] - t.ratings[1];
    ensure((gap - 190.85).abs() <= 0.01, || format!("gap {gap:.4}"))?;
    let names: Vec<String> = (0..4).map(|i| format!("p{i}")).collect();
    let results = [
        PairResult { a: 0, b: 1, wins_a: 30.0, wins_b: 10.0, draws: 2.0 },
        PairResult { a: 1, b: 2, wins_a: 12.0, wins_b: 20.0, draws: 0.0 },
        PairResult { a: 2, b: 3, wins_a: 25.0, wins_b: 5.0, draws: 4.0 },
        PairResult { a: 3, b: 0, wins_a: 3.0, wins_b: 27.0, draws: 0.0 },
    ];
    let x = elo_fit(&names, &results, 1000.0).map_err(|e| e.to_string())?;
    let y = elo_fit(&names, &results, -250.0).map_err(|e| e.to_string())?;
    for i in 0..4 {
        for j in 0..4 {
            let d = (x.ratings[i] - x.ratings[j]) - (y.ratings[i] - y.ratings[j]);
            ensure(d.abs() < 1e-9, || format!("gap {i}-{j} moved by {d:e}"))?;
        }
    }
    Ok(format!("75/25 gap {gap:.4}; gaps anchor-invariant"))
}

fn determinism() -> Outcome {
    let mut cfg = smoke_config(77);
    cfg.iterations = 3;
    cfg.games_per_iter = 10;
    cfg.steps_per_iter = 10;
    cfg.workers = 1;
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    let mut metrics = Vec::new();
    let mut grids = Vec::new();
    for d in &dirs {
        let summary = run_training(&cfg, d.path(), &mut |_| {}).map_err(|e| e.to_string())?;
        metrics.push(std::fs::read(d.path().join(METRICS_FILE)).unwrap());
        let spec = AblationSpec {
            game: cfg.game,
            axis: Axis::K,
            trained: vec![(3, load(&summary.final_checkpoint))],
            eval_values: vec![1, 3],
            base: SearchConfig { simulations: 20, ..eval_search(3) },
            opponents: vec![Agent::Random, Agent::Rollout { simulations: 30 }],
            games_per_opponent: 10,
            seed: 5,
        };
        grids.push(ablation_grid(&spec).map_err(|e| e.to_string())?.to_text());
    }
    ensure(metrics[0] == metrics[1], || "metrics files differ".into())?;
    ensure(grids[0] == grids[1], || "grid files differ".into())?;
    Ok(format!("metrics ({} bytes) and grid ({} bytes) byte-identical", metrics[0].len(), grids[0].len()))
}

// ---------------------------------------------------------------------------

fn main() {
    let filter = std::env::var("ACCEPTANCE_ONLY").ok();
    let wanted = |name: &str| filter.as_deref().is_none_or(|f| name.contains(f));
    let mut failures = 0;
    let mut report = |name: &str, f: &mut dyn FnMut() -> Outcome| {
        if !wanted(name) {
            return;
        }
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            Err(p.downcast_ref::<String>().cloned().or(p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default())
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {name} ({secs:.1}s): {detail}"),
            Err(detail) => {
                failures += 1;
                println!("FAIL {name} ({secs:.1}s): {detail}");
            }
        }
    };
    report("aggregation-oracle", &mut aggregation_oracle);
    report("puct-unit", &mut puct_unit);
    report("budget-accounting", &mut budget_accounting);
    report("k1-degeneracy", &mut k1_degeneracy);
    report("sampler-oracle", &mut sampler_oracle);
    report("rules-suites", &mut rules_suites);
    report("gradient-check", &mut gradient_check);

    let needs_smoke = ["training-smoke", "siamese-property", "ablation-shape"].iter().any(|n| wanted(n));
    let smoke = if needs_smoke {
        let cfg = smoke_config(1);
        let dir = tempfile::tempdir().expect("temporary directory");
        let start = Instant::now();
        match run_training(&cfg, dir.path(), &mut |line| eprintln!("{line}")) {
            Ok(summary) => {
                eprintln!("smoke training finished in {:.1}s", start.elapsed().as_secs_f64());
                Some(Smoke { dir, final_ckpt: summary.final_checkpoint, steps_per_iter: cfg.steps_per_iter as u64 })
            }
            Err(e) => {
                eprintln!("smoke training failed: {e}");
                None
            }
        }
    } else {
        None
    };
    let missing = || Err::<String, String>("smoke training run failed".into());
    report("training-smoke", &mut || smoke.as_ref().map_or_else(missing, training_smoke));
    report("siamese-property", &mut || smoke.as_ref().map_or_else(missing, siamese_property));
    report("ablation-shape", &mut || smoke.as_ref().map_or_else(missing, ablation_shape));
    report("elo-fit", &mut elo_fit_check);
    report("determinism", &mut determinism);
    if failures > 0 {
        std::process::exit(1);
    }
}
