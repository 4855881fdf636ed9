use maple_core::agent::random_action;
use maple_core::encode::{encode_board4, encode_history, encode_state};
use maple_core::game::phantomgo::go_neighbors;
use maple_core::game::{
    Action, CellSet, GameKind, GameSession, GameSpec, MoveFeedback, ObservationHistory, PlayerId, WorldState,
};
use maple_core::nn::{NetConfig, Network};
use maple_core::sampler::{derive_constraints, enumerate_consistent, sample_random, sample_siamese};
use proptest::prelude::*;
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn spec_strategy() -> impl Strategy<Value = GameSpec> {
    prop_oneof![(2usize..=6).prop_map(GameSpec::dark_hex), (2usize..=5).prop_map(GameSpec::phantom_go)]
}

/// A session after up to `moves` legal moves, with refused attempts mixed in.
fn play_out(spec: GameSpec, seed: u64, moves: usize) -> GameSession {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut s = GameSession::new(spec, seed).unwrap();
    while !s.is_over() && (s.world().move_number() as usize) < moves {
        let p = s.to_play();
        let a = random_action(s.history(p), &mut rng);
        s.attempt(p, a).unwrap();
    }
    s
}

fn groups_have_liberties(w: &WorldState) -> bool {
    let size = w.size();
    let occupied = w.stones(PlayerId::First).union(w.stones(PlayerId::Second));
    for p in PlayerId::BOTH {
        let stones = w.stones(p);
        let mut seen = CellSet::default();
        for start in stones.iter() {
            if seen.contains(start) {
                continue;
            }
            let mut stack = vec![start];
            seen.insert(start);
            let mut liberty = false;
            while let Some(c) = stack.pop() {
                for nb in go_neighbors(c, size) {
                    if !occupied.contains(nb) {
                        liberty = true;
                    } else if stones.contains(nb) && !seen.contains(nb) {
                        seen.insert(nb);
                        stack.push(nb);
                    }
                }
            }
            if !liberty {
                return false;
            }
        }
    }
    true
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn referee_is_deterministic_and_sound(spec in spec_strategy(), seed in any::<u64>(), moves in 0usize..30) {
        let s = play_out(spec, seed, moves);
        let w = s.world();
        if w.is_terminal() {
            return Ok(());
        }
        let p = w.to_play();
        let legal = w.legal_actions();
        for index in 0..spec.num_actions() {
            let a = Action::from_index(index, spec.area());
            let r1 = w.apply_attempt(p, a).unwrap();
            let r2 = w.apply_attempt(p, a).unwrap();
            prop_assert_eq!(&r1.feedback, &r2.feedback);
            prop_assert_eq!(&r1.next, &r2.next);
            prop_assert_eq!(r1.feedback.is_legal(), legal.contains(&a));
            prop_assert_eq!(w.play(a).is_some(), legal.contains(&a));
            let [first, second] = &r1.events;
            let (mine, theirs) = if p == PlayerId::First { (first, second) } else { (second, first) };
            prop_assert!(mine.is_some());
            if r1.feedback.is_legal() {
                let theirs = theirs.as_ref().unwrap();
                prop_assert_eq!(&theirs.revealed_cells, &mine.as_ref().unwrap().revealed_cells);
                prop_assert_eq!(theirs.visible_action, (a == Action::Pass).then_some(Action::Pass));
            } else {
                prop_assert!(theirs.is_none());
                prop_assert_eq!(r1.next.board_key(), w.board_key());
            }
            if r1.feedback == MoveFeedback::IllegalOccupied {
                let Action::Place(cell) = a else { unreachable!() };
                let before = w.known_by(p);
                let after = r1.next.known_by(p);
                let expected = if w.owner(cell) == Some(p.opponent()) { before.with(cell) } else { before };
                prop_assert_eq!(after, expected);
                prop_assert_eq!(r1.next.known_by(p.opponent()), w.known_by(p.opponent()));
            }
        }
    }

    #[test]
    fn go_groups_keep_liberties_and_illegal_attempts_keep_passes(size in 2usize..=5, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut s = GameSession::new(GameSpec::phantom_go(size), seed).unwrap();
        while !s.is_over() {
            let p = s.to_play();
            let passes = match s.world() {
                WorldState::Go(g) => g.consecutive_passes(),
                _ => unreachable!(),
            };
            let a = *s.world().legal_actions().choose(&mut rng).unwrap();
            let probe = Action::Place(rng.random_range(0..size * size));
            if !s.world().is_legal(probe) {
                s.attempt(p, probe).unwrap();
                if let WorldState::Go(g) = s.world() {
                    prop_assert_eq!(g.consecutive_passes(), passes);
                }
                if s.is_over() {
                    break;
                }
            }
            let fb = s.attempt(p, a).unwrap();
            prop_assert!(fb.is_legal());
            prop_assert!(groups_have_liberties(s.world()));
            for c in fb.captured() {
                prop_assert!(s.history(PlayerId::First).revealed_captures().contains(*c));
                prop_assert!(s.history(PlayerId::Second).revealed_captures().contains(*c));
            }
        }
    }

    #[test]
    fn histories_are_replayable_and_twins_are_indistinguishable(spec in spec_strategy(), seed in any::<u64>(), moves in 0usize..20) {
        let s = play_out(spec, seed, moves);
        for p in PlayerId::BOTH {
            let h = s.history(p);
            prop_assert!(h.caches_consistent());
            let twin = ObservationHistory::replay(spec, p, h.events(), h.outcome());
            prop_assert_eq!(encode_history(&twin), encode_history(h));
        }
    }

    #[test]
    fn encoders_are_pure_and_flip_with_perspective(spec in spec_strategy(), seed in any::<u64>(), moves in 0usize..20) {
        let s = play_out(spec, seed, moves);
        let w = s.world();
        let area = spec.area();
        let a = encode_state(w, PlayerId::First);
        let b = encode_state(w, PlayerId::Second);
        prop_assert_eq!(&a, &encode_state(w, PlayerId::First));
        for (x, y) in [(0, 1), (1, 0), (2, 3), (3, 2), (4, 5), (5, 4)] {
            prop_assert_eq!(&a.data[x * area..(x + 1) * area], &b.data[y * area..(y + 1) * area]);
        }
        prop_assert_eq!(encode_board4(w, PlayerId::First), a.truncated(4));
    }

    #[test]
    fn sampled_worlds_respect_the_viewers_knowledge(spec in spec_strategy(), seed in any::<u64>(), moves in 1usize..20) {
        let s = play_out(spec, seed, moves);
        let viewer = s.to_play();
        let h = s.history(viewer);
        let c = derive_constraints(h);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 1);
        for w in sample_random(&c, 4, &mut rng).worlds {
            prop_assert!(c.is_valid(&w));
            prop_assert_eq!(w.stones(viewer), h.own_stones());
            prop_assert!(h.known_opponent_stones().is_subset(w.stones(viewer.opponent())));
        }
    }

    #[test]
    fn sampled_worlds_are_sound_distinct_and_sorted(size in 2usize..=3, go in any::<bool>(), seed in any::<u64>(), moves in 0usize..8, k in 1usize..6) {
        let spec = if go { GameSpec::phantom_go(size) } else { GameSpec::dark_hex(size) };
        let s = play_out(spec, seed, moves);
        if s.is_over() {
            return Ok(());
        }
        let viewer = s.to_play();
        let h = s.history(viewer);
        let c = derive_constraints(h);
        let all = enumerate_consistent(&c, 1 << 20).unwrap().worlds;
        prop_assert!(all.iter().any(|w| w.board_key() == s.world().board_key()), "truth missing from enumeration");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let set = sample_random(&c, k, &mut rng);
        let keys: Vec<_> = set.worlds.iter().map(WorldState::board_key).collect();
        let mut dedup = keys.clone();
        dedup.sort();
        dedup.dedup();
        prop_assert_eq!(dedup.len(), keys.len());
        prop_assert_eq!(keys.len(), k.min(all.len()));
        for w in &set.worlds {
            prop_assert!(all.contains(w));
            prop_assert_eq!(w.stones(viewer), h.own_stones());
            prop_assert_eq!(w.to_play(), viewer);
            prop_assert!(h.known_empty().is_disjoint(w.stones(viewer.opponent())));
            if spec.kind == GameKind::DarkHex {
                // Every refused probe hit an opponent stone.
                prop_assert!(h.tried_cells().is_subset(w.stones(viewer.opponent())));
            }
        }
        let net = Network::new_random(NetConfig::for_game(&spec, 1, 2, 4), &mut rng);
        let filtered = sample_siamese(&c, 8, k, &net, h, &mut rng);
        let d = filtered.distances.clone().unwrap();
        prop_assert!(d.windows(2).all(|p| p[0] <= p[1]));
        prop_assert!(filtered.worlds.iter().all(|w| all.contains(w)));
    }
}
