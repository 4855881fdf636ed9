use rand::seq::SliceRandom;
use rand::Rng;

use super::{root_exclusions, SearchError};
use crate::game::{outcome_value, Action, ObservationHistory, PlayerId, WorldState};
use crate::sampler::{derive_constraints, sample_random};

const UCT_C: f64 = std::f64::consts::SQRT_2;

struct Node {
    world: WorldState,
    untried: Vec<Action>,
    children: Vec<(Action, usize)>,
    visits: u32,
    /// Sum of results from the perspective of the player who moved into
    /// this node.
    total: f64,
}

impl Node {
    fn new<R: Rng + ?Sized>(world: WorldState, excluded: &[usize], rng: &mut R) -> Self {
        let area = world.area();
        let mut untried: Vec<Action> =
            world.legal_actions().into_iter().filter(|a| !excluded.contains(&a.index(area))).collect();
        untried.shuffle(rng);
        Node { world, untried, children: Vec::new(), visits: 0, total: 0.0 }
    }
}

/// Plays uniformly random legal moves to the end of the game and returns
/// the result for `perspective`.
pub fn random_rollout_value<R: Rng + ?Sized>(world: &WorldState, perspective: PlayerId, rng: &mut R) -> f64 {
    let mut w = world.clone();
    let n = w.num_actions();
    let area = w.area();
    let mut order: Vec<usize> = (0..n).collect();
    loop {
        if let Some(outcome) = w.terminal_outcome() {
            return outcome_value(&outcome, perspective);
        }
        order.shuffle(rng);
        w = order
            .iter()
            .find_map(|&i| w.play(Action::from_index(i, area)))
            .expect("a non-terminal position has a legal move");
    }
}

/// UCT with random playouts on a single uniformly sampled world.
pub fn rollout_search<R: Rng + ?Sized>(
    history: &ObservationHistory,
    simulations: u32,
    rng: &mut R,
) -> Result<Action, SearchError> {
    if history.is_over() {
        return Err(SearchError::GameOver);
    }
    let constraints = derive_constraints(history);
    let world = sample_random(&constraints, 1, rng).worlds.pop().ok_or(SearchError::EmptyInformationSet)?;
    let excluded = root_exclusions(history);
    let mut nodes = vec![Node::new(world, &excluded, rng)];
    if nodes[0].untried.is_empty() {
        return Err(SearchError::NoActions);
    }
    for _ in 0..simulations.max(1) {
        let mut path = vec![0];
        let mut node = 0;
        while nodes[node].untried.is_empty() && !nodes[node].children.is_empty() {
            let parent_visits = nodes[node].visits.max(1) as f64;
            let ln = parent_visits.ln();
            let (_, best) = nodes[node]
                .children
                .iter()
                .map(|&(_, c)| {
                    let ch = &nodes[c];
                    let score = ch.total / ch.visits as f64 + UCT_C * (ln / ch.visits as f64).sqrt();
                    (score, c)
                })
                .fold((f64::NEG_INFINITY, usize::MAX), |acc, x| if x.0 > acc.0 { x } else { acc });
            node = best;
            path.push(node);
        }
        if let Some(action) = nodes[node].untried.pop() {
            let next = nodes[node].world.play(action).expect("untried actions are legal");
            nodes.push(Node::new(next, &[], rng));
            let c = nodes.len() - 1;
            nodes[node].children.push((action, c));
            node = c;
            path.push(node);
        }
        let leaf = &nodes[node].world;
        let mover = leaf.to_play().opponent();
        let result = random_rollout_value(leaf, mover, rng);
        let mut value = result;
        for &n in path.iter().rev() {
            nodes[n].visits += 1;
            nodes[n].total += value;
            value = -value;
        }
    }
    let best = nodes[0]
        .children
        .iter()
        .max_by_key(|&&(a, c)| (nodes[c].visits, std::cmp::Reverse(a.index(nodes[0].world.area()))))
        .map(|&(a, _)| a);
    best.ok_or(SearchError::NoActions)
}
