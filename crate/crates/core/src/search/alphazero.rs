use rand::Rng;

use super::{
    add_dirichlet_noise, choose_action, puct_select, renormalize, visit_distribution, BudgetCounter, Evaluator,
    SearchConfig, SearchError, SearchResult,
};
use crate::game::{outcome_value, Action, WorldState};

struct Child {
    action: usize,
    prior: f64,
    visits: u32,
    total: f64,
    node: Option<usize>,
}

struct Node {
    world: WorldState,
    children: Vec<Child>,
    expanded: bool,
}

/// Perfect-information search on one world. Returns the root children as
/// `(action index, prior, visits)` plus the evaluation count.
pub fn alphazero_tree<E: Evaluator + ?Sized, R: Rng + ?Sized>(
    world: &WorldState,
    excluded: &[usize],
    net: &E,
    config: &SearchConfig,
    rng: &mut R,
) -> (Vec<(usize, f64, u32)>, BudgetCounter) {
    let area = world.area();
    let alpha = config.alpha_for(area);
    let mut budget = BudgetCounter::default();
    let mut nodes = vec![Node { world: world.clone(), children: Vec::new(), expanded: false }];
    for _ in 0..config.simulations {
        budget.simulations += 1;
        let mut node = 0;
        let mut path: Vec<(usize, usize)> = Vec::new();
        while nodes[node].expanded && !nodes[node].children.is_empty() {
            let cs = &nodes[node].children;
            let q: Vec<f64> =
                cs.iter().map(|c| if c.visits == 0 { 0.0 } else { c.total / c.visits as f64 }).collect();
            let p: Vec<f64> = cs.iter().map(|c| c.prior).collect();
            let n: Vec<u32> = cs.iter().map(|c| c.visits).collect();
            let i = puct_select(&q, &p, &n, config.c_puct);
            path.push((node, i));
            node = match nodes[node].children[i].node {
                Some(c) => c,
                None => {
                    let action = Action::from_index(nodes[node].children[i].action, area);
                    let next = nodes[node].world.play(action).expect("expanded actions are legal");
                    nodes.push(Node { world: next, children: Vec::new(), expanded: false });
                    let c = nodes.len() - 1;
                    nodes[node].children[i].node = Some(c);
                    c
                }
            };
        }
        budget.valid_at_leaf.push(1);
        let leaf = nodes[node].world.clone();
        let mut value = match leaf.terminal_outcome() {
            Some(outcome) => {
                budget.terminal_hits += 1;
                nodes[node].expanded = true;
                outcome_value(&outcome, leaf.to_play())
            }
            None => {
                let legal = leaf.legal_mask();
                let (policy, v) = net.evaluate(&leaf, &legal);
                budget.policy_value_evals += 1;
                if !nodes[node].expanded {
                    budget.expansions += 1;
                    let mut raw: Vec<Option<f64>> =
                        policy.iter().zip(&legal).map(|(&p, &l)| l.then_some(p as f64)).collect();
                    if node == 0 {
                        for &a in excluded {
                            if a < raw.len() {
                                raw[a] = None;
                            }
                        }
                    }
                    let mut priors = renormalize(&raw);
                    if node == 0 {
                        let mut p: Vec<f64> = priors.iter().map(|x| x.1).collect();
                        add_dirichlet_noise(&mut p, config.noise_eps, alpha, rng);
                        priors.iter_mut().zip(p).for_each(|(x, p)| x.1 = p);
                    }
                    let n = &mut nodes[node];
                    n.expanded = true;
                    n.children = priors
                        .into_iter()
                        .map(|(action, prior)| Child { action, prior, visits: 0, total: 0.0, node: None })
                        .collect();
                }
                v as f64
            }
        };
        for &(n, i) in path.iter().rev() {
            value = -value;
            let c = &mut nodes[n].children[i];
            c.visits += 1;
            c.total += value;
        }
    }
    let children = nodes[0].children.iter().map(|c| (c.action, c.prior, c.visits)).collect();
    (children, budget)
}

/// Single-world search with move selection.
pub fn alphazero_search<E: Evaluator + ?Sized, R: Rng + ?Sized>(
    world: &WorldState,
    net: &E,
    config: &SearchConfig,
    rng: &mut R,
) -> Result<SearchResult, SearchError> {
    if world.is_terminal() {
        return Err(SearchError::GameOver);
    }
    let (children, budget) = alphazero_tree(world, &[], net, config, rng);
    if children.is_empty() {
        return Err(SearchError::NoActions);
    }
    let area = world.area();
    let pi = visit_distribution(world.num_actions(), &children);
    let action = choose_action(&pi, area, world.move_number(), config.temperature_moves_for(area), rng);
    Ok(SearchResult { pi, action, budget, root_raw_prior: Vec::new(), worlds_sampled: 1 })
}
