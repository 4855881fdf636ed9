use rand::Rng;

use super::{
    add_dirichlet_noise, aggregate_policy, aggregate_value, choose_action, puct_select, renormalize,
    root_exclusions, sample_root_worlds, visit_distribution, BudgetCounter, Evaluator, LeafEval, SearchConfig,
    SearchError, SearchResult,
};
use crate::game::{outcome_value, Action, ObservationHistory, WorldState};

#[derive(Clone, Debug)]
struct Edge {
    action: usize,
    prior: f64,
    visits: u32,
    total: f64,
    child: Option<usize>,
}

impl Edge {
    fn q(&self) -> f64 {
        if self.visits == 0 {
            0.0
        } else {
            self.total / self.visits as f64
        }
    }
}

#[derive(Clone, Debug, Default)]
struct Node {
    edges: Vec<Edge>,
    expanded: bool,
    terminal: bool,
    visits: u32,
}

/// One search tree shared by a set of determinized root worlds.
///
/// Edge statistics are from the perspective of the player to move at the
/// edge's parent.
#[derive(Clone, Debug)]
pub struct MapleTree {
    nodes: Vec<Node>,
    root_worlds: Vec<WorldState>,
    excluded: Vec<usize>,
    c_puct: f64,
    noise_eps: f64,
    noise_alpha: f64,
    area: usize,
    budget: BudgetCounter,
    root_raw_prior: Vec<Option<f64>>,
}

impl MapleTree {
    /// `excluded` lists action indices never expanded at the root.
    pub fn new(root_worlds: Vec<WorldState>, excluded: &[usize], config: &SearchConfig) -> Self {
        assert!(!root_worlds.is_empty(), "a search needs at least one root world");
        let area = root_worlds[0].area();
        MapleTree {
            nodes: vec![Node::default()],
            root_worlds,
            excluded: excluded.to_vec(),
            c_puct: config.c_puct,
            noise_eps: config.noise_eps,
            noise_alpha: config.alpha_for(area),
            area,
            budget: BudgetCounter::default(),
            root_raw_prior: Vec::new(),
        }
    }

    /// Replaces the root worlds while keeping the tree statistics.
    pub fn set_root_worlds(&mut self, worlds: Vec<WorldState>) {
        assert!(!worlds.is_empty(), "a search needs at least one root world");
        self.root_worlds = worlds;
    }

    pub fn root_worlds(&self) -> &[WorldState] {
        &self.root_worlds
    }

    pub fn budget(&self) -> &BudgetCounter {
        &self.budget
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn root_visits(&self) -> u32 {
        self.nodes[0].visits
    }

    /// `(action index, prior, visits)` for each root child.
    pub fn root_children(&self) -> Vec<(usize, f64, u32)> {
        self.nodes[0].edges.iter().map(|e| (e.action, e.prior, e.visits)).collect()
    }

    /// Mean backed-up value of a root child, from the root player's view.
    pub fn root_q(&self, action: usize) -> Option<f64> {
        self.nodes[0].edges.iter().find(|e| e.action == action).map(Edge::q)
    }

    pub fn root_raw_prior(&self) -> &[Option<f64>] {
        &self.root_raw_prior
    }

    pub fn visit_distribution(&self) -> Vec<f64> {
        visit_distribution(self.root_worlds[0].num_actions(), &self.root_children())
    }

    /// Child visits sum to parent visits minus one at every expanded
    /// non-terminal node.
    pub fn check_invariants(&self) -> Result<(), String> {
        for (i, n) in self.nodes.iter().enumerate() {
            if !n.expanded || n.edges.is_empty() {
                continue;
            }
            let child: u32 = n.edges.iter().map(|e| e.visits).sum();
            if child + 1 != n.visits {
                return Err(format!("node {i}: child visits {child}, node visits {}", n.visits));
            }
            for e in &n.edges {
                if let Some(c) = e.child {
                    if self.nodes[c].visits > e.visits {
                        return Err(format!("node {c} visited more often than its edge"));
                    }
                }
            }
        }
        Ok(())
    }

    /// Runs one simulation.
    pub fn simulate<E: Evaluator + ?Sized, R: Rng + ?Sized>(&mut self, net: &E, rng: &mut R) {
        self.budget.simulations += 1;
        let mut worlds = self.root_worlds.clone();
        let mut node = 0;
        let mut path: Vec<(usize, usize)> = Vec::new();
        while self.nodes[node].expanded && !self.nodes[node].edges.is_empty() {
            let n = &self.nodes[node];
            let q: Vec<f64> = n.edges.iter().map(Edge::q).collect();
            let p: Vec<f64> = n.edges.iter().map(|e| e.prior).collect();
            let v: Vec<u32> = n.edges.iter().map(|e| e.visits).collect();
            let e = puct_select(&q, &p, &v, self.c_puct);
            let action = Action::from_index(n.edges[e].action, self.area);
            let before = worlds.len();
            worlds = worlds.iter().filter_map(|w| w.play(action)).collect();
            self.budget.discards += (before - worlds.len()) as u64;
            path.push((node, e));
            if worlds.is_empty() {
                self.handle_empty_worldset(&path);
                return;
            }
            node = match self.nodes[node].edges[e].child {
                Some(c) => c,
                None => {
                    self.nodes.push(Node::default());
                    let c = self.nodes.len() - 1;
                    self.nodes[node].edges[e].child = Some(c);
                    c
                }
            };
        }
        let value = self.evaluate_leaf(node, &worlds, net, rng);
        self.backup(Some(node), &path, value);
    }

    /// A simulation whose world set emptied backs up the selected edge's
    /// current mean value, or 0 if it has none.
    fn handle_empty_worldset(&mut self, path: &[(usize, usize)]) {
        self.budget.empty_worldsets += 1;
        self.budget.valid_at_leaf.push(0);
        let &(n, e) = path.last().expect("selection made at least one step");
        let q = self.nodes[n].edges[e].q();
        self.backup(None, path, -q);
    }

    fn evaluate_leaf<E: Evaluator + ?Sized, R: Rng + ?Sized>(
        &mut self,
        node: usize,
        worlds: &[WorldState],
        net: &E,
        rng: &mut R,
    ) -> f64 {
        self.budget.valid_at_leaf.push(worlds.len());
        let masks: Vec<Option<Vec<bool>>> =
            worlds.iter().map(|w| (!w.is_terminal()).then(|| w.legal_mask())).collect();
        let items: Vec<(&WorldState, &[bool])> =
            worlds.iter().zip(&masks).filter_map(|(w, m)| m.as_deref().map(|m| (w, m))).collect();
        let mut outputs = net.evaluate_batch(&items).into_iter();
        self.budget.policy_value_evals += items.len() as u64;
        self.budget.terminal_hits += (worlds.len() - items.len()) as u64;
        let evals: Vec<LeafEval> = worlds
            .iter()
            .zip(masks)
            .map(|(w, mask)| match mask {
                None => LeafEval::Terminal {
                    value: outcome_value(&w.terminal_outcome().expect("terminal"), w.to_play()),
                },
                Some(legal) => {
                    let (policy, value) = outputs.next().expect("one output per evaluated world");
                    LeafEval::Evaluated { policy: policy.into_iter().map(f64::from).collect(), legal, value: value as f64 }
                }
            })
            .collect();
        if !self.nodes[node].expanded {
            self.expand(node, &evals, rng);
        }
        aggregate_value(&evals)
    }

    fn expand<R: Rng + ?Sized>(&mut self, node: usize, evals: &[LeafEval], rng: &mut R) {
        let n = &mut self.nodes[node];
        n.expanded = true;
        if evals.iter().all(|e| matches!(e, LeafEval::Terminal { .. })) {
            n.terminal = true;
            return;
        }
        self.budget.expansions += 1;
        let mut raw = aggregate_policy(evals);
        if node == 0 {
            self.root_raw_prior = raw.clone();
            for &a in &self.excluded {
                if a < raw.len() {
                    raw[a] = None;
                }
            }
        }
        let mut priors = renormalize(&raw);
        if node == 0 {
            let mut p: Vec<f64> = priors.iter().map(|x| x.1).collect();
            add_dirichlet_noise(&mut p, self.noise_eps, self.noise_alpha, rng);
            priors.iter_mut().zip(p).for_each(|(x, p)| x.1 = p);
        }
        n.edges = priors
            .into_iter()
            .map(|(action, prior)| Edge { action, prior, visits: 0, total: 0.0, child: None })
            .collect();
    }

    /// `value` is from the perspective of the player to move at the leaf.
    fn backup(&mut self, leaf: Option<usize>, path: &[(usize, usize)], mut value: f64) {
        if let Some(l) = leaf {
            self.nodes[l].visits += 1;
        }
        for &(n, e) in path.iter().rev() {
            value = -value;
            let edge = &mut self.nodes[n].edges[e];
            edge.visits += 1;
            edge.total += value;
            self.nodes[n].visits += 1;
        }
    }
}

/// Shared-tree search from the viewer's observation history.
pub fn maple_search<E: Evaluator + ?Sized, R: Rng + ?Sized>(
    history: &ObservationHistory,
    net: &E,
    config: &SearchConfig,
    rng: &mut R,
) -> Result<SearchResult, SearchError> {
    if history.is_over() {
        return Err(SearchError::GameOver);
    }
    let mut budget = BudgetCounter::default();
    let set = sample_root_worlds(history, net, config, rng, &mut budget)?;
    let mut result = maple_search_worlds(set.worlds, &root_exclusions(history), net, config, rng)?;
    budget.merge(&result.budget);
    result.budget = budget;
    Ok(result)
}

/// Shared-tree search over already sampled root worlds.
pub fn maple_search_worlds<E: Evaluator + ?Sized, R: Rng + ?Sized>(
    worlds: Vec<WorldState>,
    excluded: &[usize],
    net: &E,
    config: &SearchConfig,
    rng: &mut R,
) -> Result<SearchResult, SearchError> {
    if worlds.is_empty() {
        return Err(SearchError::EmptyInformationSet);
    }
    let worlds_sampled = worlds.len();
    let area = worlds[0].area();
    let move_number = worlds[0].move_number();
    let mut tree = MapleTree::new(worlds, excluded, config);
    for _ in 0..config.simulations {
        tree.simulate(net, rng);
    }
    if tree.nodes[0].edges.is_empty() {
        return Err(SearchError::NoActions);
    }
    let pi = tree.visit_distribution();
    let action = choose_action(&pi, area, move_number, config.temperature_moves_for(area), rng);
    Ok(SearchResult {
        pi,
        action,
        budget: tree.budget.clone(),
        root_raw_prior: tree.root_raw_prior.clone(),
        worlds_sampled,
    })
}
