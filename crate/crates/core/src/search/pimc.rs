use rand::Rng;

use super::{
    alphazero_tree, choose_action, root_exclusions, sample_root_worlds, visit_distribution, BudgetCounter,
    Evaluator, SearchConfig, SearchError, SearchResult,
};
use crate::game::{ObservationHistory, WorldState};

/// Independent search in each sampled world; root visit distributions are
/// averaged and renormalized.
pub fn pimc_search<E: Evaluator + ?Sized, R: Rng + ?Sized>(
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
    let mut result = pimc_search_worlds(&set.worlds, &root_exclusions(history), net, config, rng)?;
    budget.merge(&result.budget);
    result.budget = budget;
    Ok(result)
}

pub fn pimc_search_worlds<E: Evaluator + ?Sized, R: Rng + ?Sized>(
    worlds: &[WorldState],
    excluded: &[usize],
    net: &E,
    config: &SearchConfig,
    rng: &mut R,
) -> Result<SearchResult, SearchError> {
    let first = worlds.first().ok_or(SearchError::EmptyInformationSet)?;
    let width = first.num_actions();
    let area = first.area();
    let mut budget = BudgetCounter::default();
    let mut sum = vec![0.0; width];
    for w in worlds {
        let (children, b) = alphazero_tree(w, excluded, net, config, rng);
        budget.merge(&b);
        if children.is_empty() {
            continue;
        }
        for (s, p) in sum.iter_mut().zip(visit_distribution(width, &children)) {
            *s += p;
        }
    }
    let total: f64 = sum.iter().sum();
    if total <= 0.0 {
        return Err(SearchError::NoActions);
    }
    let pi: Vec<f64> = sum.iter().map(|s| s / total).collect();
    let action = choose_action(&pi, area, first.move_number(), config.temperature_moves_for(area), rng);
    Ok(SearchResult { pi, action, budget, root_raw_prior: Vec::new(), worlds_sampled: worlds.len() })
}
