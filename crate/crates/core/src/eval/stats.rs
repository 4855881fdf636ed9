use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum StatsError {
    #[error("no games played")]
    NoGames,
    #[error("result graph is disconnected: {}", format_components(.0))]
    Disconnected(Vec<Vec<String>>),
    #[error("ratings are unbounded: {0} never scored against the rest of the pool")]
    Unbounded(String),
    #[error("agent index {0} out of range")]
    UnknownAgent(usize),
}

fn format_components(c: &[Vec<String>]) -> String {
    c.iter().map(|g| format!("{{{}}}", g.join(", "))).collect::<Vec<_>>().join(" ")
}

/// Score rate with draws as half wins and the 95% normal-approximation
/// half-width.
pub fn win_rate_ci(wins: u64, draws: u64, losses: u64) -> Result<(f64, f64), StatsError> {
    let n = wins + draws + losses;
    if n == 0 {
        return Err(StatsError::NoGames);
    }
    let n = n as f64;
    let rate = (wins as f64 + draws as f64 / 2.0) / n;
    Ok((rate, 1.96 * (rate * (1.0 - rate) / n).sqrt()))
}

/// Games between agents `a` and `b`, from `a`'s side.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairResult {
    pub a: usize,
    pub b: usize,
    pub wins_a: f64,
    pub wins_b: f64,
    pub draws: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EloTable {
    pub names: Vec<String>,
    pub ratings: Vec<f64>,
    pub anchor: f64,
    /// Largest absolute violation of the likelihood equations at the fit.
    pub residual: f64,
    pub iterations: usize,
}

pub const ELO_TOLERANCE: f64 = 1e-9;
const MAX_ITERATIONS: usize = 1_000_000;

fn components(n: usize, adj: &[Vec<bool>]) -> Vec<Vec<usize>> {
    let mut seen = vec![false; n];
    let mut out = Vec::new();
    for s in 0..n {
        if seen[s] {
            continue;
        }
        let mut stack = vec![s];
        let mut comp = BTreeSet::new();
        seen[s] = true;
        while let Some(u) = stack.pop() {
            comp.insert(u);
            for v in 0..n {
                if adj[u][v] && !seen[v] {
                    seen[v] = true;
                    stack.push(v);
                }
            }
        }
        out.push(comp.into_iter().collect());
    }
    out
}

fn reachable(n: usize, adj: &[Vec<bool>], from: usize) -> Vec<bool> {
    let mut seen = vec![false; n];
    seen[from] = true;
    let mut stack = vec![from];
    while let Some(u) = stack.pop() {
        for v in 0..n {
            if adj[u][v] && !seen[v] {
                seen[v] = true;
                stack.push(v);
            }
        }
    }
    seen
}

/// Bradley–Terry maximum-likelihood ratings on the 400·log10 scale with
/// draws as half wins and the pool mean fixed at `anchor`.
pub fn elo_fit(names: &[String], results: &[PairResult], anchor: f64) -> Result<EloTable, StatsError> {
    let n = names.len();
    let mut games = vec![vec![0.0; n]; n];
    let mut score = vec![vec![0.0; n]; n];
    for r in results {
        if r.a >= n {
            return Err(StatsError::UnknownAgent(r.a));
        }
        if r.b >= n {
            return Err(StatsError::UnknownAgent(r.b));
        }
        let total = r.wins_a + r.wins_b + r.draws;
        games[r.a][r.b] += total;
        games[r.b][r.a] += total;
        score[r.a][r.b] += r.wins_a + r.draws / 2.0;
        score[r.b][r.a] += r.wins_b + r.draws / 2.0;
    }
    let played: Vec<Vec<bool>> = games.iter().map(|row| row.iter().map(|&g| g > 0.0).collect()).collect();
    let comps = components(n, &played);
    if comps.len() > 1 {
        return Err(StatsError::Disconnected(
            comps.into_iter().map(|c| c.into_iter().map(|i| names[i].clone()).collect()).collect(),
        ));
    }
    // The maximum exists iff every agent can reach every other through
    // "scored against" edges.
    let scored: Vec<Vec<bool>> = score.iter().map(|row| row.iter().map(|&s| s > 0.0).collect()).collect();
    for i in 0..n {
        if let Some(j) = reachable(n, &scored, i).iter().position(|&r| !r) {
            let culprit = if reachable(n, &scored, j)[i] { i } else { j };
            return Err(StatsError::Unbounded(names[culprit].clone()));
        }
    }
    let wins: Vec<f64> = score.iter().map(|row| row.iter().sum()).collect();
    let mut gamma = vec![1.0f64; n];
    let mut iterations = 0;
    loop {
        iterations += 1;
        let mut next: Vec<f64> = (0..n)
            .map(|i| {
                let denom: f64 = (0..n).filter(|&j| j != i).map(|j| games[i][j] / (gamma[i] + gamma[j])).sum();
                if denom > 0.0 {
                    wins[i] / denom
                } else {
                    gamma[i]
                }
            })
            .collect();
        let log_mean = next.iter().map(|g| g.ln()).sum::<f64>() / n as f64;
        next.iter_mut().for_each(|g| *g = (g.ln() - log_mean).exp());
        let change = next.iter().zip(&gamma).map(|(a, b)| (a.ln() - b.ln()).abs()).fold(0.0, f64::max);
        gamma = next;
        if change < ELO_TOLERANCE || iterations >= MAX_ITERATIONS {
            break;
        }
    }
    let residual = (0..n)
        .map(|i| {
            let expected: f64 =
                (0..n).filter(|&j| j != i).map(|j| games[i][j] * gamma[i] / (gamma[i] + gamma[j])).sum();
            (wins[i] - expected).abs()
        })
        .fold(0.0, f64::max);
    let raw: Vec<f64> = gamma.iter().map(|g| 400.0 * g.log10()).collect();
    let mean = raw.iter().sum::<f64>() / n.max(1) as f64;
    Ok(EloTable {
        names: names.to_vec(),
        ratings: raw.iter().map(|r| r - mean + anchor).collect(),
        anchor,
        residual,
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("a{i}")).collect()
    }

    #[test]
    fn ci_examples() {
        assert_eq!(win_rate_ci(0, 0, 0), Err(StatsError::NoGames));
        let (r, h) = win_rate_ci(750, 0, 750).unwrap();
        assert_eq!(r, 0.5);
        assert!((h - 0.0253).abs() < 5e-5);
        let (r, _) = win_rate_ci(1, 2, 1).unwrap();
        assert_eq!(r, 0.5);
    }

    #[test]
    fn even_results_give_equal_ratings() {
        let r = vec![
            PairResult { a: 0, b: 1, wins_a: 5.0, wins_b: 5.0, draws: 0.0 },
            PairResult { a: 1, b: 2, wins_a: 3.0, wins_b: 3.0, draws: 2.0 },
        ];
        let t = elo_fit(&names(3), &r, 1000.0).unwrap();
        for x in t.ratings {
            assert!((x - 1000.0).abs() < 1e-6);
        }
    }

    #[test]
    fn errors_name_agents() {
        let r = vec![PairResult { a: 0, b: 1, wins_a: 1.0, wins_b: 1.0, draws: 0.0 }];
        let e = elo_fit(&names(3), &r, 1000.0).unwrap_err();
        assert_eq!(e, StatsError::Disconnected(vec![vec!["a0".into(), "a1".into()], vec!["a2".into()]]));
        let r = vec![PairResult { a: 0, b: 1, wins_a: 4.0, wins_b: 0.0, draws: 0.0 }];
        assert_eq!(elo_fit(&names(2), &r, 1000.0).unwrap_err(), StatsError::Unbounded("a1".into()));
    }
}
