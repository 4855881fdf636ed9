use std::fmt::Write as _;

use rand::Rng;

use crate::encode::{encode_board4, encode_history};
use crate::nn::{triplet_distances, Network};
use crate::sampler::euclidean;
use crate::train::{build_triplet, TrainingRecord};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Role {
    Anchor,
    Positive,
    Negative,
}

impl Role {
    pub fn name(self) -> &'static str {
        match self {
            Role::Anchor => "anchor",
            Role::Positive => "positive",
            Role::Negative => "negative",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingRow {
    pub state: usize,
    pub role: Role,
    pub embedding: Vec<f32>,
    pub distance: f64,
}

/// Anchor, positive and `negatives` freshly drawn negatives per record.
/// Records whose information set is a singleton are skipped.
pub fn dump_embeddings<R: Rng + ?Sized>(
    net: &Network,
    records: &[TrainingRecord],
    negatives: usize,
    rng: &mut R,
) -> Vec<EmbeddingRow> {
    let mut rows = Vec::new();
    let mut state = 0;
    for r in records {
        let Some(first) = build_triplet(r, rng) else { continue };
        let anchor = net.anchor_embedding(&encode_history(&r.history));
        let positive = net.state_embedding(&encode_board4(&r.world, r.viewer));
        rows.push(EmbeddingRow { state, role: Role::Anchor, distance: 0.0, embedding: anchor.clone() });
        rows.push(EmbeddingRow {
            state,
            role: Role::Positive,
            distance: euclidean(&anchor, &positive),
            embedding: positive,
        });
        let mut negative_planes = vec![first.negative];
        while negative_planes.len() < negatives {
            negative_planes.push(build_triplet(r, rng).expect("non-singleton").negative);
        }
        negative_planes.truncate(negatives);
        for planes in negative_planes {
            let e = net.state_embedding(&planes);
            rows.push(EmbeddingRow { state, role: Role::Negative, distance: euclidean(&anchor, &e), embedding: e });
        }
        state += 1;
    }
    rows
}

/// `x` with six significant digits.
pub fn sig6(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return if x == 0.0 { "0".into() } else { x.to_string() };
    }
    let exp = x.abs().log10().floor() as i32;
    if (-4..6).contains(&exp) {
        let decimals = (5 - exp).max(0) as usize;
        format!("{x:.decimals$}")
    } else {
        format!("{x:.5e}")
    }
}

pub fn embeddings_csv(rows: &[EmbeddingRow]) -> String {
    let dim = rows.first().map_or(0, |r| r.embedding.len());
    let mut s = String::from("state,role,d_anchor");
    for i in 0..dim {
        let _ = write!(s, ",e{i}");
    }
    s.push('\n');
    for r in rows {
        let _ = write!(s, "{},{},{}", r.state, r.role.name(), sig6(r.distance));
        for &x in &r.embedding {
            let _ = write!(s, ",{}", sig6(x as f64));
        }
        s.push('\n');
    }
    s
}

/// Fraction of (state, negative) pairs with d_ap < d_an.
pub fn triplet_success_from_rows(rows: &[EmbeddingRow]) -> f64 {
    let mut positive = std::collections::HashMap::new();
    for r in rows.iter().filter(|r| r.role == Role::Positive) {
        positive.insert(r.state, r.distance);
    }
    let negatives: Vec<&EmbeddingRow> = rows.iter().filter(|r| r.role == Role::Negative).collect();
    if negatives.is_empty() {
        return 0.0;
    }
    let wins = negatives.iter().filter(|r| positive[&r.state] < r.distance).count();
    wins as f64 / negatives.len() as f64
}

/// Same statistic read back from [`embeddings_csv`] output.
pub fn triplet_success_from_csv(text: &str) -> Result<f64, String> {
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate().skip(1) {
        let mut f = line.split(',');
        let bad = || format!("line {}: malformed row", i + 1);
        let state: usize = f.next().and_then(|x| x.parse().ok()).ok_or_else(bad)?;
        let role = match f.next().ok_or_else(bad)? {
            "anchor" => Role::Anchor,
            "positive" => Role::Positive,
            "negative" => Role::Negative,
            _ => return Err(bad()),
        };
        let distance: f64 = f.next().and_then(|x| x.parse().ok()).ok_or_else(bad)?;
        rows.push(EmbeddingRow { state, role, embedding: Vec::new(), distance });
    }
    Ok(triplet_success_from_rows(&rows))
}

/// Triplets with d_ap < d_an out of those built, `draws` fresh negatives
/// per record, using the training-time distance.
pub fn triplet_success<R: Rng + ?Sized>(
    net: &Network,
    records: &[TrainingRecord],
    draws: usize,
    rng: &mut R,
) -> (usize, usize) {
    let (mut ok, mut total) = (0, 0);
    for r in records {
        for _ in 0..draws {
            let Some(t) = build_triplet(r, rng) else { break };
            let d = triplet_distances(net.config(), net.layout(), net.params(), &t);
            total += 1;
            ok += (d.d_ap < d.d_an) as usize;
        }
    }
    (ok, total)
}
