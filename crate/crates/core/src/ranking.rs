//! Tournament ranking of predictors from their absolute-error distributions.
//!
//! Each pair of models is compared with Dunn's test and Cliff's delta. A
//! model wins when its errors are significantly and non-negligibly smaller;
//! the loser then gets an edge of weight 1.0 towards the winner. Anything
//! else is a draw, recorded as two edges of weight 0.5. Models are scored by
//! alpha centrality, `x = alpha * A^T x + 1`, and ranked by descending score.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::{self, Magnitude};

pub const SIGNIFICANCE: f64 = 0.05;
pub const WIN_WEIGHT: f64 = 1.0;
pub const DRAW_WEIGHT: f64 = 0.5;
const SCORE_TIE: f64 = 1e-9;
const SINGULAR_MARGIN: f64 = 1e-6;

/// Outcome of comparing two models; `delta` is `cliffs_delta(ae_i, ae_j)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairwiseComparison {
    pub model_i: String,
    pub model_j: String,
    pub p_value: f64,
    pub delta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub from: usize,
    pub to: usize,
    pub weight: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct WinDrawGraph {
    pub nodes: Vec<String>,
    pub edges: Vec<Edge>,
}

impl WinDrawGraph {
    pub fn node_index(&self, id: &str) -> Option<usize> {
        self.nodes.iter().position(|n| n == id)
    }

    fn intern(&mut self, id: &str) -> usize {
        self.node_index(id).unwrap_or_else(|| {
            self.nodes.push(id.to_string());
            self.nodes.len() - 1
        })
    }

    /// Weighted adjacency, `A[i][j]` = weight of edge `i -> j`.
    pub fn adjacency(&self) -> DMatrix<f64> {
        let n = self.nodes.len();
        let mut a = DMatrix::zeros(n, n);
        for e in &self.edges {
            a[(e.from, e.to)] = e.weight;
        }
        a
    }

    pub fn wins(&self, node: usize) -> usize {
        self.edges.iter().filter(|e| e.to == node && e.weight == WIN_WEIGHT).count()
    }
}

pub fn build_graph(pairwise: &[PairwiseComparison]) -> Result<WinDrawGraph> {
    let mut graph = WinDrawGraph::default();
    let mut seen = std::collections::HashSet::new();
    for cmp in pairwise {
        let i = graph.intern(&cmp.model_i);
        let j = graph.intern(&cmp.model_j);
        let key = (i.min(j), i.max(j));
        if i == j || !seen.insert(key) {
            return Err(Error::DuplicatePair(cmp.model_i.clone(), cmp.model_j.clone()));
        }
        let significant = cmp.p_value < SIGNIFICANCE;
        if significant && cmp.delta < -Magnitude::NEGLIGIBLE_MAX {
            graph.edges.push(Edge { from: j, to: i, weight: WIN_WEIGHT });
        } else if significant && cmp.delta > Magnitude::NEGLIGIBLE_MAX {
            graph.edges.push(Edge { from: i, to: j, weight: WIN_WEIGHT });
        } else {
            graph.edges.push(Edge { from: i, to: j, weight: DRAW_WEIGHT });
            graph.edges.push(Edge { from: j, to: i, weight: DRAW_WEIGHT });
        }
    }
    Ok(graph)
}

/// Largest eigenvalue modulus of the adjacency matrix.
pub fn spectral_radius(graph: &WinDrawGraph) -> f64 {
    // a non-negative matrix has radius zero exactly when its graph is acyclic
    if is_acyclic(graph) {
        return 0.0;
    }
    graph
        .adjacency()
        .complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}

fn is_acyclic(graph: &WinDrawGraph) -> bool {
    let n = graph.nodes.len();
    let mut indegree = vec![0usize; n];
    let mut out: Vec<Vec<usize>> = vec![Vec::new(); n];
    for e in graph.edges.iter().filter(|e| e.weight > 0.0) {
        out[e.from].push(e.to);
        indegree[e.to] += 1;
    }
    let mut ready: Vec<usize> = (0..n).filter(|&v| indegree[v] == 0).collect();
    let mut seen = 0;
    while let Some(v) = ready.pop() {
        seen += 1;
        for &w in &out[v] {
            indegree[w] -= 1;
            if indegree[w] == 0 {
                ready.push(w);
            }
        }
    }
    seen == n
}

/// Solves `(I - alpha A^T) x = 1` directly.
pub fn alpha_centrality(graph: &WinDrawGraph, alpha: f64) -> Result<Vec<f64>> {
    let n = graph.nodes.len();
    if n == 0 {
        return Ok(Vec::new());
    }
    let rho = spectral_radius(graph);
    if alpha * rho >= 1.0 - SINGULAR_MARGIN {
        return Err(Error::NearSingular(alpha * rho));
    }
    let system = DMatrix::identity(n, n) - graph.adjacency().transpose() * alpha;
    let x = system
        .lu()
        .solve(&DVector::from_element(n, 1.0))
        .ok_or(Error::NearSingular(alpha * rho))?;
    Ok(x.iter().copied().collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelRank {
    pub id: String,
    pub score: f64,
    pub rank: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankTable {
    pub models: Vec<ModelRank>,
    pub alpha: f64,
    pub spectral_radius: f64,
}

impl RankTable {
    pub fn rank_of(&self, id: &str) -> Option<usize> {
        self.models.iter().find(|m| m.id == id).map(|m| m.rank)
    }
}

/// Standard competition ranks: one plus the number of strictly better
/// scores, where scores within 1e-9 count as equal.
pub fn competition_ranks(scores: &[f64]) -> Vec<usize> {
    scores
        .iter()
        .map(|&s| 1 + scores.iter().filter(|&&o| o > s + SCORE_TIE).count())
        .collect()
}

/// Ranks with `alpha = 0.9 / rho` (or 1 for acyclic graphs). The ranking is
/// rejected if it differs at `0.3 / rho` or `0.6 / rho`.
pub fn rank_models(graph: &WinDrawGraph) -> Result<RankTable> {
    let rho = spectral_radius(graph);
    let scale = if rho > 0.0 { 1.0 / rho } else { 1.0 };
    let alpha = if rho > 0.0 { 0.9 * scale } else { 1.0 };
    let scores = alpha_centrality(graph, alpha)?;
    let ranks = competition_ranks(&scores);

    for probe in [0.3, 0.6, 0.9] {
        let alt = competition_ranks(&alpha_centrality(graph, probe * scale)?);
        if alt != ranks {
            return Err(Error::UnstableRanking(format!(
                "ranks {ranks:?} at alpha {alpha:.4} but {alt:?} at alpha {:.4}",
                probe * scale
            )));
        }
    }

    let models = graph
        .nodes
        .iter()
        .zip(scores.iter().zip(&ranks))
        .map(|(id, (&score, &rank))| ModelRank { id: id.clone(), score, rank })
        .collect();
    Ok(RankTable { models, alpha, spectral_radius: rho })
}

/// Omnibus test, pairwise post-hoc comparisons and effect sizes for a set of
/// named error distributions. When the omnibus test finds no difference every
/// pair is reported with p = 1, i.e. as a draw.
pub fn compare_distributions(models: &[(String, Vec<f64>)]) -> Result<Vec<PairwiseComparison>> {
    if models.len() < 2 {
        return Err(Error::TooFewSamples { needed: 2, got: models.len() });
    }
    let groups: Vec<Vec<f64>> = models.iter().map(|(_, v)| v.clone()).collect();
    let dunn = match stats::kruskal_wallis(&groups) {
        Ok(kw) if kw.p_value < SIGNIFICANCE => Some(stats::dunn_posthoc(&groups)?),
        Ok(_) | Err(Error::DegenerateTies) => None,
        Err(e) => return Err(e),
    };
    let mut out = Vec::new();
    for i in 0..models.len() {
        for j in i + 1..models.len() {
            let p_value = match &dunn {
                Some(pairs) => pairs.iter().find(|p| p.i == i && p.j == j).map_or(1.0, |p| p.p_adjusted),
                None => 1.0,
            };
            let (delta, _) = stats::cliffs_delta(&models[i].1, &models[j].1)?;
            out.push(PairwiseComparison {
                model_i: models[i].0.clone(),
                model_j: models[j].0.clone(),
                p_value,
                delta,
            });
        }
    }
    Ok(out)
}

/// Full procedure: compare, build the win/draw graph, rank.
pub fn rank_distributions(models: &[(String, Vec<f64>)]) -> Result<RankTable> {
    rank_models(&build_graph(&compare_distributions(models)?)?)
}
