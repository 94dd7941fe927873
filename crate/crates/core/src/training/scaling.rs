use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kg::{EntityId, GraphEdge, GraphNode, NodeRole, RelationId, RelationalGraph};
use crate::model::{layer_forward, CandidateInput, Model, Topology};
use crate::numerics::{rms_norm_rows, Matrix};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingRow {
    /// |V| for size sweeps, l for depth sweeps.
    pub x: usize,
    pub median_seconds: f64,
    /// Entries stored by the relevance matrix of the first layer.
    pub relevance_entries: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingReport {
    pub rows: Vec<ScalingRow>,
    /// Least-squares slope of log(time) against log(x).
    pub exponent: f64,
}

/// Graph where every entity pair is joined by one edge, relations cycling
/// through `kg_relations`; the first entity is linked to the question node.
pub fn dense_graph(n: usize, kg_relations: usize) -> RelationalGraph {
    let nodes = (0..n)
        .map(|i| GraphNode {
            entity: EntityId(i as u32),
            surface: format!("n{i}"),
            role: if i == 0 { NodeRole::Question } else { NodeRole::Intermediate },
        })
        .collect();
    let mut edges = Vec::with_capacity(n * n.saturating_sub(1) / 2 + 1);
    for i in 0..n {
        for j in (i + 1)..n {
            edges.push(GraphEdge {
                head: i,
                relation: RelationId(((i + j) % kg_relations) as u16),
                tail: j,
            });
        }
    }
    let qlink = RelationId(kg_relations as u16);
    if n > 0 {
        edges.push(GraphEdge {
            head: n,
            relation: qlink,
            tail: 0,
        });
    }
    RelationalGraph {
        nodes,
        edges,
        qlink,
        has_question_node: true,
    }
}

fn random_input<T: Scalar>(graph: RelationalGraph, lm_dim: usize, rng: &mut ChaCha8Rng) -> CandidateInput<T> {
    let n = graph.num_entities();
    let mut draw = |len: usize| -> Vec<T> { (0..len).map(|_| T::of(rng.random_range(-0.1..0.1))).collect() };
    let embs = draw(n * lm_dim);
    let h_cls = draw(lm_dim);
    CandidateInput {
        entity_embs: Matrix::from_vec(n, lm_dim, embs).expect("sized buffer"),
        h_cls,
        graph,
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len().is_multiple_of(2) {
        (v[m - 1] + v[m]) / 2.0
    } else {
        v[m]
    }
}

/// Least-squares slope of `ln y` on `ln x`.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let cov: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let var: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    cov / var
}

fn check_range(xs: &[usize]) -> Result<()> {
    let (lo, hi) = (xs.iter().min(), xs.iter().max());
    match (lo, hi) {
        (Some(&lo), Some(&hi)) if lo > 0 && xs.len() >= 2 && hi >= 4 * lo => Ok(()),
        _ => Err(Error::Config(format!(
            "scaling sweep {xs:?} needs at least two positive sizes spanning 4x"
        ))),
    }
}

/// Times every cell once per round for `repeats` rounds and returns each
/// cell's median with the relevance entry count it reported. Interleaving
/// spreads transient machine load over all cells instead of skewing
/// whichever cell was running; an untimed run right before each timed one
/// keeps the caches warm for that cell.
fn round_robin(cells: &mut [Box<dyn FnMut() -> Result<usize> + '_>], repeats: usize) -> Result<Vec<(f64, usize)>> {
    let mut times = vec![Vec::with_capacity(repeats); cells.len()];
    let mut entries = vec![0; cells.len()];
    for _ in 0..repeats.max(1) {
        for (c, cell) in cells.iter_mut().enumerate() {
            cell()?;
            let start = Instant::now();
            entries[c] = cell()?;
            times[c].push(start.elapsed().as_secs_f64());
        }
    }
    Ok(times.into_iter().map(median).zip(entries).collect())
}

fn report(xs: &[usize], timed: Vec<(f64, usize)>) -> ScalingReport {
    let rows: Vec<ScalingRow> = xs
        .iter()
        .zip(timed)
        .map(|(&x, (median_seconds, relevance_entries))| ScalingRow {
            x,
            median_seconds,
            relevance_entries,
        })
        .collect();
    let exponent = loglog_slope(
        &rows.iter().map(|r| r.x as f64).collect::<Vec<_>>(),
        &rows.iter().map(|r| r.median_seconds).collect::<Vec<_>>(),
    );
    ScalingReport { rows, exponent }
}

/// Median wall time of one graph layer (layer 0 of `model`) on dense
/// graphs of each size.
pub fn measure_scaling<T: Scalar>(model: &Model<T>, sizes: &[usize], repeats: usize, seed: u64) -> Result<ScalingReport> {
    check_range(sizes)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lp = model
        .layout
        .layers
        .first()
        .ok_or_else(|| Error::Config("model has no graph layers".into()))?;
    let mut cells: Vec<Box<dyn FnMut() -> Result<usize>>> = Vec::with_capacity(sizes.len());
    for &n in sizes {
        let input = random_input::<T>(dense_graph(n, model.config.qlink()), model.config.lm_dim, &mut rng);
        let topo = Topology::build(&input.graph, &model.config)?;
        let h0 = model.forward_candidate(&input, None)?.initial.expect("graph path enabled");
        cells.push(Box::new(move || {
            let layer = layer_forward(&topo, &h0, &model.params, lp, &model.config, 0)?;
            Ok(layer.relevance.as_ref().map_or(0, |m| m.storage()))
        }));
    }
    Ok(report(sizes, round_robin(&mut cells, repeats)?))
}

/// Median wall time of the graph layers of a forward pass for each depth,
/// on a dense graph with `n` entities. `build` returns a model with `l` layers.
pub fn measure_depth_scaling<T: Scalar, F>(mut build: F, depths: &[usize], n: usize, repeats: usize, seed: u64) -> Result<ScalingReport>
where
    F: FnMut(usize) -> Result<Model<T>>,
{
    check_range(depths)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cells: Vec<Box<dyn FnMut() -> Result<usize>>> = Vec::with_capacity(depths.len());
    for &l in depths {
        let model = build(l)?;
        let input = random_input::<T>(dense_graph(n, model.config.qlink()), model.config.lm_dim, &mut rng);
        let topo = Topology::build(&input.graph, &model.config)?;
        let h0 = model.forward_candidate(&input, None)?.initial.expect("graph path enabled");
        cells.push(Box::new(move || {
            let mut h = h0.clone();
            let mut entries = 0;
            for (i, lp) in model.layout.layers.iter().enumerate() {
                let layer = layer_forward(&topo, &h, &model.params, lp, &model.config, i)?;
                if i == 0 {
                    entries = layer.relevance.as_ref().map_or(0, |m| m.storage());
                }
                // normalize between layers as the forward pass does
                h = if model.config.state_norm {
                    rms_norm_rows(&layer.output)?
                } else {
                    layer.output
                };
            }
            Ok(entries)
        }));
    }
    Ok(report(depths, round_robin(&mut cells, repeats)?))
}
