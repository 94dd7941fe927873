//! One relevance-weighted relational layer and its backward pass.
//!
//! Forward, for node states `H` (entity rows then the question row):
//!
//! ```text
//! M   = H Hᵀ                                   (all-ones when relevance is off)
//! h_i = σ( Σ_r Σ_{j∈N_i^r} 1/|N_i^r| · (M_ij h_j) W_r + (M_ii h_i) W_0 )
//! h_Q = σ( Σ_{j∈N_Q} F_c([h_Q ; M_Qj h_j]) W_Q + (M_QQ h_Q) W_0 )
//! H'  = [h_0; …; h_{|V|-1}; h_Q]
//! out = σ( (H' H'ᵀ) H' W_g )                     (skipped when relevance is off)
//! ```
//!
//! The backward pass routes gradients through both relevance matrices; they
//! are functions of the states, not constants.

use crate::error::Result;
use crate::model::params::LayerParams;
use crate::model::relevance::{relevance_matrix, relevance_scale, RelevanceMatrix};
use crate::model::topology::Topology;
use crate::model::ModelConfig;
use crate::numerics::{activation, activation_backward, axpy, dot, ActivationKind, Matrix, ParamStore};
use crate::scalar::Scalar;

#[derive(Debug, Clone)]
pub struct LayerTrace<T> {
    pub input: Matrix<T>,
    /// `M^(l)` from the layer input; `None` when relevance is ablated.
    pub relevance: Option<RelevanceMatrix<T>>,
    aggregates: Vec<(usize, Matrix<T>)>,
    self_input: Matrix<T>,
    pub pre: Matrix<T>,
    question: Option<QuestionTrace<T>>,
    /// Stacked updated rows `H'`.
    pub intermediate: Matrix<T>,
    pub mix: Option<MixTrace<T>>,
    pub output: Matrix<T>,
}

#[derive(Debug, Clone)]
struct QuestionTrace<T> {
    /// `[h_Q ; M_Qj h_j]` per question-entity neighbor.
    z: Matrix<T>,
    u: Matrix<T>,
    a: Matrix<T>,
    fsum: Matrix<T>,
}

#[derive(Debug, Clone)]
pub struct MixTrace<T> {
    /// `M^(l+1)`, computed from `H'`.
    pub relevance: RelevanceMatrix<T>,
    product: Matrix<T>,
    pre: Matrix<T>,
}

#[inline]
fn weight<T: Scalar>(m: Option<&RelevanceMatrix<T>>, i: usize, j: usize) -> T {
    m.map_or(T::one(), |m| m.get(i, j))
}

/// Pre-activations of the entity and question updates with the pieces the
/// backward pass reuses.
struct NodeUpdates<T> {
    pre: Matrix<T>,
    aggregates: Vec<(usize, Matrix<T>)>,
    self_input: Matrix<T>,
    question: Option<QuestionTrace<T>>,
}

fn node_updates<T: Scalar>(
    topo: &Topology,
    h: &Matrix<T>,
    m: Option<&RelevanceMatrix<T>>,
    store: &ParamStore<T>,
    lp: &LayerParams,
    act: ActivationKind,
) -> Result<NodeUpdates<T>> {
    let (n, d) = h.shape();

    let mut self_input = h.clone();
    for i in 0..n {
        let w = weight(m, i, i);
        self_input.row_mut(i).iter_mut().for_each(|x| *x *= w);
    }
    let mut pre = self_input.matmul(store.value(lp.self_weight))?;

    let mut aggregates = Vec::new();
    for r in topo.active_relations() {
        let mut agg = Matrix::zeros(n, d);
        for (i, lists) in topo.neighbors.iter().enumerate() {
            if let Some((_, nbrs)) = lists.iter().find(|(rel, _)| *rel == r) {
                let c = T::one() / T::of(nbrs.len() as f64);
                for &j in nbrs {
                    let s = c * weight(m, i, j);
                    axpy(agg.row_mut(i), s, h.row(j));
                }
            }
        }
        pre.add_assign(&agg.matmul(store.value(lp.relation[r]))?)?;
        aggregates.push((r, agg));
    }

    let mut question = None;
    if let Some(q) = topo.question {
        if !topo.question_neighbors.is_empty() {
            let k = topo.question_neighbors.len();
            let mut z = Matrix::zeros(k, 2 * d);
            for (row, &j) in topo.question_neighbors.iter().enumerate() {
                let w = weight(m, q, j);
                let zr = z.row_mut(row);
                zr[..d].copy_from_slice(h.row(q));
                for (dst, &x) in zr[d..].iter_mut().zip(h.row(j)) {
                    *dst = w * x;
                }
            }
            let mut u = z.matmul(store.value(lp.fc_w1))?;
            add_row_bias(&mut u, store.value(lp.fc_b1));
            let a = activation(&u, act)?;
            let mut f = a.matmul(store.value(lp.fc_w2))?;
            add_row_bias(&mut f, store.value(lp.fc_b2));
            let mut fsum = Matrix::zeros(1, d);
            for row in 0..k {
                axpy(fsum.row_mut(0), T::one(), f.row(row));
            }
            let msg = fsum.matmul(store.value(lp.question))?;
            axpy(pre.row_mut(q), T::one(), msg.row(0));
            question = Some(QuestionTrace { z, u, a, fsum });
        }
    }
    pre.check_finite("node update")?;
    Ok(NodeUpdates {
        pre,
        aggregates,
        self_input,
        question,
    })
}

fn add_row_bias<T: Scalar>(m: &mut Matrix<T>, bias: &Matrix<T>) {
    for r in 0..m.rows() {
        axpy(m.row_mut(r), T::one(), bias.row(0));
    }
}

/// Full forward pass of one layer with everything the backward pass needs.
pub fn layer_forward<T: Scalar>(
    topo: &Topology,
    h: &Matrix<T>,
    store: &ParamStore<T>,
    lp: &LayerParams,
    config: &ModelConfig,
    layer: usize,
) -> Result<LayerTrace<T>> {
    let act = config.activation;
    let relevance = if config.relevance {
        let m = relevance_matrix(h, config.scaled_relevance, layer)?;
        m.check_invariants(h, relevance_scale(h.cols(), config.scaled_relevance), invariant_tol::<T>(h.cols()))?;
        Some(m)
    } else {
        None
    };
    let NodeUpdates {
        pre,
        aggregates,
        self_input,
        question,
    } = node_updates(topo, h, relevance.as_ref(), store, lp, act)?;
    let intermediate = activation(&pre, act)?;

    let (mix, output) = if config.relevance {
        let m2 = relevance_matrix(&intermediate, config.scaled_relevance, layer + 1)?;
        m2.check_invariants(
            &intermediate,
            relevance_scale(intermediate.cols(), config.scaled_relevance),
            invariant_tol::<T>(intermediate.cols()),
        )?;
        let product = m2.matrix.matmul(&intermediate)?;
        let mix_pre = product.matmul(store.value(lp.global))?;
        let out = activation(&mix_pre, act)?;
        (
            Some(MixTrace {
                relevance: m2,
                product,
                pre: mix_pre,
            }),
            out,
        )
    } else {
        (None, intermediate.clone())
    };

    Ok(LayerTrace {
        input: h.clone(),
        relevance,
        aggregates,
        self_input,
        pre,
        question,
        intermediate,
        mix,
        output,
    })
}

// rounding slack for the diagonal check: loose enough for f32 sums of width d
fn invariant_tol<T: Scalar>(width: usize) -> T {
    T::of(1e-6).max(T::epsilon() * T::of(16.0 * width as f64))
}

/// Entity rows `h_i^(l+1)` (post-activation) for a given relevance matrix;
/// `None` means all-ones.
pub fn entity_update<T: Scalar>(
    topo: &Topology,
    h: &Matrix<T>,
    m: Option<&RelevanceMatrix<T>>,
    store: &ParamStore<T>,
    lp: &LayerParams,
    act: ActivationKind,
) -> Result<Matrix<T>> {
    let pre = node_updates(topo, h, m, store, lp, act)?.pre;
    let idx: Vec<usize> = (0..topo.num_entities).collect();
    activation(&pre.select_rows(&idx), act)
}

/// Updated question row `h_Q^(l+1)`; `None` when the graph has no question node.
pub fn question_update<T: Scalar>(
    topo: &Topology,
    h: &Matrix<T>,
    m: Option<&RelevanceMatrix<T>>,
    store: &ParamStore<T>,
    lp: &LayerParams,
    act: ActivationKind,
) -> Result<Option<Vec<T>>> {
    let Some(q) = topo.question else {
        return Ok(None);
    };
    let pre = node_updates(topo, h, m, store, lp, act)?.pre;
    Ok(Some(pre.row(q).iter().map(|&x| act.apply(x)).collect()))
}

/// `σ(M' H' W_g)` with `M'` recomputed from `H'`.
pub fn global_mix<T: Scalar>(intermediate: &Matrix<T>, w_global: &Matrix<T>, act: ActivationKind, scaled: bool) -> Result<Matrix<T>> {
    let m = relevance_matrix(intermediate, scaled, 0)?;
    let p = m.matrix.matmul(intermediate)?;
    activation(&p.matmul(w_global)?, act)
}

/// Backward pass of [`layer_forward`]. Adds parameter gradients into
/// `grads` (aligned with `store`) and returns the gradient w.r.t. the input.
pub fn layer_backward<T: Scalar>(
    trace: &LayerTrace<T>,
    topo: &Topology,
    store: &ParamStore<T>,
    lp: &LayerParams,
    config: &ModelConfig,
    d_out: &Matrix<T>,
    grads: &mut [Matrix<T>],
) -> Result<Matrix<T>> {
    let act = config.activation;
    let h = &trace.input;
    let (n, d) = h.shape();
    let scale = relevance_scale::<T>(d, config.scaled_relevance);
    let hp = &trace.intermediate;

    // global mixing
    let d_inter = match &trace.mix {
        Some(mix) => {
            let dz = activation_backward(&mix.pre, d_out, act)?;
            grads[lp.global.0].add_assign(&mix.product.t_matmul(&dz)?)?;
            let dp = dz.matmul_t(store.value(lp.global))?;
            let dm2 = dp.matmul_t(hp)?;
            let mut dh = mix.relevance.matrix.matmul(&dp)?;
            let sym = dm2.add(&dm2.transpose())?.scale(scale);
            dh.add_assign(&sym.matmul(hp)?)?;
            dh
        }
        None => d_out.clone(),
    };

    let d_pre = activation_backward(&trace.pre, &d_inter, act)?;
    let m = trace.relevance.as_ref();
    let mut dh = Matrix::zeros(n, d);
    let mut dm = m.map(|_| Matrix::<T>::zeros(n, n));

    // self term
    grads[lp.self_weight.0].add_assign(&trace.self_input.t_matmul(&d_pre)?)?;
    let g0 = d_pre.matmul_t(store.value(lp.self_weight))?;
    for i in 0..n {
        axpy(dh.row_mut(i), weight(m, i, i), g0.row(i));
        if let Some(dm) = dm.as_mut() {
            let v = dm.get(i, i) + dot(g0.row(i), h.row(i));
            dm.set(i, i, v);
        }
    }

    // relation terms
    for (r, agg) in &trace.aggregates {
        grads[lp.relation[*r].0].add_assign(&agg.t_matmul(&d_pre)?)?;
        let gr = d_pre.matmul_t(store.value(lp.relation[*r]))?;
        for (i, lists) in topo.neighbors.iter().enumerate() {
            if let Some((_, nbrs)) = lists.iter().find(|(rel, _)| rel == r) {
                let c = T::one() / T::of(nbrs.len() as f64);
                for &j in nbrs {
                    axpy(dh.row_mut(j), c * weight(m, i, j), gr.row(i));
                    if let Some(dm) = dm.as_mut() {
                        let v = dm.get(i, j) + c * dot(gr.row(i), h.row(j));
                        dm.set(i, j, v);
                    }
                }
            }
        }
    }

    // question node
    if let (Some(qt), Some(q)) = (&trace.question, topo.question) {
        let dpq = Matrix::row_vector(d_pre.row(q))?;
        grads[lp.question.0].add_assign(&qt.fsum.t_matmul(&dpq)?)?;
        let df = dpq.matmul_t(store.value(lp.question))?;
        let k = qt.z.rows();
        // every neighbor's F_c output receives the same upstream gradient
        let mut df_rows = Matrix::zeros(k, d);
        for row in 0..k {
            df_rows.row_mut(row).copy_from_slice(df.row(0));
        }
        grads[lp.fc_w2.0].add_assign(&qt.a.t_matmul(&df_rows)?)?;
        axpy(grads[lp.fc_b2.0].row_mut(0), T::of(k as f64), df.row(0));
        let da = df_rows.matmul_t(store.value(lp.fc_w2))?;
        let du = activation_backward(&qt.u, &da, act)?;
        grads[lp.fc_w1.0].add_assign(&qt.z.t_matmul(&du)?)?;
        for row in 0..k {
            axpy(grads[lp.fc_b1.0].row_mut(0), T::one(), du.row(row));
        }
        let dz = du.matmul_t(store.value(lp.fc_w1))?;
        for (row, &j) in topo.question_neighbors.iter().enumerate() {
            let dzr = dz.row(row);
            axpy(dh.row_mut(q), T::one(), &dzr[..d]);
            let g = &dzr[d..];
            axpy(dh.row_mut(j), weight(m, q, j), g);
            if let Some(dm) = dm.as_mut() {
                let v = dm.get(q, j) + dot(g, h.row(j));
                dm.set(q, j, v);
            }
        }
    }

    if let Some(dm) = dm {
        let sym = dm.add(&dm.transpose())?.scale(scale);
        dh.add_assign(&sym.matmul(h)?)?;
    }
    dh.check_finite("layer backward")?;
    Ok(dh)
}
