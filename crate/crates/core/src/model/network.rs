//! Item embeddings, the GRU window encoder, and the two per-item heads built
//! on it: the actor (softmax over items) and the critic (a value per item).
//!
//! Output column `j` always corresponds to item id `j + 1`; the padding id
//! has no column, so it can never be recommended or valued.

use serde::{Deserialize, Serialize};

use crate::autodiff::{Binding, Graph, Param, Parameterized, SeededRng, Tensor, Var};
use crate::error::{Error, Result};
use crate::model::catalog::{Window, WINDOW};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkDims {
    pub item_count: usize,
    pub embed_dim: usize,
    pub hidden_dim: usize,
}

impl NetworkDims {
    pub fn new(item_count: usize, embed_dim: usize, hidden_dim: usize) -> Self {
        Self {
            item_count,
            embed_dim,
            hidden_dim,
        }
    }
}

const EMBED: usize = 0;
const W_Z: usize = 1;
const U_Z: usize = 2;
const B_Z: usize = 3;
const W_R: usize = 4;
const U_R: usize = 5;
const B_R: usize = 6;
const W_N: usize = 7;
const U_N: usize = 8;
const B_N: usize = 9;
const ENCODER_PARAMS: usize = 10;

/// Embedding table plus a single-layer GRU, unrolled over a window from a
/// zero hidden state:
///
/// ```text
/// z = sigmoid(x Wz + h Uz + bz)
/// r = sigmoid(x Wr + h Ur + br)
/// n = tanh(x Wn + (r * h) Un + bn)
/// h' = (1 - z) * n + z * h
/// ```
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GruEncoder {
    dims: NetworkDims,
    params: Vec<Param>,
}

impl GruEncoder {
    pub fn new(prefix: &str, dims: NetworkDims, rng: &mut SeededRng) -> Self {
        let (a, e, h) = (dims.item_count, dims.embed_dim, dims.hidden_dim);
        let p = |n: &str| format!("{prefix}.{n}");
        // Embedding rows are lookups, so their fan-in is one.
        let mut params = vec![Param::uniform(p("embedding"), a + 1, e, 1, rng)];
        for gate in ["z", "r", "n"] {
            params.push(Param::uniform(p(&format!("w_{gate}")), e, h, e, rng));
            params.push(Param::uniform(p(&format!("u_{gate}")), h, h, h, rng));
            params.push(Param::zeros(p(&format!("b_{gate}")), &[h]));
        }
        Self { dims, params }
    }

    pub fn dims(&self) -> NetworkDims {
        self.dims
    }

    fn validate(&self, windows: &[Window]) -> Result<()> {
        for w in windows {
            for &id in w {
                if id as usize > self.dims.item_count {
                    return Err(Error::IndexOutOfRange {
                        what: "item id",
                        index: id as usize,
                        size: self.dims.item_count + 1,
                    });
                }
            }
        }
        Ok(())
    }

    /// Encodes a batch of windows to `[batch, hidden]`.
    fn encode(&self, g: &mut Graph, vars: &[Var], windows: &[Window]) -> Result<Var> {
        self.validate(windows)?;
        let b = windows.len();
        let mut h = g.constant(Tensor::zeros(&[b, self.dims.hidden_dim]));
        for t in 0..WINDOW {
            let ids: Vec<usize> = windows.iter().map(|w| w[t] as usize).collect();
            let x = g.gather_rows(vars[EMBED], &ids)?;

            let xz = g.matmul(x, vars[W_Z])?;
            let hz = g.matmul(h, vars[U_Z])?;
            let z = g.add(xz, hz)?;
            let z = g.add_row(z, vars[B_Z])?;
            let z = g.sigmoid(z);

            let xr = g.matmul(x, vars[W_R])?;
            let hr = g.matmul(h, vars[U_R])?;
            let r = g.add(xr, hr)?;
            let r = g.add_row(r, vars[B_R])?;
            let r = g.sigmoid(r);

            let xn = g.matmul(x, vars[W_N])?;
            let rh = g.mul(r, h)?;
            let hn = g.matmul(rh, vars[U_N])?;
            let n = g.add(xn, hn)?;
            let n = g.add_row(n, vars[B_N])?;
            let n = g.tanh(n);

            let keep = g.mul(z, h)?;
            let one_minus_z = g.one_minus(z);
            let fresh = g.mul(one_minus_z, n)?;
            h = g.add(fresh, keep)?;
        }
        Ok(h)
    }

    /// Hidden vector for a single window.
    pub fn encode_state(&self, window: &Window) -> Result<Vec<f64>> {
        let mut g = Graph::new();
        let vars = bind(&self.params(), &mut g, Binding::Frozen);
        let h = self.encode(&mut g, &vars, std::slice::from_ref(window))?;
        Ok(g.value(h).data().to_vec())
    }
}

impl Parameterized for GruEncoder {
    fn params(&self) -> Vec<&Param> {
        self.params.iter().collect()
    }
    fn params_mut(&mut self) -> Vec<&mut Param> {
        self.params.iter_mut().collect()
    }
}

fn bind(params: &[&Param], g: &mut Graph, mode: Binding) -> Vec<Var> {
    params.iter().map(|p| p.bind(g, mode)).collect()
}

/// Output of a forward pass: the `[batch, items]` result and the graph
/// handles of every parameter, in [`Parameterized::params`] order.
#[derive(Debug)]
pub struct Forward {
    pub output: Var,
    pub params: Vec<Var>,
}

/// GRU encoder followed by a linear layer producing one score per item.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ItemScorer {
    encoder: GruEncoder,
    weight: Param,
    bias: Param,
}

impl ItemScorer {
    pub fn new(prefix: &str, dims: NetworkDims, rng: &mut SeededRng) -> Self {
        let encoder = GruEncoder::new(&format!("{prefix}.encoder"), dims, rng);
        let weight = Param::uniform(
            format!("{prefix}.head.weight"),
            dims.hidden_dim,
            dims.item_count,
            dims.hidden_dim,
            rng,
        );
        let bias = Param::zeros(format!("{prefix}.head.bias"), &[dims.item_count]);
        Self {
            encoder,
            weight,
            bias,
        }
    }

    pub fn dims(&self) -> NetworkDims {
        self.encoder.dims
    }

    pub fn encoder(&self) -> &GruEncoder {
        &self.encoder
    }

    pub fn forward(&self, g: &mut Graph, mode: Binding, windows: &[Window]) -> Result<Forward> {
        let params = bind(&self.params(), g, mode);
        let h = self.encoder.encode(g, &params[..ENCODER_PARAMS], windows)?;
        let out = g.matmul(h, params[ENCODER_PARAMS])?;
        let out = g.add_row(out, params[ENCODER_PARAMS + 1])?;
        Ok(Forward { output: out, params })
    }

    /// Scores from an already encoded hidden vector.
    pub fn scores_from_hidden(&self, hidden: &[f64]) -> Result<Vec<f64>> {
        let (h, a) = (self.dims().hidden_dim, self.dims().item_count);
        if hidden.len() != h {
            return Err(Error::shape("scores_from_hidden", &[h], &[hidden.len()]));
        }
        let w = self.weight.value.data();
        let mut out = self.bias.value.data().to_vec();
        for (i, &x) in hidden.iter().enumerate() {
            for (o, &wv) in out.iter_mut().zip(&w[i * a..(i + 1) * a]) {
                *o += x * wv;
            }
        }
        Ok(out)
    }

    /// Frozen forward pass returning raw `[batch, items]` scores.
    pub fn scores(&self, windows: &[Window]) -> Result<Tensor> {
        let mut g = Graph::new();
        let f = self.forward(&mut g, Binding::Frozen, windows)?;
        Ok(g.value(f.output).clone())
    }
}

impl Parameterized for ItemScorer {
    fn params(&self) -> Vec<&Param> {
        let mut v = self.encoder.params();
        v.push(&self.weight);
        v.push(&self.bias);
        v
    }
    fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut v = self.encoder.params_mut();
        v.push(&mut self.weight);
        v.push(&mut self.bias);
        v
    }
}

/// The actor: a categorical distribution over catalog items per state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolicyNetwork {
    scorer: ItemScorer,
}

impl PolicyNetwork {
    pub fn new(dims: NetworkDims, rng: &mut SeededRng) -> Self {
        Self {
            scorer: ItemScorer::new("actor", dims, rng),
        }
    }

    pub fn dims(&self) -> NetworkDims {
        self.scorer.dims()
    }

    pub fn scorer(&self) -> &ItemScorer {
        &self.scorer
    }

    pub fn logits(&self, g: &mut Graph, mode: Binding, windows: &[Window]) -> Result<Forward> {
        self.scorer.forward(g, mode, windows)
    }

    /// `[batch, items]` probabilities on the graph.
    pub fn probabilities(&self, g: &mut Graph, mode: Binding, windows: &[Window]) -> Result<Forward> {
        let f = self.scorer.forward(g, mode, windows)?;
        let p = g.softmax(f.output);
        Ok(Forward {
            output: p,
            params: f.params,
        })
    }

    /// Frozen `[batch, items]` probabilities.
    pub fn distribution(&self, windows: &[Window]) -> Result<Tensor> {
        let mut g = Graph::new();
        let f = self.probabilities(&mut g, Binding::Frozen, windows)?;
        Ok(g.value(f.output).clone())
    }

    /// Distribution given an encoded state.
    pub fn distribution_from_hidden(&self, hidden: &[f64]) -> Result<Vec<f64>> {
        let logits = self.scorer.scores_from_hidden(hidden)?;
        Ok(crate::autodiff::softmax_rows(&Tensor::vector(logits)).into_data())
    }

    /// Probabilities indexed by item id; entry 0 (padding) is exactly zero.
    pub fn probabilities_by_id(&self, window: &Window) -> Result<Vec<f64>> {
        let p = self.distribution(std::slice::from_ref(window))?;
        let mut v = Vec::with_capacity(p.len() + 1);
        v.push(0.0);
        v.extend_from_slice(p.data());
        Ok(v)
    }
}

impl Parameterized for PolicyNetwork {
    fn params(&self) -> Vec<&Param> {
        self.scorer.params()
    }
    fn params_mut(&mut self) -> Vec<&mut Param> {
        self.scorer.params_mut()
    }
}

/// A critic `f(s, .)`: one value per item from a private encoder.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Critic {
    scorer: ItemScorer,
}

impl Critic {
    pub fn new(prefix: &str, dims: NetworkDims, rng: &mut SeededRng) -> Self {
        Self {
            scorer: ItemScorer::new(prefix, dims, rng),
        }
    }

    pub fn dims(&self) -> NetworkDims {
        self.scorer.dims()
    }

    pub fn scorer(&self) -> &ItemScorer {
        &self.scorer
    }

    pub fn values(&self, g: &mut Graph, mode: Binding, windows: &[Window]) -> Result<Forward> {
        self.scorer.forward(g, mode, windows)
    }

    /// Frozen `[batch, items]` value table.
    pub fn value_table(&self, windows: &[Window]) -> Result<Tensor> {
        self.scorer.scores(windows)
    }

    pub fn values_from_hidden(&self, hidden: &[f64]) -> Result<Vec<f64>> {
        self.scorer.scores_from_hidden(hidden)
    }
}

impl Parameterized for Critic {
    fn params(&self) -> Vec<&Param> {
        self.scorer.params()
    }
    fn params_mut(&mut self) -> Vec<&mut Param> {
        self.scorer.params_mut()
    }
}

/// Two independently initialised critics (double-Q).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriticPair {
    pub f1: Critic,
    pub f2: Critic,
}

impl CriticPair {
    pub fn new(dims: NetworkDims, rng: &mut SeededRng) -> Self {
        let f1 = Critic::new("critic1", dims, rng);
        let f2 = Critic::new("critic2", dims, rng);
        Self { f1, f2 }
    }

    pub fn get(&self, which: usize) -> &Critic {
        if which == 0 {
            &self.f1
        } else {
            &self.f2
        }
    }

    pub fn get_mut(&mut self, which: usize) -> &mut Critic {
        if which == 0 {
            &mut self.f1
        } else {
            &mut self.f2
        }
    }
}

/// `f(s, pi) = sum_a pi(a) f(s, a)`, computed exactly.
pub fn expected_value(values: &[f64], policy: &[f64]) -> Result<f64> {
    if values.len() != policy.len() {
        return Err(Error::shape("expected_value", &[values.len()], &[policy.len()]));
    }
    Ok(values.iter().zip(policy).map(|(v, p)| v * p).sum())
}
