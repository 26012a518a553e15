//! Batched derivative propagation through an [`Mlp`].
//!
//! A forward pass carries, for every collocation point, the value of each
//! layer together with its first derivatives along the coordinate axes and a
//! configurable set of second-order "probes" `tr(M·D²h)` for fixed symmetric
//! matrices `M`. All channels share one matrix product per layer.
//!
//! The pass records what its reverse sweep needs (layer inputs,
//! pre-activations, activation derivatives), so [`Mlp::jet_backward`] returns
//! exact parameter gradients of any loss that depends on the propagated
//! values, gradients and probes. This is the layer-level counterpart of the
//! scalar tape in [`crate::autodiff`], used wherever whole collocation sets
//! are evaluated.

use ndarray::{s, Array2, ArrayView2, ArrayViewMut2, Axis};

use super::mlp::Mlp;
use crate::error::{Error, Result};

/// A second-order probe `q(z) = Σ coef·z_k·z_l` over `k ≤ l`, i.e. the
/// quadratic form of a symmetric matrix `M`, so the channel carries
/// `tr(M·D²h)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Probe {
    terms: Vec<(usize, usize, f64)>,
}

impl Probe {
    /// `M = I`: the Laplacian.
    pub fn laplacian(dim: usize) -> Self {
        Probe {
            terms: (0..dim).map(|k| (k, k, 1.0)).collect(),
        }
    }

    /// `M = e_k e_kᵀ`: the pure second derivative `∂²/∂x_k²`.
    pub fn diagonal(k: usize) -> Self {
        Probe {
            terms: vec![(k, k, 1.0)],
        }
    }

    /// `M = e_k e_lᵀ + e_l e_kᵀ` (`k ≠ l`): twice the mixed derivative.
    pub fn mixed(k: usize, l: usize) -> Self {
        assert_ne!(k, l);
        let (k, l) = if k < l { (k, l) } else { (l, k) };
        Probe {
            terms: vec![(k, l, 2.0)],
        }
    }

    pub fn terms(&self) -> &[(usize, usize, f64)] {
        &self.terms
    }

    fn max_index(&self) -> usize {
        self.terms.iter().map(|&(k, l, _)| k.max(l)).max().unwrap_or(0)
    }
}

/// Which derivative channels a forward pass propagates.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct JetPlan {
    pub first_order: bool,
    pub probes: Vec<Probe>,
}

impl JetPlan {
    pub fn values_only() -> Self {
        JetPlan::default()
    }

    pub fn first_order() -> Self {
        JetPlan {
            first_order: true,
            probes: Vec::new(),
        }
    }

    pub fn with_probes(probes: Vec<Probe>) -> Self {
        JetPlan {
            first_order: true,
            probes,
        }
    }

    /// All `d(d+1)/2` Hessian entries: diagonal probes then mixed probes in
    /// lexicographic order.
    pub fn full_hessian(dim: usize) -> Self {
        let mut probes: Vec<Probe> = (0..dim).map(Probe::diagonal).collect();
        for k in 0..dim {
            for l in k + 1..dim {
                probes.push(Probe::mixed(k, l));
            }
        }
        JetPlan::with_probes(probes)
    }

    pub fn channels(&self, dim: usize) -> usize {
        1 + if self.first_order { dim } else { 0 } + self.probes.len()
    }

    fn needs_second_order(&self) -> bool {
        !self.probes.is_empty()
    }
}

/// Network outputs for a batch of points, one block of rows per channel.
#[derive(Clone, Debug)]
pub struct Jets {
    batch: usize,
    dim: usize,
    first_order: bool,
    probes: usize,
    data: Array2<f64>,
}

impl Jets {
    fn zeros_like(other: &Jets) -> Self {
        Jets {
            data: Array2::zeros(other.data.raw_dim()),
            ..*other
        }
    }

    pub fn batch(&self) -> usize {
        self.batch
    }

    pub fn channel_count(&self) -> usize {
        self.data.nrows() / self.batch.max(1)
    }

    fn block(&self, c: usize) -> ArrayView2<'_, f64> {
        self.data.slice(s![c * self.batch..(c + 1) * self.batch, ..])
    }

    fn block_mut(&mut self, c: usize) -> ArrayViewMut2<'_, f64> {
        let b = self.batch;
        self.data.slice_mut(s![c * b..(c + 1) * b, ..])
    }

    /// `batch × outputs` values.
    pub fn value(&self) -> ArrayView2<'_, f64> {
        self.block(0)
    }

    /// `∂/∂x_k` of every output.
    pub fn grad(&self, k: usize) -> ArrayView2<'_, f64> {
        assert!(self.first_order && k < self.dim);
        self.block(1 + k)
    }

    /// Probe `s` of every output.
    pub fn probe(&self, s: usize) -> ArrayView2<'_, f64> {
        assert!(s < self.probes);
        self.block(1 + self.first_order_count() + s)
    }

    pub fn value_mut(&mut self) -> ArrayViewMut2<'_, f64> {
        self.block_mut(0)
    }

    pub fn grad_mut(&mut self, k: usize) -> ArrayViewMut2<'_, f64> {
        assert!(self.first_order && k < self.dim);
        self.block_mut(1 + k)
    }

    pub fn probe_mut(&mut self, s: usize) -> ArrayViewMut2<'_, f64> {
        assert!(s < self.probes);
        let c = 1 + self.first_order_count() + s;
        self.block_mut(c)
    }

    fn first_order_count(&self) -> usize {
        if self.first_order {
            self.dim
        } else {
            0
        }
    }
}

struct LayerCache {
    input: Array2<f64>,
    /// Pre-activation (all channels); absent for the affine output layer.
    pre: Option<Array2<f64>>,
    /// `σ', σ'', σ'''` at the value channel, each `batch × width`.
    derivs: Option<[Array2<f64>; 3]>,
}

/// Everything the reverse sweep of one forward pass needs.
pub struct JetTrace {
    plan: JetPlan,
    batch: usize,
    dim: usize,
    layers: Vec<LayerCache>,
    output: Jets,
}

impl JetTrace {
    pub fn output(&self) -> &Jets {
        &self.output
    }

    pub fn plan(&self) -> &JetPlan {
        &self.plan
    }

    /// A zeroed cotangent with the shape of the outputs.
    pub fn zero_cotangent(&self) -> Jets {
        Jets::zeros_like(&self.output)
    }
}

impl Mlp {
    /// Propagates values and the channels requested by `plan` for every row
    /// of `points` (`batch × input_dim`).
    pub fn jet_forward(&self, points: ArrayView2<'_, f64>, plan: &JetPlan) -> Result<JetTrace> {
        let d = self.input_dim();
        if points.ncols() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: points.ncols(),
            });
        }
        if plan.needs_second_order() {
            if !plan.first_order {
                return Err(Error::invalid("second-order probes need first-order channels"));
            }
            if !self.activation().is_twice_differentiable() {
                return Err(Error::UnsupportedSecondOrder {
                    activation: self.activation().to_string(),
                });
            }
            if plan.probes.iter().any(|p| p.max_index() >= d) {
                return Err(Error::invalid("probe index exceeds input dimension"));
            }
        }
        let batch = points.nrows();
        let channels = plan.channels(d);
        let n_first = if plan.first_order { d } else { 0 };

        let mut h = Array2::<f64>::zeros((channels * batch, d));
        h.slice_mut(s![0..batch, ..]).assign(&points);
        for k in 0..n_first {
            h.slice_mut(s![(1 + k) * batch..(2 + k) * batch, k]).fill(1.0);
        }

        let activation = self.activation();
        let last = self.layer_count() - 1;
        let mut layers = Vec::with_capacity(self.layer_count());
        for l in 0..self.layer_count() {
            let mut z = h.dot(&self.weights(l));
            z.slice_mut(s![0..batch, ..])
                .axis_iter_mut(Axis(0))
                .for_each(|mut row| row += &self.bias(l));
            if l == last {
                layers.push(LayerCache {
                    input: h,
                    pre: None,
                    derivs: None,
                });
                h = z;
                break;
            }
            let width = z.ncols();
            let block = batch * width;
            let mut out = Array2::<f64>::zeros(z.raw_dim());
            let mut s1 = Array2::<f64>::zeros((batch, width));
            let mut s2 = Array2::<f64>::zeros((batch, width));
            let mut s3 = if plan.needs_second_order() {
                Array2::<f64>::zeros((batch, width))
            } else {
                Array2::<f64>::zeros((0, 0))
            };
            {
                let zs = z.as_slice().expect("contiguous");
                let os = out.as_slice_mut().expect("contiguous");
                let (d1, d2, d3) = (
                    s1.as_slice_mut().unwrap(),
                    s2.as_slice_mut().unwrap(),
                    s3.as_slice_mut().unwrap(),
                );
                if d3.is_empty() {
                    for i in 0..block {
                        let [a, b, c, _] = activation.derivatives(zs[i]);
                        os[i] = a;
                        d1[i] = b;
                        d2[i] = c;
                    }
                } else {
                    for i in 0..block {
                        let [a, b, c, e] = activation.derivatives(zs[i]);
                        os[i] = a;
                        d1[i] = b;
                        d2[i] = c;
                        d3[i] = e;
                    }
                }
                for k in 0..n_first {
                    let off = (1 + k) * block;
                    for i in 0..block {
                        os[off + i] = d1[i] * zs[off + i];
                    }
                }
                for (si, probe) in plan.probes.iter().enumerate() {
                    let off = (1 + n_first + si) * block;
                    for i in 0..block {
                        let mut q = 0.0;
                        for &(k, m, coef) in &probe.terms {
                            q += coef * zs[(1 + k) * block + i] * zs[(1 + m) * block + i];
                        }
                        os[off + i] = d2[i] * q + d1[i] * zs[off + i];
                    }
                }
            }
            layers.push(LayerCache {
                input: h,
                pre: Some(z),
                derivs: Some([s1, s2, s3]),
            });
            h = out;
        }

        let output = Jets {
            batch,
            dim: d,
            first_order: plan.first_order,
            probes: plan.probes.len(),
            data: h,
        };
        Ok(JetTrace {
            plan: plan.clone(),
            batch,
            dim: d,
            layers,
            output,
        })
    }

    /// Accumulates into `grad` (flat, same layout as the parameters) the
    /// gradient of a loss whose derivative with respect to the outputs of
    /// `trace` is `cotangent`.
    pub fn jet_backward(&self, trace: JetTrace, cotangent: &Jets, grad: &mut [f64]) {
        assert_eq!(grad.len(), self.param_count());
        assert_eq!(cotangent.data.raw_dim(), trace.output.data.raw_dim());
        let batch = trace.batch;
        let n_first = if trace.plan.first_order { trace.dim } else { 0 };
        let n_layers = trace.layers.len();
        let mut gbar = cotangent.data.clone();

        for (l, cache) in trace.layers.into_iter().enumerate().rev() {
            let zbar = match (&cache.pre, &cache.derivs) {
                (Some(z), Some([s1, s2, s3])) => activation_backward(
                    z,
                    &gbar,
                    [s1, s2, s3],
                    batch,
                    n_first,
                    &trace.plan.probes,
                ),
                _ => {
                    debug_assert_eq!(l, n_layers - 1);
                    std::mem::take(&mut gbar)
                }
            };
            let (w_off, b_off) = self.layer_offsets(l);
            let (fan_in, fan_out) = self.layer_shape(l);
            let wgrad = cache.input.t().dot(&zbar);
            for (g, v) in grad[w_off..b_off].iter_mut().zip(wgrad.iter()) {
                *g += v;
            }
            let bgrad = zbar.slice(s![0..batch, ..]).sum_axis(Axis(0));
            for (g, v) in grad[b_off..b_off + fan_out].iter_mut().zip(bgrad.iter()) {
                *g += v;
            }
            if l > 0 {
                gbar = zbar.dot(&self.weights(l).t());
                debug_assert_eq!(gbar.ncols(), fan_in);
            }
        }
    }
}

fn activation_backward(
    z: &Array2<f64>,
    gbar: &Array2<f64>,
    [s1, s2, s3]: [&Array2<f64>; 3],
    batch: usize,
    n_first: usize,
    probes: &[Probe],
) -> Array2<f64> {
    let width = z.ncols();
    let block = batch * width;
    let mut zbar = Array2::<f64>::zeros(z.raw_dim());
    let gbar = gbar.as_standard_layout();
    let zs = z.as_slice().expect("contiguous");
    let gs = gbar.as_slice().expect("contiguous");
    let (d1, d2, d3) = (
        s1.as_slice().unwrap(),
        s2.as_slice().unwrap(),
        s3.as_slice().unwrap(),
    );
    let out = zbar.as_slice_mut().expect("contiguous");

    // value channel: first-order part
    for i in 0..block {
        out[i] = d1[i] * gs[i];
    }
    for k in 0..n_first {
        let off = (1 + k) * block;
        for i in 0..block {
            out[off + i] = d1[i] * gs[off + i];
            out[i] += d2[i] * gs[off + i] * zs[off + i];
        }
    }
    for (si, probe) in probes.iter().enumerate() {
        let off = (1 + n_first + si) * block;
        for i in 0..block {
            let g = gs[off + i];
            out[off + i] = d1[i] * g;
            let mut q = 0.0;
            for &(k, m, coef) in &probe.terms {
                let zk = zs[(1 + k) * block + i];
                let zm = zs[(1 + m) * block + i];
                q += coef * zk * zm;
                let w = d2[i] * g * coef;
                out[(1 + k) * block + i] += w * zm;
                out[(1 + m) * block + i] += w * zk;
            }
            out[i] += g * (d3[i] * q + d2[i] * zs[off + i]);
        }
    }
    zbar
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::{input_gradient, input_hessian};
    use crate::model::mlp::{Activation, MlpSpec};
    use ndarray::Array2;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn net(act: Activation, d: usize, out: usize, seed: u64) -> Mlp {
        Mlp::init(MlpSpec::new(d, vec![7, 5], out).with_activation(act).with_seed(seed)).unwrap()
    }

    fn points(n: usize, d: usize, seed: u64) -> Array2<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Array2::from_shape_fn((n, d), |_| rng.random_range(-1.0..1.0))
    }

    #[test]
    fn jets_match_pointwise_dual_derivatives() {
        for act in [Activation::Tanh, Activation::Sigmoid, Activation::Sin] {
            let m = net(act, 3, 1, 11);
            let x = points(9, 3, 2);
            let trace = m.jet_forward(x.view(), &JetPlan::full_hessian(3)).unwrap();
            let jets = trace.output();
            for b in 0..9 {
                let p = x.row(b).to_vec();
                let g = input_gradient(&m, &p).unwrap();
                let h = input_hessian(&m, &p).unwrap();
                assert!((jets.value()[[b, 0]] - m.forward(&p).unwrap()[0]).abs() < 1e-14);
                for k in 0..3 {
                    assert!((jets.grad(k)[[b, 0]] - g[k]).abs() < 1e-13);
                    assert!((jets.probe(k)[[b, 0]] - h[[k, k]]).abs() < 1e-12);
                }
                // mixed probes in (0,1), (0,2), (1,2) order carry 2·H_kl
                let mixed = [(0, 1), (0, 2), (1, 2)];
                for (s, &(k, l)) in mixed.iter().enumerate() {
                    assert!((jets.probe(3 + s)[[b, 0]] - 2.0 * h[[k, l]]).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn laplacian_probe_is_trace() {
        let m = net(Activation::Tanh, 2, 1, 4);
        let x = points(5, 2, 8);
        let lap = m
            .jet_forward(x.view(), &JetPlan::with_probes(vec![Probe::laplacian(2)]))
            .unwrap();
        let full = m.jet_forward(x.view(), &JetPlan::full_hessian(2)).unwrap();
        for b in 0..5 {
            let tr = full.output().probe(0)[[b, 0]] + full.output().probe(1)[[b, 0]];
            assert!((lap.output().probe(0)[[b, 0]] - tr).abs() < 1e-13);
        }
    }

    #[test]
    fn relu_refuses_second_order() {
        let m = net(Activation::Relu, 2, 1, 1);
        let x = points(3, 2, 1);
        assert!(m.jet_forward(x.view(), &JetPlan::first_order()).is_ok());
        assert!(matches!(
            m.jet_forward(x.view(), &JetPlan::full_hessian(2)),
            Err(Error::UnsupportedSecondOrder { .. })
        ));
    }

    /// Random linear functional of every output channel, differentiated by
    /// the reverse sweep and by central differences on the parameters.
    #[test]
    fn backward_matches_finite_differences() {
        for act in [Activation::Tanh, Activation::Sin, Activation::LeakyRelu(0.1)] {
            let plan = if act.is_twice_differentiable() {
                JetPlan::with_probes(vec![Probe::laplacian(2), Probe::mixed(0, 1)])
            } else {
                JetPlan::first_order()
            };
            let m = net(act, 2, 2, 21);
            let x = points(6, 2, 3);
            let trace = m.jet_forward(x.view(), &plan).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(99);
            let mut cot = trace.zero_cotangent();
            cot.data.mapv_inplace(|_| rng.random_range(-1.0..1.0));
            let functional = |mm: &Mlp| -> f64 {
                let t = mm.jet_forward(x.view(), &plan).unwrap();
                (&t.output().data * &cot.data).sum()
            };
            let mut grad = vec![0.0; m.param_count()];
            m.jet_backward(trace, &cot, &mut grad);
            let h = 1e-6;
            for i in 0..m.param_count() {
                let mut mp = m.clone();
                mp.params_mut()[i] += h;
                let mut mm = m.clone();
                mm.params_mut()[i] -= h;
                let fd = (functional(&mp) - functional(&mm)) / (2.0 * h);
                let tol = 1e-6 * (1.0 + fd.abs());
                assert!((grad[i] - fd).abs() < tol, "{act} param {i}: {} vs {fd}", grad[i]);
            }
        }
    }
}

#[cfg(test)]
mod props {
    use super::*;
    use crate::autodiff::input_hessian;
    use crate::model::mlp::{Activation, MlpSpec};
    use proptest::prelude::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn laplacian_probe_is_hessian_trace(
            d in 1usize..4,
            seed in 0u64..1000,
            x in prop::collection::vec(-2.0..2.0f64, 3),
        ) {
            let m = Mlp::init(MlpSpec::new(d, vec![6, 4], 1).with_activation(Activation::Tanh).with_seed(seed)).unwrap();
            let pts = Array2::from_shape_vec((1, d), x[..d].to_vec()).unwrap();
            let plan = JetPlan { first_order: true, probes: vec![Probe::laplacian(d)] };
            let trace = m.jet_forward(pts.view(), &plan).unwrap();
            let h = input_hessian(&m, &x[..d]).unwrap();
            let tr: f64 = (0..d).map(|k| h[[k, k]]).sum();
            prop_assert!((trace.output().probe(0)[[0, 0]] - tr).abs() <= 1e-12 * (1.0 + tr.abs()));
        }
    }
}
