//! Tape-based reverse-mode differentiation.
//!
//! Every [`Exec`] call evaluates its kernel eagerly, stores the result as a
//! node and records the op with the ids of its inputs. [`Tape::backward`]
//! walks the nodes in exact reverse order, calling each op's adjoint kernel
//! and summing cotangents into the inputs.
//!
//! Complex intermediates are treated as pairs of reals. A cotangent on a
//! spectrum is stored as `dL/dRe + i dL/dIm`, which makes the adjoint of
//! `a * conj(b)` with respect to `b` equal to `conj(g) * a`, and the adjoint
//! of the forward FFT the unnormalized inverse FFT.

use indexmap::IndexMap;

use crate::error::{Error, Result};
use crate::exec::{l1_mean_value, Exec};
use crate::ops::{self, ConvParams, PatchLayout};
use crate::params::{Binder, ParameterStore};
use crate::scalar::Scalar;
use crate::spectral::{self, Spectrum};
use crate::tensor::Tensor;

/// Handle to a real node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

/// Handle to a spectrum node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct SpecVar(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug)]
enum Value<T> {
    Real(Tensor<T>),
    Spec(Spectrum<T>),
}

#[derive(Clone, Debug)]
enum Op<T> {
    Leaf,
    Opaque(String),
    ConvPointwise {
        x: usize,
        w: usize,
        b: Option<usize>,
    },
    ConvDepthwise {
        x: usize,
        w: usize,
        b: Option<usize>,
    },
    LayerNorm {
        x: usize,
        scale: usize,
        offset: usize,
    },
    Geglu {
        x: usize,
    },
    Softmax {
        x: usize,
    },
    Unfold {
        x: usize,
        layout: PatchLayout,
    },
    Fold {
        x: usize,
        layout: PatchLayout,
    },
    ReflectPad {
        x: usize,
        h: usize,
        w: usize,
    },
    Crop {
        x: usize,
        hp: usize,
        wp: usize,
    },
    SpaceToDepth {
        x: usize,
    },
    DepthToSpace {
        x: usize,
    },
    Concat {
        parts: Vec<usize>,
    },
    SplitPart {
        x: usize,
        start: usize,
    },
    Add {
        a: usize,
        b: usize,
    },
    Sub {
        a: usize,
        b: usize,
    },
    Mul {
        a: usize,
        b: usize,
    },
    Scale {
        x: usize,
        c: T,
    },
    Sum {
        x: usize,
    },
    L1Mean {
        x: usize,
    },
    Fft2 {
        x: usize,
    },
    Ifft2 {
        s: usize,
    },
    Ifft2RealPart {
        s: usize,
    },
    MulConj {
        a: usize,
        b: usize,
    },
    ScaleSpectrum {
        s: usize,
        w: usize,
    },
    ComplexAbsMean {
        s: usize,
    },
}

impl<T> Op<T> {
    fn name(&self) -> &str {
        match self {
            Op::Leaf => "leaf",
            Op::Opaque(n) => n,
            Op::ConvPointwise { .. } => "conv_pointwise",
            Op::ConvDepthwise { .. } => "conv_depthwise3x3",
            Op::LayerNorm { .. } => "layer_norm",
            Op::Geglu { .. } => "geglu",
            Op::Softmax { .. } => "softmax",
            Op::Unfold { .. } => "unfold_patches",
            Op::Fold { .. } => "fold_patches",
            Op::ReflectPad { .. } => "reflect_pad",
            Op::Crop { .. } => "crop",
            Op::SpaceToDepth { .. } => "space_to_depth",
            Op::DepthToSpace { .. } => "depth_to_space",
            Op::Concat { .. } => "concat_channels",
            Op::SplitPart { .. } => "split_channels",
            Op::Add { .. } => "add",
            Op::Sub { .. } => "sub",
            Op::Mul { .. } => "mul",
            Op::Scale { .. } => "scale",
            Op::Sum { .. } => "sum",
            Op::L1Mean { .. } => "l1_mean",
            Op::Fft2 { .. } => "fft2",
            Op::Ifft2 { .. } => "ifft2",
            Op::Ifft2RealPart { .. } => "ifft2_real_part",
            Op::MulConj { .. } => "mul_conj",
            Op::ScaleSpectrum { .. } => "scale_spectrum",
            Op::ComplexAbsMean { .. } => "complex_abs_mean",
        }
    }
}

#[derive(Clone, Debug)]
struct Node<T> {
    value: Value<T>,
    op: Op<T>,
}

/// Records evaluated primitives for one forward pass.
#[derive(Debug)]
pub struct Tape<T> {
    nodes: Vec<Node<T>>,
    params: IndexMap<String, usize>,
    corrupt: Option<String>,
}

/// Parameter handles bound onto a tape.
#[derive(Clone, Debug, Default)]
pub struct TapeParams {
    vars: IndexMap<String, Var>,
}

impl Binder<Var> for TapeParams {
    fn get(&self, name: &str) -> Result<Var> {
        self.vars
            .get(name)
            .copied()
            .ok_or_else(|| Error::UnknownParameter(name.to_string()))
    }
}

impl TapeParams {
    pub fn iter(&self) -> impl Iterator<Item = (&str, Var)> {
        self.vars.iter().map(|(k, v)| (k.as_str(), *v))
    }
}

/// Gradients keyed by parameter name, in binding order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Gradients<T> {
    pub entries: IndexMap<String, Tensor<T>>,
}

impl<T: Scalar> Gradients<T> {
    pub fn get(&self, name: &str) -> Result<&Tensor<T>> {
        self.entries
            .get(name)
            .ok_or_else(|| Error::UnknownParameter(name.to_string()))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor<T>)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn all_finite(&self) -> bool {
        self.entries.values().all(Tensor::all_finite)
    }
}

impl<T: Scalar> Default for Tape<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> Tape<T> {
    pub fn new() -> Self {
        Self {
            nodes: Vec::new(),
            params: IndexMap::new(),
            corrupt: None,
        }
    }

    /// Negates the cotangents produced by every op named `op` during
    /// backward. Used to check that gradient verification catches bad
    /// adjoints.
    pub fn corrupt_adjoint(&mut self, op: impl Into<String>) {
        self.corrupt = Some(op.into());
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Op names in execution order.
    pub fn op_names(&self) -> Vec<String> {
        self.nodes.iter().map(|n| n.op.name().to_string()).collect()
    }

    fn push(&mut self, value: Value<T>, op: Op<T>) -> usize {
        self.nodes.push(Node { value, op });
        self.nodes.len() - 1
    }

    fn push_real(&mut self, t: Tensor<T>, op: Op<T>) -> Var {
        Var(self.push(Value::Real(t), op))
    }

    fn push_spec(&mut self, s: Spectrum<T>, op: Op<T>) -> SpecVar {
        SpecVar(self.push(Value::Spec(s), op))
    }

    fn real(&self, i: usize) -> &Tensor<T> {
        match &self.nodes[i].value {
            Value::Real(t) => t,
            Value::Spec(_) => panic!("node {i} holds a spectrum, not a real tensor"),
        }
    }

    fn spec(&self, i: usize) -> &Spectrum<T> {
        match &self.nodes[i].value {
            Value::Spec(s) => s,
            Value::Real(_) => panic!("node {i} holds a real tensor, not a spectrum"),
        }
    }

    /// Registers a differentiable leaf under `name`.
    pub fn param(&mut self, name: &str, t: Tensor<T>) -> Result<Var> {
        if self.params.contains_key(name) {
            return Err(Error::arg(
                "tape",
                format!("parameter `{name}` bound twice"),
            ));
        }
        let v = self.push_real(t, Op::Leaf);
        self.params.insert(name.to_string(), v.0);
        Ok(v)
    }

    /// Binds every tensor of `store` as a differentiable leaf.
    pub fn bind_store(&mut self, store: &ParameterStore<T>) -> Result<TapeParams> {
        let mut vars = IndexMap::new();
        for (name, t) in store.iter() {
            vars.insert(name.to_string(), self.param(name, t.clone())?);
        }
        Ok(TapeParams { vars })
    }

    /// Records a value computed outside the registered primitive set. It can
    /// appear in the forward pass, but backward refuses to differentiate
    /// through it.
    pub fn opaque(&mut self, name: &str, t: Tensor<T>, _inputs: &[Var]) -> Var {
        self.push_real(t, Op::Opaque(name.to_string()))
    }

    pub fn scalar_value(&self, v: Var) -> T {
        self.real(v.0).data()[0]
    }

    /// Reverse sweep from the scalar node `loss`; returns gradients of every
    /// bound parameter (zeros for parameters the loss does not reach).
    pub fn backward(&self, loss: Var) -> Result<Gradients<T>> {
        if self.real(loss.0).len() != 1 {
            return Err(Error::invalid_shape(
                "backward",
                self.real(loss.0).shape(),
                "loss must be a scalar",
            ));
        }
        let mut grads: Vec<Option<Value<T>>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(Value::Real(Tensor::scalar(T::one())));

        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            let negate = self.corrupt.as_deref() == Some(node.op.name());
            let contributions = self.adjoint(i, &node.op, &g)?;
            for (target, mut v) in contributions {
                if negate {
                    v = match v {
                        Value::Real(t) => Value::Real(t.scale(-T::one())),
                        Value::Spec(s) => Value::Spec(s.neg()),
                    };
                }
                accumulate(&mut grads[target], v)?;
            }
            // Leaves keep their gradient for collection below.
            if matches!(node.op, Op::Leaf) {
                grads[i] = Some(g);
            }
        }

        let mut entries = IndexMap::new();
        for (name, &idx) in &self.params {
            let t = match grads[idx].take() {
                Some(Value::Real(t)) => t,
                Some(Value::Spec(_)) => unreachable!("parameters are real"),
                None => Tensor::zeros(self.real(idx).shape())?,
            };
            entries.insert(name.clone(), t);
        }
        Ok(Gradients { entries })
    }

    fn adjoint(&self, node: usize, op: &Op<T>, g: &Value<T>) -> Result<Vec<(usize, Value<T>)>> {
        use Value::{Real as R, Spec as S};
        let gr = || match g {
            R(t) => t,
            S(_) => unreachable!("real node received a spectrum cotangent"),
        };
        let gs = || match g {
            S(s) => s,
            R(_) => unreachable!("spectrum node received a real cotangent"),
        };
        Ok(match op {
            Op::Leaf => vec![],
            Op::Opaque(name) => return Err(Error::UnregisteredOp(name.clone())),
            Op::ConvPointwise { x, w, b } => {
                let (dx, dw, db) =
                    ops::conv_pointwise_backward(self.real(*x), self.real(*w), b.is_some(), gr())?;
                let mut out = vec![(*x, R(dx)), (*w, R(dw))];
                if let (Some(b), Some(db)) = (b, db) {
                    out.push((*b, R(db)));
                }
                out
            }
            Op::ConvDepthwise { x, w, b } => {
                let (dx, dw, db) = ops::conv_depthwise3x3_backward(
                    self.real(*x),
                    self.real(*w),
                    b.is_some(),
                    gr(),
                )?;
                let mut out = vec![(*x, R(dx)), (*w, R(dw))];
                if let (Some(b), Some(db)) = (b, db) {
                    out.push((*b, R(db)));
                }
                out
            }
            Op::LayerNorm { x, scale, offset } => {
                let (dx, ds, doff) =
                    ops::layer_norm_backward(self.real(*x), self.real(*scale), gr())?;
                vec![(*x, R(dx)), (*scale, R(ds)), (*offset, R(doff))]
            }
            Op::Geglu { x } => vec![(*x, R(ops::geglu_backward(self.real(*x), gr())?))],
            Op::Softmax { x } => vec![(*x, R(ops::softmax_backward(self.real(node), gr())?))],
            Op::Unfold { x, layout } => vec![(*x, R(ops::unfold_patches_backward(gr(), layout)?))],
            Op::Fold { x, layout } => vec![(*x, R(ops::fold_patches_backward(gr(), layout)?))],
            Op::ReflectPad { x, h, w } => vec![(*x, R(ops::reflect_pad_backward(gr(), *h, *w)?))],
            Op::Crop { x, hp, wp } => vec![(*x, R(ops::crop_backward(gr(), *hp, *wp)?))],
            Op::SpaceToDepth { x } => vec![(*x, R(ops::depth_to_space(gr())?))],
            Op::DepthToSpace { x } => vec![(*x, R(ops::space_to_depth(gr())?))],
            Op::Concat { parts } => {
                let sizes: Vec<usize> = parts.iter().map(|&p| self.real(p).shape()[1]).collect();
                let pieces = ops::split_channels(gr(), &sizes)?;
                parts
                    .iter()
                    .copied()
                    .zip(pieces.into_iter().map(R))
                    .collect()
            }
            Op::SplitPart { x, start } => {
                let src = self.real(*x);
                let (b, c, h, w) = src.dims4("split_channels")?;
                let part = gr();
                let pc = part.shape()[1];
                let hw = h * w;
                let mut dx = vec![T::zero(); src.len()];
                for bi in 0..b {
                    let dst = (bi * c + start) * hw;
                    dx[dst..dst + pc * hw]
                        .copy_from_slice(&part.data()[bi * pc * hw..(bi + 1) * pc * hw]);
                }
                vec![(*x, R(Tensor::from_vec(&[b, c, h, w], dx)?))]
            }
            Op::Add { a, b } => vec![(*a, R(gr().clone())), (*b, R(gr().clone()))],
            Op::Sub { a, b } => vec![(*a, R(gr().clone())), (*b, R(gr().scale(-T::one())))],
            Op::Mul { a, b } => vec![
                (*a, R(gr().mul(self.real(*b))?)),
                (*b, R(gr().mul(self.real(*a))?)),
            ],
            Op::Scale { x, c } => vec![(*x, R(gr().scale(*c)))],
            Op::Sum { x } => {
                let g0 = gr().data()[0];
                vec![(*x, R(Tensor::full(self.real(*x).shape(), g0)?))]
            }
            Op::L1Mean { x } => {
                let src = self.real(*x);
                let k = gr().data()[0] / T::from_usize(src.len());
                // sign(0) = 0: the symmetric subgradient at ties
                let d = src.map(|v| {
                    if v > T::zero() {
                        k
                    } else if v < T::zero() {
                        -k
                    } else {
                        T::zero()
                    }
                });
                vec![(*x, R(d))]
            }
            Op::Fft2 { x } => vec![(*x, R(spectral::fft2_backward(gs())?))],
            Op::Ifft2 { s } | Op::Ifft2RealPart { s } => {
                vec![(*s, S(spectral::ifft2_backward(gr(), self.spec(*s))?))]
            }
            Op::MulConj { a, b } => {
                let (ga, gb) = spectral::mul_conj_backward(gs(), self.spec(*a), self.spec(*b))?;
                vec![(*a, S(ga)), (*b, S(gb))]
            }
            Op::ScaleSpectrum { s, w } => {
                let (ds, dw) =
                    spectral::scale_spectrum_backward(gs(), self.spec(*s), self.real(*w))?;
                vec![(*s, S(ds)), (*w, R(dw))]
            }
            Op::ComplexAbsMean { s } => {
                let g0 = gr().data()[0];
                vec![(
                    *s,
                    S(spectral::complex_abs_mean_backward(g0, self.spec(*s))),
                )]
            }
        })
    }
}

fn accumulate<T: Scalar>(slot: &mut Option<Value<T>>, v: Value<T>) -> Result<()> {
    match (slot.as_mut(), v) {
        (None, v) => *slot = Some(v),
        (Some(Value::Real(acc)), Value::Real(t)) => acc.add_assign(&t)?,
        (Some(Value::Spec(acc)), Value::Spec(s)) => acc.add_assign(&s)?,
        _ => unreachable!("cotangent kind mismatch"),
    }
    Ok(())
}

impl<T: Scalar> Exec<T> for Tape<T> {
    type Real = Var;
    type Spec = SpecVar;

    fn value<'a>(&'a self, x: &'a Var) -> &'a Tensor<T> {
        self.real(x.0)
    }

    fn spec_value<'a>(&'a self, s: &'a SpecVar) -> &'a Spectrum<T> {
        self.spec(s.0)
    }

    fn constant(&mut self, t: Tensor<T>) -> Var {
        self.push_real(t, Op::Leaf)
    }

    fn conv_pointwise(&mut self, x: &Var, p: &ConvParams<Var>) -> Result<Var> {
        let y = ops::conv_pointwise(
            self.real(x.0),
            self.real(p.weight.0),
            p.bias.map(|b| self.real(b.0)),
        )?;
        Ok(self.push_real(
            y,
            Op::ConvPointwise {
                x: x.0,
                w: p.weight.0,
                b: p.bias.map(|b| b.0),
            },
        ))
    }

    fn conv_depthwise3x3(&mut self, x: &Var, p: &ConvParams<Var>) -> Result<Var> {
        let y = ops::conv_depthwise3x3(
            self.real(x.0),
            self.real(p.weight.0),
            p.bias.map(|b| self.real(b.0)),
        )?;
        Ok(self.push_real(
            y,
            Op::ConvDepthwise {
                x: x.0,
                w: p.weight.0,
                b: p.bias.map(|b| b.0),
            },
        ))
    }

    fn layer_norm(&mut self, x: &Var, scale: &Var, offset: &Var) -> Result<Var> {
        let y = ops::layer_norm(self.real(x.0), self.real(scale.0), self.real(offset.0))?;
        Ok(self.push_real(
            y,
            Op::LayerNorm {
                x: x.0,
                scale: scale.0,
                offset: offset.0,
            },
        ))
    }

    fn geglu(&mut self, x: &Var) -> Result<Var> {
        let y = ops::geglu(self.real(x.0))?;
        Ok(self.push_real(y, Op::Geglu { x: x.0 }))
    }

    fn softmax(&mut self, x: &Var) -> Result<Var> {
        let y = ops::softmax(self.real(x.0))?;
        Ok(self.push_real(y, Op::Softmax { x: x.0 }))
    }

    fn unfold(&mut self, x: &Var, patch: usize) -> Result<(Var, PatchLayout)> {
        let (y, layout) = ops::unfold_patches(self.real(x.0), patch)?;
        Ok((self.push_real(y, Op::Unfold { x: x.0, layout }), layout))
    }

    fn fold(&mut self, x: &Var, layout: &PatchLayout) -> Result<Var> {
        let y = ops::fold_patches(self.real(x.0), layout)?;
        Ok(self.push_real(
            y,
            Op::Fold {
                x: x.0,
                layout: *layout,
            },
        ))
    }

    fn reflect_pad(&mut self, x: &Var, pad_h: usize, pad_w: usize) -> Result<Var> {
        let src = self.real(x.0);
        let (_, _, h, w) = src.dims4("reflect_pad")?;
        let y = ops::reflect_pad(src, pad_h, pad_w)?;
        Ok(self.push_real(y, Op::ReflectPad { x: x.0, h, w }))
    }

    fn crop(&mut self, x: &Var, h: usize, w: usize) -> Result<Var> {
        let src = self.real(x.0);
        let (_, _, hp, wp) = src.dims4("crop")?;
        let y = ops::crop(src, h, w)?;
        Ok(self.push_real(y, Op::Crop { x: x.0, hp, wp }))
    }

    fn space_to_depth(&mut self, x: &Var) -> Result<Var> {
        let y = ops::space_to_depth(self.real(x.0))?;
        Ok(self.push_real(y, Op::SpaceToDepth { x: x.0 }))
    }

    fn depth_to_space(&mut self, x: &Var) -> Result<Var> {
        let y = ops::depth_to_space(self.real(x.0))?;
        Ok(self.push_real(y, Op::DepthToSpace { x: x.0 }))
    }

    fn concat_channels(&mut self, parts: &[&Var]) -> Result<Var> {
        let vals: Vec<&Tensor<T>> = parts.iter().map(|p| self.real(p.0)).collect();
        let y = ops::concat_channels(&vals)?;
        Ok(self.push_real(
            y,
            Op::Concat {
                parts: parts.iter().map(|p| p.0).collect(),
            },
        ))
    }

    fn split_channels(&mut self, x: &Var, sizes: &[usize]) -> Result<Vec<Var>> {
        let pieces = ops::split_channels(self.real(x.0), sizes)?;
        let mut start = 0;
        let mut out = Vec::with_capacity(pieces.len());
        for (piece, &s) in pieces.into_iter().zip(sizes) {
            out.push(self.push_real(piece, Op::SplitPart { x: x.0, start }));
            start += s;
        }
        Ok(out)
    }

    fn add(&mut self, a: &Var, b: &Var) -> Result<Var> {
        let y = self.real(a.0).add(self.real(b.0))?;
        Ok(self.push_real(y, Op::Add { a: a.0, b: b.0 }))
    }

    fn sub(&mut self, a: &Var, b: &Var) -> Result<Var> {
        let y = self.real(a.0).sub(self.real(b.0))?;
        Ok(self.push_real(y, Op::Sub { a: a.0, b: b.0 }))
    }

    fn mul(&mut self, a: &Var, b: &Var) -> Result<Var> {
        let y = self.real(a.0).mul(self.real(b.0))?;
        Ok(self.push_real(y, Op::Mul { a: a.0, b: b.0 }))
    }

    fn scale(&mut self, x: &Var, c: T) -> Result<Var> {
        let y = self.real(x.0).scale(c);
        Ok(self.push_real(y, Op::Scale { x: x.0, c }))
    }

    fn sum(&mut self, x: &Var) -> Result<Var> {
        let y = Tensor::scalar(self.real(x.0).sum());
        Ok(self.push_real(y, Op::Sum { x: x.0 }))
    }

    fn l1_mean(&mut self, x: &Var) -> Result<Var> {
        let y = Tensor::scalar(l1_mean_value(self.real(x.0)));
        Ok(self.push_real(y, Op::L1Mean { x: x.0 }))
    }

    fn fft2(&mut self, x: &Var) -> Result<SpecVar> {
        let s = spectral::fft2(self.real(x.0))?;
        Ok(self.push_spec(s, Op::Fft2 { x: x.0 }))
    }

    fn ifft2(&mut self, s: &SpecVar) -> Result<Var> {
        let y = spectral::ifft2(self.spec(s.0))?;
        Ok(self.push_real(y, Op::Ifft2 { s: s.0 }))
    }

    fn ifft2_real_part(&mut self, s: &SpecVar) -> Result<Var> {
        let y = spectral::ifft2_real_part(self.spec(s.0))?;
        Ok(self.push_real(y, Op::Ifft2RealPart { s: s.0 }))
    }

    fn mul_conj(&mut self, a: &SpecVar, b: &SpecVar) -> Result<SpecVar> {
        let s = spectral::mul_conj(self.spec(a.0), self.spec(b.0))?;
        Ok(self.push_spec(s, Op::MulConj { a: a.0, b: b.0 }))
    }

    fn scale_spectrum(&mut self, s: &SpecVar, w: &Var) -> Result<SpecVar> {
        let y = spectral::scale_spectrum(self.spec(s.0), self.real(w.0))?;
        Ok(self.push_spec(y, Op::ScaleSpectrum { s: s.0, w: w.0 }))
    }

    fn complex_abs_mean(&mut self, s: &SpecVar) -> Result<Var> {
        let y = Tensor::scalar(spectral::complex_abs_mean(self.spec(s.0)));
        Ok(self.push_real(y, Op::ComplexAbsMean { s: s.0 }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_gradient() {
        let mut tape = Tape::<f64>::new();
        let x = tape.param("x", Tensor::scalar(3.0)).unwrap();
        let sq = tape.mul(&x, &x).unwrap();
        let loss = tape.sum(&sq).unwrap();
        let g = tape.backward(loss).unwrap();
        assert_eq!(g.get("x").unwrap().data(), &[6.0]);
    }

    #[test]
    fn reuse_accumulates() {
        let mut tape = Tape::<f64>::new();
        let x = tape
            .param("x", Tensor::from_vec(&[2], vec![1.0, -2.0]).unwrap())
            .unwrap();
        let a = tape.add(&x, &x).unwrap();
        let b = tape.add(&a, &x).unwrap();
        let loss = tape.sum(&b).unwrap();
        let g = tape.backward(loss).unwrap();
        assert_eq!(g.get("x").unwrap().data(), &[3.0, 3.0]);
    }

    #[test]
    fn fft_round_trip_gradient_is_ones() {
        let mut tape = Tape::<f64>::new();
        let x =
            Tensor::from_fn(&[1, 1, 8, 8], |i| (i[2] as f64 - i[3] as f64 * 0.5).sin()).unwrap();
        let x = tape.param("x", x).unwrap();
        let s = tape.fft2(&x).unwrap();
        let y = tape.ifft2(&s).unwrap();
        let loss = tape.sum(&y).unwrap();
        let g = tape.backward(loss).unwrap();
        for &v in g.get("x").unwrap().data() {
            assert!((v - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn l1_tie_uses_zero_subgradient() {
        let mut tape = Tape::<f64>::new();
        let x = tape
            .param(
                "x",
                Tensor::from_vec(&[4], vec![0.5, 0.0, -1.0, 0.0]).unwrap(),
            )
            .unwrap();
        let loss = tape.l1_mean(&x).unwrap();
        let g = tape.backward(loss).unwrap();
        assert_eq!(g.get("x").unwrap().data(), &[0.25, 0.0, -0.25, 0.0]);
    }

    #[test]
    fn opaque_op_is_rejected_by_name() {
        let mut tape = Tape::<f64>::new();
        let x = tape.param("x", Tensor::scalar(2.0)).unwrap();
        let v = tape.value(&x).map(|v| v * v);
        let y = tape.opaque("custom_square", v, &[x]);
        let loss = tape.sum(&y).unwrap();
        let err = tape.backward(loss).unwrap_err();
        assert!(err.to_string().contains("custom_square"));
    }

    #[test]
    fn unreached_params_get_zero_gradient() {
        let mut tape = Tape::<f64>::new();
        let x = tape.param("x", Tensor::scalar(2.0)).unwrap();
        let _unused = tape.param("u", Tensor::ones(&[3]).unwrap()).unwrap();
        let loss = tape.sum(&x).unwrap();
        let g = tape.backward(loss).unwrap();
        assert_eq!(g.get("u").unwrap().data(), &[0.0; 3]);
        assert_eq!(g.entries.keys().collect::<Vec<_>>(), vec!["x", "u"]);
    }

    #[test]
    fn backward_is_deterministic() {
        let build = || {
            let mut tape = Tape::<f32>::new();
            let x = tape
                .param(
                    "x",
                    Tensor::from_fn(&[1, 2, 4, 4], |i| (i[1] + i[2] * 3 + i[3]) as f32 * 0.1)
                        .unwrap(),
                )
                .unwrap();
            let s = tape.fft2(&x).unwrap();
            let c = tape.complex_abs_mean(&s).unwrap();
            tape.backward(c).unwrap()
        };
        assert_eq!(build(), build());
    }
}
