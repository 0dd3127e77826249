//! Reverse-mode gradient tape over vector-valued primitives.
//!
//! Every recorded node holds its forward value; `backward` replays the
//! nodes in reverse and accumulates adjoints into the leaves.

use super::matrix::matvec_raw;
use super::mlp::Activation;
use crate::error::{Error, Result};

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Const,
    MatVec { w: Var, x: Var, rows: usize, cols: usize },
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Affine { x: Var, scale: f64 },
    Act(Var, Activation),
    Log(Var),
    Exp(Var),
    Clamp { x: Var, lo: f64, hi: f64 },
    Concat(Vec<Var>),
    Slice { x: Var, start: usize },
    Sum(Var),
    Dot(Var, Var),
    Softmax(Var),
    Mix { weights: Var, values: Vec<Var> },
    Gather { src: Var, index: Vec<Option<usize>>, coef: Vec<f64> },
    Pick { x: Var, index: usize },
    MaxOf { args: Vec<Var>, arg: usize },
    SumScalars(Vec<Var>),
}

#[derive(Debug, Clone)]
struct Node {
    value: Vec<f64>,
    op: Op,
}

#[derive(Debug, Default, Clone)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Adjoints produced by [`Tape::backward`].
#[derive(Debug, Clone)]
pub struct Gradients {
    grads: Vec<Option<Vec<f64>>>,
    lens: Vec<usize>,
}

impl Gradients {
    /// Gradient with respect to `v`; zeros if `v` did not influence the output.
    pub fn wrt(&self, v: Var) -> Vec<f64> {
        match &self.grads[v.0] {
            Some(g) => g.clone(),
            None => vec![0.0; self.lens[v.0]],
        }
    }

    pub fn extend_into(&self, v: Var, out: &mut Vec<f64>) {
        match &self.grads[v.0] {
            Some(g) => out.extend_from_slice(g),
            None => out.extend(std::iter::repeat_n(0.0, self.lens[v.0])),
        }
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &[f64] {
        &self.nodes[v.0].value
    }

    pub fn scalar(&self, v: Var) -> f64 {
        self.nodes[v.0].value[0]
    }

    fn push(&mut self, value: Vec<f64>, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    fn len_of(&self, v: Var) -> usize {
        self.nodes[v.0].value.len()
    }

    fn same_len(&self, a: Var, b: Var, what: &str) -> Result<()> {
        if self.len_of(a) != self.len_of(b) {
            return Err(Error::shape(format!("{what}: lengths {} and {}", self.len_of(a), self.len_of(b))));
        }
        Ok(())
    }

    /// A differentiable input.
    pub fn leaf(&mut self, value: Vec<f64>) -> Var {
        self.push(value, Op::Leaf)
    }

    /// An input that never receives a gradient.
    pub fn constant(&mut self, value: Vec<f64>) -> Var {
        self.push(value, Op::Const)
    }

    /// `W x` where `w` holds a row-major `rows x cols` matrix.
    pub fn matvec(&mut self, w: Var, x: Var, rows: usize, cols: usize) -> Result<Var> {
        if self.len_of(w) != rows * cols || self.len_of(x) != cols {
            return Err(Error::shape(format!(
                "matvec: weight {} for {rows}x{cols}, input {}",
                self.len_of(w),
                self.len_of(x)
            )));
        }
        let value = matvec_raw(self.value(w), rows, cols, self.value(x));
        Ok(self.push(value, Op::MatVec { w, x, rows, cols }))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_len(a, b, "add")?;
        let value = self.value(a).iter().zip(self.value(b)).map(|(x, y)| x + y).collect();
        Ok(self.push(value, Op::Add(a, b)))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_len(a, b, "sub")?;
        let value = self.value(a).iter().zip(self.value(b)).map(|(x, y)| x - y).collect();
        Ok(self.push(value, Op::Sub(a, b)))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_len(a, b, "mul")?;
        let value = self.value(a).iter().zip(self.value(b)).map(|(x, y)| x * y).collect();
        Ok(self.push(value, Op::Mul(a, b)))
    }

    /// Elementwise `scale * x + shift`.
    pub fn affine(&mut self, x: Var, scale: f64, shift: f64) -> Var {
        let value = self.value(x).iter().map(|v| scale * v + shift).collect();
        self.push(value, Op::Affine { x, scale })
    }

    pub fn activation(&mut self, x: Var, act: Activation) -> Var {
        let value = self.value(x).iter().map(|&v| act.apply(v)).collect();
        self.push(value, Op::Act(x, act))
    }

    pub fn log(&mut self, x: Var) -> Var {
        let value = self.value(x).iter().map(|v| v.ln()).collect();
        self.push(value, Op::Log(x))
    }

    pub fn exp(&mut self, x: Var) -> Var {
        let value = self.value(x).iter().map(|v| v.exp()).collect();
        self.push(value, Op::Exp(x))
    }

    /// Clamp into `[lo, hi]`; the gradient is zero where clamping is active.
    pub fn clamp(&mut self, x: Var, lo: f64, hi: f64) -> Var {
        let value = self.value(x).iter().map(|v| v.clamp(lo, hi)).collect();
        self.push(value, Op::Clamp { x, lo, hi })
    }

    pub fn concat(&mut self, parts: &[Var]) -> Var {
        let value = parts.iter().flat_map(|&p| self.value(p).iter().copied()).collect();
        self.push(value, Op::Concat(parts.to_vec()))
    }

    pub fn slice(&mut self, x: Var, start: usize, len: usize) -> Result<Var> {
        if start + len > self.len_of(x) {
            return Err(Error::shape(format!("slice {start}..{} of length {}", start + len, self.len_of(x))));
        }
        let value = self.value(x)[start..start + len].to_vec();
        Ok(self.push(value, Op::Slice { x, start }))
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let value = vec![self.value(x).iter().sum()];
        self.push(value, Op::Sum(x))
    }

    pub fn dot(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_len(a, b, "dot")?;
        let value = vec![super::matrix::dot(self.value(a), self.value(b))];
        Ok(self.push(value, Op::Dot(a, b)))
    }

    pub fn softmax(&mut self, x: Var) -> Var {
        let value = softmax(self.value(x));
        self.push(value, Op::Softmax(x))
    }

    /// `sum_k weights[k] * values[k]`.
    pub fn mix(&mut self, weights: Var, values: &[Var]) -> Result<Var> {
        if self.len_of(weights) != values.len() || values.is_empty() {
            return Err(Error::shape("mix: one weight per value required"));
        }
        let dim = self.len_of(values[0]);
        if values.iter().any(|&v| self.len_of(v) != dim) {
            return Err(Error::shape("mix: values differ in length"));
        }
        let mut out = vec![0.0; dim];
        for (w, &v) in self.value(weights).iter().zip(values) {
            for (o, x) in out.iter_mut().zip(self.value(v)) {
                *o += w * x;
            }
        }
        Ok(self.push(out, Op::Mix { weights, values: values.to_vec() }))
    }

    /// `out[i] = coef[i] * src[index[i]]`, or zero where `index[i]` is `None`.
    pub fn gather(&mut self, src: Var, index: Vec<Option<usize>>, coef: Vec<f64>) -> Result<Var> {
        let n = self.len_of(src);
        if index.len() != coef.len() || index.iter().flatten().any(|&j| j >= n) {
            return Err(Error::shape("gather: bad index map"));
        }
        let s = self.value(src);
        let value = index.iter().zip(&coef).map(|(j, c)| j.map_or(0.0, |j| c * s[j])).collect();
        Ok(self.push(value, Op::Gather { src, index, coef }))
    }

    pub fn pick(&mut self, x: Var, index: usize) -> Result<Var> {
        let value = *self.value(x).get(index).ok_or_else(|| Error::shape(format!("pick {index} out of range")))?;
        Ok(self.push(vec![value], Op::Pick { x, index }))
    }

    /// Maximum of scalar nodes; the gradient flows to the first maximiser.
    pub fn max_of(&mut self, args: &[Var]) -> Result<Var> {
        if args.is_empty() {
            return Err(Error::shape("max_of: no arguments"));
        }
        let mut arg = 0;
        for (k, &a) in args.iter().enumerate() {
            if self.scalar(a) > self.scalar(args[arg]) {
                arg = k;
            }
        }
        let value = vec![self.scalar(args[arg])];
        Ok(self.push(value, Op::MaxOf { args: args.to_vec(), arg }))
    }

    /// Sum of scalar nodes; zero when empty.
    pub fn sum_scalars(&mut self, args: &[Var]) -> Var {
        let value = vec![args.iter().map(|&a| self.scalar(a)).sum()];
        self.push(value, Op::SumScalars(args.to_vec()))
    }

    /// Reverse accumulation from `output` seeded with `output_grad`.
    pub fn backward(&self, output: Var, output_grad: &[f64]) -> Result<Gradients> {
        if self.nodes.is_empty() {
            return Err(Error::Usage("backward on an empty tape".into()));
        }
        if output_grad.len() != self.len_of(output) {
            return Err(Error::shape(format!(
                "output gradient length {} vs output length {}",
                output_grad.len(),
                self.len_of(output)
            )));
        }
        let lens: Vec<usize> = self.nodes.iter().map(|n| n.value.len()).collect();
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; self.nodes.len()];
        grads[output.0] = Some(output_grad.to_vec());

        for idx in (0..=output.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            let mut acc = |v: Var, f: &mut dyn FnMut(&mut [f64])| {
                let slot = grads[v.0].get_or_insert_with(|| vec![0.0; lens[v.0]]);
                f(slot);
            };
            match &node.op {
                Op::Leaf | Op::Const => {}
                Op::MatVec { w, x, rows, cols } => {
                    let (rows, cols) = (*rows, *cols);
                    let wv = self.value(*w);
                    let xv = self.value(*x);
                    acc(*w, &mut |gw| {
                        for r in 0..rows {
                            if g[r] != 0.0 {
                                for c in 0..cols {
                                    gw[r * cols + c] += g[r] * xv[c];
                                }
                            }
                        }
                    });
                    acc(*x, &mut |gx| {
                        for r in 0..rows {
                            if g[r] != 0.0 {
                                for c in 0..cols {
                                    gx[c] += g[r] * wv[r * cols + c];
                                }
                            }
                        }
                    });
                }
                Op::Add(a, b) => {
                    acc(*a, &mut |ga| add_into(ga, &g));
                    acc(*b, &mut |gb| add_into(gb, &g));
                }
                Op::Sub(a, b) => {
                    acc(*a, &mut |ga| add_into(ga, &g));
                    acc(*b, &mut |gb| gb.iter_mut().zip(&g).for_each(|(o, d)| *o -= d));
                }
                Op::Mul(a, b) => {
                    let (av, bv) = (self.value(*a), self.value(*b));
                    acc(*a, &mut |ga| {
                        for i in 0..g.len() {
                            ga[i] += g[i] * bv[i];
                        }
                    });
                    acc(*b, &mut |gb| {
                        for i in 0..g.len() {
                            gb[i] += g[i] * av[i];
                        }
                    });
                }
                Op::Affine { x, scale } => {
                    acc(*x, &mut |gx| gx.iter_mut().zip(&g).for_each(|(o, d)| *o += scale * d));
                }
                Op::Act(x, act) => {
                    let xv = self.value(*x);
                    let yv = &node.value;
                    acc(*x, &mut |gx| {
                        for i in 0..g.len() {
                            gx[i] += g[i] * act.derivative(xv[i], yv[i]);
                        }
                    });
                }
                Op::Log(x) => {
                    let xv = self.value(*x);
                    acc(*x, &mut |gx| {
                        for i in 0..g.len() {
                            gx[i] += g[i] / xv[i];
                        }
                    });
                }
                Op::Exp(x) => {
                    let yv = &node.value;
                    acc(*x, &mut |gx| {
                        for i in 0..g.len() {
                            gx[i] += g[i] * yv[i];
                        }
                    });
                }
                Op::Clamp { x, lo, hi } => {
                    let xv = self.value(*x);
                    acc(*x, &mut |gx| {
                        for i in 0..g.len() {
                            if xv[i] >= *lo && xv[i] <= *hi {
                                gx[i] += g[i];
                            }
                        }
                    });
                }
                Op::Concat(parts) => {
                    let mut off = 0;
                    for &p in parts {
                        let n = lens[p.0];
                        acc(p, &mut |gp| add_into(gp, &g[off..off + n]));
                        off += n;
                    }
                }
                Op::Slice { x, start } => {
                    let start = *start;
                    acc(*x, &mut |gx| add_into(&mut gx[start..start + g.len()], &g));
                }
                Op::Sum(x) => {
                    acc(*x, &mut |gx| gx.iter_mut().for_each(|o| *o += g[0]));
                }
                Op::Dot(a, b) => {
                    let (av, bv) = (self.value(*a), self.value(*b));
                    acc(*a, &mut |ga| ga.iter_mut().zip(bv).for_each(|(o, y)| *o += g[0] * y));
                    acc(*b, &mut |gb| gb.iter_mut().zip(av).for_each(|(o, y)| *o += g[0] * y));
                }
                Op::Softmax(x) => {
                    let y = &node.value;
                    let gy: f64 = g.iter().zip(y).map(|(a, b)| a * b).sum();
                    acc(*x, &mut |gx| {
                        for i in 0..y.len() {
                            gx[i] += y[i] * (g[i] - gy);
                        }
                    });
                }
                Op::Mix { weights, values } => {
                    let wv = self.value(*weights);
                    let gw: Vec<f64> = values.iter().map(|&v| super::matrix::dot(&g, self.value(v))).collect();
                    acc(*weights, &mut |o| add_into(o, &gw));
                    for (k, &v) in values.iter().enumerate() {
                        let w = wv[k];
                        acc(v, &mut |gv| gv.iter_mut().zip(&g).for_each(|(o, d)| *o += w * d));
                    }
                }
                Op::Gather { src, index, coef } => {
                    acc(*src, &mut |gs| {
                        for ((j, c), d) in index.iter().zip(coef).zip(&g) {
                            if let Some(j) = j {
                                gs[*j] += c * d;
                            }
                        }
                    });
                }
                Op::Pick { x, index } => {
                    let index = *index;
                    acc(*x, &mut |gx| gx[index] += g[0]);
                }
                Op::MaxOf { args, arg } => {
                    acc(args[*arg], &mut |ga| ga[0] += g[0]);
                }
                Op::SumScalars(args) => {
                    for &a in args {
                        acc(a, &mut |ga| ga[0] += g[0]);
                    }
                }
            }
            grads[idx] = Some(g);
        }
        Ok(Gradients { grads, lens })
    }
}

fn add_into(dst: &mut [f64], src: &[f64]) {
    dst.iter_mut().zip(src).for_each(|(o, d)| *o += d);
}

/// Numerically stable softmax.
pub fn softmax(x: &[f64]) -> Vec<f64> {
    let max = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = x.iter().map(|v| (v - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_derivative() {
        let mut t = Tape::new();
        let x = t.leaf(vec![2.5]);
        let g = t.backward(x, &[1.0]).unwrap();
        assert_eq!(g.wrt(x), vec![1.0]);
    }

    #[test]
    fn sigmoid_derivative_at_zero() {
        let mut t = Tape::new();
        let x = t.leaf(vec![0.0]);
        let y = t.activation(x, Activation::Sigmoid);
        let g = t.backward(y, &[1.0]).unwrap();
        assert!((g.wrt(x)[0] - 0.25).abs() < 1e-15);
    }

    #[test]
    fn empty_tape_is_usage_error() {
        let t = Tape::new();
        assert!(matches!(t.backward(Var(0), &[1.0]), Err(Error::Usage(_))));
    }

    #[test]
    fn output_grad_shape_checked() {
        let mut t = Tape::new();
        let x = t.leaf(vec![1.0, 2.0]);
        assert!(matches!(t.backward(x, &[1.0]), Err(Error::Shape(_))));
    }

    #[test]
    fn unused_leaf_gets_zero_gradient() {
        let mut t = Tape::new();
        let a = t.leaf(vec![1.0, 2.0]);
        let b = t.leaf(vec![3.0]);
        let s = t.sum(a);
        let g = t.backward(s, &[1.0]).unwrap();
        assert_eq!(g.wrt(b), vec![0.0]);
        assert_eq!(g.wrt(a), vec![1.0, 1.0]);
    }

    #[test]
    fn shared_subexpression_accumulates() {
        // f(x) = x * x  =>  f'(x) = 2x
        let mut t = Tape::new();
        let x = t.leaf(vec![3.0]);
        let y = t.mul(x, x).unwrap();
        let g = t.backward(y, &[1.0]).unwrap();
        assert_eq!(g.wrt(x), vec![6.0]);
    }

    #[test]
    fn softmax_sums_to_one_even_for_huge_logits() {
        let p = softmax(&[1e300, -1e300, 0.0]);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(p.iter().all(|v| *v >= 0.0));
    }
}
