use std::cell::RefCell;
use std::collections::HashSet;
use std::fmt;
use std::rc::Rc;
use std::sync::atomic::{AtomicU64, Ordering};

use thiserror::Error;

use super::Result;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NumericsError {
    #[error("shape mismatch: {op} on {lhs:?} vs {rhs:?}")]
    ShapeMismatch {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },
    #[error("backward requires a scalar, got shape {0:?}")]
    NotScalar(Vec<usize>),
    #[error("index {index} out of range for size {size}")]
    IndexOutOfRange { index: usize, size: usize },
}

static NEXT_ID: AtomicU64 = AtomicU64::new(1);

type BackwardFn = Box<dyn Fn(&[f64])>;

struct Inner {
    id: u64,
    shape: Vec<usize>,
    data: Vec<f64>,
    grad: RefCell<Option<Vec<f64>>>,
    parents: Vec<Tensor>,
    backward: Option<BackwardFn>,
    needs_grad: bool,
}

/// Immutable dense array participating in a reverse-mode graph.
///
/// Cloning is cheap (shared node). Values are fixed at construction; only
/// the gradient buffer is interior-mutable.
#[derive(Clone)]
pub struct Tensor(Rc<Inner>);

impl fmt::Debug for Tensor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Tensor")
            .field("shape", &self.0.shape)
            .field("needs_grad", &self.0.needs_grad)
            .finish()
    }
}

fn new_node(
    shape: Vec<usize>,
    data: Vec<f64>,
    parents: Vec<Tensor>,
    backward: Option<BackwardFn>,
) -> Tensor {
    debug_assert_eq!(data.len(), shape.iter().product::<usize>());
    let needs_grad = parents.iter().any(|p| p.0.needs_grad);
    Tensor(Rc::new(Inner {
        id: NEXT_ID.fetch_add(1, Ordering::Relaxed),
        shape,
        data,
        grad: RefCell::new(None),
        parents: if needs_grad { parents } else { Vec::new() },
        backward: if needs_grad { backward } else { None },
        needs_grad,
    }))
}

// Raw matmul on row-major slices: out[n,m] += a[n,k] * b[k,m].
fn matmul_into(out: &mut [f64], a: &[f64], b: &[f64], n: usize, k: usize, m: usize) {
    for i in 0..n {
        for p in 0..k {
            let av = a[i * k + p];
            if av == 0.0 {
                continue;
            }
            let brow = &b[p * m..(p + 1) * m];
            let orow = &mut out[i * m..(i + 1) * m];
            for j in 0..m {
                orow[j] += av * brow[j];
            }
        }
    }
}

fn transpose_raw(a: &[f64], n: usize, m: usize) -> Vec<f64> {
    let mut out = vec![0.0; a.len()];
    for i in 0..n {
        for j in 0..m {
            out[j * n + i] = a[i * m + j];
        }
    }
    out
}

impl Tensor {
    /// Trainable leaf; receives a gradient on backward().
    pub fn leaf(shape: Vec<usize>, data: Vec<f64>) -> Tensor {
        assert_eq!(data.len(), shape.iter().product::<usize>());
        Tensor(Rc::new(Inner {
            id: NEXT_ID.fetch_add(1, Ordering::Relaxed),
            shape,
            data,
            grad: RefCell::new(None),
            parents: Vec::new(),
            backward: None,
            needs_grad: true,
        }))
    }

    /// Non-trainable input; gradients do not flow into it.
    pub fn constant(shape: Vec<usize>, data: Vec<f64>) -> Tensor {
        assert_eq!(data.len(), shape.iter().product::<usize>());
        Tensor(Rc::new(Inner {
            id: NEXT_ID.fetch_add(1, Ordering::Relaxed),
            shape,
            data,
            grad: RefCell::new(None),
            parents: Vec::new(),
            backward: None,
            needs_grad: false,
        }))
    }

    pub fn scalar(v: f64) -> Tensor {
        Tensor::constant(vec![], vec![v])
    }

    pub fn zeros(shape: Vec<usize>) -> Tensor {
        let len = shape.iter().product();
        Tensor::constant(shape, vec![0.0; len])
    }

    pub fn matrix(rows: &[Vec<f64>]) -> Tensor {
        let n = rows.len();
        let m = if n == 0 { 0 } else { rows[0].len() };
        let mut data = Vec::with_capacity(n * m);
        for r in rows {
            assert_eq!(r.len(), m);
            data.extend_from_slice(r);
        }
        Tensor::constant(vec![n, m], data)
    }

    pub fn shape(&self) -> &[usize] {
        &self.0.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.0.data
    }

    pub fn len(&self) -> usize {
        self.0.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.data.is_empty()
    }

    /// Value of a scalar tensor.
    pub fn item(&self) -> f64 {
        assert_eq!(self.len(), 1, "item() on non-scalar tensor");
        self.0.data[0]
    }

    pub fn requires_grad(&self) -> bool {
        self.0.needs_grad
    }

    /// Accumulated gradient, if backward() reached this node.
    pub fn grad(&self) -> Option<Vec<f64>> {
        self.0.grad.borrow().clone()
    }

    pub fn zero_grad(&self) {
        *self.0.grad.borrow_mut() = None;
    }

    fn rows_cols(&self, op: &'static str) -> Result<(usize, usize)> {
        match self.0.shape[..] {
            [n, m] => Ok((n, m)),
            _ => Err(NumericsError::ShapeMismatch {
                op,
                lhs: self.0.shape.clone(),
                rhs: vec![],
            }),
        }
    }

    fn accum(&self, g: &[f64]) {
        if !self.0.needs_grad {
            return;
        }
        let mut slot = self.0.grad.borrow_mut();
        match slot.as_mut() {
            Some(buf) => {
                for (b, gi) in buf.iter_mut().zip(g) {
                    *b += gi;
                }
            }
            None => *slot = Some(g.to_vec()),
        }
    }

    pub fn matmul(&self, rhs: &Tensor) -> Result<Tensor> {
        let (n, k) = self.rows_cols("matmul")?;
        let (k2, m) = rhs.rows_cols("matmul")?;
        if k != k2 {
            return Err(NumericsError::ShapeMismatch {
                op: "matmul",
                lhs: self.0.shape.clone(),
                rhs: rhs.0.shape.clone(),
            });
        }
        let mut out = vec![0.0; n * m];
        matmul_into(&mut out, self.data(), rhs.data(), n, k, m);
        let (a, b) = (self.clone(), rhs.clone());
        Ok(new_node(
            vec![n, m],
            out,
            vec![self.clone(), rhs.clone()],
            Some(Box::new(move |g| {
                // dA = G * B^T ; dB = A^T * G
                let bt = transpose_raw(b.data(), k, m);
                let mut da = vec![0.0; n * k];
                matmul_into(&mut da, g, &bt, n, m, k);
                a.accum(&da);
                let at = transpose_raw(a.data(), n, k);
                let mut db = vec![0.0; k * m];
                matmul_into(&mut db, &at, g, k, n, m);
                b.accum(&db);
            })),
        ))
    }

    pub fn transpose(&self) -> Result<Tensor> {
        let (n, m) = self.rows_cols("transpose")?;
        let out = transpose_raw(self.data(), n, m);
        let a = self.clone();
        Ok(new_node(
            vec![m, n],
            out,
            vec![self.clone()],
            Some(Box::new(move |g| {
                a.accum(&transpose_raw(g, m, n));
            })),
        ))
    }

    /// Elementwise addition; also accepts [n,d] + [d] (row broadcast).
    pub fn add(&self, rhs: &Tensor) -> Result<Tensor> {
        if self.shape() == rhs.shape() {
            let out: Vec<f64> = self
                .data()
                .iter()
                .zip(rhs.data())
                .map(|(x, y)| x + y)
                .collect();
            let (a, b) = (self.clone(), rhs.clone());
            return Ok(new_node(
                self.0.shape.clone(),
                out,
                vec![self.clone(), rhs.clone()],
                Some(Box::new(move |g| {
                    a.accum(g);
                    b.accum(g);
                })),
            ));
        }
        if let ([n, d], [d2]) = (&self.0.shape[..], &rhs.0.shape[..]) {
            if d == d2 {
                let (n, d) = (*n, *d);
                let mut out = self.data().to_vec();
                for i in 0..n {
                    for j in 0..d {
                        out[i * d + j] += rhs.data()[j];
                    }
                }
                let (a, b) = (self.clone(), rhs.clone());
                return Ok(new_node(
                    vec![n, d],
                    out,
                    vec![self.clone(), rhs.clone()],
                    Some(Box::new(move |g| {
                        a.accum(g);
                        let mut gb = vec![0.0; d];
                        for i in 0..n {
                            for j in 0..d {
                                gb[j] += g[i * d + j];
                            }
                        }
                        b.accum(&gb);
                    })),
                ));
            }
        }
        Err(NumericsError::ShapeMismatch {
            op: "add",
            lhs: self.0.shape.clone(),
            rhs: rhs.0.shape.clone(),
        })
    }

    pub fn sub(&self, rhs: &Tensor) -> Result<Tensor> {
        if self.shape() != rhs.shape() {
            return Err(NumericsError::ShapeMismatch {
                op: "sub",
                lhs: self.0.shape.clone(),
                rhs: rhs.0.shape.clone(),
            });
        }
        let out: Vec<f64> = self
            .data()
            .iter()
            .zip(rhs.data())
            .map(|(x, y)| x - y)
            .collect();
        let (a, b) = (self.clone(), rhs.clone());
        Ok(new_node(
            self.0.shape.clone(),
            out,
            vec![self.clone(), rhs.clone()],
            Some(Box::new(move |g| {
                a.accum(g);
                let neg: Vec<f64> = g.iter().map(|x| -x).collect();
                b.accum(&neg);
            })),
        ))
    }

    /// Elementwise (Hadamard) product of same-shape tensors.
    pub fn mul(&self, rhs: &Tensor) -> Result<Tensor> {
        if self.shape() != rhs.shape() {
            return Err(NumericsError::ShapeMismatch {
                op: "mul",
                lhs: self.0.shape.clone(),
                rhs: rhs.0.shape.clone(),
            });
        }
        let out: Vec<f64> = self
            .data()
            .iter()
            .zip(rhs.data())
            .map(|(x, y)| x * y)
            .collect();
        let (a, b) = (self.clone(), rhs.clone());
        Ok(new_node(
            self.0.shape.clone(),
            out,
            vec![self.clone(), rhs.clone()],
            Some(Box::new(move |g| {
                let ga: Vec<f64> = g.iter().zip(b.data()).map(|(gi, y)| gi * y).collect();
                a.accum(&ga);
                let gb: Vec<f64> = g.iter().zip(a.data()).map(|(gi, x)| gi * x).collect();
                b.accum(&gb);
            })),
        ))
    }

    pub fn scale(&self, c: f64) -> Tensor {
        let out: Vec<f64> = self.data().iter().map(|x| x * c).collect();
        let a = self.clone();
        new_node(
            self.0.shape.clone(),
            out,
            vec![self.clone()],
            Some(Box::new(move |g| {
                let ga: Vec<f64> = g.iter().map(|x| x * c).collect();
                a.accum(&ga);
            })),
        )
    }

    pub fn concat_cols(parts: &[Tensor]) -> Result<Tensor> {
        assert!(!parts.is_empty());
        let (n, _) = parts[0].rows_cols("concat_cols")?;
        let mut widths = Vec::with_capacity(parts.len());
        let mut total = 0usize;
        for p in parts {
            let (pn, pm) = p.rows_cols("concat_cols")?;
            if pn != n {
                return Err(NumericsError::ShapeMismatch {
                    op: "concat_cols",
                    lhs: parts[0].0.shape.clone(),
                    rhs: p.0.shape.clone(),
                });
            }
            widths.push(pm);
            total += pm;
        }
        let mut out = vec![0.0; n * total];
        let mut off = 0;
        for (p, &w) in parts.iter().zip(&widths) {
            for i in 0..n {
                out[i * total + off..i * total + off + w]
                    .copy_from_slice(&p.data()[i * w..(i + 1) * w]);
            }
            off += w;
        }
        let owned: Vec<Tensor> = parts.to_vec();
        let widths_bw = widths.clone();
        Ok(new_node(
            vec![n, total],
            out,
            owned.clone(),
            Some(Box::new(move |g| {
                let mut off = 0;
                for (p, &w) in owned.iter().zip(&widths_bw) {
                    let mut gp = vec![0.0; n * w];
                    for i in 0..n {
                        gp[i * w..(i + 1) * w]
                            .copy_from_slice(&g[i * total + off..i * total + off + w]);
                    }
                    p.accum(&gp);
                    off += w;
                }
            })),
        ))
    }

    pub fn concat_rows(parts: &[Tensor]) -> Result<Tensor> {
        assert!(!parts.is_empty());
        let (_, m) = parts[0].rows_cols("concat_rows")?;
        let mut total = 0usize;
        for p in parts {
            let (pn, pm) = p.rows_cols("concat_rows")?;
            if pm != m {
                return Err(NumericsError::ShapeMismatch {
                    op: "concat_rows",
                    lhs: parts[0].0.shape.clone(),
                    rhs: p.0.shape.clone(),
                });
            }
            total += pn;
        }
        let mut out = Vec::with_capacity(total * m);
        for p in parts {
            out.extend_from_slice(p.data());
        }
        let owned: Vec<Tensor> = parts.to_vec();
        Ok(new_node(
            vec![total, m],
            out,
            owned.clone(),
            Some(Box::new(move |g| {
                let mut off = 0;
                for p in &owned {
                    let len = p.len();
                    p.accum(&g[off..off + len]);
                    off += len;
                }
            })),
        ))
    }

    /// Select rows by index; duplicates allowed.
    pub fn gather_rows(&self, idx: &[usize]) -> Result<Tensor> {
        let (n, m) = self.rows_cols("gather_rows")?;
        for &i in idx {
            if i >= n {
                return Err(NumericsError::IndexOutOfRange { index: i, size: n });
            }
        }
        let mut out = Vec::with_capacity(idx.len() * m);
        for &i in idx {
            out.extend_from_slice(&self.data()[i * m..(i + 1) * m]);
        }
        let a = self.clone();
        let idx_bw = idx.to_vec();
        Ok(new_node(
            vec![idx.len(), m],
            out,
            vec![self.clone()],
            Some(Box::new(move |g| {
                let mut ga = vec![0.0; n * m];
                for (r, &i) in idx_bw.iter().enumerate() {
                    for j in 0..m {
                        ga[i * m + j] += g[r * m + j];
                    }
                }
                a.accum(&ga);
            })),
        ))
    }

    /// Sum rows of `self` into an [n_out, d] result at destination indices.
    pub fn scatter_sum_rows(&self, dst: &[usize], n_out: usize) -> Result<Tensor> {
        let (e, m) = self.rows_cols("scatter_sum_rows")?;
        if dst.len() != e {
            return Err(NumericsError::ShapeMismatch {
                op: "scatter_sum_rows",
                lhs: self.0.shape.clone(),
                rhs: vec![dst.len()],
            });
        }
        for &i in dst {
            if i >= n_out {
                return Err(NumericsError::IndexOutOfRange {
                    index: i,
                    size: n_out,
                });
            }
        }
        let mut out = vec![0.0; n_out * m];
        for (r, &i) in dst.iter().enumerate() {
            for j in 0..m {
                out[i * m + j] += self.data()[r * m + j];
            }
        }
        let a = self.clone();
        let dst_bw = dst.to_vec();
        Ok(new_node(
            vec![n_out, m],
            out,
            vec![self.clone()],
            Some(Box::new(move |g| {
                let mut ga = vec![0.0; e * m];
                for (r, &i) in dst_bw.iter().enumerate() {
                    ga[r * m..(r + 1) * m].copy_from_slice(&g[i * m..(i + 1) * m]);
                }
                a.accum(&ga);
            })),
        ))
    }

    pub fn slice_cols(&self, start: usize, len: usize) -> Result<Tensor> {
        let (n, m) = self.rows_cols("slice_cols")?;
        if start + len > m {
            return Err(NumericsError::IndexOutOfRange {
                index: start + len,
                size: m,
            });
        }
        let mut out = Vec::with_capacity(n * len);
        for i in 0..n {
            out.extend_from_slice(&self.data()[i * m + start..i * m + start + len]);
        }
        let a = self.clone();
        Ok(new_node(
            vec![n, len],
            out,
            vec![self.clone()],
            Some(Box::new(move |g| {
                let mut ga = vec![0.0; n * m];
                for i in 0..n {
                    ga[i * m + start..i * m + start + len]
                        .copy_from_slice(&g[i * len..(i + 1) * len]);
                }
                a.accum(&ga);
            })),
        ))
    }

    pub fn sum_all(&self) -> Tensor {
        let s: f64 = self.data().iter().sum();
        let a = self.clone();
        let len = self.len();
        new_node(
            vec![],
            vec![s],
            vec![self.clone()],
            Some(Box::new(move |g| {
                a.accum(&vec![g[0]; len]);
            })),
        )
    }

    pub fn mean_all(&self) -> Tensor {
        assert!(!self.is_empty(), "mean_all of empty tensor");
        self.sum_all().scale(1.0 / self.len() as f64)
    }

    /// Column-wise mean: [n,d] -> [1,d]. Requires n > 0.
    pub fn mean_rows(&self) -> Result<Tensor> {
        let (n, m) = self.rows_cols("mean_rows")?;
        assert!(n > 0, "mean_rows of empty matrix");
        let mut out = vec![0.0; m];
        for i in 0..n {
            for j in 0..m {
                out[j] += self.data()[i * m + j];
            }
        }
        for v in &mut out {
            *v /= n as f64;
        }
        let a = self.clone();
        Ok(new_node(
            vec![1, m],
            out,
            vec![self.clone()],
            Some(Box::new(move |g| {
                let mut ga = vec![0.0; n * m];
                for i in 0..n {
                    for j in 0..m {
                        ga[i * m + j] = g[j] / n as f64;
                    }
                }
                a.accum(&ga);
            })),
        ))
    }

    /// Row-wise softmax with max subtraction.
    pub fn softmax(&self) -> Result<Tensor> {
        let (n, m) = self.rows_cols("softmax")?;
        let mut out = vec![0.0; n * m];
        for i in 0..n {
            let row = &self.data()[i * m..(i + 1) * m];
            let mx = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut z = 0.0;
            for j in 0..m {
                let e = (row[j] - mx).exp();
                out[i * m + j] = e;
                z += e;
            }
            for j in 0..m {
                out[i * m + j] /= z;
            }
        }
        let a = self.clone();
        let y = out.clone();
        Ok(new_node(
            vec![n, m],
            out,
            vec![self.clone()],
            Some(Box::new(move |g| {
                let mut ga = vec![0.0; n * m];
                for i in 0..n {
                    let yr = &y[i * m..(i + 1) * m];
                    let gr = &g[i * m..(i + 1) * m];
                    let dot: f64 = yr.iter().zip(gr).map(|(s, gi)| s * gi).sum();
                    for j in 0..m {
                        ga[i * m + j] = yr[j] * (gr[j] - dot);
                    }
                }
                a.accum(&ga);
            })),
        ))
    }

    pub fn log(&self) -> Tensor {
        let out: Vec<f64> = self.data().iter().map(|x| x.ln()).collect();
        let a = self.clone();
        new_node(
            self.0.shape.clone(),
            out,
            vec![self.clone()],
            Some(Box::new(move |g| {
                let ga: Vec<f64> = g.iter().zip(a.data()).map(|(gi, x)| gi / x).collect();
                a.accum(&ga);
            })),
        )
    }

    pub fn relu(&self) -> Tensor {
        let out: Vec<f64> = self.data().iter().map(|x| x.max(0.0)).collect();
        let a = self.clone();
        new_node(
            self.0.shape.clone(),
            out,
            vec![self.clone()],
            Some(Box::new(move |g| {
                let ga: Vec<f64> = g
                    .iter()
                    .zip(a.data())
                    .map(|(gi, x)| if *x > 0.0 { *gi } else { 0.0 })
                    .collect();
                a.accum(&ga);
            })),
        )
    }

    pub fn tanh(&self) -> Tensor {
        let out: Vec<f64> = self.data().iter().map(|x| x.tanh()).collect();
        let a = self.clone();
        let y = out.clone();
        new_node(
            self.0.shape.clone(),
            out,
            vec![self.clone()],
            Some(Box::new(move |g| {
                let ga: Vec<f64> = g.iter().zip(&y).map(|(gi, t)| gi * (1.0 - t * t)).collect();
                a.accum(&ga);
            })),
        )
    }

    /// Per-row normalization with learned gain and bias (each shape [d]).
    pub fn layer_norm(&self, gain: &Tensor, bias: &Tensor, eps: f64) -> Result<Tensor> {
        let (n, m) = self.rows_cols("layer_norm")?;
        if gain.shape() != [m] || bias.shape() != [m] {
            return Err(NumericsError::ShapeMismatch {
                op: "layer_norm",
                lhs: self.0.shape.clone(),
                rhs: gain.0.shape.clone(),
            });
        }
        let mut xhat = vec![0.0; n * m];
        let mut inv_sigma = vec![0.0; n];
        for i in 0..n {
            let row = &self.data()[i * m..(i + 1) * m];
            let mu: f64 = row.iter().sum::<f64>() / m as f64;
            let var: f64 = row.iter().map(|x| (x - mu) * (x - mu)).sum::<f64>() / m as f64;
            let is = 1.0 / (var + eps).sqrt();
            inv_sigma[i] = is;
            for j in 0..m {
                xhat[i * m + j] = (row[j] - mu) * is;
            }
        }
        let mut out = vec![0.0; n * m];
        for i in 0..n {
            for j in 0..m {
                out[i * m + j] = gain.data()[j] * xhat[i * m + j] + bias.data()[j];
            }
        }
        let (a, gm, bs) = (self.clone(), gain.clone(), bias.clone());
        Ok(new_node(
            vec![n, m],
            out,
            vec![self.clone(), gain.clone(), bias.clone()],
            Some(Box::new(move |g| {
                let mut dgain = vec![0.0; m];
                let mut dbias = vec![0.0; m];
                let mut ga = vec![0.0; n * m];
                for i in 0..n {
                    let gr = &g[i * m..(i + 1) * m];
                    let xh = &xhat[i * m..(i + 1) * m];
                    // gh = dL/dxhat
                    let gh: Vec<f64> = (0..m).map(|j| gr[j] * gm.data()[j]).collect();
                    let mean_gh: f64 = gh.iter().sum::<f64>() / m as f64;
                    let mean_gh_xh: f64 =
                        gh.iter().zip(xh).map(|(a, b)| a * b).sum::<f64>() / m as f64;
                    for j in 0..m {
                        dgain[j] += gr[j] * xh[j];
                        dbias[j] += gr[j];
                        ga[i * m + j] = inv_sigma[i] * (gh[j] - mean_gh - xh[j] * mean_gh_xh);
                    }
                }
                a.accum(&ga);
                gm.accum(&dgain);
                bs.accum(&dbias);
            })),
        ))
    }

    /// Mean squared error between same-shape tensors.
    pub fn mse(&self, target: &Tensor) -> Result<Tensor> {
        if self.shape() != target.shape() {
            return Err(NumericsError::ShapeMismatch {
                op: "mse",
                lhs: self.0.shape.clone(),
                rhs: target.0.shape.clone(),
            });
        }
        let diff = self.sub(target)?;
        diff.mul(&diff).map(|sq| sq.mean_all())
    }

    /// Mean negative log-likelihood of `targets` under row-wise softmax of
    /// the logits. Uses log-sum-exp internally.
    pub fn cross_entropy(&self, targets: &[usize]) -> Result<Tensor> {
        let (n, c) = self.rows_cols("cross_entropy")?;
        if targets.len() != n {
            return Err(NumericsError::ShapeMismatch {
                op: "cross_entropy",
                lhs: self.0.shape.clone(),
                rhs: vec![targets.len()],
            });
        }
        for &t in targets {
            if t >= c {
                return Err(NumericsError::IndexOutOfRange { index: t, size: c });
            }
        }
        assert!(n > 0, "cross_entropy over zero rows");
        let mut loss = 0.0;
        let mut probs = vec![0.0; n * c];
        for i in 0..n {
            let row = &self.data()[i * c..(i + 1) * c];
            let mx = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut z = 0.0;
            for j in 0..c {
                let e = (row[j] - mx).exp();
                probs[i * c + j] = e;
                z += e;
            }
            for j in 0..c {
                probs[i * c + j] /= z;
            }
            let lse = mx + z.ln();
            loss += lse - row[targets[i]];
        }
        loss /= n as f64;
        let a = self.clone();
        let tg = targets.to_vec();
        Ok(new_node(
            vec![],
            vec![loss],
            vec![self.clone()],
            Some(Box::new(move |g| {
                let scale = g[0] / n as f64;
                let mut ga = vec![0.0; n * c];
                for i in 0..n {
                    for j in 0..c {
                        let indicator = if j == tg[i] { 1.0 } else { 0.0 };
                        ga[i * c + j] = scale * (probs[i * c + j] - indicator);
                    }
                }
                a.accum(&ga);
            })),
        ))
    }

    /// Reverse pass from a scalar loss. Populates gradients of every
    /// trainable leaf reachable from it.
    pub fn backward(&self) -> Result<()> {
        if self.len() != 1 {
            return Err(NumericsError::NotScalar(self.0.shape.clone()));
        }
        if !self.0.needs_grad {
            return Ok(());
        }
        // Parents always carry smaller ids than children, so descending-id
        // order is a valid topological order.
        let mut stack = vec![self.clone()];
        let mut seen: HashSet<u64> = HashSet::new();
        let mut nodes: Vec<Tensor> = Vec::new();
        while let Some(t) = stack.pop() {
            if !seen.insert(t.0.id) {
                continue;
            }
            for p in &t.0.parents {
                if p.0.needs_grad {
                    stack.push(p.clone());
                }
            }
            nodes.push(t);
        }
        nodes.sort_by(|x, y| y.0.id.cmp(&x.0.id));
        self.accum(&[1.0]);
        for node in &nodes {
            if let Some(bw) = &node.0.backward {
                let grad = node.0.grad.borrow().clone();
                if let Some(g) = grad {
                    bw(&g);
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn softmax_uniform() {
        let t = Tensor::constant(vec![1, 2], vec![0.0, 0.0]);
        let s = t.softmax().unwrap();
        assert_eq!(s.data(), &[0.5, 0.5]);
    }

    #[test]
    fn softmax_rows_sum_to_one() {
        let t = Tensor::constant(vec![2, 3], vec![1.0, -2.0, 0.5, 100.0, 100.0, -100.0]);
        let s = t.softmax().unwrap();
        for i in 0..2 {
            let sum: f64 = s.data()[i * 3..(i + 1) * 3].iter().sum();
            assert_relative_eq!(sum, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn subtract_matrices() {
        let a = Tensor::constant(vec![1, 2], vec![1.0, 2.0]);
        let b = Tensor::constant(vec![1, 2], vec![0.5, 1.0]);
        assert_eq!(a.sub(&b).unwrap().data(), &[0.5, 1.0]);
    }

    #[test]
    fn matmul_identity() {
        let eye = Tensor::constant(vec![2, 2], vec![1.0, 0.0, 0.0, 1.0]);
        let x = Tensor::constant(vec![2, 3], vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        assert_eq!(eye.matmul(&x).unwrap().data(), x.data());
    }

    #[test]
    fn matmul_associates_with_identity() {
        let eye = Tensor::constant(vec![3, 3], {
            let mut d = vec![0.0; 9];
            d[0] = 1.0;
            d[4] = 1.0;
            d[8] = 1.0;
            d
        });
        let a = Tensor::constant(vec![2, 3], vec![1.0, -2.0, 3.0, 0.5, 0.0, 4.0]);
        let b = Tensor::constant(vec![3, 2], vec![2.0, 1.0, 0.0, -1.0, 3.0, 5.0]);
        let left = a.matmul(&eye).unwrap().matmul(&b).unwrap();
        let right = a.matmul(&eye.matmul(&b).unwrap()).unwrap();
        assert_eq!(left.data(), right.data());
    }

    #[test]
    fn transpose_involution() {
        let a = Tensor::constant(vec![2, 3], vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let tt = a.transpose().unwrap().transpose().unwrap();
        assert_eq!(tt.data(), a.data());
        assert_eq!(tt.shape(), a.shape());
    }

    #[test]
    fn mse_values() {
        let p = Tensor::constant(vec![1, 1], vec![0.3]);
        let t = Tensor::constant(vec![1, 1], vec![0.5]);
        assert_relative_eq!(p.mse(&t).unwrap().item(), 0.04, epsilon = 1e-15);

        let pred = Tensor::constant(vec![2, 2], vec![1.0, 0.0, 0.0, 1.0]);
        let tgt = Tensor::constant(vec![2, 2], vec![1.0, 0.5, 0.5, 1.0]);
        assert_relative_eq!(pred.mse(&tgt).unwrap().item(), 0.125, epsilon = 1e-15);

        assert_eq!(pred.mse(&pred).unwrap().item(), 0.0);
    }

    #[test]
    fn mse_shape_mismatch() {
        let a = Tensor::constant(vec![1, 2], vec![0.0, 0.0]);
        let b = Tensor::constant(vec![2, 1], vec![0.0, 0.0]);
        assert!(matches!(
            a.mse(&b),
            Err(NumericsError::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn cross_entropy_uniform_is_ln_c() {
        let logits = Tensor::constant(vec![2, 4], vec![0.0; 8]);
        let loss = logits.cross_entropy(&[1, 3]).unwrap();
        assert_relative_eq!(loss.item(), (4.0f64).ln(), epsilon = 1e-12);
    }

    #[test]
    fn cross_entropy_confident_logits() {
        let logits = Tensor::constant(vec![1, 3], vec![20.0, 0.0, 0.0]);
        let loss = logits.cross_entropy(&[0]).unwrap();
        assert!(loss.item() < 1e-8);
    }

    #[test]
    fn cross_entropy_direct_value() {
        // logits [0, ln 3], target 1 -> -ln(3/4)
        let logits = Tensor::constant(vec![1, 2], vec![0.0, 3.0f64.ln()]);
        let loss = logits.cross_entropy(&[1]).unwrap();
        assert_relative_eq!(loss.item(), -(0.75f64).ln(), epsilon = 1e-12);
    }

    #[test]
    fn cross_entropy_bad_target() {
        let logits = Tensor::constant(vec![1, 2], vec![0.0, 0.0]);
        assert!(matches!(
            logits.cross_entropy(&[2]),
            Err(NumericsError::IndexOutOfRange { .. })
        ));
    }

    #[test]
    fn backward_square() {
        let x = Tensor::leaf(vec![], vec![3.0]);
        let loss = x.mul(&x).unwrap();
        loss.backward().unwrap();
        assert_eq!(x.grad().unwrap(), vec![6.0]);
    }

    #[test]
    fn backward_rejects_non_scalar() {
        let x = Tensor::leaf(vec![1, 2], vec![1.0, 2.0]);
        let y = x.scale(2.0);
        assert!(matches!(y.backward(), Err(NumericsError::NotScalar(_))));
    }

    #[test]
    fn disconnected_leaf_has_no_grad() {
        let x = Tensor::leaf(vec![], vec![3.0]);
        let unused = Tensor::leaf(vec![], vec![5.0]);
        let loss = x.mul(&x).unwrap();
        loss.backward().unwrap();
        assert!(unused.grad().is_none());
    }

    #[test]
    fn shared_node_accumulates() {
        // loss = x*x + x  => dloss/dx = 2x + 1
        let x = Tensor::leaf(vec![], vec![2.0]);
        let loss = x.mul(&x).unwrap().add(&x).unwrap();
        loss.backward().unwrap();
        assert_eq!(x.grad().unwrap(), vec![5.0]);
    }

    #[test]
    fn gather_scatter_roundtrip_grad() {
        let x = Tensor::leaf(vec![3, 2], vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let g = x.gather_rows(&[2, 0, 2]).unwrap();
        assert_eq!(g.data(), &[5.0, 6.0, 1.0, 2.0, 5.0, 6.0]);
        let loss = g.sum_all();
        loss.backward().unwrap();
        assert_eq!(x.grad().unwrap(), vec![1.0, 1.0, 0.0, 0.0, 2.0, 2.0]);
    }

    #[test]
    fn scatter_sum_rows_forward() {
        let msgs = Tensor::constant(vec![3, 2], vec![1.0, 1.0, 2.0, 2.0, 4.0, 4.0]);
        let agg = msgs.scatter_sum_rows(&[0, 1, 0], 2).unwrap();
        assert_eq!(agg.data(), &[5.0, 5.0, 2.0, 2.0]);
    }

    #[test]
    fn empty_edge_scatter() {
        let msgs = Tensor::constant(vec![0, 4], vec![]);
        let agg = msgs.scatter_sum_rows(&[], 3).unwrap();
        assert_eq!(agg.shape(), &[3, 4]);
        assert!(agg.data().iter().all(|&v| v == 0.0));
    }
}
