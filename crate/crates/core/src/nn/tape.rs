//! Reverse-mode tape. Nodes are appended in topological order during the
//! forward pass; `backward` walks them in reverse, accumulating gradients
//! into every node that transitively depends on a parameter.
//!
//! Shape violations here are programmer errors and panic; user-facing
//! validation happens in the layers that build graphs.

use super::scalar::Scalar;
use super::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeId(pub usize);

enum Op<S> {
    Const,
    Param,
    /// w: (out_c, in_c, k*k), b: (out_c, 1, 1). Stride 1, zero padding.
    /// The im2col matrix is kept for the backward pass.
    Conv2d {
        x: NodeId,
        w: NodeId,
        b: NodeId,
        k: usize,
        pad: usize,
        cols: Vec<S>,
    },
    Relu {
        x: NodeId,
    },
    Sigmoid {
        x: NodeId,
    },
    Add {
        a: NodeId,
        b: NodeId,
    },
    /// x: (c, h, w) scaled per channel by s: (c, 1, 1).
    MulChannel {
        x: NodeId,
        s: NodeId,
    },
    GlobalAvg {
        x: NodeId,
    },
    PixelShuffle {
        x: NodeId,
        r: usize,
    },
    /// Overlap-averaged band reassembly; weights are 1/coverage per band.
    Assemble {
        xs: Vec<NodeId>,
        starts: Vec<usize>,
        inv_coverage: Vec<S>,
    },
    /// Fixed linear band projection: rows is (out_c x in_c) row-major.
    Project {
        x: NodeId,
        rows: Vec<S>,
        out_c: usize,
    },
    /// Mean absolute difference; subgradient 0 at ties.
    L1 {
        a: NodeId,
        b: NodeId,
    },
    /// Sum of mean absolute forward differences along row, col, band.
    Sstv {
        x: NodeId,
    },
    /// Weighted sum of scalar nodes.
    SumScalars {
        xs: Vec<NodeId>,
        coeffs: Vec<S>,
    },
}

struct Node<S> {
    value: Tensor<S>,
    grad: Option<Tensor<S>>,
    needs_grad: bool,
    op: Op<S>,
}

pub struct Tape<S: Scalar> {
    nodes: Vec<Node<S>>,
}

fn im2col<S: Scalar>(
    x: &[S],
    c: usize,
    h: usize,
    w: usize,
    k: usize,
    pad: usize,
) -> (Vec<S>, usize, usize) {
    let oh = h + 2 * pad + 1 - k;
    let ow = w + 2 * pad + 1 - k;
    let mut cols = vec![S::ZERO; c * k * k * oh * ow];
    for ch in 0..c {
        for ki in 0..k {
            for kj in 0..k {
                let row_base = ((ch * k + ki) * k + kj) * (oh * ow);
                for oy in 0..oh {
                    let iy = (oy + ki) as isize - pad as isize;
                    if iy < 0 || iy >= h as isize {
                        continue;
                    }
                    let ox_lo = pad.saturating_sub(kj);
                    let ox_hi = (w + pad - kj).min(ow);
                    if ox_lo >= ox_hi {
                        continue;
                    }
                    let ix_lo = ox_lo + kj - pad;
                    let src = (ch * h + iy as usize) * w + ix_lo;
                    let dst = row_base + oy * ow + ox_lo;
                    let len = ox_hi - ox_lo;
                    cols[dst..dst + len].copy_from_slice(&x[src..src + len]);
                }
            }
        }
    }
    (cols, oh, ow)
}

fn col2im_add<S: Scalar>(
    dcols: &[S],
    c: usize,
    h: usize,
    w: usize,
    k: usize,
    pad: usize,
    dx: &mut [S],
) {
    let oh = h + 2 * pad + 1 - k;
    let ow = w + 2 * pad + 1 - k;
    for ch in 0..c {
        for ki in 0..k {
            for kj in 0..k {
                let row_base = ((ch * k + ki) * k + kj) * (oh * ow);
                for oy in 0..oh {
                    let iy = (oy + ki) as isize - pad as isize;
                    if iy < 0 || iy >= h as isize {
                        continue;
                    }
                    let ox_lo = pad.saturating_sub(kj);
                    let ox_hi = (w + pad - kj).min(ow);
                    if ox_lo >= ox_hi {
                        continue;
                    }
                    let ix_lo = ox_lo + kj - pad;
                    let src = (ch * h + iy as usize) * w + ix_lo;
                    let dst = row_base + oy * ow + ox_lo;
                    for i in 0..ox_hi - ox_lo {
                        dx[src + i] += dcols[dst + i];
                    }
                }
            }
        }
    }
}

impl<S: Scalar> Tape<S> {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: NodeId) -> &Tensor<S> {
        &self.nodes[id.0].value
    }

    /// Available for parameters after `backward`; None when the node never
    /// received a contribution.
    pub fn grad(&self, id: NodeId) -> Option<&Tensor<S>> {
        self.nodes[id.0].grad.as_ref()
    }

    fn push(&mut self, value: Tensor<S>, needs_grad: bool, op: Op<S>) -> NodeId {
        self.nodes.push(Node {
            value,
            grad: None,
            needs_grad,
            op,
        });
        NodeId(self.nodes.len() - 1)
    }

    fn needs(&self, id: NodeId) -> bool {
        self.nodes[id.0].needs_grad
    }

    pub fn constant(&mut self, value: Tensor<S>) -> NodeId {
        self.push(value, false, Op::Const)
    }

    pub fn param(&mut self, value: Tensor<S>) -> NodeId {
        self.push(value, true, Op::Param)
    }

    pub fn conv2d(&mut self, x: NodeId, w: NodeId, b: NodeId, pad: usize) -> NodeId {
        let [c, h, wd] = self.nodes[x.0].value.shape();
        let [out_c, in_c, kk] = self.nodes[w.0].value.shape();
        let k = (kk as f64).sqrt() as usize;
        assert_eq!(k * k, kk, "conv weight last dim must be k*k");
        assert_eq!(in_c, c, "conv input channels mismatch");
        assert_eq!(self.nodes[b.0].value.shape(), [out_c, 1, 1], "conv bias shape");
        let (cols, oh, ow) = im2col(self.nodes[x.0].value.data(), c, h, wd, k, pad);

        let mut y = Tensor::zeros([out_c, oh, ow]);
        S::gemm(
            false,
            false,
            out_c,
            c * k * k,
            oh * ow,
            S::ONE,
            self.nodes[w.0].value.data(),
            &cols,
            S::ZERO,
            y.data_mut(),
        );
        let bias = self.nodes[b.0].value.data().to_vec();
        {
            let plane = oh * ow;
            let yd = y.data_mut();
            for (o, &bv) in bias.iter().enumerate() {
                for v in &mut yd[o * plane..(o + 1) * plane] {
                    *v += bv;
                }
            }
        }
        let needs = self.needs(x) || self.needs(w) || self.needs(b);
        // The cache only serves the backward pass; inference graphs drop it.
        let cols = if needs { cols } else { Vec::new() };
        self.push(y, needs, Op::Conv2d { x, w, b, k, pad, cols })
    }

    pub fn relu(&mut self, x: NodeId) -> NodeId {
        let value = Tensor::from_vec(
            self.nodes[x.0].value.shape(),
            self.nodes[x.0]
                .value
                .data()
                .iter()
                .map(|&v| v.maxv(S::ZERO))
                .collect(),
        );
        let needs = self.needs(x);
        self.push(value, needs, Op::Relu { x })
    }

    pub fn sigmoid(&mut self, x: NodeId) -> NodeId {
        let value = Tensor::from_vec(
            self.nodes[x.0].value.shape(),
            self.nodes[x.0]
                .value
                .data()
                .iter()
                .map(|&v| S::ONE / (S::ONE + (-v).exp()))
                .collect(),
        );
        let needs = self.needs(x);
        self.push(value, needs, Op::Sigmoid { x })
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> NodeId {
        assert_eq!(
            self.nodes[a.0].value.shape(),
            self.nodes[b.0].value.shape(),
            "add shape mismatch"
        );
        let value = Tensor::from_vec(
            self.nodes[a.0].value.shape(),
            self.nodes[a.0]
                .value
                .data()
                .iter()
                .zip(self.nodes[b.0].value.data())
                .map(|(&x, &y)| x + y)
                .collect(),
        );
        let needs = self.needs(a) || self.needs(b);
        self.push(value, needs, Op::Add { a, b })
    }

    pub fn mul_channel(&mut self, x: NodeId, s: NodeId) -> NodeId {
        let [c, h, w] = self.nodes[x.0].value.shape();
        assert_eq!(self.nodes[s.0].value.shape(), [c, 1, 1], "channel scale shape");
        let plane = h * w;
        let mut value = Tensor::zeros([c, h, w]);
        for ch in 0..c {
            let sv = self.nodes[s.0].value.data()[ch];
            let src = &self.nodes[x.0].value.data()[ch * plane..(ch + 1) * plane];
            let dst = &mut value.data_mut()[ch * plane..(ch + 1) * plane];
            for (d, &v) in dst.iter_mut().zip(src) {
                *d = v * sv;
            }
        }
        let needs = self.needs(x) || self.needs(s);
        self.push(value, needs, Op::MulChannel { x, s })
    }

    pub fn global_avg(&mut self, x: NodeId) -> NodeId {
        let [c, h, w] = self.nodes[x.0].value.shape();
        let inv = S::ONE / S::from_usize(h * w);
        let mut value = Tensor::zeros([c, 1, 1]);
        for ch in 0..c {
            let mut sum = S::ZERO;
            for &v in self.nodes[x.0].value.channel(ch) {
                sum += v;
            }
            value.data_mut()[ch] = sum * inv;
        }
        let needs = self.needs(x);
        self.push(value, needs, Op::GlobalAvg { x })
    }

    pub fn pixel_shuffle(&mut self, x: NodeId, r: usize) -> NodeId {
        if r == 1 {
            return x;
        }
        let [c_in, h, w] = self.nodes[x.0].value.shape();
        assert_eq!(c_in % (r * r), 0, "pixel shuffle needs channels divisible by r^2");
        let c = c_in / (r * r);
        let mut value = Tensor::zeros([c, h * r, w * r]);
        {
            let src = self.nodes[x.0].value.data();
            let dst = value.data_mut();
            let (oh, ow) = (h * r, w * r);
            for ch in 0..c {
                for i in 0..r {
                    for j in 0..r {
                        let in_ch = (ch * r + i) * r + j;
                        for y in 0..h {
                            let s = (in_ch * h + y) * w;
                            let d = (ch * oh + y * r + i) * ow + j;
                            for xw in 0..w {
                                dst[d + xw * r] = src[s + xw];
                            }
                        }
                    }
                }
            }
        }
        let needs = self.needs(x);
        self.push(value, needs, Op::PixelShuffle { x, r })
    }

    /// Reassemble per-group band windows into a full cube, averaging bands
    /// covered by several groups.
    pub fn assemble(&mut self, xs: &[NodeId], starts: &[usize], band_count: usize) -> NodeId {
        assert_eq!(xs.len(), starts.len());
        assert!(!xs.is_empty(), "assemble of zero groups");
        let [m, h, w] = self.nodes[xs[0].0].value.shape();
        let mut coverage = vec![0usize; band_count];
        for (&x, &s) in xs.iter().zip(starts) {
            assert_eq!(self.nodes[x.0].value.shape(), [m, h, w], "group shape mismatch");
            assert!(s + m <= band_count, "group exceeds band range");
            for b in s..s + m {
                coverage[b] += 1;
            }
        }
        assert!(coverage.iter().all(|&c| c > 0), "assemble leaves uncovered bands");
        let inv_coverage: Vec<S> = coverage
            .iter()
            .map(|&c| S::ONE / S::from_usize(c))
            .collect();

        let plane = h * w;
        let mut value = Tensor::zeros([band_count, h, w]);
        for (&x, &s) in xs.iter().zip(starts) {
            for local in 0..m {
                let b = s + local;
                let scale = inv_coverage[b];
                let src = self.nodes[x.0].value.channel(local);
                let dst = &mut value.data_mut()[b * plane..(b + 1) * plane];
                for (d, &v) in dst.iter_mut().zip(src) {
                    *d += v * scale;
                }
            }
        }
        let needs = xs.iter().any(|&x| self.needs(x));
        self.push(
            value,
            needs,
            Op::Assemble {
                xs: xs.to_vec(),
                starts: starts.to_vec(),
                inv_coverage,
            },
        )
    }

    /// Fixed linear projection along the band axis: y[o] = sum_b rows[o][b] x[b].
    pub fn project(&mut self, x: NodeId, rows: &[S], out_c: usize) -> NodeId {
        let [c, h, w] = self.nodes[x.0].value.shape();
        assert_eq!(rows.len(), out_c * c, "projection matrix shape");
        let plane = h * w;
        let mut value = Tensor::zeros([out_c, h, w]);
        for o in 0..out_c {
            let dst = &mut value.data_mut()[o * plane..(o + 1) * plane];
            for b in 0..c {
                let wgt = rows[o * c + b];
                if wgt == S::ZERO {
                    continue;
                }
                let src = self.nodes[x.0].value.channel(b);
                for (d, &v) in dst.iter_mut().zip(src) {
                    *d += wgt * v;
                }
            }
        }
        let needs = self.needs(x);
        self.push(
            value,
            needs,
            Op::Project {
                x,
                rows: rows.to_vec(),
                out_c,
            },
        )
    }

    pub fn l1(&mut self, a: NodeId, b: NodeId) -> NodeId {
        assert_eq!(
            self.nodes[a.0].value.shape(),
            self.nodes[b.0].value.shape(),
            "l1 shape mismatch"
        );
        let n = self.nodes[a.0].value.numel();
        let mut sum = S::ZERO;
        for (&x, &y) in self.nodes[a.0]
            .value
            .data()
            .iter()
            .zip(self.nodes[b.0].value.data())
        {
            sum += (x - y).abs();
        }
        let value = Tensor::scalar(sum / S::from_usize(n));
        let needs = self.needs(a) || self.needs(b);
        self.push(value, needs, Op::L1 { a, b })
    }

    /// Mean absolute forward difference along rows, plus along cols, plus
    /// along bands; a length-1 axis contributes zero.
    pub fn sstv(&mut self, x: NodeId) -> NodeId {
        let [c, h, w] = self.nodes[x.0].value.shape();
        let d = self.nodes[x.0].value.data();
        let mut total = S::ZERO;
        // Rows: x[c, h+1, w] - x[c, h, w].
        if h > 1 {
            let mut sum = S::ZERO;
            for ch in 0..c {
                for r in 0..h - 1 {
                    let base = (ch * h + r) * w;
                    for col in 0..w {
                        sum += (d[base + w + col] - d[base + col]).abs();
                    }
                }
            }
            total += sum / S::from_usize(c * (h - 1) * w);
        }
        // Cols: x[c, h, w+1] - x[c, h, w].
        if w > 1 {
            let mut sum = S::ZERO;
            for ch in 0..c {
                for r in 0..h {
                    let base = (ch * h + r) * w;
                    for col in 0..w - 1 {
                        sum += (d[base + col + 1] - d[base + col]).abs();
                    }
                }
            }
            total += sum / S::from_usize(c * h * (w - 1));
        }
        // Bands: x[c+1, h, w] - x[c, h, w].
        if c > 1 {
            let plane = h * w;
            let mut sum = S::ZERO;
            for ch in 0..c - 1 {
                let base = ch * plane;
                for i in 0..plane {
                    sum += (d[base + plane + i] - d[base + i]).abs();
                }
            }
            total += sum / S::from_usize((c - 1) * plane);
        }
        let needs = self.needs(x);
        self.push(Tensor::scalar(total), needs, Op::Sstv { x })
    }

    pub fn sum_scalars(&mut self, xs: &[NodeId], coeffs: &[S]) -> NodeId {
        assert_eq!(xs.len(), coeffs.len());
        let mut total = S::ZERO;
        for (&x, &k) in xs.iter().zip(coeffs) {
            assert_eq!(self.nodes[x.0].value.numel(), 1, "sum_scalars needs scalars");
            total += self.nodes[x.0].value.item() * k;
        }
        let needs = xs.iter().any(|&x| self.needs(x));
        self.push(
            Tensor::scalar(total),
            needs,
            Op::SumScalars {
                xs: xs.to_vec(),
                coeffs: coeffs.to_vec(),
            },
        )
    }

    fn accumulate(&mut self, id: NodeId, contrib: Tensor<S>) {
        if !self.nodes[id.0].needs_grad {
            return;
        }
        match &mut self.nodes[id.0].grad {
            Some(g) => {
                for (gd, &cd) in g.data_mut().iter_mut().zip(contrib.data()) {
                    *gd += cd;
                }
            }
            slot @ None => *slot = Some(contrib),
        }
    }

    /// Mutable view of a node's gradient buffer, created zeroed on demand.
    fn grad_buf(&mut self, id: NodeId) -> &mut Tensor<S> {
        let shape = self.nodes[id.0].value.shape();
        self.nodes[id.0]
            .grad
            .get_or_insert_with(|| Tensor::zeros(shape))
    }

    /// Propagate d(loss)/d(node) from a scalar loss node down to every
    /// parameter. Gradients of earlier `backward` calls are cleared.
    pub fn backward(&mut self, loss: NodeId) {
        assert_eq!(self.nodes[loss.0].value.numel(), 1, "loss must be scalar");
        for n in &mut self.nodes {
            n.grad = None;
        }
        self.nodes[loss.0].grad = Some(Tensor::scalar(S::ONE));

        for i in (0..=loss.0).rev() {
            if !self.nodes[i].needs_grad {
                continue;
            }
            let Some(g) = self.nodes[i].grad.take() else {
                continue;
            };
            self.step_backward(i, &g);
            self.nodes[i].grad = Some(g);
        }
    }

    fn step_backward(&mut self, i: usize, g: &Tensor<S>) {
        match &self.nodes[i].op {
            Op::Const | Op::Param => {}
            Op::Conv2d { x, w, b, k, pad, .. } => {
                let (x, w, b, k, pad) = (*x, *w, *b, *k, *pad);
                let [out_c, in_c, kk] = self.nodes[w.0].value.shape();
                let [_, oh, ow] = self.nodes[i].value.shape();
                let [_, xh, xw] = self.nodes[x.0].value.shape();
                let ckk = in_c * kk;
                // dW += g @ cols^T. The im2col cache is moved out for the
                // duration of the gemm and restored afterwards.
                if self.needs(w) {
                    let cols = {
                        let Op::Conv2d { cols, .. } = &mut self.nodes[i].op else {
                            unreachable!()
                        };
                        std::mem::take(cols)
                    };
                    {
                        let dw = self.grad_buf(w);
                        S::gemm(
                            false,
                            true,
                            out_c,
                            oh * ow,
                            ckk,
                            S::ONE,
                            g.data(),
                            &cols,
                            S::ONE,
                            dw.data_mut(),
                        );
                    }
                    let Op::Conv2d { cols: slot, .. } = &mut self.nodes[i].op else {
                        unreachable!()
                    };
                    *slot = cols;
                }
                // db += row sums of g.
                if self.needs(b) {
                    let plane = oh * ow;
                    let mut db = Tensor::zeros([out_c, 1, 1]);
                    for o in 0..out_c {
                        let mut sum = S::ZERO;
                        for &v in &g.data()[o * plane..(o + 1) * plane] {
                            sum += v;
                        }
                        db.data_mut()[o] = sum;
                    }
                    self.accumulate(b, db);
                }
                // dx via dcols = W^T @ g, then col2im.
                if self.needs(x) {
                    let wt = self.nodes[w.0].value.clone();
                    let mut dcols = vec![S::ZERO; ckk * oh * ow];
                    S::gemm(
                        true,
                        false,
                        ckk,
                        out_c,
                        oh * ow,
                        S::ONE,
                        wt.data(),
                        g.data(),
                        S::ZERO,
                        &mut dcols,
                    );
                    let mut dx = Tensor::zeros([in_c, xh, xw]);
                    col2im_add(&dcols, in_c, xh, xw, k, pad, dx.data_mut());
                    self.accumulate(x, dx);
                }
            }
            Op::Relu { x } => {
                let x = *x;
                let mut dx = Tensor::zeros(self.nodes[x.0].value.shape());
                for ((d, &xv), &gv) in dx
                    .data_mut()
                    .iter_mut()
                    .zip(self.nodes[x.0].value.data())
                    .zip(g.data())
                {
                    if xv > S::ZERO {
                        *d = gv;
                    }
                }
                self.accumulate(x, dx);
            }
            Op::Sigmoid { x } => {
                let x = *x;
                let mut dx = Tensor::zeros(self.nodes[i].value.shape());
                for ((d, &yv), &gv) in dx
                    .data_mut()
                    .iter_mut()
                    .zip(self.nodes[i].value.data())
                    .zip(g.data())
                {
                    *d = gv * yv * (S::ONE - yv);
                }
                self.accumulate(x, dx);
            }
            Op::Add { a, b } => {
                let (a, b) = (*a, *b);
                self.accumulate(a, g.clone());
                self.accumulate(b, g.clone());
            }
            Op::MulChannel { x, s } => {
                let (x, s) = (*x, *s);
                let [c, h, w] = self.nodes[x.0].value.shape();
                let plane = h * w;
                if self.needs(x) {
                    let mut dx = Tensor::zeros([c, h, w]);
                    for ch in 0..c {
                        let sv = self.nodes[s.0].value.data()[ch];
                        let gp = &g.data()[ch * plane..(ch + 1) * plane];
                        let dp = &mut dx.data_mut()[ch * plane..(ch + 1) * plane];
                        for (d, &gv) in dp.iter_mut().zip(gp) {
                            *d = gv * sv;
                        }
                    }
                    self.accumulate(x, dx);
                }
                if self.needs(s) {
                    let mut ds = Tensor::zeros([c, 1, 1]);
                    for ch in 0..c {
                        let gp = &g.data()[ch * plane..(ch + 1) * plane];
                        let xp = self.nodes[x.0].value.channel(ch);
                        let mut sum = S::ZERO;
                        for (&gv, &xv) in gp.iter().zip(xp) {
                            sum += gv * xv;
                        }
                        ds.data_mut()[ch] = sum;
                    }
                    self.accumulate(s, ds);
                }
            }
            Op::GlobalAvg { x } => {
                let x = *x;
                let [c, h, w] = self.nodes[x.0].value.shape();
                let inv = S::ONE / S::from_usize(h * w);
                let mut dx = Tensor::zeros([c, h, w]);
                let plane = h * w;
                for ch in 0..c {
                    let gv = g.data()[ch] * inv;
                    for d in &mut dx.data_mut()[ch * plane..(ch + 1) * plane] {
                        *d = gv;
                    }
                }
                self.accumulate(x, dx);
            }
            Op::PixelShuffle { x, r } => {
                let (x, r) = (*x, *r);
                let [c, oh, ow] = self.nodes[i].value.shape();
                let (h, w) = (oh / r, ow / r);
                let mut dx = Tensor::zeros(self.nodes[x.0].value.shape());
                {
                    let src = g.data();
                    let dst = dx.data_mut();
                    for ch in 0..c {
                        for ri in 0..r {
                            for rj in 0..r {
                                let in_ch = (ch * r + ri) * r + rj;
                                for y in 0..h {
                                    let s = (ch * oh + y * r + ri) * ow + rj;
                                    let d = (in_ch * h + y) * w;
                                    for xw in 0..w {
                                        dst[d + xw] = src[s + xw * r];
                                    }
                                }
                            }
                        }
                    }
                }
                self.accumulate(x, dx);
            }
            Op::Assemble {
                xs,
                starts,
                inv_coverage,
            } => {
                let (xs, starts, inv_coverage) =
                    (xs.clone(), starts.clone(), inv_coverage.clone());
                let [m, h, w] = self.nodes[xs[0].0].value.shape();
                let plane = h * w;
                for (&xid, &s) in xs.iter().zip(&starts) {
                    if !self.needs(xid) {
                        continue;
                    }
                    let mut dx = Tensor::zeros([m, h, w]);
                    for local in 0..m {
                        let b = s + local;
                        let scale = inv_coverage[b];
                        let gp = &g.data()[b * plane..(b + 1) * plane];
                        let dp = &mut dx.data_mut()[local * plane..(local + 1) * plane];
                        for (d, &gv) in dp.iter_mut().zip(gp) {
                            *d = gv * scale;
                        }
                    }
                    self.accumulate(xid, dx);
                }
            }
            Op::Project { x, rows, out_c } => {
                let (x, rows, out_c) = (*x, rows.clone(), *out_c);
                let [c, h, w] = self.nodes[x.0].value.shape();
                let plane = h * w;
                let mut dx = Tensor::zeros([c, h, w]);
                for o in 0..out_c {
                    let gp = &g.data()[o * plane..(o + 1) * plane];
                    for b in 0..c {
                        let wgt = rows[o * c + b];
                        if wgt == S::ZERO {
                            continue;
                        }
                        let dp = &mut dx.data_mut()[b * plane..(b + 1) * plane];
                        for (d, &gv) in dp.iter_mut().zip(gp) {
                            *d += wgt * gv;
                        }
                    }
                }
                self.accumulate(x, dx);
            }
            Op::L1 { a, b } => {
                let (a, b) = (*a, *b);
                let gv = g.item();
                let n = self.nodes[a.0].value.numel();
                let scale = gv / S::from_usize(n);
                let mut da = Tensor::zeros(self.nodes[a.0].value.shape());
                for ((d, &av), &bv) in da
                    .data_mut()
                    .iter_mut()
                    .zip(self.nodes[a.0].value.data())
                    .zip(self.nodes[b.0].value.data())
                {
                    *d = (av - bv).sign() * scale;
                }
                if self.needs(b) {
                    let mut db = Tensor::zeros(self.nodes[b.0].value.shape());
                    for (d, &s) in db.data_mut().iter_mut().zip(da.data()) {
                        *d = -s;
                    }
                    self.accumulate(b, db);
                }
                self.accumulate(a, da);
            }
            Op::Sstv { x } => {
                let x = *x;
                let [c, h, w] = self.nodes[x.0].value.shape();
                let gv = g.item();
                let mut dx = Tensor::zeros([c, h, w]);
                let d = self.nodes[x.0].value.data();
                let dd = dx.data_mut();
                if h > 1 {
                    let scale = gv / S::from_usize(c * (h - 1) * w);
                    for ch in 0..c {
                        for r in 0..h - 1 {
                            let base = (ch * h + r) * w;
                            for col in 0..w {
                                let s = (d[base + w + col] - d[base + col]).sign() * scale;
                                dd[base + w + col] += s;
                                dd[base + col] -= s;
                            }
                        }
                    }
                }
                if w > 1 {
                    let scale = gv / S::from_usize(c * h * (w - 1));
                    for ch in 0..c {
                        for r in 0..h {
                            let base = (ch * h + r) * w;
                            for col in 0..w - 1 {
                                let s = (d[base + col + 1] - d[base + col]).sign() * scale;
                                dd[base + col + 1] += s;
                                dd[base + col] -= s;
                            }
                        }
                    }
                }
                if c > 1 {
                    let plane = h * w;
                    let scale = gv / S::from_usize((c - 1) * plane);
                    for ch in 0..c - 1 {
                        let base = ch * plane;
                        for i2 in 0..plane {
                            let s = (d[base + plane + i2] - d[base + i2]).sign() * scale;
                            dd[base + plane + i2] += s;
                            dd[base + i2] -= s;
                        }
                    }
                }
                self.accumulate(x, dx);
            }
            Op::SumScalars { xs, coeffs } => {
                let (xs, coeffs) = (xs.clone(), coeffs.clone());
                let gv = g.item();
                for (&xid, &k) in xs.iter().zip(&coeffs) {
                    self.accumulate(xid, Tensor::scalar(gv * k));
                }
            }
        }
    }
}

impl<S: Scalar> Default for Tape<S> {
    fn default() -> Self {
        Tape::new()
    }
}
