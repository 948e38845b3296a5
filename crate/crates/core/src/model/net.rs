//! Forward and backward passes, generic over the float width so training
//! runs in f32 while gradient checks run in f64.

use num_traits::Float;

use super::{Arch, ModelSpec};

/// Scalar type for network math.
pub trait Dtype: Float + std::fmt::Debug + Send + Sync + 'static {
    fn from_f64(v: f64) -> Self;
    fn to_f64(self) -> f64;
}

impl Dtype for f32 {
    fn from_f64(v: f64) -> Self {
        v as f32
    }
    fn to_f64(self) -> f64 {
        f64::from(self)
    }
}

impl Dtype for f64 {
    fn from_f64(v: f64) -> Self {
        v
    }
    fn to_f64(self) -> f64 {
        self
    }
}

/// One contiguous slice of the flat parameter vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Segment {
    pub offset: usize,
    pub len: usize,
    /// Fan-in of the layer this segment feeds; sets the init bound.
    pub fan_in: usize,
    pub is_bias: bool,
}

/// Parameter layout of a model spec: alternating weight/bias segments in
/// forward order.
pub fn layout(spec: &ModelSpec) -> Vec<Segment> {
    let mut segs = Vec::new();
    let mut off = 0usize;
    let mut push = |len: usize, fan_in: usize, is_bias: bool, off: &mut usize| {
        segs.push(Segment {
            offset: *off,
            len,
            fan_in,
            is_bias,
        });
        *off += len;
    };
    match spec.arch {
        Arch::Linear => {
            push(spec.input_len, spec.input_len, false, &mut off);
            push(1, spec.input_len, true, &mut off);
        }
        Arch::Mlp => {
            let mut fan_in = spec.input_len;
            for &h in &spec.hidden_sizes {
                push(h * fan_in, fan_in, false, &mut off);
                push(h, fan_in, true, &mut off);
                fan_in = h;
            }
            push(fan_in, fan_in, false, &mut off);
            push(1, fan_in, true, &mut off);
        }
        Arch::DilatedConv => {
            let c = spec.conv.channels;
            let k = spec.conv.kernel;
            let mut in_ch = 1usize;
            for _ in &spec.conv.dilations {
                push(c * in_ch * k, in_ch * k, false, &mut off);
                push(c, in_ch * k, true, &mut off);
                in_ch = c;
            }
            push(c, c, false, &mut off); // pooling head weights
            push(1, c, true, &mut off);
        }
    }
    segs
}

/// Total number of parameters.
pub fn param_count(spec: &ModelSpec) -> usize {
    layout(spec).iter().map(|s| s.len).sum()
}

/// Multiply-accumulate operations in one forward pass.
pub fn macs_per_window(spec: &ModelSpec) -> u64 {
    let w = spec.input_len as u64;
    match spec.arch {
        Arch::Linear => w,
        Arch::Mlp => {
            let mut macs = 0u64;
            let mut fan_in = w;
            for &h in &spec.hidden_sizes {
                macs += fan_in * h as u64;
                fan_in = h as u64;
            }
            macs + fan_in
        }
        Arch::DilatedConv => {
            let c = spec.conv.channels as u64;
            let k = spec.conv.kernel as u64;
            let layers = spec.conv.dilations.len() as u64;
            let first = c * k * w;
            let rest = (layers - 1) * c * c * k * w;
            first + rest + c
        }
    }
}

/// Intermediate activations kept for the backward pass.
pub struct Cache<T> {
    /// MLP: post-activation of each hidden layer. Conv: post-activation
    /// (after ReLU and dropout) of each conv layer, channel-major `c × w`.
    pub hidden: Vec<Vec<T>>,
    /// Pre-activation values matching `hidden`.
    pub pre: Vec<Vec<T>>,
    /// Conv only: channel means after global average pooling.
    pub pooled: Vec<T>,
}

impl<T: Dtype> Cache<T> {
    fn empty() -> Self {
        Cache {
            hidden: Vec::new(),
            pre: Vec::new(),
            pooled: Vec::new(),
        }
    }
}

fn dot<T: Dtype>(a: &[T], b: &[T]) -> T {
    let mut acc = T::zero();
    for (&x, &y) in a.iter().zip(b) {
        acc = acc + x * y;
    }
    acc
}

/// Inverted-dropout masks for the conv layers of one sample; empty when
/// dropout is disabled.
pub struct DropoutMasks<T> {
    /// Per conv layer, `channels × len` keep-scales (0 or 1/(1−p)).
    pub masks: Vec<Vec<T>>,
}

impl<T: Dtype> DropoutMasks<T> {
    pub fn disabled() -> Self {
        DropoutMasks { masks: Vec::new() }
    }

    fn get(&self, layer: usize, idx: usize) -> T {
        if self.masks.is_empty() {
            T::one()
        } else {
            self.masks[layer][idx]
        }
    }
}

/// Forward pass for one window; returns the prediction and the cache.
pub fn forward<T: Dtype>(
    spec: &ModelSpec,
    params: &[T],
    x: &[T],
    dropout: &DropoutMasks<T>,
) -> (T, Cache<T>) {
    debug_assert_eq!(x.len(), spec.input_len);
    match spec.arch {
        Arch::Linear => {
            let w = &params[..spec.input_len];
            let b = params[spec.input_len];
            (dot(w, x) + b, Cache::empty())
        }
        Arch::Mlp => {
            let segs = layout(spec);
            let mut cache = Cache::empty();
            let mut input: Vec<T> = x.to_vec();
            let n_hidden = spec.hidden_sizes.len();
            for l in 0..n_hidden {
                let wseg = segs[2 * l];
                let bseg = segs[2 * l + 1];
                let h = spec.hidden_sizes[l];
                let fan_in = input.len();
                let mut pre = Vec::with_capacity(h);
                for o in 0..h {
                    let row = &params[wseg.offset + o * fan_in..wseg.offset + (o + 1) * fan_in];
                    pre.push(dot(row, &input) + params[bseg.offset + o]);
                }
                let post: Vec<T> = pre.iter().map(|&v| v.max(T::zero())).collect();
                cache.pre.push(pre);
                input = post.clone();
                cache.hidden.push(post);
            }
            let wseg = segs[2 * n_hidden];
            let bseg = segs[2 * n_hidden + 1];
            let wout = &params[wseg.offset..wseg.offset + wseg.len];
            let y = dot(wout, &input) + params[bseg.offset];
            (y, cache)
        }
        Arch::DilatedConv => {
            let segs = layout(spec);
            let c = spec.conv.channels;
            let k = spec.conv.kernel;
            let w_len = spec.input_len;
            let mut cache = Cache::empty();
            let mut input: Vec<T> = x.to_vec();
            let mut in_ch = 1usize;
            for (l, &d) in spec.conv.dilations.iter().enumerate() {
                let wseg = segs[2 * l];
                let bseg = segs[2 * l + 1];
                let mut pre = vec![T::zero(); c * w_len];
                for co in 0..c {
                    let wbase = wseg.offset + co * in_ch * k;
                    let bias = params[bseg.offset + co];
                    for t in 0..w_len {
                        let mut acc = bias;
                        for ci in 0..in_ch {
                            for j in 0..k {
                                let tap = j * d;
                                if tap <= t {
                                    acc = acc
                                        + params[wbase + ci * k + j] * input[ci * w_len + t - tap];
                                }
                            }
                        }
                        pre[co * w_len + t] = acc;
                    }
                }
                let mut post = vec![T::zero(); c * w_len];
                for (i, (&p, q)) in pre.iter().zip(post.iter_mut()).enumerate() {
                    *q = p.max(T::zero()) * dropout.get(l, i);
                }
                cache.pre.push(pre);
                cache.hidden.push(post.clone());
                input = post;
                in_ch = c;
            }
            // global average pool over time, then linear head
            let inv_w = T::from_f64(1.0 / w_len as f64);
            let mut pooled = Vec::with_capacity(c);
            for ch in 0..c {
                let mut acc = T::zero();
                for t in 0..w_len {
                    acc = acc + input[ch * w_len + t];
                }
                pooled.push(acc * inv_w);
            }
            let wseg = segs[segs.len() - 2];
            let bseg = segs[segs.len() - 1];
            let wout = &params[wseg.offset..wseg.offset + wseg.len];
            let y = dot(wout, &pooled) + params[bseg.offset];
            cache.pooled = pooled;
            (y, cache)
        }
    }
}

/// Accumulate parameter gradients for one window given dL/dy.
pub fn backward<T: Dtype>(
    spec: &ModelSpec,
    params: &[T],
    x: &[T],
    cache: &Cache<T>,
    dy: T,
    grads: &mut [T],
    dropout: &DropoutMasks<T>,
) {
    match spec.arch {
        Arch::Linear => {
            for (g, &xi) in grads[..spec.input_len].iter_mut().zip(x) {
                *g = *g + dy * xi;
            }
            grads[spec.input_len] = grads[spec.input_len] + dy;
        }
        Arch::Mlp => {
            let segs = layout(spec);
            let n_hidden = spec.hidden_sizes.len();
            let last_in: &[T] = if n_hidden == 0 {
                x
            } else {
                &cache.hidden[n_hidden - 1]
            };
            let wseg = segs[2 * n_hidden];
            let bseg = segs[2 * n_hidden + 1];
            let mut dh: Vec<T> = params[wseg.offset..wseg.offset + wseg.len]
                .iter()
                .map(|&w| dy * w)
                .collect();
            for (g, &hi) in grads[wseg.offset..wseg.offset + wseg.len]
                .iter_mut()
                .zip(last_in)
            {
                *g = *g + dy * hi;
            }
            grads[bseg.offset] = grads[bseg.offset] + dy;

            for l in (0..n_hidden).rev() {
                let wseg = segs[2 * l];
                let bseg = segs[2 * l + 1];
                let h = spec.hidden_sizes[l];
                let input: &[T] = if l == 0 { x } else { &cache.hidden[l - 1] };
                let fan_in = input.len();
                let mut dinput = vec![T::zero(); fan_in];
                for o in 0..h {
                    // ReLU gate
                    let dpre = if cache.pre[l][o] > T::zero() {
                        dh[o]
                    } else {
                        T::zero()
                    };
                    if dpre == T::zero() {
                        continue;
                    }
                    let wrow = &params[wseg.offset + o * fan_in..wseg.offset + (o + 1) * fan_in];
                    let grow =
                        &mut grads[wseg.offset + o * fan_in..wseg.offset + (o + 1) * fan_in];
                    for i in 0..fan_in {
                        grow[i] = grow[i] + dpre * input[i];
                        dinput[i] = dinput[i] + dpre * wrow[i];
                    }
                    grads[bseg.offset + o] = grads[bseg.offset + o] + dpre;
                }
                dh = dinput;
            }
        }
        Arch::DilatedConv => {
            let segs = layout(spec);
            let c = spec.conv.channels;
            let k = spec.conv.kernel;
            let w_len = spec.input_len;
            let layers = spec.conv.dilations.len();

            let wseg = segs[segs.len() - 2];
            let bseg = segs[segs.len() - 1];
            for (g, &p) in grads[wseg.offset..wseg.offset + wseg.len]
                .iter_mut()
                .zip(&cache.pooled)
            {
                *g = *g + dy * p;
            }
            grads[bseg.offset] = grads[bseg.offset] + dy;

            // gradient into the last layer's post-activations via the pool
            let inv_w = T::from_f64(1.0 / w_len as f64);
            let mut dpost = vec![T::zero(); c * w_len];
            for ch in 0..c {
                let g = dy * params[wseg.offset + ch] * inv_w;
                for t in 0..w_len {
                    dpost[ch * w_len + t] = g;
                }
            }

            for l in (0..layers).rev() {
                let d = spec.conv.dilations[l];
                let in_ch = if l == 0 { 1 } else { c };
                let input: &[T] = if l == 0 { x } else { &cache.hidden[l - 1] };
                let wseg = segs[2 * l];
                let bseg = segs[2 * l + 1];
                let mut dinput = vec![T::zero(); in_ch * w_len];
                for co in 0..c {
                    let wbase = wseg.offset + co * in_ch * k;
                    for t in 0..w_len {
                        let idx = co * w_len + t;
                        // dropout and ReLU gates share the forward masks
                        let mut dpre = dpost[idx] * dropout.get(l, idx);
                        if cache.pre[l][idx] <= T::zero() {
                            dpre = T::zero();
                        }
                        if dpre == T::zero() {
                            continue;
                        }
                        grads[bseg.offset + co] = grads[bseg.offset + co] + dpre;
                        for ci in 0..in_ch {
                            for j in 0..k {
                                let tap = j * d;
                                if tap <= t {
                                    let wi = wbase + ci * k + j;
                                    let xi = input[ci * w_len + t - tap];
                                    grads[wi] = grads[wi] + dpre * xi;
                                    dinput[ci * w_len + t - tap] =
                                        dinput[ci * w_len + t - tap] + dpre * params[wi];
                                }
                            }
                        }
                    }
                }
                dpost = dinput;
            }
        }
    }
}

/// Prediction without caching (inference path, dropout disabled).
pub fn predict_one<T: Dtype>(spec: &ModelSpec, params: &[T], x: &[T]) -> T {
    forward(spec, params, x, &DropoutMasks::disabled()).0
}
