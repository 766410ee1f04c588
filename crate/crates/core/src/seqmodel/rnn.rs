use rand::Rng;

use super::{log_softmax, ArModel, Sequence, Trainable, Vocab};

/// Stacked single-gate recurrent cells:
///
/// ```text
/// z  = sigmoid(Wz x + Uz h + bz)
/// c  = tanh(Wc x + Uc h + bc)
/// h' = (1 - z) * h + z * c
/// ```
///
/// The first layer reads one-hot stream ids, so `W x` is a column lookup.
/// A linear softmax layer on the top state predicts the output symbol.
#[derive(Clone, Debug, PartialEq)]
pub struct RnnModel {
    vocab: Vocab,
    hidden: usize,
    layers: usize,
    params: Vec<f64>,
}

#[derive(Clone, Copy, Debug)]
struct LayerOffsets {
    input: usize,
    wz: usize,
    uz: usize,
    bz: usize,
    wc: usize,
    uc: usize,
    bc: usize,
}

struct Layout {
    layers: Vec<LayerOffsets>,
    wo: usize,
    bo: usize,
    len: usize,
}

fn layout(vocab: &Vocab, hidden: usize, layers: usize) -> Layout {
    let h = hidden;
    let mut at = 0;
    let mut take = |n: usize| {
        let o = at;
        at += n;
        o
    };
    let mut offs = Vec::new();
    for l in 0..layers {
        let input = if l == 0 { vocab.stream_size() } else { h };
        let wz = take(h * input);
        let uz = take(h * h);
        let bz = take(h);
        let wc = take(h * input);
        let uc = take(h * h);
        let bc = take(h);
        offs.push(LayerOffsets { input, wz, uz, bz, wc, uc, bc });
    }
    let wo = take(vocab.output * h);
    let bo = take(vocab.output);
    Layout { layers: offs, wo, bo, len: at }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// `out += M v` for row-major `M` of shape `rows x v.len()`.
fn matvec_add(m: &[f64], v: &[f64], out: &mut [f64]) {
    let cols = v.len();
    for (r, o) in out.iter_mut().enumerate() {
        let row = &m[r * cols..(r + 1) * cols];
        *o += row.iter().zip(v).map(|(a, b)| a * b).sum::<f64>();
    }
}

/// `out += M^T v` for row-major `M` of shape `v.len() x out.len()`.
fn matvec_t_add(m: &[f64], v: &[f64], out: &mut [f64]) {
    let cols = out.len();
    for (r, &vr) in v.iter().enumerate() {
        if vr == 0.0 {
            continue;
        }
        let row = &m[r * cols..(r + 1) * cols];
        for (o, a) in out.iter_mut().zip(row) {
            *o += a * vr;
        }
    }
}

/// `G += u v^T`.
fn outer_add(g: &mut [f64], u: &[f64], v: &[f64]) {
    let cols = v.len();
    for (r, &ur) in u.iter().enumerate() {
        if ur == 0.0 {
            continue;
        }
        for (gi, vi) in g[r * cols..(r + 1) * cols].iter_mut().zip(v) {
            *gi += ur * vi;
        }
    }
}

/// Activations of one layer at one time step.
struct StepCache {
    prev: Vec<f64>,
    z: Vec<f64>,
    c: Vec<f64>,
    h: Vec<f64>,
}

impl RnnModel {
    pub fn new<R: Rng + ?Sized>(vocab: Vocab, hidden: usize, layers: usize, rng: &mut R) -> Self {
        assert!((1..=2).contains(&layers), "one or two layers");
        let lay = layout(&vocab, hidden, layers);
        let scale = 1.0 / (hidden as f64).sqrt();
        let mut params = vec![0.0; lay.len];
        let biases: Vec<std::ops::Range<usize>> = lay
            .layers
            .iter()
            .flat_map(|l| [l.bz..l.bz + hidden, l.bc..l.bc + hidden])
            .chain([lay.bo..lay.bo + vocab.output])
            .collect();
        for (i, p) in params.iter_mut().enumerate() {
            if !biases.iter().any(|r| r.contains(&i)) {
                *p = rng.gen_range(-scale..scale);
            }
        }
        Self { vocab, hidden, layers, params }
    }

    pub fn from_params(vocab: Vocab, hidden: usize, layers: usize, params: Vec<f64>) -> Option<Self> {
        (layout(&vocab, hidden, layers).len == params.len() && (1..=2).contains(&layers))
            .then_some(Self { vocab, hidden, layers, params })
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    pub fn layers(&self) -> usize {
        self.layers
    }

    /// Runs the stream; returns per-time, per-layer caches.
    fn forward(&self, stream: &[u32]) -> Vec<Vec<StepCache>> {
        let lay = layout(&self.vocab, self.hidden, self.layers);
        let h = self.hidden;
        let p = &self.params;
        let mut state: Vec<Vec<f64>> = vec![vec![0.0; h]; self.layers];
        let mut caches = Vec::with_capacity(stream.len());
        for &tok in stream {
            let mut at_t = Vec::with_capacity(self.layers);
            for (l, off) in lay.layers.iter().enumerate() {
                let prev = state[l].clone();
                let mut az = p[off.bz..off.bz + h].to_vec();
                let mut ac = p[off.bc..off.bc + h].to_vec();
                if l == 0 {
                    let t = tok as usize;
                    for i in 0..h {
                        az[i] += p[off.wz + i * off.input + t];
                        ac[i] += p[off.wc + i * off.input + t];
                    }
                } else {
                    let below: &StepCache = &at_t[l - 1];
                    matvec_add(&p[off.wz..off.wz + h * h], &below.h, &mut az);
                    matvec_add(&p[off.wc..off.wc + h * h], &below.h, &mut ac);
                }
                matvec_add(&p[off.uz..off.uz + h * h], &prev, &mut az);
                matvec_add(&p[off.uc..off.uc + h * h], &prev, &mut ac);
                let z: Vec<f64> = az.iter().map(|&a| sigmoid(a)).collect();
                let c: Vec<f64> = ac.iter().map(|&a| a.tanh()).collect();
                let new: Vec<f64> = (0..h).map(|i| (1.0 - z[i]) * prev[i] + z[i] * c[i]).collect();
                state[l] = new.clone();
                at_t.push(StepCache { prev, z, c, h: new });
            }
            caches.push(at_t);
        }
        caches
    }

    fn logits(&self, top: &[f64]) -> Vec<f64> {
        let lay = layout(&self.vocab, self.hidden, self.layers);
        let o = self.vocab.output;
        let mut out = self.params[lay.bo..lay.bo + o].to_vec();
        matvec_add(&self.params[lay.wo..lay.wo + o * self.hidden], top, &mut out);
        out
    }
}

impl ArModel for RnnModel {
    fn vocab(&self) -> Vocab {
        self.vocab
    }

    fn log_probs(&self, seq: &Sequence) -> Vec<Vec<f64>> {
        let stream = seq.stream(&self.vocab);
        let caches = self.forward(&stream);
        let first = seq.context.len();
        caches[first..].iter().map(|c| log_softmax(&self.logits(&c[self.layers - 1].h))).collect()
    }
}

impl Trainable for RnnModel {
    fn params(&self) -> &[f64] {
        &self.params
    }

    fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn loss_grad(&self, seq: &Sequence, grad: &mut [f64]) -> f64 {
        let lay = layout(&self.vocab, self.hidden, self.layers);
        let (h, o) = (self.hidden, self.vocab.output);
        let p = &self.params;
        let stream = seq.stream(&self.vocab);
        let labels = seq.labels(&self.vocab);
        let caches = self.forward(&stream);
        let first = seq.context.len();
        let top = self.layers - 1;

        let mut loss = 0.0;
        // Gradient reaching each top state from the output layer.
        let mut dtop: Vec<Vec<f64>> = vec![Vec::new(); stream.len()];
        for (k, &y) in labels.iter().enumerate() {
            let t = first + k;
            let hs = &caches[t][top].h;
            let lp = log_softmax(&self.logits(hs));
            loss -= lp[y as usize];
            let dlogit: Vec<f64> = lp.iter().enumerate().map(|(i, l)| l.exp() - (i == y as usize) as u8 as f64).collect();
            outer_add(&mut grad[lay.wo..lay.wo + o * h], &dlogit, hs);
            for (g, d) in grad[lay.bo..lay.bo + o].iter_mut().zip(&dlogit) {
                *g += d;
            }
            let mut dh = vec![0.0; h];
            matvec_t_add(&p[lay.wo..lay.wo + o * h], &dlogit, &mut dh);
            dtop[t] = dh;
        }

        let mut carry: Vec<Vec<f64>> = vec![vec![0.0; h]; self.layers];
        for t in (0..stream.len()).rev() {
            let mut from_above: Vec<f64> = if dtop[t].is_empty() { vec![0.0; h] } else { std::mem::take(&mut dtop[t]) };
            for l in (0..self.layers).rev() {
                let off = lay.layers[l];
                let cache = &caches[t][l];
                let dh: Vec<f64> = (0..h).map(|i| carry[l][i] + from_above[i]).collect();
                let mut daz = vec![0.0; h];
                let mut dac = vec![0.0; h];
                let mut dprev = vec![0.0; h];
                for i in 0..h {
                    let (z, c) = (cache.z[i], cache.c[i]);
                    daz[i] = dh[i] * (c - cache.prev[i]) * z * (1.0 - z);
                    dac[i] = dh[i] * z * (1.0 - c * c);
                    dprev[i] = dh[i] * (1.0 - z);
                }
                outer_add(&mut grad[off.uz..off.uz + h * h], &daz, &cache.prev);
                outer_add(&mut grad[off.uc..off.uc + h * h], &dac, &cache.prev);
                for i in 0..h {
                    grad[off.bz + i] += daz[i];
                    grad[off.bc + i] += dac[i];
                }
                matvec_t_add(&p[off.uz..off.uz + h * h], &daz, &mut dprev);
                matvec_t_add(&p[off.uc..off.uc + h * h], &dac, &mut dprev);
                carry[l] = dprev;
                if l == 0 {
                    let tok = stream[t] as usize;
                    for i in 0..h {
                        grad[off.wz + i * off.input + tok] += daz[i];
                        grad[off.wc + i * off.input + tok] += dac[i];
                    }
                } else {
                    let below = &caches[t][l - 1].h;
                    outer_add(&mut grad[off.wz..off.wz + h * h], &daz, below);
                    outer_add(&mut grad[off.wc..off.wc + h * h], &dac, below);
                    let mut dx = vec![0.0; h];
                    matvec_t_add(&p[off.wz..off.wz + h * h], &daz, &mut dx);
                    matvec_t_add(&p[off.wc..off.wc + h * h], &dac, &mut dx);
                    from_above = dx;
                }
            }
        }
        loss
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seqmodel::gradcheck::max_rel_error;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn conditionals_normalize() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let m = RnnModel::new(Vocab::sat(4), 8, 2, &mut rng);
        let seq = Sequence::new(vec![2, 0, 3, 5, 1, 4, 3, 2], vec![1, 0, 1, 1]);
        let lps = m.log_probs(&seq);
        assert_eq!(lps.len(), 5);
        for lp in lps {
            assert!((lp.iter().map(|l| l.exp()).sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn loss_matches_log_probs() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = RnnModel::new(Vocab::binary(), 6, 1, &mut rng);
        let seq = Sequence::unconditioned(vec![1, 1, 0]);
        let lps = m.log_probs(&seq);
        let expect: f64 = -seq.labels(&m.vocab()).iter().zip(&lps).map(|(&y, lp)| lp[y as usize]).sum::<f64>();
        let mut g = vec![0.0; m.params().len()];
        assert!((m.loss_grad(&seq, &mut g) - expect).abs() < 1e-12);
    }

    #[test]
    fn gradient_check_one_and_two_layers() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for layers in [1, 2] {
            for _ in 0..5 {
                let mut m = RnnModel::new(Vocab::sat(3), 5, layers, &mut rng);
                // Random biases too, so every parameter block is exercised.
                m.params_mut().iter_mut().for_each(|p| *p += rng.gen_range(-0.5..0.5));
                let seq = Sequence::new(vec![2, 0, 3, 4, 1, 3, 0, 4, 2], vec![1, 0, 1, 1]);
                let coords: Vec<usize> = (0..m.params().len()).collect();
                let err = max_rel_error(&m, &seq, &coords);
                assert!(err < 1e-4, "layers={layers}: {err}");
            }
        }
    }
}
