use std::borrow::Cow;
use std::collections::HashMap;
use std::hash::{DefaultHasher, Hash, Hasher};

use ndarray::{s, Array1, Array2, ArrayView2, Axis, Zip};
use rand::Rng;

use super::{composite, Architecture, NccError, Objective};
use crate::nn::{
    keep_mask, BatchNorm, BatchNormCache, Checkpoint, CheckpointError, Dense, Dropout, NnError,
};
use crate::synthgen::CausalSample;

/// One hidden layer: batch norm, affine map, ReLU, dropout.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Block {
    pub(crate) norm: BatchNorm,
    pub(crate) dense: Dense,
    pub(crate) dropout: Dropout,
}

struct BlockTrace {
    norm: BatchNormCache,
    normalized: Array2<f64>,
    /// Combined ReLU and dropout factor: the output is `pre * gate`.
    gate: Array2<f64>,
}

impl Block {
    fn new<R: Rng + ?Sized>(inputs: usize, outputs: usize, dropout: Dropout, rng: &mut R) -> Self {
        Self {
            norm: BatchNorm::new(inputs),
            dense: Dense::new(inputs, outputs, rng),
            dropout,
        }
    }

    fn forward_eval(&self, x: ArrayView2<f64>) -> Result<Array2<f64>, NnError> {
        let normalized = self.norm.forward_eval(x)?;
        let mut h = self.dense.forward(normalized.view())?;
        h.mapv_inplace(|v| v.max(0.0));
        Ok(h)
    }

    fn forward_train<R: Rng + ?Sized>(
        &mut self,
        x: ArrayView2<f64>,
        rng: &mut R,
    ) -> Result<(Array2<f64>, BlockTrace), NnError> {
        let (normalized, norm) = self.norm.forward_train(x)?;
        let mut out = self.dense.forward(normalized.view())?;
        let rate = self.dropout.rate();
        let mut gate = if rate > 0.0 {
            let keep = 1.0 - rate;
            Array2::from_shape_vec(out.dim(), keep_mask(out.len(), keep, 1.0 / keep, rng))
                .expect("shape")
        } else {
            Array2::ones(out.dim())
        };
        Zip::from(&mut out).and(&mut gate).for_each(|o, g| {
            if *o <= 0.0 {
                *g = 0.0;
            }
            *o *= *g;
        });
        Ok((
            out,
            BlockTrace {
                norm,
                normalized,
                gate,
            },
        ))
    }

    /// Returns the input gradient and pushes `[gamma, beta, weights, bias]` grads.
    fn backward(
        &self,
        trace: &BlockTrace,
        mut upstream: Array2<f64>,
        grads: &mut Vec<Vec<f64>>,
    ) -> Result<Array2<f64>, NnError> {
        if upstream.dim() != trace.gate.dim() {
            return Err(NnError::ShapeMismatch {
                op: "block backward",
                expected: trace.gate.dim(),
                got: upstream.dim(),
            });
        }
        upstream *= &trace.gate;
        let g = upstream;
        let dense = self.dense.backward(trace.normalized.view(), g.view())?;
        let norm = self.norm.backward(&trace.norm, dense.input.view())?;
        grads.push(dense.bias.to_vec());
        grads.push(dense.weights.as_standard_layout().iter().copied().collect());
        grads.push(norm.beta.to_vec());
        grads.push(norm.gamma.to_vec());
        Ok(norm.input)
    }
}

/// Set-input classifier: point-wise embedding, mean pooling, classifier, 2-way softmax.
///
/// The output probability is that of label 1 (`X <- Y`).
#[derive(Debug, Clone, PartialEq)]
pub struct NccModel {
    arch: Architecture,
    pub(crate) embedding: Vec<Block>,
    pub(crate) classifier: Vec<Block>,
    pub(crate) head: Dense,
}

/// Labeled samples arranged as bags plus (own bag, swapped bag, target) triples.
#[derive(Debug, Clone)]
pub struct TrainingBatch<'a> {
    pub bags: Vec<Cow<'a, [[f64; 2]]>>,
    pub pairs: Vec<(usize, usize, f64)>,
}

fn points_hash(points: &[[f64; 2]]) -> u64 {
    let mut h = DefaultHasher::new();
    for p in points {
        p[0].to_bits().hash(&mut h);
        p[1].to_bits().hash(&mut h);
    }
    h.finish()
}

fn same_points(a: &[[f64; 2]], b: &[[f64; 2]]) -> bool {
    a.len() == b.len()
        && a.iter()
            .zip(b)
            .all(|(p, q)| p[0].to_bits() == q[0].to_bits() && p[1].to_bits() == q[1].to_bits())
}

type Bag<'a> = Cow<'a, [[f64; 2]]>;

/// Deduplicating bag list keyed by the bit pattern of the points.
struct BagIndex<'a> {
    bags: Vec<Bag<'a>>,
    index: HashMap<u64, Vec<usize>>,
}

impl<'a> BagIndex<'a> {
    fn insert(&mut self, pts: Bag<'a>) -> usize {
        let slot = self.index.entry(points_hash(&pts)).or_default();
        if let Some(&i) = slot.iter().find(|&&i| same_points(&self.bags[i], &pts)) {
            return i;
        }
        self.bags.push(pts);
        slot.push(self.bags.len() - 1);
        self.bags.len() - 1
    }
}

impl<'a> TrainingBatch<'a> {
    /// Builds the batch, reusing a sample as the swap of another when the batch already holds it.
    pub fn new(samples: &'a [CausalSample], objective: Objective) -> Result<Self, NccError> {
        let mut index = BagIndex {
            bags: Vec::new(),
            index: HashMap::new(),
        };
        let mut pairs = Vec::with_capacity(samples.len());
        for s in samples {
            if s.is_empty() {
                return Err(NccError::EmptySample);
            }
            let own = index.insert(Cow::Borrowed(&s.points));
            let swap = match objective {
                Objective::Composite => {
                    let swapped: Vec<[f64; 2]> = s.points.iter().map(|&[x, y]| [y, x]).collect();
                    index.insert(Cow::Owned(swapped))
                }
                Objective::PerOrientation => own,
            };
            pairs.push((own, swap, s.label.target()));
        }
        Ok(Self {
            bags: index.bags,
            pairs,
        })
    }
}

/// Numerically stable logistic function.
pub fn logistic(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// Folds `NCC(S)` and `NCC(swap S)` into the symmetric estimate of `P(X <- Y)`:
/// `(1 + NCC(S) - NCC(swap S)) / 2`.
///
/// The larger of the two orientations is computed directly and the smaller as
/// its complement, so `symmetric_score(p, q) + symmetric_score(q, p) == 1.0`
/// holds exactly in floating point, and `p == q` gives exactly `0.5`.
pub fn symmetric_score(forward: f64, swapped: f64) -> f64 {
    let d = forward - swapped;
    if d >= 0.0 {
        0.5 + 0.5 * d
    } else {
        1.0 - (0.5 + 0.5 * (swapped - forward))
    }
}

impl NccModel {
    pub fn new<R: Rng + ?Sized>(arch: Architecture, rng: &mut R) -> Result<Self, NccError> {
        arch.validate()?;
        let dropout = Dropout::new(arch.dropout)?;
        let h = arch.hidden;
        let mut embedding = Vec::with_capacity(arch.embedding_layers);
        for i in 0..arch.embedding_layers {
            embedding.push(Block::new(if i == 0 { 2 } else { h }, h, dropout, rng));
        }
        let classifier = (0..arch.classifier_layers)
            .map(|_| Block::new(h, h, dropout, rng))
            .collect();
        let head = Dense::new(h, 2, rng);
        Ok(Self {
            arch,
            embedding,
            classifier,
            head,
        })
    }

    pub fn architecture(&self) -> &Architecture {
        &self.arch
    }

    pub fn parameter_count(&self) -> usize {
        self.parameters().iter().map(|p| p.len()).sum()
    }

    fn points_matrix(points: &[[f64; 2]]) -> Array2<f64> {
        Array2::from_shape_fn((points.len(), 2), |(i, j)| points[i][j])
    }

    /// Mean embedding of a bag in eval mode.
    pub fn embed(&self, points: &[[f64; 2]]) -> Result<Array1<f64>, NccError> {
        if points.is_empty() {
            return Err(NccError::EmptySample);
        }
        let mut x = Self::points_matrix(points);
        for b in &self.embedding {
            x = b.forward_eval(x.view())?;
        }
        Ok(x.mean_axis(Axis(0)).expect("nonempty bag"))
    }

    /// Eval-mode logits `[z0, z1]` of a bag.
    pub fn logits(&self, points: &[[f64; 2]]) -> Result<[f64; 2], NccError> {
        let mut e = self.embed(points)?.insert_axis(Axis(0));
        for b in &self.classifier {
            e = b.forward_eval(e.view())?;
        }
        let z = self.head.forward(e.view())?;
        Ok([z[[0, 0]], z[[0, 1]]])
    }

    /// `NCC(S)`: probability that `X <- Y`, from the raw bag.
    pub fn forward_points(&self, points: &[[f64; 2]]) -> Result<f64, NccError> {
        let [z0, z1] = self.logits(points)?;
        Ok(logistic(z1 - z0))
    }

    pub fn forward(&self, sample: &CausalSample) -> Result<f64, NccError> {
        self.forward_points(&sample.points)
    }

    /// `NCC(S)` and `NCC(swap S)`.
    pub fn forward_both(&self, points: &[[f64; 2]]) -> Result<(f64, f64), NccError> {
        let swapped: Vec<[f64; 2]> = points.iter().map(|&[x, y]| [y, x]).collect();
        Ok((self.forward_points(points)?, self.forward_points(&swapped)?))
    }

    pub fn symmetric_points(&self, points: &[[f64; 2]]) -> Result<f64, NccError> {
        let (p, q) = self.forward_both(points)?;
        Ok(symmetric_score(p, q))
    }

    /// Symmetric estimate of `P(X <- Y)`; below 0.5 favours `X -> Y`.
    pub fn symmetric(&self, sample: &CausalSample) -> Result<f64, NccError> {
        self.symmetric_points(&sample.points)
    }

    /// Parameters in a fixed order: per block `[gamma, beta, weights, bias]`, then the head.
    pub fn parameters(&self) -> Vec<&[f64]> {
        let mut out = Vec::new();
        for b in self.embedding.iter().chain(&self.classifier) {
            out.push(b.norm.gamma.as_slice().expect("contiguous"));
            out.push(b.norm.beta.as_slice().expect("contiguous"));
            out.push(b.dense.weights.as_slice().expect("contiguous"));
            out.push(b.dense.bias.as_slice().expect("contiguous"));
        }
        out.push(self.head.weights.as_slice().expect("contiguous"));
        out.push(self.head.bias.as_slice().expect("contiguous"));
        out
    }

    pub fn parameters_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = Vec::new();
        for b in self.embedding.iter_mut().chain(self.classifier.iter_mut()) {
            out.push(b.norm.gamma.as_slice_mut().expect("contiguous"));
            out.push(b.norm.beta.as_slice_mut().expect("contiguous"));
            out.push(b.dense.weights.as_slice_mut().expect("contiguous"));
            out.push(b.dense.bias.as_slice_mut().expect("contiguous"));
        }
        out.push(self.head.weights.as_slice_mut().expect("contiguous"));
        out.push(self.head.bias.as_slice_mut().expect("contiguous"));
        out
    }

    /// Train-mode loss and gradients (aligned with [`Self::parameters`]) for one batch.
    ///
    /// Batch-norm statistics in the embedding layers span every point of every
    /// bag; classifier layers normalize over the bag embeddings. Running
    /// statistics are updated as a side effect.
    pub fn loss_and_gradients<R: Rng + ?Sized>(
        &mut self,
        batch: &TrainingBatch<'_>,
        objective: Objective,
        rng: &mut R,
    ) -> Result<(f64, Vec<Vec<f64>>), NccError> {
        let offsets: Vec<usize> = std::iter::once(0)
            .chain(batch.bags.iter().scan(0, |acc, b| {
                *acc += b.len();
                Some(*acc)
            }))
            .collect();
        let total = offsets[offsets.len() - 1];
        let mut x = Array2::zeros((total, 2));
        for (bag, &start) in batch.bags.iter().zip(&offsets) {
            for (i, p) in bag.iter().enumerate() {
                x[[start + i, 0]] = p[0];
                x[[start + i, 1]] = p[1];
            }
        }

        let mut embed_traces = Vec::with_capacity(self.embedding.len());
        for b in &mut self.embedding {
            let (out, trace) = b.forward_train(x.view(), rng)?;
            embed_traces.push(trace);
            x = out;
        }
        let h = x.ncols();
        let mut pooled = Array2::zeros((batch.bags.len(), h));
        for (k, w) in offsets.windows(2).enumerate() {
            let mean = x
                .slice(s![w[0]..w[1], ..])
                .mean_axis(Axis(0))
                .expect("nonempty bag");
            pooled.row_mut(k).assign(&mean);
        }
        let mut e = pooled;
        let mut class_traces = Vec::with_capacity(self.classifier.len());
        for b in &mut self.classifier {
            let (out, trace) = b.forward_train(e.view(), rng)?;
            class_traces.push(trace);
            e = out;
        }
        let logits = self.head.forward(e.view())?;
        let (loss, dlogits) = match objective {
            Objective::Composite => composite::composite_loss(logits.view(), &batch.pairs),
            Objective::PerOrientation => {
                composite::per_orientation_loss(logits.view(), &batch.pairs)?
            }
        };

        // Gradients are pushed in reverse parameter order and flipped at the end.
        let mut grads: Vec<Vec<f64>> = Vec::new();
        let head = self.head.backward(e.view(), dlogits.view())?;
        grads.push(head.bias.to_vec());
        grads.push(head.weights.iter().copied().collect());
        let mut g = head.input;
        for (b, trace) in self.classifier.iter().zip(&class_traces).rev() {
            g = b.backward(trace, g, &mut grads)?;
        }
        let mut gx = Array2::zeros((total, h));
        for (k, w) in offsets.windows(2).enumerate() {
            let share = g.row(k).mapv(|v| v / (w[1] - w[0]) as f64);
            gx.slice_mut(s![w[0]..w[1], ..])
                .assign(&share.broadcast((w[1] - w[0], h)).expect("row broadcast"));
        }
        let mut g = gx;
        for (b, trace) in self.embedding.iter().zip(&embed_traces).rev() {
            g = b.backward(trace, g, &mut grads)?;
        }
        grads.reverse();
        Ok((loss, grads))
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        let mut ck = Checkpoint::new();
        ck.set_meta("model", "ncc");
        ck.set_meta("hidden", self.arch.hidden);
        ck.set_meta("embedding_layers", self.arch.embedding_layers);
        ck.set_meta("classifier_layers", self.arch.classifier_layers);
        ck.set_meta("dropout", format!("{:.16e}", self.arch.dropout));
        let blocks = self
            .embedding
            .iter()
            .enumerate()
            .map(|(i, b)| (format!("embed.{i}"), b))
            .chain(
                self.classifier
                    .iter()
                    .enumerate()
                    .map(|(i, b)| (format!("classify.{i}"), b)),
            );
        for (name, b) in blocks {
            let w = b.norm.width();
            ck.set_meta(
                &format!("{name}.bn.momentum"),
                format!("{:.16e}", b.norm.momentum),
            );
            ck.set_meta(
                &format!("{name}.bn.epsilon"),
                format!("{:.16e}", b.norm.epsilon),
            );
            ck.push(
                &format!("{name}.bn.gamma"),
                &[w],
                b.norm.gamma.as_slice().unwrap(),
            );
            ck.push(
                &format!("{name}.bn.beta"),
                &[w],
                b.norm.beta.as_slice().unwrap(),
            );
            ck.push(
                &format!("{name}.bn.running_mean"),
                &[w],
                b.norm.running_mean.as_slice().unwrap(),
            );
            ck.push(
                &format!("{name}.bn.running_var"),
                &[w],
                b.norm.running_var.as_slice().unwrap(),
            );
            let (i, o) = b.dense.weights.dim();
            ck.push(
                &format!("{name}.dense.weights"),
                &[i, o],
                b.dense.weights.as_slice().unwrap(),
            );
            ck.push(
                &format!("{name}.dense.bias"),
                &[o],
                b.dense.bias.as_slice().unwrap(),
            );
        }
        let (i, o) = self.head.weights.dim();
        ck.push(
            "head.weights",
            &[i, o],
            self.head.weights.as_slice().unwrap(),
        );
        ck.push("head.bias", &[o], self.head.bias.as_slice().unwrap());
        ck
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self, NccError> {
        let meta_num = |key: &str| -> Result<f64, NccError> {
            let v = ck.meta(key)?;
            v.parse::<f64>().map_err(|_| {
                CheckpointError::Parse {
                    line: 0,
                    msg: format!("meta `{key}`: `{v}`"),
                }
                .into()
            })
        };
        if ck.meta("model")? != "ncc" {
            return Err(CheckpointError::Parse {
                line: 0,
                msg: "not an ncc checkpoint".into(),
            }
            .into());
        }
        let arch = Architecture {
            hidden: meta_num("hidden")? as usize,
            embedding_layers: meta_num("embedding_layers")? as usize,
            classifier_layers: meta_num("classifier_layers")? as usize,
            dropout: meta_num("dropout")?,
        };
        arch.validate()?;
        let dropout = Dropout::new(arch.dropout)?;
        let vec1 = |name: &str, w: usize| -> Result<Array1<f64>, NccError> {
            Ok(Array1::from(
                ck.tensor_with_shape(name, &[w])?.values.clone(),
            ))
        };
        let mat = |name: &str, i: usize, o: usize| -> Result<Array2<f64>, NccError> {
            let t = ck.tensor_with_shape(name, &[i, o])?;
            Ok(Array2::from_shape_vec((i, o), t.values.clone()).expect("checked shape"))
        };
        let block = |name: String, inputs: usize, outputs: usize| -> Result<Block, NccError> {
            let norm = BatchNorm {
                gamma: vec1(&format!("{name}.bn.gamma"), inputs)?,
                beta: vec1(&format!("{name}.bn.beta"), inputs)?,
                running_mean: vec1(&format!("{name}.bn.running_mean"), inputs)?,
                running_var: vec1(&format!("{name}.bn.running_var"), inputs)?,
                momentum: meta_num(&format!("{name}.bn.momentum"))?,
                epsilon: meta_num(&format!("{name}.bn.epsilon"))?,
            };
            let dense = Dense::from_parts(
                mat(&format!("{name}.dense.weights"), inputs, outputs)?,
                vec1(&format!("{name}.dense.bias"), outputs)?,
            )?;
            Ok(Block {
                norm,
                dense,
                dropout,
            })
        };
        let h = arch.hidden;
        let embedding = (0..arch.embedding_layers)
            .map(|i| block(format!("embed.{i}"), if i == 0 { 2 } else { h }, h))
            .collect::<Result<_, _>>()?;
        let classifier = (0..arch.classifier_layers)
            .map(|i| block(format!("classify.{i}"), h, h))
            .collect::<Result<_, _>>()?;
        let head = Dense::from_parts(mat("head.weights", h, 2)?, vec1("head.bias", 2)?)?;
        Ok(Self {
            arch,
            embedding,
            classifier,
            head,
        })
    }

    pub fn save(&self, path: &std::path::Path) -> std::io::Result<()> {
        std::fs::write(path, self.to_checkpoint().to_text())
    }

    pub fn load(path: &std::path::Path) -> Result<Self, NccError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| NccError::Io(format!("{}: {e}", path.display())))?;
        Self::from_checkpoint(&Checkpoint::parse(&text)?)
    }
}
