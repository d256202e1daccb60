use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::{Array1, Array2, ArrayView1, Axis};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::sampler::Triplet;
use crate::corpus::EmbeddingTable;
use crate::error::{Error, Result};
use crate::numeric::CompensatedSum;
use crate::proxy::SimilarityMatrix;

pub const CHECKPOINT_MAGIC: &str = "SEMEMB1";

/// Precomputed feature vectors aligned with a video-by-caption matrix:
/// `video[i]` belongs to query `i`, `caption[j]` to item `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct Features {
    pub video_ids: Vec<String>,
    pub caption_ids: Vec<String>,
    pub video: Array2<f64>,
    pub caption: Array2<f64>,
}

impl Features {
    /// Looks every id of `sim` up in the two tables.
    pub fn from_tables(
        videos: &EmbeddingTable,
        captions: &EmbeddingTable,
        sim: &SimilarityMatrix,
    ) -> Result<Self> {
        Ok(Features {
            video_ids: sim.query_ids().to_vec(),
            caption_ids: sim.item_ids().to_vec(),
            video: gather(videos, sim.query_ids())?,
            caption: gather(captions, sim.item_ids())?,
        })
    }
}

fn gather(table: &EmbeddingTable, ids: &[String]) -> Result<Array2<f64>> {
    let mut out = Array2::zeros((ids.len(), table.dim()));
    for (r, id) in ids.iter().enumerate() {
        let v = table
            .get(id)
            .ok_or_else(|| Error::MissingEmbedding(id.clone()))?;
        out.row_mut(r).assign(&ArrayView1::from(v));
    }
    Ok(out)
}

/// Two linear maps into a shared space with L2-normalised outputs;
/// distance is the squared Euclidean distance there.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingModel {
    /// `d_v × d_e`
    pub w_video: Array2<f64>,
    /// `d_t × d_e`
    pub w_text: Array2<f64>,
    pub margin: f64,
}

/// Gradients with the shapes of the model's two maps.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub w_video: Array2<f64>,
    pub w_text: Array2<f64>,
}

/// `max(m + D(a, p) − D(a, n), 0)` with squared Euclidean `D`.
pub fn triplet_loss(anchor: &[f64], positive: &[f64], negative: &[f64], margin: f64) -> f64 {
    let d = |x: &[f64], y: &[f64]| -> f64 { x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum() };
    (margin + d(anchor, positive) - d(anchor, negative)).max(0.0)
}

fn normalize(u: Array1<f64>) -> Result<(Array1<f64>, f64)> {
    let norm = u.dot(&u).sqrt();
    if norm == 0.0 || !norm.is_finite() {
        return Err(Error::ZeroVector);
    }
    Ok((u / norm, norm))
}

/// Gradient of `f = u / |u|` pulled back to `u`.
fn through_normalization(f: &Array1<f64>, norm: f64, grad_f: &Array1<f64>) -> Array1<f64> {
    (grad_f - &(f * f.dot(grad_f))) / norm
}

fn outer_add(acc: &mut Array2<f64>, x: ArrayView1<f64>, g: &Array1<f64>) {
    for (mut row, &xi) in acc.axis_iter_mut(Axis(0)).zip(x.iter()) {
        if xi != 0.0 {
            row.scaled_add(xi, g);
        }
    }
}

impl EmbeddingModel {
    pub fn new(w_video: Array2<f64>, w_text: Array2<f64>, margin: f64) -> Result<Self> {
        let model = EmbeddingModel {
            w_video,
            w_text,
            margin,
        };
        model.validate()?;
        Ok(model)
    }

    /// Uniform entries in `±1/sqrt(d_in)`.
    pub fn random(
        d_video: usize,
        d_text: usize,
        d_embed: usize,
        margin: f64,
        seed: u64,
    ) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut init = |rows: usize| {
            let scale = 1.0 / (rows.max(1) as f64).sqrt();
            Array2::from_shape_fn((rows, d_embed), |_| rng.gen_range(-scale..scale))
        };
        let w_video = init(d_video);
        let w_text = init(d_text);
        Self::new(w_video, w_text, margin)
    }

    pub fn validate(&self) -> Result<()> {
        if self.w_video.ncols() == 0 || self.w_video.ncols() != self.w_text.ncols() {
            return Err(Error::InvalidConfig(format!(
                "embedding widths {} and {} must agree and be at least 1",
                self.w_video.ncols(),
                self.w_text.ncols()
            )));
        }
        if !(self.margin > 0.0 && self.margin.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "margin must be positive, got {}",
                self.margin
            )));
        }
        if self
            .w_video
            .iter()
            .chain(self.w_text.iter())
            .any(|v| !v.is_finite())
        {
            return Err(Error::InvalidConfig("non-finite parameter".into()));
        }
        Ok(())
    }

    pub fn embed_dim(&self) -> usize {
        self.w_video.ncols()
    }

    fn check_features(&self, features: &Features) -> Result<()> {
        if features.video.ncols() != self.w_video.nrows()
            || features.caption.ncols() != self.w_text.nrows()
        {
            return Err(Error::InvalidInput(format!(
                "features are {}/{}-dimensional, model expects {}/{}",
                features.video.ncols(),
                features.caption.ncols(),
                self.w_video.nrows(),
                self.w_text.nrows()
            )));
        }
        Ok(())
    }

    pub fn embed_video(&self, x: ArrayView1<f64>) -> Result<Array1<f64>> {
        normalize(x.dot(&self.w_video)).map(|(f, _)| f)
    }

    pub fn embed_text(&self, y: ArrayView1<f64>) -> Result<Array1<f64>> {
        normalize(y.dot(&self.w_text)).map(|(g, _)| g)
    }

    /// Mean loss over a batch; inactive triplets count in the denominator.
    pub fn batch_loss(&self, batch: &[Triplet], features: &Features) -> Result<f64> {
        self.check_features(features)?;
        if batch.is_empty() {
            return Err(Error::InvalidInput("empty triplet batch".into()));
        }
        let mut total = CompensatedSum::new();
        for t in batch {
            let f = self.embed_video(features.video.row(t.anchor))?;
            let gp = self.embed_text(features.caption.row(t.positive))?;
            let gn = self.embed_text(features.caption.row(t.negative))?;
            total.add(triplet_loss(
                f.as_slice().unwrap(),
                gp.as_slice().unwrap(),
                gn.as_slice().unwrap(),
                self.margin,
            ));
        }
        Ok(total.total() / batch.len() as f64)
    }

    /// Mean batch loss and its exact gradient. At the hinge point the zero
    /// branch is taken.
    pub fn loss_gradient(&self, batch: &[Triplet], features: &Features) -> Result<(f64, Gradient)> {
        self.check_features(features)?;
        if batch.is_empty() {
            return Err(Error::InvalidInput("empty triplet batch".into()));
        }
        let mut grad = Gradient {
            w_video: Array2::zeros(self.w_video.raw_dim()),
            w_text: Array2::zeros(self.w_text.raw_dim()),
        };
        let mut total = CompensatedSum::new();
        for t in batch {
            let xa = features.video.row(t.anchor);
            let yp = features.caption.row(t.positive);
            let yn = features.caption.row(t.negative);
            let (f, nf) = normalize(xa.dot(&self.w_video))?;
            let (gp, np) = normalize(yp.dot(&self.w_text))?;
            let (gn, nn) = normalize(yn.dot(&self.w_text))?;
            let dp = &f - &gp;
            let dn = &f - &gn;
            let loss = self.margin + dp.dot(&dp) - dn.dot(&dn);
            if loss <= 0.0 {
                continue;
            }
            total.add(loss);
            let d_f = (&gn - &gp) * 2.0;
            let d_gp = &dp * -2.0;
            let d_gn = &dn * 2.0;
            outer_add(&mut grad.w_video, xa, &through_normalization(&f, nf, &d_f));
            outer_add(&mut grad.w_text, yp, &through_normalization(&gp, np, &d_gp));
            outer_add(&mut grad.w_text, yn, &through_normalization(&gn, nn, &d_gn));
        }
        let scale = 1.0 / batch.len() as f64;
        grad.w_video *= scale;
        grad.w_text *= scale;
        Ok((total.total() * scale, grad))
    }

    /// One plain gradient step.
    pub fn apply(&mut self, grad: &Gradient, lr: f64) {
        self.w_video.scaled_add(-lr, &grad.w_video);
        self.w_text.scaled_add(-lr, &grad.w_text);
    }

    /// Video-by-caption scores: the cosine of the embeddings, which orders
    /// items exactly as ascending distance does.
    pub fn score_matrix(&self, features: &Features) -> Result<Array2<f64>> {
        self.check_features(features)?;
        let embed = |x: &Array2<f64>, w: &Array2<f64>| -> Result<Array2<f64>> {
            let mut e = x.dot(w);
            for mut row in e.axis_iter_mut(Axis(0)) {
                let norm = row.dot(&row).sqrt();
                if norm == 0.0 || !norm.is_finite() {
                    return Err(Error::ZeroVector);
                }
                row /= norm;
            }
            Ok(e)
        };
        let f = embed(&features.video, &self.w_video)?;
        let g = embed(&features.caption, &self.w_text)?;
        Ok(f.dot(&g.t()))
    }

    /// `SEMEMB1`, then `d_v`, `d_t`, `d_e` as u64 LE, both maps row-major as
    /// f32 LE, then the margin as f32 LE.
    pub fn save(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(file);
        let mut write = || -> std::io::Result<()> {
            out.write_all(CHECKPOINT_MAGIC.as_bytes())?;
            for d in [self.w_video.nrows(), self.w_text.nrows(), self.embed_dim()] {
                out.write_all(&(d as u64).to_le_bytes())?;
            }
            for v in self.w_video.iter().chain(self.w_text.iter()) {
                out.write_all(&(*v as f32).to_le_bytes())?;
            }
            out.write_all(&(self.margin as f32).to_le_bytes())?;
            out.flush()
        };
        write().map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut input = BufReader::new(file);
        let io = |e| Error::io(path, e);
        let mut magic = [0u8; 7];
        input.read_exact(&mut magic).map_err(io)?;
        if magic != CHECKPOINT_MAGIC.as_bytes() {
            return Err(Error::BadMagic {
                expected: CHECKPOINT_MAGIC,
            });
        }
        let mut dims = [0usize; 3];
        for d in &mut dims {
            let mut b = [0u8; 8];
            input.read_exact(&mut b).map_err(io)?;
            *d = usize::try_from(u64::from_le_bytes(b))
                .map_err(|_| Error::InvalidInput("checkpoint dimension overflows".into()))?;
        }
        let [dv, dt, de] = dims;
        let mut read_f32s = |n: usize| -> Result<Vec<f64>> {
            let mut buf = vec![0u8; n * 4];
            input.read_exact(&mut buf).map_err(io)?;
            Ok(buf
                .chunks_exact(4)
                .map(|c| f64::from(f32::from_le_bytes([c[0], c[1], c[2], c[3]])))
                .collect())
        };
        let shape_err = |_| Error::InvalidInput("checkpoint shape mismatch".into());
        let w_video = Array2::from_shape_vec((dv, de), read_f32s(dv * de)?).map_err(shape_err)?;
        let w_text = Array2::from_shape_vec((dt, de), read_f32s(dt * de)?).map_err(shape_err)?;
        let margin = read_f32s(1)?[0];
        Self::new(w_video, w_text, margin)
    }
}
