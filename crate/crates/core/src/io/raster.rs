//! Raw images as bags of pixel locations.
//!
//! Pixel `(x, y)` in channel `c` of a `w x h x channels` image is word
//! `(y * w + x) * channels + c`.

use std::io::Read;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{BagOfWords, Corpus};
use crate::error::{Error, Result};

pub const DEFAULT_TOKENS_PER_IMAGE: usize = 200;

/// A nonnegative intensity image, channels interleaved, rows top to bottom.
#[derive(Debug, Clone, PartialEq)]
pub struct Raster {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub data: Vec<f64>,
}

impl Raster {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 || !(channels == 1 || channels == 3) {
            return Err(Error::Image(format!("unsupported shape {width}x{height}x{channels}")));
        }
        if data.len() != width * height * channels {
            return Err(Error::DimensionMismatch {
                expected: width * height * channels,
                actual: data.len(),
            });
        }
        if let Some(v) = data.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::Image(format!("intensity {v} is not a nonnegative number")));
        }
        Ok(Raster {
            width,
            height,
            channels,
            data,
        })
    }

    pub fn blank(width: usize, height: usize, channels: usize) -> Self {
        Raster {
            width,
            height,
            channels,
            data: vec![0.0; width * height * channels],
        }
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.width, self.height, self.channels)
    }

    pub fn get(&self, x: usize, y: usize, c: usize) -> f64 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    /// Pixel-wise maximum of two images of the same shape.
    pub fn max_combine(&self, other: &Raster) -> Result<Raster> {
        if self.shape() != other.shape() {
            return Err(Error::Image(format!(
                "cannot overlay {:?} with {:?}",
                self.shape(),
                other.shape()
            )));
        }
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a.max(*b)).collect();
        Ok(Raster { data, ..*self })
    }

    /// Reads PNG, PGM/PPM or any other format the `image` crate was built
    /// with. Gray images keep one channel, everything else becomes RGB.
    /// Intensities are scaled to `[0, 1]`.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let img = image::open(path).map_err(|e| Error::Image(format!("{}: {e}", path.display())))?;
        let gray = matches!(
            img.color(),
            image::ColorType::L8 | image::ColorType::L16 | image::ColorType::La8 | image::ColorType::La16
        );
        if gray {
            let buf = img.to_luma8();
            let (w, h) = buf.dimensions();
            Raster::new(w as usize, h as usize, 1, buf.into_raw().into_iter().map(|v| v as f64 / 255.0).collect())
        } else {
            let buf = img.to_rgb8();
            let (w, h) = buf.dimensions();
            Raster::new(w as usize, h as usize, 3, buf.into_raw().into_iter().map(|v| v as f64 / 255.0).collect())
        }
    }
}

/// Word names for a pixel vocabulary: `x,y` or `x,y,c`.
pub fn pixel_vocab(width: usize, height: usize, channels: usize) -> Vec<String> {
    let mut v = Vec::with_capacity(width * height * channels);
    for y in 0..height {
        for x in 0..width {
            for c in 0..channels {
                v.push(if channels == 1 { format!("{x},{y}") } else { format!("{x},{y},{c}") });
            }
        }
    }
    v
}

/// Repeats every pixel `round(tokens * I / sum(I))` times.
pub fn image_to_bag(image: &Raster, tokens: usize) -> Result<BagOfWords> {
    let total: f64 = image.data.iter().sum();
    if total <= 0.0 {
        return Err(Error::Image("image is entirely black".into()));
    }
    let scale = tokens as f64 / total;
    Ok(BagOfWords::from_counts(
        image
            .data
            .iter()
            .enumerate()
            .map(|(w, v)| (w, (scale * v).round()))
            .filter(|(_, c)| *c > 0.0),
    ))
}

/// One document per image; all images must share a shape.
pub fn images_to_corpus(images: &[Raster], tokens: usize, labels: Option<&[String]>) -> Result<Corpus> {
    let first = images.first().ok_or(Error::EmptyCorpus)?;
    let shape = first.shape();
    let mut docs = Vec::with_capacity(images.len());
    for (i, img) in images.iter().enumerate() {
        if img.shape() != shape {
            return Err(Error::Image(format!("image {i} is {:?}, expected {shape:?}", img.shape())));
        }
        docs.push(image_to_bag(img, tokens).map_err(|e| Error::Image(format!("image {i}: {e}")))?);
    }
    let mut corpus = Corpus::new(pixel_vocab(shape.0, shape.1, shape.2), docs)?;
    corpus.image_shape = Some(shape);
    if let Some(names) = labels {
        if names.len() != images.len() {
            return Err(Error::DimensionMismatch {
                expected: images.len(),
                actual: names.len(),
            });
        }
        let mut label_names: Vec<String> = Vec::new();
        let ids = names
            .iter()
            .map(|n| match label_names.iter().position(|l| l == n) {
                Some(i) => i,
                None => {
                    label_names.push(n.clone());
                    label_names.len() - 1
                }
            })
            .collect();
        corpus.labels = Some(ids);
        corpus.label_names = label_names;
    }
    Ok(corpus)
}

fn read_idx_header<R: Read>(r: &mut R, expect_dims: u8) -> Result<Vec<usize>> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if magic[0] != 0 || magic[1] != 0 || magic[2] != 0x08 || magic[3] != expect_dims {
        return Err(Error::Image(format!("not an unsigned-byte IDX file with {expect_dims} dimensions")));
    }
    (0..expect_dims)
        .map(|_| {
            let mut b = [0u8; 4];
            r.read_exact(&mut b)?;
            Ok(u32::from_be_bytes(b) as usize)
        })
        .collect()
}

/// Images from an IDX file (`idx3-ubyte`, as distributed with MNIST).
pub fn read_idx_images(path: impl AsRef<Path>) -> Result<Vec<Raster>> {
    let mut r = std::io::BufReader::new(std::fs::File::open(path)?);
    let dims = read_idx_header(&mut r, 3)?;
    let (n, h, w) = (dims[0], dims[1], dims[2]);
    let mut buf = vec![0u8; w * h];
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        r.read_exact(&mut buf)?;
        out.push(Raster::new(w, h, 1, buf.iter().map(|v| *v as f64 / 255.0).collect())?);
    }
    Ok(out)
}

/// Labels from an IDX file (`idx1-ubyte`).
pub fn read_idx_labels(path: impl AsRef<Path>) -> Result<Vec<usize>> {
    let mut r = std::io::BufReader::new(std::fs::File::open(path)?);
    let n = read_idx_header(&mut r, 1)?[0];
    let mut buf = vec![0u8; n];
    r.read_exact(&mut buf)?;
    Ok(buf.into_iter().map(usize::from).collect())
}

// Seven-segment endpoints in a unit box, y pointing down.
const SEGMENTS: [((f64, f64), (f64, f64)); 7] = [
    ((0.0, 0.0), (1.0, 0.0)), // top
    ((1.0, 0.0), (1.0, 0.5)), // upper right
    ((1.0, 0.5), (1.0, 1.0)), // lower right
    ((0.0, 1.0), (1.0, 1.0)), // bottom
    ((0.0, 0.5), (0.0, 1.0)), // lower left
    ((0.0, 0.0), (0.0, 0.5)), // upper left
    ((0.0, 0.5), (1.0, 0.5)), // middle
];

const DIGIT_SEGMENTS: [u8; 10] = [
    0b0111111, 0b0000110, 0b1011011, 0b1001111, 0b1100110, 0b1101101, 0b1111101, 0b0000111, 0b1111111, 0b1101111,
];

fn segment_distance(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let t = (((p.0 - a.0) * dx + (p.1 - a.1) * dy) / (dx * dx + dy * dy)).clamp(0.0, 1.0);
    let (qx, qy) = (a.0 + t * dx - p.0, a.1 + t * dy - p.1);
    (qx * qx + qy * qy).sqrt()
}

/// A stroke-drawn digit on a `size x size` canvas with random placement,
/// scale, slant and stroke width.
pub fn render_digit<R: Rng + ?Sized>(digit: usize, size: usize, rng: &mut R) -> Raster {
    let s = size as f64;
    let width = s * rng.gen_range(0.30..0.42);
    let height = s * rng.gen_range(0.55..0.70);
    let slant = rng.gen_range(-0.25..0.25);
    let stroke = s * rng.gen_range(0.05..0.08);
    let cx = s / 2.0 + rng.gen_range(-0.08..0.08) * s;
    let cy = s / 2.0 + rng.gen_range(-0.06..0.06) * s;
    let place = |(u, v): (f64, f64)| {
        let y = cy + (v - 0.5) * height;
        (cx + (u - 0.5) * width - slant * (y - cy), y)
    };
    let strokes: Vec<((f64, f64), (f64, f64))> = (0..7)
        .filter(|k| DIGIT_SEGMENTS[digit % 10] >> k & 1 == 1)
        .map(|k| (place(SEGMENTS[k].0), place(SEGMENTS[k].1)))
        .collect();
    let mut data = vec![0.0; size * size];
    for y in 0..size {
        for x in 0..size {
            let p = (x as f64 + 0.5, y as f64 + 0.5);
            let d = strokes.iter().map(|(a, b)| segment_distance(p, *a, *b)).fold(f64::INFINITY, f64::min);
            data[y * size + x] = (1.0 - (d - stroke / 2.0)).clamp(0.0, 1.0);
        }
    }
    Raster {
        width: size,
        height: size,
        channels: 1,
        data,
    }
}

/// `per_class` rendered samples of each digit 0-9, with their labels.
pub fn synthetic_digits(per_class: usize, size: usize, seed: u64) -> (Vec<Raster>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut images = Vec::with_capacity(10 * per_class);
    let mut labels = Vec::with_capacity(10 * per_class);
    for _ in 0..per_class {
        for d in 0..10 {
            images.push(render_digit(d, size, &mut rng));
            labels.push(d);
        }
    }
    (images, labels)
}

#[derive(Debug, Clone)]
pub struct MixedDigits {
    /// Unlabeled: the pair identities are kept apart from the training data.
    pub corpus: Corpus,
    /// Source image indices of every mixture.
    pub sources: Vec<(usize, usize)>,
    /// Class labels of the two sources.
    pub pair_labels: Vec<(usize, usize)>,
}

/// Overlays random pairs of images with different labels by pixel-wise max.
pub fn synthesize_mixed_digits(
    images: &[Raster],
    labels: &[usize],
    count: usize,
    tokens: usize,
    seed: u64,
) -> Result<MixedDigits> {
    if images.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: images.len(),
            actual: labels.len(),
        });
    }
    let first = labels.first().ok_or(Error::EmptyCorpus)?;
    if labels.iter().all(|l| l == first) {
        return Err(Error::Image("need images from at least two classes".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut mixed = Vec::with_capacity(count);
    let mut sources = Vec::with_capacity(count);
    let mut pair_labels = Vec::with_capacity(count);
    for _ in 0..count {
        let a = rng.gen_range(0..images.len());
        let b = loop {
            let b = rng.gen_range(0..images.len());
            if labels[b] != labels[a] {
                break b;
            }
        };
        mixed.push(images[a].max_combine(&images[b])?);
        sources.push((a, b));
        pair_labels.push((labels[a], labels[b]));
    }
    let mut corpus = images_to_corpus(&mixed, tokens, None)?;
    corpus.doc_ids = pair_labels
        .iter()
        .enumerate()
        .map(|(i, (a, b))| format!("mix{i}_{a}{b}"))
        .collect();
    Ok(MixedDigits {
        corpus,
        sources,
        pair_labels,
    })
}
