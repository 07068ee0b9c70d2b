//! Intrinsic visual difficulty: patch-wise GLCM texture entropy combined
//! with a pluggable semantic-entropy provider.
//!
//! Two scores are exposed. `image_complexity_raw` is the literal
//! `-(mean patch entropy + semantic entropy)`, which is nonpositive and
//! decreases as complexity grows. `image_complexity_norm` rescales each
//! term by its maximum attainable entropy and averages them, giving a
//! monotone-increasing score in [0,1]; everything downstream consumes the
//! normalized form.

use crate::error::{Error, Result};
use crate::types::GrayImage;

/// Co-occurrence offset direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Orientation {
    Deg0,
    Deg45,
    Deg90,
    Deg135,
}

impl Orientation {
    pub const ALL: [Orientation; 4] = [
        Orientation::Deg0,
        Orientation::Deg45,
        Orientation::Deg90,
        Orientation::Deg135,
    ];

    /// (row, col) displacement at the given radius.
    pub fn offset(self, radius: usize) -> (isize, isize) {
        let d = radius as isize;
        match self {
            Orientation::Deg0 => (0, d),
            Orientation::Deg45 => (-d, d),
            Orientation::Deg90 => (-d, 0),
            Orientation::Deg135 => (-d, -d),
        }
    }
}

/// GLCM parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct GlcmConfig {
    pub gray_levels: usize,
    pub patch_size: usize,
    pub radii: Vec<usize>,
    pub orientations: Vec<Orientation>,
}

impl Default for GlcmConfig {
    fn default() -> Self {
        Self {
            gray_levels: 64,
            patch_size: 64,
            radii: vec![1, 2, 3, 4],
            orientations: Orientation::ALL.to_vec(),
        }
    }
}

impl GlcmConfig {
    pub fn validate(&self) -> Result<()> {
        if self.gray_levels < 2 {
            return Err(Error::InvalidArgument(format!(
                "gray_levels must be >= 2, got {}",
                self.gray_levels
            )));
        }
        if self.patch_size < 2 {
            return Err(Error::InvalidArgument(format!(
                "patch_size must be >= 2, got {}",
                self.patch_size
            )));
        }
        if self.radii.is_empty() || self.radii.contains(&0) {
            return Err(Error::InvalidArgument(
                "radii must be nonempty and positive".into(),
            ));
        }
        if self.orientations.is_empty() {
            return Err(Error::InvalidArgument("orientations must be nonempty".into()));
        }
        Ok(())
    }
}

/// Image quantized to a fixed number of gray levels.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelImage {
    levels: usize,
    rows: usize,
    cols: usize,
    data: Vec<u32>,
}

impl LevelImage {
    pub fn from_levels(levels: usize, rows: usize, cols: usize, data: Vec<u32>) -> Result<Self> {
        if levels < 2 {
            return Err(Error::InvalidArgument(format!(
                "quantization needs at least 2 levels, got {levels}"
            )));
        }
        if rows == 0 || cols == 0 || data.len() != rows * cols {
            return Err(Error::InvalidArgument("empty or mismatched level matrix".into()));
        }
        if data.iter().any(|&v| v as usize >= levels) {
            return Err(Error::InvalidArgument("level value out of range".into()));
        }
        Ok(Self {
            levels,
            rows,
            cols,
            data,
        })
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> u32 {
        self.data[row * self.cols + col]
    }

    /// Copies the window starting at (r0, c0); clipped to the image.
    pub fn window(&self, r0: usize, c0: usize, rows: usize, cols: usize) -> LevelImage {
        let rows = rows.min(self.rows - r0);
        let cols = cols.min(self.cols - c0);
        let mut data = Vec::with_capacity(rows * cols);
        for r in r0..r0 + rows {
            for c in c0..c0 + cols {
                data.push(self.get(r, c));
            }
        }
        LevelImage {
            levels: self.levels,
            rows,
            cols,
            data,
        }
    }
}

/// Maps pixel value v to `floor(v * levels / 256)`; every output lies in
/// `[0, levels)`.
pub fn quantize_gray(image: &GrayImage, levels: usize) -> Result<LevelImage> {
    if levels < 2 {
        return Err(Error::InvalidArgument(format!(
            "quantization needs at least 2 levels, got {levels}"
        )));
    }
    let data = image
        .pixels()
        .iter()
        .map(|&v| (v as usize * levels / 256) as u32)
        .collect();
    LevelImage::from_levels(levels, image.rows(), image.cols(), data)
}

/// Symmetric gray-level co-occurrence matrix: a probability distribution
/// over ordered level pairs at one (radius, orientation) offset.
#[derive(Debug, Clone)]
pub struct Glcm {
    levels: usize,
    probs: Vec<f64>,
}

impl Glcm {
    pub fn levels(&self) -> usize {
        self.levels
    }

    #[inline]
    pub fn prob(&self, a: usize, b: usize) -> f64 {
        self.probs[a * self.levels + b]
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }
}

/// Accumulates the symmetric GLCM: each pixel pair counts once in each
/// direction, so the matrix is symmetric and sums to 1.
pub fn glcm(patch: &LevelImage, radius: usize, orientation: Orientation) -> Result<Glcm> {
    if radius == 0 {
        return Err(Error::InvalidArgument("radius must be positive".into()));
    }
    let (dr, dc) = orientation.offset(radius);
    let levels = patch.levels();
    let mut counts = vec![0u64; levels * levels];
    let mut total = 0u64;
    for r in 0..patch.rows() {
        for c in 0..patch.cols() {
            let r2 = r as isize + dr;
            let c2 = c as isize + dc;
            if r2 < 0 || c2 < 0 || r2 >= patch.rows() as isize || c2 >= patch.cols() as isize {
                continue;
            }
            let a = patch.get(r, c) as usize;
            let b = patch.get(r2 as usize, c2 as usize) as usize;
            counts[a * levels + b] += 1;
            counts[b * levels + a] += 1;
            total += 2;
        }
    }
    if total == 0 {
        return Err(Error::DegeneratePatch(format!(
            "{}x{} patch has no pixel pairs at radius {radius}, {orientation:?}",
            patch.rows(),
            patch.cols()
        )));
    }
    let probs = counts.iter().map(|&c| c as f64 / total as f64).collect();
    Ok(Glcm { levels, probs })
}

/// Shannon entropy (nats) of the co-occurrence probabilities; zero entries
/// contribute nothing.
pub fn glcm_entropy(matrix: &Glcm) -> f64 {
    entropy(matrix.probs())
}

fn entropy(probs: &[f64]) -> f64 {
    -probs
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| p * p.ln())
        .sum::<f64>()
}

/// Average GLCM entropy over all patches and all (radius, orientation)
/// offsets. Images smaller than the patch size form a single patch;
/// degenerate (patch, offset) combinations are skipped from the average.
pub fn mean_patch_entropy(image: &GrayImage, cfg: &GlcmConfig) -> Result<f64> {
    cfg.validate()?;
    let quantized = quantize_gray(image, cfg.gray_levels)?;
    let mut sum = 0.0;
    let mut n = 0usize;
    let patch = cfg.patch_size;
    let mut r0 = 0;
    while r0 < quantized.rows() {
        let mut c0 = 0;
        while c0 < quantized.cols() {
            let window = quantized.window(r0, c0, patch, patch);
            for &radius in &cfg.radii {
                for &orientation in &cfg.orientations {
                    match glcm(&window, radius, orientation) {
                        Ok(m) => {
                            sum += glcm_entropy(&m);
                            n += 1;
                        }
                        Err(Error::DegeneratePatch(_)) => {}
                        Err(e) => return Err(e),
                    }
                }
            }
            c0 += patch;
        }
        r0 += patch;
    }
    if n == 0 {
        return Err(Error::DegenerateImage(format!(
            "no (patch, radius, orientation) combination of {}x{} admits a pixel pair",
            image.rows(),
            image.cols()
        )));
    }
    Ok(sum / n as f64)
}

/// Scores an image as a probability distribution over abstract classes.
pub trait SemanticEntropyProvider {
    fn class_probs(&self, image: &GrayImage) -> Vec<f64>;
    fn num_classes(&self) -> usize;
}

/// Default provider: softmax (temperature 1) over a 16-bin intensity
/// histogram. Deterministic and dependency-free; stands in for a
/// classifier's predictive distribution.
#[derive(Debug, Clone)]
pub struct HistogramSoftmaxProvider {
    bins: usize,
}

impl HistogramSoftmaxProvider {
    pub fn new(bins: usize) -> Self {
        Self { bins: bins.max(2) }
    }
}

impl Default for HistogramSoftmaxProvider {
    fn default() -> Self {
        Self::new(16)
    }
}

impl SemanticEntropyProvider for HistogramSoftmaxProvider {
    fn class_probs(&self, image: &GrayImage) -> Vec<f64> {
        let mut hist = vec![0usize; self.bins];
        for &v in image.pixels() {
            let bin = (v as usize * self.bins) / 256;
            hist[bin] += 1;
        }
        let total = image.pixels().len() as f64;
        let freqs: Vec<f64> = hist.iter().map(|&c| c as f64 / total).collect();
        let max = freqs.iter().cloned().fold(f64::MIN, f64::max);
        let exps: Vec<f64> = freqs.iter().map(|&f| (f - max).exp()).collect();
        let z: f64 = exps.iter().sum();
        exps.iter().map(|&e| e / z).collect()
    }

    fn num_classes(&self) -> usize {
        self.bins
    }
}

/// Entropy (nats) of the provider's class distribution.
pub fn semantic_entropy(image: &GrayImage, provider: &dyn SemanticEntropyProvider) -> Result<f64> {
    let probs = provider.class_probs(image);
    if probs.is_empty() {
        return Err(Error::ProviderContract("empty distribution".into()));
    }
    if probs.iter().any(|&p| !(p >= 0.0) || !p.is_finite()) {
        return Err(Error::ProviderContract(
            "distribution has a negative or non-finite entry".into(),
        ));
    }
    let sum: f64 = probs.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(Error::ProviderContract(format!(
            "distribution sums to {sum}, expected 1"
        )));
    }
    Ok(entropy(&probs))
}

/// Literal complexity score: `-(mean patch entropy + semantic entropy)`.
/// Nonpositive; more complex images score more negative.
pub fn image_complexity_raw(
    image: &GrayImage,
    cfg: &GlcmConfig,
    provider: &dyn SemanticEntropyProvider,
) -> Result<f64> {
    let mpe = mean_patch_entropy(image, cfg)?;
    let se = semantic_entropy(image, provider)?;
    Ok(-(mpe + se))
}

/// Rescales each entropy term by its maximum and averages, clamped to
/// [0,1]. The texture term's ceiling is `ln(levels^2)` (uniform pair
/// distribution); the semantic term's is `ln(num_classes)`.
pub fn normalized_score(
    mean_patch_entropy: f64,
    semantic_entropy: f64,
    gray_levels: usize,
    num_classes: usize,
) -> f64 {
    let texture_max = ((gray_levels * gray_levels) as f64).ln();
    let texture = if texture_max > 0.0 {
        mean_patch_entropy / texture_max
    } else {
        0.0
    };
    let semantic = if num_classes > 1 {
        semantic_entropy / (num_classes as f64).ln()
    } else {
        0.0
    };
    (0.5 * texture + 0.5 * semantic).clamp(0.0, 1.0)
}

/// Normalized complexity in [0,1], monotone-increasing in visual
/// complexity. This is the form consumed by difficulty estimation.
pub fn image_complexity_norm(
    image: &GrayImage,
    cfg: &GlcmConfig,
    provider: &dyn SemanticEntropyProvider,
) -> Result<f64> {
    let mpe = mean_patch_entropy(image, cfg)?;
    let se = semantic_entropy(image, provider)?;
    Ok(normalized_score(mpe, se, cfg.gray_levels, provider.num_classes()))
}
