//! Per-pixel feature extraction.
//!
//! Every pixel is described by 23 values: its position, its RGB, HSV and
//! excess-color components, and the mean and standard deviation of RGB and HSV
//! over the pixel together with its in-image 8-neighbors.

use std::io::Write;
use std::path::Path;

use crate::{Error, Result};

pub const FEATURE_COUNT: usize = 23;

pub const FEATURE_NAMES: [&str; FEATURE_COUNT] = [
    "row", "col", "R", "G", "B", "H", "S", "V", "ExR", "ExG", "ExB", "MR", "MG", "MB", "SDR", "SDG", "SDB", "MH", "MS",
    "MV", "SDH", "SDS", "SDV",
];

/// One row of the feature matrix.
pub type FeatureRow = [f64; FEATURE_COUNT];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Grid {
    pub width: usize,
    pub height: usize,
}

impl Grid {
    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// In-image 8-neighbors of pixel `idx`, row-major order, no wraparound.
    pub fn neighbors8(&self, idx: usize) -> impl Iterator<Item = usize> + '_ {
        let (row, col) = (idx / self.width, idx % self.width);
        (-1isize..=1)
            .flat_map(|dr| (-1isize..=1).map(move |dc| (dr, dc)))
            .filter(|&(dr, dc)| dr != 0 || dc != 0)
            .filter_map(move |(dr, dc)| {
                let r = row as isize + dr;
                let c = col as isize + dc;
                if r < 0 || c < 0 || r >= self.height as isize || c >= self.width as isize {
                    None
                } else {
                    Some(r as usize * self.width + c as usize)
                }
            })
    }
}

/// 8-bit RGB raster, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbImage {
    width: usize,
    height: usize,
    pixels: Vec<[u8; 3]>,
}

impl RgbImage {
    pub fn new(width: usize, height: usize, pixels: Vec<[u8; 3]>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidInput(format!(
                "image must be non-empty, got {width}x{height}"
            )));
        }
        if pixels.len() != width * height {
            return Err(Error::InvalidInput(format!(
                "{width}x{height} image needs {} pixels, got {}",
                width * height,
                pixels.len()
            )));
        }
        Ok(Self { width, height, pixels })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> [u8; 3]) -> Result<Self> {
        let mut pixels = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                pixels.push(f(x, y));
            }
        }
        Self::new(width, height, pixels)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn grid(&self) -> Grid {
        Grid {
            width: self.width,
            height: self.height,
        }
    }

    pub fn pixels(&self) -> &[[u8; 3]] {
        &self.pixels
    }

    pub fn pixel(&self, x: usize, y: usize) -> [u8; 3] {
        self.pixels[y * self.width + x]
    }
}

/// Feature weights, one per feature, each in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightVector([f64; FEATURE_COUNT]);

impl WeightVector {
    pub fn new(weights: [f64; FEATURE_COUNT]) -> Result<Self> {
        if let Some((j, w)) = weights.iter().enumerate().find(|(_, w)| !(0.0..=1.0).contains(*w)) {
            return Err(Error::InvalidInput(format!(
                "weight {j} ({}) = {w} is outside [0, 1]",
                FEATURE_NAMES[j]
            )));
        }
        if weights.iter().all(|&w| w == 0.0) {
            return Err(Error::InvalidInput("at least one weight must be positive".into()));
        }
        Ok(Self(weights))
    }

    pub fn from_slice(weights: &[f64]) -> Result<Self> {
        let arr: [f64; FEATURE_COUNT] = weights
            .try_into()
            .map_err(|_| Error::InvalidInput(format!("expected {FEATURE_COUNT} weights, got {}", weights.len())))?;
        Self::new(arr)
    }

    pub fn unit() -> Self {
        Self([1.0; FEATURE_COUNT])
    }

    pub fn is_unit(&self) -> bool {
        self.0.iter().all(|&w| w == 1.0)
    }

    pub fn as_array(&self) -> &[f64; FEATURE_COUNT] {
        &self.0
    }
}

impl Default for WeightVector {
    fn default() -> Self {
        Self::unit()
    }
}

/// `n x 23` matrix of pixel features, optionally tied to the pixel grid it
/// was extracted from.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    rows: Vec<FeatureRow>,
    grid: Option<Grid>,
}

impl FeatureMatrix {
    /// Matrix not attached to an image, e.g. synthetic data.
    pub fn from_rows(rows: Vec<FeatureRow>) -> Self {
        Self { rows, grid: None }
    }

    pub fn with_grid(rows: Vec<FeatureRow>, grid: Grid) -> Result<Self> {
        if rows.len() != grid.len() {
            return Err(Error::InvalidInput(format!(
                "{} feature rows for a {}x{} grid",
                rows.len(),
                grid.width,
                grid.height
            )));
        }
        Ok(Self { rows, grid: Some(grid) })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn dims(&self) -> usize {
        FEATURE_COUNT
    }

    pub fn grid(&self) -> Option<Grid> {
        self.grid
    }

    pub fn rows(&self) -> &[FeatureRow] {
        &self.rows
    }

    pub fn row(&self, i: usize) -> &FeatureRow {
        &self.rows[i]
    }

    pub fn column(&self, j: usize) -> impl Iterator<Item = f64> + '_ {
        self.rows.iter().map(move |r| r[j])
    }

    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(FEATURE_NAMES)?;
        for row in &self.rows {
            w.write_record(row.iter().map(|v| v.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(file))
            .map_err(|e| Error::Format(format!("{}: {e}", path.display())))
    }
}

/// Hexcone RGB to HSV, inputs in `[0, 1]`, `h` in `[0, 1)`.
pub fn rgb_to_hsv(r: f64, g: f64, b: f64) -> (f64, f64, f64) {
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let delta = max - min;
    let v = max;
    let s = if max > 0.0 { delta / max } else { 0.0 };
    if delta == 0.0 {
        return (0.0, s, v);
    }
    let mut h = if max == r {
        (g - b) / delta
    } else if max == g {
        (b - r) / delta + 2.0
    } else {
        (r - g) / delta + 4.0
    };
    if h < 0.0 {
        h += 6.0;
    }
    if h >= 6.0 {
        h -= 6.0;
    }
    (h / 6.0, s, v)
}

// Per-pixel values that get neighborhood statistics: R, G, B, H, S, V.
fn base_channels(px: [u8; 3]) -> [f64; 6] {
    let [r, g, b] = px.map(f64::from);
    let (h, s, v) = rgb_to_hsv(r / 255.0, g / 255.0, b / 255.0);
    [r, g, b, h, s, v]
}

/// Raw (un-normalized) 23-feature description of every pixel.
pub fn extract_features(image: &RgbImage) -> Result<FeatureMatrix> {
    if image.width == 0 || image.height == 0 || image.pixels.is_empty() {
        return Err(Error::InvalidInput(
            "cannot extract features from an empty image".into(),
        ));
    }
    let grid = image.grid();
    let base: Vec<[f64; 6]> = image.pixels.iter().map(|&p| base_channels(p)).collect();

    let rows = (0..grid.len())
        .map(|idx| {
            let (row, col) = (idx / grid.width, idx % grid.width);
            let [r, g, b, h, s, v] = base[idx];
            let (rs, gs, bs) = (r / 255.0, g / 255.0, b / 255.0);

            // ascending order, so equal neighborhoods give bit-identical sums
            let mut hood: Vec<usize> = std::iter::once(idx).chain(grid.neighbors8(idx)).collect();
            hood.sort_unstable();
            let count = hood.len() as f64;
            let mut mean = [0.0; 6];
            for &j in &hood {
                for (m, x) in mean.iter_mut().zip(base[j]) {
                    *m += x;
                }
            }
            mean.iter_mut().for_each(|m| *m /= count);
            let mut var = [0.0; 6];
            for &j in &hood {
                for c in 0..6 {
                    let d = base[j][c] - mean[c];
                    var[c] += d * d;
                }
            }
            let sd = var.map(|x| (x / count).sqrt());

            [
                row as f64,
                col as f64,
                r,
                g,
                b,
                h,
                s,
                v,
                2.0 * rs - gs - bs,
                2.0 * gs - rs - bs,
                2.0 * bs - rs - gs,
                mean[0],
                mean[1],
                mean[2],
                sd[0],
                sd[1],
                sd[2],
                mean[3],
                mean[4],
                mean[5],
                sd[3],
                sd[4],
                sd[5],
            ]
        })
        .collect();

    FeatureMatrix::with_grid(rows, grid)
}

/// Column-wise standardization to mean 0 and sample standard deviation 1.
/// Constant columns become all-zero.
pub fn normalize(fm: &FeatureMatrix) -> FeatureMatrix {
    let n = fm.len();
    let mut rows = fm.rows.clone();
    if n == 0 {
        return FeatureMatrix { rows, grid: fm.grid };
    }
    for j in 0..FEATURE_COUNT {
        let (min, max) = fm
            .column(j)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| (lo.min(x), hi.max(x)));
        if min == max {
            rows.iter_mut().for_each(|r| r[j] = 0.0);
            continue;
        }
        let mean = fm.column(j).sum::<f64>() / n as f64;
        let ss: f64 = fm.column(j).map(|x| (x - mean) * (x - mean)).sum();
        let sd = (ss / (n - 1) as f64).sqrt();
        for r in rows.iter_mut() {
            r[j] = (r[j] - mean) / sd;
        }
    }
    FeatureMatrix { rows, grid: fm.grid }
}

/// Multiplies column `j` by `weights[j]`.
pub fn apply_weights(fm: &FeatureMatrix, weights: &WeightVector) -> FeatureMatrix {
    let w = weights.as_array();
    let rows = fm.rows.iter().map(|r| std::array::from_fn(|j| r[j] * w[j])).collect();
    FeatureMatrix { rows, grid: fm.grid }
}
