//! Raster I/O: images, trimaps, ground truth and output masks.
//!
//! A dataset entry `<name>` lives in one directory as `<name>.<ext>`,
//! `<name>-trimap.<ext>` and optionally `<name>-gt.<ext>`, where `<ext>` is
//! any of png, bmp, jpg.

use std::path::{Path, PathBuf};

use image::{GrayImage, ImageFormat};

use crate::eval::GroundTruth;
use crate::features::{Grid, RgbImage};
use crate::knn::{LabelMap, TrimapCode};
use crate::{Error, Result};

const EXTENSIONS: [&str; 4] = ["png", "bmp", "jpg", "jpeg"];

fn open(path: &Path) -> Result<image::DynamicImage> {
    if !path.exists() {
        return Err(Error::io(
            path,
            std::io::Error::new(std::io::ErrorKind::NotFound, "file not found"),
        ));
    }
    Ok(image::ImageReader::open(path)
        .map_err(|e| Error::io(path, e))?
        .with_guessed_format()
        .map_err(|e| Error::io(path, e))?
        .decode()?)
}

pub fn rgb_from_dynamic(img: &image::DynamicImage) -> Result<RgbImage> {
    let rgb = img.to_rgb8();
    let (w, h) = rgb.dimensions();
    RgbImage::new(w as usize, h as usize, rgb.pixels().map(|p| p.0).collect())
}

/// Loads an 8-bit color or grayscale raster as RGB.
pub fn load_image(path: &Path) -> Result<RgbImage> {
    rgb_from_dynamic(&open(path)?)
}

pub fn decode_image(bytes: &[u8]) -> Result<RgbImage> {
    if bytes.is_empty() {
        return Err(Error::InvalidInput("empty image upload".into()));
    }
    rgb_from_dynamic(&image::load_from_memory(bytes)?)
}

/// Maps trimap gray levels {0, 64, 128, 255} to codes.
pub fn trimap_from_gray(width: usize, height: usize, values: &[u8]) -> Result<LabelMap> {
    let codes = values
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            TrimapCode::from_gray(v).ok_or_else(|| {
                Error::Format(format!(
                    "unexpected trimap value {v} at pixel (x={}, y={})",
                    i % width,
                    i / width
                ))
            })
        })
        .collect::<Result<Vec<_>>>()?;
    LabelMap::new(width, height, codes)
}

pub fn load_trimap(path: &Path) -> Result<LabelMap> {
    let gray = open(path)?.to_luma8();
    let (w, h) = gray.dimensions();
    trimap_from_gray(w as usize, h as usize, gray.as_raw())
        .map_err(|e| Error::Format(format!("{}: {e}", path.display())))
}

pub fn load_ground_truth(path: &Path) -> Result<GroundTruth> {
    let gray = open(path)?.to_luma8();
    let (w, h) = gray.dimensions();
    GroundTruth::from_gray(w as usize, h as usize, gray.as_raw())
}

pub fn load_gray(path: &Path) -> Result<(Grid, Vec<u8>)> {
    let gray = open(path)?.to_luma8();
    let (w, h) = gray.dimensions();
    Ok((
        Grid {
            width: w as usize,
            height: h as usize,
        },
        gray.into_raw(),
    ))
}

/// PNG bytes of an 8-bit grayscale raster.
pub fn encode_gray_png(width: usize, height: usize, values: &[u8]) -> Result<Vec<u8>> {
    let img = GrayImage::from_raw(width as u32, height as u32, values.to_vec())
        .ok_or_else(|| Error::InvalidInput("mask size does not match its geometry".into()))?;
    let mut out = std::io::Cursor::new(Vec::new());
    img.write_to(&mut out, ImageFormat::Png)?;
    Ok(out.into_inner())
}

/// Writes an 8-bit grayscale mask; the format follows the file extension.
pub fn save_mask(path: &Path, width: usize, height: usize, values: &[u8]) -> Result<()> {
    let img = GrayImage::from_raw(width as u32, height as u32, values.to_vec())
        .ok_or_else(|| Error::InvalidInput("mask size does not match its geometry".into()))?;
    img.save(path)?;
    Ok(())
}

fn scaled_size(len: usize, factor: f64) -> usize {
    ((len as f64 / factor).round() as usize).max(1)
}

/// Downscale factor bringing the longest side to at most `max_side`.
pub fn factor_for_max_side(grid: Grid, max_side: usize) -> f64 {
    let longest = grid.width.max(grid.height) as f64;
    (longest / max_side.max(1) as f64).max(1.0)
}

/// Area-average downscale by `factor` (>= 1). Each output pixel averages the
/// source area it covers, weighting partially covered pixels by overlap.
pub fn downscale_area(image: &RgbImage, factor: f64) -> Result<RgbImage> {
    if factor.is_nan() || factor < 1.0 {
        return Err(Error::InvalidParameter(format!(
            "downscale factor {factor} must be >= 1"
        )));
    }
    let (w, h) = (image.width(), image.height());
    let (nw, nh) = (scaled_size(w, factor), scaled_size(h, factor));
    let (sx, sy) = (w as f64 / nw as f64, h as f64 / nh as f64);
    let spans = |len: usize, scale: f64, i: usize| -> Vec<(usize, f64)> {
        let (a, b) = (i as f64 * scale, (i + 1) as f64 * scale);
        (a.floor() as usize..(b.ceil() as usize).min(len))
            .map(|s| (s, (b.min(s as f64 + 1.0) - a.max(s as f64)).max(0.0)))
            .filter(|&(_, wt)| wt > 0.0)
            .collect()
    };
    let xs: Vec<_> = (0..nw).map(|x| spans(w, sx, x)).collect();
    let ys: Vec<_> = (0..nh).map(|y| spans(h, sy, y)).collect();
    RgbImage::from_fn(nw, nh, |x, y| {
        let mut acc = [0.0f64; 3];
        let mut total = 0.0;
        for &(py, wy) in &ys[y] {
            for &(px, wx) in &xs[x] {
                let wt = wx * wy;
                let p = image.pixel(px, py);
                for c in 0..3 {
                    acc[c] += wt * f64::from(p[c]);
                }
                total += wt;
            }
        }
        acc.map(|v| (v / total).round().clamp(0.0, 255.0) as u8)
    })
}

/// Nearest-neighbor downscale of a label raster, preserving its values.
pub fn downscale_nearest(grid: Grid, values: &[u8], factor: f64) -> Result<(Grid, Vec<u8>)> {
    if factor.is_nan() || factor < 1.0 {
        return Err(Error::InvalidParameter(format!(
            "downscale factor {factor} must be >= 1"
        )));
    }
    let (nw, nh) = (scaled_size(grid.width, factor), scaled_size(grid.height, factor));
    let (sx, sy) = (grid.width as f64 / nw as f64, grid.height as f64 / nh as f64);
    let mut out = Vec::with_capacity(nw * nh);
    for y in 0..nh {
        let py = (((y as f64 + 0.5) * sy) as usize).min(grid.height - 1);
        for x in 0..nw {
            let px = (((x as f64 + 0.5) * sx) as usize).min(grid.width - 1);
            out.push(values[py * grid.width + px]);
        }
    }
    Ok((Grid { width: nw, height: nh }, out))
}

/// Image, trimap and optional ground truth of one dataset entry, after an
/// optional downscale.
#[derive(Debug, Clone)]
pub struct Sample {
    pub image: RgbImage,
    pub trimap: LabelMap,
    pub truth: Option<GroundTruth>,
}

impl Sample {
    pub fn load(image: &Path, trimap: &Path, truth: Option<&Path>, downscale: Option<f64>) -> Result<Self> {
        let img = load_image(image)?;
        let (tgrid, tvals) = load_gray(trimap)?;
        let truth_raw = truth.map(load_gray).transpose()?;
        if tgrid != img.grid() {
            return Err(Error::InvalidInput(format!(
                "trimap {} is {}x{} but image is {}x{}",
                trimap.display(),
                tgrid.width,
                tgrid.height,
                img.width(),
                img.height()
            )));
        }
        if let Some((g, _)) = &truth_raw {
            if *g != img.grid() {
                return Err(Error::InvalidInput("ground truth and image sizes differ".into()));
            }
        }
        let factor = downscale.unwrap_or(1.0);
        let (img, (tgrid, tvals), truth_raw) = if factor > 1.0 {
            (
                downscale_area(&img, factor)?,
                downscale_nearest(tgrid, &tvals, factor)?,
                truth_raw.map(|(g, v)| downscale_nearest(g, &v, factor)).transpose()?,
            )
        } else {
            (img, (tgrid, tvals), truth_raw)
        };
        let trimap_map = trimap_from_gray(tgrid.width, tgrid.height, &tvals)
            .map_err(|e| Error::Format(format!("{}: {e}", trimap.display())))?;
        let truth = truth_raw
            .map(|(g, v)| GroundTruth::from_gray(g.width, g.height, &v))
            .transpose()?;
        Ok(Self {
            image: img,
            trimap: trimap_map,
            truth,
        })
    }
}

/// Paths of the dataset entry `name` in `dir`.
pub fn locate(dir: &Path, name: &str) -> Result<(PathBuf, PathBuf, Option<PathBuf>)> {
    let find = |stem: &str| {
        EXTENSIONS
            .iter()
            .map(|ext| dir.join(format!("{stem}.{ext}")))
            .find(|p| p.exists())
    };
    let missing = |what: String| {
        Error::io(
            dir.join(&what),
            std::io::Error::new(std::io::ErrorKind::NotFound, "dataset file not found"),
        )
    };
    let image = find(name).ok_or_else(|| missing(format!("{name}.png")))?;
    let trimap = find(&format!("{name}-trimap")).ok_or_else(|| missing(format!("{name}-trimap.png")))?;
    Ok((image, trimap, find(&format!("{name}-gt"))))
}
