//! Handcrafted texture descriptors for RGB histology tiles: threshold
//! adjacency statistics and grey-level co-occurrence (Haralick) features.

mod corpus;
mod glcm;
mod pftas;

use std::path::Path;

use crate::error::{Error, Result};

pub use corpus::{extract_corpus, CorpusExtraction, ExtractionFailure, HANDCRAFTED_VIEW};
pub use glcm::{
    cooccurrence, glcm_extract, glcm_feature_names, glcm_features_from_levels, haralick_features,
    quantize_gray, GlcmParams, DIRECTIONS, HARALICK_NAMES, N_HARALICK,
};
pub use pftas::{otsu_threshold, pftas_extract, pftas_feature_names, PFTAS_LEN};

pub const MIN_IMAGE_SIDE: usize = 16;

/// 8-bit RGB image, row-major, three interleaved channels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbImage {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

impl RgbImage {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self> {
        if width < MIN_IMAGE_SIDE || height < MIN_IMAGE_SIDE {
            return Err(Error::Parameter(format!(
                "image is {width}x{height}, both sides must be at least {MIN_IMAGE_SIDE}"
            )));
        }
        if pixels.len() != width * height * 3 {
            return Err(Error::DimensionMismatch {
                expected: width * height * 3,
                actual: pixels.len(),
            });
        }
        Ok(RgbImage {
            width,
            height,
            pixels,
        })
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> [u8; 3],
    ) -> Result<Self> {
        let mut pixels = Vec::with_capacity(width * height * 3);
        for r in 0..height {
            for c in 0..width {
                pixels.extend_from_slice(&f(r, c));
            }
        }
        RgbImage::new(width, height, pixels)
    }

    /// Decodes a PNG or TIFF file. Grey or alpha images are converted to RGB.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let decoded = image::ImageReader::open(path)
            .map_err(|e| Error::io(path, e))?
            .with_guessed_format()
            .map_err(|e| Error::io(path, e))?
            .decode()
            .map_err(|e| Error::Image {
                path: path.to_path_buf(),
                message: e.to_string(),
            })?;
        let rgb = decoded.to_rgb8();
        let (w, h) = rgb.dimensions();
        RgbImage::new(w as usize, h as usize, rgb.into_raw()).map_err(|e| Error::Image {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixel(&self, row: usize, col: usize) -> [u8; 3] {
        let i = (row * self.width + col) * 3;
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]]
    }

    /// One channel (0 = R, 1 = G, 2 = B), row-major.
    pub fn channel(&self, c: usize) -> Vec<u8> {
        self.pixels.iter().skip(c).step_by(3).copied().collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TextureFeatures {
    pub pftas: Vec<f64>,
    pub glcm: Vec<f64>,
}

impl TextureFeatures {
    pub fn extract(image: &RgbImage, params: &GlcmParams) -> Result<Self> {
        Ok(TextureFeatures {
            pftas: pftas_extract(image),
            glcm: glcm_extract(image, &params.distances, params.levels)?,
        })
    }

    /// PFTAS values followed by GLCM values.
    pub fn combined(&self) -> Vec<f64> {
        self.pftas.iter().chain(&self.glcm).copied().collect()
    }
}

/// Column names matching [`TextureFeatures::combined`].
pub fn texture_feature_names(params: &GlcmParams) -> Vec<String> {
    let mut names = pftas_feature_names();
    names.extend(glcm_feature_names(&params.distances));
    names
}
