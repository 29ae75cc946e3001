//! File formats: 8-bit grayscale PGM (P5) / PNG frames and TOML records
//! for segmentations and phantom truth. All writes go through a temporary
//! file in the destination directory followed by a rename.

use crate::error::{Error, Result};
use crate::phantom::PhantomTruth;
use crate::pleura::{PleuralSegmentation, TangentCurve};
use crate::types::{Curve, Frame};
use image::codecs::png::PngEncoder;
use image::codecs::pnm::{PnmEncoder, PnmSubtype, SampleEncoding};
use image::{ExtendedColorType, ImageEncoder, ImageReader};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::Path;

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.to_string()))?;
    Ok(())
}

/// Round half away from zero and clamp to `[0, 255]`.
pub fn quantize(frame: &Frame) -> Vec<u8> {
    frame.pixels().iter().map(|&v| v.round().clamp(0.0, 255.0) as u8).collect()
}

pub fn dequantize(width: usize, height: usize, bytes: &[u8]) -> Result<Frame> {
    Frame::new(width, height, bytes.iter().map(|&b| b as f64).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ImageFormat {
    Pgm,
    Png,
}

impl ImageFormat {
    pub fn from_path(path: &Path) -> ImageFormat {
        match path.extension().and_then(|e| e.to_str()).map(|e| e.to_ascii_lowercase()) {
            Some(e) if e == "png" => ImageFormat::Png,
            _ => ImageFormat::Pgm,
        }
    }

    pub fn extension(self) -> &'static str {
        match self {
            ImageFormat::Pgm => "pgm",
            ImageFormat::Png => "png",
        }
    }
}

pub fn encode_frame(frame: &Frame, format: ImageFormat) -> Result<Vec<u8>> {
    let bytes = quantize(frame);
    let (w, h) = (frame.width() as u32, frame.height() as u32);
    let mut out = Vec::new();
    let res = match format {
        ImageFormat::Pgm => PnmEncoder::new(&mut out)
            .with_subtype(PnmSubtype::Graymap(SampleEncoding::Binary))
            .write_image(&bytes, w, h, ExtendedColorType::L8),
        ImageFormat::Png => PngEncoder::new(&mut out).write_image(&bytes, w, h, ExtendedColorType::L8),
    };
    res.map_err(|e| Error::Io(e.to_string()))?;
    Ok(out)
}

/// Writes a frame as PGM or PNG depending on the extension.
pub fn write_frame(path: &Path, frame: &Frame) -> Result<()> {
    write_atomic(path, &encode_frame(frame, ImageFormat::from_path(path))?)
}

/// Reads any supported grayscale (or colour, converted to luma) image.
pub fn read_frame(path: &Path) -> Result<Frame> {
    let img = ImageReader::open(path)
        .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?
        .with_guessed_format()
        .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?
        .decode()
        .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?
        .into_luma8();
    dequantize(img.width() as usize, img.height() as usize, img.as_raw())
}

/// Image files in `dir` sorted by file name.
pub fn list_frames(dir: &Path) -> Result<Vec<std::path::PathBuf>> {
    let mut paths: Vec<_> = std::fs::read_dir(dir)
        .map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            matches!(
                p.extension().and_then(|e| e.to_str()).map(|e| e.to_ascii_lowercase()).as_deref(),
                Some("pgm" | "png")
            )
        })
        .collect();
    paths.sort();
    Ok(paths)
}

pub fn to_toml<T: Serialize>(value: &T) -> Result<String> {
    toml::to_string(value).map_err(|e| Error::Parse(e.to_string()))
}

pub fn from_toml<T: DeserializeOwned>(text: &str) -> Result<T> {
    toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))
}

pub fn read_toml<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    from_toml(&text)
}

pub fn write_toml<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_atomic(path, to_toml(value)?.as_bytes())
}

/// On-disk form of a [`PleuralSegmentation`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentationRecord {
    pub width: usize,
    pub height: usize,
    pub degree: usize,
    pub coefficients: Vec<f64>,
    pub domain: [f64; 2],
    pub tangent_extension: f64,
    pub lower_rows: Vec<f64>,
    pub upper_rows: Vec<f64>,
}

impl From<&PleuralSegmentation> for SegmentationRecord {
    fn from(seg: &PleuralSegmentation) -> Self {
        let (lo, hi) = seg.lower.curve.domain();
        Self {
            width: seg.width(),
            height: seg.height(),
            degree: seg.lower.curve.degree(),
            coefficients: seg.lower.curve.coefficients().to_vec(),
            domain: [lo, hi],
            tangent_extension: seg.lower.extension,
            lower_rows: seg.lower_rows.clone(),
            upper_rows: seg.upper_rows.clone(),
        }
    }
}

impl SegmentationRecord {
    pub fn to_segmentation(&self) -> Result<PleuralSegmentation> {
        if self.coefficients.len() != self.degree + 1 {
            return Err(Error::Parse(format!("degree {} with {} coefficients", self.degree, self.coefficients.len())));
        }
        let curve = Curve::new(self.coefficients.clone(), self.domain[0], self.domain[1])?;
        let lower = TangentCurve { curve, extension: self.tangent_extension };
        PleuralSegmentation::from_boundaries(self.width, self.height, lower, self.upper_rows.clone())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthRecord {
    pub width: usize,
    pub height: usize,
    pub severity: u8,
    pub b_line_columns: Vec<usize>,
    pub lower_rows: Vec<f64>,
    pub upper_rows: Vec<f64>,
}

impl TruthRecord {
    pub fn new(truth: &PhantomTruth) -> Self {
        Self {
            width: truth.regions.width(),
            height: truth.regions.height(),
            severity: truth.severity.value(),
            b_line_columns: truth.b_line_columns.clone(),
            lower_rows: truth.lower_rows.clone(),
            upper_rows: truth.upper_rows.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pleura::{segment_pleura, SegmentationParams};
    use proptest::prelude::*;

    #[test]
    fn pgm_header_is_p5() {
        let f = Frame::from_fn(3, 2, |x, y| (x + 10 * y) as f64);
        let bytes = encode_frame(&f, ImageFormat::Pgm).unwrap();
        assert!(bytes.starts_with(b"P5"));
        assert_eq!(&bytes[bytes.len() - 6..], &[0, 1, 2, 10, 11, 12]);
    }

    #[test]
    fn frames_round_trip_through_files() {
        let dir = tempfile::tempdir().unwrap();
        let f = Frame::from_fn(17, 9, |x, y| (x * 13 + y * 7) as f64 % 256.0);
        for name in ["a.pgm", "a.png"] {
            let p = dir.path().join(name);
            write_frame(&p, &f).unwrap();
            assert_eq!(read_frame(&p).unwrap(), f);
        }
        assert_eq!(list_frames(dir.path()).unwrap().len(), 2);
        assert!(matches!(read_frame(&dir.path().join("missing.pgm")), Err(Error::Io(_))));
    }

    #[test]
    fn segmentation_record_round_trip() {
        let f = Frame::from_fn(64, 48, |_, y| if (20..24).contains(&y) { 220.0 } else { 20.0 });
        let seg = segment_pleura(&f, &SegmentationParams { work_size: 32, ..Default::default() }).unwrap();
        let rec = SegmentationRecord::from(&seg);
        let text = to_toml(&rec).unwrap();
        let back: SegmentationRecord = from_toml(&text).unwrap();
        assert_eq!(back, rec);
        let seg2 = back.to_segmentation().unwrap();
        assert_eq!(seg2.lower_rows, seg.lower_rows);
        assert_eq!(seg2.upper_rows, seg.upper_rows);
        assert_eq!(seg2.band, seg.band);
    }

    proptest! {
        #[test]
        fn quantized_frames_survive_pgm(bytes in prop::collection::vec(any::<u8>(), 35)) {
            let f = dequantize(7, 5, &bytes).unwrap();
            let enc = encode_frame(&f, ImageFormat::Pgm).unwrap();
            let img = image::load_from_memory(&enc).unwrap().into_luma8();
            prop_assert_eq!(img.as_raw(), &bytes);
        }
    }
}
