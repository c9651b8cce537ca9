//! Reading and writing COCO-style files.
//!
//! Readers ignore fields they do not know; writers emit only the fields the
//! toolkit produces. Schema errors carry the JSON path of the offending
//! field and its line and column.

mod polygon;
mod rle_string;
mod stats;

pub use polygon::{polygon_area, rasterize_polygon, rasterize_polygons};
pub use rle_string::{rle_string_decode, rle_string_encode};
pub use stats::{median_sqrt_area, sample_boxes, size_histogram, Histogram};

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evalmap::GroundTruthInstance;
use crate::fusion::Detection;
use crate::mask::{rle_encode, BBox, RleMask, ScoreField};

/// `[x, y, w, h]` arrays as used by COCO.
mod coco_bbox {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    use crate::mask::BBox;

    pub fn serialize<S: Serializer>(b: &BBox, s: S) -> Result<S::Ok, S::Error> {
        b.as_array().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BBox, D::Error> {
        let [x, y, w, h] = <[f64; 4]>::deserialize(d)?;
        BBox::new(x, y, w, h).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageInfo {
    pub id: u64,
    pub width: usize,
    pub height: usize,
    #[serde(default)]
    pub file_name: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Category {
    pub id: u64,
    #[serde(default)]
    pub name: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RleCounts {
    Compressed(String),
    Uncompressed(Vec<u32>),
}

/// RLE segmentation object; `size` is `[height, width]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RleJson {
    pub size: [usize; 2],
    pub counts: RleCounts,
}

impl RleJson {
    pub fn from_mask(rle: &RleMask) -> Self {
        Self {
            size: [rle.height(), rle.width()],
            counts: RleCounts::Compressed(rle_string_encode(rle)),
        }
    }

    pub fn to_mask(&self) -> Result<RleMask> {
        let [height, width] = self.size;
        match &self.counts {
            RleCounts::Compressed(s) => rle_string_decode(s, width, height),
            RleCounts::Uncompressed(c) => RleMask::new(width, height, c.clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Segmentation {
    /// Flat `[x0, y0, x1, y1, ...]` vertex lists.
    Polygons(Vec<Vec<f64>>),
    Rle(RleJson),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Annotation {
    pub id: u64,
    pub image_id: u64,
    pub category_id: u64,
    pub segmentation: Segmentation,
    #[serde(default)]
    pub area: f64,
    #[serde(with = "coco_bbox")]
    pub bbox: BBox,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetFile {
    pub images: Vec<ImageInfo>,
    pub annotations: Vec<Annotation>,
    pub categories: Vec<Category>,
}

impl DatasetFile {
    pub fn image(&self, id: u64) -> Option<&ImageInfo> {
        self.images.iter().find(|im| im.id == id)
    }

    /// Annotations whose box sticks out of their image.
    pub fn bbox_warnings(&self) -> Vec<String> {
        self.annotations
            .iter()
            .filter_map(|a| {
                let im = self.image(a.image_id)?;
                let b = a.bbox;
                let outside = b.x < 0.0
                    || b.y < 0.0
                    || b.x + b.w > im.width as f64
                    || b.y + b.h > im.height as f64;
                outside.then(|| format!("annotation {}: bbox exceeds image {} bounds", a.id, im.id))
            })
            .collect()
    }

    /// Decodes every annotation into a ground-truth instance with an RLE mask
    /// at its image's resolution.
    pub fn ground_truth(&self) -> Result<Vec<GroundTruthInstance>> {
        self.annotations
            .iter()
            .map(|a| {
                let im = self.image(a.image_id).ok_or_else(|| Error::UnresolvedId {
                    path: PathBuf::new(),
                    what: "image",
                    id: a.image_id,
                })?;
                let mask = match &a.segmentation {
                    Segmentation::Polygons(polys) => {
                        let polys: Vec<Vec<(f64, f64)>> = polys
                            .iter()
                            .map(|flat| flat.chunks_exact(2).map(|p| (p[0], p[1])).collect())
                            .collect();
                        rle_encode(&rasterize_polygons(&polys, im.width, im.height)?)
                    }
                    Segmentation::Rle(r) => {
                        let m = r.to_mask()?;
                        if m.width() != im.width || m.height() != im.height {
                            return Err(Error::DimensionMismatch {
                                left_w: m.width(),
                                left_h: m.height(),
                                right_w: im.width,
                                right_h: im.height,
                            });
                        }
                        m
                    }
                };
                Ok(GroundTruthInstance::new(a.image_id, a.category_id, mask, a.bbox))
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ResultEntry {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    id: Option<u64>,
    image_id: u64,
    category_id: u64,
    score: f64,
    #[serde(with = "coco_bbox")]
    bbox: BBox,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    segmentation: Option<RleJson>,
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write(path: &Path, contents: &[u8]) -> Result<()> {
    fs::write(path, contents).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn parse<T: DeserializeOwned>(path: &Path, text: &str) -> Result<T> {
    let mut de = serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let field = e.path().to_string();
        let inner = e.into_inner();
        Error::Schema {
            path: path.to_path_buf(),
            field,
            message: inner.to_string(),
            line: inner.line(),
            column: inner.column(),
        }
    })
}

fn invalid(path: &Path, field: String, message: String) -> Error {
    Error::Schema {
        path: path.to_path_buf(),
        field,
        message,
        line: 0,
        column: 0,
    }
}

pub fn parse_dataset(path: &Path, text: &str) -> Result<DatasetFile> {
    let data: DatasetFile = parse(path, text)?;
    let images: HashSet<u64> = data.images.iter().map(|im| im.id).collect();
    let categories: HashSet<u64> = data.categories.iter().map(|c| c.id).collect();
    for a in &data.annotations {
        if !images.contains(&a.image_id) {
            return Err(Error::UnresolvedId {
                path: path.to_path_buf(),
                what: "image_id",
                id: a.image_id,
            });
        }
        if !categories.contains(&a.category_id) {
            return Err(Error::UnresolvedId {
                path: path.to_path_buf(),
                what: "category_id",
                id: a.category_id,
            });
        }
    }
    Ok(data)
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<DatasetFile> {
    let path = path.as_ref();
    parse_dataset(path, &read(path)?)
}

pub fn parse_results(path: &Path, text: &str) -> Result<Vec<Detection>> {
    let entries: Vec<ResultEntry> = parse(path, text)?;
    entries
        .into_iter()
        .enumerate()
        .map(|(i, e)| {
            if !(0.0..=1.0).contains(&e.score) {
                return Err(invalid(path, format!("[{i}].score"), format!("score {} outside [0, 1]", e.score)));
            }
            let mask = e
                .segmentation
                .as_ref()
                .map(RleJson::to_mask)
                .transpose()
                .map_err(|err| invalid(path, format!("[{i}].segmentation"), err.to_string()))?;
            Ok(Detection {
                id: e.id,
                image_id: e.image_id,
                category_id: e.category_id,
                score: e.score,
                bbox: e.bbox,
                mask,
                source_model: String::new(),
            })
        })
        .collect()
}

pub fn load_results(path: impl AsRef<Path>) -> Result<Vec<Detection>> {
    let path = path.as_ref();
    parse_results(path, &read(path)?)
}

/// COCO results JSON for `dets`; masks are written as compressed RLE.
pub fn results_to_json(dets: &[Detection]) -> Result<String> {
    let entries: Vec<ResultEntry> = dets
        .iter()
        .map(|d| ResultEntry {
            id: d.id,
            image_id: d.image_id,
            category_id: d.category_id,
            score: d.score,
            bbox: d.bbox,
            segmentation: d.mask.as_ref().map(RleJson::from_mask),
        })
        .collect();
    serde_json::to_string_pretty(&entries).map_err(|e| Error::Serialize(e.to_string()))
}

pub fn write_results(path: impl AsRef<Path>, dets: &[Detection]) -> Result<()> {
    let mut text = results_to_json(dets)?;
    text.push('\n');
    write(path.as_ref(), text.as_bytes())
}

/// One instance's coarse logit grid, the input of rendering runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldRecord {
    pub image_id: u64,
    pub category_id: u64,
    #[serde(default = "one")]
    pub score: f64,
    #[serde(with = "coco_bbox")]
    pub bbox: BBox,
    pub width: usize,
    pub height: usize,
    /// Row-major logits.
    pub logits: Vec<f64>,
}

fn one() -> f64 {
    1.0
}

impl FieldRecord {
    pub fn field(&self) -> Result<ScoreField> {
        ScoreField::new(self.width, self.height, self.logits.clone())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldsFile {
    pub instances: Vec<FieldRecord>,
}

pub fn load_fields(path: impl AsRef<Path>) -> Result<FieldsFile> {
    let path = path.as_ref();
    let file: FieldsFile = parse(path, &read(path)?)?;
    for (i, rec) in file.instances.iter().enumerate() {
        rec.field()
            .map_err(|e| invalid(path, format!("instances[{i}]"), e.to_string()))?;
    }
    Ok(file)
}

pub fn write_fields(path: impl AsRef<Path>, file: &FieldsFile) -> Result<()> {
    let text = serde_json::to_string(file).map_err(|e| Error::Serialize(e.to_string()))?;
    write(path.as_ref(), text.as_bytes())
}
