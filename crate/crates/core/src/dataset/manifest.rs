//! Canonical JSON manifest serialization.
//!
//! One JSON document holds the whole dataset's metadata. Canonical form:
//! keys in schema order, compact separators, floats with exactly six
//! decimal places, newline-terminated. Saving a loaded manifest reproduces
//! it byte for byte, which makes manifests diffable and content-addressable.

use serde::Serialize;
use serde_json::Value;

use super::{AnnotatedImage, DatasetError, DatasetManifest, GroundTruth, Split};
use crate::geometry::{BBox, ImageDims, Orientation};

#[derive(Serialize)]
struct TruthWire {
    class: u32,
    x_min: f64,
    y_min: f64,
    x_max: f64,
    y_max: f64,
}

#[derive(Serialize)]
struct ImageWire<'a> {
    id: &'a str,
    path: &'a str,
    width: u32,
    height: u32,
    orientation: u8,
    truths: Vec<TruthWire>,
    #[serde(skip_serializing_if = "Option::is_none")]
    split: Option<&'static str>,
}

#[derive(Serialize)]
struct ManifestWire<'a> {
    name: &'a str,
    classes: &'a [String],
    images: Vec<ImageWire<'a>>,
}

/// Compact JSON formatter that renders every float with six decimal places,
/// matching the toolkit-wide serialization precision for coordinates.
struct CanonicalFormatter;

impl serde_json::ser::Formatter for CanonicalFormatter {
    fn write_f64<W>(&mut self, writer: &mut W, value: f64) -> std::io::Result<()>
    where
        W: ?Sized + std::io::Write,
    {
        write!(writer, "{value:.6}")
    }
}

/// Serializes a manifest to its canonical textual form.
///
/// The manifest is validated first so no invalid dataset can be persisted.
pub fn save_manifest(manifest: &DatasetManifest) -> Result<String, DatasetError> {
    manifest.validate()?;
    let wire = ManifestWire {
        name: &manifest.name,
        classes: &manifest.classes,
        images: manifest
            .images
            .iter()
            .map(|image| ImageWire {
                id: &image.image_id,
                path: &image.path,
                width: image.dims.width(),
                height: image.dims.height(),
                orientation: image.orientation.code(),
                truths: image
                    .truths
                    .iter()
                    .map(|t| TruthWire {
                        class: t.class_id,
                        x_min: t.bbox.x_min(),
                        y_min: t.bbox.y_min(),
                        x_max: t.bbox.x_max(),
                        y_max: t.bbox.y_max(),
                    })
                    .collect(),
                split: image.split.map(|s| s.as_str()),
            })
            .collect(),
    };
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, CanonicalFormatter);
    wire.serialize(&mut ser).expect("in-memory serialization");
    buf.push(b'\n');
    Ok(String::from_utf8(buf).expect("serde_json emits UTF-8"))
}

/// Parses manifest text, reporting schema violations with the path of the
/// offending field.
///
/// In strict mode unknown fields are rejected; with `strict = false` they
/// are ignored, which tolerates manifests written by newer tool versions.
pub fn load_manifest(text: &str, strict: bool) -> Result<DatasetManifest, DatasetError> {
    let root: Value = serde_json::from_str(text).map_err(|e| DatasetError::Schema {
        path: "$".into(),
        message: format!("invalid JSON: {e}"),
    })?;
    let ctx = Walker { strict };
    let manifest = ctx.manifest(&root)?;
    manifest.validate()?;
    Ok(manifest)
}

struct Walker {
    strict: bool,
}

impl Walker {
    fn manifest(&self, root: &Value) -> Result<DatasetManifest, DatasetError> {
        let obj = as_object(root, "$")?;
        self.check_keys(obj, "$", &["name", "classes", "images"])?;
        let name = as_str(require(obj, "$", "name")?, "$.name")?.to_string();
        let classes = as_array(require(obj, "$", "classes")?, "$.classes")?
            .iter()
            .enumerate()
            .map(|(i, v)| Ok(as_str(v, &format!("$.classes[{i}]"))?.to_string()))
            .collect::<Result<Vec<_>, DatasetError>>()?;
        let images = as_array(require(obj, "$", "images")?, "$.images")?
            .iter()
            .enumerate()
            .map(|(i, v)| self.image(v, &format!("$.images[{i}]")))
            .collect::<Result<Vec<_>, DatasetError>>()?;
        Ok(DatasetManifest {
            name,
            classes,
            images,
        })
    }

    fn image(&self, value: &Value, path: &str) -> Result<AnnotatedImage, DatasetError> {
        let obj = as_object(value, path)?;
        self.check_keys(
            obj,
            path,
            &[
                "id",
                "path",
                "width",
                "height",
                "orientation",
                "truths",
                "split",
            ],
        )?;
        let image_id = as_str(require(obj, path, "id")?, &field(path, "id"))?.to_string();
        let rel_path = as_str(require(obj, path, "path")?, &field(path, "path"))?.to_string();
        let width = as_u32(require(obj, path, "width")?, &field(path, "width"))?;
        let height = as_u32(require(obj, path, "height")?, &field(path, "height"))?;
        let dims = ImageDims::new(width, height).map_err(|e| DatasetError::Schema {
            path: field(path, "width"),
            message: e.to_string(),
        })?;
        let code = as_u32(
            require(obj, path, "orientation")?,
            &field(path, "orientation"),
        )?;
        let orientation = u8::try_from(code)
            .ok()
            .and_then(|c| Orientation::from_code(c).ok())
            .ok_or_else(|| DatasetError::Schema {
                path: field(path, "orientation"),
                message: format!("orientation {code} outside 1..=8"),
            })?;
        let truths = as_array(require(obj, path, "truths")?, &field(path, "truths"))?
            .iter()
            .enumerate()
            .map(|(i, v)| self.truth(v, &format!("{path}.truths[{i}]")))
            .collect::<Result<Vec<_>, DatasetError>>()?;
        let split = match obj.get("split") {
            None => None,
            Some(v) => {
                let s = as_str(v, &field(path, "split"))?;
                Some(Split::parse(s).ok_or_else(|| DatasetError::Schema {
                    path: field(path, "split"),
                    message: format!("unknown split tag \"{s}\""),
                })?)
            }
        };
        Ok(AnnotatedImage {
            image_id,
            path: rel_path,
            dims,
            orientation,
            truths,
            split,
        })
    }

    fn truth(&self, value: &Value, path: &str) -> Result<GroundTruth, DatasetError> {
        let obj = as_object(value, path)?;
        self.check_keys(obj, path, &["class", "x_min", "y_min", "x_max", "y_max"])?;
        let class_id = as_u32(require(obj, path, "class")?, &field(path, "class"))?;
        let mut coords = [0f64; 4];
        for (slot, key) in coords.iter_mut().zip(["x_min", "y_min", "x_max", "y_max"]) {
            *slot = as_f64(require(obj, path, key)?, &field(path, key))?;
        }
        let bbox = BBox::new_clamped(coords[0], coords[1], coords[2], coords[3]).map_err(|e| {
            DatasetError::Schema {
                path: path.to_string(),
                message: e.to_string(),
            }
        })?;
        Ok(GroundTruth { bbox, class_id })
    }

    fn check_keys(
        &self,
        obj: &serde_json::Map<String, Value>,
        path: &str,
        known: &[&str],
    ) -> Result<(), DatasetError> {
        if !self.strict {
            return Ok(());
        }
        for key in obj.keys() {
            if !known.contains(&key.as_str()) {
                return Err(DatasetError::Schema {
                    path: field(path, key),
                    message: "unknown field (strict mode)".into(),
                });
            }
        }
        Ok(())
    }
}

fn field(path: &str, key: &str) -> String {
    format!("{path}.{key}")
}

fn require<'a>(
    obj: &'a serde_json::Map<String, Value>,
    path: &str,
    key: &str,
) -> Result<&'a Value, DatasetError> {
    obj.get(key).ok_or_else(|| DatasetError::Schema {
        path: field(path, key),
        message: "missing required field".into(),
    })
}

fn as_object<'a>(
    value: &'a Value,
    path: &str,
) -> Result<&'a serde_json::Map<String, Value>, DatasetError> {
    value.as_object().ok_or_else(|| DatasetError::Schema {
        path: path.to_string(),
        message: "expected an object".into(),
    })
}

fn as_array<'a>(value: &'a Value, path: &str) -> Result<&'a Vec<Value>, DatasetError> {
    value.as_array().ok_or_else(|| DatasetError::Schema {
        path: path.to_string(),
        message: "expected an array".into(),
    })
}

fn as_str<'a>(value: &'a Value, path: &str) -> Result<&'a str, DatasetError> {
    value.as_str().ok_or_else(|| DatasetError::Schema {
        path: path.to_string(),
        message: "expected a string".into(),
    })
}

fn as_u32(value: &Value, path: &str) -> Result<u32, DatasetError> {
    value
        .as_u64()
        .and_then(|v| u32::try_from(v).ok())
        .ok_or_else(|| DatasetError::Schema {
            path: path.to_string(),
            message: "expected a nonnegative integer".into(),
        })
}

fn as_f64(value: &Value, path: &str) -> Result<f64, DatasetError> {
    value.as_f64().ok_or_else(|| DatasetError::Schema {
        path: path.to_string(),
        message: "expected a number".into(),
    })
}
