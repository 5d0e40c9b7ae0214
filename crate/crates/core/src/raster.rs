//! In-memory RGB rasters and the image-IO boundary.
//!
//! The pipeline's native interchange format is binary PPM (P6, maxval 255):
//! uncompressed, byte-exact, and trivial to fixture in tests. JPEG and PNG
//! decode/encode sit behind the same boundary via the `image` crate so real
//! camera data can flow through unchanged.

use std::io::Read;
use std::path::Path;

use thiserror::Error;

use crate::geometry::{GeometryError, ImageDims};

#[derive(Debug, Error)]
pub enum RasterError {
    #[error("raster buffer holds {got} bytes but {dims} needs {need}")]
    BufferSize {
        dims: ImageDims,
        need: usize,
        got: usize,
    },
    #[error("invalid PPM: {0}")]
    Ppm(String),
    #[error("unsupported image format \"{0}\" (expected ppm, png, jpg, or jpeg)")]
    UnsupportedFormat(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Decode { path: String, message: String },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Row-major RGB image, 8 bits per channel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Raster {
    dims: ImageDims,
    pixels: Vec<u8>,
}

impl Raster {
    pub fn new(dims: ImageDims, pixels: Vec<u8>) -> Result<Self, RasterError> {
        let need = dims.pixel_count() * 3;
        if pixels.len() != need {
            return Err(RasterError::BufferSize {
                dims,
                need,
                got: pixels.len(),
            });
        }
        Ok(Self { dims, pixels })
    }

    /// Builds a raster by evaluating `f` at every (x, y).
    pub fn from_fn(dims: ImageDims, mut f: impl FnMut(u32, u32) -> [u8; 3]) -> Self {
        let mut pixels = Vec::with_capacity(dims.pixel_count() * 3);
        for y in 0..dims.height() {
            for x in 0..dims.width() {
                pixels.extend_from_slice(&f(x, y));
            }
        }
        Self { dims, pixels }
    }

    /// Solid-color raster.
    pub fn filled(dims: ImageDims, rgb: [u8; 3]) -> Self {
        Self::from_fn(dims, |_, _| rgb)
    }

    pub fn dims(&self) -> ImageDims {
        self.dims
    }

    pub fn width(&self) -> u32 {
        self.dims.width()
    }

    pub fn height(&self) -> u32 {
        self.dims.height()
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    fn offset(&self, x: u32, y: u32) -> usize {
        debug_assert!(x < self.width() && y < self.height());
        (y as usize * self.width() as usize + x as usize) * 3
    }

    pub fn get(&self, x: u32, y: u32) -> [u8; 3] {
        let o = self.offset(x, y);
        [self.pixels[o], self.pixels[o + 1], self.pixels[o + 2]]
    }

    pub fn set(&mut self, x: u32, y: u32, rgb: [u8; 3]) {
        let o = self.offset(x, y);
        self.pixels[o..o + 3].copy_from_slice(&rgb);
    }

    /// Applies `f` to every channel value.
    pub fn map_channels(&self, mut f: impl FnMut(u8) -> u8) -> Self {
        Self {
            dims: self.dims,
            pixels: self.pixels.iter().map(|&c| f(c)).collect(),
        }
    }

    /// Applies `f` to every pixel.
    pub fn map_pixels(&self, mut f: impl FnMut([u8; 3]) -> [u8; 3]) -> Self {
        let mut pixels = Vec::with_capacity(self.pixels.len());
        for rgb in self.pixels.chunks_exact(3) {
            pixels.extend_from_slice(&f([rgb[0], rgb[1], rgb[2]]));
        }
        Self {
            dims: self.dims,
            pixels,
        }
    }

    /// Encodes as binary PPM (P6, maxval 255).
    pub fn encode_ppm(&self) -> Vec<u8> {
        let header = format!("P6\n{} {}\n255\n", self.width(), self.height());
        let mut out = Vec::with_capacity(header.len() + self.pixels.len());
        out.extend_from_slice(header.as_bytes());
        out.extend_from_slice(&self.pixels);
        out
    }

    /// Decodes a binary PPM (P6), maxval 255 only.
    pub fn decode_ppm(bytes: &[u8]) -> Result<Self, RasterError> {
        let mut cursor = 0usize;
        let magic = take_token(bytes, &mut cursor).ok_or_else(|| bad_ppm("missing magic"))?;
        if magic != b"P6" {
            return Err(bad_ppm("not a P6 file"));
        }
        let width: u32 = parse_token(bytes, &mut cursor, "width")?;
        let height: u32 = parse_token(bytes, &mut cursor, "height")?;
        let maxval: u32 = parse_token(bytes, &mut cursor, "maxval")?;
        if maxval != 255 {
            return Err(bad_ppm("only maxval 255 is supported"));
        }
        // Exactly one whitespace byte separates the header from pixel data.
        cursor += 1;
        let dims = ImageDims::new(width, height)?;
        let need = dims.pixel_count() * 3;
        let data = bytes
            .get(cursor..cursor + need)
            .ok_or_else(|| bad_ppm("truncated pixel data"))?;
        Raster::new(dims, data.to_vec())
    }
}

fn bad_ppm(message: &str) -> RasterError {
    RasterError::Ppm(message.to_string())
}

fn take_token<'a>(bytes: &'a [u8], cursor: &mut usize) -> Option<&'a [u8]> {
    while *cursor < bytes.len() {
        match bytes[*cursor] {
            b' ' | b'\t' | b'\r' | b'\n' => *cursor += 1,
            b'#' => {
                while *cursor < bytes.len() && bytes[*cursor] != b'\n' {
                    *cursor += 1;
                }
            }
            _ => break,
        }
    }
    let start = *cursor;
    while *cursor < bytes.len() && !bytes[*cursor].is_ascii_whitespace() {
        *cursor += 1;
    }
    (*cursor > start).then(|| &bytes[start..*cursor])
}

fn parse_token(bytes: &[u8], cursor: &mut usize, what: &str) -> Result<u32, RasterError> {
    let token = take_token(bytes, cursor).ok_or_else(|| bad_ppm(&format!("missing {what}")))?;
    std::str::from_utf8(token)
        .ok()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| bad_ppm(&format!("invalid {what}")))
}

fn extension_of(path: &Path) -> String {
    path.extension()
        .and_then(|e| e.to_str())
        .unwrap_or_default()
        .to_ascii_lowercase()
}

fn io_err(path: &Path, source: std::io::Error) -> RasterError {
    RasterError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Reads a raster from disk, dispatching on the file extension.
pub fn read_raster(path: &Path) -> Result<Raster, RasterError> {
    match extension_of(path).as_str() {
        "ppm" => {
            let bytes = std::fs::read(path).map_err(|e| io_err(path, e))?;
            Raster::decode_ppm(&bytes).map_err(|e| RasterError::Decode {
                path: path.display().to_string(),
                message: e.to_string(),
            })
        }
        "png" | "jpg" | "jpeg" => {
            let dynamic = image::open(path).map_err(|e| RasterError::Decode {
                path: path.display().to_string(),
                message: e.to_string(),
            })?;
            let rgb = dynamic.into_rgb8();
            let dims = ImageDims::new(rgb.width(), rgb.height())?;
            Raster::new(dims, rgb.into_raw())
        }
        other => Err(RasterError::UnsupportedFormat(other.to_string())),
    }
}

/// Writes a raster to disk, dispatching on the file extension.
pub fn write_raster(path: &Path, raster: &Raster) -> Result<(), RasterError> {
    match extension_of(path).as_str() {
        "ppm" => std::fs::write(path, raster.encode_ppm()).map_err(|e| io_err(path, e)),
        "png" | "jpg" | "jpeg" => image::save_buffer(
            path,
            raster.pixels(),
            raster.width(),
            raster.height(),
            image::ColorType::Rgb8,
        )
        .map_err(|e| RasterError::Decode {
            path: path.display().to_string(),
            message: e.to_string(),
        }),
        other => Err(RasterError::UnsupportedFormat(other.to_string())),
    }
}

/// Reads just the dimensions of an image file, without decoding pixel data
/// for the formats where that is possible.
pub fn read_dims(path: &Path) -> Result<ImageDims, RasterError> {
    match extension_of(path).as_str() {
        "ppm" => {
            // Enough for any realistic header, comments included.
            let mut header = [0u8; 512];
            let mut file = std::fs::File::open(path).map_err(|e| io_err(path, e))?;
            let n = file.read(&mut header).map_err(|e| io_err(path, e))?;
            let bytes = &header[..n];
            let mut cursor = 0usize;
            let magic = take_token(bytes, &mut cursor).ok_or_else(|| bad_ppm("missing magic"))?;
            if magic != b"P6" {
                return Err(bad_ppm("not a P6 file"));
            }
            let width = parse_token(bytes, &mut cursor, "width")?;
            let height = parse_token(bytes, &mut cursor, "height")?;
            Ok(ImageDims::new(width, height)?)
        }
        "png" | "jpg" | "jpeg" => {
            let (w, h) = image::image_dimensions(path).map_err(|e| RasterError::Decode {
                path: path.display().to_string(),
                message: e.to_string(),
            })?;
            Ok(ImageDims::new(w, h)?)
        }
        other => Err(RasterError::UnsupportedFormat(other.to_string())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dims(w: u32, h: u32) -> ImageDims {
        ImageDims::new(w, h).unwrap()
    }

    #[test]
    fn ppm_round_trip_is_exact() {
        let r = Raster::from_fn(dims(3, 2), |x, y| [x as u8 * 10, y as u8 * 10, 7]);
        let encoded = r.encode_ppm();
        assert!(encoded.starts_with(b"P6\n3 2\n255\n"));
        assert_eq!(Raster::decode_ppm(&encoded).unwrap(), r);
    }

    #[test]
    fn ppm_rejects_garbage() {
        assert!(Raster::decode_ppm(b"P5\n1 1\n255\nxxx").is_err());
        assert!(Raster::decode_ppm(b"P6\n2 2\n255\nab").is_err());
        assert!(Raster::decode_ppm(b"P6\n2 2\n65535\n").is_err());
    }

    #[test]
    fn ppm_header_comments_are_skipped() {
        let mut bytes = b"P6\n# made by hand\n2 1\n255\n".to_vec();
        bytes.extend_from_slice(&[1, 2, 3, 4, 5, 6]);
        let r = Raster::decode_ppm(&bytes).unwrap();
        assert_eq!(r.dims(), dims(2, 1));
        assert_eq!(r.get(1, 0), [4, 5, 6]);
    }

    #[test]
    fn raster_buffer_size_is_checked() {
        assert!(Raster::new(dims(2, 2), vec![0; 11]).is_err());
        assert!(Raster::new(dims(2, 2), vec![0; 12]).is_ok());
    }

    #[test]
    fn file_round_trip_and_dims_probe() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.ppm");
        let r = Raster::from_fn(dims(4, 3), |x, y| [x as u8, y as u8, 0]);
        write_raster(&path, &r).unwrap();
        assert_eq!(read_raster(&path).unwrap(), r);
        assert_eq!(read_dims(&path).unwrap(), dims(4, 3));

        let png = dir.path().join("t.png");
        write_raster(&png, &r).unwrap();
        assert_eq!(read_raster(&png).unwrap(), r);
        assert_eq!(read_dims(&png).unwrap(), dims(4, 3));

        assert!(matches!(
            read_raster(&dir.path().join("t.gif")),
            Err(RasterError::UnsupportedFormat(_))
        ));
    }
}
