//! PNG and binary PPM (P6) file support for [`ImageBuffer`].

use std::io::Cursor;
use std::path::Path;

use image::codecs::pnm::{PnmEncoder, PnmSubtype, SampleEncoding};
use image::{DynamicImage, ImageFormat};

use crate::error::{Error, Result};
use crate::imaging::ImageBuffer;

/// Decodes PNG or PNM bytes. 16-bit and gray+alpha inputs are converted to
/// 8-bit RGB(A).
pub fn decode(bytes: &[u8]) -> Result<ImageBuffer> {
    let img = image::load_from_memory(bytes).map_err(|e| Error::Image {
        context: "decode".into(),
        message: e.to_string(),
    })?;
    from_dynamic(img)
}

pub fn load(path: &Path) -> Result<ImageBuffer> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes).map_err(|e| match e {
        Error::Image { message, .. } => Error::Image {
            context: path.display().to_string(),
            message,
        },
        other => other,
    })
}

fn from_dynamic(img: DynamicImage) -> Result<ImageBuffer> {
    let (w, h) = (img.width(), img.height());
    match img {
        DynamicImage::ImageLuma8(b) => ImageBuffer::new(w, h, 1, b.into_raw()),
        DynamicImage::ImageRgb8(b) => ImageBuffer::new(w, h, 3, b.into_raw()),
        DynamicImage::ImageRgba8(b) => ImageBuffer::new(w, h, 4, b.into_raw()),
        other if other.color().has_alpha() => ImageBuffer::new(w, h, 4, other.to_rgba8().into_raw()),
        other if other.color().channel_count() == 1 => {
            ImageBuffer::new(w, h, 1, other.to_luma8().into_raw())
        }
        other => ImageBuffer::new(w, h, 3, other.to_rgb8().into_raw()),
    }
}

/// Output encoding, chosen from the file extension by [`save`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Encoding {
    Png,
    Ppm,
}

impl Encoding {
    pub fn from_path(path: &Path) -> Encoding {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("ppm") => Encoding::Ppm,
            _ => Encoding::Png,
        }
    }
}

pub fn encode(img: &ImageBuffer, encoding: Encoding) -> Result<Vec<u8>> {
    let dynamic = match (encoding, img.channels()) {
        // P6 carries RGB only.
        (Encoding::Ppm, _) => rgb_dynamic(&img.to_rgb()),
        (_, 1) => DynamicImage::ImageLuma8(
            image::GrayImage::from_raw(img.width(), img.height(), img.data().to_vec())
                .expect("buffer length checked at construction"),
        ),
        (_, 3) => rgb_dynamic(img),
        _ => DynamicImage::ImageRgba8(
            image::RgbaImage::from_raw(img.width(), img.height(), img.data().to_vec())
                .expect("buffer length checked at construction"),
        ),
    };
    let mut out = Cursor::new(Vec::new());
    let written = match encoding {
        Encoding::Png => dynamic.write_to(&mut out, ImageFormat::Png),
        Encoding::Ppm => dynamic.write_with_encoder(
            PnmEncoder::new(&mut out).with_subtype(PnmSubtype::Pixmap(SampleEncoding::Binary)),
        ),
    };
    written.map_err(|e| Error::Image {
        context: "encode".into(),
        message: e.to_string(),
    })?;
    Ok(out.into_inner())
}

fn rgb_dynamic(img: &ImageBuffer) -> DynamicImage {
    DynamicImage::ImageRgb8(
        image::RgbImage::from_raw(img.width(), img.height(), img.data().to_vec())
            .expect("buffer length checked at construction"),
    )
}

pub fn save(img: &ImageBuffer, path: &Path) -> Result<()> {
    let bytes = encode(img, Encoding::from_path(path))?;
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}
