//! PNG encoding of rendered images and the JSON sidecars that go with them.
//!
//! * RGB modes: 8-bit RGB PNG.
//! * Depth: 16-bit grayscale PNG of `round(depth_m * 1000)`, clamped to
//!   65535, with 0 reserved for background.
//! * Mask: 8-bit grayscale PNG of part indices plus a label-map JSON.

use std::io::Cursor;
use std::path::Path;

use image::{ImageBuffer, ImageFormat, Luma, Rgb};
use serde::{Deserialize, Serialize};

use super::{Camera, Image, Pixels, RenderError};
use crate::scene::SceneProgram;

fn io_err(e: impl std::fmt::Display) -> RenderError {
    RenderError::Io(e.to_string())
}

pub fn quantize_depth(depth_m: f64) -> u16 {
    if !depth_m.is_finite() {
        return 0;
    }
    (depth_m * 1000.0).round().clamp(1.0, 65535.0) as u16
}

pub fn encode_png(image: &Image) -> Result<Vec<u8>, RenderError> {
    let (w, h) = (image.width, image.height);
    let mut buf = Cursor::new(Vec::new());
    match &image.pixels {
        Pixels::Rgb(px) => {
            let raw: Vec<u8> = px.iter().flatten().map(|c| (c.clamp(0.0, 1.0) * 255.0).round() as u8).collect();
            let img: ImageBuffer<Rgb<u8>, _> = ImageBuffer::from_raw(w, h, raw).ok_or_else(|| io_err("buffer size"))?;
            img.write_to(&mut buf, ImageFormat::Png).map_err(io_err)?;
        }
        Pixels::Depth(px) => {
            let raw: Vec<u16> = px.iter().map(|&d| quantize_depth(d)).collect();
            let img: ImageBuffer<Luma<u16>, _> = ImageBuffer::from_raw(w, h, raw).ok_or_else(|| io_err("buffer size"))?;
            img.write_to(&mut buf, ImageFormat::Png).map_err(io_err)?;
        }
        Pixels::Mask(px) => {
            let img: ImageBuffer<Luma<u8>, _> =
                ImageBuffer::from_raw(w, h, px.clone()).ok_or_else(|| io_err("buffer size"))?;
            img.write_to(&mut buf, ImageFormat::Png).map_err(io_err)?;
        }
    }
    Ok(buf.into_inner())
}

pub fn write_image(path: &Path, image: &Image) -> Result<(), RenderError> {
    std::fs::write(path, encode_png(image)?).map_err(io_err)
}

/// Decodes any PNG into linear RGB floats in `[0, 1]`.
pub fn decode_png_rgb(bytes: &[u8]) -> Result<(u32, u32, Vec<[f32; 3]>), RenderError> {
    let img = image::load_from_memory_with_format(bytes, ImageFormat::Png).map_err(io_err)?.to_rgb32f();
    let (w, h) = img.dimensions();
    Ok((w, h, img.pixels().map(|p| p.0).collect()))
}

/// `{"0": "background", "1": "<first label>", ...}`
pub fn mask_labels_json(program: &SceneProgram) -> String {
    let mut map = serde_json::Map::new();
    map.insert("0".into(), "background".into());
    for (i, part) in program.parts.iter().enumerate() {
        map.insert((i + 1).to_string(), part.label.clone().into());
    }
    serde_json::to_string_pretty(&serde_json::Value::Object(map)).expect("string map serializes")
}

pub fn write_mask_labels(path: &Path, program: &SceneProgram) -> Result<(), RenderError> {
    std::fs::write(path, mask_labels_json(program)).map_err(io_err)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CameraRecord {
    pub view: usize,
    pub position: [f64; 3],
    pub target: [f64; 3],
    pub up: [f64; 3],
    pub fov: f64,
    pub resolution: [u32; 2],
    pub seed: u64,
}

impl CameraRecord {
    pub fn new(view: usize, camera: &Camera, seed: u64) -> Self {
        CameraRecord {
            view,
            position: camera.position.into(),
            target: camera.target.into(),
            up: camera.up.into(),
            fov: camera.vertical_fov,
            resolution: [camera.width, camera.height],
            seed,
        }
    }
}

pub fn write_camera_metadata(path: &Path, cameras: &[Camera], seed: u64) -> Result<(), RenderError> {
    let records: Vec<CameraRecord> = cameras.iter().enumerate().map(|(i, c)| CameraRecord::new(i, c, seed)).collect();
    let text = serde_json::to_string_pretty(&records).map_err(io_err)?;
    std::fs::write(path, text).map_err(io_err)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::parse_program;

    #[test]
    fn depth_quantization() {
        assert_eq!(quantize_depth(f64::INFINITY), 0);
        assert_eq!(quantize_depth(2.0), 2000);
        assert_eq!(quantize_depth(1.23449), 1234);
        assert_eq!(quantize_depth(100.0), 65535);
        assert_eq!(quantize_depth(1e-6), 1);
    }

    #[test]
    fn png_formats() {
        let depth = Image { width: 2, height: 1, pixels: Pixels::Depth(vec![f64::INFINITY, 1.5]) };
        let bytes = encode_png(&depth).unwrap();
        let decoded = image::load_from_memory(&bytes).unwrap();
        assert_eq!(decoded.color(), image::ColorType::L16);
        assert_eq!(decoded.to_luma16().into_raw(), vec![0, 1500]);

        let mask = Image { width: 2, height: 1, pixels: Pixels::Mask(vec![0, 3]) };
        let decoded = image::load_from_memory(&encode_png(&mask).unwrap()).unwrap();
        assert_eq!(decoded.color(), image::ColorType::L8);
        assert_eq!(decoded.to_luma8().into_raw(), vec![0, 3]);

        let rgb = Image { width: 1, height: 1, pixels: Pixels::Rgb(vec![[0.0, 0.5, 1.0]]) };
        let (w, h, px) = decode_png_rgb(&encode_png(&rgb).unwrap()).unwrap();
        assert_eq!((w, h), (1, 1));
        assert_eq!(px[0][2], 1.0);
        assert!((px[0][1] - 128.0 / 255.0).abs() < 1e-6);
    }

    #[test]
    fn mask_sidecar() {
        let p = parse_program(
            "part \"Seat\" { sphere 1 pos [0,0,0] rot [0,0,0] } part \"Leg1\" { sphere 1 pos [3,0,0] rot [0,0,0] }",
        )
        .unwrap();
        let v: serde_json::Value = serde_json::from_str(&mask_labels_json(&p)).unwrap();
        assert_eq!(v, serde_json::json!({"0": "background", "1": "Seat", "2": "Leg1"}));
    }
}
