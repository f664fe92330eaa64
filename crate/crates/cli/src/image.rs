//! Raster ingestion and resizing.
//!
//! Binary PPM (P6, 8-bit) is always supported; pixel values are scaled to
//! [0, 1] by the file's maxval. Building with the `extended-image` feature
//! adds the formats of the `image` crate as a fallback for other magics.

use std::path::Path;

use darkgrid_core::tensor::{Shape4, Tensor};

use crate::error::CliError;

/// Decodes an 8-bit binary PPM into a (1, 3, H, W) tensor in [0, 1].
pub fn decode_ppm(bytes: &[u8]) -> Result<Tensor, CliError> {
    if bytes.len() < 2 || &bytes[0..2] != b"P6" {
        return Err(CliError::input("unsupported image magic (expected P6)"));
    }
    let mut pos = 2;
    let mut fields = [0usize; 3];
    for field in fields.iter_mut() {
        // Whitespace, with '#' comments running to end of line.
        loop {
            match bytes.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while pos < bytes.len() && bytes[pos] != b'\n' {
                        pos += 1;
                    }
                }
                Some(_) => break,
                None => return Err(CliError::input("PPM header ends prematurely")),
            }
        }
        let start = pos;
        while pos < bytes.len() && bytes[pos].is_ascii_digit() {
            pos += 1;
        }
        if pos == start {
            return Err(CliError::input(format!(
                "PPM header: expected an integer at byte {start}"
            )));
        }
        *field = std::str::from_utf8(&bytes[start..pos])
            .unwrap()
            .parse()
            .map_err(|e| CliError::input(format!("PPM header: {e}")))?;
    }
    let [width, height, maxval] = fields;
    if width == 0 || height == 0 {
        return Err(CliError::input("PPM extents must be positive"));
    }
    if maxval == 0 || maxval > 255 {
        return Err(CliError::input(format!(
            "PPM maxval {maxval} unsupported (8-bit only)"
        )));
    }
    // Exactly one whitespace byte separates the header from the raster.
    match bytes.get(pos) {
        Some(b) if b.is_ascii_whitespace() => pos += 1,
        _ => return Err(CliError::input("PPM header not terminated by whitespace")),
    }
    let expected = width * height * 3;
    let raster = &bytes[pos..];
    if raster.len() < expected {
        return Err(CliError::input(format!(
            "PPM raster truncated: header promises {expected} bytes, file holds {}",
            raster.len()
        )));
    }
    if raster.len() > expected {
        return Err(CliError::input(format!(
            "PPM raster has {} trailing bytes",
            raster.len() - expected
        )));
    }
    let scale = 1.0 / maxval as f32;
    let mut data = vec![0.0f32; 3 * width * height];
    for y in 0..height {
        for x in 0..width {
            let px = (y * width + x) * 3;
            for ch in 0..3 {
                data[ch * width * height + y * width + x] = raster[px + ch] as f32 * scale;
            }
        }
    }
    Tensor::new(Shape4::new(1, 3, height, width), data).map_err(|e| CliError::input(e.to_string()))
}

#[cfg(feature = "extended-image")]
fn decode_via_image_crate(bytes: &[u8]) -> Result<Tensor, CliError> {
    let img = image::load_from_memory(bytes)
        .map_err(|e| CliError::input(format!("image decode failed: {e}")))?
        .to_rgb8();
    let (width, height) = (img.width() as usize, img.height() as usize);
    let mut data = vec![0.0f32; 3 * width * height];
    for (x, y, pixel) in img.enumerate_pixels() {
        let (x, y) = (x as usize, y as usize);
        for ch in 0..3 {
            data[ch * width * height + y * width + x] = pixel[ch] as f32 / 255.0;
        }
    }
    Tensor::new(Shape4::new(1, 3, height, width), data).map_err(|e| CliError::input(e.to_string()))
}

/// Reads an image file into a (1, 3, H, W) tensor in [0, 1].
pub fn read_image(path: &Path) -> Result<Tensor, CliError> {
    let bytes = std::fs::read(path)
        .map_err(|e| CliError::input(format!("cannot read {}: {e}", path.display())))?;
    if bytes.len() >= 2 && &bytes[0..2] == b"P6" {
        return decode_ppm(&bytes)
            .map_err(|e| CliError::input(format!("{}: {e}", path.display())));
    }
    #[cfg(feature = "extended-image")]
    {
        return decode_via_image_crate(&bytes)
            .map_err(|e| CliError::input(format!("{}: {e}", path.display())));
    }
    #[cfg(not(feature = "extended-image"))]
    Err(CliError::input(format!(
        "{}: unsupported image magic (expected P6; build with the \
         extended-image feature for other formats)",
        path.display()
    )))
}

/// Corner-aligned bilinear resize of a (1, C, H, W) tensor.
pub fn resize_bilinear(input: &Tensor, out_h: usize, out_w: usize) -> Tensor {
    let Shape4 { n, c, h, w } = input.shape();
    debug_assert_eq!(n, 1);
    if h == out_h && w == out_w {
        return input.clone();
    }
    let fy = if out_h > 1 {
        (h - 1) as f32 / (out_h - 1) as f32
    } else {
        0.0
    };
    let fx = if out_w > 1 {
        (w - 1) as f32 / (out_w - 1) as f32
    } else {
        0.0
    };
    let mut data = Vec::with_capacity(c * out_h * out_w);
    for ch in 0..c {
        let plane = input.plane(0, ch);
        for oy in 0..out_h {
            let sy = oy as f32 * fy;
            let y0 = sy.floor() as usize;
            let y1 = (y0 + 1).min(h - 1);
            let dy = sy - y0 as f32;
            for ox in 0..out_w {
                let sx = ox as f32 * fx;
                let x0 = sx.floor() as usize;
                let x1 = (x0 + 1).min(w - 1);
                let dx = sx - x0 as f32;
                let top = plane[y0 * w + x0] * (1.0 - dx) + plane[y0 * w + x1] * dx;
                let bottom = plane[y1 * w + x0] * (1.0 - dx) + plane[y1 * w + x1] * dx;
                data.push(top * (1.0 - dy) + bottom * dy);
            }
        }
    }
    Tensor::new(Shape4::new(1, c, out_h, out_w), data).unwrap()
}

/// How an image was fitted to the network input; needed to map detections
/// back to original pixels.
#[derive(Debug, Clone, Copy)]
pub enum Fit {
    /// Direct stretch to the network extents.
    Stretch,
    /// Aspect-preserving resize centered on a mid-gray canvas: the scaled
    /// image occupies `scaled_w` x `scaled_h` at offset (`dx`, `dy`) within
    /// the network input.
    Letterbox {
        scaled_w: usize,
        scaled_h: usize,
        dx: usize,
        dy: usize,
    },
}

/// Fits an image to the network input, by stretch (default) or letterbox.
pub fn fit_to_network(input: &Tensor, net_w: usize, net_h: usize, letterbox: bool) -> (Tensor, Fit) {
    if !letterbox {
        return (resize_bilinear(input, net_h, net_w), Fit::Stretch);
    }
    let Shape4 { c, h, w, .. } = input.shape();
    let scale = (net_w as f64 / w as f64).min(net_h as f64 / h as f64);
    let scaled_w = ((w as f64 * scale).round() as usize).clamp(1, net_w);
    let scaled_h = ((h as f64 * scale).round() as usize).clamp(1, net_h);
    let resized = resize_bilinear(input, scaled_h, scaled_w);
    let dx = (net_w - scaled_w) / 2;
    let dy = (net_h - scaled_h) / 2;
    let mut canvas = vec![0.5f32; c * net_h * net_w];
    for ch in 0..c {
        let plane = resized.plane(0, ch);
        for y in 0..scaled_h {
            let dst = (ch * net_h + y + dy) * net_w + dx;
            canvas[dst..dst + scaled_w]
                .copy_from_slice(&plane[y * scaled_w..(y + 1) * scaled_w]);
        }
    }
    (
        Tensor::new(Shape4::new(1, c, net_h, net_w), canvas).unwrap(),
        Fit::Letterbox {
            scaled_w,
            scaled_h,
            dx,
            dy,
        },
    )
}
