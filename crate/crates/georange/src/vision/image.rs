//! 8-bit grayscale image container and the binary PGM (P5) codec.

use super::VisionError;

/// Row-major 8-bit grayscale image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    width: u32,
    height: u32,
    pixels: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: u32, height: u32) -> Self {
        GrayImage {
            width,
            height,
            pixels: vec![0; width as usize * height as usize],
        }
    }

    pub fn filled(width: u32, height: u32, value: u8) -> Self {
        GrayImage {
            width,
            height,
            pixels: vec![value; width as usize * height as usize],
        }
    }

    pub fn from_pixels(width: u32, height: u32, pixels: Vec<u8>) -> Result<Self, VisionError> {
        if pixels.len() != width as usize * height as usize {
            return Err(VisionError::MalformedImage(format!(
                "{}x{} image needs {} pixels, got {}",
                width,
                height,
                width as usize * height as usize,
                pixels.len()
            )));
        }
        Ok(GrayImage {
            width,
            height,
            pixels,
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> u8 {
        self.pixels[y as usize * self.width as usize + x as usize]
    }

    #[inline]
    pub fn set(&mut self, x: u32, y: u32, value: u8) {
        self.pixels[y as usize * self.width as usize + x as usize] = value;
    }

    /// Count of non-zero pixels.
    pub fn count_nonzero(&self) -> usize {
        self.pixels.iter().filter(|&&p| p != 0).count()
    }
}

/// Decodes a binary PGM (magic `P5`, maxval up to 255).
///
/// Header tokens may be separated by any whitespace and interleaved with
/// `#` comment lines; exactly one whitespace byte separates the maxval from
/// the raster, and the raster must contain exactly width*height bytes.
pub fn decode_pgm(bytes: &[u8]) -> Result<GrayImage, VisionError> {
    let mut pos = 0usize;

    fn fail(msg: &str) -> VisionError {
        VisionError::MalformedImage(msg.to_string())
    }

    if bytes.len() < 2 || &bytes[0..2] != b"P5" {
        return Err(fail("missing P5 magic"));
    }
    pos += 2;

    let mut read_token = |bytes: &[u8]| -> Result<u64, VisionError> {
        // Skip whitespace and comment lines before the token.
        loop {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if pos < bytes.len() && bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
            } else {
                break;
            }
        }
        let start = pos;
        while pos < bytes.len() && bytes[pos].is_ascii_digit() {
            pos += 1;
        }
        if pos == start {
            return Err(fail("expected integer in header"));
        }
        std::str::from_utf8(&bytes[start..pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| fail("unparseable header integer"))
    };

    let width = read_token(bytes)?;
    let height = read_token(bytes)?;
    let maxval = read_token(bytes)?;
    if width == 0 || height == 0 || width > u32::MAX as u64 || height > u32::MAX as u64 {
        return Err(fail("bad dimensions"));
    }
    if maxval == 0 || maxval > 255 {
        return Err(fail("maxval must be in 1..=255 for 8-bit rasters"));
    }
    if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
        return Err(fail("expected single whitespace after maxval"));
    }
    pos += 1;

    let expected = width as usize * height as usize;
    let raster = &bytes[pos..];
    if raster.len() < expected {
        return Err(fail("truncated raster"));
    }
    if raster.len() > expected {
        return Err(fail("trailing bytes after raster"));
    }
    GrayImage::from_pixels(width as u32, height as u32, raster.to_vec())
}

/// Encodes as binary PGM with maxval 255.
pub fn encode_pgm(img: &GrayImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    out.extend_from_slice(img.pixels());
    out
}
