//! Binary Netpbm (P5 grayscale, P6 RGB) and raw 8-bit image I/O.

use std::fs;
use std::path::Path;

use crate::codec::check_dims;
use crate::error::{Error, Result};

/// 8-bit single-channel raster.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<GrayImage> {
        check_dims(width, height, pixels.len())?;
        Ok(GrayImage {
            width,
            height,
            pixels,
        })
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> u8) -> GrayImage {
        let pixels = (0..height)
            .flat_map(|r| (0..width).map(move |c| (r, c)))
            .map(|(r, c)| f(r, c))
            .collect();
        GrayImage {
            width,
            height,
            pixels,
        }
    }

    pub fn get(&self, row: usize, col: usize) -> u8 {
        self.pixels[row * self.width + col]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PixelFormat {
    Gray,
    Rgb,
}

/// A decoded Netpbm file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Netpbm {
    pub format: PixelFormat,
    pub width: usize,
    pub height: usize,
    /// Interleaved samples, one per channel.
    pub data: Vec<u8>,
}

impl Netpbm {
    pub fn gray(img: GrayImage) -> Netpbm {
        Netpbm {
            format: PixelFormat::Gray,
            width: img.width,
            height: img.height,
            data: img.pixels,
        }
    }

    /// Grayscale image to encrypt. RGB images become their R, G and B planes
    /// stacked vertically (height × 3).
    pub fn to_planes(&self) -> GrayImage {
        match self.format {
            PixelFormat::Gray => GrayImage {
                width: self.width,
                height: self.height,
                pixels: self.data.clone(),
            },
            PixelFormat::Rgb => {
                let pixels = (0..3)
                    .flat_map(|ch| self.data.iter().skip(ch).step_by(3).copied())
                    .collect();
                GrayImage {
                    width: self.width,
                    height: self.height * 3,
                    pixels,
                }
            }
        }
    }

    /// Inverse of [`to_planes`](Self::to_planes).
    pub fn from_planes(planes: GrayImage, format: PixelFormat) -> Result<Netpbm> {
        match format {
            PixelFormat::Gray => Ok(Netpbm::gray(planes)),
            PixelFormat::Rgb => {
                if !planes.height.is_multiple_of(3) {
                    return Err(Error::ImageFormat(format!(
                        "plane stack height {} is not a multiple of 3",
                        planes.height
                    )));
                }
                let n = planes.width * planes.height / 3;
                let p = &planes.pixels;
                let data = (0..n).flat_map(|i| [p[i], p[n + i], p[2 * n + i]]).collect();
                Ok(Netpbm {
                    format,
                    width: planes.width,
                    height: planes.height / 3,
                    data,
                })
            }
        }
    }

    pub fn encode(&self) -> Vec<u8> {
        let magic = match self.format {
            PixelFormat::Gray => "P5",
            PixelFormat::Rgb => "P6",
        };
        let mut out = format!("{magic}\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.data);
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Netpbm> {
        let mut pos = 0;
        let magic = token(bytes, &mut pos)?;
        let format = match magic {
            b"P5" => PixelFormat::Gray,
            b"P6" => PixelFormat::Rgb,
            other => {
                return Err(Error::ImageFormat(format!(
                    "unsupported magic {:?} (expected binary P5 or P6)",
                    String::from_utf8_lossy(other)
                )))
            }
        };
        let width = number(bytes, &mut pos)?;
        let height = number(bytes, &mut pos)?;
        let maxval = number(bytes, &mut pos)?;
        if maxval != 255 {
            return Err(Error::ImageFormat(format!("maxval {maxval} unsupported (need 255)")));
        }
        // exactly one whitespace byte separates the header from the raster
        pos += 1;
        let channels = if format == PixelFormat::Rgb { 3 } else { 1 };
        let len = width
            .checked_mul(height)
            .and_then(|n| n.checked_mul(channels))
            .ok_or_else(|| Error::ImageFormat("dimensions overflow".into()))?;
        if width == 0 || height == 0 {
            return Err(Error::InvalidDimensions { width, height });
        }
        let data = bytes
            .get(pos..pos + len)
            .ok_or_else(|| Error::ImageFormat(format!("truncated raster: need {len} bytes")))?
            .to_vec();
        Ok(Netpbm {
            format,
            width,
            height,
            data,
        })
    }

    pub fn read(path: &Path) -> Result<Netpbm> {
        Netpbm::decode(&fs::read(path).map_err(Error::at(path))?)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.encode()).map_err(Error::at(path))
    }
}

fn token<'a>(bytes: &'a [u8], pos: &mut usize) -> Result<&'a [u8]> {
    loop {
        while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if *pos < bytes.len() && bytes[*pos] == b'#' {
            while *pos < bytes.len() && bytes[*pos] != b'\n' {
                *pos += 1;
            }
            continue;
        }
        break;
    }
    let start = *pos;
    while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    if start == *pos {
        return Err(Error::ImageFormat("truncated header".into()));
    }
    Ok(&bytes[start..*pos])
}

fn number(bytes: &[u8], pos: &mut usize) -> Result<usize> {
    let t = token(bytes, pos)?;
    std::str::from_utf8(t)
        .ok()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::ImageFormat(format!("bad header number {:?}", String::from_utf8_lossy(t))))
}

pub fn read_pgm(path: &Path) -> Result<GrayImage> {
    let img = Netpbm::read(path)?;
    if img.format != PixelFormat::Gray {
        return Err(Error::ImageFormat(format!("{} is not a P5 graymap", path.display())));
    }
    Ok(img.to_planes())
}

pub fn write_pgm(path: &Path, img: &GrayImage) -> Result<()> {
    Netpbm::gray(img.clone()).write(path)
}

pub fn read_raw(path: &Path, width: usize, height: usize) -> Result<GrayImage> {
    GrayImage::new(width, height, fs::read(path).map_err(Error::at(path))?)
}
