use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Channels {
    Gray = 1,
    Rgb = 3,
}

impl Channels {
    pub fn count(self) -> usize {
        self as usize
    }
}

/// An 8-bit image, row-major and interleaved.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Raster {
    width: u32,
    height: u32,
    channels: Channels,
    samples: Vec<u8>,
}

impl Raster {
    pub fn new(width: u32, height: u32, channels: Channels, samples: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Domain(format!("empty raster {width}x{height}")));
        }
        let expected = width as usize * height as usize * channels.count();
        if samples.len() != expected {
            return Err(Error::Domain(format!(
                "{} samples for {width}x{height}x{}, expected {expected}",
                samples.len(),
                channels.count()
            )));
        }
        Ok(Raster {
            width,
            height,
            channels,
            samples,
        })
    }

    /// A raster with every pixel set to `pixel` (one value per channel).
    pub fn filled(width: u32, height: u32, pixel: &[u8]) -> Result<Self> {
        let channels = match pixel.len() {
            1 => Channels::Gray,
            3 => Channels::Rgb,
            n => return Err(Error::Domain(format!("{n} channels"))),
        };
        let n = width as usize * height as usize;
        Raster::new(width, height, channels, pixel.repeat(n))
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn channels(&self) -> Channels {
        self.channels
    }

    pub fn samples(&self) -> &[u8] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<u8> {
        self.samples
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32, c: usize) -> u8 {
        let n = self.channels.count();
        self.samples[(y as usize * self.width as usize + x as usize) * n + c]
    }

    /// Gray rasters are replicated into three channels.
    pub fn to_rgb(&self) -> Raster {
        match self.channels {
            Channels::Rgb => self.clone(),
            Channels::Gray => Raster {
                width: self.width,
                height: self.height,
                channels: Channels::Rgb,
                samples: self.samples.iter().flat_map(|&v| [v, v, v]).collect(),
            },
        }
    }
}

/// Quantizes to 8 bits, rounding half up and saturating.
#[inline]
pub fn round_half_up(v: f64) -> u8 {
    (v + 0.5).floor().clamp(0.0, 255.0) as u8
}
