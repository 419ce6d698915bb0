use crate::error::{Error, Result};
use crate::scalar::Real;

/// Row-major raster with interleaved channels.
#[derive(Clone, Debug, PartialEq)]
pub struct Image<T> {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<T>,
}

impl<T: Real> Image<T> {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<T>) -> Result<Self> {
        if width == 0 || height == 0 || channels == 0 {
            return Err(Error::InvalidArgument("image dimensions must be non-zero".into()));
        }
        if data.len() != width * height * channels {
            return Err(Error::InvalidArgument(format!(
                "{} samples for {width}x{height}x{channels} image",
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, channels: usize, value: T) -> Self {
        Self {
            width,
            height,
            channels,
            data: vec![value; width * height * channels],
        }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    #[inline]
    pub fn get(&self, u: usize, v: usize, c: usize) -> T {
        self.data[(v * self.width + u) * self.channels + c]
    }

    #[inline]
    pub fn set(&mut self, u: usize, v: usize, c: usize, value: T) {
        self.data[(v * self.width + u) * self.channels + c] = value;
    }

    pub fn pixel(&self, u: usize, v: usize) -> &[T] {
        let i = (v * self.width + u) * self.channels;
        &self.data[i..i + self.channels]
    }
}

/// Equirectangular raster: columns map linearly to longitude, rows to latitude.
/// Width is always twice the height.
#[derive(Clone, Debug, PartialEq)]
pub struct PanoramaImage<T> {
    image: Image<T>,
}

impl<T: Real> PanoramaImage<T> {
    pub fn new(image: Image<T>) -> Result<Self> {
        if image.width != 2 * image.height {
            return Err(Error::InvalidArgument(format!(
                "equirectangular panorama must be 2:1, got {}x{}",
                image.width, image.height
            )));
        }
        Ok(Self { image })
    }

    pub fn image(&self) -> &Image<T> {
        &self.image
    }

    pub fn into_image(self) -> Image<T> {
        self.image
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.image.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.image.height
    }
}

/// Binary mask aligned to an image; every value is 0 or 1.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InstanceMask {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl InstanceMask {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::InvalidArgument("mask size does not match data".into()));
        }
        if data.iter().any(|&v| v > 1) {
            return Err(Error::InvalidArgument("mask values must be 0 or 1".into()));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            data: vec![0; width * height],
        }
    }

    pub fn ones(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            data: vec![1; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> bool) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for v in 0..height {
            for u in 0..width {
                data.push(f(u, v) as u8);
            }
        }
        Self {
            width,
            height,
            data,
        }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn get(&self, u: usize, v: usize) -> bool {
        self.data[v * self.width + u] != 0
    }

    #[inline]
    pub fn set(&mut self, u: usize, v: usize, on: bool) {
        self.data[v * self.width + u] = on as u8;
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn count(&self) -> usize {
        self.data.iter().map(|&v| v as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.count() == 0
    }

    pub fn same_size<T: Real>(&self, image: &Image<T>) -> bool {
        self.width == image.width() && self.height == image.height()
    }

    /// Bounding rectangle `(u_min, v_min, u_max, v_max)` of set pixels, inclusive.
    pub fn bounds(&self) -> Option<(usize, usize, usize, usize)> {
        let mut out: Option<(usize, usize, usize, usize)> = None;
        for v in 0..self.height {
            for u in 0..self.width {
                if self.get(u, v) {
                    out = Some(match out {
                        None => (u, v, u, v),
                        Some((a, b, c, d)) => (a.min(u), b.min(v), c.max(u), d.max(v)),
                    });
                }
            }
        }
        out
    }

    /// Square-neighborhood dilation by `radius` pixels. Columns wrap when
    /// `wrap_columns` is set (equirectangular masks).
    pub fn dilate(&self, radius: usize, wrap_columns: bool) -> Self {
        let r = radius as i64;
        let (w, h) = (self.width as i64, self.height as i64);
        Self::from_fn(self.width, self.height, |u, v| {
            for dv in -r..=r {
                let vv = v as i64 + dv;
                if vv < 0 || vv >= h {
                    continue;
                }
                for du in -r..=r {
                    let mut uu = u as i64 + du;
                    if wrap_columns {
                        uu = uu.rem_euclid(w);
                    } else if uu < 0 || uu >= w {
                        continue;
                    }
                    if self.get(uu as usize, vv as usize) {
                        return true;
                    }
                }
            }
            false
        })
    }

    /// Nearest-neighbor resampling to a new resolution.
    pub fn resize_nearest(&self, width: usize, height: usize) -> Self {
        Self::from_fn(width, height, |u, v| {
            let su = ((u as f64 + 0.5) * self.width as f64 / width as f64) as usize;
            let sv = ((v as f64 + 0.5) * self.height as f64 / height as f64) as usize;
            self.get(su.min(self.width - 1), sv.min(self.height - 1))
        })
    }

    pub fn iou(&self, other: &Self) -> Result<f64> {
        if self.width != other.width || self.height != other.height {
            return Err(Error::ResolutionMismatch(
                self.width,
                self.height,
                other.width,
                other.height,
            ));
        }
        let (mut inter, mut union) = (0usize, 0usize);
        for (a, b) in self.data.iter().zip(&other.data) {
            inter += (a & b) as usize;
            union += (a | b) as usize;
        }
        Ok(if union == 0 {
            1.0
        } else {
            inter as f64 / union as f64
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn panorama_requires_two_to_one() {
        assert!(PanoramaImage::new(Image::filled(8, 4, 1, 0.0f64)).is_ok());
        assert!(PanoramaImage::new(Image::filled(8, 8, 1, 0.0f64)).is_err());
    }

    #[test]
    fn mask_rejects_non_binary() {
        assert!(InstanceMask::new(2, 1, vec![0, 2]).is_err());
    }

    #[test]
    fn dilation_grows_by_radius() {
        let mut m = InstanceMask::zeros(9, 9);
        m.set(4, 4, true);
        let d = m.dilate(3, false);
        assert_eq!(d.count(), 49);
        assert_eq!(d.bounds(), Some((1, 1, 7, 7)));
    }

    #[test]
    fn dilation_wraps_columns() {
        let mut m = InstanceMask::zeros(8, 4);
        m.set(0, 2, true);
        assert!(m.dilate(1, true).get(7, 2));
        assert!(!m.dilate(1, false).get(7, 2));
    }
}
