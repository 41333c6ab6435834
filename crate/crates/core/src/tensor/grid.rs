use crate::error::{Error, Result};

/// Row-major `f32` tensor with two or three axes.
///
/// Spatial axes come first (rows, then columns); the optional third axis is
/// the channel axis and varies fastest in memory. A two-axis grid behaves as
/// a single-channel grid for spatial operations.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseGrid {
    dims: Vec<usize>,
    data: Vec<f32>,
}

impl DenseGrid {
    pub fn new(dims: Vec<usize>, data: Vec<f32>) -> Result<Self> {
        check_dims(&dims)?;
        let expected: usize = dims.iter().product();
        if expected != data.len() {
            return Err(Error::ShapeMismatch(format!(
                "dims {dims:?} need {expected} values, got {}",
                data.len()
            )));
        }
        Ok(Self { dims, data })
    }

    pub fn zeros(dims: Vec<usize>) -> Result<Self> {
        let n = dims.iter().product();
        Self::new(dims, vec![0.0; n])
    }

    /// `height × width × channels` grid, built pixel by pixel.
    pub fn from_fn(
        height: usize,
        width: usize,
        channels: usize,
        mut f: impl FnMut(usize, usize, usize) -> f32,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(height * width * channels);
        for y in 0..height {
            for x in 0..width {
                for c in 0..channels {
                    data.push(f(y, x, c));
                }
            }
        }
        Self::new(vec![height, width, channels], data)
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    pub fn height(&self) -> usize {
        self.dims[0]
    }

    pub fn width(&self) -> usize {
        self.dims[1]
    }

    /// Size of the channel axis; 1 for two-axis grids.
    pub fn channels(&self) -> usize {
        self.dims.get(2).copied().unwrap_or(1)
    }

    pub fn pixels(&self) -> usize {
        self.height() * self.width()
    }

    pub fn pixel(&self, y: usize, x: usize) -> &[f32] {
        let c = self.channels();
        let start = (y * self.width() + x) * c;
        &self.data[start..start + c]
    }

    pub fn get(&self, y: usize, x: usize, c: usize) -> f32 {
        self.pixel(y, x)[c]
    }

    /// Channel vectors in row-major pixel order.
    pub fn pixel_iter(&self) -> std::slice::ChunksExact<'_, f32> {
        self.data.chunks_exact(self.channels())
    }

    /// Keeps the listed channels, in the listed order.
    pub fn select_channels(&self, channels: &[usize]) -> Result<Self> {
        let c = self.channels();
        if let Some(&bad) = channels.iter().find(|&&k| k >= c) {
            return Err(Error::ClassOutOfRange {
                index: bad,
                classes: c,
            });
        }
        if channels.is_empty() {
            return Err(Error::InvalidArgument("channel selection is empty".into()));
        }
        let mut data = Vec::with_capacity(self.pixels() * channels.len());
        for px in self.pixel_iter() {
            data.extend(channels.iter().map(|&k| px[k]));
        }
        Self::new(vec![self.height(), self.width(), channels.len()], data)
    }

    pub fn first_non_finite(&self) -> Option<usize> {
        self.data.iter().position(|v| !v.is_finite())
    }
}

pub(crate) fn check_dims(dims: &[usize]) -> Result<()> {
    if !(2..=3).contains(&dims.len()) {
        return Err(Error::BadRank(dims.len()));
    }
    if let Some(axis) = dims.iter().position(|&d| d == 0) {
        return Err(Error::ZeroExtent { axis });
    }
    Ok(())
}

/// Row-major grid of class indices.
///
/// When `background` is set, that index marks rejected pixels and lies
/// outside the foreground label range.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabelMap {
    height: usize,
    width: usize,
    data: Vec<u32>,
    background: Option<u32>,
}

impl LabelMap {
    pub fn new(height: usize, width: usize, data: Vec<u32>) -> Result<Self> {
        check_dims(&[height, width])?;
        if height * width != data.len() {
            return Err(Error::ShapeMismatch(format!(
                "label map {height}x{width} needs {} labels, got {}",
                height * width,
                data.len()
            )));
        }
        Ok(Self {
            height,
            width,
            data,
            background: None,
        })
    }

    pub fn with_background(mut self, index: Option<u32>) -> Self {
        self.background = index;
        self
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn data(&self) -> &[u32] {
        &self.data
    }

    pub fn background(&self) -> Option<u32> {
        self.background
    }

    pub fn get(&self, y: usize, x: usize) -> u32 {
        self.data[y * self.width + x]
    }

    /// Checks every label is a foreground index below `classes` or the
    /// background index.
    pub fn validate(&self, classes: usize) -> Result<()> {
        for (pixel, &label) in self.data.iter().enumerate() {
            if (label as usize) >= classes && Some(label) != self.background {
                return Err(Error::LabelOutOfRange {
                    label,
                    pixel,
                    classes,
                });
            }
        }
        Ok(())
    }
}
