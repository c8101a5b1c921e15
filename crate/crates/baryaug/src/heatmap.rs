//! Gaussian heatmap rendering of landmark coordinates.
//!
//! Channel `c` at integer pixel `(i, j)` (row `i`, column `j`) carries
//! `exp(-d^2 / (2 sigma^2))` with `d` the Euclidean distance from the pixel
//! center `(x = j, y = i)` to landmark `c`, normalized per channel. The
//! unordered variant sums the per-point Gaussians into one channel.

use crate::error::{Error, Result};
use crate::measures::PointCloud;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Normalization {
    /// Every channel sums to 1 (heatmaps as probability maps). Default.
    SumOne,
    /// Every channel peaks at 1.
    PeakOne,
}

/// Channels x height x width tensor of nonnegative reals.
#[derive(Debug, Clone, PartialEq)]
pub struct Heatmap {
    channels: usize,
    height: usize,
    width: usize,
    data: Vec<f64>, // channel-major, then row-major
    sigma: f64,
    normalization: Normalization,
    /// Landmarks that fell outside `[0, w) x [0, h)`; their mass is clipped
    /// by the frame and renormalized.
    out_of_frame: Vec<usize>,
}

impl Heatmap {
    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn normalization(&self) -> Normalization {
        self.normalization
    }

    pub fn out_of_frame(&self) -> &[usize] {
        &self.out_of_frame
    }

    pub fn get(&self, channel: usize, i: usize, j: usize) -> f64 {
        self.data[(channel * self.height + i) * self.width + j]
    }

    pub fn channel(&self, channel: usize) -> &[f64] {
        let plane = self.height * self.width;
        &self.data[channel * plane..(channel + 1) * plane]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Pixel `(i, j)` of the channel's largest value (first on ties).
    pub fn argmax(&self, channel: usize) -> (usize, usize) {
        let plane = self.channel(channel);
        let mut best = 0;
        for (idx, v) in plane.iter().enumerate() {
            if *v > plane[best] {
                best = idx;
            }
        }
        (best / self.width, best % self.width)
    }

    pub(crate) fn from_raw(
        channels: usize,
        height: usize,
        width: usize,
        data: Vec<f64>,
        sigma: f64,
        normalization: Normalization,
        out_of_frame: Vec<usize>,
    ) -> Self {
        debug_assert_eq!(data.len(), channels * height * width);
        Self {
            channels,
            height,
            width,
            data,
            sigma,
            normalization,
            out_of_frame,
        }
    }
}

fn gaussian_plane(point: [f64; 2], sigma: f64, height: usize, width: usize) -> Vec<f64> {
    let inv = 1.0 / (2.0 * sigma * sigma);
    let mut plane = Vec::with_capacity(height * width);
    for i in 0..height {
        for j in 0..width {
            let dx = j as f64 - point[0];
            let dy = i as f64 - point[1];
            plane.push((-(dx * dx + dy * dy) * inv).exp());
        }
    }
    plane
}

fn normalize(plane: &mut [f64], normalization: Normalization) {
    let denom = match normalization {
        Normalization::SumOne => plane.iter().sum::<f64>(),
        Normalization::PeakOne => plane.iter().copied().fold(0.0f64, f64::max),
    };
    if denom > 0.0 {
        for v in plane.iter_mut() {
            *v /= denom;
        }
    }
}

fn check_frame(cloud: &PointCloud, height: usize, width: usize) -> Vec<usize> {
    cloud
        .points()
        .iter()
        .enumerate()
        .filter(|(_, p)| p[0] < 0.0 || p[0] >= width as f64 || p[1] < 0.0 || p[1] >= height as f64)
        .map(|(i, _)| i)
        .collect()
}

fn validate(sigma: f64, height: usize, width: usize) -> Result<()> {
    if sigma <= 0.0 || !sigma.is_finite() {
        return Err(Error::BadSigma(sigma));
    }
    if height == 0 || width == 0 {
        return Err(Error::BadParameter {
            name: "size",
            reason: format!("{height}x{width} grid"),
        });
    }
    Ok(())
}

/// Ordered rendering: one channel per landmark, in index order.
pub fn render(cloud: &PointCloud, sigma: f64, height: usize, width: usize) -> Result<Heatmap> {
    render_with(cloud, sigma, height, width, Normalization::SumOne)
}

pub fn render_with(
    cloud: &PointCloud,
    sigma: f64,
    height: usize,
    width: usize,
    normalization: Normalization,
) -> Result<Heatmap> {
    validate(sigma, height, width)?;
    if !cloud.ordered() {
        return Err(Error::UnorderedInput);
    }
    let mut data = Vec::with_capacity(cloud.len() * height * width);
    for p in cloud.points() {
        let mut plane = gaussian_plane(*p, sigma, height, width);
        normalize(&mut plane, normalization);
        data.extend_from_slice(&plane);
    }
    Ok(Heatmap::from_raw(
        cloud.len(),
        height,
        width,
        data,
        sigma,
        normalization,
        check_frame(cloud, height, width),
    ))
}

/// Unordered rendering: the per-point Gaussians summed into a single
/// channel, renormalized. The ordered flag of the input is ignored.
pub fn render_unordered(
    cloud: &PointCloud,
    sigma: f64,
    height: usize,
    width: usize,
) -> Result<Heatmap> {
    render_unordered_with(cloud, sigma, height, width, Normalization::SumOne)
}

pub fn render_unordered_with(
    cloud: &PointCloud,
    sigma: f64,
    height: usize,
    width: usize,
    normalization: Normalization,
) -> Result<Heatmap> {
    validate(sigma, height, width)?;
    let mut acc = vec![0.0; height * width];
    for p in cloud.points() {
        for (a, v) in acc.iter_mut().zip(gaussian_plane(*p, sigma, height, width)) {
            *a += v;
        }
    }
    normalize(&mut acc, normalization);
    Ok(Heatmap::from_raw(
        1,
        height,
        width,
        acc,
        sigma,
        normalization,
        check_frame(cloud, height, width),
    ))
}
