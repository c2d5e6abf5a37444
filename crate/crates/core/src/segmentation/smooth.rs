use ndarray::Array2;
use rayon::prelude::*;

/// Normalized 1-D Gaussian taps over `[-r, r]` with `r = ceil(4 sigma)`.
pub fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = (4.0 * sigma).ceil() as isize;
    let taps: Vec<f64> = (-radius..=radius).map(|i| (-((i * i) as f64) / (2.0 * sigma * sigma)).exp()).collect();
    let sum: f64 = taps.iter().sum();
    taps.into_iter().map(|t| t / sum).collect()
}

/// Separable Gaussian blur with border clamping: a pass along columns of
/// each row, then along rows of each column. `sigma == 0` is the identity.
pub fn gaussian_smooth(image: &Array2<f64>, sigma: f64) -> Array2<f64> {
    if sigma == 0.0 || image.is_empty() {
        return image.clone();
    }
    let kernel = gaussian_kernel(sigma);
    let radius = (kernel.len() / 2) as isize;
    let (rows, cols) = image.dim();

    let convolve = |line: &[f64]| -> Vec<f64> {
        let n = line.len() as isize;
        (0..n)
            .map(|i| {
                kernel
                    .iter()
                    .enumerate()
                    .map(|(k, w)| w * line[(i + k as isize - radius).clamp(0, n - 1) as usize])
                    .sum()
            })
            .collect()
    };

    let horizontal: Vec<Vec<f64>> = (0..rows).into_par_iter().map(|r| convolve(&image.row(r).to_vec())).collect();
    let vertical: Vec<Vec<f64>> = (0..cols)
        .into_par_iter()
        .map(|c| {
            let column: Vec<f64> = horizontal.iter().map(|row| row[c]).collect();
            convolve(&column)
        })
        .collect();
    Array2::from_shape_fn((rows, cols), |(r, c)| vertical[c][r])
}
