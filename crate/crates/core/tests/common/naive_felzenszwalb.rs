//! Quadratic-time graph segmentation without union-find.
//!
//! Components are explicit member lists relabelled on every merge. Edges are
//! sorted on the full `(weight, row, col, direction)` key.

use ndarray::Array2;

const DIRS: [(isize, isize); 4] = [(0, 1), (1, 1), (1, 0), (1, -1)];

fn blur_line(line: &[f64], taps: &[f64]) -> Vec<f64> {
    let n = line.len() as isize;
    let r = (taps.len() / 2) as isize;
    let mut out = vec![0.0; line.len()];
    for i in 0..n {
        let mut acc = 0.0;
        for k in 0..taps.len() as isize {
            let j = (i + k - r).max(0).min(n - 1);
            acc += taps[k as usize] * line[j as usize];
        }
        out[i as usize] = acc;
    }
    out
}

pub fn smooth(image: &Array2<f64>, sigma: f64) -> Array2<f64> {
    if sigma == 0.0 {
        return image.clone();
    }
    let r = (4.0 * sigma).ceil() as i64;
    let raw: Vec<f64> = (-r..=r).map(|i| (-((i * i) as f64) / (2.0 * sigma * sigma)).exp()).collect();
    let total: f64 = raw.iter().sum();
    let taps: Vec<f64> = raw.iter().map(|t| t / total).collect();
    let (rows, cols) = image.dim();
    let mut tmp = Array2::zeros((rows, cols));
    for y in 0..rows {
        let line: Vec<f64> = (0..cols).map(|x| image[[y, x]]).collect();
        for (x, v) in blur_line(&line, &taps).into_iter().enumerate() {
            tmp[[y, x]] = v;
        }
    }
    let mut out = Array2::zeros((rows, cols));
    for x in 0..cols {
        let line: Vec<f64> = (0..rows).map(|y| tmp[[y, x]]).collect();
        for (y, v) in blur_line(&line, &taps).into_iter().enumerate() {
            out[[y, x]] = v;
        }
    }
    out
}

/// Labels per pixel (arbitrary ids).
pub fn segment(image: &Array2<f64>, scale: f64, min_size: usize, sigma: f64) -> Array2<usize> {
    let img = smooth(image, sigma);
    let (rows, cols) = img.dim();
    let mut edges: Vec<(f64, usize, usize, usize, usize)> = Vec::new();
    for y in 0..rows {
        for x in 0..cols {
            for (d, (dy, dx)) in DIRS.iter().enumerate() {
                let ny = y as isize + dy;
                let nx = x as isize + dx;
                if ny < 0 || nx < 0 || ny >= rows as isize || nx >= cols as isize {
                    continue;
                }
                let w = (img[[y, x]] - img[[ny as usize, nx as usize]]).abs();
                edges.push((w, y, x, d, ny as usize * cols + nx as usize));
            }
        }
    }
    edges.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)).then(a.3.cmp(&b.3)));

    let n = rows * cols;
    let mut comp: Vec<usize> = (0..n).collect();
    let mut members: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
    let mut internal = vec![0.0f64; n];

    let merge = |comp: &mut Vec<usize>, members: &mut Vec<Vec<usize>>, a: usize, b: usize| -> usize {
        let moved = std::mem::take(&mut members[b]);
        for &p in &moved {
            comp[p] = a;
        }
        members[a].extend(moved);
        a
    };

    for &(w, y, x, _, q) in &edges {
        let a = comp[y * cols + x];
        let b = comp[q];
        if a == b {
            continue;
        }
        let ta = internal[a] + scale / members[a].len() as f64;
        let tb = internal[b] + scale / members[b].len() as f64;
        if w <= ta && w <= tb {
            let keep = merge(&mut comp, &mut members, a, b);
            internal[keep] = w;
        }
    }
    for &(_, y, x, _, q) in &edges {
        let a = comp[y * cols + x];
        let b = comp[q];
        if a != b && (members[a].len() < min_size || members[b].len() < min_size) {
            merge(&mut comp, &mut members, a, b);
        }
    }
    Array2::from_shape_fn((rows, cols), |(y, x)| comp[y * cols + x])
}

/// True when both labelings induce the same partition.
pub fn same_partition<A: Copy + Eq + std::hash::Hash, B: Copy + Eq + std::hash::Hash>(
    a: &Array2<A>,
    b: &Array2<B>,
) -> bool {
    use std::collections::HashMap;
    if a.dim() != b.dim() {
        return false;
    }
    let mut fwd: HashMap<A, B> = HashMap::new();
    let mut back: HashMap<B, A> = HashMap::new();
    for (&x, &y) in a.iter().zip(b.iter()) {
        if *fwd.entry(x).or_insert(y) != y || *back.entry(y).or_insert(x) != x {
            return false;
        }
    }
    true
}

/// Random 64×64-style test image: a few constant blocks plus noise, in dB.
pub fn random_image(rows: usize, cols: usize, seed: u64) -> Array2<f64> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
    let blocks: Vec<(usize, usize, usize, usize, f64)> = (0..6)
        .map(|_| {
            let r0 = rng.random_range(0..rows);
            let c0 = rng.random_range(0..cols);
            let h = rng.random_range(4..rows / 2);
            let w = rng.random_range(4..cols / 2);
            (r0, c0, h, w, rng.random_range(-70.0..-10.0))
        })
        .collect();
    let noise_level = rng.random_range(1.0..12.0);
    Array2::from_shape_fn((rows, cols), |(r, c)| {
        let mut v = -60.0;
        for &(r0, c0, h, w, level) in &blocks {
            if r >= r0 && r < r0 + h && c >= c0 && c < c0 + w {
                v = level;
            }
        }
        v + noise_level * (rng.random::<f64>() - 0.5)
    })
}
