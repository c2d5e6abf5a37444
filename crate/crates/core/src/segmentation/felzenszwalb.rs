//! Efficient graph-based segmentation (Felzenszwalb & Huttenlocher).
//!
//! Pixels are nodes of an 8-connected grid; edge weights are absolute
//! intensity differences of the smoothed image. Edges are visited in
//! ascending weight with ties broken by (row, col, direction) of the origin
//! pixel, which makes the output independent of platform and thread count.

use ndarray::Array2;

use super::{gaussian_smooth, SegmentMap, SegmentationConfig, SegmentationError};
use crate::audio::Spectrogram;

/// Forward neighbours in tie-break order: right, down-right, down, down-left.
const DIRECTIONS: [(isize, isize); 4] = [(0, 1), (1, 1), (1, 0), (1, -1)];

#[derive(Debug, Clone, Copy)]
struct Edge {
    weight: f64,
    a: u32,
    b: u32,
}

struct DisjointSets {
    parent: Vec<u32>,
    rank: Vec<u8>,
    size: Vec<u32>,
    /// `Int(C) + scale / |C|`, valid at roots.
    threshold: Vec<f64>,
}

impl DisjointSets {
    fn new(n: usize, scale: f64) -> Self {
        Self { parent: (0..n as u32).collect(), rank: vec![0; n], size: vec![1; n], threshold: vec![scale; n] }
    }

    fn find(&mut self, mut x: u32) -> u32 {
        let mut root = x;
        while self.parent[root as usize] != root {
            root = self.parent[root as usize];
        }
        while self.parent[x as usize] != root {
            let next = self.parent[x as usize];
            self.parent[x as usize] = root;
            x = next;
        }
        root
    }

    fn union(&mut self, a: u32, b: u32) -> u32 {
        let (a, b) = (a as usize, b as usize);
        let (root, child) = if self.rank[a] >= self.rank[b] { (a, b) } else { (b, a) };
        if self.rank[root] == self.rank[child] {
            self.rank[root] += 1;
        }
        self.parent[child] = root as u32;
        self.size[root] += self.size[child];
        root as u32
    }
}

fn grid_edges(image: &Array2<f64>) -> Vec<Edge> {
    let (rows, cols) = image.dim();
    let mut edges = Vec::with_capacity(rows * cols * 4);
    for r in 0..rows {
        for c in 0..cols {
            for (dr, dc) in DIRECTIONS {
                let (nr, nc) = (r as isize + dr, c as isize + dc);
                if nr < 0 || nc < 0 || nr >= rows as isize || nc >= cols as isize {
                    continue;
                }
                let (nr, nc) = (nr as usize, nc as usize);
                edges.push(Edge {
                    weight: (image[[r, c]] - image[[nr, nc]]).abs(),
                    a: (r * cols + c) as u32,
                    b: (nr * cols + nc) as u32,
                });
            }
        }
    }
    // stable: equal weights keep generation order, i.e. (row, col, direction)
    edges.sort_by(|x, y| x.weight.total_cmp(&y.weight));
    edges
}

/// Segments a raw image. Labels are assigned in order of each segment's
/// first pixel in a row-major scan.
pub fn segment_image(image: &Array2<f64>, config: &SegmentationConfig) -> Result<SegmentMap, SegmentationError> {
    config.validate()?;
    let (rows, cols) = image.dim();
    let pixels = rows * cols;
    if pixels < config.min_size || pixels == 0 {
        return Err(SegmentationError::InputTooSmall { pixels, min_size: config.min_size });
    }
    if image.iter().any(|v| !v.is_finite()) {
        return Err(SegmentationError::Config("image contains non-finite values".into()));
    }

    let smoothed = gaussian_smooth(image, config.sigma);
    let edges = grid_edges(&smoothed);
    let mut sets = DisjointSets::new(pixels, config.scale);

    for e in &edges {
        let a = sets.find(e.a);
        let b = sets.find(e.b);
        if a == b {
            continue;
        }
        if e.weight <= sets.threshold[a as usize] && e.weight <= sets.threshold[b as usize] {
            let root = sets.union(a, b);
            // edges arrive in ascending order, so e.weight is the new Int(C)
            sets.threshold[root as usize] = e.weight + config.scale / sets.size[root as usize] as f64;
        }
    }

    let min_size = config.min_size as u32;
    for e in &edges {
        let a = sets.find(e.a);
        let b = sets.find(e.b);
        if a != b && (sets.size[a as usize] < min_size || sets.size[b as usize] < min_size) {
            sets.union(a, b);
        }
    }

    let mut compact = vec![u32::MAX; pixels];
    let mut next = 0u32;
    let mut labels = Array2::zeros((rows, cols));
    for (i, label) in labels.iter_mut().enumerate() {
        let root = sets.find(i as u32) as usize;
        if compact[root] == u32::MAX {
            compact[root] = next;
            next += 1;
        }
        *label = compact[root];
    }
    SegmentMap::from_labels(labels)
}

pub fn felzenszwalb_segment(spec: &Spectrogram, config: &SegmentationConfig) -> Result<SegmentMap, SegmentationError> {
    segment_image(&spec.values, config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{self, Stream};
    use proptest::prelude::*;

    #[test]
    fn constant_image_is_one_segment() {
        let map = segment_image(&Array2::from_elem((20, 20), -30.0), &SegmentationConfig::default()).unwrap();
        assert_eq!(map.segment_count(), 1);
        assert!(map.labels().iter().all(|&l| l == 0));
    }

    #[test]
    fn two_halves_split_on_the_boundary() {
        let image = Array2::from_shape_fn((20, 20), |(_, c)| if c < 10 { -80.0 } else { 0.0 });
        let config = SegmentationConfig { sigma: 0.0, ..SegmentationConfig::default() };
        let map = segment_image(&image, &config).unwrap();
        assert_eq!(map.segment_count(), 2);
        for ((_, c), &l) in map.labels().indexed_iter() {
            assert_eq!(l, (c >= 10) as u32);
        }
    }

    #[test]
    fn too_small() {
        assert!(matches!(
            segment_image(&Array2::zeros((5, 7)), &SegmentationConfig::default()),
            Err(SegmentationError::InputTooSmall { pixels: 35, min_size: 40 })
        ));
    }

    fn random_image(seed: u64, rows: usize, cols: usize) -> Array2<f64> {
        Array2::from_shape_fn((rows, cols), |(r, c)| {
            rng::uniform(seed, Stream::Fixture, r as u64, c as u64, -80.0, 0.0)
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn partition_and_min_size(seed in any::<u64>(), rows in 6usize..30, cols in 6usize..30,
                                  min_size in 1usize..30, scale in 1.0f64..200.0) {
            let config = SegmentationConfig { scale, min_size, sigma: 0.8 };
            let map = segment_image(&random_image(seed, rows, cols), &config).unwrap();
            prop_assert_eq!(map.shape(), (rows, cols));
            let areas = map.areas();
            prop_assert_eq!(areas.len(), map.segment_count());
            prop_assert!(areas.iter().all(|&a| a >= min_size));
            prop_assert_eq!(areas.iter().sum::<usize>(), rows * cols);
        }

        #[test]
        fn larger_min_size_never_adds_segments(seed in any::<u64>(), small in 1usize..20, extra in 0usize..40) {
            let image = random_image(seed, 24, 24);
            let count = |min_size| segment_image(&image, &SegmentationConfig { min_size, ..SegmentationConfig::default() })
                .unwrap().segment_count();
            prop_assert!(count(small + extra) <= count(small));
        }
    }

    #[test]
    fn deterministic_across_thread_pools() {
        let image = random_image(9, 48, 40);
        let config = SegmentationConfig::default();
        let base = segment_image(&image, &config).unwrap();
        for threads in [1, 3] {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
            let again = pool.install(|| segment_image(&image, &config)).unwrap();
            assert_eq!(again, base);
        }
    }
}
