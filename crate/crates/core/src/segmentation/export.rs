//! Text exports of label maps.
//!
//! CSV: header `row,col,label`, one line per pixel in row-major order.
//!
//! RLE: a header line `midlime-rle 1 <rows> <cols> <segments>`, followed by
//! exactly `rows` lines. Each line encodes one image row as space-separated
//! `label:count` runs whose counts sum to `cols`.

use std::fmt::Write as _;

use ndarray::Array2;

use super::{SegmentMap, SegmentationError};

pub fn segments_csv(map: &SegmentMap) -> String {
    let mut out = String::from("row,col,label\n");
    for ((r, c), l) in map.labels().indexed_iter() {
        let _ = writeln!(out, "{r},{c},{l}");
    }
    out
}

pub fn write_rle(map: &SegmentMap) -> String {
    let (rows, cols) = map.shape();
    let mut out = format!("midlime-rle 1 {rows} {cols} {}\n", map.segment_count());
    for row in map.labels().rows() {
        let mut runs: Vec<(u32, usize)> = Vec::new();
        for &l in row {
            match runs.last_mut() {
                Some((label, count)) if *label == l => *count += 1,
                _ => runs.push((l, 1)),
            }
        }
        let line: Vec<String> = runs.iter().map(|(l, n)| format!("{l}:{n}")).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    out
}

pub fn read_rle(text: &str) -> Result<SegmentMap, SegmentationError> {
    let err = |line: usize, reason: &str| SegmentationError::Rle { line, reason: reason.to_string() };
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().ok_or_else(|| err(1, "missing header"))?.split_whitespace().collect();
    if header.len() != 5 || header[0] != "midlime-rle" || header[1] != "1" {
        return Err(err(1, "expected 'midlime-rle 1 <rows> <cols> <segments>'"));
    }
    let num = |s: &str| s.parse::<usize>().map_err(|_| err(1, "bad header number"));
    let (rows, cols, segments) = (num(header[2])?, num(header[3])?, num(header[4])?);

    let mut labels = Array2::zeros((rows, cols));
    for r in 0..rows {
        let line_no = r + 2;
        let line = lines.next().ok_or_else(|| err(line_no, "missing row"))?;
        let mut c = 0;
        for run in line.split_whitespace() {
            let (l, n) = run.split_once(':').ok_or_else(|| err(line_no, "run is not label:count"))?;
            let l: u32 = l.parse().map_err(|_| err(line_no, "bad label"))?;
            let n: usize = n.parse().map_err(|_| err(line_no, "bad count"))?;
            if c + n > cols {
                return Err(err(line_no, "runs exceed column count"));
            }
            labels.slice_mut(ndarray::s![r, c..c + n]).fill(l);
            c += n;
        }
        if c != cols {
            return Err(err(line_no, "runs do not cover the row"));
        }
    }
    if lines.any(|l| !l.trim().is_empty()) {
        return Err(err(rows + 2, "trailing data"));
    }
    let map = SegmentMap::from_labels(labels)?;
    if map.segment_count() != segments {
        return Err(err(1, "segment count disagrees with labels"));
    }
    Ok(map)
}
