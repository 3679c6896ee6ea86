//! File formats.
//!
//! Tensors use a small little-endian binary layout:
//!
//! ```text
//! offset  size  field
//! 0       4     magic "LRMT"
//! 4       4     u32 version (1)
//! 8       4     u32 kind (0 = real f64, 1 = complex f64 pairs re, im)
//! 12      8     u64 rows
//! 20      8     u64 cols
//! 28      ...   row-major f64 values
//! ```
//!
//! Heatmaps are binary 16-bit PGM (`P5`, maxval 65535, big-endian samples).
//! Values are mapped linearly so the minimum becomes 0 and the maximum 65535,
//! rounding to nearest; a constant matrix renders as all zeros. A JSON sidecar
//! next to the image (`<file>.json`) records `min`, `max`, `rows`, `cols`.
//!
//! CSV files are comma separated with a header row and `\n` line endings.
//! Floats are written in shortest round-trip form.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use ndarray::Array2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inference::DetectionReport;
use crate::segmentation::ShapeSet;

const MAGIC: &[u8; 4] = b"LRMT";
const VERSION: u32 = 1;
const HEADER_LEN: usize = 28;

#[derive(Debug, Clone, PartialEq)]
pub enum Tensor {
    Real(Array2<f64>),
    Complex(Array2<Complex64>),
}

impl Tensor {
    pub fn dim(&self) -> (usize, usize) {
        match self {
            Tensor::Real(a) => a.dim(),
            Tensor::Complex(a) => a.dim(),
        }
    }

    /// Real tensors as-is; complex tensors as magnitudes.
    pub fn magnitude(&self) -> Array2<f64> {
        match self {
            Tensor::Real(a) => a.clone(),
            Tensor::Complex(a) => a.mapv(|v| v.norm()),
        }
    }
}

fn create(path: &Path) -> Result<BufWriter<fs::File>> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
    }
    fs::File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

fn header(kind: u32, rows: usize, cols: usize) -> Vec<u8> {
    let mut h = Vec::with_capacity(HEADER_LEN);
    h.extend_from_slice(MAGIC);
    h.extend_from_slice(&VERSION.to_le_bytes());
    h.extend_from_slice(&kind.to_le_bytes());
    h.extend_from_slice(&(rows as u64).to_le_bytes());
    h.extend_from_slice(&(cols as u64).to_le_bytes());
    h
}

pub fn tensor_bytes(t: &Tensor) -> Vec<u8> {
    let (rows, cols) = t.dim();
    let mut out = match t {
        Tensor::Real(_) => header(0, rows, cols),
        Tensor::Complex(_) => header(1, rows, cols),
    };
    match t {
        Tensor::Real(a) => {
            out.reserve(a.len() * 8);
            for v in a.iter() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        Tensor::Complex(a) => {
            out.reserve(a.len() * 16);
            for v in a.iter() {
                out.extend_from_slice(&v.re.to_le_bytes());
                out.extend_from_slice(&v.im.to_le_bytes());
            }
        }
    }
    out
}

pub fn parse_tensor(bytes: &[u8]) -> Result<Tensor> {
    let bad = |reason: String| Error::Format {
        kind: "tensor",
        reason,
    };
    if bytes.len() < HEADER_LEN {
        return Err(bad(format!(
            "{} bytes is shorter than the header",
            bytes.len()
        )));
    }
    if &bytes[0..4] != MAGIC {
        return Err(bad("bad magic".into()));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
    let u64_at = |o: usize| u64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
    let version = u32_at(4);
    if version != VERSION {
        return Err(bad(format!("unsupported version {version}")));
    }
    let kind = u32_at(8);
    let rows = usize::try_from(u64_at(12)).map_err(|_| bad("row count overflows".into()))?;
    let cols = usize::try_from(u64_at(20)).map_err(|_| bad("column count overflows".into()))?;
    let width = match kind {
        0 => 8,
        1 => 16,
        k => return Err(bad(format!("unknown kind {k}"))),
    };
    let expected = rows
        .checked_mul(cols)
        .and_then(|n| n.checked_mul(width))
        .ok_or_else(|| bad("size overflows".into()))?;
    let body = &bytes[HEADER_LEN..];
    if body.len() != expected {
        return Err(bad(format!(
            "expected {expected} payload bytes, found {}",
            body.len()
        )));
    }
    let f = |o: usize| f64::from_le_bytes(body[o..o + 8].try_into().unwrap());
    Ok(match kind {
        0 => Tensor::Real(Array2::from_shape_fn((rows, cols), |(r, c)| {
            f((r * cols + c) * 8)
        })),
        _ => Tensor::Complex(Array2::from_shape_fn((rows, cols), |(r, c)| {
            let o = (r * cols + c) * 16;
            Complex64::new(f(o), f(o + 8))
        })),
    })
}

pub fn write_tensor(path: &Path, t: &Tensor) -> Result<()> {
    let mut w = create(path)?;
    w.write_all(&tensor_bytes(t))
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

pub fn read_tensor(path: &Path) -> Result<Tensor> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_tensor(&bytes)
}

/// Sidecar metadata of a heatmap.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeatmapMeta {
    pub min: f64,
    pub max: f64,
    pub rows: usize,
    pub cols: usize,
}

/// 16-bit samples of `m` (row-major) and the scaling metadata.
pub fn quantize(m: &Array2<f64>) -> Result<(Vec<u16>, HeatmapMeta)> {
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("heatmap"));
    }
    let (rows, cols) = m.dim();
    let (min, max) = if m.is_empty() {
        (0.0, 0.0)
    } else {
        m.iter()
            .fold((f64::MAX, f64::MIN), |(lo, hi), &v| (lo.min(v), hi.max(v)))
    };
    let span = max - min;
    let samples = m
        .iter()
        .map(|&v| {
            if span > 0.0 {
                ((v - min) / span * 65535.0).round() as u16
            } else {
                0
            }
        })
        .collect();
    Ok((
        samples,
        HeatmapMeta {
            min,
            max,
            rows,
            cols,
        },
    ))
}

pub fn pgm_bytes(m: &Array2<f64>) -> Result<(Vec<u8>, HeatmapMeta)> {
    let (samples, meta) = quantize(m)?;
    let mut out = format!("P5\n{} {}\n65535\n", meta.cols, meta.rows).into_bytes();
    out.reserve(samples.len() * 2);
    for s in samples {
        out.extend_from_slice(&s.to_be_bytes());
    }
    Ok((out, meta))
}

fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

/// Writes `m` as a PGM heatmap plus its JSON sidecar.
pub fn export_heatmap(m: &Array2<f64>, path: &Path) -> Result<HeatmapMeta> {
    let (bytes, meta) = pgm_bytes(m)?;
    let mut w = create(path)?;
    w.write_all(&bytes)
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))?;
    let side = sidecar_path(path);
    let json = serde_json::to_string_pretty(&meta).expect("metadata serializes");
    fs::write(&side, json + "\n").map_err(|e| Error::io(&side, e))?;
    Ok(meta)
}

/// Reads a 16-bit PGM written by [`export_heatmap`]: `(rows, cols, samples)`.
pub fn read_pgm(path: &Path) -> Result<(usize, usize, Vec<u16>)> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let bad = |reason: &str| Error::Format {
        kind: "pgm",
        reason: reason.into(),
    };
    let mut fields = Vec::with_capacity(4);
    let mut pos = 0;
    while fields.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(bad("truncated header"));
        }
        fields.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
    }
    pos += 1;
    if fields[0] != "P5" || fields[3] != "65535" {
        return Err(bad("expected a 16-bit P5 image"));
    }
    let cols: usize = fields[1].parse().map_err(|_| bad("bad width"))?;
    let rows: usize = fields[2].parse().map_err(|_| bad("bad height"))?;
    let body = bytes.get(pos..).unwrap_or(&[]);
    if body.len() != rows * cols * 2 {
        return Err(bad("payload size does not match header"));
    }
    let samples = body
        .chunks_exact(2)
        .map(|c| u16::from_be_bytes([c[0], c[1]]))
        .collect();
    Ok((rows, cols, samples))
}

pub fn read_heatmap_meta(path: &Path) -> Result<HeatmapMeta> {
    let side = sidecar_path(path);
    let text = fs::read_to_string(&side).map_err(|e| Error::io(&side, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Format {
        kind: "heatmap sidecar",
        reason: e.to_string(),
    })
}

/// Writes a CSV with `header` and string rows. An empty row set yields a header-only file.
pub fn export_csv<I, R>(path: &Path, header: &[&str], rows: I) -> Result<()>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let file = create(path)?;
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(file);
    let wrap = |e: csv::Error| Error::io(path, e.into());
    w.write_record(header).map_err(wrap)?;
    for row in rows {
        w.write_record(row.into_iter().collect::<Vec<_>>())
            .map_err(wrap)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub(crate) fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub const SHAPES_HEADER: [&str; 7] = [
    "shape", "pixels", "energy", "min_x", "min_y", "max_x", "max_y",
];

pub fn export_shapes(shapes: &ShapeSet, path: &Path) -> Result<()> {
    export_csv(
        path,
        &SHAPES_HEADER,
        shapes.shapes.iter().enumerate().map(|(s, shape)| {
            let (x0, y0, x1, y1) = shape.bounding_box();
            vec![
                s.to_string(),
                shape.area.len().to_string(),
                shape.energy.to_string(),
                x0.to_string(),
                y0.to_string(),
                x1.to_string(),
                y1.to_string(),
            ]
        }),
    )
}

/// Overlay image: background 0, shape interior 1, boundary 2.
pub fn shape_overlay(shapes: &ShapeSet) -> Array2<f64> {
    let mut img = Array2::zeros((shapes.n_y, shapes.n_x));
    for shape in &shapes.shapes {
        for &(x, y) in &shape.area {
            img[[y, x]] = 1.0;
        }
        for &(x, y) in &shape.boundary {
            img[[y, x]] = 2.0;
        }
    }
    img
}

pub const REPORT_HEADER: [&str; 11] = [
    "row",
    "gt_x",
    "gt_y",
    "det_x",
    "det_y",
    "accuracy_m",
    "la",
    "dr",
    "n_human",
    "n_object",
    "n_noise",
];

/// One row per ground-truth human, then a `summary` row.
pub fn report_rows(report: &DetectionReport) -> Vec<Vec<String>> {
    let mut rows: Vec<Vec<String>> = report
        .human_matches
        .iter()
        .enumerate()
        .map(|(i, m)| {
            let (dx, dy) = match m.detection {
                Some(d) => (d[0].to_string(), d[1].to_string()),
                None => (String::new(), String::new()),
            };
            let mut r = vec![
                i.to_string(),
                m.ground_truth[0].to_string(),
                m.ground_truth[1].to_string(),
                dx,
                dy,
                m.accuracy.to_string(),
            ];
            r.extend(std::iter::repeat_n(String::new(), 5));
            r
        })
        .collect();
    let mut summary = vec!["summary".to_string()];
    summary.extend(std::iter::repeat_n(String::new(), 5));
    summary.extend([
        report.la.to_string(),
        fmt_opt(report.dr),
        report.n_human_clusters.to_string(),
        report.n_object_clusters.to_string(),
        report.n_noise_clusters.to_string(),
    ]);
    rows.push(summary);
    rows
}

pub fn export_report(report: &DetectionReport, path: &Path) -> Result<()> {
    export_csv(path, &REPORT_HEADER, report_rows(report))
}
