//! Grid exports: JSON listings of the strongest words per cell, and a static
//! HTML page that shows them (or per-cell image thumbnails for pixel models).

use std::fmt::Write as _;
use std::io::Cursor;

use base64::Engine as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::CountingGrid;
use crate::hierarchy::{collapse, Layer, LayerKind};
use crate::io::ModelFile;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WordProb {
    pub id: usize,
    pub word: String,
    pub p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellExport {
    pub x: usize,
    pub y: usize,
    pub pi: Vec<WordProb>,
    pub h: Vec<WordProb>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridExport {
    pub kind: LayerKind,
    pub extents: (usize, usize),
    pub window: (usize, usize),
    pub vocab_size: usize,
    pub top_k: usize,
    pub threshold: f64,
    pub image_shape: Option<(usize, usize, usize)>,
    /// In cell index order, `x * extent_y + y`.
    pub cells: Vec<CellExport>,
}

/// The grid a model file describes: the only layer, or the collapse of the
/// stack.
pub fn model_grid(model: &ModelFile) -> Result<Layer> {
    if model.stack.len() == 1 {
        Ok(model.stack.bottom().clone())
    } else {
        collapse(&model.stack)
    }
}

fn strongest(dist: &[f64], vocab: &[String], top_k: usize, threshold: f64) -> Vec<WordProb> {
    let mut idx: Vec<usize> = (0..dist.len()).filter(|w| dist[*w] > threshold).collect();
    idx.sort_by(|a, b| dist[*b].total_cmp(&dist[*a]).then(a.cmp(b)));
    idx.truncate(top_k);
    idx.into_iter()
        .map(|id| WordProb {
            id,
            word: vocab[id].clone(),
            p: dist[id],
        })
        .collect()
}

/// Per cell, up to `top_k` words whose probability exceeds `threshold`, for
/// both the cell distribution and the window average anchored there.
pub fn export_grid(
    layer: &Layer,
    vocab: &[String],
    image_shape: Option<(usize, usize, usize)>,
    top_k: usize,
    threshold: f64,
) -> Result<GridExport> {
    let grid = layer.grid();
    if vocab.len() != grid.vocab_size() {
        return Err(Error::DimensionMismatch {
            expected: grid.vocab_size(),
            actual: vocab.len(),
        });
    }
    let g = grid.geometry();
    let cells = (0..g.cells())
        .map(|i| {
            let c = g.cell(i);
            CellExport {
                x: c.x,
                y: c.y,
                pi: strongest(&grid.pi_at(i), vocab, top_k, threshold),
                h: strongest(&grid.h_at(i), vocab, top_k, threshold),
            }
        })
        .collect();
    Ok(GridExport {
        kind: layer.kind(),
        extents: g.extents(),
        window: g.window(),
        vocab_size: grid.vocab_size(),
        top_k,
        threshold,
        image_shape,
        cells,
    })
}

pub fn to_json(export: &GridExport) -> Result<String> {
    Ok(serde_json::to_string_pretty(export)?)
}

/// One PNG per cell, in cell index order, showing the cell's distribution
/// (or its window average when `use_h`) as an image scaled to its own peak.
pub fn cell_thumbnails(grid: &CountingGrid, shape: (usize, usize, usize), use_h: bool) -> Result<Vec<Vec<u8>>> {
    let (w, h, c) = shape;
    if w * h * c != grid.vocab_size() || !(c == 1 || c == 3) {
        return Err(Error::Image(format!(
            "image shape {w}x{h}x{c} does not fit a vocabulary of {}",
            grid.vocab_size()
        )));
    }
    (0..grid.cells())
        .map(|i| {
            let dist = if use_h { grid.h_at(i) } else { grid.pi_at(i) };
            let peak = dist.iter().cloned().fold(0.0, f64::max);
            let bytes: Vec<u8> = dist
                .iter()
                .map(|v| if peak > 0.0 { (255.0 * v / peak).round() as u8 } else { 0 })
                .collect();
            let mut out = Cursor::new(Vec::new());
            let encoded = if c == 1 {
                image::GrayImage::from_raw(w as u32, h as u32, bytes)
                    .expect("buffer matches shape")
                    .write_to(&mut out, image::ImageFormat::Png)
            } else {
                image::RgbImage::from_raw(w as u32, h as u32, bytes)
                    .expect("buffer matches shape")
                    .write_to(&mut out, image::ImageFormat::Png)
            };
            encoded.map_err(|e| Error::Image(e.to_string()))?;
            Ok(out.into_inner())
        })
        .collect()
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// A self-contained page with one table for the cell distributions and one
/// for the window averages. Rows are `y`, columns are `x`.
pub fn render_html(layer: &Layer, export: &GridExport) -> Result<String> {
    let grid = layer.grid();
    let (ex, ey) = export.extents;
    let mut out = String::new();
    out.push_str("<!DOCTYPE html>\n<html><head><meta charset=\"utf-8\"><title>grid</title>\n<style>\n");
    out.push_str("body{font-family:sans-serif;font-size:11px}table{border-collapse:collapse}\n");
    out.push_str("td{border:1px solid #ccc;vertical-align:top;padding:2px;min-width:60px}\n");
    out.push_str("img{image-rendering:pixelated;width:56px;height:auto;display:block}\n</style></head><body>\n");
    let _ = writeln!(
        out,
        "<p>{} grid {}x{}, window {}x{}, {} words; top {} above {}</p>",
        export.kind, ex, ey, export.window.0, export.window.1, export.vocab_size, export.top_k, export.threshold
    );
    for (title, use_h) in [("cell distributions", false), ("window averages", true)] {
        let _ = writeln!(out, "<h2>{title}</h2>\n<table>");
        let thumbs = match export.image_shape {
            Some(shape) => Some(cell_thumbnails(grid, shape, use_h)?),
            None => None,
        };
        for y in 0..ey {
            out.push_str("<tr>");
            for x in 0..ex {
                let i = x * ey + y;
                out.push_str("<td>");
                match &thumbs {
                    Some(t) => {
                        let _ = write!(
                            out,
                            "<img alt=\"{x},{y}\" src=\"data:image/png;base64,{}\">",
                            base64::engine::general_purpose::STANDARD.encode(&t[i])
                        );
                    }
                    None => {
                        let cell = &export.cells[i];
                        let words = if use_h { &cell.h } else { &cell.pi };
                        let list: Vec<String> = words.iter().map(|w| escape(&w.word)).collect();
                        out.push_str(&list.join("<br>"));
                    }
                }
                out.push_str("</td>");
            }
            out.push_str("</tr>\n");
        }
        out.push_str("</table>\n");
    }
    out.push_str("</body></html>\n");
    Ok(out)
}
