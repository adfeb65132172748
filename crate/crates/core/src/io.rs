//! On-disk formats: binary PGM label masks, raw `f32` volumes with a JSON
//! sidecar, telemetry and metrics CSVs.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::metrics::MetricsReport;
use crate::neighborhood::IterationTelemetry;
use crate::texture::MultiplexImage;

pub const FORMAT_VERSION: &str = "tissuesim-1";

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

/// P5 bytes with `maxval` 255 (one byte per sample) or 65535 (two bytes,
/// big-endian).
pub fn encode_pgm(grid: &Grid<u32>, maxval: u32) -> Result<Vec<u8>> {
    let wide = match maxval {
        255 => false,
        65535 => true,
        _ => panic!("unsupported maxval {maxval}"),
    };
    let header = format!("P5\n{} {}\n{}\n", grid.width(), grid.height(), maxval);
    let per = if wide { 2 } else { 1 };
    let mut out = Vec::with_capacity(header.len() + per * grid.len());
    out.extend_from_slice(header.as_bytes());
    for &v in grid.as_slice() {
        if v > maxval {
            return Err(Error::LabelOverflow {
                label: v,
                bits: 8 * per as u32,
            });
        }
        if wide {
            out.extend_from_slice(&(v as u16).to_be_bytes());
        } else {
            out.push(v as u8);
        }
    }
    Ok(out)
}

fn pgm_error(path: &Path, reason: impl Into<String>) -> Error {
    Error::Format {
        kind: "PGM",
        path: path.to_path_buf(),
        reason: reason.into(),
    }
}

/// Parses a P5 file. Returns the grid and its `maxval`.
pub fn decode_pgm(bytes: &[u8], path: &Path) -> Result<(Grid<u32>, u32)> {
    let mut pos = 0;
    let mut fields = Vec::with_capacity(4);
    while fields.len() < 4 {
        while pos < bytes.len() && (bytes[pos].is_ascii_whitespace() || bytes[pos] == b'#') {
            if bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
            } else {
                pos += 1;
            }
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(pgm_error(path, "truncated header"));
        }
        fields.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
    }
    // Exactly one whitespace byte separates the header from the raster.
    pos += 1;
    if fields[0] != "P5" {
        return Err(pgm_error(
            path,
            format!("magic {:?}, expected P5", fields[0]),
        ));
    }
    let num = |s: &str, what: &str| -> Result<usize> {
        s.parse()
            .map_err(|_| pgm_error(path, format!("bad {what} {s:?}")))
    };
    let (w, h, maxval) = (
        num(&fields[1], "width")?,
        num(&fields[2], "height")?,
        num(&fields[3], "maxval")?,
    );
    if maxval == 0 || maxval > 65535 {
        return Err(pgm_error(path, format!("maxval {maxval} out of range")));
    }
    let per = if maxval < 256 { 1 } else { 2 };
    let raster = bytes.get(pos..).unwrap_or(&[]);
    if raster.len() != per * w * h {
        return Err(pgm_error(
            path,
            format!(
                "expected {} raster bytes, found {}",
                per * w * h,
                raster.len()
            ),
        ));
    }
    let data = if per == 1 {
        raster.iter().map(|&b| b as u32).collect()
    } else {
        raster
            .chunks_exact(2)
            .map(|c| u16::from_be_bytes([c[0], c[1]]) as u32)
            .collect()
    };
    Ok((Grid::from_vec(w, h, data), maxval as u32))
}

/// 8-bit mask (neighborhood or phenotype labels).
pub fn write_label_mask(grid: &Grid<u16>, path: &Path) -> Result<()> {
    let wide = Grid::from_vec(
        grid.width(),
        grid.height(),
        grid.as_slice().iter().map(|&v| v as u32).collect(),
    );
    write_file(path, &encode_pgm(&wide, 255)?)
}

pub fn read_label_mask(path: &Path) -> Result<Grid<u16>> {
    let (g, _) = decode_pgm(&read_file(path)?, path)?;
    let (w, h) = (g.width(), g.height());
    Ok(Grid::from_vec(
        w,
        h,
        g.into_vec().into_iter().map(|v| v as u16).collect(),
    ))
}

/// 16-bit instance map.
pub fn write_instance_map(grid: &Grid<u32>, path: &Path) -> Result<()> {
    write_file(path, &encode_pgm(grid, 65535)?)
}

pub fn read_instance_map(path: &Path) -> Result<Grid<u32>> {
    Ok(decode_pgm(&read_file(path)?, path)?.0)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MultiplexSidecar {
    pub format_version: String,
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub channel_order: Vec<usize>,
}

/// Sidecar path for a raw volume: `image.f32` → `image.f32.json`.
pub fn sidecar_path(raw: &Path) -> PathBuf {
    let mut s = raw.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

pub fn encode_multiplex(img: &MultiplexImage) -> Vec<u8> {
    img.data
        .iter()
        .flat_map(|&v| (v as f32).to_le_bytes())
        .collect()
}

/// Writes the raw volume and its sidecar; returns the sidecar path.
pub fn write_multiplex(img: &MultiplexImage, path: &Path) -> Result<PathBuf> {
    write_file(path, &encode_multiplex(img))?;
    let side = MultiplexSidecar {
        format_version: FORMAT_VERSION.to_string(),
        channels: img.channels,
        height: img.height,
        width: img.width,
        channel_order: img.channel_order.clone(),
    };
    let side_path = sidecar_path(path);
    write_file(&side_path, &serde_json::to_vec_pretty(&side)?)?;
    Ok(side_path)
}

pub fn read_multiplex(path: &Path) -> Result<MultiplexImage> {
    let side_path = sidecar_path(path);
    let side: MultiplexSidecar = serde_json::from_slice(&read_file(&side_path)?)?;
    let raw = read_file(path)?;
    let expected = 4 * side.channels * side.height * side.width;
    if raw.len() != expected {
        return Err(Error::Format {
            kind: "multiplex",
            path: path.to_path_buf(),
            reason: format!("expected {expected} bytes, found {}", raw.len()),
        });
    }
    let data = raw
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect();
    Ok(MultiplexImage {
        channels: side.channels,
        height: side.height,
        width: side.width,
        channel_order: side.channel_order,
        data,
    })
}

pub fn telemetry_csv(rows: &[IterationTelemetry]) -> String {
    let mut s = String::from("iteration,loss,unassigned\n");
    for r in rows {
        let _ = writeln!(s, "{},{},{}", r.iteration, r.loss, r.unassigned);
    }
    s
}

pub fn write_telemetry(rows: &[IterationTelemetry], path: &Path) -> Result<()> {
    write_file(path, telemetry_csv(rows).as_bytes())
}

/// Tables of a [`MetricsReport`] as `(file name, CSV text)`. Indices are
/// 1-based, as in the config.
pub fn metrics_tables(report: &MetricsReport) -> Vec<(&'static str, String)> {
    let n = report.neighborhood_pixels.len();
    let p = report.cell_counts.len();
    let total: u64 = report.neighborhood_pixels.iter().sum();

    let mut adj = String::from("neighborhood_a,neighborhood_b,contacts,normalized\n");
    for a in 0..n {
        for b in a..n {
            let _ = writeln!(
                adj,
                "{},{},{},{}",
                a + 1,
                b + 1,
                report.neighborhood_adjacency[a][b],
                report.normalized_adjacency(a, b)
            );
        }
    }

    let mut pix = String::from("neighborhood,pixels,percent\n");
    for (k, &c) in report.neighborhood_pixels.iter().enumerate() {
        let pct = if total == 0 {
            0.0
        } else {
            100.0 * c as f64 / total as f64
        };
        let _ = writeln!(pix, "{},{},{}", k + 1, c, pct);
    }

    let mut inter = String::from("neighborhood,phenotype_a,phenotype_b,edges,normalized\n");
    for k in 0..n {
        for a in 0..p {
            for b in a..p {
                let _ = writeln!(
                    inter,
                    "{},{},{},{},{}",
                    k + 1,
                    a + 1,
                    b + 1,
                    report.phenotype_interactions[a][b][k],
                    report.normalized_interaction(a, b, k)
                );
            }
        }
    }

    let mut cells = String::from("phenotype,neighborhood,cells\n");
    let mut abundance = String::from("phenotype,neighborhood,percent\n");
    for a in 0..p {
        for k in 0..n {
            let _ = writeln!(cells, "{},{},{}", a + 1, k + 1, report.cell_counts[a][k]);
            let _ = writeln!(
                abundance,
                "{},{},{}",
                a + 1,
                k + 1,
                report.phenotype_abundance_pct[a][k]
            );
        }
    }

    let mut expr = String::from("phenotype,marker,mean,std\n");
    for (a, row) in report.expression_stats.iter().enumerate() {
        for (c, ms) in row.iter().enumerate() {
            let _ = writeln!(expr, "{},{},{},{}", a + 1, c + 1, ms.mean, ms.std);
        }
    }

    vec![
        ("neighborhood_adjacency.csv", adj),
        ("neighborhood_pixels.csv", pix),
        ("phenotype_interactions.csv", inter),
        ("cell_counts.csv", cells),
        ("phenotype_abundance.csv", abundance),
        ("expression_stats.csv", expr),
    ]
}

/// Writes `metrics.json` and the CSV tables into `dir`; returns the paths,
/// JSON first.
pub fn write_metrics(report: &MetricsReport, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let json = dir.join("metrics.json");
    write_file(&json, &serde_json::to_vec_pretty(report)?)?;
    let mut paths = vec![json];
    for (name, text) in metrics_tables(report) {
        let path = dir.join(name);
        write_file(&path, text.as_bytes())?;
        paths.push(path);
    }
    Ok(paths)
}

pub fn read_metrics(path: &Path) -> Result<MetricsReport> {
    Ok(serde_json::from_slice(&read_file(path)?)?)
}
