//! File writers: CSV grids, raw f64 dumps, polyline tables and binary pixmaps.
//!
//! Floats are written with `{:e}`, the shortest representation that parses
//! back to the same `f64`.

use std::fmt::Write as _;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::flow::Streamline;
use crate::model::SimulationGrid;

/// Scalar grid in row-major order: row `j` is `z_j`, column `i` is `x_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridData {
    pub channel: String,
    pub unit: String,
    pub lambda: f64,
    pub xs: Vec<f64>,
    pub zs: Vec<f64>,
    pub values: Vec<f64>,
}

impl GridData {
    pub fn new(channel: &str, unit: &str, lambda: f64, grid: &SimulationGrid, values: Vec<f64>) -> Self {
        Self { channel: channel.to_string(), unit: unit.to_string(), lambda, xs: grid.xs(), zs: grid.zs(), values }
    }

    pub fn nx(&self) -> usize {
        self.xs.len()
    }

    pub fn nz(&self) -> usize {
        self.zs.len()
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[j * self.nx() + i]
    }

    pub fn invalid_count(&self) -> usize {
        self.values.iter().filter(|v| v.is_nan()).count()
    }
}

fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        "NaN".to_string()
    } else {
        format!("{v:e}")
    }
}

pub fn grid_csv(data: &GridData) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# channel = {}", data.channel);
    let _ = writeln!(s, "# unit = {}", data.unit);
    let _ = writeln!(s, "# decoherence_lambda = {:e} m^-3", data.lambda);
    let _ = writeln!(s, "# rows = z [m], {} samples", data.nz());
    let _ = writeln!(s, "# columns = x [m], {} samples", data.nx());
    let _ = writeln!(s, "# invalid samples (NaN) = {}", data.invalid_count());
    s.push_str("z\\x");
    for x in &data.xs {
        s.push(',');
        s.push_str(&fmt_f64(*x));
    }
    s.push('\n');
    for (j, z) in data.zs.iter().enumerate() {
        s.push_str(&fmt_f64(*z));
        for v in &data.values[j * data.nx()..(j + 1) * data.nx()] {
            s.push(',');
            s.push_str(&fmt_f64(*v));
        }
        s.push('\n');
    }
    s
}

fn bad(msg: impl Into<String>) -> Error {
    Error::Config(format!("malformed grid CSV: {}", msg.into()))
}

/// Parses the output of [`grid_csv`].
pub fn parse_grid_csv(text: &str) -> Result<GridData> {
    let mut channel = String::new();
    let mut unit = String::new();
    let mut lambda = 0.0;
    let mut xs = Vec::new();
    let mut zs = Vec::new();
    let mut values = Vec::new();
    let num = |s: &str| s.trim().parse::<f64>().map_err(|_| bad(format!("bad number `{s}`")));
    for line in text.lines() {
        if let Some(meta) = line.strip_prefix('#') {
            if let Some((k, v)) = meta.split_once('=') {
                match k.trim() {
                    "channel" => channel = v.trim().to_string(),
                    "unit" => unit = v.trim().to_string(),
                    "decoherence_lambda" => lambda = num(v.trim().trim_end_matches("m^-3"))?,
                    _ => {}
                }
            }
            continue;
        }
        let mut cells = line.split(',');
        let head = cells.next().ok_or_else(|| bad("empty line"))?;
        if head == "z\\x" {
            xs = cells.map(num).collect::<Result<_>>()?;
            continue;
        }
        zs.push(num(head)?);
        let row: Vec<f64> = cells.map(num).collect::<Result<_>>()?;
        if row.len() != xs.len() {
            return Err(bad("row length does not match the x axis"));
        }
        values.extend(row);
    }
    Ok(GridData { channel, unit, lambda, xs, zs, values })
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(Error::from)
}

/// Little-endian `f64` values, row-major (`nz × nx`).
pub fn write_raw(path: &Path, data: &GridData) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    for v in &data.values {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

/// Long-format polyline table: one row per sample.
pub fn streamlines_csv(lines: &[Streamline], lambda: f64) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# decoherence_lambda = {lambda:e} m^-3");
    let _ = writeln!(s, "# columns: line index, seed x [m], z [m], x [m]");
    let _ = writeln!(s, "# streamlines = {}", lines.len());
    for (i, l) in lines.iter().enumerate() {
        if l.terminated_early {
            let _ = writeln!(s, "# line {i} terminated early: {}", l.reason.name());
        }
    }
    s.push_str("line,seed_x,z,x\n");
    for (i, l) in lines.iter().enumerate() {
        for (z, x) in l.z_samples.iter().zip(&l.x_samples) {
            let _ = writeln!(s, "{i},{},{},{}", fmt_f64(l.seed_x), fmt_f64(*z), fmt_f64(*x));
        }
    }
    s
}

/// RGB image, row 0 at the top.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Image {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<[u8; 3]>,
}

impl Image {
    pub fn filled(width: usize, height: usize, color: [u8; 3]) -> Self {
        Self { width, height, pixels: vec![color; width * height] }
    }

    pub fn get(&self, col: usize, row: usize) -> [u8; 3] {
        self.pixels[row * self.width + col]
    }

    pub fn put(&mut self, col: usize, row: usize, color: [u8; 3]) {
        self.pixels[row * self.width + col] = color;
    }

    /// Binary P6.
    pub fn ppm(&self) -> Vec<u8> {
        let mut out = format!("P6\n{} {}\n255\n", self.width, self.height).into_bytes();
        for p in &self.pixels {
            out.extend_from_slice(p);
        }
        out
    }

    /// Binary P5 from the first channel.
    pub fn pgm(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend(self.pixels.iter().map(|p| p[0]));
        out
    }
}

/// Colour of pixels whose momentum is undefined (sub-floor density).
pub const INVALID_COLOR: [u8; 3] = [0, 0, 0];

/// Blue (negative) through white to red (positive), saturating at `±clip`.
pub fn diverging(v: f64, clip: f64) -> [u8; 3] {
    if !v.is_finite() {
        return INVALID_COLOR;
    }
    let t = (v / clip).clamp(-1.0, 1.0);
    let c = (255.0 * (1.0 - t.abs())).round() as u8;
    if t < 0.0 {
        [c, c, 255]
    } else {
        [255, c, c]
    }
}

/// Maps grid position to pixel: z runs left to right, x bottom to top.
fn pixel_of(data: &GridData, i: usize, j: usize) -> (usize, usize) {
    (j, data.nx() - 1 - i)
}

/// Grayscale density image, `(ρ/ρ_max)^gamma` mapped to 0..255.
pub fn render_density(data: &GridData, gamma: f64) -> Image {
    let max = data.values.iter().copied().filter(|v| v.is_finite()).fold(0.0, f64::max);
    let mut img = Image::filled(data.nz(), data.nx(), [0; 3]);
    for j in 0..data.nz() {
        for i in 0..data.nx() {
            let v = data.at(i, j);
            let g = if max > 0.0 && v.is_finite() { (v / max).clamp(0.0, 1.0).powf(gamma) } else { 0.0 };
            let c = (255.0 * g).round() as u8;
            let (col, row) = pixel_of(data, i, j);
            img.put(col, row, [c, c, c]);
        }
    }
    img
}

pub fn render_momentum(data: &GridData, clip: f64) -> Image {
    let mut img = Image::filled(data.nz(), data.nx(), INVALID_COLOR);
    for j in 0..data.nz() {
        for i in 0..data.nx() {
            let (col, row) = pixel_of(data, i, j);
            img.put(col, row, diverging(data.at(i, j), clip));
        }
    }
    img
}

pub const STREAMLINE_COLOR: [u8; 3] = [230, 40, 20];

/// Draws streamline samples over a density background covering the same
/// `(x, z)` window.
pub fn overlay_streamlines(background: &GridData, lines: &[Streamline], gamma: f64) -> Image {
    let mut img = render_density(background, gamma);
    let (x0, x1) = (background.xs[0], *background.xs.last().unwrap());
    let (z0, z1) = (background.zs[0], *background.zs.last().unwrap());
    let (w, h) = (img.width, img.height);
    for l in lines {
        for (&z, &x) in l.z_samples.iter().zip(&l.x_samples) {
            if !(x0..=x1).contains(&x) || !(z0..=z1).contains(&z) {
                continue;
            }
            let col = ((z - z0) / (z1 - z0) * (w - 1) as f64).round() as usize;
            let row = h - 1 - ((x - x0) / (x1 - x0) * (h - 1) as f64).round() as usize;
            img.put(col, row, STREAMLINE_COLOR);
        }
    }
    img
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(Error::from)
}
