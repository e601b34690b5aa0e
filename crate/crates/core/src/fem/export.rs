//! Portable field files and PNG heatmaps.
//!
//! Field file layout (whitespace separated, one record per line):
//!
//! ```text
//! mechagents-field v1 <n_nodes> <n_tris> <components>
//! x y v1 .. vC        (n_nodes lines)
//! i j k               (n_tris lines)
//! ```
//!
//! Values are written in shortest round-trip exponent form, so a file read
//! back reproduces the exact `f64` values.

use std::fmt::Write as _;
use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::mesh::Mesh;
use super::post::nodal_average;
use super::FemError;

pub const FIELD_MAGIC: &str = "mechagents-field";
pub const FIELD_VERSION: &str = "v1";
pub const RASTER_SIZE: u32 = 800;
const MARGIN: f64 = 20.0;
const BACKGROUND: [u8; 3] = [255, 255, 255];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Location {
    Node,
    Cell,
}

/// Named field on a mesh; `components[c][i]` is component `c` at node or
/// cell `i`.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldData {
    pub name: String,
    pub location: Location,
    pub components: Vec<Vec<f64>>,
}

impl FieldData {
    pub fn nodal(name: impl Into<String>, components: Vec<Vec<f64>>) -> Self {
        FieldData { name: name.into(), location: Location::Node, components }
    }

    pub fn cell(name: impl Into<String>, values: Vec<f64>) -> Self {
        FieldData { name: name.into(), location: Location::Cell, components: vec![values] }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FieldFile {
    pub nodes: Vec<[f64; 2]>,
    pub triangles: Vec<[usize; 3]>,
    /// Per-node component values.
    pub values: Vec<Vec<f64>>,
}

impl FieldFile {
    pub fn from_field(mesh: &Mesh, field: &FieldData) -> Result<Self, FemError> {
        let expected = match field.location {
            Location::Node => mesh.num_nodes(),
            Location::Cell => mesh.num_triangles(),
        };
        if field.components.is_empty() || field.components.iter().any(|c| c.len() != expected) {
            return Err(FemError::Config(format!(
                "field `{}` does not match the mesh ({} entries expected per component)",
                field.name, expected
            )));
        }
        let comps: Vec<Vec<f64>> = match field.location {
            Location::Node => field.components.clone(),
            Location::Cell => field.components.iter().map(|c| nodal_average(mesh, c)).collect(),
        };
        let values = (0..mesh.num_nodes()).map(|i| comps.iter().map(|c| c[i]).collect()).collect();
        Ok(FieldFile { nodes: mesh.nodes.clone(), triangles: mesh.triangles.clone(), values })
    }

    pub fn num_components(&self) -> usize {
        self.values.first().map_or(0, Vec::len)
    }

    /// Scalar that is plotted: the value itself, or the Euclidean magnitude
    /// of a multi-component field.
    pub fn plotted(&self) -> Vec<f64> {
        self.values
            .iter()
            .map(|v| if v.len() == 1 { v[0] } else { v.iter().map(|x| x * x).sum::<f64>().sqrt() })
            .collect()
    }

    pub fn component(&self, c: usize) -> Vec<f64> {
        self.values.iter().map(|v| v[c]).collect()
    }

    pub fn range(&self) -> (f64, f64) {
        self.plotted()
            .into_iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{FIELD_MAGIC} {FIELD_VERSION} {} {} {}",
            self.nodes.len(),
            self.triangles.len(),
            self.num_components()
        );
        for (p, v) in self.nodes.iter().zip(&self.values) {
            let _ = write!(out, "{:e} {:e}", p[0], p[1]);
            for x in v {
                let _ = write!(out, " {x:e}");
            }
            out.push('\n');
        }
        for t in &self.triangles {
            let _ = writeln!(out, "{} {} {}", t[0], t[1], t[2]);
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self, FemError> {
        let bad = |line: usize, msg: &str| FemError::FieldFormat(format!("line {line}: {msg}"));
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
        let (_, header) = lines.next().ok_or_else(|| bad(1, "empty field file"))?;
        let head: Vec<&str> = header.split_whitespace().collect();
        if head.len() != 5 || head[0] != FIELD_MAGIC || head[1] != FIELD_VERSION {
            return Err(bad(1, "expected `mechagents-field v1 <n_nodes> <n_tris> <components>`"));
        }
        let count = |s: &str| s.parse::<usize>().map_err(|_| bad(1, "counts must be non-negative integers"));
        let (nn, nt, nc) = (count(head[2])?, count(head[3])?, count(head[4])?);
        let mut nodes = Vec::with_capacity(nn);
        let mut values = Vec::with_capacity(nn);
        for _ in 0..nn {
            let (ln, line) = lines.next().ok_or_else(|| bad(0, "truncated node section"))?;
            let nums: Vec<f64> = line
                .split_whitespace()
                .map(|s| s.parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|_| bad(ln, "malformed number"))?;
            if nums.len() != 2 + nc {
                return Err(bad(ln, &format!("expected {} numbers, found {}", 2 + nc, nums.len())));
            }
            nodes.push([nums[0], nums[1]]);
            values.push(nums[2..].to_vec());
        }
        let mut triangles = Vec::with_capacity(nt);
        for _ in 0..nt {
            let (ln, line) = lines.next().ok_or_else(|| bad(0, "truncated triangle section"))?;
            let idx: Vec<usize> = line
                .split_whitespace()
                .map(|s| s.parse::<usize>())
                .collect::<Result<_, _>>()
                .map_err(|_| bad(ln, "malformed node index"))?;
            if idx.len() != 3 || idx.iter().any(|&i| i >= nn) {
                return Err(bad(ln, "triangle needs three in-range node indices"));
            }
            triangles.push([idx[0], idx[1], idx[2]]);
        }
        if let Some((ln, extra)) = lines.find(|(_, l)| !l.trim().is_empty()) {
            return Err(bad(ln, &format!("unexpected trailing content `{}`", extra.trim())));
        }
        Ok(FieldFile { nodes, triangles, values })
    }

    pub fn read(path: &Path) -> Result<Self, FemError> {
        let text = fs::read_to_string(path).map_err(|e| FemError::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArtifactDescriptor {
    pub quantity: String,
    pub png: PathBuf,
    pub field: PathBuf,
    pub min: f64,
    pub max: f64,
}

/// Writes `<png>` and a sibling `.field` file for `field` on `mesh`.
pub fn export_field(field: &FieldData, mesh: &Mesh, png_path: &Path) -> Result<ArtifactDescriptor, FemError> {
    let file = FieldFile::from_field(mesh, field)?;
    let field_path = png_path.with_extension("field");
    write_atomic(&field_path, file.to_text().as_bytes())?;
    let (min, max) = render_png_to(&file, png_path)?;
    Ok(ArtifactDescriptor {
        quantity: field.name.clone(),
        png: png_path.to_path_buf(),
        field: field_path,
        min,
        max,
    })
}

/// Re-renders the PNG for an existing field file.
pub fn render_png(field_path: &Path, png_path: &Path) -> Result<ArtifactDescriptor, FemError> {
    let file = FieldFile::read(field_path)?;
    let (min, max) = render_png_to(&file, png_path)?;
    Ok(ArtifactDescriptor {
        quantity: field_path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default(),
        png: png_path.to_path_buf(),
        field: field_path.to_path_buf(),
        min,
        max,
    })
}

fn render_png_to(file: &FieldFile, png_path: &Path) -> Result<(f64, f64), FemError> {
    let (min, max) = file.range();
    let pixels = rasterize(file, min, max);
    let mut bytes = Vec::new();
    {
        let mut enc = png::Encoder::new(BufWriter::new(&mut bytes), RASTER_SIZE, RASTER_SIZE);
        enc.set_color(png::ColorType::Rgb);
        enc.set_depth(png::BitDepth::Eight);
        let mut writer = enc.write_header().map_err(|e| FemError::Io(e.to_string()))?;
        writer.write_image_data(&pixels).map_err(|e| FemError::Io(e.to_string()))?;
    }
    write_atomic(png_path, &bytes)?;
    Ok((min, max))
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), FemError> {
    let io = |e: std::io::Error| FemError::Io(format!("{}: {e}", path.display()));
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io)?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".partial");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, bytes).map_err(io)?;
    fs::rename(&tmp, path).map_err(io)
}

/// RGB raster of the plotted scalar, linearly interpolated over triangles.
pub fn rasterize(file: &FieldFile, min: f64, max: f64) -> Vec<u8> {
    let size = RASTER_SIZE as usize;
    let mut px = vec![0u8; size * size * 3];
    for chunk in px.chunks_exact_mut(3) {
        chunk.copy_from_slice(&BACKGROUND);
    }
    if file.nodes.is_empty() {
        return px;
    }
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for p in &file.nodes {
        x0 = x0.min(p[0]);
        x1 = x1.max(p[0]);
        y0 = y0.min(p[1]);
        y1 = y1.max(p[1]);
    }
    let avail = size as f64 - 2.0 * MARGIN;
    let scale = avail / (x1 - x0).max(y1 - y0).max(f64::MIN_POSITIVE);
    let off_x = MARGIN + 0.5 * (avail - scale * (x1 - x0));
    let off_y = MARGIN + 0.5 * (avail - scale * (y1 - y0));
    let to_px = |p: [f64; 2]| [off_x + (p[0] - x0) * scale, size as f64 - (off_y + (p[1] - y0) * scale)];
    let values = file.plotted();
    let span = max - min;
    for t in &file.triangles {
        let [a, b, c] = t.map(|n| to_px(file.nodes[n]));
        let [va, vb, vc] = t.map(|n| values[n]);
        let det = (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]);
        if det == 0.0 {
            continue;
        }
        let lo_x = a[0].min(b[0]).min(c[0]).floor().max(0.0) as usize;
        let hi_x = (a[0].max(b[0]).max(c[0]).ceil() as usize).min(size - 1);
        let lo_y = a[1].min(b[1]).min(c[1]).floor().max(0.0) as usize;
        let hi_y = (a[1].max(b[1]).max(c[1]).ceil() as usize).min(size - 1);
        for py in lo_y..=hi_y {
            for pxx in lo_x..=hi_x {
                let q = [pxx as f64 + 0.5, py as f64 + 0.5];
                let l1 = ((b[0] - q[0]) * (c[1] - q[1]) - (c[0] - q[0]) * (b[1] - q[1])) / det;
                let l2 = ((c[0] - q[0]) * (a[1] - q[1]) - (a[0] - q[0]) * (c[1] - q[1])) / det;
                let l3 = 1.0 - l1 - l2;
                const EPS: f64 = -1e-9;
                if l1 < EPS || l2 < EPS || l3 < EPS {
                    continue;
                }
                let v = l1 * va + l2 * vb + l3 * vc;
                let s = if span > 0.0 { ((v - min) / span).clamp(0.0, 1.0) } else { 0.0 };
                let k = (py * size + pxx) * 3;
                px[k..k + 3].copy_from_slice(&viridis(s));
            }
        }
    }
    px
}

const VIRIDIS: [[u8; 3]; 11] = [
    [68, 1, 84],
    [72, 35, 116],
    [64, 67, 135],
    [52, 94, 141],
    [41, 120, 142],
    [32, 144, 140],
    [34, 167, 132],
    [68, 190, 112],
    [121, 209, 81],
    [189, 222, 38],
    [253, 231, 36],
];

/// Piecewise-linear viridis colormap on `[0, 1]`.
pub fn viridis(s: f64) -> [u8; 3] {
    let s = s.clamp(0.0, 1.0) * (VIRIDIS.len() - 1) as f64;
    let i = (s.floor() as usize).min(VIRIDIS.len() - 2);
    let f = s - i as f64;
    let (a, b) = (VIRIDIS[i], VIRIDIS[i + 1]);
    [0, 1, 2].map(|c| (a[c] as f64 + f * (b[c] as f64 - a[c] as f64)).round() as u8)
}
