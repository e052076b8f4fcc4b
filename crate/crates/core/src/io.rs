//! Text and binary file formats.
//!
//! Graph files start with a header line `n <count>` followed by one line per
//! undirected edge, `i j w alpha`, with 0-based indices `i < j` and the angle
//! in radians. Floats are written with 17 significant digits so every `f64`
//! round-trips exactly. Blank lines and lines starting with `#` are ignored.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, Matrix3};
use num_complex::Complex64;
use sha2::{Digest, Sha256};

use crate::alignment::PairEstimate;
use crate::embedding::NeighborList;
use crate::error::{Error, Result};
use crate::evaluation::{Histogram, SpectralReport};
use crate::graph::{AlignmentGraph, Edge};
use crate::sampling::{GroundTruth, RotationSample, TorusRadii, TorusSample};
use crate::spectral::SpectralBundle;

const BUNDLE_MAGIC: &[u8; 8] = b"MFVDMSB\x01";

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        line,
        msg: msg.into(),
    }
}

fn field<T: std::str::FromStr>(tok: Option<&str>, line: usize, what: &str) -> Result<T> {
    let tok = tok.ok_or_else(|| parse_err(line, format!("missing {what}")))?;
    tok.parse()
        .map_err(|_| parse_err(line, format!("cannot parse {what} from {tok:?}")))
}

/// Non-empty, non-comment lines with their 1-based line numbers.
fn content_lines<R: BufRead>(reader: R) -> impl Iterator<Item = Result<(usize, String)>> {
    reader
        .lines()
        .enumerate()
        .filter_map(|(idx, line)| match line {
            Err(e) => Some(Err(Error::Io(e))),
            Ok(l) => {
                let t = l.trim();
                (!t.is_empty() && !t.starts_with('#')).then(|| Ok((idx + 1, t.to_string())))
            }
        })
}

/// Write atomically: to a sibling temporary file, then rename.
fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn write_graph<W: Write>(graph: &AlignmentGraph, mut out: W) -> Result<()> {
    writeln!(out, "n {}", graph.n())?;
    for e in graph.edges() {
        writeln!(out, "{} {} {:.16e} {:.16e}", e.i, e.j, e.weight, e.angle)?;
    }
    Ok(())
}

pub fn graph_to_string(graph: &AlignmentGraph) -> String {
    let mut buf = Vec::new();
    write_graph(graph, &mut buf).expect("writing to memory cannot fail");
    String::from_utf8(buf).expect("graph text is ASCII")
}

pub fn read_graph<R: BufRead>(reader: R) -> Result<AlignmentGraph> {
    let mut lines = content_lines(reader);
    let (hline, header) = lines.next().ok_or_else(|| parse_err(1, "empty graph file"))??;
    let mut toks = header.split_whitespace();
    if toks.next() != Some("n") {
        return Err(parse_err(hline, "expected header `n <count>`"));
    }
    let n: usize = field(toks.next(), hline, "node count")?;
    let mut edges = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for item in lines {
        let (line, text) = item?;
        let mut toks = text.split_whitespace();
        let i: usize = field(toks.next(), line, "i")?;
        let j: usize = field(toks.next(), line, "j")?;
        let w: f64 = field(toks.next(), line, "weight")?;
        let a: f64 = field(toks.next(), line, "angle")?;
        if toks.next().is_some() {
            return Err(parse_err(line, "trailing fields"));
        }
        if i == j {
            return Err(parse_err(line, format!("self-loop at node {i}")));
        }
        if i > j {
            return Err(parse_err(line, format!("edge ({i}, {j}) must be listed with i < j")));
        }
        if i >= n || j >= n {
            return Err(parse_err(line, format!("edge ({i}, {j}) out of range for n = {n}")));
        }
        if !(0.0..std::f64::consts::TAU).contains(&a) {
            return Err(parse_err(line, format!("angle {a} outside [0, 2π)")));
        }
        if !seen.insert((i, j)) {
            return Err(parse_err(line, format!("duplicate edge ({i}, {j})")));
        }
        edges.push(Edge::new(i, j, w, a));
    }
    AlignmentGraph::new(n, edges)
}

pub fn save_graph(graph: &AlignmentGraph, path: &Path) -> Result<()> {
    write_file(path, graph_to_string(graph).as_bytes())
}

pub fn load_graph(path: &Path) -> Result<AlignmentGraph> {
    read_graph(BufReader::new(fs::File::open(path)?))
}

/// SHA-256 of the canonical graph text, hex encoded.
pub fn graph_hash(graph: &AlignmentGraph) -> String {
    hex::encode(Sha256::digest(graph_to_string(graph).as_bytes()))
}

/// Ground truth text: `sphere <n>` followed by one row-major rotation (nine
/// numbers) per line, or `torus <n> <R> <r>` followed by `u v frame_angle`.
pub fn write_ground_truth<W: Write>(truth: &GroundTruth, mut out: W) -> Result<()> {
    match truth {
        GroundTruth::Sphere { rotations } => {
            writeln!(out, "sphere {}", rotations.len())?;
            for r in rotations {
                let m = r.matrix();
                let row: Vec<String> = (0..3)
                    .flat_map(|a| (0..3).map(move |b| (a, b)))
                    .map(|(a, b)| format!("{:.16e}", m[(a, b)]))
                    .collect();
                writeln!(out, "{}", row.join(" "))?;
            }
        }
        GroundTruth::Torus { samples, radii } => {
            writeln!(
                out,
                "torus {} {:.16e} {:.16e}",
                samples.len(),
                radii.major,
                radii.minor
            )?;
            for s in samples {
                writeln!(out, "{:.16e} {:.16e} {:.16e}", s.u, s.v, s.frame_angle)?;
            }
        }
    }
    Ok(())
}

pub fn read_ground_truth<R: BufRead>(reader: R) -> Result<GroundTruth> {
    let mut lines = content_lines(reader);
    let (hline, header) = lines.next().ok_or_else(|| parse_err(1, "empty ground-truth file"))??;
    let mut toks = header.split_whitespace();
    let kind = toks.next().unwrap_or_default().to_string();
    let n: usize = field(toks.next(), hline, "node count")?;
    let truth = match kind.as_str() {
        "sphere" => {
            let mut rotations = Vec::with_capacity(n);
            for item in lines {
                let (line, text) = item?;
                let vals = text
                    .split_whitespace()
                    .map(|t| field::<f64>(Some(t), line, "matrix entry"))
                    .collect::<Result<Vec<_>>>()?;
                if vals.len() != 9 {
                    return Err(parse_err(line, "expected nine matrix entries"));
                }
                let m = Matrix3::from_row_slice(&vals);
                rotations.push(RotationSample::new(m).map_err(|e| parse_err(line, e.to_string()))?);
            }
            GroundTruth::Sphere { rotations }
        }
        "torus" => {
            let major: f64 = field(toks.next(), hline, "major radius")?;
            let minor: f64 = field(toks.next(), hline, "minor radius")?;
            let radii = TorusRadii::new(major, minor)?;
            let mut samples = Vec::with_capacity(n);
            for item in lines {
                let (line, text) = item?;
                let mut t = text.split_whitespace();
                let u: f64 = field(t.next(), line, "u")?;
                let v: f64 = field(t.next(), line, "v")?;
                let frame_angle: f64 = field(t.next(), line, "frame angle")?;
                samples.push(TorusSample {
                    u,
                    v,
                    position: radii.point(u, v),
                    frame_angle,
                    radii,
                });
            }
            GroundTruth::Torus { samples, radii }
        }
        other => return Err(parse_err(hline, format!("unknown manifold {other:?}"))),
    };
    if truth.n() != n {
        return Err(parse_err(hline, format!("header says {n} nodes, found {}", truth.n())));
    }
    Ok(truth)
}

pub fn save_ground_truth(truth: &GroundTruth, path: &Path) -> Result<()> {
    let mut buf = Vec::new();
    write_ground_truth(truth, &mut buf)?;
    write_file(path, &buf)
}

pub fn load_ground_truth(path: &Path) -> Result<GroundTruth> {
    read_ground_truth(BufReader::new(fs::File::open(path)?))
}

/// Little-endian binary dump: magic, `k: u32`, `n: u64`, `m: u64`, the `m`
/// eigenvalues, the `m` residuals, then the eigenvectors column by column as
/// `(re, im)` pairs.
pub fn encode_bundle(bundle: &SpectralBundle) -> Vec<u8> {
    let (n, m) = (bundle.n(), bundle.m());
    let mut buf = Vec::with_capacity(28 + 16 * m + 16 * n * m);
    buf.extend_from_slice(BUNDLE_MAGIC);
    buf.extend_from_slice(&bundle.k.to_le_bytes());
    buf.extend_from_slice(&(n as u64).to_le_bytes());
    buf.extend_from_slice(&(m as u64).to_le_bytes());
    for x in bundle.eigenvalues.iter().chain(&bundle.residuals) {
        buf.extend_from_slice(&x.to_le_bytes());
    }
    for c in bundle.eigenvectors.iter() {
        buf.extend_from_slice(&c.re.to_le_bytes());
        buf.extend_from_slice(&c.im.to_le_bytes());
    }
    buf
}

pub fn decode_bundle(bytes: &[u8]) -> Result<SpectralBundle> {
    let bad = |msg: &str| parse_err(0, format!("spectral bundle: {msg}"));
    if bytes.len() < 28 || &bytes[..8] != BUNDLE_MAGIC {
        return Err(bad("bad magic"));
    }
    let k = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
    let n = u64::from_le_bytes(bytes[12..20].try_into().unwrap()) as usize;
    let m = u64::from_le_bytes(bytes[20..28].try_into().unwrap()) as usize;
    let expected = n
        .checked_mul(m)
        .and_then(|nm| nm.checked_add(m))
        .and_then(|x| x.checked_mul(16))
        .and_then(|x| x.checked_add(28));
    if expected != Some(bytes.len()) {
        return Err(bad("length does not match header"));
    }
    let mut floats = bytes[28..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()));
    let eigenvalues: Vec<f64> = floats.by_ref().take(m).collect();
    let residuals: Vec<f64> = floats.by_ref().take(m).collect();
    let mut data = Vec::with_capacity(n * m);
    while let (Some(re), Some(im)) = (floats.next(), floats.next()) {
        data.push(Complex64::new(re, im));
    }
    Ok(SpectralBundle {
        k,
        eigenvalues,
        eigenvectors: DMatrix::from_vec(n, m, data),
        residuals,
    })
}

pub fn save_bundle(bundle: &SpectralBundle, path: &Path) -> Result<()> {
    write_file(path, &encode_bundle(bundle))
}

pub fn load_bundle(path: &Path) -> Result<SpectralBundle> {
    let mut bytes = Vec::new();
    fs::File::open(path)?.read_to_end(&mut bytes)?;
    decode_bundle(&bytes)
}

/// `node,rank,neighbor,squared_distance`, rank starting at 1.
pub fn write_neighbors_csv<W: Write>(nn: &NeighborList, out: W) -> Result<()> {
    let mut out = BufWriter::new(out);
    writeln!(out, "node,rank,neighbor,squared_distance")?;
    for (i, rank, j, d2) in nn.iter() {
        writeln!(out, "{i},{},{j},{d2:.16e}", rank + 1)?;
    }
    out.flush()?;
    Ok(())
}

/// `i,j,alpha_hat_radians,objective_value`.
pub fn write_alignment_csv<W: Write>(estimates: &[PairEstimate], out: W) -> Result<()> {
    let mut out = BufWriter::new(out);
    writeln!(out, "i,j,alpha_hat_radians,objective_value")?;
    for e in estimates {
        writeln!(
            out,
            "{},{},{:.16e},{:.16e}",
            e.i, e.j, e.estimate.alpha, e.estimate.objective
        )?;
    }
    out.flush()?;
    Ok(())
}

/// `bin_lo,bin_hi,count`.
pub fn write_histogram_csv<W: Write>(hist: &Histogram, out: W) -> Result<()> {
    let mut out = BufWriter::new(out);
    writeln!(out, "bin_lo,bin_hi,count")?;
    for (b, c) in hist.counts.iter().enumerate() {
        writeln!(out, "{:.16e},{:.16e},{c}", hist.edges[b], hist.edges[b + 1])?;
    }
    out.flush()?;
    Ok(())
}

/// `index,laplacian_eigenvalue,cluster` with 1-based cluster numbers.
pub fn write_spectrum_csv<W: Write>(report: &SpectralReport, out: W) -> Result<()> {
    let mut out = BufWriter::new(out);
    writeln!(out, "index,laplacian_eigenvalue,cluster")?;
    for (c, cluster) in report.clusters.iter().enumerate() {
        for idx in cluster.start..cluster.start + cluster.size {
            writeln!(out, "{idx},{:.16e},{}", report.laplacian_eigenvalues[idx], c + 1)?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn save_text(path: &Path, text: &str) -> Result<()> {
    write_file(path, text.as_bytes())
}

/// Render with a CSV writer and store atomically.
pub fn save_csv<F>(path: &Path, render: F) -> Result<()>
where
    F: FnOnce(&mut Vec<u8>) -> Result<()>,
{
    let mut buf = Vec::new();
    render(&mut buf)?;
    write_file(path, &buf)
}

pub fn save_json<T: serde::Serialize>(value: &T, path: &Path) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::Io(std::io::Error::other(e)))?;
    text.push('\n');
    write_file(path, text.as_bytes())
}
