//! File formats for every pipeline artifact. See docs/FORMATS.md for the
//! byte-level contracts.
//!
//! All text formats round-trip finite doubles exactly (shortest
//! representation that parses back to the same bits); the binary formats are
//! little-endian with fixed headers.

use crate::complex::{CliqueComplex, GraphRule, NeighborhoodGraph};
use crate::error::{Error, Result};
use crate::heatmap::Heatmap;
use crate::measures::{Dataset, PointCloud};
use crate::ot::DistanceMatrix;
use crate::sampler::AugmentedSample;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

fn parse_err(path: &Path, record: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        record,
        message: message.into(),
    }
}

// ---------------------------------------------------------------------------
// landmark files
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
struct LandmarkFile {
    ordered: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    n_points: Option<usize>,
    landmarks: Vec<Vec<[f64; 2]>>,
}

/// Read the JSON landmark format into a validated dataset.
pub fn read_landmarks(path: &Path) -> Result<Dataset> {
    let file = std::fs::File::open(path)?;
    let parsed: LandmarkFile = serde_json::from_reader(BufReader::new(file))
        .map_err(|e| parse_err(path, 0, e.to_string()))?;
    if let Some(s) = parsed.n_points {
        if let Some((i, c)) = parsed
            .landmarks
            .iter()
            .enumerate()
            .find(|(_, c)| c.len() != s)
        {
            return Err(parse_err(
                path,
                i,
                format!("declared n_points = {s} but cloud has {}", c.len()),
            ));
        }
    }
    let clouds = parsed
        .landmarks
        .into_iter()
        .enumerate()
        .map(|(i, pts)| {
            PointCloud::uniform(pts, parsed.ordered).map_err(|e| parse_err(path, i, e.to_string()))
        })
        .collect::<Result<Vec<_>>>()?;
    Dataset::new(clouds)
}

/// Write a dataset in the JSON landmark format.
pub fn write_landmarks(path: &Path, d: &Dataset) -> Result<()> {
    let record = LandmarkFile {
        ordered: d.ordered(),
        n_points: d.uniform_cardinality(),
        landmarks: d.clouds().iter().map(|c| c.points().to_vec()).collect(),
    };
    let file = std::fs::File::create(path)?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer(&mut w, &record).map_err(|e| Error::Io(e.into()))?;
    w.write_all(b"\n")?;
    Ok(())
}

/// CSV import: one cloud per row, `2s` columns `x1,y1,...,xs,ys`.
/// Cardinality may vary between rows.
pub fn read_landmarks_csv(path: &Path, ordered: bool) -> Result<Dataset> {
    let file = std::fs::File::open(path)?;
    let mut clouds = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let vals: Vec<f64> = line
            .split(',')
            .map(|t| {
                t.trim()
                    .parse::<f64>()
                    .map_err(|e| parse_err(path, i, format!("bad number {t:?}: {e}")))
            })
            .collect::<Result<_>>()?;
        if vals.len() % 2 != 0 {
            return Err(parse_err(path, i, format!("odd column count {}", vals.len())));
        }
        let pts: Vec<[f64; 2]> = vals.chunks(2).map(|c| [c[0], c[1]]).collect();
        clouds.push(PointCloud::uniform(pts, ordered).map_err(|e| parse_err(path, i, e.to_string()))?);
    }
    Dataset::new(clouds)
}

// ---------------------------------------------------------------------------
// distance matrices
// ---------------------------------------------------------------------------

/// Dense CSV: `n` header-less rows of `n` comma-separated values.
pub fn write_matrix_csv(path: &Path, m: &DistanceMatrix) -> Result<()> {
    let file = std::fs::File::create(path)?;
    let mut w = BufWriter::new(file);
    let n = m.n();
    for i in 0..n {
        let row: Vec<String> = (0..n).map(|j| format!("{}", m.get(i, j))).collect();
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}

/// Read a dense CSV matrix; `method` is recorded as unknown if not supplied.
pub fn read_matrix_csv(path: &Path, method: Option<String>) -> Result<DistanceMatrix> {
    let file = std::fs::File::open(path)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        rows.push(
            line.split(',')
                .map(|t| {
                    t.trim()
                        .parse::<f64>()
                        .map_err(|e| parse_err(path, i, format!("bad number {t:?}: {e}")))
                })
                .collect::<Result<_>>()?,
        );
    }
    let n = rows.len();
    if rows.iter().any(|r| r.len() != n) {
        return Err(parse_err(path, 0, "matrix is not square"));
    }
    let values = rows.into_iter().flatten().collect();
    DistanceMatrix::from_values(n, values, method.unwrap_or_else(|| "unknown".into()))
}

const MATRIX_MAGIC: &[u8; 4] = b"BAWC";
const MATRIX_VERSION: u32 = 1;

/// Binary matrix cache with a fingerprint (input digest + method) so graph
/// construction can detect stale caches.
pub fn write_matrix_cache(path: &Path, m: &DistanceMatrix, input_digest: &str) -> Result<()> {
    let file = std::fs::File::create(path)?;
    let mut w = BufWriter::new(file);
    w.write_all(MATRIX_MAGIC)?;
    w.write_all(&MATRIX_VERSION.to_le_bytes())?;
    w.write_all(&(m.n() as u64).to_le_bytes())?;
    let write_str = |w: &mut BufWriter<std::fs::File>, s: &str| -> Result<()> {
        w.write_all(&(s.len() as u32).to_le_bytes())?;
        w.write_all(s.as_bytes())?;
        Ok(())
    };
    write_str(&mut w, input_digest)?;
    write_str(&mut w, m.method())?;
    for v in m.values() {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

/// Load a cached matrix, verifying the fingerprint. A digest or method
/// mismatch is a [`Error::StaleCache`].
pub fn read_matrix_cache(
    path: &Path,
    expected_digest: &str,
    expected_method: &str,
) -> Result<DistanceMatrix> {
    let file = std::fs::File::open(path)?;
    let mut r = BufReader::new(file);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MATRIX_MAGIC {
        return Err(parse_err(path, 0, "bad magic"));
    }
    let mut buf4 = [0u8; 4];
    r.read_exact(&mut buf4)?;
    if u32::from_le_bytes(buf4) != MATRIX_VERSION {
        return Err(parse_err(path, 0, "unsupported cache version"));
    }
    let mut buf8 = [0u8; 8];
    r.read_exact(&mut buf8)?;
    let n = u64::from_le_bytes(buf8) as usize;
    let read_str = |r: &mut BufReader<std::fs::File>| -> Result<String> {
        let mut b4 = [0u8; 4];
        r.read_exact(&mut b4)?;
        let mut s = vec![0u8; u32::from_le_bytes(b4) as usize];
        r.read_exact(&mut s)?;
        String::from_utf8(s).map_err(|e| parse_err(path, 0, e.to_string()))
    };
    let digest = read_str(&mut r)?;
    let method = read_str(&mut r)?;
    if digest != expected_digest {
        return Err(Error::StaleCache(format!(
            "input digest changed ({digest} != {expected_digest})"
        )));
    }
    if method != expected_method {
        return Err(Error::StaleCache(format!(
            "method changed ({method} != {expected_method})"
        )));
    }
    let mut values = vec![0.0f64; n * n];
    for v in values.iter_mut() {
        r.read_exact(&mut buf8)?;
        *v = f64::from_le_bytes(buf8);
    }
    DistanceMatrix::from_values(n, values, method)
}

// ---------------------------------------------------------------------------
// graphs and clique complexes
// ---------------------------------------------------------------------------

/// Line-oriented graph format: `n <N>` then `edge i j` per edge.
pub fn write_graph(path: &Path, g: &NeighborhoodGraph) -> Result<()> {
    let file = std::fs::File::create(path)?;
    let mut w = BufWriter::new(file);
    writeln!(w, "n {}", g.n())?;
    for (a, b) in g.edges() {
        writeln!(w, "edge {a} {b}")?;
    }
    Ok(())
}

pub fn read_graph(path: &Path) -> Result<NeighborhoodGraph> {
    let file = std::fs::File::open(path)?;
    let mut n = None;
    let mut edges = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        let tokens: Vec<&str> = line.split_whitespace().collect();
        match tokens.as_slice() {
            [] => {}
            ["n", v] => {
                n = Some(
                    v.parse::<usize>()
                        .map_err(|e| parse_err(path, i, e.to_string()))?,
                )
            }
            ["edge", a, b] => {
                let a = a
                    .parse::<usize>()
                    .map_err(|e| parse_err(path, i, e.to_string()))?;
                let b = b
                    .parse::<usize>()
                    .map_err(|e| parse_err(path, i, e.to_string()))?;
                edges.push((a, b));
            }
            _ => return Err(parse_err(path, i, format!("unrecognized line {line:?}"))),
        }
    }
    let n = n.ok_or_else(|| parse_err(path, 0, "missing `n` header"))?;
    NeighborhoodGraph::from_edges(n, edges, GraphRule::Knn { k: 0, mutual: false })
        .map_err(|e| parse_err(path, 0, e.to_string()))
}

/// Line-oriented complex format: `n <N>` then `clique i j k ...` per clique.
pub fn write_cliques(path: &Path, c: &CliqueComplex) -> Result<()> {
    let file = std::fs::File::create(path)?;
    let mut w = BufWriter::new(file);
    writeln!(w, "n {}", c.n_vertices())?;
    for clique in c.cliques() {
        let verts: Vec<String> = clique.iter().map(|v| v.to_string()).collect();
        writeln!(w, "clique {}", verts.join(" "))?;
    }
    Ok(())
}

pub fn read_cliques(path: &Path) -> Result<CliqueComplex> {
    let file = std::fs::File::open(path)?;
    let mut n = None;
    let mut cliques = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        let tokens: Vec<&str> = line.split_whitespace().collect();
        match tokens.as_slice() {
            [] => {}
            ["n", v] => {
                n = Some(
                    v.parse::<usize>()
                        .map_err(|e| parse_err(path, i, e.to_string()))?,
                )
            }
            ["clique", rest @ ..] if !rest.is_empty() => {
                cliques.push(
                    rest.iter()
                        .map(|t| {
                            t.parse::<usize>()
                                .map_err(|e| parse_err(path, i, e.to_string()))
                        })
                        .collect::<Result<Vec<_>>>()?,
                );
            }
            _ => return Err(parse_err(path, i, format!("unrecognized line {line:?}"))),
        }
    }
    let n = n.ok_or_else(|| parse_err(path, 0, "missing `n` header"))?;
    CliqueComplex::from_cliques(n, cliques).map_err(|e| parse_err(path, 0, e.to_string()))
}

// ---------------------------------------------------------------------------
// heatmaps
// ---------------------------------------------------------------------------

const HEATMAP_MAGIC: &[u8; 4] = b"BAHM";

/// Raw tensor as stored in the binary heatmap format.
#[derive(Debug, Clone, PartialEq)]
pub struct RawHeatmap {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub data: Vec<f64>,
}

/// Flat binary: 16-byte header (magic, channels, H, W as little-endian u32)
/// followed by channel-major row-major f64 values.
pub fn write_heatmap(path: &Path, h: &Heatmap) -> Result<()> {
    let file = std::fs::File::create(path)?;
    let mut w = BufWriter::new(file);
    w.write_all(HEATMAP_MAGIC)?;
    w.write_all(&(h.channels() as u32).to_le_bytes())?;
    w.write_all(&(h.height() as u32).to_le_bytes())?;
    w.write_all(&(h.width() as u32).to_le_bytes())?;
    for v in h.data() {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_heatmap(path: &Path) -> Result<RawHeatmap> {
    let file = std::fs::File::open(path)?;
    let mut r = BufReader::new(file);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != HEATMAP_MAGIC {
        return Err(parse_err(path, 0, "bad magic"));
    }
    let mut b4 = [0u8; 4];
    let mut dims = [0usize; 3];
    for d in dims.iter_mut() {
        r.read_exact(&mut b4)?;
        *d = u32::from_le_bytes(b4) as usize;
    }
    let [channels, height, width] = dims;
    let mut data = vec![0.0f64; channels * height * width];
    let mut b8 = [0u8; 8];
    for v in data.iter_mut() {
        r.read_exact(&mut b8)?;
        *v = f64::from_le_bytes(b8);
    }
    Ok(RawHeatmap {
        channels,
        height,
        width,
        data,
    })
}

/// Portable text grid for small tests: header `channels height width sigma`,
/// then per channel `height` lines of `width` space-separated values with a
/// blank line between channels.
pub fn write_heatmap_text(path: &Path, h: &Heatmap) -> Result<()> {
    let file = std::fs::File::create(path)?;
    let mut w = BufWriter::new(file);
    writeln!(w, "{} {} {} {}", h.channels(), h.height(), h.width(), h.sigma())?;
    for c in 0..h.channels() {
        for i in 0..h.height() {
            let row: Vec<String> = (0..h.width()).map(|j| format!("{}", h.get(c, i, j))).collect();
            writeln!(w, "{}", row.join(" "))?;
        }
        if c + 1 < h.channels() {
            writeln!(w)?;
        }
    }
    Ok(())
}

pub fn read_heatmap_text(path: &Path) -> Result<(RawHeatmap, f64)> {
    let file = std::fs::File::open(path)?;
    let mut lines = BufReader::new(file).lines();
    let header = lines
        .next()
        .ok_or_else(|| parse_err(path, 0, "empty file"))??;
    let head: Vec<&str> = header.split_whitespace().collect();
    if head.len() != 4 {
        return Err(parse_err(path, 0, "header must be `channels height width sigma`"));
    }
    let channels: usize = head[0].parse().map_err(|e: std::num::ParseIntError| parse_err(path, 0, e.to_string()))?;
    let height: usize = head[1].parse().map_err(|e: std::num::ParseIntError| parse_err(path, 0, e.to_string()))?;
    let width: usize = head[2].parse().map_err(|e: std::num::ParseIntError| parse_err(path, 0, e.to_string()))?;
    let sigma: f64 = head[3].parse().map_err(|e: std::num::ParseFloatError| parse_err(path, 0, e.to_string()))?;
    let mut data = Vec::with_capacity(channels * height * width);
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        for t in line.split_whitespace() {
            data.push(
                t.parse::<f64>()
                    .map_err(|e| parse_err(path, i + 1, e.to_string()))?,
            );
        }
    }
    if data.len() != channels * height * width {
        return Err(parse_err(
            path,
            0,
            format!("expected {} values, got {}", channels * height * width, data.len()),
        ));
    }
    Ok((
        RawHeatmap {
            channels,
            height,
            width,
            data,
        },
        sigma,
    ))
}

// ---------------------------------------------------------------------------
// provenance and manifests
// ---------------------------------------------------------------------------

/// One line of the augmentation sidecar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProvenanceRecord {
    pub index: usize,
    pub seed: u64,
    pub clique: Vec<usize>,
    pub lambda: Vec<f64>,
    /// Present only for runs with a configured bounding box.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub outside_bbox: bool,
}

/// Line-delimited JSON, one record per sample, in sample order.
pub fn write_provenance(path: &Path, samples: &[AugmentedSample]) -> Result<()> {
    let file = std::fs::File::create(path)?;
    let mut w = BufWriter::new(file);
    for (index, s) in samples.iter().enumerate() {
        let record = ProvenanceRecord {
            index,
            seed: s.seed,
            clique: s.clique_vertices.clone(),
            lambda: s.lambda.as_slice().to_vec(),
            outside_bbox: s.outside_bbox,
        };
        serde_json::to_writer(&mut w, &record).map_err(|e| Error::Io(e.into()))?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_provenance(path: &Path) -> Result<Vec<ProvenanceRecord>> {
    let file = std::fs::File::open(path)?;
    BufReader::new(file)
        .lines()
        .enumerate()
        .filter(|(_, l)| !matches!(l, Ok(s) if s.trim().is_empty()))
        .map(|(i, line)| {
            let line = line?;
            serde_json::from_str(&line).map_err(|e| parse_err(path, i, e.to_string()))
        })
        .collect()
}

/// Reproducibility record written next to every command's output.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config: serde_json::Value,
    /// sha256 of every input file, keyed by path as given.
    pub input_digests: BTreeMap<String, String>,
    pub seed: Option<u64>,
    pub tool_version: String,
    /// Wall time per stage; informational, not part of the replay contract.
    pub timings_ms: BTreeMap<String, u64>,
}

pub fn write_manifest(path: &Path, m: &RunManifest) -> Result<()> {
    let file = std::fs::File::create(path)?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, m).map_err(|e| Error::Io(e.into()))?;
    w.write_all(b"\n")?;
    Ok(())
}

pub fn read_manifest(path: &Path) -> Result<RunManifest> {
    let file = std::fs::File::open(path)?;
    serde_json::from_reader(BufReader::new(file)).map_err(|e| parse_err(path, 0, e.to_string()))
}

/// Hex sha256 of a file's bytes.
pub fn sha256_file(path: &Path) -> Result<String> {
    let mut file = std::fs::File::open(path)?;
    let mut hasher = Sha256::new();
    std::io::copy(&mut file, &mut hasher)?;
    Ok(hasher
        .finalize()
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect())
}
