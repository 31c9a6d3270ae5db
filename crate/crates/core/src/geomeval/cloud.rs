use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use super::EvalError;
use crate::math::Vec3;
use crate::render::{part_centroids, LabeledCentroid, LabeledCentroids, PointCloud};
use crate::scene::parse_program;

/// A point cloud together with the names of its label indices, if any.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LoadedCloud {
    pub cloud: PointCloud,
    pub label_names: Option<Vec<String>>,
}

fn sidecar(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".labels.json");
    PathBuf::from(s)
}

fn format_err(path: &Path, msg: impl std::fmt::Display) -> EvalError {
    EvalError::Format(format!("{}: {msg}", path.display()))
}

fn parse_text(path: &Path, text: &str) -> Result<PointCloud, EvalError> {
    let mut points = Vec::new();
    let mut labels = Vec::new();
    let mut columns = None;
    for (n, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(|c: char| c.is_whitespace() || c == ',').filter(|f| !f.is_empty()).collect();
        if fields.len() != 3 && fields.len() != 4 {
            return Err(format_err(path, format!("line {}: expected 3 or 4 columns, found {}", n + 1, fields.len())));
        }
        if *columns.get_or_insert(fields.len()) != fields.len() {
            return Err(format_err(path, format!("line {}: inconsistent column count", n + 1)));
        }
        let mut xyz = [0.0; 3];
        for (k, f) in fields[..3].iter().enumerate() {
            xyz[k] = f.parse().map_err(|_| format_err(path, format!("line {}: bad number {f:?}", n + 1)))?;
        }
        points.push(Vec3::from(xyz));
        if let Some(f) = fields.get(3) {
            let label: f64 = f.parse().map_err(|_| format_err(path, format!("line {}: bad label {f:?}", n + 1)))?;
            if label < 0.0 || label.fract() != 0.0 {
                return Err(format_err(path, format!("line {}: label must be a non-negative integer", n + 1)));
            }
            labels.push(label as usize);
        }
    }
    Ok(PointCloud { points, labels: (columns == Some(4)).then_some(labels) })
}

fn parse_binary(path: &Path, bytes: &[u8], labeled: bool) -> Result<PointCloud, EvalError> {
    let stride = if labeled { 16 } else { 12 };
    if bytes.len() % stride != 0 {
        return Err(format_err(path, format!("size {} is not a multiple of the {stride}-byte record", bytes.len())));
    }
    let f = |b: &[u8]| f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64;
    let mut points = Vec::with_capacity(bytes.len() / stride);
    let mut labels = Vec::new();
    for rec in bytes.chunks_exact(stride) {
        points.push(Vec3::new(f(&rec[0..4]), f(&rec[4..8]), f(&rec[8..12])));
        if labeled {
            labels.push(u32::from_le_bytes([rec[12], rec[13], rec[14], rec[15]]) as usize);
        }
    }
    Ok(PointCloud { points, labels: labeled.then_some(labels) })
}

/// Reads a cloud from whitespace/comma separated text (`x y z [label]`) or,
/// for `.bin` files, little-endian `f32` triples followed by a `u32` label
/// when a `<file>.labels.json` sidecar is present.
pub fn load_cloud(path: &Path) -> Result<LoadedCloud, EvalError> {
    let side = sidecar(path);
    let label_names: Option<Vec<String>> = if side.exists() {
        let text = std::fs::read_to_string(&side)?;
        Some(serde_json::from_str(&text).map_err(|e| format_err(&side, e))?)
    } else {
        None
    };
    let cloud = if path.extension().is_some_and(|e| e == "bin") {
        parse_binary(path, &std::fs::read(path)?, label_names.is_some())?
    } else {
        parse_text(path, &std::fs::read_to_string(path)?)?
    };
    if cloud.is_empty() {
        return Err(EvalError::EmptyCloud);
    }
    if let (Some(labels), Some(names)) = (&cloud.labels, &label_names) {
        if let Some(bad) = labels.iter().find(|&&l| l >= names.len()) {
            return Err(format_err(path, format!("label index {bad} outside the {} sidecar names", names.len())));
        }
    }
    Ok(LoadedCloud { cloud, label_names })
}

/// One centroid per label index. Indices sharing a name stay separate
/// instances; without a sidecar the index itself is the name.
pub fn centroids_from_cloud(loaded: &LoadedCloud) -> Result<LabeledCentroids, EvalError> {
    let labels = loaded
        .cloud
        .labels
        .as_ref()
        .ok_or_else(|| EvalError::Format("cloud has no per-point labels".into()))?;
    let mut sums: BTreeMap<usize, (Vec3, usize)> = BTreeMap::new();
    for (p, &l) in loaded.cloud.points.iter().zip(labels) {
        let e = sums.entry(l).or_insert((Vec3::zeros(), 0));
        e.0 += p;
        e.1 += 1;
    }
    Ok(LabeledCentroids {
        entries: sums
            .into_iter()
            .map(|(l, (sum, n))| LabeledCentroid {
                label: loaded.label_names.as_ref().map_or_else(|| format!("part{l}"), |names| names[l].clone()),
                centroid: sum / n as f64,
            })
            .collect(),
    })
}

#[derive(Deserialize)]
#[serde(untagged)]
enum CentroidFile {
    Wrapped(LabeledCentroids),
    List(Vec<LabeledCentroid>),
}

/// Centroids from a JSON centroid file, a ProtoScene program or a labeled cloud.
pub fn load_centroids(path: &Path) -> Result<LabeledCentroids, EvalError> {
    let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("");
    let centroids = match ext {
        "json" => {
            let text = std::fs::read_to_string(path)?;
            match serde_json::from_str::<CentroidFile>(&text).map_err(|e| format_err(path, e))? {
                CentroidFile::Wrapped(c) => c,
                CentroidFile::List(entries) => LabeledCentroids { entries },
            }
        }
        "psc" => {
            let text = std::fs::read_to_string(path)?;
            part_centroids(&parse_program(&text).map_err(|e| format_err(path, e))?)
        }
        _ => centroids_from_cloud(&load_cloud(path)?)?,
    };
    if centroids.entries.is_empty() {
        return Err(format_err(path, "no centroids"));
    }
    Ok(centroids)
}

/// Every target in `dir`, keyed by file stem and sorted by id. Label sidecars
/// are not targets themselves.
pub fn load_targets(dir: &Path) -> Result<Vec<(String, LabeledCentroids)>, EvalError> {
    if !dir.is_dir() {
        return Err(EvalError::Io(format!("{}: not a directory", dir.display())));
    }
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir)? {
        let path = entry?.path();
        let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("");
        if !path.is_file() || name.ends_with(".labels.json") || name.starts_with('.') {
            continue;
        }
        let id = path.file_stem().and_then(|s| s.to_str()).unwrap_or(name).to_string();
        out.push((id, load_centroids(&path)?));
    }
    if out.is_empty() {
        return Err(EvalError::Io(format!("{}: no targets found", dir.display())));
    }
    out.sort_by(|a, b| a.0.cmp(&b.0));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_cloud_with_sidecar_gives_instance_centroids() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.txt");
        std::fs::write(&path, "# x y z label\n0 0 0 0\n2 0 0 0\n0,0,1,1\n0 0 3 2\n").unwrap();
        std::fs::write(sidecar(&path), r#"["seat","leg","leg"]"#).unwrap();
        let c = centroids_from_cloud(&load_cloud(&path).unwrap()).unwrap();
        let labels: Vec<_> = c.entries.iter().map(|e| e.label.as_str()).collect();
        assert_eq!(labels, ["seat", "leg", "leg"]);
        assert_eq!(c.entries[0].centroid, Vec3::new(1.0, 0.0, 0.0));
        assert_eq!(c.entries[2].centroid, Vec3::new(0.0, 0.0, 3.0));
    }

    #[test]
    fn binary_cloud() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.bin");
        let mut bytes = Vec::new();
        for (p, l) in [([1.0f32, 2.0, 3.0], 0u32), ([3.0, 2.0, 1.0], 1)] {
            p.iter().for_each(|v| bytes.extend(v.to_le_bytes()));
            bytes.extend(l.to_le_bytes());
        }
        std::fs::write(&path, &bytes).unwrap();
        std::fs::write(sidecar(&path), r#"["a","b"]"#).unwrap();
        let loaded = load_cloud(&path).unwrap();
        assert_eq!(loaded.cloud.labels, Some(vec![0, 1]));
        assert_eq!(loaded.cloud.points[1], Vec3::new(3.0, 2.0, 1.0));
        std::fs::write(&path, &bytes[..20]).unwrap();
        assert!(matches!(load_cloud(&path), Err(EvalError::Format(_))));
    }

    #[test]
    fn targets_directory() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("b.json"), r#"[{"label":"seat","centroid":[0,0,1]}]"#).unwrap();
        std::fs::write(dir.path().join("a.json"), r#"{"entries":[{"label":"leg","centroid":[1,0,0]}]}"#).unwrap();
        let t = load_targets(dir.path()).unwrap();
        assert_eq!(t.iter().map(|x| x.0.as_str()).collect::<Vec<_>>(), ["a", "b"]);
        assert!(matches!(load_targets(&dir.path().join("missing")), Err(EvalError::Io(_))));
        std::fs::write(dir.path().join("bad.txt"), "1 2\n").unwrap();
        assert!(matches!(load_targets(dir.path()), Err(EvalError::Format(_))));
    }
}
