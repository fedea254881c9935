//! Artifact persistence.
//!
//! Every writer goes through a temp-file rename so interrupted runs
//! never leave a half-written artifact. Self-describing text formats
//! carry a leading `#` JSON line with shape and provenance; dense
//! embedding tables are raw little-endian f32 with a JSON sidecar.

use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::{Read as _, Write as _};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dataset::{Fold, Interaction, RawInteraction, RawItem, SplitDataset};
use crate::error::{Error, Result};
use crate::mat::{Csr, Dense, Pattern};
use crate::preferences::HistBin;
use crate::selection::DirectedSubgraphs;

pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let digest = hasher.finalize();
    let mut out = String::with_capacity(64);
    for b in digest {
        out.push_str(&format!("{b:02x}"));
    }
    out
}

pub fn file_sha256(path: &Path) -> Result<String> {
    Ok(sha256_hex(&fs::read(path)?))
}

/// Write via a temp file in the same directory, then rename into place.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    let name = path
        .file_name()
        .ok_or_else(|| Error::data(format!("not a file path: {}", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp", name.to_string_lossy()));
    {
        let mut f = File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

fn read_to_string(path: &Path) -> Result<String> {
    let mut s = String::new();
    File::open(path)
        .map_err(|e| Error::data(format!("cannot open {}: {e}", path.display())))?
        .read_to_string(&mut s)?;
    Ok(s)
}

/// Splits a `# {json}` first line off a text artifact.
fn split_json_header<'a>(text: &'a str, path: &Path) -> Result<(&'a str, &'a str)> {
    let rest = text
        .strip_prefix("# ")
        .ok_or_else(|| Error::data(format!("{}: missing JSON header line", path.display())))?;
    let eol = rest
        .find('\n')
        .ok_or_else(|| Error::data(format!("{}: truncated header", path.display())))?;
    Ok((&rest[..eol], &rest[eol + 1..]))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MatrixMeta {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub source: String,
}

/// Sparse matrix as `row,col,value` CSV under a JSON header.
pub fn write_sparse_csv(path: &Path, meta: &MatrixMeta, m: &Csr<f64>) -> Result<()> {
    if meta.rows != m.rows() || meta.cols != m.cols() {
        return Err(Error::data("matrix meta shape mismatch"));
    }
    let mut out = format!("# {}\n", serde_json::to_string(meta)?);
    out.push_str("row,col,value\n");
    for (r, c, v) in m.iter() {
        out.push_str(&format!("{r},{c},{v}\n"));
    }
    atomic_write(path, out.as_bytes())
}

pub fn read_sparse_csv(path: &Path) -> Result<(MatrixMeta, Csr<f64>)> {
    let text = read_to_string(path)?;
    let (header, body) = split_json_header(&text, path)?;
    let meta: MatrixMeta = serde_json::from_str(header)
        .map_err(|e| Error::data(format!("{}: bad header: {e}", path.display())))?;
    let mut triplets = Vec::new();
    for (ln, line) in body.lines().enumerate() {
        if ln == 0 {
            if line != "row,col,value" {
                return Err(Error::data(format!(
                    "{}: bad column header",
                    path.display()
                )));
            }
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 3 {
            return Err(Error::Parse {
                path: path.to_owned(),
                line: ln + 2,
                msg: "expected 3 fields".into(),
            });
        }
        let bad = |e: &dyn std::fmt::Display| Error::Parse {
            path: path.to_owned(),
            line: ln + 2,
            msg: e.to_string(),
        };
        let r: usize = fields[0].parse().map_err(|e| bad(&e))?;
        let c: usize = fields[1].parse().map_err(|e| bad(&e))?;
        let v: f64 = fields[2].parse().map_err(|e| bad(&e))?;
        triplets.push((r, c, v));
    }
    let m = Csr::from_triplets(meta.rows, meta.cols, &triplets)?;
    Ok((meta, m))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DenseMeta {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub epochs: Option<usize>,
}

fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

/// Dense table as raw row-major little-endian f32 plus a JSON sidecar.
pub fn write_dense_f32(path: &Path, meta: &DenseMeta, m: &Dense) -> Result<()> {
    if meta.rows != m.rows() || meta.cols != m.cols() {
        return Err(Error::data("dense meta shape mismatch"));
    }
    let mut bytes = Vec::with_capacity(m.data().len() * 4);
    for &v in m.data() {
        bytes.extend_from_slice(&(v as f32).to_le_bytes());
    }
    atomic_write(path, &bytes)?;
    let json = format!("{}\n", serde_json::to_string_pretty(meta)?);
    atomic_write(&sidecar_path(path), json.as_bytes())
}

pub fn read_dense_f32(path: &Path) -> Result<(DenseMeta, Dense)> {
    let meta: DenseMeta = serde_json::from_str(&read_to_string(&sidecar_path(path))?)
        .map_err(|e| Error::data(format!("{}: bad sidecar: {e}", path.display())))?;
    let bytes = fs::read(path)?;
    if bytes.len() != meta.rows * meta.cols * 4 {
        return Err(Error::data(format!(
            "{}: expected {} f32 values, found {} bytes",
            path.display(),
            meta.rows * meta.cols,
            bytes.len()
        )));
    }
    let data: Vec<f64> = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect();
    Ok((meta.clone(), Dense::from_vec(meta.rows, meta.cols, data)))
}

/// Plain CSV export of a dense table, one record per row. Values use the
/// shortest representation that parses back to the same f64, so this
/// format is lossless.
pub fn write_dense_csv(path: &Path, m: &Dense) -> Result<()> {
    let mut out = String::new();
    for r in 0..m.rows() {
        let fields: Vec<String> = m.row(r).iter().map(|v| v.to_string()).collect();
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    atomic_write(path, out.as_bytes())
}

pub fn read_dense_csv(path: &Path) -> Result<Dense> {
    let text = read_to_string(path)?;
    let mut data = Vec::new();
    let mut cols = 0usize;
    let mut rows = 0usize;
    for (ln, line) in text.lines().enumerate() {
        let mut width = 0usize;
        for field in line.split(',') {
            let v: f64 = field.parse().map_err(|e| Error::Parse {
                path: path.to_path_buf(),
                line: ln + 1,
                msg: format!("bad float {field:?}: {e}"),
            })?;
            data.push(v);
            width += 1;
        }
        if rows == 0 {
            cols = width;
        } else if width != cols {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: ln + 1,
                msg: format!("expected {cols} fields, found {width}"),
            });
        }
        rows += 1;
    }
    Ok(Dense::from_vec(rows, cols, data))
}

/// Id catalog column as `external_id,index` CSV.
pub fn write_id_index_csv(path: &Path, ids: &[String]) -> Result<()> {
    let mut buf = Vec::new();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        w.write_record(["external_id", "index"])?;
        for (idx, id) in ids.iter().enumerate() {
            w.write_record([id.as_str(), &idx.to_string()])?;
        }
        w.flush()?;
    }
    atomic_write(path, &buf)
}

pub fn read_id_index_csv(path: &Path) -> Result<Vec<String>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)?;
    let mut out: Vec<(usize, String)> = Vec::new();
    for row in reader.records() {
        let rec = row?;
        let id = rec
            .get(0)
            .ok_or_else(|| Error::data(format!("{}: short row", path.display())))?;
        let idx: usize = rec
            .get(1)
            .ok_or_else(|| Error::data(format!("{}: short row", path.display())))?
            .parse()
            .map_err(|e| Error::data(format!("{}: bad index: {e}", path.display())))?;
        out.push((idx, id.to_string()));
    }
    out.sort_unstable_by_key(|&(idx, _)| idx);
    for (pos, (idx, _)) in out.iter().enumerate() {
        if pos != *idx {
            return Err(Error::data(format!(
                "{}: indices are not a dense 0..n range",
                path.display()
            )));
        }
    }
    Ok(out.into_iter().map(|(_, id)| id).collect())
}

/// Split as `user_idx,item_idx,playtime,fold` CSV under a JSON header
/// recording the split seed.
pub fn write_split_csv(path: &Path, split: &SplitDataset) -> Result<()> {
    let mut out = format!("# {}\n", serde_json::json!({ "seed": split.seed }));
    out.push_str("user_idx,item_idx,playtime,fold\n");
    for fold in [Fold::Train, Fold::Val, Fold::Test] {
        for r in split.fold(fold) {
            out.push_str(&format!(
                "{},{},{},{}\n",
                r.user,
                r.item,
                r.playtime,
                fold.as_str()
            ));
        }
    }
    atomic_write(path, out.as_bytes())
}

pub fn read_split_csv(path: &Path) -> Result<SplitDataset> {
    let text = read_to_string(path)?;
    let (header, body) = split_json_header(&text, path)?;
    let meta: serde_json::Value = serde_json::from_str(header)
        .map_err(|e| Error::data(format!("{}: bad header: {e}", path.display())))?;
    let seed = meta
        .get("seed")
        .and_then(|v| v.as_u64())
        .ok_or_else(|| Error::data(format!("{}: header lacks seed", path.display())))?;
    let mut split = SplitDataset {
        train: Vec::new(),
        val: Vec::new(),
        test: Vec::new(),
        seed,
    };
    for (ln, line) in body.lines().enumerate() {
        if ln == 0 {
            if line != "user_idx,item_idx,playtime,fold" {
                return Err(Error::data(format!(
                    "{}: bad column header",
                    path.display()
                )));
            }
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(Error::Parse {
                path: path.to_owned(),
                line: ln + 2,
                msg: "expected 4 fields".into(),
            });
        }
        let parse_num = |s: &str| -> Result<u64> {
            s.parse().map_err(|e| Error::Parse {
                path: path.to_owned(),
                line: ln + 2,
                msg: format!("{e}"),
            })
        };
        let rec = Interaction {
            user: parse_num(fields[0])? as usize,
            item: parse_num(fields[1])? as usize,
            playtime: parse_num(fields[2])?,
        };
        match Fold::parse(fields[3])? {
            Fold::Train => split.train.push(rec),
            Fold::Val => split.val.push(rec),
            Fold::Test => split.test.push(rec),
        }
    }
    Ok(split)
}

/// Standard interactions input file (CSV flavor).
pub fn write_interactions_csv(path: &Path, records: &[RawInteraction]) -> Result<()> {
    let mut buf = Vec::new();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        w.write_record(["user_id", "item_id", "playtime"])?;
        for r in records {
            w.write_record([
                r.user_id.as_str(),
                r.item_id.as_str(),
                &r.playtime.to_string(),
            ])?;
        }
        w.flush()?;
    }
    atomic_write(path, &buf)
}

/// Standard items input file (JSON-lines).
pub fn write_items_jsonl(path: &Path, items: &[RawItem]) -> Result<()> {
    let mut out = String::new();
    for item in items {
        out.push_str(&serde_json::to_string(item)?);
        out.push('\n');
    }
    atomic_write(path, out.as_bytes())
}

/// Histogram as `bin_lo,bin_hi,count` CSV.
pub fn write_histogram_csv(path: &Path, bins: &[HistBin]) -> Result<()> {
    let mut out = String::from("bin_lo,bin_hi,count\n");
    for b in bins {
        out.push_str(&format!("{},{},{}\n", b.lo, b.hi, b.count));
    }
    atomic_write(path, out.as_bytes())
}

/// Both directed subgraphs in one `user_idx,item_idx,direction` CSV.
/// Degrees are not stored; they are recomputed from the preference
/// matrix the subgraphs were selected from.
pub fn write_subgraph_csv(path: &Path, sub: &DirectedSubgraphs) -> Result<()> {
    let meta = serde_json::json!({
        "n_users": sub.item_to_user.rows(),
        "n_items": sub.user_to_item.rows(),
    });
    let mut out = format!("# {meta}\n");
    out.push_str("user_idx,item_idx,direction\n");
    for u in 0..sub.item_to_user.rows() {
        for &i in sub.item_to_user.row(u) {
            out.push_str(&format!("{u},{i},item_to_user\n"));
        }
    }
    for i in 0..sub.user_to_item.rows() {
        for &u in sub.user_to_item.row(i) {
            out.push_str(&format!("{u},{i},user_to_item\n"));
        }
    }
    atomic_write(path, out.as_bytes())
}

/// Rebuilds the subgraph pair; `degrees_from` must be the same
/// preference matrix that selection ran on.
pub fn read_subgraph_csv(path: &Path, degrees_from: &Csr<f64>) -> Result<DirectedSubgraphs> {
    let text = read_to_string(path)?;
    let (header, body) = split_json_header(&text, path)?;
    let meta: serde_json::Value = serde_json::from_str(header)
        .map_err(|e| Error::data(format!("{}: bad header: {e}", path.display())))?;
    let n_users = meta.get("n_users").and_then(|v| v.as_u64()).unwrap_or(0) as usize;
    let n_items = meta.get("n_items").and_then(|v| v.as_u64()).unwrap_or(0) as usize;
    if n_users != degrees_from.rows() || n_items != degrees_from.cols() {
        return Err(Error::data(format!(
            "{}: subgraph shape {}x{} does not match preference matrix {}x{}",
            path.display(),
            n_users,
            n_items,
            degrees_from.rows(),
            degrees_from.cols()
        )));
    }
    let mut items_per_user: Vec<Vec<usize>> = vec![Vec::new(); n_users];
    let mut users_per_item: Vec<Vec<usize>> = vec![Vec::new(); n_items];
    for (ln, line) in body.lines().enumerate() {
        if ln == 0 {
            if line != "user_idx,item_idx,direction" {
                return Err(Error::data(format!(
                    "{}: bad column header",
                    path.display()
                )));
            }
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 3 {
            return Err(Error::Parse {
                path: path.to_owned(),
                line: ln + 2,
                msg: "expected 3 fields".into(),
            });
        }
        let u: usize = fields[0].parse().map_err(|e| Error::Parse {
            path: path.to_owned(),
            line: ln + 2,
            msg: format!("{e}"),
        })?;
        let i: usize = fields[1].parse().map_err(|e| Error::Parse {
            path: path.to_owned(),
            line: ln + 2,
            msg: format!("{e}"),
        })?;
        match fields[2] {
            "item_to_user" => items_per_user[u].push(i),
            "user_to_item" => users_per_item[i].push(u),
            other => {
                return Err(Error::Parse {
                    path: path.to_owned(),
                    line: ln + 2,
                    msg: format!("unknown direction {other:?}"),
                })
            }
        }
    }
    let user_degree = (0..n_users).map(|u| degrees_from.row_nnz(u)).collect();
    let t = degrees_from.transpose();
    let item_degree = (0..n_items).map(|i| t.row_nnz(i)).collect();
    Ok(DirectedSubgraphs {
        item_to_user: Pattern::from_rows(n_items, &items_per_user)?,
        user_to_item: Pattern::from_rows(n_users, &users_per_item)?,
        user_degree,
        item_degree,
    })
}

/// Cluster assignment as `entity_idx,cluster_id` CSV (inspection
/// artifact, write-only).
pub fn write_clusters_csv(path: &Path, kind: &str, k: usize, assignment: &[usize]) -> Result<()> {
    let meta = serde_json::json!({ "kind": kind, "k": k });
    let mut out = format!("# {meta}\n");
    out.push_str("entity_idx,cluster_id\n");
    for (idx, &c) in assignment.iter().enumerate() {
        out.push_str(&format!("{idx},{c}\n"));
    }
    atomic_write(path, out.as_bytes())
}

/// One recommendation line per user in the JSON-lines output.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RecommendationLine {
    pub user_id: String,
    pub item_ids: Vec<String>,
    pub scores: Vec<f64>,
}

pub fn write_recommendations_jsonl(path: &Path, lines: &[RecommendationLine]) -> Result<()> {
    let mut out = String::new();
    for line in lines {
        out.push_str(&serde_json::to_string(line)?);
        out.push('\n');
    }
    atomic_write(path, out.as_bytes())
}

/// Per-stage provenance: config fingerprint, hashed inputs, seed, and
/// a wall-clock timestamp (UNIX seconds).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub stage: String,
    pub config_fingerprint: String,
    pub inputs: BTreeMap<String, String>,
    pub seed: u64,
    pub timestamp_unix: u64,
    /// Full effective configuration (overrides applied), so every value
    /// that produced the stage is on record.
    #[serde(default)]
    pub config: serde_json::Value,
}

impl Manifest {
    pub fn new(stage: &str, fingerprint: &str, seed: u64) -> Manifest {
        Manifest {
            stage: stage.to_string(),
            config_fingerprint: fingerprint.to_string(),
            inputs: BTreeMap::new(),
            seed,
            timestamp_unix: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
            config: serde_json::Value::Null,
        }
    }

    pub fn record_input(&mut self, path: &Path) -> Result<()> {
        let name = path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| path.display().to_string());
        self.inputs.insert(name, file_sha256(path)?);
        Ok(())
    }
}

pub fn write_manifest(path: &Path, manifest: &Manifest) -> Result<()> {
    let json = format!("{}\n", serde_json::to_string_pretty(manifest)?);
    atomic_write(path, json.as_bytes())
}

pub fn read_manifest(path: &Path) -> Result<Manifest> {
    serde_json::from_str(&read_to_string(path)?)
        .map_err(|e| Error::data(format!("{}: bad manifest: {e}", path.display())))
}

/// Sweep results under the pinned column header. Failed cells carry
/// empty metric fields.
#[derive(Debug, Clone)]
pub struct SweepRow {
    pub beta_u: f64,
    pub beta_i: f64,
    pub selection_us: bool,
    pub selection_is: bool,
    pub weights: bool,
    pub n: usize,
    pub metrics: Option<(f64, f64, f64, f64)>,
}

pub const SWEEP_HEADER: &str =
    "beta_u,beta_i,selection_us,selection_is,weights,N,recall,hit_ratio_primary,hit_ratio_classic,coverage";

pub fn write_sweep_csv(path: &Path, rows: &[SweepRow]) -> Result<()> {
    let mut out = format!("{SWEEP_HEADER}\n");
    for r in rows {
        let metrics = match r.metrics {
            Some((recall, hr, hrc, cov)) => format!("{recall},{hr},{hrc},{cov}"),
            None => ",,,".to_string(),
        };
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.beta_u, r.beta_i, r.selection_us, r.selection_is, r.weights, r.n, metrics
        ));
    }
    atomic_write(path, out.as_bytes())
}

/// Exclusive workdir ownership via a lock file; released on drop.
#[derive(Debug)]
pub struct WorkdirLock {
    path: PathBuf,
}

impl WorkdirLock {
    pub fn acquire(dir: &Path, force: bool) -> Result<WorkdirLock> {
        let path = dir.join(".divrec.lock");
        if force && path.exists() {
            fs::remove_file(&path)?;
        }
        match OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(mut f) => {
                let _ = writeln!(f, "{}", std::process::id());
                Ok(WorkdirLock { path })
            }
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => Err(Error::data(format!(
                "workdir is locked by another run ({}); remove the file or pass --force",
                path.display()
            ))),
            Err(e) => Err(e.into()),
        }
    }
}

impl Drop for WorkdirLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{ingest_interactions, ingest_items, InteractionFormat};
    use crate::kmeans::EntityKind;
    use crate::preferences::ImplicitPreference;
    use crate::rng::Stream;
    use crate::selection::{build_subgraphs, singleton_clusters};
    use tempfile::tempdir;

    #[test]
    fn sparse_csv_round_trips() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("h.csv");
        let m = Csr::from_triplets(3, 4, &[(0, 1, 0.5), (2, 3, 1.25), (2, 0, -2.0)]).unwrap();
        let meta = MatrixMeta {
            name: "balanced".into(),
            rows: 3,
            cols: 4,
            source: "abc".into(),
        };
        write_sparse_csv(&path, &meta, &m).unwrap();
        let (meta2, m2) = read_sparse_csv(&path).unwrap();
        assert_eq!(meta2.name, "balanced");
        assert_eq!(meta2.source, "abc");
        assert_eq!(m2.to_triplets(), m.to_triplets());
    }

    #[test]
    fn dense_f32_round_trips_within_precision() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("emb.f32");
        let mut rng = Stream::new(1, "io");
        let data: Vec<f64> = (0..5 * 3).map(|_| rng.normal()).collect();
        let m = Dense::from_vec(5, 3, data);
        let meta = DenseMeta {
            name: "user_emb".into(),
            rows: 5,
            cols: 3,
            seed: Some(1),
            epochs: None,
        };
        write_dense_f32(&path, &meta, &m).unwrap();
        let (meta2, m2) = read_dense_f32(&path).unwrap();
        assert_eq!(meta2.rows, 5);
        assert_eq!(meta2.seed, Some(1));
        for (&a, &b) in m.data().iter().zip(m2.data()) {
            assert!((a - b).abs() <= a.abs().max(1.0) * f32::EPSILON as f64);
        }
        // Reloading twice is bit-stable (f32 rounding is deterministic).
        let (_, m3) = read_dense_f32(&path).unwrap();
        assert_eq!(m2.data(), m3.data());
    }

    #[test]
    fn dense_csv_round_trips_exactly() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("table.csv");
        let mut rng = Stream::new(7, "io");
        let data: Vec<f64> = (0..4 * 3).map(|_| rng.normal() * 1e-3).collect();
        let m = Dense::from_vec(4, 3, data);
        write_dense_csv(&path, &m).unwrap();
        let m2 = read_dense_csv(&path).unwrap();
        assert_eq!(m2.rows(), 4);
        assert_eq!(m2.cols(), 3);
        assert_eq!(m.data(), m2.data());

        std::fs::write(&path, "1.0,2.0\n3.0\n").unwrap();
        let err = read_dense_csv(&path).unwrap_err().to_string();
        assert!(err.contains(":2:"), "{err}");
    }

    #[test]
    fn id_index_round_trips_and_validates() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("users.csv");
        let ids = vec!["a,b".to_string(), "plain".to_string(), "\"q\"".to_string()];
        write_id_index_csv(&path, &ids).unwrap();
        assert_eq!(read_id_index_csv(&path).unwrap(), ids);
        fs::write(&path, "external_id,index\nx,0\ny,2\n").unwrap();
        assert!(read_id_index_csv(&path).is_err());
    }

    #[test]
    fn split_round_trips() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("split.csv");
        let split = SplitDataset {
            train: vec![Interaction {
                user: 0,
                item: 1,
                playtime: 7,
            }],
            val: vec![Interaction {
                user: 1,
                item: 0,
                playtime: 0,
            }],
            test: vec![
                Interaction {
                    user: 2,
                    item: 2,
                    playtime: 3,
                },
                Interaction {
                    user: 0,
                    item: 2,
                    playtime: 9,
                },
            ],
            seed: 42,
        };
        write_split_csv(&path, &split).unwrap();
        let back = read_split_csv(&path).unwrap();
        assert_eq!(back.train, split.train);
        assert_eq!(back.val, split.val);
        assert_eq!(back.test, split.test);
        assert_eq!(back.seed, 42);
    }

    #[test]
    fn standard_input_files_round_trip_through_ingest() {
        let dir = tempdir().unwrap();
        let inter = dir.path().join("interactions.csv");
        let items = dir.path().join("items.jsonl");
        let recs = vec![
            RawInteraction {
                user_id: "u1".into(),
                item_id: "g1".into(),
                playtime: 0,
            },
            RawInteraction {
                user_id: "u2".into(),
                item_id: "g1".into(),
                playtime: 33,
            },
        ];
        let cats = vec![RawItem {
            item_id: "g1".into(),
            categories: vec!["a".into(), "b".into()],
        }];
        write_interactions_csv(&inter, &recs).unwrap();
        write_items_jsonl(&items, &cats).unwrap();
        assert_eq!(
            ingest_interactions(&inter, InteractionFormat::Csv).unwrap(),
            recs
        );
        assert_eq!(ingest_items(&items).unwrap(), cats);
    }

    #[test]
    fn subgraphs_round_trip() {
        let h = ImplicitPreference(
            Csr::from_triplets(
                3,
                4,
                &[
                    (0, 0, 1.0),
                    (0, 2, 2.0),
                    (1, 1, 0.5),
                    (2, 3, 0.25),
                    (2, 0, 3.0),
                ],
            )
            .unwrap(),
        );
        let sub = build_subgraphs(
            &h,
            &singleton_clusters(3, EntityKind::User),
            &singleton_clusters(4, EntityKind::Item),
        )
        .unwrap();
        let dir = tempdir().unwrap();
        let path = dir.path().join("subgraphs.csv");
        write_subgraph_csv(&path, &sub).unwrap();
        let back = read_subgraph_csv(&path, &h.0).unwrap();
        assert_eq!(back, sub);
        let wrong = Csr::from_triplets(3, 5, &[(0, 0, 1.0)]).unwrap();
        assert!(read_subgraph_csv(&path, &wrong).is_err());
    }

    #[test]
    fn manifest_round_trips_and_hashes_inputs() {
        let dir = tempdir().unwrap();
        let input = dir.path().join("input.txt");
        fs::write(&input, b"hello").unwrap();
        let mut manifest = Manifest::new("preprocess", "fp123", 7);
        manifest.record_input(&input).unwrap();
        let path = dir.path().join("manifest.json");
        write_manifest(&path, &manifest).unwrap();
        let back = read_manifest(&path).unwrap();
        assert_eq!(back.stage, "preprocess");
        assert_eq!(back.config_fingerprint, "fp123");
        assert_eq!(back.inputs.get("input.txt").unwrap(), &sha256_hex(b"hello"));
    }

    #[test]
    fn sweep_csv_has_pinned_header_and_handles_failures() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("sweep.csv");
        let rows = vec![
            SweepRow {
                beta_u: 0.6,
                beta_i: 0.06,
                selection_us: true,
                selection_is: true,
                weights: true,
                n: 100,
                metrics: Some((0.5, 0.25, 0.75, 0.4)),
            },
            SweepRow {
                beta_u: 1.0,
                beta_i: 1.0,
                selection_us: false,
                selection_is: false,
                weights: false,
                n: 100,
                metrics: None,
            },
        ];
        write_sweep_csv(&path, &rows).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), SWEEP_HEADER);
        assert_eq!(
            lines.next().unwrap(),
            "0.6,0.06,true,true,true,100,0.5,0.25,0.75,0.4"
        );
        assert_eq!(lines.next().unwrap(), "1,1,false,false,false,100,,,,");
    }

    #[test]
    fn atomic_write_leaves_no_temp_file() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("out.txt");
        atomic_write(&path, b"data").unwrap();
        assert_eq!(fs::read(&path).unwrap(), b"data");
        let names: Vec<_> = fs::read_dir(dir.path())
            .unwrap()
            .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
            .collect();
        assert_eq!(names, vec!["out.txt".to_string()]);
    }

    #[test]
    fn lock_is_exclusive_until_released() {
        let dir = tempdir().unwrap();
        let lock = WorkdirLock::acquire(dir.path(), false).unwrap();
        assert!(WorkdirLock::acquire(dir.path(), false).is_err());
        drop(lock);
        let again = WorkdirLock::acquire(dir.path(), false).unwrap();
        drop(again);
        // Force breaks a stale lock.
        fs::write(dir.path().join(".divrec.lock"), b"stale").unwrap();
        assert!(WorkdirLock::acquire(dir.path(), false).is_err());
        let forced = WorkdirLock::acquire(dir.path(), true).unwrap();
        drop(forced);
    }

    #[test]
    fn histogram_and_clusters_have_expected_shape() {
        let dir = tempdir().unwrap();
        let hist = dir.path().join("hist.csv");
        write_histogram_csv(
            &hist,
            &[
                HistBin {
                    lo: 0.0,
                    hi: 0.5,
                    count: 3,
                },
                HistBin {
                    lo: 0.5,
                    hi: 1.0,
                    count: 1,
                },
            ],
        )
        .unwrap();
        let text = fs::read_to_string(&hist).unwrap();
        assert_eq!(text, "bin_lo,bin_hi,count\n0,0.5,3\n0.5,1,1\n");
        let clusters = dir.path().join("clusters.csv");
        write_clusters_csv(&clusters, "user", 2, &[0, 1, 0]).unwrap();
        let text = fs::read_to_string(&clusters).unwrap();
        assert!(text.ends_with("entity_idx,cluster_id\n0,0\n1,1\n2,0\n"));
    }
}
