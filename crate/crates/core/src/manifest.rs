//! Dataset manifests: one JSON header line, then one [`PairRecord`] per line.
//!
//! Paths inside a manifest are relative to the directory holding it and use
//! `/` separators.

use std::collections::HashSet;
use std::io::{BufRead, BufWriter, Write};
use std::path::{Component, Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::read_kernel;
use crate::metrics::PairInput;
use crate::trajectory::TrajectoryParams;

pub const MANIFEST_FILE: &str = "manifest.jsonl";
pub const TOOLKIT_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairSource {
    SyntheticKernel,
    FrameAverage,
}

/// Crop rectangle in pixels of the (downscaled) source image.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Crop {
    pub x: usize,
    pub y: usize,
    pub w: usize,
    pub h: usize,
}

/// Frames averaged for a `frame_average` pair.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowInfo {
    pub sequence: String,
    pub offset: usize,
    pub frames: usize,
    pub middle_frame: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairRecord {
    pub pair_id: String,
    pub sharp_path: String,
    pub blurred_path: String,
    pub kernel_path: Option<String>,
    pub master_seed: u64,
    pub item_seed: u64,
    pub params: Option<TrajectoryParams>,
    pub noise_sigma: f64,
    pub crop: Option<Crop>,
    pub source: PairSource,
    pub downscale: usize,
    /// Input file (name relative to the header's input directory).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_image: Option<String>,
    /// `[width, height]` of the source after downscaling.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_size: Option<[usize; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<WindowInfo>,
}

/// An input that produced no pairs, and why.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkippedInput {
    pub path: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestHeader {
    pub toolkit_version: String,
    pub rng_algorithm: String,
    pub master_seed: u64,
    /// Creation parameters of the producing command.
    pub config: serde_json::Value,
    /// `synthetic:real` pair counts, set on merged manifests.
    pub synth_real_ratio: Option<String>,
    pub skipped: Vec<SkippedInput>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub header: ManifestHeader,
    pub records: Vec<PairRecord>,
}

impl Manifest {
    pub fn to_jsonl(&self) -> Result<String> {
        let mut out = serde_json::to_string(&self.header)?;
        out.push('\n');
        for r in &self.records {
            out.push_str(&serde_json::to_string(r)?);
            out.push('\n');
        }
        Ok(out)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut f = BufWriter::new(std::fs::File::create(path)?);
        f.write_all(self.to_jsonl()?.as_bytes())?;
        f.flush()?;
        Ok(())
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        if !path.exists() {
            return Err(Error::MissingFile(path.to_path_buf()));
        }
        let reader = std::io::BufReader::new(std::fs::File::open(path)?);
        let mut lines = reader.lines();
        let header = match lines.next() {
            Some(line) => serde_json::from_str(&line?)?,
            None => return Err(Error::InvalidManifest("missing header line".into())),
        };
        let mut records = Vec::new();
        for line in lines {
            let line = line?;
            if !line.trim().is_empty() {
                records.push(serde_json::from_str(&line)?);
            }
        }
        Ok(Self { header, records })
    }

    /// Pairs for metric evaluation, sharp as reference.
    pub fn metric_pairs(&self, root: impl AsRef<Path>) -> Vec<PairInput> {
        let root = root.as_ref();
        self.records
            .iter()
            .map(|r| PairInput {
                pair_id: r.pair_id.clone(),
                reference: root.join(&r.sharp_path),
                candidate: root.join(&r.blurred_path),
            })
            .collect()
    }

    /// Check ids, files, kernels and crops against the files under `root`.
    pub fn validate(&self, root: impl AsRef<Path>) -> Result<()> {
        let root = root.as_ref();
        let mut ids = HashSet::new();
        for r in &self.records {
            if !ids.insert(r.pair_id.as_str()) {
                return Err(Error::InvalidManifest(format!("duplicate pair id {}", r.pair_id)));
            }
        }
        self.records.iter().try_for_each(|r| validate_record(r, root))
    }
}

fn image_dims(path: &Path) -> Result<(usize, usize)> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let (w, h) = image::image_dimensions(path).map_err(|source| Error::Image {
        path: path.to_path_buf(),
        source,
    })?;
    Ok((w as usize, h as usize))
}

fn validate_record(r: &PairRecord, root: &Path) -> Result<()> {
    let bad = |msg: String| Err(Error::InvalidManifest(format!("{}: {msg}", r.pair_id)));
    let sharp = image_dims(&root.join(&r.sharp_path))?;
    let blurred = image_dims(&root.join(&r.blurred_path))?;
    if sharp != blurred {
        return bad(format!("sharp {sharp:?} and blurred {blurred:?} sizes differ"));
    }
    if r.downscale < 1 {
        return bad("downscale must be >= 1".into());
    }
    if let Some(p) = &r.params {
        p.validate()?;
    }
    match (&r.kernel_path, r.source) {
        (Some(kp), _) => {
            let k = read_kernel(root.join(kp))?;
            if (k.sum() - 1.0).abs() > 1e-9 {
                return bad(format!("kernel sums to {}", k.sum()));
            }
        }
        (None, PairSource::SyntheticKernel) => return bad("synthetic pair without kernel".into()),
        (None, PairSource::FrameAverage) => {}
    }
    if let Some(c) = r.crop {
        if (c.w, c.h) != sharp {
            return bad(format!("crop {}x{} but patch is {}x{}", c.w, c.h, sharp.0, sharp.1));
        }
        match r.source_size {
            Some([sw, sh]) if c.x + c.w <= sw && c.y + c.h <= sh => {}
            Some([sw, sh]) => {
                return bad(format!("crop {}x{}+{}+{} outside {sw}x{sh}", c.w, c.h, c.x, c.y));
            }
            None => return bad("crop without source_size".into()),
        }
    }
    Ok(())
}

/// `to` expressed relative to directory `from`; both absolute or both relative.
pub fn relative_path(from: &Path, to: &Path) -> PathBuf {
    let from: Vec<Component> = from.components().collect();
    let to: Vec<Component> = to.components().collect();
    let common = from.iter().zip(&to).take_while(|(a, b)| a == b).count();
    let mut out = PathBuf::new();
    for _ in common..from.len() {
        out.push("..");
    }
    for c in &to[common..] {
        out.push(c.as_os_str());
    }
    out
}

/// Render a relative path with `/` separators.
pub fn path_string(p: &Path) -> String {
    p.components()
        .map(|c| c.as_os_str().to_string_lossy().into_owned())
        .collect::<Vec<_>>()
        .join("/")
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// `"a:b"` reduced to lowest terms.
pub fn ratio_string(synthetic: usize, real: usize) -> String {
    match gcd(synthetic, real) {
        0 => "0:0".into(),
        g => format!("{}:{}", synthetic / g, real / g),
    }
}

/// Combine manifests that live in `dirs` into one stored in `out_dir`.
///
/// Paths are rebased onto `out_dir`; pair ids must stay unique. The header
/// records the resulting synthetic-to-real ratio.
pub fn merge_manifests(parts: &[(Manifest, PathBuf)], out_dir: impl AsRef<Path>) -> Result<Manifest> {
    let out_dir = std::fs::canonicalize(out_dir.as_ref())?;
    let mut records = Vec::new();
    let mut skipped = Vec::new();
    let mut seeds = Vec::new();
    let mut ids = HashSet::new();
    for (m, dir) in parts {
        let dir = std::fs::canonicalize(dir)?;
        seeds.push(m.header.master_seed);
        skipped.extend(m.header.skipped.iter().cloned());
        let rebase = |p: &str| path_string(&relative_path(&out_dir, &dir.join(p)));
        for r in &m.records {
            if !ids.insert(r.pair_id.clone()) {
                return Err(Error::InvalidManifest(format!("duplicate pair id {} across manifests", r.pair_id)));
            }
            let mut r = r.clone();
            r.sharp_path = rebase(&r.sharp_path);
            r.blurred_path = rebase(&r.blurred_path);
            r.kernel_path = r.kernel_path.as_deref().map(rebase);
            records.push(r);
        }
    }
    let synthetic = records.iter().filter(|r| r.source == PairSource::SyntheticKernel).count();
    let real = records.len() - synthetic;
    Ok(Manifest {
        header: ManifestHeader {
            toolkit_version: TOOLKIT_VERSION.into(),
            rng_algorithm: crate::rng::RNG_ALGORITHM.into(),
            master_seed: seeds.first().copied().unwrap_or(0),
            config: serde_json::json!({ "merged_from_seeds": seeds }),
            synth_real_ratio: Some(ratio_string(synthetic, real)),
            skipped,
        },
        records,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(id: &str, source: PairSource) -> PairRecord {
        PairRecord {
            pair_id: id.into(),
            sharp_path: format!("sharp/{id}.png"),
            blurred_path: format!("blurred/{id}.png"),
            kernel_path: None,
            master_seed: 1,
            item_seed: 2,
            params: None,
            noise_sigma: 0.0,
            crop: None,
            source,
            downscale: 1,
            source_image: None,
            source_size: None,
            window: None,
        }
    }

    fn manifest(records: Vec<PairRecord>) -> Manifest {
        Manifest {
            header: ManifestHeader {
                toolkit_version: TOOLKIT_VERSION.into(),
                rng_algorithm: "chacha8".into(),
                master_seed: 1,
                config: serde_json::json!({}),
                synth_real_ratio: None,
                skipped: vec![],
            },
            records,
        }
    }

    #[test]
    fn jsonl_round_trip() {
        let m = manifest(vec![record("a", PairSource::FrameAverage), record("b", PairSource::FrameAverage)]);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(MANIFEST_FILE);
        m.write(&path).unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap().lines().count(), 3);
        assert_eq!(Manifest::read(&path).unwrap(), m);
    }

    #[test]
    fn record_field_names() {
        let v = serde_json::to_value(record("x", PairSource::SyntheticKernel)).unwrap();
        for key in [
            "pair_id",
            "sharp_path",
            "blurred_path",
            "kernel_path",
            "master_seed",
            "item_seed",
            "params",
            "noise_sigma",
            "crop",
            "source",
            "downscale",
        ] {
            assert!(v.get(key).is_some(), "{key}");
        }
        assert_eq!(v["source"], "synthetic_kernel");
    }

    #[test]
    fn duplicate_ids_fail_validation() {
        let m = manifest(vec![record("a", PairSource::FrameAverage), record("a", PairSource::FrameAverage)]);
        assert!(matches!(m.validate("/nonexistent"), Err(Error::InvalidManifest(_))));
    }

    #[test]
    fn missing_files_fail_validation() {
        let m = manifest(vec![record("a", PairSource::FrameAverage)]);
        assert!(matches!(m.validate("/nonexistent"), Err(Error::MissingFile(_))));
    }

    #[test]
    fn relative_paths() {
        assert_eq!(relative_path(Path::new("/a/b"), Path::new("/a/b/c/d.png")), PathBuf::from("c/d.png"));
        assert_eq!(relative_path(Path::new("/a/b"), Path::new("/a/x/d.png")), PathBuf::from("../x/d.png"));
        assert_eq!(path_string(Path::new("sharp/x.png")), "sharp/x.png");
    }

    #[test]
    fn ratios_reduce() {
        assert_eq!(ratio_string(200, 100), "2:1");
        assert_eq!(ratio_string(3, 0), "1:0");
        assert_eq!(ratio_string(0, 0), "0:0");
    }

    #[test]
    fn merge_rebases_and_records_ratio() {
        let root = tempfile::tempdir().unwrap();
        let (da, db) = (root.path().join("syn"), root.path().join("fa"));
        std::fs::create_dir_all(&da).unwrap();
        std::fs::create_dir_all(&db).unwrap();
        let a = manifest(vec![record("s1", PairSource::SyntheticKernel), record("s2", PairSource::SyntheticKernel)]);
        let b = manifest(vec![record("f1", PairSource::FrameAverage)]);
        let merged = merge_manifests(&[(a, da), (b, db)], root.path()).unwrap();
        assert_eq!(merged.header.synth_real_ratio.as_deref(), Some("2:1"));
        assert_eq!(merged.records[0].sharp_path, "syn/sharp/s1.png");
        assert_eq!(merged.records[2].blurred_path, "fa/blurred/f1.png");

        let dup = manifest(vec![record("s1", PairSource::SyntheticKernel)]);
        let again = manifest(vec![record("s1", PairSource::SyntheticKernel)]);
        let d = root.path().to_path_buf();
        assert!(merge_manifests(&[(dup, d.clone()), (again, d)], root.path()).is_err());
    }
}
