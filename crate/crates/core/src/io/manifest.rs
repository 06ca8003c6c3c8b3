//! Dataset manifest: one JSON file listing every frame, its files and its
//! split. Paths are relative to the manifest's directory unless absolute.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::render::IlluminationKind;
use crate::seed;

use super::{pfm, png, read_depth, DepthFormat};

pub const MANIFEST_VERSION: u32 = 1;

/// Number of distinct maps; frames cycle through them.
pub const MAP_COUNT: u32 = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl std::str::FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Self::Train),
            "val" => Ok(Self::Val),
            "test" => Ok(Self::Test),
            _ => Err(Error::Contract(format!("unknown split {s:?}"))),
        }
    }
}

/// Three maps train, one validates, one tests.
pub fn split_for_map(map_id: u32) -> Split {
    match map_id % MAP_COUNT {
        0..=2 => Split::Train,
        3 => Split::Val,
        _ => Split::Test,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    pub id: String,
    pub image_path: String,
    pub depth_path: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub normal_path: Option<String>,
    pub illumination: IlluminationKind,
    pub cell_deg: f64,
    pub seed: u64,
    pub map_id: u32,
    pub split: Split,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitCounts {
    pub train: usize,
    pub val: usize,
    pub test: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    pub version: u32,
    /// Digest of the camera and projector configuration.
    pub rig: String,
    /// `[width, height]` of every image and depth map.
    pub image_size: [usize; 2],
    pub entries: Vec<ManifestEntry>,
    pub counts: SplitCounts,
}

impl DatasetManifest {
    pub fn new(rig: String, image_size: [usize; 2], entries: Vec<ManifestEntry>) -> Self {
        let mut m = Self {
            version: MANIFEST_VERSION,
            rig,
            image_size,
            entries,
            counts: SplitCounts::default(),
        };
        m.recount();
        m
    }

    pub fn recount(&mut self) {
        let mut c = SplitCounts::default();
        for e in &self.entries {
            match e.split {
                Split::Train => c.train += 1,
                Split::Val => c.val += 1,
                Split::Test => c.test += 1,
            }
        }
        self.counts = c;
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serializes");
        s.push('\n');
        s
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let m: Self = serde_json::from_str(&text).map_err(|source| Error::Json {
            path: path.to_path_buf(),
            source,
        })?;
        if m.version != MANIFEST_VERSION {
            return Err(Error::Format {
                format: "manifest",
                reason: format!("unsupported version {}", m.version),
            });
        }
        Ok(m)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        super::write_file_atomic(path, self.to_json().as_bytes())
    }

    /// Unique ids of a split, in first-appearance order.
    pub fn ids(&self, split: Split) -> Vec<&ManifestEntry> {
        let mut seen = BTreeSet::new();
        self.entries
            .iter()
            .filter(|e| e.split == split && seen.insert(e.id.as_str()))
            .collect()
    }
}

/// Resolves a manifest path against the manifest's directory.
pub fn resolve(root: &Path, p: &str) -> PathBuf {
    let p = Path::new(p);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        root.join(p)
    }
}

fn integrity(reason: String) -> Error {
    Error::Format {
        format: "manifest",
        reason,
    }
}

/// Checks that every referenced file exists, parses and has the declared
/// size, that splits follow the map ids, and that entries sharing an id
/// share one depth file. Returns the number of files checked.
pub fn verify_manifest(manifest: &DatasetManifest, root: &Path) -> Result<usize> {
    let [w, h] = manifest.image_size;
    let mut keys = BTreeSet::new();
    let mut depth_of: BTreeMap<&str, &str> = BTreeMap::new();
    let mut files = BTreeSet::new();
    for e in &manifest.entries {
        if !keys.insert((e.id.as_str(), e.illumination)) {
            return Err(integrity(format!("duplicate entry {} / {}", e.id, e.illumination)));
        }
        if e.split != split_for_map(e.map_id) {
            return Err(integrity(format!("entry {} has split {:?} but map {}", e.id, e.split, e.map_id)));
        }
        if let Some(prev) = depth_of.insert(&e.id, &e.depth_path) {
            if prev != e.depth_path {
                return Err(integrity(format!("entry {} references two depth files", e.id)));
            }
        }
        files.insert((e.image_path.clone(), 0u8));
        files.insert((e.depth_path.clone(), 1));
        if let Some(n) = &e.normal_path {
            files.insert((n.clone(), 2));
        }
    }
    let check = |found: (usize, usize), p: &Path| {
        if found != (w, h) {
            Err(integrity(format!("{}: size {:?}, manifest declares {:?}", p.display(), found, (w, h))))
        } else {
            Ok(())
        }
    };
    for (rel, kind) in &files {
        let p = resolve(root, rel);
        match kind {
            0 => check(png::read_gray(&p)?.dims(), &p)?,
            1 => check(read_depth(&p, DepthFormat::from_path(&p)?)?.dims(), &p)?,
            _ => check(pfm::read_normals_pfm(&p)?.dims(), &p)?,
        }
    }
    Ok(files.len())
}

/// How to subsample a manifest. Val and test entries are always kept.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsetSpec {
    /// Fraction of training ids kept, in (0, 1].
    pub fraction: f64,
    /// When set, every kept training id contributes exactly one entry and
    /// the illumination kinds are mixed in these proportions.
    pub ratio: Option<Vec<(IlluminationKind, f64)>>,
}

impl SubsetSpec {
    pub fn fraction(f: f64) -> Self {
        Self { fraction: f, ratio: None }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fraction > 0.0 && self.fraction <= 1.0) {
            return Err(Error::Contract(format!("fraction must be in (0, 1], got {}", self.fraction)));
        }
        if let Some(r) = &self.ratio {
            let sum: f64 = r.iter().map(|(_, w)| w).sum();
            let kinds: BTreeSet<_> = r.iter().map(|(k, _)| k).collect();
            if r.is_empty() || kinds.len() != r.len() || r.iter().any(|(_, w)| !(*w >= 0.0)) || (sum - 1.0).abs() > 1e-9 {
                return Err(Error::Contract(format!("ratio weights must be distinct kinds summing to 1, got {r:?}")));
            }
        }
        Ok(())
    }
}

/// Largest-remainder apportionment of `n` items to `weights`.
fn apportion(n: usize, weights: &[f64]) -> Vec<usize> {
    let exact: Vec<f64> = weights.iter().map(|w| w * n as f64).collect();
    let mut counts: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|a, b| {
        let (fa, fb) = (exact[*a] - exact[*a].floor(), exact[*b] - exact[*b].floor());
        fb.total_cmp(&fa).then(a.cmp(b))
    });
    let mut left = n - counts.iter().sum::<usize>();
    for k in order {
        if left == 0 {
            break;
        }
        counts[k] += 1;
        left -= 1;
    }
    counts
}

pub fn subset_manifest(manifest: &DatasetManifest, spec: &SubsetSpec, seed: u64) -> Result<DatasetManifest> {
    spec.validate()?;
    let train_ids: Vec<String> = manifest.ids(Split::Train).iter().map(|e| e.id.clone()).collect();
    let keep = (spec.fraction * train_ids.len() as f64).round() as usize;
    if keep == 0 {
        return Err(Error::Contract(format!(
            "fraction {} of {} training ids keeps nothing",
            spec.fraction,
            train_ids.len()
        )));
    }
    let mut shuffled = train_ids.clone();
    shuffled.shuffle(&mut seed::stream(seed, 0, "subset"));
    let kept: Vec<String> = if keep == train_ids.len() { train_ids } else { shuffled[..keep].to_vec() };

    let assigned: BTreeMap<String, Option<IlluminationKind>> = match &spec.ratio {
        None => kept.iter().map(|id| (id.clone(), None)).collect(),
        Some(ratio) => {
            let weights: Vec<f64> = ratio.iter().map(|(_, w)| *w).collect();
            let counts = apportion(kept.len(), &weights);
            let mut order = kept.clone();
            order.sort();
            order.shuffle(&mut seed::stream(seed, 1, "subset"));
            let mut out = BTreeMap::new();
            let mut it = order.into_iter();
            for ((kind, _), c) in ratio.iter().zip(counts) {
                for id in it.by_ref().take(c) {
                    out.insert(id, Some(*kind));
                }
            }
            out
        }
    };

    for (id, kind) in &assigned {
        if let Some(k) = kind {
            if !manifest.entries.iter().any(|e| &e.id == id && e.illumination == *k) {
                return Err(Error::Contract(format!("id {id} has no {k} entry")));
            }
        }
    }
    let entries = manifest
        .entries
        .iter()
        .filter(|e| match e.split {
            Split::Train => match assigned.get(&e.id) {
                None => false,
                Some(None) => true,
                Some(Some(k)) => *k == e.illumination,
            },
            _ => true,
        })
        .cloned()
        .collect();
    Ok(DatasetManifest::new(manifest.rig.clone(), manifest.image_size, entries))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synthetic(ids: usize, kinds: &[IlluminationKind]) -> DatasetManifest {
        let mut entries = Vec::new();
        for i in 0..ids {
            let map_id = (i % 5) as u32;
            for k in kinds {
                entries.push(ManifestEntry {
                    id: format!("{i:06}"),
                    image_path: format!("images/{i:06}_{k}.png"),
                    depth_path: format!("depth/{i:06}.pfm"),
                    normal_path: None,
                    illumination: *k,
                    cell_deg: 0.5,
                    seed: i as u64,
                    map_id,
                    split: split_for_map(map_id),
                });
            }
        }
        DatasetManifest::new("rig".into(), [320, 320], entries)
    }

    #[test]
    fn split_by_map() {
        let s: Vec<Split> = (0..6).map(split_for_map).collect();
        assert_eq!(s, [Split::Train, Split::Train, Split::Train, Split::Val, Split::Test, Split::Train]);
    }

    #[test]
    fn full_fraction_is_identity() {
        let m = synthetic(20, &[IlluminationKind::Led, IlluminationKind::Hb]);
        assert_eq!(subset_manifest(&m, &SubsetSpec::fraction(1.0), 3).unwrap(), m);
    }

    #[test]
    fn tenth_of_train() {
        let m = synthetic(1667, &[IlluminationKind::Led]);
        assert_eq!(m.counts.train, 1001);
        let s = subset_manifest(&m, &SubsetSpec::fraction(0.1), 3).unwrap();
        assert_eq!(s.counts.train, 100);
        assert_eq!((s.counts.val, s.counts.test), (m.counts.val, m.counts.test));
        let again = subset_manifest(&m, &SubsetSpec::fraction(0.1), 3).unwrap();
        assert_eq!(s, again);
        assert_ne!(s, subset_manifest(&m, &SubsetSpec::fraction(0.1), 4).unwrap());
    }

    #[test]
    fn tiny_fraction_is_rejected() {
        let m = synthetic(10, &[IlluminationKind::Led]);
        assert!(matches!(subset_manifest(&m, &SubsetSpec::fraction(0.01), 0), Err(Error::Contract(_))));
        assert!(subset_manifest(&m, &SubsetSpec::fraction(0.0), 0).is_err());
        assert!(subset_manifest(&m, &SubsetSpec::fraction(1.5), 0).is_err());
    }

    #[test]
    fn mixing_ratio() {
        use IlluminationKind::{Hb, Led};
        let m = synthetic(1667, &[Led, Hb]);
        let spec = SubsetSpec {
            fraction: 1.0,
            ratio: Some(vec![(Led, 0.1), (Hb, 0.9)]),
        };
        let s = subset_manifest(&m, &spec, 9).unwrap();
        let train: Vec<_> = s.entries.iter().filter(|e| e.split == Split::Train).collect();
        assert_eq!(train.len(), 1001);
        let led = train.iter().filter(|e| e.illumination == Led).count();
        assert!((led as i64 - 100).abs() <= 1, "{led}");
        let ids: BTreeSet<_> = train.iter().map(|e| &e.id).collect();
        assert_eq!(ids.len(), 1001);
        let bad = SubsetSpec {
            fraction: 1.0,
            ratio: Some(vec![(Led, 0.5), (Hb, 0.6)]),
        };
        assert!(subset_manifest(&m, &bad, 9).is_err());
    }

    #[test]
    fn apportion_sums() {
        assert_eq!(apportion(10, &[0.25, 0.25, 0.5]), vec![3, 2, 5]);
        assert_eq!(apportion(7, &[1.0]), vec![7]);
    }
}
