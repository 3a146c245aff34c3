//! Corpus manifests and leakage-safe (group-aware, stratified) splits.
//!
//! A corpus on disk is one directory per class label holding WAV files named
//! `<speaker>_<take>.wav`. Every file is its own *group*: augmented
//! derivatives (`<stem>.aug-<technique>.wav`) inherit the group of their source
//! so that splits never place an original and its derivatives on opposite sides.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

/// Upper bound on distinct class labels.
pub const MAX_CLASSES: usize = 29;

pub const MANIFEST_HEADER: [&str; 5] = ["path", "label", "speaker", "group", "origin"];

/// Marker inserted before the technique name in derivative file names.
pub const AUGMENTED_MARKER: &str = ".aug-";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Origin {
    Original,
    Augmented,
}

impl Origin {
    pub fn as_str(self) -> &'static str {
        match self {
            Origin::Original => "original",
            Origin::Augmented => "augmented",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    /// Path relative to the manifest root, `/`-separated.
    pub path: String,
    pub label: String,
    pub speaker: String,
    pub group: String,
    pub origin: Origin,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorpusManifest {
    pub root: PathBuf,
    pub entries: Vec<ManifestEntry>,
    /// Non-fatal findings from scanning, e.g. empty class directories.
    pub warnings: Vec<String>,
}

impl CorpusManifest {
    pub fn new(root: impl Into<PathBuf>, entries: Vec<ManifestEntry>) -> Result<Self> {
        let m = Self {
            root: root.into(),
            entries,
            warnings: Vec::new(),
        };
        m.validate()?;
        Ok(m)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn resolve(&self, entry: &ManifestEntry) -> PathBuf {
        self.root.join(&entry.path)
    }

    /// Sorted distinct labels.
    pub fn labels(&self) -> Vec<String> {
        self.entries
            .iter()
            .map(|e| e.label.clone())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect()
    }

    pub fn original_indices(&self) -> Vec<usize> {
        self.entries
            .iter()
            .enumerate()
            .filter(|(_, e)| e.origin == Origin::Original)
            .map(|(i, _)| i)
            .collect()
    }

    /// Manifest restricted to the given entry indices, in the given order.
    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            root: self.root.clone(),
            entries: indices.iter().map(|&i| self.entries[i].clone()).collect(),
            warnings: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut group_labels: BTreeMap<&str, &str> = BTreeMap::new();
        let mut original_groups = BTreeSet::new();
        for e in &self.entries {
            if e.path.is_empty() || e.label.is_empty() || e.group.is_empty() {
                return Err(Error::Manifest(format!("entry `{}` has an empty field", e.path)));
            }
            match group_labels.insert(&e.group, &e.label) {
                Some(prev) if prev != e.label => return Err(Error::InconsistentGroup { group: e.group.clone() }),
                _ => {}
            }
            if e.origin == Origin::Original {
                original_groups.insert(e.group.as_str());
            }
        }
        if !original_groups.is_empty() {
            if let Some(orphan) = self
                .entries
                .iter()
                .find(|e| e.origin == Origin::Augmented && !original_groups.contains(e.group.as_str()))
            {
                return Err(Error::Manifest(format!(
                    "augmented entry `{}` has no original in group `{}`",
                    orphan.path, orphan.group
                )));
            }
        }
        let n_labels = self.labels().len();
        if n_labels > MAX_CLASSES {
            return Err(Error::Manifest(format!(
                "{n_labels} distinct labels exceeds the maximum of {MAX_CLASSES}"
            )));
        }
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        w.write_record(MANIFEST_HEADER).expect("in-memory write");
        for e in &self.entries {
            w.write_record([
                e.path.as_str(),
                e.label.as_str(),
                e.speaker.as_str(),
                e.group.as_str(),
                e.origin.as_str(),
            ])
            .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("fields are UTF-8")
    }

    /// Parses the CSV form. Relative paths resolve against `root`.
    pub fn from_csv(text: &str, root: impl Into<PathBuf>) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
        let header = r.headers().map_err(|e| Error::Manifest(e.to_string()))?;
        if header.iter().ne(MANIFEST_HEADER) {
            return Err(Error::Manifest(format!(
                "expected header `{}`",
                MANIFEST_HEADER.join(",")
            )));
        }
        let mut entries = Vec::new();
        for rec in r.records() {
            let rec = rec.map_err(|e| Error::Manifest(e.to_string()))?;
            if rec.len() != 5 {
                return Err(Error::Manifest(format!("row has {} fields", rec.len())));
            }
            let origin = match &rec[4] {
                "original" => Origin::Original,
                "augmented" => Origin::Augmented,
                other => return Err(Error::Manifest(format!("unknown origin `{other}`"))),
            };
            entries.push(ManifestEntry {
                path: rec[0].to_string(),
                label: rec[1].to_string(),
                speaker: rec[2].to_string(),
                group: rec[3].to_string(),
                origin,
            });
        }
        Self::new(root, entries)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let root = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_csv(&text, root)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}

fn is_wav(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("wav"))
}

/// `<speaker>_<take>` → `speaker`; anything else → `unknown`.
pub fn speaker_from_stem(stem: &str) -> String {
    match stem.split_once('_') {
        Some((speaker, take)) if !speaker.is_empty() && !take.is_empty() => speaker.to_string(),
        _ => "unknown".to_string(),
    }
}

fn sorted_dir(path: &Path) -> Result<Vec<PathBuf>> {
    let mut out = fs::read_dir(path)
        .map_err(|e| Error::io(path, e))?
        .map(|d| d.map(|d| d.path()).map_err(|e| Error::io(path, e)))
        .collect::<Result<Vec<_>>>()?;
    out.sort();
    Ok(out)
}

/// Scans a directory-per-class corpus into a manifest in lexicographic order.
pub fn scan_corpus(root: impl AsRef<Path>) -> Result<CorpusManifest> {
    let root = root.as_ref();
    let mut entries = Vec::new();
    let mut warnings = Vec::new();
    for class_dir in sorted_dir(root)?.into_iter().filter(|p| p.is_dir()) {
        let label = class_dir
            .file_name()
            .and_then(|n| n.to_str())
            .ok_or_else(|| Error::Manifest(format!("non UTF-8 directory {}", class_dir.display())))?
            .to_string();
        let mut count = 0;
        for file in sorted_dir(&class_dir)?.into_iter().filter(|p| p.is_file() && is_wav(p)) {
            let Some(stem) = file.file_stem().and_then(|s| s.to_str()) else {
                warnings.push(format!("skipped non UTF-8 file name in `{label}`"));
                continue;
            };
            let (source_stem, origin) = match stem.find(AUGMENTED_MARKER) {
                Some(pos) => (&stem[..pos], Origin::Augmented),
                None => (stem, Origin::Original),
            };
            let file_name = file.file_name().and_then(|n| n.to_str()).unwrap_or(stem);
            entries.push(ManifestEntry {
                path: format!("{label}/{file_name}"),
                label: label.clone(),
                speaker: speaker_from_stem(source_stem),
                group: format!("{label}/{source_stem}"),
                origin,
            });
            count += 1;
        }
        if count == 0 {
            warnings.push(format!("class directory `{label}` contains no WAV files"));
        }
    }
    if entries.is_empty() {
        return Err(Error::EmptyCorpus(root.to_path_buf()));
    }
    let mut manifest = CorpusManifest::new(root, entries)?;
    manifest.warnings = warnings;
    Ok(manifest)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fold {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
}

/// Holdout indices and/or k-fold partitions, all indexing the source rows.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub train_indices: Vec<usize>,
    pub test_indices: Vec<usize>,
    pub folds: Vec<Fold>,
}

impl SplitPlan {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Groups of each class (sorted), with row indices per group.
struct GroupIndex<'a> {
    classes: BTreeMap<&'a str, Vec<&'a str>>,
    rows: BTreeMap<&'a str, Vec<usize>>,
}

impl<'a> GroupIndex<'a> {
    fn build(rows: &[(usize, &'a str, &'a str)]) -> Result<Self> {
        let mut classes: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
        let mut group_label: BTreeMap<&str, &str> = BTreeMap::new();
        let mut group_rows: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
        for &(idx, label, group) in rows {
            if let Some(prev) = group_label.insert(group, label) {
                if prev != label {
                    return Err(Error::InconsistentGroup {
                        group: group.to_string(),
                    });
                }
            }
            classes.entry(label).or_default().insert(group);
            group_rows.entry(group).or_default().push(idx);
        }
        Ok(Self {
            classes: classes.into_iter().map(|(c, g)| (c, g.into_iter().collect())).collect(),
            rows: group_rows,
        })
    }

    fn shuffled_groups(&self, class: &str, seed: u64) -> Vec<&'a str> {
        let mut groups = self.classes[class].clone();
        groups.shuffle(&mut seed::rng(seed::derive_seed(seed, class)));
        groups
    }

    fn collect_rows(&self, groups: &BTreeSet<&str>) -> Vec<usize> {
        let mut out: Vec<usize> = groups.iter().flat_map(|g| self.rows[g].iter().copied()).collect();
        out.sort_unstable();
        out
    }
}

/// Group-aware stratified holdout over `(row, label, group)` triples.
pub fn stratified_split_rows(rows: &[(usize, &str, &str)], test_fraction: f64, seed: u64) -> Result<SplitPlan> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::Parameter(format!(
            "test fraction {test_fraction} is not in (0, 1)"
        )));
    }
    let index = GroupIndex::build(rows)?;
    let mut test_groups = BTreeSet::new();
    let mut train_groups = BTreeSet::new();
    for (&class, groups) in &index.classes {
        let n = groups.len();
        if n < 2 {
            return Err(Error::UnsatisfiableStratification {
                class: class.to_string(),
                groups: n,
            });
        }
        let n_test = ((test_fraction * n as f64).round() as usize).clamp(1, n - 1);
        let shuffled = index.shuffled_groups(class, seed);
        test_groups.extend(shuffled[..n_test].iter().copied());
        train_groups.extend(shuffled[n_test..].iter().copied());
    }
    Ok(SplitPlan {
        train_indices: index.collect_rows(&train_groups),
        test_indices: index.collect_rows(&test_groups),
        folds: Vec::new(),
    })
}

/// Group-aware stratified k-fold partition over `(row, label, group)` triples.
pub fn kfold_rows(rows: &[(usize, &str, &str)], k: usize, seed: u64) -> Result<Vec<Fold>> {
    if k < 2 {
        return Err(Error::Parameter(format!("k = {k}; need at least 2 folds")));
    }
    let index = GroupIndex::build(rows)?;
    let mut fold_groups: Vec<BTreeSet<&str>> = vec![BTreeSet::new(); k];
    // Rotating the starting fold per class keeps fold sizes balanced when
    // class group counts are not multiples of k.
    let mut offset = 0;
    for (&class, groups) in &index.classes {
        if groups.len() < k {
            return Err(Error::UnsatisfiableFolds {
                class: class.to_string(),
                groups: groups.len(),
                k,
            });
        }
        for (j, g) in index.shuffled_groups(class, seed).into_iter().enumerate() {
            fold_groups[(offset + j) % k].insert(g);
        }
        offset += groups.len();
    }
    let all: Vec<usize> = {
        let mut v: Vec<usize> = rows.iter().map(|r| r.0).collect();
        v.sort_unstable();
        v
    };
    Ok(fold_groups
        .iter()
        .map(|groups| {
            let validation = index.collect_rows(groups);
            let held: BTreeSet<usize> = validation.iter().copied().collect();
            Fold {
                train: all.iter().copied().filter(|i| !held.contains(i)).collect(),
                validation,
            }
        })
        .collect())
}

fn original_rows(manifest: &CorpusManifest) -> Vec<(usize, &str, &str)> {
    manifest
        .entries
        .iter()
        .enumerate()
        .filter(|(_, e)| e.origin == Origin::Original)
        .map(|(i, e)| (i, e.label.as_str(), e.group.as_str()))
        .collect()
}

/// Holdout split of the manifest's original entries; indices refer to `manifest.entries`.
pub fn stratified_split(manifest: &CorpusManifest, test_fraction: f64, seed: u64) -> Result<SplitPlan> {
    stratified_split_rows(&original_rows(manifest), test_fraction, seed)
}

/// k-fold split of the manifest's original entries; indices refer to `manifest.entries`.
pub fn kfold(manifest: &CorpusManifest, k: usize, seed: u64) -> Result<SplitPlan> {
    Ok(SplitPlan {
        folds: kfold_rows(&original_rows(manifest), k, seed)?,
        ..SplitPlan::default()
    })
}
