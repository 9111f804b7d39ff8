//! Skeleton-sequence ingestion: SBU-style text files, deterministic synthetic
//! two-person interactions for desk-scale runs, centering normalization, and
//! topology files.
//!
//! File formats (all line-oriented text):
//!
//! * topology: `key = value` pairs with 1-based joint indices
//!   (`joints_per_person`, `persons`, `root`, `bones = 1-2,2-3,...`,
//!   `arms`, `legs`, `excluded`);
//! * dataset split: one record per line,
//!   `label fold frames joints v1 v2 ...` with row-major
//!   frame-joint-coordinate order and round-trip-exact floats;
//! * SBU: directories `<pair>/<category>/<run>/skeleton_pos.txt`, each line
//!   one frame of comma-separated values, 90 coordinates (two persons of 15
//!   joints), optionally preceded by a frame index.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{GeomError, Result};
use crate::net::topology::{SkeletonTopology, TopologySpec};
use crate::rng::SplitMix64;

/// A two-person motion: frames x global joints x 3 coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct SkeletonSequence {
    frames: Vec<Vec<[f64; 3]>>,
}

impl SkeletonSequence {
    pub fn new(frames: Vec<Vec<[f64; 3]>>) -> Result<SkeletonSequence> {
        if frames.is_empty() {
            return Err(GeomError::Validation(
                "a sequence needs at least one frame".to_string(),
            ));
        }
        let joints = frames[0].len();
        if joints == 0 || frames.iter().any(|f| f.len() != joints) {
            return Err(GeomError::Validation(
                "every frame must list the same non-zero joint count".to_string(),
            ));
        }
        if frames
            .iter()
            .any(|f| f.iter().any(|c| c.iter().any(|x| !x.is_finite())))
        {
            return Err(GeomError::Validation(
                "sequence contains non-finite coordinates".to_string(),
            ));
        }
        Ok(SkeletonSequence { frames })
    }

    pub fn num_frames(&self) -> usize {
        self.frames.len()
    }

    pub fn num_joints(&self) -> usize {
        self.frames[0].len()
    }

    pub fn joint(&self, frame: usize, joint: usize) -> [f64; 3] {
        self.frames[frame][joint]
    }

    pub fn translated(&self, delta: [f64; 3]) -> SkeletonSequence {
        let frames = self
            .frames
            .iter()
            .map(|f| {
                f.iter()
                    .map(|c| [c[0] + delta[0], c[1] + delta[1], c[2] + delta[2]])
                    .collect()
            })
            .collect();
        SkeletonSequence { frames }
    }
}

/// One labeled sequence with its cross-validation fold.
#[derive(Debug, Clone)]
pub struct SplitItem {
    pub sequence: SkeletonSequence,
    pub label: usize,
    pub fold: usize,
}

/// A list of labeled sequences under a protocol identifier.
#[derive(Debug, Clone, Default)]
pub struct DatasetSplit {
    pub items: Vec<SplitItem>,
    pub protocol: String,
}

impl DatasetSplit {
    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn max_label(&self) -> Option<usize> {
        self.items.iter().map(|i| i.label).max()
    }
}

/// Translate so the first skeleton's root at frame one sits at the origin.
/// No scaling or rotation; idempotent.
pub fn normalize(seq: &SkeletonSequence, topo: &SkeletonTopology) -> SkeletonSequence {
    let origin = seq.joint(0, topo.roots()[0]);
    seq.translated([-origin[0], -origin[1], -origin[2]])
}

// ---------------------------------------------------------------------------
// builtin topologies
// ---------------------------------------------------------------------------

/// Six joints per person: hip (root), torso, two arm tips, two leg tips.
pub fn synthetic_topology() -> TopologySpec {
    TopologySpec {
        joints_per_person: 6,
        persons: 2,
        bones: vec![(0, 1), (1, 2), (1, 3), (0, 4), (0, 5)],
        root: 0,
        arms: vec![2, 3],
        legs: vec![4, 5],
        excluded: vec![],
        input_order: None,
    }
}

/// Minimal four-joint skeleton for gradient checks: root, mid, one arm, one leg.
pub fn toy_topology() -> TopologySpec {
    TopologySpec {
        joints_per_person: 4,
        persons: 2,
        bones: vec![(0, 1), (1, 2), (0, 3)],
        root: 0,
        arms: vec![2],
        legs: vec![3],
        excluded: vec![],
        input_order: None,
    }
}

/// The 15-joint SBU skeleton in the dataset's own joint order: head, neck,
/// torso, then left/right arm chains and left/right leg chains. The torso is
/// the root; arm and leg sets carry over from the larger skeleton of the
/// capture standard through the published joint correspondence.
pub fn sbu_topology() -> TopologySpec {
    TopologySpec {
        joints_per_person: 15,
        persons: 2,
        bones: vec![
            (0, 1), // head - neck
            (1, 2), // neck - torso
            (1, 3), // neck - left shoulder
            (3, 4), // left shoulder - elbow
            (4, 5), // left elbow - hand
            (1, 6), // neck - right shoulder
            (6, 7),
            (7, 8),
            (2, 9), // torso - left hip
            (9, 10),
            (10, 11),
            (2, 12), // torso - right hip
            (12, 13),
            (13, 14),
        ],
        root: 2,
        arms: vec![3, 4, 5, 6, 7, 8],
        legs: vec![9, 10, 11, 12, 13, 14],
        excluded: vec![],
        input_order: None,
    }
}

/// Topology by builtin name.
pub fn builtin_topology(name: &str) -> Result<TopologySpec> {
    match name {
        "synthetic" => Ok(synthetic_topology()),
        "toy" => Ok(toy_topology()),
        "sbu" => Ok(sbu_topology()),
        other => Err(GeomError::Config(format!(
            "unknown builtin topology '{other}' (expected synthetic, toy, or sbu)"
        ))),
    }
}

// ---------------------------------------------------------------------------
// topology files
// ---------------------------------------------------------------------------

fn parse_index_list(value: &str, path: &str, line: usize) -> Result<Vec<usize>> {
    let mut out = Vec::new();
    for part in value.split(',') {
        let part = part.trim();
        if part.is_empty() {
            continue;
        }
        let idx: usize = part.parse().map_err(|_| GeomError::Parse {
            path: path.to_string(),
            line,
            message: format!("'{part}' is not a joint index"),
        })?;
        if idx == 0 {
            return Err(GeomError::Parse {
                path: path.to_string(),
                line,
                message: "joint indices are 1-based".to_string(),
            });
        }
        out.push(idx - 1);
    }
    Ok(out)
}

/// Parse a `key = value` topology file (1-based joint indices).
pub fn parse_topology_file(path: &Path) -> Result<TopologySpec> {
    let text = fs::read_to_string(path)?;
    let path_str = path.display().to_string();
    let mut joints_per_person = None;
    let mut persons = 2usize;
    let mut root = None;
    let mut bones = Vec::new();
    let mut arms = Vec::new();
    let mut legs = Vec::new();
    let mut excluded = Vec::new();
    let mut input_order = None;
    for (lineno, raw) in text.lines().enumerate() {
        let line = lineno + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content.split_once('=').ok_or_else(|| GeomError::Parse {
            path: path_str.clone(),
            line,
            message: "expected 'key = value'".to_string(),
        })?;
        let key = key.trim();
        let value = value.trim();
        match key {
            "joints_per_person" => {
                joints_per_person = Some(value.parse().map_err(|_| GeomError::Parse {
                    path: path_str.clone(),
                    line,
                    message: "joints_per_person must be an integer".to_string(),
                })?)
            }
            "persons" => {
                persons = value.parse().map_err(|_| GeomError::Parse {
                    path: path_str.clone(),
                    line,
                    message: "persons must be an integer".to_string(),
                })?
            }
            "root" => {
                let r: usize = value.parse().map_err(|_| GeomError::Parse {
                    path: path_str.clone(),
                    line,
                    message: "root must be a 1-based joint index".to_string(),
                })?;
                if r == 0 {
                    return Err(GeomError::Parse {
                        path: path_str.clone(),
                        line,
                        message: "joint indices are 1-based".to_string(),
                    });
                }
                root = Some(r - 1);
            }
            "bones" => {
                for pair in value.split(',') {
                    let pair = pair.trim();
                    if pair.is_empty() {
                        continue;
                    }
                    let (a, b) = pair.split_once('-').ok_or_else(|| GeomError::Parse {
                        path: path_str.clone(),
                        line,
                        message: format!("bone '{pair}' must look like 1-2"),
                    })?;
                    let parse = |s: &str| -> Result<usize> {
                        let v: usize = s.trim().parse().map_err(|_| GeomError::Parse {
                            path: path_str.clone(),
                            line,
                            message: format!("'{s}' is not a joint index"),
                        })?;
                        if v == 0 {
                            return Err(GeomError::Parse {
                                path: path_str.clone(),
                                line,
                                message: "joint indices are 1-based".to_string(),
                            });
                        }
                        Ok(v - 1)
                    };
                    bones.push((parse(a)?, parse(b)?));
                }
            }
            "arms" => arms = parse_index_list(value, &path_str, line)?,
            "legs" => legs = parse_index_list(value, &path_str, line)?,
            "excluded" => excluded = parse_index_list(value, &path_str, line)?,
            "input_order" => {
                let order = parse_index_list(value, &path_str, line)?;
                input_order = if order.is_empty() { None } else { Some(order) };
            }
            other => {
                return Err(GeomError::Parse {
                    path: path_str.clone(),
                    line,
                    message: format!("unknown key '{other}'"),
                })
            }
        }
    }
    let joints_per_person = joints_per_person
        .ok_or_else(|| GeomError::Config(format!("{path_str}: missing joints_per_person")))?;
    let root = root.ok_or_else(|| GeomError::Config(format!("{path_str}: missing root")))?;
    Ok(TopologySpec {
        joints_per_person,
        persons,
        bones,
        root,
        arms,
        legs,
        excluded,
        input_order,
    })
}

// ---------------------------------------------------------------------------
// synthetic interactions
// ---------------------------------------------------------------------------

/// Parameters of the synthetic generator. Class archetypes are deterministic
/// two-person trajectories (approach vs retreat and friends) separated by
/// much more than the jitter at any sigma <= 0.05.
#[derive(Debug, Clone)]
pub struct SyntheticSpec {
    pub classes: usize,
    pub frames: usize,
    pub sigma: f64,
    pub topology: TopologySpec,
}

impl SyntheticSpec {
    pub fn two_class(sigma: f64) -> SyntheticSpec {
        SyntheticSpec {
            classes: 2,
            frames: 20,
            sigma,
            topology: synthetic_topology(),
        }
    }
}

struct ClassMotion {
    approach_speed: f64,
    arm_lift: f64,
    arm_reach: f64,
    leg_freq: f64,
}

fn class_motion(class: usize) -> ClassMotion {
    // alternate approach / retreat, with amplitude and frequency variations
    // for higher class ids
    let tier = (class / 2) as f64;
    let toward = class.is_multiple_of(2);
    ClassMotion {
        approach_speed: if toward { 0.65 } else { -0.65 } * (1.0 + 0.3 * tier),
        arm_lift: if toward { 0.45 } else { -0.25 },
        arm_reach: if toward { 0.35 } else { -0.2 },
        leg_freq: 2.0 + (class % 3) as f64,
    }
}

fn local_offset(spec: &TopologySpec, joint: usize) -> [f64; 3] {
    // synthetic skeletons: a coarse standing figure; x is the approach axis
    let arms = &spec.arms;
    let legs = &spec.legs;
    if joint == spec.root {
        [0.0, 0.0, 1.0]
    } else if let Some(pos) = arms.iter().position(|&a| a == joint) {
        let side = if pos % 2 == 0 { -1.0 } else { 1.0 };
        [0.0, side * 0.35, 1.55]
    } else if let Some(pos) = legs.iter().position(|&l| l == joint) {
        let side = if pos % 2 == 0 { -1.0 } else { 1.0 };
        [0.0, side * 0.18, 0.45]
    } else {
        [0.0, 0.0, 1.5] // torso / spine joints
    }
}

/// Deterministic synthetic dataset: `count` sequences cycling through the
/// classes, with Gaussian jitter of the configured sigma.
pub fn generate_synthetic(spec: &SyntheticSpec, count: usize, seed: u64) -> Result<DatasetSplit> {
    if spec.classes < 2 {
        return Err(GeomError::Config(
            "synthetic data needs at least 2 classes".to_string(),
        ));
    }
    if spec.frames == 0 {
        return Err(GeomError::Config(
            "synthetic data needs frames >= 1".to_string(),
        ));
    }
    let topo = &spec.topology;
    let j = topo.joints_per_person;
    let mut rng = SplitMix64::new(seed);
    let mut items = Vec::with_capacity(count);
    for i in 0..count {
        let class = i % spec.classes;
        let motion = class_motion(class);
        let mut frames = Vec::with_capacity(spec.frames);
        for t in 0..spec.frames {
            let tau = t as f64 / spec.frames.max(2) as f64;
            let mut joints = Vec::with_capacity(j * topo.persons);
            for person in 0..topo.persons {
                let dir = 1.0 - 2.0 * (person % 2) as f64; // facing direction
                for local in 0..j {
                    let off = local_offset(topo, local);
                    let is_arm = topo.arms.contains(&local);
                    let is_leg = topo.legs.contains(&local);
                    let leg_phase =
                        if is_leg && topo.legs.iter().position(|&l| l == local).unwrap() % 2 == 1 {
                            std::f64::consts::FRAC_PI_2
                        } else {
                            0.0
                        };
                    let mut x = -dir + dir * motion.approach_speed * tau + off[0];
                    let mut y = off[1] + 0.05 * (std::f64::consts::TAU * tau).sin();
                    let mut z = off[2];
                    if is_arm {
                        x += dir * motion.arm_reach * (std::f64::consts::PI * tau).sin();
                        z += motion.arm_lift * (std::f64::consts::PI * tau).sin();
                    }
                    if is_leg {
                        z += 0.12
                            * (std::f64::consts::PI * motion.leg_freq * tau + leg_phase)
                                .sin()
                                .abs();
                    }
                    if spec.sigma > 0.0 {
                        x += spec.sigma * rng.normal();
                        y += spec.sigma * rng.normal();
                        z += spec.sigma * rng.normal();
                    }
                    joints.push([x, y, z]);
                }
            }
            frames.push(joints);
        }
        items.push(SplitItem {
            sequence: SkeletonSequence::new(frames)?,
            label: class,
            fold: 0,
        });
    }
    Ok(DatasetSplit {
        items,
        protocol: "synthetic".to_string(),
    })
}

// ---------------------------------------------------------------------------
// split serialization
// ---------------------------------------------------------------------------

/// Write a split as line-delimited records:
/// `label fold frames joints v...` with round-trip-exact floats.
pub fn save_split(split: &DatasetSplit, path: &Path) -> Result<()> {
    let mut out = String::new();
    for item in &split.items {
        let seq = &item.sequence;
        write!(
            out,
            "{} {} {} {}",
            item.label,
            item.fold,
            seq.num_frames(),
            seq.num_joints()
        )
        .expect("string write");
        for t in 0..seq.num_frames() {
            for j in 0..seq.num_joints() {
                let c = seq.joint(t, j);
                write!(out, " {} {} {}", c[0], c[1], c[2]).expect("string write");
            }
        }
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

/// Inverse of [`save_split`].
pub fn load_split(path: &Path) -> Result<DatasetSplit> {
    let text = fs::read_to_string(path)?;
    let path_str = path.display().to_string();
    let mut items = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = lineno + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let mut parts = raw.split_whitespace();
        let mut next_usize = |what: &str| -> Result<usize> {
            parts
                .next()
                .ok_or_else(|| GeomError::Parse {
                    path: path_str.clone(),
                    line,
                    message: format!("missing {what}"),
                })?
                .parse()
                .map_err(|_| GeomError::Parse {
                    path: path_str.clone(),
                    line,
                    message: format!("bad {what}"),
                })
        };
        let label = next_usize("label")?;
        let fold = next_usize("fold")?;
        let frames = next_usize("frame count")?;
        let joints = next_usize("joint count")?;
        let mut values = Vec::with_capacity(frames * joints * 3);
        for part in parts {
            let v: f64 = part.parse().map_err(|_| GeomError::Parse {
                path: path_str.clone(),
                line,
                message: format!("bad coordinate '{part}'"),
            })?;
            values.push(v);
        }
        if values.len() != frames * joints * 3 {
            return Err(GeomError::Parse {
                path: path_str.clone(),
                line,
                message: format!(
                    "expected {} coordinates, found {}",
                    frames * joints * 3,
                    values.len()
                ),
            });
        }
        let mut seq_frames = Vec::with_capacity(frames);
        let mut it = values.into_iter();
        for _ in 0..frames {
            let mut frame = Vec::with_capacity(joints);
            for _ in 0..joints {
                frame.push([it.next().unwrap(), it.next().unwrap(), it.next().unwrap()]);
            }
            seq_frames.push(frame);
        }
        items.push(SplitItem {
            sequence: SkeletonSequence::new(seq_frames)?,
            label,
            fold,
        });
    }
    Ok(DatasetSplit {
        items,
        protocol: "file".to_string(),
    })
}

// ---------------------------------------------------------------------------
// SBU loading
// ---------------------------------------------------------------------------

/// Published 5-fold split of the SBU participant pairs.
const SBU_FOLDS: [&[&str]; 5] = [
    &["s01s02", "s03s04", "s05s02", "s06s04"],
    &["s02s03", "s02s07", "s03s05", "s05s03"],
    &["s01s03", "s01s07", "s07s01", "s07s03"],
    &["s02s01", "s02s06", "s03s02", "s03s06"],
    &["s04s02", "s04s03", "s04s06", "s06s02", "s06s03"],
];

fn sbu_fold_of(pair: &str) -> usize {
    for (i, fold) in SBU_FOLDS.iter().enumerate() {
        if fold.contains(&pair) {
            return i;
        }
    }
    0
}

fn collect_skeleton_files(dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    for entry in fs::read_dir(dir)? {
        let entry = entry?;
        let path = entry.path();
        if path.is_dir() {
            collect_skeleton_files(&path, out)?;
        } else if path.file_name().and_then(|n| n.to_str()) == Some("skeleton_pos.txt") {
            out.push(path);
        }
    }
    Ok(())
}

/// Load an SBU-layout directory: two persons of 15 joints per frame, one
/// comma-separated line per frame (a leading frame index is tolerated).
/// Labels come from the category directory name, folds from the published
/// participant-pair split; file columns are remapped to the canonical
/// topology through its `input_order` correspondence. An empty directory
/// yields an empty split with a warning on stderr.
pub fn load_sbu(dir: &Path, topo: &SkeletonTopology) -> Result<DatasetSplit> {
    let spec = topo.spec();
    if spec.joints_per_person != 15 || spec.persons != 2 {
        return Err(GeomError::Config(format!(
            "the SBU layout carries 2 persons of 15 joints; the topology declares {} of {}",
            spec.persons, spec.joints_per_person
        )));
    }
    let order: Vec<usize> = match &spec.input_order {
        Some(o) => o.clone(),
        None => (0..15).collect(),
    };
    let mut files = Vec::new();
    collect_skeleton_files(dir, &mut files)?;
    files.sort();
    if files.is_empty() {
        eprintln!("warning: no skeleton_pos.txt files under {}", dir.display());
        return Ok(DatasetSplit {
            items: Vec::new(),
            protocol: "sbu-5fold".to_string(),
        });
    }
    let mut items = Vec::new();
    for file in files {
        let path_str = file.display().to_string();
        let mut components: Vec<String> = file
            .components()
            .map(|c| c.as_os_str().to_string_lossy().to_string())
            .collect();
        components.pop(); // file name
        let _run = components.pop();
        let category = components.pop().unwrap_or_default();
        let pair = components.pop().unwrap_or_default();
        let label: usize = category.parse::<usize>().map_err(|_| GeomError::Parse {
            path: path_str.clone(),
            line: 0,
            message: format!("category directory '{category}' is not a number"),
        })?;
        if label == 0 {
            return Err(GeomError::Parse {
                path: path_str.clone(),
                line: 0,
                message: "category directories are 1-based".to_string(),
            });
        }
        let fold = sbu_fold_of(&pair);
        let text = fs::read_to_string(&file)?;
        let mut frames = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = lineno + 1;
            let raw = raw.trim().trim_end_matches(',');
            if raw.is_empty() {
                continue;
            }
            let mut values = Vec::new();
            for part in raw.split(',') {
                let part = part.trim();
                if part.is_empty() {
                    continue;
                }
                let v: f64 = part.parse().map_err(|_| GeomError::Parse {
                    path: path_str.clone(),
                    line,
                    message: format!("bad value '{part}'"),
                })?;
                values.push(v);
            }
            let coords = match values.len() {
                90 => &values[..],
                91 => &values[1..], // leading frame index
                other => {
                    return Err(GeomError::Parse {
                        path: path_str.clone(),
                        line,
                        message: format!("expected 90 or 91 values per frame, found {other}"),
                    })
                }
            };
            let mut frame = Vec::with_capacity(30);
            for person in 0..2 {
                for &src in &order {
                    let col = person * 15 + src;
                    frame.push([coords[3 * col], coords[3 * col + 1], coords[3 * col + 2]]);
                }
            }
            frames.push(frame);
        }
        if frames.is_empty() {
            eprintln!("warning: {} has no frames, skipping", file.display());
            continue;
        }
        items.push(SplitItem {
            sequence: SkeletonSequence::new(frames)?,
            label: label - 1,
            fold,
        });
    }
    Ok(DatasetSplit {
        items,
        protocol: "sbu-5fold".to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tmp_dir(name: &str) -> PathBuf {
        let dir = std::env::temp_dir().join(format!("geomnet-data-{name}-{}", std::process::id()));
        let _ = fs::remove_dir_all(&dir);
        fs::create_dir_all(&dir).unwrap();
        dir
    }

    #[test]
    fn synthetic_is_deterministic() {
        let spec = SyntheticSpec::two_class(0.02);
        let a = generate_synthetic(&spec, 10, 42).unwrap();
        let b = generate_synthetic(&spec, 10, 42).unwrap();
        for (x, y) in a.items.iter().zip(&b.items) {
            assert_eq!(x.sequence, y.sequence);
            assert_eq!(x.label, y.label);
        }
        let c = generate_synthetic(&spec, 10, 43).unwrap();
        assert_ne!(a.items[0].sequence, c.items[0].sequence);
    }

    #[test]
    fn sigma_zero_repeats_archetypes() {
        let spec = SyntheticSpec::two_class(0.0);
        let split = generate_synthetic(&spec, 6, 1).unwrap();
        assert_eq!(split.items[0].sequence, split.items[2].sequence);
        assert_eq!(split.items[1].sequence, split.items[3].sequence);
        assert_ne!(split.items[0].sequence, split.items[1].sequence);
    }

    #[test]
    fn nearest_centroid_separates_classes_at_low_noise() {
        let spec = SyntheticSpec::two_class(0.01);
        let train = generate_synthetic(&spec, 20, 5).unwrap();
        let test = generate_synthetic(&spec, 10, 6).unwrap();
        let dim = spec.frames * spec.topology.joints_per_person * spec.topology.persons * 3;
        let flatten = |s: &SkeletonSequence| -> Vec<f64> {
            let mut v = Vec::with_capacity(dim);
            for t in 0..s.num_frames() {
                for j in 0..s.num_joints() {
                    v.extend_from_slice(&s.joint(t, j));
                }
            }
            v
        };
        let mut centroids = vec![vec![0.0; dim]; 2];
        let mut counts = [0usize; 2];
        for item in &train.items {
            let f = flatten(&item.sequence);
            for (c, x) in centroids[item.label].iter_mut().zip(&f) {
                *c += x;
            }
            counts[item.label] += 1;
        }
        for (c, n) in centroids.iter_mut().zip(counts) {
            for x in c.iter_mut() {
                *x /= n as f64;
            }
        }
        let mut correct = 0;
        for item in &test.items {
            let f = flatten(&item.sequence);
            let d = |c: &[f64]| -> f64 { c.iter().zip(&f).map(|(a, b)| (a - b) * (a - b)).sum() };
            let pred = if d(&centroids[0]) < d(&centroids[1]) {
                0
            } else {
                1
            };
            if pred == item.label {
                correct += 1;
            }
        }
        assert_eq!(correct, test.items.len(), "classes must be separable");
    }

    #[test]
    fn normalize_centers_root_and_is_idempotent() {
        let spec = SyntheticSpec::two_class(0.02);
        let topo = SkeletonTopology::from_spec(spec.topology.clone()).unwrap();
        let split = generate_synthetic(&spec, 2, 9).unwrap();
        let seq = &split.items[0].sequence;
        let n = normalize(seq, &topo);
        let root = n.joint(0, topo.roots()[0]);
        assert_eq!(root, [0.0, 0.0, 0.0]);
        assert_eq!(normalize(&n, &topo), n);

        // translation is removed up to rounding
        let moved = normalize(&seq.translated([3.5, -2.0, 0.7]), &topo);
        let mut max_dev = 0.0f64;
        for t in 0..n.num_frames() {
            for j in 0..n.num_joints() {
                let a = n.joint(t, j);
                let b = moved.joint(t, j);
                for c in 0..3 {
                    max_dev = max_dev.max((a[c] - b[c]).abs());
                }
            }
        }
        assert!(max_dev < 1e-12, "translation residue {max_dev:e}");
    }

    #[test]
    fn split_roundtrip_is_exact() {
        let dir = tmp_dir("roundtrip");
        let spec = SyntheticSpec::two_class(0.02);
        let split = generate_synthetic(&spec, 8, 21).unwrap();
        let path = dir.join("split.txt");
        save_split(&split, &path).unwrap();
        let back = load_split(&path).unwrap();
        assert_eq!(back.len(), split.len());
        for (a, b) in split.items.iter().zip(&back.items) {
            assert_eq!(a.label, b.label);
            assert_eq!(a.fold, b.fold);
            assert_eq!(a.sequence, b.sequence);
        }
        fs::remove_dir_all(&dir).unwrap();
    }

    fn sbu_topo() -> SkeletonTopology {
        SkeletonTopology::from_spec(sbu_topology()).unwrap()
    }

    #[test]
    fn sbu_loader_parses_layout() {
        let dir = tmp_dir("sbu");
        let run_dir = dir.join("s01s02").join("01").join("001");
        fs::create_dir_all(&run_dir).unwrap();
        // two frames, 91 values each (leading frame index)
        let mut line1 = String::from("1");
        let mut line2 = String::from("2");
        for i in 0..90 {
            write!(line1, ",{}", i as f64 * 0.25).unwrap();
            write!(line2, ",{}", i as f64 * 0.5).unwrap();
        }
        fs::write(
            run_dir.join("skeleton_pos.txt"),
            format!("{line1}\n{line2}\n"),
        )
        .unwrap();

        let split = load_sbu(&dir, &sbu_topo()).unwrap();
        assert_eq!(split.len(), 1);
        let item = &split.items[0];
        assert_eq!(item.label, 0);
        assert_eq!(item.fold, 0); // s01s02 is in the first fold
        assert_eq!(item.sequence.num_frames(), 2);
        assert_eq!(item.sequence.num_joints(), 30);
        assert_eq!(item.sequence.joint(0, 1), [0.75, 1.0, 1.25]);
        fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn sbu_loader_applies_joint_correspondence() {
        let dir = tmp_dir("sbu-order");
        let run_dir = dir.join("s01s02").join("01").join("001");
        fs::create_dir_all(&run_dir).unwrap();
        let mut line = String::from("1");
        for i in 0..90 {
            write!(line, ",{}", i as f64).unwrap();
        }
        fs::write(run_dir.join("skeleton_pos.txt"), format!("{line}\n")).unwrap();

        // swap the first two joints through the correspondence
        let mut spec = sbu_topology();
        let mut order: Vec<usize> = (0..15).collect();
        order.swap(0, 1);
        spec.input_order = Some(order);
        let topo = SkeletonTopology::from_spec(spec).unwrap();
        let split = load_sbu(&dir, &topo).unwrap();
        let seq = &split.items[0].sequence;
        // canonical joint 0 now reads file columns 3..6 (person one)
        assert_eq!(seq.joint(0, 0), [3.0, 4.0, 5.0]);
        assert_eq!(seq.joint(0, 1), [0.0, 1.0, 2.0]);
        // person two shifts by 45 values
        assert_eq!(seq.joint(0, 15), [48.0, 49.0, 50.0]);
        fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn sbu_loader_flags_malformed_lines() {
        let dir = tmp_dir("sbu-bad");
        let run_dir = dir.join("s01s02").join("02").join("001");
        fs::create_dir_all(&run_dir).unwrap();
        fs::write(run_dir.join("skeleton_pos.txt"), "1,2,3\n").unwrap();
        let err = load_sbu(&dir, &sbu_topo()).unwrap_err();
        match err {
            GeomError::Parse { line, .. } => assert_eq!(line, 1),
            other => panic!("expected parse error, got {other}"),
        }
        fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn sbu_loader_handles_empty_directory() {
        let dir = tmp_dir("sbu-empty");
        let split = load_sbu(&dir, &sbu_topo()).unwrap();
        assert!(split.is_empty());
        fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn topology_file_roundtrip() {
        let dir = tmp_dir("topo");
        let path = dir.join("sbu.topo");
        let text = "\
# SBU skeleton, 1-based indices
joints_per_person = 15
persons = 2
root = 3
bones = 1-2,2-3,2-4,4-5,5-6,2-7,7-8,8-9,3-10,10-11,11-12,3-13,13-14,14-15
arms = 4,5,6,7,8,9
legs = 10,11,12,13,14,15
excluded =
";
        fs::write(&path, text).unwrap();
        let parsed = parse_topology_file(&path).unwrap();
        assert_eq!(parsed, sbu_topology());
        fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn shipped_sbu_topology_matches_builtin() {
        let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("topologies/sbu.topo");
        let parsed = parse_topology_file(&path).unwrap();
        assert_eq!(parsed, sbu_topology());
    }

    #[test]
    fn topology_file_reports_bad_lines() {
        let dir = tmp_dir("topo-bad");
        let path = dir.join("bad.topo");
        fs::write(&path, "joints_per_person = 15\nroot = zero\n").unwrap();
        match parse_topology_file(&path).unwrap_err() {
            GeomError::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other}"),
        }
        fs::remove_dir_all(&dir).unwrap();
    }
}
