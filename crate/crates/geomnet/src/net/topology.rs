//! Skeleton topology: joints, bones, per-skeleton roots, and the arm / leg /
//! excluded joint sets that define the two network streams.

use crate::error::{GeomError, Result};

/// Per-person description of a skeleton, with 0-based joint indices.
/// The same layout is replicated for every person.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TopologySpec {
    pub joints_per_person: usize,
    pub persons: usize,
    /// Bone endpoints within one person.
    pub bones: Vec<(usize, usize)>,
    /// Root joint of each skeleton.
    pub root: usize,
    pub arms: Vec<usize>,
    pub legs: Vec<usize>,
    /// Joints dropped from the convolution entirely.
    pub excluded: Vec<usize>,
    /// Joint-correspondence remapping for loaders: canonical joint `j` reads
    /// input column `input_order[j]`. `None` is the identity.
    pub input_order: Option<Vec<usize>>,
}

/// Relation of a neighbor to the center joint in the convolution: one bone
/// closer to the root, the joint itself, or one bone farther.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConvCase {
    CloserToRoot = 0,
    SelfJoint = 1,
    FartherFromRoot = 2,
}

/// Validated topology over all persons, with global joint indices
/// `person * joints_per_person + local`.
#[derive(Debug, Clone)]
pub struct SkeletonTopology {
    spec: TopologySpec,
    total_joints: usize,
    /// Tree distance to the skeleton root; `None` for excluded joints.
    dist_to_root: Vec<Option<usize>>,
    /// Neighbors among non-excluded joints.
    neighbors: Vec<Vec<usize>>,
    arm_joints: Vec<usize>,
    leg_joints: Vec<usize>,
    roots: Vec<usize>,
}

impl SkeletonTopology {
    pub fn from_spec(spec: TopologySpec) -> Result<SkeletonTopology> {
        let j = spec.joints_per_person;
        if j == 0 || spec.persons == 0 {
            return Err(GeomError::Validation(
                "topology needs at least one joint and one person".to_string(),
            ));
        }
        let in_range = |set: &[usize]| set.iter().all(|&x| x < j);
        if spec.root >= j
            || !in_range(&spec.arms)
            || !in_range(&spec.legs)
            || !in_range(&spec.excluded)
        {
            return Err(GeomError::Validation(
                "topology joint index out of range".to_string(),
            ));
        }
        let mut seen = vec![0u8; j];
        for &a in spec.arms.iter() {
            seen[a] |= 1;
        }
        for &l in spec.legs.iter() {
            seen[l] |= 2;
        }
        for &e in spec.excluded.iter() {
            seen[e] |= 4;
        }
        if seen.iter().any(|&s| s.count_ones() > 1) {
            return Err(GeomError::Validation(
                "arm, leg and excluded joint sets must be disjoint".to_string(),
            ));
        }
        if spec.arms.is_empty() || spec.legs.is_empty() {
            return Err(GeomError::Validation(
                "arm and leg joint sets must be non-empty".to_string(),
            ));
        }
        if spec.excluded.contains(&spec.root) {
            return Err(GeomError::Validation(
                "the root joint cannot be excluded".to_string(),
            ));
        }
        if let Some(order) = &spec.input_order {
            let mut seen = vec![false; j];
            if order.len() != j || order.iter().any(|&x| x >= j) {
                return Err(GeomError::Validation(
                    "input_order must list every joint once".to_string(),
                ));
            }
            for &x in order {
                if seen[x] {
                    return Err(GeomError::Validation(
                        "input_order repeats a joint".to_string(),
                    ));
                }
                seen[x] = true;
            }
        }
        let excluded = |x: usize| spec.excluded.contains(&x);
        // adjacency among non-excluded joints of one person
        let mut local_adj: Vec<Vec<usize>> = vec![Vec::new(); j];
        let mut active_edges = 0usize;
        for &(a, b) in &spec.bones {
            if a >= j || b >= j {
                return Err(GeomError::Validation(format!(
                    "bone ({a}, {b}) is out of range"
                )));
            }
            if a == b {
                return Err(GeomError::Validation(format!("bone ({a}, {b}) is a loop")));
            }
            if excluded(a) || excluded(b) {
                continue;
            }
            local_adj[a].push(b);
            local_adj[b].push(a);
            active_edges += 1;
        }
        let active: Vec<usize> = (0..j).filter(|&x| !excluded(x)).collect();
        // BFS from the root: the active bones must form a spanning tree
        let mut dist: Vec<Option<usize>> = vec![None; j];
        dist[spec.root] = Some(0);
        let mut queue = std::collections::VecDeque::from([spec.root]);
        while let Some(x) = queue.pop_front() {
            for &y in &local_adj[x] {
                if dist[y].is_none() {
                    dist[y] = Some(dist[x].unwrap() + 1);
                    queue.push_back(y);
                }
            }
        }
        if active.iter().any(|&x| dist[x].is_none()) {
            return Err(GeomError::Validation(
                "bones do not connect every non-excluded joint to the root".to_string(),
            ));
        }
        if active_edges != active.len() - 1 {
            return Err(GeomError::Validation(format!(
                "bones must form a tree: {} edges over {} joints",
                active_edges,
                active.len()
            )));
        }

        let total_joints = j * spec.persons;
        let global = |person: usize, local: usize| person * j + local;
        let mut dist_to_root = vec![None; total_joints];
        let mut neighbors = vec![Vec::new(); total_joints];
        let mut roots = Vec::new();
        for p in 0..spec.persons {
            roots.push(global(p, spec.root));
            for &x in &active {
                dist_to_root[global(p, x)] = dist[x];
                neighbors[global(p, x)] = local_adj[x].iter().map(|&y| global(p, y)).collect();
            }
        }
        let mut arm_joints = Vec::new();
        let mut leg_joints = Vec::new();
        for p in 0..spec.persons {
            for &a in &spec.arms {
                arm_joints.push(global(p, a));
            }
            for &l in &spec.legs {
                leg_joints.push(global(p, l));
            }
        }
        arm_joints.sort_unstable();
        leg_joints.sort_unstable();
        Ok(SkeletonTopology {
            spec,
            total_joints,
            dist_to_root,
            neighbors,
            arm_joints,
            leg_joints,
            roots,
        })
    }

    pub fn spec(&self) -> &TopologySpec {
        &self.spec
    }

    pub fn total_joints(&self) -> usize {
        self.total_joints
    }

    pub fn persons(&self) -> usize {
        self.spec.persons
    }

    /// Global root joint of each skeleton.
    pub fn roots(&self) -> &[usize] {
        &self.roots
    }

    /// Global arm joints of all persons, sorted.
    pub fn arm_joints(&self) -> &[usize] {
        &self.arm_joints
    }

    pub fn leg_joints(&self) -> &[usize] {
        &self.leg_joints
    }

    /// Joints of the given stream: 0 gathers arms, 1 gathers legs.
    pub fn stream_joints(&self, stream: usize) -> &[usize] {
        match stream {
            0 => &self.arm_joints,
            1 => &self.leg_joints,
            _ => panic!("stream index must be 0 or 1"),
        }
    }

    pub fn is_excluded(&self, joint: usize) -> bool {
        self.dist_to_root[joint].is_none()
    }

    /// Tree distance to the skeleton root; `None` for excluded joints.
    pub fn dist_to_root(&self, joint: usize) -> Option<usize> {
        self.dist_to_root[joint]
    }

    pub fn neighbors(&self, joint: usize) -> &[usize] {
        &self.neighbors[joint]
    }

    /// Convolution case of `neighbor` relative to `center`. The neighbor must
    /// be the center itself or adjacent to it; adjacent joints at equal root
    /// distance are a configuration error (a tree never produces them).
    pub fn conv_case(&self, center: usize, neighbor: usize) -> Result<ConvCase> {
        if neighbor == center {
            return Ok(ConvCase::SelfJoint);
        }
        let dc = self.dist_to_root[center]
            .ok_or_else(|| GeomError::Validation(format!("joint {center} is excluded")))?;
        let dn = self.dist_to_root[neighbor]
            .ok_or_else(|| GeomError::Validation(format!("joint {neighbor} is excluded")))?;
        if dn + 1 == dc {
            Ok(ConvCase::CloserToRoot)
        } else if dn == dc + 1 {
            Ok(ConvCase::FartherFromRoot)
        } else {
            Err(GeomError::Validation(format!(
                "joints {center} and {neighbor} are adjacent at equal root distance"
            )))
        }
    }
}
