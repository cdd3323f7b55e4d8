//! Sublevel-set merge tree of the magnitude field, augmented with degree sums,
//! and classic robustness read off the tree.
//!
//! Critical points are inserted as Steiner vertices at value zero, connected
//! to the three corners of their triangle, so every critical point is born as
//! its own leaf. Vertices are swept in `(value, kind, id)` order with critical
//! points ahead of mesh vertices on ties.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::critical::CriticalPoint;
use crate::error::{Error, Result};
use crate::field::TriangleMesh;

/// A robustness value: finite and non-negative, or unbounded when no
/// cancellation partner exists in the domain.
#[derive(Clone, Copy, Debug)]
pub enum RobustnessValue {
    Finite(f64),
    Unbounded,
}

impl RobustnessValue {
    pub fn finite(self) -> Option<f64> {
        match self {
            RobustnessValue::Finite(v) => Some(v),
            RobustnessValue::Unbounded => None,
        }
    }

    pub fn is_unbounded(self) -> bool {
        matches!(self, RobustnessValue::Unbounded)
    }

    /// The value as an `f64`, with `Unbounded` mapped to `+inf`.
    pub fn as_f64(self) -> f64 {
        self.finite().unwrap_or(f64::INFINITY)
    }

    pub fn from_f64(x: f64) -> Self {
        if x == f64::INFINITY {
            RobustnessValue::Unbounded
        } else {
            RobustnessValue::Finite(x)
        }
    }
}

impl Ord for RobustnessValue {
    fn cmp(&self, other: &Self) -> Ordering {
        self.as_f64().total_cmp(&other.as_f64())
    }
}

impl PartialOrd for RobustnessValue {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl PartialEq for RobustnessValue {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for RobustnessValue {}

impl fmt::Display for RobustnessValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RobustnessValue::Finite(v) => write!(f, "{v}"),
            RobustnessValue::Unbounded => f.write_str("inf"),
        }
    }
}

impl FromStr for RobustnessValue {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let x: f64 = s
            .trim()
            .parse()
            .map_err(|_| format!("not a robustness value: {s:?}"))?;
        if x.is_nan() || x < 0.0 || x == f64::NEG_INFINITY {
            return Err(format!("robustness must be non-negative: {s:?}"));
        }
        Ok(Self::from_f64(x))
    }
}

/// JSON form: a number, or the string `"inf"`.
impl Serialize for RobustnessValue {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            RobustnessValue::Finite(v) => serializer.serialize_f64(*v),
            RobustnessValue::Unbounded => serializer.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for RobustnessValue {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Number(f64),
            Text(String),
        }
        match Repr::deserialize(deserializer)? {
            Repr::Number(x) if x >= 0.0 => Ok(RobustnessValue::Finite(x)),
            Repr::Number(x) => Err(serde::de::Error::custom(format!(
                "robustness must be non-negative, got {x}"
            ))),
            Repr::Text(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

/// One node of the merge tree: a leaf (component birth) or a merge.
#[derive(Clone, Debug, Serialize)]
pub struct TreeNode {
    pub id: usize,
    /// Magnitude value at which this node appears.
    pub birth: f64,
    /// Sum of member critical point degrees.
    pub degree: i32,
    pub parent: Option<usize>,
    pub children: Vec<usize>,
    /// Ids of the critical points in this component, ascending.
    pub members: Vec<usize>,
}

#[derive(Clone, Debug, Serialize)]
pub struct AugmentedMergeTree {
    nodes: Vec<TreeNode>,
    #[serde(skip)]
    leaves: BTreeMap<usize, usize>,
    root: usize,
}

impl AugmentedMergeTree {
    pub fn nodes(&self) -> &[TreeNode] {
        &self.nodes
    }

    pub fn node(&self, id: usize) -> &TreeNode {
        &self.nodes[id]
    }

    pub fn root(&self) -> usize {
        self.root
    }

    /// Leaf node holding critical point `cp_id`.
    pub fn leaf(&self, cp_id: usize) -> Option<usize> {
        self.leaves.get(&cp_id).copied()
    }

    pub fn critical_point_ids(&self) -> impl Iterator<Item = usize> + '_ {
        self.leaves.keys().copied()
    }

    /// Nodes from `node` up to the root, inclusive.
    pub fn ancestors(&self, node: usize) -> impl Iterator<Item = &TreeNode> + '_ {
        std::iter::successors(Some(&self.nodes[node]), |n| {
            n.parent.map(|p| &self.nodes[p])
        })
    }

    /// The tree node representing the component of the sublevel set at `level`
    /// that contains critical point `cp_id`.
    pub fn component_at(&self, cp_id: usize, level: f64) -> Option<&TreeNode> {
        let leaf = self.leaf(cp_id)?;
        self.ancestors(leaf).take_while(|n| n.birth <= level).last()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.nodes).expect("tree serializes")
    }
}

/// Builds the augmented merge tree of `f0` on `mesh` with `cps` as Steiner leaves.
///
/// When the edge graph has several components their tops are joined under a
/// root born at `+inf`, which no finite perturbation reaches.
pub fn build_merge_tree(
    mesh: &TriangleMesh,
    f0: &[f64],
    cps: &[CriticalPoint],
) -> AugmentedMergeTree {
    let nv = mesh.vertex_count();
    let n = nv + cps.len();
    assert_eq!(f0.len(), nv, "one magnitude per mesh vertex");

    let adjacency = Adjacency::build(mesh, cps);
    let value = |g: usize| if g < nv { f0[g] } else { 0.0 };
    // Critical points sort ahead of mesh vertices with equal value.
    let rank = |g: usize| if g < nv { 1u8 } else { 0u8 };
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_unstable_by(|&a, &b| {
        value(a)
            .total_cmp(&value(b))
            .then(rank(a).cmp(&rank(b)))
            .then(a.cmp(&b))
    });

    let mut uf = UnionFind::new(n);
    let mut processed = vec![false; n];
    // Current tree node of each union-find root.
    let mut top: Vec<usize> = vec![usize::MAX; n];
    let mut nodes: Vec<TreeNode> = Vec::new();
    let mut leaves = BTreeMap::new();
    let mut roots = Vec::new();

    for &g in &order {
        roots.clear();
        for &h in adjacency.neighbors(g) {
            if processed[h] {
                let r = uf.find(h);
                if !roots.contains(&r) {
                    roots.push(r);
                }
            }
        }
        processed[g] = true;
        match roots.len() {
            0 => {
                let (degree, members) = if g >= nv {
                    let cp = &cps[g - nv];
                    (cp.degree, vec![cp.id])
                } else {
                    (0, Vec::new())
                };
                let id = nodes.len();
                if let Some(&cp) = members.first() {
                    leaves.insert(cp, id);
                }
                nodes.push(TreeNode {
                    id,
                    birth: value(g),
                    degree,
                    parent: None,
                    children: Vec::new(),
                    members,
                });
                top[g] = id;
            }
            1 => {
                let node = top[roots[0]];
                let r = uf.union(roots[0], g);
                top[r] = node;
            }
            _ => {
                let mut children: Vec<usize> = roots.iter().map(|&r| top[r]).collect();
                children.sort_unstable();
                let id = push_merge(&mut nodes, value(g), children);
                let mut r = g;
                for &other in &roots {
                    r = uf.union(r, other);
                }
                top[r] = id;
            }
        }
    }

    let mut tops: Vec<usize> = (0..n)
        .filter(|&g| uf.find(g) == g)
        .map(|g| top[g])
        .collect();
    tops.sort_unstable();
    let max_value = order.last().map_or(0.0, |&g| value(g));
    let root = if tops.len() == 1 && nodes[tops[0]].birth == max_value {
        tops[0]
    } else {
        let birth = if tops.len() == 1 {
            max_value
        } else {
            f64::INFINITY
        };
        push_merge(&mut nodes, birth, tops)
    };

    AugmentedMergeTree {
        nodes,
        leaves,
        root,
    }
}

fn push_merge(nodes: &mut Vec<TreeNode>, birth: f64, children: Vec<usize>) -> usize {
    let id = nodes.len();
    let mut members: Vec<usize> = children
        .iter()
        .flat_map(|&c| nodes[c].members.iter().copied())
        .collect();
    members.sort_unstable();
    let degree = children.iter().map(|&c| nodes[c].degree).sum();
    for &c in &children {
        nodes[c].parent = Some(id);
    }
    nodes.push(TreeNode {
        id,
        birth,
        degree,
        parent: None,
        children,
        members,
    });
    id
}

/// Birth value of the lowest ancestor of `cp_id`'s leaf whose degree sum is zero.
pub fn classic_robustness(tree: &AugmentedMergeTree, cp_id: usize) -> Result<RobustnessValue> {
    let leaf = tree.leaf(cp_id).ok_or(Error::UnknownCriticalPoint(cp_id))?;
    Ok(tree
        .ancestors(leaf)
        .find(|n| n.degree == 0 && !n.members.is_empty())
        .map_or(RobustnessValue::Unbounded, |n| {
            RobustnessValue::from_f64(n.birth)
        }))
}

/// CSR adjacency over mesh vertices followed by critical-point Steiner vertices.
struct Adjacency {
    offsets: Vec<usize>,
    targets: Vec<usize>,
}

impl Adjacency {
    fn build(mesh: &TriangleMesh, cps: &[CriticalPoint]) -> Self {
        let nv = mesh.vertex_count();
        let n = nv + cps.len();
        let mut pairs: Vec<(usize, usize)> =
            Vec::with_capacity(6 * mesh.triangle_count() + 6 * cps.len());
        for &[a, b, c] in mesh.triangles() {
            for (u, v) in [(a, b), (b, c), (c, a)] {
                pairs.push((u, v));
                pairs.push((v, u));
            }
        }
        for (k, cp) in cps.iter().enumerate() {
            for &v in &mesh.triangles()[cp.triangle] {
                pairs.push((nv + k, v));
                pairs.push((v, nv + k));
            }
        }
        pairs.sort_unstable();
        pairs.dedup();
        let mut offsets = vec![0; n + 1];
        for &(u, _) in &pairs {
            offsets[u + 1] += 1;
        }
        for i in 0..n {
            offsets[i + 1] += offsets[i];
        }
        Self {
            offsets,
            targets: pairs.into_iter().map(|(_, v)| v).collect(),
        }
    }

    fn neighbors(&self, g: usize) -> &[usize] {
        &self.targets[self.offsets[g]..self.offsets[g + 1]]
    }
}

pub(crate) struct UnionFind {
    parent: Vec<usize>,
    rank: Vec<u8>,
}

impl UnionFind {
    pub(crate) fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
            rank: vec![0; n],
        }
    }

    pub(crate) fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    pub(crate) fn union(&mut self, a: usize, b: usize) -> usize {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return ra;
        }
        match self.rank[ra].cmp(&self.rank[rb]) {
            Ordering::Less => {
                self.parent[ra] = rb;
                rb
            }
            Ordering::Greater => {
                self.parent[rb] = ra;
                ra
            }
            Ordering::Equal => {
                self.parent[rb] = ra;
                self.rank[ra] += 1;
                ra
            }
        }
    }
}
