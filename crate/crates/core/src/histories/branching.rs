use std::fmt::Write as _;

use rayon::prelude::*;
use serde::Serialize;

use super::{consistency_check, decoherence_functional, Criterion, HistorySpace, T0};
use crate::error::{Error, Result};
use crate::hilbert::{inner, StateVector};

/// Default tolerance on the distance of conditional pasts from {0, 1}.
pub const DEFAULT_BRANCHING_TOL: f64 = 1e-6;

/// Largest number of nodes a branch tree may hold.
pub const MAX_TREE_NODES: usize = 1 << 16;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BranchingReport {
    pub tolerance: f64,
    /// `max dist(μ[ε_j/ε_k], {0,1})` over all later events `ε_k` and
    /// earlier cells `ε_j`.
    pub max_distance: f64,
    /// `(t_j, ε_j, t_k, ε_k)` of the worst case.
    pub worst: Option<(f64, String, f64, String)>,
    pub passed: bool,
}

/// Check that every event with non-negligible weight has an essentially
/// unique past: `μ[ε_j/ε_k] = ‖P_k(t_k)P_j(t_j)ψ‖² / ‖P_k(t_k)ψ‖²` close to
/// 0 or 1 for every `t_j < t_k`. The space must be consistent first.
pub fn branching_structure_check(space: &HistorySpace, tol: f64, consistency_tol: f64) -> Result<BranchingReport> {
    let report = consistency_check(&decoherence_functional(space)?, consistency_tol, Criterion::Full);
    if !report.passed {
        return Err(Error::Inconsistent(format!(
            "decoherence defect {:.3e} exceeds {:.1e} (worst pair {:?})",
            report.max_defect, consistency_tol, report.worst_pair
        )));
    }
    branching_distances(space, tol)
}

/// The conditional-past distances without the consistency precondition.
pub fn branching_distances(space: &HistorySpace, tol: f64) -> Result<BranchingReport> {
    let times = space.times();
    let fams = space.families();
    let dyns = space.dynamics();
    let psi = space.initial();
    let floor = super::ZERO_WEIGHT_FLOOR * psi.norm_sqr();

    // Schrödinger states at each time, unprojected
    let mut at_time = Vec::with_capacity(times.len());
    let mut t = T0;
    let mut v = psi.clone();
    for &tk in times {
        v = dyns.propagate(&v, t, tk)?;
        at_time.push(v.clone());
        t = tk;
    }

    let pairs: Vec<(usize, usize)> = (0..times.len())
        .flat_map(|j| (0..fams[j].len()).map(move |c| (j, c)))
        .collect();
    let results: Vec<(f64, Option<(f64, String, f64, String)>)> = pairs
        .par_iter()
        .map(|&(j, cj)| {
            let mut best = (0.0, None);
            let mut w = fams[j].projector(cj).apply(&at_time[j])?;
            let mut tw = times[j];
            for k in j + 1..times.len() {
                w = dyns.propagate(&w, tw, times[k])?;
                tw = times[k];
                for ck in 0..fams[k].len() {
                    let pk = fams[k].projector(ck);
                    let denom = pk.apply(&at_time[k])?.norm_sqr();
                    if denom <= floor {
                        continue;
                    }
                    let ratio = pk.apply(&w)?.norm_sqr() / denom;
                    let dist = ratio.abs().min((1.0 - ratio).abs());
                    if dist > best.0 {
                        best = (
                            dist,
                            Some((
                                times[j],
                                fams[j].label(cj).name.clone(),
                                times[k],
                                fams[k].label(ck).name.clone(),
                            )),
                        );
                    }
                }
            }
            Ok(best)
        })
        .collect::<Result<_>>()?;
    let (max_distance, worst) = results
        .into_iter()
        .fold((0.0, None), |acc, cur| if cur.0 > acc.0 { cur } else { acc });
    Ok(BranchingReport {
        tolerance: tol,
        max_distance,
        worst,
        passed: max_distance < tol,
    })
}

/// Squared norms of an orthogonal decomposition of `ψ`, normalized by
/// `‖ψ‖²`.
pub fn branch_measure(psi: &StateVector, parts: &[StateVector]) -> Result<Vec<f64>> {
    let total = psi.norm_sqr();
    if !(total > 0.0) {
        return Err(Error::Contract("cannot measure branches of the zero vector".into()));
    }
    let mut sum = StateVector::zeros(psi.factor_dims().to_vec())?;
    for p in parts {
        sum = sum.add(p)?;
    }
    let residual = sum.sub(psi)?.norm() / total.sqrt();
    if residual > 1e-9 {
        return Err(Error::Contract(format!("parts do not sum to the state (residual {residual:.3e})")));
    }
    for (a, pa) in parts.iter().enumerate() {
        for pb in &parts[a + 1..] {
            let overlap = inner(pa, pb)?.norm() / total;
            if overlap > 1e-10 {
                return Err(Error::Contract(format!("parts are not orthogonal (overlap {overlap:.3e})")));
            }
        }
    }
    Ok(parts.iter().map(|p| p.norm_sqr() / total).collect())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TreeNode {
    pub id: usize,
    pub parent: Option<usize>,
    /// Number of cells in the prefix; 0 at the root.
    pub depth: usize,
    pub time: f64,
    pub prefix: Vec<String>,
    pub weight: f64,
    /// Weight of children dropped at the cutoff.
    pub pruned_children: f64,
}

/// Histories grown one time step at a time, keeping prefixes heavier than
/// the cutoff.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BranchTree {
    pub nodes: Vec<TreeNode>,
    pub cutoff: f64,
    /// Total weight of prefixes dropped at the cutoff.
    pub pruned_mass: f64,
}

impl BranchTree {
    /// Grow from a root of weight `root_weight`. `children(prefix)` lists
    /// the labelled weights one step further, and `times[d]` is the time of
    /// depth `d + 1`.
    pub fn grow<F>(root_weight: f64, times: &[f64], cutoff: f64, mut children: F) -> Result<Self>
    where
        F: FnMut(&[String]) -> Result<Vec<(String, f64)>>,
    {
        let mut nodes = vec![TreeNode {
            id: 0,
            parent: None,
            depth: 0,
            time: T0,
            prefix: Vec::new(),
            weight: root_weight,
            pruned_children: 0.0,
        }];
        let mut pruned_mass = 0.0;
        let mut frontier = vec![0usize];
        for (d, &t) in times.iter().enumerate() {
            let mut next = Vec::new();
            for &id in &frontier {
                let prefix = nodes[id].prefix.clone();
                for (label, weight) in children(&prefix)? {
                    if weight <= cutoff {
                        pruned_mass += weight.max(0.0);
                        nodes[id].pruned_children += weight.max(0.0);
                        continue;
                    }
                    if nodes.len() >= MAX_TREE_NODES {
                        return Err(Error::Size {
                            what: "branch tree nodes",
                            requested: nodes.len() + 1,
                            limit: MAX_TREE_NODES,
                        });
                    }
                    let mut p = prefix.clone();
                    p.push(label);
                    let new_id = nodes.len();
                    nodes.push(TreeNode {
                        id: new_id,
                        parent: Some(id),
                        depth: d + 1,
                        time: t,
                        prefix: p,
                        weight,
                        pruned_children: 0.0,
                    });
                    next.push(new_id);
                }
            }
            frontier = next;
        }
        Ok(Self {
            nodes,
            cutoff,
            pruned_mass,
        })
    }

    pub fn children(&self, id: usize) -> impl Iterator<Item = &TreeNode> + '_ {
        self.nodes.iter().filter(move |n| n.parent == Some(id))
    }

    pub fn leaves(&self) -> Vec<&TreeNode> {
        let depth = self.nodes.iter().map(|n| n.depth).max().unwrap_or(0);
        self.nodes.iter().filter(|n| n.depth == depth).collect()
    }

    /// `max | weight − Σ kept children − pruned children |` over nodes
    /// above the last time.
    pub fn max_child_sum_defect(&self, depth: usize) -> f64 {
        let mut worst: f64 = 0.0;
        for n in self.nodes.iter().filter(|n| n.depth < depth) {
            let kids: f64 = self.children(n.id).map(|c| c.weight).sum();
            worst = worst.max((n.weight - kids - n.pruned_children).abs());
        }
        worst
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("tree serializes")
    }

    /// Graphviz rendering, one node per prefix.
    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph branches {\n  rankdir=LR;\n");
        for n in &self.nodes {
            let label = if n.prefix.is_empty() {
                "ψ".to_string()
            } else {
                n.prefix.last().cloned().unwrap_or_default()
            };
            let _ = writeln!(
                out,
                "  n{} [label=\"{}\\n{:.4}\"];",
                n.id,
                label.replace('"', "\\\""),
                n.weight
            );
        }
        for n in &self.nodes {
            if let Some(p) = n.parent {
                let _ = writeln!(out, "  n{p} -> n{};", n.id);
            }
        }
        out.push_str("}\n");
        out
    }
}

/// Branch tree of a consistent, branching space.
pub fn extract_branch_tree(
    space: &HistorySpace,
    cutoff: f64,
    consistency_tol: f64,
    branching_tol: f64,
) -> Result<BranchTree> {
    let report = branching_structure_check(space, branching_tol, consistency_tol)?;
    if !report.passed {
        return Err(Error::NotBranching {
            distance: report.max_distance,
            tol: branching_tol,
        });
    }
    let times = space.times();
    let fams = space.families();
    let dyns = space.dynamics();
    // Schrödinger state of each kept prefix, at the time of its last cell
    let mut states: std::collections::HashMap<Vec<String>, (f64, StateVector)> =
        std::collections::HashMap::new();
    states.insert(Vec::new(), (T0, space.initial().clone()));
    BranchTree::grow(space.initial().norm_sqr(), times, cutoff, |prefix| {
        let (t, v) = states.get(prefix).cloned().expect("parent state recorded");
        let k = prefix.len();
        let moved = dyns.propagate(&v, t, times[k])?;
        let mut out = Vec::with_capacity(fams[k].len());
        for c in 0..fams[k].len() {
            let w = fams[k].projector(c).apply(&moved)?;
            let name = fams[k].label(c).name.clone();
            let weight = w.norm_sqr();
            if weight > cutoff && k + 1 < times.len() {
                let mut p = prefix.to_vec();
                p.push(name.clone());
                states.insert(p, (times[k], w));
            }
            out.push((name, weight));
        }
        Ok(out)
    })
}
