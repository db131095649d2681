use std::fmt::Write as _;

use serde_json::{json, Value};

use super::order::{Component, ParamValue, COMPONENT_ORDER};
use super::space::SearchSpace;
use super::tree::MctTree;
use crate::model::ArchitectureParams;

#[derive(Debug, Clone, PartialEq)]
pub struct ValueShare {
    pub value: ParamValue,
    pub count: u64,
    pub ratio: f64,
}

/// How often each value of one component was chosen. Per-layer components
/// are pooled over layers; inactive components are not counted.
#[derive(Debug, Clone, PartialEq)]
pub struct ComponentShares {
    pub component: &'static str,
    pub total: u64,
    pub values: Vec<ValueShare>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NodeStats {
    pub id: usize,
    pub component: String,
    pub value: Option<ParamValue>,
    pub m: u64,
    pub avg_auc: Option<f64>,
    pub avg_time: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImportanceReport {
    pub ratios: Vec<ComponentShares>,
    pub nodes: Vec<NodeStats>,
}

/// Selection frequencies over `archs`, one entry per component family that
/// was active at least once. Candidate values never chosen appear with a
/// zero count.
pub fn importance_ratios<'a>(
    archs: impl IntoIterator<Item = &'a ArchitectureParams>,
    space: &SearchSpace,
) -> Vec<ComponentShares> {
    let mut families: Vec<(&'static str, Vec<(ParamValue, u64)>)> = Vec::new();
    for c in COMPONENT_ORDER {
        if !families.iter().any(|(f, _)| *f == c.family()) {
            families.push((c.family(), c.candidates(space).into_iter().map(|v| (v, 0)).collect()));
        }
    }
    for arch in archs {
        for c in COMPONENT_ORDER {
            let Some(v) = c.value_in(arch) else { continue };
            let counts = &mut families.iter_mut().find(|(f, _)| *f == c.family()).expect("family listed").1;
            match counts.iter_mut().find(|(x, _)| *x == v) {
                Some(entry) => entry.1 += 1,
                // Forced values (a preMLP width copied from a layer) may lie
                // outside the candidate list.
                None => counts.push((v, 1)),
            }
        }
    }
    families
        .into_iter()
        .filter_map(|(component, counts)| {
            let total: u64 = counts.iter().map(|c| c.1).sum();
            (total > 0).then(|| ComponentShares {
                component,
                total,
                values: counts
                    .into_iter()
                    .map(|(value, count)| ValueShare { value, count, ratio: count as f64 / total as f64 })
                    .collect(),
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ImportanceError {
    #[error("the tree has no recorded visits")]
    EmptyTree,
}

/// Per-node statistics of `tree` plus selection ratios over the evaluated
/// architectures.
pub fn importance_report<'a>(
    tree: &MctTree,
    archs: impl IntoIterator<Item = &'a ArchitectureParams>,
    space: &SearchSpace,
) -> Result<ImportanceReport, ImportanceError> {
    if tree.is_empty() {
        return Err(ImportanceError::EmptyTree);
    }
    let nodes = tree
        .nodes()
        .iter()
        .map(|n| NodeStats {
            id: n.id,
            component: n.component.map_or_else(|| "root".into(), Component::name),
            value: n.value,
            m: n.m,
            avg_auc: n.avg_auc(),
            avg_time: n.avg_time(),
        })
        .collect();
    Ok(ImportanceReport { ratios: importance_ratios(archs, space), nodes })
}

impl ImportanceReport {
    pub fn ratio(&self, component: &str, value: ParamValue) -> Option<f64> {
        let shares = self.ratios.iter().find(|s| s.component == component)?;
        Some(shares.values.iter().find(|v| v.value == value).map_or(0.0, |v| v.ratio))
    }

    pub fn ratios_json(&self) -> Value {
        let mut out = serde_json::Map::new();
        for s in &self.ratios {
            let values: Vec<Value> = s
                .values
                .iter()
                .map(|v| json!({ "value": v.value.to_json(), "count": v.count, "ratio": v.ratio }))
                .collect();
            out.insert(s.component.to_string(), Value::Array(values));
        }
        Value::Object(out)
    }

    /// One line per component: `jknet: none=0.2500 concat=0.5000 max=0.2500`.
    pub fn ratios_text(&self) -> String {
        let mut out = String::new();
        for s in &self.ratios {
            let _ = write!(out, "{}:", s.component);
            for v in &s.values {
                let _ = write!(out, " {}={:.4}", v.value, v.ratio);
            }
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Activation, JkMode};

    #[test]
    fn single_architecture_ratios() {
        let mut a = ArchitectureParams::gcn(2, 16, Activation::Relu);
        a.jknet = JkMode::Concat;
        let r = importance_ratios([&a], &SearchSpace::default());
        let jk = r.iter().find(|s| s.component == "jknet").unwrap();
        let ratios: Vec<f64> = jk.values.iter().map(|v| v.ratio).collect();
        assert_eq!(ratios, [0.0, 1.0, 0.0]);
        // Two layers of ReLU pool into one family.
        let act = r.iter().find(|s| s.component == "activation").unwrap();
        assert_eq!(act.total, 2);
        // Inactive components are absent.
        assert!(r.iter().all(|s| s.component != "pre_mlp_emb" && s.component != "post_mlp_hidden"));
    }

    #[test]
    fn empty_tree_rejected() {
        let none: [&ArchitectureParams; 0] = [];
        assert_eq!(importance_report(&MctTree::new(), none, &SearchSpace::default()), Err(ImportanceError::EmptyTree));
    }
}
