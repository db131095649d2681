use std::fmt::Write as _;

use serde_json::{json, Map, Value};

use super::order::{Assignment, Component, ParamValue};
use super::space::SearchSpace;

/// Upper confidence bound of a node with `m` visits and reward sum
/// `score_sum`, out of `total` evaluated models. Unvisited nodes score
/// `+inf`; `ln total` is clamped at zero.
pub fn ucb(score_sum: f64, m: u64, total: u64, c: f64) -> f64 {
    if m == 0 {
        return f64::INFINITY;
    }
    let m = m as f64;
    let ln_total = if total == 0 { 0.0 } else { (total as f64).ln().max(0.0) };
    score_sum / m + c * (ln_total / m).sqrt()
}

#[derive(Debug, Clone, PartialEq)]
pub struct MctNode {
    pub id: usize,
    pub parent: Option<usize>,
    /// `None` only at the root.
    pub component: Option<Component>,
    pub value: Option<ParamValue>,
    pub m: u64,
    pub score_sum: f64,
    pub time_sum: f64,
    pub children: Vec<usize>,
}

impl MctNode {
    pub fn avg_auc(&self) -> Option<f64> {
        (self.m > 0).then(|| self.score_sum / self.m as f64)
    }

    pub fn avg_time(&self) -> Option<f64> {
        (self.m > 0).then(|| self.time_sum / self.m as f64)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum TreeError {
    #[error("invalid tree JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid tree JSON: {0}")]
    Format(String),
}

/// Monte-Carlo tree over component assignments. Node ids are arena
/// indices; children are created in candidate order, so a lower id means
/// an earlier candidate.
#[derive(Debug, Clone, PartialEq)]
pub struct MctTree {
    nodes: Vec<MctNode>,
    total_models: u64,
}

impl Default for MctTree {
    fn default() -> Self {
        Self::new()
    }
}

impl MctTree {
    pub fn new() -> Self {
        let root = MctNode {
            id: 0,
            parent: None,
            component: None,
            value: None,
            m: 0,
            score_sum: 0.0,
            time_sum: 0.0,
            children: vec![],
        };
        Self { nodes: vec![root], total_models: 0 }
    }

    pub fn root(&self) -> &MctNode {
        &self.nodes[0]
    }

    pub fn node(&self, id: usize) -> &MctNode {
        &self.nodes[id]
    }

    pub fn nodes(&self) -> &[MctNode] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.total_models == 0
    }

    /// Number of evaluated models, `M`.
    pub fn total_models(&self) -> u64 {
        self.total_models
    }

    pub fn ucb_of(&self, id: usize, c: f64) -> f64 {
        let n = &self.nodes[id];
        ucb(n.score_sum, n.m, self.total_models, c)
    }

    /// Greedy descent by maximal UCB, lowest id on ties. Returns node ids
    /// from the root to a childless node.
    pub fn select_leaf(&self, c: f64) -> Vec<usize> {
        let mut path = vec![0];
        let mut cur = 0;
        while !self.nodes[cur].children.is_empty() {
            let mut best = self.nodes[cur].children[0];
            let mut best_ucb = self.ucb_of(best, c);
            for &child in &self.nodes[cur].children[1..] {
                let u = self.ucb_of(child, c);
                if u > best_ucb {
                    best = child;
                    best_ucb = u;
                }
            }
            path.push(best);
            cur = best;
        }
        path
    }

    /// Values fixed along `path`.
    pub fn assignment(&self, path: &[usize]) -> Assignment {
        let mut a = Assignment::default();
        for &id in path {
            if let (Some(c), Some(v)) = (self.nodes[id].component, self.nodes[id].value) {
                a.set(c, v);
            }
        }
        a
    }

    /// Backs a result up along `path` and expands the last node once its
    /// visit count reaches `theta`.
    pub fn update(&mut self, path: &[usize], val_auc: f64, seconds: f64, theta: u64, space: &SearchSpace) {
        for &id in path {
            let n = &mut self.nodes[id];
            n.m += 1;
            n.score_sum += val_auc;
            n.time_sum += seconds;
        }
        self.total_models += 1;
        let Some(&leaf) = path.last() else { return };
        if self.nodes[leaf].m >= theta && self.nodes[leaf].children.is_empty() {
            self.expand(path, space);
        }
    }

    fn expand(&mut self, path: &[usize], space: &SearchSpace) {
        let leaf = *path.last().expect("non-empty path");
        let assignment = self.assignment(path);
        let Some(next) = assignment.next_component(self.nodes[leaf].component) else { return };
        for value in next.candidates(space) {
            let id = self.nodes.len();
            self.nodes.push(MctNode {
                id,
                parent: Some(leaf),
                component: Some(next),
                value: Some(value),
                m: 0,
                score_sum: 0.0,
                time_sum: 0.0,
                children: vec![],
            });
            self.nodes[leaf].children.push(id);
        }
    }

    /// Depth of the deepest node (the root has depth 0).
    pub fn depth(&self) -> usize {
        let mut depth = vec![0usize; self.nodes.len()];
        for n in &self.nodes[1..] {
            depth[n.id] = depth[n.parent.expect("non-root has a parent")] + 1;
        }
        depth.into_iter().max().unwrap_or(0)
    }

    pub fn to_json_value(&self) -> Value {
        json!({ "total_models": self.total_models, "root": self.node_json(0) })
    }

    fn node_json(&self, id: usize) -> Value {
        let n = &self.nodes[id];
        json!({
            "id": n.id,
            "component": n.component.map_or_else(|| "root".to_string(), Component::name),
            "value": n.value.map_or(Value::Null, ParamValue::to_json),
            "m": n.m,
            "score_sum": n.score_sum,
            "time_sum": n.time_sum,
            "avg_auc": n.avg_auc(),
            "avg_time": n.avg_time(),
            "children": n.children.iter().map(|&c| self.node_json(c)).collect::<Vec<_>>(),
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_json_value()).expect("tree serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, TreeError> {
        let v: Value = serde_json::from_str(text)?;
        let obj = v.as_object().ok_or_else(|| TreeError::Format("top level is not an object".into()))?;
        let total_models = obj
            .get("total_models")
            .and_then(Value::as_u64)
            .ok_or_else(|| TreeError::Format("missing total_models".into()))?;
        let root = obj.get("root").ok_or_else(|| TreeError::Format("missing root".into()))?;
        let mut nodes = Vec::new();
        read_node(root, None, &mut nodes)?;
        nodes.sort_by_key(|n| n.id);
        if nodes.iter().enumerate().any(|(i, n)| n.id != i) {
            return Err(TreeError::Format("node ids are not 0..n".into()));
        }
        Ok(Self { nodes, total_models })
    }

    /// Graphviz rendering: one node per tree node in id order, labelled
    /// with the component value, average AUC and visit count.
    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph mct {\n  node [shape=box];\n");
        for n in &self.nodes {
            let head = match (n.component, n.value) {
                (Some(c), Some(v)) => format!("{}={}", c.name(), v),
                _ => "root".to_string(),
            };
            let avg = n.avg_auc().map_or_else(|| "-".to_string(), |a| format!("{a:.4}"));
            let _ = writeln!(out, "  n{} [label=\"{}\\navg AUC={}\\nm={}\"];", n.id, head, avg, n.m);
        }
        for n in &self.nodes {
            for &c in &n.children {
                let _ = writeln!(out, "  n{} -> n{};", n.id, c);
            }
        }
        out.push_str("}\n");
        out
    }
}

fn read_node(v: &Value, parent: Option<usize>, nodes: &mut Vec<MctNode>) -> Result<usize, TreeError> {
    let bad = |what: &str| TreeError::Format(format!("node field {what} missing or malformed"));
    let o: &Map<String, Value> = v.as_object().ok_or_else(|| bad("object"))?;
    let id = o.get("id").and_then(Value::as_u64).ok_or_else(|| bad("id"))? as usize;
    let name = o.get("component").and_then(Value::as_str).ok_or_else(|| bad("component"))?;
    let (component, value) = if parent.is_none() {
        (None, None)
    } else {
        let c = Component::from_name(name).ok_or_else(|| bad("component"))?;
        let value = o.get("value").and_then(|x| c.parse_value(x)).ok_or_else(|| bad("value"))?;
        (Some(c), Some(value))
    };
    let num = |k: &str| o.get(k).and_then(Value::as_f64).ok_or_else(|| bad(k));
    let node = MctNode {
        id,
        parent,
        component,
        value,
        m: o.get("m").and_then(Value::as_u64).ok_or_else(|| bad("m"))?,
        score_sum: num("score_sum")?,
        time_sum: num("time_sum")?,
        children: vec![],
    };
    nodes.push(node);
    let at = nodes.len() - 1;
    let children = o.get("children").and_then(Value::as_array).ok_or_else(|| bad("children"))?;
    let mut ids = Vec::with_capacity(children.len());
    for child in children {
        ids.push(read_node(child, Some(id), nodes)?);
    }
    nodes[at].children = ids;
    Ok(id)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ucb_edge_cases() {
        assert_eq!(ucb(0.0, 0, 10, 2.0_f64.sqrt()), f64::INFINITY);
        assert_eq!(ucb(0.8, 1, 1, 2.0_f64.sqrt()), 0.8);
        assert_eq!(ucb(0.8, 1, 0, 2.0_f64.sqrt()), 0.8);
    }

    #[test]
    fn theta_one_expands_on_first_visit() {
        let space = SearchSpace::default();
        let mut t = MctTree::new();
        assert_eq!(t.select_leaf(1.0), vec![0]);
        t.update(&[0], 0.7, 1.0, 1, &space);
        assert_eq!(t.root().children.len(), 3);
        assert_eq!(t.root().m, 1);
        // All children are unvisited, so the lowest id wins.
        assert_eq!(t.select_leaf(1.0), vec![0, 1]);
    }

    #[test]
    fn json_round_trip() {
        let space = SearchSpace::default();
        let mut t = MctTree::new();
        for i in 0..30 {
            let p = t.select_leaf(1.4);
            t.update(&p, 0.5 + i as f64 / 100.0, 0.25, 2, &space);
        }
        let back = MctTree::from_json(&t.to_json()).unwrap();
        assert_eq!(back, t);
    }
}
