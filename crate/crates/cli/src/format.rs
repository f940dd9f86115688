//! On-disk documents. Every file is one JSON object carrying `version` and
//! `kind`; the rest of the fields depend on the kind.

use std::collections::BTreeMap;

use cstree::scheduling::{Schedule, Task, TdsInstance, ThreePartitionInstance};
use cstree::semantics::SearchStrategy;
use cstree::{VertexId, Weight, WeightedRootedTree};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::CliError;

pub const FORMAT_VERSION: u32 = 1;

pub type Meta = BTreeMap<String, Value>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VertexRec {
    pub id: VertexId,
    pub w: Weight,
}

fn unit() -> Weight {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeRec {
    pub u: VertexId,
    pub v: VertexId,
    #[serde(default = "unit")]
    pub w: Weight,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeDoc {
    pub vertices: Vec<VertexRec>,
    pub edges: Vec<EdgeRec>,
    pub root: VertexId,
    #[serde(default, skip_serializing_if = "Meta::is_empty")]
    pub meta: Meta,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyDoc {
    pub start: VertexId,
    pub moves: Vec<String>,
    /// The budget the producer claims the strategy meets.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<Weight>,
    #[serde(default, skip_serializing_if = "Meta::is_empty")]
    pub meta: Meta,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskRec {
    pub id: u64,
    pub d: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<Vec<u64>>,
    /// `[[run length, value], ...]`
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_rle: Option<Vec<[u64; 2]>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TdsDoc {
    pub tasks: Vec<TaskRec>,
    #[serde(default, skip_serializing_if = "Meta::is_empty")]
    pub meta: Meta,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThreePartitionDoc {
    #[serde(rename = "B")]
    pub b: u64,
    #[serde(rename = "A")]
    pub a: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleDoc {
    /// Task ids in execution order.
    pub order: Vec<u64>,
    #[serde(default, skip_serializing_if = "Meta::is_empty")]
    pub meta: Meta,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Payload {
    Tree(TreeDoc),
    Tds(TdsDoc),
    ThreePartition(ThreePartitionDoc),
    Strategy(StrategyDoc),
    Schedule(ScheduleDoc),
    Report(Value),
}

impl Payload {
    pub fn kind(&self) -> &'static str {
        match self {
            Payload::Tree(_) => "tree",
            Payload::Tds(_) => "tds",
            Payload::ThreePartition(_) => "three_partition",
            Payload::Strategy(_) => "strategy",
            Payload::Schedule(_) => "schedule",
            Payload::Report(_) => "report",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceFile {
    pub version: u32,
    #[serde(flatten)]
    pub payload: Payload,
}

impl InstanceFile {
    pub fn new(payload: Payload) -> Self {
        InstanceFile {
            version: FORMAT_VERSION,
            payload,
        }
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let raw: Value = serde_json::from_str(text)
            .map_err(|e| CliError::Input(format!("malformed JSON: {e}")))?;
        match raw.get("version") {
            Some(Value::Number(n)) if n.as_u64() == Some(FORMAT_VERSION as u64) => {}
            Some(v) => {
                return Err(CliError::Input(format!(
                    "field `version`: unsupported value {v}"
                )))
            }
            None => return Err(CliError::Input("field `version`: missing".into())),
        }
        // re-parse from text so diagnostics carry line numbers
        serde_json::from_str(text).map_err(|e| CliError::Input(format!("{e}")))
    }

    pub fn to_text(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("documents serialise");
        s.push('\n');
        s
    }

    fn expect<T>(self, want: &str, pick: impl FnOnce(Payload) -> Option<T>) -> Result<T, CliError> {
        let got = self.payload.kind();
        pick(self.payload)
            .ok_or_else(|| CliError::Input(format!("field `kind`: expected {want}, found {got}")))
    }

    pub fn into_tree(self) -> Result<TreeDoc, CliError> {
        self.expect("tree", |p| {
            if let Payload::Tree(d) = p {
                Some(d)
            } else {
                None
            }
        })
    }

    pub fn into_tds(self) -> Result<TdsDoc, CliError> {
        self.expect("tds", |p| {
            if let Payload::Tds(d) = p {
                Some(d)
            } else {
                None
            }
        })
    }

    pub fn into_three_partition(self) -> Result<ThreePartitionDoc, CliError> {
        self.expect("three_partition", |p| {
            if let Payload::ThreePartition(d) = p {
                Some(d)
            } else {
                None
            }
        })
    }

    pub fn into_strategy(self) -> Result<StrategyDoc, CliError> {
        self.expect("strategy", |p| {
            if let Payload::Strategy(d) = p {
                Some(d)
            } else {
                None
            }
        })
    }

    pub fn into_schedule(self) -> Result<ScheduleDoc, CliError> {
        self.expect("schedule", |p| {
            if let Payload::Schedule(d) = p {
                Some(d)
            } else {
                None
            }
        })
    }
}

impl TreeDoc {
    pub fn from_tree(t: &WeightedRootedTree, meta: Meta) -> Self {
        TreeDoc {
            vertices: (0..t.vertex_count())
                .map(|v| VertexRec {
                    id: v,
                    w: t.weight(v),
                })
                .collect(),
            edges: t
                .edges()
                .iter()
                .map(|e| EdgeRec {
                    u: e.a,
                    v: e.b,
                    w: e.weight,
                })
                .collect(),
            root: t.root(),
            meta,
        }
    }

    pub fn to_tree(&self) -> Result<WeightedRootedTree, CliError> {
        let n = self.vertices.len();
        let mut weights = vec![None; n];
        for (i, rec) in self.vertices.iter().enumerate() {
            if rec.id >= n {
                return Err(CliError::Input(format!(
                    "vertices[{i}].id: {} is not below the vertex count {n}",
                    rec.id
                )));
            }
            if weights[rec.id].replace(rec.w).is_some() {
                return Err(CliError::Input(format!(
                    "vertices[{i}].id: duplicate id {}",
                    rec.id
                )));
            }
        }
        let weights: Vec<Weight> = weights
            .into_iter()
            .map(|w| w.expect("ids cover 0..n"))
            .collect();
        let edges = self.edges.iter().map(|e| (e.u, e.v, e.w)).collect();
        WeightedRootedTree::new(weights, edges, self.root)
            .map_err(|e| CliError::Input(format!("tree: {e}")))
    }
}

pub fn edge_label(t: &WeightedRootedTree, e: usize) -> String {
    let ed = t.edge(e);
    format!("{}-{}", ed.a, ed.b)
}

impl StrategyDoc {
    pub fn from_strategy(
        t: &WeightedRootedTree,
        s: &SearchStrategy,
        k: Option<Weight>,
        meta: Meta,
    ) -> Self {
        StrategyDoc {
            start: s.start,
            moves: s.moves.iter().map(|&e| edge_label(t, e)).collect(),
            k,
            meta,
        }
    }

    pub fn to_strategy(&self, t: &WeightedRootedTree) -> Result<SearchStrategy, CliError> {
        let mut moves = Vec::with_capacity(self.moves.len());
        for (i, m) in self.moves.iter().enumerate() {
            let bad = || CliError::Input(format!("moves[{i}]: `{m}` is not an edge of the tree"));
            let (a, b) = m.split_once('-').ok_or_else(bad)?;
            let a: VertexId = a.trim().parse().map_err(|_| bad())?;
            let b: VertexId = b.trim().parse().map_err(|_| bad())?;
            if a >= t.vertex_count() || b >= t.vertex_count() {
                return Err(bad());
            }
            moves.push(t.edge_between(a, b).ok_or_else(bad)?);
        }
        if self.start >= t.vertex_count() {
            return Err(CliError::Input(format!(
                "start: vertex {} is not in the tree",
                self.start
            )));
        }
        Ok(SearchStrategy::new(self.start, moves))
    }
}

fn rle(p: &[u64]) -> Vec<[u64; 2]> {
    let mut out: Vec<[u64; 2]> = Vec::new();
    for &x in p {
        match out.last_mut() {
            Some(run) if run[1] == x => run[0] += 1,
            _ => out.push([1, x]),
        }
    }
    out
}

/// A TDS instance together with the file's task ids.
#[derive(Debug, Clone)]
pub struct LoadedTds {
    pub inst: TdsInstance,
    pub ids: Vec<u64>,
    pub meta: Meta,
}

impl LoadedTds {
    pub fn index_of(&self, id: u64) -> Option<usize> {
        self.ids.iter().position(|&x| x == id)
    }
}

impl TdsDoc {
    /// Durations are written run-length encoded when that halves the size.
    pub fn from_instance(inst: &TdsInstance, ids: &[u64], meta: Meta) -> Self {
        let tasks = inst
            .tasks
            .iter()
            .zip(ids)
            .map(|(t, &id)| {
                let runs = rle(&t.exec);
                let (p, p_rle) = if 2 * runs.len() < t.exec.len() {
                    (None, Some(runs))
                } else {
                    (Some(t.exec.clone()), None)
                };
                TaskRec {
                    id,
                    d: t.deadline,
                    p,
                    p_rle,
                }
            })
            .collect();
        TdsDoc { tasks, meta }
    }

    pub fn load(&self) -> Result<LoadedTds, CliError> {
        let mut tasks = Vec::with_capacity(self.tasks.len());
        let mut ids = Vec::with_capacity(self.tasks.len());
        for (i, rec) in self.tasks.iter().enumerate() {
            if ids.contains(&rec.id) {
                return Err(CliError::Input(format!(
                    "tasks[{i}].id: duplicate id {}",
                    rec.id
                )));
            }
            let exec = match (&rec.p, &rec.p_rle) {
                (Some(p), None) => p.clone(),
                (None, Some(runs)) => {
                    let total: u64 = runs.iter().map(|r| r[0]).sum();
                    if total != rec.d {
                        return Err(CliError::Input(format!(
                            "tasks[{i}].p_rle: runs cover {total} steps, d is {}",
                            rec.d
                        )));
                    }
                    runs.iter()
                        .flat_map(|&[len, v]| std::iter::repeat_n(v, len as usize))
                        .collect()
                }
                _ => {
                    return Err(CliError::Input(format!(
                        "tasks[{i}]: give exactly one of `p` and `p_rle`"
                    )))
                }
            };
            ids.push(rec.id);
            tasks.push(Task::new(rec.d, exec));
        }
        let inst = TdsInstance::new(tasks).map_err(|e| CliError::Input(format!("tasks: {e}")))?;
        Ok(LoadedTds {
            inst,
            ids,
            meta: self.meta.clone(),
        })
    }
}

impl ThreePartitionDoc {
    pub fn load(&self) -> Result<ThreePartitionInstance, CliError> {
        ThreePartitionInstance::new(self.b, self.a.clone())
            .map_err(|e| CliError::Input(format!("{e}")))
    }
}

impl ScheduleDoc {
    pub fn from_schedule(d: &Schedule, tds: &LoadedTds) -> Self {
        let mut meta = Meta::new();
        meta.insert("feasible".into(), Value::from(d.feasible));
        meta.insert("makespan".into(), Value::from(d.makespan));
        meta.insert(
            "start".into(),
            Value::from(d.order.iter().map(|&j| d.start[j]).collect::<Vec<_>>()),
        );
        meta.insert(
            "completion".into(),
            Value::from(d.order.iter().map(|&j| d.completion[j]).collect::<Vec<_>>()),
        );
        if !d.diagnostics.is_empty() {
            meta.insert("diagnostics".into(), Value::from(d.diagnostics.clone()));
        }
        ScheduleDoc {
            order: d.order.iter().map(|&j| tds.ids[j]).collect(),
            meta,
        }
    }

    pub fn order_indices(&self, tds: &LoadedTds) -> Result<Vec<usize>, CliError> {
        self.order
            .iter()
            .enumerate()
            .map(|(i, &id)| {
                tds.index_of(id)
                    .ok_or_else(|| CliError::Input(format!("order[{i}]: unknown task id {id}")))
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use cstree::tree::build::path;

    #[test]
    fn tree_round_trip() {
        let t = WeightedRootedTree::new(vec![2, 1, 3], vec![(0, 1, 1), (1, 2, 2)], 1).unwrap();
        let doc = InstanceFile::new(Payload::Tree(TreeDoc::from_tree(&t, Meta::new())));
        let text = doc.to_text();
        let back = InstanceFile::parse(&text).unwrap();
        assert_eq!(back, doc);
        assert_eq!(back.to_text(), text);
        let t2 = back.into_tree().unwrap().to_tree().unwrap();
        assert_eq!(
            TreeDoc::from_tree(&t2, Meta::new()),
            TreeDoc::from_tree(&t, Meta::new())
        );
        assert_eq!(t2.root(), 1);
    }

    #[test]
    fn edge_weight_defaults_to_one() {
        let text = r#"{"version":1,"kind":"tree","vertices":[{"id":0,"w":1},{"id":1,"w":1}],"edges":[{"u":0,"v":1}],"root":0}"#;
        let t = InstanceFile::parse(text)
            .unwrap()
            .into_tree()
            .unwrap()
            .to_tree()
            .unwrap();
        assert!(t.has_unit_edges());
    }

    #[test]
    fn diagnostics_name_the_field() {
        let text =
            "{\"version\":1,\"kind\":\"tree\",\n\"vertices\":[{\"id\":0}],\"edges\":[],\"root\":0}";
        let e = InstanceFile::parse(text).unwrap_err().to_string();
        assert!(e.contains("`w`") && e.contains("line 2"), "{e}");
        let e = InstanceFile::parse(r#"{"kind":"tree"}"#)
            .unwrap_err()
            .to_string();
        assert!(e.contains("version"), "{e}");
        let dup = r#"{"version":1,"kind":"tree","vertices":[{"id":0,"w":1},{"id":0,"w":1}],"edges":[],"root":0}"#;
        let e = InstanceFile::parse(dup)
            .unwrap()
            .into_tree()
            .unwrap()
            .to_tree()
            .unwrap_err()
            .to_string();
        assert!(e.contains("vertices[1].id"), "{e}");
    }

    #[test]
    fn strategy_moves_are_vertex_pairs() {
        let t = path(&[1, 1, 1]);
        let s = SearchStrategy::new(0, vec![0, 1]);
        let doc = StrategyDoc::from_strategy(&t, &s, Some(1), Meta::new());
        assert_eq!(doc.moves, vec!["0-1", "1-2"]);
        assert_eq!(doc.to_strategy(&t).unwrap(), s);
        let reversed = StrategyDoc {
            moves: vec!["1-0".into(), "2-1".into()],
            ..doc.clone()
        };
        assert_eq!(reversed.to_strategy(&t).unwrap(), s);
        let bad = StrategyDoc {
            moves: vec!["0-2".into()],
            ..doc
        };
        assert!(bad
            .to_strategy(&t)
            .unwrap_err()
            .to_string()
            .contains("moves[0]"));
    }

    #[test]
    fn tds_run_length_round_trip() {
        let inst = TdsInstance::new(vec![
            Task::new(6, vec![1, 1, 1, 1, 2, 2]),
            Task::new(2, vec![1, 2]),
        ])
        .unwrap();
        let doc = TdsDoc::from_instance(&inst, &[7, 9], Meta::new());
        assert_eq!(doc.tasks[0].p_rle, Some(vec![[4, 1], [2, 2]]));
        assert_eq!(doc.tasks[1].p, Some(vec![1, 2]));
        let file = InstanceFile::new(Payload::Tds(doc));
        let loaded = InstanceFile::parse(&file.to_text())
            .unwrap()
            .into_tds()
            .unwrap()
            .load()
            .unwrap();
        assert_eq!(loaded.inst, inst);
        assert_eq!(loaded.ids, vec![7, 9]);
    }

    #[test]
    fn tds_rejects_bad_tables() {
        let text = r#"{"version":1,"kind":"tds","tasks":[{"id":0,"d":3,"p_rle":[[2,1]]}]}"#;
        let e = InstanceFile::parse(text)
            .unwrap()
            .into_tds()
            .unwrap()
            .load()
            .unwrap_err()
            .to_string();
        assert!(e.contains("tasks[0].p_rle"), "{e}");
        let text = r#"{"version":1,"kind":"tds","tasks":[{"id":0,"d":2,"p":[2,1]}]}"#;
        assert!(InstanceFile::parse(text)
            .unwrap()
            .into_tds()
            .unwrap()
            .load()
            .is_err());
    }

    #[test]
    fn kind_mismatch_is_reported() {
        let text = r#"{"version":1,"kind":"three_partition","B":12,"A":[4,4,4]}"#;
        let f = InstanceFile::parse(text).unwrap();
        assert!(f
            .clone()
            .into_tree()
            .unwrap_err()
            .to_string()
            .contains("expected tree"));
        assert_eq!(f.into_three_partition().unwrap().load().unwrap().b, 12);
    }
}
