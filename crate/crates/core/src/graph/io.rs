use super::{EdgeId, Graph};
use crate::error::Result;
use serde::{Deserialize, Serialize};

/// On-disk graph format.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphFile {
    pub n: usize,
    pub edges: Vec<[usize; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub arrival_order: Option<Vec<EdgeId>>,
    #[serde(default)]
    pub meta: serde_json::Map<String, serde_json::Value>,
}

impl Graph {
    pub fn to_file(&self) -> GraphFile {
        GraphFile {
            n: self.n,
            edges: self.edges.clone(),
            arrival_order: self.arrival_order.clone(),
            meta: self.meta.clone(),
        }
    }

    pub fn from_file(f: GraphFile) -> Result<Graph> {
        let mut g = Graph::new(f.n, f.edges)?;
        g.meta = f.meta;
        match f.arrival_order {
            Some(order) => g.with_arrival_order(order),
            None => Ok(g),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&self.to_file())?)
    }

    pub fn from_json(s: &str) -> Result<Graph> {
        Graph::from_file(serde_json::from_str(s)?)
    }
}
