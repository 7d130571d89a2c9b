//! JSON instance and graph files.

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instance::{Customer, Instance};
use crate::mcf::{Commodity, Edge, FlowNetwork, SourceCustomer};
use crate::norm::WeightVector;
use crate::oracle::LinearOracle;

/// A node reference: graph files may name nodes by string or by integer.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(untagged)]
pub enum NodeName {
    Number(i64),
    Text(String),
}

impl fmt::Display for NodeName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Number(n) => write!(f, "{n}"),
            Self::Text(s) => f.write_str(s),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<NodeName>,
    pub tail: NodeName,
    pub head: NodeName,
    pub capacity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSpec {
    pub nodes: Vec<NodeName>,
    pub edges: Vec<EdgeSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SinkSpec {
    pub sink: NodeName,
    pub demand: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum CustomerSpec {
    Vertices {
        id: String,
        vertices: Vec<Vec<f64>>,
    },
    /// All commodities leaving `source`; requires the file's `network`.
    SourceGroup {
        id: String,
        source: NodeName,
        sinks: Vec<SinkSpec>,
    },
}

impl CustomerSpec {
    pub fn id(&self) -> &str {
        match self {
            Self::Vertices { id, .. } | Self::SourceGroup { id, .. } => id,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceFile {
    pub beta: Vec<f64>,
    pub customers: Vec<CustomerSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub network: Option<NetworkSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub comment: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CommoditySpec {
    pub source: NodeName,
    pub sink: NodeName,
    pub demand: f64,
}

/// Standalone multi-commodity-flow input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphFile {
    pub nodes: Vec<NodeName>,
    pub edges: Vec<EdgeSpec>,
    pub commodities: Vec<CommoditySpec>,
    pub beta: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub comment: Option<String>,
}

fn schema(path: impl Into<String>, message: impl Into<String>) -> Error {
    Error::Schema {
        path: path.into(),
        message: message.into(),
    }
}

/// Parses JSON, reporting the field path of the first error.
pub fn parse_json<T: DeserializeOwned>(text: &str) -> Result<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        schema(
            if path.is_empty() { ".".into() } else { path },
            e.into_inner().to_string(),
        )
    })
}

pub fn parse_instance(text: &str) -> Result<InstanceFile> {
    parse_json(text).map_err(|e| refine_customer_error(text, e))
}

// Mirrors of the `CustomerSpec` variants. The tagged enum buffers its content
// before dispatching, which loses the path below `customers[i]`; re-reading
// the failing element through these recovers it.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
#[allow(dead_code)]
struct VerticesBody {
    kind: String,
    id: String,
    vertices: Vec<Vec<f64>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
#[allow(dead_code)]
struct SourceGroupBody {
    kind: String,
    id: String,
    source: NodeName,
    sinks: Vec<SinkSpec>,
}

fn refine_customer_error(text: &str, err: Error) -> Error {
    let Error::Schema { path, .. } = &err else {
        return err;
    };
    let Some(index) = path
        .strip_prefix("customers[")
        .and_then(|rest| rest.strip_suffix(']'))
        .and_then(|i| i.parse::<usize>().ok())
    else {
        return err;
    };
    let Ok(doc) = serde_json::from_str::<serde_json::Value>(text) else {
        return err;
    };
    let element = doc["customers"][index].clone();
    let outcome = match element["kind"].as_str() {
        Some("vertices") => serde_path_to_error::deserialize::<_, VerticesBody>(element).map(drop),
        Some("source-group") => {
            serde_path_to_error::deserialize::<_, SourceGroupBody>(element).map(drop)
        }
        _ => return err,
    };
    match outcome {
        Err(inner) => schema(
            format!("customers[{index}].{}", inner.path()),
            inner.into_inner().to_string(),
        ),
        Ok(()) => err,
    }
}

pub fn parse_graph(text: &str) -> Result<GraphFile> {
    parse_json(text)
}

fn weights(beta: &[f64]) -> Result<WeightVector> {
    WeightVector::new(beta.to_vec()).map_err(|e| schema("beta", e.to_string()))
}

fn node_table(nodes: &[NodeName], prefix: &str) -> Result<HashMap<NodeName, usize>> {
    let mut table = HashMap::new();
    for (i, n) in nodes.iter().enumerate() {
        if table.insert(n.clone(), i).is_some() {
            return Err(schema(
                format!("{prefix}nodes[{i}]"),
                format!("duplicate node `{n}`"),
            ));
        }
    }
    Ok(table)
}

fn lookup(table: &HashMap<NodeName, usize>, name: &NodeName, path: String) -> Result<usize> {
    table
        .get(name)
        .copied()
        .ok_or_else(|| schema(path, format!("unknown node `{name}`")))
}

fn build_edges(
    spec: &[EdgeSpec],
    table: &HashMap<NodeName, usize>,
    prefix: &str,
) -> Result<Vec<Edge>> {
    spec.iter()
        .enumerate()
        .map(|(i, e)| {
            Ok(Edge {
                label: e
                    .id
                    .as_ref()
                    .map_or_else(|| i.to_string(), |id| id.to_string()),
                tail: lookup(table, &e.tail, format!("{prefix}edges[{i}].tail"))?,
                head: lookup(table, &e.head, format!("{prefix}edges[{i}].head"))?,
                capacity: e.capacity,
            })
        })
        .collect()
}

impl InstanceFile {
    /// Validates the file and builds the instance; errors name the offending field.
    pub fn build(&self) -> Result<Instance> {
        let weights = weights(&self.beta)?;
        let d = weights.dim();
        if self.customers.is_empty() {
            return Err(schema("customers", "at least one customer is required"));
        }
        let network = self.network_for_groups()?;
        let mut group_iter = network.as_ref().map(|(_, groups)| groups.iter());
        let mut customers = Vec::with_capacity(self.customers.len());
        for (ci, spec) in self.customers.iter().enumerate() {
            let customer = match spec {
                CustomerSpec::Vertices { id, vertices } => {
                    if vertices.is_empty() {
                        return Err(schema(
                            format!("customers[{ci}].vertices"),
                            "at least one vertex is required",
                        ));
                    }
                    for (vi, v) in vertices.iter().enumerate() {
                        let path = format!("customers[{ci}].vertices[{vi}]");
                        if v.len() != d {
                            return Err(schema(
                                path,
                                format!("expected {d} entries, got {}", v.len()),
                            ));
                        }
                        if let Some(j) = v.iter().position(|x| !(x.is_finite() && *x >= 0.0)) {
                            return Err(schema(
                                format!("{path}[{j}]"),
                                "entries must be finite and nonnegative",
                            ));
                        }
                    }
                    Customer::from_vertices(id.clone(), vertices.clone())
                }
                CustomerSpec::SourceGroup { id, .. } => {
                    let group = group_iter
                        .as_mut()
                        .and_then(|it| it.next())
                        .expect("one group per source-group customer");
                    if group.dim() != d {
                        return Err(schema(
                            "beta",
                            format!("expected one weight per edge ({}), got {d}", group.dim()),
                        ));
                    }
                    Customer::new(id.clone(), Arc::new(group.clone()))
                }
            }
            .map_err(|e| schema(format!("customers[{ci}]"), e.to_string()))?;
            customers.push(customer);
        }
        Instance::new(weights, customers)
    }

    fn network_for_groups(&self) -> Result<Option<(Arc<FlowNetwork>, Vec<SourceCustomer>)>> {
        let groups: Vec<(usize, &NodeName, &[SinkSpec])> = self
            .customers
            .iter()
            .enumerate()
            .filter_map(|(i, c)| match c {
                CustomerSpec::SourceGroup { source, sinks, .. } => {
                    Some((i, source, sinks.as_slice()))
                }
                CustomerSpec::Vertices { .. } => None,
            })
            .collect();
        if groups.is_empty() {
            return Ok(None);
        }
        let spec = self
            .network
            .as_ref()
            .ok_or_else(|| schema("network", "required by source-group customers"))?;
        let table = node_table(&spec.nodes, "network.")?;
        let edges = build_edges(&spec.edges, &table, "network.")?;
        let mut commodities = Vec::new();
        let mut members = Vec::new();
        for &(ci, source, sinks) in &groups {
            let s = lookup(&table, source, format!("customers[{ci}].source"))?;
            if sinks.is_empty() {
                return Err(schema(
                    format!("customers[{ci}].sinks"),
                    "at least one sink is required",
                ));
            }
            let mut ks = Vec::new();
            for (si, sink) in sinks.iter().enumerate() {
                ks.push(commodities.len());
                commodities.push(Commodity {
                    source: s,
                    sink: lookup(
                        &table,
                        &sink.sink,
                        format!("customers[{ci}].sinks[{si}].sink"),
                    )?,
                    demand: sink.demand,
                });
            }
            members.push((s, ks));
        }
        let nodes = spec.nodes.iter().map(ToString::to_string).collect();
        let network = Arc::new(
            FlowNetwork::new(nodes, edges, commodities)
                .map_err(|e| schema("network", e.to_string()))?,
        );
        let customers = members
            .into_iter()
            .map(|(s, ks)| SourceCustomer::new(network.clone(), s, ks))
            .collect::<Result<Vec<_>>>()?;
        Ok(Some((network, customers)))
    }

    /// Vertex lists of every customer, when all customers are vertex lists.
    pub fn vertex_lists(&self) -> Option<Vec<Vec<Vec<f64>>>> {
        self.customers
            .iter()
            .map(|c| match c {
                CustomerSpec::Vertices { vertices, .. } => Some(vertices.clone()),
                CustomerSpec::SourceGroup { .. } => None,
            })
            .collect()
    }
}

impl GraphFile {
    pub fn network(&self) -> Result<FlowNetwork> {
        let table = node_table(&self.nodes, "")?;
        let edges = build_edges(&self.edges, &table, "")?;
        let commodities = self
            .commodities
            .iter()
            .enumerate()
            .map(|(i, c)| {
                Ok(Commodity {
                    source: lookup(&table, &c.source, format!("commodities[{i}].source"))?,
                    sink: lookup(&table, &c.sink, format!("commodities[{i}].sink"))?,
                    demand: c.demand,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let nodes = self.nodes.iter().map(ToString::to_string).collect();
        FlowNetwork::new(nodes, edges, commodities)
    }

    pub fn weights(&self) -> Result<WeightVector> {
        let w = weights(&self.beta)?;
        if w.dim() != self.edges.len() {
            return Err(schema(
                "beta",
                format!(
                    "expected one weight per edge ({}), got {}",
                    self.edges.len(),
                    w.dim()
                ),
            ));
        }
        Ok(w)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vertex_instance_round_trip() {
        let text = r#"{"beta":[0.5,0.5],"customers":[{"id":"a","kind":"vertices","vertices":[[1,0],[0,1]]}],"name":"tiny"}"#;
        let file = parse_instance(text).unwrap();
        let inst = file.build().unwrap();
        assert_eq!(inst.len(), 1);
        assert_eq!(inst.customers()[0].id(), "a");
        let again: InstanceFile = parse_instance(&serde_json::to_string(&file).unwrap()).unwrap();
        assert_eq!(again, file);
    }

    #[test]
    fn errors_name_the_field() {
        let err = parse_instance(
            r#"{"beta":[1,0],"customers":[{"id":"a","kind":"vertices","vertices":[[1,"x"]]}]}"#,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Schema { .. }), "{err}");
        let err = parse_instance(r#"{"beta":[1,0],"customers":[],"extra":1}"#).unwrap_err();
        assert!(err.to_string().contains("extra"), "{err}");
        let file = parse_instance(
            r#"{"beta":[1,0],"customers":[{"id":"a","kind":"vertices","vertices":[[1,0],[1]]}]}"#,
        )
        .unwrap();
        match file.build().unwrap_err() {
            Error::Schema { path, .. } => assert_eq!(path, "customers[0].vertices[1]"),
            e => panic!("{e}"),
        }
        let file = parse_instance(
            r#"{"beta":[1,0],"customers":[{"id":"a","kind":"vertices","vertices":[[1,-1]]}]}"#,
        )
        .unwrap();
        match file.build().unwrap_err() {
            Error::Schema { path, .. } => assert_eq!(path, "customers[0].vertices[0][1]"),
            e => panic!("{e}"),
        }
        assert!(parse_instance("{").is_err());
    }

    #[test]
    fn source_group_customers() {
        let text = r#"{
            "beta": [1, 0],
            "network": {"nodes": ["s", "t"], "edges": [{"tail": "s", "head": "t", "capacity": 1}, {"tail": "s", "head": "t", "capacity": 1}]},
            "customers": [{"id": "s", "kind": "source-group", "source": "s", "sinks": [{"sink": "t", "demand": 1}]}]
        }"#;
        let inst = parse_instance(text).unwrap().build().unwrap();
        assert_eq!(inst.dim(), 2);
        assert_eq!(
            inst.uniform_price_aggregate().unwrap().to_vec(),
            vec![1.0, 0.0]
        );
    }

    #[test]
    fn graph_file() {
        let text = r#"{"nodes":[0,1,2],"edges":[{"id":"a","tail":0,"head":1,"capacity":2},{"id":"b","tail":1,"head":2,"capacity":4}],
            "commodities":[{"source":0,"sink":2,"demand":1}],"beta":[1,0]}"#;
        let g = parse_graph(text).unwrap();
        let net = g.network().unwrap();
        assert_eq!(net.edges()[1].label, "b");
        assert_eq!(g.weights().unwrap().dim(), 2);
        let bad = r#"{"nodes":[0,1],"edges":[{"tail":0,"head":7,"capacity":2}],"commodities":[{"source":0,"sink":1,"demand":1}],"beta":[1]}"#;
        match parse_graph(bad).unwrap().network().unwrap_err() {
            Error::Schema { path, .. } => assert_eq!(path, "edges[0].head"),
            e => panic!("{e}"),
        }
    }
}
