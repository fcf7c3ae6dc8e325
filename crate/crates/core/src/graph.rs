//! Star-shaped co-location graph around a candidate resource.

use serde::{Deserialize, Serialize};

use crate::geo::dmax_disks;
use crate::model::{Resource, ResourceStore, Rid};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub a: Rid,
    pub b: Rid,
    /// Largest distance between the two regions, meters.
    pub d: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CoLocationGraph {
    pub center: Rid,
    /// rid-sorted, including the center.
    pub vertices: Vec<Rid>,
    /// Sorted by neighbor rid; `a` is always the center.
    pub edges: Vec<Edge>,
}

impl CoLocationGraph {
    pub fn neighbors(&self) -> impl Iterator<Item = &Rid> {
        self.edges.iter().map(|e| &e.b)
    }

    /// Structural equality with weights compared within `epsilon`.
    pub fn same_as(&self, other: &CoLocationGraph, epsilon: f64) -> bool {
        self.vertices == other.vertices
            && self.edges.len() == other.edges.len()
            && self
                .edges
                .iter()
                .zip(&other.edges)
                .all(|(x, y)| x.a == y.a && x.b == y.b && (x.d - y.d).abs() <= epsilon)
    }

    /// Adjacency list keyed by rid, both directions.
    pub fn adjacency(&self) -> Vec<(Rid, Vec<(Rid, f64)>)> {
        let mut out: Vec<(Rid, Vec<(Rid, f64)>)> =
            self.vertices.iter().map(|v| (v.clone(), Vec::new())).collect();
        for e in &self.edges {
            for (from, to) in [(&e.a, &e.b), (&e.b, &e.a)] {
                let slot = out
                    .binary_search_by(|(v, _)| v.cmp(from))
                    .expect("edge endpoint is a vertex");
                out[slot].1.push((to.clone(), e.d));
            }
        }
        for (_, list) in &mut out {
            list.sort_by(|x, y| x.0.cmp(&y.0));
        }
        out
    }

    pub fn adjacency_json(&self) -> serde_json::Value {
        let map: serde_json::Map<String, serde_json::Value> = self
            .adjacency()
            .into_iter()
            .map(|(v, list)| {
                let items = list
                    .into_iter()
                    .map(|(to, d)| serde_json::json!({ "rid": to, "d": d }))
                    .collect();
                (v.0, serde_json::Value::Array(items))
            })
            .collect();
        serde_json::Value::Object(map)
    }
}

/// `r` plus every stored resource whose worst-case distance to `r` is below
/// `d_max`. Resources already stored under `r.rid` are ignored.
pub fn build_coloc_graph(r: &Resource, store: &ResourceStore, d_max: f64) -> CoLocationGraph {
    // dmax < d_max forces the centers within d_max - radii of each other
    let reach = (d_max - r.space.radius).max(0.0);
    let mut edges: Vec<Edge> = store
        .centers_near(r.space.cx, r.space.cy, reach)
        .into_iter()
        .filter(|other| other.rid != r.rid)
        .filter_map(|other| {
            let d = dmax_disks(&r.space, &other.space);
            (d < d_max).then(|| Edge {
                a: r.rid.clone(),
                b: other.rid.clone(),
                d,
            })
        })
        .collect();
    edges.sort_by(|x, y| x.b.cmp(&y.b));
    let mut vertices: Vec<Rid> = edges.iter().map(|e| e.b.clone()).collect();
    vertices.push(r.rid.clone());
    vertices.sort();
    CoLocationGraph {
        center: r.rid.clone(),
        vertices,
        edges,
    }
}
