use std::collections::BTreeMap;
use std::fmt::Write as _;

use quick_xml::escape::escape;
use serde::{Deserialize, Serialize};

use super::AnalysisResult;
use crate::roster::EdgeList;
use crate::scalar::{RealScalar, Scalar};

/// Per-node display attributes supplied by the caller.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct NodeAttributes {
    pub label: String,
    pub sex: Option<String>,
    pub audit_zone: Option<u8>,
    pub audit_score: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rgb {
    pub r: u8,
    pub g: u8,
    pub b: u8,
}

impl Rgb {
    pub fn hex(self) -> String {
        format!("#{:02x}{:02x}{:02x}", self.r, self.g, self.b)
    }
}

/// Light grey for girls, dark grey for boys, mid grey when unknown.
pub fn sex_color(sex: Option<&str>) -> Rgb {
    match sex.map(|s| s.trim().to_ascii_lowercase()) {
        Some(s) if s == "f" || s == "female" || s == "girl" => Rgb { r: 200, g: 200, b: 200 },
        Some(s) if s == "m" || s == "male" || s == "boy" => Rgb { r: 80, g: 80, b: 80 },
        _ => Rgb { r: 144, g: 144, b: 144 },
    }
}

/// Node size grows with the AUDIT risk zone.
pub fn zone_size(zone: Option<u8>) -> f64 {
    match zone {
        Some(z) => 10.0 * f64::from(z),
        None => 5.0,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphNode {
    pub id: String,
    pub label: String,
    pub sex: Option<String>,
    pub audit_zone: Option<u8>,
    pub audit_score: Option<String>,
    pub popularity: f64,
    pub mediation: f64,
    pub influence: f64,
    pub community: usize,
    pub size: f64,
    pub color: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphLink {
    pub source: String,
    pub target: String,
    pub weight: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeLinkGraph {
    pub directed: bool,
    pub relation: String,
    pub wave: String,
    pub modularity: f64,
    pub nodes: Vec<GraphNode>,
    pub links: Vec<GraphLink>,
}

fn graph_nodes<F: RealScalar>(analysis: &AnalysisResult<F>, attrs: &BTreeMap<String, NodeAttributes>) -> Vec<GraphNode> {
    let f = |v: F| v.to_f64().unwrap_or(f64::NAN);
    analysis
        .nodes
        .iter()
        .enumerate()
        .map(|(i, id)| {
            let a = attrs.get(id).cloned().unwrap_or_default();
            GraphNode {
                id: id.clone(),
                label: if a.label.is_empty() { id.clone() } else { a.label.clone() },
                color: sex_color(a.sex.as_deref()).hex(),
                size: zone_size(a.audit_zone),
                sex: a.sex,
                audit_zone: a.audit_zone,
                audit_score: a.audit_score,
                popularity: f(analysis.popularity.values[i]),
                mediation: f(analysis.mediation.values[i]),
                influence: f(analysis.influence.values[i]),
                community: analysis.partition.membership[i],
            }
        })
        .collect()
}

pub fn node_link<S: Scalar, F: RealScalar>(
    analysis: &AnalysisResult<F>,
    edges: &EdgeList<S>,
    attrs: &BTreeMap<String, NodeAttributes>,
) -> NodeLinkGraph {
    NodeLinkGraph {
        directed: true,
        relation: analysis.relation.clone(),
        wave: analysis.wave_id.clone(),
        modularity: analysis.partition.modularity.to_f64().unwrap_or(f64::NAN),
        nodes: graph_nodes(analysis, attrs),
        links: edges
            .edges
            .iter()
            .filter(|e| e.weight > S::zero())
            .map(|e| GraphLink { source: e.source.clone(), target: e.target.clone(), weight: e.weight.to_text() })
            .collect(),
    }
}

/// GEXF 1.2 document with viz size/colour and analysis attributes.
pub fn gexf<S: Scalar, F: RealScalar>(
    analysis: &AnalysisResult<F>,
    edges: &EdgeList<S>,
    attrs: &BTreeMap<String, NodeAttributes>,
) -> String {
    let mut out = String::new();
    out.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    out.push_str(
        "<gexf xmlns=\"http://www.gexf.net/1.2draft\" xmlns:viz=\"http://www.gexf.net/1.2draft/viz\" version=\"1.2\">\n",
    );
    let _ = writeln!(
        out,
        "  <meta>\n    <description>{} ({})</description>\n  </meta>",
        escape(analysis.relation.as_str()),
        escape(analysis.wave_id.as_str())
    );
    out.push_str("  <graph mode=\"static\" defaultedgetype=\"directed\">\n");
    out.push_str("    <attributes class=\"node\">\n");
    let node_attrs = [
        ("0", "sex", "string"),
        ("1", "audit_zone", "integer"),
        ("2", "audit_score", "string"),
        ("3", "popularity", "double"),
        ("4", "mediation", "double"),
        ("5", "influence", "double"),
        ("6", "community", "integer"),
    ];
    for (id, title, ty) in node_attrs {
        let _ = writeln!(out, "      <attribute id=\"{id}\" title=\"{title}\" type=\"{ty}\"/>");
    }
    out.push_str("    </attributes>\n");
    out.push_str("    <attributes class=\"edge\">\n      <attribute id=\"0\" title=\"relation\" type=\"string\"/>\n    </attributes>\n");
    out.push_str("    <nodes>\n");
    for n in graph_nodes(analysis, attrs) {
        let _ = writeln!(out, "      <node id=\"{}\" label=\"{}\">", escape(n.id.as_str()), escape(n.label.as_str()));
        out.push_str("        <attvalues>\n");
        let values = [
            n.sex.clone(),
            n.audit_zone.map(|z| z.to_string()),
            n.audit_score.clone(),
            Some(n.popularity.to_string()),
            Some(n.mediation.to_string()),
            Some(n.influence.to_string()),
            Some(n.community.to_string()),
        ];
        for (i, v) in values.iter().enumerate() {
            if let Some(v) = v {
                let _ = writeln!(out, "          <attvalue for=\"{i}\" value=\"{}\"/>", escape(v.as_str()));
            }
        }
        out.push_str("        </attvalues>\n");
        let c = sex_color(n.sex.as_deref());
        let _ = writeln!(out, "        <viz:size value=\"{}\"/>", n.size);
        let _ = writeln!(out, "        <viz:color r=\"{}\" g=\"{}\" b=\"{}\"/>", c.r, c.g, c.b);
        out.push_str("      </node>\n");
    }
    out.push_str("    </nodes>\n    <edges>\n");
    for (i, e) in edges.edges.iter().filter(|e| e.weight > S::zero()).enumerate() {
        let _ = writeln!(
            out,
            "      <edge id=\"{i}\" source=\"{}\" target=\"{}\" weight=\"{}\">\n        <attvalues>\n          <attvalue for=\"0\" value=\"{}\"/>\n        </attvalues>\n      </edge>",
            escape(e.source.as_str()),
            escape(e.target.as_str()),
            e.weight.to_f64_lossy(),
            escape(edges.relation.as_str())
        );
    }
    out.push_str("    </edges>\n  </graph>\n</gexf>\n");
    out
}
