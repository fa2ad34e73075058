//! Node descriptors and their subscription-document JSON form.
//!
//! The document follows the WoT Thing Description layout: one property per
//! stream, with the stream URI in `forms[0].href`. Fields the TD has no slot
//! for (node kind, capabilities, parent, stream provenance) are carried as
//! extra members; a document without them reads as a plain RSU.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thoth_core::rdf::{parse_turtle_star, write_turtle, Iri, PrefixMap, Triple};

use crate::SwarmError;

pub const TD_CONTEXT: &str = "https://www.w3.org/2022/wot/td/v1.1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum NodeKind {
    #[serde(rename = "RSU")]
    Rsu,
    Edge,
    Cloud,
}

impl fmt::Display for NodeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NodeKind::Rsu => "RSU",
            NodeKind::Edge => "Edge",
            NodeKind::Cloud => "Cloud",
        })
    }
}

impl FromStr for NodeKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "RSU" | "rsu" => Ok(NodeKind::Rsu),
            "Edge" | "edge" => Ok(NodeKind::Edge),
            "Cloud" | "cloud" => Ok(NodeKind::Cloud),
            _ => Err(format!("unknown node kind '{s}'")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StreamDescriptor {
    /// Property name in the document.
    pub name: String,
    pub uri: Iri,
    pub description: String,
    pub content_type: String,
    pub method_name: String,
    /// Triples about the stream, e.g. `<uri> prov:wasGeneratedBy :cam2`.
    pub provenance: Vec<Triple>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Capabilities {
    /// Detector throughput range in frames per second.
    pub detector_fps: Option<(f64, f64)>,
    pub reasoner: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NodeDescriptor {
    pub id: String,
    pub title: String,
    pub description: String,
    pub kind: NodeKind,
    pub streams: Vec<StreamDescriptor>,
    pub capabilities: Capabilities,
    pub parent: Option<String>,
}

impl NodeDescriptor {
    pub fn new(id: impl Into<String>, kind: NodeKind) -> Self {
        let id = id.into();
        NodeDescriptor {
            title: id.clone(),
            id,
            description: String::new(),
            kind,
            streams: Vec::new(),
            capabilities: Capabilities {
                detector_fps: None,
                reasoner: kind != NodeKind::Rsu,
            },
            parent: None,
        }
    }

    pub fn with_stream(mut self, s: StreamDescriptor) -> Self {
        self.streams.push(s);
        self
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&Document::from(self)).expect("descriptor serializes")
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(&Document::from(self)).expect("descriptor serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, SwarmError> {
        let doc: Document =
            serde_json::from_str(text).map_err(|e| SwarmError::Descriptor(e.to_string()))?;
        doc.try_into()
    }
}

#[derive(Serialize, Deserialize)]
struct Form {
    op: String,
    href: String,
    #[serde(rename = "methodName")]
    method_name: String,
    #[serde(rename = "contentType")]
    content_type: String,
}

#[derive(Serialize, Deserialize)]
struct Property {
    #[serde(default)]
    description: String,
    #[serde(rename = "type", default = "string_type")]
    ty: String,
    forms: Vec<Form>,
    #[serde(rename = "readOnly", default = "yes")]
    read_only: bool,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    provenance: String,
}

fn string_type() -> String {
    "string".into()
}

fn yes() -> bool {
    true
}

#[derive(Serialize, Deserialize)]
struct CapabilitiesDoc {
    #[serde(rename = "detectorFps", default, skip_serializing_if = "Option::is_none")]
    detector_fps: Option<[f64; 2]>,
    reasoner: bool,
}

#[derive(Serialize, Deserialize)]
struct Document {
    #[serde(rename = "@context")]
    context: String,
    title: String,
    id: String,
    #[serde(default)]
    description: String,
    #[serde(default)]
    properties: BTreeMap<String, Property>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    kind: Option<NodeKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    capabilities: Option<CapabilitiesDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    parent: Option<String>,
}

impl From<&NodeDescriptor> for Document {
    fn from(d: &NodeDescriptor) -> Self {
        let properties = d
            .streams
            .iter()
            .map(|s| {
                let provenance = if s.provenance.is_empty() {
                    String::new()
                } else {
                    write_turtle(&s.provenance, &PrefixMap::default())
                };
                let p = Property {
                    description: s.description.clone(),
                    ty: string_type(),
                    forms: vec![Form {
                        op: "readproperty".into(),
                        href: s.uri.as_str().to_string(),
                        method_name: s.method_name.clone(),
                        content_type: s.content_type.clone(),
                    }],
                    read_only: true,
                    provenance,
                };
                (s.name.clone(), p)
            })
            .collect();
        Document {
            context: TD_CONTEXT.into(),
            title: d.title.clone(),
            id: d.id.clone(),
            description: d.description.clone(),
            properties,
            kind: Some(d.kind),
            capabilities: Some(CapabilitiesDoc {
                detector_fps: d.capabilities.detector_fps.map(|(a, b)| [a, b]),
                reasoner: d.capabilities.reasoner,
            }),
            parent: d.parent.clone(),
        }
    }
}

impl TryFrom<Document> for NodeDescriptor {
    type Error = SwarmError;

    fn try_from(doc: Document) -> Result<Self, SwarmError> {
        if doc.id.trim().is_empty() || doc.id.chars().any(char::is_whitespace) {
            return Err(SwarmError::Descriptor(format!("bad node id '{}'", doc.id)));
        }
        let mut streams = Vec::new();
        for (name, p) in doc.properties {
            let form = p
                .forms
                .into_iter()
                .next()
                .ok_or_else(|| SwarmError::Descriptor(format!("property '{name}' has no forms")))?;
            let provenance = if p.provenance.trim().is_empty() {
                Vec::new()
            } else {
                parse_turtle_star(&p.provenance)
                    .map_err(|e| SwarmError::Descriptor(format!("provenance of '{name}': {e}")))?
            };
            streams.push(StreamDescriptor {
                name,
                uri: Iri::new(form.href),
                description: p.description,
                content_type: form.content_type,
                method_name: form.method_name,
                provenance,
            });
        }
        let kind = doc.kind.unwrap_or(NodeKind::Rsu);
        let capabilities = match doc.capabilities {
            Some(c) => Capabilities {
                detector_fps: c.detector_fps.map(|[a, b]| (a, b)),
                reasoner: c.reasoner,
            },
            None => Capabilities {
                detector_fps: None,
                reasoner: kind != NodeKind::Rsu,
            },
        };
        Ok(NodeDescriptor {
            id: doc.id,
            title: doc.title,
            description: doc.description,
            kind,
            streams,
            capabilities,
            parent: doc.parent,
        })
    }
}
