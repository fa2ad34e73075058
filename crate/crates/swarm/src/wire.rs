//! Line-oriented swarm messages and their framing.
//!
//! A message is a header line `KIND key=value ...` followed by an optional
//! body whose line count is the header's last field, `lines=N`. On a byte
//! stream every envelope travels as a 4-byte big-endian length followed by
//! `FROM TO\n` and the message text. docs/wire-format.md has the field
//! order of every kind.

use std::collections::{BTreeMap, VecDeque};
use std::io::{self, Read, Write};

use thiserror::Error;
use thoth_core::rdf::{Iri, PrefixMap, Term, TurtleReader};

use crate::descriptor::NodeDescriptor;
use crate::exec::{PartialPayload, PartialResult};
use crate::plan::FragmentRole;

/// Upper bound on one frame's payload.
pub const MAX_FRAME: usize = 16 << 20;

#[derive(Debug, Error)]
pub enum WireError {
    #[error("malformed message: {0}")]
    Malformed(String),
    #[error("field '{field}' value '{value}' contains whitespace")]
    BadField { field: String, value: String },
    #[error("frame of {0} bytes exceeds the limit")]
    Oversized(usize),
    #[error("i/o: {0}")]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Message {
    Subscribe {
        parent: String,
        descriptor: NodeDescriptor,
    },
    Ack {
        id: String,
        parent: String,
        joined_at: u64,
    },
    Nack {
        id: String,
        reason: String,
    },
    Unsubscribe {
        id: String,
    },
    SubQuery {
        fragment: String,
        role: FragmentRole,
        parent: Option<String>,
        parent_node: Option<String>,
        /// Child fragments a merge waits for.
        children: usize,
        streams: Vec<Iri>,
        /// Dialect text; empty for merges.
        query: String,
    },
    Partial {
        /// Fragment the partial is addressed to.
        target: String,
        partial: PartialResult,
    },
    Tick {
        tick: u64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Envelope {
    pub from: String,
    pub to: String,
    pub message: Message,
}

const UNDEF: &str = "UNDEF";

fn field(out: &mut String, k: &str, v: &str) -> Result<(), WireError> {
    if v.is_empty() || v.chars().any(char::is_whitespace) {
        return Err(WireError::BadField {
            field: k.into(),
            value: v.into(),
        });
    }
    out.push(' ');
    out.push_str(k);
    out.push('=');
    out.push_str(v);
    Ok(())
}

fn cell(t: &Option<Term>) -> String {
    t.as_ref().map_or_else(|| UNDEF.to_string(), Term::to_string)
}

fn parse_cell(s: &str) -> Result<Option<Term>, WireError> {
    if s == UNDEF {
        return Ok(None);
    }
    let reader = TurtleReader {
        prefixes: PrefixMap::empty(),
        ..TurtleReader::default()
    };
    let doc = format!("<urn:c> <urn:c> {s} .");
    match reader.parse(&doc) {
        Ok(mut t) if t.len() == 1 => Ok(Some(t.remove(0).object)),
        _ => Err(WireError::Malformed(format!("bad cell '{s}'"))),
    }
}

impl Message {
    pub fn kind(&self) -> &'static str {
        match self {
            Message::Subscribe { .. } => "SUBSCRIBE",
            Message::Ack { .. } => "ACK",
            Message::Nack { .. } => "NACK",
            Message::Unsubscribe { .. } => "UNSUBSCRIBE",
            Message::SubQuery { .. } => "SUBQUERY",
            Message::Partial { .. } => "PARTIAL",
            Message::Tick { .. } => "TICK",
        }
    }

    /// Text form, newline-terminated.
    pub fn encode(&self) -> Result<String, WireError> {
        let mut h = self.kind().to_string();
        let mut body: Vec<String> = Vec::new();
        match self {
            Message::Subscribe { parent, descriptor } => {
                field(&mut h, "parent", parent)?;
                body.push(descriptor.to_json());
            }
            Message::Ack {
                id,
                parent,
                joined_at,
            } => {
                field(&mut h, "id", id)?;
                field(&mut h, "parent", parent)?;
                field(&mut h, "joined", &joined_at.to_string())?;
            }
            Message::Nack { id, reason } => {
                field(&mut h, "id", id)?;
                body.extend(reason.lines().map(str::to_string));
            }
            Message::Unsubscribe { id } => field(&mut h, "id", id)?,
            Message::SubQuery {
                fragment,
                role,
                parent,
                parent_node,
                children,
                streams,
                query,
            } => {
                field(&mut h, "fragment", fragment)?;
                field(&mut h, "role", &role.to_string())?;
                field(&mut h, "parent", parent.as_deref().unwrap_or("-"))?;
                field(&mut h, "parent-node", parent_node.as_deref().unwrap_or("-"))?;
                field(&mut h, "children", &children.to_string())?;
                field(&mut h, "streams", &streams.len().to_string())?;
                body.extend(streams.iter().map(|s| s.to_string()));
                body.extend(query.lines().map(str::to_string));
            }
            Message::Partial { target, partial } => {
                field(&mut h, "target", target)?;
                field(&mut h, "fragment", &partial.fragment_id)?;
                field(&mut h, "watermark", &partial.watermark.to_string())?;
                match &partial.payload {
                    PartialPayload::Counts { keys, groups } => {
                        field(&mut h, "kind", "counts")?;
                        field(&mut h, "keys", &keys.to_string())?;
                        for (k, counts) in groups {
                            let mut cells: Vec<String> = k.iter().map(cell).collect();
                            cells.extend(counts.iter().map(u64::to_string));
                            body.push(cells.join("\t"));
                        }
                    }
                    PartialPayload::Rows(rows) => {
                        field(&mut h, "kind", "rows")?;
                        for r in rows {
                            body.push(r.iter().map(cell).collect::<Vec<_>>().join("\t"));
                        }
                    }
                }
            }
            Message::Tick { tick } => field(&mut h, "tick", &tick.to_string())?,
        }
        if !body.is_empty() || matches!(self, Message::Partial { .. } | Message::SubQuery { .. }) {
            field(&mut h, "lines", &body.len().to_string())?;
        }
        let mut out = h;
        out.push('\n');
        for l in body {
            out.push_str(&l);
            out.push('\n');
        }
        Ok(out)
    }

    /// Reads one message from the front of `lines`.
    pub fn decode_from<'a, I: Iterator<Item = &'a str>>(lines: &mut I) -> Result<Message, WireError> {
        let bad = |m: String| WireError::Malformed(m);
        let header = lines.next().ok_or_else(|| bad("empty message".into()))?;
        let mut parts = header.split(' ');
        let kind = parts.next().unwrap_or_default();
        let mut fields: BTreeMap<&str, &str> = BTreeMap::new();
        for p in parts {
            let (k, v) = p.split_once('=').ok_or_else(|| bad(format!("bad field '{p}'")))?;
            if fields.insert(k, v).is_some() {
                return Err(bad(format!("repeated field '{k}'")));
            }
        }
        let get = |k: &str| fields.get(k).copied().ok_or_else(|| bad(format!("{kind}: missing '{k}'")));
        let num = |k: &str| -> Result<u64, WireError> {
            get(k)?.parse().map_err(|_| bad(format!("{kind}: '{k}' is not a number")))
        };
        let opt = |k: &str| get(k).map(|v| (v != "-").then(|| v.to_string()));
        let n = if fields.contains_key("lines") { num("lines")? as usize } else { 0 };
        let mut body = Vec::with_capacity(n);
        for _ in 0..n {
            body.push(lines.next().ok_or_else(|| bad(format!("{kind}: body shorter than {n} lines")))?);
        }
        Ok(match kind {
            "SUBSCRIBE" => {
                let [json] = body.as_slice() else {
                    return Err(bad("SUBSCRIBE needs one body line".into()));
                };
                Message::Subscribe {
                    parent: get("parent")?.into(),
                    descriptor: NodeDescriptor::from_json(json).map_err(|e| bad(e.to_string()))?,
                }
            }
            "ACK" => Message::Ack {
                id: get("id")?.into(),
                parent: get("parent")?.into(),
                joined_at: num("joined")?,
            },
            "NACK" => Message::Nack {
                id: get("id")?.into(),
                reason: body.join("\n"),
            },
            "UNSUBSCRIBE" => Message::Unsubscribe { id: get("id")?.into() },
            "SUBQUERY" => {
                let k = num("streams")? as usize;
                if k > body.len() {
                    return Err(bad("SUBQUERY: more streams than body lines".into()));
                }
                let streams = body[..k]
                    .iter()
                    .map(|l| match parse_cell(l)? {
                        Some(Term::Iri(i)) => Ok(i),
                        _ => Err(bad(format!("bad stream '{l}'"))),
                    })
                    .collect::<Result<_, _>>()?;
                let mut query = body[k..].join("\n");
                if !query.is_empty() {
                    query.push('\n');
                }
                Message::SubQuery {
                    fragment: get("fragment")?.into(),
                    role: match get("role")? {
                        "root" => FragmentRole::Root,
                        "merge" => FragmentRole::Merge,
                        "leaf" => FragmentRole::Leaf,
                        r => return Err(bad(format!("unknown role '{r}'"))),
                    },
                    parent: opt("parent")?,
                    parent_node: opt("parent-node")?,
                    children: num("children")? as usize,
                    streams,
                    query,
                }
            }
            "PARTIAL" => {
                let payload = match get("kind")? {
                    "counts" => {
                        let keys = num("keys")? as usize;
                        let mut groups = BTreeMap::new();
                        for l in &body {
                            let cells: Vec<&str> = l.split('\t').collect();
                            if cells.len() < keys {
                                return Err(bad(format!("short row '{l}'")));
                            }
                            let key = cells[..keys].iter().map(|c| parse_cell(c)).collect::<Result<Vec<_>, _>>()?;
                            let counts = cells[keys..]
                                .iter()
                                .map(|c| c.parse::<u64>().map_err(|_| bad(format!("bad count '{c}'"))))
                                .collect::<Result<Vec<_>, _>>()?;
                            groups.insert(key, counts);
                        }
                        PartialPayload::Counts { keys, groups }
                    }
                    "rows" => PartialPayload::Rows(
                        body.iter()
                            .map(|l| l.split('\t').map(parse_cell).collect::<Result<Vec<_>, _>>())
                            .collect::<Result<_, _>>()?,
                    ),
                    k => return Err(bad(format!("unknown partial kind '{k}'"))),
                };
                Message::Partial {
                    target: get("target")?.into(),
                    partial: PartialResult {
                        fragment_id: get("fragment")?.into(),
                        watermark: num("watermark")?,
                        payload,
                    },
                }
            }
            "TICK" => Message::Tick { tick: num("tick")? },
            k => return Err(bad(format!("unknown message kind '{k}'"))),
        })
    }

    pub fn decode(text: &str) -> Result<Message, WireError> {
        let mut lines = text.lines();
        let m = Self::decode_from(&mut lines)?;
        if lines.next().is_some() {
            return Err(WireError::Malformed("trailing lines after message".into()));
        }
        Ok(m)
    }
}

impl Envelope {
    pub fn encode(&self) -> Result<Vec<u8>, WireError> {
        let mut s = String::new();
        field(&mut s, "from", &self.from)?;
        field(&mut s, "to", &self.to)?;
        let mut out = s[1..].to_string();
        out.push('\n');
        out.push_str(&self.message.encode()?);
        Ok(out.into_bytes())
    }

    pub fn decode(bytes: &[u8]) -> Result<Envelope, WireError> {
        let text = std::str::from_utf8(bytes).map_err(|e| WireError::Malformed(e.to_string()))?;
        let (head, rest) = text
            .split_once('\n')
            .ok_or_else(|| WireError::Malformed("missing envelope header".into()))?;
        let mut from = None;
        let mut to = None;
        for p in head.split(' ') {
            match p.split_once('=') {
                Some(("from", v)) => from = Some(v.to_string()),
                Some(("to", v)) => to = Some(v.to_string()),
                _ => return Err(WireError::Malformed(format!("bad envelope field '{p}'"))),
            }
        }
        Ok(Envelope {
            from: from.ok_or_else(|| WireError::Malformed("envelope without from".into()))?,
            to: to.ok_or_else(|| WireError::Malformed("envelope without to".into()))?,
            message: Message::decode(rest)?,
        })
    }
}

pub fn write_frame<W: Write>(w: &mut W, payload: &[u8]) -> Result<(), WireError> {
    if payload.len() > MAX_FRAME {
        return Err(WireError::Oversized(payload.len()));
    }
    w.write_all(&(payload.len() as u32).to_be_bytes())?;
    w.write_all(payload)?;
    w.flush()?;
    Ok(())
}

/// `None` on a clean end of stream before a frame starts.
pub fn read_frame<R: Read>(r: &mut R) -> Result<Option<Vec<u8>>, WireError> {
    let mut len = [0u8; 4];
    let mut got = 0;
    while got < 4 {
        match r.read(&mut len[got..])? {
            0 if got == 0 => return Ok(None),
            0 => return Err(WireError::Io(io::ErrorKind::UnexpectedEof.into())),
            n => got += n,
        }
    }
    let n = u32::from_be_bytes(len) as usize;
    if n > MAX_FRAME {
        return Err(WireError::Oversized(n));
    }
    let mut buf = vec![0u8; n];
    r.read_exact(&mut buf)?;
    Ok(Some(buf))
}

pub trait Transport {
    fn send(&mut self, env: &Envelope) -> Result<(), WireError>;
    fn recv(&mut self) -> Result<Option<Envelope>, WireError>;
}

/// Simulated network: a single FIFO of encoded frames, so delivery between
/// any pair of nodes is in send order. Every frame is also kept in a log.
#[derive(Debug, Default)]
pub struct InProcessNetwork {
    queue: VecDeque<Vec<u8>>,
    log: Vec<Vec<u8>>,
}

impl InProcessNetwork {
    pub fn new() -> Self {
        Self::default()
    }

    /// Every frame sent so far, in order.
    pub fn log(&self) -> &[Vec<u8>] {
        &self.log
    }

    /// The log as length-prefixed bytes, as it would appear on a socket.
    pub fn log_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        for f in &self.log {
            write_frame(&mut out, f).expect("log frames fit");
        }
        out
    }
}

impl Transport for InProcessNetwork {
    fn send(&mut self, env: &Envelope) -> Result<(), WireError> {
        let bytes = env.encode()?;
        self.log.push(bytes.clone());
        self.queue.push_back(bytes);
        Ok(())
    }

    fn recv(&mut self) -> Result<Option<Envelope>, WireError> {
        self.queue.pop_front().map(|b| Envelope::decode(&b)).transpose()
    }
}

/// Byte-stream binding (socket, pipe) with the same framing.
pub struct StreamTransport<S> {
    stream: S,
}

impl<S: Read + Write> StreamTransport<S> {
    pub fn new(stream: S) -> Self {
        StreamTransport { stream }
    }

    pub fn into_inner(self) -> S {
        self.stream
    }
}

impl<S: Read + Write> Transport for StreamTransport<S> {
    fn send(&mut self, env: &Envelope) -> Result<(), WireError> {
        write_frame(&mut self.stream, &env.encode()?)
    }

    fn recv(&mut self) -> Result<Option<Envelope>, WireError> {
        read_frame(&mut self.stream)?.map(|b| Envelope::decode(&b)).transpose()
    }
}
