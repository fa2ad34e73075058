//! Detection logs (`frame,x,y,w,h,label,score[,d1..dk]`) and assignment
//! files (`frame,box_index,object_iri`).

use std::io::{Read, Write};

use thoth_core::rdf::Iri;

use crate::geometry::BoundingBox;
use crate::MotError;

#[derive(Debug, Clone, PartialEq)]
pub struct DetectionRecord {
    pub frame: u64,
    pub bbox: BoundingBox,
    pub label: String,
    pub score: f64,
    pub descriptor: Option<Vec<f64>>,
}

/// One box-to-object decision. `box_index` is the record's position among
/// the records of its frame, in file order.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Assignment {
    pub frame: u64,
    pub box_index: usize,
    pub object: Iri,
}

fn bad(line: u64, msg: impl Into<String>) -> MotError {
    MotError::Format {
        line,
        message: msg.into(),
    }
}

/// Checks score range, frame order and a constant descriptor length.
pub fn validate_records(records: &[DetectionRecord]) -> Result<(), MotError> {
    let mut dim: Option<usize> = None;
    let mut last = 0;
    for (i, r) in records.iter().enumerate() {
        let line = i as u64 + 2;
        if !(0.0..=1.0).contains(&r.score) {
            return Err(bad(line, format!("score {} outside [0,1]", r.score)));
        }
        if r.frame < last {
            return Err(MotError::Unsorted { frame: r.frame });
        }
        last = r.frame;
        if let Some(d) = &r.descriptor {
            match dim {
                None => dim = Some(d.len()),
                Some(n) if n != d.len() => {
                    return Err(bad(line, format!("descriptor length {} after {n}", d.len())))
                }
                Some(_) => {}
            }
        }
    }
    Ok(())
}

pub fn read_detections<R: Read>(input: R) -> Result<Vec<DetectionRecord>, MotError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(input);
    let header = rdr.headers().map_err(|e| bad(1, e.to_string()))?.clone();
    let want = ["frame", "x", "y", "w", "h", "label", "score"];
    if header.len() < want.len() || header.iter().zip(want).any(|(a, b)| a != b) {
        return Err(bad(1, "header must start with frame,x,y,w,h,label,score"));
    }
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i as u64 + 2;
        let rec = rec.map_err(|e| bad(line, e.to_string()))?;
        if rec.len() < 7 {
            return Err(bad(line, format!("expected at least 7 fields, got {}", rec.len())));
        }
        let num = |k: usize| -> Result<f64, MotError> {
            rec[k]
                .parse::<f64>()
                .map_err(|_| bad(line, format!("field {} is not a number: '{}'", want.get(k).unwrap_or(&"d"), &rec[k])))
        };
        let frame = rec[0]
            .parse::<u64>()
            .map_err(|_| bad(line, format!("bad frame '{}'", &rec[0])))?;
        let bbox = BoundingBox::new(num(1)?, num(2)?, num(3)?, num(4)?)
            .map_err(|e| bad(line, e.to_string()))?;
        let descriptor = if rec.len() > 7 {
            Some((7..rec.len()).map(num).collect::<Result<Vec<_>, _>>()?)
        } else {
            None
        };
        out.push(DetectionRecord {
            frame,
            bbox,
            label: rec[5].to_string(),
            score: num(6)?,
            descriptor,
        });
    }
    validate_records(&out)?;
    Ok(out)
}

pub fn write_detections<W: Write>(out: W, records: &[DetectionRecord]) -> Result<(), MotError> {
    let dim = records.iter().filter_map(|r| r.descriptor.as_ref()).map(Vec::len).max().unwrap_or(0);
    let mut w = csv::WriterBuilder::new().flexible(true).from_writer(out);
    let mut header: Vec<String> = ["frame", "x", "y", "w", "h", "label", "score"].map(String::from).to_vec();
    header.extend((1..=dim).map(|i| format!("d{i}")));
    w.write_record(&header)?;
    for r in records {
        let mut row = vec![
            r.frame.to_string(),
            r.bbox.x.to_string(),
            r.bbox.y.to_string(),
            r.bbox.w.to_string(),
            r.bbox.h.to_string(),
            r.label.clone(),
            r.score.to_string(),
        ];
        if let Some(d) = &r.descriptor {
            row.extend(d.iter().map(f64::to_string));
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_assignments<W: Write>(out: W, rows: &[Assignment]) -> Result<(), MotError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["frame", "box_index", "object_iri"])?;
    for a in rows {
        w.write_record([a.frame.to_string(), a.box_index.to_string(), a.object.as_str().to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_assignments<R: Read>(input: R) -> Result<Vec<Assignment>, MotError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i as u64 + 2;
        let rec = rec.map_err(|e| bad(line, e.to_string()))?;
        if rec.len() != 3 {
            return Err(bad(line, "expected frame,box_index,object_iri"));
        }
        let frame = rec[0].parse().map_err(|_| bad(line, "bad frame"))?;
        let box_index = rec[1].parse().map_err(|_| bad(line, "bad box index"))?;
        let iri = rec[2].trim_start_matches('<').trim_end_matches('>');
        out.push(Assignment {
            frame,
            box_index,
            object: Iri::new(iri),
        });
    }
    Ok(out)
}
