//! Maps detections and tracklet predictions to Listing-1-shaped triples.

use thoth_core::geometry::format_descriptor;
use thoth_core::rdf::vocab::{base, rdf_type, sosa, ssr};
use thoth_core::rdf::{Iri, SemanticStream, Term, TimedTriple, Triple};

use crate::geometry::BoundingBox;
use crate::io::DetectionRecord;
use crate::MotError;

/// The stream the shipped rule files read (`<:ssr>`).
pub fn ssr_stream() -> Iri {
    Iri::new(format!("{}ssr", thoth_core::rdf::vocab::BASE))
}

pub fn image_iri(frame: u64) -> Term {
    base(&format!("image{frame}"))
}

pub fn box_iri(frame: u64, index: usize) -> Term {
    base(&format!("f{frame}b{index}"))
}

pub fn detection_iri(frame: u64, index: usize) -> Term {
    base(&format!("f{frame}det{index}"))
}

pub fn prediction_iri(frame: u64, track: u64) -> Term {
    base(&format!("f{frame}p{track}"))
}

pub fn tracklet_iri(track: u64) -> Term {
    base(&format!("trk{track}"))
}

pub fn object_iri(n: u64) -> Term {
    base(&format!("o{n}"))
}

fn t(s: Term, p: Term, o: Term) -> Triple {
    Triple::new(s, p, o)
}

fn lex(x: f64) -> Term {
    Term::string(x.to_string())
}

/// Image observation for one frame.
pub fn frame_triples(frame: u64, camera: &Iri) -> Vec<Triple> {
    let img = Term::quoted(t(image_iri(frame), rdf_type(), base("Image2D")));
    vec![
        t(img.clone(), rdf_type(), sosa("Observation")),
        t(img.clone(), sosa("madeBySensor"), Term::Iri(camera.clone())),
        t(img, sosa("resultTime"), Term::integer(frame as i64)),
    ]
}

/// Detection annotations for box `index` of `frame`, plus its geometry and
/// descriptor.
pub fn detection_triples(frame: u64, index: usize, r: &DetectionRecord) -> Vec<Triple> {
    let b = box_iri(frame, index);
    let d = Term::quoted(t(detection_iri(frame, index), base("det"), b.clone()));
    let mut out = vec![
        t(d.clone(), rdf_type(), base("Detection")),
        t(d.clone(), sosa("resultTime"), Term::integer(frame as i64)),
        t(d.clone(), sosa("hasSimpleResult"), Term::string(r.label.clone())),
        t(d.clone(), base("score"), lex(r.score)),
        t(d.clone(), base("isDetectionOf"), image_iri(frame)),
        t(d, sosa("usedProcedure"), base("Yolo")),
        t(b.clone(), ssr("bbox"), Term::string(r.bbox.to_string())),
    ];
    if let Some(desc) = &r.descriptor {
        out.push(t(b, ssr("descriptor"), Term::string(format_descriptor(desc))));
    }
    out
}

/// Tracklet annotation for a Kalman prediction, its geometry, and the
/// tracklet's object link.
pub fn prediction_triples(frame: u64, track: u64, object: &Term, predicted: &BoundingBox) -> Vec<Triple> {
    let p = prediction_iri(frame, track);
    let q = Term::quoted(t(tracklet_iri(track), base("trk"), p.clone()));
    vec![
        t(q.clone(), rdf_type(), base("Tracklet")),
        t(q.clone(), sosa("resultTime"), Term::integer(frame as i64)),
        t(q, sosa("usedProcedure"), base("KalmanFilter")),
        t(p, ssr("bbox"), Term::string(predicted.to_string())),
        t(tracklet_iri(track), base("trklet"), object.clone()),
    ]
}

/// Groups frame-sorted records into `(frame, records)` runs.
pub fn by_frame(records: &[DetectionRecord]) -> Result<Vec<(u64, &[DetectionRecord])>, MotError> {
    let mut out: Vec<(u64, &[DetectionRecord])> = Vec::new();
    let mut start = 0;
    for i in 1..=records.len() {
        if i < records.len() && records[i].frame < records[i - 1].frame {
            return Err(MotError::Unsorted { frame: records[i].frame });
        }
        if i == records.len() || records[i].frame != records[start].frame {
            if start < i {
                out.push((records[start].frame, &records[start..i]));
            }
            start = i;
        }
    }
    Ok(out)
}

/// Image observation and detection annotations for every frame, stamped
/// with the frame number.
pub fn detections_to_stream(records: &[DetectionRecord], camera: &Iri) -> Result<SemanticStream, MotError> {
    let mut s = SemanticStream::new(ssr_stream());
    s.metadata.insert(t(
        Term::Iri(ssr_stream()),
        Term::iri("http://www.w3.org/ns/prov#wasGeneratedBy"),
        Term::Iri(camera.clone()),
    ));
    for (frame, recs) in by_frame(records)? {
        let mut elems: Vec<Triple> = frame_triples(frame, camera);
        for (i, r) in recs.iter().enumerate() {
            elems.extend(detection_triples(frame, i, r));
        }
        s.extend(elems.into_iter().map(|tr| TimedTriple::new(tr, frame)))
            .expect("frames are sorted and triples ground");
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(frame: u64) -> DetectionRecord {
        DetectionRecord {
            frame,
            bbox: BoundingBox::new(1.0, 2.0, 3.0, 4.0).unwrap(),
            label: "car".into(),
            score: 0.8,
            descriptor: None,
        }
    }

    #[test]
    fn counts() {
        let cam = Iri::new("http://example.org/thoth#cam1");
        assert!(detections_to_stream(&[], &cam).unwrap().is_empty());
        // 3 observation + 7 per detection.
        assert_eq!(detections_to_stream(&[rec(2)], &cam).unwrap().len(), 10);
        let s = detections_to_stream(&[rec(2), rec(2)], &cam).unwrap();
        assert_eq!(s.len(), 17);
        assert!(detections_to_stream(&[rec(3), rec(2)], &cam).is_err());
    }
}
