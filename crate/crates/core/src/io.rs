//! JSON documents holding a glued complex and, optionally, vertex coordinates.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::complex::{FaceGluing, GluedComplex};
use crate::error::{Error, Result};
use crate::geometry::Point;

pub const FORMAT_TAG: &str = "mpl3-complex/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComplexDocument {
    pub format: String,
    pub tetrahedra: usize,
    pub gluings: Vec<FaceGluing>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coordinates: Option<BTreeMap<usize, [f64; 3]>>,
}

/// A parsed document: the built complex and one point per vertex class if
/// coordinates were given.
#[derive(Debug, Clone)]
pub struct Parsed {
    pub complex: GluedComplex,
    pub coords: Option<Vec<Point>>,
}

fn parse_error(e: serde_json::Error) -> Error {
    Error::Parse {
        location: if e.line() == 0 {
            "document".into()
        } else {
            format!("line {} column {}", e.line(), e.column())
        },
        message: e.to_string(),
    }
}

pub fn parse_document(text: &str) -> Result<ComplexDocument> {
    let value: serde_json::Value = serde_json::from_str(text).map_err(parse_error)?;
    match value.get("format") {
        Some(serde_json::Value::String(tag)) if tag == FORMAT_TAG => {}
        Some(serde_json::Value::String(tag)) => return Err(Error::SchemaVersionUnsupported(tag.clone())),
        Some(_) => {
            return Err(Error::Parse {
                location: "field \"format\"".into(),
                message: "expected a string".into(),
            })
        }
        None => {
            return Err(Error::Parse {
                location: "document".into(),
                message: "missing field \"format\"".into(),
            })
        }
    }
    serde_json::from_value(value).map_err(parse_error)
}

pub fn parse(text: &str) -> Result<Parsed> {
    let doc = parse_document(text)?;
    let complex = GluedComplex::build(doc.tetrahedra, &doc.gluings)?;
    let coords = match doc.coordinates {
        None => None,
        Some(map) => {
            let v = complex.vertex_count();
            if let Some((&k, _)) = map.range(v..).next() {
                return Err(Error::IndexOutOfRange { what: "vertex class", index: k, count: v });
            }
            let points = (0..v)
                .map(|k| map.get(&k).map(|p| Point::new(p[0], p[1], p[2])).ok_or(Error::MissingCoordinate(k)))
                .collect::<Result<Vec<_>>>()?;
            Some(points)
        }
    };
    Ok(Parsed { complex, coords })
}

pub fn to_document(complex: &GluedComplex, coords: Option<&[Point]>) -> ComplexDocument {
    ComplexDocument {
        format: FORMAT_TAG.into(),
        tetrahedra: complex.tet_count(),
        gluings: complex.gluings().to_vec(),
        coordinates: coords.map(|c| c.iter().enumerate().map(|(k, p)| (k, [p.x, p.y, p.z])).collect()),
    }
}

/// Normalized text: fixed key order, one gluing or coordinate per line,
/// shortest round-trip decimal numbers.
pub fn serialize(complex: &GluedComplex, coords: Option<&[Point]>) -> String {
    let doc = to_document(complex, coords);
    let mut out = String::from("{\n");
    out += &format!("  \"format\": {},\n", compact(&doc.format));
    out += &format!("  \"tetrahedra\": {},\n", doc.tetrahedra);
    out += "  \"gluings\": [\n";
    let lines: Vec<String> = doc.gluings.iter().map(|g| format!("    {}", compact(g))).collect();
    out += &lines.join(",\n");
    out += "\n  ]";
    if let Some(map) = &doc.coordinates {
        out += ",\n  \"coordinates\": {\n";
        let lines: Vec<String> = map.iter().map(|(k, p)| format!("    \"{k}\": {}", compact(p))).collect();
        out += &lines.join(",\n");
        out += "\n  }";
    }
    out += "\n}\n";
    out
}

fn compact<T: Serialize + ?Sized>(v: &T) -> String {
    serde_json::to_string(v).expect("value serializes")
}
