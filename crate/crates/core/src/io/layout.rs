//! Layout files: wire segments in micrometres and the bias in gauss.
//!
//! ```json
//! {
//!   "segments": [{ "start": [-1000, 0, 0], "end": [0, 0, 0], "current": 0.8 }],
//!   "bias_gauss": [0, 12, 0],
//!   "units": { "length": "um" }
//! }
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Circuit, Vec3, WireSegment};
use crate::units::{gauss_to_tesla, m_to_um, tesla_to_gauss, um_to_m};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum LengthUnit {
    #[default]
    #[serde(rename = "um")]
    Micrometre,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Units {
    pub length: LengthUnit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayoutSegment {
    pub start: [f64; 3],
    pub end: [f64; 3],
    /// A
    pub current: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayoutFile {
    pub segments: Vec<LayoutSegment>,
    pub bias_gauss: [f64; 3],
    #[serde(default)]
    pub units: Units,
}

fn um3(p: &[f64; 3]) -> Vec3 {
    Vec3::new(um_to_m(p[0]), um_to_m(p[1]), um_to_m(p[2]))
}

impl LayoutFile {
    /// Schema-checked parse; errors carry the JSON path of the offending
    /// value.
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| Error::Parse {
            path: e.path().to_string(),
            message: e.inner().to_string(),
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("layout serialises")
    }

    /// SI circuit with segment and junction checks.
    pub fn to_circuit(&self) -> Result<Circuit> {
        let segments = self
            .segments
            .iter()
            .enumerate()
            .map(|(i, s)| {
                WireSegment::new(um3(&s.start), um3(&s.end), s.current).map_err(|e| Error::Parse {
                    path: format!("segments[{i}]"),
                    message: e.to_string(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let b = self.bias_gauss;
        let bias = Vec3::new(
            gauss_to_tesla(b[0]),
            gauss_to_tesla(b[1]),
            gauss_to_tesla(b[2]),
        );
        Circuit::new(segments, bias)
    }

    pub fn from_circuit(c: &Circuit) -> Self {
        let um = |v: &Vec3| [m_to_um(v.x), m_to_um(v.y), m_to_um(v.z)];
        LayoutFile {
            segments: c
                .segments
                .iter()
                .map(|s| LayoutSegment {
                    start: um(&s.start),
                    end: um(&s.end),
                    current: s.current,
                })
                .collect(),
            bias_gauss: [
                tesla_to_gauss(c.bias.x),
                tesla_to_gauss(c.bias.y),
                tesla_to_gauss(c.bias.z),
            ],
            units: Units::default(),
        }
    }
}

/// Parses and validates a layout document into an SI circuit.
pub fn parse_layout(text: &str) -> Result<Circuit> {
    LayoutFile::from_json(text)?.to_circuit()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_y_splitter, YSplitterParams};

    #[test]
    fn minimal_file() {
        let c = parse_layout(
            r#"{"segments":[{"start":[-500,0,0],"end":[500,0,0],"current":0.8}],"bias_gauss":[0,12,0]}"#,
        )
        .unwrap();
        assert_eq!(c.segments.len(), 1);
        assert!((c.segments[0].end.x - 5e-4).abs() < 1e-18);
        assert!((c.bias.y - 12e-4).abs() < 1e-18);
    }

    #[test]
    fn schema_errors_name_the_path() {
        let bad =
            r#"{"segments":[{"start":[0,0,0],"end":[1,0],"current":1}],"bias_gauss":[0,0,0]}"#;
        match parse_layout(bad) {
            Err(Error::Parse { path, .. }) => assert_eq!(path, "segments[0].end"),
            other => panic!("{other:?}"),
        }
        let unit = r#"{"segments":[],"bias_gauss":[0,0,0],"units":{"length":"mm"}}"#;
        match parse_layout(unit) {
            Err(Error::Parse { path, .. }) => assert_eq!(path, "units.length"),
            other => panic!("{other:?}"),
        }
        let extra = r#"{"segments":[],"bias_gauss":[0,0,0],"bias":[0,0,0]}"#;
        assert!(matches!(parse_layout(extra), Err(Error::Parse { .. })));
        let degenerate =
            r#"{"segments":[{"start":[0,0,0],"end":[0,0,0],"current":1}],"bias_gauss":[0,0,0]}"#;
        match parse_layout(degenerate) {
            Err(Error::Parse { path, .. }) => assert_eq!(path, "segments[0]"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unbalanced_junction_names_the_node() {
        let text = r#"{"segments":[
            {"start":[-100,0,0],"end":[0,0,0],"current":1.0},
            {"start":[0,0,0],"end":[100,10,0],"current":0.6},
            {"start":[0,0,0],"end":[100,-10,0],"current":0.3}],
            "bias_gauss":[0,10,0]}"#;
        match parse_layout(text) {
            Err(e @ Error::Validation(_)) => {
                let msg = e.to_string();
                assert!(
                    msg.contains("(0.000000e0, 0.000000e0, 0.000000e0)"),
                    "{msg}"
                );
                assert!(msg.contains("3 segments"), "{msg}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn round_trip_through_json() {
        let c = build_y_splitter(&YSplitterParams::default()).unwrap();
        let text = LayoutFile::from_circuit(&c).to_json();
        let back = parse_layout(&text).unwrap();
        assert_eq!(back.segments.len(), 3);
        for (a, b) in c.segments.iter().zip(&back.segments) {
            assert!((a.start - b.start).norm() < 1e-18);
            assert!((a.end - b.end).norm() < 1e-18);
            assert_eq!(a.current, b.current);
        }
        assert!((c.bias - back.bias).norm() < 1e-20);
    }
}
