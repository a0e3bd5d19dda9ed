use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::EnvError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Turn {
    L,
    R,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum Segment {
    Straight { len: f64 },
    Arc { r: f64, sweep: f64, dir: Turn },
}

impl Segment {
    pub fn length(&self) -> f64 {
        match *self {
            Segment::Straight { len } => len,
            Segment::Arc { r, sweep, .. } => r * sweep,
        }
    }

    /// Signed curvature, positive for left turns.
    pub fn curvature(&self) -> f64 {
        match *self {
            Segment::Straight { .. } => 0.0,
            Segment::Arc { r, dir: Turn::L, .. } => 1.0 / r,
            Segment::Arc { r, dir: Turn::R, .. } => -1.0 / r,
        }
    }
}

/// Centerline as a sequence of straights and circular arcs, plus a
/// constant width in meters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrackSpec {
    pub width: f64,
    pub segments: Vec<Segment>,
}

impl TrackSpec {
    pub fn validate(&self) -> Result<(), EnvError> {
        #[allow(clippy::neg_cmp_op_on_partial_ord)]
        if !(self.width > 0.0) {
            return Err(EnvError::Config(format!("track width {} must be positive", self.width)));
        }
        if self.segments.is_empty() {
            return Err(EnvError::Config("track has no segments".into()));
        }
        for s in &self.segments {
            let ok = match *s {
                Segment::Straight { len } => len > 0.0,
                Segment::Arc { r, sweep, .. } => r > self.width / 2.0 && sweep > 0.0,
            };
            if !ok {
                return Err(EnvError::Config(format!(
                    "bad segment {s:?}: lengths and sweeps must be positive and radii exceed the half-width"
                )));
            }
        }
        Ok(())
    }

    pub fn length(&self) -> f64 {
        self.segments.iter().map(Segment::length).sum()
    }

    /// Curvature at arc length `s`, wrapping around the lap.
    pub fn curvature_at(&self, s: f64) -> f64 {
        let total = self.length();
        let mut s = s.rem_euclid(total);
        for seg in &self.segments {
            let l = seg.length();
            if s < l {
                return seg.curvature();
            }
            s -= l;
        }
        self.segments.last().map_or(0.0, Segment::curvature)
    }

    /// Left and right turns swapped.
    pub fn mirrored(&self) -> Self {
        let segments = self
            .segments
            .iter()
            .map(|s| match *s {
                Segment::Arc { r, sweep, dir } => Segment::Arc {
                    r,
                    sweep,
                    dir: if dir == Turn::L { Turn::R } else { Turn::L },
                },
                other => other,
            })
            .collect();
        Self {
            width: self.width,
            segments,
        }
    }

    /// End point and heading of the centerline after one lap, starting at
    /// the origin heading along +x.
    pub fn end_pose(&self) -> (f64, f64, f64) {
        let (mut x, mut y, mut h) = (0.0, 0.0, 0.0_f64);
        for seg in &self.segments {
            match *seg {
                Segment::Straight { len } => {
                    x += len * h.cos();
                    y += len * h.sin();
                }
                Segment::Arc { r, sweep, .. } => {
                    let k = seg.curvature().signum();
                    let h2 = h + k * sweep;
                    x += k * r * (h2.sin() - h.sin());
                    y -= k * r * (h2.cos() - h.cos());
                    h = h2;
                }
            }
        }
        (x, y, h)
    }

    pub fn from_json(text: &str) -> Result<Self, EnvError> {
        let t: TrackSpec = serde_json::from_str(text).map_err(|e| EnvError::Config(format!("track JSON: {e}")))?;
        t.validate()?;
        Ok(t)
    }

    pub fn load(path: &Path) -> Result<Self, EnvError> {
        let text = std::fs::read_to_string(path).map_err(|e| EnvError::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }
}

fn st(len: f64) -> Segment {
    Segment::Straight { len }
}

fn left(r: f64, sweep: f64) -> Segment {
    Segment::Arc { r, sweep, dir: Turn::L }
}

fn right(r: f64, sweep: f64) -> Segment {
    Segment::Arc { r, sweep, dir: Turn::R }
}

const WIDTH: f64 = 10.0;

/// Closed training circuit: a half-lap of straights and three curvatures,
/// repeated so the lap closes on itself.
pub fn training_track() -> TrackSpec {
    let half = [st(150.0), left(80.0, PI / 2.0), st(60.0), right(50.0, PI / 2.0), left(120.0, PI / 2.0), left(50.0, PI / 2.0)];
    TrackSpec {
        width: WIDTH,
        segments: half.iter().chain(half.iter()).copied().collect(),
    }
}

/// Four held-out tracks with orderings and radii unseen in training.
pub fn test_tracks() -> Vec<TrackSpec> {
    let t = |segments: Vec<Segment>| TrackSpec { width: WIDTH, segments };
    vec![
        t(vec![st(100.0), right(60.0, PI / 2.0), st(80.0), left(100.0, PI / 2.0), st(120.0), left(40.0, PI / 3.0), right(80.0, PI / 3.0), st(100.0)]),
        t(vec![st(80.0), left(120.0, PI / 2.0), right(50.0, PI / 2.0), st(150.0), left(60.0, PI / 2.0), st(60.0), right(100.0, PI / 4.0)]),
        t(vec![st(120.0), right(40.0, PI / 2.0), st(60.0), right(45.0, PI / 2.0), st(100.0), left(80.0, PI), st(80.0)]),
        t(vec![st(60.0), left(55.0, PI / 3.0), right(55.0, 2.0 * PI / 3.0), left(55.0, PI / 3.0), st(120.0), right(150.0, PI / 2.0), left(70.0, PI / 2.0), st(100.0)]),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn training_track_closes() {
        let (x, y, h) = training_track().end_pose();
        assert!(x.abs() < 1e-9 && y.abs() < 1e-9, "({x}, {y})");
        assert!((h - 2.0 * PI).abs() < 1e-12);
    }

    #[test]
    fn json_round_trip() {
        let text = r#"{"width": 10, "segments": [{"kind":"straight","len":50},{"kind":"arc","r":60,"sweep":1.5,"dir":"L"}]}"#;
        let t = TrackSpec::from_json(text).unwrap();
        assert_eq!(t.segments[1], left(60.0, 1.5));
        assert_eq!(TrackSpec::from_json(&serde_json::to_string(&t).unwrap()).unwrap(), t);
        assert!(TrackSpec::from_json(r#"{"width": 0, "segments": [{"kind":"straight","len":5}]}"#).is_err());
        assert!(TrackSpec::from_json(r#"{"width": 10, "segments": [{"kind":"loop","len":5}]}"#).is_err());
    }

    #[test]
    fn curvature_lookup_wraps() {
        let t = training_track();
        assert_eq!(t.curvature_at(10.0), 0.0);
        assert_eq!(t.curvature_at(151.0), 1.0 / 80.0);
        assert_eq!(t.curvature_at(t.length() + 10.0), 0.0);
        for tt in test_tracks() {
            tt.validate().unwrap();
            assert!(tt.length() > 500.0);
        }
    }
}
