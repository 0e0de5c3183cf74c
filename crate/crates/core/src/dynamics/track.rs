use serde::{Deserialize, Serialize};

use super::StepError;

/// One constant-curvature piece of the centerline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrackSegment {
    /// Arclength, m.
    pub length: f64,
    /// Signed curvature, 1/m. Positive turns left.
    pub curvature: f64,
}

/// Closed track described by a piecewise-constant curvature table.
///
/// Arclength wraps modulo [`TrackGeometry::total_length`].
#[derive(Debug, Clone, PartialEq)]
pub struct TrackGeometry {
    segments: Vec<TrackSegment>,
    starts: Vec<f64>,
    total_length: f64,
    /// Half of the drivable width `w_I`, m.
    pub half_width: f64,
    /// Lateral offset beyond which the vehicle has crashed, `w_O`, m.
    pub crash_width: f64,
}

impl TrackGeometry {
    pub fn new(
        segments: Vec<TrackSegment>,
        half_width: f64,
        crash_width: f64,
    ) -> Result<Self, StepError> {
        if segments.is_empty() {
            return Err(StepError::InvalidParameter("track has no segments".into()));
        }
        if segments
            .iter()
            .any(|s| !(s.length.is_finite() && s.length > 0.0 && s.curvature.is_finite()))
        {
            return Err(StepError::InvalidParameter(
                "track segments need finite positive length and finite curvature".into(),
            ));
        }
        if !(0.0 < half_width && half_width < crash_width) {
            return Err(StepError::InvalidParameter(format!(
                "track widths must satisfy 0 < w_I < w_O, got {half_width} and {crash_width}"
            )));
        }
        let mut starts = Vec::with_capacity(segments.len());
        let mut acc = 0.0;
        for seg in &segments {
            starts.push(acc);
            acc += seg.length;
        }
        Ok(Self {
            segments,
            starts,
            total_length: acc,
            half_width,
            crash_width,
        })
    }

    /// A mixed-radius synthetic circuit: two gentle turns, a tight 6 m turn,
    /// a chicane and a 7 m hairpin. Net heading change is one full turn.
    pub fn synthetic_circuit() -> Self {
        use std::f64::consts::{FRAC_PI_2, PI};
        let arc = |radius: f64, angle: f64| TrackSegment {
            length: radius * angle,
            curvature: angle.signum() / radius,
        };
        let straight = |length: f64| TrackSegment {
            length,
            curvature: 0.0,
        };
        let segments = vec![
            straight(25.0),
            arc(12.0, FRAC_PI_2),
            straight(10.0),
            arc(6.0, FRAC_PI_2),
            straight(20.0),
            TrackSegment {
                length: 8.0 * FRAC_PI_2,
                curvature: -1.0 / 8.0,
            },
            arc(8.0, FRAC_PI_2),
            straight(8.0),
            arc(7.0, PI),
        ];
        Self::new(segments, 1.5, 1.8).expect("built-in track is valid")
    }

    /// A single straight of the given length (useful for tests).
    pub fn straight(length: f64, half_width: f64, crash_width: f64) -> Result<Self, StepError> {
        Self::new(
            vec![TrackSegment {
                length,
                curvature: 0.0,
            }],
            half_width,
            crash_width,
        )
    }

    /// A circle of constant curvature `rho`.
    pub fn circle(rho: f64, half_width: f64, crash_width: f64) -> Result<Self, StepError> {
        Self::new(
            vec![TrackSegment {
                length: 2.0 * std::f64::consts::PI / rho.abs(),
                curvature: rho,
            }],
            half_width,
            crash_width,
        )
    }

    pub fn segments(&self) -> &[TrackSegment] {
        &self.segments
    }

    pub fn total_length(&self) -> f64 {
        self.total_length
    }

    pub fn wrap(&self, s: f64) -> f64 {
        let w = s.rem_euclid(self.total_length);
        // rem_euclid can round up to the modulus itself
        if w >= self.total_length {
            0.0
        } else {
            w
        }
    }

    pub fn segment_index(&self, s: f64) -> usize {
        let s = self.wrap(s);
        match self
            .starts
            .binary_search_by(|start| start.partial_cmp(&s).expect("finite arclength"))
        {
            Ok(i) => i,
            Err(i) => i - 1,
        }
    }

    pub fn curvature(&self, s: f64) -> f64 {
        self.segments[self.segment_index(s)].curvature
    }

    /// Signed arclength difference `a - b` folded into `(-L/2, L/2]`.
    pub fn arclength_delta(&self, a: f64, b: f64) -> f64 {
        let l = self.total_length;
        let d = (a - b).rem_euclid(l);
        if d > 0.5 * l {
            d - l
        } else {
            d
        }
    }

    /// Cartesian pose `(x, y, heading)` of the centerline at `s`, starting
    /// from the origin heading along +x.
    pub fn centerline_pose(&self, s: f64) -> (f64, f64, f64) {
        let s = self.wrap(s);
        let (mut x, mut y, mut psi) = (0.0_f64, 0.0_f64, 0.0_f64);
        for (seg, start) in self.segments.iter().zip(&self.starts) {
            let len = (s - start).min(seg.length);
            if len <= 0.0 {
                break;
            }
            let k = seg.curvature;
            if k.abs() < 1e-12 {
                x += len * psi.cos();
                y += len * psi.sin();
            } else {
                let psi_end = psi + k * len;
                x += (psi_end.sin() - psi.sin()) / k;
                y -= (psi_end.cos() - psi.cos()) / k;
                psi = psi_end;
            }
        }
        (x, y, psi)
    }

    /// Maps curvilinear `(s, e_y)` to Cartesian `(x, y)`.
    pub fn to_cartesian(&self, s: f64, e_y: f64) -> (f64, f64) {
        let (x, y, psi) = self.centerline_pose(s);
        (x - e_y * psi.sin(), y + e_y * psi.cos())
    }
}
