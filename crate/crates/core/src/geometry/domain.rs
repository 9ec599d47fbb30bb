use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Computational domains. `ThinRectangle` is geometrically the rectangle
/// `(a, b) x (0, mu)` but keeps `mu` around for scaling experiments.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case")]
pub enum Domain {
    Interval { a: f64, b: f64 },
    Rectangle { width: f64, height: f64 },
    Disk { radius: f64 },
    ThinRectangle { a: f64, b: f64, mu: f64 },
}

impl Domain {
    pub fn validate(&self) -> Result<()> {
        let ok = |c: bool, msg: &str| {
            if c && self.params_finite() {
                Ok(())
            } else {
                Err(Error::InvalidDomain(msg.to_string()))
            }
        };
        match *self {
            Domain::Interval { a, b } => ok(a < b, "interval requires a < b"),
            Domain::Rectangle { width, height } => ok(width > 0.0 && height > 0.0, "rectangle sides must be positive"),
            Domain::Disk { radius } => ok(radius > 0.0, "disk radius must be positive"),
            Domain::ThinRectangle { a, b, mu } => ok(a < b && mu > 0.0, "thin rectangle requires a < b and mu > 0"),
        }
    }

    fn params_finite(&self) -> bool {
        match *self {
            Domain::Interval { a, b } => a.is_finite() && b.is_finite(),
            Domain::Rectangle { width, height } => width.is_finite() && height.is_finite(),
            Domain::Disk { radius } => radius.is_finite(),
            Domain::ThinRectangle { a, b, mu } => a.is_finite() && b.is_finite() && mu.is_finite(),
        }
    }

    /// Topological dimension N of the domain.
    pub fn dim(&self) -> usize {
        match self {
            Domain::Interval { .. } => 1,
            _ => 2,
        }
    }

    /// H^N of the continuum domain.
    pub fn volume(&self) -> f64 {
        match *self {
            Domain::Interval { a, b } => b - a,
            Domain::Rectangle { width, height } => width * height,
            Domain::Disk { radius } => std::f64::consts::PI * radius * radius,
            Domain::ThinRectangle { a, b, mu } => (b - a) * mu,
        }
    }

    /// H^{N-1} of the continuum boundary (counting measure in 1D).
    pub fn boundary_measure(&self) -> f64 {
        match *self {
            Domain::Interval { .. } => 2.0,
            Domain::Rectangle { width, height } => 2.0 * (width + height),
            Domain::Disk { radius } => 2.0 * std::f64::consts::PI * radius,
            Domain::ThinRectangle { a, b, mu } => 2.0 * (b - a) + 2.0 * mu,
        }
    }

    /// Axis-aligned rectangle `[x0, x1] x [y0, y1]` for the polygonal domains.
    pub(crate) fn box_bounds(&self) -> Option<[f64; 4]> {
        match *self {
            Domain::Rectangle { width, height } => Some([0.0, width, 0.0, height]),
            Domain::ThinRectangle { a, b, mu } => Some([a, b, 0.0, mu]),
            _ => None,
        }
    }

    /// Distance from an interior point to the continuum boundary.
    pub fn distance_to_boundary(&self, x: [f64; 2]) -> f64 {
        match *self {
            Domain::Interval { a, b } => (x[0] - a).min(b - x[0]),
            Domain::Disk { radius } => radius - x[0].hypot(x[1]),
            _ => {
                let [x0, x1, y0, y1] = self.box_bounds().unwrap();
                (x[0] - x0).min(x1 - x[0]).min(x[1] - y0).min(y1 - x[1])
            }
        }
    }
}
