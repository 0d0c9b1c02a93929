use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::linalg::C64;
use crate::model::forward::ContrastImage;
use crate::model::setup::GridGeometry;

/// Test objects. Sizes are relative to the side `L` of the imaging domain
/// (one wavelength in the standard setup).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PhantomKind {
    /// Concentric squares: side `L/2` at `1 − 0.5j`, side `L/4` at `0.5 − j`.
    SmallSquare,
    /// [`PhantomKind::SmallSquare`] with contrasts multiplied by 3.
    LargeSquare,
    /// Disc of radius `L/2` with contrast 2.
    Circular,
    /// Centered disc of given contrast and radius in meters.
    Homogeneous { contrast: C64, radius: f64 },
}

impl PhantomKind {
    /// `(outer, inner)` contrasts of the square phantoms.
    fn square_contrasts(scale: f64) -> (C64, C64) {
        (C64::new(1.0, -0.5) * scale, C64::new(0.5, -1.0) * scale)
    }
}

impl FromStr for PhantomKind {
    type Err = Error;

    /// Accepts `small-square`, `large-square`, `circular` and
    /// `homogeneous(<re>,<im>,<radius_m>)`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s {
            "small-square" => return Ok(Self::SmallSquare),
            "large-square" => return Ok(Self::LargeSquare),
            "circular" => return Ok(Self::Circular),
            _ => {}
        }
        let args = s
            .strip_prefix("homogeneous(")
            .and_then(|rest| rest.strip_suffix(')'))
            .ok_or_else(|| Error::config(format!("unknown phantom kind `{s}`")))?;
        let nums: Vec<f64> = args
            .split(',')
            .map(|t| t.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::config(format!("bad homogeneous phantom `{s}`: {e}")))?;
        match nums[..] {
            [re, im, radius] if radius > 0.0 => Ok(Self::Homogeneous { contrast: C64::new(re, im), radius }),
            _ => Err(Error::config(format!(
                "homogeneous phantom needs (re, im, radius > 0), got `{s}`"
            ))),
        }
    }
}

impl fmt::Display for PhantomKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::SmallSquare => f.write_str("small-square"),
            Self::LargeSquare => f.write_str("large-square"),
            Self::Circular => f.write_str("circular"),
            Self::Homogeneous { contrast, radius } => {
                write!(f, "homogeneous({},{},{})", contrast.re, contrast.im, radius)
            }
        }
    }
}

/// Samples the phantom at the cell centers.
pub fn make_phantom(kind: PhantomKind, grid: &GridGeometry) -> ContrastImage {
    let side = grid.domain_side();
    let eps = 1e-9 * side;
    let in_square = |c: &[f64; 2], s: f64| c[0].abs() <= 0.5 * s + eps && c[1].abs() <= 0.5 * s + eps;
    let in_disc = |c: &[f64; 2], r: f64| c[0].hypot(c[1]) <= r + eps;
    let values = grid
        .cell_centers
        .iter()
        .map(|c| match kind {
            PhantomKind::SmallSquare | PhantomKind::LargeSquare => {
                let scale = if kind == PhantomKind::LargeSquare { 3.0 } else { 1.0 };
                let (outer, inner) = PhantomKind::square_contrasts(scale);
                if in_square(c, 0.25 * side) {
                    inner
                } else if in_square(c, 0.5 * side) {
                    outer
                } else {
                    C64::new(0.0, 0.0)
                }
            }
            PhantomKind::Circular => {
                if in_disc(c, 0.5 * side) {
                    C64::new(2.0, 0.0)
                } else {
                    C64::new(0.0, 0.0)
                }
            }
            PhantomKind::Homogeneous { contrast, radius } => {
                if in_disc(c, radius) {
                    contrast
                } else {
                    C64::new(0.0, 0.0)
                }
            }
        })
        .collect();
    ContrastImage { values }
}
