use serde::{Deserialize, Serialize};

/// A point in the chart of some model space.
///
/// Coordinate meaning is space-specific: Cartesian coordinates for normed
/// spaces, `(radius, angle)` for cones, a unit 3-vector for the sphere, and
/// the concatenation of factor charts for products.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointChart {
    pub coords: Vec<f64>,
}

impl PointChart {
    pub fn new(coords: Vec<f64>) -> Self {
        Self { coords }
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.coords
    }
}

impl From<Vec<f64>> for PointChart {
    fn from(coords: Vec<f64>) -> Self {
        Self { coords }
    }
}

impl From<&[f64]> for PointChart {
    fn from(coords: &[f64]) -> Self {
        Self {
            coords: coords.to_vec(),
        }
    }
}
