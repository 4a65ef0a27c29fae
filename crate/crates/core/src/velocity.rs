//! Prescribed affine velocity fields `V(x, y) = offset + grad * (x, y)`.

use std::fmt;
use std::str::FromStr;

use crate::error::AmotError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldKind {
    Sheering,
    Expanding,
    Custom,
}

/// Affine velocity with an analytic divergence (the trace of `grad`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VelocityField {
    pub kind: FieldKind,
    pub offset: [f64; 2],
    /// `grad[i][j] = dV_i / dx_j`
    pub grad: [[f64; 2]; 2],
}

impl VelocityField {
    /// `V = (0, -100 x)`, divergence free.
    pub fn sheering() -> Self {
        VelocityField {
            kind: FieldKind::Sheering,
            offset: [0.0, 0.0],
            grad: [[0.0, 0.0], [-100.0, 0.0]],
        }
    }

    /// `V = (10 x, 10 y)`, divergence 20.
    pub fn expanding() -> Self {
        VelocityField {
            kind: FieldKind::Expanding,
            offset: [0.0, 0.0],
            grad: [[10.0, 0.0], [0.0, 10.0]],
        }
    }

    pub fn zero() -> Self {
        Self::custom([0.0, 0.0], [[0.0, 0.0], [0.0, 0.0]])
    }

    pub fn custom(offset: [f64; 2], grad: [[f64; 2]; 2]) -> Self {
        VelocityField {
            kind: FieldKind::Custom,
            offset,
            grad,
        }
    }

    #[inline]
    pub fn at(&self, x: f64, y: f64) -> [f64; 2] {
        [
            self.offset[0] + self.grad[0][0] * x + self.grad[0][1] * y,
            self.offset[1] + self.grad[1][0] * x + self.grad[1][1] * y,
        ]
    }

    #[inline]
    pub fn divergence(&self, _x: f64, _y: f64) -> f64 {
        self.grad[0][0] + self.grad[1][1]
    }

    pub fn is_zero(&self) -> bool {
        self.offset == [0.0, 0.0] && self.grad == [[0.0, 0.0], [0.0, 0.0]]
    }

    /// Parses `"vx0,vx_x,vx_y,vy0,vy_x,vy_y"`.
    pub fn parse_affine(s: &str) -> Result<Self, AmotError> {
        let vals: Vec<f64> = s
            .split(',')
            .map(|t| t.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| AmotError::InvalidArgument(format!("velocity '{s}': {e}")))?;
        if vals.len() != 6 || vals.iter().any(|v| !v.is_finite()) {
            return Err(AmotError::InvalidArgument(format!(
                "velocity '{s}': expected 6 finite comma-separated numbers"
            )));
        }
        Ok(Self::custom(
            [vals[0], vals[3]],
            [[vals[1], vals[2]], [vals[4], vals[5]]],
        ))
    }
}

impl fmt::Display for FieldKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FieldKind::Sheering => "sheering",
            FieldKind::Expanding => "expanding",
            FieldKind::Custom => "custom",
        })
    }
}

impl FromStr for FieldKind {
    type Err = AmotError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "sheering" => Ok(FieldKind::Sheering),
            "expanding" => Ok(FieldKind::Expanding),
            "custom" => Ok(FieldKind::Custom),
            other => Err(AmotError::InvalidArgument(format!("unknown experiment '{other}'"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd_divergence(v: &VelocityField, x: f64, y: f64) -> f64 {
        // Central differences are exact for affine fields; a wide step keeps rounding small.
        let h = 0.125;
        let dx = (v.at(x + h, y)[0] - v.at(x - h, y)[0]) / (2.0 * h);
        let dy = (v.at(x, y + h)[1] - v.at(x, y - h)[1]) / (2.0 * h);
        dx + dy
    }

    #[test]
    fn preset_divergences_match_field() {
        for v in [VelocityField::sheering(), VelocityField::expanding()] {
            for &(x, y) in &[(0.3, -0.7), (-0.9, 0.1), (0.0, 0.0), (1.0, 1.0)] {
                assert!((v.divergence(x, y) - fd_divergence(&v, x, y)).abs() < 1e-10);
            }
        }
        assert_eq!(VelocityField::sheering().divergence(0.2, 0.2), 0.0);
        assert_eq!(VelocityField::expanding().divergence(0.2, 0.2), 20.0);
    }

    #[test]
    fn preset_values() {
        assert_eq!(VelocityField::sheering().at(0.5, 0.3), [0.0, -50.0]);
        assert_eq!(VelocityField::expanding().at(0.5, -0.3), [5.0, -3.0]);
    }

    #[test]
    fn parse_affine_roundtrip() {
        let v = VelocityField::parse_affine("1, 2, 3, 4, 5, 6").unwrap();
        assert_eq!(v.at(0.0, 0.0), [1.0, 4.0]);
        assert_eq!(v.at(1.0, 0.0), [3.0, 9.0]);
        assert_eq!(v.divergence(0.0, 0.0), 8.0);
        assert!(VelocityField::parse_affine("1,2,3").is_err());
        assert!(VelocityField::parse_affine("1,2,3,4,5,x").is_err());
    }
}
