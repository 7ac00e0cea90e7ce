//! A posteriori error estimation: the bubble estimator and a residual-based
//! comparator.

pub mod blocks;
pub mod bubbles;
pub mod residual;

use thiserror::Error;

use crate::geometry::GeometryError;
use crate::hierarchy::ElementId;
use crate::plate::AssemblyError;

pub use blocks::{assemble_block, assemble_blocks, estimate, eta_elements, solve_blocks, BubbleBlock, Estimate};
pub use bubbles::{build_bubble_space, element_bubbles, BubbleSpace, BubbleValues, NeumannSides};
pub use residual::{edge_neighbors, regularize, residual_estimator, RegularizedLoad};

#[derive(Debug, Error)]
pub enum EstimateError {
    #[error("bubble spaces need degree >= 3, got {0}")]
    UnsupportedDegree(usize),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Assembly(#[from] AssemblyError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("bubble block of element {element:?} is not positive definite")]
    BlockNotSpd { element: ElementId },
    #[error("effectivity index undefined: exact error is zero")]
    UndefinedEffectivity,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElementEstimate {
    pub element: ElementId,
    pub eta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EffectivityReport {
    pub eta_total: f64,
    pub error: f64,
    pub theta: f64,
}

/// `θ = η / ‖u - u_h‖_E`
pub fn effectivity(eta_total: f64, error: f64) -> Result<EffectivityReport, EstimateError> {
    if error <= 0.0 || !error.is_finite() {
        return Err(EstimateError::UndefinedEffectivity);
    }
    Ok(EffectivityReport {
        eta_total,
        error,
        theta: eta_total / error,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn effectivity_examples() {
        assert_eq!(effectivity(2.0, 1.0).unwrap().theta, 2.0);
        assert!(matches!(effectivity(1.0, 0.0), Err(EstimateError::UndefinedEffectivity)));
    }
}
