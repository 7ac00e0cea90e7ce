use std::fmt;
use std::sync::Arc;

use crate::hierarchy::Side;

/// Scalar field on the physical domain.
pub type ScalarField = Arc<dyn Fn([f64; 2]) -> f64 + Send + Sync>;

/// Hessian field `[h_xx, h_xy, h_yy]` on the physical domain.
pub type HessianField = Arc<dyn Fn([f64; 2]) -> [f64; 3] + Send + Sync>;

/// Prescribed boundary data along one side.
#[derive(Clone)]
pub enum BoundaryValue {
    Zero,
    Function(ScalarField),
}

impl BoundaryValue {
    pub fn function(f: impl Fn([f64; 2]) -> f64 + Send + Sync + 'static) -> Self {
        BoundaryValue::Function(Arc::new(f))
    }

    pub fn eval(&self, x: [f64; 2]) -> f64 {
        match self {
            BoundaryValue::Zero => 0.0,
            BoundaryValue::Function(f) => f(x),
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, BoundaryValue::Zero)
    }
}

impl fmt::Debug for BoundaryValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BoundaryValue::Zero => write!(f, "Zero"),
            BoundaryValue::Function(_) => write!(f, "Function(..)"),
        }
    }
}

/// Either the deflection (essential) or the effective shear (natural) is given.
#[derive(Clone, Debug)]
pub enum Transverse {
    Deflection(BoundaryValue),
    Shear(BoundaryValue),
}

/// Either the rotation `-grad u . d` (essential) or the bending moment
/// (natural) is given.
#[derive(Clone, Debug)]
pub enum Rotational {
    Rotation(BoundaryValue),
    Moment(BoundaryValue),
}

#[derive(Clone, Debug)]
pub struct SideCondition {
    pub transverse: Transverse,
    pub rotational: Rotational,
}

impl SideCondition {
    /// `u = 0`, `M = 0`.
    pub fn simply_supported() -> Self {
        Self {
            transverse: Transverse::Deflection(BoundaryValue::Zero),
            rotational: Rotational::Moment(BoundaryValue::Zero),
        }
    }

    /// `u = 0`, `du/dn = 0`.
    pub fn clamped() -> Self {
        Self {
            transverse: Transverse::Deflection(BoundaryValue::Zero),
            rotational: Rotational::Rotation(BoundaryValue::Zero),
        }
    }

    /// `Q = 0`, `M = 0`.
    pub fn free() -> Self {
        Self {
            transverse: Transverse::Shear(BoundaryValue::Zero),
            rotational: Rotational::Moment(BoundaryValue::Zero),
        }
    }

    pub fn has_deflection(&self) -> bool {
        matches!(self.transverse, Transverse::Deflection(_))
    }

    pub fn has_rotation(&self) -> bool {
        matches!(self.rotational, Rotational::Rotation(_))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PointLoad {
    pub location: [f64; 2],
    pub magnitude: f64,
}

/// Rule for `∫ g v` on elements touching the domain boundary.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum LoadQuadrature {
    /// The element rule everywhere.
    #[default]
    Standard,
    /// Elements on the boundary are split geometrically towards it, halving
    /// `layers` times, with the element rule on every piece. For loads that
    /// blow up (integrably) at the boundary.
    BoundaryGraded { layers: usize },
}

/// Kirchhoff plate `D Δ²u = g` with per-side boundary conditions.
///
/// Each side carries exactly one of {deflection, shear} and one of
/// {rotation, moment}, so the boundary partitions hold by construction.
#[derive(Clone)]
pub struct PlateProblem {
    /// Bending stiffness.
    pub d: f64,
    /// Poisson ratio.
    pub nu: f64,
    pub load: Option<ScalarField>,
    /// Indexed by [`Side::index`].
    pub sides: [SideCondition; 4],
    pub point_loads: Vec<PointLoad>,
    pub load_quadrature: LoadQuadrature,
}

impl fmt::Debug for PlateProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PlateProblem")
            .field("d", &self.d)
            .field("nu", &self.nu)
            .field("load", &self.load.as_ref().map(|_| ".."))
            .field("sides", &self.sides)
            .field("point_loads", &self.point_loads)
            .field("load_quadrature", &self.load_quadrature)
            .finish()
    }
}

impl PlateProblem {
    /// Unloaded plate with `D = 1`, `ν = 0` and the same condition on all sides.
    pub fn new(side: SideCondition) -> Self {
        Self {
            d: 1.0,
            nu: 0.0,
            load: None,
            sides: [side.clone(), side.clone(), side.clone(), side],
            point_loads: Vec::new(),
            load_quadrature: LoadQuadrature::Standard,
        }
    }

    pub fn with_load(mut self, g: impl Fn([f64; 2]) -> f64 + Send + Sync + 'static) -> Self {
        self.load = Some(Arc::new(g));
        self
    }

    pub fn with_side(mut self, side: Side, cond: SideCondition) -> Self {
        self.sides[side.index()] = cond;
        self
    }

    pub fn with_point_load(mut self, location: [f64; 2], magnitude: f64) -> Self {
        self.point_loads.push(PointLoad { location, magnitude });
        self
    }

    pub fn with_load_quadrature(mut self, q: LoadQuadrature) -> Self {
        self.load_quadrature = q;
        self
    }

    pub fn with_material(mut self, d: f64, nu: f64) -> Self {
        self.d = d;
        self.nu = nu;
        self
    }

    pub fn side(&self, side: Side) -> &SideCondition {
        &self.sides[side.index()]
    }

    pub fn load_at(&self, x: [f64; 2]) -> f64 {
        self.load.as_ref().map_or(0.0, |g| g(x))
    }

    /// Bending energy density `D[(1-ν) H(u):H(v) + ν Δu Δv]` for Hessians
    /// given as `[xx, xy, yy]`.
    pub fn energy_density(&self, hu: &[f64; 3], hv: &[f64; 3]) -> f64 {
        let frob = hu[0] * hv[0] + 2.0 * hu[1] * hv[1] + hu[2] * hv[2];
        if self.nu == 0.0 {
            self.d * frob
        } else {
            let lap = (hu[0] + hu[2]) * (hv[0] + hv[2]);
            self.d * ((1.0 - self.nu) * frob + self.nu * lap)
        }
    }
}
