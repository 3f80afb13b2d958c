//! Problem data: the fields A(x), V^2(x), beta(x), the volume forcing f and
//! the Robin boundary data g, together with their declared bounds.
//!
//! Coefficients are evaluated pointwise at quadrature nodes; there is no
//! projection onto the mesh. Evaluators must be pure functions of position.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::mesh::{MeshHierarchy, MeshLevel};
use crate::quadrature::GAUSS_3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Smoothness {
    Smooth,
    PiecewiseConstant,
}

type EvalFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;
type GradFn = Arc<dyn Fn(f64, f64) -> [f64; 2] + Send + Sync>;
type ComplexEvalFn = Arc<dyn Fn(f64, f64) -> Complex64 + Send + Sync>;

/// A real scalar coefficient field with declared bounds and, for the smooth
/// families, an analytic gradient.
#[derive(Clone)]
pub struct ScalarField {
    eval: EvalFn,
    grad: Option<GradFn>,
    pub declared_min: f64,
    pub declared_max: f64,
    pub smoothness: Smoothness,
}

impl fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ScalarField")
            .field("declared_min", &self.declared_min)
            .field("declared_max", &self.declared_max)
            .field("smoothness", &self.smoothness)
            .finish()
    }
}

impl ScalarField {
    pub fn new(
        eval: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
        min: f64,
        max: f64,
        smoothness: Smoothness,
    ) -> Self {
        ScalarField {
            eval: Arc::new(eval),
            grad: None,
            declared_min: min,
            declared_max: max,
            smoothness,
        }
    }

    pub fn with_gradient(mut self, grad: impl Fn(f64, f64) -> [f64; 2] + Send + Sync + 'static) -> Self {
        self.grad = Some(Arc::new(grad));
        self
    }

    pub fn constant(value: f64) -> Self {
        ScalarField::new(move |_, _| value, value, value, Smoothness::Smooth).with_gradient(|_, _| [0.0, 0.0])
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        (self.eval)(x, y)
    }

    /// Analytic gradient when the family provides one.
    pub fn gradient(&self, x: f64, y: f64) -> Option<[f64; 2]> {
        self.grad.as_ref().map(|g| g(x, y))
    }

    pub fn has_gradient(&self) -> bool {
        self.grad.is_some()
    }

    /// Evaluate and check against the declared bounds
    /// (tolerance 1e-12 * |declared_max|).
    pub fn eval_checked(&self, x: f64, y: f64) -> Result<f64> {
        let v = self.eval(x, y);
        let tol = 1e-12 * self.declared_max.abs();
        if v < self.declared_min - tol || v > self.declared_max + tol {
            return Err(Error::BoundViolation {
                x,
                y,
                value: v,
                min: self.declared_min,
                max: self.declared_max,
            });
        }
        Ok(v)
    }
}

/// A complex-valued field (volume forcing or boundary data).
#[derive(Clone)]
pub struct ComplexField {
    eval: ComplexEvalFn,
}

impl fmt::Debug for ComplexField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("ComplexField")
    }
}

impl ComplexField {
    pub fn new(eval: impl Fn(f64, f64) -> Complex64 + Send + Sync + 'static) -> Self {
        ComplexField { eval: Arc::new(eval) }
    }

    pub fn zero() -> Self {
        ComplexField::new(|_, _| Complex64::ZERO)
    }

    pub fn eval(&self, x: f64, y: f64) -> Complex64 {
        (self.eval)(x, y)
    }
}

/// The full problem data set for one Helmholtz run.
#[derive(Debug, Clone)]
pub struct CoefficientSet {
    pub diffusion_a: ScalarField,
    pub refraction_v2: ScalarField,
    pub impedance_beta: ScalarField,
    pub volume_forcing: ComplexField,
    pub robin_data: ComplexField,
    pub wavenumber: f64,
}

impl CoefficientSet {
    pub fn validate(&self) -> Result<()> {
        for (name, f) in [
            ("A", &self.diffusion_a),
            ("V^2", &self.refraction_v2),
            ("beta", &self.impedance_beta),
        ] {
            if f.declared_min <= 0.0 {
                return Err(Error::InvalidCoefficient(format!(
                    "declared lower bound of {name} must be positive"
                )));
            }
            if f.declared_max < f.declared_min {
                return Err(Error::InvalidCoefficient(format!("declared bounds of {name} are inverted")));
            }
        }
        if self.wavenumber <= 0.0 {
            return Err(Error::InvalidCoefficient("wave number k must be positive".into()));
        }
        Ok(())
    }

    pub fn with_wavenumber(mut self, k: f64) -> Self {
        self.wavenumber = k;
        self
    }

    pub fn with_forcing(mut self, f: ComplexField) -> Self {
        self.volume_forcing = f;
        self
    }
}

/// The built-in example coefficient families.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExampleId {
    /// A = 1, V^2 = sin(2 pi r / eps)/2 + 5.
    Example1,
    /// A = V^2 = exp(alpha (sin(r / eps) + delta)).
    Example2,
    /// A = 1, V^2 = 2 except 1 on periodically placed square blocks.
    Example3,
    /// A = V^2 = beta = 1.
    Constant,
}

impl ExampleId {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "example1" => Ok(ExampleId::Example1),
            "example2" => Ok(ExampleId::Example2),
            "example3" => Ok(ExampleId::Example3),
            "constant" => Ok(ExampleId::Constant),
            other => Err(Error::InvalidConfig(format!("unknown coefficient id `{other}`"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ExampleId::Example1 => "example1",
            ExampleId::Example2 => "example2",
            ExampleId::Example3 => "example3",
            ExampleId::Constant => "constant",
        }
    }
}

/// Parameters for the built-in families. Unused fields are ignored.
#[derive(Debug, Clone, Copy)]
pub struct ExampleParams {
    /// Oscillation length eps (examples 1 and 2).
    pub epsilon: f64,
    /// Amplitude alpha (example 2).
    pub alpha: f64,
    /// Offset delta (example 2).
    pub delta: f64,
    /// Center x0 of the radial families; defaults to the domain center.
    pub center: [f64; 2],
    /// Blocks per axis (example 3).
    pub blocks_per_axis: usize,
    /// Area fraction occupied by the blocks (example 3).
    pub block_area_fraction: f64,
    /// Domain origin and extent used to place the blocks.
    pub domain_origin: [f64; 2],
    pub domain_extent: [f64; 2],
}

impl Default for ExampleParams {
    fn default() -> Self {
        ExampleParams {
            epsilon: 1.0,
            alpha: 0.08,
            delta: 1.0,
            center: [0.0, 0.0],
            blocks_per_axis: 8,
            block_area_fraction: 0.25,
            domain_origin: [-1.0, -1.0],
            domain_extent: [2.0, 2.0],
        }
    }
}

/// Build one of the built-in coefficient sets. Forcing defaults to zero and
/// k to 1; callers override both.
pub fn builtin_example(id: ExampleId, params: &ExampleParams) -> Result<CoefficientSet> {
    let base = CoefficientSet {
        diffusion_a: ScalarField::constant(1.0),
        refraction_v2: ScalarField::constant(1.0),
        impedance_beta: ScalarField::constant(1.0),
        volume_forcing: ComplexField::zero(),
        robin_data: ComplexField::zero(),
        wavenumber: 1.0,
    };
    let set = match id {
        ExampleId::Constant => base,
        ExampleId::Example1 => {
            let eps = params.epsilon;
            if eps <= 0.0 {
                return Err(Error::InvalidCoefficient("epsilon must be positive".into()));
            }
            let [cx, cy] = params.center;
            let v2 = ScalarField::new(
                move |x, y| 0.5 * (2.0 * std::f64::consts::PI * (x - cx).hypot(y - cy) / eps).sin() + 5.0,
                4.5,
                5.5,
                Smoothness::Smooth,
            )
            .with_gradient(move |x, y| {
                let r = (x - cx).hypot(y - cy);
                if r == 0.0 {
                    return [0.0, 0.0];
                }
                let dr = std::f64::consts::PI / eps * (2.0 * std::f64::consts::PI * r / eps).cos();
                [dr * (x - cx) / r, dr * (y - cy) / r]
            });
            CoefficientSet { refraction_v2: v2, ..base }
        }
        ExampleId::Example2 => {
            let (eps, alpha, delta) = (params.epsilon, params.alpha, params.delta);
            if eps <= 0.0 || alpha <= 0.0 || delta <= 0.0 {
                return Err(Error::InvalidCoefficient(
                    "epsilon, alpha and delta must be positive".into(),
                ));
            }
            let [cx, cy] = params.center;
            let make = move || {
                ScalarField::new(
                    move |x, y| (alpha * (((x - cx).hypot(y - cy) / eps).sin() + delta)).exp(),
                    (alpha * (delta - 1.0)).exp(),
                    (alpha * (delta + 1.0)).exp(),
                    Smoothness::Smooth,
                )
                .with_gradient(move |x, y| {
                    let r = (x - cx).hypot(y - cy);
                    if r == 0.0 {
                        return [0.0, 0.0];
                    }
                    let v = (alpha * ((r / eps).sin() + delta)).exp();
                    let dr = v * alpha / eps * (r / eps).cos();
                    [dr * (x - cx) / r, dr * (y - cy) / r]
                })
            };
            CoefficientSet {
                diffusion_a: make(),
                refraction_v2: make(),
                ..base
            }
        }
        ExampleId::Example3 => {
            let p = params.blocks_per_axis;
            if p == 0 {
                return Err(Error::InvalidCoefficient("block count must be positive".into()));
            }
            if !(0.0..=1.0).contains(&params.block_area_fraction) {
                return Err(Error::InvalidCoefficient("block area fraction must lie in [0, 1]".into()));
            }
            let [ox, oy] = params.domain_origin;
            let [lx, ly] = params.domain_extent;
            // p x p lattice of axis-aligned squares centered on the lattice
            // cells, sized so the blocks occupy the requested area fraction
            let frac = params.block_area_fraction.sqrt();
            let v2 = ScalarField::new(
                move |x, y| {
                    let tx = ((x - ox) / lx * p as f64).rem_euclid(1.0);
                    let ty = ((y - oy) / ly * p as f64).rem_euclid(1.0);
                    let inside = (tx - 0.5).abs() < frac / 2.0 && (ty - 0.5).abs() < frac / 2.0;
                    if inside {
                        1.0
                    } else {
                        2.0
                    }
                },
                1.0,
                2.0,
                Smoothness::PiecewiseConstant,
            );
            CoefficientSet { refraction_v2: v2, ..base }
        }
    };
    set.validate()?;
    Ok(set)
}

/// The approximate point source: a smooth bump supported on |x - c| < radius.
pub fn bump_forcing(center: [f64; 2], radius: f64) -> ComplexField {
    assert!(radius > 0.0, "bump radius must be positive");
    ComplexField::new(move |x, y| {
        let s = (x - center[0]).hypot(y - center[1]) / radius;
        if s < 1.0 {
            Complex64::new((-1.0 / (1.0 - s * s)).exp(), 0.0)
        } else {
            Complex64::ZERO
        }
    })
}

/// Min/max of a field over all fine-level quadrature points of the mesh.
/// Errors if any sample violates the declared bounds.
pub fn field_bounds(field: &ScalarField, mesh: &MeshHierarchy) -> Result<(f64, f64)> {
    let g = mesh.grid(MeshLevel::Fine);
    let (hx, hy) = (g.hx(), g.hy());
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    for c in 0..g.n_cells() {
        let o = g.cell_origin(c);
        for &(qx, _) in GAUSS_3.iter() {
            for &(qy, _) in GAUSS_3.iter() {
                let v = field.eval_checked(o[0] + qx * hx, o[1] + qy * hy)?;
                min = min.min(v);
                max = max.max(v);
            }
        }
    }
    Ok((min, max))
}
