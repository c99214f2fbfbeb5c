//! Compilation of a kinetic model onto a grid.
//!
//! A [`Program`] binds a [`KineticModel`] to a [`Grid`]: it resolves every
//! parameter and kernel mass to a number, validates that the grid resolves
//! every kernel (spacing at most half the smallest feature scale), and
//! owns the spectral engine with its cached kernel transforms. Evaluating
//! the right-hand side walks the expression tree; any non-finite
//! intermediate aborts with the offending node's path so a diverging run
//! names the subexpression that produced the first NaN or infinity.

use crate::error::{Error, Result};
use crate::field::{FieldExpr, KineticModel};

use super::spectral::{DensityField, Grid, Spectral};

/// Executable right-hand side `∂ρ/∂t = F(ρ)` on a fixed grid.
pub struct Program {
    model: KineticModel,
    spectral: Spectral,
}

/// Intermediate value during evaluation: scalars stay scalar until a field
/// node forces them onto the grid.
enum Value {
    Scalar(f64),
    Field(Vec<f64>),
}

impl Program {
    pub fn new(model: KineticModel, grid: Grid) -> Result<Self> {
        let h = grid.h();
        for k in model.kernels.values() {
            let feature = k.feature_scale();
            if h > 0.5 * feature {
                return Err(Error::Config(format!(
                    "grid spacing {h} cannot resolve kernel {} (feature scale {feature}); \
                     need h ≤ {}",
                    k.name,
                    0.5 * feature
                )));
            }
            if k.cutoff_radius() > grid.l / 2.0 {
                return Err(Error::Config(format!(
                    "kernel {} reaches beyond half the box ({} > {}); enlarge the box",
                    k.name,
                    k.cutoff_radius(),
                    grid.l / 2.0
                )));
            }
        }
        let mut spectral = Spectral::new(grid);
        // Materialize all kernel transforms up front so faults surface at
        // construction, not mid-integration.
        for k in model.kernels.values() {
            spectral.kernel_hat(k)?;
        }
        Ok(Program { model, spectral })
    }

    pub fn grid(&self) -> Grid {
        self.spectral.grid()
    }

    pub fn model(&self) -> &KineticModel {
        &self.model
    }

    /// Evaluate the right-hand side at the given density.
    pub fn eval_rhs(&mut self, rho: &DensityField) -> Result<DensityField> {
        assert_eq!(rho.grid, self.grid(), "density lives on a different grid");
        let equation = self.model.equation.clone();
        let v = self.eval(&equation, &rho.data, "rhs")?;
        let data = match v {
            Value::Field(f) => f,
            Value::Scalar(s) => vec![s; self.grid().len()],
        };
        Ok(DensityField { grid: self.grid(), data })
    }

    fn eval(&mut self, expr: &FieldExpr, rho: &[f64], path: &str) -> Result<Value> {
        let out = match expr {
            FieldExpr::Num { value } => Value::Scalar(*value),
            FieldExpr::Param { name } => {
                let v = self.model.params.get(name).copied().ok_or_else(|| {
                    Error::Config(format!("parameter `{name}` has no value (at {path})"))
                })?;
                Value::Scalar(v)
            }
            FieldExpr::Mass { kernel } => {
                let k = self.kernel(kernel, path)?;
                Value::Scalar(k.mass(self.grid().d)?)
            }
            FieldExpr::Rho => Value::Field(rho.to_vec()),
            FieldExpr::Conv { kernel, arg } => {
                let sub = format!("{path}.conv({kernel})");
                let w = match self.eval(arg, rho, &sub)? {
                    Value::Field(f) => f,
                    Value::Scalar(s) => vec![s; self.grid().len()],
                };
                let k = self.kernel(kernel, path)?.clone();
                Value::Field(self.spectral.conv(&k, &w)?)
            }
            FieldExpr::Prod { factors } => {
                let mut scalar = 1.0;
                let mut field: Option<Vec<f64>> = None;
                for (i, f) in factors.iter().enumerate() {
                    let sub = format!("{path}.prod[{i}]");
                    match self.eval(f, rho, &sub)? {
                        Value::Scalar(s) => scalar *= s,
                        Value::Field(g) => match &mut field {
                            None => field = Some(g),
                            Some(acc) => {
                                for (a, b) in acc.iter_mut().zip(&g) {
                                    *a *= b;
                                }
                            }
                        },
                    }
                }
                match field {
                    None => Value::Scalar(scalar),
                    Some(mut f) => {
                        if scalar != 1.0 {
                            for v in &mut f {
                                *v *= scalar;
                            }
                        }
                        Value::Field(f)
                    }
                }
            }
            FieldExpr::Exp { arg } => {
                let sub = format!("{path}.exp");
                match self.eval(arg, rho, &sub)? {
                    Value::Scalar(s) => Value::Scalar(s.exp()),
                    Value::Field(mut f) => {
                        for v in &mut f {
                            *v = v.exp();
                        }
                        Value::Field(f)
                    }
                }
            }
            FieldExpr::Neg { arg } => {
                let sub = format!("{path}.neg");
                match self.eval(arg, rho, &sub)? {
                    Value::Scalar(s) => Value::Scalar(-s),
                    Value::Field(mut f) => {
                        for v in &mut f {
                            *v = -*v;
                        }
                        Value::Field(f)
                    }
                }
            }
            FieldExpr::Sum { terms } => {
                let mut scalar = 0.0;
                let mut field: Option<Vec<f64>> = None;
                for (i, t) in terms.iter().enumerate() {
                    let sub = format!("{path}.sum[{i}]");
                    match self.eval(t, rho, &sub)? {
                        Value::Scalar(s) => scalar += s,
                        Value::Field(g) => match &mut field {
                            None => field = Some(g),
                            Some(acc) => {
                                for (a, b) in acc.iter_mut().zip(&g) {
                                    *a += b;
                                }
                            }
                        },
                    }
                }
                match field {
                    None => Value::Scalar(scalar),
                    Some(mut f) => {
                        if scalar != 0.0 {
                            for v in &mut f {
                                *v += scalar;
                            }
                        }
                        Value::Field(f)
                    }
                }
            }
        };
        let kind = match expr {
            FieldExpr::Num { .. } => "num",
            FieldExpr::Param { .. } => "param",
            FieldExpr::Mass { .. } => "mass",
            FieldExpr::Rho => "rho",
            FieldExpr::Conv { .. } => "conv",
            FieldExpr::Prod { .. } => "prod",
            FieldExpr::Exp { .. } => "exp",
            FieldExpr::Neg { .. } => "neg",
            FieldExpr::Sum { .. } => "sum",
        };
        match &out {
            Value::Scalar(s) if !s.is_finite() => {
                return Err(Error::Numerical(format!(
                    "non-finite value in {kind} node at {path}: {s}"
                )))
            }
            Value::Field(f) => {
                if let Some(i) = f.iter().position(|v| !v.is_finite()) {
                    return Err(Error::Numerical(format!(
                        "non-finite value in {kind} node at {path} (grid index {i}): {}",
                        f[i]
                    )));
                }
            }
            _ => {}
        }
        Ok(out)
    }

    fn kernel(&self, name: &str, path: &str) -> Result<&crate::kernel::Kernel> {
        self.model.kernels.get(name).ok_or_else(|| {
            Error::Config(format!("kernel `{name}` is not defined (at {path})"))
        })
    }
}
