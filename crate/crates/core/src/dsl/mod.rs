//! The generator description language and its compilation pipeline.
//!
//! A generator is described in a small text format declaring kernels and
//! constants (each with a scaling tag) and up to three rate parts:
//!
//! ```text
//! # logistic growth with local competition
//! const m = 0.3;
//! const lambda = 1.0;
//! kernel aplus gaussian(0.4) scale eps;
//! kernel aminus gaussian(0.6) scale eps;
//!
//! death = m + sum[u in gamma\x] aminus(x-u);
//! birth = 1 scale inveps * lambda * sum[p in gamma] aplus(x-p);
//! ```
//!
//! `x` is the active particle (the one dying, being born, or jumping), `y`
//! the arrival point of a hop, `gamma` the current configuration. Death and
//! hop rates see `x` as part of `gamma`; a birth rate sees the configuration
//! before the new particle appears. Birth rates are written as full event
//! intensities — the mean-field family runs births at 1/ε times a
//! density-limited coefficient, hence the `1 scale inveps` factor above.
//!
//! The pipeline is: [`parser`] → [`canonical`] terms → [`scaling`]
//! validation → numeric coefficients ([`coeff`]) and the limiting equation
//! ([`derive`]). [`Generator`] bundles the stages behind one handle.

pub mod ast;
pub mod canonical;
pub mod coeff;
pub mod derive;
pub mod parser;
pub mod scaling;

pub use ast::{Domain, GeneratorSpec, PartKind, RateAst, Var};
pub use canonical::{Anchor, ConstRef, ExpEntry, PointFactor, PtDisp, Slot, Term};
pub use scaling::{PartScaling, ScalingReport, TermScaling};

use crate::config::Configuration;
use crate::error::Result;
use crate::field::KineticModel;
use crate::geometry::{Point, TorusBox};

/// A parsed, canonicalized, scaling-checked generator.
#[derive(Debug, Clone)]
pub struct Generator {
    spec: GeneratorSpec,
    parts: Vec<(PartKind, Vec<Term>)>,
    report: ScalingReport,
}

impl Generator {
    /// Parse and validate a generator description.
    pub fn from_source(src: &str) -> Result<Self> {
        Self::from_spec(parser::parse_generator(src)?)
    }

    /// Canonicalize and validate an already-parsed description.
    pub fn from_spec(spec: GeneratorSpec) -> Result<Self> {
        let mut parts = Vec::new();
        for (kind, _) in &spec.parts {
            parts.push((*kind, canonical::canonicalize(&spec, *kind)?));
        }
        let report = scaling::analyze(&spec, &parts)?;
        Ok(Generator { spec, parts, report })
    }

    pub fn spec(&self) -> &GeneratorSpec {
        &self.spec
    }

    pub fn parts(&self) -> &[(PartKind, Vec<Term>)] {
        &self.parts
    }

    pub fn has_part(&self, part: PartKind) -> bool {
        self.parts.iter().any(|(k, _)| *k == part)
    }

    pub fn terms(&self, part: PartKind) -> Option<&[Term]> {
        self.parts.iter().find(|(k, _)| *k == part).map(|(_, t)| t.as_slice())
    }

    pub fn scaling_report(&self) -> &ScalingReport {
        &self.report
    }

    /// The net rate of a part at scale ε, exactly as written.
    ///
    /// `env` is the configuration without the active particle; `y` is the
    /// arrival point and must be given for hop rates.
    pub fn rate(
        &self,
        part: PartKind,
        torus: &TorusBox,
        x: Point,
        y: Option<Point>,
        env: &[Point],
        eps: f64,
    ) -> f64 {
        match self.terms(part) {
            Some(terms) => coeff::eval_rate(&self.spec, torus, terms, x, y, env, eps),
            None => 0.0,
        }
    }

    /// The combinatorial coefficient of a part on the probe configuration
    /// ξ at scale ε (birth rates pick up the structural ε).
    pub fn k_coefficient(
        &self,
        part: PartKind,
        torus: &TorusBox,
        x: Point,
        y: Option<Point>,
        xi: &Configuration,
        eps: f64,
    ) -> Result<f64> {
        let terms = self
            .terms(part)
            .ok_or_else(|| crate::error::Error::Declaration(format!(
                "generator has no `{}` part",
                part.name()
            )))?;
        coeff::k_coefficient(&self.spec, torus, part, terms, x, y, xi, eps)
    }

    /// The mean-field limit of `ε^{-|ξ|}` times the combinatorial
    /// coefficient.
    pub fn vlasov_coefficient(
        &self,
        part: PartKind,
        torus: &TorusBox,
        x: Point,
        y: Option<Point>,
        xi: &Configuration,
    ) -> Result<f64> {
        let terms = self
            .terms(part)
            .ok_or_else(|| crate::error::Error::Declaration(format!(
                "generator has no `{}` part",
                part.name()
            )))?;
        Ok(coeff::vlasov_coefficient(&self.spec, torus, part, terms, x, y, xi))
    }

    /// Compile the limiting kinetic equation and its symbol tables.
    pub fn derive(&self) -> Result<KineticModel> {
        derive::derive_model(&self.spec, &self.parts)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generator_handle_runs_the_whole_pipeline() {
        let gen = Generator::from_source(
            "const m = 0.3; const lambda = 1.0;\n\
             kernel aplus gaussian(0.4) scale eps;\n\
             kernel aminus gaussian(0.6) scale eps;\n\
             death = m + sum[u in gamma\\x] aminus(x-u);\n\
             birth = 1 scale inveps * lambda * sum[p in gamma] aplus(x-p);",
        )
        .expect("valid generator");
        assert!(gen.has_part(PartKind::Death));
        assert!(gen.has_part(PartKind::Birth));
        assert!(!gen.has_part(PartKind::Hop));
        let model = gen.derive().unwrap();
        assert_eq!(
            model.equation.canonical_string(),
            "-m*rho - rho*conv(aminus,rho) + lambda*conv(aplus,rho)"
        );
        assert_eq!(gen.scaling_report().parts.len(), 2);
    }

    #[test]
    fn unbalanced_generator_fails_at_construction() {
        let err = Generator::from_source(
            "const m = 0.3; kernel aminus gaussian(0.6);\n\
             death = m + sum[u in gamma\\x] aminus(x-u);",
        )
        .unwrap_err();
        assert!(matches!(err, crate::error::Error::Unbalanced(_)));
    }

    #[test]
    fn finite_scale_rate_agrees_with_direct_formula() {
        let gen = Generator::from_source(
            "const m = 0.3;\n\
             kernel aminus gaussian(0.6) scale eps;\n\
             death = m + sum[u in gamma\\x] aminus(x-u);\n\
             birth = 1 scale inveps * 0.7;",
        )
        .unwrap();
        let torus = TorusBox::new(2, 20.0).unwrap();
        let x = [0.0, 0.0];
        let env = [[0.5, 0.0], [0.0, -0.4]];
        let eps = 0.2;
        let rate = gen.rate(PartKind::Death, &torus, x, None, &env, eps);
        let a = &gen.spec().kernels["aminus"];
        let direct = 0.3
            + eps
                * (a.eval(torus.min_image(x, env[0])) + a.eval(torus.min_image(x, env[1])));
        approx::assert_relative_eq!(rate, direct, max_relative = 1e-12);

        let birth = gen.rate(PartKind::Birth, &torus, x, None, &env, eps);
        approx::assert_relative_eq!(birth, 0.7 / eps, max_relative = 1e-12);
    }
}
