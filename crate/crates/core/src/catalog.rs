//! Built-in model catalog.
//!
//! Thirteen presets cover the classical birth-and-death and hopping models:
//! free immigration/death, contact growth, competition (social, BDLP,
//! Dieckmann–Law), birth suppression through establishment or fecundity,
//! Glauber dynamics in both directions, and the Kawasaki family (free,
//! density-dependent in departure or arrival form, and Gibbs). Each entry
//! carries the generator description and the limiting kinetic equation in
//! the canonical printer's syntax; `derive` output is compared against the
//! latter string-exactly.
//!
//! Parameter values are desk-scale defaults chosen so the closed-form
//! checks are meaningful in one dimension: top-hat kernels of radius 0.5
//! have unit mass on the line, so e.g. the contact preset decays at rate
//! lambda·⟨a⟩ − m = −0.5 and the logistic carrying capacity of the BDLP
//! preset is (lambda·⟨aplus⟩ − m)/⟨aminus⟩ = 0.7.

use crate::dsl::Generator;
use crate::error::{Error, Result};

/// One catalog entry: a named generator plus its limiting equation.
#[derive(Debug, Clone, Copy)]
pub struct Preset {
    pub name: &'static str,
    pub title: &'static str,
    pub source: &'static str,
    pub equation: &'static str,
}

pub const PRESETS: &[Preset] = &[
    Preset {
        name: "surgailis",
        title: "independent immigration and death",
        source: "\
const m = 1.0;
const sigma = 2.0;
death = m;
birth = 1 scale inveps * sigma;
",
        equation: "-m*rho + sigma",
    },
    Preset {
        name: "contact",
        title: "contact growth with dispersal kernel",
        source: "\
const m = 1.0;
const lambda = 0.5;
kernel a tophat(0.5) scale eps;
death = m;
birth = 1 scale inveps * lambda * sum[p in gamma] a(x-p);
",
        equation: "-m*rho + lambda*conv(a,rho)",
    },
    Preset {
        name: "social",
        title: "reservoir immigration with pairwise competition",
        source: "\
const sigma = 2.0;
kernel a tophat(0.5) scale eps;
death = sum[u in gamma\\x] a(x-u);
birth = 1 scale inveps * sigma;
",
        equation: "-rho*conv(a,rho) + sigma",
    },
    Preset {
        name: "bdlp",
        title: "logistic growth with local competition",
        source: "\
const m = 0.3;
const lambda = 1.0;
kernel aplus tophat(0.5) scale eps;
kernel aminus tophat(0.5) scale eps;
death = m + sum[u in gamma\\x] aminus(x-u);
birth = 1 scale inveps * lambda * sum[p in gamma] aplus(x-p);
",
        equation: "-m*rho - rho*conv(aminus,rho) + lambda*conv(aplus,rho)",
    },
    Preset {
        name: "establishment",
        title: "contact growth suppressed at the newborn location",
        source: "\
const m = 0.3;
const lambda = 1.0;
kernel a gaussian(0.4) scale eps;
kernel phi gaussian(0.5) scale eps;
death = m;
birth = 1 scale inveps * lambda * sum[p in gamma] a(x-p) * exp(-sum[u in gamma] phi(x-u));
",
        equation: "-m*rho + lambda*conv(a,rho)*exp(-conv(phi,rho))",
    },
    Preset {
        name: "fecundity",
        title: "contact growth suppressed at the parent location",
        source: "\
const m = 0.3;
const lambda = 1.0;
kernel a gaussian(0.4) scale eps;
kernel phi gaussian(0.5) scale eps;
death = m;
birth = 1 scale inveps * lambda * sum[p in gamma] a(x-p) * exp(-sum[u in gamma\\p] phi(p-u));
",
        equation: "-m*rho + lambda*conv(a,rho*exp(-conv(phi,rho)))",
    },
    Preset {
        name: "dieckmann_law",
        title: "fertility proportional to local population",
        source: "\
const m = 0.3;
const lambda = 1.0;
kernel aplus tophat(0.5) scale eps;
kernel aminus tophat(0.5) scale eps;
kernel b tophat(0.5) scale eps;
death = m + sum[u in gamma\\x] aminus(x-u);
birth = 1 scale inveps * sum[p in gamma] aplus(x-p) * (lambda + sum[u in gamma\\p] b(p-u));
",
        equation: "-m*rho - rho*conv(aminus,rho) + lambda*conv(aplus,rho) + conv(aplus,rho*conv(b,rho))",
    },
    Preset {
        name: "glauber_plus",
        title: "Glauber dynamics, interaction in the birth rate",
        source: "\
const z = 1.0;
kernel phi tophat(0.5) scale eps;
death = 1;
birth = 1 scale inveps * z * exp(-sum[u in gamma] phi(x-u));
",
        equation: "-rho + z*exp(-conv(phi,rho))",
    },
    Preset {
        name: "glauber_minus",
        title: "Glauber dynamics, interaction in the death rate",
        source: "\
const z = 1.0;
kernel phi tophat(0.5) scale eps;
death = exp(sum[u in gamma] phi(x-u));
birth = 1 scale inveps * z;
",
        equation: "-rho*exp(conv(phi,rho)) + z",
    },
    Preset {
        name: "free_kawasaki",
        title: "independent particle jumps",
        source: "\
kernel a tophat(0.5);
hop = a(x-y);
",
        equation: "conv(a,rho) - mass(a)*rho",
    },
    Preset {
        name: "ddk_departure",
        title: "jump intensity proportional to population at the origin",
        source: "\
kernel a tophat(0.5);
kernel b tophat(0.5) scale eps;
hop = a(x-y) * sum[u in gamma] b(x-u);
",
        equation: "conv(a,rho*conv(b,rho)) - mass(a)*rho*conv(b,rho)",
    },
    Preset {
        name: "ddk_arrival",
        title: "jump intensity proportional to population at the target",
        source: "\
kernel a tophat(0.5);
kernel b tophat(0.5) scale eps;
hop = a(x-y) * sum[u in gamma] b(y-u);
",
        equation: "conv(a,rho)*conv(b,rho) - rho*conv(a,conv(b,rho))",
    },
    Preset {
        name: "gibbs_kawasaki",
        title: "jumps damped by the interaction energy at the target",
        source: "\
kernel a tophat(0.5);
kernel phi tophat(0.5) scale eps;
hop = a(x-y) * exp(-sum[u in gamma] phi(y-u));
",
        equation: "conv(a,rho)*exp(-conv(phi,rho)) - rho*conv(a,exp(-conv(phi,rho)))",
    },
];

/// Look up a preset by name; hyphens and underscores are interchangeable.
pub fn find(name: &str) -> Option<&'static Preset> {
    let wanted = name.replace('-', "_");
    PRESETS.iter().find(|p| p.name == wanted)
}

/// Parse and validate a preset's generator.
pub fn generator(name: &str) -> Result<Generator> {
    let preset = find(name).ok_or_else(|| {
        Error::Config(format!(
            "unknown preset `{name}`; available: {}",
            PRESETS.iter().map(|p| p.name).collect::<Vec<_>>().join(", ")
        ))
    })?;
    Generator::from_source(preset.source)
}
