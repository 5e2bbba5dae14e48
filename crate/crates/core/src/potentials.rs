//! Nonnegative potentials and their capped grid discretization.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Field, GridSpec};

#[derive(Debug, Clone, PartialEq)]
pub enum PotentialSpec {
    Zero,
    Const(f64),
    /// `‖x‖²`
    Harmonic,
    /// `(x₁² + x₂²)^{(ε-2)/2}`, singular on the `x₁ = x₂ = 0` axis.
    Ce1 { eps: f64 },
    /// `|x₁|^{-2/p}` inside the unit ball, singular on `x₁ = 0`.
    Ce2 { p: f64 },
    /// `(1 + |x|)^{-2} ln(4 + |x|)^{-2}`
    Ce3,
    /// Sampled potential; point evaluation uses the nearest grid value.
    Custom(Field),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Cap {
    /// Formula value at distance `h/2` from the singular set, or no cap for
    /// potentials without one.
    Auto,
    Value(f64),
}

impl PotentialSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Self::Const(c) if !(c >= 0.0) || !c.is_finite() => {
                Err(Error::InvalidParameter(format!("constant potential must be >= 0, got {c}")))
            }
            Self::Ce1 { eps } if !(eps > 0.0 && eps < 1.0) => {
                Err(Error::InvalidParameter(format!("CE1 needs 0 < eps < 1, got {eps}")))
            }
            Self::Ce2 { p } if !(p > 2.0) || !p.is_finite() => {
                Err(Error::InvalidParameter(format!("CE2 needs p > 2, got {p}")))
            }
            Self::Custom(ref f) if f.min() < 0.0 => Err(Error::NegativePotential {
                index: f.values().iter().position(|&v| v < 0.0).unwrap_or(0),
                value: f.min(),
            }),
            _ => Ok(()),
        }
    }

    /// Short tag used in reports.
    pub fn tag(&self) -> String {
        self.to_string()
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Self::Zero => true,
            Self::Const(c) => *c == 0.0,
            Self::Custom(f) => f.is_zero(),
            _ => false,
        }
    }

    /// Potentials whose value depends on `|x|` only.
    pub fn is_radial(&self) -> bool {
        matches!(self, Self::Zero | Self::Const(_) | Self::Harmonic | Self::Ce3)
    }

    /// Profile `V(r)` of a radial potential.
    pub fn radial_profile(&self, r: f64) -> Option<f64> {
        match *self {
            Self::Zero => Some(0.0),
            Self::Const(c) => Some(c),
            Self::Harmonic => Some(r * r),
            Self::Ce3 => Some(ce3(r)),
            _ => None,
        }
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        let singular = |name: &str| Error::Singular { name: name.into(), point: x.to_vec() };
        match self {
            Self::Zero => Ok(0.0),
            Self::Const(c) => Ok(*c),
            Self::Harmonic => Ok(x.iter().map(|v| v * v).sum()),
            Self::Ce1 { eps } => {
                if x.len() < 2 {
                    return Err(Error::InvalidParameter("CE1 needs d >= 2".into()));
                }
                let rho2 = x[0] * x[0] + x[1] * x[1];
                if rho2 == 0.0 {
                    return Err(singular("CE1"));
                }
                Ok(rho2.powf((eps - 2.0) / 2.0))
            }
            Self::Ce2 { p } => {
                let r2: f64 = x.iter().map(|v| v * v).sum();
                if r2 >= 1.0 {
                    return Ok(0.0);
                }
                if x[0] == 0.0 {
                    return Err(singular("CE2"));
                }
                Ok(x[0].abs().powf(-2.0 / p))
            }
            Self::Ce3 => Ok(ce3(x.iter().map(|v| v * v).sum::<f64>().sqrt())),
            Self::Custom(f) => Ok(f.values()[f.spec().nearest(x)]),
        }
    }

    /// Value on the singular set's `h/2` neighbourhood, if the potential has one.
    pub fn auto_cap(&self, h: f64) -> Option<f64> {
        match *self {
            Self::Ce1 { eps } => Some((h / 2.0).powf(eps - 2.0)),
            Self::Ce2 { p } => Some((h / 2.0).powf(-2.0 / p)),
            _ => None,
        }
    }

    /// Evaluation with singular points mapped to `cap` and values clipped at it.
    pub fn eval_capped(&self, x: &[f64], cap: f64) -> Result<f64> {
        match self.eval(x) {
            Ok(v) => Ok(v.min(cap)),
            Err(Error::Singular { .. }) => Ok(cap),
            Err(e) => Err(e),
        }
    }
}

fn ce3(r: f64) -> f64 {
    (1.0 + r).powi(-2) * (4.0 + r).ln().powi(-2)
}

impl fmt::Display for PotentialSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Zero => write!(f, "zero"),
            Self::Const(c) => write!(f, "const:{c}"),
            Self::Harmonic => write!(f, "harmonic"),
            Self::Ce1 { eps } => write!(f, "ce1:{eps}"),
            Self::Ce2 { p } => write!(f, "ce2:{p}"),
            Self::Ce3 => write!(f, "ce3"),
            Self::Custom(_) => write!(f, "custom"),
        }
    }
}

impl std::str::FromStr for PotentialSpec {
    type Err = Error;

    /// Parses `zero`, `const:<c>`, `harmonic`, `ce1:<eps>`, `ce2:<p>`, `ce3`
    /// and `file:<path>` (an RZF1 field).
    fn from_str(s: &str) -> Result<Self> {
        let (head, arg) = match s.split_once(':') {
            Some((h, a)) => (h, Some(a)),
            None => (s, None),
        };
        let num = |a: Option<&str>| -> Result<f64> {
            a.ok_or_else(|| Error::InvalidParameter(format!("potential '{s}' needs a parameter")))?
                .parse::<f64>()
                .map_err(|e| Error::InvalidParameter(format!("potential '{s}': {e}")))
        };
        let spec = match head.to_ascii_lowercase().as_str() {
            "zero" => Self::Zero,
            "const" => Self::Const(num(arg)?),
            "harmonic" => Self::Harmonic,
            "ce1" => Self::Ce1 { eps: num(arg)? },
            "ce2" => Self::Ce2 { p: num(arg)? },
            "ce3" => Self::Ce3,
            "file" => Self::Custom(crate::rzf::load(arg.unwrap_or_default())?),
            _ => return Err(Error::Unknown { kind: "potential", name: s.into() }),
        };
        spec.validate()?;
        Ok(spec)
    }
}

pub fn eval_potential(spec: &PotentialSpec, x: &[f64]) -> Result<f64> {
    spec.eval(x)
}

/// Samples `spec` on `grid` as `min(V, cap)`, singular points set to the cap.
pub fn discretize_potential(spec: &PotentialSpec, grid: GridSpec, cap: Cap) -> Result<Field> {
    spec.validate()?;
    if let PotentialSpec::Custom(f) = spec {
        if f.spec() != &grid {
            return Err(Error::GridMismatch);
        }
    }
    let cap = match cap {
        Cap::Value(c) if c > 0.0 => c,
        Cap::Value(c) => return Err(Error::InvalidParameter(format!("cap must be positive, got {c}"))),
        Cap::Auto => spec.auto_cap(grid.spacing()).unwrap_or(f64::MAX),
    };
    crate::grid::sample(grid, |x| {
        // The only error left after validation is a singular point.
        spec.eval_capped(x, cap).unwrap_or(cap)
    })
}

/// The catalog of named potentials usable on a `d`-dimensional grid.
pub fn catalog(d: usize) -> Vec<PotentialSpec> {
    let mut out = vec![
        PotentialSpec::Zero,
        PotentialSpec::Const(2.0),
        PotentialSpec::Harmonic,
    ];
    if d >= 2 {
        out.push(PotentialSpec::Ce1 { eps: 0.25 });
    }
    out.push(PotentialSpec::Ce2 { p: 4.0 });
    out.push(PotentialSpec::Ce3);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn formula_examples() {
        assert_relative_eq!(PotentialSpec::Ce3.eval(&[0.0, 0.0, 0.0]).unwrap(), 0.520342, epsilon = 1e-6);
        assert_relative_eq!(PotentialSpec::Ce1 { eps: 0.25 }.eval(&[1.0, 0.0, 7.0]).unwrap(), 1.0);
        assert_eq!(PotentialSpec::Ce2 { p: 4.0 }.eval(&[0.6, 0.8, 0.0]).unwrap(), 0.0);
        assert_eq!(PotentialSpec::Ce2 { p: 4.0 }.eval(&[0.0, 2.0, 0.0]).unwrap(), 0.0);
    }

    #[test]
    fn singular_sets_are_signalled() {
        assert!(matches!(
            PotentialSpec::Ce1 { eps: 0.5 }.eval(&[0.0, 0.0, 1.0]),
            Err(Error::Singular { .. })
        ));
        assert!(matches!(PotentialSpec::Ce2 { p: 3.0 }.eval(&[0.0, 0.1]), Err(Error::Singular { .. })));
    }

    #[test]
    fn discretize_examples() {
        let g = GridSpec::new(2, 8, 1.0).unwrap();
        assert!(discretize_potential(&PotentialSpec::Zero, g, Cap::Auto).unwrap().is_zero());
        let c = discretize_potential(&PotentialSpec::Const(1.5), g, Cap::Auto).unwrap();
        assert!(c.values().iter().all(|&v| v == 1.5));
    }

    #[test]
    fn ce1_auto_cap() {
        // Independent arithmetic: h = 2/16, (h/2)^(eps-2) = 16^(7/4) = 2^7.
        let g = GridSpec::new(2, 16, 1.0).unwrap();
        let spec = PotentialSpec::Ce1 { eps: 0.25 };
        let cap = spec.auto_cap(g.spacing()).unwrap();
        assert_relative_eq!(cap, 128.0, max_relative = 1e-12);
        let v = discretize_potential(&spec, g, Cap::Auto).unwrap();
        assert_relative_eq!(v.values()[g.origin()], 128.0, max_relative = 1e-12);
        assert!(v.max() <= cap);
    }

    #[test]
    fn parse_and_display() {
        for s in ["zero", "const:2", "harmonic", "ce1:0.25", "ce2:4", "ce3"] {
            let p: PotentialSpec = s.parse().unwrap();
            assert_eq!(p.to_string(), s);
        }
        assert!("ce1:2".parse::<PotentialSpec>().is_err());
        assert!("bogus".parse::<PotentialSpec>().is_err());
        assert!("const:-1".parse::<PotentialSpec>().is_err());
    }

    fn any_potential() -> impl Strategy<Value = PotentialSpec> {
        prop_oneof![
            Just(PotentialSpec::Zero),
            (0.0f64..5.0).prop_map(PotentialSpec::Const),
            Just(PotentialSpec::Harmonic),
            (0.05f64..0.95).prop_map(|eps| PotentialSpec::Ce1 { eps }),
            (2.1f64..10.0).prop_map(|p| PotentialSpec::Ce2 { p }),
            Just(PotentialSpec::Ce3),
        ]
    }

    proptest! {
        #[test]
        fn capped_fields_are_bounded_and_monotone(spec in any_potential(), half_n in 2usize..8, cap in 0.5f64..50.0) {
            let g = GridSpec::new(2, 2 * half_n, 1.5).unwrap();
            let lo = discretize_potential(&spec, g, Cap::Value(cap)).unwrap();
            let hi = discretize_potential(&spec, g, Cap::Value(2.0 * cap)).unwrap();
            prop_assert!(lo.min() >= 0.0);
            prop_assert!(lo.max() <= cap);
            for (a, b) in lo.values().iter().zip(hi.values()) {
                prop_assert!(a <= b);
            }
        }

        #[test]
        fn smooth_potentials_uncapped_match_formula(c in 0.0f64..5.0, half_n in 2usize..8) {
            let g = GridSpec::new(3, 2 * half_n, 2.0).unwrap();
            for spec in [PotentialSpec::Zero, PotentialSpec::Const(c), PotentialSpec::Harmonic] {
                let f = discretize_potential(&spec, g, Cap::Value(f64::MAX)).unwrap();
                for k in 0..g.len() {
                    prop_assert_eq!(f.values()[k], spec.eval(&g.point(k)).unwrap());
                }
            }
        }
    }
}
