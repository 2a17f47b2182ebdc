//! Named scenarios shipped with the library.

use crate::error::{Error, Result};
use crate::initial::InitialDensity;
use crate::kinetics::{make_exp_detachment, make_power_law, KineticModel, Nucleation};

/// Model, data and horizon of one run.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: &'static str,
    pub model: KineticModel,
    pub rho: f64,
    pub f_in: InitialDensity,
    pub horizon: f64,
    /// Bound on the initial support, when compact.
    pub x0: Option<f64>,
}

pub const PRESET_NAMES: [&str; 5] = ["vacuum", "advection", "sech2_benchmark", "powerlaw_global", "blowdown_exp"];

/// Looks up a preset; `sech2` is accepted for `sech2_benchmark`.
pub fn preset(name: &str) -> Result<Scenario> {
    let s = match name {
        // a ≡ 1, b ≡ 0, nothing nucleates
        "vacuum" => Scenario {
            name: "vacuum",
            model: make_power_law(1.0, 0.0, 0.0, 0.0, Nucleation::constant(0.0))?,
            rho: 1.0,
            f_in: InitialDensity::zero(),
            horizon: 5.0,
            x0: Some(0.0),
        },
        // constant nucleation on top of a transported block
        "advection" => Scenario {
            name: "advection",
            model: make_power_law(1.0, 0.0, 0.0, 0.0, Nucleation::constant(0.1))?,
            rho: 2.0,
            f_in: InitialDensity::indicator(0.5, 1.0, 2.0)?,
            horizon: 5.0,
            x0: Some(2.0),
        },
        // u = sech²(t/√2)
        "sech2_benchmark" | "sech2" => Scenario {
            name: "sech2_benchmark",
            model: make_power_law(1.0, 0.0, 0.0, 0.0, Nucleation::linear_excess(1.0, 0.0))?,
            rho: 1.0,
            f_in: InitialDensity::zero(),
            horizon: 5.0,
            x0: Some(0.0),
        },
        // a = ½√x, b = ¼√x: Φ ≡ Φ₀ = ½
        "powerlaw_global" => Scenario {
            name: "powerlaw_global",
            model: make_power_law(0.5, 0.5, 0.25, 0.5, Nucleation::linear_excess(0.2, 0.0))?,
            rho: 2.0,
            f_in: InitialDensity::indicator(0.5, 0.0, 1.0)?,
            horizon: 10.0,
            x0: Some(1.0),
        },
        // a ≡ 1, b = e^{−x}: Φ₀ = 1 and u_in = 1.5
        "blowdown_exp" => Scenario {
            name: "blowdown_exp",
            model: make_exp_detachment(1.0, 1.0, 1.0, Nucleation::linear_excess(1.0, 0.0))?,
            rho: 2.0,
            f_in: InitialDensity::indicator(1.0, 0.0, 1.0)?,
            horizon: 5.0,
            x0: Some(1.0),
        },
        other => {
            return Err(Error::InvalidParameter(format!(
                "unknown preset '{other}' (known: {})",
                PRESET_NAMES.join(", ")
            )))
        }
    };
    Ok(s)
}

pub fn all() -> Vec<Scenario> {
    PRESET_NAMES.iter().map(|n| preset(n).expect("built-in presets are valid")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinetics::validate_hypotheses;

    #[test]
    fn presets_pass_their_hypotheses() {
        for s in all() {
            let rep = validate_hypotheses(&s.model, s.rho, &s.f_in);
            assert!(rep.passed(), "{}: {rep}", s.name);
        }
        assert_eq!(preset("sech2").unwrap().name, "sech2_benchmark");
        assert!(preset("nope").is_err());
    }

    #[test]
    fn blowdown_initial_concentration() {
        let s = preset("blowdown_exp").unwrap();
        assert!((s.rho - s.f_in.m1() - 1.5).abs() < 1e-14);
        assert_eq!(s.model.phi0(), 1.0);
    }
}
