// SPDX-License-Identifier: MIT OR Apache-2.0

//! Detector descriptions and their JSON form.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::calibration::Correction;
use crate::error::{invalid, Error, Result};

macro_rules! families {
    ($($variant:ident => $id:literal, $doc:literal;)*) => {
        /// Test family of the catalogue.
        #[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        #[serde(try_from = "String", into = "String")]
        pub enum Family {
            $(#[doc = $doc] $variant,)*
        }

        impl Family {
            /// Every family.
            pub const ALL: &'static [Family] = &[$(Family::$variant,)*];

            /// Identifier used in JSON documents and on the command line.
            pub fn id(self) -> &'static str {
                match self {
                    $(Family::$variant => $id,)*
                }
            }

            /// One-line description.
            pub fn description(self) -> &'static str {
                match self {
                    $(Family::$variant => $doc,)*
                }
            }
        }

        impl FromStr for Family {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self> {
                match s {
                    $($id => Ok(Family::$variant),)*
                    other => Err(Error::Spec(format!("unknown detector family `{other}`"))),
                }
            }
        }
    };
}

families! {
    Phi1MinusKnown => "phi1_minus_known", "randomized test rejecting a low count on (τ*, τ*+ℓ*], known λ₀";
    Phi1PlusKnown => "phi1_plus_known", "randomized test rejecting a high count on (τ*, τ*+ℓ*], known λ₀";
    Phi2LinKnown => "phi2_lin_known", "two-sided UMPU count test on (τ*, τ*+ℓ*], known λ₀";
    Phi2QuadKnown => "phi2_quad_known", "quadratic statistic T on (τ*, τ*+ℓ*], known λ₀";
    Phi3MinusKnown => "phi3_minus_known", "minimum count over windows of length ℓ*, known λ₀";
    Phi3PlusKnown => "phi3_plus_known", "maximum count over windows of length ℓ*, known λ₀";
    Phi4LinKnown => "phi4_lin_known", "two-sided scan over windows of length ℓ*, known λ₀";
    Phi34QuadKnown => "phi3_4_quad_known", "T aggregated over a grid of windows of length ℓ*, known λ₀";
    Phi5Known => "phi5_known", "supremum over ℓ of the shifted statistic from τ*, known λ₀";
    Phi6LinKnown => "phi6_lin_known", "|S| aggregated over dyadic lengths from τ*, known λ₀";
    Phi6QuadKnown => "phi6_quad_known", "T aggregated over dyadic lengths from τ*, known λ₀";
    Phi7Known => "phi7_known", "supremum over τ of the shifted statistic on (τ, 1], known λ₀";
    Phi8LinKnown => "phi8_lin_known", "|S| aggregated over jump locations, known λ₀";
    Phi8QuadKnown => "phi8_quad_known", "T aggregated over jump locations, known λ₀";
    Phi910LinKnown => "phi9_10_lin_known", "|S| aggregated over a full window grid, known λ₀";
    Phi910QuadKnown => "phi9_10_quad_known", "T aggregated over a full window grid, known λ₀";
    Phi1MinusCond => "phi1_minus_cond", "randomized binomial test rejecting a low count, unknown baseline";
    Phi1PlusCond => "phi1_plus_cond", "randomized binomial test rejecting a high count, unknown baseline";
    Phi2LinCond => "phi2_lin_cond", "two-sided UMPU binomial test, unknown baseline";
    Phi2QuadCond => "phi2_quad_cond", "quadratic statistic T′ on (τ*, τ*+ℓ*], unknown baseline";
    Phi3MinusCond => "phi3_minus_cond", "minimum count over windows of length ℓ*∧½, unknown baseline";
    Phi3PlusCond => "phi3_plus_cond", "maximum count over windows of length ℓ*∧½, unknown baseline";
    Phi4LinCond => "phi4_lin_cond", "two-sided scan over windows of length ℓ*∧½, unknown baseline";
    Phi34QuadCond => "phi3_4_quad_cond", "T′ aggregated over a grid of windows of length ℓ*, unknown baseline";
    Phi5Cond => "phi5_cond", "supremum over ℓ of the conditional shifted statistic, unknown baseline";
    Phi6LinCond => "phi6_lin_cond", "|S′| aggregated over dyadic lengths, unknown baseline";
    Phi6QuadCond => "phi6_quad_cond", "T′ aggregated over dyadic lengths, unknown baseline";
    Phi7Cond => "phi7_cond", "supremum over τ of the conditional shifted statistic, unknown baseline";
    Phi8LinCond => "phi8_lin_cond", "|S′| aggregated over jump locations, unknown baseline";
    Phi8QuadCond => "phi8_quad_cond", "T′ aggregated over jump locations, unknown baseline";
    Phi910LinCond => "phi9_10_lin_cond", "|S′| aggregated over a full window grid, unknown baseline";
    Phi910QuadCond => "phi9_10_quad_cond", "T′ aggregated over a full window grid, unknown baseline";
    Laplace => "laplace", "two-sided Laplace test on the sum of event times";
    Z => "z", "two-sided Z test on −2Σlog(Xᵢ)";
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl TryFrom<String> for Family {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Family> for String {
    fn from(f: Family) -> String {
        f.id().to_owned()
    }
}

/// Parameters a family reads from the spec.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Requirements {
    pub tau_star: bool,
    pub ell_star: bool,
    pub delta_star: bool,
    /// Whether a multiple-testing correction applies.
    pub aggregated: bool,
    /// Whether a grid preset may be chosen.
    pub grid: bool,
}

impl Family {
    /// Whether the family works conditionally on `N₁` (unknown baseline).
    pub fn is_conditional(self) -> bool {
        self.id().ends_with("_cond")
    }

    /// Whether the family is one of the two reference tests.
    pub fn is_reference(self) -> bool {
        matches!(self, Self::Laplace | Self::Z)
    }

    /// Whether decisions may be randomized.
    pub fn is_randomized(self) -> bool {
        use Family::*;
        matches!(self, Phi1MinusKnown | Phi1PlusKnown | Phi2LinKnown | Phi1MinusCond | Phi1PlusCond | Phi2LinCond)
    }

    /// Parameters the family reads.
    pub fn requirements(self) -> Requirements {
        use Family::*;
        let none = Requirements { tau_star: false, ell_star: false, delta_star: false, aggregated: false, grid: false };
        match self {
            Phi1MinusKnown | Phi1PlusKnown | Phi2LinKnown | Phi2QuadKnown | Phi1MinusCond | Phi1PlusCond
            | Phi2LinCond | Phi2QuadCond => Requirements { tau_star: true, ell_star: true, ..none },
            Phi3MinusKnown | Phi3PlusKnown | Phi3MinusCond | Phi3PlusCond => Requirements { ell_star: true, ..none },
            Phi4LinKnown | Phi4LinCond => Requirements { ell_star: true, aggregated: true, ..none },
            Phi34QuadKnown | Phi34QuadCond => Requirements { ell_star: true, aggregated: true, ..none },
            Phi5Known | Phi5Cond => Requirements { tau_star: true, delta_star: true, ..none },
            Phi6LinKnown | Phi6QuadKnown | Phi6LinCond | Phi6QuadCond => {
                Requirements { tau_star: true, aggregated: true, ..none }
            }
            Phi7Known | Phi7Cond => Requirements { delta_star: true, ..none },
            Phi8LinKnown | Phi8QuadKnown | Phi8LinCond | Phi8QuadCond | Phi910LinKnown | Phi910QuadKnown
            | Phi910LinCond | Phi910QuadCond => Requirements { aggregated: true, grid: true, ..none },
            Laplace | Z => none,
        }
    }
}

/// Null hypothesis of the detector.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Baseline {
    /// Known constant intensity `λ₀`.
    Known { lambda0: f64 },
    /// Unknown constant intensity, optionally bounded by `R`.
    Unknown {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        bound: Option<f64>,
    },
}

/// Named window grids.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridPreset {
    /// The family's own grid, derived from `L`.
    Default,
    /// Jump locations `1 − 2⁻ᵏ`, `k = 1..6`.
    ThetaD,
    /// Jump locations `k/10`, `k = 1..9`.
    ThetaR,
    /// Jump locations `2⁻ᵏ`, `k = 2..6`, and `1 − 2⁻ᵏ`, `k = 1..6`.
    ThetaDU,
    /// Jump locations `k/10`, `k = 1..9` (unknown baseline).
    ThetaRU,
    /// All windows of the grid `k/100`.
    Theta,
    /// All windows of the grid `k/100` (unknown baseline, linear statistic).
    Theta1,
    /// All windows of the grid `k/22` except `(0, 1]`.
    Theta2,
}

impl GridPreset {
    pub const ALL: &'static [GridPreset] = &[
        Self::Default,
        Self::ThetaD,
        Self::ThetaR,
        Self::ThetaDU,
        Self::ThetaRU,
        Self::Theta,
        Self::Theta1,
        Self::Theta2,
    ];

    pub fn id(self) -> &'static str {
        match self {
            Self::Default => "default",
            Self::ThetaD => "theta_d",
            Self::ThetaR => "theta_r",
            Self::ThetaDU => "theta_d_u",
            Self::ThetaRU => "theta_r_u",
            Self::Theta => "theta",
            Self::Theta1 => "theta_1",
            Self::Theta2 => "theta_2",
        }
    }

    /// Whether the preset is a set of jump locations (as opposed to a window grid).
    pub fn is_jump_grid(self) -> bool {
        matches!(self, Self::ThetaD | Self::ThetaR | Self::ThetaDU | Self::ThetaRU)
    }
}

impl FromStr for GridPreset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .iter()
            .copied()
            .find(|g| g.id() == s)
            .ok_or_else(|| Error::Spec(format!("unknown grid preset `{s}`")))
    }
}

/// Calibration settings carried by a spec.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CalibrationHandle {
    #[serde(rename = "B")]
    pub replicates: usize,
    pub seed: u64,
}

fn default_alpha() -> f64 {
    0.05
}

/// A configured detector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectorSpec {
    pub family: Family,
    pub baseline: Baseline,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau_star: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ell_star: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_star: Option<f64>,
    #[serde(default = "default_correction")]
    pub correction: Correction,
    #[serde(default = "default_grid")]
    pub grid: GridPreset,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub calibration: Option<CalibrationHandle>,
}

fn default_correction() -> Correction {
    Correction::Bonferroni
}

fn default_grid() -> GridPreset {
    GridPreset::Default
}

impl DetectorSpec {
    /// Spec with default level, correction and grid and no change parameters.
    pub fn new(family: Family, baseline: Baseline) -> Self {
        Self {
            family,
            baseline,
            alpha: default_alpha(),
            tau_star: None,
            ell_star: None,
            delta_star: None,
            correction: default_correction(),
            grid: default_grid(),
            calibration: None,
        }
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self
    }

    pub fn with_tau(mut self, tau_star: f64) -> Self {
        self.tau_star = Some(tau_star);
        self
    }

    pub fn with_ell(mut self, ell_star: f64) -> Self {
        self.ell_star = Some(ell_star);
        self
    }

    pub fn with_delta(mut self, delta_star: f64) -> Self {
        self.delta_star = Some(delta_star);
        self
    }

    pub fn with_correction(mut self, correction: Correction) -> Self {
        self.correction = correction;
        self
    }

    pub fn with_grid(mut self, grid: GridPreset) -> Self {
        self.grid = grid;
        self
    }

    /// Parses a JSON document.
    pub fn from_json(text: &str) -> Result<Self> {
        let spec: Self = serde_json::from_str(text).map_err(|e| Error::Spec(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Known baseline `λ₀`, if any.
    pub fn lambda0(&self) -> Option<f64> {
        match self.baseline {
            Baseline::Known { lambda0 } => Some(lambda0),
            Baseline::Unknown { .. } => None,
        }
    }

    /// Checks parameter presence, ranges and the family/baseline match.
    pub fn validate(&self) -> Result<()> {
        let family = self.family;
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(invalid(format!("level α must lie in (0, 1), got {}", self.alpha)));
        }
        match self.baseline {
            Baseline::Known { lambda0 } => {
                if !(lambda0.is_finite() && lambda0 > 0.0) {
                    return Err(invalid(format!("baseline must be positive, got {lambda0}")));
                }
                if family.is_conditional() {
                    return Err(Error::Spec(format!("family {family} requires an unknown baseline")));
                }
            }
            Baseline::Unknown { bound } => {
                if let Some(r) = bound {
                    if !(r.is_finite() && r > 0.0) {
                        return Err(invalid(format!("baseline bound must be positive, got {r}")));
                    }
                }
                if !family.is_conditional() && !family.is_reference() {
                    return Err(Error::Spec(format!("family {family} requires a known baseline")));
                }
            }
        }
        let req = family.requirements();
        let check = |present: bool, needed: bool, name: &str| {
            match (present, needed) {
                (false, true) => Err(Error::Spec(format!("family {family} requires {name}"))),
                (true, false) => Err(Error::Spec(format!("family {family} does not take {name}"))),
                _ => Ok(()),
            }
        };
        check(self.tau_star.is_some(), req.tau_star, "tau_star")?;
        check(self.ell_star.is_some(), req.ell_star, "ell_star")?;
        check(self.delta_star.is_some(), req.delta_star, "delta_star")?;
        if let Some(t) = self.tau_star {
            if !(t > 0.0 && t < 1.0) {
                return Err(invalid(format!("τ* must lie in (0, 1), got {t}")));
            }
        }
        if let Some(l) = self.ell_star {
            let max = 1.0 - self.tau_star.unwrap_or(0.0);
            if !(l > 0.0 && l <= max + 1e-12) {
                return Err(invalid(format!("ℓ* must lie in (0, {max}], got {l}")));
            }
            let needs_interior = matches!(family, Family::Phi2QuadCond | Family::Phi34QuadCond);
            if needs_interior && l >= 1.0 {
                return Err(invalid(format!("family {family} requires ℓ* < 1")));
            }
        }
        if let Some(d) = self.delta_star {
            if !(d.is_finite() && d != 0.0) {
                return Err(invalid("δ* must be nonzero and finite"));
            }
            if let Some(lambda0) = self.lambda0() {
                if lambda0 + d <= 0.0 {
                    return Err(invalid(format!("λ₀ + δ* must be positive, got {}", lambda0 + d)));
                }
            }
        }
        if !req.aggregated && self.correction != Correction::Bonferroni {
            return Err(Error::Spec(format!("family {family} takes no multiple-testing correction")));
        }
        if self.grid != GridPreset::Default {
            if !req.grid {
                return Err(Error::Spec(format!("family {family} takes no grid preset")));
            }
            let jump = matches!(
                family,
                Family::Phi8LinKnown | Family::Phi8QuadKnown | Family::Phi8LinCond | Family::Phi8QuadCond
            );
            if jump != self.grid.is_jump_grid() {
                return Err(Error::Spec(format!("grid {} does not apply to family {family}", self.grid.id())));
            }
        }
        if let Some(c) = self.calibration {
            if c.replicates == 0 {
                return Err(invalid("calibration replicate count must be positive"));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn family_ids_round_trip() {
        for &f in Family::ALL {
            assert_eq!(f.id().parse::<Family>().unwrap(), f);
            let json = serde_json::to_string(&f).unwrap();
            assert_eq!(json, format!("\"{}\"", f.id()));
        }
        assert_eq!(Family::ALL.len(), 34);
        assert!("phi11".parse::<Family>().is_err());
    }

    #[test]
    fn json_spec_round_trip() {
        let text = r#"{"family": "phi9_10_quad_known", "baseline": {"kind": "known", "lambda0": 1.0},
                       "correction": "min_p", "grid": "theta", "calibration": {"B": 1000, "seed": 4}}"#;
        let spec = DetectorSpec::from_json(text).unwrap();
        assert_eq!(spec.family, Family::Phi910QuadKnown);
        assert_eq!(spec.alpha, 0.05);
        assert_eq!(spec.correction, Correction::MinP);
        assert_eq!(DetectorSpec::from_json(&spec.to_json().unwrap()).unwrap(), spec);
    }

    #[test]
    fn validation_errors() {
        let known = Baseline::Known { lambda0: 1.0 };
        let unknown = Baseline::Unknown { bound: None };
        assert!(matches!(DetectorSpec::new(Family::Phi8LinCond, known).validate(), Err(Error::Spec(_))));
        assert!(matches!(DetectorSpec::new(Family::Phi8LinKnown, unknown).validate(), Err(Error::Spec(_))));
        assert!(DetectorSpec::new(Family::Laplace, unknown).validate().is_ok());
        assert!(matches!(DetectorSpec::new(Family::Phi1PlusKnown, known).validate(), Err(Error::Spec(_))));
        let ok = DetectorSpec::new(Family::Phi1PlusKnown, known).with_tau(0.2).with_ell(0.4);
        assert!(ok.validate().is_ok());
        assert!(ok.clone().with_ell(0.9).validate().is_err());
        assert!(ok.clone().with_alpha(1.0).validate().is_err());
        assert!(ok.with_correction(Correction::MinP).validate().is_err());
        let grid = DetectorSpec::new(Family::Phi8LinKnown, known).with_grid(GridPreset::Theta);
        assert!(grid.validate().is_err());
        let phi5 = DetectorSpec::new(Family::Phi5Known, known).with_tau(0.3).with_delta(-1.5);
        assert!(phi5.validate().is_err());
    }
}
