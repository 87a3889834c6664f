//! Design configuration file (TOML).
//!
//! ```toml
//! [geometry]
//! h = 6.0
//! rho_max = 11.0
//! v = 1.0
//! b = 1.0
//!
//! # either an explicit layout ...
//! [layout]
//! sensor_heights = [2.0, 5.0]
//! mark_positions = [10.0, 9.0, 8.0, 7.0, 6.0, 5.0]
//!
//! # ... or a recipe
//! # [recipe]
//! # d_pool = [1.0]
//! # z_pool = [3.0]
//! # os1 = 2.0                        (optional)
//! # sensor_heights_override = [...]  (optional)
//! # mark_count = 6                   (optional)
//!
//! [tolerances]   # optional
//! geom = 1e-9
//! gap = 0.05
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::designer::{build_design, BuiltDesign, DesignRecipe};
use crate::error::{Error, Result};
use crate::model::{CalibrationDesign, MarkLayout, RobotGeometry, SensorLayout};
use crate::{DEFAULT_GAP_TOLERANCE, EPS_GEOM};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayoutSection {
    pub sensor_heights: Vec<f64>,
    pub mark_positions: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecipeSection {
    pub d_pool: Vec<f64>,
    pub z_pool: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub os1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sensor_heights_override: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mark_count: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    #[serde(default = "default_geom")]
    pub geom: f64,
    #[serde(default = "default_gap")]
    pub gap: f64,
}

fn default_geom() -> f64 {
    EPS_GEOM
}

fn default_gap() -> f64 {
    DEFAULT_GAP_TOLERANCE
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            geom: EPS_GEOM,
            gap: DEFAULT_GAP_TOLERANCE,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignConfig {
    pub geometry: RobotGeometry,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub layout: Option<LayoutSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub recipe: Option<RecipeSection>,
    #[serde(default)]
    pub tolerances: Tolerances,
}

/// A config resolved into a design; `built` is set when it came from a recipe.
#[derive(Debug, Clone)]
pub struct ResolvedDesign {
    pub design: CalibrationDesign,
    pub built: Option<BuiltDesign>,
}

impl DesignConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: DesignConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.check()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Explicit-layout config for a design.
    pub fn from_design(design: &CalibrationDesign, tolerances: Tolerances) -> Self {
        Self {
            geometry: *design.geometry(),
            layout: Some(LayoutSection {
                sensor_heights: design.sensors().heights().to_vec(),
                mark_positions: design.marks().positions().to_vec(),
            }),
            recipe: None,
            tolerances,
        }
    }

    fn check(&self) -> Result<()> {
        match (&self.layout, &self.recipe) {
            (Some(_), Some(_)) => Err(Error::Config(
                "give either [layout] or [recipe], not both".into(),
            )),
            (None, None) => Err(Error::Config("missing [layout] or [recipe] section".into())),
            _ => {
                let t = self.tolerances;
                if !(t.geom >= 0.0 && t.gap > 0.0) {
                    return Err(Error::Config(
                        "tolerances must be non-negative (gap > 0)".into(),
                    ));
                }
                let lengths = self
                    .layout
                    .iter()
                    .flat_map(|l| l.sensor_heights.iter().chain(&l.mark_positions))
                    .chain(
                        self.recipe
                            .iter()
                            .flat_map(|r| r.d_pool.iter().chain(&r.z_pool)),
                    );
                for (k, x) in lengths.enumerate() {
                    if !(*x > 0.0 && x.is_finite()) {
                        return Err(Error::Config(format!("length #{k} = {x} must be positive")));
                    }
                }
                Ok(())
            }
        }
    }

    pub fn recipe(&self) -> Option<DesignRecipe> {
        self.recipe.as_ref().map(|r| DesignRecipe {
            geometry: self.geometry,
            d_pool: r.d_pool.clone(),
            z_pool: r.z_pool.clone(),
            os1: r.os1,
            sensor_heights_override: r.sensor_heights_override.clone(),
            mark_count: r.mark_count,
        })
    }

    pub fn resolve(&self) -> Result<ResolvedDesign> {
        if let Some(l) = &self.layout {
            let design = CalibrationDesign::new(
                self.geometry,
                SensorLayout::new(l.sensor_heights.clone())?,
                MarkLayout::new(l.mark_positions.clone())?,
            )?;
            return Ok(ResolvedDesign {
                design,
                built: None,
            });
        }
        let recipe = self.recipe().expect("checked on load");
        let built = build_design(&recipe)?;
        Ok(ResolvedDesign {
            design: built.design.clone(),
            built: Some(built),
        })
    }

    pub fn design(&self) -> Result<CalibrationDesign> {
        Ok(self.resolve()?.design)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_both_sections() {
        let text = r#"
            [geometry]
            h = 6.0
            rho_max = 11.0
            v = 1.0
            b = 1.0
            [layout]
            sensor_heights = [2.0, 5.0]
            mark_positions = [10.0]
            [recipe]
            d_pool = [1.0]
            z_pool = [3.0]
        "#;
        assert!(matches!(
            DesignConfig::from_toml_str(text),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn parse_error_names_the_field() {
        let text = "[geometry]\nh = 6.0\nrho_max = \"x\"\nv = 1.0\nb = 1.0\n";
        let err = DesignConfig::from_toml_str(text).unwrap_err().to_string();
        assert!(err.contains("rho_max") || err.contains("line 3"), "{err}");
    }

    #[test]
    fn invalid_geometry_is_rejected() {
        let text = "[geometry]\nh = -6.0\nrho_max = 1.0\nv = 1.0\nb = 1.0\n[recipe]\nd_pool=[1.0]\nz_pool=[1.0]\n";
        assert!(DesignConfig::from_toml_str(text).is_err());
    }

    #[test]
    fn round_trip_explicit_layout() {
        let d = crate::fixtures::example3();
        let cfg = DesignConfig::from_design(&d, Tolerances::default());
        let back = DesignConfig::from_toml_str(&cfg.to_toml_string().unwrap()).unwrap();
        assert_eq!(back.design().unwrap(), d);
    }
}
