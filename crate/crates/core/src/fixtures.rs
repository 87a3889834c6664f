//! Reference designs shipped with the crate (see `fixtures/*.toml`).

use crate::config::DesignConfig;
use crate::designer::DesignRecipe;
use crate::model::CalibrationDesign;

pub const EXAMPLE1: &str = include_str!("../fixtures/example1.toml");
pub const EXAMPLE1_RECIPE: &str = include_str!("../fixtures/example1-recipe.toml");
pub const EXAMPLE2: &str = include_str!("../fixtures/example2.toml");
pub const EXAMPLE2_RECIPE: &str = include_str!("../fixtures/example2-recipe.toml");
pub const EXAMPLE3: &str = include_str!("../fixtures/example3.toml");
pub const EXAMPLE3_RECIPE: &str = include_str!("../fixtures/example3-recipe.toml");
pub const AUTOCALIBRATION: &str = include_str!("../fixtures/autocalibration.toml");
pub const AUTOCALIBRATION_RECIPE: &str = include_str!("../fixtures/autocalibration-recipe.toml");

fn design(text: &str) -> CalibrationDesign {
    DesignConfig::from_toml_str(text)
        .and_then(|c| c.design())
        .expect("bundled fixture is valid")
}

fn recipe(text: &str) -> DesignRecipe {
    DesignConfig::from_toml_str(text)
        .expect("bundled fixture is valid")
        .recipe()
        .expect("fixture has a recipe")
}

/// 6 m support, 6 marks at constant 1 m spacing, 2 sensors.
pub fn example1() -> CalibrationDesign {
    design(EXAMPLE1)
}

/// 12 m support, 13 marks, 3 sensors.
pub fn example2() -> CalibrationDesign {
    design(EXAMPLE2)
}

/// 18 m support, 14 marks, 5 sensors.
pub fn example3() -> CalibrationDesign {
    design(EXAMPLE3)
}

/// 3 m support, 11 marks, 3 sensors; 26 exploitable events.
pub fn autocalibration() -> CalibrationDesign {
    design(AUTOCALIBRATION)
}

pub fn example1_recipe() -> DesignRecipe {
    recipe(EXAMPLE1_RECIPE)
}

pub fn example2_recipe() -> DesignRecipe {
    recipe(EXAMPLE2_RECIPE)
}

pub fn example3_recipe() -> DesignRecipe {
    recipe(EXAMPLE3_RECIPE)
}

pub fn autocalibration_recipe() -> DesignRecipe {
    recipe(AUTOCALIBRATION_RECIPE)
}

pub fn all() -> Vec<CalibrationDesign> {
    vec![example1(), example2(), example3(), autocalibration()]
}
