//! Plan configuration files: JSON, stable field order, no timestamps, so
//! identical plans serialize to identical bytes.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::generator::{self, Plan};

/// Loads and validates a plan. Malformed JSON and unknown or conflicting
/// violation ids are rejected before any generation starts.
pub fn load_plan(path: &Path) -> Result<Plan> {
    let text = fs::read_to_string(path)?;
    let plan: Plan = serde_json::from_str(&text)?;
    validate_plan(&plan)?;
    Ok(plan)
}

pub fn save_plan(path: &Path, plan: &Plan) -> Result<()> {
    validate_plan(plan)?;
    let mut text = serde_json::to_string_pretty(plan)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// Structural checks plus a dry expansion, so every id, level, and
/// composition the plan names is resolvable.
pub fn validate_plan(plan: &Plan) -> Result<()> {
    if plan.violations.is_empty() {
        return Err(Error::Config("plan lists no violations".into()));
    }
    if plan.count == 0 {
        return Err(Error::Config("plan sample count must be >= 1".into()));
    }
    if plan.regimes.is_empty() {
        return Err(Error::Config("plan lists no regimes".into()));
    }
    for &level in &plan.levels {
        if !(1..=5).contains(&level) {
            return Err(Error::Config(format!("level {level} outside 1..=5")));
        }
    }
    if plan.levels.is_empty() && plan.violations.iter().any(|v| v != "none") {
        return Err(Error::Config("plan lists violations but no levels".into()));
    }
    generator::expand_plan(plan)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scm::Regime;
    use tempfile::tempdir;

    fn mini_plan() -> Plan {
        Plan {
            violations: vec!["obs_add".into(), "none".into()],
            levels: vec![1, 3, 5],
            regimes: vec![Regime { d: 5, l: 3, t: 250, p_lag: 0.075, p_inst: 0.0 }],
            count: 4,
            seed: 11,
            schedule_variant: Default::default(),
            exogenous_path: None,
        }
    }

    #[test]
    fn plan_round_trips_through_json() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("plan.json");
        let plan = mini_plan();
        save_plan(&path, &plan).unwrap();
        let back = load_plan(&path).unwrap();
        assert_eq!(back.violations, plan.violations);
        assert_eq!(back.levels, plan.levels);
        assert_eq!(back.regimes.len(), 1);
        assert_eq!(back.count, 4);
        assert_eq!(back.seed, 11);
        // identical plans serialize to identical bytes
        let path2 = dir.path().join("plan2.json");
        save_plan(&path2, &back).unwrap();
        assert_eq!(fs::read(&path).unwrap(), fs::read(&path2).unwrap());
    }

    #[test]
    fn unknown_violation_is_a_config_error() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("plan.json");
        let mut plan = mini_plan();
        plan.violations = vec!["not_a_violation".into()];
        assert!(save_plan(&path, &plan).is_err());
    }

    #[test]
    fn structural_defects_are_rejected() {
        let mut empty = mini_plan();
        empty.violations.clear();
        assert!(matches!(validate_plan(&empty), Err(Error::Config(_))));

        let mut zero = mini_plan();
        zero.count = 0;
        assert!(matches!(validate_plan(&zero), Err(Error::Config(_))));

        let mut bad_level = mini_plan();
        bad_level.levels = vec![0];
        assert!(matches!(validate_plan(&bad_level), Err(Error::Config(_))));

        let mut no_levels = mini_plan();
        no_levels.levels.clear();
        assert!(matches!(validate_plan(&no_levels), Err(Error::Config(_))));

        // "none" alone needs no levels: it always runs at level 0
        let mut none_only = mini_plan();
        none_only.violations = vec!["none".into()];
        none_only.levels.clear();
        assert!(validate_plan(&none_only).is_ok());
    }

    #[test]
    fn malformed_json_is_rejected() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("plan.json");
        fs::write(&path, "{\"violations\": [\"obs_add\"").unwrap();
        assert!(load_plan(&path).is_err());
    }
}
