//! Run configuration: a single TOML file with documented defaults.
//! Unknown keys are rejected.

use serde::Deserialize;

use bcmtor::tor::PipelineParams;
use bcmtor::{Potential, SimGrid};

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub geometry: Geometry,
    pub resolution: Resolution,
    pub potential: PotentialSpec,
    pub tolerances: Tolerances,
    pub family: Family,
    pub forward: Forward,
    pub stability: Stability,
    pub lemmas: Lemmas,
    pub output: Output,
    pub seed: u64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Geometry {
    /// Interval length L.
    pub length: f64,
    /// Observation horizon T; response data live on [0, 2T].
    pub horizon: f64,
}

impl Default for Geometry {
    fn default() -> Self {
        Self { length: 1.0, horizon: 0.45 }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Resolution {
    pub n_x: usize,
}

impl Default for Resolution {
    fn default() -> Self {
        Self { n_x: 400 }
    }
}

/// Named builtin potentials plus tabulated samples.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PotentialSpec {
    #[default]
    Zero,
    Constant { c: f64 },
    GaussianBump { center: f64, width: f64, depth: f64, offset: f64 },
    Table { xs: Vec<f64>, qs: Vec<f64> },
}

impl PotentialSpec {
    pub fn build(&self, grid: &SimGrid) -> bcmtor::Result<Potential> {
        match self {
            PotentialSpec::Zero => Ok(Potential::zero(grid)),
            PotentialSpec::Constant { c } => Potential::constant(grid, *c),
            PotentialSpec::GaussianBump { center, width, depth, offset } => {
                Potential::gaussian_bump(grid, *center, *width, *depth, *offset)
            }
            PotentialSpec::Table { xs, qs } => Potential::from_table(grid, xs, qs),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub floor_rel: f64,
    pub rank_tol: f64,
    pub conv_tol: f64,
    pub ridge_rel: f64,
    pub trim_frac: f64,
    pub support_cut: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        let p = PipelineParams::default();
        Self {
            floor_rel: p.floor_rel,
            rank_tol: p.rank_tol,
            conv_tol: p.conv_tol,
            ridge_rel: p.ridge_rel,
            trim_frac: p.trim_frac,
            support_cut: p.support_cut,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Family {
    pub size: usize,
}

impl Default for Family {
    fn default() -> Self {
        Self { size: 8 }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Forward {
    /// Control driving the forward command; currently `sin_squared`.
    pub control: ForwardControl,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ForwardControl {
    /// `f(t) = sin^2(pi t / T)`.
    SinSquared,
}

impl Default for Forward {
    fn default() -> Self {
        Self { control: ForwardControl::SinSquared }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Stability {
    /// Levels j = 0..=levels of the schedule q_j = q + decay^j p.
    pub levels: usize,
    pub decay: f64,
    pub perturbation: PotentialSpec,
}

impl Default for Stability {
    fn default() -> Self {
        Self {
            levels: 6,
            decay: 0.5,
            perturbation: PotentialSpec::GaussianBump {
                center: 0.25,
                width: 0.08,
                depth: 0.5,
                offset: 0.0,
            },
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Lemmas {
    pub dim: usize,
    pub levels: usize,
}

impl Default for Lemmas {
    fn default() -> Self {
        Self { dim: 24, levels: 12 }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Output {
    pub dir: Option<String>,
}

impl RunConfig {
    pub fn params(&self) -> PipelineParams {
        PipelineParams {
            floor_rel: self.tolerances.floor_rel,
            rank_tol: self.tolerances.rank_tol,
            conv_tol: self.tolerances.conv_tol,
            ridge_rel: self.tolerances.ridge_rel,
            trim_frac: self.tolerances.trim_frac,
            support_cut: self.tolerances.support_cut,
            family_size: self.family.size,
        }
    }

    pub fn grid(&self) -> bcmtor::Result<SimGrid> {
        SimGrid::new(self.geometry.length, self.geometry.horizon, self.resolution.n_x)
    }
}

/// Parses a config file; toml errors carry line/column positions.
pub fn parse(text: &str) -> Result<RunConfig, String> {
    toml::from_str(text).map_err(|e| e.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_parse_from_empty_config() {
        let cfg = parse("").unwrap();
        assert_eq!(cfg.resolution.n_x, 400);
        assert_eq!(cfg.family.size, 8);
        assert!(matches!(cfg.potential, PotentialSpec::Zero));
    }

    #[test]
    fn unknown_keys_are_rejected_with_position() {
        let err = parse("[geometry]\nlength = 1.0\nwhatever = 3\n").unwrap_err();
        assert!(err.contains("whatever"), "{err}");
        assert!(err.contains("line"), "{err}");
    }

    #[test]
    fn missing_required_potential_key_is_named() {
        let err = parse("[potential]\nkind = \"gaussian_bump\"\ncenter = 0.4\n").unwrap_err();
        assert!(err.contains("width") || err.contains("missing"), "{err}");
    }

    #[test]
    fn fixture_config_builds() {
        let text = r#"
[geometry]
length = 1.0
horizon = 0.45

[resolution]
n_x = 400

[potential]
kind = "gaussian_bump"
center = 0.4
width = 0.22360679774997896
depth = -1.5
offset = 2.0
"#;
        let cfg = parse(text).unwrap();
        let grid = cfg.grid().unwrap();
        let q = cfg.potential.build(&grid).unwrap();
        assert_eq!(q.values.len(), 401);
    }
}
