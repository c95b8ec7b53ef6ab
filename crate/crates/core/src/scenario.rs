//! Scenario files: one JSON document per run.

use std::path::Path;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::carleman::Potential;
use crate::cgo::CgoConfig;
use crate::completion::ExtremalConfig;
use crate::error::{LabError, Result};
use crate::fit::DECAY_SWEEP;
use crate::grid::DiskGrid;
use crate::phase::BoundaryPartition;
use crate::poly::HolomorphicPolynomial;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Pipeline {
    Carleman,
    Cgo,
    Probe,
    Dnmap,
    Complete,
    Phase,
}

impl Pipeline {
    pub fn name(self) -> &'static str {
        match self {
            Pipeline::Carleman => "carleman",
            Pipeline::Cgo => "cgo",
            Pipeline::Probe => "probe",
            Pipeline::Dnmap => "dnmap",
            Pipeline::Complete => "complete",
            Pipeline::Phase => "phase",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PhaseSpec {
    /// Coefficients c₀, c₁, … as [re, im] pairs.
    Coeffs { coeffs: Vec<[f64; 2]> },
    Roots {
        #[serde(default = "unit")]
        lead: [f64; 2],
        roots: Vec<[f64; 2]>,
    },
}

fn unit() -> [f64; 2] {
    [1.0, 0.0]
}

fn c(v: [f64; 2]) -> Complex64 {
    Complex64::new(v[0], v[1])
}

impl PhaseSpec {
    pub fn z_squared() -> Self {
        PhaseSpec::Coeffs {
            coeffs: vec![[0.0, 0.0], [0.0, 0.0], [1.0, 0.0]],
        }
    }

    pub fn poly(&self) -> HolomorphicPolynomial {
        match self {
            PhaseSpec::Coeffs { coeffs } => HolomorphicPolynomial::new(coeffs.iter().map(|&v| c(v)).collect()),
            PhaseSpec::Roots { lead, roots } => {
                HolomorphicPolynomial::from_roots(c(*lead), &roots.iter().map(|&v| c(v)).collect::<Vec<_>>())
            }
        }
    }
}

/// Real potentials by formula.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PotentialSpec {
    Zero,
    Constant {
        value: f64,
    },
    /// height·e^{−|z−c|²/s²}
    Gaussian {
        height: f64,
        width: f64,
        #[serde(default)]
        center: [f64; 2],
    },
    /// height·exp(1 − 1/(1 − |z−c|²/ρ²)) inside the ball, 0 outside
    Bump {
        height: f64,
        radius: f64,
        #[serde(default)]
        center: [f64; 2],
    },
    /// Bump times 1 + depth·cos(mode·arg z)
    AngularBump {
        height: f64,
        radius: f64,
        #[serde(default)]
        center: [f64; 2],
        mode: u32,
        depth: f64,
    },
}

pub fn bump(z: Complex64, radius: f64) -> f64 {
    let t = z.norm_sqr() / (radius * radius);
    if t >= 1.0 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - t)).exp()
    }
}

impl PotentialSpec {
    pub fn eval(&self, z: Complex64) -> f64 {
        match *self {
            PotentialSpec::Zero => 0.0,
            PotentialSpec::Constant { value } => value,
            PotentialSpec::Gaussian { height, width, center } => {
                height * (-(z - c(center)).norm_sqr() / (width * width)).exp()
            }
            PotentialSpec::Bump { height, radius, center } => height * bump(z - c(center), radius),
            PotentialSpec::AngularBump {
                height,
                radius,
                center,
                mode,
                depth,
            } => height * bump(z - c(center), radius) * (1.0 + depth * (mode as f64 * z.arg()).cos()),
        }
    }

    pub fn sample(&self, grid: &Arc<DiskGrid>) -> Potential {
        match self {
            PotentialSpec::Zero => Potential::zero(grid),
            _ => Potential::from_fn(grid, |z| self.eval(z)),
        }
    }

    pub fn label(&self) -> String {
        match self {
            PotentialSpec::Zero => "zero".into(),
            PotentialSpec::Constant { .. } => "constant".into(),
            PotentialSpec::Gaussian { .. } => "gaussian".into(),
            PotentialSpec::Bump { .. } => "bump".into(),
            PotentialSpec::AngularBump { .. } => "angular_bump".into(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub nr: usize,
    pub nt: usize,
    #[serde(default = "collar")]
    pub collar: f64,
}

fn collar() -> f64 {
    0.1
}

impl GridSpec {
    pub const fn new(nr: usize, nt: usize) -> Self {
        Self { nr, nt, collar: 0.1 }
    }

    pub fn build(&self) -> Result<Arc<DiskGrid>> {
        if self.nr > 128 || self.nt > 256 {
            return Err(LabError::ConfigError(format!(
                "grid {}×{} exceeds the 128×256 desk-scale cap",
                self.nr, self.nt
            )));
        }
        DiskGrid::build(self.nr, self.nt, self.collar)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CarlemanSpec {
    pub grid: GridSpec,
    pub tau: Vec<f64>,
    pub manufactured: usize,
    pub weighted_grid: GridSpec,
    pub weighted_tau: Vec<f64>,
}

impl Default for CarlemanSpec {
    fn default() -> Self {
        Self {
            grid: GridSpec::new(96, 192),
            tau: vec![16.0, 32.0, 64.0, 128.0, 256.0],
            manufactured: 10,
            weighted_grid: GridSpec::new(24, 64),
            weighted_tau: DECAY_SWEEP.to_vec(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CgoSpec {
    pub exactness_grid: GridSpec,
    pub random_points: usize,
    pub seed: u64,
    pub defining_grid: GridSpec,
    pub defining_tau: Vec<f64>,
    pub decay_grid: GridSpec,
    pub decay_width: f64,
    pub decay_tail: f64,
    pub build_grid: GridSpec,
    pub amplitude: Vec<[f64; 2]>,
    pub config: CgoConfig,
}

impl Default for CgoSpec {
    fn default() -> Self {
        Self {
            exactness_grid: GridSpec::new(64, 128),
            random_points: 100,
            seed: 7,
            defining_grid: GridSpec::new(128, 256),
            defining_tau: vec![8.0, 32.0, 128.0],
            decay_grid: GridSpec::new(128, 256),
            decay_width: 0.3,
            decay_tail: 0.6,
            build_grid: GridSpec::new(128, 256),
            amplitude: vec![[1.0, 0.0]],
            config: CgoConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProbeSpec {
    pub pairing_grid: GridSpec,
    pub pairing_tau: Vec<f64>,
    pub bump_radius: f64,
    pub identity_potentials: Vec<PotentialSpec>,
    pub identity_grid: GridSpec,
    pub identity_tau: Vec<f64>,
    pub tol_identity: f64,
    pub leading_grid: GridSpec,
    pub leading_width: f64,
    pub derivative_grid: GridSpec,
    pub eps: Vec<f64>,
}

impl Default for ProbeSpec {
    fn default() -> Self {
        Self {
            pairing_grid: GridSpec::new(64, 128),
            pairing_tau: vec![4.0, 6.0, 8.0, 10.0, 12.0, 14.0, 16.0],
            bump_radius: 0.5,
            identity_potentials: vec![
                PotentialSpec::Zero,
                PotentialSpec::Bump {
                    height: 3.0,
                    radius: 0.6,
                    center: [0.0, 0.0],
                },
                PotentialSpec::AngularBump {
                    height: 3.0,
                    radius: 0.5,
                    center: [0.2, 0.1],
                    mode: 3,
                    depth: 0.5,
                },
            ],
            identity_grid: GridSpec::new(24, 128),
            identity_tau: vec![4.0, 5.0, 6.0, 7.0, 8.0],
            tol_identity: 1e-3,
            leading_grid: GridSpec::new(128, 256),
            leading_width: 0.025,
            derivative_grid: GridSpec::new(48, 96),
            eps: crate::stationary::PROBE_EPS.to_vec(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DnSpec {
    pub grid: GridSpec,
    pub modes: usize,
}

impl Default for DnSpec {
    fn default() -> Self {
        Self {
            grid: GridSpec::new(64, 128),
            modes: 16,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CompleteSpec {
    pub extremal: ExtremalConfig,
    pub schedule: Vec<f64>,
    pub samples: usize,
    pub p_eps_samples: usize,
    /// ψ = Re z^k for each listed k (k = 1 is x₁)
    pub harmonics: Vec<usize>,
}

impl Default for CompleteSpec {
    fn default() -> Self {
        Self {
            extremal: ExtremalConfig::default(),
            schedule: crate::completion::default_schedule(),
            samples: 256,
            p_eps_samples: 32,
            harmonics: vec![1, 2, 3],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    #[serde(default)]
    pub pipeline: Option<Pipeline>,
    #[serde(default = "default_phases")]
    pub phases: Vec<PhaseSpec>,
    #[serde(default = "default_potentials")]
    pub potentials: Vec<PotentialSpec>,
    #[serde(default = "default_partition")]
    pub partition: BoundaryPartition,
    #[serde(default = "default_tau")]
    pub tau: Vec<f64>,
    #[serde(default = "default_grid")]
    pub grid: GridSpec,
    #[serde(default)]
    pub output: Option<String>,
    #[serde(default)]
    pub carleman: CarlemanSpec,
    #[serde(default)]
    pub cgo: CgoSpec,
    #[serde(default)]
    pub probe: ProbeSpec,
    #[serde(default)]
    pub dnmap: DnSpec,
    #[serde(default)]
    pub complete: CompleteSpec,
}

fn default_phases() -> Vec<PhaseSpec> {
    vec![PhaseSpec::z_squared()]
}

fn default_potentials() -> Vec<PotentialSpec> {
    vec![PotentialSpec::Zero]
}

fn default_partition() -> BoundaryPartition {
    BoundaryPartition {
        theta0: 0.3,
        eps: 0.45,
        center: std::f64::consts::FRAC_PI_2,
    }
}

fn default_tau() -> Vec<f64> {
    DECAY_SWEEP.to_vec()
}

fn default_grid() -> GridSpec {
    GridSpec::new(128, 256)
}

fn check_sweep(label: &str, tau: &[f64]) -> Result<()> {
    if tau.is_empty() {
        return Err(LabError::ConfigError(format!("empty τ sweep ({label})")));
    }
    if tau.iter().any(|t| !(t.is_finite() && *t >= 0.0)) || tau.windows(2).any(|w| w[1] <= w[0]) {
        return Err(LabError::ConfigError(format!(
            "τ sweep ({label}) must be finite, nonnegative and strictly increasing: {tau:?}"
        )));
    }
    Ok(())
}

impl Scenario {
    pub fn minimal(name: &str, pipeline: Pipeline) -> Self {
        serde_json::from_value(serde_json::json!({ "name": name, "pipeline": pipeline }))
            .expect("defaults deserialize")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let s: Scenario = serde_json::from_str(text)?;
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| LabError::ConfigError(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.name.is_empty() {
            return Err(LabError::ConfigError("scenario needs a name".into()));
        }
        if self.phases.is_empty() {
            return Err(LabError::ConfigError("scenario needs at least one phase".into()));
        }
        self.partition.validate()?;
        check_sweep("tau", &self.tau)?;
        check_sweep("carleman.tau", &self.carleman.tau)?;
        check_sweep("carleman.weighted_tau", &self.carleman.weighted_tau)?;
        check_sweep("cgo.defining_tau", &self.cgo.defining_tau)?;
        check_sweep("probe.pairing_tau", &self.probe.pairing_tau)?;
        check_sweep("probe.identity_tau", &self.probe.identity_tau)?;
        Ok(())
    }

    pub fn phase(&self) -> HolomorphicPolynomial {
        self.phases[0].poly()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_sweep_is_rejected() {
        let r = Scenario::from_json(r#"{"name": "x", "pipeline": "carleman", "tau": []}"#);
        assert!(matches!(r, Err(LabError::ConfigError(m)) if m.contains("empty")));
        let r = Scenario::from_json(r#"{"name": "x", "tau": [8, 4]}"#);
        assert!(matches!(r, Err(LabError::ConfigError(_))));
    }

    #[test]
    fn defaults_round_trip() {
        let s = Scenario::minimal("probe", Pipeline::Probe);
        let text = serde_json::to_string(&s).unwrap();
        assert_eq!(Scenario::from_json(&text).unwrap(), s);
        assert_eq!(s.phase().degree(), 2);
    }

    #[test]
    fn potentials_by_formula() {
        let b = PotentialSpec::Bump {
            height: 2.0,
            radius: 0.5,
            center: [0.0, 0.0],
        };
        assert_eq!(b.eval(Complex64::new(0.0, 0.0)), 2.0);
        assert_eq!(b.eval(Complex64::new(0.6, 0.0)), 0.0);
        let g = DiskGrid::build(8, 16, 0.1).unwrap();
        assert!(PotentialSpec::Zero.sample(&g).is_zero());
    }
}
