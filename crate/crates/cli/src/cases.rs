use std::f64::consts::FRAC_PI_2;
use std::fmt;
use std::str::FromStr;

use lqexplain::ExperimentConfig;

/// Published default seed of every command that takes `--seed`.
pub const DEFAULT_SEED: u64 = 3400;

/// The four reference experiments.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Case {
    /// LTI plant under MPC with horizon 5.
    LtiT5,
    /// LTI plant under MPC with horizon 10.
    LtiT10,
    /// Pendulum under NMPC around the upright position (0 rad).
    PendulumUpright,
    /// Pendulum under NMPC around the horizontal position (pi/2 rad).
    PendulumHorizontal,
}

impl Case {
    pub const ALL: [Case; 4] = [
        Case::LtiT5,
        Case::LtiT10,
        Case::PendulumUpright,
        Case::PendulumHorizontal,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Case::LtiT5 => "lti_t5",
            Case::LtiT10 => "lti_t10",
            Case::PendulumUpright => "pendulum_upright",
            Case::PendulumHorizontal => "pendulum_horizontal",
        }
    }

    pub fn config(self, seed: u64) -> ExperimentConfig {
        match self {
            Case::LtiT5 => ExperimentConfig::lti_mpc(5, seed),
            Case::LtiT10 => ExperimentConfig::lti_mpc(10, seed),
            Case::PendulumUpright => ExperimentConfig::pendulum_nmpc(0.0, seed),
            Case::PendulumHorizontal => ExperimentConfig::pendulum_nmpc(FRAC_PI_2, seed),
        }
    }

    pub fn is_pendulum(self) -> bool {
        matches!(self, Case::PendulumUpright | Case::PendulumHorizontal)
    }
}

impl fmt::Display for Case {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Case {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Case::ALL.into_iter().find(|c| c.name() == s).ok_or_else(|| {
            let names: Vec<_> = Case::ALL.iter().map(|c| c.name()).collect();
            format!("unknown case {s:?}, expected one of {}", names.join(", "))
        })
    }
}
