//! JSON run configuration.

use std::path::Path;

use anyhow::{bail, Context, Result};
use mismatch_relay::channels::{self, GridSpec, IqImbalanceParams, Scheme};
use mismatch_relay::prob::bits_to_nats;
use mismatch_relay::{RelayProblem, SolverConfig};
use ndarray::Array2;
use serde::{Deserialize, Serialize};

/// One channel model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ChannelSpec {
    Quaternary {
        epsilon: f64,
        /// Explicit 4×4 transition matrix; the decoding metric still follows `epsilon`.
        #[serde(default)]
        transition: Option<Vec<Vec<f64>>>,
    },
    AwgnIq {
        scheme: Scheme,
        #[serde(default = "default_eta")]
        eta: f64,
        #[serde(default = "default_theta")]
        theta: f64,
        snr_db: f64,
        #[serde(default = "default_grid_n")]
        grid_n: usize,
        #[serde(default = "default_half_width")]
        half_width: f64,
        /// Decoder's channel estimate; identity when absent.
        #[serde(default)]
        h_hat: Option<[[f64; 2]; 2]>,
    },
}

fn default_eta() -> f64 {
    0.9
}

fn default_theta() -> f64 {
    std::f64::consts::PI / 18.0
}

fn default_grid_n() -> usize {
    225
}

fn default_half_width() -> f64 {
    8.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Mode {
    /// Solve at `lambda`, or at `solver.lambda` when omitted.
    FixedLambda {
        #[serde(default)]
        lambda: Option<f64>,
    },
    /// Search `λ` so that `I(Y;Z)` meets `b_bits`.
    Budget { b_bits: f64 },
}

impl Default for Mode {
    fn default() -> Self {
        Mode::FixedLambda { lambda: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Units {
    #[default]
    Bits,
    Nats,
}

impl Units {
    pub fn from_nats(self, nats: f64) -> f64 {
        match self {
            Units::Bits => nats / std::f64::consts::LN_2,
            Units::Nats => nats,
        }
    }

    pub fn suffix(self) -> &'static str {
        match self {
            Units::Bits => "bits",
            Units::Nats => "nats",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    Epsilon,
    #[serde(rename = "B")]
    Budget,
    SnrDb,
    Lambda,
}

impl Axis {
    pub fn name(self) -> &'static str {
        match self {
            Axis::Epsilon => "epsilon",
            Axis::Budget => "B",
            Axis::SnrDb => "snr_db",
            Axis::Lambda => "lambda",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub axis: Axis,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub channel: ChannelSpec,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub mode: Mode,
    /// Output path prefix; empty means `run`.
    #[serde(default)]
    pub output: String,
    #[serde(default)]
    pub report_units: Units,
    #[serde(default)]
    pub sweep: Option<SweepSpec>,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let config: RunConfig = serde_json::from_str(text)
            .map_err(|e| anyhow::anyhow!("config line {}, column {}: {e}", e.line(), e.column()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
        Self::from_json(&text).with_context(|| format!("in {}", path.display()))
    }

    pub fn validate(&self) -> Result<()> {
        if let Mode::Budget { b_bits } = self.mode {
            if !(b_bits.is_finite() && b_bits >= 0.0) {
                bail!("mode.b_bits must be a non-negative number, got {b_bits}");
            }
        }
        if let Mode::FixedLambda { lambda: Some(l) } = self.mode {
            if !(l.is_finite() && l > 0.0) {
                bail!("mode.lambda must be positive, got {l}");
            }
        }
        self.solver_config().validate().context("in `solver`")?;
        self.problem().context("in `channel`")?;
        if let Some(sweep) = &self.sweep {
            if sweep.values.is_empty() {
                bail!("sweep.values is empty");
            }
            match (sweep.axis, &self.channel) {
                (Axis::Epsilon, ChannelSpec::AwgnIq { .. }) => bail!("sweep axis epsilon needs a quaternary channel"),
                (Axis::SnrDb, ChannelSpec::Quaternary { .. }) => bail!("sweep axis snr_db needs an awgn_iq channel"),
                _ => {}
            }
        }
        Ok(())
    }

    /// Output prefix, defaulting to `run`.
    pub fn prefix(&self) -> &str {
        if self.output.is_empty() {
            "run"
        } else {
            &self.output
        }
    }

    /// Solver settings with the mode applied; budgets are converted to nats.
    pub fn solver_config(&self) -> SolverConfig {
        let mut solver = self.solver.clone();
        match self.mode {
            Mode::FixedLambda { lambda } => {
                if let Some(l) = lambda {
                    solver.lambda = l;
                }
                solver.compression_target = None;
            }
            Mode::Budget { b_bits } => solver.compression_target = Some(bits_to_nats(b_bits)),
        }
        solver
    }

    pub fn problem(&self) -> Result<RelayProblem> {
        let problem = match &self.channel {
            ChannelSpec::Quaternary { epsilon, transition } => {
                let theta = match transition {
                    Some(rows) => {
                        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
                        if rows.len() != 4 || rows.iter().any(|r| r.len() != 4) {
                            bail!("quaternary transition must be 4×4");
                        }
                        channels::quaternary_channel_from(Array2::from_shape_vec((4, 4), flat)?)?
                    }
                    None => channels::quaternary_channel(*epsilon)?,
                };
                RelayProblem::new(theta, channels::metric_from_decoding_rule(*epsilon)?)?
            }
            ChannelSpec::AwgnIq {
                scheme,
                eta,
                theta,
                snr_db,
                grid_n,
                half_width,
                h_hat,
            } => {
                let grid = GridSpec::new(*grid_n)?.with_half_width(*half_width)?;
                let params = IqImbalanceParams::new(*eta, *theta, *snr_db)?;
                let points = channels::constellation(*scheme);
                RelayProblem::new(
                    channels::awgn_iq_channel(&points, &params, &grid)?,
                    channels::mismatch_metric_awgn(&points, &grid, *h_hat)?,
                )?
            }
        };
        Ok(problem)
    }

    /// Grid of an AWGN channel, if any.
    pub fn grid(&self) -> Result<Option<GridSpec>> {
        match &self.channel {
            ChannelSpec::AwgnIq { grid_n, half_width, .. } => {
                Ok(Some(GridSpec::new(*grid_n)?.with_half_width(*half_width)?))
            }
            ChannelSpec::Quaternary { .. } => Ok(None),
        }
    }

    /// Copy of this config with one sweep coordinate applied.
    pub fn at(&self, axis: Axis, value: f64) -> RunConfig {
        let mut point = self.clone();
        point.sweep = None;
        match axis {
            Axis::Epsilon => {
                if let ChannelSpec::Quaternary { epsilon, .. } = &mut point.channel {
                    *epsilon = value;
                }
            }
            Axis::SnrDb => {
                if let ChannelSpec::AwgnIq { snr_db, .. } = &mut point.channel {
                    *snr_db = value;
                }
            }
            Axis::Budget => point.mode = Mode::Budget { b_bits: value },
            Axis::Lambda => point.mode = Mode::FixedLambda { lambda: Some(value) },
        }
        point
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_takes_defaults() {
        let c = RunConfig::from_json(r#"{"channel": {"type": "quaternary", "epsilon": 0.3}}"#).unwrap();
        assert_eq!(c.prefix(), "run");
        assert_eq!(c.report_units, Units::Bits);
        assert_eq!(c.solver, SolverConfig::default());
        assert_eq!(c.solver_config().compression_target, None);
    }

    #[test]
    fn budget_is_converted_to_nats() {
        let c = RunConfig::from_json(
            r#"{"channel": {"type": "quaternary", "epsilon": 0.3}, "mode": {"kind": "budget", "b_bits": 1.0}}"#,
        )
        .unwrap();
        let target = c.solver_config().compression_target.unwrap();
        assert!((target - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_configs() {
        for text in [
            r#"{"channel": {"type": "quaternary", "epsilon": 0.3}, "mode": {"kind": "budget", "b_bits": -1}}"#,
            r#"{"channel": {"type": "quaternary", "epsilon": 0.9}}"#,
            r#"{"channel": {"type": "awgn_iq", "scheme": "qpsk", "snr_db": 10, "grid_n": 50}}"#,
            r#"{"channel": {"type": "quaternary", "epsilon": 0.3}, "extra": 1}"#,
            r#"{"channel": {"type": "quaternary", "epsilon": 0.3}, "sweep": {"axis": "snr_db", "values": [5]}}"#,
        ] {
            assert!(RunConfig::from_json(text).is_err(), "{text}");
        }
    }

    #[test]
    fn parse_errors_carry_position() {
        let err = RunConfig::from_json("{\n  \"channel\": }").unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
    }
}
