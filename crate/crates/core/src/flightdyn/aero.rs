//! Alpha-tabulated aerodynamic derivatives and the coefficient buildup.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{AircraftState, ControlInput, FlightDynError, VehicleParams, ALPHA_MAX, ALPHA_MIN};

/// The 27 derivative tables the buildup equations consume.
pub const DERIVATIVE_NAMES: [&str; 27] = [
    "C_L0", "C_Lq", "C_Lde", "C_D0", "C_Dq", "C_Dde", "C_m0", "C_mq", "C_mde", "C_Yb", "C_Yp",
    "C_Yr", "C_Yde", "C_Yda", "C_Ydr", "C_lb", "C_lp", "C_lr", "C_lde", "C_lda", "C_ldr", "C_nb",
    "C_np", "C_nr", "C_nde", "C_nda", "C_ndr",
];

/// A 1-D derivative table over a strictly increasing alpha grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AeroTable {
    pub alpha: Vec<f64>,
    pub value: Vec<f64>,
}

impl AeroTable {
    pub fn new(alpha: Vec<f64>, value: Vec<f64>) -> Self {
        Self { alpha, value }
    }

    fn validate(&self, name: &str) -> Result<(), FlightDynError> {
        if self.alpha.is_empty() || self.alpha.len() != self.value.len() {
            return Err(FlightDynError::EmptyTable(name.to_string()));
        }
        if self.alpha.windows(2).any(|w| w[1] <= w[0]) {
            return Err(FlightDynError::NonMonotoneGrid(name.to_string()));
        }
        if self.alpha[0] > ALPHA_MIN || *self.alpha.last().unwrap() < ALPHA_MAX {
            return Err(FlightDynError::InsufficientCoverage { name: name.to_string() });
        }
        Ok(())
    }

    /// Piecewise-linear interpolation; exact at grid nodes, error outside the grid.
    pub fn lookup(&self, alpha: f64) -> Result<f64, FlightDynError> {
        let n = self.alpha.len();
        if alpha < self.alpha[0] || alpha > self.alpha[n - 1] {
            return Err(FlightDynError::AlphaOutOfRange { alpha });
        }
        // partition_point gives the first node strictly greater than alpha
        let hi = self.alpha.partition_point(|&a| a <= alpha);
        if hi == n {
            return Ok(self.value[n - 1]);
        }
        if hi == 0 {
            return Ok(self.value[0]);
        }
        let (a0, a1) = (self.alpha[hi - 1], self.alpha[hi]);
        if alpha == a0 {
            return Ok(self.value[hi - 1]);
        }
        let t = (alpha - a0) / (a1 - a0);
        Ok(self.value[hi - 1] + t * (self.value[hi] - self.value[hi - 1]))
    }
}

/// The complete set of 27 derivative tables.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AeroDataset {
    tables: BTreeMap<String, AeroTable>,
}

impl AeroDataset {
    pub fn from_tables(tables: BTreeMap<String, AeroTable>) -> Result<Self, FlightDynError> {
        for name in DERIVATIVE_NAMES {
            let table = tables
                .get(name)
                .ok_or_else(|| FlightDynError::MissingDerivative(name.to_string()))?;
            table.validate(name)?;
        }
        Ok(Self { tables })
    }

    /// Parse a structured table file: one `{"alpha": [...], "value": [...]}`
    /// entry per derivative name.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, FlightDynError> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self, FlightDynError> {
        let tables: BTreeMap<String, AeroTable> =
            serde_json::from_str(text).map_err(|e| FlightDynError::Parse(e.to_string()))?;
        Self::from_tables(tables)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.tables).expect("dataset serializes")
    }

    pub fn table(&self, name: &str) -> &AeroTable {
        &self.tables[name]
    }

    fn d(&self, name: &str, alpha: f64) -> Result<f64, FlightDynError> {
        self.tables[name].lookup(alpha)
    }
}

/// Dimensionless force and moment coefficients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AeroCoefficients {
    pub cl: f64,
    pub cd: f64,
    pub cy: f64,
    pub c_roll: f64,
    pub c_pitch: f64,
    pub c_yaw: f64,
}

/// Linear buildup of the six coefficients with derivatives interpolated at
/// alpha. Longitudinal rate terms are nondimensionalized by q c_bar / 2V,
/// lateral ones by p b / 2V and r b / 2V.
pub fn compute_coefficients(
    state: &AircraftState,
    control: &ControlInput,
    params: &VehicleParams,
    aero: &AeroDataset,
) -> Result<AeroCoefficients, FlightDynError> {
    if state.v <= 0.0 {
        return Err(FlightDynError::NonPositiveAirspeed(state.v));
    }
    let a = state.alpha;
    let qc = state.q * params.c_bar / (2.0 * state.v);
    let pb = state.p * params.b / (2.0 * state.v);
    let rb = state.r * params.b / (2.0 * state.v);
    let (de, da, dr) = (control.delta_e, control.delta_a, control.delta_r);

    let cl = aero.d("C_L0", a)? + aero.d("C_Lq", a)? * qc + aero.d("C_Lde", a)? * de;
    let cd = aero.d("C_D0", a)? + aero.d("C_Dq", a)? * qc + aero.d("C_Dde", a)? * de;
    let c_pitch = aero.d("C_m0", a)? + aero.d("C_mq", a)? * qc + aero.d("C_mde", a)? * de;
    let cy = aero.d("C_Yb", a)? * state.beta
        + aero.d("C_Yp", a)? * pb
        + aero.d("C_Yr", a)? * rb
        + aero.d("C_Yde", a)? * de
        + aero.d("C_Yda", a)? * da
        + aero.d("C_Ydr", a)? * dr;
    let c_roll = aero.d("C_lb", a)? * state.beta
        + aero.d("C_lp", a)? * pb
        + aero.d("C_lr", a)? * rb
        + aero.d("C_lde", a)? * de
        + aero.d("C_lda", a)? * da
        + aero.d("C_ldr", a)? * dr;
    let c_yaw = aero.d("C_nb", a)? * state.beta
        + aero.d("C_np", a)? * pb
        + aero.d("C_nr", a)? * rb
        + aero.d("C_nde", a)? * de
        + aero.d("C_nda", a)? * da
        + aero.d("C_ndr", a)? * dr;

    Ok(AeroCoefficients { cl, cd, cy, c_roll, c_pitch, c_yaw })
}
