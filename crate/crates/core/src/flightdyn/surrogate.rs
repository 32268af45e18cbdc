//! SURROGATE aerodynamic dataset and vehicle constants.
//!
//! The real F-18/HARV derivative data is not publicly available in tabular
//! form, so this module ships a plausible F-18-class surrogate: lift rises
//! and stalls past ~0.6 rad, pitch damping and control effectiveness degrade
//! with alpha, directional stability is positive at low alpha and degrades at
//! high alpha. Every table covers the validity range [-0.244, 1.571] rad.
//! No quantitative claim ties these numbers to the actual aircraft.

use std::collections::BTreeMap;

use super::aero::{AeroDataset, AeroTable};
use super::{VehicleParams, ALPHA_MAX, ALPHA_MIN};

/// Throttle fraction giving a trim solution at moderate alpha.
pub const DEFAULT_ETA: f64 = 0.09;
/// Simulation timestep (s).
pub const DEFAULT_DT: f64 = 0.01;

/// F-18 HARV-class mass and geometry constants (public ballpark values).
pub fn params() -> VehicleParams {
    VehicleParams {
        m: 1034.0,
        s: 400.0,
        b: 37.42,
        c_bar: 11.52,
        ix: 22789.0,
        iy: 176809.0,
        iz: 191744.0,
        tm: 32000.0,
        rho: 0.002377,
        g: 32.17,
    }
}

fn grid() -> Vec<f64> {
    let mut g = vec![ALPHA_MIN];
    let mut a = -0.20;
    while a < 1.5501 {
        g.push(a);
        a += 0.05;
    }
    g.push(ALPHA_MAX);
    g
}

fn table(f: impl Fn(f64) -> f64) -> AeroTable {
    let alpha = grid();
    let value = alpha.iter().map(|&a| f(a)).collect();
    AeroTable::new(alpha, value)
}

/// Build the surrogate 27-table dataset.
pub fn dataset() -> AeroDataset {
    let span = ALPHA_MAX;
    // Logistic weight: 1 in the attached regime, 0 past stall.
    let attached = |a: f64| 1.0 / (1.0 + ((a - 0.5) / 0.08).exp());

    let mut t: BTreeMap<String, AeroTable> = BTreeMap::new();
    let mut add = |name: &str, f: Box<dyn Fn(f64) -> f64>| {
        t.insert(name.to_string(), table(|a| f(a)));
    };

    add("C_L0", Box::new(move |a| {
        let w = attached(a);
        w * 3.5 * a + (1.0 - w) * 2.2 * a.sin() * a.cos()
    }));
    add("C_Lq", Box::new(move |a| 4.0 * (1.0 - 0.5 * a.max(0.0) / span)));
    add("C_Lde", Box::new(|_| 0.08));
    add("C_D0", Box::new(|a| 0.02 + 1.5 * a.sin().powi(2)));
    add("C_Dq", Box::new(|_| 0.0));
    add("C_Dde", Box::new(|_| 0.01));
    add("C_m0", Box::new(|a| {
        let base = if a <= 0.6 {
            0.04 - 0.35 * a
        } else {
            0.04 - 0.35 * 0.6 - 0.15 * (a - 0.6)
        };
        // Strong restoring cushions near the table edges keep open-loop
        // trajectories inside the validity range.
        let nose_down = 3.0 / (1.0 + ((1.35 - a) / 0.05).exp());
        let nose_up = 2.0 / (1.0 + ((a + 0.16) / 0.025).exp());
        base - nose_down + nose_up
    }));
    add("C_mq", Box::new(move |a| -5.0 + 2.5 * a.max(0.0) / span));
    add("C_mde", Box::new(move |a| -0.9 * (1.0 - 0.55 * a.max(0.0) / span)));
    add("C_Yb", Box::new(move |a| -1.0 + 0.3 * a.max(0.0) / span));
    add("C_Yp", Box::new(|_| 0.0));
    add("C_Yr", Box::new(|_| 0.4));
    add("C_Yde", Box::new(|_| 0.0));
    add("C_Yda", Box::new(|_| 0.02));
    add("C_Ydr", Box::new(|_| 0.05));
    add("C_lb", Box::new(|a| -0.02 - 0.10 * a.cos().max(0.0)));
    add("C_lp", Box::new(move |a| -0.45 * (1.0 - 0.75 * a.max(0.0) / span)));
    add("C_lr", Box::new(|_| 0.15));
    add("C_lde", Box::new(|_| 0.0));
    add("C_lda", Box::new(move |a| 0.12 * (1.0 - 0.6 * a.max(0.0) / span)));
    add("C_ldr", Box::new(|_| 0.015));
    add("C_nb", Box::new(move |a| 0.12 - 0.18 * a.max(0.0) / span));
    add("C_np", Box::new(|_| 0.02));
    add("C_nr", Box::new(move |a| -0.35 * (1.0 - 0.5 * a.max(0.0) / span)));
    add("C_nde", Box::new(|_| 0.0));
    add("C_nda", Box::new(|_| 0.01));
    add("C_ndr", Box::new(move |a| -0.10 * (1.0 - 0.45 * a.max(0.0) / span)));

    AeroDataset::from_tables(t).expect("surrogate dataset is complete and monotone")
}
