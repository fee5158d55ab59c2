//! Time-dependent boundary parameters.

use serde::{Deserialize, Serialize};

use crate::units::{factor, Dim};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Waveform {
    #[default]
    Sin,
    Cos,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Profile {
    Constant {
        value: f64,
    },
    /// `base · (1 + offset + amplitude · wave(omega t + phase))`.
    Sinusoid {
        base: f64,
        amplitude: f64,
        omega: f64,
        #[serde(default)]
        phase: f64,
        #[serde(default)]
        offset: f64,
        #[serde(default)]
        waveform: Waveform,
    },
    /// Linear interpolation through `(t, value)` points, held flat outside.
    PiecewiseLinear {
        points: Vec<(f64, f64)>,
    },
    /// `base + amplitude · tanh(rate (t − center))`.
    TanhRamp {
        base: f64,
        amplitude: f64,
        rate: f64,
        center: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    #[serde(flatten)]
    pub profile: Profile,
    /// Evaluate at `t mod period` when set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub period: Option<f64>,
}

impl Schedule {
    pub fn constant(value: f64) -> Self {
        Schedule {
            profile: Profile::Constant { value },
            period: None,
        }
    }

    pub fn new(profile: Profile) -> Self {
        Schedule { profile, period: None }
    }

    pub fn with_period(mut self, period: f64) -> Self {
        self.period = Some(period);
        self
    }

    pub fn eval(&self, t: f64) -> f64 {
        let t = match self.period {
            Some(p) if p > 0.0 => t.rem_euclid(p),
            _ => t,
        };
        match &self.profile {
            Profile::Constant { value } => *value,
            Profile::Sinusoid {
                base,
                amplitude,
                omega,
                phase,
                offset,
                waveform,
            } => {
                let arg = omega * t + phase;
                let w = match waveform {
                    Waveform::Sin => arg.sin(),
                    Waveform::Cos => arg.cos(),
                };
                base * (1.0 + offset + amplitude * w)
            }
            Profile::PiecewiseLinear { points } => piecewise(points, t),
            Profile::TanhRamp {
                base,
                amplitude,
                rate,
                center,
            } => base + amplitude * (rate * (t - center)).tanh(),
        }
    }

    /// Same schedule with every value multiplied by `f`.
    pub fn scaled(mut self, f: f64) -> Self {
        match &mut self.profile {
            Profile::Constant { value } => *value *= f,
            Profile::Sinusoid { base, .. } => *base *= f,
            Profile::PiecewiseLinear { points } => points.iter_mut().for_each(|p| p.1 *= f),
            Profile::TanhRamp { base, amplitude, .. } => {
                *base *= f;
                *amplitude *= f;
            }
        }
        self
    }

    /// Times at which the profile has kinks or should otherwise be probed.
    pub fn breakpoints(&self) -> Vec<f64> {
        match &self.profile {
            Profile::PiecewiseLinear { points } => points.iter().map(|p| p.0).collect(),
            Profile::TanhRamp { center, .. } => vec![*center],
            _ => Vec::new(),
        }
    }

    pub fn validate(&self) -> Vec<String> {
        let mut v = Vec::new();
        if let Profile::PiecewiseLinear { points } = &self.profile {
            if points.is_empty() {
                v.push("piecewise-linear schedule has no points".to_string());
            }
            if points.windows(2).any(|w| !(w[1].0 > w[0].0)) {
                v.push("piecewise-linear breakpoints must be strictly increasing".to_string());
            }
        }
        if let Some(p) = self.period {
            if !(p > 0.0) {
                v.push(format!("schedule period {p} must be positive"));
            }
        }
        v
    }
}

fn piecewise(points: &[(f64, f64)], t: f64) -> f64 {
    let Some(first) = points.first() else {
        return 0.0;
    };
    if t <= first.0 {
        return first.1;
    }
    // First breakpoint strictly after t.
    let k = points.partition_point(|p| p.0 <= t);
    if k == points.len() {
        return points[k - 1].1;
    }
    let (t0, v0) = points[k - 1];
    let (t1, v1) = points[k];
    v0 + (v1 - v0) * (t - t0) / (t1 - t0)
}

/// Schedule as written in an input file: full form with an optional unit,
/// or a bare/tagged number meaning a constant.
#[derive(Deserialize)]
#[serde(untagged)]
pub enum ScheduleInput {
    Bare(f64),
    Tagged {
        value: f64,
        unit: String,
    },
    Full {
        #[serde(flatten)]
        profile: Profile,
        #[serde(default)]
        period: Option<f64>,
        #[serde(default)]
        unit: Option<String>,
    },
}

impl ScheduleInput {
    pub fn into_si(self, dim: Dim) -> Result<Schedule, String> {
        match self {
            ScheduleInput::Bare(v) => Ok(Schedule::constant(v)),
            ScheduleInput::Tagged { value, unit } => Ok(Schedule::constant(value * factor(&unit, dim)?)),
            ScheduleInput::Full { profile, period, unit } => {
                let s = Schedule { profile, period };
                match unit {
                    Some(u) => Ok(s.scaled(factor(&u, dim)?)),
                    None => Ok(s),
                }
            }
        }
    }
}
