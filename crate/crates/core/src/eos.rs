//! Species constants and equation-of-state closures.
//!
//! Every species follows `Z = 1 + a p`, so its individual density at pressure
//! `p` is `p / (R T (1 + a p))`. For a mixture given by partial densities the
//! implicit volume constraint `Σ d_α / ρ_α(p) = 1` is linear in `p` and
//! solves to
//!
//! ```text
//! p = Σ d_α R_α T / (1 − Σ d_α R_α T a_α)
//! ```
//!
//! In ideal mode every slope is taken as zero.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sound speed of natural gas at the reference state, m/s.
pub const NG_SOUND_SPEED: f64 = 377.9683;
/// Sound speed of hydrogen at the reference state, m/s.
pub const H2_SOUND_SPEED: f64 = 1320.0;
pub const NG_COMPRESSIBILITY: f64 = -0.25e-7;
pub const H2_COMPRESSIBILITY: f64 = 0.59e-8;
pub const DEFAULT_TEMPERATURE: f64 = 298.15;
/// Pressure used to cap `Z` when bounding wave speeds.
pub const DEFAULT_P_MAX: f64 = 10.0e6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GasSpecies {
    pub name: String,
    /// Specific gas constant, J/(kg K).
    pub gas_constant: f64,
    /// Compressibility slope `a` in `Z = 1 + a p`, 1/Pa.
    #[serde(default)]
    pub compressibility: f64,
    /// Diffusion coefficient, m²/s.
    #[serde(default)]
    pub diffusion: f64,
}

impl GasSpecies {
    pub fn new(name: &str, gas_constant: f64, compressibility: f64) -> Self {
        GasSpecies {
            name: name.to_string(),
            gas_constant,
            compressibility,
            diffusion: 0.0,
        }
    }

    /// Species defined by its isothermal sound speed `√(R T)` at `temperature`.
    pub fn from_sound_speed(name: &str, sound_speed: f64, temperature: f64, a: f64) -> Self {
        GasSpecies::new(name, sound_speed * sound_speed / temperature, a)
    }

    pub fn natural_gas(temperature: f64) -> Self {
        Self::from_sound_speed("NG", NG_SOUND_SPEED, temperature, NG_COMPRESSIBILITY)
    }

    pub fn hydrogen(temperature: f64) -> Self {
        Self::from_sound_speed("H2", H2_SOUND_SPEED, temperature, H2_COMPRESSIBILITY)
    }

    pub fn validate(&self) -> Vec<String> {
        let mut v = Vec::new();
        if !(self.gas_constant > 0.0 && self.gas_constant.is_finite()) {
            v.push(format!("species {}: gas constant must be positive", self.name));
        }
        if !self.compressibility.is_finite() {
            v.push(format!("species {}: compressibility must be finite", self.name));
        }
        if !(self.diffusion >= 0.0 && self.diffusion.is_finite()) {
            v.push(format!("species {}: diffusion must be non-negative", self.name));
        }
        v
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum EosMode {
    #[default]
    Ideal,
    #[serde(alias = "linear-z")]
    LinearZ,
}

impl std::str::FromStr for EosMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ideal" => Ok(EosMode::Ideal),
            "linear-z" | "linear_z" => Ok(EosMode::LinearZ),
            other => Err(Error::Input(format!("unknown EOS mode '{other}'"))),
        }
    }
}

/// Closure for one run: species table, temperature and mode, with `R T` and
/// the effective slopes cached.
#[derive(Debug, Clone)]
pub struct Eos {
    species: Vec<GasSpecies>,
    temperature: f64,
    mode: EosMode,
    rt: Vec<f64>,
    a: Vec<f64>,
}

impl Eos {
    pub fn new(species: Vec<GasSpecies>, temperature: f64, mode: EosMode) -> Result<Self> {
        if species.is_empty() {
            return Err(Error::InvalidArgument("empty species list".into()));
        }
        if !(temperature > 0.0 && temperature.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "temperature {temperature} must be positive"
            )));
        }
        let problems: Vec<String> = species.iter().flat_map(|s| s.validate()).collect();
        if !problems.is_empty() {
            return Err(Error::Invalid(problems));
        }
        let rt = species.iter().map(|s| s.gas_constant * temperature).collect();
        let a = species
            .iter()
            .map(|s| match mode {
                EosMode::Ideal => 0.0,
                EosMode::LinearZ => s.compressibility,
            })
            .collect();
        Ok(Eos {
            species,
            temperature,
            mode,
            rt,
            a,
        })
    }

    pub fn species(&self) -> &[GasSpecies] {
        &self.species
    }

    pub fn len(&self) -> usize {
        self.species.len()
    }

    pub fn is_empty(&self) -> bool {
        self.species.is_empty()
    }

    pub fn temperature(&self) -> f64 {
        self.temperature
    }

    pub fn mode(&self) -> EosMode {
        self.mode
    }

    /// `R_α T` per species.
    pub fn rt(&self) -> &[f64] {
        &self.rt
    }

    /// Slopes in effect for the configured mode (zero in ideal mode).
    pub fn slopes(&self) -> &[f64] {
        &self.a
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.species.iter().position(|s| s.name == name)
    }

    /// Mixture pressure from partial densities.
    pub fn pressure(&self, d: &[f64]) -> Result<f64> {
        debug_assert_eq!(d.len(), self.rt.len());
        let mut num = 0.0;
        let mut den = 0.0;
        for ((&di, &rt), &a) in d.iter().zip(&self.rt).zip(&self.a) {
            let w = di * rt;
            num += w;
            den += w * a;
        }
        if num <= 0.0 {
            return Err(Error::Degenerate("pressure of an empty mixture".into()));
        }
        let denominator = 1.0 - den;
        if denominator <= 0.0 {
            return Err(Error::NonPhysicalDensity { denominator });
        }
        Ok(num / denominator)
    }

    /// Density of species `k` alone at pressure `p`.
    pub fn individual_density(&self, p: f64, k: usize) -> Result<f64> {
        let z = 1.0 + self.a[k] * p;
        if !(p > 0.0) || z <= 0.0 {
            return Err(Error::NonPhysicalPressure {
                pressure: p,
                species: self.species[k].name.clone(),
            });
        }
        Ok(p / (self.rt[k] * z))
    }

    /// Total density of a mixture with mass fractions `c` at pressure `p`.
    pub fn mixture_density(&self, p: f64, c: &[f64]) -> Result<f64> {
        let mut inv = 0.0;
        for (k, &ck) in c.iter().enumerate() {
            if ck != 0.0 {
                inv += ck / self.individual_density(p, k)?;
            }
        }
        if inv <= 0.0 {
            return Err(Error::Degenerate("mixture with no mass".into()));
        }
        Ok(1.0 / inv)
    }

    /// Partial densities at pressure `p` for a composition proportional to
    /// `weights` (component mass flows, fractions, ...). `pressure` of the
    /// result reproduces `p`.
    pub fn densities_at_pressure(&self, p: f64, weights: &[f64], out: &mut [f64]) -> Result<()> {
        let mut w = 0.0;
        for ((&wk, &rt), &a) in weights.iter().zip(&self.rt).zip(&self.a) {
            w += wk * rt * (1.0 + a * p);
        }
        if !(w > 0.0) {
            return Err(Error::Degenerate(
                "no admissible composition for nodal densities".into(),
            ));
        }
        for (o, &wk) in out.iter_mut().zip(weights) {
            *o = p * wk / w;
        }
        Ok(())
    }

    /// Share of unit volume occupied by each species. Reporting only.
    pub fn volumetric_fractions(&self, d: &[f64]) -> Result<Vec<f64>> {
        let p = self.pressure(d)?;
        d.iter()
            .enumerate()
            .map(|(k, &dk)| Ok(dk / self.individual_density(p, k)?))
            .collect()
    }

    /// Upper bound on the sound speed over all species, with `Z` capped at
    /// its value for `p_max`.
    pub fn wave_speed_bound(&self, p_max: f64) -> f64 {
        self.rt
            .iter()
            .zip(&self.a)
            .map(|(&rt, &a)| (rt * f64::max(1.0, 1.0 + a * p_max)).sqrt())
            .fold(0.0, f64::max)
    }
}

/// Mass fractions `d_α / Σ d` written into `out`; total density returned.
pub fn mass_fractions(d: &[f64], out: &mut [f64]) -> Result<f64> {
    let total: f64 = d.iter().sum();
    if !(total > 0.0) {
        return Err(Error::Degenerate("mass fractions of an empty mixture".into()));
    }
    for (o, &dk) in out.iter_mut().zip(d) {
        *o = dk / total;
    }
    Ok(total)
}

/// Mean of `(Z − 1)/p` over `(pressure Pa, Z)` samples.
pub fn fit_linear_compressibility(samples: &[(f64, f64)]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::InvalidArgument("no compressibility samples".into()));
    }
    if let Some(&(p, _)) = samples.iter().find(|(p, _)| !(*p > 0.0)) {
        return Err(Error::InvalidArgument(format!("sample pressure {p} must be positive")));
    }
    let sum: f64 = samples.iter().map(|&(p, z)| (z - 1.0) / p).sum();
    Ok(sum / samples.len() as f64)
}
