use std::fmt;

/// Where in the network a failure happened.
#[derive(Debug, Clone, PartialEq)]
pub enum Location {
    Pipe { pipe: String, cell: Option<usize> },
    Node { node: String },
    Network,
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Location::Pipe { pipe, cell: Some(c) } => write!(f, "pipe {pipe}, cell {c}"),
            Location::Pipe { pipe, cell: None } => write!(f, "pipe {pipe}"),
            Location::Node { node } => write!(f, "node {node}"),
            Location::Network => write!(f, "network"),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("non-physical density: EOS denominator {denominator:e} is not positive")]
    NonPhysicalDensity { denominator: f64 },

    #[error("non-physical pressure {pressure:e} Pa for species {species}")]
    NonPhysicalPressure { pressure: f64, species: String },

    #[error("degenerate state: {0}")]
    Degenerate(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("negative partial density {value:e} for species {species} in cell {cell}")]
    NegativeDensity { cell: usize, species: usize, value: f64 },

    #[error("pressure collapse: steady profile radicand {radicand:e} at x = {x} m")]
    PressureCollapse { x: f64, radicand: f64 },

    #[error("flow reversal at {node} on pipe {pipe}: flux went from {before:e} to {after:e}")]
    Reversal {
        node: String,
        pipe: String,
        before: f64,
        after: f64,
    },

    #[error("time step {dt} s exceeds the stability limit {limit} s")]
    Stability { dt: f64, limit: f64 },

    #[error("compression ratio {ratio} below one on compressor {compressor}")]
    RatioBelowOne { compressor: String, ratio: f64 },

    #[error("inconsistent initial data: {}", .0.join("; "))]
    Inconsistent(Vec<String>),

    #[error("network validation failed: {}", .0.join("; "))]
    Invalid(Vec<String>),

    #[error("input: {0}")]
    Input(String),

    #[error("at t = {time} s, {location}: {source}")]
    At {
        time: f64,
        location: Location,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// Attach time and location. Fills in whatever an inner wrapper left
    /// open (NaN time, empty pipe name) instead of nesting.
    pub fn at(self, time: f64, location: Location) -> Error {
        match self {
            Error::At {
                time: t0,
                location: l0,
                source,
            } => {
                let time = if t0.is_nan() { time } else { t0 };
                let location = match (l0, location) {
                    (Location::Pipe { pipe, cell }, Location::Pipe { pipe: name, .. }) if pipe.is_empty() => {
                        Location::Pipe { pipe: name, cell }
                    }
                    (l0, _) => l0,
                };
                Error::At { time, location, source }
            }
            e => Error::At {
                time,
                location,
                source: Box::new(e),
            },
        }
    }

    /// Tag with a cell index; the pipe and time are filled in by the caller.
    pub fn in_cell(self, cell: usize) -> Error {
        Error::At {
            time: f64::NAN,
            location: Location::Pipe {
                pipe: String::new(),
                cell: Some(cell),
            },
            source: Box::new(self),
        }
    }

    /// Innermost error, with location wrappers stripped.
    pub fn root(&self) -> &Error {
        match self {
            Error::At { source, .. } => source.root(),
            e => e,
        }
    }

    /// Short machine-readable tag for reports.
    pub fn kind(&self) -> &'static str {
        match self.root() {
            Error::NonPhysicalDensity { .. } => "non_physical_density",
            Error::NonPhysicalPressure { .. } => "non_physical_pressure",
            Error::Degenerate(_) => "degenerate_state",
            Error::InvalidArgument(_) => "invalid_argument",
            Error::NegativeDensity { .. } => "negative_density",
            Error::PressureCollapse { .. } => "pressure_collapse",
            Error::Reversal { .. } => "flow_reversal",
            Error::Stability { .. } => "stability",
            Error::RatioBelowOne { .. } => "ratio_below_one",
            Error::Inconsistent(_) => "inconsistent_initial_data",
            Error::Invalid(_) => "validation",
            Error::Input(_) => "input",
            Error::At { .. } => unreachable!(),
        }
    }

    /// Validation-class errors map to exit code 1, everything else to 2.
    pub fn is_validation(&self) -> bool {
        matches!(
            self.root(),
            Error::Invalid(_) | Error::Input(_) | Error::Inconsistent(_) | Error::Stability { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
