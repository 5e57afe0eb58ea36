use alloc::string::String;
use core::fmt;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A time lies outside the range an operation accepts.
    OutOfDomain { t: f64, lo: f64, hi: f64 },
    InvalidPolyline { object: u32, reason: &'static str },
    InvalidDataset(String),
    /// Average over a zero-length interval.
    DegenerateInterval,
    InvalidQuery(String),
    /// Bulk-load input was not sorted by key.
    Unsorted { position: usize },
    OutOfOrderAppend { key: f64, max: f64 },
    DiscontinuousAppend { object: u32 },
    UnknownObject(u32),
    InvalidInterval { lo: f64, hi: f64 },
    Parameter(String),
    /// Structure would exceed the space budget it was sized for.
    Capacity(String),
    KTooLarge { k: usize, k_max: usize },
    PageOutOfRange(u32),
    Corrupt(String),
    Io(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::OutOfDomain { t, lo, hi } => write!(f, "time {t} outside [{lo}, {hi}]"),
            Error::InvalidPolyline { object, reason } => {
                write!(f, "invalid polyline for object {object}: {reason}")
            }
            Error::InvalidDataset(msg) => write!(f, "invalid dataset: {msg}"),
            Error::DegenerateInterval => f.write_str("avg aggregate over a zero-length interval"),
            Error::InvalidQuery(msg) => write!(f, "invalid query: {msg}"),
            Error::Unsorted { position } => write!(f, "bulk-load input not sorted at entry {position}"),
            Error::OutOfOrderAppend { key, max } => {
                write!(f, "append at {key} precedes current maximum {max}")
            }
            Error::DiscontinuousAppend { object } => {
                write!(f, "append does not continue object {object} from its last vertex")
            }
            Error::UnknownObject(id) => write!(f, "unknown object {id}"),
            Error::InvalidInterval { lo, hi } => write!(f, "invalid interval [{lo}, {hi})"),
            Error::Parameter(msg) => write!(f, "invalid parameter: {msg}"),
            Error::Capacity(msg) => write!(f, "capacity exceeded: {msg}"),
            Error::KTooLarge { k, k_max } => write!(f, "k = {k} exceeds k_max = {k_max}"),
            Error::PageOutOfRange(id) => write!(f, "page {id} out of range"),
            Error::Corrupt(msg) => write!(f, "corrupt index: {msg}"),
            Error::Io(msg) => write!(f, "io: {msg}"),
        }
    }
}

impl core::error::Error for Error {}
