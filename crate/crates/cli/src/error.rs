use std::fmt;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VERIFY: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_IO: i32 = 3;

/// A command that could not run to completion.
#[derive(Debug)]
pub enum Failure {
    /// Bad flags or invalid input values.
    Usage(String),
    /// Files missing, unreadable, corrupt or unwritable.
    Io(String),
}

impl Failure {
    pub fn code(&self) -> i32 {
        match self {
            Failure::Usage(_) => EXIT_USAGE,
            Failure::Io(_) => EXIT_IO,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Usage(m) | Failure::Io(m) => f.write_str(m),
        }
    }
}

impl From<blockfield_core::Error> for Failure {
    fn from(e: blockfield_core::Error) -> Self {
        use blockfield_core::Error as E;
        match e {
            E::Io { .. } | E::Asset { .. } | E::Json(_) => Failure::Io(e.to_string()),
            _ => Failure::Usage(e.to_string()),
        }
    }
}

impl From<blockfield_streamer::Error> for Failure {
    fn from(e: blockfield_streamer::Error) -> Self {
        use blockfield_streamer::Error as E;
        match e {
            E::Core(c) => c.into(),
            E::Io(_) | E::Fetch { .. } => Failure::Io(e.to_string()),
            _ => Failure::Usage(e.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::Io(e.to_string())
    }
}
