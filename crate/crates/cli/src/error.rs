use std::fmt;

/// Process exit classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Usage = 1,
    Data = 2,
    Numeric = 3,
}

#[derive(Debug)]
pub struct CliError {
    pub kind: Kind,
    pub msg: String,
}

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        Self { kind: Kind::Usage, msg: msg.into() }
    }

    pub fn data(msg: impl Into<String>) -> Self {
        Self { kind: Kind::Data, msg: msg.into() }
    }

    pub fn numeric(msg: impl Into<String>) -> Self {
        Self { kind: Kind::Numeric, msg: msg.into() }
    }

    pub fn exit_code(&self) -> i32 {
        self.kind as i32
    }

    /// Prefixes the message, e.g. with the offending file.
    pub fn context(mut self, what: impl fmt::Display) -> Self {
        self.msg = format!("{what}: {}", self.msg);
        self
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.msg)
    }
}

impl From<dipt::Error> for CliError {
    fn from(e: dipt::Error) -> Self {
        let kind = match e {
            dipt::Error::Usage(_) => Kind::Usage,
            dipt::Error::Numeric(_) | dipt::Error::NonFiniteGradient { .. } => Kind::Numeric,
            _ => Kind::Data,
        };
        Self { kind, msg: e.to_string() }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::data(e.to_string())
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

/// Attaches a path to errors from loading it.
pub trait WithPath<T> {
    fn at(self, path: &std::path::Path) -> CliResult<T>;
}

impl<T, E: Into<CliError>> WithPath<T> for std::result::Result<T, E> {
    fn at(self, path: &std::path::Path) -> CliResult<T> {
        self.map_err(|e| e.into().context(path.display()))
    }
}
