use std::fmt;

/// An error plus the process exit code it maps to.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub error: anyhow::Error,
}

pub const USAGE: u8 = 1;
pub const DATA: u8 = 2;
pub const NUMERICAL: u8 = 3;

impl Failure {
    pub fn usage(msg: impl fmt::Display) -> Self {
        Failure { code: USAGE, error: anyhow::anyhow!("{msg}") }
    }

    pub fn data(msg: impl fmt::Display) -> Self {
        Failure { code: DATA, error: anyhow::anyhow!("{msg}") }
    }

    pub fn context(self, ctx: impl fmt::Display + Send + Sync + 'static) -> Self {
        Failure { code: self.code, error: self.error.context(ctx) }
    }
}

impl From<lupi::Error> for Failure {
    fn from(e: lupi::Error) -> Self {
        let code = if e.is_numerical() { NUMERICAL } else { DATA };
        Failure { code, error: e.into() }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#}", self.error)
    }
}

/// Attach a label, such as the module that failed, to library errors.
pub trait WithContext<T> {
    fn labelled(self, label: &str) -> Result<T, Failure>;
}

impl<T> WithContext<T> for lupi::Result<T> {
    fn labelled(self, label: &str) -> Result<T, Failure> {
        self.map_err(|e| Failure::from(e).context(label.to_string()))
    }
}
