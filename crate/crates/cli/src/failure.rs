use std::fmt;
use std::path::Path;

/// A command failure with its process exit code.
#[derive(Debug)]
pub struct Failure {
    io: bool,
    message: String,
}

impl Failure {
    pub const CONFIG_EXIT: u8 = 2;
    pub const IO_EXIT: u8 = 3;

    pub fn config(message: impl Into<String>) -> Self {
        Failure {
            io: false,
            message: message.into(),
        }
    }

    pub fn code(&self) -> u8 {
        if self.io {
            Self::IO_EXIT
        } else {
            Self::CONFIG_EXIT
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<aenr::Error> for Failure {
    fn from(e: aenr::Error) -> Self {
        Failure {
            io: matches!(e, aenr::Error::Io(_)),
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        aenr::Error::Io(e).into()
    }
}

impl From<csv::Error> for Failure {
    fn from(e: csv::Error) -> Self {
        match e.into_kind() {
            csv::ErrorKind::Io(io) => io.into(),
            other => Failure::config(format!("CSV: {other:?}")),
        }
    }
}

/// Prefixes errors with the path they concern.
pub trait WithPath<T> {
    fn at(self, path: &Path) -> Result<T, Failure>;
}

impl<T, E: Into<Failure>> WithPath<T> for Result<T, E> {
    fn at(self, path: &Path) -> Result<T, Failure> {
        self.map_err(|e| {
            let mut f: Failure = e.into();
            let shown = path.display().to_string();
            if !f.message.contains(&shown) {
                f.message = format!("{shown}: {}", f.message);
            }
            f
        })
    }
}
