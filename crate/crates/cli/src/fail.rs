use std::fmt;

use stsir::ErrorClass;

/// A failure reported as one machine-parsable line on stderr.
#[derive(Debug)]
pub struct Failure {
    pub class: ErrorClass,
    pub message: String,
}

pub type Outcome<T> = Result<T, Failure>;

impl Failure {
    pub fn config(message: impl Into<String>) -> Self {
        Failure { class: ErrorClass::Config, message: message.into() }
    }

    pub fn data(message: impl Into<String>) -> Self {
        Failure { class: ErrorClass::Data, message: message.into() }
    }

    pub fn exit_code(&self) -> u8 {
        match self.class {
            ErrorClass::Config => 2,
            ErrorClass::Data => 3,
            ErrorClass::Numerical => 4,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let class = match self.class {
            ErrorClass::Config => "config",
            ErrorClass::Data => "data",
            ErrorClass::Numerical => "numerical",
        };
        let msg: String = self
            .message
            .chars()
            .map(|c| if c == '\n' || c == '\r' { ' ' } else { c })
            .collect();
        write!(f, "error class={class} code={} message={msg:?}", self.exit_code())
    }
}

impl From<stsir::Error> for Failure {
    fn from(e: stsir::Error) -> Self {
        Failure { class: e.class(), message: e.to_string() }
    }
}
