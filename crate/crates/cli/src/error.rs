use std::fmt;

pub const EXIT_VALIDATION: u8 = 1;
pub const EXIT_NUMERIC: u8 = 2;
pub const EXIT_ACCEPTANCE: u8 = 3;

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn validation(op: &str, message: impl fmt::Display) -> Self {
        CliError {
            code: EXIT_VALIDATION,
            message: format!("{op}: {message}"),
        }
    }

    pub fn core(op: &str, e: lie_anneal::Error) -> Self {
        CliError {
            code: if e.is_validation() {
                EXIT_VALIDATION
            } else {
                EXIT_NUMERIC
            },
            message: format!("{op}: {e}"),
        }
    }

    pub fn io(op: &str, path: &std::path::Path, e: impl fmt::Display) -> Self {
        CliError::validation(op, format!("cannot write `{}`: {e}", path.display()))
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

/// `map_err` adapter for library errors raised inside operation `op`.
pub fn core(op: &'static str) -> impl Fn(lie_anneal::Error) -> CliError {
    move |e| CliError::core(op, e)
}

pub type CliResult<T> = Result<T, CliError>;
