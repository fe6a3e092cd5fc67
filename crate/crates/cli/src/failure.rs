//! Process-level error: a message plus the exit code it maps to.

/// Exit codes: 2 configuration, 3 I/O, 4 divergence, 5 checkpoint mismatch.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    pub fn config(message: String) -> Self {
        Failure { code: 2, message }
    }

    pub fn io(message: String) -> Self {
        Failure { code: 3, message }
    }

    pub fn divergence(message: String) -> Self {
        Failure { code: 4, message }
    }

    pub fn checkpoint(message: String) -> Self {
        Failure { code: 5, message }
    }
}
