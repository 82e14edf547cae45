//! Splits command errors into the two nonzero exit classes: problems
//! with the inputs (exit 1) and problems while doing the work (exit 2).

use hypersr_core::Error;

#[derive(Debug)]
pub enum Failure {
    Validation(Error),
    Runtime(Error),
}

pub trait Phase<T> {
    /// Mark errors from this expression as input validation.
    fn setup(self) -> Result<T, Failure>;
    /// Mark errors from this expression as runtime failures.
    fn runtime(self) -> Result<T, Failure>;
}

impl<T> Phase<T> for hypersr_core::Result<T> {
    fn setup(self) -> Result<T, Failure> {
        self.map_err(Failure::Validation)
    }

    fn runtime(self) -> Result<T, Failure> {
        self.map_err(Failure::Runtime)
    }
}
