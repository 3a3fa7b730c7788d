//! Process exit codes, one class per kind of failure.

use swapattn::Error;

pub const SUCCESS: i32 = 0;
pub const OTHER: i32 = 1;
pub const USAGE: i32 = 2;
pub const IO: i32 = 3;
pub const CONVERGENCE: i32 = 4;
pub const NUMERICAL: i32 = 5;
pub const COMPATIBILITY: i32 = 6;

pub fn code_for(e: &Error) -> i32 {
    match e.root() {
        Error::Config(_) => USAGE,
        Error::Io { .. } => IO,
        Error::Convergence { .. } => CONVERGENCE,
        Error::NumericalHealth(_) => NUMERICAL,
        Error::Compatibility(_) | Error::Format(_) | Error::Missing(_) => COMPATIBILITY,
        _ => OTHER,
    }
}
