//! IO, file formats and subcommand logic behind the `cstr-periodic` binary.

pub mod commands;
pub mod error;
pub mod io;
pub mod reference;
