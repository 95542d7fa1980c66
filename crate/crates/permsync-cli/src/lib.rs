//! Support library for the `permsync` binary: the on-disk formats live
//! here so tests and downstream tooling can parse run artifacts without
//! shelling out.

pub mod formats;
