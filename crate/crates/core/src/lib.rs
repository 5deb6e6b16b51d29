//! Structural alignment between FTR-auction and day-ahead market network
//! models, measured through support functions of network-feasible injection
//! polytopes and attributed to individual constraints through dual analysis.

pub mod lpsolve;
pub mod netmodel;
pub mod attribution;
pub mod clearing;
pub mod support;
pub mod scenarios;
pub mod random;
pub mod io;
