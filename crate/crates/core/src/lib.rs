//! Hamiltonian simulation by quantum walks with Bessel-series segments and
//! LCU correction, simulated on statevectors.

pub mod bessel;
pub mod hamiltonian;
pub mod linalg;
pub mod series;
pub mod walk;
pub mod correction;
pub mod planner;
pub mod algorithms;
pub mod runner;
pub mod verify;
