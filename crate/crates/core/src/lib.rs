//! IMEX Runge-Kutta methods of the IMKG family: tableaux, order conditions,
//! linear and HEVI stability analysis, method construction, and an IMEX
//! integrator with Newton stage solves.

pub mod construction;
pub mod hevi;
pub mod integrator;
pub mod order;
pub mod poly;
pub mod problems;
pub mod registry;
pub mod stability;
pub mod tableau;
pub mod tableau_file;
