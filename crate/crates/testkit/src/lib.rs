//! Reference implementations and fixture generators shared by the test
//! suites and the acceptance run. Nothing here calls into the code under
//! test except to read parameters or build inputs.

pub mod extraction;
pub mod gen;
pub mod negation;
pub mod properties;
pub mod radam;
pub mod rgcn;
