//! Kernel for partial Horn presentations of dependent type theories.

pub mod colimit;
pub mod derivation;
pub mod engine;
pub mod model;
pub mod morphism;
pub mod sexpr;
pub mod stability;
pub mod subst;
pub mod syntax;
pub mod theory;
