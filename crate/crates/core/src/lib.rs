pub mod fem;
pub mod fosls;
pub mod linalg;
pub mod mesh;
pub mod moving_domain;
pub mod optimal_control;
pub mod reduced_basis;
pub mod registry;
pub mod selftest;
