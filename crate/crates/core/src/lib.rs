pub mod error;
pub mod model;
pub mod moments;
pub mod stieltjes;
pub mod formulas;
pub mod linalg;
pub mod receivers;
pub mod spectral;
pub mod harness;
pub mod record;
pub mod acceptance;
