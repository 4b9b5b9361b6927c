//! Quadrature: one-dimensional rules, singular interior and exterior integrals,
//! interior meshes and the discretized Green operator.

pub mod cone;
pub mod mesh;
pub mod operator;
pub mod rules;

pub use cone::{
    integrate_exterior_tail, integrate_interior, ExteriorOptions, ExteriorResult, InteriorOptions, QuadResult,
    Singularity,
};
pub use mesh::InteriorMesh;
pub use operator::{green_operator, MeshGreenOperator, OperatorOptions};
