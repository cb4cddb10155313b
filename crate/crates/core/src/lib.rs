//! Monotone (degenerate elliptic) finite differences on adaptive,
//! 2:1-balanced quadtree grids.
//!
//! ```
//! use quadfd::grid::{build_quadtree, ScaleRequest};
//! use quadfd::operators::{field, instantiate_builtin, OperatorKind, ProblemDefinition};
//! use quadfd::solvers::newton_to_tolerance;
//! use quadfd::{DomainBox, GridFunction};
//!
//! let grid = build_quadtree(DomainBox::unit(), 8, (2, 2), &[ScaleRequest::new(0.5, 0.5, 0)])?;
//! let p = ProblemDefinition::new(field(|_, _| 1.0), field(|_, _| 0.0));
//! let op = instantiate_builtin(OperatorKind::PoissonDirichlet, &p, &grid)?;
//! let u = newton_to_tolerance(&op, &grid, &GridFunction::zeros(&grid), 1e-10, 20)?.u;
//! assert!(u.values().iter().all(|&v| v >= 0.0));
//! # Ok::<(), quadfd::Error>(())
//! ```

pub mod adaptivity;
pub mod contour;
pub mod error;
pub mod function;
pub mod grid;
pub mod harness;
pub mod operators;
pub mod solvers;
pub mod stencil;

pub use error::{Error, Result};
pub use function::GridFunction;
pub use grid::{
    build_quadtree, Cell, Direction, DomainBox, GridNode, NodeClass, QuadtreeGrid, ScaleRequest,
    VirtualIndex,
};
