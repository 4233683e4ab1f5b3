//! Linear λ-calculus with quantale-valued equations.
//!
//! The crate is organised bottom-up:
//!
//! * [`quantale`]: the four label quantales and their order, tensor and
//!   way-below relations;
//! * [`vcat`]: finite V-categories, their tensor, hom distances and
//!   separated quotients;
//! * [`syntax`]: terms, types, contexts, the parser and printer;
//! * [`typecheck`]: derivation reconstruction, exchange and substitution on
//!   derivations;
//! * [`theory`]: signatures, V-equations and theory files;
//! * [`deduction`]: normalisation, bounded proof search and trace replay;
//! * [`models`]: finite metric and measure models, denotations and
//!   soundness checks.

pub mod deduction;
pub mod models;
pub mod quantale;
pub mod syntax;
pub mod theory;
pub mod typecheck;
pub mod vcat;

pub use quantale::{QValue, QuantaleError, QuantaleSpec};
pub use syntax::{alpha_eq, substitute, Context, LinType, Name, Term};
pub use theory::{load_theory, Signature, Theory, VEquation};
pub use typecheck::{infer, Derivation, TypeError};
pub use vcat::{hom_distance, FinVCat, VCatError, VFunctorTable};
