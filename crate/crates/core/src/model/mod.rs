//! Net representation: places, transitions, arcs, token colors, delays and
//! arc expressions, plus structural validation and DOT export.

mod color;
mod delay;
mod dot;
mod expr;
mod net;
mod validate;

pub use color::{ColorValue, TokenColor};
pub use delay::{DelayError, DelaySpec, ResolvedDelay, NORMAL_RESAMPLE_LIMIT};
pub use dot::export_dot;
pub use expr::{is_identifier, BinOp, ColorExpr, EvalError, ExprSyntaxError, Shape, Value};
pub use net::{
    Guard, InputPlace, ModelError, NodeId, Place, PlaceId, PlaceKind, QpnArc, QpnNet, Transition, TransitionId,
    TransitionKind,
};
pub use validate::{validate_net, Violation};
