//! Multiple recurrence of pretentious multiplicative actions along
//! generalized Pythagorean triples, at desk scale.
//!
//! Modules, bottom up: [`numeric`], [`quadforms`], [`multfun`], [`folner`],
//! [`gridwitness`], [`equations`], [`rotation`], and the experiment layer in
//! [`experiment`] used by the command-line runner.

pub mod equations;
pub mod experiment;
pub mod folner;
pub mod gridwitness;
pub mod multfun;
pub mod numeric;
pub mod quadforms;
pub mod rotation;
pub mod serde_big;
