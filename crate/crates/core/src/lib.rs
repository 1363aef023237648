//! Interactive disambiguation of text-to-SQL candidates by expected
//! information gain.

pub mod candidate;
pub mod clarify;
pub mod eig;
pub mod eval;
pub mod source;
pub mod sql;
