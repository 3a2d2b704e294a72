//! placeholder
pub struct DominationResult;
pub struct SparseFamily;
