//! placeholder
pub struct Kernel;
pub struct FunctionTuple;
pub struct Modulus;
pub struct TruncationMode;
