//! placeholder
pub struct ExponentTuple;
pub struct Regime;
pub struct WeightTuple;
