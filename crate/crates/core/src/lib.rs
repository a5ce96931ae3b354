//! Numerics for evolution equations with a memory term `∂_t(k ∗ [u - u0])`:
//! kernel pairs and their convolution weights, scalar special functions,
//! a finite-difference elliptic operator and an implicit time stepper with
//! blowup detection.

pub mod elliptic;
pub mod error;
pub mod evolution;
pub mod kernel;
pub mod quadrature;
pub mod special;

pub use elliptic::{CoefficientField, EllipticOperator, Mesh};
pub use error::{Error, Result};
pub use evolution::{
    BlowupBound, BlowupReport, BlowupStatus, NonlinearMode, Nonlinearity, PowerExtension, Problem,
    Scheme, Trajectory,
};
pub use kernel::{
    ConvolutionWeights, KWeightRule, KernelPair, KernelVariant, RelaxationFamily, TimeGrid, WeightForm,
};
pub use special::{MLEvalPolicy, MittagLeffler};
