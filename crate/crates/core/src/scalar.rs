use num_traits::NumAssign;

/// Element type stored in weight tensors and feature maps.
///
/// Integer instantiations make the simulated datapath bit-exact against the
/// reference convolution; floating-point instantiations follow IEEE
/// arithmetic and are compared under a small relative tolerance.
pub trait Scalar:
    NumAssign + Copy + PartialOrd + std::fmt::Debug + std::fmt::Display + Send + Sync + 'static
{
}

impl<T> Scalar for T where
    T: NumAssign + Copy + PartialOrd + std::fmt::Debug + std::fmt::Display + Send + Sync + 'static
{
}
