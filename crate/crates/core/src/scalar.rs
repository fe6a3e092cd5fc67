use num_traits::{Float, FromPrimitive, NumAssign};

/// Floating-point scalar the geometry kernel is generic over: f32 or f64.
pub trait Real:
    Float + FromPrimitive + NumAssign + Default + std::fmt::Debug + std::fmt::Display + Send + Sync + 'static
{
    /// Tolerance for manifold-membership checks.
    fn eps_membership() -> Self;
    /// Clamp margin for arcosh/division arguments.
    fn eps_arg() -> Self;

    fn c(v: f64) -> Self {
        Self::from_f64(v).expect("constant representable")
    }
}

impl Real for f32 {
    fn eps_membership() -> Self {
        1e-4
    }
    fn eps_arg() -> Self {
        1e-6
    }
}

impl Real for f64 {
    fn eps_membership() -> Self {
        1e-6
    }
    fn eps_arg() -> Self {
        1e-12
    }
}

/// softplus(x) = ln(1 + e^x), computed without overflow for large |x|.
pub fn softplus<T: Real>(x: T) -> T {
    if x > T::zero() {
        x + x.neg().exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Inverse of softplus: x such that softplus(x) = y, for y > 0.
pub fn softplus_inv<T: Real>(y: T) -> T {
    // ln(e^y - 1) = y + ln(1 - e^-y)
    y + (-((-y).exp())).ln_1p()
}
