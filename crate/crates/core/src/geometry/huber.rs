/// Huber norm of `residual`: returns `(cost, weight)` where the weight is the
/// IRLS factor satisfying `weight · r = d(cost)/dr`.
#[inline]
pub fn huber(residual: f64, delta: f64) -> (f64, f64) {
    let a = residual.abs();
    if a <= delta {
        (0.5 * residual * residual, 1.0)
    } else {
        (delta * (a - 0.5 * delta), delta / a)
    }
}
