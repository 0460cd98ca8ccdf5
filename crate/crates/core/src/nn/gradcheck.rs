/// Compares analytic gradients against central finite differences.
///
/// For every parameter the loss is evaluated at `p + eps` and `p - eps`
/// (restoring the original value afterwards) and the relative error
///
/// ```text
/// |analytic - numeric| / max(|analytic|, |numeric|, 1e-8)
/// ```
///
/// is computed; the worst value over all parameters is returned. The
/// `1e-8` floor keeps parameters whose true gradient is zero from
/// reporting spurious errors out of floating point noise.
pub fn max_relative_error<F>(
    params: &mut [f64],
    analytic: &[f64],
    mut loss: F,
    eps: f64,
) -> f64
where
    F: FnMut(&[f64]) -> f64,
{
    assert_eq!(params.len(), analytic.len(), "one analytic gradient per parameter");
    assert!(eps > 0.0, "finite difference step must be positive");
    let mut worst = 0.0;
    for idx in 0..params.len() {
        let original = params[idx];
        params[idx] = original + eps;
        let plus = loss(params);
        params[idx] = original - eps;
        let minus = loss(params);
        params[idx] = original;
        let numeric = (plus - minus) / (2.0 * eps);
        let denom = analytic[idx].abs().max(numeric.abs()).max(1e-8);
        let err = (analytic[idx] - numeric).abs() / denom;
        if err > worst {
            worst = err;
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_loss_gradient_is_exact() {
        let mut params = vec![1.5, -2.0, 0.25];
        let analytic: Vec<f64> = params.iter().map(|p| 2.0 * p).collect();
        let worst = max_relative_error(
            &mut params,
            &analytic,
            |p| p.iter().map(|v| v * v).sum(),
            1e-5,
        );
        assert!(worst < 1e-9, "max relative gradient error {worst}");
    }

    #[test]
    fn deliberately_wrong_gradient_is_flagged() {
        let mut params = vec![1.0];
        let worst = max_relative_error(&mut params, &[3.0], |p| p[0] * p[0], 1e-5);
        assert!(worst > 0.3, "wrong gradient should produce a large error, got {worst}");
    }

    #[test]
    fn parameters_are_restored_after_probing() {
        let mut params = vec![0.75, -0.5];
        let analytic = vec![1.0, 1.0];
        max_relative_error(&mut params, &analytic, |p| p.iter().sum(), 1e-5);
        assert_eq!(params, vec![0.75, -0.5]);
    }
}
