use crate::error::Result;

use super::{BoundParams, ParameterSet, Tape, Var};

/// Outcome of comparing analytic gradients against central differences.
#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// Parameter name and flat index of the worst entry.
    pub worst: Option<(String, usize)>,
    pub entries: usize,
}

/// `|a - n| / max(1, |a|, |n|)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / 1f64.max(analytic.abs()).max(numeric.abs())
}

/// Checks every parameter entry of the scalar function built by `f`.
///
/// `f` records the function on the given tape and returns its scalar output;
/// it must be deterministic for fixed parameters.
pub fn finite_diff_check<F>(params: &ParameterSet, eps: f64, f: F) -> Result<GradCheckReport>
where
    F: Fn(&mut Tape, &BoundParams) -> Result<Var>,
{
    let mut tape = Tape::new();
    let bound = params.bind(&mut tape);
    let out = f(&mut tape, &bound)?;
    let grads = tape.backward(out)?;
    let analytic = bound.gradients(&tape, &grads);

    let eval = |p: &ParameterSet| -> Result<f64> {
        let mut tape = Tape::new();
        let bound = p.bind(&mut tape);
        let out = f(&mut tape, &bound)?;
        Ok(tape.value(out).item())
    };

    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst: None,
        entries: 0,
    };
    let mut probe = params.clone();
    for (name, tensor) in params.iter() {
        for i in 0..tensor.len() {
            let original = tensor.data()[i];
            probe.get_mut(name).unwrap().data_mut()[i] = original + eps;
            let plus = eval(&probe)?;
            probe.get_mut(name).unwrap().data_mut()[i] = original - eps;
            let minus = eval(&probe)?;
            probe.get_mut(name).unwrap().data_mut()[i] = original;

            let numeric = (plus - minus) / (2.0 * eps);
            let err = relative_error(analytic[name].data()[i], numeric);
            report.entries += 1;
            if err > report.max_rel_error || report.worst.is_none() {
                report.max_rel_error = err;
                report.worst = Some((name.to_string(), i));
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Tensor;

    #[test]
    fn quadratic() {
        let mut p = ParameterSet::new();
        p.insert("theta", Tensor::scalar(3.0));
        let report = finite_diff_check(&p, 1e-5, |tape, b| {
            let x = b.get("theta")?;
            tape.mul(x, x)
        })
        .unwrap();
        assert!(report.max_rel_error < 1e-9, "{report:?}");
    }

    #[test]
    fn constant_function_has_zero_error() {
        let mut p = ParameterSet::new();
        p.insert("theta", Tensor::from_fn(&[3], |i| i as f64));
        let report = finite_diff_check(&p, 1e-5, |tape, _| Ok(tape.constant(Tensor::scalar(4.0)))).unwrap();
        assert_eq!(report.max_rel_error, 0.0);
        assert_eq!(report.entries, 3);
    }
}
