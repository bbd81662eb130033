use super::{Tape, Tensor, Var};
use crate::error::{Error, Result};

/// Outcome of comparing tape gradients with central differences.
#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    /// `max |analytic - numeric| / max(1, |analytic|)` over all inputs.
    pub max_rel_error: f64,
    /// `(input, element)` of the worst element.
    pub worst: Option<(usize, usize)>,
    /// Elements whose perturbed evaluations were not finite or failed.
    pub failures: Vec<(usize, usize)>,
    pub elements_checked: usize,
}

impl GradCheckReport {
    pub fn passed(&self, tolerance: f64) -> bool {
        self.failures.is_empty() && self.max_rel_error < tolerance
    }
}

/// Checks the gradient of a scalar function of one tensor.
pub fn grad_check<F>(f: F, x: &Tensor, step: f64) -> Result<GradCheckReport>
where
    F: Fn(&mut Tape, Var) -> Result<Var>,
{
    grad_check_many(|tape, vars| f(tape, vars[0]), std::slice::from_ref(x), step)
}

/// Checks the gradient of a scalar function with respect to every element
/// of every input tensor.
pub fn grad_check_many<F>(f: F, inputs: &[Tensor], step: f64) -> Result<GradCheckReport>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    if !(step > 0.0) {
        return Err(Error::contract(format!(
            "grad_check step must be positive, got {step}"
        )));
    }
    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|t| tape.param(t.clone())).collect();
    let root = f(&mut tape, &vars)?;
    tape.backward(root)?;
    let analytic: Vec<Vec<f64>> = vars
        .iter()
        .map(|&v| {
            tape.grad(v)
                .map(<[f64]>::to_vec)
                .unwrap_or_else(|| vec![0.0; tape.value(v).len()])
        })
        .collect();

    let eval = |perturbed: &[Tensor]| -> Option<f64> {
        let mut tape = Tape::without_grad();
        let vars: Vec<Var> = perturbed.iter().map(|t| tape.constant(t.clone())).collect();
        let root = f(&mut tape, &vars).ok()?;
        tape.item(root).ok().filter(|v| v.is_finite())
    };

    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst: None,
        failures: Vec::new(),
        elements_checked: 0,
    };
    let mut work = inputs.to_vec();
    for (ti, t) in inputs.iter().enumerate() {
        for ei in 0..t.len() {
            let orig = t.data()[ei];
            work[ti].data_mut()[ei] = orig + step;
            let plus = eval(&work);
            work[ti].data_mut()[ei] = orig - step;
            let minus = eval(&work);
            work[ti].data_mut()[ei] = orig;
            report.elements_checked += 1;
            let (Some(p), Some(m)) = (plus, minus) else {
                report.failures.push((ti, ei));
                continue;
            };
            let numeric = (p - m) / (2.0 * step);
            let a = analytic[ti][ei];
            let rel = (a - numeric).abs() / a.abs().max(1.0);
            if rel > report.max_rel_error || report.worst.is_none() {
                report.max_rel_error = rel;
                report.worst = Some((ti, ei));
            }
        }
    }
    if !report.failures.is_empty() {
        report.max_rel_error = f64::INFINITY;
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sum_is_exact() {
        let zeros = Tensor::zeros(vec![2, 3]).unwrap();
        let r = grad_check(|t, v| Ok(t.sum(v)), &zeros, 1e-6).unwrap();
        assert_eq!(r.elements_checked, 6);
        assert_eq!(r.max_rel_error, 0.0);

        // Away from zero the perturbed sums round, so only near-exactness holds.
        let x = Tensor::matrix(2, 3, vec![0.1, -2.0, 3.5, 7.0, 0.0, -1.25]).unwrap();
        let r = grad_check(|t, v| Ok(t.sum(v)), &x, 1e-6).unwrap();
        assert!(r.max_rel_error < 1e-9, "{r:?}");
    }

    #[test]
    fn l2_norm_of_three_four() {
        let x = Tensor::vector(vec![3.0, 4.0]).unwrap();
        let mut tape = Tape::new();
        let v = tape.param(x.clone());
        let n = tape.l2_norm(v).unwrap();
        tape.backward(n).unwrap();
        let g = tape.grad(v).unwrap();
        assert!((g[0] - 0.6).abs() < 1e-15 && (g[1] - 0.8).abs() < 1e-15);
        let r = grad_check(|t, v| t.l2_norm(v), &x, 1e-6).unwrap();
        assert!(r.max_rel_error < 1e-7, "{r:?}");
    }

    #[test]
    fn non_finite_is_reported_not_raised() {
        // log(x) at x = 1e-7 with step 1e-6 steps into the negative domain.
        let x = Tensor::vector(vec![1e-7, 1.0]).unwrap();
        let r = grad_check(
            |t, v| {
                let l = t.log(v)?;
                Ok(t.sum(l))
            },
            &x,
            1e-6,
        )
        .unwrap();
        assert_eq!(r.failures, vec![(0, 0)]);
        assert!(!r.passed(1.0));
    }

    #[test]
    fn step_must_be_positive() {
        let x = Tensor::scalar(1.0);
        assert!(grad_check(|t, v| Ok(t.sum(v)), &x, 0.0).is_err());
    }
}
