use super::{NumericsError, ParamRegistry, Tape, Var};

/// Per-parameter outcome of a finite-difference comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamCheck {
    pub name: String,
    pub max_rel_error: f64,
    pub max_abs_error: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub params: Vec<ParamCheck>,
    pub max_rel_error: f64,
    pub tolerance: f64,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.params.iter().all(|p| p.passed)
    }
}

/// Gradients smaller than this are compared in absolute terms.
const REL_FLOOR: f64 = 1e-6;

/// Relative error with the denominator floored at [`REL_FLOOR`].
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let diff = (analytic - numeric).abs();
    diff / analytic.abs().max(numeric.abs()).max(REL_FLOOR)
}

/// Compares backprop gradients of `f` with central differences
/// `(f(θ+h) − f(θ−h)) / 2h` for every entry of every parameter.
///
/// `params` is perturbed in place and restored before returning.
pub fn finite_diff_check<F>(
    f: F,
    params: &mut ParamRegistry,
    h: f64,
    tol: f64,
) -> Result<GradCheckReport, NumericsError>
where
    F: Fn(&mut Tape<'_>) -> Result<Var, NumericsError>,
{
    if !(h > 0.0) {
        return Err(NumericsError::Domain(format!("finite-difference step must be positive, got {h}")));
    }
    let analytic = {
        let mut tape = Tape::new(params);
        let loss = f(&mut tape)?;
        tape.backward(loss)?
    };
    let eval = |params: &ParamRegistry| -> Result<f64, NumericsError> {
        let mut tape = Tape::new(params);
        let loss = f(&mut tape)?;
        Ok(tape.value(loss).data()[0])
    };

    let mut checks = Vec::with_capacity(params.len());
    for idx in 0..params.len() {
        let (name, len) = {
            let (n, t) = params.get_index(idx).expect("index in range");
            (n.to_string(), t.len())
        };
        let grad = analytic.get(&name).expect("gradient per parameter").data().to_vec();
        let mut max_rel: f64 = 0.0;
        let mut max_abs: f64 = 0.0;
        for j in 0..len {
            let original = params.get_index(idx).expect("index in range").1.data()[j];
            set_entry(params, idx, j, original + h);
            let plus = eval(params);
            set_entry(params, idx, j, original - h);
            let minus = eval(params);
            set_entry(params, idx, j, original);
            let numeric = (plus? - minus?) / (2.0 * h);
            max_rel = max_rel.max(relative_error(grad[j], numeric));
            max_abs = max_abs.max((grad[j] - numeric).abs());
        }
        checks.push(ParamCheck { name, max_rel_error: max_rel, max_abs_error: max_abs, passed: max_rel <= tol });
    }
    let max_rel_error = checks.iter().map(|c| c.max_rel_error).fold(0.0, f64::max);
    Ok(GradCheckReport { params: checks, max_rel_error, tolerance: tol })
}

fn set_entry(params: &mut ParamRegistry, idx: usize, j: usize, value: f64) {
    params.get_index_mut(idx).expect("index in range").1.data_mut()[j] = value;
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Tensor;

    #[test]
    fn quadratic_passes() {
        let mut reg = ParamRegistry::new();
        reg.insert("theta", Tensor::vector(vec![1.0, 2.0])).unwrap();
        let f = |tape: &mut Tape<'_>| {
            let t = tape.param("theta")?;
            let d = tape.dot(t, t)?;
            Ok(d)
        };
        {
            let mut tape = Tape::new(&reg);
            let loss = f(&mut tape).unwrap();
            let g = tape.backward(loss).unwrap();
            assert_eq!(g.get("theta").unwrap().data(), &[2.0, 4.0]);
        }
        let report = finite_diff_check(f, &mut reg, 1e-5, 1e-6).unwrap();
        assert!(report.passed(), "{report:?}");
        assert_eq!(reg.get("theta").unwrap().data(), &[1.0, 2.0]);
    }

    #[test]
    fn zero_step_rejected() {
        let mut reg = ParamRegistry::new();
        reg.insert("theta", Tensor::vector(vec![1.0])).unwrap();
        let f = |t: &mut Tape<'_>| {
            let v = t.param("theta")?;
            Ok(t.sum(v))
        };
        let err = finite_diff_check(f, &mut reg, 0.0, 1e-4);
        assert!(matches!(err, Err(NumericsError::Domain(_))));
    }
}
