//! Derivative-free minimisation.

#[derive(Debug, Clone, Copy)]
pub(crate) struct NelderMeadConfig {
    pub max_iter: usize,
    /// Spread of function values across the simplex.
    pub f_tol: f64,
    /// Largest vertex distance from the best vertex (max norm).
    pub x_tol: f64,
    /// Edge length of the initial simplex.
    pub step: f64,
}

#[derive(Debug, Clone)]
pub(crate) struct NelderMeadResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn run<F>(f: &F, x0: &[f64], cfg: &NelderMeadConfig, budget: usize) -> NelderMeadResult
where
    F: Fn(&[f64]) -> f64,
{
    let n = x0.len();
    let mut simplex: Vec<Vec<f64>> = vec![x0.to_vec()];
    for i in 0..n {
        let mut v = x0.to_vec();
        v[i] += cfg.step;
        simplex.push(v);
    }
    let mut values: Vec<f64> = simplex.iter().map(|v| f(v)).collect();

    let mut iterations = 0;
    let mut converged = false;
    while iterations < budget {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        values = order.iter().map(|&i| values[i]).collect();

        let spread = values[n] - values[0];
        let diameter = simplex[1..]
            .iter()
            .flat_map(|v| v.iter().zip(&simplex[0]).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        if spread <= cfg.f_tol * (1.0 + values[0].abs()) && diameter <= cfg.x_tol {
            converged = true;
            break;
        }
        iterations += 1;

        let centroid: Vec<f64> = (0..n)
            .map(|j| simplex[..n].iter().map(|v| v[j]).sum::<f64>() / n as f64)
            .collect();
        let along = |t: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&simplex[n])
                .map(|(c, w)| c + t * (w - c))
                .collect()
        };

        let xr = along(-1.0);
        let fr = f(&xr);
        if fr < values[0] {
            let xe = along(-2.0);
            let fe = f(&xe);
            if fe < fr {
                simplex[n] = xe;
                values[n] = fe;
            } else {
                simplex[n] = xr;
                values[n] = fr;
            }
            continue;
        }
        if fr < values[n - 1] {
            simplex[n] = xr;
            values[n] = fr;
            continue;
        }
        let (xc, fc) = if fr < values[n] {
            let x = along(-0.5);
            let v = f(&x);
            (x, v)
        } else {
            let x = along(0.5);
            let v = f(&x);
            (x, v)
        };
        if fc < values[n].min(fr) {
            simplex[n] = xc;
            values[n] = fc;
            continue;
        }
        let best = simplex[0].clone();
        for i in 1..=n {
            for (x, b) in simplex[i].iter_mut().zip(&best) {
                *x = b + 0.5 * (*x - b);
            }
            values[i] = f(&simplex[i]);
        }
    }
    let best = (0..=n)
        .min_by(|&a, &b| values[a].total_cmp(&values[b]))
        .unwrap();
    NelderMeadResult {
        x: simplex[best].clone(),
        f: values[best],
        iterations,
        converged,
    }
}

/// Nelder–Mead with one restart from the best vertex, which recovers
/// from premature collapse of the simplex.
pub(crate) fn nelder_mead<F>(f: F, x0: &[f64], cfg: &NelderMeadConfig) -> NelderMeadResult
where
    F: Fn(&[f64]) -> f64,
{
    let first = run(&f, x0, cfg, cfg.max_iter);
    if !first.converged {
        return first;
    }
    let second = run(&f, &first.x, cfg, cfg.max_iter);
    let iterations = first.iterations + second.iterations;
    if second.f <= first.f {
        NelderMeadResult {
            iterations,
            ..second
        }
    } else {
        NelderMeadResult {
            iterations,
            ..first
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const CFG: NelderMeadConfig = NelderMeadConfig {
        max_iter: 2000,
        f_tol: 1e-14,
        x_tol: 1e-10,
        step: 0.5,
    };

    #[test]
    fn rosenbrock() {
        let r = nelder_mead(
            |x| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2),
            &[-1.2, 1.0],
            &CFG,
        );
        assert!(r.converged);
        assert!((r.x[0] - 1.0).abs() < 1e-8 && (r.x[1] - 1.0).abs() < 1e-8);
    }

    #[test]
    fn quadratic_bowl_in_three_dimensions() {
        let r = nelder_mead(
            |x| (x[0] - 1.0).powi(2) + 3.0 * (x[1] + 2.0).powi(2) + 0.5 * (x[2] - 0.3).powi(2),
            &[0.0, 0.0, 0.0],
            &CFG,
        );
        assert!(r.converged);
        for (a, b) in r.x.iter().zip([1.0, -2.0, 0.3]) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn iteration_limit_is_reported() {
        let r = nelder_mead(
            |x| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2),
            &[-1.2, 1.0],
            &NelderMeadConfig { max_iter: 5, ..CFG },
        );
        assert!(!r.converged && r.iterations == 5);
    }
}
