//! Derivative-free minimization (Nelder-Mead simplex).
//!
//! Used by the wrapper-pulse parameter search, where the objective is a
//! cheap scalar function of four angles. Deterministic: no internal
//! randomness, fixed iteration budget.

/// Result of a Nelder-Mead run.
#[derive(Debug, Clone)]
pub struct NelderMeadResult {
    /// Best point found.
    pub x: Vec<f64>,
    /// Objective value at `x`.
    pub value: f64,
    /// Iterations consumed.
    pub iterations: usize,
}

/// Minimize `f` starting from `x0`, with initial simplex steps `step`
/// per coordinate, for at most `max_iter` iterations or until the simplex
/// collapses below `f_tol` in objective spread.
pub fn nelder_mead<F: FnMut(&[f64]) -> f64>(
    mut f: F,
    x0: &[f64],
    step: f64,
    max_iter: usize,
    f_tol: f64,
) -> NelderMeadResult {
    let n = x0.len();
    let (alpha, gamma, rho, sigma) = (1.0, 2.0, 0.5, 0.5);

    // Initial simplex: x0 plus one step along each axis.
    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    simplex.push(x0.to_vec());
    for i in 0..n {
        let mut v = x0.to_vec();
        v[i] += step;
        simplex.push(v);
    }
    let mut values: Vec<f64> = simplex.iter().map(|v| f(v)).collect();

    let mut iterations = 0;
    for _ in 0..max_iter {
        iterations += 1;
        // Order ascending by objective.
        let mut idx: Vec<usize> = (0..simplex.len()).collect();
        idx.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap());
        simplex = idx.iter().map(|&i| simplex[i].clone()).collect();
        values = idx.iter().map(|&i| values[i]).collect();

        if values[n] - values[0] < f_tol {
            break;
        }

        // Centroid of all but the worst.
        let mut centroid = vec![0.0; n];
        for v in simplex.iter().take(n) {
            for (c, &vi) in centroid.iter_mut().zip(v.iter()) {
                *c += vi / n as f64;
            }
        }

        let lerp = |a: &[f64], b: &[f64], t: f64| -> Vec<f64> {
            a.iter().zip(b.iter()).map(|(&x, &y)| x + t * (y - x)).collect()
        };

        // Reflection.
        let xr = lerp(&centroid, &simplex[n], -alpha);
        let fr = f(&xr);
        if fr < values[0] {
            // Expansion.
            let xe = lerp(&centroid, &simplex[n], -gamma);
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
        // Contraction (toward the better of worst/reflected).
        let (xc, fc) = if fr < values[n] {
            let xc = lerp(&centroid, &xr, rho);
            let fc = f(&xc);
            (xc, fc)
        } else {
            let xc = lerp(&centroid, &simplex[n], rho);
            let fc = f(&xc);
            (xc, fc)
        };
        if fc < values[n].min(values[n - 1]) {
            simplex[n] = xc;
            values[n] = fc;
            continue;
        }
        // Shrink toward the best vertex.
        let best = simplex[0].clone();
        for k in 1..=n {
            simplex[k] = lerp(&best, &simplex[k], sigma);
            values[k] = f(&simplex[k]);
        }
    }

    let mut best = 0;
    for k in 1..simplex.len() {
        if values[k] < values[best] {
            best = k;
        }
    }
    NelderMeadResult {
        x: simplex[best].clone(),
        value: values[best],
        iterations,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimizes_shifted_quadratic() {
        let f = |x: &[f64]| (x[0] - 1.5).powi(2) + 3.0 * (x[1] + 0.5).powi(2) + 2.0;
        let r = nelder_mead(f, &[0.0, 0.0], 0.5, 500, 1e-14);
        assert!((r.x[0] - 1.5).abs() < 1e-5, "{:?}", r.x);
        assert!((r.x[1] + 0.5).abs() < 1e-5, "{:?}", r.x);
        assert!((r.value - 2.0).abs() < 1e-9);
    }

    #[test]
    fn minimizes_rosenbrock_two_d() {
        let f = |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
        let r = nelder_mead(f, &[-1.2, 1.0], 0.5, 5000, 1e-16);
        assert!((r.x[0] - 1.0).abs() < 1e-4);
        assert!((r.x[1] - 1.0).abs() < 1e-4);
    }
}
