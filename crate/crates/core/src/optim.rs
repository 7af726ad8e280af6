//! Quasi-Newton (BFGS) minimization with an Armijo backtracking line search.

pub trait Objective {
    /// Function value, `None` where the objective is undefined.
    fn value(&mut self, x: &[f64]) -> Option<f64>;
    fn value_grad(&mut self, x: &[f64]) -> Option<(f64, Vec<f64>)>;
}

#[derive(Debug, Clone, Copy)]
pub struct BfgsOptions {
    pub max_iter: usize,
    /// Stop once the gradient's infinity norm falls below this.
    pub grad_tol: f64,
    /// Stop once an accepted step improves f by less than `f_tol * max(1, |f|)`.
    pub f_tol: f64,
    /// Largest allowed step component.
    pub max_step: f64,
}

impl Default for BfgsOptions {
    fn default() -> Self {
        BfgsOptions {
            max_iter: 200,
            grad_tol: 1e-5,
            f_tol: 1e-12,
            max_step: 5.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub f: f64,
    pub grad: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| p * q).sum()
}

fn inf_norm(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Returns `None` only if the objective is undefined at the starting point.
pub fn bfgs<O: Objective>(obj: &mut O, x0: &[f64], opts: &BfgsOptions) -> Option<Minimum> {
    let n = x0.len();
    let (mut f, mut g) = obj.value_grad(x0)?;
    if !f.is_finite() || g.iter().any(|v| !v.is_finite()) {
        return None;
    }
    let mut x = x0.to_vec();
    let identity = |scale: f64| {
        let mut h = vec![0.0; n * n];
        for i in 0..n {
            h[i * n + i] = scale;
        }
        h
    };
    let mut h = identity(1.0);
    let mut fresh = true;
    let mut iterations = 0;
    let mut converged = inf_norm(&g) < opts.grad_tol;

    while !converged && iterations < opts.max_iter {
        iterations += 1;
        let mut p: Vec<f64> = (0..n).map(|i| -dot(&h[i * n..(i + 1) * n], &g)).collect();
        let mut slope = dot(&p, &g);
        if slope >= 0.0 {
            // lost descent, fall back to steepest descent
            h = identity(1.0);
            fresh = true;
            p = g.iter().map(|v| -v).collect();
            slope = dot(&p, &g);
        }
        let longest = inf_norm(&p);
        if longest > opts.max_step {
            let s = opts.max_step / longest;
            p.iter_mut().for_each(|v| *v *= s);
            slope *= s;
        }

        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..40 {
            let trial: Vec<f64> = x.iter().zip(&p).map(|(a, b)| a + step * b).collect();
            if let Some(ft) = obj.value(&trial) {
                if ft.is_finite() && ft <= f + 1e-4 * step * slope {
                    accepted = Some(trial);
                    break;
                }
            }
            step *= 0.5;
        }
        let Some(x_new) = accepted else {
            if fresh {
                break;
            }
            h = identity(1.0);
            fresh = true;
            continue;
        };
        let Some((f_new, g_new)) = obj.value_grad(&x_new) else {
            break;
        };
        if g_new.iter().any(|v| !v.is_finite()) {
            break;
        }

        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let yv: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &yv);
        if sy > 1e-12 {
            if fresh {
                h = identity(sy / dot(&yv, &yv));
                fresh = false;
            }
            let rho = 1.0 / sy;
            let hy: Vec<f64> = (0..n).map(|i| dot(&h[i * n..(i + 1) * n], &yv)).collect();
            let yhy = dot(&yv, &hy);
            for i in 0..n {
                for j in 0..n {
                    h[i * n + j] += -rho * (hy[i] * s[j] + s[i] * hy[j]) + (rho * rho * yhy + rho) * s[i] * s[j];
                }
            }
        }

        let improvement = f - f_new;
        x = x_new;
        f = f_new;
        g = g_new;
        converged = inf_norm(&g) < opts.grad_tol || improvement <= opts.f_tol * f.abs().max(1.0);
    }

    Some(Minimum {
        x,
        f,
        grad: g,
        iterations,
        converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Rosenbrock;

    impl Objective for Rosenbrock {
        fn value(&mut self, x: &[f64]) -> Option<f64> {
            Some((1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2))
        }

        fn value_grad(&mut self, x: &[f64]) -> Option<(f64, Vec<f64>)> {
            let f = self.value(x)?;
            let g = vec![
                -2.0 * (1.0 - x[0]) - 400.0 * x[0] * (x[1] - x[0] * x[0]),
                200.0 * (x[1] - x[0] * x[0]),
            ];
            Some((f, g))
        }
    }

    #[test]
    fn minimizes_rosenbrock() {
        let opts = BfgsOptions {
            max_iter: 500,
            f_tol: 0.0,
            ..Default::default()
        };
        let m = bfgs(&mut Rosenbrock, &[-1.2, 1.0], &opts).unwrap();
        assert!(m.converged);
        assert!((m.x[0] - 1.0).abs() < 1e-4 && (m.x[1] - 1.0).abs() < 1e-4, "{m:?}");
    }

    struct Quadratic;

    impl Objective for Quadratic {
        fn value(&mut self, x: &[f64]) -> Option<f64> {
            Some(x.iter().enumerate().map(|(i, v)| (i + 1) as f64 * v * v).sum())
        }

        fn value_grad(&mut self, x: &[f64]) -> Option<(f64, Vec<f64>)> {
            let g = x.iter().enumerate().map(|(i, v)| 2.0 * (i + 1) as f64 * v).collect();
            Some((self.value(x)?, g))
        }
    }

    #[test]
    fn quadratic_converges_fast() {
        let m = bfgs(&mut Quadratic, &[1.0, -2.0, 3.0, 0.5], &BfgsOptions::default()).unwrap();
        assert!(m.converged);
        assert!(m.iterations < 30);
        assert!(m.f < 1e-10);
    }
}
