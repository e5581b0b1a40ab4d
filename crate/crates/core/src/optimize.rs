//! Unconstrained Nelder-Mead simplex minimiser. Bounded problems are
//! mapped onto it through the logistic transform in the calibration module.

#[derive(Debug, Clone)]
pub struct NelderMeadOptions {
    pub max_iterations: usize,
    /// Stop once `f_worst - f_best` over the simplex falls to this value.
    pub tolerance: f64,
}

#[derive(Debug, Clone)]
pub struct NelderMeadResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
}

const REFLECT: f64 = 1.0;
const EXPAND: f64 = 2.0;
const CONTRACT: f64 = 0.5;
const SHRINK: f64 = 0.5;

struct Simplex {
    points: Vec<Vec<f64>>,
    values: Vec<f64>,
}

impl Simplex {
    fn build<F: FnMut(&[f64]) -> f64>(
        f: &mut F,
        x0: &[f64],
        steps: &[f64],
        evals: &mut usize,
    ) -> Self {
        let n = x0.len();
        let mut points = Vec::with_capacity(n + 1);
        points.push(x0.to_vec());
        for i in 0..n {
            let mut p = x0.to_vec();
            p[i] += steps[i];
            points.push(p);
        }
        let values = points
            .iter()
            .map(|p| {
                *evals += 1;
                sanitize(f(p))
            })
            .collect();
        Self { points, values }
    }

    fn order(&mut self) {
        let mut idx: Vec<usize> = (0..self.points.len()).collect();
        // stable: ties keep their previous order
        idx.sort_by(|&a, &b| self.values[a].total_cmp(&self.values[b]));
        self.points = idx.iter().map(|&i| self.points[i].clone()).collect();
        self.values = idx.iter().map(|&i| self.values[i]).collect();
    }

    fn spread(&self) -> f64 {
        self.values[self.values.len() - 1] - self.values[0]
    }
}

fn sanitize(v: f64) -> f64 {
    if v.is_nan() {
        f64::INFINITY
    } else {
        v
    }
}

fn lerp(a: &[f64], b: &[f64], t: f64) -> Vec<f64> {
    // a + t (b - a)
    a.iter().zip(b).map(|(x, y)| x + t * (y - x)).collect()
}

fn run<F: FnMut(&[f64]) -> f64>(
    f: &mut F,
    simplex: &mut Simplex,
    budget: usize,
    tolerance: f64,
    evals: &mut usize,
) -> (usize, bool) {
    let n = simplex.points.len() - 1;
    let mut eval = |x: &[f64], evals: &mut usize| {
        *evals += 1;
        sanitize(f(x))
    };
    simplex.order();
    for iteration in 0..budget {
        if simplex.spread() <= tolerance {
            return (iteration, true);
        }
        let worst = simplex.points[n].clone();
        let f_worst = simplex.values[n];
        let mut centroid = vec![0.0; worst.len()];
        for p in &simplex.points[..n] {
            for (c, v) in centroid.iter_mut().zip(p) {
                *c += v / n as f64;
            }
        }
        let reflected = lerp(&centroid, &worst, -REFLECT);
        let f_r = eval(&reflected, evals);
        if f_r < simplex.values[0] {
            let expanded = lerp(&centroid, &worst, -EXPAND);
            let f_e = eval(&expanded, evals);
            if f_e < f_r {
                simplex.points[n] = expanded;
                simplex.values[n] = f_e;
            } else {
                simplex.points[n] = reflected;
                simplex.values[n] = f_r;
            }
        } else if f_r < simplex.values[n - 1] {
            simplex.points[n] = reflected;
            simplex.values[n] = f_r;
        } else {
            let (contracted, f_c) = if f_r < f_worst {
                let c = lerp(&centroid, &reflected, CONTRACT);
                let v = eval(&c, evals);
                (c, v)
            } else {
                let c = lerp(&centroid, &worst, CONTRACT);
                let v = eval(&c, evals);
                (c, v)
            };
            if f_c < f_worst.min(f_r) {
                simplex.points[n] = contracted;
                simplex.values[n] = f_c;
            } else {
                let best = simplex.points[0].clone();
                for i in 1..=n {
                    simplex.points[i] = lerp(&best, &simplex.points[i], SHRINK);
                    simplex.values[i] = eval(&simplex.points[i], evals);
                }
            }
        }
        simplex.order();
    }
    (budget, simplex.spread() <= tolerance)
}

/// Minimises `f` from `x0` with initial simplex edges `steps`.
///
/// After the simplex collapses it is rebuilt once around the best point;
/// the run counts as converged only if that fresh simplex also collapses
/// without improving the minimum by more than `tolerance`.
pub fn nelder_mead<F: FnMut(&[f64]) -> f64>(
    mut f: F,
    x0: &[f64],
    steps: &[f64],
    options: &NelderMeadOptions,
) -> NelderMeadResult {
    assert_eq!(x0.len(), steps.len(), "one step per coordinate");
    assert!(!x0.is_empty(), "empty parameter vector");
    let mut evals = 0;
    let mut iterations = 0;
    let mut simplex = Simplex::build(&mut f, x0, steps, &mut evals);
    let mut converged = false;
    let mut previous_best = f64::INFINITY;
    while iterations < options.max_iterations {
        let (used, collapsed) = run(
            &mut f,
            &mut simplex,
            options.max_iterations - iterations,
            options.tolerance,
            &mut evals,
        );
        iterations += used;
        if !collapsed {
            break;
        }
        if previous_best - simplex.values[0] <= options.tolerance {
            converged = true;
            break;
        }
        previous_best = simplex.values[0];
        let best = simplex.points[0].clone();
        simplex = Simplex::build(&mut f, &best, steps, &mut evals);
    }
    simplex.order();
    NelderMeadResult {
        x: simplex.points[0].clone(),
        f: simplex.values[0],
        iterations,
        evaluations: evals,
        converged,
    }
}
