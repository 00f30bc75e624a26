// Deterministic Nelder–Mead minimizer (standard coefficients 1, 2, ½, ½).

use alloc::vec;
use alloc::vec::Vec;

#[derive(Debug, Clone, Copy)]
pub(crate) struct SimplexOptions {
    pub step: f64,
    pub max_evaluations: usize,
    pub min_diameter: f64,
}

#[derive(Debug, Clone)]
pub(crate) struct SimplexRun {
    pub x: Vec<f64>,
    pub value: f64,
    pub initial_value: f64,
    pub evaluations: usize,
    pub converged: bool,
    /// Best value after each iteration; non-increasing.
    pub history: Vec<f64>,
}

struct Counted<'a, F> {
    f: &'a mut F,
    used: usize,
    limit: usize,
}

impl<F: FnMut(&[f64]) -> f64> Counted<'_, F> {
    fn eval(&mut self, x: &[f64]) -> Option<f64> {
        if self.used >= self.limit {
            return None;
        }
        self.used += 1;
        let v = (self.f)(x);
        Some(if v.is_nan() { f64::INFINITY } else { v })
    }
}

fn diameter(points: &[Vec<f64>]) -> f64 {
    let mut d: f64 = 0.0;
    for a in points {
        for b in points {
            let dist = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>();
            d = d.max(libm::sqrt(dist));
        }
    }
    d
}

fn lerp(from: &[f64], to: &[f64], t: f64) -> Vec<f64> {
    from.iter().zip(to).map(|(a, b)| a + t * (b - a)).collect()
}

pub(crate) fn minimize<F: FnMut(&[f64]) -> f64>(
    f: &mut F,
    start: &[f64],
    opts: &SimplexOptions,
) -> SimplexRun {
    let n = start.len();
    let mut fc = Counted {
        f,
        used: 0,
        limit: opts.max_evaluations,
    };
    let initial_value = fc.eval(start).unwrap_or(f64::INFINITY);
    let mut points = vec![start.to_vec()];
    let mut values = vec![initial_value];
    let mut history = Vec::new();
    let mut exhausted = false;
    for i in 0..n {
        let mut p = start.to_vec();
        p[i] += opts.step;
        match fc.eval(&p) {
            Some(v) => {
                points.push(p);
                values.push(v);
            }
            None => {
                exhausted = true;
                break;
            }
        }
    }

    let mut converged = false;
    while !exhausted {
        // Stable sort keeps ties in insertion order.
        let mut order: Vec<usize> = (0..points.len()).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        points = order.iter().map(|&i| points[i].clone()).collect();
        values = order.iter().map(|&i| values[i]).collect();
        history.push(values[0]);

        if diameter(&points) < opts.min_diameter {
            converged = true;
            break;
        }
        let worst = n;
        let mut centroid = vec![0.0; n];
        for p in &points[..n] {
            for (c, x) in centroid.iter_mut().zip(p) {
                *c += x / n as f64;
            }
        }
        let reflected = lerp(&centroid, &points[worst], -1.0);
        let Some(fr) = fc.eval(&reflected) else { break };
        if fr < values[0] {
            let expanded = lerp(&centroid, &points[worst], -2.0);
            let Some(fe) = fc.eval(&expanded) else {
                points[worst] = reflected;
                values[worst] = fr;
                break;
            };
            if fe < fr {
                points[worst] = expanded;
                values[worst] = fe;
            } else {
                points[worst] = reflected;
                values[worst] = fr;
            }
            continue;
        }
        if fr < values[n - 1] {
            points[worst] = reflected;
            values[worst] = fr;
            continue;
        }
        let (contracted, outside) = if fr < values[worst] {
            (lerp(&centroid, &reflected, 0.5), true)
        } else {
            (lerp(&centroid, &points[worst], 0.5), false)
        };
        let Some(fk) = fc.eval(&contracted) else {
            break;
        };
        let accept = if outside {
            fk <= fr
        } else {
            fk < values[worst]
        };
        if accept {
            points[worst] = contracted;
            values[worst] = fk;
            continue;
        }
        // Shrink toward the best vertex.
        for i in 1..points.len() {
            let p = lerp(&points[0], &points[i], 0.5);
            match fc.eval(&p) {
                Some(v) => {
                    points[i] = p;
                    values[i] = v;
                }
                None => {
                    exhausted = true;
                    break;
                }
            }
        }
    }

    let best = (0..points.len())
        .min_by(|&a, &b| values[a].total_cmp(&values[b]))
        .unwrap_or(0);
    history.push(values[best]);
    SimplexRun {
        x: points[best].clone(),
        value: values[best],
        initial_value,
        evaluations: fc.used,
        converged,
        history,
    }
}
