//! Nelder–Mead downhill simplex with dimension-adaptive coefficients
//! (Gao & Han 2012), which behaves noticeably better than the textbook
//! constants beyond a handful of dimensions.

#[derive(Debug, Clone, Copy)]
pub struct SimplexOptions {
    pub max_evals: usize,
    /// Edge length of the initial simplex along each coordinate.
    pub initial_step: f64,
    /// Stop once the spread of function values across the simplex is below this.
    pub f_tol: f64,
    /// ...and the largest vertex distance from the best vertex is below this.
    pub x_tol: f64,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        SimplexOptions { max_evals: 4000, initial_step: 0.25, f_tol: 1e-13, x_tol: 1e-10 }
    }
}

#[derive(Debug, Clone)]
pub struct SimplexResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub evals: usize,
    pub converged: bool,
}

pub fn minimize<F>(mut f: F, x0: &[f64], opts: &SimplexOptions) -> SimplexResult
where
    F: FnMut(&[f64]) -> f64,
{
    let n = x0.len();
    assert!(n > 0, "empty parameter vector");
    let nf = n as f64;
    let (reflect, expand) = (1.0, 1.0 + 2.0 / nf);
    let (contract, shrink) = (0.75 - 0.5 / nf, 1.0 - 1.0 / nf);

    let mut evals = 0usize;
    let mut eval = |x: &[f64], evals: &mut usize| {
        *evals += 1;
        let v = f(x);
        if v.is_nan() { f64::INFINITY } else { v }
    };

    let mut verts: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    verts.push(x0.to_vec());
    for i in 0..n {
        let mut v = x0.to_vec();
        v[i] += opts.initial_step;
        verts.push(v);
    }
    let mut vals: Vec<f64> = verts.iter().map(|v| eval(v, &mut evals)).collect();

    let mut order: Vec<usize> = (0..=n).collect();
    let mut centroid = vec![0.0; n];
    let mut trial = vec![0.0; n];
    let mut trial2 = vec![0.0; n];
    let mut converged = false;

    while evals < opts.max_evals {
        order.sort_by(|&i, &j| vals[i].total_cmp(&vals[j]));
        let (best, worst, second) = (order[0], order[n], order[n - 1]);

        let spread = vals[worst] - vals[best];
        let size = verts
            .iter()
            .map(|v| v.iter().zip(&verts[best]).fold(0.0f64, |m, (a, b)| m.max((a - b).abs())))
            .fold(0.0f64, f64::max);
        if spread.abs() <= opts.f_tol && size <= opts.x_tol {
            converged = true;
            break;
        }

        centroid.iter_mut().for_each(|c| *c = 0.0);
        for &i in &order[..n] {
            for (c, x) in centroid.iter_mut().zip(&verts[i]) {
                *c += x / nf;
            }
        }

        let along = |out: &mut Vec<f64>, coef: f64, centroid: &[f64], w: &[f64]| {
            for k in 0..out.len() {
                out[k] = centroid[k] + coef * (centroid[k] - w[k]);
            }
        };

        along(&mut trial, reflect, &centroid, &verts[worst]);
        let fr = eval(&trial, &mut evals);

        if fr < vals[best] {
            along(&mut trial2, reflect * expand, &centroid, &verts[worst]);
            let fe = eval(&trial2, &mut evals);
            if fe < fr {
                verts[worst].copy_from_slice(&trial2);
                vals[worst] = fe;
            } else {
                verts[worst].copy_from_slice(&trial);
                vals[worst] = fr;
            }
            continue;
        }
        if fr < vals[second] {
            verts[worst].copy_from_slice(&trial);
            vals[worst] = fr;
            continue;
        }

        // contraction: outside if the reflected point beat the worst vertex
        let outside = fr < vals[worst];
        let coef = if outside { reflect * contract } else { -contract };
        along(&mut trial2, coef, &centroid, &verts[worst]);
        let fc = eval(&trial2, &mut evals);
        if (outside && fc <= fr) || (!outside && fc < vals[worst]) {
            verts[worst].copy_from_slice(&trial2);
            vals[worst] = fc;
            continue;
        }

        let anchor = verts[best].clone();
        for &i in &order[1..] {
            for (x, a) in verts[i].iter_mut().zip(&anchor) {
                *x = a + shrink * (*x - a);
            }
            vals[i] = eval(&verts[i], &mut evals);
        }
    }

    let best = (0..=n).min_by(|&i, &j| vals[i].total_cmp(&vals[j])).unwrap();
    SimplexResult { x: verts[best].clone(), f: vals[best], evals, converged }
}
