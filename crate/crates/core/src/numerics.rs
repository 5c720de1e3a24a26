//! Small numerical utilities: Gauss-Legendre rules, Legendre polynomials,
//! golden-section minimization.

/// Legendre polynomials P_0..P_lmax at `x` by upward recurrence.
///
/// The recurrence (l+1)P_{l+1} = (2l+1)x P_l - l P_{l-1} is stable on [-1, 1].
pub fn legendre_all(l_max: usize, x: f64, out: &mut Vec<f64>) {
    out.clear();
    out.push(1.0);
    if l_max == 0 {
        return;
    }
    out.push(x);
    for l in 1..l_max {
        let next = ((2 * l + 1) as f64 * x * out[l] - l as f64 * out[l - 1]) / (l + 1) as f64;
        out.push(next);
    }
}

/// Single Legendre polynomial P_l(x).
pub fn legendre(l: usize, x: f64) -> f64 {
    let (mut pm1, mut p) = (1.0, x);
    if l == 0 {
        return 1.0;
    }
    for k in 1..l {
        let next = ((2 * k + 1) as f64 * x * p - k as f64 * pm1) / (k + 1) as f64;
        pm1 = p;
        p = next;
    }
    p
}

/// Nodes and weights of the n-point Gauss-Legendre rule on [-1, 1].
///
/// Newton iteration on P_n starting from the Chebyshev-based initial guess;
/// accurate to machine precision for the moderate orders used here.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // initial guess (Abramowitz & Stegun 25.4.38 vicinity)
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // evaluate P_n and P_n' at x
            let (mut pm1, mut p) = (1.0_f64, x);
            for k in 1..n {
                let next = ((2 * k + 1) as f64 * x * p - k as f64 * pm1) / (k + 1) as f64;
                pm1 = p;
                p = next;
            }
            dp = n as f64 * (x * p - pm1) / (x * x - 1.0);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

/// Golden-section search for the minimum of a unimodal `f` on [a, b].
///
/// Returns the abscissa of the minimum to within `tol`.
pub fn golden_section_min(mut f: impl FnMut(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a).abs() > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// Least-squares slope of y against x.
pub fn linear_fit_slope(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len());
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}
