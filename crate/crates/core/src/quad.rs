//! Fixed-order Gauss–Legendre quadrature over panels.
//!
//! Twenty nodes per panel is enough for every smooth integrand in this
//! crate; accuracy is controlled by the panel count.

/// Positive abscissae of the 20-point Gauss–Legendre rule on [-1, 1].
const GL20_X: [f64; 10] = [
    0.076526521133497333755,
    0.227785851141645078080,
    0.373706088715419560673,
    0.510867001950827098004,
    0.636053680726515025453,
    0.746331906460150792614,
    0.839116971822218823395,
    0.912234428251325905868,
    0.963971927277913791268,
    0.993128599185094924786,
];

/// Weights paired with [`GL20_X`].
const GL20_W: [f64; 10] = [
    0.152753387130725850698,
    0.149172986472603746788,
    0.142096109318382051329,
    0.131688638449176626898,
    0.118194531961518417312,
    0.101930119817240435037,
    0.083276741576704748725,
    0.062672048334109063570,
    0.040601429800386941331,
    0.017614007139152118312,
];

/// 20-point Gauss–Legendre on a single interval [a, b].
pub fn gauss_legendre<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64) -> f64 {
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut sum = 0.0;
    for i in 0..10 {
        let dx = half * GL20_X[i];
        sum += GL20_W[i] * (f(mid - dx) + f(mid + dx));
    }
    half * sum
}

/// Composite rule: [a, b] split into `panels` equal pieces.
pub fn integrate_panels<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, panels: usize) -> f64 {
    let panels = panels.max(1);
    let h = (b - a) / panels as f64;
    let mut total = 0.0;
    for i in 0..panels {
        let lo = a + i as f64 * h;
        total += gauss_legendre(&mut f, lo, lo + h);
    }
    total
}
