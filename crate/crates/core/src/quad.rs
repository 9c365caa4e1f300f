//! Low-level quadrature: fixed Gauss-Legendre panels, adaptive bisection,
//! geometrically graded meshes toward integrable endpoint singularities, and
//! composite rules on uniform time grids.

/// 16-point Gauss-Legendre nodes and weights on [-1, 1].
const GL16: [(f64, f64); 16] = [
    (-0.98940093499164994, 0.02715245941175410),
    (-0.94457502307323260, 0.06225352393864789),
    (-0.86563120238783176, 0.09515851168249279),
    (-0.75540440835500300, 0.12462897125553388),
    (-0.61787624440264377, 0.14959598881657674),
    (-0.45801677765722737, 0.16915651939500254),
    (-0.28160355077925892, 0.18260341504492358),
    (-0.09501250983763744, 0.18945061045506850),
    (0.09501250983763744, 0.18945061045506850),
    (0.28160355077925892, 0.18260341504492358),
    (0.45801677765722737, 0.16915651939500254),
    (0.61787624440264377, 0.14959598881657674),
    (0.75540440835500300, 0.12462897125553388),
    (0.86563120238783176, 0.09515851168249279),
    (0.94457502307323260, 0.06225352393864789),
    (0.98940093499164994, 0.02715245941175410),
];

pub fn gl16<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> f64 {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let mut s = 0.0;
    for (x, w) in GL16 {
        s += w * f(mid + half * x);
    }
    s * half
}

/// Integral estimate together with a self-reported absolute error indicator.
#[derive(Debug, Clone, Copy, Default)]
pub struct QuadResult {
    pub value: f64,
    pub error: f64,
}

impl QuadResult {
    fn add(&mut self, other: QuadResult) {
        self.value += other.value;
        self.error += other.error;
    }
}

/// Adaptive bisection with a GL16 whole-vs-halves error estimate. Intended
/// for integrands that are smooth except possibly for steep (but bounded)
/// behaviour; singular endpoints should go through [`integrate_graded`].
///
/// The per-node error budget halves on descent but never drops below the
/// rounding floor of the local magnitudes, which keeps float noise from
/// forcing a full-depth expansion.
pub fn adaptive_gl<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> QuadResult {
    fn rec<F: Fn(f64) -> f64>(
        f: &F,
        a: f64,
        b: f64,
        whole: f64,
        tol: f64,
        depth: u32,
        out: &mut QuadResult,
    ) {
        let mid = 0.5 * (a + b);
        let left = gl16(f, a, mid);
        let right = gl16(f, mid, b);
        let err = (left + right - whole).abs();
        let floor = 1e-15 * (left.abs() + right.abs() + 1.0);
        if err <= tol.max(floor) || depth >= 24 {
            out.value += left + right;
            out.error += err;
            return;
        }
        rec(f, a, mid, left, 0.5 * tol, depth + 1, out);
        rec(f, mid, b, right, 0.5 * tol, depth + 1, out);
    }
    let mut out = QuadResult::default();
    if a == b {
        return out;
    }
    rec(f, a, b, gl16(f, a, b), tol, 0, &mut out);
    out
}

/// Integrate over [a, b] where the integrand may have an integrable power
/// singularity at a flagged endpoint. A quarter-length strip at each flagged
/// side gets a geometric mesh (panel ratio 2) descending toward the endpoint
/// until panel contributions fall below tol or the panel width underflows
/// `floor`; the remaining middle is handled adaptively.
pub fn integrate_graded<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    tol: f64,
    floor: f64,
    singular_left: bool,
    singular_right: bool,
) -> QuadResult {
    let mut out = QuadResult::default();
    let len = b - a;
    if !(len > 0.0) {
        return out;
    }
    let strip = 0.25 * len;
    let lo = if singular_left { a + strip } else { a };
    let hi = if singular_right { b - strip } else { b };
    if singular_left {
        out.add(descend(f, a, lo, tol, floor, true));
    }
    if singular_right {
        out.add(descend(f, hi, b, tol, floor, false));
    }
    if hi > lo {
        out.add(adaptive_gl(f, lo, hi, tol));
    }
    out
}

/// Geometric descent covering [a, b] with the singular point at `a` (if
/// `toward_left`) or at `b`. Panels halve toward the singular end; each panel
/// is integrated adaptively. Stops once two consecutive panel contributions
/// drop below tol/8 or the width underflows `floor`; the dropped stub is
/// charged to the error indicator via the last panel magnitude.
fn descend<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    tol: f64,
    floor: f64,
    toward_left: bool,
) -> QuadResult {
    let mut out = QuadResult::default();
    let len = b - a;
    if !(len > 0.0) {
        return out;
    }
    let mut w = len;
    let mut small_count = 0;
    let mut last = 0.0;
    let mut prev = f64::NAN;
    for _ in 0..64 {
        let half = 0.5 * w;
        let (lo, hi) = if toward_left { (a + half, a + w) } else { (b - w, b - half) };
        let panel = adaptive_gl(f, lo, hi, 0.125 * tol);
        out.add(panel);
        prev = last;
        last = panel.value;
        if last.abs() < 0.125 * tol {
            small_count += 1;
            if small_count >= 2 {
                break;
            }
        } else {
            small_count = 0;
        }
        w = half;
        if w < floor || w < f64::EPSILON * len {
            break;
        }
    }
    // complete the leftover stub by geometric extrapolation: power-law
    // integrands give a stable panel ratio r < 1, so the remaining mass is
    // last * r / (1 - r)
    if prev.is_finite() && prev != 0.0 {
        let r = last / prev;
        if r > 0.0 && r < 0.95 {
            let tail = last * r / (1.0 - r);
            out.value += tail;
            out.error += tail.abs() * 0.1 + f64::EPSILON;
        } else {
            out.error += last.abs();
        }
    }
    out
}

/// Composite Simpson on a uniform grid of values (n points, n-1 intervals).
/// Falls back to a trapezoid correction on the last interval when the
/// interval count is odd.
pub fn simpson_uniform(values: &[f64], h: f64) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    if n == 2 {
        return 0.5 * h * (values[0] + values[1]);
    }
    let even_intervals = (n - 1) & !1usize; // largest even interval count
    let m = even_intervals; // simpson over values[0..=m]
    let mut s = values[0] + values[m];
    let mut i = 1;
    while i < m {
        s += if i % 2 == 1 { 4.0 * values[i] } else { 2.0 * values[i] };
        i += 1;
    }
    let mut total = s * h / 3.0;
    if m < n - 1 {
        total += 0.5 * h * (values[n - 2] + values[n - 1]);
    }
    total
}

/// Trapezoid rule on a possibly nonuniform grid.
pub fn trapezoid(times: &[f64], values: &[f64]) -> f64 {
    assert_eq!(times.len(), values.len());
    let mut s = 0.0;
    for i in 1..times.len() {
        s += 0.5 * (times[i] - times[i - 1]) * (values[i] + values[i - 1]);
    }
    s
}
