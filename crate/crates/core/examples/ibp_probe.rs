use fracsep::operators::{FracOps, SmoothFunction};
use std::time::Instant;

fn main() {
    let g = SmoothFunction::poly(&[0.0, 0.0, 1.0, -2.0, 1.0]);
    let f = SmoothFunction::poly(&[0.0, 1.0, -1.0]);
    for gamma in [0.5, 1.5] {
        let ops = FracOps::with_default_spec(gamma).unwrap();
        for u in [0.5, 1e-9, 1.0 - 1e-9, 1.0 - 1e-12] {
            let t0 = Instant::now();
            let v = ops.regional_laplacian(&g, u).unwrap();
            println!("gamma={gamma} u={u:.3e} Lg={v:.6e} took {:?}", t0.elapsed());
        }
        let t0 = Instant::now();
        let resid = ops.integration_by_parts_residual(&f, &g).unwrap();
        println!("gamma={gamma} ibp residual = {resid:.3e} took {:?}", t0.elapsed());
        let c = SmoothFunction::constant(5.0);
        let t0 = Instant::now();
        let (lhs, rhs) = ops.integration_by_parts_sides(&c, &g).unwrap();
        println!("gamma={gamma} const pair lhs={lhs:.3e} rhs={rhs:.3e} took {:?}", t0.elapsed());
    }
}
