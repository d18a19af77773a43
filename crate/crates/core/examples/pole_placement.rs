//! Output-feedback pole placement by trust-region Levenberg–Marquardt.

use nalgebra::DMatrix;
use num_complex::Complex64;

use mrv::pole::{eigenvalues_at, levenberg_marquardt, PolePlacementTask, TrustRegionParams};

fn show(task: &PolePlacementTask, params: &TrustRegionParams) -> mrv::Result<()> {
    let out = levenberg_marquardt(task, params)?;
    println!("F =\n{:.6}", task.gain(&out.q));
    println!("residual {:.3e} after {} iterations ({:?})", out.h, out.trace.len(), out.stop);
    let mut poles = eigenvalues_at(task, &out.q)?;
    poles.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    for z in poles {
        println!("  pole {:+.6} {:+.6}i", z.re, z.im);
    }
    Ok(())
}

fn main() -> mrv::Result<()> {
    // double integrator, full state: s² - f2·s - f1 = (s + 1)(s + 2)
    let task = PolePlacementTask::new(
        DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]),
        DMatrix::from_row_slice(2, 1, &[0.0, 1.0]),
        DMatrix::identity(2, 2),
        vec![Complex64::new(-1.0, 0.0), Complex64::new(-2.0, 0.0)],
        vec![-1.0, -4.0],
    )?;
    show(&task, &TrustRegionParams { residual_tol: 1e-14, ..TrustRegionParams::default() })?;

    // three states, two inputs, two measured outputs
    let task = PolePlacementTask::new(
        DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 1.0, -0.5, 0.2]),
        DMatrix::from_row_slice(3, 2, &[0.0, 1.0, 1.0, 0.0, 0.0, 1.0]),
        DMatrix::from_row_slice(2, 3, &[1.0, 0.0, 0.0, 0.0, 1.0, 1.0]),
        vec![Complex64::new(-1.0, 1.0), Complex64::new(-1.0, -1.0), Complex64::new(-3.0, 0.0)],
        vec![0.5, -0.5, 0.3, 0.1],
    )?;
    show(&task, &TrustRegionParams::default())
}
