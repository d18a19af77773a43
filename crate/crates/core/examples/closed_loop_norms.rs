//! Spectral abscissa, H2 and H∞ norm of a plant under a static gain.

use nalgebra::DMatrix;

use mrv::control::{closed_loop, h2_norm, hinf_norm, spectral_abscissa, PlantModel, HINF_TOL};

fn main() -> mrv::Result<()> {
    let plant = PlantModel::new(
        "cart",
        DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 2.0, -0.1]),
        DMatrix::from_row_slice(2, 1, &[0.0, 1.0]),
        DMatrix::from_row_slice(2, 1, &[0.0, 1.0]),
        DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]),
        DMatrix::identity(2, 2),
        DMatrix::zeros(2, 1),
        DMatrix::from_row_slice(2, 1, &[0.0, 0.1]),
    )?;
    for k in [1.0, 3.0, 8.0, 15.0] {
        let f = DMatrix::from_row_slice(1, 2, &[-(2.0 + k), -2.0]);
        let cl = closed_loop(&plant, &f)?;
        println!(
            "F = [{:+.1}, {:+.1}]  abscissa {:+.4}  H2 {:.5}  Hinf {:.5}",
            f[0],
            f[1],
            spectral_abscissa(&cl.a_f)?,
            h2_norm(&cl)?,
            hinf_norm(&cl, HINF_TOL)?
        );
    }
    Ok(())
}
