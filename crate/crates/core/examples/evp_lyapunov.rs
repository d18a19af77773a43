//! Lyapunov test as an eigenvalue problem: the smallest `λ` with
//! `AᵀP + PA ≺ λI`, `I - P ≺ λI` and `P - 10I ≺ λI` is negative iff some
//! `I ≺ P ≺ 10I` certifies that `A` is Hurwitz.

use nalgebra::DMatrix;

use mrv::lmi::{solve_evp, Affine, EvpOptions, LmiBuilder};

fn main() -> mrv::Result<()> {
    // eigenvalues -1 and -1/2 ± i·sqrt(3)/2, then shifted right
    for (label, shift) in [("stable", 0.0), ("unstable", 0.8)] {
        let a = DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 0.0, 0.0, 0.0, 1.0, -1.0, -2.0, -2.0])
            + DMatrix::identity(3, 3) * shift;
        let mut b = LmiBuilder::new();
        let p = b.symmetric("P", 3);
        b.add(Affine::var(p).right_mul(&a).sym())?;
        b.add(Affine::constant(DMatrix::identity(3, 3)) - Affine::var(p))?;
        b.add(Affine::var(p) - Affine::constant(DMatrix::identity(3, 3) * 10.0))?;
        let amf = b.build()?;
        let res = solve_evp(&amf, &EvpOptions::exact())?;
        println!(
            "{label:>8}: lambda* = {:+.6e} after {} iterations ({})",
            res.lambda_star,
            res.iterations,
            res.status.as_str()
        );
        if res.lambda_star < 0.0 {
            for (name, m) in amf.unpack_internal(&res.x_star)? {
                println!("{name} =\n{m:.4}");
            }
        }
    }
    Ok(())
}
