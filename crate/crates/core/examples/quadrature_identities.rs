//! Moment identities of the Gauss–Legendre sphere grid.

use std::f64::consts::PI;

use hawking_lab::surface::build_grid;

fn main() -> hawking_lab::Result<()> {
    for (nt, np) in [(8, 16), (16, 32), (32, 64)] {
        let g = build_grid(nt, np)?;
        let x2 = g.integrate_fn(|n| n.dir[0].powi(2));
        let x4 = g.integrate_fn(|n| n.dir[0].powi(4));
        let x2y2 = g.integrate_fn(|n| (n.dir[0] * n.dir[1]).powi(2));
        println!(
            "{nt:>3}x{np:<3} x² {:.2e}  x⁴ {:.2e}  x²y² {:.2e}",
            (x2 / (4.0 * PI / 3.0) - 1.0).abs(),
            (x4 / (4.0 * PI / 5.0) - 1.0).abs(),
            (x2y2 / (4.0 * PI / 15.0) - 1.0).abs()
        );
    }
    Ok(())
}
