//! Exact projections onto boxes, balls, and simplices, plus Dykstra's
//! method for projecting onto an intersection.
//!
//! ```bash
//! cargo run -p distopt --example projections
//! ```

use distopt::sets::{ConvexSet, SetFamily};
use distopt::Vector;

fn show(set: &ConvexSet, p: &[f64]) -> distopt::Result<()> {
    let point = Vector::from_vec(p.to_vec());
    let projected = set.project(&point)?;
    println!(
        "{:>10} : {:?} -> {:?} (distance {:.4})",
        set.kind_name(),
        p,
        projected.as_slice(),
        set.distance(&point)?
    );
    Ok(())
}

fn main() -> distopt::Result<()> {
    let unit_box = ConvexSet::Box {
        lower: Vector::from_vec(vec![0.0, 0.0]),
        upper: Vector::from_vec(vec![1.0, 1.0]),
    };
    let unit_ball = ConvexSet::Ball { center: Vector::zeros(2), radius: 1.0 };
    let simplex = ConvexSet::Simplex { scale: 1.0, dim: 2 };

    show(&unit_box, &[2.0, -1.0])?;
    show(&unit_ball, &[3.0, 4.0])?;
    show(&simplex, &[0.6, 0.6])?;

    println!("\ndiameters: box {:.4}, ball {:.4}, simplex {:.4}", unit_box.diameter()?,
        unit_ball.diameter()?, simplex.diameter()?);

    // Intersection of two unit balls: the projection of a point above the
    // lens lands on the circle crossing.
    let lens = SetFamily::new(vec![
        ConvexSet::Ball { center: Vector::zeros(2), radius: 1.0 },
        ConvexSet::Ball { center: Vector::from_vec(vec![1.0, 0.0]), radius: 1.0 },
    ])?;
    let z = lens.project_intersection(&Vector::from_vec(vec![0.5, 5.0]), 1e-10, 10_000)?;
    println!("\nlens projection of (0.5, 5): ({:.6}, {:.6})", z[0], z[1]);
    println!("expected                   : (0.5, {:.6})", 3.0_f64.sqrt() / 2.0);

    // All-box families use the exact closed form and expose an interior ball.
    let boxes = SetFamily::new(vec![
        ConvexSet::Box {
            lower: Vector::from_vec(vec![0.0, 0.0]),
            upper: Vector::from_vec(vec![2.0, 2.0]),
        },
        ConvexSet::Box {
            lower: Vector::from_vec(vec![1.0, 1.0]),
            upper: Vector::from_vec(vec![3.0, 3.0]),
        },
    ])?;
    let z = boxes.project_intersection(&Vector::zeros(2), 1e-10, 10_000)?;
    let (center, delta) = boxes.interior_ball()?;
    println!("\nbox intersection: projection of origin = ({}, {})", z[0], z[1]);
    println!("interior ball: center = ({}, {}), clearance = {delta}", center[0], center[1]);
    Ok(())
}
