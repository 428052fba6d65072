//! Pairwise distance distortion of the projection as the output size grows.

use uds::harness::probe::{jl_table, JlStudy};

fn main() -> uds::Result<()> {
    let study = JlStudy { seeds: 10, ..JlStudy::default() };
    println!("{} points of {}x{}, {} seeds", study.points, study.rows, study.cols, study.seeds);
    let rows = study.run(&[(2, 2), (4, 4), (8, 8), (16, 16), (32, 32)])?;
    print!("{}", jl_table(&rows));
    Ok(())
}
