//! The picks-per-hour metric and the constant implied by the paper's
//! clutter-removal table.

use grasplab::bench::{compute_mpph, paper_mpph_constants, PAPER_CLUTTER_ROWS, DEFAULT_TE};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    println!("0.5 success, 8 s + 10 s per attempt: {} picks/h", compute_mpph(0.5, 8.0, 10.0)?);
    println!("dense policy at 0.16 s, t_e {DEFAULT_TE} s, always succeeding: {:.1}", compute_mpph(1.0, 0.16, DEFAULT_TE)?);
    for (&(sr, tc, te, reported), k) in PAPER_CLUTTER_ROWS.iter().zip(paper_mpph_constants()) {
        println!(
            "sr {sr:.4} t_c {tc:5.2} t_e {te:4.1}: reported {reported:6.2}, formula {:6.2}, ratio constant {k:.1}",
            compute_mpph(sr, tc, te)?
        );
    }
    Ok(())
}
