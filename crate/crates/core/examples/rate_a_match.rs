//! Update two ratings after a win and after a draw, and show how likely the
//! pair was to draw beforehand.
//!
//!     cargo run -p arena-core --example rate_a_match

use arena_core::{conservative_score, match_quality, update_pair, Outcome, Rating, RatingParams};

fn show(label: &str, r: &Rating) {
    println!(
        "  {label:<9} mu {:>7.3}  sigma {:>6.3}  mu-3sigma {:>7.3}",
        r.mu,
        r.sigma,
        conservative_score(r, 3.0)
    );
}

fn main() -> anyhow::Result<()> {
    let params = RatingParams::default();
    let veteran = Rating::new(31.0, 2.5)?;
    let newcomer = params.prior();

    println!("before (match quality {:.3}):", match_quality(&veteran, &newcomer, &params));
    show("veteran", &veteran);
    show("newcomer", &newcomer);

    // An upset moves the uncertain newcomer much further than the veteran.
    let (v, n) = update_pair(&veteran, &newcomer, Outcome::SecondWins, &params)?;
    println!("newcomer wins:");
    show("veteran", &v);
    show("newcomer", &n);

    let (v, n) = update_pair(&veteran, &newcomer, Outcome::Draw, &params)?;
    println!("draw:");
    show("veteran", &v);
    show("newcomer", &n);
    Ok(())
}
