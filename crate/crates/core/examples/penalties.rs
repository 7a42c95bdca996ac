//! Values, supergradients and sample weights of the concave penalty family.

use concave_dl::ConcavePenalty;

fn main() -> concave_dl::Result<()> {
    let penalties: Vec<ConcavePenalty> = [
        "identity",
        "lq:q=0.5",
        "log:eps=1.0",
        "capped:eps=1.0",
        "scad:lambda=1,a=3.7",
        "mcp:lambda=1,gamma=3",
    ]
    .iter()
    .map(|s| s.parse())
    .collect::<Result<_, _>>()?;

    println!(
        "{:<22} {:>8} {:>8} {:>10} {:>10}",
        "penalty", "g(2)", "g'(2)", "s(r=0.5)", "s(r=4)"
    );
    for p in &penalties {
        println!(
            "{:<22} {:>8.4} {:>8.4} {:>10.4} {:>10.4}",
            p.to_string(),
            p.value(2.0)?,
            p.supergradient(2.0)?,
            p.weight(0.5, 1e-8, 1e8)?,
            p.weight(4.0, 1e-8, 1e8)?,
        );
    }

    // tangent line of F(v) = g(sqrt v) at v0 lies above F
    let log = ConcavePenalty::log(1.0)?;
    let v0 = 4.0;
    let (f0, df0) = (log.loss(v0)?, log.loss_supergradient(v0)?);
    for v in [0.0, 1.0, 4.0, 9.0, 100.0] {
        println!(
            "v = {v:>5}: F = {:.4}, tangent = {:.4}",
            log.loss(v)?,
            f0 + df0 * (v - v0)
        );
    }
    Ok(())
}
