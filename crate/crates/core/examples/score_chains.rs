//! Score system chains against gold chains with MUC, B³, CEAF-e and CONLL,
//! and rebuild chains from pairwise decisions.
//!
//! ```bash
//! cargo run -p gaecoref --example score_chains
//! ```

use gaecoref::metrics::{conll_f1, reconstruct_chains, ScoreReport};
use gaecoref::Clustering;

fn main() -> gaecoref::Result<()> {
    // mentions a, b, c, d = 0, 1, 2, 3
    let gold = Clustering::from_chains(4, vec![vec![0, 1, 2], vec![3]])?;
    let sys = Clustering::from_chains(4, vec![vec![0, 1], vec![2, 3]])?;
    println!("gold {:?}\nsys  {:?}\n{}\n", gold.chains(), sys.chains(), ScoreReport::chains_only(&gold, &sys)?);

    // one observed link plus classified candidate pairs; links are transitive
    let observed = [(0, 1)];
    let classified = [((1, 2), true), ((2, 3), false), ((0, 3), false)];
    let rebuilt = reconstruct_chains(&observed, &classified, 4)?;
    println!("rebuilt from links: {:?} (CONLL {:.4})", rebuilt.chains(), conll_f1(&gold, &rebuilt)?);

    // a single false positive merges two whole chains
    let merged = reconstruct_chains(&observed, &[((1, 2), true), ((2, 3), true)], 4)?;
    println!("with one false link: {:?} (CONLL {:.4})", merged.chains(), conll_f1(&gold, &merged)?);

    let singletons = Clustering::singletons(4);
    let report = ScoreReport::chains_only(&gold, &singletons)?;
    println!("all singletons: MUC degenerate = {}, CONLL {:.4}", report.muc.degenerate, report.conll);
    Ok(())
}
