use crate::error::Result;
use crate::motion::CollisionModel;
use crate::mpc::{rank_descending, sample_feasible, Gaussian7, Proposal, ScoredViewpoint};
use crate::rng;
use crate::score::Scorer;
use crate::sensor::Viewpoint;

/// Samples around a predicted viewpoint and ranks the feasible candidates by
/// score. The prediction itself is candidate 0 when feasible.
pub fn refine_viewpoint(
    predicted: &Viewpoint,
    sigma: [f64; 7],
    scorer: &Scorer,
    m: &CollisionModel,
    n: usize,
    seed: u64,
) -> Result<Vec<ScoredViewpoint>> {
    let mut cands = Vec::with_capacity(n);
    if m.is_free(predicted) {
        cands.push(*predicted);
    }
    if cands.len() < n {
        let g = Gaussian7 {
            mean: predicted.to_vec7(),
            sigma,
        };
        match sample_feasible(m, &Proposal::Gaussian(g), n - cands.len(), &mut rng::stream(seed, 0x4EF1)) {
            Ok(s) => cands.extend(s.viewpoints),
            Err(e) if cands.is_empty() => return Err(e),
            Err(_) => {}
        }
    }
    let scores = scorer.predict_batch(&cands)?;
    Ok(rank_descending(&scores)
        .into_iter()
        .map(|i| ScoredViewpoint {
            viewpoint: cands[i],
            score: Some(scores[i]),
        })
        .collect())
}
