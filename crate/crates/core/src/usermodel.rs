//! The expand-if-relevant user policy and path-truncated metrics.
//!
//! A user with intent `t` scans heads in order. A head relevant to `t` is expanded: the user
//! reads its whole tail and then resumes with the next head. Irrelevant heads are viewed and
//! skipped. The resulting sequence of viewed documents is the user's path.

use crate::error::Result;
use crate::gains::GainSpec;
use crate::ranking::{DocumentId, QueryCase, TwoLevelRanking};

/// Documents viewed by one user, in viewing order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UserPath {
    pub viewed: Vec<DocumentId>,
}

impl UserPath {
    pub fn len(&self) -> usize {
        self.viewed.len()
    }

    pub fn is_empty(&self) -> bool {
        self.viewed.is_empty()
    }
}

pub fn user_path(ranking: &TwoLevelRanking, intent: usize, case: &QueryCase) -> UserPath {
    let mut viewed = Vec::with_capacity(ranking.n_documents());
    for row in &ranking.rows {
        viewed.push(row.head);
        if case.utility(intent, row.head) > 0.0 {
            viewed.extend_from_slice(&row.tail);
        }
    }
    UserPath { viewed }
}

/// Expected utility of the first `k` documents on each intent's path. Skipped heads count as
/// viewed positions; path position `p` is discounted by the first-level factor `gamma_p`.
pub fn truncated_metric(
    ranking: &TwoLevelRanking,
    case: &QueryCase,
    spec: &GainSpec,
    k: usize,
) -> Result<f64> {
    if k == 0 {
        return Err(crate::error::Error::InvalidParameter(
            "cutoff k must be >= 1".into(),
        ));
    }
    let mut total = 0.0;
    for t in 0..case.n_intents() {
        let path = user_path(ranking, t, case);
        let mut sum = 0.0;
        for (p, &d) in path.viewed.iter().take(k).enumerate() {
            sum += spec.discounts.first(p)? * case.utility(t, d);
        }
        total += case.intents().prob(t) * spec.gain.eval(sum);
    }
    Ok(total)
}
