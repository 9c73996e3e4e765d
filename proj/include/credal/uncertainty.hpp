#pragma once

#include "credal/credal_head.hpp"
#include "credal/types.hpp"

#include <iosfwd>
#include <span>

namespace credal::uncertainty {

/// Per-node total, aleatoric and epistemic uncertainty in bits.
struct UncertaintyScores {
    Vector tu;
    Vector au;
    Vector eu;
};

/// TU = max entropy, AU = min entropy over each node's interval credal set.
UncertaintyScores interval_uncertainty(const head::CredalPrediction& pred);

enum class HullMode {
    FullHull,
    /// TU = max member entropy instead of the maximum over the convex hull.
    MembersOnly,
};

struct HullUncertainty {
    double tu = 0.0;
    double au = 0.0;
    double eu = 0.0;
    /// Mixture weights of the TU maximizer.
    Vector weights;
    int iterations = 0;
};

/// Entropy extremes over the convex hull of M member distributions (rows of
/// `members`). AU is the smallest member entropy. TU maximizes H(w^T P) over
/// the weight simplex with away-step Frank-Wolfe and exact line search,
/// stopping once the duality gap drops below 1e-8 or after 10^4 iterations.
HullUncertainty hull_uncertainty(const Matrix& members, HullMode mode = HullMode::FullHull);

/// Classical decomposition: TU = H(mean p), AU = mean H(p_m), EU = TU - AU.
/// `members[m]` holds one N x C probability matrix per ensemble member.
UncertaintyScores ensemble_entropy_decompose(std::span<const Matrix> members);

/// hull_uncertainty applied node by node to the members' rows.
UncertaintyScores hull_scores(std::span<const Matrix> members, HullMode mode = HullMode::FullHull);

/// CSV with header node_id,q_lower_0..,q_upper_0..,tu,au,eu.
void write_prediction_csv(std::ostream& out, const head::CredalPrediction& pred,
                          const UncertaintyScores& scores);

} // namespace credal::uncertainty
