#pragma once

#include <span>

namespace kar {

// Wilcoxon AUC: (concordant positive-negative pairs + half credit for score
// ties) / (P*N), computed from tie-aware rank statistics in integer
// arithmetic so the result is bit-identical to pairwise enumeration.
// Requires at least one positive and one negative label.
double auc(std::span<const double> scores, std::span<const double> labels);

// Mean binary cross-entropy with the same 1e-7 clamp as the training loss.
double logloss(std::span<const double> preds, std::span<const double> labels);

}  // namespace kar
