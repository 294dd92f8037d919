#include "kar/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "kar/error.hpp"
#include "kar/tensor.hpp"

namespace kar {

double auc(std::span<const double> scores, std::span<const double> labels) {
    if (scores.size() != labels.size())
        fail_data("auc: " + std::to_string(scores.size()) + " scores vs " +
                  std::to_string(labels.size()) + " labels");
    std::uint64_t pos = 0, neg = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] != 0.0 && labels[i] != 1.0)
            fail_data("auc: label must be 0 or 1");
        if (!std::isfinite(scores[i])) fail_data("auc: non-finite score");
        labels[i] == 1.0 ? ++pos : ++neg;
    }
    if (pos == 0 || neg == 0)
        fail_data("auc undefined: need both classes, got " + std::to_string(pos) +
                  " positives and " + std::to_string(neg) + " negatives");

    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    // Walk tie groups in ascending score order. Doubling the half-credit for
    // ties keeps everything integral: num2 accumulates
    // 2*concordant + tied, and AUC = num2 / (2*P*N).
    std::uint64_t num2 = 0, neg_below = 0;
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        std::uint64_t p_here = 0, n_here = 0;
        while (j < order.size() && scores[order[j]] == scores[order[i]]) {
            labels[order[j]] == 1.0 ? ++p_here : ++n_here;
            ++j;
        }
        num2 += p_here * (2 * neg_below + n_here);
        neg_below += n_here;
        i = j;
    }
    return static_cast<double>(num2) / (2.0 * static_cast<double>(pos) * static_cast<double>(neg));
}

double logloss(std::span<const double> preds, std::span<const double> labels) {
    if (preds.size() != labels.size()) fail_data("logloss: size mismatch");
    if (preds.empty()) fail_data("logloss: empty input");
    double total = 0.0;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        const double y = labels[i];
        if (y != 0.0 && y != 1.0) fail_data("logloss: label must be 0 or 1");
        const double p = std::clamp(preds[i], nn::kBceEps, 1.0 - nn::kBceEps);
        total += y * std::log(p) + (1.0 - y) * std::log(1.0 - p);
    }
    return -total / static_cast<double>(preds.size());
}

}  // namespace kar
