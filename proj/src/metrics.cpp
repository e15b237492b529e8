#include "gdcn/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "gdcn/model.hpp"

namespace gdcn {

double auc(const std::vector<double>& scores, const std::vector<uint8_t>& labels) {
    if (scores.size() != labels.size() || scores.empty()) {
        throw DataError("auc: scores and labels must be non-empty and parallel");
    }
    const size_t n = scores.size();
    size_t positives = 0;
    for (uint8_t y : labels) positives += y;
    size_t negatives = n - positives;
    if (positives == 0 || negatives == 0) {
        throw DataError("auc: both classes must be present");
    }
    for (double s : scores) {
        if (std::isnan(s)) throw NumericError("auc: NaN score");
    }

    std::vector<uint32_t> order(n);
    std::iota(order.begin(), order.end(), 0u);
    std::sort(order.begin(), order.end(), [&](uint32_t a, uint32_t b) {
        return scores[a] != scores[b] ? scores[a] < scores[b] : a < b;
    });

    // Sum of average ranks over positives. Tied runs share the mean of the
    // ranks they span; every term is a half-integer, kept exact in double.
    double positive_rank_sum = 0.0;
    size_t i = 0;
    while (i < n) {
        size_t j = i;
        while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
        double avg_rank = static_cast<double>(i + 1 + j + 1) / 2.0;
        for (size_t k = i; k <= j; ++k) {
            if (labels[order[k]]) positive_rank_sum += avg_rank;
        }
        i = j + 1;
    }

    double p = static_cast<double>(positives);
    double numerator = positive_rank_sum - p * (p + 1.0) / 2.0;
    return numerator / (p * static_cast<double>(negatives));
}

double mean_logloss(const std::vector<double>& predictions, const std::vector<uint8_t>& labels) {
    if (predictions.size() != labels.size() || predictions.empty()) {
        throw DataError("logloss: predictions and labels must be non-empty and parallel");
    }
    double total = 0.0;
    for (size_t i = 0; i < predictions.size(); ++i) {
        total += logloss(predictions[i], labels[i]);
    }
    return total / static_cast<double>(predictions.size());
}

}  // namespace gdcn
