#pragma once

#include <random>
#include <vector>

#include "regretcal/dataset.hpp"

namespace regretcal::testing {

inline ScoredDataset make_ds(const std::vector<double>& scores, const std::vector<int>& labels,
                             const std::vector<std::vector<double>>& features = {}) {
  std::vector<ScoredSample> s;
  for (std::size_t i = 0; i < scores.size(); ++i)
    s.push_back({scores[i], labels[i], features.empty() ? std::vector<double>{} : features[i]});
  return ScoredDataset(std::move(s));
}

inline ScoredDataset random_ds(std::uint64_t seed, std::size_t n, std::size_t distinct = 0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<ScoredSample> s;
  for (std::size_t i = 0; i < n; ++i) {
    double score = u(rng);
    if (distinct > 0) score = std::floor(score * static_cast<double>(distinct)) / static_cast<double>(distinct);
    s.push_back({score, u(rng) < score ? 1 : 0, {}});
  }
  return ScoredDataset(std::move(s));
}

}  // namespace regretcal::testing
