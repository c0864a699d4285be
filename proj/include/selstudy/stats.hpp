#pragma once

#include <cstdint>
#include <utility>
#include <vector>

namespace selstudy::stats {

// Percentile bootstrap of the mean; deterministic per seed.
std::pair<double, double> bootstrap_ci(const std::vector<double>& samples,
                                       double level = 0.95,
                                       int resamples = 10000,
                                       std::uint64_t seed = 0);

enum class TestMethod { TTest, RankSum };

// Two-sided Welch t-test or Wilcoxon rank-sum (normal approximation with tie
// correction). Bonferroni correction clamps p * corrections at 1.
double compare_groups(const std::vector<double>& a,
                      const std::vector<double>& b, TestMethod method,
                      int corrections = 1);

// Paired two-sided t-test on elementwise differences a[i] - b[i].
double paired_t_test(const std::vector<double>& a,
                     const std::vector<double>& b);

double spearman_correlation(const std::vector<double>& x,
                            const std::vector<double>& y);

double mean(const std::vector<double>& v);

}  // namespace selstudy::stats
