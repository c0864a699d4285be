#include "selstudy/stats.hpp"

#include <algorithm>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "selstudy/rng.hpp"

namespace selstudy::stats {

double mean(const std::vector<double>& v) {
  if (v.empty()) throw std::invalid_argument("mean: empty sample");
  return std::accumulate(v.begin(), v.end(), 0.0) /
         static_cast<double>(v.size());
}

namespace {

double variance(const std::vector<double>& v, double m) {
  double acc = 0.0;
  for (double x : v) acc += (x - m) * (x - m);
  return acc / static_cast<double>(v.size() - 1);
}

// Midranks of v, ties averaged.
std::vector<double> ranks(const std::vector<double>& v) {
  const std::size_t n = v.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> r(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && v[order[j + 1]] == v[order[i]]) ++j;
    const double avg = 0.5 * (static_cast<double>(i + 1) +
                              static_cast<double>(j + 1));
    for (std::size_t k = i; k <= j; ++k) r[order[k]] = avg;
    i = j + 1;
  }
  return r;
}

double welch_t_test(const std::vector<double>& a,
                    const std::vector<double>& b) {
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  const double ma = mean(a), mb = mean(b);
  const double va = variance(a, ma), vb = variance(b, mb);
  const double se2 = va / na + vb / nb;
  if (se2 == 0.0) return ma == mb ? 1.0 : 0.0;
  const double t = (ma - mb) / std::sqrt(se2);
  const double df = se2 * se2 /
                    (va * va / (na * na * (na - 1.0)) +
                     vb * vb / (nb * nb * (nb - 1.0)));
  boost::math::students_t dist(df);
  return 2.0 * boost::math::cdf(dist, -std::abs(t));
}

double rank_sum_test(const std::vector<double>& a,
                     const std::vector<double>& b) {
  const std::size_t na = a.size(), nb = b.size();
  std::vector<double> pooled = a;
  pooled.insert(pooled.end(), b.begin(), b.end());
  const std::vector<double> r = ranks(pooled);
  double ra = 0.0;
  for (std::size_t i = 0; i < na; ++i) ra += r[i];
  const double n = static_cast<double>(na + nb);
  const double mu = static_cast<double>(na) * (n + 1.0) / 2.0;

  // Tie correction for the normal approximation of the rank-sum variance.
  std::vector<double> sorted = pooled;
  std::sort(sorted.begin(), sorted.end());
  double tie_term = 0.0;
  std::size_t i = 0;
  while (i < sorted.size()) {
    std::size_t j = i;
    while (j + 1 < sorted.size() && sorted[j + 1] == sorted[i]) ++j;
    const double t = static_cast<double>(j - i + 1);
    tie_term += t * t * t - t;
    i = j + 1;
  }
  const double var =
      static_cast<double>(na) * static_cast<double>(nb) / 12.0 *
      (n + 1.0 - tie_term / (n * (n - 1.0)));
  if (var == 0.0) return 1.0;
  const double z = (ra - mu) / std::sqrt(var);
  boost::math::normal dist;
  return 2.0 * boost::math::cdf(dist, -std::abs(z));
}

}  // namespace

std::pair<double, double> bootstrap_ci(const std::vector<double>& samples,
                                       double level, int resamples,
                                       std::uint64_t seed) {
  if (samples.empty()) {
    throw std::invalid_argument("bootstrap_ci: empty sample");
  }
  Rng rng = stream_rng(seed, "bootstrap");
  std::vector<double> means(static_cast<std::size_t>(resamples));
  const std::size_t n = samples.size();
  for (int r = 0; r < resamples; ++r) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      acc += samples[rng.below(n)];
    }
    means[static_cast<std::size_t>(r)] = acc / static_cast<double>(n);
  }
  std::sort(means.begin(), means.end());
  const double tail = (1.0 - level) / 2.0;
  auto pick = [&](double q) {
    const double pos = q * static_cast<double>(resamples - 1);
    const std::size_t lo = static_cast<std::size_t>(pos);
    const std::size_t hi = std::min(lo + 1, means.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return means[lo] * (1.0 - frac) + means[hi] * frac;
  };
  return {pick(tail), pick(1.0 - tail)};
}

double compare_groups(const std::vector<double>& a,
                      const std::vector<double>& b, TestMethod method,
                      int corrections) {
  if (a.size() < 2 || b.size() < 2) {
    throw std::invalid_argument("compare_groups: each group needs >= 2 samples");
  }
  const double p =
      method == TestMethod::TTest ? welch_t_test(a, b) : rank_sum_test(a, b);
  return std::min(1.0, p * static_cast<double>(std::max(1, corrections)));
}

double paired_t_test(const std::vector<double>& a,
                     const std::vector<double>& b) {
  if (a.size() != b.size() || a.size() < 2) {
    throw std::invalid_argument("paired_t_test: need matched groups of >= 2");
  }
  std::vector<double> diff(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) diff[i] = a[i] - b[i];
  const double m = mean(diff);
  const double v = variance(diff, m);
  if (v == 0.0) return m == 0.0 ? 1.0 : 0.0;
  const double n = static_cast<double>(diff.size());
  const double t = m / std::sqrt(v / n);
  boost::math::students_t dist(n - 1.0);
  return 2.0 * boost::math::cdf(dist, -std::abs(t));
}

double spearman_correlation(const std::vector<double>& x,
                            const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) {
    throw std::invalid_argument("spearman_correlation: need matched samples");
  }
  const std::vector<double> rx = ranks(x);
  const std::vector<double> ry = ranks(y);
  const double mx = mean(rx), my = mean(ry);
  double num = 0.0, dx = 0.0, dy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    num += (rx[i] - mx) * (ry[i] - my);
    dx += (rx[i] - mx) * (rx[i] - mx);
    dy += (ry[i] - my) * (ry[i] - my);
  }
  if (dx == 0.0 || dy == 0.0) return 0.0;
  return num / std::sqrt(dx * dy);
}

}  // namespace selstudy::stats
