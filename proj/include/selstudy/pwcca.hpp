#pragma once

#include <Eigen/Core>
#include <vector>

namespace selstudy::pwcca {

struct CCAResult {
  Eigen::VectorXd correlations;  // descending, clamped to [0, 1]
  Eigen::VectorXd weights;       // nonnegative, sum to 1
  double distance = 0.0;         // rho = 1 - sum(weights .* correlations)
  int rank1 = 0;                 // retained numerical rank of each input
  int rank2 = 0;
  bool sample_count_warning = false;  // M <= max(U1, U2)
};

// Projection-weighted CCA distance between two representations (rows are
// samples, columns are units). Columns are mean-centered; directions with
// singular value below 1e-6 x the largest are dropped. The projection
// weights come from the FIRST argument, so the operator is asymmetric.
CCAResult pwcca_distance(const Eigen::MatrixXd& first,
                         const Eigen::MatrixXd& second);

// All unordered pairs among replicates at the same alpha; each pair's
// distance is the mean of both argument orders. n replicates give
// n * (n - 1) / 2 values.
std::vector<double> baseline_distances(
    const std::vector<Eigen::MatrixXd>& runs);

// Full cross product, first argument drawn from runs_a.
std::vector<double> cross_distances(const std::vector<Eigen::MatrixXd>& runs_a,
                                    const std::vector<Eigen::MatrixXd>& runs_b);

struct DistanceRatioReport {
  std::vector<double> baseline_mean;  // per layer
  std::vector<double> cross_mean;
  std::vector<double> ratio;  // cross / baseline
  double mean_ratio = 0.0;
};

DistanceRatioReport distance_ratio(
    const std::vector<std::vector<double>>& baselines_per_layer,
    const std::vector<std::vector<double>>& crosses_per_layer);

}  // namespace selstudy::pwcca
