#include "selstudy/pwcca.hpp"

#include <Eigen/SVD>
#include <stdexcept>

namespace selstudy::pwcca {

namespace {

constexpr double kRankThreshold = 1e-6;

// Centered columns and the left singular basis truncated at the relative
// singular-value threshold.
struct CenteredBasis {
  Eigen::MatrixXd centered;
  Eigen::MatrixXd u;  // M x rank
  int rank = 0;
};

CenteredBasis centered_basis(const Eigen::MatrixXd& x, const char* which) {
  CenteredBasis out;
  out.centered = x.rowwise() - x.colwise().mean();
  if (out.centered.cwiseAbs().maxCoeff() == 0.0) {
    throw std::invalid_argument(
        std::string("pwcca_distance: ") + which +
        " input has zero variance (all columns constant)");
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(out.centered, Eigen::ComputeThinU);
  const Eigen::VectorXd& sv = svd.singularValues();
  const double cutoff = kRankThreshold * sv[0];
  int rank = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i) {
    if (sv[i] >= cutoff) rank++;
  }
  out.u = svd.matrixU().leftCols(rank);
  out.rank = rank;
  return out;
}

}  // namespace

CCAResult pwcca_distance(const Eigen::MatrixXd& first,
                         const Eigen::MatrixXd& second) {
  if (first.rows() != second.rows()) {
    throw std::invalid_argument("pwcca_distance: sample counts differ");
  }
  CCAResult result;
  result.sample_count_warning =
      first.rows() <= std::max(first.cols(), second.cols());

  const CenteredBasis a = centered_basis(first, "first");
  const CenteredBasis b = centered_basis(second, "second");
  result.rank1 = a.rank;
  result.rank2 = b.rank;

  // Canonical correlations are the singular values of U1^T U2.
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a.u.transpose() * b.u,
                                        Eigen::ComputeThinU);
  result.correlations = svd.singularValues().cwiseMin(1.0).cwiseMax(0.0);

  // Canonical variates in sample space from the first input's view; weight
  // each by how much of the first representation it accounts for.
  const Eigen::MatrixXd variates = a.u * svd.matrixU();  // M x k
  Eigen::VectorXd weights =
      (variates.transpose() * a.centered).cwiseAbs().rowwise().sum();
  weights /= weights.sum();
  result.weights = weights;
  result.distance = 1.0 - weights.dot(result.correlations);
  result.distance = std::min(1.0, std::max(0.0, result.distance));
  return result;
}

std::vector<double> baseline_distances(
    const std::vector<Eigen::MatrixXd>& runs) {
  if (runs.size() < 2) {
    throw std::invalid_argument("baseline_distances: need at least 2 runs");
  }
  std::vector<double> out;
  out.reserve(runs.size() * (runs.size() - 1) / 2);
  for (std::size_t i = 0; i < runs.size(); ++i) {
    for (std::size_t j = i + 1; j < runs.size(); ++j) {
      const double dij = pwcca_distance(runs[i], runs[j]).distance;
      const double dji = pwcca_distance(runs[j], runs[i]).distance;
      out.push_back(0.5 * (dij + dji));
    }
  }
  return out;
}

std::vector<double> cross_distances(const std::vector<Eigen::MatrixXd>& runs_a,
                                    const std::vector<Eigen::MatrixXd>& runs_b) {
  if (runs_a.empty() || runs_b.empty()) {
    throw std::invalid_argument("cross_distances: empty input");
  }
  std::vector<double> out;
  out.reserve(runs_a.size() * runs_b.size());
  for (const auto& a : runs_a) {
    for (const auto& b : runs_b) {
      out.push_back(pwcca_distance(a, b).distance);
    }
  }
  return out;
}

DistanceRatioReport distance_ratio(
    const std::vector<std::vector<double>>& baselines_per_layer,
    const std::vector<std::vector<double>>& crosses_per_layer) {
  if (baselines_per_layer.size() != crosses_per_layer.size()) {
    throw std::invalid_argument("distance_ratio: layer count mismatch");
  }
  DistanceRatioReport report;
  double acc = 0.0;
  for (std::size_t l = 0; l < baselines_per_layer.size(); ++l) {
    const auto& base = baselines_per_layer[l];
    const auto& cross = crosses_per_layer[l];
    if (base.empty() || cross.empty()) {
      throw std::invalid_argument("distance_ratio: empty distance list");
    }
    double bm = 0.0, cm = 0.0;
    for (double v : base) bm += v;
    for (double v : cross) cm += v;
    bm /= static_cast<double>(base.size());
    cm /= static_cast<double>(cross.size());
    if (bm <= 0.0) {
      throw std::invalid_argument("distance_ratio: zero baseline mean");
    }
    report.baseline_mean.push_back(bm);
    report.cross_mean.push_back(cm);
    report.ratio.push_back(cm / bm);
    acc += cm / bm;
  }
  report.mean_ratio = acc / static_cast<double>(baselines_per_layer.size());
  return report;
}

}  // namespace selstudy::pwcca
