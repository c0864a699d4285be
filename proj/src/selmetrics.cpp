#include "selstudy/selmetrics.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

namespace selstudy::selmetrics {

ClassConditionalMeans class_conditional_means(const ActivationMatrix& acts,
                                              const std::vector<int>& labels,
                                              int num_classes) {
  if (acts.rows() == 0 || acts.cols() == 0) {
    throw std::invalid_argument("class_conditional_means: empty activation matrix");
  }
  if (static_cast<std::size_t>(acts.rows()) != labels.size()) {
    throw std::invalid_argument("class_conditional_means: labels length != sample count");
  }
  ClassConditionalMeans out;
  out.means = Eigen::MatrixXd::Zero(num_classes, acts.cols());
  out.class_counts.assign(num_classes, 0);
  for (Eigen::Index i = 0; i < acts.rows(); ++i) {
    const int c = labels[static_cast<std::size_t>(i)];
    if (c < 0 || c >= num_classes) {
      throw std::invalid_argument("class_conditional_means: label out of range");
    }
    out.means.row(c) += acts.row(i);
    out.class_counts[static_cast<std::size_t>(c)]++;
  }
  for (int c = 0; c < num_classes; ++c) {
    if (out.class_counts[static_cast<std::size_t>(c)] > 0) {
      out.means.row(c) /= static_cast<double>(out.class_counts[static_cast<std::size_t>(c)]);
    }
  }
  return out;
}

double selectivity_index(const Eigen::VectorXd& present_class_means,
                         double epsilon) {
  const Eigen::Index n = present_class_means.size();
  if (n < 2) return 0.0;  // degenerate batch rule
  Eigen::Index argmax = 0;
  double total = present_class_means[0];
  for (Eigen::Index c = 1; c < n; ++c) {
    if (present_class_means[c] > present_class_means[argmax]) argmax = c;
    total += present_class_means[c];
  }
  const double mu_max = present_class_means[argmax];
  const double mu_rest = (total - mu_max) / static_cast<double>(n - 1);
  return (mu_max - mu_rest) / (mu_max + mu_rest + epsilon);
}

Eigen::VectorXd layer_selectivity(const ClassConditionalMeans& ccm,
                                  double epsilon) {
  const int present = ccm.num_present();
  Eigen::VectorXd si = Eigen::VectorXd::Zero(ccm.means.cols());
  if (present < 2) return si;
  Eigen::VectorXd means(present);
  for (Eigen::Index u = 0; u < ccm.means.cols(); ++u) {
    int k = 0;
    for (Eigen::Index c = 0; c < ccm.means.rows(); ++c) {
      if (ccm.class_counts[static_cast<std::size_t>(c)] > 0) {
        means[k++] = ccm.means(c, u);
      }
    }
    si[u] = selectivity_index(means, epsilon);
  }
  return si;
}

double network_mean_si(const std::vector<Eigen::VectorXd>& per_layer_unit_sis) {
  if (per_layer_unit_sis.empty()) {
    throw std::invalid_argument("network_mean_si: no layers");
  }
  double acc = 0.0;
  for (const auto& layer : per_layer_unit_sis) {
    if (layer.size() == 0) {
      throw std::invalid_argument("network_mean_si: empty layer");
    }
    acc += layer.mean();
  }
  return acc / static_cast<double>(per_layer_unit_sis.size());
}

double precision(const Eigen::VectorXd& acts_for_unit,
                 const std::vector<int>& labels, int top_n) {
  if (top_n <= 0) throw std::invalid_argument("precision: N must be positive");
  if (static_cast<Eigen::Index>(top_n) > acts_for_unit.size()) {
    throw std::invalid_argument("precision: N exceeds sample count");
  }
  std::vector<Eigen::Index> order(static_cast<std::size_t>(acts_for_unit.size()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  // Descending by activation; ties break to the lowest sample index.
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index a, Eigen::Index b) {
                     return acts_for_unit[a] > acts_for_unit[b];
                   });
  const int num_classes =
      1 + *std::max_element(labels.begin(), labels.end());
  std::vector<int> counts(static_cast<std::size_t>(num_classes), 0);
  for (int i = 0; i < top_n; ++i) {
    counts[static_cast<std::size_t>(labels[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])])]++;
  }
  const int best = *std::max_element(counts.begin(), counts.end());
  return static_cast<double>(best) / static_cast<double>(top_n);
}

std::vector<bool> dead_units(const ActivationMatrix& acts) {
  std::vector<bool> mask(static_cast<std::size_t>(acts.cols()));
  for (Eigen::Index u = 0; u < acts.cols(); ++u) {
    mask[static_cast<std::size_t>(u)] =
        (acts.col(u).array() == 0.0).all();
  }
  return mask;
}

Eigen::VectorXd responsiveness(const ActivationMatrix& acts) {
  Eigen::VectorXd frac(acts.cols());
  for (Eigen::Index u = 0; u < acts.cols(); ++u) {
    frac[u] = static_cast<double>((acts.col(u).array() != 0.0).count()) /
              static_cast<double>(acts.rows());
  }
  return frac;
}

std::vector<bool> sparse_units(const ActivationMatrix& acts) {
  const Eigen::VectorXd frac = responsiveness(acts);
  std::vector<bool> mask(static_cast<std::size_t>(frac.size()));
  for (Eigen::Index u = 0; u < frac.size(); ++u) {
    mask[static_cast<std::size_t>(u)] = frac[u] < 0.5;
  }
  return mask;
}

ActivationMatrix shift_nonneg(const ActivationMatrix& acts) {
  ActivationMatrix out = acts;
  for (Eigen::Index u = 0; u < out.cols(); ++u) {
    const double lo = out.col(u).minCoeff();
    if (lo < 0.0) out.col(u).array() -= lo;
  }
  return out;
}

SelectivityReport build_report(const std::vector<ActivationMatrix>& layers,
                               const std::vector<int>& labels,
                               int num_classes, int top_n, double epsilon) {
  SelectivityReport report;
  if (top_n <= 0) {
    top_n = static_cast<int>(labels.size()) / num_classes;
    top_n = std::max(1, top_n);
  }
  std::vector<Eigen::VectorXd> sis;
  for (const ActivationMatrix& acts : layers) {
    const ActivationMatrix shifted = shift_nonneg(acts);
    const ClassConditionalMeans ccm =
        class_conditional_means(shifted, labels, num_classes);
    Eigen::VectorXd si = layer_selectivity(ccm, epsilon);
    report.per_layer_mean_si.push_back(si.mean());
    report.per_unit_si.push_back(std::move(si));
    Eigen::VectorXd prec(acts.cols());
    for (Eigen::Index u = 0; u < acts.cols(); ++u) {
      prec[u] = precision(acts.col(u), labels, top_n);
    }
    report.per_unit_precision.push_back(std::move(prec));
    report.dead_mask.push_back(dead_units(acts));
    report.responsiveness.push_back(responsiveness(acts));
  }
  report.network_mean_si = network_mean_si(report.per_unit_si);
  return report;
}

}  // namespace selstudy::selmetrics
