#pragma once

#include <Eigen/Core>
#include <vector>

namespace selstudy::selmetrics {

// Rows are samples, columns are units. For a convolutional layer each column
// holds the spatial mean of one feature map after the nonlinearity.
using ActivationMatrix = Eigen::MatrixXd;

constexpr double kDefaultEpsilon = 1e-7;

struct ClassConditionalMeans {
  // C x U. Rows whose class is absent from the batch are zero and flagged.
  Eigen::MatrixXd means;
  std::vector<int> class_counts;  // n_c per class

  int num_present() const {
    int n = 0;
    for (int c : class_counts) n += (c > 0) ? 1 : 0;
    return n;
  }
};

struct SelectivityReport {
  std::vector<Eigen::VectorXd> per_unit_si;         // per layer
  std::vector<double> per_layer_mean_si;
  double network_mean_si = 0.0;                     // within-layer then across
  std::vector<Eigen::VectorXd> per_unit_precision;  // per layer
  std::vector<std::vector<bool>> dead_mask;         // per layer
  std::vector<Eigen::VectorXd> responsiveness;      // per layer
};

ClassConditionalMeans class_conditional_means(const ActivationMatrix& acts,
                                              const std::vector<int>& labels,
                                              int num_classes);

// SI = (mu_max - mu_-max) / (mu_max + mu_-max + eps) over present classes.
// Ties for mu_max break to the lowest class index. Fewer than two present
// classes gives SI = 0.
double selectivity_index(const Eigen::VectorXd& present_class_means,
                         double epsilon = kDefaultEpsilon);

// SI for every unit of a layer from its class-conditional means.
Eigen::VectorXd layer_selectivity(const ClassConditionalMeans& ccm,
                                  double epsilon = kDefaultEpsilon);

// Mean within each layer first, then mean of layer means.
double network_mean_si(const std::vector<Eigen::VectorXd>& per_layer_unit_sis);

// Fraction of the N strongest activations that belong to the plurality class.
// Ties at the N-th activation break to the lowest sample index.
double precision(const Eigen::VectorXd& acts_for_unit,
                 const std::vector<int>& labels, int top_n);

// A unit is dead iff its activation is exactly zero for every sample.
std::vector<bool> dead_units(const ActivationMatrix& acts);

// Fraction of samples with nonzero activation per unit; < 0.5 marks sparse.
Eigen::VectorXd responsiveness(const ActivationMatrix& acts);
std::vector<bool> sparse_units(const ActivationMatrix& acts);

// Subtract min(0, column minimum) per column so all entries are >= 0.
ActivationMatrix shift_nonneg(const ActivationMatrix& acts);

// Full per-layer report. SI is computed on nonneg-shifted activations (a
// no-op for plain ReLU responses); dead/responsiveness/precision use the raw
// activations. top_n defaults to the per-class sample count when <= 0.
SelectivityReport build_report(const std::vector<ActivationMatrix>& layers,
                               const std::vector<int>& labels,
                               int num_classes, int top_n = 0,
                               double epsilon = kDefaultEpsilon);

}  // namespace selstudy::selmetrics
