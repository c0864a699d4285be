#pragma once

#include <Eigen/Core>
#include <string>
#include <vector>

namespace selstudy::projbound {

struct ProjectionConfig {
  double lr = 0.001;
  int max_steps = 3500;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double stop_delta = 1e-6;  // |delta loss| threshold...
  int stop_patience = 10;    // ...held for this many consecutive steps
  double si_epsilon = 1e-7;
};

struct OrthonormalProjection {
  Eigen::MatrixXd w;  // U x U, orthonormal
  std::vector<double> loss_log;
  std::string stop_reason;  // "converged" or "max_steps"
  int steps = 0;
  double best_loss = 1.0;
};

// Minimize 1 - mean SI of the columnwise-shifted projection A_val * W over
// orthonormal W. Adam steps with QR retraction back onto the orthogonal
// group after every update. The retraction cannot change the determinant
// sign, so the search starts once from the identity and once from a
// reflection and keeps the better endpoint.
OrthonormalProjection optimize_projection(const Eigen::MatrixXd& acts_val,
                                          const std::vector<int>& labels,
                                          int num_classes,
                                          const ProjectionConfig& config = {});

struct ProjectedSelectivity {
  Eigen::VectorXd per_axis_si;
  double mean_si = 0.0;
};

// Project held-out activations through W, shift columns nonnegative, and
// report SI per projected axis. This is the layer's upper-bound estimate.
ProjectedSelectivity projected_selectivity(const Eigen::MatrixXd& acts_test,
                                           const Eigen::MatrixXd& w,
                                           const std::vector<int>& labels,
                                           int num_classes,
                                           double epsilon = 1e-7);

// Squared Frobenius norm of W^T W - I.
double orthonormality_error(const Eigen::MatrixXd& w);

}  // namespace selstudy::projbound
