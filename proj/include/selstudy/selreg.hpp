#pragma once

#include <Eigen/Core>
#include <set>
#include <vector>

#include "selstudy/numnet.hpp"
#include "selstudy/selmetrics.hpp"

namespace selstudy::selreg {

enum class LayerMask { All, First3, Last3, Explicit };

struct RegularizerConfig {
  // Negative alpha discourages selectivity, positive promotes it.
  double alpha = 0.0;
  double epsilon = selmetrics::kDefaultEpsilon;
  LayerMask mask = LayerMask::All;
  std::set<int> explicit_layers;  // unit-layer indices, used with Explicit
};

struct LossBreakdown {
  double total = 0.0;
  double cross_entropy = 0.0;
  double mean_si = 0.0;  // mu_SI over the masked layers for this batch
  std::vector<double> per_layer_mean_si;
};

// Unit-layer indices selected by the mask. The output layer carries no unit
// responses, so it is excluded by construction.
std::vector<int> resolve_mask(const RegularizerConfig& config,
                              int num_unit_layers);

// Softmax cross-entropy, mean over the batch, probabilities floored at 1e-12.
// dlogits is the gradient of the mean loss.
double softmax_cross_entropy(const Eigen::MatrixXd& logits,
                             const std::vector<int>& labels,
                             Eigen::MatrixXd* dlogits = nullptr);

// total = cross_entropy - alpha * mu_SI with minibatch class-conditional
// means. Unit responses are shifted nonnegative per column before SI, which
// is the identity for plain ReLU responses.
LossBreakdown regularized_loss(const numnet::ForwardTrace& trace,
                               const std::vector<int>& labels,
                               int num_classes,
                               const RegularizerConfig& config);

// Gradient of (-alpha * mu_SI) w.r.t. each layer's raw unit responses.
// Layers outside the mask get empty matrices.
std::vector<Eigen::MatrixXd> regularizer_activation_grads(
    const numnet::ForwardTrace& trace, const std::vector<int>& labels,
    int num_classes, const RegularizerConfig& config);

// Full composite-loss evaluation suitable for numnet::grad_check and the
// training loop: loss, logit gradient, and unit-response gradients.
numnet::LossEval evaluate(const numnet::ForwardTrace& trace,
                          const std::vector<int>& labels, int num_classes,
                          const RegularizerConfig& config);

struct SiEval {
  double mean_si = 0.0;
  Eigen::MatrixXd response_grads;  // gradient of unit_coeff * sum_u SI_u
};

// Mean SI of the columnwise nonneg-shifted responses, with the gradient of
// unit_coeff * sum_u SI_u w.r.t. the raw responses. The shift and argmax are
// treated as piecewise constant. Fewer than two present classes gives SI = 0
// and a zero gradient.
SiEval shifted_si_and_grads(const Eigen::MatrixXd& responses,
                            const std::vector<int>& labels, int num_classes,
                            double epsilon, double unit_coeff,
                            bool with_grads);

}  // namespace selstudy::selreg
