#include "selstudy/selreg.hpp"

#include <cmath>
#include <stdexcept>

namespace selstudy::selreg {

std::vector<int> resolve_mask(const RegularizerConfig& config,
                              int num_unit_layers) {
  std::vector<int> out;
  switch (config.mask) {
    case LayerMask::All:
      for (int i = 0; i < num_unit_layers; ++i) out.push_back(i);
      break;
    case LayerMask::First3:
      for (int i = 0; i < std::min(3, num_unit_layers); ++i) out.push_back(i);
      break;
    case LayerMask::Last3:
      for (int i = std::max(0, num_unit_layers - 3); i < num_unit_layers; ++i) {
        out.push_back(i);
      }
      break;
    case LayerMask::Explicit:
      for (int i : config.explicit_layers) {
        if (i < 0 || i >= num_unit_layers) {
          throw std::invalid_argument("layer mask index out of range");
        }
        out.push_back(i);
      }
      break;
  }
  if (out.empty()) {
    throw std::invalid_argument("regularizer layer mask is empty");
  }
  return out;
}

double softmax_cross_entropy(const Eigen::MatrixXd& logits,
                             const std::vector<int>& labels,
                             Eigen::MatrixXd* dlogits) {
  const Eigen::Index n = logits.rows();
  if (static_cast<std::size_t>(n) != labels.size()) {
    throw std::invalid_argument("softmax_cross_entropy: labels length mismatch");
  }
  double loss = 0.0;
  Eigen::MatrixXd probs(n, logits.cols());
  for (Eigen::Index i = 0; i < n; ++i) {
    const double m = logits.row(i).maxCoeff();
    Eigen::RowVectorXd e = (logits.row(i).array() - m).exp();
    probs.row(i) = e / e.sum();
    const double p = std::max(probs(i, labels[static_cast<std::size_t>(i)]),
                              1e-12);
    loss -= std::log(p);
  }
  loss /= static_cast<double>(n);
  if (dlogits) {
    *dlogits = probs / static_cast<double>(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      (*dlogits)(i, labels[static_cast<std::size_t>(i)]) -=
          1.0 / static_cast<double>(n);
    }
  }
  return loss;
}

SiEval shifted_si_and_grads(const Eigen::MatrixXd& responses,
                            const std::vector<int>& labels, int num_classes,
                            double epsilon, double unit_coeff,
                            bool with_grads) {
  SiEval out;
  const Eigen::Index batch = responses.rows();
  const Eigen::Index units = responses.cols();

  // Shift each column nonnegative; remember the argmin rows for the chain.
  Eigen::MatrixXd shifted = responses;
  std::vector<Eigen::Index> shift_row(static_cast<std::size_t>(units), -1);
  for (Eigen::Index u = 0; u < units; ++u) {
    Eigen::Index arg = 0;
    const double lo = shifted.col(u).minCoeff(&arg);
    if (lo < 0.0) {
      shifted.col(u).array() -= lo;
      shift_row[static_cast<std::size_t>(u)] = arg;
    }
  }

  const selmetrics::ClassConditionalMeans ccm =
      selmetrics::class_conditional_means(shifted, labels, num_classes);
  const int present = ccm.num_present();
  if (with_grads) {
    out.response_grads = Eigen::MatrixXd::Zero(batch, units);
  }
  if (present < 2) return out;  // degenerate batch: SI = 0, zero gradient

  std::vector<int> present_classes;
  for (int c = 0; c < num_classes; ++c) {
    if (ccm.class_counts[static_cast<std::size_t>(c)] > 0) {
      present_classes.push_back(c);
    }
  }

  double acc = 0.0;
  for (Eigen::Index u = 0; u < units; ++u) {
    int arg = 0;
    for (int k = 1; k < present; ++k) {
      if (ccm.means(present_classes[static_cast<std::size_t>(k)], u) >
          ccm.means(present_classes[static_cast<std::size_t>(arg)], u)) {
        arg = k;
      }
    }
    const double a = ccm.means(present_classes[static_cast<std::size_t>(arg)], u);
    double rest = 0.0;
    for (int k = 0; k < present; ++k) {
      if (k != arg) rest += ccm.means(present_classes[static_cast<std::size_t>(k)], u);
    }
    rest /= static_cast<double>(present - 1);
    const double denom = a + rest + epsilon;
    acc += (a - rest) / denom;

    if (with_grads) {
      // d(loss)/d(mu_c) for this unit, then chained to per-sample responses.
      const double dsi_da = (2.0 * rest + epsilon) / (denom * denom);
      const double dsi_dk =
          -(2.0 * a + epsilon) /
          (denom * denom * static_cast<double>(present - 1));
      Eigen::VectorXd dmu = Eigen::VectorXd::Zero(num_classes);
      for (int k = 0; k < present; ++k) {
        const int c = present_classes[static_cast<std::size_t>(k)];
        dmu[c] = unit_coeff * (k == arg ? dsi_da : dsi_dk);
      }
      double total = 0.0;
      for (Eigen::Index i = 0; i < batch; ++i) {
        const int c = labels[static_cast<std::size_t>(i)];
        const double g =
            dmu[c] / static_cast<double>(
                         ccm.class_counts[static_cast<std::size_t>(c)]);
        out.response_grads(i, u) += g;
        total += g;
      }
      // Chain through the nonneg shift: the argmin sample absorbs -sum.
      if (shift_row[static_cast<std::size_t>(u)] >= 0) {
        out.response_grads(shift_row[static_cast<std::size_t>(u)], u) -= total;
      }
    }
  }
  out.mean_si = acc / static_cast<double>(units);
  return out;
}

LossBreakdown regularized_loss(const numnet::ForwardTrace& trace,
                               const std::vector<int>& labels,
                               int num_classes,
                               const RegularizerConfig& config) {
  const std::vector<int> mask =
      resolve_mask(config, static_cast<int>(trace.unit_responses.size()));
  LossBreakdown out;
  out.cross_entropy = softmax_cross_entropy(trace.logits(), labels);
  double acc = 0.0;
  for (int t : mask) {
    const SiEval si = shifted_si_and_grads(
        trace.unit_responses[static_cast<std::size_t>(t)], labels,
        num_classes, config.epsilon, 0.0, /*with_grads=*/false);
    out.per_layer_mean_si.push_back(si.mean_si);
    acc += si.mean_si;
  }
  out.mean_si = acc / static_cast<double>(mask.size());
  out.total = out.cross_entropy - config.alpha * out.mean_si;
  return out;
}

std::vector<Eigen::MatrixXd> regularizer_activation_grads(
    const numnet::ForwardTrace& trace, const std::vector<int>& labels,
    int num_classes, const RegularizerConfig& config) {
  const int num_unit_layers = static_cast<int>(trace.unit_responses.size());
  const std::vector<int> mask = resolve_mask(config, num_unit_layers);
  std::vector<Eigen::MatrixXd> grads(
      static_cast<std::size_t>(num_unit_layers));
  if (config.alpha == 0.0) {
    for (int t = 0; t < num_unit_layers; ++t) {
      grads[static_cast<std::size_t>(t)] = Eigen::MatrixXd::Zero(
          trace.unit_responses[static_cast<std::size_t>(t)].rows(),
          trace.unit_responses[static_cast<std::size_t>(t)].cols());
    }
    return grads;
  }
  for (int t : mask) {
    const Eigen::MatrixXd& resp =
        trace.unit_responses[static_cast<std::size_t>(t)];
    const double scale = -config.alpha /
                         (static_cast<double>(mask.size()) *
                          static_cast<double>(resp.cols()));
    grads[static_cast<std::size_t>(t)] =
        shifted_si_and_grads(resp, labels, num_classes, config.epsilon, scale,
                             /*with_grads=*/true)
            .response_grads;
  }
  for (int t = 0; t < num_unit_layers; ++t) {
    if (grads[static_cast<std::size_t>(t)].size() == 0) {
      grads[static_cast<std::size_t>(t)] = Eigen::MatrixXd::Zero(
          trace.unit_responses[static_cast<std::size_t>(t)].rows(),
          trace.unit_responses[static_cast<std::size_t>(t)].cols());
    }
  }
  return grads;
}

numnet::LossEval evaluate(const numnet::ForwardTrace& trace,
                          const std::vector<int>& labels, int num_classes,
                          const RegularizerConfig& config) {
  numnet::LossEval eval;
  const LossBreakdown lb = regularized_loss(trace, labels, num_classes, config);
  eval.loss = lb.total;
  softmax_cross_entropy(trace.logits(), labels, &eval.dlogits);
  eval.unit_response_grads =
      regularizer_activation_grads(trace, labels, num_classes, config);
  return eval;
}

}  // namespace selstudy::selreg
