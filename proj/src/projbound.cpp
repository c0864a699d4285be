#include "selstudy/projbound.hpp"

#include <Eigen/QR>
#include <Eigen/SVD>
#include <cmath>
#include <limits>
#include <set>
#include <stdexcept>

#include "selstudy/selmetrics.hpp"
#include "selstudy/selreg.hpp"

namespace selstudy::projbound {

namespace {

// Retract onto the orthogonal group: Q factor with R's diagonal signs fixed
// positive so the retraction is a continuous map near the identity.
Eigen::MatrixXd qr_retract(const Eigen::MatrixXd& w) {
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(w);
  Eigen::MatrixXd q = qr.householderQ();
  const Eigen::MatrixXd r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Eigen::Index i = 0; i < q.cols(); ++i) {
    if (r(i, i) < 0.0) q.col(i) = -q.col(i);
  }
  return q;
}

void check_labels(const std::vector<int>& labels, int num_classes) {
  std::set<int> seen(labels.begin(), labels.end());
  if (static_cast<int>(seen.size()) < 2) {
    throw std::invalid_argument(
        "optimize_projection: need at least 2 classes present");
  }
  for (int c : seen) {
    if (c < 0 || c >= num_classes) {
      throw std::invalid_argument("optimize_projection: label out of range");
    }
  }
}

// One Adam descent from the identity. QR retraction preserves the
// determinant sign, so a single run explores only one of the two connected
// components of the orthogonal group; other regions are reached by rotating
// the activation basis before the call (Adam's elementwise scaling behaves
// best in the identity frame, so descents always start there).
OrthonormalProjection descend(const Eigen::MatrixXd& acts_val,
                              const std::vector<int>& labels, int num_classes,
                              const ProjectionConfig& config) {
  const Eigen::Index units = acts_val.cols();
  OrthonormalProjection result;
  result.w = Eigen::MatrixXd::Identity(units, units);
  result.stop_reason = "max_steps";

  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(units, units);
  Eigen::MatrixXd v = Eigen::MatrixXd::Zero(units, units);
  const double unit_coeff = -1.0 / static_cast<double>(units);

  double prev_loss = 0.0;
  int flat_steps = 0;
  Eigen::MatrixXd best_w = result.w;
  double best_loss = std::numeric_limits<double>::infinity();
  for (int step = 1; step <= config.max_steps; ++step) {
    const Eigen::MatrixXd projected = acts_val * result.w;
    const selreg::SiEval eval = selreg::shifted_si_and_grads(
        projected, labels, num_classes, config.si_epsilon, unit_coeff,
        /*with_grads=*/true);
    const double loss = 1.0 - eval.mean_si;
    result.loss_log.push_back(loss);
    if (loss < best_loss) {
      best_loss = loss;
      best_w = result.w;
    }

    // Gradient of the loss w.r.t. W through P = A W.
    const Eigen::MatrixXd grad = acts_val.transpose() * eval.response_grads;

    m = config.beta1 * m + (1.0 - config.beta1) * grad;
    v = config.beta2 * v +
        (1.0 - config.beta2) * grad.array().square().matrix();
    const double bc1 = 1.0 - std::pow(config.beta1, step);
    const double bc2 = 1.0 - std::pow(config.beta2, step);
    const Eigen::ArrayXXd m_hat = m.array() / bc1;
    const Eigen::ArrayXXd v_hat = v.array() / bc2;
    result.w -=
        (config.lr * m_hat / (v_hat.sqrt() + config.adam_eps)).matrix();
    result.w = qr_retract(result.w);

    result.steps = step;
    if (step > 1 && std::abs(loss - prev_loss) < config.stop_delta) {
      if (++flat_steps >= config.stop_patience) {
        result.stop_reason = "converged";
        break;
      }
    } else {
      flat_steps = 0;
    }
    prev_loss = loss;
  }
  result.w = best_w;
  result.best_loss = best_loss;
  return result;
}

}  // namespace

OrthonormalProjection optimize_projection(const Eigen::MatrixXd& acts_val,
                                          const std::vector<int>& labels,
                                          int num_classes,
                                          const ProjectionConfig& config) {
  if (acts_val.rows() == 0 || acts_val.cols() == 0) {
    throw std::invalid_argument("optimize_projection: empty activations");
  }
  if (static_cast<std::size_t>(acts_val.rows()) != labels.size()) {
    throw std::invalid_argument("optimize_projection: labels length mismatch");
  }
  check_labels(labels, num_classes);

  const Eigen::Index units = acts_val.cols();
  const Eigen::MatrixXd identity = Eigen::MatrixXd::Identity(units, units);
  OrthonormalProjection best = descend(acts_val, labels, num_classes, config);
  if (units < 2) return best;

  // The identity start alone is not enough: QR retraction cannot change the
  // determinant sign, so it explores only the rotation component, and the
  // mean-SI landscape has local minima where axes stay mixed. Extra starts:
  // the reflected identity (other component) and the right singular vectors
  // of the centered class-mean matrix (axes pre-aligned with the class
  // structure), each in both components. The best endpoint wins; the
  // identity start runs first, so the result never falls below the
  // axis-aligned selectivity of the input.
  std::vector<Eigen::MatrixXd> starts;
  Eigen::MatrixXd reflected = identity;
  reflected(units - 1, units - 1) = -1.0;
  starts.push_back(reflected);

  const selmetrics::ClassConditionalMeans ccm =
      selmetrics::class_conditional_means(acts_val, labels, num_classes);
  const Eigen::MatrixXd centered =
      ccm.means.rowwise() - ccm.means.colwise().mean();
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(centered, Eigen::ComputeFullV);
  const Eigen::MatrixXd spectral = svd.matrixV();
  starts.push_back(spectral);
  Eigen::MatrixXd spectral_reflected = spectral;
  spectral_reflected.col(units - 1) = -spectral_reflected.col(units - 1);
  starts.push_back(spectral_reflected);

  for (const Eigen::MatrixXd& w0 : starts) {
    OrthonormalProjection candidate =
        descend(acts_val * w0, labels, num_classes, config);
    if (candidate.best_loss < best.best_loss) {
      candidate.w = w0 * candidate.w;
      best = std::move(candidate);
    }
  }
  return best;
}

ProjectedSelectivity projected_selectivity(const Eigen::MatrixXd& acts_test,
                                           const Eigen::MatrixXd& w,
                                           const std::vector<int>& labels,
                                           int num_classes, double epsilon) {
  if (acts_test.cols() != w.rows()) {
    throw std::invalid_argument(
        "projected_selectivity: projection dimension mismatch");
  }
  const Eigen::MatrixXd shifted =
      selmetrics::shift_nonneg(acts_test * w);
  const selmetrics::ClassConditionalMeans ccm =
      selmetrics::class_conditional_means(shifted, labels, num_classes);
  ProjectedSelectivity out;
  out.per_axis_si = selmetrics::layer_selectivity(ccm, epsilon);
  out.mean_si = out.per_axis_si.mean();
  return out;
}

double orthonormality_error(const Eigen::MatrixXd& w) {
  if (w.rows() != w.cols()) {
    throw std::invalid_argument("orthonormality_error: W must be square");
  }
  const Eigen::MatrixXd d =
      w.transpose() * w - Eigen::MatrixXd::Identity(w.cols(), w.cols());
  return d.squaredNorm();
}

}  // namespace selstudy::projbound
