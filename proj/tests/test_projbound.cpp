#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>

#include "selstudy/projbound.hpp"
#include "selstudy/rng.hpp"
#include "selstudy/selmetrics.hpp"

using namespace selstudy;
using namespace selstudy::projbound;

namespace {

Eigen::MatrixXd random_orthogonal(Rng& rng, int n) {
  Eigen::MatrixXd a(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) a(i, j) = rng.normal();
  }
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
  return qr.householderQ();
}

// Perfectly selective layer: unit u responds only to class u.
Eigen::MatrixXd one_hot_selective(const std::vector<int>& labels, int units,
                                  Rng& rng) {
  Eigen::MatrixXd acts = Eigen::MatrixXd::Zero(
      static_cast<Eigen::Index>(labels.size()), units);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    acts(static_cast<Eigen::Index>(i), labels[i]) = 1.0 + 0.1 * rng.uniform();
  }
  return acts;
}

std::vector<int> cyclic_labels(int n, int classes) {
  std::vector<int> labels(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) labels[static_cast<std::size_t>(i)] = i % classes;
  return labels;
}

double axis_aligned_mean_si(const Eigen::MatrixXd& acts,
                            const std::vector<int>& labels, int classes) {
  const auto ccm = selmetrics::class_conditional_means(
      selmetrics::shift_nonneg(acts), labels, classes);
  return selmetrics::layer_selectivity(ccm).mean();
}

}  // namespace

TEST_CASE("orthonormality error examples") {
  CHECK(orthonormality_error(Eigen::MatrixXd::Identity(4, 4)) == 0.0);

  Eigen::MatrixXd rot(2, 2);
  const double t = 0.7;
  rot << std::cos(t), -std::sin(t), std::sin(t), std::cos(t);
  CHECK(orthonormality_error(rot) < 1e-30);

  CHECK(orthonormality_error(2.0 * Eigen::MatrixXd::Identity(2, 2)) ==
        doctest::Approx(18.0));

  CHECK_THROWS(orthonormality_error(Eigen::MatrixXd::Zero(2, 3)));
}

TEST_CASE("projected selectivity with identity and permutation") {
  Rng rng(101);
  const auto labels = cyclic_labels(24, 3);
  Eigen::MatrixXd acts(24, 3);
  for (int i = 0; i < 24; ++i) {
    for (int j = 0; j < 3; ++j) acts(i, j) = rng.normal();
  }

  const auto ccm = selmetrics::class_conditional_means(
      selmetrics::shift_nonneg(acts), labels, 3);
  const Eigen::VectorXd axis = selmetrics::layer_selectivity(ccm);

  const auto ident =
      projected_selectivity(acts, Eigen::MatrixXd::Identity(3, 3), labels, 3);
  for (int j = 0; j < 3; ++j) CHECK(ident.per_axis_si[j] == axis[j]);

  Eigen::MatrixXd perm = Eigen::MatrixXd::Zero(3, 3);
  perm(0, 2) = perm(1, 0) = perm(2, 1) = 1.0;
  const auto permuted = projected_selectivity(acts, perm, labels, 3);
  CHECK(permuted.per_axis_si[2] == axis[0]);
  CHECK(permuted.per_axis_si[0] == axis[1]);
  CHECK(permuted.per_axis_si[1] == axis[2]);

  CHECK_THROWS(
      projected_selectivity(acts, Eigen::MatrixXd::Identity(4, 4), labels, 3));
}

TEST_CASE("projected selectivity matches a naive recomputation") {
  Rng rng(103);
  const auto labels = cyclic_labels(12, 2);
  Eigen::MatrixXd acts(12, 2);
  for (int i = 0; i < 12; ++i) {
    for (int j = 0; j < 2; ++j) acts(i, j) = rng.normal();
  }
  const Eigen::MatrixXd w = random_orthogonal(rng, 2);
  const auto got = projected_selectivity(acts, w, labels, 2);

  // Naive loops: project, shift, class means, SI.
  Eigen::MatrixXd p = acts * w;
  for (int j = 0; j < 2; ++j) {
    double lo = p(0, j);
    for (int i = 1; i < 12; ++i) lo = std::min(lo, p(i, j));
    if (lo < 0.0) {
      for (int i = 0; i < 12; ++i) p(i, j) -= lo;
    }
  }
  for (int j = 0; j < 2; ++j) {
    double s0 = 0.0, s1 = 0.0;
    int n0 = 0, n1 = 0;
    for (int i = 0; i < 12; ++i) {
      if (labels[static_cast<std::size_t>(i)] == 0) {
        s0 += p(i, j);
        n0++;
      } else {
        s1 += p(i, j);
        n1++;
      }
    }
    const double m0 = s0 / n0, m1 = s1 / n1;
    // Accumulate-then-subtract, matching the library's arithmetic exactly.
    const double total = m0 + m1;
    const double mu_max = std::max(m0, m1);
    const double mu_rest = (total - mu_max) / 1.0;
    const double si = (mu_max - mu_rest) / (mu_max + mu_rest + 1e-7);
    CHECK(got.per_axis_si[j] == si);
  }
}

TEST_CASE("single-unit layer stays at +-1") {
  Rng rng(107);
  const auto labels = cyclic_labels(16, 2);
  Eigen::MatrixXd acts(16, 1);
  for (int i = 0; i < 16; ++i) acts(i, 0) = std::abs(rng.normal());
  const OrthonormalProjection proj = optimize_projection(acts, labels, 2);
  CHECK(std::abs(std::abs(proj.w(0, 0)) - 1.0) < 1e-12);
  const double before = axis_aligned_mean_si(acts, labels, 2);
  const double after =
      projected_selectivity(acts, proj.w, labels, 2).mean_si;
  CHECK(after >= before - 1e-9);
}

TEST_CASE("already selective input stays selective") {
  Rng rng(109);
  const auto labels = cyclic_labels(40, 4);
  const Eigen::MatrixXd acts = one_hot_selective(labels, 4, rng);
  const double axis = axis_aligned_mean_si(acts, labels, 4);
  ProjectionConfig cfg;
  cfg.max_steps = 800;
  const OrthonormalProjection proj =
      optimize_projection(acts, labels, 4, cfg);
  CHECK(orthonormality_error(proj.w) < 1e-10);
  const double projected =
      projected_selectivity(acts, proj.w, labels, 4).mean_si;
  CHECK(projected >= axis - 1e-3);
}

TEST_CASE("rotation recovery") {
  Rng rng(113);
  const auto labels = cyclic_labels(60, 4);
  const Eigen::MatrixXd selective = one_hot_selective(labels, 4, rng);
  const Eigen::MatrixXd q = random_orthogonal(rng, 4);
  const Eigen::MatrixXd acts = selective * q;

  const OrthonormalProjection proj = optimize_projection(acts, labels, 4);
  CHECK(orthonormality_error(proj.w) < 1e-10);
  const double recovered =
      projected_selectivity(acts, proj.w, labels, 4).mean_si;
  CHECK(recovered >= 0.95);
  // Identity feasibility on the optimization set.
  const double axis = axis_aligned_mean_si(acts, labels, 4);
  CHECK(recovered >= axis - 1e-6);
  // Final loss within [0, 1].
  CHECK(proj.loss_log.back() >= 0.0);
  CHECK(proj.loss_log.back() <= 1.0);
}

TEST_CASE("optimization stops and reports a reason") {
  Rng rng(127);
  const auto labels = cyclic_labels(20, 2);
  Eigen::MatrixXd acts(20, 2);
  for (int i = 0; i < 20; ++i) {
    for (int j = 0; j < 2; ++j) acts(i, j) = std::abs(rng.normal());
  }
  const OrthonormalProjection proj = optimize_projection(acts, labels, 2);
  CHECK((proj.stop_reason == "converged" || proj.stop_reason == "max_steps"));
  CHECK(proj.steps <= 3500);
  CHECK(static_cast<int>(proj.loss_log.size()) == proj.steps);
}

TEST_CASE("single-class labels are rejected") {
  Eigen::MatrixXd acts = Eigen::MatrixXd::Ones(4, 2);
  CHECK_THROWS(optimize_projection(acts, {1, 1, 1, 1}, 2));
}
