// Acceptance gate: ten end-to-end checks, one [PASS]/[FAIL] line each.
// Exits nonzero if any check fails.

#include <Eigen/Dense>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "selstudy/harness.hpp"
#include "selstudy/numnet.hpp"
#include "selstudy/projbound.hpp"
#include "selstudy/pwcca.hpp"
#include "selstudy/rng.hpp"
#include "selstudy/selmetrics.hpp"
#include "selstudy/selreg.hpp"
#include "selstudy/stats.hpp"

using namespace selstudy;

namespace {

int g_failures = 0;

class Timer {
 public:
  Timer() : start_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                         start_)
        .count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

void report(int criterion, const std::string& name, bool pass,
            const std::string& detail, double seconds) {
  std::printf("[%s] criterion %d: %s (%s, %.1fs)\n", pass ? "PASS" : "FAIL",
              criterion, name.c_str(), detail.c_str(), seconds);
  std::fflush(stdout);
  if (!pass) g_failures++;
}

Eigen::MatrixXd random_matrix(Rng& rng, int rows, int cols) {
  Eigen::MatrixXd m(rows, cols);
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) m(i, j) = rng.normal();
  }
  return m;
}

Eigen::MatrixXd random_orthogonal(Rng& rng, int n) {
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(random_matrix(rng, n, n));
  return qr.householderQ();
}

// Batch whose nonlinearity pre-activations stay away from the ReLU kink so
// that central differences are valid.
Eigen::MatrixXd kink_free_batch(const numnet::Network& net, Rng& rng, int rows,
                                double margin = 1e-4) {
  for (int attempt = 0; attempt < 200; ++attempt) {
    const Eigen::MatrixXd batch =
        random_matrix(rng, rows, net.input_shape().size());
    const numnet::ForwardTrace trace = numnet::forward(net, batch);
    bool ok = true;
    for (int layer : net.unit_layers()) {
      if (trace.outputs[static_cast<std::size_t>(layer)]
              .cwiseAbs()
              .minCoeff() < margin) {
        ok = false;
        break;
      }
    }
    if (ok) return batch;
  }
  throw std::runtime_error("kink_free_batch: no clean batch found");
}

// --- criterion 1: gradient suite ------------------------------------------

void criterion_gradients() {
  Timer timer;
  const std::vector<double> alphas = {-2.0, -0.1, 0.0, 0.1, 2.0};
  const std::vector<selreg::LayerMask> masks = {
      selreg::LayerMask::All, selreg::LayerMask::First3,
      selreg::LayerMask::Last3};
  Rng rng(20260823);
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const double alpha = alphas[rng.below(alphas.size())];
    const selreg::LayerMask mask = masks[rng.below(masks.size())];
    const int classes = 2 + static_cast<int>(rng.below(3));
    const bool use_cnn = rng.below(3) == 0;

    std::vector<numnet::LayerSpec> specs;
    numnet::Shape in_shape;
    if (use_cnn) {
      in_shape = {1, 4, 4};
      specs.push_back(numnet::LayerSpec::conv2d(1, 2, 3, 1, 1));
      specs.push_back(numnet::LayerSpec::nonlinearity(0.0));
      specs.push_back(numnet::LayerSpec::conv2d(2, 2, 3, 2, 1));
      specs.push_back(numnet::LayerSpec::nonlinearity(0.1));
      specs.push_back(numnet::LayerSpec::flatten());
      specs.push_back(numnet::LayerSpec::dense(2 * 2 * 2, classes));
    } else {
      const int in = 3 + static_cast<int>(rng.below(3));
      const int hidden = 4 + static_cast<int>(rng.below(3));
      in_shape = {1, 1, in};
      specs.push_back(numnet::LayerSpec::dense(in, hidden));
      specs.push_back(numnet::LayerSpec::nonlinearity(0.0));
      specs.push_back(numnet::LayerSpec::dense(hidden, hidden));
      specs.push_back(numnet::LayerSpec::nonlinearity(0.2));
      specs.push_back(numnet::LayerSpec::dense(hidden, hidden));
      specs.push_back(numnet::LayerSpec::nonlinearity(0.0));
      specs.push_back(numnet::LayerSpec::dense(hidden, classes));
    }
    numnet::Network net(specs, in_shape, 1000 + static_cast<std::uint64_t>(trial));

    const int batch = 2 * classes;
    const Eigen::MatrixXd x = kink_free_batch(net, rng, batch);
    std::vector<int> labels(static_cast<std::size_t>(batch));
    for (int i = 0; i < batch; ++i) {
      labels[static_cast<std::size_t>(i)] = i % classes;
    }

    selreg::RegularizerConfig cfg;
    cfg.alpha = alpha;
    cfg.mask = mask;
    const double err = numnet::grad_check(
        net, x, [&](const numnet::ForwardTrace& trace) {
          return selreg::evaluate(trace, labels, classes, cfg);
        });
    worst = std::max(worst, err);
  }
  std::ostringstream detail;
  detail << "max relative gradient error " << worst << " over 50 configs";
  report(1, "gradient suite", worst < 1e-4 && timer.seconds() < 120.0,
         detail.str(), timer.seconds());
}

// --- criterion 2: SI oracle -----------------------------------------------

// Naive triple-loop SI with the same accumulation order as the library.
Eigen::VectorXd naive_layer_si(const Eigen::MatrixXd& acts,
                               const std::vector<int>& labels, int classes) {
  Eigen::VectorXd si = Eigen::VectorXd::Zero(acts.cols());
  for (Eigen::Index u = 0; u < acts.cols(); ++u) {
    std::vector<double> sums(static_cast<std::size_t>(classes), 0.0);
    std::vector<int> counts(static_cast<std::size_t>(classes), 0);
    for (Eigen::Index i = 0; i < acts.rows(); ++i) {
      sums[static_cast<std::size_t>(labels[static_cast<std::size_t>(i)])] +=
          acts(i, u);
      counts[static_cast<std::size_t>(labels[static_cast<std::size_t>(i)])]++;
    }
    std::vector<double> present;
    for (int c = 0; c < classes; ++c) {
      if (counts[static_cast<std::size_t>(c)] > 0) {
        present.push_back(sums[static_cast<std::size_t>(c)] /
                          static_cast<double>(counts[static_cast<std::size_t>(c)]));
      }
    }
    if (present.size() < 2) continue;
    std::size_t argmax = 0;
    double total = present[0];
    for (std::size_t c = 1; c < present.size(); ++c) {
      if (present[c] > present[argmax]) argmax = c;
      total += present[c];
    }
    const double mu_max = present[argmax];
    const double mu_rest =
        (total - mu_max) / static_cast<double>(present.size() - 1);
    si[u] = (mu_max - mu_rest) / (mu_max + mu_rest + 1e-7);
  }
  return si;
}

void criterion_si_oracle() {
  Timer timer;
  Rng rng(271828);
  bool exact = true;
  bool bounded = true;
  bool dead_zero = true;
  for (int trial = 0; trial < 1000; ++trial) {
    const int samples = 4 + static_cast<int>(rng.below(30));
    const int units = 1 + static_cast<int>(rng.below(8));
    const int classes = 2 + static_cast<int>(rng.below(5));
    Eigen::MatrixXd acts = random_matrix(rng, samples, units).cwiseAbs();
    std::vector<int> labels(static_cast<std::size_t>(samples));
    for (int i = 0; i < samples; ++i) {
      labels[static_cast<std::size_t>(i)] =
          static_cast<int>(rng.below(static_cast<std::size_t>(classes)));
    }
    // Every third matrix gets a dead column.
    if (trial % 3 == 0) acts.col(0).setZero();

    const auto ccm = selmetrics::class_conditional_means(acts, labels, classes);
    const Eigen::VectorXd got = selmetrics::layer_selectivity(ccm);
    const Eigen::VectorXd want = naive_layer_si(acts, labels, classes);
    for (Eigen::Index u = 0; u < got.size(); ++u) {
      if (got[u] != want[u]) exact = false;
      if (!(got[u] >= 0.0 && got[u] < 1.0)) bounded = false;
    }
    if (trial % 3 == 0 && got[0] != 0.0) dead_zero = false;
  }
  std::ostringstream detail;
  detail << "bit-exact=" << (exact ? "yes" : "no")
         << " in-range=" << (bounded ? "yes" : "no")
         << " dead-unit-zero=" << (dead_zero ? "yes" : "no")
         << " over 1000 matrices";
  report(2, "selectivity index vs naive oracle",
         exact && bounded && dead_zero && timer.seconds() < 30.0, detail.str(),
         timer.seconds());
}

// --- criterion 3: within-layer-first mean ---------------------------------

void criterion_layer_ordering() {
  Timer timer;
  Eigen::VectorXd l1(4), l2(1);
  l1 << 0, 0, 0, 1;
  l2 << 0.5;
  const double got = selmetrics::network_mean_si({l1, l2});
  std::ostringstream detail;
  detail << "network mean SI = " << got << ", expected exactly 0.375";
  report(3, "within-layer-first mean", got == 0.375, detail.str(),
         timer.seconds());
}

// --- criterion 4: PWCCA invariances ---------------------------------------

Eigen::MatrixXd inv_sqrt(const Eigen::MatrixXd& s) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(s);
  return es.eigenvectors() *
         es.eigenvalues().cwiseInverse().cwiseSqrt().asDiagonal() *
         es.eigenvectors().transpose();
}

Eigen::VectorXd cca_oracle(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y) {
  const Eigen::MatrixXd xc = x.rowwise() - x.colwise().mean();
  const Eigen::MatrixXd yc = y.rowwise() - y.colwise().mean();
  const Eigen::MatrixXd t = inv_sqrt(xc.transpose() * xc) *
                            (xc.transpose() * yc) *
                            inv_sqrt(yc.transpose() * yc);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(t);
  return svd.singularValues();
}

void criterion_pwcca() {
  Timer timer;
  Rng rng(314159);
  double worst_self = 0.0;
  double worst_rot = 0.0;
  double worst_oracle = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const int units = 2 + static_cast<int>(rng.below(5));
    const Eigen::MatrixXd l = random_matrix(rng, 24, units);
    worst_self = std::max(worst_self, pwcca::pwcca_distance(l, l).distance);
    const Eigen::MatrixXd q = random_orthogonal(rng, units);
    worst_rot = std::max(worst_rot, pwcca::pwcca_distance(l, l * q).distance);
  }
  for (int trial = 0; trial < 50; ++trial) {
    const int u1 = 2 + static_cast<int>(rng.below(2));
    const int u2 = 2 + static_cast<int>(rng.below(2));
    const Eigen::MatrixXd a = random_matrix(rng, 9, u1);
    const Eigen::MatrixXd b = random_matrix(rng, 9, u2);
    const Eigen::VectorXd got = pwcca::pwcca_distance(a, b).correlations;
    const Eigen::VectorXd want = cca_oracle(a, b);
    for (Eigen::Index i = 0; i < want.size(); ++i) {
      worst_oracle = std::max(
          worst_oracle, std::abs(got[i] - std::min(1.0, want[i])));
    }
  }
  std::ostringstream detail;
  detail << "self " << worst_self << " rotated " << worst_rot
         << " oracle gap " << worst_oracle;
  report(4, "PWCCA invariances and CCA oracle",
         worst_self < 1e-10 && worst_rot < 1e-6 && worst_oracle < 1e-8 &&
             timer.seconds() < 60.0,
         detail.str(), timer.seconds());
}

// --- criterion 5: pair counting -------------------------------------------

void criterion_pair_counts() {
  Timer timer;
  Rng rng(577215);
  std::vector<Eigen::MatrixXd> a, b;
  for (int i = 0; i < 20; ++i) {
    a.push_back(random_matrix(rng, 10, 3));
    b.push_back(random_matrix(rng, 10, 3));
  }
  const std::size_t base = pwcca::baseline_distances(a).size();
  const std::size_t cross = pwcca::cross_distances(a, b).size();
  std::ostringstream detail;
  detail << base << " baseline and " << cross
         << " cross distances from 20 replicates";
  report(5, "replicate pair counting", base == 190 && cross == 400,
         detail.str(), timer.seconds());
}

// --- criterion 6: projection bound recovery -------------------------------

void criterion_projection_recovery() {
  Timer timer;
  const int classes = 4;
  const int samples = 60;
  int recovered = 0;
  double worst_orth = 0.0;
  bool identity_ok = true;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(9000 + seed);
    std::vector<int> labels(static_cast<std::size_t>(samples));
    for (int i = 0; i < samples; ++i) {
      labels[static_cast<std::size_t>(i)] = i % classes;
    }
    Eigen::MatrixXd selective = Eigen::MatrixXd::Zero(samples, classes);
    for (int i = 0; i < samples; ++i) {
      selective(i, i % classes) = 1.0 + 0.1 * rng.uniform();
    }
    const Eigen::MatrixXd acts = selective * random_orthogonal(rng, classes);

    const projbound::OrthonormalProjection proj =
        projbound::optimize_projection(acts, labels, classes);
    worst_orth = std::max(worst_orth, projbound::orthonormality_error(proj.w));
    const double projected =
        projbound::projected_selectivity(acts, proj.w, labels, classes).mean_si;
    if (projected >= 0.95) recovered++;
    const auto axis_ccm = selmetrics::class_conditional_means(
        selmetrics::shift_nonneg(acts), labels, classes);
    const double axis = selmetrics::layer_selectivity(axis_ccm).mean();
    if (projected < axis - 1e-6) identity_ok = false;
  }
  std::ostringstream detail;
  detail << recovered << "/10 seeds recover SI >= 0.95, max orthonormality error "
         << worst_orth << ", identity feasibility "
         << (identity_ok ? "held" : "violated");
  report(6, "rotation recovery upper bound",
         recovered >= 9 && worst_orth < 1e-10 && identity_ok &&
             timer.seconds() < 300.0,
         detail.str(), timer.seconds());
}

// --- criteria 7-9: directional sweep --------------------------------------

harness::ExperimentConfig sweep_config() {
  harness::ExperimentConfig config;
  config.dataset.name = "shapes";
  config.dataset.num_classes = 4;
  config.dataset.samples_per_class = 200;
  config.dataset.image_size = 16;
  config.dataset.noise = 1.0;
  config.dataset.seed = 7;
  config.arch = "cnn";
  config.channels = 8;
  config.hidden = 16;
  config.leaky_slope = 0.5;
  config.alpha_grid = {-5.0, -1.0, -0.2, 0.0, 0.2, 1.0};
  config.epochs = 30;
  // Small batches keep the within-batch class-conditional means noisy, so
  // the positive-alpha pressure carries a measurable generalization cost.
  config.batch_size = 12;
  config.lr = 0.01;
  config.replicates = 10;
  config.base_seed = 100;
  config.out_dir = "acceptance_out/sweep";
  return config;
}

void criterion_directional(const std::vector<harness::RunRecord>& records) {
  Timer timer;
  std::map<double, std::vector<double>> si_by_alpha;
  std::vector<double> acc_zero, acc_pos;
  int diverged = 0;
  for (const harness::RunRecord& rec : records) {
    if (rec.diverged) {
      diverged++;
      continue;
    }
    si_by_alpha[rec.alpha].push_back(rec.report.network_mean_si);
    if (rec.alpha == 0.0) acc_zero.push_back(rec.test_accuracy);
    if (rec.alpha == 1.0) acc_pos.push_back(rec.test_accuracy);
  }
  // Rank-correlate alpha against the seed-averaged selectivity per grid
  // point, so seed noise within a condition does not wash out the trend.
  std::vector<double> alphas, sis;
  for (const auto& [alpha, values] : si_by_alpha) {
    alphas.push_back(alpha);
    sis.push_back(stats::mean(values));
  }
  const double rho = stats::spearman_correlation(alphas, sis);
  const double p =
      stats::compare_groups(acc_zero, acc_pos, stats::TestMethod::RankSum);
  const double mean_zero = stats::mean(acc_zero);
  const double mean_pos = stats::mean(acc_pos);
  std::ostringstream detail;
  detail << "spearman(alpha, mean SI) = " << rho << "; acc(alpha=+1) "
         << mean_pos << " vs acc(0) " << mean_zero << ", rank-sum p = " << p
         << "; " << diverged << " diverged";
  report(7, "regularizer direction sweep",
         rho >= 0.9 && mean_pos < mean_zero && p < 0.05 && diverged == 0,
         detail.str(), timer.seconds());
}

void criterion_representation_shift(
    const std::vector<harness::RunRecord>& records) {
  Timer timer;
  std::vector<const harness::RunRecord*> strong, zero;
  for (const harness::RunRecord& rec : records) {
    if (rec.diverged) continue;
    if (rec.alpha == -5.0) strong.push_back(&rec);
    if (rec.alpha == 0.0) zero.push_back(&rec);
  }
  if (strong.empty() || zero.empty()) {
    report(8, "cross-condition CCA distance exceeds baseline", false,
           "missing runs: " + std::to_string(strong.size()) +
               " at alpha=-5, " + std::to_string(zero.size()) + " at alpha=0",
           timer.seconds());
    return;
  }
  const std::size_t layers = strong.front()->test_unit_responses.size();
  std::vector<double> base_means, cross_means;
  for (std::size_t l = 0; l < layers; ++l) {
    std::vector<Eigen::MatrixXd> strong_acts, zero_acts;
    for (const auto* rec : strong) {
      strong_acts.push_back(rec->test_unit_responses[l]);
    }
    for (const auto* rec : zero) zero_acts.push_back(rec->test_unit_responses[l]);
    base_means.push_back(
        stats::mean(pwcca::baseline_distances(strong_acts)));
    cross_means.push_back(
        stats::mean(pwcca::cross_distances(strong_acts, zero_acts)));
  }
  bool all_greater = true;
  for (std::size_t l = 0; l < layers; ++l) {
    if (!(cross_means[l] > base_means[l])) all_greater = false;
  }
  const double p = stats::paired_t_test(cross_means, base_means);
  const bool direction = stats::mean(cross_means) > stats::mean(base_means);
  std::ostringstream detail;
  detail << layers << " layers, mean cross " << stats::mean(cross_means)
         << " vs baseline " << stats::mean(base_means) << ", paired t p = "
         << p;
  report(8, "cross-condition CCA distance exceeds baseline",
         all_greater && direction && p < 0.05 && timer.seconds() < 300.0,
         detail.str(), timer.seconds());
}

void criterion_leaky_dead_units(
    const std::vector<harness::RunRecord>& records) {
  Timer timer;
  int dead = 0;
  int runs = 0;
  for (const harness::RunRecord& rec : records) {
    if (rec.diverged) continue;
    runs++;
    for (const auto& layer : rec.report.dead_mask) {
      for (bool d : layer) {
        if (d) dead++;
      }
    }
  }
  std::ostringstream detail;
  detail << dead << " dead units across " << runs
         << " runs at leaky slope 0.5";
  report(9, "leaky-ReLU dead-unit control", dead == 0 && runs == 60,
         detail.str(), timer.seconds());
}

// --- criterion 10: determinism --------------------------------------------

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

void criterion_determinism() {
  Timer timer;
  namespace fs = std::filesystem;
  harness::ExperimentConfig config;
  config.dataset.name = "blobs";
  config.dataset.num_classes = 4;
  config.dataset.samples_per_class = 60;
  config.dataset.dim = 12;
  config.dataset.separation = 4.0;
  config.dataset.seed = 3;
  config.arch = "mlp";
  config.hidden = 16;
  config.alpha_grid = {-1.0, 0.0};
  config.epochs = 8;
  config.replicates = 2;
  config.base_seed = 50;

  std::vector<std::string> mismatched;
  for (const std::string dir : {"acceptance_out/det_a", "acceptance_out/det_b"}) {
    fs::remove_all(dir);
    config.out_dir = dir;
    harness::sweep(config);
  }
  std::size_t compared = 0;
  for (const auto& entry :
       fs::recursive_directory_iterator("acceptance_out/det_a")) {
    if (!entry.is_regular_file()) continue;
    const std::string rel =
        fs::relative(entry.path(), "acceptance_out/det_a").string();
    compared++;
    if (read_file(entry.path().string()) !=
        read_file("acceptance_out/det_b/" + rel)) {
      mismatched.push_back(rel);
    }
  }
  std::ostringstream detail;
  detail << compared << " files compared, " << mismatched.size()
         << " byte differences";
  for (const std::string& m : mismatched) detail << " [" << m << "]";
  report(10, "byte-identical reruns",
         compared > 0 && mismatched.empty(), detail.str(), timer.seconds());
}

}  // namespace

int main() {
  criterion_gradients();
  criterion_si_oracle();
  criterion_layer_ordering();
  criterion_pwcca();
  criterion_pair_counts();
  criterion_projection_recovery();

  Timer sweep_timer;
  std::filesystem::remove_all("acceptance_out/sweep");
  const std::vector<harness::RunRecord> records =
      harness::sweep(sweep_config());
  std::printf("       sweep: %zu runs in %.1fs\n", records.size(),
              sweep_timer.seconds());
  std::fflush(stdout);
  criterion_directional(records);
  criterion_representation_shift(records);
  criterion_leaky_dead_units(records);

  criterion_determinism();

  if (g_failures == 0) {
    std::printf("all 10 acceptance criteria passed\n");
    return 0;
  }
  std::printf("%d acceptance criteria failed\n", g_failures);
  return 1;
}
