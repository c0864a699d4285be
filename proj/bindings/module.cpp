// Python bindings for the core operations: selectivity metrics, PWCCA,
// projection bounds, statistics, datasets, and single training runs.

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <stdexcept>

#include "selstudy/harness.hpp"
#include "selstudy/projbound.hpp"
#include "selstudy/pwcca.hpp"
#include "selstudy/selmetrics.hpp"
#include "selstudy/selreg.hpp"
#include "selstudy/stats.hpp"

namespace py = pybind11;
using namespace selstudy;

namespace {

stats::TestMethod parse_method(const std::string& method) {
  if (method == "t_test") return stats::TestMethod::TTest;
  if (method == "rank_sum") return stats::TestMethod::RankSum;
  throw std::invalid_argument("method must be 't_test' or 'rank_sum'");
}

selreg::LayerMask parse_mask(const std::string& mask) {
  if (mask == "all") return selreg::LayerMask::All;
  if (mask == "first3") return selreg::LayerMask::First3;
  if (mask == "last3") return selreg::LayerMask::Last3;
  throw std::invalid_argument("layer_mask must be all, first3, or last3");
}

py::dict split_to_dict(const harness::Split& split) {
  py::dict d;
  d["x"] = split.x;
  d["y"] = split.y;
  return d;
}

harness::DatasetSpec make_spec(const std::string& name, int classes,
                               int per_class, int dim, int image_size,
                               double separation, double noise, double style,
                               std::uint64_t seed) {
  harness::DatasetSpec spec;
  spec.name = name;
  spec.num_classes = classes;
  spec.samples_per_class = per_class;
  spec.dim = dim;
  spec.image_size = image_size;
  spec.separation = separation;
  spec.noise = noise;
  spec.style = style;
  spec.seed = seed;
  return spec;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "class-selectivity regularizer toolkit";

  // --- selectivity metrics ---
  m.def(
      "selectivity_index",
      [](const Eigen::VectorXd& class_means, double epsilon) {
        return selmetrics::selectivity_index(class_means, epsilon);
      },
      py::arg("class_means"), py::arg("epsilon") = selmetrics::kDefaultEpsilon,
      "SI of one unit from its present-class mean activations");

  m.def(
      "layer_selectivity",
      [](const Eigen::MatrixXd& acts, const std::vector<int>& labels,
         int num_classes, double epsilon) {
        return selmetrics::layer_selectivity(
            selmetrics::class_conditional_means(acts, labels, num_classes),
            epsilon);
      },
      py::arg("acts"), py::arg("labels"), py::arg("num_classes"),
      py::arg("epsilon") = selmetrics::kDefaultEpsilon,
      "per-unit SI of a samples x units activation matrix");

  m.def("network_mean_si", &selmetrics::network_mean_si,
        py::arg("per_layer_unit_sis"),
        "mean SI within each layer first, then across layers");

  m.def("precision", &selmetrics::precision, py::arg("acts_for_unit"),
        py::arg("labels"), py::arg("top_n"),
        "plurality-class fraction among the top-N activations");

  m.def("shift_nonneg", &selmetrics::shift_nonneg, py::arg("acts"),
        "shift each column by min(0, column minimum)");

  m.def("dead_units", &selmetrics::dead_units, py::arg("acts"),
        "mask of units that are exactly zero for every sample");

  // --- regularized loss ---
  m.def(
      "regularized_loss",
      [](const Eigen::MatrixXd& logits,
         const std::vector<Eigen::MatrixXd>& unit_responses,
         const std::vector<int>& labels, int num_classes, double alpha,
         const std::string& layer_mask) {
        numnet::ForwardTrace trace;
        trace.outputs.push_back(logits);
        trace.unit_responses = unit_responses;
        selreg::RegularizerConfig cfg;
        cfg.alpha = alpha;
        cfg.mask = parse_mask(layer_mask);
        const selreg::LossBreakdown lb =
            selreg::regularized_loss(trace, labels, num_classes, cfg);
        py::dict d;
        d["total"] = lb.total;
        d["cross_entropy"] = lb.cross_entropy;
        d["mean_si"] = lb.mean_si;
        d["per_layer_mean_si"] = lb.per_layer_mean_si;
        return d;
      },
      py::arg("logits"), py::arg("unit_responses"), py::arg("labels"),
      py::arg("num_classes"), py::arg("alpha"), py::arg("layer_mask") = "all",
      "composite loss: cross-entropy minus alpha times mean SI");

  // --- PWCCA ---
  m.def(
      "pwcca_distance",
      [](const Eigen::MatrixXd& first, const Eigen::MatrixXd& second) {
        const pwcca::CCAResult r = pwcca::pwcca_distance(first, second);
        py::dict d;
        d["distance"] = r.distance;
        d["correlations"] = r.correlations;
        d["weights"] = r.weights;
        d["rank1"] = r.rank1;
        d["rank2"] = r.rank2;
        d["sample_count_warning"] = r.sample_count_warning;
        return d;
      },
      py::arg("first"), py::arg("second"),
      "projection-weighted CCA distance; weights come from the first input");

  m.def("baseline_distances", &pwcca::baseline_distances, py::arg("runs"),
        "symmetrized distances over all unordered replicate pairs");

  m.def("cross_distances", &pwcca::cross_distances, py::arg("runs_a"),
        py::arg("runs_b"), "full cross product of distances");

  // --- projection bound ---
  m.def(
      "optimize_projection",
      [](const Eigen::MatrixXd& acts_val, const std::vector<int>& labels,
         int num_classes, double lr, int max_steps) {
        projbound::ProjectionConfig cfg;
        cfg.lr = lr;
        cfg.max_steps = max_steps;
        const projbound::OrthonormalProjection proj =
            projbound::optimize_projection(acts_val, labels, num_classes, cfg);
        py::dict d;
        d["w"] = proj.w;
        d["loss_log"] = proj.loss_log;
        d["stop_reason"] = proj.stop_reason;
        d["steps"] = proj.steps;
        return d;
      },
      py::arg("acts_val"), py::arg("labels"), py::arg("num_classes"),
      py::arg("lr") = 0.001, py::arg("max_steps") = 3500,
      "orthonormal projection maximizing mean SI of the projected columns");

  m.def(
      "projected_selectivity",
      [](const Eigen::MatrixXd& acts_test, const Eigen::MatrixXd& w,
         const std::vector<int>& labels, int num_classes) {
        const projbound::ProjectedSelectivity r =
            projbound::projected_selectivity(acts_test, w, labels,
                                             num_classes);
        py::dict d;
        d["per_axis_si"] = r.per_axis_si;
        d["mean_si"] = r.mean_si;
        return d;
      },
      py::arg("acts_test"), py::arg("w"), py::arg("labels"),
      py::arg("num_classes"),
      "SI per projected axis on held-out activations");

  m.def("orthonormality_error", &projbound::orthonormality_error, py::arg("w"),
        "squared Frobenius norm of W^T W - I");

  // --- statistics ---
  m.def("bootstrap_ci", &stats::bootstrap_ci, py::arg("samples"),
        py::arg("level") = 0.95, py::arg("resamples") = 10000,
        py::arg("seed") = 0, "percentile bootstrap CI of the mean");

  m.def(
      "compare_groups",
      [](const std::vector<double>& a, const std::vector<double>& b,
         const std::string& method, int corrections) {
        return stats::compare_groups(a, b, parse_method(method), corrections);
      },
      py::arg("a"), py::arg("b"), py::arg("method") = "t_test",
      py::arg("corrections") = 1,
      "two-sided Welch t-test or Wilcoxon rank-sum, Bonferroni-corrected");

  m.def("paired_t_test", &stats::paired_t_test, py::arg("a"), py::arg("b"));
  m.def("spearman_correlation", &stats::spearman_correlation, py::arg("x"),
        py::arg("y"));
  m.def("t95", &harness::t95, py::arg("accuracy_curve"),
        "first 1-indexed epoch reaching 95% of the curve maximum");

  // --- datasets and training ---
  m.def(
      "make_dataset",
      [](const std::string& name, int classes, int per_class, int dim,
         int image_size, double separation, double noise, double style,
         std::uint64_t seed) {
        const harness::Dataset data = harness::make_dataset(make_spec(
            name, classes, per_class, dim, image_size, separation, noise,
            style, seed));
        py::dict d;
        d["train"] = split_to_dict(data.train);
        d["val"] = split_to_dict(data.val);
        d["test"] = split_to_dict(data.test);
        d["num_classes"] = data.num_classes;
        d["input_shape"] =
            py::make_tuple(data.input_shape.ch, data.input_shape.h,
                           data.input_shape.w);
        return d;
      },
      py::arg("name") = "blobs", py::arg("classes") = 4,
      py::arg("per_class") = 100, py::arg("dim") = 16,
      py::arg("image_size") = 16, py::arg("separation") = 3.0,
      py::arg("noise") = 0.25, py::arg("style") = 0.0, py::arg("seed") = 0,
      "deterministic synthetic dataset with stratified 80/10/10 splits");

  m.def(
      "train_run",
      [](const std::string& dataset, int classes, int per_class, int dim,
         int image_size, double separation, double noise, double style,
         std::uint64_t data_seed, const std::string& arch, int hidden,
         int channels, double leaky_slope, double alpha,
         const std::string& layer_mask, int epochs, int batch_size, double lr,
         std::uint64_t seed) {
        harness::ExperimentConfig config;
        config.dataset =
            make_spec(dataset, classes, per_class, dim, image_size, separation,
                      noise, style, data_seed);
        config.arch = arch;
        config.hidden = hidden;
        config.channels = channels;
        config.leaky_slope = leaky_slope;
        config.mask = parse_mask(layer_mask);
        config.epochs = epochs;
        config.batch_size = batch_size;
        config.lr = lr;
        const harness::Dataset data = harness::make_dataset(config.dataset);
        const harness::RunRecord rec =
            harness::train(config, data, alpha, seed);
        py::dict d;
        d["test_accuracy"] = rec.test_accuracy;
        d["best_epoch"] = rec.best_epoch;
        d["t95"] = rec.t95_epoch;
        d["diverged"] = rec.diverged;
        d["network_mean_si"] = rec.report.network_mean_si;
        d["per_layer_mean_si"] = rec.report.per_layer_mean_si;
        d["test_unit_responses"] = rec.test_unit_responses;
        return d;
      },
      py::arg("dataset") = "blobs", py::arg("classes") = 4,
      py::arg("per_class") = 100, py::arg("dim") = 16,
      py::arg("image_size") = 16, py::arg("separation") = 3.0,
      py::arg("noise") = 0.25, py::arg("style") = 0.0, py::arg("data_seed") = 0,
      py::arg("arch") = "mlp", py::arg("hidden") = 32,
      py::arg("channels") = 8, py::arg("leaky_slope") = 0.0, py::arg("alpha") = 0.0,
      py::arg("layer_mask") = "all", py::arg("epochs") = 30,
      py::arg("batch_size") = 32, py::arg("lr") = 0.1, py::arg("seed") = 0,
      "train one seeded run and return its headline metrics");
}
