// Command-line front end: dataset generation, training sweeps, activation
// analysis, CCA comparison, projection bounds, and report regeneration.

#include <CLI11.hpp>
#include <Eigen/Core>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "selstudy/activation_io.hpp"
#include "selstudy/harness.hpp"
#include "selstudy/projbound.hpp"
#include "selstudy/pwcca.hpp"
#include "selstudy/selmetrics.hpp"
#include "selstudy/selreg.hpp"

namespace {

using namespace selstudy;
using nlohmann::json;

struct CliOptions {
  harness::ExperimentConfig experiment;
  double leaky_slope = 0.0;
  std::string layer_mask = "all";
  int seeds = 1;
  std::string config_path;
};

std::string trim(const std::string& s) {
  const std::size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const std::size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

// Flat key=value config: each key names a long flag of the subcommand.
// Values given explicitly on the command line win over the file.
void apply_flat_config(CLI::App* cmd, const std::string& path) {
  std::ifstream is(path);
  if (!is) throw CLI::ValidationError("--config", "cannot open " + path);
  std::string line;
  while (std::getline(is, line)) {
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw CLI::ValidationError("--config", "expected key=value: " + line);
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    CLI::Option* opt = cmd->get_option_no_throw("--" + key);
    if (opt == nullptr) {
      throw CLI::ValidationError("--config", "unknown key " + key);
    }
    if (opt->count() > 0) continue;  // explicit flag wins
    std::istringstream vs(value);
    std::string token;
    while (std::getline(vs, token, ',')) opt->add_result(trim(token));
    opt->run_callback();
  }
}

void add_dataset_flags(CLI::App* cmd, harness::DatasetSpec* spec) {
  cmd->add_option("--dataset", spec->name, "blobs | shapes | parts | csv")
      ->configurable(true);
  cmd->add_option("--classes", spec->num_classes, "number of classes");
  cmd->add_option("--per-class", spec->samples_per_class,
                  "samples per class before splitting");
  cmd->add_option("--dim", spec->dim, "blobs feature dimensionality");
  cmd->add_option("--image-size", spec->image_size, "shapes edge length");
  cmd->add_option("--separation", spec->separation,
                  "blobs cluster separation (sigmas)");
  cmd->add_option("--noise", spec->noise, "shapes pixel noise sigma");
  cmd->add_option("--style", spec->style,
                  "shapes class-independent brightness nuisance amplitude");
  cmd->add_option("--data-seed", spec->seed, "dataset seed");
  cmd->add_option("--csv", spec->csv_path,
                  "CSV file (features..., integer label last)");
}

void add_training_flags(CLI::App* cmd, CliOptions* opt) {
  harness::ExperimentConfig* cfg = &opt->experiment;
  cmd->add_option("--config", opt->config_path,
                  "flat key=value config file; explicit flags win");
  add_dataset_flags(cmd, &cfg->dataset);
  cmd->add_option("--arch", cfg->arch, "mlp | cnn");
  cmd->add_option("--hidden", cfg->hidden, "hidden width (mlp layers / cnn penultimate dense)");
  cmd->add_option("--channels", cfg->channels, "cnn conv width");
  cmd->add_option("--leaky-slope", opt->leaky_slope,
                  "negative-region slope of the nonlinearity");
  cmd->add_option("--alpha", cfg->alpha_grid,
                  "selectivity regularizer scale(s)");
  cmd->add_option("--layer-mask", opt->layer_mask, "all | first3 | last3")
      ->check(CLI::IsMember({"all", "first3", "last3"}));
  cmd->add_option("--epochs", cfg->epochs, "training epochs");
  cmd->add_option("--batch-size", cfg->batch_size, "minibatch size");
  cmd->add_option("--lr", cfg->lr, "initial learning rate");
  cmd->add_option("--lr-decay", cfg->lr_decay,
                  "learning-rate factor at the 2/3 milestone");
  cmd->add_option("--momentum", cfg->momentum, "SGD momentum");
  cmd->add_option("--weight-decay", cfg->weight_decay, "weight decay");
  cmd->add_option("--grad-clip", cfg->grad_clip,
                  "global grad-norm clip (0 disables)");
  cmd->add_option("--seeds", opt->seeds, "number of replicate seeds");
  cmd->add_option("--base-seed", cfg->base_seed, "first replicate seed");
  cmd->add_option("--out", cfg->out_dir, "output directory");
}

void finish_config(CliOptions* opt) {
  opt->experiment.leaky_slope = opt->leaky_slope;
  opt->experiment.replicates = opt->seeds;
  if (opt->layer_mask == "all") {
    opt->experiment.mask = selreg::LayerMask::All;
  } else if (opt->layer_mask == "first3") {
    opt->experiment.mask = selreg::LayerMask::First3;
  } else {
    opt->experiment.mask = selreg::LayerMask::Last3;
  }
}

void write_split_csv(const std::string& path, const harness::Split& split) {
  std::ofstream os(path);
  for (Eigen::Index j = 0; j < split.x.cols(); ++j) os << "x" << j << ",";
  os << "label\r\n";
  for (Eigen::Index i = 0; i < split.x.rows(); ++i) {
    for (Eigen::Index j = 0; j < split.x.cols(); ++j) {
      os << harness::format_double(split.x(i, j)) << ",";
    }
    os << split.y[static_cast<std::size_t>(i)] << "\r\n";
  }
}

std::vector<int> read_labels(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw CLI::ValidationError("labels", "cannot open " + path);
  std::vector<int> labels;
  int v = 0;
  while (is >> v) labels.push_back(v);
  if (labels.empty()) {
    throw CLI::ValidationError("labels", "no labels in " + path);
  }
  return labels;
}

int run_gen_data(const harness::DatasetSpec& spec, const std::string& out) {
  const harness::Dataset data = harness::make_dataset(spec);
  std::filesystem::create_directories(out);
  write_split_csv(out + "/train.csv", data.train);
  write_split_csv(out + "/val.csv", data.val);
  write_split_csv(out + "/test.csv", data.test);
  std::cout << "wrote " << data.train.y.size() << "/" << data.val.y.size()
            << "/" << data.test.y.size() << " train/val/test rows to " << out
            << "\n";
  return 0;
}

int run_sweep(CliOptions& opt) {
  finish_config(&opt);
  const std::vector<harness::RunRecord> records =
      harness::sweep(opt.experiment);
  int diverged = 0;
  for (const auto& r : records) diverged += r.diverged ? 1 : 0;
  std::cout << records.size() << " runs (" << diverged
            << " diverged); reports in " << opt.experiment.out_dir << "\n";
  return 0;
}

int run_analyze(const std::vector<std::string>& dumps,
                const std::string& labels_path, int classes,
                const std::string& out) {
  const std::vector<int> labels = read_labels(labels_path);
  std::vector<Eigen::MatrixXd> layers;
  std::vector<std::string> names;
  for (const std::string& path : dumps) {
    std::string name;
    layers.push_back(io::read_activation_dump(path, &name));
    names.push_back(name.empty() ? path : name);
  }
  const selmetrics::SelectivityReport report =
      selmetrics::build_report(layers, labels, classes);

  json j;
  j["network_mean_si"] = report.network_mean_si;
  json per_layer = json::array();
  for (std::size_t l = 0; l < layers.size(); ++l) {
    int dead = 0;
    for (bool d : report.dead_mask[l]) dead += d ? 1 : 0;
    json unit_si = json::array();
    json unit_precision = json::array();
    for (Eigen::Index u = 0; u < report.per_unit_si[l].size(); ++u) {
      unit_si.push_back(report.per_unit_si[l][u]);
      unit_precision.push_back(report.per_unit_precision[l][u]);
    }
    per_layer.push_back({{"layer", names[l]},
                         {"mean_si", report.per_layer_mean_si[l]},
                         {"dead_units", dead},
                         {"per_unit_si", std::move(unit_si)},
                         {"per_unit_precision", std::move(unit_precision)}});
  }
  j["layers"] = std::move(per_layer);
  if (out.empty()) {
    std::cout << j.dump(2) << "\n";
  } else {
    std::ofstream os(out);
    os << j.dump(2) << "\n";
    std::cout << "wrote " << out << "\n";
  }
  return 0;
}

int run_cca(const std::vector<std::string>& first,
            const std::vector<std::string>& second, const std::string& out) {
  std::vector<Eigen::MatrixXd> a, b;
  for (const std::string& p : first) a.push_back(io::read_activation_dump(p));
  for (const std::string& p : second) b.push_back(io::read_activation_dump(p));

  json j;
  if (a.size() == 1 && b.size() == 1) {
    const pwcca::CCAResult r = pwcca::pwcca_distance(a[0], b[0]);
    j["distance"] = r.distance;
    j["rank1"] = r.rank1;
    j["rank2"] = r.rank2;
    j["sample_count_warning"] = r.sample_count_warning;
    json corr = json::array();
    for (Eigen::Index i = 0; i < r.correlations.size(); ++i) {
      corr.push_back(r.correlations[i]);
    }
    j["correlations"] = std::move(corr);
  } else {
    const std::vector<double> baseline = pwcca::baseline_distances(a);
    const std::vector<double> cross = pwcca::cross_distances(a, b);
    const pwcca::DistanceRatioReport ratio =
        pwcca::distance_ratio({baseline}, {cross});
    j["baseline_distances"] = baseline;
    j["cross_distances"] = cross;
    j["baseline_mean"] = ratio.baseline_mean[0];
    j["cross_mean"] = ratio.cross_mean[0];
    j["ratio"] = ratio.ratio[0];
  }
  if (out.empty()) {
    std::cout << j.dump(2) << "\n";
  } else {
    std::ofstream os(out);
    os << j.dump(2) << "\n";
    std::cout << "wrote " << out << "\n";
  }
  return 0;
}

int run_bound(const std::string& val_dump, const std::string& test_dump,
              const std::string& labels_val_path,
              const std::string& labels_test_path, int classes,
              const std::string& out) {
  const Eigen::MatrixXd acts_val = io::read_activation_dump(val_dump);
  const std::vector<int> labels_val = read_labels(labels_val_path);
  const projbound::OrthonormalProjection proj =
      projbound::optimize_projection(acts_val, labels_val, classes);

  const Eigen::MatrixXd acts_test = test_dump.empty()
                                        ? acts_val
                                        : io::read_activation_dump(test_dump);
  const std::vector<int> labels_test = labels_test_path.empty()
                                           ? labels_val
                                           : read_labels(labels_test_path);
  const projbound::ProjectedSelectivity bound =
      projbound::projected_selectivity(acts_test, proj.w, labels_test, classes);

  const auto ccm = selmetrics::class_conditional_means(
      selmetrics::shift_nonneg(acts_test), labels_test, classes);
  json j;
  j["axis_aligned_mean_si"] = selmetrics::layer_selectivity(ccm).mean();
  j["upper_bound_mean_si"] = bound.mean_si;
  j["orthonormality_error"] = projbound::orthonormality_error(proj.w);
  j["stop_reason"] = proj.stop_reason;
  j["steps"] = proj.steps;
  if (out.empty()) {
    std::cout << j.dump(2) << "\n";
  } else {
    std::ofstream os(out);
    os << j.dump(2) << "\n";
    std::cout << "wrote " << out << "\n";
  }
  return 0;
}

harness::RunRecord record_from_json(const json& j) {
  harness::RunRecord rec;
  rec.seed = j.at("seed").get<std::uint64_t>();
  rec.alpha = j.at("alpha").get<double>();
  rec.best_epoch = j.at("best_epoch").get<int>();
  rec.test_accuracy = j.at("test_accuracy").get<double>();
  rec.t95_epoch = j.at("t95").get<int>();
  rec.diverged = j.at("diverged").get<bool>();
  rec.report.network_mean_si = j.at("network_mean_si").get<double>();
  rec.report.per_layer_mean_si =
      j.at("per_layer_mean_si").get<std::vector<double>>();
  for (const json& e : j.at("epochs")) {
    harness::EpochStats stats;
    stats.train_loss = e.at("train_loss").get<double>();
    stats.cross_entropy = e.at("cross_entropy").get<double>();
    stats.mean_si = e.at("mean_si").get<double>();
    stats.train_acc = e.at("train_acc").get<double>();
    stats.val_acc = e.at("val_acc").get<double>();
    stats.test_acc = e.at("test_acc").get<double>();
    rec.epochs.push_back(stats);
  }
  return rec;
}

int run_report(const std::string& in_dir, const std::string& out_dir,
               std::uint64_t seed) {
  namespace fs = std::filesystem;
  std::vector<std::string> paths;
  for (const auto& entry : fs::recursive_directory_iterator(in_dir)) {
    if (entry.is_regular_file() && entry.path().filename() == "run.json") {
      paths.push_back(entry.path().string());
    }
  }
  std::sort(paths.begin(), paths.end());
  if (paths.empty()) {
    std::cerr << "no run.json files under " << in_dir << "\n";
    return 1;
  }
  std::vector<harness::RunRecord> records;
  for (const std::string& path : paths) {
    std::ifstream is(path);
    json j;
    is >> j;
    records.push_back(record_from_json(j));
  }
  // Stable aggregation order: by alpha, then seed, as the sweep emits them.
  std::stable_sort(records.begin(), records.end(),
                   [](const harness::RunRecord& a, const harness::RunRecord& b) {
                     if (a.alpha != b.alpha) return a.alpha < b.alpha;
                     return a.seed < b.seed;
                   });
  harness::write_reports(records, harness::summarize(records, seed),
                         out_dir.empty() ? in_dir : out_dir);
  std::cout << "aggregated " << records.size() << " runs into "
            << (out_dir.empty() ? in_dir : out_dir) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"selectivity-regularizer experiment toolkit"};
  app.require_subcommand(1);

  // gen-data
  harness::DatasetSpec gen_spec;
  std::string gen_out = "data";
  CLI::App* gen = app.add_subcommand("gen-data", "generate a dataset as CSV");
  add_dataset_flags(gen, &gen_spec);
  gen->add_option("--out", gen_out, "output directory");

  // train (single alpha, single seed) and sweep (alpha grid x seeds)
  CliOptions train_opt;
  train_opt.experiment.alpha_grid = {0.0};
  CLI::App* train_cmd =
      app.add_subcommand("train", "train one run and write its artifacts");
  add_training_flags(train_cmd, &train_opt);

  CliOptions sweep_opt;
  CLI::App* sweep_cmd = app.add_subcommand(
      "sweep", "train every (alpha, seed) combination and aggregate");
  add_training_flags(sweep_cmd, &sweep_opt);

  // analyze
  std::vector<std::string> analyze_dumps;
  std::string analyze_labels, analyze_out;
  int analyze_classes = 0;
  CLI::App* analyze = app.add_subcommand(
      "analyze", "selectivity metrics from activation dumps");
  analyze->add_option("--dump", analyze_dumps, "activation dump file(s)")
      ->required();
  analyze->add_option("--labels", analyze_labels,
                      "label file, one integer per line")
      ->required();
  analyze->add_option("--classes", analyze_classes, "number of classes")
      ->required();
  analyze->add_option("--out", analyze_out, "output JSON (default stdout)");

  // cca
  std::vector<std::string> cca_first, cca_second;
  std::string cca_out;
  CLI::App* cca =
      app.add_subcommand("cca", "PWCCA distance between representations");
  cca->add_option("--first", cca_first, "dump(s) for the first condition")
      ->required();
  cca->add_option("--second", cca_second, "dump(s) for the second condition")
      ->required();
  cca->add_option("--out", cca_out, "output JSON (default stdout)");

  // bound
  std::string bound_val, bound_test, bound_labels, bound_labels_test, bound_out;
  int bound_classes = 0;
  CLI::App* bound = app.add_subcommand(
      "bound", "orthonormal-projection selectivity upper bound");
  bound->add_option("--val", bound_val, "optimization-set activation dump")
      ->required();
  bound->add_option("--test", bound_test, "held-out activation dump");
  bound->add_option("--labels", bound_labels, "optimization-set labels")
      ->required();
  bound->add_option("--labels-test", bound_labels_test, "held-out labels");
  bound->add_option("--classes", bound_classes, "number of classes")
      ->required();
  bound->add_option("--out", bound_out, "output JSON (default stdout)");

  // report
  std::string report_in, report_out;
  std::uint64_t report_seed = 0;
  CLI::App* report = app.add_subcommand(
      "report", "re-aggregate per-run JSON files into CSV/JSON/markdown");
  report->add_option("--in", report_in, "sweep output directory")->required();
  report->add_option("--out", report_out, "report directory (default --in)");
  report->add_option("--seed", report_seed, "bootstrap seed");

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) return run_gen_data(gen_spec, gen_out);
    if (train_cmd->parsed() && !train_opt.config_path.empty()) {
      apply_flat_config(train_cmd, train_opt.config_path);
    }
    if (sweep_cmd->parsed() && !sweep_opt.config_path.empty()) {
      apply_flat_config(sweep_cmd, sweep_opt.config_path);
    }
    if (train_cmd->parsed()) {
      train_opt.seeds = 1;
      if (train_opt.experiment.alpha_grid.size() != 1) {
        std::cerr << "train takes a single --alpha; use sweep for grids\n";
        return 1;
      }
      return run_sweep(train_opt);
    }
    if (sweep_cmd->parsed()) return run_sweep(sweep_opt);
    if (analyze->parsed()) {
      return run_analyze(analyze_dumps, analyze_labels, analyze_classes,
                         analyze_out);
    }
    if (cca->parsed()) return run_cca(cca_first, cca_second, cca_out);
    if (bound->parsed()) {
      return run_bound(bound_val, bound_test, bound_labels, bound_labels_test,
                       bound_classes, bound_out);
    }
    if (report->parsed()) return run_report(report_in, report_out, report_seed);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
