#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "selstudy/activation_io.hpp"
#include "selstudy/harness.hpp"
#include "selstudy/stats.hpp"

namespace selstudy::harness {

namespace fs = std::filesystem;
using nlohmann::json;

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

namespace {

std::string format_short(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%g", v);
  return buf;
}

json summary_to_json(const std::vector<SummaryRow>& summary) {
  json arr = json::array();
  for (const SummaryRow& row : summary) {
    arr.push_back({{"alpha", row.alpha},
                   {"runs", row.runs},
                   {"mean_test_acc", row.mean_test_acc},
                   {"acc_ci_lo", row.acc_ci_lo},
                   {"acc_ci_hi", row.acc_ci_hi},
                   {"mean_si", row.mean_si},
                   {"si_ci_lo", row.si_ci_lo},
                   {"si_ci_hi", row.si_ci_hi},
                   {"p_acc_vs_zero", row.p_acc_vs_zero},
                   {"p_si_vs_zero", row.p_si_vs_zero},
                   {"mean_t95", row.mean_t95}});
  }
  return arr;
}

json record_to_json(const RunRecord& rec) {
  json j;
  j["seed"] = rec.seed;
  j["alpha"] = rec.alpha;
  j["best_epoch"] = rec.best_epoch;
  j["test_accuracy"] = rec.test_accuracy;
  j["t95"] = rec.t95_epoch;
  j["diverged"] = rec.diverged;
  j["network_mean_si"] = rec.report.network_mean_si;
  j["per_layer_mean_si"] = rec.report.per_layer_mean_si;
  json epochs = json::array();
  for (const EpochStats& e : rec.epochs) {
    epochs.push_back({{"train_loss", e.train_loss},
                      {"cross_entropy", e.cross_entropy},
                      {"mean_si", e.mean_si},
                      {"train_acc", e.train_acc},
                      {"val_acc", e.val_acc},
                      {"test_acc", e.test_acc}});
  }
  j["epochs"] = std::move(epochs);
  return j;
}

}  // namespace

std::vector<SummaryRow> summarize(const std::vector<RunRecord>& records,
                                  std::uint64_t seed) {
  std::map<double, std::vector<const RunRecord*>> by_alpha;
  for (const RunRecord& r : records) {
    if (!r.diverged) by_alpha[r.alpha].push_back(&r);
  }
  if (by_alpha.empty()) {
    throw std::invalid_argument("summarize: no completed runs");
  }
  std::vector<double> acc_zero, si_zero;
  if (by_alpha.count(0.0)) {
    for (const RunRecord* r : by_alpha[0.0]) {
      acc_zero.push_back(r->test_accuracy);
      si_zero.push_back(r->report.network_mean_si);
    }
  }
  const int corrections =
      static_cast<int>(by_alpha.size()) - (by_alpha.count(0.0) ? 1 : 0);

  std::vector<SummaryRow> out;
  for (const auto& [alpha, runs] : by_alpha) {
    SummaryRow row;
    row.alpha = alpha;
    row.runs = static_cast<int>(runs.size());
    std::vector<double> acc, si, t95s;
    for (const RunRecord* r : runs) {
      acc.push_back(r->test_accuracy);
      si.push_back(r->report.network_mean_si);
      t95s.push_back(static_cast<double>(r->t95_epoch));
    }
    row.mean_test_acc = stats::mean(acc);
    row.mean_si = stats::mean(si);
    row.mean_t95 = stats::mean(t95s);
    std::tie(row.acc_ci_lo, row.acc_ci_hi) =
        stats::bootstrap_ci(acc, 0.95, 10000, seed);
    std::tie(row.si_ci_lo, row.si_ci_hi) =
        stats::bootstrap_ci(si, 0.95, 10000, seed + 1);
    if (alpha != 0.0 && acc.size() >= 2 && acc_zero.size() >= 2) {
      row.p_acc_vs_zero = stats::compare_groups(
          acc, acc_zero, stats::TestMethod::TTest, corrections);
      row.p_si_vs_zero = stats::compare_groups(
          si, si_zero, stats::TestMethod::TTest, corrections);
    }
    out.push_back(row);
  }
  return out;
}

void write_reports(const std::vector<RunRecord>& records,
                   const std::vector<SummaryRow>& summary,
                   const std::string& out_dir) {
  if (records.empty()) {
    throw std::invalid_argument("write_reports: no records");
  }
  fs::create_directories(out_dir);

  {  // flat per-run CSV
    std::ofstream os(out_dir + "/runs.csv");
    os << "run,alpha,seed,best_epoch,test_acc,mean_si,t95,diverged\r\n";
    int id = 0;
    for (const RunRecord& r : records) {
      os << id++ << "," << format_double(r.alpha) << "," << r.seed << ","
         << r.best_epoch << "," << format_double(r.test_accuracy) << ","
         << format_double(r.report.network_mean_si) << "," << r.t95_epoch
         << "," << (r.diverged ? 1 : 0) << "\r\n";
    }
  }
  {  // per-alpha summary CSV
    std::ofstream os(out_dir + "/summary.csv");
    os << "alpha,runs,mean_test_acc,acc_ci_lo,acc_ci_hi,mean_si,si_ci_lo,"
          "si_ci_hi,p_acc_vs_zero,p_si_vs_zero,mean_t95\r\n";
    for (const SummaryRow& row : summary) {
      os << format_double(row.alpha) << "," << row.runs << ","
         << format_double(row.mean_test_acc) << ","
         << format_double(row.acc_ci_lo) << ","
         << format_double(row.acc_ci_hi) << "," << format_double(row.mean_si)
         << "," << format_double(row.si_ci_lo) << ","
         << format_double(row.si_ci_hi) << ","
         << format_double(row.p_acc_vs_zero) << ","
         << format_double(row.p_si_vs_zero) << ","
         << format_double(row.mean_t95) << "\r\n";
    }
  }
  {  // full JSON
    json j;
    j["summary"] = summary_to_json(summary);
    json runs = json::array();
    for (const RunRecord& r : records) runs.push_back(record_to_json(r));
    j["runs"] = std::move(runs);
    std::ofstream os(out_dir + "/report.json");
    os << j.dump(2) << "\n";
  }
  {  // markdown digest
    std::ofstream os(out_dir + "/report.md");
    os << "# Experiment summary\n\n";
    os << "| alpha | runs | test acc (95% CI) | mean SI (95% CI) | p(acc) | "
          "p(SI) | t95 |\n";
    os << "|---|---|---|---|---|---|---|\n";
    for (const SummaryRow& row : summary) {
      os << "| " << format_short(row.alpha) << " | " << row.runs << " | "
         << format_short(row.mean_test_acc) << " ["
         << format_short(row.acc_ci_lo) << ", " << format_short(row.acc_ci_hi)
         << "] | " << format_short(row.mean_si) << " ["
         << format_short(row.si_ci_lo) << ", " << format_short(row.si_ci_hi)
         << "] | " << format_short(row.p_acc_vs_zero) << " | "
         << format_short(row.p_si_vs_zero) << " | "
         << format_short(row.mean_t95) << " |\n";
    }
  }
}

std::string run_dir(const std::string& out_dir, double alpha,
                    std::uint64_t seed) {
  return out_dir + "/alpha_" + format_short(alpha) + "/seed_" +
         std::to_string(seed);
}

std::vector<RunRecord> sweep(const ExperimentConfig& config) {
  const Dataset data = make_dataset(config.dataset);
  std::vector<RunRecord> records;
  for (double alpha : config.alpha_grid) {
    for (int rep = 0; rep < config.replicates; ++rep) {
      const std::uint64_t seed = config.base_seed + static_cast<std::uint64_t>(rep);
      RunRecord rec = train(config, data, alpha, seed);

      const std::string dir = run_dir(config.out_dir, alpha, seed);
      fs::create_directories(dir);
      {
        std::ofstream os(dir + "/run.json");
        os << record_to_json(rec).dump(2) << "\n";
      }
      {
        std::ofstream os(dir + "/selectivity.csv");
        os << "run,layer,unit,si,precision,dead,responsiveness\r\n";
        for (std::size_t l = 0; l < rec.report.per_unit_si.size(); ++l) {
          const auto& si = rec.report.per_unit_si[l];
          for (Eigen::Index u = 0; u < si.size(); ++u) {
            os << rep << "," << l << "," << u << ","
               << format_double(si[u]) << ","
               << format_double(rec.report.per_unit_precision[l][u]) << ","
               << (rec.report.dead_mask[l][static_cast<std::size_t>(u)] ? 1
                                                                        : 0)
               << ","
               << format_double(rec.report.responsiveness[l][u]) << "\r\n";
          }
        }
      }
      for (std::size_t l = 0; l < rec.test_unit_responses.size(); ++l) {
        const std::string name = "unit_layer_" + std::to_string(l);
        io::write_activation_dump(dir + "/acts_test_" + std::to_string(l) +
                                      ".bin",
                                  name, rec.test_unit_responses[l]);
        io::write_activation_dump(dir + "/acts_val_" + std::to_string(l) +
                                      ".bin",
                                  name, rec.val_unit_responses[l]);
      }
      records.push_back(std::move(rec));
    }
  }
  write_reports(records, summarize(records, config.base_seed),
                config.out_dir);
  return records;
}

std::vector<SummaryRow> read_summary_json(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open " + path);
  json j;
  is >> j;
  std::vector<SummaryRow> out;
  for (const json& row : j.at("summary")) {
    SummaryRow s;
    s.alpha = row.at("alpha").get<double>();
    s.runs = row.at("runs").get<int>();
    s.mean_test_acc = row.at("mean_test_acc").get<double>();
    s.acc_ci_lo = row.at("acc_ci_lo").get<double>();
    s.acc_ci_hi = row.at("acc_ci_hi").get<double>();
    s.mean_si = row.at("mean_si").get<double>();
    s.si_ci_lo = row.at("si_ci_lo").get<double>();
    s.si_ci_hi = row.at("si_ci_hi").get<double>();
    s.p_acc_vs_zero = row.at("p_acc_vs_zero").get<double>();
    s.p_si_vs_zero = row.at("p_si_vs_zero").get<double>();
    s.mean_t95 = row.at("mean_t95").get<double>();
    out.push_back(s);
  }
  return out;
}

}  // namespace selstudy::harness
