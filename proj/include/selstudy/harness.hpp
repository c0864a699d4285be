#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "selstudy/numnet.hpp"
#include "selstudy/selmetrics.hpp"
#include "selstudy/selreg.hpp"

namespace selstudy::harness {

struct DatasetSpec {
  std::string name = "blobs";  // blobs | shapes | parts | csv
  int num_classes = 4;
  int samples_per_class = 100;
  int dim = 16;              // blobs feature dimensionality
  int image_size = 16;       // shapes edge length (1 channel)
  double separation = 3.0;   // blobs: cluster separation in units of sigma
  double noise = 0.25;       // shapes: pixel noise sigma
  double style = 0.0;        // shapes: class-independent brightness nuisance
  std::uint64_t seed = 0;
  std::string csv_path;      // csv: features..., integer label in last column
};

struct Split {
  Eigen::MatrixXd x;
  std::vector<int> y;
};

struct Dataset {
  Split train, val, test;
  numnet::Shape input_shape;
  int num_classes = 0;
};

// Deterministic from spec.seed; fixed 80/10/10 split, stratified per class.
Dataset make_synthetic_dataset(const DatasetSpec& spec);
Dataset load_csv_dataset(const DatasetSpec& spec);
Dataset make_dataset(const DatasetSpec& spec);

struct ExperimentConfig {
  DatasetSpec dataset;
  std::string arch = "mlp";  // mlp | cnn
  int hidden = 32;           // mlp hidden width / cnn penultimate dense width
  int channels = 8;          // cnn conv width
  int conv_layers = 3;       // cnn conv blocks (2 or 3)
  double leaky_slope = 0.0;
  std::vector<double> alpha_grid = {0.0};
  selreg::LayerMask mask = selreg::LayerMask::All;
  int epochs = 30;
  int batch_size = 32;
  double lr = 0.1;
  double lr_decay = 0.1;           // one milestone at 2/3 of training
  double momentum = 0.9;
  double weight_decay = 1e-4;
  double grad_clip = 0.0;          // global grad-norm clip; 0 disables
  int replicates = 1;
  std::uint64_t base_seed = 0;
  std::string out_dir = "out";
};

numnet::Network build_network(const ExperimentConfig& config,
                              const numnet::Shape& input_shape,
                              int num_classes, std::uint64_t seed);

struct EpochStats {
  double train_loss = 0.0;
  double cross_entropy = 0.0;
  double mean_si = 0.0;  // minibatch-mean of the regularized mu_SI
  double train_acc = 0.0;
  double val_acc = 0.0;
  double test_acc = 0.0;
};

struct RunRecord {
  std::uint64_t seed = 0;
  double alpha = 0.0;
  std::vector<EpochStats> epochs;
  int best_epoch = -1;  // 0-based; argmax validation accuracy, ties earliest
  double test_accuracy = 0.0;
  int t95_epoch = 0;
  bool diverged = false;
  selmetrics::SelectivityReport report;  // test set, best-epoch checkpoint
  // Per unit layer, at the best-epoch checkpoint.
  std::vector<Eigen::MatrixXd> test_unit_responses;
  std::vector<Eigen::MatrixXd> val_unit_responses;
  // Same checkpoint, conv layers expanded so each (sample, spatial position)
  // pair is a row and each channel a column; dense layers match
  // test_unit_responses. Used for representation comparisons, where the
  // expanded form gives far more observations per conv layer.
  std::vector<Eigen::MatrixXd> test_position_responses;
  std::vector<Eigen::MatrixXd> val_position_responses;
};

RunRecord train(const ExperimentConfig& config, const Dataset& data,
                double alpha, std::uint64_t seed);

double accuracy(const numnet::Network& net, const Split& split);

// First 1-indexed epoch whose accuracy reaches 95% of the curve maximum.
int t95(const std::vector<double>& accuracy_curve);

struct SummaryRow {
  double alpha = 0.0;
  int runs = 0;
  double mean_test_acc = 0.0, acc_ci_lo = 0.0, acc_ci_hi = 0.0;
  double mean_si = 0.0, si_ci_lo = 0.0, si_ci_hi = 0.0;
  double p_acc_vs_zero = 1.0;  // Bonferroni-corrected across alpha values
  double p_si_vs_zero = 1.0;
  double mean_t95 = 0.0;
};

std::vector<SummaryRow> summarize(const std::vector<RunRecord>& records,
                                  std::uint64_t seed = 0);

// Flat per-run CSV, per-alpha summary CSV, full JSON, and a markdown digest.
void write_reports(const std::vector<RunRecord>& records,
                   const std::vector<SummaryRow>& summary,
                   const std::string& out_dir);

// Runs every (alpha, replicate) combination and writes per-run artifacts
// (run JSON, selectivity CSV, activation dumps) under config.out_dir.
std::vector<RunRecord> sweep(const ExperimentConfig& config);

std::string run_dir(const std::string& out_dir, double alpha,
                    std::uint64_t seed);
std::string format_double(double v);

// Re-ingest the JSON report; the returned summary rows are identical to the
// ones that produced the file.
std::vector<SummaryRow> read_summary_json(const std::string& path);

}  // namespace selstudy::harness
