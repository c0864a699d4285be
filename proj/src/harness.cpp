#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "selstudy/harness.hpp"
#include "selstudy/rng.hpp"

namespace selstudy::harness {

numnet::Network build_network(const ExperimentConfig& config,
                              const numnet::Shape& input_shape,
                              int num_classes, std::uint64_t seed) {
  using numnet::LayerSpec;
  std::vector<LayerSpec> specs;
  const double b = config.leaky_slope;
  if (config.arch == "mlp") {
    const int in = input_shape.size();
    specs.push_back(LayerSpec::dense(in, config.hidden));
    specs.push_back(LayerSpec::nonlinearity(b));
    specs.push_back(LayerSpec::dense(config.hidden, config.hidden));
    specs.push_back(LayerSpec::nonlinearity(b));
    specs.push_back(LayerSpec::dense(config.hidden, num_classes));
  } else if (config.arch == "cnn") {
    if (input_shape.ch != 1 || input_shape.h != input_shape.w) {
      throw std::invalid_argument("cnn arch expects square 1-channel input");
    }
    const int s = input_shape.h;
    if (config.conv_layers < 2 || config.conv_layers > 3) {
      throw std::invalid_argument("cnn arch supports 2 or 3 conv layers");
    }
    const int shrink = config.conv_layers == 3 ? 4 : 2;
    if (s % shrink != 0) {
      throw std::invalid_argument("cnn arch: image size must be divisible by " +
                                  std::to_string(shrink));
    }
    const int c = config.channels;
    specs.push_back(LayerSpec::conv2d(1, c, 3, 1, 1));
    specs.push_back(LayerSpec::nonlinearity(b));
    specs.push_back(LayerSpec::conv2d(c, c, 3, 2, 1));
    specs.push_back(LayerSpec::nonlinearity(b));
    if (config.conv_layers == 3) {
      specs.push_back(LayerSpec::conv2d(c, c, 3, 2, 1));
      specs.push_back(LayerSpec::nonlinearity(b));
    }
    specs.push_back(LayerSpec::flatten());
    specs.push_back(
        LayerSpec::dense(c * (s / shrink) * (s / shrink), config.hidden));
    specs.push_back(LayerSpec::nonlinearity(b));
    specs.push_back(LayerSpec::dense(config.hidden, num_classes));
  } else {
    throw std::invalid_argument("unknown architecture " + config.arch);
  }
  return numnet::Network(std::move(specs), input_shape, seed);
}

double accuracy(const numnet::Network& net, const Split& split) {
  const numnet::ForwardTrace trace = numnet::forward(net, split.x);
  int correct = 0;
  for (Eigen::Index i = 0; i < trace.logits().rows(); ++i) {
    Eigen::Index arg = 0;
    trace.logits().row(i).maxCoeff(&arg);
    if (arg == split.y[static_cast<std::size_t>(i)]) correct++;
  }
  return static_cast<double>(correct) /
         static_cast<double>(trace.logits().rows());
}

int t95(const std::vector<double>& accuracy_curve) {
  if (accuracy_curve.empty()) {
    throw std::invalid_argument("t95: empty curve");
  }
  const double threshold =
      0.95 * *std::max_element(accuracy_curve.begin(), accuracy_curve.end());
  for (std::size_t i = 0; i < accuracy_curve.size(); ++i) {
    if (accuracy_curve[i] >= threshold) return static_cast<int>(i) + 1;
  }
  return static_cast<int>(accuracy_curve.size());
}

RunRecord train(const ExperimentConfig& config, const Dataset& data,
                double alpha, std::uint64_t seed) {
  if (config.batch_size <= 0 ||
      config.batch_size > static_cast<int>(data.train.y.size())) {
    throw std::invalid_argument("train: batch size exceeds training set");
  }
  RunRecord rec;
  rec.seed = seed;
  rec.alpha = alpha;

  numnet::Network net =
      build_network(config, data.input_shape, data.num_classes, seed);
  numnet::OptimizerState opt = numnet::OptimizerState::for_network(
      net, config.lr, config.momentum, config.weight_decay);

  selreg::RegularizerConfig reg;
  reg.alpha = alpha;
  reg.mask = config.mask;

  Rng shuffle_rng = stream_rng(seed, "shuffle");
  std::vector<int> order(data.train.y.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);

  const int milestone = (config.epochs * 2) / 3;
  std::vector<numnet::LayerParams> best_params = net.params();
  double best_val = -1.0;
  std::vector<double> test_curve;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    if (epoch == milestone && milestone > 0) opt.lr *= config.lr_decay;
    shuffle_rng.shuffle(order);

    EpochStats stats;
    int batches = 0;
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t end = std::min(
          order.size(), start + static_cast<std::size_t>(config.batch_size));
      Eigen::MatrixXd bx(static_cast<Eigen::Index>(end - start),
                         data.train.x.cols());
      std::vector<int> by(end - start);
      for (std::size_t i = start; i < end; ++i) {
        bx.row(static_cast<Eigen::Index>(i - start)) =
            data.train.x.row(order[i]);
        by[i - start] = data.train.y[static_cast<std::size_t>(order[i])];
      }
      const numnet::ForwardTrace trace = numnet::forward(net, bx);
      const selreg::LossBreakdown lb =
          selreg::regularized_loss(trace, by, data.num_classes, reg);
      if (!std::isfinite(lb.total)) {
        rec.diverged = true;
        break;
      }
      numnet::LossEval eval;
      selreg::softmax_cross_entropy(trace.logits(), by, &eval.dlogits);
      eval.unit_response_grads =
          selreg::regularizer_activation_grads(trace, by, data.num_classes, reg);
      std::vector<numnet::LayerParams> grads = numnet::backward(
          net, trace, eval.dlogits, &eval.unit_response_grads);
      if (config.grad_clip > 0.0) {
        double sq = 0.0;
        for (const numnet::LayerParams& g : grads) {
          sq += g.W.squaredNorm() + g.b.squaredNorm();
        }
        if (sq > config.grad_clip * config.grad_clip) {
          const double scale = config.grad_clip / std::sqrt(sq);
          for (numnet::LayerParams& g : grads) {
            g.W *= scale;
            g.b *= scale;
          }
        }
      }
      numnet::sgd_step(opt, net, grads);

      stats.train_loss += lb.total;
      stats.cross_entropy += lb.cross_entropy;
      stats.mean_si += lb.mean_si;
      batches++;
    }
    if (rec.diverged) break;
    stats.train_loss /= batches;
    stats.cross_entropy /= batches;
    stats.mean_si /= batches;
    stats.train_acc = accuracy(net, data.train);
    stats.val_acc = accuracy(net, data.val);
    stats.test_acc = accuracy(net, data.test);
    rec.epochs.push_back(stats);
    test_curve.push_back(stats.test_acc);

    if (stats.val_acc > best_val) {  // ties keep the earliest epoch
      best_val = stats.val_acc;
      best_params = net.params();
      rec.best_epoch = epoch;
    }
  }

  if (rec.epochs.empty()) return rec;  // diverged in the first epoch

  net.params() = best_params;
  rec.test_accuracy = accuracy(net, data.test);
  rec.t95_epoch = t95(test_curve);

  const auto expand_positions = [&](const numnet::ForwardTrace& trace) {
    std::vector<Eigen::MatrixXd> out;
    for (int li : net.unit_layers()) {
      const Eigen::MatrixXd& y = trace.outputs[static_cast<std::size_t>(li) + 1];
      const numnet::Shape sh = net.shapes()[static_cast<std::size_t>(li) + 1];
      const int hw = sh.h * sh.w;
      Eigen::MatrixXd p(y.rows() * hw, sh.ch);
      for (Eigen::Index s = 0; s < y.rows(); ++s) {
        for (int ch = 0; ch < sh.ch; ++ch) {
          for (int q = 0; q < hw; ++q) {
            p(s * hw + q, ch) = y(s, ch * hw + q);
          }
        }
      }
      out.push_back(std::move(p));
    }
    return out;
  };
  const numnet::ForwardTrace test_trace = numnet::forward(net, data.test.x);
  rec.test_unit_responses = test_trace.unit_responses;
  rec.test_position_responses = expand_positions(test_trace);
  const numnet::ForwardTrace val_trace = numnet::forward(net, data.val.x);
  rec.val_unit_responses = val_trace.unit_responses;
  rec.val_position_responses = expand_positions(val_trace);
  rec.report = selmetrics::build_report(rec.test_unit_responses, data.test.y,
                                        data.num_classes);
  return rec;
}

}  // namespace selstudy::harness
