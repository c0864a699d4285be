#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

namespace selstudy::numnet {

struct Shape {
  int ch = 1, h = 1, w = 1;
  int size() const { return ch * h * w; }
  bool operator==(const Shape&) const = default;
};

struct LayerSpec {
  enum class Kind { Dense, Conv2d, Nonlinearity, Flatten };
  Kind kind = Kind::Dense;
  int in_units = 0, out_units = 0;                  // dense
  int in_ch = 0, out_ch = 0, kernel = 0, stride = 1, pad = 0;  // conv2d
  double slope = 0.0;  // leaky slope b; b = 0 is exact ReLU

  static LayerSpec dense(int in, int out);
  static LayerSpec conv2d(int in_ch, int out_ch, int kernel, int stride = 1,
                          int pad = 0);
  static LayerSpec nonlinearity(double slope = 0.0);
  static LayerSpec flatten();
};

struct LayerParams {
  Eigen::MatrixXd W;  // dense: out x in; conv: out_ch x (in_ch * k * k)
  Eigen::VectorXd b;
};

// Feedforward network. Shapes are validated at construction; identical seed
// gives bit-identical initialization.
class Network {
 public:
  Network(std::vector<LayerSpec> specs, Shape input_shape, std::uint64_t seed);

  const std::vector<LayerSpec>& specs() const { return specs_; }
  const Shape& input_shape() const { return shapes_.front(); }
  // Shape after each layer; shapes()[i] is the input of layer i,
  // shapes()[num_layers()] the logits shape.
  const std::vector<Shape>& shapes() const { return shapes_; }
  int num_layers() const { return static_cast<int>(specs_.size()); }

  std::vector<LayerParams>& params() { return params_; }
  const std::vector<LayerParams>& params() const { return params_; }

  // Nonlinearity layers, in network order; these carry the unit responses.
  const std::vector<int>& unit_layers() const { return unit_layers_; }
  int num_unit_layers() const { return static_cast<int>(unit_layers_.size()); }

  std::int64_t num_parameters() const;

 private:
  std::vector<LayerSpec> specs_;
  std::vector<Shape> shapes_;
  std::vector<LayerParams> params_;
  std::vector<int> unit_layers_;
};

struct ForwardTrace {
  // outputs[0] is the input batch; outputs[i] the output of layer i - 1.
  // All matrices are samples x flattened(ch, h, w).
  std::vector<Eigen::MatrixXd> outputs;
  // One matrix per nonlinearity layer: samples x units, where a conv unit's
  // response is the spatial mean of its feature map after the nonlinearity.
  std::vector<Eigen::MatrixXd> unit_responses;

  const Eigen::MatrixXd& logits() const { return outputs.back(); }
};

ForwardTrace forward(const Network& net, const Eigen::MatrixXd& batch);

// Backpropagate loss_grad_at_logits (and optional gradients w.r.t. the
// per-layer unit responses) to parameter gradients. Unit-response gradients
// are spread uniformly over the spatial positions of each feature map and
// chained through the nonlinearity.
std::vector<LayerParams> backward(
    const Network& net, const ForwardTrace& trace,
    const Eigen::MatrixXd& loss_grad_at_logits,
    const std::vector<Eigen::MatrixXd>* unit_response_grads = nullptr);

struct OptimizerState {
  double lr = 0.1;
  double momentum = 0.9;
  double weight_decay = 1e-4;
  std::vector<LayerParams> velocity;

  static OptimizerState for_network(const Network& net, double lr,
                                    double momentum, double weight_decay);
};

// g' = g + wd * p; v <- m * v + g'; p <- p - lr * v
void sgd_step(OptimizerState& state, Network& net,
              const std::vector<LayerParams>& grads);

struct LossEval {
  double loss = 0.0;
  Eigen::MatrixXd dlogits;
  // Empty when the loss does not touch unit responses.
  std::vector<Eigen::MatrixXd> unit_response_grads;
};

using LossFn = std::function<LossEval(const ForwardTrace&)>;

// Max over parameters of |analytic - numeric| / max(|analytic|, |numeric|,
// 1e-8), central differences with h = 1e-5.
double grad_check(Network& net, const Eigen::MatrixXd& batch,
                  const LossFn& loss_fn);

// Checkpoint format: versioned text header with the layer spec list, then
// parameter tensors as row-major 64-bit little-endian binary.
void save_checkpoint(const Network& net, const std::string& path);
Network load_checkpoint(const std::string& path);
void write_checkpoint(const Network& net, std::ostream& os);
Network read_checkpoint(std::istream& is);

}  // namespace selstudy::numnet
