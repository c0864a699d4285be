#include "selstudy/numnet.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "selstudy/rng.hpp"

namespace selstudy::numnet {

LayerSpec LayerSpec::dense(int in, int out) {
  LayerSpec s;
  s.kind = Kind::Dense;
  s.in_units = in;
  s.out_units = out;
  return s;
}

LayerSpec LayerSpec::conv2d(int in_ch, int out_ch, int kernel, int stride,
                            int pad) {
  LayerSpec s;
  s.kind = Kind::Conv2d;
  s.in_ch = in_ch;
  s.out_ch = out_ch;
  s.kernel = kernel;
  s.stride = stride;
  s.pad = pad;
  return s;
}

LayerSpec LayerSpec::nonlinearity(double slope) {
  LayerSpec s;
  s.kind = Kind::Nonlinearity;
  s.slope = slope;
  return s;
}

LayerSpec LayerSpec::flatten() {
  LayerSpec s;
  s.kind = Kind::Flatten;
  return s;
}

namespace {

Shape layer_output_shape(const LayerSpec& spec, const Shape& in, int index) {
  auto fail = [&](const std::string& why) {
    std::ostringstream os;
    os << "layer " << index << ": " << why;
    throw std::invalid_argument(os.str());
  };
  switch (spec.kind) {
    case LayerSpec::Kind::Dense:
      if (in.size() != spec.in_units) {
        fail("dense expects " + std::to_string(spec.in_units) +
             " inputs, got " + std::to_string(in.size()));
      }
      return Shape{spec.out_units, 1, 1};
    case LayerSpec::Kind::Conv2d: {
      if (in.ch != spec.in_ch) {
        fail("conv2d expects " + std::to_string(spec.in_ch) +
             " channels, got " + std::to_string(in.ch));
      }
      const int oh = (in.h + 2 * spec.pad - spec.kernel) / spec.stride + 1;
      const int ow = (in.w + 2 * spec.pad - spec.kernel) / spec.stride + 1;
      if (oh <= 0 || ow <= 0) fail("conv2d output collapses to zero size");
      return Shape{spec.out_ch, oh, ow};
    }
    case LayerSpec::Kind::Nonlinearity:
      if (spec.slope < 0.0) fail("nonlinearity slope must be >= 0");
      return in;
    case LayerSpec::Kind::Flatten:
      return Shape{in.size(), 1, 1};
  }
  fail("unknown layer kind");
  return in;
}

void init_params(const LayerSpec& spec, LayerParams& p, Rng& rng) {
  auto kaiming_uniform = [&](Eigen::MatrixXd& w, int fan_in) {
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
    for (Eigen::Index i = 0; i < w.rows(); ++i) {
      for (Eigen::Index j = 0; j < w.cols(); ++j) {
        w(i, j) = rng.uniform(-bound, bound);
      }
    }
  };
  if (spec.kind == LayerSpec::Kind::Dense) {
    p.W.resize(spec.out_units, spec.in_units);
    kaiming_uniform(p.W, spec.in_units);
    p.b = Eigen::VectorXd::Zero(spec.out_units);
  } else if (spec.kind == LayerSpec::Kind::Conv2d) {
    const int fan_in = spec.in_ch * spec.kernel * spec.kernel;
    p.W.resize(spec.out_ch, fan_in);
    kaiming_uniform(p.W, fan_in);
    p.b = Eigen::VectorXd::Zero(spec.out_ch);
  }
}

inline double nonlin(double x, double slope) {
  return x > 0.0 ? x : slope * x;
}

// Subgradient at exactly 0 is the negative-side slope (0 for plain ReLU).
inline double nonlin_grad(double x, double slope) {
  return x > 0.0 ? 1.0 : slope;
}

}  // namespace

Network::Network(std::vector<LayerSpec> specs, Shape input_shape,
                 std::uint64_t seed)
    : specs_(std::move(specs)) {
  shapes_.push_back(input_shape);
  for (int i = 0; i < num_layers(); ++i) {
    shapes_.push_back(layer_output_shape(specs_[static_cast<std::size_t>(i)],
                                         shapes_.back(), i));
    if (specs_[static_cast<std::size_t>(i)].kind ==
        LayerSpec::Kind::Nonlinearity) {
      unit_layers_.push_back(i);
    }
  }
  params_.resize(specs_.size());
  Rng rng = stream_rng(seed, "init");
  for (std::size_t i = 0; i < specs_.size(); ++i) {
    init_params(specs_[i], params_[i], rng);
  }
}

std::int64_t Network::num_parameters() const {
  std::int64_t n = 0;
  for (const auto& p : params_) n += p.W.size() + p.b.size();
  return n;
}

ForwardTrace forward(const Network& net, const Eigen::MatrixXd& batch) {
  if (batch.cols() != net.input_shape().size()) {
    throw std::invalid_argument(
        "forward: batch has " + std::to_string(batch.cols()) +
        " features, layer 0 expects " +
        std::to_string(net.input_shape().size()));
  }
  ForwardTrace trace;
  trace.outputs.reserve(net.specs().size() + 1);
  trace.outputs.push_back(batch);
  const Eigen::Index n = batch.rows();

  for (int li = 0; li < net.num_layers(); ++li) {
    const LayerSpec& spec = net.specs()[static_cast<std::size_t>(li)];
    const LayerParams& p = net.params()[static_cast<std::size_t>(li)];
    const Eigen::MatrixXd& x = trace.outputs.back();
    const Shape in = net.shapes()[static_cast<std::size_t>(li)];
    const Shape out = net.shapes()[static_cast<std::size_t>(li) + 1];

    switch (spec.kind) {
      case LayerSpec::Kind::Dense: {
        Eigen::MatrixXd y = x * p.W.transpose();
        y.rowwise() += p.b.transpose();
        trace.outputs.push_back(std::move(y));
        break;
      }
      case LayerSpec::Kind::Conv2d: {
        Eigen::MatrixXd y(n, out.size());
        const int k = spec.kernel;
        for (Eigen::Index s = 0; s < n; ++s) {
          for (int oc = 0; oc < out.ch; ++oc) {
            for (int oy = 0; oy < out.h; ++oy) {
              for (int ox = 0; ox < out.w; ++ox) {
                double acc = p.b[oc];
                for (int ic = 0; ic < in.ch; ++ic) {
                  for (int ky = 0; ky < k; ++ky) {
                    const int iy = oy * spec.stride - spec.pad + ky;
                    if (iy < 0 || iy >= in.h) continue;
                    for (int kx = 0; kx < k; ++kx) {
                      const int ix = ox * spec.stride - spec.pad + kx;
                      if (ix < 0 || ix >= in.w) continue;
                      acc += p.W(oc, (ic * k + ky) * k + kx) *
                             x(s, (ic * in.h + iy) * in.w + ix);
                    }
                  }
                }
                y(s, (oc * out.h + oy) * out.w + ox) = acc;
              }
            }
          }
        }
        trace.outputs.push_back(std::move(y));
        break;
      }
      case LayerSpec::Kind::Nonlinearity: {
        Eigen::MatrixXd y = x.unaryExpr(
            [&](double v) { return nonlin(v, spec.slope); });
        // Unit response: spatial mean per channel (identity for dense shape).
        const int hw = out.h * out.w;
        Eigen::MatrixXd resp(n, out.ch);
        for (Eigen::Index s = 0; s < n; ++s) {
          for (int c = 0; c < out.ch; ++c) {
            resp(s, c) = y.row(s).segment(c * hw, hw).mean();
          }
        }
        trace.unit_responses.push_back(std::move(resp));
        trace.outputs.push_back(std::move(y));
        break;
      }
      case LayerSpec::Kind::Flatten:
        trace.outputs.push_back(x);
        break;
    }
  }
  return trace;
}

std::vector<LayerParams> backward(
    const Network& net, const ForwardTrace& trace,
    const Eigen::MatrixXd& loss_grad_at_logits,
    const std::vector<Eigen::MatrixXd>* unit_response_grads) {
  if (static_cast<int>(trace.outputs.size()) != net.num_layers() + 1) {
    throw std::invalid_argument("backward: trace does not match network depth");
  }
  if (loss_grad_at_logits.rows() != trace.outputs.back().rows() ||
      loss_grad_at_logits.cols() != trace.outputs.back().cols()) {
    throw std::invalid_argument("backward: logit gradient shape mismatch");
  }
  if (unit_response_grads &&
      static_cast<int>(unit_response_grads->size()) !=
          net.num_unit_layers()) {
    throw std::invalid_argument(
        "backward: unit response gradient count mismatch");
  }

  std::vector<LayerParams> grads(net.specs().size());
  for (std::size_t i = 0; i < net.specs().size(); ++i) {
    grads[i].W = Eigen::MatrixXd::Zero(net.params()[i].W.rows(),
                                       net.params()[i].W.cols());
    grads[i].b = Eigen::VectorXd::Zero(net.params()[i].b.size());
  }

  Eigen::MatrixXd dy = loss_grad_at_logits;
  int unit_layer = net.num_unit_layers() - 1;
  const Eigen::Index n = dy.rows();

  for (int li = net.num_layers() - 1; li >= 0; --li) {
    const LayerSpec& spec = net.specs()[static_cast<std::size_t>(li)];
    const LayerParams& p = net.params()[static_cast<std::size_t>(li)];
    const Eigen::MatrixXd& x = trace.outputs[static_cast<std::size_t>(li)];
    const Shape in = net.shapes()[static_cast<std::size_t>(li)];
    const Shape out = net.shapes()[static_cast<std::size_t>(li) + 1];

    switch (spec.kind) {
      case LayerSpec::Kind::Dense: {
        grads[static_cast<std::size_t>(li)].W = dy.transpose() * x;
        grads[static_cast<std::size_t>(li)].b = dy.colwise().sum();
        dy = (dy * p.W).eval();
        break;
      }
      case LayerSpec::Kind::Conv2d: {
        Eigen::MatrixXd dx = Eigen::MatrixXd::Zero(n, in.size());
        Eigen::MatrixXd& dW = grads[static_cast<std::size_t>(li)].W;
        Eigen::VectorXd& db = grads[static_cast<std::size_t>(li)].b;
        const int k = spec.kernel;
        for (Eigen::Index s = 0; s < n; ++s) {
          for (int oc = 0; oc < out.ch; ++oc) {
            for (int oy = 0; oy < out.h; ++oy) {
              for (int ox = 0; ox < out.w; ++ox) {
                const double g = dy(s, (oc * out.h + oy) * out.w + ox);
                if (g == 0.0) continue;
                db[oc] += g;
                for (int ic = 0; ic < in.ch; ++ic) {
                  for (int ky = 0; ky < k; ++ky) {
                    const int iy = oy * spec.stride - spec.pad + ky;
                    if (iy < 0 || iy >= in.h) continue;
                    for (int kx = 0; kx < k; ++kx) {
                      const int ix = ox * spec.stride - spec.pad + kx;
                      if (ix < 0 || ix >= in.w) continue;
                      const int wi = (ic * k + ky) * k + kx;
                      const int xi = (ic * in.h + iy) * in.w + ix;
                      dW(oc, wi) += g * x(s, xi);
                      dx(s, xi) += g * p.W(oc, wi);
                    }
                  }
                }
              }
            }
          }
        }
        dy = std::move(dx);
        break;
      }
      case LayerSpec::Kind::Nonlinearity: {
        if (unit_response_grads && unit_layer >= 0 &&
            (*unit_response_grads)[static_cast<std::size_t>(unit_layer)]
                    .size() > 0) {
          const Eigen::MatrixXd& rg =
              (*unit_response_grads)[static_cast<std::size_t>(unit_layer)];
          if (rg.rows() != n || rg.cols() != out.ch) {
            throw std::invalid_argument(
                "backward: unit response gradient shape mismatch at layer " +
                std::to_string(li));
          }
          const int hw = out.h * out.w;
          const double inv_hw = 1.0 / static_cast<double>(hw);
          for (Eigen::Index s = 0; s < n; ++s) {
            for (int c = 0; c < out.ch; ++c) {
              dy.row(s).segment(c * hw, hw).array() += rg(s, c) * inv_hw;
            }
          }
        }
        unit_layer--;
        dy = dy.cwiseProduct(x.unaryExpr(
            [&](double v) { return nonlin_grad(v, spec.slope); }));
        break;
      }
      case LayerSpec::Kind::Flatten:
        break;  // identity on the flat storage
    }
  }
  return grads;
}

OptimizerState OptimizerState::for_network(const Network& net, double lr,
                                           double momentum,
                                           double weight_decay) {
  OptimizerState st;
  st.lr = lr;
  st.momentum = momentum;
  st.weight_decay = weight_decay;
  st.velocity.resize(net.params().size());
  for (std::size_t i = 0; i < net.params().size(); ++i) {
    st.velocity[i].W = Eigen::MatrixXd::Zero(net.params()[i].W.rows(),
                                             net.params()[i].W.cols());
    st.velocity[i].b = Eigen::VectorXd::Zero(net.params()[i].b.size());
  }
  return st;
}

void sgd_step(OptimizerState& state, Network& net,
              const std::vector<LayerParams>& grads) {
  for (std::size_t i = 0; i < net.params().size(); ++i) {
    LayerParams& p = net.params()[i];
    LayerParams& v = state.velocity[i];
    if (p.W.size() > 0) {
      const Eigen::MatrixXd gw = grads[i].W + state.weight_decay * p.W;
      v.W = state.momentum * v.W + gw;
      p.W -= state.lr * v.W;
      const Eigen::VectorXd gb = grads[i].b + state.weight_decay * p.b;
      v.b = state.momentum * v.b + gb;
      p.b -= state.lr * v.b;
    }
  }
}

double grad_check(Network& net, const Eigen::MatrixXd& batch,
                  const LossFn& loss_fn) {
  const double h = 1e-5;
  ForwardTrace trace = forward(net, batch);
  LossEval eval = loss_fn(trace);
  const std::vector<Eigen::MatrixXd>* rg =
      eval.unit_response_grads.empty() ? nullptr : &eval.unit_response_grads;
  std::vector<LayerParams> analytic = backward(net, trace, eval.dlogits, rg);

  double max_rel = 0.0;
  auto probe = [&](double* value, double analytic_g) {
    const double orig = *value;
    *value = orig + h;
    const double lp = loss_fn(forward(net, batch)).loss;
    *value = orig - h;
    const double lm = loss_fn(forward(net, batch)).loss;
    *value = orig;
    const double numeric = (lp - lm) / (2.0 * h);
    const double denom =
        std::max({std::abs(analytic_g), std::abs(numeric), 1e-8});
    max_rel = std::max(max_rel, std::abs(analytic_g - numeric) / denom);
  };

  for (std::size_t i = 0; i < net.params().size(); ++i) {
    LayerParams& p = net.params()[i];
    for (Eigen::Index r = 0; r < p.W.rows(); ++r) {
      for (Eigen::Index c = 0; c < p.W.cols(); ++c) {
        probe(&p.W(r, c), analytic[i].W(r, c));
      }
    }
    for (Eigen::Index r = 0; r < p.b.size(); ++r) {
      probe(&p.b(r), analytic[i].b(r));
    }
  }
  return max_rel;
}

void write_checkpoint(const Network& net, std::ostream& os) {
  os << "SELSTUDY-NET v1\n";
  const Shape in = net.input_shape();
  os << "input " << in.ch << " " << in.h << " " << in.w << "\n";
  os << "layers " << net.num_layers() << "\n";
  for (const LayerSpec& s : net.specs()) {
    switch (s.kind) {
      case LayerSpec::Kind::Dense:
        os << "dense " << s.in_units << " " << s.out_units << "\n";
        break;
      case LayerSpec::Kind::Conv2d:
        os << "conv2d " << s.in_ch << " " << s.out_ch << " " << s.kernel << " "
           << s.stride << " " << s.pad << "\n";
        break;
      case LayerSpec::Kind::Nonlinearity: {
        std::ostringstream slope;
        slope.precision(17);
        slope << s.slope;
        os << "nonlinearity " << slope.str() << "\n";
        break;
      }
      case LayerSpec::Kind::Flatten:
        os << "flatten\n";
        break;
    }
  }
  os << "BINARY\n";
  for (const LayerParams& p : net.params()) {
    if (p.W.size() > 0) {
      // Row-major 64-bit little-endian.
      for (Eigen::Index r = 0; r < p.W.rows(); ++r) {
        for (Eigen::Index c = 0; c < p.W.cols(); ++c) {
          const double v = p.W(r, c);
          os.write(reinterpret_cast<const char*>(&v), sizeof(v));
        }
      }
      os.write(reinterpret_cast<const char*>(p.b.data()),
               static_cast<std::streamsize>(sizeof(double)) * p.b.size());
    }
  }
}

Network read_checkpoint(std::istream& is) {
  std::string line;
  std::getline(is, line);
  if (line != "SELSTUDY-NET v1") {
    throw std::runtime_error("checkpoint: bad magic line: " + line);
  }
  std::string tok;
  Shape in;
  int layers = 0;
  is >> tok >> in.ch >> in.h >> in.w;
  if (tok != "input") throw std::runtime_error("checkpoint: expected input");
  is >> tok >> layers;
  if (tok != "layers") throw std::runtime_error("checkpoint: expected layers");
  std::vector<LayerSpec> specs;
  for (int i = 0; i < layers; ++i) {
    is >> tok;
    if (tok == "dense") {
      int a, b;
      is >> a >> b;
      specs.push_back(LayerSpec::dense(a, b));
    } else if (tok == "conv2d") {
      int ic, oc, k, st, pd;
      is >> ic >> oc >> k >> st >> pd;
      specs.push_back(LayerSpec::conv2d(ic, oc, k, st, pd));
    } else if (tok == "nonlinearity") {
      double slope;
      is >> slope;
      specs.push_back(LayerSpec::nonlinearity(slope));
    } else if (tok == "flatten") {
      specs.push_back(LayerSpec::flatten());
    } else {
      throw std::runtime_error("checkpoint: unknown layer kind " + tok);
    }
  }
  is >> tok;
  if (tok != "BINARY") throw std::runtime_error("checkpoint: expected BINARY");
  is.get();  // newline

  Network net(std::move(specs), in, /*seed=*/0);
  for (LayerParams& p : net.params()) {
    if (p.W.size() > 0) {
      for (Eigen::Index r = 0; r < p.W.rows(); ++r) {
        for (Eigen::Index c = 0; c < p.W.cols(); ++c) {
          double v;
          is.read(reinterpret_cast<char*>(&v), sizeof(v));
          p.W(r, c) = v;
        }
      }
      is.read(reinterpret_cast<char*>(p.b.data()),
              static_cast<std::streamsize>(sizeof(double)) * p.b.size());
    }
  }
  if (!is) throw std::runtime_error("checkpoint: truncated parameter block");
  return net;
}

void save_checkpoint(const Network& net, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path);
  write_checkpoint(net, os);
}

Network load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path);
  return read_checkpoint(is);
}

}  // namespace selstudy::numnet
