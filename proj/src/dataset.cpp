#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "selstudy/harness.hpp"
#include "selstudy/rng.hpp"

namespace selstudy::harness {

namespace {

Eigen::RowVectorXd blob_sample(const Eigen::RowVectorXd& center, Rng& rng) {
  Eigen::RowVectorXd row(center.size());
  for (Eigen::Index j = 0; j < row.size(); ++j) {
    row[j] = center[j] + rng.normal();
  }
  return row;
}

// One glyph rendered with positional jitter into the half-image starting at
// row y0. The alphabet cycles through bar, disc, diagonal band, checker.
void draw_glyph(Eigen::RowVectorXd& row, int size, int glyph, int y0,
                Rng& rng) {
  const int half = size / 2;
  const double cx = size / 2.0 + rng.uniform(-2.0, 2.0);
  const double cy = y0 + half / 2.0 + rng.uniform(-1.5, 1.5);
  const double radius = size / 5.0 + rng.uniform(-0.5, 0.5);
  for (int y = y0; y < y0 + half; ++y) {
    for (int x = 0; x < size; ++x) {
      double v = 0.0;
      switch (glyph % 4) {
        case 0:  // horizontal bar
          v = (std::abs(y - cy) <= 1.0 && x >= 2 && x < size - 2) ? 1.0 : 0.0;
          break;
        case 1: {  // filled disc
          const double dx = x - cx, dy = y - cy;
          v = dx * dx + dy * dy <= radius * radius ? 1.0 : 0.0;
          break;
        }
        case 2:  // diagonal band
          v = std::abs((x - cx) + (y - cy)) <= 1.5 ? 1.0 : 0.0;
          break;
        case 3:  // checker patch
          v = (std::abs(x - cx) <= 3.5 && std::abs(y - cy) <= 2.5 &&
               (x + y) % 2 == 0)
                  ? 1.0
                  : 0.0;
          break;
      }
      if (v > 0.0) row[y * size + x] = v;
    }
  }
}

// Compositional 1 x S x S image classes: each class pairs a top-half glyph
// with a bottom-half glyph (class -> (cls / k, cls % k) over a k-letter
// alphabet), so classes share parts and class identity is a conjunction of
// spatially separate features rather than a single template.
Eigen::RowVectorXd parts_sample(int cls, int num_classes, int size,
                                double noise, Rng& rng) {
  Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(size * size);
  int k = 2;
  while (k * k < num_classes) ++k;
  draw_glyph(row, size, cls / k, 0, rng);
  draw_glyph(row, size, cls % k, size / 2, rng);
  for (Eigen::Index i = 0; i < row.size(); ++i) {
    row[i] += noise * rng.normal();
  }
  return row;
}

// Oriented-bar 1 x S x S image classes: class k is a thick bar through the
// image center at angle k * 180deg / C, with angle/center/thickness jitter.
// Classes are cyclically ordered, so they share a smooth latent (orientation)
// rather than having independent templates.
Eigen::RowVectorXd bars_sample(int cls, int num_classes, int size,
                               double noise, Rng& rng) {
  Eigen::RowVectorXd row(size * size);
  const double pi = 3.14159265358979323846;
  const double theta = pi * cls / num_classes + rng.uniform(-0.09, 0.09);
  const double cx = (size - 1) / 2.0 + rng.uniform(-1.5, 1.5);
  const double cy = (size - 1) / 2.0 + rng.uniform(-1.5, 1.5);
  const double thickness = 2.2 + rng.uniform(-0.4, 0.4);
  const double nx = -std::sin(theta), ny = std::cos(theta);
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      const double d = std::abs((x - cx) * nx + (y - cy) * ny);
      const double v = d <= thickness ? 1.0 : 0.0;
      row[y * size + x] = v + noise * rng.normal();
    }
  }
  return row;
}

// Template 1 x S x S image classes: stripes, disk, diagonal cross,
// checkerboard, rendered inside a centered box that covers ~60% of each
// edge. The pattern index cycles for C > 5 with a coarser period.
// style > 0 fills the border ring outside the box with a class-independent
// structured nuisance: a global brightness offset plus independent offsets
// for the top/bottom/left/right border panels, redrawn per sample.
Eigen::RowVectorXd shape_sample(int cls, int size, double noise, double style,
                                Rng& rng) {
  Eigen::RowVectorXd row(size * size);
  const int margin = size / 5;  // border ring thickness
  double global_offset = 0.0;
  double panel_offset[4] = {0.0, 0.0, 0.0, 0.0};
  if (style > 0.0) {
    global_offset = style * rng.normal();
    for (double& q : panel_offset) q = 0.7 * style * rng.normal();
  }
  const int pattern = cls % 5;
  const int period = 4 + 2 * (cls / 5);
  const int phase =
      static_cast<int>(rng.below(static_cast<std::uint64_t>(period)));
  const double cx = size / 2.0 + rng.uniform(-2.0, 2.0);
  const double cy = size / 2.0 + rng.uniform(-2.0, 2.0);
  const double radius = size / 4.0 + rng.uniform(-1.0, 1.0);
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      const bool in_box = x >= margin && x < size - margin && y >= margin &&
                          y < size - margin;
      double v = 0.0;
      if (in_box) {
        switch (pattern) {
          case 0:  // horizontal stripes
            v = ((y + phase) % period) < period / 2 ? 1.0 : 0.0;
            break;
          case 1:  // vertical stripes
            v = ((x + phase) % period) < period / 2 ? 1.0 : 0.0;
            break;
          case 2: {  // filled disk
            const double dx = x - cx, dy = y - cy;
            v = dx * dx + dy * dy <= radius * radius ? 1.0 : 0.0;
            break;
          }
          case 3: {  // diagonal cross
            const int t = 1 + phase % 2;
            v = (std::abs(x - y) <= t || std::abs(x + y - (size - 1)) <= t)
                    ? 1.0
                    : 0.0;
            break;
          }
          case 4:  // checkerboard
            v = (((x + phase) / (period / 2) + (y + phase) / (period / 2)) % 2)
                    ? 1.0
                    : 0.0;
            break;
        }
      } else if (style > 0.0) {
        const int panel = y < margin               ? 0
                          : y >= size - margin     ? 1
                          : x < margin             ? 2
                                                   : 3;
        v = global_offset + panel_offset[panel];
      }
      row[y * size + x] = v + noise * rng.normal();
    }
  }
  return row;
}

}  // namespace

Dataset make_synthetic_dataset(const DatasetSpec& spec) {
  if (spec.num_classes < 2) {
    throw std::invalid_argument("dataset: need at least 2 classes");
  }
  if (spec.samples_per_class < 10) {
    throw std::invalid_argument("dataset: need at least 10 samples per class");
  }
  const bool blobs = spec.name == "blobs";
  if (!blobs && spec.name != "shapes" && spec.name != "parts" &&
      spec.name != "bars") {
    throw std::invalid_argument("dataset: unknown name " + spec.name);
  }
  const int dim = blobs ? spec.dim : spec.image_size * spec.image_size;
  const int total = spec.num_classes * spec.samples_per_class;
  Rng rng = stream_rng(spec.seed, "dataset");

  Eigen::MatrixXd centers;
  if (blobs) {
    centers.resize(spec.num_classes, dim);
    for (int c = 0; c < spec.num_classes; ++c) {
      Eigen::RowVectorXd dir(dim);
      for (int j = 0; j < dim; ++j) dir[j] = rng.normal();
      centers.row(c) = spec.separation * dir / dir.norm();
    }
  }

  Eigen::MatrixXd x(total, dim);
  std::vector<int> y(static_cast<std::size_t>(total));
  int row = 0;
  for (int c = 0; c < spec.num_classes; ++c) {
    for (int s = 0; s < spec.samples_per_class; ++s, ++row) {
      y[static_cast<std::size_t>(row)] = c;
      if (blobs) {
        x.row(row) = blob_sample(centers.row(c), rng);
      } else if (spec.name == "parts") {
        x.row(row) = parts_sample(c, spec.num_classes, spec.image_size,
                                  spec.noise, rng);
      } else if (spec.name == "bars") {
        x.row(row) = bars_sample(c, spec.num_classes, spec.image_size,
                                 spec.noise, rng);
      } else {
        x.row(row) =
            shape_sample(c, spec.image_size, spec.noise, spec.style, rng);
      }
    }
  }

  // Stratified 80/10/10 split.
  Dataset data;
  data.num_classes = spec.num_classes;
  data.input_shape = blobs ? numnet::Shape{dim, 1, 1}
                           : numnet::Shape{1, spec.image_size, spec.image_size};
  Rng split_rng = stream_rng(spec.seed, "split");
  std::vector<int> train_idx, val_idx, test_idx;
  for (int c = 0; c < spec.num_classes; ++c) {
    std::vector<int> idx;
    for (int i = 0; i < total; ++i) {
      if (y[static_cast<std::size_t>(i)] == c) idx.push_back(i);
    }
    split_rng.shuffle(idx);
    const int n = static_cast<int>(idx.size());
    const int n_train = (n * 8) / 10;
    const int n_val = n / 10;
    for (int i = 0; i < n; ++i) {
      if (i < n_train) {
        train_idx.push_back(idx[static_cast<std::size_t>(i)]);
      } else if (i < n_train + n_val) {
        val_idx.push_back(idx[static_cast<std::size_t>(i)]);
      } else {
        test_idx.push_back(idx[static_cast<std::size_t>(i)]);
      }
    }
  }
  auto gather = [&](const std::vector<int>& idx) {
    Split s;
    s.x.resize(static_cast<Eigen::Index>(idx.size()), dim);
    s.y.resize(idx.size());
    for (std::size_t i = 0; i < idx.size(); ++i) {
      s.x.row(static_cast<Eigen::Index>(i)) = x.row(idx[i]);
      s.y[i] = y[static_cast<std::size_t>(idx[i])];
    }
    return s;
  };
  data.train = gather(train_idx);
  data.val = gather(val_idx);
  data.test = gather(test_idx);
  return data;
}

Dataset load_csv_dataset(const DatasetSpec& spec) {
  std::ifstream is(spec.csv_path);
  if (!is) throw std::runtime_error("cannot open " + spec.csv_path);
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<double> row;
    std::istringstream ls(line);
    std::string cell;
    bool numeric = true;
    while (std::getline(ls, cell, ',')) {
      try {
        row.push_back(std::stod(cell));
      } catch (const std::exception&) {
        numeric = false;
        break;
      }
    }
    if (!numeric) continue;  // header row
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw std::runtime_error("empty csv: " + spec.csv_path);
  const std::size_t dim = rows[0].size() - 1;
  if (dim == 0) throw std::runtime_error("csv needs features + label column");

  int num_classes = 0;
  Eigen::MatrixXd x(static_cast<Eigen::Index>(rows.size()),
                    static_cast<Eigen::Index>(dim));
  std::vector<int> y(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != dim + 1) {
      throw std::runtime_error("ragged csv: " + spec.csv_path);
    }
    for (std::size_t j = 0; j < dim; ++j) {
      x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          rows[i][j];
    }
    y[i] = static_cast<int>(rows[i][dim]);
    num_classes = std::max(num_classes, y[i] + 1);
  }

  Dataset data;
  data.num_classes = num_classes;
  data.input_shape = numnet::Shape{static_cast<int>(dim), 1, 1};
  Rng split_rng = stream_rng(spec.seed, "split");
  std::vector<int> order(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    order[i] = static_cast<int>(i);
  }
  split_rng.shuffle(order);
  const int n = static_cast<int>(order.size());
  const int n_train = (n * 8) / 10;
  const int n_val = n / 10;
  auto gather = [&](int lo, int hi) {
    Split s;
    s.x.resize(hi - lo, static_cast<Eigen::Index>(dim));
    s.y.resize(static_cast<std::size_t>(hi - lo));
    for (int i = lo; i < hi; ++i) {
      s.x.row(i - lo) = x.row(order[static_cast<std::size_t>(i)]);
      s.y[static_cast<std::size_t>(i - lo)] =
          y[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])];
    }
    return s;
  };
  data.train = gather(0, n_train);
  data.val = gather(n_train, n_train + n_val);
  data.test = gather(n_train + n_val, n);
  return data;
}

Dataset make_dataset(const DatasetSpec& spec) {
  return spec.name == "csv" ? load_csv_dataset(spec)
                            : make_synthetic_dataset(spec);
}

}  // namespace selstudy::harness
