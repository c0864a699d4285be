#include "selstudy/activation_io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace selstudy::io {

void write_activation_dump(const std::string& path, const std::string& layer,
                           const Eigen::MatrixXd& acts) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path);
  os << "layer " << layer << " M " << acts.rows() << " U " << acts.cols()
     << "\n";
  for (Eigen::Index r = 0; r < acts.rows(); ++r) {
    for (Eigen::Index c = 0; c < acts.cols(); ++c) {
      const double v = acts(r, c);
      os.write(reinterpret_cast<const char*>(&v), sizeof(v));
    }
  }
}

Eigen::MatrixXd read_activation_dump(const std::string& path,
                                     std::string* layer_name) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path);
  std::string header;
  std::getline(is, header);
  std::istringstream hs(header);
  std::string tok, name, mtok, utok;
  Eigen::Index m = 0, u = 0;
  hs >> tok >> name >> mtok >> m >> utok >> u;
  if (tok != "layer" || mtok != "M" || utok != "U" || m <= 0 || u <= 0) {
    throw std::runtime_error("bad activation dump header: " + header);
  }
  if (layer_name) *layer_name = name;
  Eigen::MatrixXd acts(m, u);
  for (Eigen::Index r = 0; r < m; ++r) {
    for (Eigen::Index c = 0; c < u; ++c) {
      double v;
      is.read(reinterpret_cast<char*>(&v), sizeof(v));
      acts(r, c) = v;
    }
  }
  if (!is) throw std::runtime_error("truncated activation dump: " + path);
  return acts;
}

void write_activation_csv(const std::string& path,
                          const Eigen::MatrixXd& acts) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open " + path);
  for (Eigen::Index c = 0; c < acts.cols(); ++c) {
    os << (c ? "," : "") << "u" << c;
  }
  os << "\r\n";
  char buf[40];
  for (Eigen::Index r = 0; r < acts.rows(); ++r) {
    for (Eigen::Index c = 0; c < acts.cols(); ++c) {
      std::snprintf(buf, sizeof(buf), "%.17g", acts(r, c));
      os << (c ? "," : "") << buf;
    }
    os << "\r\n";
  }
}

Eigen::MatrixXd read_activation_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open " + path);
  std::string line;
  std::getline(is, line);  // header
  std::vector<std::vector<double>> rows;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<double> row;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) row.push_back(std::stod(cell));
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw std::runtime_error("empty activation csv: " + path);
  Eigen::MatrixXd acts(static_cast<Eigen::Index>(rows.size()),
                       static_cast<Eigen::Index>(rows[0].size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != rows[0].size()) {
      throw std::runtime_error("ragged activation csv: " + path);
    }
    for (std::size_t c = 0; c < rows[r].size(); ++c) {
      acts(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
          rows[r][c];
    }
  }
  return acts;
}

}  // namespace selstudy::io
