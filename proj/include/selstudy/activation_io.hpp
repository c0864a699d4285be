#pragma once

#include <Eigen/Core>
#include <string>

namespace selstudy::io {

// Activation dump: one text header line "layer <name> M <samples> U <units>"
// followed by the row-major 64-bit little-endian binary block.
void write_activation_dump(const std::string& path, const std::string& layer,
                           const Eigen::MatrixXd& acts);
Eigen::MatrixXd read_activation_dump(const std::string& path,
                                     std::string* layer_name = nullptr);

// Plain CSV variant for small cases (RFC 4180, header row "u0,u1,...").
void write_activation_csv(const std::string& path,
                          const Eigen::MatrixXd& acts);
Eigen::MatrixXd read_activation_csv(const std::string& path);

}  // namespace selstudy::io
