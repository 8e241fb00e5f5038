#pragma once

#include <string>

#include "tvws/sensing.hpp"

namespace tvws {

// Delimiter-separated text, one row per line, "NA" for unknown entries.
void write_matrix_text(const PartialSpectrumMatrix& m, const std::string& path);
PartialSpectrumMatrix read_matrix_text(const std::string& path);

// Compact binary form: magic "TVWS", version u16, dims, row-major doubles,
// then the known-mask as a packed bitset.
void write_matrix_binary(const PartialSpectrumMatrix& m, const std::string& path);
PartialSpectrumMatrix read_matrix_binary(const std::string& path);

PartialSpectrumMatrix full_matrix(const Eigen::MatrixXd& values);

}  // namespace tvws
