#pragma once

#include <string>

#include "matcpd/core.hpp"

// Long-format CSV exchange: header "t,i,j,x", one row per cell, 1-based
// indices, every (t,i,j) cell of the series exactly once in any order.
// Dimensions are inferred from the index maxima.

namespace matcpd {

MatrixSeriesXd read_long_csv(const std::string& path);
MatrixSeriesXd parse_long_csv(const std::string& text, const std::string& origin);

void write_long_csv(const std::string& path, const MatrixSeriesXd& x);
std::string format_long_csv(const MatrixSeriesXd& x);

}  // namespace matcpd
