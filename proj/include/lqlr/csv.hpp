#pragma once

#include <Eigen/Dense>

#include <iosfwd>
#include <string>

namespace lqlr {

// One observation per line; a single non-numeric first line is treated as a
// header. Blank lines are skipped. Throws std::runtime_error naming the
// offending line on malformed or non-finite values, and "no observations"
// when nothing remains.
Eigen::VectorXd read_observations(std::istream& in, const std::string& source_name = "<input>");

Eigen::VectorXd read_observations_file(const std::string& path);

}  // namespace lqlr
