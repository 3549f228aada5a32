#include "lqlr/csv.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace lqlr {

namespace {

bool parse_double(const std::string& field, double* out) {
  try {
    std::size_t pos = 0;
    *out = std::stod(field, &pos);
    while (pos < field.size() && std::isspace(static_cast<unsigned char>(field[pos]))) ++pos;
    return pos == field.size();
  } catch (const std::exception&) {
    return false;
  }
}

std::string strip(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && (std::isspace(static_cast<unsigned char>(s[e - 1])) || s[e - 1] == '\r')) --e;
  return s.substr(b, e - b);
}

}  // namespace

Eigen::VectorXd read_observations(std::istream& in, const std::string& source_name) {
  std::vector<double> values;
  std::string line;
  int line_no = 0;
  bool first_content_line = true;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string field = strip(line);
    if (field.empty()) continue;
    double v;
    if (!parse_double(field, &v)) {
      if (first_content_line) {
        first_content_line = false;  // header line
        continue;
      }
      throw std::runtime_error(source_name + ": line " + std::to_string(line_no) +
                               ": not a number: '" + field + "'");
    }
    first_content_line = false;
    if (!std::isfinite(v))
      throw std::runtime_error(source_name + ": line " + std::to_string(line_no) +
                               ": non-finite value rejected");
    values.push_back(v);
  }
  if (values.empty()) throw std::runtime_error(source_name + ": no observations");
  return Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
}

Eigen::VectorXd read_observations_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error(path + ": cannot open");
  return read_observations(in, path);
}

}  // namespace lqlr
