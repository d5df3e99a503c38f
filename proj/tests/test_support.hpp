#pragma once

#include <filesystem>
#include <fstream>
#include <random>
#include <string>

#include "aucil/gaussian.hpp"

namespace testsup {

using aucil::Matrix;
using aucil::Vector;

inline Vector random_vector(std::mt19937_64& rng, int dim, double scale = 1.0) {
  std::normal_distribution<double> g(0.0, scale);
  Vector v(dim);
  for (int d = 0; d < dim; ++d) v[d] = g(rng);
  return v;
}

// Well-conditioned random SPD matrix: A A^T / dim plus a positive diagonal.
inline Matrix random_spd(std::mt19937_64& rng, int dim) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.2, 1.2);
  Matrix a(dim, dim);
  for (int r = 0; r < dim; ++r) {
    for (int c = 0; c < dim; ++c) a(r, c) = g(rng);
  }
  Matrix spd = a * a.transpose() / static_cast<double>(dim);
  spd.diagonal().array() += u(rng);
  return 0.5 * (spd + spd.transpose());
}

inline Vector random_positive_vector(std::mt19937_64& rng, int dim) {
  std::uniform_real_distribution<double> u(0.1, 3.0);
  Vector v(dim);
  for (int d = 0; d < dim; ++d) v[d] = u(rng);
  return v;
}

// Rows drawn from N(mean, cov).
inline Matrix sample_gaussian_rows(std::mt19937_64& rng, int n, const Vector& mean,
                                   const Matrix& cov) {
  Eigen::LLT<Matrix> llt(cov);
  const Matrix l = llt.matrixL();
  std::normal_distribution<double> g(0.0, 1.0);
  Matrix rows(n, mean.size());
  for (int i = 0; i < n; ++i) {
    Vector z(mean.size());
    for (Eigen::Index d = 0; d < mean.size(); ++d) z[d] = g(rng);
    rows.row(i) = (mean + l * z).transpose();
  }
  return rows;
}

// Scratch directory for file-based tests, fresh per call.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("aucil_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace testsup
