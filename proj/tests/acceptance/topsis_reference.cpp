#include "topsis_reference.hpp"

#include <cmath>

namespace reference {

std::vector<double> entropy_weights(const Matrix& x) {
  const std::size_t m = x.size();
  const std::size_t n = x[0].size();
  const double k = 1.0 / std::log(static_cast<double>(m));
  std::vector<double> d(n);
  double dsum = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    double colsum = 0.0;
    bool varies = false;
    for (std::size_t i = 0; i < m; ++i) {
      colsum += x[i][j];
      if (x[i][j] != x[0][j]) varies = true;
    }
    double e = 1.0;  // constant or empty column: maximal entropy
    if (varies && colsum > 0.0) {
      e = 0.0;
      for (std::size_t i = 0; i < m; ++i) {
        const double p = x[i][j] / colsum;
        if (p > 0.0) e += p * std::log(p);
      }
      e *= -k;
    }
    d[j] = 1.0 - e;
    dsum += d[j];
  }
  std::vector<double> w(n, 1.0 / static_cast<double>(n));
  if (dsum > 0.0) {
    for (std::size_t j = 0; j < n; ++j) w[j] = d[j] / dsum;
  }
  return w;
}

std::vector<double> closeness(const Matrix& x, const std::vector<double>& w) {
  const std::size_t m = x.size();
  const std::size_t n = x[0].size();
  // v_ij = w_j * x_ij / sqrt(sum_i x_ij^2)
  Matrix v(m, std::vector<double>(n, 0.0));
  for (std::size_t j = 0; j < n; ++j) {
    double ss = 0.0;
    for (std::size_t i = 0; i < m; ++i) ss += x[i][j] * x[i][j];
    if (ss == 0.0) continue;
    for (std::size_t i = 0; i < m; ++i) v[i][j] = w[j] * x[i][j] / std::sqrt(ss);
  }
  std::vector<double> best(v[0]), worst(v[0]);
  for (std::size_t i = 1; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (v[i][j] > best[j]) best[j] = v[i][j];
      if (v[i][j] < worst[j]) worst[j] = v[i][j];
    }
  }
  std::vector<double> c(m);
  for (std::size_t i = 0; i < m; ++i) {
    double dp = 0.0, dm = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      dp += std::pow(v[i][j] - best[j], 2);
      dm += std::pow(v[i][j] - worst[j], 2);
    }
    dp = std::sqrt(dp);
    dm = std::sqrt(dm);
    c[i] = (dp + dm < 1e-12) ? 0.5 : dm / (dp + dm);
  }
  return c;
}

}  // namespace reference
