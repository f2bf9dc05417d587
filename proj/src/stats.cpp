#include "rrw/stats.hpp"

#include <numbers>

namespace rrw::stats {

Moments moments(std::span<const double> x) {
  Moments m;
  m.n = x.size();
  if (m.n == 0) return m;
  Sum s;
  for (double v : x) s.add(v);
  m.mean = s.value() / static_cast<double>(m.n);
  if (m.n < 2) return m;
  Sum ss;
  for (double v : x) ss.add((v - m.mean) * (v - m.mean));
  m.variance = ss.value() / static_cast<double>(m.n - 1);
  return m;
}

double covariance(std::span<const double> x, std::span<const double> y) {
  const std::size_t n = x.size();
  if (n < 2) return 0.0;
  const double mx = moments(x).mean, my = moments(y).mean;
  Sum s;
  for (std::size_t i = 0; i < n; ++i) s.add((x[i] - mx) * (y[i] - my));
  return s.value() / static_cast<double>(n - 1);
}

LineFit weighted_line(std::span<const double> x, std::span<const double> y,
                      std::span<const double> sigma) {
  double sw = 0, sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double w = 1.0 / (sigma[i] * sigma[i]);
    sw += w;
    sx += w * x[i];
    sy += w * y[i];
    sxx += w * x[i] * x[i];
    sxy += w * x[i] * y[i];
  }
  LineFit f;
  const double det = sw * sxx - sx * sx;
  if (det <= 0.0) return f;
  f.slope = (sw * sxy - sx * sy) / det;
  f.intercept = (sy - f.slope * sx) / sw;
  f.slope_se = std::sqrt(sw / det);
  f.intercept_se = std::sqrt(sxx / det);
  const double ybar = sy / sw;
  double tss = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double w = 1.0 / (sigma[i] * sigma[i]);
    const double r = y[i] - (f.intercept + f.slope * x[i]);
    f.chi2 += w * r * r;
    tss += w * (y[i] - ybar) * (y[i] - ybar);
  }
  f.r2 = tss > 0.0 ? 1.0 - f.chi2 / tss : 1.0;
  return f;
}

double normal(Rng& rng) {
  double u1 = rng.uniform();
  while (u1 <= 0.0) u1 = rng.uniform();
  const double u2 = rng.uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace rrw::stats
