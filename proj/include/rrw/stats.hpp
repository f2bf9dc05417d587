#pragma once

#include <cmath>
#include <cstddef>
#include <span>

#include "rrw/rng.hpp"

namespace rrw::stats {

/// Neumaier compensated summation.
class Sum {
 public:
  void add(double x) {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x))
      comp_ += (sum_ - t) + x;
    else
      comp_ += (x - t) + sum_;
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

struct Moments {
  std::size_t n = 0;
  double mean = 0.0;
  double variance = 0.0;  // unbiased sample variance
  double std_error() const { return n > 0 ? std::sqrt(variance / static_cast<double>(n)) : 0.0; }
};

/// Two-pass mean and variance in index order.
Moments moments(std::span<const double> x);

/// Sample covariance of paired data.
double covariance(std::span<const double> x, std::span<const double> y);

struct LineFit {
  double intercept = 0.0;
  double slope = 0.0;
  double slope_se = 0.0;
  double intercept_se = 0.0;
  double chi2 = 0.0;  // weighted residual sum of squares
  double r2 = 0.0;    // weighted coefficient of determination
};

/// Weighted least squares y = a + b x with weights 1/sigma^2.
LineFit weighted_line(std::span<const double> x, std::span<const double> y,
                      std::span<const double> sigma);

/// Standard normal variate via Box-Muller on the portable uniform stream.
double normal(Rng& rng);

}  // namespace rrw::stats
