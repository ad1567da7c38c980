#include "asrrl/harness/stats.hpp"

#include <cmath>
#include <vector>

#include <boost/math/distributions/students_t.hpp>

#include "asrrl/core/error.hpp"

namespace asrrl::harness {

MeanStd mean_std(std::span<const double> xs) {
  MeanStd out;
  out.n = xs.size();
  if (xs.empty()) return out;
  double sum = 0.0;
  for (double x : xs) sum += x;
  out.mean = sum / static_cast<double>(xs.size());
  if (xs.size() > 1) {
    double ss = 0.0;
    for (double x : xs) ss += (x - out.mean) * (x - out.mean);
    out.std = std::sqrt(ss / static_cast<double>(xs.size() - 1));
  }
  return out;
}

PairedTTest paired_t_test(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw DimensionError("paired_t_test: samples differ in size");
  }
  if (a.size() < 2) throw DimensionError("paired_t_test: need at least 2 pairs");
  std::vector<double> d(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
  const MeanStd ms = mean_std(d);
  PairedTTest out;
  out.n = d.size();
  out.mean_difference = ms.mean;
  if (ms.std == 0.0) {
    out.t = ms.mean > 0 ? INFINITY : (ms.mean < 0 ? -INFINITY : 0.0);
    out.p_value = ms.mean > 0 ? 0.0 : 1.0;
    return out;
  }
  out.t = ms.mean / (ms.std / std::sqrt(static_cast<double>(d.size())));
  boost::math::students_t dist(static_cast<double>(d.size() - 1));
  out.p_value = boost::math::cdf(boost::math::complement(dist, out.t));
  return out;
}

}  // namespace asrrl::harness
