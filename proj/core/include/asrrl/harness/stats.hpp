#ifndef ASRRL_HARNESS_STATS_HPP_
#define ASRRL_HARNESS_STATS_HPP_

#include <cstddef>
#include <span>

namespace asrrl::harness {

struct MeanStd {
  std::size_t n = 0;
  double mean = 0.0;
  // sample standard deviation (n - 1); 0 for n < 2
  double std = 0.0;
};

MeanStd mean_std(std::span<const double> xs);

struct PairedTTest {
  std::size_t n = 0;
  double mean_difference = 0.0;
  double t = 0.0;
  // one-sided, H1: mean(a - b) > 0
  double p_value = 1.0;
};

// Paired one-sided Student t-test. Identical samples give p = 1 when the
// mean difference is not positive, p = 0 for a constant positive shift.
PairedTTest paired_t_test(std::span<const double> a, std::span<const double> b);

}  // namespace asrrl::harness

#endif  // ASRRL_HARNESS_STATS_HPP_
