#pragma once

#include <array>
#include <cmath>
#include <complex>

#include "shortint/error.hpp"
#include "shortint/numeric.hpp"

namespace shortint {

/// Riemann zeta for complex s with Re s > 0, s != 1, by Euler-Maclaurin
/// summation with N >= |Im s| terms and 15 Bernoulli corrections.
inline cplx zeta(cplx s) {
  if (s.real() <= 0.0) throw DomainError("zeta evaluation needs Re s > 0");
  if (std::abs(s - 1.0) < 1e-14) throw DomainError("zeta has a pole at s = 1");
  // B_{2j} / (2j)! for j = 1..15.
  static constexpr std::array<double, 15> kB = {
      1.0 / 12.0,
      -1.0 / 720.0,
      1.0 / 30240.0,
      -1.0 / 1209600.0,
      1.0 / 47900160.0,
      -1.0 / 1307674368000.0 * 691.0,
      1.0 / 74724249600.0,
      -3617.0 / 10670622842880000.0,
      43867.0 / 5109094217170944000.0,
      -174611.0 / 802857662698291200000.0,
      77683.0 / 14101100039391805440000.0,
      -236364091.0 / 1693824136731743669452800000.0,
      657931.0 / 186134520519971831808000000.0,
      -3392780147.0 / 37893265687455865519472640000000.0,
      1723168255201.0 / 759790291646040068357842010112000000.0,
  };
  const auto N = static_cast<std::uint64_t>(std::max(20.0, std::ceil(std::abs(s.imag())) + 20.0));
  ComplexNeumaierSum acc;
  for (std::uint64_t n = 1; n < N; ++n) acc += std::exp(-s * std::log(static_cast<double>(n)));
  const double lN = std::log(static_cast<double>(N));
  const cplx Ns = std::exp(-s * lN);  // N^{-s}
  acc += Ns * static_cast<double>(N) / (s - 1.0);
  acc += 0.5 * Ns;
  cplx rising = s;            // s (s+1) ... (s + 2j - 2)
  cplx power = Ns / static_cast<double>(N);  // N^{-s-2j+1}
  for (std::size_t j = 0; j < kB.size(); ++j) {
    acc += kB[j] * rising * power;
    rising *= (s + static_cast<double>(2 * j + 1)) * (s + static_cast<double>(2 * j + 2));
    power /= static_cast<double>(N) * static_cast<double>(N);
  }
  return acc.value();
}

}  // namespace shortint
