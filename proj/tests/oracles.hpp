#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "gnndr/math.hpp"

namespace oracles {

// High-precision reference constants (frozen from an independent
// arbitrary-precision computation).
inline constexpr double kQuantileOneThird = -0.43072729929545749;  // Phi^-1(1/3)
inline constexpr double kPhiSqrt2 = 0.92135039647485743;           // Phi(sqrt(2))
inline constexpr double kPhi95 = 0.94999999722;                    // Phi(1.6448536)
inline constexpr double kLn2 = 0.69314718055994531;
inline constexpr double kSqrtPi = 1.7724538509055160;
inline constexpr double kThreeQuarterSqrtPi = 1.3293403881791370;  // integral of t^4 e^{-t^2}
inline constexpr double kInvSqrt2 = 0.70710678118654752;
inline constexpr double kHalfSqrtPi = 0.88622692545275801;
// E[log(1 + a|s|^2)], |s|^2 ~ Exp(1), a = 10: e^{1/10} E_1(1/10)
inline constexpr double kRayleighOpt10 = 2.0146425447084517;
// log(1 / E[1/(1+10u)]), u ~ Exp(1)
inline constexpr double kRayleighCsf10 = 1.6021433104991594;

// Adaptive Simpson quadrature on [a, b].
double integrate(const std::function<double(double)>& f, double a, double b, double tol = 1e-12);

// E[g(u)] for u ~ Exp(1), integrated over [0, 50] adaptively.
double exp1_expectation(const std::function<double(double)>& g, double tol = 1e-12);

// Dense complex solve via Gaussian elimination with partial pivoting.
// a is row-major n x n; throws std::runtime_error if singular.
gnndr::CVec dense_solve(std::vector<gnndr::cplx> a, gnndr::CVec b);

struct Csv {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t col(const std::string& name) const;  // throws if absent
  double num(std::size_t row, const std::string& name) const;
  const std::string& cell(std::size_t row, const std::string& name) const;
};

Csv read_csv(const std::string& path);  // throws std::runtime_error on malformed input

}  // namespace oracles
