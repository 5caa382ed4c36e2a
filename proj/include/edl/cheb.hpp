// SPDX-License-Identifier: Apache-2.0
//
// Chebyshev interpolation of the soft-thresholding operator and its
// evaluation over the packed-ciphertext backend with a Chebyshev-basis
// Paterson-Stockmeyer scheme. Clenshaw on plaintext doubles is the oracle.

#pragma once

#include <cstddef>
#include <iosfwd>
#include <vector>

#include "edl/simd_he.hpp"

namespace edl::cheb {

struct ChebyshevPoly {
  std::vector<double> coeffs;  // c0..cd in the Chebyshev basis
  double lo = -1.0;
  double hi = 1.0;

  int degree() const { return static_cast<int>(coeffs.size()) - 1; }
  // Depth of the encrypted evaluation alone.
  int eval_levels() const;
  // l_P: evaluation depth plus the affine input map.
  int total_levels() const { return eval_levels() + 1; }
};

struct SoftThresholdSpec {
  double alpha = 1.0;      // threshold lambda/rho
  double scale_out = 1.0;  // e.g. 1/K folded into the coefficients
  double lo = -1.0;
  double hi = 1.0;
};

// S_alpha(x) = (x - alpha)_+ - (-x - alpha)_+
double soft_threshold_exact(double x, double alpha);

// Interpolates scale_out * S_alpha at Chebyshev points of the second kind.
ChebyshevPoly interpolate(const SoftThresholdSpec& spec, int degree);

// Generic interpolation of f on [lo, hi]; used by interpolate and by tests.
template <class F>
ChebyshevPoly interpolate_function(F&& f, double lo, double hi, int degree);

double clenshaw_eval(const ChebyshevPoly& p, double x);

// Slot-wise p(x) over the backend. Consumes exactly total_levels() levels
// (one for the affine map into [-1,1], eval_levels() for the polynomial) and
// returns a ciphertext with zeros beyond payload_len. The affine plaintext is
// payload-masked, so junk input slots are zeroed on the way in.
he::PackedCiphertext eval_ps_encrypted(const ChebyshevPoly& p,
                                       const he::PackedCiphertext& x,
                                       std::size_t payload_len,
                                       he::Evaluator& ev);

// Coefficient file: header "# interval <lo> <hi> alpha <alpha>", then one
// coefficient per line.
void write_coefficients(std::ostream& os, const ChebyshevPoly& p, double alpha);
ChebyshevPoly read_coefficients(std::istream& is, double* alpha_out = nullptr);

// --- implementation of the template ---

namespace detail {
ChebyshevPoly interpolate_impl(const std::vector<double>& node_values,
                               double lo, double hi);
std::vector<double> second_kind_nodes(double lo, double hi, int degree);
}  // namespace detail

template <class F>
ChebyshevPoly interpolate_function(F&& f, double lo, double hi, int degree) {
  std::vector<double> nodes = detail::second_kind_nodes(lo, hi, degree);
  std::vector<double> values(nodes.size());
  for (std::size_t i = 0; i < nodes.size(); ++i) values[i] = f(nodes[i]);
  return detail::interpolate_impl(values, lo, hi);
}

}  // namespace edl::cheb
