// SPDX-License-Identifier: Apache-2.0

#include "edl/cheb.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>

namespace edl::cheb {

namespace {

int ceil_log2(int v) {
  int l = 0;
  while ((1 << l) < v) ++l;
  return l;
}

int floor_log2(int v) {
  int l = 0;
  while ((2 << l) <= v) ++l;
  return l;
}

}  // namespace

int ChebyshevPoly::eval_levels() const { return ceil_log2(degree() + 1); }

double soft_threshold_exact(double x, double alpha) {
  if (x > alpha) return x - alpha;
  if (x < -alpha) return x + alpha;
  return 0.0;
}

namespace detail {

std::vector<double> second_kind_nodes(double lo, double hi, int degree) {
  if (!(lo < hi)) throw he::Error("degenerate interpolation interval");
  if (degree < 1) throw he::Error("interpolation degree must be >= 1");
  std::vector<double> nodes(degree + 1);
  for (int j = 0; j <= degree; ++j) {
    const double t = std::cos(M_PI * j / degree);
    nodes[j] = 0.5 * ((hi - lo) * t + hi + lo);
  }
  return nodes;
}

ChebyshevPoly interpolate_impl(const std::vector<double>& v, double lo,
                               double hi) {
  const int d = static_cast<int>(v.size()) - 1;
  ChebyshevPoly p;
  p.lo = lo;
  p.hi = hi;
  p.coeffs.resize(d + 1);
  for (int k = 0; k <= d; ++k) {
    double s = 0.5 * (v[0] + (k % 2 == 0 ? v[d] : -v[d]));
    for (int j = 1; j < d; ++j) {
      s += v[j] * std::cos(M_PI * j * k / d);
    }
    double c = 2.0 * s / d;
    if (k == 0 || k == d) c *= 0.5;
    p.coeffs[k] = c;
  }
  return p;
}

}  // namespace detail

ChebyshevPoly interpolate(const SoftThresholdSpec& spec, int degree) {
  if (spec.alpha <= 0) throw he::Error("soft threshold alpha must be positive");
  if (spec.lo > -spec.alpha || spec.hi < spec.alpha) {
    throw he::Error("interval must contain [-alpha, alpha]");
  }
  const double a = spec.alpha;
  const double s = spec.scale_out;
  return interpolate_function(
      [a, s](double x) { return s * soft_threshold_exact(x, a); }, spec.lo,
      spec.hi, degree);
}

double clenshaw_eval(const ChebyshevPoly& p, double x) {
  const double t = (2.0 * x - p.lo - p.hi) / (p.hi - p.lo);
  double b1 = 0.0, b2 = 0.0;
  for (int k = p.degree(); k >= 1; --k) {
    const double b = 2.0 * t * b1 - b2 + p.coeffs[k];
    b2 = b1;
    b1 = b;
  }
  return t * b1 - b2 + p.coeffs[0];
}

namespace {

// Paterson-Stockmeyer over the Chebyshev basis with a per-node level budget.
// Baby-step linear combinations are used wherever they fit the budget; along
// the quotient spine the polynomial is split by the largest power-of-two
// basis element so the scalar-coefficient level never stacks past the
// ceil(log2(d+1)) + 1 total.
class PsEvaluator {
 public:
  PsEvaluator(const ChebyshevPoly& p, const he::PackedCiphertext& x,
              std::size_t payload, he::Evaluator& ev)
      : poly_(p), ev_(ev), payload_(payload) {
    const int d = p.degree();
    const int l = ceil_log2(d + 1);
    budget_ = l + 1;
    const int m = (l + 1) / 2;
    baby_ = std::min(1 << m, d >= 1 ? (1 << floor_log2(d)) : 1);
    top_ = 1 << std::max(l - 1, 0);

    // T_1 carries the affine map into [-1,1]; its plaintexts are payload
    // masked, which zeroes junk slots on the way in.
    const double scale = 2.0 / (p.hi - p.lo);
    const double offset = -(p.hi + p.lo) / (p.hi - p.lo);
    basis_.resize(static_cast<std::size_t>(std::max(top_, baby_)) + 1);
    he::PackedCiphertext t1 =
        ev_.mult_pt(x, ev_.masked_constant(scale, payload_));
    t1 = ev_.add_pt(t1, ev_.masked_constant(offset, payload_));
    basis_[1] = std::move(t1);
    for (int k = 2; k <= baby_; ++k) chebyshev_step(k, (k + 1) / 2, k / 2);
    for (int n = 2 * baby_; n <= top_; n *= 2) chebyshev_step(n, n / 2, n / 2);
  }

  he::PackedCiphertext run() {
    he::PackedCiphertext out = eval(poly_.coeffs, budget_);
    out.pad = he::PadKind::Zeros;
    return out;
  }

 private:
  // T_{a+b} = 2 T_a T_b - T_{a-b}
  void chebyshev_step(int k, int a, int b) {
    he::PackedCiphertext prod = ev_.mult_ct(*basis_[a], *basis_[b]);
    prod = ev_.add(prod, prod);
    if (a == b) {
      basis_[k] = ev_.add_pt(prod, ev_.masked_constant(-1.0, payload_));
    } else {
      basis_[k] = ev_.sub(prod, *basis_[1]);
    }
  }

  // p = q * T_n + r in the Chebyshev basis, using
  // T_n T_j = (T_{n+j} + T_{n-j}) / 2.
  static void divide(const std::vector<double>& c, int n,
                     std::vector<double>& q, std::vector<double>& r) {
    const int e = static_cast<int>(c.size()) - 1;
    std::vector<double> cc = c;
    q.assign(e - n + 1, 0.0);
    for (int j = e - n; j >= 1; --j) {
      q[j] = 2.0 * cc[n + j];
      cc[n + j] = 0.0;
      cc[n - j] -= 0.5 * q[j];
    }
    q[0] = cc[n];
    cc[n] = 0.0;
    r.assign(cc.begin(), cc.begin() + n);
  }

  he::PackedCiphertext combo(const std::vector<double>& c) {
    const int e = static_cast<int>(c.size()) - 1;
    he::PackedCiphertext acc =
        ev_.mult_pt(*basis_[1], ev_.masked_constant(c.size() > 1 ? c[1] : 0.0,
                                                    payload_));
    for (int k = 2; k <= e; ++k) {
      acc = ev_.add(acc,
                    ev_.mult_pt(*basis_[k], ev_.masked_constant(c[k], payload_)));
    }
    return ev_.add_pt(acc, ev_.masked_constant(c[0], payload_));
  }

  he::PackedCiphertext eval(const std::vector<double>& c, int budget) {
    const int e = static_cast<int>(c.size()) - 1;
    const int combo_drop = e <= 1 ? 2 : ceil_log2(e) + 2;
    if (e <= baby_ && combo_drop <= budget) return combo(c);
    const int n = 1 << floor_log2(e);
    std::vector<double> q, r;
    divide(c, n, q, r);
    he::PackedCiphertext prod;
    if (q.size() == 1) {
      prod = ev_.mult_pt(*basis_[n], ev_.masked_constant(q[0], payload_));
    } else {
      prod = ev_.mult_ct(eval(q, budget - 1), *basis_[n]);
    }
    return ev_.add(prod, eval(r, budget));
  }

  const ChebyshevPoly& poly_;
  he::Evaluator& ev_;
  std::size_t payload_;
  int budget_ = 0;
  int baby_ = 0;
  int top_ = 0;
  std::vector<std::optional<he::PackedCiphertext>> basis_;
};

}  // namespace

he::PackedCiphertext eval_ps_encrypted(const ChebyshevPoly& p,
                                       const he::PackedCiphertext& x,
                                       std::size_t payload_len,
                                       he::Evaluator& ev) {
  if (p.degree() < 1) throw he::Error("eval_ps_encrypted needs degree >= 1");
  if (x.level < p.total_levels()) {
    throw he::LevelExhausted("polynomial evaluation needs " +
                             std::to_string(p.total_levels()) +
                             " levels, input has " + std::to_string(x.level));
  }
  PsEvaluator ps(p, x, payload_len, ev);
  return ps.run();
}

void write_coefficients(std::ostream& os, const ChebyshevPoly& p,
                        double alpha) {
  os.precision(17);
  os << "# interval " << p.lo << " " << p.hi << " alpha " << alpha << "\n";
  for (double c : p.coeffs) os << c << "\n";
}

ChebyshevPoly read_coefficients(std::istream& is, double* alpha_out) {
  std::string line;
  if (!std::getline(is, line) || line.rfind("# interval", 0) != 0) {
    throw he::Error("coefficient file missing header");
  }
  std::istringstream header(line.substr(10));
  ChebyshevPoly p;
  std::string tag;
  double alpha = 0.0;
  header >> p.lo >> p.hi >> tag >> alpha;
  if (alpha_out) *alpha_out = alpha;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    p.coeffs.push_back(std::stod(line));
  }
  if (p.coeffs.empty()) throw he::Error("coefficient file has no coefficients");
  return p;
}

}  // namespace edl::cheb
