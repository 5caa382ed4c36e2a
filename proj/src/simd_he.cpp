// SPDX-License-Identifier: Apache-2.0

#include "edl/simd_he.hpp"

#include <algorithm>
#include <cstring>
#include <istream>
#include <map>
#include <ostream>

namespace edl::he {

namespace {

bool is_pow2(std::size_t v) { return v != 0 && (v & (v - 1)) == 0; }

}  // namespace

void SchemeParams::validate() const {
  if (!is_pow2(slot_count)) {
    throw Error("slot_count must be a power of two, got " +
                std::to_string(slot_count));
  }
  if (scale_bits <= 0) throw Error("scale_bits must be positive");
  if (boot_levels < 0) throw Error("l_B must be non-negative");
  if (max_level < boot_levels + 1) {
    throw Error("max_level must be at least l_B + 1");
  }
  if (noise_std < 0) throw Error("noise_std must be non-negative");
}

Evaluator::Evaluator(SchemeParams params, std::uint64_t noise_seed)
    : params_(params), rng_(noise_seed), gauss_(0.0, 1.0) {
  params_.validate();
}

double Evaluator::quantize(double v) const {
  return std::round(std::ldexp(v, params_.scale_bits)) *
         std::ldexp(1.0, -params_.scale_bits);
}

double Evaluator::noisy(double v) {
  if (params_.noise_std == 0.0) return v;
  return v + params_.noise_std * gauss_(rng_);
}

PackedCiphertext Evaluator::encode(std::span<const double> values,
                                   PadKind pad) const {
  return encode_at(values, pad, params_.max_level);
}

PackedCiphertext Evaluator::encode_at(std::span<const double> values,
                                      PadKind pad, int level) const {
  if (values.size() > params_.slot_count) {
    throw CapacityError("payload of " + std::to_string(values.size()) +
                        " exceeds slot count " +
                        std::to_string(params_.slot_count));
  }
  if (level < 0 || level > params_.max_level) {
    throw Error("encode level out of range");
  }
  PackedCiphertext ct;
  ct.slots.assign(params_.slot_count, 0.0);
  for (std::size_t i = 0; i < values.size(); ++i) {
    ct.slots[i] = quantize(values[i]);
  }
  ct.level = level;
  ct.pad = pad;
  return ct;
}

std::vector<double> Evaluator::decode(const PackedCiphertext& ct,
                                      std::size_t len) const {
  if (len > ct.slots.size()) throw ShapeError("decode length exceeds slots");
  return {ct.slots.begin(), ct.slots.begin() + static_cast<long>(len)};
}

PlainVector Evaluator::make_plain(std::span<const double> values) const {
  if (values.size() > params_.slot_count) {
    throw CapacityError("plaintext payload exceeds slot count");
  }
  PlainVector p;
  p.slots.assign(params_.slot_count, 0.0);
  for (std::size_t i = 0; i < values.size(); ++i) {
    p.slots[i] = quantize(values[i]);
  }
  return p;
}

PlainVector Evaluator::masked_constant(double c, std::size_t payload_len) const {
  if (payload_len > params_.slot_count) {
    throw CapacityError("mask payload exceeds slot count");
  }
  PlainVector p;
  p.slots.assign(params_.slot_count, 0.0);
  std::fill(p.slots.begin(), p.slots.begin() + static_cast<long>(payload_len),
            quantize(c));
  return p;
}

void Evaluator::check_shape(std::size_t n, const char* what) const {
  if (n != params_.slot_count) {
    throw ShapeError(std::string(what) + ": slot count mismatch");
  }
}

PackedCiphertext Evaluator::add(const PackedCiphertext& a,
                                const PackedCiphertext& b) {
  check_shape(a.slots.size(), "add");
  check_shape(b.slots.size(), "add");
  PackedCiphertext out;
  out.slots.resize(params_.slot_count);
  for (std::size_t i = 0; i < params_.slot_count; ++i) {
    out.slots[i] = a.slots[i] + b.slots[i];
  }
  out.level = std::min(a.level, b.level);
  out.pad = (a.pad == PadKind::Zeros && b.pad == PadKind::Zeros)
                ? PadKind::Zeros
                : PadKind::Junk;
  return out;
}

PackedCiphertext Evaluator::sub(const PackedCiphertext& a,
                                const PackedCiphertext& b) {
  check_shape(a.slots.size(), "sub");
  check_shape(b.slots.size(), "sub");
  PackedCiphertext out;
  out.slots.resize(params_.slot_count);
  for (std::size_t i = 0; i < params_.slot_count; ++i) {
    out.slots[i] = a.slots[i] - b.slots[i];
  }
  out.level = std::min(a.level, b.level);
  out.pad = (a.pad == PadKind::Zeros && b.pad == PadKind::Zeros)
                ? PadKind::Zeros
                : PadKind::Junk;
  return out;
}

PackedCiphertext Evaluator::add_pt(const PackedCiphertext& a,
                                   const PlainVector& p) {
  check_shape(a.slots.size(), "add_pt");
  check_shape(p.slots.size(), "add_pt");
  PackedCiphertext out = a;
  for (std::size_t i = 0; i < params_.slot_count; ++i) {
    out.slots[i] = a.slots[i] + p.slots[i];
  }
  // Plaintext operands are payload-masked throughout (zero tails), so the
  // trailing-zero contract of the ciphertext survives the addition.
  return out;
}

PackedCiphertext Evaluator::mult_ct(const PackedCiphertext& a,
                                    const PackedCiphertext& b) {
  check_shape(a.slots.size(), "mult_ct");
  check_shape(b.slots.size(), "mult_ct");
  if (a.level < 1 || b.level < 1) {
    throw LevelExhausted("ct-ct multiplication at level 0");
  }
  PackedCiphertext out;
  out.slots.resize(params_.slot_count);
  for (std::size_t i = 0; i < params_.slot_count; ++i) {
    out.slots[i] = quantize(noisy(a.slots[i] * b.slots[i]));
  }
  out.level = std::min(a.level, b.level) - 1;
  out.pad = (a.pad == PadKind::Zeros || b.pad == PadKind::Zeros)
                ? PadKind::Zeros
                : PadKind::Junk;
  ++counts_.ct_mults;
  return out;
}

PackedCiphertext Evaluator::mult_pt(const PackedCiphertext& a,
                                    const PlainVector& p) {
  check_shape(a.slots.size(), "mult_pt");
  check_shape(p.slots.size(), "mult_pt");
  if (a.level < 1) {
    throw LevelExhausted("ct-pt multiplication at level 0");
  }
  PackedCiphertext out;
  out.slots.resize(params_.slot_count);
  for (std::size_t i = 0; i < params_.slot_count; ++i) {
    out.slots[i] = quantize(noisy(a.slots[i] * p.slots[i]));
  }
  out.level = a.level - 1;
  out.pad = a.pad;
  // A plaintext with a zero tail (a mask) restores the trailing-zero
  // contract even on a junk-padded input.
  if (params_.noise_std == 0.0 && p.slots.back() == 0.0) {
    std::size_t last = params_.slot_count;
    while (last > 0 && p.slots[last - 1] == 0.0) --last;
    bool tail_zero = true;
    for (std::size_t i = last; i < params_.slot_count; ++i) {
      if (out.slots[i] != 0.0) {
        tail_zero = false;
        break;
      }
    }
    if (tail_zero) out.pad = PadKind::Zeros;
  }
  ++counts_.pt_mults;
  return out;
}

PackedCiphertext Evaluator::rotate(const PackedCiphertext& a, long i) {
  check_shape(a.slots.size(), "rotate");
  const long n = static_cast<long>(params_.slot_count);
  long k = ((i % n) + n) % n;
  PackedCiphertext out;
  out.slots.resize(params_.slot_count);
  for (long j = 0; j < n; ++j) {
    out.slots[static_cast<std::size_t>(j)] =
        a.slots[static_cast<std::size_t>((j + k) % n)];
  }
  out.level = a.level;
  out.pad = (k == 0) ? a.pad : PadKind::Junk;
  ++counts_.rotations;
  return out;
}

PackedCiphertext Evaluator::dboot(const PackedCiphertext& shared, int parties) {
  check_shape(shared.slots.size(), "dboot");
  if (parties < 1) throw Error("dboot needs at least one party");
  if (shared.level < params_.boot_levels) {
    throw BootstrapHeadroom(
        "bootstrap needs level >= l_B = " + std::to_string(params_.boot_levels) +
        ", ciphertext is at " + std::to_string(shared.level));
  }
  PackedCiphertext out = shared;
  for (double& s : out.slots) s = quantize(s);
  out.level = params_.max_level;
  ++counts_.boots;
  return out;
}

void check_party_agreement(std::span<const PackedCiphertext> copies) {
  if (copies.empty()) throw ProtocolDesync("no parties at collective op");
  const PackedCiphertext& ref = copies.front();
  for (std::size_t i = 1; i < copies.size(); ++i) {
    if (copies[i].level != ref.level || copies[i].slots != ref.slots) {
      throw ProtocolDesync("parties disagree on the collective ciphertext");
    }
  }
}

DiagonalSet Evaluator::make_diagonals(std::span<const double> matrix,
                                      std::size_t rows, std::size_t cols) const {
  if (rows == 0 || cols == 0 || matrix.size() != rows * cols) {
    throw ShapeError("make_diagonals: bad matrix dimensions");
  }
  if (rows > params_.slot_count || cols > params_.slot_count) {
    throw CapacityError("matrix does not fit the slot count");
  }
  DiagonalSet d;
  d.rows = rows;
  d.cols = cols;
  d.baby = static_cast<std::size_t>(
      std::ceil(std::sqrt(static_cast<double>(cols) / 2.0)));
  if (d.baby == 0) d.baby = 1;
  d.giant = (cols + d.baby - 1) / d.baby;
  d.diags.resize(cols);
  const std::size_t sc = params_.slot_count;
  for (std::size_t i = 0; i < cols; ++i) {
    std::vector<double> diag(sc, 0.0);
    for (std::size_t j = 0; j < rows; ++j) {
      diag[j] = matrix[(j % rows) * cols + (j + i) % cols];
    }
    // Pre-rotation by -(i / n1) * n1, applied in plaintext.
    const std::size_t shift = (i / d.baby) * d.baby % sc;
    std::vector<double> rotated(sc, 0.0);
    for (std::size_t j = 0; j < sc; ++j) {
      rotated[(j + shift) % sc] = diag[j];
    }
    d.diags[i] = make_plain(rotated);
  }
  return d;
}

PackedCiphertext Evaluator::mult_diag(const DiagonalSet& d,
                                      const PackedCiphertext& p) {
  if (d.diags.size() != d.cols) throw ShapeError("mult_diag: bad diagonal set");
  if (p.pad != PadKind::Zeros) {
    throw Error("mult_diag requires an input with trailing zeros");
  }
  if (p.level < 1) throw LevelExhausted("mult_diag at level 0");
  const std::size_t n1 = d.baby;
  const std::size_t n2 = d.giant;
  // Replicate the payload so cyclic reads p[(j+i) mod cols] never wrap.
  const std::size_t copies = (d.rows + d.cols - 1 + d.cols - 1) / d.cols;
  if (copies * d.cols > params_.slot_count) {
    throw CapacityError("mult_diag: replicated payload exceeds slot count");
  }
  PackedCiphertext replicated = p;
  for (std::size_t t = 1; t < copies; ++t) {
    replicated = add(replicated, rotate(p, -static_cast<long>(t * d.cols)));
  }
  replicated.pad = PadKind::Zeros;  // exact zeros beyond copies * cols

  std::vector<PackedCiphertext> baby_rot;
  baby_rot.reserve(n1);
  baby_rot.push_back(replicated);
  for (std::size_t k = 1; k < n1; ++k) {
    baby_rot.push_back(rotate(replicated, static_cast<long>(k)));
  }

  PackedCiphertext acc;
  bool have_acc = false;
  for (std::size_t j = 0; j < n2; ++j) {
    PackedCiphertext inner;
    bool have_inner = false;
    for (std::size_t k = 0; k < n1; ++k) {
      const std::size_t i = j * n1 + k;
      if (i >= d.cols) break;
      PackedCiphertext term = mult_pt(baby_rot[k], d.diags[i]);
      inner = have_inner ? add(inner, term) : std::move(term);
      have_inner = true;
    }
    PackedCiphertext shifted = rotate(inner, static_cast<long>(j * n1));
    acc = have_acc ? add(acc, shifted) : std::move(shifted);
    have_acc = true;
  }

  if (params_.noise_std > 0.0) {
    // Noise pollutes the zero slots; restore the contract with a mask.
    acc = mult_pt(acc, masked_constant(1.0, d.rows));
  }
  acc.pad = PadKind::Zeros;
  return acc;
}

namespace {

void write_raw(std::ostream& os, const void* p, std::size_t n) {
  os.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
}

void read_raw(std::istream& is, void* p, std::size_t n) {
  is.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
  if (!is) throw Error("truncated ciphertext record");
}

}  // namespace

void write_ciphertext(std::ostream& os, const PackedCiphertext& ct) {
  const std::uint64_t n = ct.slots.size();
  const std::int32_t level = ct.level;
  const std::uint8_t pad = ct.pad == PadKind::Zeros ? 0 : 1;
  write_raw(os, &n, sizeof n);
  write_raw(os, &level, sizeof level);
  write_raw(os, &pad, sizeof pad);
  write_raw(os, ct.slots.data(), ct.slots.size() * sizeof(double));
}

PackedCiphertext read_ciphertext(std::istream& is) {
  std::uint64_t n = 0;
  std::int32_t level = 0;
  std::uint8_t pad = 0;
  read_raw(is, &n, sizeof n);
  read_raw(is, &level, sizeof level);
  read_raw(is, &pad, sizeof pad);
  PackedCiphertext ct;
  ct.slots.resize(n);
  read_raw(is, ct.slots.data(), n * sizeof(double));
  ct.level = level;
  ct.pad = pad == 0 ? PadKind::Zeros : PadKind::Junk;
  return ct;
}

void write_params(std::ostream& os, const SchemeParams& p) {
  os << "slot_count=" << p.slot_count << "\n"
     << "max_level=" << p.max_level << "\n"
     << "scale_bits=" << p.scale_bits << "\n"
     << "l_B=" << p.boot_levels << "\n"
     << "noise_std=" << p.noise_std << "\n";
}

SchemeParams read_params(std::istream& is) {
  SchemeParams p;
  std::string line;
  std::map<std::string, std::string> kv;
  while (std::getline(is, line)) {
    auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  if (kv.count("slot_count")) p.slot_count = std::stoull(kv["slot_count"]);
  if (kv.count("max_level")) p.max_level = std::stoi(kv["max_level"]);
  if (kv.count("scale_bits")) p.scale_bits = std::stoi(kv["scale_bits"]);
  if (kv.count("l_B")) p.boot_levels = std::stoi(kv["l_B"]);
  if (kv.count("noise_std")) p.noise_std = std::stod(kv["noise_std"]);
  p.validate();
  return p;
}

}  // namespace edl::he
