// SPDX-License-Identifier: Apache-2.0
//
// Reference backend for a SIMD leveled ciphertext: exact fixed-point slot
// arithmetic with strict CKKS-style level accounting. Values are held in the
// clear; what is simulated faithfully is the bookkeeping (levels, rotations,
// multiplication counts, bootstrap rounds) and the quantization at the scheme
// scale after every multiplication.

#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace edl::he {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Slot-count or dimension mismatch between operands.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Payload longer than the slot count.
class CapacityError : public Error {
 public:
  using Error::Error;
};

// A multiplication was attempted on a ciphertext that does not accept any
// more multiplications (level 0).
class LevelExhausted : public Error {
 public:
  using Error::Error;
};

// Not enough level headroom for the statistically hiding bootstrap mask.
class BootstrapHeadroom : public Error {
 public:
  using Error::Error;
};

// Parties arrived at a collective operation with different ciphertexts or
// at different iterations.
class ProtocolDesync : public Error {
 public:
  using Error::Error;
};

struct SchemeParams {
  std::size_t slot_count = std::size_t{1} << 14;
  int max_level = 10;  // L
  int scale_bits = 40;
  int boot_levels = 3;  // l_B
  double noise_std = 0.0;

  // Throws Error if slot_count is not a power of two or L < l_B + 1.
  void validate() const;

  double quantum() const { return std::ldexp(1.0, -scale_bits); }
};

enum class PadKind { Zeros, Junk };

struct PlainVector {
  std::vector<double> slots;
};

struct PackedCiphertext {
  std::vector<double> slots;
  int level = 0;
  PadKind pad = PadKind::Junk;
};

struct OpCounts {
  long ct_mults = 0;
  long pt_mults = 0;
  long rotations = 0;
  long boots = 0;

  OpCounts operator-(const OpCounts& o) const {
    return {ct_mults - o.ct_mults, pt_mults - o.pt_mults,
            rotations - o.rotations, boots - o.boots};
  }
};

// Extended diagonal representation of a rows x cols matrix, pre-rotated for
// the baby-step giant-step product. Diagonal i holds S[j mod rows,
// (j+i) mod cols] in slot j for j < rows and zeros elsewhere, stored rotated
// right by (i / n1) * n1 positions.
struct DiagonalSet {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t baby = 0;   // n1 = ceil(sqrt(cols / 2))
  std::size_t giant = 0;  // n2 = ceil(cols / n1)
  std::vector<PlainVector> diags;
};

class Evaluator {
 public:
  explicit Evaluator(SchemeParams params, std::uint64_t noise_seed = 0);

  const SchemeParams& params() const { return params_; }
  const OpCounts& counts() const { return counts_; }
  void reset_counts() { counts_ = {}; }

  double quantize(double v) const;

  // Models encryption at the full level L; values are quantized to the scale.
  PackedCiphertext encode(std::span<const double> values, PadKind pad) const;
  // Same, but the ciphertext is issued at an explicit level (client inputs in
  // Protocol 2 arrive below L).
  PackedCiphertext encode_at(std::span<const double> values, PadKind pad,
                             int level) const;
  std::vector<double> decode(const PackedCiphertext& ct, std::size_t len) const;

  // Quantized full-width plaintext operand, zero padded.
  PlainVector make_plain(std::span<const double> values) const;
  // Constant c in the first payload_len slots, zeros after.
  PlainVector masked_constant(double c, std::size_t payload_len) const;

  PackedCiphertext add(const PackedCiphertext& a, const PackedCiphertext& b);
  PackedCiphertext sub(const PackedCiphertext& a, const PackedCiphertext& b);
  PackedCiphertext add_pt(const PackedCiphertext& a, const PlainVector& p);
  PackedCiphertext mult_ct(const PackedCiphertext& a, const PackedCiphertext& b);
  PackedCiphertext mult_pt(const PackedCiphertext& a, const PlainVector& p);
  PackedCiphertext rotate(const PackedCiphertext& a, long i);

  // Collective refresh. `shared` is this party's copy; `parties` is only
  // recorded (the caller drives the barrier). Checks the headroom
  // precondition, re-quantizes and resets the level to L.
  PackedCiphertext dboot(const PackedCiphertext& shared, int parties);

  // Baby-step giant-step product q = S * p. Requires p with trailing zeros.
  // Uses exactly n1 + n2 rotations when rows <= cols and records `cols`
  // plaintext slot-multiplications. The output carries trailing zeros; with
  // noise enabled a zero-mask is applied, costing one extra level.
  PackedCiphertext mult_diag(const DiagonalSet& d, const PackedCiphertext& p);

  // Builds the pre-rotated extended diagonal set for a rows x cols matrix
  // given in row-major order.
  DiagonalSet make_diagonals(std::span<const double> matrix, std::size_t rows,
                             std::size_t cols) const;

 private:
  void check_shape(std::size_t n, const char* what) const;
  double noisy(double v);

  SchemeParams params_;
  OpCounts counts_;
  std::mt19937_64 rng_;
  std::normal_distribution<double> gauss_;
};

// Checks two party copies for bit-identical agreement before a collective op.
void check_party_agreement(std::span<const PackedCiphertext> copies);

// Length-prefixed binary record: u64 slot count, i32 level, u8 pad tag,
// slots as 64-bit floats. Used by the golden-transcript tests.
void write_ciphertext(std::ostream& os, const PackedCiphertext& ct);
PackedCiphertext read_ciphertext(std::istream& is);

// Flat key-value config (slot_count, max_level, scale_bits, l_B, noise_std).
void write_params(std::ostream& os, const SchemeParams& p);
SchemeParams read_params(std::istream& is);

}  // namespace edl::he
