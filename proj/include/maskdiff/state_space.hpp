#ifndef MASKDIFF_STATE_SPACE_HPP
#define MASKDIFF_STATE_SPACE_HPP

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "maskdiff/errors.hpp"

namespace maskdiff {

// Token ids are 1-based; the mask token is the largest id K.
using Token = int;
using Sequence = std::vector<Token>;
using StateIndex = std::uint64_t;

// Description of the product space {1,...,K}^d.  Immutable after
// construction; dense (K^d-sized) objects are only allowed while
// num_states() stays at or below dense_cap.
class SpaceSpec {
 public:
  static constexpr StateIndex kDefaultDenseCap = StateIndex{1} << 26;

  SpaceSpec(int length, int vocab, StateIndex dense_cap = kDefaultDenseCap);

  int length() const { return length_; }        // d
  int vocab() const { return vocab_; }          // K, including the mask token
  Token mask_token() const { return vocab_; }
  StateIndex dense_cap() const { return dense_cap_; }
  StateIndex num_states() const { return num_states_; }

  bool dense_allowed() const { return num_states_ <= dense_cap_; }
  void require_dense(const char* where) const;

  bool contains(const Sequence& y) const;
  void require_member(const Sequence& y, const char* where) const;

  friend bool operator==(const SpaceSpec& a, const SpaceSpec& b) {
    return a.length_ == b.length_ && a.vocab_ == b.vocab_;
  }

 private:
  int length_;
  int vocab_;
  StateIndex dense_cap_;
  StateIndex num_states_;
};

// Number of mask tokens in y.
int num_mask(const SpaceSpec& spec, const Sequence& y);

// Hamming distance; throws DomainError on length mismatch.
int hamming(const Sequence& y, const Sequence& y2);

// Copy of y with tokens at `positions` (0-based, distinct) replaced by
// `values`.  The input is left untouched.
Sequence revise(const SpaceSpec& spec, const Sequence& y,
                std::span<const int> positions, std::span<const Token> values);

// Mixed-radix bijection between sequences and [0, K^d); coordinate 0 is
// the most significant digit, matching the Kronecker ordering of the
// factorized transition kernel.
StateIndex encode(const SpaceSpec& spec, const Sequence& y);
Sequence decode(const SpaceSpec& spec, StateIndex index);

// 0-based positions of mask tokens, ascending.
std::vector<int> masked_positions(const SpaceSpec& spec, const Sequence& y);

// Full probability vector over the K^d state space, indexed by encode().
class DenseDistribution {
 public:
  DenseDistribution(const SpaceSpec& spec, std::vector<double> probs);

  const SpaceSpec& spec() const { return spec_; }
  const std::vector<double>& probs() const { return probs_; }
  double prob(const Sequence& y) const { return probs_[encode(spec_, y)]; }
  double prob(StateIndex i) const { return probs_[i]; }

 private:
  SpaceSpec spec_;
  std::vector<double> probs_;
};

// Sparse distribution stored as (sequence, probability) pairs sorted by
// state index.  Probabilities must be positive and sum to 1 within 1e-9;
// deviations below the tolerance are renormalized, larger ones rejected.
class SparseDistribution {
 public:
  struct Entry {
    Sequence point;
    double prob;
  };

  SparseDistribution(const SpaceSpec& spec, std::vector<Entry> support);

  const SpaceSpec& spec() const { return spec_; }
  const std::vector<Entry>& support() const { return support_; }

  // True when no support point contains the mask token, the admissibility
  // condition for targets of the masking process.
  bool mask_free() const;
  void require_mask_free(const char* where) const;

  double prob(const Sequence& y) const;
  DenseDistribution densify() const;

 private:
  SpaceSpec spec_;
  std::vector<Entry> support_;
};

// Loads a target distribution from JSON:
//   { "d": int, "K": int, "support": [ { "tokens": [...], "prob": p }, ... ] }
// Rejects support points containing the mask token and bad normalization.
SparseDistribution load_target(const std::string& path,
                               StateIndex dense_cap = SpaceSpec::kDefaultDenseCap);
SparseDistribution parse_target(const std::string& json_text,
                                StateIndex dense_cap = SpaceSpec::kDefaultDenseCap);

std::string to_string(const Sequence& y);

}  // namespace maskdiff

#endif  // MASKDIFF_STATE_SPACE_HPP
