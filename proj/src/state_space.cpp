#include "maskdiff/state_space.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

namespace maskdiff {

namespace {

constexpr double kSumTolerance = 1e-9;

std::string describe(const char* where, const std::string& detail) {
  return std::string(where) + ": " + detail;
}

}  // namespace

SpaceSpec::SpaceSpec(int length, int vocab, StateIndex dense_cap)
    : length_(length), vocab_(vocab), dense_cap_(dense_cap) {
  if (length < 1) throw DomainError("SpaceSpec: length must be >= 1");
  if (vocab < 2) throw DomainError("SpaceSpec: vocab must be >= 2 (one real token plus the mask)");
  // K^d with overflow detection; an unaddressable space is a construction error.
  StateIndex n = 1;
  const StateIndex limit = std::numeric_limits<StateIndex>::max();
  for (int i = 0; i < length; ++i) {
    if (n > limit / static_cast<StateIndex>(vocab)) {
      throw DomainError("SpaceSpec: K^d exceeds the addressable index range");
    }
    n *= static_cast<StateIndex>(vocab);
  }
  num_states_ = n;
}

void SpaceSpec::require_dense(const char* where) const {
  if (!dense_allowed()) {
    std::ostringstream msg;
    msg << where << ": K^d = " << num_states_ << " exceeds dense cap " << dense_cap_
        << "; only sampling-based paths are available";
    throw DenseCapError(msg.str());
  }
}

bool SpaceSpec::contains(const Sequence& y) const {
  if (static_cast<int>(y.size()) != length_) return false;
  for (Token t : y) {
    if (t < 1 || t > vocab_) return false;
  }
  return true;
}

void SpaceSpec::require_member(const Sequence& y, const char* where) const {
  if (!contains(y)) {
    throw DomainError(describe(where, "sequence " + to_string(y) + " is not a member of the space"));
  }
}

int num_mask(const SpaceSpec& spec, const Sequence& y) {
  spec.require_member(y, "num_mask");
  const Token mask = spec.mask_token();
  int count = 0;
  for (Token t : y) count += (t == mask);
  return count;
}

int hamming(const Sequence& y, const Sequence& y2) {
  if (y.size() != y2.size()) throw DomainError("hamming: sequence lengths differ");
  int count = 0;
  for (std::size_t i = 0; i < y.size(); ++i) count += (y[i] != y2[i]);
  return count;
}

Sequence revise(const SpaceSpec& spec, const Sequence& y,
                std::span<const int> positions, std::span<const Token> values) {
  spec.require_member(y, "revise");
  if (positions.size() != values.size()) {
    throw DomainError("revise: positions and values have different lengths");
  }
  Sequence out = y;
  for (std::size_t j = 0; j < positions.size(); ++j) {
    const int i = positions[j];
    if (i < 0 || i >= spec.length()) throw DomainError("revise: position out of range");
    const Token v = values[j];
    if (v < 1 || v > spec.vocab()) throw DomainError("revise: token out of range");
    out[static_cast<std::size_t>(i)] = v;
  }
  // Distinctness: duplicated positions would make the result order-dependent.
  for (std::size_t a = 0; a < positions.size(); ++a) {
    for (std::size_t b = a + 1; b < positions.size(); ++b) {
      if (positions[a] == positions[b]) throw DomainError("revise: duplicate position");
    }
  }
  return out;
}

StateIndex encode(const SpaceSpec& spec, const Sequence& y) {
  spec.require_member(y, "encode");
  StateIndex index = 0;
  for (Token t : y) {
    index = index * static_cast<StateIndex>(spec.vocab()) + static_cast<StateIndex>(t - 1);
  }
  return index;
}

Sequence decode(const SpaceSpec& spec, StateIndex index) {
  if (index >= spec.num_states()) throw DomainError("decode: index out of range");
  Sequence y(static_cast<std::size_t>(spec.length()));
  const StateIndex base = static_cast<StateIndex>(spec.vocab());
  for (int i = spec.length() - 1; i >= 0; --i) {
    y[static_cast<std::size_t>(i)] = static_cast<Token>(index % base) + 1;
    index /= base;
  }
  return y;
}

std::vector<int> masked_positions(const SpaceSpec& spec, const Sequence& y) {
  spec.require_member(y, "masked_positions");
  std::vector<int> positions;
  const Token mask = spec.mask_token();
  for (int i = 0; i < spec.length(); ++i) {
    if (y[static_cast<std::size_t>(i)] == mask) positions.push_back(i);
  }
  return positions;
}

DenseDistribution::DenseDistribution(const SpaceSpec& spec, std::vector<double> probs)
    : spec_(spec), probs_(std::move(probs)) {
  spec_.require_dense("DenseDistribution");
  if (probs_.size() != spec_.num_states()) {
    throw ValidationError("DenseDistribution: vector size does not match K^d");
  }
  double sum = 0.0;
  for (double p : probs_) {
    if (p < 0.0 || !std::isfinite(p)) {
      throw ValidationError("DenseDistribution: negative or non-finite entry");
    }
    sum += p;
  }
  if (std::abs(sum - 1.0) > kSumTolerance) {
    std::ostringstream msg;
    msg << "DenseDistribution: entries sum to " << sum << ", outside tolerance " << kSumTolerance;
    throw ValidationError(msg.str());
  }
  for (double& p : probs_) p /= sum;
}

SparseDistribution::SparseDistribution(const SpaceSpec& spec, std::vector<Entry> support)
    : spec_(spec), support_(std::move(support)) {
  if (support_.empty()) throw ValidationError("SparseDistribution: empty support");
  double sum = 0.0;
  for (const Entry& e : support_) {
    spec_.require_member(e.point, "SparseDistribution");
    if (e.prob <= 0.0 || !std::isfinite(e.prob)) {
      throw ValidationError("SparseDistribution: probabilities must be positive and finite");
    }
    sum += e.prob;
  }
  if (std::abs(sum - 1.0) > kSumTolerance) {
    std::ostringstream msg;
    msg << "SparseDistribution: probabilities sum to " << sum << ", outside tolerance "
        << kSumTolerance;
    throw ValidationError(msg.str());
  }
  std::sort(support_.begin(), support_.end(), [&](const Entry& a, const Entry& b) {
    return encode(spec_, a.point) < encode(spec_, b.point);
  });
  for (std::size_t i = 0; i + 1 < support_.size(); ++i) {
    if (support_[i].point == support_[i + 1].point) {
      throw ValidationError("SparseDistribution: duplicate support point " +
                            to_string(support_[i].point));
    }
  }
  for (Entry& e : support_) e.prob /= sum;
}

bool SparseDistribution::mask_free() const {
  const Token mask = spec_.mask_token();
  for (const Entry& e : support_) {
    for (Token t : e.point) {
      if (t == mask) return false;
    }
  }
  return true;
}

void SparseDistribution::require_mask_free(const char* where) const {
  if (!mask_free()) {
    throw ValidationError(describe(where, "target assigns mass to a sequence containing the mask token"));
  }
}

double SparseDistribution::prob(const Sequence& y) const {
  for (const Entry& e : support_) {
    if (e.point == y) return e.prob;
  }
  return 0.0;
}

DenseDistribution SparseDistribution::densify() const {
  spec_.require_dense("SparseDistribution::densify");
  std::vector<double> probs(spec_.num_states(), 0.0);
  for (const Entry& e : support_) probs[encode(spec_, e.point)] = e.prob;
  return DenseDistribution(spec_, std::move(probs));
}

SparseDistribution parse_target(const std::string& json_text, StateIndex dense_cap) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("target file: invalid JSON: ") + e.what());
  }
  if (!doc.contains("d") || !doc.contains("K") || !doc.contains("support")) {
    throw ValidationError("target file: expected keys d, K, support");
  }
  const SpaceSpec spec(doc["d"].get<int>(), doc["K"].get<int>(), dense_cap);
  std::vector<SparseDistribution::Entry> support;
  for (const auto& item : doc["support"]) {
    SparseDistribution::Entry entry;
    entry.point = item["tokens"].get<Sequence>();
    entry.prob = item["prob"].get<double>();
    support.push_back(std::move(entry));
  }
  SparseDistribution target(spec, std::move(support));
  target.require_mask_free("target file");
  return target;
}

SparseDistribution load_target(const std::string& path, StateIndex dense_cap) {
  std::ifstream in(path);
  if (!in) throw ConfigError("load_target: cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_target(buf.str(), dense_cap);
}

std::string to_string(const Sequence& y) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (i) out << ',';
    out << y[i];
  }
  out << ']';
  return out.str();
}

}  // namespace maskdiff
