// Copyright 2026 The SpecVM Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef SVM_MUTATOR_H_
#define SVM_MUTATOR_H_

#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace svm {

using Bytes = std::vector<uint8_t>;

enum class MutationOp : uint8_t { kBitFlip, kByteSet, kInsert, kDelete, kSplice };

inline constexpr int kMaxHavocStack = 8;

// Deterministic byte-string mutator. All randomness comes from the engine
// passed in, so (parent, engine state) fully determines the child.
class Mutator {
 public:
  explicit Mutator(size_t max_len) : max_len_(max_len) {}

  // Applies one operation in place. kSplice uses `partner` and degrades to
  // kInsert when the partner is empty.
  void Apply(MutationOp op, Bytes& data, std::mt19937_64& rng, std::span<const uint8_t> partner = {}) const;

  // Applies a stack of 1..kMaxHavocStack randomly chosen operations.
  Bytes Mutate(std::span<const uint8_t> parent, std::mt19937_64& rng, std::span<const uint8_t> partner = {}) const;

  size_t max_len() const { return max_len_; }

 private:
  size_t max_len_;
};

// Uniform draw in [0, n). n must be positive.
inline uint64_t Draw(std::mt19937_64& rng, uint64_t n) { return rng() % n; }

}  // namespace svm

#endif  // SVM_MUTATOR_H_
