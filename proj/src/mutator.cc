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

#include "svm/mutator.h"

#include <algorithm>

namespace svm {
namespace {

// Boundary values that tend to cross bounds checks.
constexpr uint8_t kInteresting[] = {0, 1, 0x7f, 0x80, 0xff, 16, 32, 64, 100, 127, 128, 200, 255};

}  // namespace

void Mutator::Apply(MutationOp op, Bytes& data, std::mt19937_64& rng, std::span<const uint8_t> partner) const {
  switch (op) {
    case MutationOp::kBitFlip:
      if (data.empty()) return;
      data[Draw(rng, data.size())] ^= static_cast<uint8_t>(1u << Draw(rng, 8));
      break;
    case MutationOp::kByteSet: {
      if (data.empty()) return;
      const size_t pos = Draw(rng, data.size());
      data[pos] = Draw(rng, 2) == 0 ? kInteresting[Draw(rng, std::size(kInteresting))]
                                    : static_cast<uint8_t>(Draw(rng, 256));
      break;
    }
    case MutationOp::kInsert: {
      if (data.size() >= max_len_) return;
      const size_t pos = Draw(rng, data.size() + 1);
      data.insert(data.begin() + static_cast<std::ptrdiff_t>(pos), static_cast<uint8_t>(Draw(rng, 256)));
      break;
    }
    case MutationOp::kDelete:
      if (data.empty()) return;
      data.erase(data.begin() + static_cast<std::ptrdiff_t>(Draw(rng, data.size())));
      break;
    case MutationOp::kSplice: {
      if (partner.empty()) {
        Apply(MutationOp::kInsert, data, rng);
        return;
      }
      // Prefix of this input followed by a suffix of the partner.
      const size_t cut = Draw(rng, data.size() + 1);
      const size_t from = Draw(rng, partner.size());
      data.resize(cut);
      data.insert(data.end(), partner.begin() + static_cast<std::ptrdiff_t>(from), partner.end());
      break;
    }
  }
  if (data.size() > max_len_) data.resize(max_len_);
}

Bytes Mutator::Mutate(std::span<const uint8_t> parent, std::mt19937_64& rng, std::span<const uint8_t> partner) const {
  Bytes child(parent.begin(), parent.end());
  if (child.size() > max_len_) child.resize(max_len_);
  const uint64_t ops = 1 + Draw(rng, kMaxHavocStack);
  const uint64_t choices = partner.empty() ? 4 : 5;
  for (uint64_t i = 0; i < ops; ++i) {
    Apply(static_cast<MutationOp>(Draw(rng, choices)), child, rng, partner);
  }
  return child;
}

}  // namespace svm
