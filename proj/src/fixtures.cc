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

#include "svm/fixtures.h"

#include <charconv>
#include <sstream>

#include "svm/assembler.h"

namespace svm {
namespace internal {
const std::vector<std::pair<std::string_view, std::string_view>>& EmbeddedGadgetSources();
}  // namespace internal

namespace {

std::vector<uint8_t> ParseHexBytes(const std::string& text, const std::string& where) {
  std::vector<uint8_t> out;
  std::istringstream in(text);
  std::string tok;
  while (in >> tok) {
    unsigned value = 0;
    auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), value, 16);
    if (ec != std::errc() || ptr != tok.data() + tok.size() || value > 0xff) {
      throw std::runtime_error(where + ": bad byte '" + tok + "'");
    }
    out.push_back(static_cast<uint8_t>(value));
  }
  return out;
}

}  // namespace

GadgetFixture ParseFixture(std::string_view file_stem, std::string_view source) {
  const std::string where = "fixture " + std::string(file_stem);
  GadgetFixture g;
  // Stems look like g07_last_x.
  if (file_stem.size() < 4 || file_stem[0] != 'g' || file_stem[3] != '_') {
    throw std::runtime_error(where + ": file name must look like gNN_name");
  }
  auto [ptr, ec] = std::from_chars(file_stem.data() + 1, file_stem.data() + 3, g.id);
  if (ec != std::errc() || ptr != file_stem.data() + 3) throw std::runtime_error(where + ": bad id");
  g.name = std::string(file_stem.substr(4));
  g.source = std::string(source);

  ParseResult parsed = ParseProgram(source);
  if (!parsed.ok()) throw std::runtime_error(where + ": " + parsed.diagnostics.front().ToString());
  g.program = std::move(parsed.program);

  bool have_trigger = false, have_safe = false, have_expect = false;
  std::istringstream in(g.source);
  std::string line;
  while (std::getline(in, line)) {
    const size_t at = line.find("; @");
    if (at != 0) continue;
    std::istringstream fields(line.substr(3));
    std::string key;
    fields >> key;
    std::string rest;
    std::getline(fields, rest);
    if (key == "trigger") {
      g.trigger = ParseHexBytes(rest, where);
      have_trigger = true;
    } else if (key == "safe") {
      g.safe = ParseHexBytes(rest, where);
      have_safe = true;
    } else if (key == "expect") {
      std::istringstream e(rest);
      std::string loc, kind;
      uint32_t order = 0;
      e >> loc >> kind >> order;
      auto parsed_loc = CodeLocation::Parse(loc);
      auto parsed_kind = ViolationKindFromName(kind);
      if (!parsed_loc || !parsed_kind || order == 0) throw std::runtime_error(where + ": bad @expect line");
      if (!Resolve(g.program, *parsed_loc)) throw std::runtime_error(where + ": @expect names no instruction");
      g.expected = {*parsed_loc, order, *parsed_kind};
      have_expect = true;
    }
  }
  if (!have_trigger || !have_safe || !have_expect) {
    throw std::runtime_error(where + ": needs @trigger, @safe and @expect");
  }
  return g;
}

const std::vector<GadgetFixture>& BuiltinGadgets() {
  static const std::vector<GadgetFixture> kGadgets = [] {
    std::vector<GadgetFixture> all;
    for (const auto& [stem, source] : internal::EmbeddedGadgetSources()) all.push_back(ParseFixture(stem, source));
    return all;
  }();
  return kGadgets;
}

const GadgetFixture& BuiltinGadget(int id) {
  for (const auto& g : BuiltinGadgets()) {
    if (g.id == id) return g;
  }
  throw UnknownGadget("UNKNOWN-GADGET: no builtin gadget with id " + std::to_string(id));
}

}  // namespace svm
