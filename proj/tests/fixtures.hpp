#pragma once

#include <string>

#include "gridquad/gridquad.hpp"

namespace gridquad::testing {

inline Document worked_example() {
  Document d;
  d.doc_id = "uz-0001";
  d.lang = "uz";
  d.text = "Bu o'yin interfeys dizayni juda qulay";
  d.tokens = {"Bu", "o'yin", "interfeys", "dizayni", "juda", "qulay"};
  d.sentences = {{0, 6}};
  d.pos = {"DET", "NOUN", "NOUN", "NOUN", "ADV", "ADJ"};
  d.deps = {{1, 0, "det"}, {5, 1, "nsubj"}, {3, 2, "compound"}, {1, 3, "nmod"}, {5, 4, "advmod"}};
  d.quadruples = {{{1, 2}, Span{2, 4}, {5, 6}, Sentiment::pos}};
  return d;
}

inline Document blank_document(int n, std::string id = "doc") {
  Document d;
  d.doc_id = std::move(id);
  d.lang = "und";
  for (int i = 0; i < n; ++i) d.tokens.push_back("w" + std::to_string(i));
  d.sentences = {{0, n}};
  d.pos.assign(static_cast<std::size_t>(n), "X");
  return d;
}

inline std::string data_path(const std::string& rel) { return std::string(GRIDQUAD_TEST_DATA) + "/" + rel; }

}  // namespace gridquad::testing
