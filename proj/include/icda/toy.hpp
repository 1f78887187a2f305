#ifndef ICDA_TOY_HPP
#define ICDA_TOY_HPP

#include "icda/corpus.hpp"

namespace icda {

// Bundled desk-scale corpus: 12 banking intents x 40 utterances, split
// 24/8/8 into train/validation/test. Three intent pairs share most of their
// vocabulary so filtering decisions are non-trivial. Fully deterministic.
Dataset make_toy_corpus();

// Writes train/validation/test JSONL files into a directory.
void write_toy_corpus(const std::string& dir);

}  // namespace icda

#endif  // ICDA_TOY_HPP
