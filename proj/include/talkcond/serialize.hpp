#pragma once

// Model files are whitespace-separated text. Reals are C99 hex floats so a
// save/load round trip is exact. Grammar (one token per <...>):
//
//   model-file := "talkcond-model" "v1" model
//   model      := hmm1 | chmm2 | sphmm
//   hmm1       := "model" "hmm1" "states" <N> "dim" <D>
//                 "initial" <N reals> "trans" <N*N reals, row-major>
//                 gmm{N} "end"
//   chmm2      := "model" "chmm2" "states" <N> "dim" <D>
//                 "initial_pair" <N*N reals>
//                 "trans2" <N*N*N reals, row i*N+j holds a_ij*>
//                 gmm{N} "end"
//   sphmm      := "model" "sphmm" "alpha" <real> "grouping" <int>
//                 "acoustic" hmm1 "prosodic" hmm1 "end"
//   gmm        := "state" <index> "mixtures" <M>
//                 "weights" <M reals> "means" <M*D reals> "variances" <M*D reals>
//
//   bank-file  := "talkcond-bank" "v1" "kind" <hmm|chmm2|sphmm>
//                 "condition_set" <name> "labels" <K> <label>{K}
//                 "mfcc" <9 key value pairs> "prosody" <5 key value pairs>
//                 ("condition" <label> model){K} "end"
//
// Files carry no timestamps, so saving the same model twice gives identical
// bytes.

#include <filesystem>
#include <string>
#include <string_view>

#include "talkcond/chmm2.hpp"
#include "talkcond/classify.hpp"
#include "talkcond/hmm.hpp"
#include "talkcond/sphmm.hpp"

namespace talkcond {

std::string model_to_text(const Hmm1Model& m);
std::string model_to_text(const Chmm2Model& m);
std::string model_to_text(const SphmmModel& m);

Hmm1Model hmm_from_text(std::string_view text);
Chmm2Model chmm2_from_text(std::string_view text);
SphmmModel sphmm_from_text(std::string_view text);

std::string bank_to_text(const ModelBank& bank);
ModelBank bank_from_text(std::string_view text);

// Writes atomically (temporary file then rename).
void write_text_file(const std::filesystem::path& path, const std::string& text);
std::string read_text_file(const std::filesystem::path& path);

void save_bank(const std::filesystem::path& path, const ModelBank& bank);
ModelBank load_bank(const std::filesystem::path& path);

}  // namespace talkcond
