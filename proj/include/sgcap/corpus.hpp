#pragma once

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "sgcap/bank.hpp"

namespace sgcap {

// Corpus text format, one sentence per line, tab-separated:
//   text <TAB> space-separated content tokens <TAB> space-separated embedding floats
// Blank lines and lines starting with '#' are skipped. With heuristic_tags the
// token column may be omitted (two columns) and tokens are derived from the text.
// Throws FormatError naming the 1-based line number.
std::vector<SentenceRecord> read_corpus(std::istream& in, bool heuristic_tags);
std::vector<SentenceRecord> read_corpus(const std::filesystem::path& path, bool heuristic_tags);
void write_corpus(std::ostream& out, std::span<const SentenceRecord> records);

// "id <TAB> text" records, used for captions, references and predictions.
using IdText = std::pair<std::string, std::string>;
std::vector<IdText> read_id_text(const std::filesystem::path& path);

// "key = value" lines; '#' starts a comment.
std::vector<std::pair<std::string, std::string>> read_key_values(const std::filesystem::path& path);

}  // namespace sgcap
